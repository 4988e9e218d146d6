//! On-disk artifacts: versioned model bundles, JSON reports, and
//! newline-delimited record files. All floats are written with full
//! round-trip precision so replaying a report reproduces exact numbers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use pbc::data::LossKind;
use pbc::learners::{RegressorSpec, TrainedModel};
use serde::{Deserialize, Serialize};

/// Format tag embedded in every artifact; loaders refuse anything else.
pub const ARTIFACT_VERSION: &str = "pbc-artifact/1";

/// Serialized cluster models plus the loss they were fitted under.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelBundle {
    pub version: String,
    pub loss: LossKind,
    /// Input dimension shared by every model.
    pub dimension: usize,
    pub models: Vec<ModelRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRecord {
    pub spec: RegressorSpec,
    pub dimension: usize,
    pub parameters: Vec<f64>,
}

impl ModelBundle {
    pub fn from_models(models: &[TrainedModel], loss: LossKind) -> Result<Self> {
        let dimension = match models.first() {
            Some(model) => model.dimension(),
            None => bail!("cannot bundle an empty model list"),
        };
        Ok(Self {
            version: ARTIFACT_VERSION.to_string(),
            loss,
            dimension,
            models: models
                .iter()
                .map(|model| ModelRecord {
                    spec: model.spec().clone(),
                    dimension: model.dimension(),
                    parameters: model.parameters().to_vec(),
                })
                .collect(),
        })
    }

    /// Reconstructs validated models; rejects records whose parameters do
    /// not match their spec and dimension.
    pub fn into_models(self) -> Result<Vec<TrainedModel>> {
        self.models
            .into_iter()
            .enumerate()
            .map(|(k, record)| {
                TrainedModel::new(record.spec, record.dimension, record.parameters)
                    .with_context(|| format!("model {k} in bundle is invalid"))
            })
            .collect()
    }
}

pub fn save_bundle(path: &Path, bundle: &ModelBundle) -> Result<()> {
    save_json(path, bundle)
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let file = File::open(path)
        .with_context(|| format!("opening model bundle {}", path.display()))?;
    let bundle: ModelBundle = serde_json::from_reader(file)
        .with_context(|| format!("parsing model bundle {}", path.display()))?;
    if bundle.version != ARTIFACT_VERSION {
        bail!(
            "model bundle {} has version {:?}, this build reads {:?}",
            path.display(),
            bundle.version,
            ARTIFACT_VERSION
        );
    }
    if bundle.models.is_empty() {
        bail!("model bundle {} contains no models", path.display());
    }
    Ok(bundle)
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut writer = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    serde_json::to_writer_pretty(&mut writer, value)
        .with_context(|| format!("writing {}", path.display()))?;
    writeln!(writer)?;
    Ok(())
}

/// Writes one JSON record per line.
pub fn save_jsonl<T, I>(path: &Path, records: I) -> Result<()>
where
    T: Serialize,
    I: IntoIterator<Item = T>,
{
    let mut writer = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    for record in records {
        serde_json::to_writer(&mut writer, &record)
            .with_context(|| format!("writing {}", path.display()))?;
        writeln!(writer)?;
    }
    Ok(())
}

/// Writes the final cluster of every point as a two-column CSV.
pub fn save_assignment_csv(path: &Path, labels: &[usize]) -> Result<()> {
    let mut writer = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    writeln!(writer, "index,cluster")?;
    for (index, cluster) in labels.iter().enumerate() {
        writeln!(writer, "{index},{cluster}")?;
    }
    Ok(())
}
