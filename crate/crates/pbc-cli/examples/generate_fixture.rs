//! Regenerates `data/nonstationary_2000.csv`, the bundled series used by the
//! CLI tests and the README walkthrough.
//!
//! The series is autoregressive with a changepoint: the first 1000 points
//! follow `y[t] = 0.9 y[t-1] - 0.2 y[t-7] + e`, the rest follow
//! `y[t] = -0.8 y[t-1] + 0.3 y[t-7] + e`, with e ~ N(0, 0.1). Both regimes
//! occupy the same value range, so a single model cannot satisfy both lag
//! relations at once — exactly the situation clustered models are for.

use std::path::Path;

use chrono::{TimeZone, Utc};
use pbc::pipeline::{save_series_csv, SeriesFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const N: usize = 2000;
const CHANGEPOINT: usize = 1000;
const NOISE_STD: f64 = 0.1;
const SEED: u64 = 20200101;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut values = Vec::with_capacity(N);
    for t in 0..N {
        let noise: f64 = rng.sample::<f64, _>(StandardNormal) * NOISE_STD;
        let value = if t < 7 {
            noise
        } else {
            let lag1 = values[t - 1];
            let lag7 = values[t - 7];
            if t < CHANGEPOINT {
                0.9 * lag1 - 0.2 * lag7 + noise
            } else {
                -0.8 * lag1 + 0.3 * lag7 + noise
            }
        };
        values.push(value);
    }

    let timestamps = (0..N)
        .map(|t| {
            Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap()
                + chrono::Duration::days(t as i64)
        })
        .collect();
    let frame = SeriesFrame::new("nonstationary".to_string(), timestamps, values).unwrap();

    let out = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/nonstationary_2000.csv");
    std::fs::create_dir_all(out.parent().unwrap()).unwrap();
    save_series_csv(&out, &frame).unwrap();
    println!("wrote {} ({} points)", out.display(), frame.len());
}
