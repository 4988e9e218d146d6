//! Closed-form ridge solver on the intercept-augmented design matrix.

use nalgebra::{DMatrix, DVector};

use crate::data::LabeledPoint;
use crate::error::{Error, Result};

/// Minimizes `sum (y_hat - y)^2 + lambda * ||coefficients||^2` with an
/// unpenalized intercept. Returns `[coefficients.., intercept]`.
pub(super) fn solve(points: &[LabeledPoint], lambda: f64) -> Result<Vec<f64>> {
    let n = points.len();
    let d = points[0].dimension();
    let p = d + 1;

    // A = [X | 1], so the last column carries the intercept.
    let mut design = DMatrix::zeros(n, p);
    let mut targets = DVector::zeros(n);
    for (i, point) in points.iter().enumerate() {
        for (j, &x) in point.features().iter().enumerate() {
            design[(i, j)] = x;
        }
        design[(i, d)] = 1.0;
        targets[i] = point.target();
    }

    let mut gram = design.transpose() * &design;
    for j in 0..d {
        gram[(j, j)] += lambda;
    }
    let rhs = design.transpose() * &targets;

    if let Some(chol) = gram.clone().cholesky() {
        return Ok(chol.solve(&rhs).as_slice().to_vec());
    }

    // Singular system. With lambda = 0 this is ordinary least squares and the
    // minimum-norm solution comes from the pseudoinverse of the design matrix
    // itself; with lambda > 0 we pseudo-invert the regularized gram matrix.
    let solution = if lambda == 0.0 {
        pseudo_solve(design, &targets)?
    } else {
        pseudo_solve(gram, &rhs)?
    };
    Ok(solution.as_slice().to_vec())
}

fn pseudo_solve(matrix: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = matrix.svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = max_sv * f64::EPSILON * svd.singular_values.len() as f64;
    let pinv = svd
        .pseudo_inverse(tol)
        .map_err(|e| Error::InvalidState(format!("pseudoinverse failed: {e}")))?;
    Ok(pinv * rhs)
}
