//! Orthogonal Procrustes alignment and the distance
//! `d_G(X, Y) = min_{PᵀP=I} (1/n)·‖C·X − C·Y·P‖²_F`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numerics::svd_small;

/// Minimiser of the Procrustes objective, mapping `Y` onto `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    /// Orthogonal `d × d`; reflections allowed.
    pub rotation: Matrix,
    /// `1.0` for the unscaled alignment.
    pub scale: f64,
    /// `(1/n)·‖C·X − s·C·Y·P‖²_F`, clamped at zero.
    pub residual: f64,
    pub x_mean: Vec<f64>,
    pub y_mean: Vec<f64>,
    /// Singular values of `(C·Y)ᵀ(C·X)`, descending.
    pub singular_values: Vec<f64>,
}

impl AlignmentResult {
    /// Maps rows of a `Y`-frame configuration into the `X` frame:
    /// `(y − ȳ)·s·P + x̄`.
    pub fn apply(&self, y: &Matrix) -> Result<Matrix> {
        if y.cols() != self.rotation.rows() {
            return Err(Error::ShapeMismatch(format!(
                "alignment is {}-dimensional, configuration has {} columns",
                self.rotation.rows(),
                y.cols()
            )));
        }
        let neg: Vec<f64> = self.y_mean.iter().map(|m| -m).collect();
        Ok(y
            .translated(&neg)
            .matmul(&self.rotation)?
            .scaled(self.scale)
            .translated(&self.x_mean))
    }
}

fn check_shapes(x: &Matrix, y: &Matrix) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::ShapeMismatch(format!(
            "configurations are {}x{} and {}x{}",
            x.rows(),
            x.cols(),
            y.rows(),
            y.cols()
        )));
    }
    if x.rows() == 0 {
        return Err(Error::invalid("configurations must have at least one row"));
    }
    Ok(())
}

fn residual(cx: &Matrix, cy: &Matrix, rotation: &Matrix, scale: f64) -> Result<f64> {
    let fitted = cy.matmul(rotation)?.scaled(scale);
    Ok((cx.sub(&fitted)?.frobenius_sq() / cx.rows() as f64).max(0.0))
}

fn align(x: &Matrix, y: &Matrix) -> Result<(Matrix, Matrix, Matrix, Vec<f64>)> {
    check_shapes(x, y)?;
    let cx = x.centered();
    let cy = y.centered();
    let svd = svd_small(&cy.t_matmul(&cx)?)?;
    let rotation = svd.u.matmul(&svd.v.transpose())?;
    Ok((cx, cy, rotation, svd.singular_values))
}

/// Best orthogonal `P` with `C·Y·P ≈ C·X`, from the SVD of `(C·Y)ᵀ(C·X)`.
pub fn procrustes_align(x: &Matrix, y: &Matrix) -> Result<AlignmentResult> {
    let (cx, cy, rotation, singular_values) = align(x, y)?;
    Ok(AlignmentResult {
        residual: residual(&cx, &cy, &rotation, 1.0)?,
        rotation,
        scale: 1.0,
        x_mean: x.column_means(),
        y_mean: y.column_means(),
        singular_values,
    })
}

/// The Procrustes distance; the minimising `P` acts on `y`.
pub fn d_g(x: &Matrix, y: &Matrix) -> Result<f64> {
    Ok(procrustes_align(x, y)?.residual)
}

/// `(1/n)·‖C·X‖²_F`, which equals `d_g(X, 0)`.
pub fn centered_variance(x: &Matrix) -> f64 {
    if x.rows() == 0 {
        return 0.0;
    }
    x.centered().frobenius_sq() / x.rows() as f64
}

/// Procrustes with an extra nonnegative scale `s = Σσ_i / ‖C·Y‖²_F`.
pub fn scaled_procrustes(x: &Matrix, y: &Matrix) -> Result<AlignmentResult> {
    let (cx, cy, rotation, singular_values) = align(x, y)?;
    let denom = cy.frobenius_sq();
    let magnitude = y.max_abs();
    // Rounding in the mean leaves ~ε·|y| per entry for a constant column.
    if !(denom > (1e-13 * magnitude).powi(2) * y.rows() as f64 * y.cols() as f64) || denom == 0.0 {
        return Err(Error::DegenerateReference);
    }
    let scale = singular_values.iter().sum::<f64>() / denom;
    Ok(AlignmentResult {
        residual: residual(&cx, &cy, &rotation, scale)?,
        rotation,
        scale,
        x_mean: x.column_means(),
        y_mean: y.column_means(),
        singular_values,
    })
}
