//! Global scale `κ` of the edge-length readout: a per-graph fit against
//! known coordinates, and a power law `κ(n) = a·n^b` across graph sizes.
//!
//! Every recovered coordinate is homogeneous of degree one in `κ`, so a
//! single run with `κ = 1` followed by a scaled Procrustes fit finds the
//! exact minimiser of the alignment loss over `κ`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::procrustes::scaled_procrustes;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum KappaModel {
    Fixed { kappa: f64 },
    /// `κ(n) = a·n^b`, `a > 0`.
    PowerLaw { a: f64, b: f64 },
}

impl Default for KappaModel {
    fn default() -> Self {
        KappaModel::Fixed { kappa: 1.0 }
    }
}

impl KappaModel {
    pub fn fixed(kappa: f64) -> Result<Self> {
        let model = KappaModel::Fixed { kappa };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            KappaModel::Fixed { kappa } => kappa > 0.0 && kappa.is_finite(),
            KappaModel::PowerLaw { a, b } => a > 0.0 && a.is_finite() && b.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("kappa must be positive"))
        }
    }

    pub fn eval(&self, n: usize) -> f64 {
        match *self {
            KappaModel::Fixed { kappa } => kappa,
            KappaModel::PowerLaw { a, b } => a * (n as f64).powf(b),
        }
    }
}

impl fmt::Display for KappaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KappaModel::Fixed { kappa } => write!(f, "kappa = {kappa}"),
            KappaModel::PowerLaw { a, b } => write!(f, "kappa(n) = {a}·n^{b}"),
        }
    }
}

/// `κ` minimising `d_G(κ·unit[train], truth)` over `κ ≥ 0` and rigid motions.
///
/// `truth_train` row `r` holds the coordinates of node `train_ids[r]`.
pub fn fit_kappa_transductive(unit: &Matrix, truth_train: &Matrix, train_ids: &[usize]) -> Result<f64> {
    if truth_train.rows() != train_ids.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} truth rows for {} training nodes",
            truth_train.rows(),
            train_ids.len()
        )));
    }
    if let Some(&bad) = train_ids.iter().find(|&&v| v >= unit.rows()) {
        return Err(Error::invalid(format!("training node {bad} out of range")));
    }
    if train_ids.len() < unit.cols() + 1 {
        return Err(Error::invalid(format!(
            "need at least {} training nodes, got {}",
            unit.cols() + 1,
            train_ids.len()
        )));
    }
    let rows = unit.select_rows(train_ids);
    let fit = scaled_procrustes(truth_train, &rows)?;
    if !(fit.scale > 0.0) {
        return Err(Error::DegenerateReference);
    }
    Ok(fit.scale)
}

/// Least-squares line through `(ln n, ln κ)`. Samples are sorted first, so
/// the result does not depend on their order.
pub fn fit_kappa_curve(samples: &[(usize, f64)]) -> Result<KappaModel> {
    if let Some(&(n, k)) = samples.iter().find(|&&(n, k)| !(k > 0.0) || !k.is_finite() || n == 0) {
        return Err(Error::invalid(format!(
            "kappa samples must have n ≥ 1 and positive kappa, got ({n}, {k})"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let distinct = sorted.windows(2).filter(|w| w[0].0 != w[1].0).count() + usize::from(!sorted.is_empty());
    if distinct < 2 {
        return Err(Error::Underdetermined(
            "power-law fit needs at least two distinct graph sizes".into(),
        ));
    }
    let pts: Vec<(f64, f64)> = sorted.iter().map(|&(n, k)| ((n as f64).ln(), k.ln())).collect();
    let len = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    let a = (my - b * mx).exp();
    let model = KappaModel::PowerLaw { a, b };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::seeded_rng;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn unit_rows(seed: u64) -> Matrix {
        let mut rng = seeded_rng(seed);
        Matrix::from_fn(20, 2, |_, _| rng.random_range(-1.0..1.0))
    }

    fn rotation(theta: f64) -> Matrix {
        Matrix::from_rows(&[[theta.cos(), theta.sin()], [-theta.sin(), theta.cos()]]).unwrap()
    }

    #[test]
    fn transductive_examples() {
        let unit = unit_rows(1);
        let ids: Vec<usize> = (0..20).collect();
        let rotated = unit.matmul(&rotation(0.7)).unwrap();
        let k = fit_kappa_transductive(&unit, &rotated.scaled(3.0), &ids).unwrap();
        assert!((k - 3.0).abs() <= 1e-9);
        assert!((fit_kappa_transductive(&unit, &unit, &ids).unwrap() - 1.0).abs() <= 1e-12);
        let shifted = unit.translated(&[5.0, -2.0]);
        assert!((fit_kappa_transductive(&unit, &shifted, &ids).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn transductive_uses_only_training_rows() {
        let unit = unit_rows(2);
        let ids = [1, 4, 9, 13, 17];
        let truth = unit.select_rows(&ids).scaled(0.25);
        let k = fit_kappa_transductive(&unit, &truth, &ids).unwrap();
        assert!((k - 0.25).abs() <= 1e-12);
        assert!(fit_kappa_transductive(&unit, &truth.select_rows(&[0, 1]), &[1, 4]).is_err());
    }

    #[test]
    fn constant_unit_rows_are_degenerate() {
        let unit = Matrix::filled(5, 2, 1.0);
        let truth = unit_rows(3).select_rows(&[0, 1, 2, 3, 4]);
        assert_eq!(
            fit_kappa_transductive(&unit, &truth, &[0, 1, 2, 3, 4]).unwrap_err(),
            Error::DegenerateReference
        );
    }

    #[test]
    fn power_law_examples() {
        let samples: Vec<(usize, f64)> = [100, 400, 2500].iter().map(|&n| (n, 2.0 / (n as f64).sqrt())).collect();
        let KappaModel::PowerLaw { a, b } = fit_kappa_curve(&samples).unwrap() else {
            panic!("expected a power law");
        };
        assert!((a - 2.0).abs() <= 1e-9 && (b + 0.5).abs() <= 1e-9);

        let KappaModel::PowerLaw { a, b } = fit_kappa_curve(&[(10, 5.0), (1000, 5.0)]).unwrap() else {
            panic!("expected a power law");
        };
        assert!((a - 5.0).abs() <= 1e-12 && b.abs() <= 1e-15);

        assert!(fit_kappa_curve(&[(10, 1.0), (20, 0.0)]).is_err());
        assert!(fit_kappa_curve(&[(10, 1.0), (20, -1.0)]).is_err());
        let err = fit_kappa_curve(&[(10, 1.0), (10, 2.0)]).unwrap_err();
        assert!(err.to_string().contains("underdetermined"));
        assert!(fit_kappa_curve(&[]).is_err());
    }

    #[test]
    fn model_evaluation() {
        assert_eq!(KappaModel::fixed(2.5).unwrap().eval(77), 2.5);
        assert!((KappaModel::PowerLaw { a: 2.0, b: -0.5 }.eval(400) - 0.1).abs() <= 1e-15);
        let err = KappaModel::fixed(0.0).unwrap_err();
        assert!(err.to_string().contains("kappa must be positive"));
    }

    proptest! {
        #[test]
        fn transductive_recovers_any_scale(seed in any::<u64>(), k0 in 0.01f64..100.0, theta in 0.0f64..6.3, flip in any::<bool>()) {
            let unit = unit_rows(seed);
            let mut q = rotation(theta);
            if flip {
                q = q.matmul(&Matrix::from_rows(&[[1.0, 0.0], [0.0, -1.0]]).unwrap()).unwrap();
            }
            let truth = unit.matmul(&q).unwrap().scaled(k0);
            let ids: Vec<usize> = (0..20).collect();
            let k = fit_kappa_transductive(&unit, &truth, &ids).unwrap();
            prop_assert!((k - k0).abs() <= 1e-9 * k0.max(1.0));
        }

        #[test]
        fn curve_fit_is_order_invariant(seed in any::<u64>(), len in 2usize..12) {
            let mut rng = seeded_rng(seed);
            let mut samples: Vec<(usize, f64)> =
                (0..len).map(|i| (100 * (i + 1) + rng.random_range(0..50), rng.random_range(0.1..3.0))).collect();
            let a = fit_kappa_curve(&samples).unwrap();
            samples.shuffle(&mut rng);
            prop_assert_eq!(fit_kappa_curve(&samples).unwrap(), a);
        }
    }
}
