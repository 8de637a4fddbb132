//! Closed-form ground-state degeneracies at half filling.

use crate::fock::Variant;
use crate::reptheory::{hook_dim, Partition};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PredictedDims {
    /// `(λ₊, dimension)` for every uniform filling.
    pub per_lambda: Vec<(usize, u128)>,
    pub total: u128,
}

/// Predicted kernel dimension of the half-filled sector for `nk` momenta.
pub fn predict_dims(variant: Variant, nk: usize) -> PredictedDims {
    let n = nk as u128;
    let per_lambda: Vec<(usize, u128)> = match variant {
        Variant::SpinlessValleyless => vec![(0, 1), (1, 1)],
        Variant::SpinlessValleyful => vec![(0, 1), (1, (n + 1) * (n + 1)), (2, 1)],
        Variant::SpinfulValleyful => {
            let a = (n + 1).pow(2) * (n + 2).pow(2) * (n + 3).pow(2) / 36;
            let b = (n + 1).pow(2) * (n + 2).pow(4) * (n + 3).pow(2) / 144;
            vec![(0, 1), (1, a), (2, b), (3, a), (4, 1)]
        }
    };
    let total = per_lambda.iter().map(|(_, d)| d).sum();
    PredictedDims { per_lambda, total }
}

/// The same counts from irreducible representations: `S_{(n)}` and `S_{(n,n)}` factors.
pub fn predict_dims_from_irreps(variant: Variant, nk: usize) -> PredictedDims {
    let row =
        |d: usize, rows: usize| hook_dim(&Partition::new(vec![nk; rows]).expect("rectangle"), d);
    let per_lambda: Vec<(usize, u128)> = match variant {
        Variant::SpinlessValleyless => vec![(0, 1), (1, 1)],
        Variant::SpinlessValleyful => vec![(0, 1), (1, row(2, 1) * row(2, 1)), (2, 1)],
        Variant::SpinfulValleyful => vec![
            (0, 1),
            (1, row(4, 1) * row(4, 3)),
            (2, row(4, 2) * row(4, 2)),
            (3, row(4, 3) * row(4, 1)),
            (4, 1),
        ],
    };
    let total = per_lambda.iter().map(|(_, d)| d).sum();
    PredictedDims { per_lambda, total }
}
