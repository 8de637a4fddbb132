//! Ground-state (kernel) solvers for the flat-band Hamiltonian.
//!
//! Three independent routes: dense diagonalization, intersection of the
//! transfer-operator kernels on uniform-filling sectors, and random Slater
//! products rotated by Haar unitaries.

use crate::fock::{
    apply_creation_combination, hop, transfer_op, vacuum, Chirality, FockSector, ModeLayout,
};
use crate::hamiltonian::FbiHamiltonian;
use crate::lattice::MomentumGrid;
use crate::linalg::{self, haar_unitary, hermitian_eigen, CMat, CVec, OrthoBasis};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

pub const DEFAULT_EIG_TOL: f64 = 1e-10;
/// Largest sector handled by dense diagonalization.
pub const DIRECT_LIMIT: usize = 4096;
/// Required ratio between the smallest retained nonzero eigenvalue and the largest "zero".
pub const GAP_RATIO: f64 = 100.0;
pub const SLATER_RANK_CUT: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("sector dimension {0} exceeds the dense limit of 4096")]
    TooLarge(usize),
    #[error("no spectral gap at the zero threshold (largest zero {zero:e}, next {next:e})")]
    AmbiguousKernel { zero: f64, next: f64 },
    #[error("subspace dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("sector is not half filled")]
    NotHalfFilled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum KernelMethod {
    Direct,
    DirectIterative,
    Characterization,
    SlaterSpan,
}

/// Orthonormal vectors supported on a subset of sector coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBasis {
    pub sector_dim: usize,
    /// Sorted sector indices carrying the coefficients.
    pub support: Vec<usize>,
    /// `support.len() × dim`, orthonormal columns.
    pub coeffs: CMat,
}

impl KernelBasis {
    pub fn dim(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn empty(sector_dim: usize) -> Self {
        KernelBasis {
            sector_dim,
            support: vec![],
            coeffs: CMat::zeros(0, 0),
        }
    }

    /// Column `j` as a dense sector vector.
    pub fn vector(&self, j: usize) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); self.sector_dim];
        for (r, &idx) in self.support.iter().enumerate() {
            v[idx] = self.coeffs[(r, j)];
        }
        v
    }

    /// Coefficients re-expressed on a larger sorted support.
    pub fn on_support(&self, support: &[usize]) -> CMat {
        let mut out = CMat::zeros(support.len(), self.dim());
        let pos: HashMap<usize, usize> = support.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        for (r, s) in self.support.iter().enumerate() {
            let row = pos[s];
            for c in 0..self.dim() {
                out[(row, c)] = self.coeffs[(r, c)];
            }
        }
        out
    }

    /// Direct sum of bases with disjoint supports.
    pub fn direct_sum(parts: &[KernelBasis], sector_dim: usize) -> Self {
        let mut support: Vec<usize> = parts
            .iter()
            .flat_map(|p| p.support.iter().cloned())
            .collect();
        support.sort_unstable();
        support.dedup();
        let total: usize = parts.iter().map(|p| p.dim()).sum();
        let mut coeffs = CMat::zeros(support.len(), total);
        let mut col = 0;
        for p in parts {
            let local = p.on_support(&support);
            coeffs
                .view_mut((0, col), (support.len(), p.dim()))
                .copy_from(&local);
            col += p.dim();
        }
        KernelBasis {
            sector_dim,
            support,
            coeffs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelResult {
    pub dim: usize,
    pub basis: KernelBasis,
    /// Largest `|H v|` over basis vectors (0 when not evaluated).
    pub residual: f64,
    pub method: KernelMethod,
    /// Kernel dimension per `λ₊` (number of `+` electrons at each momentum).
    pub per_lambda: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSplit {
    pub kernel_dim: usize,
    /// Smallest retained nonzero eigenvalue (infinite if none).
    pub gap: f64,
    pub lambda_max: f64,
}

/// Count eigenvalues below `tol · λ_max`, insisting on a clear gap above them.
pub fn split_spectrum(sorted: &[f64], tol: f64) -> Result<SpectrumSplit, KernelError> {
    split_spectrum_scaled(sorted, tol, 0.0)
}

/// As [`split_spectrum`], with the threshold measured against `max(λ_max, scale)`.
pub fn split_spectrum_scaled(
    sorted: &[f64],
    tol: f64,
    scale: f64,
) -> Result<SpectrumSplit, KernelError> {
    let lambda_max = sorted.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let reference = lambda_max.max(scale);
    if reference == 0.0 {
        return Ok(SpectrumSplit {
            kernel_dim: sorted.len(),
            gap: f64::INFINITY,
            lambda_max,
        });
    }
    let cut = tol * reference;
    let kernel_dim = sorted.iter().filter(|&&v| v < cut).count();
    let gap = sorted.get(kernel_dim).cloned().unwrap_or(f64::INFINITY);
    if kernel_dim > 0 && gap.is_finite() {
        let zero = sorted[..kernel_dim]
            .iter()
            .map(|v| v.abs())
            .fold(f64::EPSILON * reference, f64::max);
        if gap < GAP_RATIO * zero {
            return Err(KernelError::AmbiguousKernel { zero, next: gap });
        }
    }
    Ok(SpectrumSplit {
        kernel_dim,
        gap,
        lambda_max,
    })
}

/// Dense eigensolve of `H` on sectors up to 4096 states.
pub fn null_space_direct(
    h: &FbiHamiltonian,
    tol: f64,
) -> Result<(KernelResult, SpectrumSplit), KernelError> {
    let n = h.dim();
    if n > DIRECT_LIMIT {
        return Err(KernelError::TooLarge(n));
    }
    let sparse = h.assemble();
    let dense = sparse.to_dense();
    let (vals, vecs) = hermitian_eigen(&dense);
    let split = split_spectrum(&vals, tol)?;
    let coeffs = vecs.columns(0, split.kernel_dim).into_owned();
    let basis = KernelBasis {
        sector_dim: n,
        support: (0..n).collect(),
        coeffs,
    };
    let residual = (0..basis.dim())
        .map(|j| {
            let v: Vec<Complex64> = basis.coeffs.column(j).iter().cloned().collect();
            norm(&sparse.matvec(&v))
        })
        .fold(0.0, f64::max);
    let per_lambda = lambda_split(&h.sector, &basis);
    Ok((
        KernelResult {
            dim: split.kernel_dim,
            basis,
            residual,
            method: KernelMethod::Direct,
            per_lambda,
        },
        split,
    ))
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest `|H v|` over the basis, computed matrix-free.
pub fn hamiltonian_residual(h: &FbiHamiltonian, basis: &KernelBasis) -> f64 {
    let xs: Vec<Vec<Complex64>> = (0..basis.dim()).map(|j| basis.vector(j)).collect();
    h.residual_norms(&xs).into_iter().fold(0.0, f64::max)
}

/// Kernel dimension per `λ₊`, read off from the total `+` occupation of each coordinate.
///
/// The Hamiltonian conserves the `+` particle number, so projecting the kernel onto
/// each occupation block and taking ranks gives the block dimensions.
pub fn lambda_split(sector: &FockSector, basis: &KernelBasis) -> BTreeMap<usize, usize> {
    let layout = sector.layout;
    let plus = layout.chirality_mask(Chirality::Plus);
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (r, &idx) in basis.support.iter().enumerate() {
        groups
            .entry((sector.pattern(idx) & plus).count_ones() as usize)
            .or_default()
            .push(r);
    }
    let mut out = BTreeMap::new();
    for (nplus, rows) in groups {
        let sub = CMat::from_fn(rows.len(), basis.dim(), |i, j| basis.coeffs[(rows[i], j)]);
        // basis columns are orthonormal, so an absolute cut is meaningful
        let r = sub.singular_values().iter().filter(|&&x| x > 1e-6).count();
        if r > 0 {
            let key = if nplus % layout.nk == 0 {
                nplus / layout.nk
            } else {
                usize::MAX
            };
            *out.entry(key).or_insert(0) += r;
        }
    }
    out
}

/// Orthonormal basis of the projection of `basis` onto states with `λ₊·Nk` `+` electrons.
pub fn lambda_block(sector: &FockSector, basis: &KernelBasis, lambda_plus: usize) -> KernelBasis {
    let plus = sector.layout.chirality_mask(Chirality::Plus);
    let want = lambda_plus * sector.layout.nk;
    let rows: Vec<usize> = (0..basis.support.len())
        .filter(|&r| (sector.pattern(basis.support[r]) & plus).count_ones() as usize == want)
        .collect();
    if rows.is_empty() || basis.dim() == 0 {
        return KernelBasis::empty(sector.dim());
    }
    let sub = CMat::from_fn(rows.len(), basis.dim(), |i, j| basis.coeffs[(rows[i], j)]);
    let svd = sub.svd(true, false);
    let u = svd.u.expect("requested");
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-6)
        .collect();
    let coeffs = CMat::from_fn(rows.len(), keep.len(), |i, j| u[(i, keep[j])]);
    KernelBasis {
        sector_dim: sector.dim(),
        support: rows.iter().map(|&r| basis.support[r]).collect(),
        coeffs,
    }
}

/// Sector indices of states with `n_{+,k} = λ₊` and `n_{-,k} = Nocc − λ₊` at every `k`.
pub fn uniform_sector(sector: &FockSector, lambda_plus: usize) -> Vec<usize> {
    let layout = sector.layout;
    let nocc = layout.nocc();
    if lambda_plus > nocc {
        return vec![];
    }
    let plus: Vec<u64> = subsets(nocc, lambda_plus);
    let minus: Vec<u64> = subsets(nocc, nocc - lambda_plus);
    let mut patterns = vec![0u64];
    for k in 0..layout.nk {
        let mut next = Vec::with_capacity(patterns.len() * plus.len() * minus.len());
        for &p in &patterns {
            for &a in &plus {
                for &b in &minus {
                    next.push(
                        p | a << layout.mode(k, Chirality::Plus, 0)
                            | b << layout.mode(k, Chirality::Minus, 0),
                    );
                }
            }
        }
        patterns = next;
    }
    let mut idx: Vec<usize> = patterns
        .into_iter()
        .filter_map(|p| sector.index_of(p))
        .collect();
    idx.sort_unstable();
    idx
}

/// All `r`-subsets of `n` flavors as bit masks, increasing.
pub fn subsets(n: usize, r: usize) -> Vec<u64> {
    (0u64..(1u64 << n))
        .filter(|m| m.count_ones() as usize == r)
        .collect()
}

/// Ordered pairs `k ≠ k'`, nearest first.
pub fn transfer_pairs(grid: &MomentumGrid) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for k in 0..grid.len() {
        for kp in 0..grid.len() {
            if k != kp {
                pairs.push((k, kp));
            }
        }
    }
    let dist = |(k, kp): (usize, usize)| {
        let d = grid.momentum(kp) - grid.momentum(k);
        let mut best = f64::INFINITY;
        for m in -1..=1 {
            for n in -1..=1 {
                best = best.min(grid.vector(d + grid.dual_momentum(m, n)).norm());
            }
        }
        best
    };
    pairs.sort_by(|&a, &b| {
        let (da, db) = (dist(a), dist(b));
        if (da - db).abs() > 1e-9 {
            da.partial_cmp(&db).unwrap()
        } else {
            a.cmp(&b)
        }
    });
    pairs
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacterizationResult {
    pub per_lambda: Vec<(usize, KernelBasis)>,
    pub total: KernelResult,
}

/// Ground states as the common kernel of all `Ĉ_{±,k,k'}` (`k ≠ k'`) on uniform sectors.
pub fn null_space_characterization(
    sector: &FockSector,
    grid: &MomentumGrid,
) -> Result<CharacterizationResult, KernelError> {
    let layout = sector.layout;
    if sector.particles != Some(layout.nocc() * layout.nk) {
        return Err(KernelError::NotHalfFilled);
    }
    let pairs = transfer_pairs(grid);
    let mut per_lambda = Vec::new();
    for lambda in 0..=layout.nocc() {
        let support = uniform_sector(sector, lambda);
        let v = intersect_transfer_kernels(sector, &support, &pairs)?;
        let coeffs = v.map(|x| Complex64::new(x, 0.0));
        per_lambda.push((
            lambda,
            KernelBasis {
                sector_dim: sector.dim(),
                support,
                coeffs,
            },
        ));
    }
    let parts: Vec<KernelBasis> = per_lambda.iter().map(|(_, b)| b.clone()).collect();
    let basis = KernelBasis::direct_sum(&parts, sector.dim());
    let dims = per_lambda.iter().map(|(l, b)| (*l, b.dim())).collect();
    let total = KernelResult {
        dim: basis.dim(),
        basis,
        residual: 0.0,
        method: KernelMethod::Characterization,
        per_lambda: dims,
    };
    Ok(CharacterizationResult { per_lambda, total })
}

/// Orthonormal basis (support coordinates) of `∩ ker Ĉ` restricted to `support`.
fn intersect_transfer_kernels(
    sector: &FockSector,
    support: &[usize],
    pairs: &[(usize, usize)],
) -> Result<DMatrix<f64>, KernelError> {
    let layout = sector.layout;
    let s = support.len();
    let mut v = DMatrix::<f64>::identity(s, s);
    for &(k, kp) in pairs {
        for chir in Chirality::both() {
            if v.ncols() == 0 {
                return Ok(v);
            }
            let op = transfer_op(&layout, chir, k, kp);
            // Ĉ†Ĉ on the support: columns sharing an image pattern couple
            let mut images: BTreeMap<u64, Vec<(usize, f64)>> = BTreeMap::new();
            for (j, &idx) in support.iter().enumerate() {
                let p = sector.pattern(idx);
                for &(a, b, _) in &op.terms {
                    if let Some((q, sign)) = hop(p, a, b) {
                        images.entry(q).or_default().push((j, sign));
                    }
                }
            }
            if images.is_empty() {
                continue;
            }
            let r = v.ncols();
            let mut sv = DMatrix::<f64>::zeros(s, r);
            for list in images.values() {
                for &(j1, s1) in list {
                    for &(j2, s2) in list {
                        let f = s1 * s2;
                        for c in 0..r {
                            sv[(j1, c)] += f * v[(j2, c)];
                        }
                    }
                }
            }
            let gram = v.transpose() * sv;
            let (vals, vecs) = hermitian_eigen(&gram);
            // |Ĉ| <= Nocc, so a numerically vanishing Gram is measured against that scale
            let scale = (layout.nocc() * layout.nocc()) as f64;
            let split = split_spectrum_scaled(&vals, DEFAULT_EIG_TOL, scale)?;
            v = &v * vecs.columns(0, split.kernel_dim);
        }
    }
    Ok(v)
}

/// Largest principal angle between two subspaces of the same sector.
pub fn subspace_distance(a: &KernelBasis, b: &KernelBasis) -> Result<f64, KernelError> {
    if a.dim() != b.dim() {
        return Err(KernelError::DimensionMismatch(a.dim(), b.dim()));
    }
    let mut support: Vec<usize> = a.support.iter().chain(b.support.iter()).cloned().collect();
    support.sort_unstable();
    support.dedup();
    let (ma, mb) = (a.on_support(&support), b.on_support(&support));
    Ok(linalg::max_principal_sine(&ma, &mb).asin())
}

/// Span of Haar-rotated product states in the `λ₊` uniform sector.
///
/// Each sample is `Π_k [U₁∘(f†_{1+,k} ⋯ f†_{λ₊+,k})] [U₂∘(f†_{1-,k} ⋯ f†_{(Nocc−λ₊)-,k})] |vac⟩`.
pub fn slater_span(
    sector: &FockSector,
    lambda_plus: usize,
    n_samples: usize,
    seed: u64,
) -> KernelBasis {
    let layout = sector.layout;
    let nocc = layout.nocc();
    let support = uniform_sector(sector, lambda_plus);
    let pos: HashMap<usize, usize> = support.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ortho = OrthoBasis::new(support.len());
    for _ in 0..n_samples {
        let u1 = haar_unitary(nocc, &mut rng);
        let u2 = haar_unitary(nocc, &mut rng);
        let state = slater_state(&layout, lambda_plus, &u1, &u2);
        let mut v = CVec::zeros(support.len());
        for (p, a) in state {
            let idx = sector
                .index_of(p)
                .expect("product state has the sector filling");
            v[pos[&idx]] += a;
        }
        ortho.try_add(&v, SLATER_RANK_CUT);
    }
    KernelBasis {
        sector_dim: sector.dim(),
        support,
        coeffs: ortho.to_matrix(),
    }
}

/// One rotated product state as a sparse Fock vector.
pub fn slater_state(
    layout: &ModeLayout,
    lambda_plus: usize,
    u1: &CMat,
    u2: &CMat,
) -> crate::fock::SparseState {
    let nocc = layout.nocc();
    let mut factors: Vec<Vec<(usize, Complex64)>> = Vec::new();
    for k in 0..layout.nk {
        for (chir, u, count) in [
            (Chirality::Plus, u1, lambda_plus),
            (Chirality::Minus, u2, nocc - lambda_plus),
        ] {
            for m in 0..count {
                factors.push(
                    (0..nocc)
                        .map(|n| (layout.mode(k, chir, n), u[(n, m)]))
                        .collect(),
                );
            }
        }
    }
    let mut state = vacuum();
    for f in factors.iter().rev() {
        state = apply_creation_combination(&state, f);
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_kernel_is_everything() {
        let s = split_spectrum(&[0.0, 0.0, 0.0], 1e-10).unwrap();
        assert_eq!(s.kernel_dim, 3);
    }

    #[test]
    fn ambiguous_kernel_detected() {
        assert!(matches!(
            split_spectrum(&[5e-11, 2e-10, 1.0], 1e-10),
            Err(KernelError::AmbiguousKernel { .. })
        ));
        assert_eq!(
            split_spectrum(&[1e-16, 0.5, 1.0], 1e-10)
                .unwrap()
                .kernel_dim,
            1
        );
    }

    #[test]
    fn distance_rejects_mismatched_dims() {
        let a = KernelBasis {
            sector_dim: 2,
            support: vec![0, 1],
            coeffs: CMat::identity(2, 2),
        };
        let b = KernelBasis {
            sector_dim: 2,
            support: vec![0, 1],
            coeffs: CMat::identity(2, 1),
        };
        assert_eq!(
            subspace_distance(&a, &b),
            Err(KernelError::DimensionMismatch(2, 1))
        );
    }

    #[test]
    fn subsets_are_sorted() {
        assert_eq!(
            subsets(4, 2),
            vec![0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100]
        );
    }
}
