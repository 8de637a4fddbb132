//! Fermionic Fock space over grid momenta, chiral sectors and flavors.
//!
//! Modes are ordered k-major, then chiral sector (`+` before `-`), then
//! flavor. A basis state `|S⟩` is `f†_{s1} f†_{s2} ⋯ |vac⟩` with
//! `s1 < s2 < ⋯`, stored as a `u64` bit pattern.

use crate::lattice::MomentumGrid;
use crate::linalg::{unitarity_defect, CMat};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Entries below this magnitude are not stored.
pub const SPARSE_DROP: f64 = 1e-15;
/// Fixed-particle sectors larger than this are never enumerated.
pub const MAX_SECTOR_DIM: u64 = 20_000_000;
/// Full Fock spaces are only materialized up to this many modes.
pub const MAX_FULL_MODES: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("{0} modes exceed the 64-mode limit")]
    TooManyModes(usize),
    #[error("sector dimension {0} is too large to enumerate")]
    SectorTooLarge(u64),
    #[error("particle count {particles} is invalid for {modes} modes")]
    InvalidParticleCount { particles: usize, modes: usize },
    #[error("-k for grid index {0} is not on the grid")]
    NotInversionClosed(usize),
    #[error("operation is not available for the {0} variant")]
    VariantUnsupported(Variant),
    #[error("matrix is not unitary (defect {0:e})")]
    NotUnitary(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    SpinlessValleyless,
    SpinlessValleyful,
    SpinfulValleyful,
}

impl Variant {
    /// Occupied flavors per chiral sector and momentum.
    pub fn nocc(&self) -> usize {
        match self {
            Variant::SpinlessValleyless => 1,
            Variant::SpinlessValleyful => 2,
            Variant::SpinfulValleyful => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::SpinlessValleyless => "SpinlessValleyless",
            Variant::SpinlessValleyful => "SpinlessValleyful",
            Variant::SpinfulValleyful => "SpinfulValleyful",
        }
    }

    pub fn all() -> [Variant; 3] {
        [
            Variant::SpinlessValleyless,
            Variant::SpinlessValleyful,
            Variant::SpinfulValleyful,
        ]
    }

    /// Physical label of flavor `f` in a chiral sector: band, valley, spin.
    pub fn flavor_label(&self, chir: Chirality, f: usize) -> String {
        let (p, m) = ("+", "-");
        match (self, chir) {
            (Variant::SpinlessValleyless, Chirality::Plus) => "(+)".into(),
            (Variant::SpinlessValleyless, Chirality::Minus) => "(-)".into(),
            (Variant::SpinlessValleyful, Chirality::Plus) => ["(+,+)", "(-,-)"][f].into(),
            (Variant::SpinlessValleyful, Chirality::Minus) => ["(+,-)", "(-,+)"][f].into(),
            (Variant::SpinfulValleyful, c) => {
                let spin = if f % 2 == 0 { "up" } else { "down" };
                let (band, valley) = match (c, f / 2) {
                    (Chirality::Plus, 0) => (p, p),
                    (Chirality::Plus, _) => (m, m),
                    (Chirality::Minus, 0) => (p, m),
                    (Chirality::Minus, _) => (m, p),
                };
                format!("({band},{valley},{spin})")
            }
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "spinlessvalleyless" | "spinless" => Ok(Variant::SpinlessValleyless),
            "spinlessvalleyful" | "valleyful" => Ok(Variant::SpinlessValleyful),
            "spinfulvalleyful" | "spinful" => Ok(Variant::SpinfulValleyful),
            _ => Err(format!("unknown variant '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Chirality {
    Plus,
    Minus,
}

impl Chirality {
    pub fn index(&self) -> usize {
        match self {
            Chirality::Plus => 0,
            Chirality::Minus => 1,
        }
    }

    pub fn both() -> [Chirality; 2] {
        [Chirality::Plus, Chirality::Minus]
    }
}

/// Mode numbering for a variant on `nk` momenta.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeLayout {
    pub variant: Variant,
    pub nk: usize,
}

impl ModeLayout {
    pub fn new(variant: Variant, nk: usize) -> Result<Self, FockError> {
        let l = ModeLayout { variant, nk };
        if l.n_modes() > 64 {
            return Err(FockError::TooManyModes(l.n_modes()));
        }
        Ok(l)
    }

    pub fn nocc(&self) -> usize {
        self.variant.nocc()
    }

    pub fn modes_per_k(&self) -> usize {
        2 * self.nocc()
    }

    pub fn n_modes(&self) -> usize {
        self.nk * self.modes_per_k()
    }

    pub fn mode(&self, k: usize, chir: Chirality, flavor: usize) -> usize {
        k * self.modes_per_k() + chir.index() * self.nocc() + flavor
    }

    /// Inverse of [`ModeLayout::mode`].
    pub fn decode(&self, mode: usize) -> (usize, Chirality, usize) {
        let k = mode / self.modes_per_k();
        let r = mode % self.modes_per_k();
        let chir = if r < self.nocc() {
            Chirality::Plus
        } else {
            Chirality::Minus
        };
        (k, chir, r % self.nocc())
    }

    /// Bit mask of one chiral sector at momentum `k`.
    pub fn sector_mask(&self, k: usize, chir: Chirality) -> u64 {
        let base = self.mode(k, chir, 0);
        (((1u128 << self.nocc()) - 1) as u64) << base
    }

    /// Occupation `n_{±,k}` of a basis pattern.
    pub fn count(&self, pattern: u64, k: usize, chir: Chirality) -> usize {
        (pattern & self.sector_mask(k, chir)).count_ones() as usize
    }

    pub fn chirality_mask(&self, chir: Chirality) -> u64 {
        (0..self.nk).fold(0, |acc, k| acc | self.sector_mask(k, chir))
    }
}

fn binomial_table() -> Vec<[u64; 65]> {
    let mut t = vec![[0u64; 65]; 65];
    for n in 0..65 {
        t[n][0] = 1;
        for r in 1..=n {
            t[n][r] = t[n - 1][r - 1].saturating_add(if r < n { t[n - 1][r] } else { 0 });
        }
    }
    t
}

pub fn binomial(n: usize, r: usize) -> u64 {
    if r > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc.min(u64::MAX as u128) as u64
}

/// `(-1)^{number of occupied modes below `mode`}`.
#[inline]
pub fn parity_below(pattern: u64, mode: usize) -> f64 {
    let mask = if mode == 0 { 0 } else { (1u64 << mode) - 1 };
    if (pattern & mask).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
pub fn create(pattern: u64, mode: usize) -> Option<(u64, f64)> {
    let bit = 1u64 << mode;
    if pattern & bit != 0 {
        return None;
    }
    Some((pattern | bit, parity_below(pattern, mode)))
}

#[inline]
pub fn annihilate(pattern: u64, mode: usize) -> Option<(u64, f64)> {
    let bit = 1u64 << mode;
    if pattern & bit == 0 {
        return None;
    }
    Some((pattern & !bit, parity_below(pattern, mode)))
}

/// `f†_a f_b` on a basis pattern.
#[inline]
pub fn hop(pattern: u64, a: usize, b: usize) -> Option<(u64, f64)> {
    let (p1, s1) = annihilate(pattern, b)?;
    let (p2, s2) = create(p1, a)?;
    Some((p2, s1 * s2))
}

/// A basis of fixed particle number, or the whole Fock space.
#[derive(Debug, Clone)]
pub struct FockSector {
    pub layout: ModeLayout,
    pub particles: Option<usize>,
    basis: Vec<u64>,
    binom: Vec<[u64; 65]>,
}

impl PartialEq for FockSector {
    fn eq(&self, o: &Self) -> bool {
        self.layout == o.layout && self.particles == o.particles
    }
}

impl FockSector {
    /// All states with `particles` fermions, in increasing bit-pattern order.
    pub fn new(layout: ModeLayout, particles: usize) -> Result<Self, FockError> {
        let m = layout.n_modes();
        if m > 64 {
            return Err(FockError::TooManyModes(m));
        }
        if particles > m {
            return Err(FockError::InvalidParticleCount {
                particles,
                modes: m,
            });
        }
        let dim = binomial(m, particles);
        if dim > MAX_SECTOR_DIM {
            return Err(FockError::SectorTooLarge(dim));
        }
        let mut basis = Vec::with_capacity(dim as usize);
        if particles == 0 {
            basis.push(0);
        } else {
            // Gosper's hack walks fixed-popcount patterns in increasing order
            let mut v: u64 = if particles == 64 {
                u64::MAX
            } else {
                (1u64 << particles) - 1
            };
            let limit = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
            loop {
                basis.push(v);
                if basis.len() as u64 == dim {
                    break;
                }
                let c = v & v.wrapping_neg();
                let r = v.wrapping_add(c);
                v = (((r ^ v) >> 2) / c) | r;
                if v > limit {
                    break;
                }
            }
        }
        Ok(FockSector {
            layout,
            particles: Some(particles),
            basis,
            binom: binomial_table(),
        })
    }

    /// The half-filled sector `N = Nocc · Nk`.
    pub fn half_filled(layout: ModeLayout) -> Result<Self, FockError> {
        Self::new(layout, layout.nocc() * layout.nk)
    }

    /// The full Fock space, indexed by bit pattern.
    pub fn full(layout: ModeLayout) -> Result<Self, FockError> {
        let m = layout.n_modes();
        if m > MAX_FULL_MODES {
            return Err(FockError::SectorTooLarge(1u64 << m.min(63)));
        }
        Ok(FockSector {
            layout,
            particles: None,
            basis: (0..(1u64 << m)).collect(),
            binom: binomial_table(),
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[u64] {
        &self.basis
    }

    pub fn pattern(&self, idx: usize) -> u64 {
        self.basis[idx]
    }

    /// Position of `pattern` in this basis.
    #[inline]
    pub fn index_of(&self, pattern: u64) -> Option<usize> {
        match self.particles {
            None => {
                let idx = pattern as usize;
                (idx < self.basis.len()).then_some(idx)
            }
            Some(n) => {
                if pattern.count_ones() as usize != n
                    || (self.layout.n_modes() < 64 && pattern >> self.layout.n_modes() != 0)
                {
                    return None;
                }
                let mut rank = 0u64;
                let mut p = pattern;
                let mut t = 1;
                while p != 0 {
                    let pos = p.trailing_zeros() as usize;
                    rank += self.binom[pos][t];
                    t += 1;
                    p &= p - 1;
                }
                Some(rank as usize)
            }
        }
    }

    /// Sector with `delta` more particles (the same space when this is the full space).
    pub fn shifted(&self, delta: isize) -> Result<Self, FockError> {
        match self.particles {
            None => Ok(self.clone()),
            Some(n) => {
                let target = n as isize + delta;
                if target < 0 {
                    return Err(FockError::InvalidParticleCount {
                        particles: 0,
                        modes: self.layout.n_modes(),
                    });
                }
                Self::new(self.layout, target as usize)
            }
        }
    }
}

/// Complex sparse matrix in CSR layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl SparseOperator {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseOperator {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: vec![],
            values: vec![],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(
            n,
            n,
            (0..n).map(|i| (i, i, Complex64::new(1.0, 0.0))).collect(),
        )
    }

    /// Build from `(row, col, value)`; duplicates are summed and negligible entries dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut trip: Vec<(usize, usize, Complex64)>,
    ) -> Self {
        trip.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(trip.len());
        let mut rows = Vec::with_capacity(trip.len());
        let mut i = 0;
        while i < trip.len() {
            let (r, c, mut v) = trip[i];
            let mut j = i + 1;
            while j < trip.len() && trip[j].0 == r && trip[j].1 == c {
                v += trip[j].2;
                j += 1;
            }
            if v.norm() >= SPARSE_DROP {
                rows.push(r);
                indices.push(c);
                values.push(v);
            }
            i = j;
        }
        for &r in &rows {
            indptr[r + 1] += 1;
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        SparseOperator {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |p| (r, self.indices[p], self.values[p]))
        })
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                (self.indptr[r]..self.indptr[r + 1])
                    .map(|p| self.values[p] * x[self.indices[p]])
                    .sum()
            })
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect(),
        )
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_triplets(
            self.nrows,
            self.ncols,
            self.triplets().map(|(r, c, v)| (r, c, v * s)).collect(),
        )
    }

    /// `self + s · other`.
    pub fn add_scaled(&self, other: &Self, s: Complex64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t: Vec<_> = self.triplets().collect();
        t.extend(other.triplets().map(|(r, c, v)| (r, c, v * s)));
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(other, Complex64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(other, Complex64::new(-1.0, 0.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut trip = Vec::new();
        let mut acc = vec![Complex64::new(0.0, 0.0); other.ncols];
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.nrows {
            for p in self.indptr[r]..self.indptr[r + 1] {
                let (mid, v) = (self.indices[p], self.values[p]);
                for q in other.indptr[mid]..other.indptr[mid + 1] {
                    let c = other.indices[q];
                    if acc[c] == Complex64::new(0.0, 0.0) {
                        touched.push(c);
                    }
                    acc[c] += v * other.values[q];
                }
            }
            for &c in &touched {
                trip.push((r, c, acc[c]));
                acc[c] = Complex64::new(0.0, 0.0);
            }
            touched.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, trip)
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.mul(other).sub(&other.mul(self))
    }

    /// `{A, B} = AB + BA`.
    pub fn anticommutator(&self, other: &Self) -> Self {
        self.mul(other).add(&other.mul(self))
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise difference to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }

    /// Upper bound `sqrt(|A|_1 |A|_∞)` on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        let mut row = vec![0.0; self.nrows];
        let mut col = vec![0.0; self.ncols];
        for (r, c, v) in self.triplets() {
            row[r] += v.norm();
            col[c] += v.norm();
        }
        let a = row.iter().cloned().fold(0.0, f64::max);
        let b = col.iter().cloned().fold(0.0, f64::max);
        (a * b).sqrt()
    }
}

/// Number-conserving one-body operator `Σ c f†_a f_b + shift`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OneBodyOp {
    pub terms: Vec<(usize, usize, Complex64)>,
    pub shift: Complex64,
}

impl OneBodyOp {
    pub fn adjoint(&self) -> Self {
        OneBodyOp {
            terms: self
                .terms
                .iter()
                .map(|&(a, b, c)| (b, a, c.conj()))
                .collect(),
            shift: self.shift.conj(),
        }
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        OneBodyOp {
            terms: self.terms.iter().map(|&(a, b, c)| (a, b, c * s)).collect(),
            shift: self.shift * s,
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        OneBodyOp {
            terms,
            shift: self.shift + other.shift,
        }
    }

    /// Matrix on a number-conserving sector.
    pub fn to_sparse(&self, sector: &FockSector) -> SparseOperator {
        let mut trip = Vec::new();
        for (col, &p) in sector.basis().iter().enumerate() {
            if self.shift != Complex64::new(0.0, 0.0) {
                trip.push((col, col, self.shift));
            }
            for &(a, b, c) in &self.terms {
                if let Some((q, s)) = hop(p, a, b) {
                    let row = sector
                        .index_of(q)
                        .expect("one-body operators conserve particle number");
                    trip.push((row, col, c * s));
                }
            }
        }
        SparseOperator::from_triplets(sector.dim(), sector.dim(), trip)
    }

    /// `y += op · x` for dense sector vectors; zero entries of `x` are skipped.
    pub fn apply_into(&self, sector: &FockSector, x: &[Complex64], y: &mut [Complex64]) {
        for (col, &xv) in x.iter().enumerate() {
            if xv == Complex64::new(0.0, 0.0) {
                continue;
            }
            let p = sector.pattern(col);
            y[col] += self.shift * xv;
            for &(a, b, c) in &self.terms {
                if let Some((q, s)) = hop(p, a, b) {
                    let row = sector
                        .index_of(q)
                        .expect("one-body operators conserve particle number");
                    y[row] += c * s * xv;
                }
            }
        }
    }

    pub fn apply(&self, sector: &FockSector, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
        self.apply_into(sector, x, &mut y);
        y
    }

    /// Action on a sparse state.
    pub fn apply_state(&self, x: &SparseState) -> SparseState {
        let mut y = SparseState::new();
        for (&p, &xv) in x {
            if self.shift != Complex64::new(0.0, 0.0) {
                *y.entry(p).or_default() += self.shift * xv;
            }
            for &(a, b, c) in &self.terms {
                if let Some((q, s)) = hop(p, a, b) {
                    *y.entry(q).or_default() += c * s * xv;
                }
            }
        }
        y
    }
}

/// State as an ordered map from bit pattern to amplitude.
pub type SparseState = BTreeMap<u64, Complex64>;

pub fn vacuum() -> SparseState {
    let mut s = SparseState::new();
    s.insert(0, Complex64::new(1.0, 0.0));
    s
}

/// Apply `Σ_j c_j f†_{m_j}` to a sparse state.
pub fn apply_creation_combination(
    state: &SparseState,
    combo: &[(usize, Complex64)],
) -> SparseState {
    let mut out = SparseState::new();
    for (&p, &amp) in state {
        for &(mode, c) in combo {
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            if let Some((q, s)) = create(p, mode) {
                *out.entry(q).or_default() += amp * c * s;
            }
        }
    }
    out.retain(|_, v| v.norm() >= SPARSE_DROP);
    out
}

/// Dense coordinates of a sparse state in `sector`; amplitudes outside the sector are an error.
pub fn state_to_vector(state: &SparseState, sector: &FockSector) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); sector.dim()];
    for (&p, &a) in state {
        let idx = sector.index_of(p).expect("state lies in the sector");
        v[idx] += a;
    }
    v
}

/// `Ĉ_{±,k,k'} = Σ_flavors f†_{±,k} f_{±,k'}`.
pub fn transfer_op(layout: &ModeLayout, chir: Chirality, k: usize, kp: usize) -> OneBodyOp {
    let terms = (0..layout.nocc())
        .map(|f| {
            (
                layout.mode(k, chir, f),
                layout.mode(kp, chir, f),
                Complex64::new(1.0, 0.0),
            )
        })
        .collect();
    OneBodyOp {
        terms,
        shift: Complex64::new(0.0, 0.0),
    }
}

pub fn chiral_transfer(
    sector: &FockSector,
    chir: Chirality,
    k: usize,
    kp: usize,
) -> SparseOperator {
    transfer_op(&sector.layout, chir, k, kp).to_sparse(sector)
}

pub fn number_op(layout: &ModeLayout, chir: Chirality, k: usize) -> OneBodyOp {
    transfer_op(layout, chir, k, k)
}

/// `𝒩_k = n_{+,k} + n_{-,-k}`.
pub fn script_n_op(
    layout: &ModeLayout,
    grid: &MomentumGrid,
    k: usize,
) -> Result<OneBodyOp, FockError> {
    let neg = grid
        .locate(&(-grid.points[k]))
        .ok_or(FockError::NotInversionClosed(k))?;
    Ok(number_op(layout, Chirality::Plus, k).plus(&number_op(layout, Chirality::Minus, neg)))
}

pub fn script_n(
    sector: &FockSector,
    grid: &MomentumGrid,
    k: usize,
) -> Result<SparseOperator, FockError> {
    Ok(script_n_op(&sector.layout, grid, k)?.to_sparse(sector))
}

/// `f†_mode` from `sector` into the sector with one more particle.
pub fn creation(sector: &FockSector, mode: usize) -> Result<SparseOperator, FockError> {
    let target = sector.shifted(1)?;
    let mut trip = Vec::new();
    for (col, &p) in sector.basis().iter().enumerate() {
        if let Some((q, s)) = create(p, mode) {
            if let Some(row) = target.index_of(q) {
                trip.push((row, col, Complex64::new(s, 0.0)));
            }
        }
    }
    Ok(SparseOperator::from_triplets(
        target.dim(),
        sector.dim(),
        trip,
    ))
}

/// `f_mode` from `sector` into the sector with one fewer particle.
pub fn annihilation(sector: &FockSector, mode: usize) -> Result<SparseOperator, FockError> {
    let target = sector.shifted(-1)?;
    let mut trip = Vec::new();
    for (col, &p) in sector.basis().iter().enumerate() {
        if let Some((q, s)) = annihilate(p, mode) {
            if let Some(row) = target.index_of(q) {
                trip.push((row, col, Complex64::new(s, 0.0)));
            }
        }
    }
    Ok(SparseOperator::from_triplets(
        target.dim(),
        sector.dim(),
        trip,
    ))
}

/// Particle–hole conjugation of the `-` sector.
///
/// Defined by `P f†_{m-} P⁻¹ = (-1)^{m+1} f_{m-}` (flavors counted from 1),
/// `P f†_{+} P⁻¹ = f†_{+}` and `P|vac⟩ = Π_k f†_{1-,k} ⋯ f†_{Nocc-,k} |vac⟩`.
/// The image of a sector is embedded in the full Fock space.
pub fn particle_hole_minus(sector: &FockSector) -> Result<(FockSector, SparseOperator), FockError> {
    let layout = sector.layout;
    if layout.variant == Variant::SpinlessValleyless {
        return Err(FockError::VariantUnsupported(layout.variant));
    }
    let full = FockSector::full(layout)?;
    let filled = layout.chirality_mask(Chirality::Minus);
    let mut trip = Vec::new();
    for (col, &p) in sector.basis().iter().enumerate() {
        let (q, s) = particle_hole_pattern(&layout, p, filled);
        trip.push((full.index_of(q).unwrap(), col, Complex64::new(s, 0.0)));
    }
    Ok((
        full.clone(),
        SparseOperator::from_triplets(full.dim(), sector.dim(), trip),
    ))
}

fn particle_hole_pattern(layout: &ModeLayout, p: u64, filled: u64) -> (u64, f64) {
    let mut state = filled;
    let mut sign = 1.0;
    // |S⟩ = f†_{s1} ⋯ f†_{sn}|vac⟩: the rightmost factor acts first
    for mode in (0..layout.n_modes()).rev() {
        if p >> mode & 1 == 0 {
            continue;
        }
        let (_, chir, flavor) = layout.decode(mode);
        let (q, s) = match chir {
            Chirality::Plus => create(state, mode).expect("plus modes start empty"),
            Chirality::Minus => {
                let (q, s) = annihilate(state, mode).expect("minus modes start filled");
                (q, if flavor % 2 == 0 { s } else { -s })
            }
        };
        state = q;
        sign *= s;
    }
    (state, sign)
}

/// Many-body action of the flavor rotation `f†_{m,k} ↦ Σ_n f†_{n,k} U_{nm}` on one chiral sector.
pub fn rotate_sector(
    sector: &FockSector,
    u: &CMat,
    chir: Chirality,
) -> Result<SparseOperator, FockError> {
    let layout = sector.layout;
    let nocc = layout.nocc();
    if u.nrows() != nocc || u.ncols() != nocc {
        return Err(FockError::DimensionMismatch {
            expected: nocc,
            got: u.nrows(),
        });
    }
    let defect = unitarity_defect(u);
    if defect > 1e-12 {
        return Err(FockError::NotUnitary(defect));
    }
    let mut trip = Vec::new();
    for (col, &p) in sector.basis().iter().enumerate() {
        let mut state = vacuum();
        for mode in (0..layout.n_modes()).rev() {
            if p >> mode & 1 == 0 {
                continue;
            }
            let (k, c, f) = layout.decode(mode);
            let combo: Vec<(usize, Complex64)> = if c == chir {
                (0..nocc)
                    .map(|n| (layout.mode(k, chir, n), u[(n, f)]))
                    .collect()
            } else {
                vec![(mode, Complex64::new(1.0, 0.0))]
            };
            state = apply_creation_combination(&state, &combo);
        }
        for (q, a) in state {
            let row = sector
                .index_of(q)
                .expect("rotations conserve particle number");
            trip.push((row, col, a));
        }
    }
    Ok(SparseOperator::from_triplets(
        sector.dim(),
        sector.dim(),
        trip,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(v: Variant, nk: usize) -> ModeLayout {
        ModeLayout::new(v, nk).unwrap()
    }

    #[test]
    fn sector_ranking_roundtrip() {
        let s = FockSector::new(layout(Variant::SpinlessValleyful, 2), 4).unwrap();
        assert_eq!(s.dim(), 70);
        for (i, &p) in s.basis().iter().enumerate() {
            assert_eq!(s.index_of(p), Some(i));
        }
        assert!(s.basis().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn mode_layout_order() {
        let l = layout(Variant::SpinfulValleyful, 2);
        assert_eq!(l.n_modes(), 16);
        assert_eq!(l.mode(1, Chirality::Minus, 2), 8 + 4 + 2);
        assert_eq!(l.decode(14), (1, Chirality::Minus, 2));
        assert_eq!(
            Variant::SpinfulValleyful.flavor_label(Chirality::Minus, 2),
            "(-,+,up)"
        );
    }

    #[test]
    fn too_many_modes() {
        assert_eq!(
            ModeLayout::new(Variant::SpinfulValleyful, 9).unwrap_err(),
            FockError::TooManyModes(72)
        );
    }

    #[test]
    fn creation_sign_counts_lower_modes() {
        assert_eq!(create(0b101, 1), Some((0b111, -1.0)));
        assert_eq!(create(0b101, 3), Some((0b1101, 1.0)));
        assert_eq!(create(0b101, 0), None);
    }

    #[test]
    fn csr_drops_small_entries() {
        let op = SparseOperator::from_triplets(
            2,
            2,
            vec![
                (0, 0, Complex64::new(1e-16, 0.0)),
                (1, 0, Complex64::new(1.0, 0.0)),
                (1, 0, Complex64::new(-1.0, 0.0)),
            ],
        );
        assert_eq!(op.nnz(), 0);
    }

    #[test]
    fn spinless_half_filled_single_k() {
        let s = FockSector::half_filled(layout(Variant::SpinlessValleyless, 1)).unwrap();
        assert_eq!(s.basis(), &[0b01, 0b10]);
    }

    #[test]
    fn particle_hole_needs_flavors() {
        let s = FockSector::full(layout(Variant::SpinlessValleyless, 1)).unwrap();
        assert!(matches!(
            particle_hole_minus(&s),
            Err(FockError::VariantUnsupported(_))
        ));
    }

    #[test]
    fn rotate_rejects_non_unitary() {
        let s = FockSector::half_filled(layout(Variant::SpinlessValleyful, 1)).unwrap();
        let u = CMat::from_element(2, 2, Complex64::new(1.0, 0.0));
        assert!(matches!(
            rotate_sector(&s, &u, Chirality::Plus),
            Err(FockError::NotUnitary(_))
        ));
    }
}
