//! Young diagrams, highest-weight vectors of `(Λ^a C^d)^{⊗N}`, and the
//! bijection between uniform-filling Fock states and tensor products.

use crate::fock::{
    create, Chirality, FockSector, ModeLayout, OneBodyOp, SparseOperator, SparseState, Variant,
};
use crate::linalg::{null_space, CMat, CVec, OrthoBasis};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Tensor spaces above this dimension are refused.
pub const MAX_TENSOR_DIM: usize = 20_000;
pub const IRREP_RANK_CUT: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RepError {
    #[error("tensor space of dimension {0} exceeds 20000")]
    TooLarge(usize),
    #[error("vector is not annihilated by the raising operators (defect {0:e})")]
    NotHighestWeight(f64),
    #[error("λ₊ = {0} has no tensor-product structure for this variant")]
    UnsupportedSector(usize),
    #[error("arity {arity} is not in 1..={d}")]
    InvalidArity { arity: usize, d: usize },
    #[error("not a partition: {0:?}")]
    InvalidPartition(Vec<usize>),
}

/// Non-increasing positive parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition(Vec<usize>);

impl Partition {
    pub fn new(parts: Vec<usize>) -> Result<Self, RepError> {
        let trimmed: Vec<usize> = parts.iter().cloned().filter(|&p| p > 0).collect();
        if trimmed.len() != parts.iter().rev().skip_while(|&&p| p == 0).count()
            || trimmed.windows(2).any(|w| w[0] < w[1])
        {
            return Err(RepError::InvalidPartition(parts));
        }
        Ok(Partition(trimmed))
    }

    pub fn parts(&self) -> &[usize] {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.len()
    }

    pub fn size(&self) -> usize {
        self.0.iter().sum()
    }

    /// Conjugate partition (column lengths).
    pub fn conjugate(&self) -> Vec<usize> {
        let w = self.0.first().cloned().unwrap_or(0);
        (0..w)
            .map(|j| self.0.iter().filter(|&&r| r > j).count())
            .collect()
    }

    /// `true` when all rows have the same length.
    pub fn is_rectangular(&self) -> bool {
        self.0.windows(2).all(|w| w[0] == w[1])
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

/// Dimension of the `GL(d)` irrep `S_λ(C^d)` by the hook-content formula.
pub fn hook_dim(lambda: &Partition, d: usize) -> u128 {
    if lambda.rows() > d {
        return 0;
    }
    let conj = lambda.conjugate();
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for (i, &row) in lambda.parts().iter().enumerate() {
        for j in 0..row {
            num *= (d + j - i) as u128;
            den *= ((row - j - 1) + (conj[j] - i - 1) + 1) as u128;
        }
    }
    num / den
}

/// `λ ⊗ (1^m)`: add `m` boxes to `λ`, no two in the same row, at most `d` rows.
///
/// Results are sorted in decreasing lexicographic order.
pub fn lr_column_product(lambda: &Partition, m: usize, d: usize) -> Vec<Partition> {
    let base = lambda.parts().to_vec();
    let rows = base.len() + m;
    let mut out = Vec::new();
    for choice in combinations(rows, m) {
        let mut parts = base.clone();
        parts.resize(rows, 0);
        for &r in &choice {
            parts[r] += 1;
        }
        if parts.windows(2).any(|w| w[0] < w[1]) {
            continue;
        }
        let p = Partition::new(parts).expect("checked non-increasing");
        if p.rows() <= d {
            out.push(p);
        }
    }
    out.sort_by(|a, b| b.cmp(a));
    out.dedup();
    out
}

/// All `r`-element increasing tuples from `0..n`, lexicographic.
pub fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut Vec::new(), &mut out);
    out
}

/// `(Λ^arity C^d)^{⊗legs}` with basis `|T_1⟩ ⊗ ⋯ ⊗ |T_N⟩`, `T` increasing tuples.
///
/// `|i ∧ j⟩` stands for the un-normalized `|ij⟩ − |ji⟩`; tuples are treated as an
/// orthonormal basis of the wedge power.
#[derive(Debug, Clone)]
pub struct WedgeTensorSpace {
    pub d: usize,
    pub legs: usize,
    pub arity: usize,
    pub leg_basis: Vec<Vec<usize>>,
    raise: Vec<Vec<Option<usize>>>,
    lower: Vec<Vec<Option<usize>>>,
}

impl WedgeTensorSpace {
    pub fn new(d: usize, legs: usize, arity: usize) -> Result<Self, RepError> {
        if arity == 0 || arity > d {
            return Err(RepError::InvalidArity { arity, d });
        }
        let leg_basis = combinations(d, arity);
        let dim = (leg_basis.len() as f64).powi(legs as i32);
        if dim > MAX_TENSOR_DIM as f64 {
            return Err(RepError::TooLarge(dim as usize));
        }
        let find = |t: &Vec<usize>| leg_basis.iter().position(|u| u == t);
        let shift = |from: usize, to: usize| -> Vec<Option<usize>> {
            leg_basis
                .iter()
                .map(|t| {
                    if !t.contains(&from) || t.contains(&to) {
                        return None;
                    }
                    // replacing an index by its neighbour keeps the tuple sorted
                    let u: Vec<usize> = t.iter().map(|&x| if x == from { to } else { x }).collect();
                    find(&u)
                })
                .collect()
        };
        let raise = (0..d - 1).map(|j| shift(j + 1, j)).collect();
        let lower = (0..d - 1).map(|j| shift(j, j + 1)).collect();
        Ok(WedgeTensorSpace {
            d,
            legs,
            arity,
            leg_basis,
            raise,
            lower,
        })
    }

    pub fn leg_dim(&self) -> usize {
        self.leg_basis.len()
    }

    pub fn dim(&self) -> usize {
        self.leg_dim().pow(self.legs as u32)
    }

    /// Leg labels of a basis index, first leg most significant.
    pub fn decode(&self, mut idx: usize) -> Vec<usize> {
        let l = self.leg_dim();
        let mut out = vec![0; self.legs];
        for p in (0..self.legs).rev() {
            out[p] = idx % l;
            idx /= l;
        }
        out
    }

    pub fn encode(&self, labels: &[usize]) -> usize {
        labels.iter().fold(0, |acc, &x| acc * self.leg_dim() + x)
    }

    pub fn weight(&self, idx: usize) -> Vec<usize> {
        let mut w = vec![0; self.d];
        for label in self.decode(idx) {
            for &i in &self.leg_basis[label] {
                w[i] += 1;
            }
        }
        w
    }

    fn apply_leg_map(&self, maps: &[Option<usize>], v: &CVec) -> CVec {
        let mut out = CVec::zeros(self.dim());
        for (idx, &c) in v.iter().enumerate() {
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let labels = self.decode(idx);
            for p in 0..self.legs {
                if let Some(t) = maps[labels[p]] {
                    let mut l2 = labels.clone();
                    l2[p] = t;
                    out[self.encode(&l2)] += c;
                }
            }
        }
        out
    }

    /// `E_j = |j⟩⟨j+1|` acting as a derivation on every leg.
    pub fn raising(&self, j: usize, v: &CVec) -> CVec {
        self.apply_leg_map(&self.raise[j], v)
    }

    /// `E_j† = |j+1⟩⟨j|` acting as a derivation on every leg.
    pub fn lowering(&self, j: usize, v: &CVec) -> CVec {
        self.apply_leg_map(&self.lower[j], v)
    }

    pub fn basis_vector(&self, idx: usize) -> CVec {
        let mut v = CVec::zeros(self.dim());
        v[idx] = Complex64::new(1.0, 0.0);
        v
    }

    /// Matrix of `E_j` restricted to the given columns (rows over the whole space).
    fn raising_columns(&self, cols: &[CVec]) -> CMat {
        let d = self.dim();
        let mut m = CMat::zeros(d * (self.d - 1).max(1), cols.len());
        for j in 0..self.d - 1 {
            for (c, v) in cols.iter().enumerate() {
                let r = self.raising(j, v);
                for (i, z) in r.iter().enumerate() {
                    m[(j * d + i, c)] = *z;
                }
            }
        }
        m
    }
}

/// A highest-weight vector with its weight.
#[derive(Debug, Clone, PartialEq)]
pub struct HighestWeightVector {
    pub weight: Vec<usize>,
    pub vector: CVec,
}

impl HighestWeightVector {
    pub fn partition(&self) -> Partition {
        Partition::new(self.weight.clone()).expect("highest weights are dominant")
    }
}

/// Orthonormal basis of `∩_j ker E_j`, grouped by weight (highest weight first).
pub fn highest_weight_kernel(
    d: usize,
    legs: usize,
    arity: usize,
) -> Result<Vec<HighestWeightVector>, RepError> {
    let space = WedgeTensorSpace::new(d, legs, arity)?;
    let cols: Vec<CVec> = (0..space.dim()).map(|i| space.basis_vector(i)).collect();
    Ok(highest_weight_in(&space, &cols))
}

/// Highest-weight vectors inside the span of weight vectors `cols`.
pub fn highest_weight_in(space: &WedgeTensorSpace, cols: &[CVec]) -> Vec<HighestWeightVector> {
    let mut groups: BTreeMap<Vec<usize>, Vec<CVec>> = BTreeMap::new();
    for v in cols {
        groups
            .entry(vector_weight(space, v))
            .or_default()
            .push(v.clone());
    }
    let mut out = Vec::new();
    for (weight, vecs) in groups.into_iter().rev() {
        let e = space.raising_columns(&vecs);
        let (ns, _) = if space.d == 1 {
            (CMat::identity(vecs.len(), vecs.len()), vec![])
        } else {
            null_space(&e, 1e-10)
        };
        let b = CMat::from_columns(&vecs);
        for c in 0..ns.ncols() {
            let mut v = &b * ns.column(c);
            normalize_phase(&mut v);
            out.push(HighestWeightVector {
                weight: weight.clone(),
                vector: v,
            });
        }
    }
    out
}

fn vector_weight(space: &WedgeTensorSpace, v: &CVec) -> Vec<usize> {
    let idx = v
        .iter()
        .position(|z| z.norm() > 1e-12)
        .expect("nonzero vector");
    space.weight(idx)
}

/// Unit norm with the first significant coefficient real and positive.
fn normalize_phase(v: &mut CVec) {
    let n = v.norm();
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-10 * n).cloned() {
        let ph = z / z.norm();
        *v /= ph * n;
    }
}

/// Dimension of the cyclic span of a highest-weight vector under lowering.
pub fn generated_irrep_dim(space: &WedgeTensorSpace, v: &CVec) -> Result<usize, RepError> {
    Ok(generated_irrep(space, v)?.len())
}

/// Orthonormal basis (of weight vectors) of the irrep generated by `v`.
pub fn generated_irrep(space: &WedgeTensorSpace, v: &CVec) -> Result<Vec<CVec>, RepError> {
    let n = v.norm();
    let defect = (0..space.d.saturating_sub(1))
        .map(|j| space.raising(j, v).norm())
        .fold(0.0, f64::max);
    if defect > 1e-9 * n {
        return Err(RepError::NotHighestWeight(defect / n));
    }
    let mut basis = OrthoBasis::new(space.dim());
    basis.try_add(v, IRREP_RANK_CUT);
    let mut frontier = 0;
    while frontier < basis.len() {
        let cur = basis.vectors()[frontier].clone();
        for j in 0..space.d - 1 {
            let w = space.lowering(j, &cur);
            // `cur` has unit norm; anything this small is round-off from a vanishing image
            if w.norm() > IRREP_RANK_CUT {
                basis.try_add(&w, IRREP_RANK_CUT);
            }
        }
        frontier += 1;
    }
    Ok(basis.vectors().to_vec())
}

/// Bijection between uniform-filling Fock states and `(Λ^{λ₊}C^{Nocc})^{⊗Nk} ⊗ (Λ^{Nocc−λ₊}C^{Nocc})^{⊗Nk}`.
///
/// Tensor legs are ordered `+` momenta first, then `-` momenta. The tensor basis state with
/// labels `(T_1..T_Nk, S_1..S_Nk)` maps to `Π_k f†_{T_k,+,k} · Π_k f†_{S_k,-,k} |vac⟩`.
#[derive(Debug, Clone)]
pub struct OccupationEmbedding {
    pub layout: ModeLayout,
    pub lambda_plus: usize,
    pub plus_legs: Vec<Vec<usize>>,
    pub minus_legs: Vec<Vec<usize>>,
}

impl OccupationEmbedding {
    pub fn new(layout: ModeLayout, lambda_plus: usize) -> Result<Self, RepError> {
        let nocc = layout.nocc();
        if layout.variant == Variant::SpinlessValleyless || lambda_plus == 0 || lambda_plus >= nocc
        {
            return Err(RepError::UnsupportedSector(lambda_plus));
        }
        Ok(OccupationEmbedding {
            layout,
            lambda_plus,
            plus_legs: combinations(nocc, lambda_plus),
            minus_legs: combinations(nocc, nocc - lambda_plus),
        })
    }

    pub fn plus_space(&self) -> WedgeTensorSpace {
        WedgeTensorSpace::new(self.layout.nocc(), self.layout.nk, self.lambda_plus).expect("valid")
    }

    pub fn plus_dim(&self) -> usize {
        self.plus_legs.len().pow(self.layout.nk as u32)
    }

    pub fn minus_dim(&self) -> usize {
        self.minus_legs.len().pow(self.layout.nk as u32)
    }

    pub fn tensor_dim(&self) -> usize {
        self.plus_dim() * self.minus_dim()
    }

    fn labels(&self, mut idx: usize, leg_dim: usize) -> Vec<usize> {
        let nk = self.layout.nk;
        let mut out = vec![0; nk];
        for p in (0..nk).rev() {
            out[p] = idx % leg_dim;
            idx /= leg_dim;
        }
        out
    }

    /// Fock pattern and sign of the tensor basis state `plus_idx ⊗ minus_idx`.
    pub fn encode_pair(&self, plus_idx: usize, minus_idx: usize) -> (u64, f64) {
        let l = &self.layout;
        let pl = self.labels(plus_idx, self.plus_legs.len());
        let mi = self.labels(minus_idx, self.minus_legs.len());
        let mut modes = Vec::new();
        for (k, &t) in pl.iter().enumerate() {
            modes.extend(
                self.plus_legs[t]
                    .iter()
                    .map(|&f| l.mode(k, Chirality::Plus, f)),
            );
        }
        for (k, &t) in mi.iter().enumerate() {
            modes.extend(
                self.minus_legs[t]
                    .iter()
                    .map(|&f| l.mode(k, Chirality::Minus, f)),
            );
        }
        let (mut p, mut sign) = (0u64, 1.0);
        for &m in modes.iter().rev() {
            let (q, s) = create(p, m).expect("modes are distinct");
            p = q;
            sign *= s;
        }
        (p, sign)
    }

    pub fn encode(&self, idx: usize) -> (u64, f64) {
        self.encode_pair(idx / self.minus_dim(), idx % self.minus_dim())
    }

    /// Sparse Fock state of `plus ⊗ e_{minus_idx}`.
    pub fn lift_plus(&self, plus: &CVec, minus_idx: usize) -> SparseState {
        let mut out = SparseState::new();
        for (i, &c) in plus.iter().enumerate() {
            if c.norm() > 0.0 {
                let (p, s) = self.encode_pair(i, minus_idx);
                *out.entry(p).or_default() += c * s;
            }
        }
        out
    }

    /// Sector-by-tensor matrix of the embedding.
    pub fn matrix(&self, sector: &FockSector) -> SparseOperator {
        let trip = (0..self.tensor_dim())
            .map(|i| {
                let (p, s) = self.encode(i);
                (
                    sector.index_of(p).expect("pattern in sector"),
                    i,
                    Complex64::new(s, 0.0),
                )
            })
            .collect();
        SparseOperator::from_triplets(sector.dim(), self.tensor_dim(), trip)
    }
}

pub fn embed_occupation(
    sector: &FockSector,
    lambda_plus: usize,
) -> Result<OccupationEmbedding, RepError> {
    OccupationEmbedding::new(sector.layout, lambda_plus)
}

/// `Λ^a U` in the lexicographic tuple basis (minors of `U`).
pub fn wedge_power(u: &CMat, arity: usize) -> CMat {
    let tuples = combinations(u.nrows(), arity);
    CMat::from_fn(tuples.len(), tuples.len(), |r, c| {
        let sub = CMat::from_fn(arity, arity, |i, j| u[(tuples[r][i], tuples[c][j])]);
        sub.determinant()
    })
}

/// Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    CMat::from_fn(ar * br, ac * bc, |r, c| {
        a[(r / br, c / bc)] * b[(r % br, c % bc)]
    })
}

pub fn kron_power(a: &CMat, n: usize) -> CMat {
    (1..n).fold(a.clone(), |acc, _| kron(&acc, a))
}

/// One induction step of the rectangular-diagram argument.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalStep {
    pub legs: usize,
    /// Highest weights found in `S_rect ⊗ Λ^a`, with whether `Ĉ_{+,k_{n-1},k_n}` annihilates them.
    pub classes: Vec<(Partition, bool)>,
}

/// Layout realizing `(Λ^arity C^d)` legs in the `+` sector.
fn survival_layout(d: usize, arity: usize, legs: usize) -> Result<ModeLayout, RepError> {
    let variant = match d {
        2 => Variant::SpinlessValleyful,
        4 => Variant::SpinfulValleyful,
        _ => return Err(RepError::InvalidArity { arity, d }),
    };
    ModeLayout::new(variant, legs).map_err(|_| RepError::TooLarge(legs))
}

/// Grow the rectangular irrep one leg at a time and test which generators survive
/// the transfer operator between the last two momenta.
pub fn rectangular_survival(
    d: usize,
    arity: usize,
    max_legs: usize,
) -> Result<Vec<SurvivalStep>, RepError> {
    let mut steps = Vec::new();
    for legs in 2..=max_legs {
        let prev = WedgeTensorSpace::new(d, legs - 1, arity)?;
        let space = WedgeTensorSpace::new(d, legs, arity)?;
        let top = prev.encode(&vec![0; legs - 1]);
        let rect = generated_irrep(&prev, &prev.basis_vector(top))?;
        let mut cols = Vec::new();
        for r in &rect {
            for leg in 0..space.leg_dim() {
                let mut v = CVec::zeros(space.dim());
                for (i, &c) in r.iter().enumerate() {
                    v[i * space.leg_dim() + leg] = c;
                }
                cols.push(v);
            }
        }
        let layout = survival_layout(d, arity, legs)?;
        let emb = OccupationEmbedding::new(layout, arity)?;
        let op: OneBodyOp = crate::fock::transfer_op(&layout, Chirality::Plus, legs - 2, legs - 1);
        let mut classes = Vec::new();
        for hw in highest_weight_in(&space, &cols) {
            let state = emb.lift_plus(&hw.vector, 0);
            let image = op.apply_state(&state);
            let norm: f64 = image.values().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            classes.push((hw.partition(), norm < 1e-9));
        }
        steps.push(SurvivalStep { legs, classes });
    }
    Ok(steps)
}
