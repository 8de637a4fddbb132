//! Density operators and the flat-band interacting Hamiltonian.

use crate::fock::{transfer_op, Chirality, FockSector, ModeLayout, OneBodyOp, SparseOperator};
use crate::formfactor::FormFactorModel;
use crate::kernelsolve::{self, KernelError};
use crate::lattice::{Momentum, MomentumGrid};
use crate::linalg::CMat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamiltonianError {
    #[error("kernel dimension changed between the two largest cutoffs ({0} vs {1})")]
    NonConvergent(usize, usize),
    #[error("spectral gap decreased with the cutoff ({0:e} -> {1:e})")]
    GapDecreased(f64, f64),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Gate-screened Coulomb parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub epsilon: f64,
    #[serde(rename = "dGate")]
    pub d_gate: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            epsilon: 1.0,
            d_gate: 1.0,
        }
    }
}

/// `V̂(q) = (2π/ε) tanh(|q| d/2) / |q|`, with the limit `πd/ε` at `q = 0`.
pub fn vhat(q_norm: f64, p: &KernelParams) -> f64 {
    if q_norm < 1e-12 {
        std::f64::consts::PI * p.d_gate / p.epsilon
    } else {
        2.0 * std::f64::consts::PI / p.epsilon * (q_norm * p.d_gate / 2.0).tanh() / q_norm
    }
}

/// Momentum transfers kept in the Hamiltonian, their weights and normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyPlan {
    pub q_list: Vec<Momentum>,
    pub weights: Vec<f64>,
    pub qcut: f64,
    pub prefactor: f64,
    /// `neg[i]` is the position of `-q_list[i]`.
    pub neg: Vec<usize>,
}

pub const DEFAULT_QCUT_FACTOR: f64 = 3.5;

/// All `q' ∈ K + Γ*` with `|q'| <= qcut_factor · |b1|`.
pub fn assembly_plan(grid: &MomentumGrid, qcut_factor: f64, kernel: &KernelParams) -> AssemblyPlan {
    let qcut = qcut_factor * grid.lattice.b1.norm();
    let q_list = grid.momenta_within(qcut);
    let weights = q_list
        .iter()
        .map(|&q| vhat(grid.vector(q).norm(), kernel))
        .collect();
    let neg = q_list
        .iter()
        .map(|&q| {
            q_list
                .iter()
                .position(|&p| p == -q)
                .expect("momentum set is closed under negation")
        })
        .collect();
    AssemblyPlan {
        q_list,
        weights,
        qcut,
        prefactor: 1.0 / (grid.len() as f64 * grid.lattice.cell_area),
        neg,
    }
}

/// `ρ̂(q') = Σ_k a_k(q') (Ĉ_{+,k,k+q'} − ½Nocc δ) + conj(a_k(q')) (Ĉ_{-,k,k+q'} − ½Nocc δ)`.
pub fn rho_op(model: &FormFactorModel, layout: &ModeLayout, q: Momentum) -> OneBodyOp {
    let grid = &model.grid;
    let on_lattice = grid.is_dual(q);
    let half = 0.5 * layout.nocc() as f64;
    let mut op = OneBodyOp::default();
    for k in 0..grid.len() {
        let kq = grid.shift(k, q);
        let a = model.a(k, q);
        op = op.plus(&transfer_op(layout, Chirality::Plus, k, kq).scaled(a));
        op = op.plus(&transfer_op(layout, Chirality::Minus, k, kq).scaled(a.conj()));
        if on_lattice {
            op.shift -= (a + a.conj()) * half;
        }
    }
    op
}

pub fn density(model: &FormFactorModel, sector: &FockSector, q: Momentum) -> SparseOperator {
    rho_op(model, &sector.layout, q).to_sparse(sector)
}

/// `H = (1/(Nk|Ω|)) Σ_{q'} V̂(q') ρ̂(q') ρ̂(−q')` restricted to a sector.
#[derive(Debug, Clone)]
pub struct FbiHamiltonian {
    pub sector: FockSector,
    pub plan: AssemblyPlan,
    pub rho: Vec<OneBodyOp>,
}

impl FbiHamiltonian {
    pub fn new(model: &FormFactorModel, sector: &FockSector, plan: &AssemblyPlan) -> Self {
        let rho = plan
            .q_list
            .par_iter()
            .map(|&q| rho_op(model, &sector.layout, q))
            .collect();
        FbiHamiltonian {
            sector: sector.clone(),
            plan: plan.clone(),
            rho,
        }
    }

    pub fn dim(&self) -> usize {
        self.sector.dim()
    }

    pub fn rho_matrices(&self) -> Vec<SparseOperator> {
        self.rho
            .par_iter()
            .map(|r| r.to_sparse(&self.sector))
            .collect()
    }

    /// Sparse matrix of `H`.
    pub fn assemble(&self) -> SparseOperator {
        let rho = self.rho_matrices();
        let n = self.dim();
        let rows: Vec<Vec<(usize, usize, Complex64)>> = (0..n)
            .into_par_iter()
            .map(|r| {
                let mut acc = vec![Complex64::new(0.0, 0.0); n];
                let mut touched = vec![false; n];
                let mut cols = Vec::new();
                for (i, w) in self.plan.weights.iter().enumerate() {
                    let (a, b) = (&rho[i], &rho[self.plan.neg[i]]);
                    let coef = w * self.plan.prefactor;
                    for p in a.indptr[r]..a.indptr[r + 1] {
                        let (mid, v) = (a.indices[p], a.values[p] * coef);
                        for q in b.indptr[mid]..b.indptr[mid + 1] {
                            let c = b.indices[q];
                            if !touched[c] {
                                touched[c] = true;
                                cols.push(c);
                            }
                            acc[c] += v * b.values[q];
                        }
                    }
                }
                cols.sort_unstable();
                cols.into_iter().map(|c| (r, c, acc[c])).collect()
            })
            .collect();
        SparseOperator::from_triplets(n, n, rows.into_iter().flatten().collect())
    }

    pub fn assemble_dense(&self) -> CMat {
        self.assemble().to_dense()
    }

    /// Matrix-free `H x`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        let parts: Vec<Vec<Complex64>> = (0..self.plan.q_list.len())
            .into_par_iter()
            .map(|i| {
                let inner = self.rho[self.plan.neg[i]].apply(&self.sector, x);
                let mut out = self.rho[i].apply(&self.sector, &inner);
                let coef = self.plan.weights[i] * self.plan.prefactor;
                out.iter_mut().for_each(|z| *z *= coef);
                out
            })
            .collect();
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        for part in parts {
            for (a, b) in y.iter_mut().zip(part) {
                *a += b;
            }
        }
        y
    }

    /// `|H x|` for many vectors, with the density matrices built once.
    pub fn residual_norms(&self, xs: &[Vec<Complex64>]) -> Vec<f64> {
        let rho = self.rho_matrices();
        xs.par_iter()
            .map(|x| {
                let mut y = vec![Complex64::new(0.0, 0.0); self.dim()];
                for (i, w) in self.plan.weights.iter().enumerate() {
                    let inner = rho[self.plan.neg[i]].matvec(x);
                    let coef = w * self.plan.prefactor;
                    for (a, b) in y.iter_mut().zip(rho[i].matvec(&inner)) {
                        *a += b * coef;
                    }
                }
                y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
            })
            .collect()
    }

    /// `Σ_q V̂(q) |ρ̂(q) x|²` times the prefactor, which equals `⟨x|H|x⟩`.
    pub fn energy_from_densities(&self, x: &[Complex64]) -> f64 {
        let terms: Vec<f64> = (0..self.plan.q_list.len())
            .into_par_iter()
            .map(|i| {
                let y = self.rho[i].apply(&self.sector, x);
                self.plan.weights[i] * y.iter().map(|z| z.norm_sqr()).sum::<f64>()
            })
            .collect();
        self.plan.prefactor * terms.iter().sum::<f64>()
    }

    /// Largest `|ρ̂(q') x| / |ρ̂(q')|` over the plan.
    pub fn max_density_residual(&self, x: &[Complex64], norms: &[f64]) -> f64 {
        (0..self.plan.q_list.len())
            .into_par_iter()
            .map(|i| {
                let y = self.rho[i].apply(&self.sector, x);
                let r = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if norms[i] > 0.0 {
                    r / norms[i]
                } else {
                    r
                }
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .fold(0.0, f64::max)
    }

    /// Spectral-norm bounds for every `ρ̂(q')` on the sector.
    pub fn density_norms(&self) -> Vec<f64> {
        self.rho
            .par_iter()
            .map(|r| r.to_sparse(&self.sector).norm_bound())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    pub cut_factor: f64,
    pub kernel_dim: usize,
    pub gap: f64,
}

/// Kernel dimension and spectral gap as the momentum cutoff grows.
pub fn convergence_scan(
    model: &FormFactorModel,
    sector: &FockSector,
    kernel: &KernelParams,
    cut_factors: &[f64],
) -> Result<Vec<ScanPoint>, HamiltonianError> {
    let mut out = Vec::new();
    for &f in cut_factors {
        let plan = assembly_plan(&model.grid, f, kernel);
        let h = FbiHamiltonian::new(model, sector, &plan).assemble_dense();
        let (vals, _) = crate::linalg::hermitian_eigen(&h);
        let split = kernelsolve::split_spectrum(&vals, kernelsolve::DEFAULT_EIG_TOL)?;
        out.push(ScanPoint {
            cut_factor: f,
            kernel_dim: split.kernel_dim,
            gap: split.gap,
        });
    }
    let n = out.len();
    if n >= 2 {
        if out[n - 1].kernel_dim != out[n - 2].kernel_dim {
            return Err(HamiltonianError::NonConvergent(
                out[n - 2].kernel_dim,
                out[n - 1].kernel_dim,
            ));
        }
        for w in out.windows(2) {
            if w[0].kernel_dim == w[1].kernel_dim && w[1].gap < w[0].gap * (1.0 - 1e-9) {
                return Err(HamiltonianError::GapDecreased(w[0].gap, w[1].gap));
            }
        }
    }
    Ok(out)
}
