//! Scalar form-factor models `a_k(q')` and their certificates.
//!
//! All models are evaluated in the periodic gauge `f_{k+G} = f_k`: the
//! momentum `k` is always a grid representative and `k + q'` is reduced back
//! onto the grid. For the Landau-level model this requires the magnetic
//! translation phase picked up on reduction, which is what keeps
//! `conj(a_k(q')) = a_{k+q'}(-q')` exact.

use crate::lattice::{cross, dual_shells, DualVector, Momentum, MomentumGrid, Vec2};
use crate::linalg;
use crate::theta::{omega, theta_omega};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormFactorError {
    #[error("form-factor matrix has rank {rank} < Nk = {nk}")]
    RankDeficient {
        rank: usize,
        nk: usize,
        witness: Vec<Complex64>,
    },
    #[error("grid spacing {spacing} is not below the form-factor radius {qc}")]
    GridTooCoarse { spacing: f64, qc: f64 },
    #[error("sampled weight for k index {k} is not periodic (edge mismatch {mismatch:e})")]
    PeriodicityViolation { k: usize, mismatch: f64 },
    #[error("samplesPerAxis = {0} is below the minimum of 32")]
    TooFewSamples(usize),
    #[error("ell2 = {0} is not a positive integer multiple of |Ω|/(2π)")]
    NonIntegerFlux(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "LLL")]
    Lll,
    ThetaSampled,
    DegenerateConstant,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Lll => "LLL",
            ModelKind::ThetaSampled => "ThetaSampled",
            ModelKind::DegenerateConstant => "DegenerateConstant",
        }
    }
}

pub fn default_ell2(cell_area: f64) -> f64 {
    cell_area / (2.0 * PI)
}

/// Symmetric-gauge lowest-Landau-level form factor
/// `exp(-ℓ²|q'|²/4) · exp(-iℓ²(k_x q'_y − k_y q'_x)/2)`.
pub fn eval_lll(k: &Vec2, q: &Vec2, ell2: f64) -> Complex64 {
    let g = (-ell2 * q.norm_squared() / 4.0).exp();
    Complex64::from_polar(g, -ell2 * cross(k, q) / 2.0)
}

#[derive(Debug, Clone)]
pub struct FormFactorModel {
    pub kind: ModelKind,
    pub ell2: f64,
    pub samples_per_axis: usize,
    pub grid: MomentumGrid,
    flux: i64,
    // per-k 2D DFT of the sampled weight, normalized so the zero mode is 1
    theta_tables: Vec<Vec<Complex64>>,
}

impl FormFactorModel {
    pub fn lll(grid: &MomentumGrid) -> Self {
        Self::new(ModelKind::Lll, grid, None, 64).expect("default LLL model is valid")
    }

    pub fn degenerate(grid: &MomentumGrid) -> Self {
        Self::new(ModelKind::DegenerateConstant, grid, None, 64).expect("valid")
    }

    pub fn theta_sampled(
        grid: &MomentumGrid,
        samples_per_axis: usize,
    ) -> Result<Self, FormFactorError> {
        Self::new(ModelKind::ThetaSampled, grid, None, samples_per_axis)
    }

    pub fn new(
        kind: ModelKind,
        grid: &MomentumGrid,
        ell2: Option<f64>,
        samples_per_axis: usize,
    ) -> Result<Self, FormFactorError> {
        let area = grid.lattice.cell_area;
        let ell2 = ell2.unwrap_or_else(|| default_ell2(area));
        let flux_f = ell2 / default_ell2(area);
        let flux = flux_f.round() as i64;
        if kind != ModelKind::DegenerateConstant
            && (flux < 1 || (flux_f - flux as f64).abs() > 1e-9)
        {
            return Err(FormFactorError::NonIntegerFlux(ell2));
        }
        let mut model = FormFactorModel {
            kind,
            ell2,
            samples_per_axis,
            grid: grid.clone(),
            flux,
            theta_tables: Vec::new(),
        };
        if kind == ModelKind::ThetaSampled {
            if samples_per_axis < 32 {
                return Err(FormFactorError::TooFewSamples(samples_per_axis));
            }
            for k in 0..grid.len() {
                model.check_periodicity(k)?;
                model.theta_tables.push(model.sampled_spectrum(k));
            }
        }
        Ok(model)
    }

    /// `a_k(q')` for grid index `k` and fine-lattice momentum `q'`.
    pub fn a(&self, k: usize, q: Momentum) -> Complex64 {
        match self.kind {
            ModelKind::DegenerateConstant => {
                Complex64::new((-self.grid.vector(q).norm_squared() / 4.0).exp(), 0.0)
            }
            ModelKind::Lll => self.lll_periodic(k, q),
            ModelKind::ThetaSampled => {
                if self.grid.is_dual(q) {
                    let m = q.i / self.grid.nkx as i64;
                    let n = q.j / self.grid.nky as i64;
                    self.theta_coefficient(k, m, n)
                } else {
                    self.lll_periodic(k, q)
                }
            }
        }
    }

    /// `a_k(q')` for a real-space `q'` that lies on `K + Γ*`.
    pub fn a_at(&self, k: usize, q: &Vec2) -> Option<Complex64> {
        let (c1, c2) = self.grid.lattice.dual_coords(q);
        let (x, y) = (c1 * self.grid.nkx as f64, c2 * self.grid.nky as f64);
        if (x - x.round()).abs() > 1e-7 || (y - y.round()).abs() > 1e-7 {
            return None;
        }
        Some(self.a(k, Momentum::new(x.round() as i64, y.round() as i64)))
    }

    fn lll_periodic(&self, k: usize, q: Momentum) -> Complex64 {
        let grid = &self.grid;
        let (kr, (m0, n0)) = grid.reduce(grid.momentum(k) + q);
        let g0 = grid.lattice.dual_point(m0, n0);
        let red = grid.points[kr];
        let sign = if (self.flux * m0 * n0).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        };
        let boundary = Complex64::from_polar(sign, self.ell2 * cross(&g0, &red) / 2.0);
        boundary * eval_lll(&grid.points[k], &grid.vector(q), self.ell2)
    }

    /// Weight `w_k(z) = e^{2 Im z Re k} |θ(z + z(k)|ω)|² e^{-2π (Im z)²/Im ω}`.
    pub fn theta_weight(&self, k: usize, z: Complex64) -> f64 {
        let kv = self.grid.points[k];
        let kc = Complex64::new(kv.x, kv.y);
        let zk = kc * 3f64.sqrt() / Complex64::new(0.0, 4.0 * PI);
        let w = omega();
        (2.0 * z.im * kc.re).exp()
            * theta_omega(z + zk).norm_sqr()
            * (-2.0 * PI * z.im * z.im / w.im).exp()
    }

    fn cell_point(s: f64, t: f64) -> Complex64 {
        Complex64::new(s, 0.0) + omega() * t
    }

    fn check_periodicity(&self, k: usize) -> Result<(), FormFactorError> {
        let n = 16;
        let mut pairs = Vec::with_capacity(2 * n);
        for a in 0..n {
            let u = a as f64 / n as f64;
            for (p, q) in [
                (Self::cell_point(0.0, u), Self::cell_point(1.0, u)),
                (Self::cell_point(u, 0.0), Self::cell_point(u, 1.0)),
            ] {
                pairs.push((self.theta_weight(k, p), self.theta_weight(k, q)));
            }
        }
        // relative to the edge maximum: w_k has zeros on the boundary
        let scale = pairs
            .iter()
            .map(|(a, b)| a.abs().max(b.abs()))
            .fold(1e-300, f64::max);
        let worst = pairs
            .iter()
            .map(|(a, b)| (a - b).abs() / scale)
            .fold(0.0, f64::max);
        if worst > 1e-8 {
            return Err(FormFactorError::PeriodicityViolation { k, mismatch: worst });
        }
        Ok(())
    }

    /// Cell average of `w_k(r) e^{iG·r}` for all `G = m b1 + n b2`, stored mod `S`.
    fn sampled_spectrum(&self, k: usize) -> Vec<Complex64> {
        let s = self.samples_per_axis;
        let mut w = vec![0.0; s * s];
        for a in 0..s {
            for b in 0..s {
                w[a * s + b] = self.theta_weight(
                    k,
                    Self::cell_point(a as f64 / s as f64, b as f64 / s as f64),
                );
            }
        }
        let roots: Vec<Complex64> = (0..s)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / s as f64))
            .collect();
        // transform along t, then along s
        let mut partial = vec![Complex64::new(0.0, 0.0); s * s];
        for a in 0..s {
            for n in 0..s {
                let mut acc = Complex64::new(0.0, 0.0);
                for b in 0..s {
                    acc += roots[(n * b) % s] * w[a * s + b];
                }
                partial[a * s + n] = acc;
            }
        }
        let mut out = vec![Complex64::new(0.0, 0.0); s * s];
        for m in 0..s {
            for n in 0..s {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..s {
                    acc += roots[(m * a) % s] * partial[a * s + n];
                }
                out[m * s + n] = acc;
            }
        }
        let zero = out[0];
        out.iter().map(|z| z / zero).collect()
    }

    fn theta_coefficient(&self, k: usize, m: i64, n: i64) -> Complex64 {
        let s = self.samples_per_axis as i64;
        let idx = m.rem_euclid(s) * s + n.rem_euclid(s);
        self.theta_tables[k][idx as usize]
    }

    /// Matrix `[a_k(G)]` with rows indexed by `shells` and columns by grid points.
    pub fn on_lattice_matrix(&self, shells: &[DualVector]) -> DMatrix<Complex64> {
        DMatrix::from_fn(shells.len(), self.grid.len(), |r, k| {
            self.a(k, self.grid.dual_momentum(shells[r].m, shells[r].n))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankCertificate {
    pub rank: usize,
    /// Smallest retained singular value, a conditioning diagnostic.
    pub sigma_min: f64,
    pub shells_used: usize,
}

/// Certify that `[a_k(G)]` over `shells` has full column rank `Nk`.
pub fn certify_rank(
    model: &FormFactorModel,
    shells: &[DualVector],
) -> Result<RankCertificate, FormFactorError> {
    certify_rank_with_tol(model, shells, DEFAULT_RANK_TOL)
}

/// As [`certify_rank`], with singular values below `tol · σ_max` counted as zero.
pub fn certify_rank_with_tol(
    model: &FormFactorModel,
    shells: &[DualVector],
    tol: f64,
) -> Result<RankCertificate, FormFactorError> {
    let mat = model.on_lattice_matrix(shells);
    let nk = model.grid.len();
    let r = linalg::rank(&mat, tol);
    if r < nk {
        let (ns, _) = linalg::null_space(&mat, tol);
        let witness = if ns.ncols() > 0 {
            ns.column(0).iter().cloned().collect()
        } else {
            vec![]
        };
        return Err(FormFactorError::RankDeficient {
            rank: r,
            nk,
            witness,
        });
    }
    let sv = mat.singular_values();
    let sigma_min = sv
        .iter()
        .cloned()
        .filter(|&x| x > tol * sv.max())
        .fold(f64::INFINITY, f64::min);
    Ok(RankCertificate {
        rank: r,
        sigma_min,
        shells_used: shells.len(),
    })
}

/// Shell set for the rank certificate.
///
/// On the dual lattice each column picks up the grid character `e^{iℓ²(G×k)}`, which only
/// depends on `(n mod nkx, m mod nky)` for `G = m b1 + n b2`. The set is the shortest run of
/// complete shells that has at least `max(19, Nk)` vectors and meets every such class.
pub fn certificate_shells(model: &FormFactorModel) -> Vec<DualVector> {
    let grid = &model.grid;
    let l = &grid.lattice;
    let (nx, ny) = (grid.nkx as i64, grid.nky as i64);
    let want = grid.len().max(19);
    let mut radius = 2.0 * l.b1.norm();
    loop {
        let shells = dual_shells(l, radius);
        let mut seen = vec![false; grid.len()];
        let mut covered = 0;
        for (i, g) in shells.iter().enumerate() {
            let class = (g.n.rem_euclid(nx) * ny + g.m.rem_euclid(ny)) as usize;
            if !seen[class] {
                seen[class] = true;
                covered += 1;
            }
            let shell_done = shells
                .get(i + 1)
                .is_some_and(|h| h.norm() > g.norm() + 1e-9 * g.norm().max(1.0));
            if covered == grid.len() && i + 1 >= want && shell_done {
                return shells[..=i].to_vec();
            }
        }
        radius *= 1.25;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcCertificate {
    pub qc: f64,
    pub spacing: f64,
}

/// Largest radius on which the form factor stays above `1e-6`, checked against the grid spacing.
pub fn certify_qc(model: &FormFactorModel) -> Result<QcCertificate, FormFactorError> {
    let spacing = model.grid.max_spacing();
    let qc = match model.kind {
        ModelKind::Lll | ModelKind::DegenerateConstant => f64::INFINITY,
        ModelKind::ThetaSampled => scan_qc(model),
    };
    if spacing >= qc {
        return Err(FormFactorError::GridTooCoarse { spacing, qc });
    }
    Ok(QcCertificate { qc, spacing })
}

fn scan_qc(model: &FormFactorModel) -> f64 {
    let grid = &model.grid;
    let step = 0.01 * grid.lattice.b1.norm();
    let rmax = 10.0 * grid.lattice.b1.norm();
    let mut first_bad = f64::INFINITY;
    for q in grid.momenta_within(rmax) {
        let norm = grid.vector(q).norm();
        let smallest = (0..grid.len())
            .map(|k| model.a(k, q).norm())
            .fold(f64::INFINITY, f64::min);
        if smallest <= 1e-6 {
            first_bad = norm;
            break;
        }
    }
    if first_bad.is_infinite() {
        return rmax;
    }
    // largest scanned radius strictly inside the first failure
    let mut steps = (first_bad / step).floor();
    while steps > 0.0 && steps * step >= first_bad * (1.0 - 1e-9) {
        steps -= 1.0;
    }
    steps * step
}
