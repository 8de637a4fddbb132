//! Triangular moiré lattice, its dual, and discrete momentum grids.
//!
//! Grid momenta are tracked exactly as integer pairs `(i, j)` meaning
//! `(i / nkx) b1 + (j / nky) b2`, so reduction modulo the dual lattice and
//! negation never accumulate rounding.

use nalgebra::Vector2;
use num_complex::Complex64;
use std::cmp::Ordering;
use thiserror::Error;

pub type Vec2 = Vector2<f64>;

/// Fractional coordinates within this distance of 1 wrap to 0.
pub const REDUCE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("invalid grid {nkx}x{nky}: both dimensions must be positive")]
    InvalidGrid { nkx: usize, nky: usize },
}

/// Real and dual bases of the triangular lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub a1: Vec2,
    pub a2: Vec2,
    pub b1: Vec2,
    pub b2: Vec2,
    pub cell_area: f64,
}

impl Default for Lattice {
    fn default() -> Self {
        Self::triangular()
    }
}

impl Lattice {
    pub fn triangular() -> Self {
        let s3 = 3f64.sqrt();
        let a1 = Vec2::new(1.0, 0.0);
        let a2 = Vec2::new(-0.5, s3 / 2.0);
        let tau = 2.0 * std::f64::consts::PI;
        let b1 = Vec2::new(tau, tau / s3);
        let b2 = Vec2::new(0.0, 2.0 * tau / s3);
        let cell_area = (a1.x * a2.y - a1.y * a2.x).abs();
        Lattice {
            a1,
            a2,
            b1,
            b2,
            cell_area,
        }
    }

    /// Area of the dual (Brillouin) cell, `(2π)^2 / |Ω|`.
    pub fn dual_cell_area(&self) -> f64 {
        cross(&self.b1, &self.b2).abs()
    }

    pub fn dual_point(&self, m: i64, n: i64) -> Vec2 {
        self.b1 * m as f64 + self.b2 * n as f64
    }

    /// Coefficients `(c1, c2)` with `q = c1 b1 + c2 b2`.
    pub fn dual_coords(&self, q: &Vec2) -> (f64, f64) {
        let tau = 2.0 * std::f64::consts::PI;
        (q.dot(&self.a1) / tau, q.dot(&self.a2) / tau)
    }
}

/// Planar cross product `u_x v_y - u_y v_x`.
pub fn cross(u: &Vec2, v: &Vec2) -> f64 {
    u.x * v.y - u.y * v.x
}

pub fn to_complex(v: &Vec2) -> Complex64 {
    Complex64::new(v.x, v.y)
}

/// Reduce a momentum into the half-open dual cell.
///
/// Returns `(q_red, (m, n))` with `q = q_red + m b1 + n b2` and the
/// fractional coordinates of `q_red` in `[0, 1)`.
pub fn reduce_mod_dual(lattice: &Lattice, q: &Vec2) -> (Vec2, (i64, i64)) {
    let (c1, c2) = lattice.dual_coords(q);
    let (f1, m) = split_frac(c1);
    let (f2, n) = split_frac(c2);
    (lattice.b1 * f1 + lattice.b2 * f2, (m, n))
}

fn split_frac(c: f64) -> (f64, i64) {
    let mut m = c.floor();
    let mut f = c - m;
    if f > 1.0 - REDUCE_TOL {
        f = 0.0;
        m += 1.0;
    } else if f < REDUCE_TOL {
        f = 0.0;
    }
    (f, m as i64)
}

/// A dual-lattice vector `m b1 + n b2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualVector {
    pub m: i64,
    pub n: i64,
    pub vec: Vec2,
}

impl DualVector {
    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }
}

/// All dual vectors with `|G| <= max_norm`, sorted by norm, ties broken by `(m, n)`.
pub fn dual_shells(lattice: &Lattice, max_norm: f64) -> Vec<DualVector> {
    let slack = 1e-9 * max_norm.max(1.0);
    // smallest distance between lattice lines bounds the coefficient range
    let h = lattice.dual_cell_area() / lattice.b1.norm().max(lattice.b2.norm());
    let r = (max_norm / h).ceil() as i64 + 1;
    let mut out = Vec::new();
    for m in -r..=r {
        for n in -r..=r {
            let vec = lattice.dual_point(m, n);
            if vec.norm() <= max_norm + slack {
                out.push(DualVector { m, n, vec });
            }
        }
    }
    out.sort_by(compare_by_norm);
    out
}

fn compare_by_norm(a: &DualVector, b: &DualVector) -> Ordering {
    let (na, nb) = (a.norm(), b.norm());
    if (na - nb).abs() > 1e-9 * na.max(nb).max(1.0) {
        na.partial_cmp(&nb).unwrap()
    } else {
        (a.m, a.n).cmp(&(b.m, b.n))
    }
}

/// The first `count` dual vectors in shell order, including the origin.
pub fn first_dual_vectors(lattice: &Lattice, count: usize) -> Vec<DualVector> {
    let mut radius = lattice.b1.norm();
    loop {
        let shells = dual_shells(lattice, radius);
        if shells.len() >= count {
            return shells.into_iter().take(count).collect();
        }
        radius *= 1.5;
    }
}

/// An exact momentum `(i / nkx) b1 + (j / nky) b2` on the fine lattice `K + Γ*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Momentum {
    pub i: i64,
    pub j: i64,
}

impl Momentum {
    pub fn new(i: i64, j: i64) -> Self {
        Momentum { i, j }
    }
}

impl std::ops::Neg for Momentum {
    type Output = Momentum;
    fn neg(self) -> Momentum {
        Momentum {
            i: -self.i,
            j: -self.j,
        }
    }
}

impl std::ops::Add for Momentum {
    type Output = Momentum;
    fn add(self, o: Momentum) -> Momentum {
        Momentum {
            i: self.i + o.i,
            j: self.j + o.j,
        }
    }
}

impl std::ops::Sub for Momentum {
    type Output = Momentum;
    fn sub(self, o: Momentum) -> Momentum {
        Momentum {
            i: self.i - o.i,
            j: self.j - o.j,
        }
    }
}

/// Uniform discretization of the Brillouin zone, ordered row-major (`i` outer).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    pub lattice: Lattice,
    pub nkx: usize,
    pub nky: usize,
    pub points: Vec<Vec2>,
}

pub fn grid(lattice: &Lattice, nkx: usize, nky: usize) -> Result<MomentumGrid, LatticeError> {
    if nkx == 0 || nky == 0 {
        return Err(LatticeError::InvalidGrid { nkx, nky });
    }
    let mut points = Vec::with_capacity(nkx * nky);
    for i in 0..nkx {
        for j in 0..nky {
            points
                .push(lattice.b1 * (i as f64 / nkx as f64) + lattice.b2 * (j as f64 / nky as f64));
        }
    }
    Ok(MomentumGrid {
        lattice: lattice.clone(),
        nkx,
        nky,
        points,
    })
}

impl MomentumGrid {
    pub fn new(nkx: usize, nky: usize) -> Result<Self, LatticeError> {
        grid(&Lattice::triangular(), nkx, nky)
    }

    pub fn len(&self) -> usize {
        self.nkx * self.nky
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn e1(&self) -> Vec2 {
        self.lattice.b1 / self.nkx as f64
    }

    pub fn e2(&self) -> Vec2 {
        self.lattice.b2 / self.nky as f64
    }

    pub fn max_spacing(&self) -> f64 {
        self.e1().norm().max(self.e2().norm())
    }

    /// Momentum label of grid index `k`.
    pub fn momentum(&self, k: usize) -> Momentum {
        Momentum::new((k / self.nky) as i64, (k % self.nky) as i64)
    }

    /// Reduce a fine-lattice momentum to `(grid index, (m, n))`.
    pub fn reduce(&self, p: Momentum) -> (usize, (i64, i64)) {
        let (nx, ny) = (self.nkx as i64, self.nky as i64);
        let (m, i) = (p.i.div_euclid(nx), p.i.rem_euclid(nx));
        let (n, j) = (p.j.div_euclid(ny), p.j.rem_euclid(ny));
        ((i * ny + j) as usize, (m, n))
    }

    pub fn index_of(&self, p: Momentum) -> usize {
        self.reduce(p).0
    }

    /// Grid index of `k + q`.
    pub fn shift(&self, k: usize, q: Momentum) -> usize {
        self.index_of(self.momentum(k) + q)
    }

    /// Grid index of `-k`.
    pub fn neg(&self, k: usize) -> usize {
        self.index_of(-self.momentum(k))
    }

    pub fn is_dual(&self, p: Momentum) -> bool {
        p.i.rem_euclid(self.nkx as i64) == 0 && p.j.rem_euclid(self.nky as i64) == 0
    }

    pub fn vector(&self, p: Momentum) -> Vec2 {
        self.lattice.b1 * (p.i as f64 / self.nkx as f64)
            + self.lattice.b2 * (p.j as f64 / self.nky as f64)
    }

    pub fn dual_momentum(&self, m: i64, n: i64) -> Momentum {
        Momentum::new(m * self.nkx as i64, n * self.nky as i64)
    }

    /// Locate a real-space momentum on the grid after reduction, if present.
    pub fn locate(&self, q: &Vec2) -> Option<usize> {
        let (c1, c2) = self.lattice.dual_coords(q);
        let (x, y) = (c1 * self.nkx as f64, c2 * self.nky as f64);
        let (xi, yi) = (x.round(), y.round());
        if (x - xi).abs() > 1e-7 || (y - yi).abs() > 1e-7 {
            return None;
        }
        Some(self.index_of(Momentum::new(xi as i64, yi as i64)))
    }

    /// Every fine-lattice momentum with `|p| <= radius`, sorted by norm then label.
    pub fn momenta_within(&self, radius: f64) -> Vec<Momentum> {
        let slack = 1e-9 * radius.max(1.0);
        let fine = Lattice {
            b1: self.e1(),
            b2: self.e2(),
            ..self.lattice.clone()
        };
        let h = cross(&fine.b1, &fine.b2).abs() / fine.b1.norm().max(fine.b2.norm());
        let r = (radius / h).ceil() as i64 + 1;
        let mut out: Vec<(f64, Momentum)> = Vec::new();
        for i in -r..=r {
            for j in -r..=r {
                let p = Momentum::new(i, j);
                let norm = self.vector(p).norm();
                if norm <= radius + slack {
                    out.push((norm, p));
                }
            }
        }
        out.sort_by(|a, b| {
            if (a.0 - b.0).abs() > 1e-9 * a.0.max(b.0).max(1.0) {
                a.0.partial_cmp(&b.0).unwrap()
            } else {
                a.1.cmp(&b.1)
            }
        });
        out.into_iter().map(|(_, p)| p).collect()
    }
}
