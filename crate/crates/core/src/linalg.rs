//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Singular values, padded so that a wide matrix still reports `ncols` of them.
fn svd_padded<T: ComplexField<RealField = f64>>(
    mat: &DMatrix<T>,
) -> nalgebra::SVD<T, nalgebra::Dyn, nalgebra::Dyn> {
    let (m, n) = mat.shape();
    let work = if m < n {
        let mut padded = DMatrix::<T>::zeros(n, n);
        padded.view_mut((0, 0), (m, n)).copy_from(mat);
        padded
    } else {
        mat.clone()
    };
    work.svd(true, true)
}

/// Numerical rank with cut `rel_tol · σ_max`.
pub fn rank<T: ComplexField<RealField = f64>>(mat: &DMatrix<T>, rel_tol: f64) -> usize {
    if mat.is_empty() {
        return 0;
    }
    let sv = mat.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Right null space of `mat` as orthonormal columns, with the singular values left behind.
pub fn null_space<T: ComplexField<RealField = f64>>(
    mat: &DMatrix<T>,
    rel_tol: f64,
) -> (DMatrix<T>, Vec<f64>) {
    let n = mat.ncols();
    if mat.nrows() == 0 || n == 0 {
        return (DMatrix::identity(n, n), vec![]);
    }
    let svd = svd_padded(mat);
    let v = svd.v_t.as_ref().unwrap().adjoint();
    let sv = svd.singular_values.clone();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..n)
        .filter(|&j| sv[j] <= rel_tol * smax || smax == 0.0)
        .collect();
    let mut out = DMatrix::<T>::zeros(n, keep.len());
    for (c, &j) in keep.iter().enumerate() {
        out.set_column(c, &v.column(j));
    }
    (out, sv.iter().cloned().collect())
}

/// Eigenpairs of a Hermitian matrix sorted by ascending eigenvalue.
pub fn hermitian_eigen<T: ComplexField<RealField = f64>>(
    mat: &DMatrix<T>,
) -> (Vec<f64>, DMatrix<T>) {
    let n = mat.nrows();
    if n == 0 {
        return (vec![], DMatrix::zeros(0, 0));
    }
    let eig = mat.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let mut vecs = DMatrix::<T>::zeros(n, n);
    for (c, &j) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(j));
    }
    (vals, vecs)
}

/// Incrementally built orthonormal basis (two-pass Gram–Schmidt).
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    dim: usize,
    vectors: Vec<CVec>,
}

impl OrthoBasis {
    pub fn new(dim: usize) -> Self {
        OrthoBasis {
            dim,
            vectors: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Add `v` if its component outside the span exceeds `rel_cut · |v|`.
    pub fn try_add(&mut self, v: &CVec, rel_cut: f64) -> bool {
        let norm0 = v.norm();
        if norm0 == 0.0 {
            return false;
        }
        let mut r = v.clone();
        for _ in 0..2 {
            for b in &self.vectors {
                let c = b.dotc(&r);
                r.axpy(-c, b, Complex64::new(1.0, 0.0));
            }
        }
        let nr = r.norm();
        if nr <= rel_cut * norm0 {
            return false;
        }
        self.vectors.push(r / Complex64::new(nr, 0.0));
        true
    }

    pub fn to_matrix(&self) -> CMat {
        let mut m = CMat::zeros(self.dim, self.vectors.len());
        for (j, v) in self.vectors.iter().enumerate() {
            m.set_column(j, v);
        }
        m
    }

    pub fn vectors(&self) -> &[CVec] {
        &self.vectors
    }
}

/// Haar-distributed unitary via QR of a complex Gaussian matrix with phase fix.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) / std::f64::consts::SQRT_2
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let mut col = q.column_mut(j);
        col *= ph;
    }
    q
}

pub fn unitarity_defect(u: &CMat) -> f64 {
    let n = u.nrows();
    if u.ncols() != n {
        return f64::INFINITY;
    }
    (u.adjoint() * u - CMat::identity(n, n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Sine of the largest principal angle between two equal-dimensional
/// subspaces given by orthonormal columns.
pub fn max_principal_sine(a: &CMat, b: &CMat) -> f64 {
    if b.ncols() == 0 {
        return 0.0;
    }
    let resid = b - a * (a.adjoint() * b);
    let gram = resid.adjoint() * &resid;
    let (vals, _) = hermitian_eigen(&gram);
    vals.last().cloned().unwrap_or(0.0).max(0.0).sqrt().min(1.0)
}

pub fn max_abs<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    m.iter().map(|z| z.clone().modulus()).fold(0.0, f64::max)
}
