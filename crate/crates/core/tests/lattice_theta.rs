use flatband_core::lattice::{
    dual_shells, reduce_mod_dual, Lattice, LatticeError, Momentum, MomentumGrid, Vec2,
};
use flatband_core::theta::{
    omega, resolve_norm_sq_sign, theta_norm_sq_expansion, theta_omega, theta_truncated,
    vandermonde_rank, ThetaError, NORM_SQ_SIGN,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn close(a: &Vec2, b: &Vec2) -> bool {
    (a - b).norm() < 1e-12
}

#[test]
fn two_by_two_grid_points() {
    let g = MomentumGrid::new(2, 2).unwrap();
    let l = &g.lattice;
    let want = [Vec2::zeros(), l.b2 / 2.0, l.b1 / 2.0, (l.b1 + l.b2) / 2.0];
    assert_eq!(g.len(), 4);
    for (p, w) in g.points.iter().zip(want.iter()) {
        assert!(close(p, w));
    }
    // -b1/2 is b1/2 modulo the dual lattice
    assert_eq!(g.locate(&(-l.b1 / 2.0)), Some(2));
}

#[test]
fn three_by_one_inversion() {
    let g = MomentumGrid::new(3, 1).unwrap();
    let l = &g.lattice;
    assert!(close(&g.points[1], &(l.b1 / 3.0)));
    assert!(close(&g.points[2], &(l.b1 * (2.0 / 3.0))));
    assert_eq!(g.locate(&(-l.b1 / 3.0)), Some(2));
    assert_eq!(g.neg(1), 2);
}

#[test]
fn grids_are_inversion_closed() {
    for nkx in 1..=5 {
        for nky in 1..=5 {
            let g = MomentumGrid::new(nkx, nky).unwrap();
            for k in 0..g.len() {
                let mk = g.locate(&(-g.points[k])).expect("-k on the grid");
                assert_eq!(mk, g.neg(k));
                assert_eq!(g.neg(mk), k);
            }
        }
    }
}

#[test]
fn invalid_grids_rejected() {
    assert_eq!(
        MomentumGrid::new(2, 0).unwrap_err(),
        LatticeError::InvalidGrid { nkx: 2, nky: 0 }
    );
    assert!(MomentumGrid::new(0, 1).is_err());
}

#[test]
fn reduction_examples() {
    let l = Lattice::triangular();
    let (r, g) = reduce_mod_dual(&l, &l.b1);
    assert!(r.norm() < 1e-12);
    assert_eq!(g, (1, 0));
    let (r, g) = reduce_mod_dual(&l, &(l.b1 * 1.25));
    assert!(close(&r, &(l.b1 * 0.25)));
    assert_eq!(g, (1, 0));
    let q = l.b1 * -0.25 + l.b2 * 0.5;
    let (r, g) = reduce_mod_dual(&l, &q);
    assert!(close(&r, &(l.b1 * 0.75 + l.b2 * 0.5)));
    assert_eq!(g, (-1, 0));
    assert!(close(&(r + l.dual_point(g.0, g.1)), &q));
}

#[test]
fn reduction_recovers_grid_point_and_shift() {
    let g = MomentumGrid::new(3, 2).unwrap();
    let l = &g.lattice;
    for k in 0..g.len() {
        for s in dual_shells(l, 2.0 * l.b1.norm()) {
            let (r, mn) = reduce_mod_dual(l, &(g.points[k] + s.vec));
            assert!(close(&r, &g.points[k]));
            assert_eq!(mn, (s.m, s.n));
            let (idx, mn2) = g.reduce(g.momentum(k) + g.dual_momentum(s.m, s.n));
            assert_eq!((idx, mn2), (k, (s.m, s.n)));
        }
    }
}

#[test]
fn shell_enumeration() {
    let l = Lattice::triangular();
    let b = l.b1.norm();
    let inner = dual_shells(&l, 0.99 * b);
    assert_eq!(inner.len(), 1);
    assert_eq!((inner[0].m, inner[0].n), (0, 0));

    let first = dual_shells(&l, b);
    let mut brute = Vec::new();
    for m in -3i64..=3 {
        for n in -3i64..=3 {
            if l.dual_point(m, n).norm() <= b * (1.0 + 1e-9) {
                brute.push((m, n));
            }
        }
    }
    let mut got: Vec<(i64, i64)> = first.iter().map(|s| (s.m, s.n)).collect();
    got.sort();
    brute.sort();
    assert_eq!(got, brute);
    assert_eq!(got.len(), 7);

    let two = dual_shells(&l, 2.0 * b);
    for s in &two {
        assert!(two.iter().any(|t| t.m == -s.m && t.n == -s.n));
    }
    assert!(two.windows(2).all(|w| w[0].norm() <= w[1].norm() + 1e-12));
}

#[test]
fn dual_basis_pairing() {
    let l = Lattice::triangular();
    let tau = 2.0 * PI;
    assert!((l.a1.dot(&l.b1) - tau).abs() < 1e-12);
    assert!(l.a1.dot(&l.b2).abs() < 1e-12);
    assert!(l.a2.dot(&l.b1).abs() < 1e-12);
    assert!((l.a2.dot(&l.b2) - tau).abs() < 1e-12);
    assert!((l.dual_cell_area() - tau * tau / l.cell_area).abs() < 1e-9);
}

#[test]
fn momentum_arithmetic_matches_vectors() {
    let g = MomentumGrid::new(4, 3).unwrap();
    let (p, q) = (Momentum::new(5, -2), Momentum::new(-3, 7));
    assert!(close(&g.vector(p + q), &(g.vector(p) + g.vector(q))));
    assert!(close(&g.vector(-p), &(-g.vector(p))));
    assert!(g.is_dual(g.dual_momentum(2, -1)));
    assert!(!g.is_dual(Momentum::new(1, 0)));
}

fn random_cell_point(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random::<f64>(), 0.0) + omega() * rng.random::<f64>()
}

#[test]
fn theta_vanishes_at_origin() {
    assert!(theta_omega(Complex64::new(0.0, 0.0)).norm() < 1e-14);
}

#[test]
fn theta_odd_and_antiperiodic() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut odd, mut anti) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let z = random_cell_point(&mut rng);
        let t = theta_omega(z);
        odd = odd.max((theta_omega(-z) + t).norm());
        anti = anti.max((theta_omega(z + 1.0) + t).norm());
    }
    assert!(odd < 1e-12, "oddness error {odd:e}");
    assert!(anti < 1e-12, "antiperiodicity error {anti:e}");
}

#[test]
fn theta_quasi_periodic_modulus() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w = omega();
    for _ in 0..100 {
        let z = random_cell_point(&mut rng);
        let lhs = theta_omega(z + w).norm_sqr();
        let rhs = (2.0 * PI * w.im).exp() * (4.0 * PI * z.im).exp() * theta_omega(z).norm_sqr();
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300), "z = {z}");
    }
}

#[test]
fn theta_zero_set_is_the_lattice() {
    let n = 60;
    for a in 0..n {
        for b in 0..n {
            let (s, t) = (a as f64 / n as f64, b as f64 / n as f64);
            let z = Complex64::new(s, 0.0) + omega() * t;
            let corners = [0.0, 1.0]
                .iter()
                .flat_map(|&x| [0.0, 1.0].map(|y| Complex64::new(x, 0.0) + omega() * y));
            let dist = corners
                .map(|c| (z - c).norm())
                .fold(f64::INFINITY, f64::min);
            if dist > 0.05 {
                assert!(
                    theta_omega(z).norm() > 0.0,
                    "zero away from the lattice at {z}"
                );
            }
        }
    }
}

#[test]
fn theta_truncation_is_stable() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let z = random_cell_point(&mut rng);
        let d = (theta_truncated(z, omega(), 24) - theta_truncated(z, omega(), 12)).norm();
        assert!(d < 1e-14);
    }
}

#[test]
fn norm_square_expansion() {
    let z = Complex64::new(0.3, 0.2);
    assert!((theta_norm_sq_expansion(z) - theta_omega(z).norm_sqr()).norm() < 1e-10);
    assert!(theta_norm_sq_expansion(Complex64::new(0.0, 0.0)).norm() < 1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let z = random_cell_point(&mut rng);
        let e = theta_norm_sq_expansion(z);
        assert!(e.im.abs() < 1e-10);
        assert!((e.re - theta_omega(z).norm_sqr()).abs() < 1e-10);
    }
}

#[test]
fn expansion_sign_resolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts: Vec<Complex64> = (0..10).map(|_| random_cell_point(&mut rng)).collect();
    let (sign, err, other) = resolve_norm_sq_sign(&pts);
    assert_eq!(sign, NORM_SQ_SIGN);
    assert!(err < 1e-10);
    // the wrong sign misses by 2|θ|^2
    let want = pts
        .iter()
        .map(|&z| 2.0 * theta_omega(z).norm_sqr())
        .fold(0.0, f64::max);
    assert!((other - want).abs() < 1e-9 * want.max(1.0));
}

#[test]
fn vandermonde_ranks() {
    let zero = Complex64::new(0.0, 0.0);
    assert_eq!(vandermonde_rank(&[0.0], zero).unwrap(), 1);
    assert_eq!(vandermonde_rank(&[0.0, 0.5], zero).unwrap(), 2);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let alphas: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
    let d = Complex64::new(rng.random::<f64>(), rng.random::<f64>());
    assert_eq!(vandermonde_rank(&alphas, d).unwrap(), 8);
    // large Im d scales the rows over many decades
    assert_eq!(
        vandermonde_rank(&alphas, Complex64::new(0.3, 0.7)).unwrap(),
        8
    );
    assert_eq!(
        vandermonde_rank(&alphas, Complex64::new(-0.1, -1.5)).unwrap(),
        8
    );
    assert_eq!(
        vandermonde_rank(&[0.2, 0.7, 0.2 + 1e-11], d),
        Err(ThetaError::DuplicateNodes { i: 0, j: 2 })
    );
}
