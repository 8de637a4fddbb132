use flatband_core::formfactor::{
    certificate_shells, certify_qc, certify_rank, default_ell2, eval_lll, FormFactorError,
    FormFactorModel, ModelKind,
};
use flatband_core::lattice::{
    cross, dual_shells, first_dual_vectors, DualVector, Momentum, MomentumGrid,
};
use nalgebra::DMatrix;
use num_complex::Complex64;

const GRIDS: [(usize, usize); 7] = [(1, 1), (2, 1), (3, 1), (2, 2), (3, 2), (1, 3), (6, 1)];

fn shells_upto(grid: &MomentumGrid, n: usize) -> Vec<DualVector> {
    first_dual_vectors(&grid.lattice, n)
}

/// Rank by the singular values of the explicit matrix, independent of the library routine.
fn svd_rank(model: &FormFactorModel, shells: &[DualVector]) -> usize {
    let g = &model.grid;
    let m = DMatrix::from_fn(shells.len(), g.len(), |r, k| {
        model.a(k, g.dual_momentum(shells[r].m, shells[r].n))
    });
    let sv = m.singular_values();
    sv.iter().filter(|&&s| s > 1e-10 * sv.max()).count()
}

#[test]
fn lll_matches_closed_form_modulus_and_normalization() {
    let grid = MomentumGrid::new(3, 2).unwrap();
    let model = FormFactorModel::lll(&grid);
    let ell2 = default_ell2(grid.lattice.cell_area);
    for k in 0..grid.len() {
        assert_eq!(model.a(k, Momentum::new(0, 0)), Complex64::new(1.0, 0.0));
        for q in grid.momenta_within(3.0 * grid.lattice.b1.norm()) {
            let v = grid.vector(q);
            let want = (-ell2 * v.norm_squared() / 4.0).exp();
            assert!((model.a(k, q).norm() - want).abs() < 1e-14);
            assert!(model.a(k, q).norm() > 0.0);
        }
    }
}

#[test]
fn raw_lll_gauge_symmetry_first_two_shells() {
    let grid = MomentumGrid::new(3, 2).unwrap();
    let ell2 = default_ell2(grid.lattice.cell_area);
    let shells = dual_shells(&grid.lattice, grid.lattice.b1.norm() * 3f64.sqrt() * 1.001);
    assert_eq!(shells.len(), 13);
    for p in &grid.points {
        for s in &shells {
            assert_eq!(
                eval_lll(p, &s.vec, ell2).conj(),
                eval_lll(&(-p), &s.vec, ell2)
            );
        }
        assert_eq!(eval_lll(p, &(p * 0.0), ell2), Complex64::new(1.0, 0.0));
    }
}

#[test]
fn lll_gauge_symmetry_for_all_transfers() {
    for &(nx, ny) in &GRIDS {
        let grid = MomentumGrid::new(nx, ny).unwrap();
        let model = FormFactorModel::lll(&grid);
        for k in 0..grid.len() {
            for q in grid.momenta_within(2.5 * grid.lattice.b1.norm()) {
                // conj(a_k(q')) = a_{k+q'}(-q') underlies rho(q')^dagger = rho(-q')
                let back = model.a(grid.shift(k, q), -q);
                assert!((model.a(k, q).conj() - back).norm() < 1e-12);
                if grid.is_dual(q) {
                    assert!((model.a(k, q).conj() - model.a(grid.neg(k), q)).norm() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn lll_boundary_phase_is_magnetic_translation() {
    // the stored value differs from the raw formula by exp(iℓ²(G0 × red)/2) up to a sign
    let grid = MomentumGrid::new(2, 2).unwrap();
    let model = FormFactorModel::lll(&grid);
    let l = &grid.lattice;
    for k in 0..grid.len() {
        for q in grid.momenta_within(2.0 * l.b1.norm()) {
            let (kr, (m0, n0)) = grid.reduce(grid.momentum(k) + q);
            let g0 = l.dual_point(m0, n0);
            let raw = eval_lll(&grid.points[k], &grid.vector(q), model.ell2);
            let phase = Complex64::from_polar(1.0, model.ell2 * cross(&g0, &grid.points[kr]) / 2.0);
            let ratio = model.a(k, q) / (raw * phase);
            assert!((ratio.norm() - 1.0).abs() < 1e-12);
            assert!(ratio.im.abs() < 1e-12);
            let want = if (m0 * n0).rem_euclid(2) == 0 {
                1.0
            } else {
                -1.0
            };
            assert!((ratio.re - want).abs() < 1e-12);
        }
    }
}

#[test]
fn non_integer_flux_rejected() {
    let grid = MomentumGrid::new(2, 1).unwrap();
    let ell2 = 1.5 * default_ell2(grid.lattice.cell_area);
    assert_eq!(
        FormFactorModel::new(ModelKind::Lll, &grid, Some(ell2), 64).unwrap_err(),
        FormFactorError::NonIntegerFlux(ell2)
    );
    let double = 2.0 * default_ell2(grid.lattice.cell_area);
    let m = FormFactorModel::new(ModelKind::Lll, &grid, Some(double), 64).unwrap();
    for k in 0..grid.len() {
        for q in grid.momenta_within(2.0 * grid.lattice.b1.norm()) {
            assert!((m.a(k, q).conj() - m.a(grid.shift(k, q), -q)).norm() < 1e-12);
        }
    }
}

#[test]
fn rank_certificates() {
    let grid = MomentumGrid::new(2, 2).unwrap();
    let lll = FormFactorModel::lll(&grid);
    let shells = shells_upto(&grid, 19);
    let cert = certify_rank(&lll, &shells).unwrap();
    assert_eq!(cert.rank, 4);
    assert_eq!(svd_rank(&lll, &shells), 4);
    assert!(cert.sigma_min > 1e-6);

    let g21 = MomentumGrid::new(2, 1).unwrap();
    let theta = FormFactorModel::theta_sampled(&g21, 64).unwrap();
    let s21 = shells_upto(&g21, 19);
    assert_eq!(certify_rank(&theta, &s21).unwrap().rank, 2);
    assert_eq!(svd_rank(&theta, &s21), 2);
}

#[test]
fn full_rank_for_all_small_grids() {
    for &(nx, ny) in &GRIDS {
        let grid = MomentumGrid::new(nx, ny).unwrap();
        for model in [
            FormFactorModel::lll(&grid),
            FormFactorModel::theta_sampled(&grid, 64).unwrap(),
        ] {
            let shells = certificate_shells(&model);
            assert!(shells.len() >= 19);
            let cert = certify_rank(&model, &shells).unwrap();
            assert_eq!(cert.rank, grid.len(), "{:?} on ({nx},{ny})", model.kind);
            assert_eq!(svd_rank(&model, &shells), grid.len());
        }
    }
}

#[test]
fn degenerate_model_has_rank_one() {
    for &(nx, ny) in &GRIDS[1..] {
        let grid = MomentumGrid::new(nx, ny).unwrap();
        let model = FormFactorModel::degenerate(&grid);
        let shells = certificate_shells(&model);
        match certify_rank(&model, &shells) {
            Err(FormFactorError::RankDeficient { rank, nk, witness }) => {
                assert_eq!(rank, 1);
                assert_eq!(nk, grid.len());
                // the witness combines identical columns to zero
                let m = model.on_lattice_matrix(&shells);
                let w = nalgebra::DVector::from_vec(witness);
                assert!((&m * &w).norm() < 1e-10 * w.norm().max(1.0));
                assert!(w.norm() > 0.5);
            }
            other => panic!("expected a rank deficiency, got {other:?}"),
        }
        assert_eq!(certify_qc(&model).unwrap().qc, f64::INFINITY);
    }
}

#[test]
fn qc_certificates() {
    let grid = MomentumGrid::new(3, 2).unwrap();
    assert_eq!(
        certify_qc(&FormFactorModel::lll(&grid)).unwrap().qc,
        f64::INFINITY
    );
    let one = MomentumGrid::new(1, 1).unwrap();
    assert!(certify_qc(&FormFactorModel::theta_sampled(&one, 64).unwrap()).is_ok());
    for &(nx, ny) in &GRIDS {
        let g = MomentumGrid::new(nx, ny).unwrap();
        let theta = FormFactorModel::theta_sampled(&g, 64).unwrap();
        let cert = certify_qc(&theta).unwrap();
        assert!(cert.qc > cert.spacing);
        // the certified radius really is free of small values
        for q in g.momenta_within(cert.qc) {
            for k in 0..g.len() {
                assert!(theta.a(k, q).norm() > 1e-6);
            }
        }
    }
}

#[test]
fn theta_sampled_normalization_and_gauge() {
    for &(nx, ny) in &GRIDS {
        let grid = MomentumGrid::new(nx, ny).unwrap();
        let model = FormFactorModel::theta_sampled(&grid, 64).unwrap();
        for k in 0..grid.len() {
            assert!((model.a(k, Momentum::new(0, 0)) - 1.0).norm() < 1e-14);
            for s in shells_upto(&grid, 7) {
                let g = grid.dual_momentum(s.m, s.n);
                assert!((model.a(k, g).conj() - model.a(grid.neg(k), g)).norm() < 1e-9);
            }
        }
    }
}

#[test]
fn theta_sampled_converges_with_samples() {
    let grid = MomentumGrid::new(3, 2).unwrap();
    let coarse = FormFactorModel::theta_sampled(&grid, 64).unwrap();
    let fine = FormFactorModel::theta_sampled(&grid, 128).unwrap();
    let two_shells = dual_shells(&grid.lattice, grid.lattice.b1.norm() * 3f64.sqrt() * 1.001);
    for k in 0..grid.len() {
        for s in &two_shells {
            let g = grid.dual_momentum(s.m, s.n);
            assert!((coarse.a(k, g) - fine.a(k, g)).norm() < 1e-8);
        }
    }
}

#[test]
fn theta_sampled_rejects_few_samples() {
    let grid = MomentumGrid::new(2, 1).unwrap();
    assert_eq!(
        FormFactorModel::theta_sampled(&grid, 16).unwrap_err(),
        FormFactorError::TooFewSamples(16)
    );
}

#[test]
fn theta_weight_is_cell_periodic() {
    let grid = MomentumGrid::new(3, 2).unwrap();
    let model = FormFactorModel::theta_sampled(&grid, 32).unwrap();
    let w = flatband_core::theta::omega();
    for k in 0..grid.len() {
        for (s, t) in [(0.13, 0.41), (0.77, 0.05), (0.5, 0.9)] {
            let z = Complex64::new(s, 0.0) + w * t;
            let base = model.theta_weight(k, z);
            assert!((model.theta_weight(k, z + 1.0) - base).abs() < 1e-10 * base);
            assert!((model.theta_weight(k, z + w) - base).abs() < 1e-10 * base);
        }
    }
}

#[test]
fn modulus_decreases_over_first_shells() {
    let grid = MomentumGrid::new(2, 2).unwrap();
    let shells = dual_shells(&grid.lattice, 2.0 * grid.lattice.b1.norm() * 1.001);
    // group the first three nonzero shells by norm
    let mut norms: Vec<f64> = Vec::new();
    for s in &shells {
        if norms.last().is_none_or(|&n| s.norm() > n + 1e-9) {
            norms.push(s.norm());
        }
    }
    assert!(norms.len() >= 4);
    for model in [
        FormFactorModel::lll(&grid),
        FormFactorModel::theta_sampled(&grid, 64).unwrap(),
    ] {
        let mut per_shell = Vec::new();
        for &n in &norms[..4] {
            let vals: Vec<f64> = shells
                .iter()
                .filter(|s| (s.norm() - n).abs() < 1e-9)
                .map(|s| model.a(0, grid.dual_momentum(s.m, s.n)).norm())
                .collect();
            per_shell.push(vals.iter().cloned().fold(0.0, f64::max));
            per_shell.push(vals.iter().cloned().fold(f64::INFINITY, f64::min));
        }
        // max of each shell is below the min of the previous one
        for i in 1..4 {
            assert!(
                per_shell[2 * i] < per_shell[2 * i - 1],
                "{:?} shell {i}",
                model.kind
            );
        }
    }
}

#[test]
fn imaginary_parts_cancel_over_inversion_closed_grids() {
    for &(nx, ny) in &GRIDS {
        let grid = MomentumGrid::new(nx, ny).unwrap();
        for model in [
            FormFactorModel::lll(&grid),
            FormFactorModel::theta_sampled(&grid, 64).unwrap(),
            FormFactorModel::degenerate(&grid),
        ] {
            for s in shells_upto(&grid, 19) {
                let g = grid.dual_momentum(s.m, s.n);
                let im: f64 = (0..grid.len()).map(|k| model.a(k, g).im).sum();
                assert!(im.abs() < 1e-9);
            }
        }
    }
}

#[test]
fn short_shell_lists_miss_grid_characters() {
    // no G among the first 19 has n ≡ 3 (mod 6), so the alternating combination is invisible
    let grid = MomentumGrid::new(6, 1).unwrap();
    let model = FormFactorModel::lll(&grid);
    match certify_rank(&model, &shells_upto(&grid, 19)) {
        Err(FormFactorError::RankDeficient {
            rank: 5, witness, ..
        }) => {
            let first = witness[0];
            for (j, w) in witness.iter().enumerate() {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                assert!((w - first * sign).norm() < 1e-9);
            }
        }
        other => panic!("unexpected {other:?}"),
    }
    let shells = certificate_shells(&model);
    assert!(shells.iter().any(|g| g.n.rem_euclid(6) == 3));
    assert_eq!(certify_rank(&model, &shells).unwrap().rank, 6);
}
