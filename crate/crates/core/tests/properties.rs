use flatband_core::fock::{annihilate, create, hop, FockSector, ModeLayout, Variant};
use flatband_core::formfactor::FormFactorModel;
use flatband_core::lattice::{reduce_mod_dual, Lattice, Momentum, MomentumGrid, Vec2};
use flatband_core::predict::predict_dims;
use flatband_core::reptheory::{hook_dim, lr_column_product, Partition};
use proptest::prelude::*;

fn partition() -> impl Strategy<Value = Partition> {
    prop::collection::vec(1usize..5, 1..5).prop_map(|mut v| {
        v.sort_by(|a, b| b.cmp(a));
        Partition::new(v).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reduction_lands_in_the_cell(x in -40.0f64..40.0, y in -40.0f64..40.0) {
        let l = Lattice::triangular();
        let q = Vec2::new(x, y);
        let (r, (m, n)) = reduce_mod_dual(&l, &q);
        let (s, t) = l.dual_coords(&r);
        prop_assert!((-1e-9..1.0 + 1e-9).contains(&s));
        prop_assert!((-1e-9..1.0 + 1e-9).contains(&t));
        prop_assert!((r + l.dual_point(m, n) - q).norm() < 1e-9);
    }

    #[test]
    fn grid_reduction_is_consistent(nkx in 1usize..6, nky in 1usize..6, i in -30i64..30, j in -30i64..30) {
        let g = MomentumGrid::new(nkx, nky).unwrap();
        let p = Momentum::new(i, j);
        let (k, (m, n)) = g.reduce(p);
        prop_assert_eq!(g.momentum(k) + g.dual_momentum(m, n), p);
        prop_assert!((g.vector(p) - g.points[k] - g.lattice.dual_point(m, n)).norm() < 1e-9);
        prop_assert_eq!(g.index_of(p + g.dual_momentum(3, -2)), k);
        prop_assert_eq!(g.neg(g.index_of(-p)), k);
    }

    #[test]
    fn sector_ranking_round_trips(nk in 1usize..4, v in 0usize..3, fill in 0usize..=8) {
        let variant = Variant::all()[v];
        let layout = ModeLayout::new(variant, nk).unwrap();
        prop_assume!(fill <= layout.n_modes());
        let s = FockSector::new(layout, fill).unwrap();
        for idx in (0..s.dim()).step_by(1 + s.dim() / 50) {
            let pat = s.pattern(idx);
            prop_assert_eq!(pat.count_ones() as usize, fill);
            prop_assert_eq!(s.index_of(pat), Some(idx));
        }
    }

    #[test]
    fn creation_and_hopping_signs(pattern in 0u64..(1 << 12), a in 0usize..12, b in 0usize..12) {
        if let Some((q, s)) = create(pattern, a) {
            let (back, s2) = annihilate(q, a).unwrap();
            prop_assert_eq!(back, pattern);
            prop_assert_eq!(s * s2, 1.0);
            let below = (pattern & ((1u64 << a) - 1)).count_ones();
            prop_assert_eq!(s, if below % 2 == 0 { 1.0 } else { -1.0 });
        } else {
            prop_assert!(pattern >> a & 1 == 1);
        }
        // f†_a f_b as a product of the two single-mode maps
        let composed = annihilate(pattern, b).and_then(|(p1, s1)| create(p1, a).map(|(p2, s2)| (p2, s1 * s2)));
        prop_assert_eq!(hop(pattern, a, b), composed);
    }

    #[test]
    fn lll_form_factor_hermiticity(nkx in 1usize..5, nky in 1usize..4, i in -12i64..12, j in -12i64..12, k in 0usize..20) {
        let g = MomentumGrid::new(nkx, nky).unwrap();
        let k = k % g.len();
        let model = FormFactorModel::lll(&g);
        let q = Momentum::new(i, j);
        let kq = g.shift(k, q);
        // a_k(q)* = a_{k+q}(-q) makes ρ(q)† = ρ(-q)
        let lhs = model.a(k, q).conj();
        let rhs = model.a(kq, -q);
        prop_assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1e-300) + 1e-300);
        prop_assert!((model.a(k, Momentum::new(0, 0)) - 1.0).norm() < 1e-12);
    }

    #[test]
    fn column_products_conserve_dimension(lambda in partition(), m in 1usize..5, d in 1usize..6) {
        prop_assume!(m <= d);
        let column = Partition::new(vec![1; m]).unwrap();
        let product = lr_column_product(&lambda, m, d);
        let total: u128 = product.iter().map(|p| hook_dim(p, d)).sum();
        prop_assert_eq!(total, hook_dim(&lambda, d) * hook_dim(&column, d));
        for p in &product {
            prop_assert_eq!(p.size(), lambda.size() + m);
            prop_assert!(p.rows() <= d);
        }
    }

    #[test]
    fn conjugation_is_an_involution(lambda in partition()) {
        let c = Partition::new(lambda.conjugate()).unwrap();
        prop_assert_eq!(c.size(), lambda.size());
        prop_assert_eq!(Partition::new(c.conjugate()).unwrap(), lambda);
    }

    #[test]
    fn predictions_are_palindromic(nk in 1usize..12, v in 0usize..3) {
        let p = predict_dims(Variant::all()[v], nk);
        let dims: Vec<u128> = p.per_lambda.iter().map(|x| x.1).collect();
        let rev: Vec<u128> = dims.iter().rev().cloned().collect();
        prop_assert_eq!(&dims, &rev);
        prop_assert_eq!(dims[0], 1);
        prop_assert_eq!(p.total, dims.iter().sum::<u128>());
    }
}
