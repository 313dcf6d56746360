use approx::assert_relative_eq;
use onplus::estimates::lemmas::{alpha_pq, random_unit};
use onplus::fourier::FourierAlgebra;
use onplus::linalg::{apply_left, apply_right, max_abs_real};
use onplus::qcore::{catalan, chebyshev_t, make_params, semicircle_integral};
use onplus::rep::{fusion_channels, RepBackend};
use onplus::weingarten::weingarten_table;
use onplus::{CoupledBackend, HVec, Mat, TensorBackend};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn coupled(n: usize) -> CoupledBackend {
    CoupledBackend::new(make_params(n).unwrap())
}

fn mat(r: usize, c: usize, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mat::from_fn(r, c, |_, _| rng.random::<f64>() - 0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn leg_actions_match_kronecker(ra in 1usize..5, da in 1usize..5, rb in 1usize..5, db in 1usize..5, m in 1usize..4, seed: u64) {
        let a = mat(ra, da, seed);
        let b = mat(rb, db, seed.wrapping_add(1));
        let v = mat(da * db, m, seed.wrapping_add(2));
        let left = a.kronecker(&Mat::identity(db, db)) * &v;
        let right = Mat::identity(da, da).kronecker(&b) * &v;
        prop_assert!(max_abs_real(&(apply_left(&a, &v, db) - left)) < 1e-14);
        prop_assert!(max_abs_real(&(apply_right(&b, &v, db) - right)) < 1e-14);
    }

    #[test]
    fn dimensions_satisfy_the_recursion(big_n in 3usize..12, n in 1usize..25) {
        let p = make_params::<f64>(big_n).unwrap();
        prop_assert!((p.q() + 1.0 / p.q() - big_n as f64).abs() < 1e-12);
        prop_assert!(p.q() > 0.0 && p.q() < 1.0);
        let rec = big_n as f64 * p.dim(n) - p.dim(n - 1);
        assert_relative_eq!(p.dim(n + 1), rec, max_relative = 1e-12);
        assert_relative_eq!(p.dim(n), p.dim_closed_form(n), max_relative = 1e-9);
        assert_relative_eq!(p.dim(n), chebyshev_t(n, big_n as f64), max_relative = 1e-12);
    }

    #[test]
    fn coefficient_inner_products(n in 0usize..4, seed: u64) {
        let b = coupled(3);
        let alg = FourierAlgebra::new(&b);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = b.dim(n);
        let mut v = || HVec::new(n, random_unit::<f64>(d, &mut rng));
        let (x, y, x2, y2) = (v(), v(), v(), v());
        let lhs = alg.inner_product(&alg.coefficient(&x, &y).unwrap(), &alg.coefficient(&x2, &y2).unwrap());
        let rhs = x.inner(&x2) * y2.inner(&y) / d as f64;
        prop_assert!((lhs - rhs).norm() < 1e-12);
        let h = alg.haar_of_product(&alg.adjoint(&alg.coefficient(&x, &y).unwrap()).unwrap(), &alg.coefficient(&x, &y).unwrap()).unwrap();
        prop_assert!(h.re > 0.0 && h.im.abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn characters_obey_the_fusion_rules(a in 0usize..4, c in 0usize..4) {
        let b = coupled(3);
        let alg = FourierAlgebra::new(&b);
        let prod = alg.multiply(&alg.character(a), &alg.character(c)).unwrap();
        let mut want = onplus::FourierElement::zero();
        for m in fusion_channels(a, c) {
            want = want.add(&alg.character(m));
        }
        prop_assert!(prod.sub(&want).max_abs() < 1e-10);
    }

    #[test]
    fn kappa_agrees_between_backends(l in 1usize..4, k in 1usize..4, pick in 0usize..4) {
        let p = make_params::<f64>(3).unwrap();
        let (t, c) = (TensorBackend::new(p.clone()), CoupledBackend::new(p));
        let channels: Vec<usize> = fusion_channels(l, k).collect();
        let m = channels[pick % channels.len()];
        let (kt, kc) = (t.kappa_probe(l, k, m).unwrap(), c.kappa(l, k, m).unwrap());
        assert_relative_eq!(kt.c, kc.c, max_relative = 1e-10);
        prop_assert!(kc.scalarity_residual < 1e-10);
    }
}

#[test]
fn weingarten_tables_are_exact_inverses() {
    for big_n in 3..=6 {
        for k in 1..=4 {
            assert!(weingarten_table(k, big_n).unwrap().is_exact_inverse(), "N={big_n} k={k}");
        }
    }
}

#[test]
fn character_moments_are_catalan_numbers() {
    for m in 0..=5 {
        let h = semicircle_integral(|s: f64| s.powi(2 * m as i32), 1e-13);
        assert_relative_eq!(h, catalan(m) as f64, max_relative = 1e-10);
    }
    assert_eq!([0, 1, 2, 3, 4, 5].map(catalan), [1, 1, 2, 5, 14, 42]);
}

#[test]
fn alpha_12_and_21_follow_dimension_ratio() {
    for big_n in [3usize, 4] {
        let b = coupled(big_n);
        let p = b.params();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (pp, qq) in [(1usize, 2usize), (2, 1)] {
            for n in 3..=6 {
                let z = random_unit::<f64>(b.dim(3), &mut rng);
                let r = alpha_pq(&b, n, pp, qq, &z).unwrap();
                let want = p.dim(n - 3) / p.dim(n - 1);
                assert!((r.alpha.0 - want).abs() < 1e-10 && r.alpha.1.abs() < 1e-10, "N={big_n} ({pp},{qq}) n={n}: {:?}", r.alpha);
                assert!((r.alpha_second.0 - want).abs() < 1e-10, "second N={big_n} ({pp},{qq}) n={n}");
            }
        }
    }
}

#[test]
fn alpha_does_not_depend_on_zeta() {
    let b = coupled(3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 4..=6 {
        let a1 = alpha_pq(&b, n, 2, 2, &random_unit::<f64>(b.dim(4), &mut rng)).unwrap();
        let a2 = alpha_pq(&b, n, 2, 2, &random_unit::<f64>(b.dim(4), &mut rng)).unwrap();
        assert!((a1.alpha.0 - a2.alpha.0).abs() < 1e-10 && (a1.alpha.1 - a2.alpha.1).abs() < 1e-10);
    }
}

#[test]
fn invariant_vectors_have_norm_sqrt_dim() {
    for big_n in [3usize, 5] {
        let b = coupled(big_n);
        for n in 0..=4 {
            let t = b.t_matrix(n).unwrap();
            assert_relative_eq!(t.norm_squared(), b.dim(n) as f64, max_relative = 1e-12);
        }
    }
}
