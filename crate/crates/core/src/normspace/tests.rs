use super::*;
use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_op(rng: &mut ChaCha8Rng, d: usize, spread: f64) -> OperatorValue {
    loop {
        let m = Matrix::identity(d, d) + Matrix::from_fn(d, d, |_, _| rng.gen_range(-spread..spread));
        if let Ok(a) = OperatorValue::new(m) {
            if a.max_norm() < 4.0 {
                return a;
            }
        }
    }
}

fn random_norm(rng: &mut ChaCha8Rng, d: usize, n: usize) -> NormRep {
    NormRep::new((0..n).map(|_| random_op(rng, d, 0.6))).unwrap()
}

/// Grid maximum of `f(cos t, sin t)` over `t ∈ [0, π)`, refined twice around
/// the best node so that corner peaks are resolved.
fn circle_sup(n: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let (mut lo, mut width) = (0.0, std::f64::consts::PI);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..3 {
        let step = width / n as f64;
        let (k, v) = (0..=n)
            .map(|k| {
                let t = lo + step * k as f64;
                (k, f(&[t.cos(), t.sin()]))
            })
            .fold((0, f64::NEG_INFINITY), |acc, kv| if kv.1 > acc.1 { kv } else { acc });
        best = best.max(v);
        lo += step * (k as f64 - 1.0);
        width = 2.0 * step;
    }
    best
}

fn circle_ratio(phi1: &NormRep, phi2: &NormRep, n: usize) -> f64 {
    circle_sup(n, |v| phi1.eval(v).unwrap() / phi2.eval(v).unwrap())
}

fn circle_dist(phi1: &NormRep, phi2: &NormRep, n: usize) -> f64 {
    circle_ratio(phi1, phi2, n).max(circle_ratio(phi2, phi1, n)).ln()
}

fn circle_dist_prime(phi1: &NormRep, phi2: &NormRep, n: usize) -> f64 {
    circle_sup(n, |v| (phi1.eval(v).unwrap() - phi2.eval(v).unwrap()).abs())
}

/// Unit vectors from normalised Gaussian-like cube samples, independent of the library's sets.
fn sphere_points(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| x / len).collect()
        })
        .collect()
}

#[test]
fn eval_examples() {
    let phi0 = NormRep::euclidean(2);
    assert_eq!(phi0.eval(&[0.6, 0.8]).unwrap(), 1.0);
    let phi = NormRep::singleton(OperatorValue::diagonal(&[2.0, 1.0]).unwrap());
    assert_eq!(phi.eval(&[0.0, 1.0]).unwrap(), 1.0);
    assert_eq!(phi.eval(&[1.0, 0.0]).unwrap(), 2.0);
    assert!(matches!(phi.eval(&[1.0]), Err(NormError::DimMismatch { expected: 2, found: 1 })));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let gens: Vec<OperatorValue> = (0..5).map(|_| random_op(&mut rng, 3, 0.8)).collect();
    let phi = NormRep::unpruned(gens.clone()).unwrap();
    for v in sphere_points(&mut rng, 3, 50) {
        let brute = gens
            .iter()
            .map(|a| (a.matrix() * DVector::from_column_slice(&v)).norm())
            .fold(0.0, f64::max);
        assert_eq!(phi.eval(&v).unwrap(), brute);
    }
    assert_eq!(NormRep::new(Vec::new()).unwrap_err(), NormError::Empty);
}

#[test]
fn pullback_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let phi = random_norm(&mut rng, 2, 3);
    let same = phi.pullback(&OperatorValue::identity(2)).unwrap();
    assert!(norm_distance(&phi, &same).unwrap().hi < 1e-15);
    let (a, b) = (random_op(&mut rng, 2, 0.5), random_op(&mut rng, 2, 0.5));
    let nested = pullback(&a, &pullback(&b, &phi).unwrap()).unwrap();
    let direct = pullback(&b.compose(&a), &phi).unwrap();
    for v in sphere_points(&mut rng, 2, 200) {
        assert_relative_eq!(nested.eval(&v).unwrap(), direct.eval(&v).unwrap(), max_relative = 1e-12);
        let av = a.matrix() * DVector::from_column_slice(&v);
        assert_relative_eq!(pullback(&a, &phi).unwrap().eval(&v).unwrap(), phi.eval(av.as_slice()).unwrap(), max_relative = 1e-12);
    }
    let rotated = pullback(&OperatorValue::rotation(2, 0.7), &NormRep::euclidean(2)).unwrap();
    assert_eq!(rotated, NormRep::euclidean(2));
}

#[test]
fn max_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let phi = random_norm(&mut rng, 2, 4);
    assert_eq!(max_norms(&[phi.clone(), phi.clone()]).unwrap(), phi);
    let diag = OperatorValue::diagonal(&[2.0, 1.0]).unwrap();
    let joined = max_norms(&[NormRep::euclidean(2), NormRep::singleton(diag.clone())]).unwrap();
    assert_eq!(joined.generators(), &[diag]);
    let (p, q) = (random_norm(&mut rng, 3, 3), random_norm(&mut rng, 3, 3));
    let m = max_norms(&[p.clone(), q.clone()]).unwrap();
    for v in sphere_points(&mut rng, 3, 1000) {
        let want = p.eval(&v).unwrap().max(q.eval(&v).unwrap());
        assert_relative_eq!(m.eval(&v).unwrap(), want, max_relative = 1e-11);
    }
    assert_eq!(max_norms(&[]).unwrap_err(), NormError::Empty);
}

#[test]
fn pruning_is_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for d in [2, 3] {
        for _ in 0..20 {
            let gens: Vec<OperatorValue> = (0..12).map(|_| random_op(&mut rng, d, 0.5)).collect();
            let raw = NormRep::unpruned(gens.clone()).unwrap();
            let pruned = NormRep::new(gens).unwrap();
            assert!(pruned.len() <= raw.len());
            for (i, a) in pruned.generators().iter().enumerate() {
                for (j, b) in pruned.generators().iter().enumerate() {
                    if i != j {
                        assert!(spectral_norm(&(a.matrix() * b.inverse_matrix())) > 1.0);
                    }
                }
            }
            for v in sphere_points(&mut rng, d, 1000) {
                assert_relative_eq!(pruned.eval(&v).unwrap(), raw.eval(&v).unwrap(), max_relative = 1e-11);
            }
        }
    }
}

#[test]
fn distance_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let phi = random_norm(&mut rng, 2, 3);
    assert_eq!(norm_distance(&phi, &phi).unwrap().hi, 0.0);
    let diag = NormRep::singleton(OperatorValue::diagonal(&[2.0, 0.5]).unwrap());
    let d = norm_distance(&NormRep::euclidean(2), &diag).unwrap();
    assert_eq!(d.width(), 0.0);
    assert_relative_eq!(d.lo, 2f64.ln(), max_relative = 1e-15);
    assert!(norm_distance(&NormRep::euclidean(2), &NormRep::euclidean(3)).is_err());
}

#[test]
fn singleton_distance_matches_sphere_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let (a, b) = (random_op(&mut rng, 2, 0.8), random_op(&mut rng, 2, 0.8));
        let d = norm_distance(&NormRep::unpruned(vec![a.clone()]).unwrap(), &NormRep::unpruned(vec![b.clone()]).unwrap()).unwrap();
        assert_eq!(d.width(), 0.0);
        let oracle = circle_dist(&NormRep::unpruned(vec![a]).unwrap(), &NormRep::unpruned(vec![b]).unwrap(), 200_000);
        assert!((d.lo - oracle).abs() < 1e-6);
    }
}

#[test]
fn planar_distance_is_tight() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..30 {
        let n1 = rng.gen_range(1..6);
        let n2 = rng.gen_range(2..6);
        let (p, q) = (random_norm(&mut rng, 2, n1), random_norm(&mut rng, 2, n2));
        let d = norm_distance(&p, &q).unwrap();
        let oracle = circle_dist(&p, &q, 20_000);
        assert!(d.width() < 1e-10);
        assert!(d.contains(oracle, 1e-9), "{d:?} vs {oracle}");
        let dp = norm_distance_prime(&p, &q).unwrap();
        let oracle = circle_dist_prime(&p, &q, 20_000);
        assert!(dp.width() < 1e-9);
        assert!(dp.contains(oracle, 1e-9), "{dp:?} vs {oracle}");
    }
}

#[test]
fn spatial_intervals_contain_sampled_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for d in [3, 4] {
        for _ in 0..8 {
            let (p, q) = (random_norm(&mut rng, d, 3), random_norm(&mut rng, d, 2));
            let dist = norm_distance(&p, &q).unwrap();
            let prime = norm_distance_prime(&p, &q).unwrap();
            let pts = sphere_points(&mut rng, d, 20_000);
            let (mut r12, mut r21, mut gap) = (0.0_f64, 0.0_f64, 0.0_f64);
            for v in &pts {
                let (a, b) = (p.eval(v).unwrap(), q.eval(v).unwrap());
                r12 = r12.max(a / b);
                r21 = r21.max(b / a);
                gap = gap.max((a - b).abs());
            }
            assert!(r12.max(r21).ln() <= dist.hi + 1e-12);
            assert!(gap <= prime.hi + 1e-12);
            assert!(dist.lo <= dist.hi && prime.lo <= prime.hi);
        }
    }
}

#[test]
fn distance_prime_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for d in [2, 3] {
        let phi = random_norm(&mut rng, d, 3);
        let same = norm_distance_prime(&phi, &phi).unwrap();
        assert_eq!(same.lo, 0.0);
        assert!(same.hi < 1e-9 || d == 3);
        let double = NormRep::singleton(OperatorValue::scalar(2.0, d).unwrap());
        let one = norm_distance_prime(&NormRep::euclidean(d), &double).unwrap();
        assert_relative_eq!(one.lo, 1.0, max_relative = 1e-14);
        if d == 2 {
            assert_relative_eq!(one.hi, 1.0, max_relative = 1e-14);
        }
    }
    let p5 = NormRep::euclidean(5);
    assert_eq!(
        norm_distance_prime_with(&p5, &p5, DistPrimeMethod::Grid).unwrap_err(),
        NormError::GridUnavailable(5)
    );
    let alg = norm_distance_prime_with(&p5, &NormRep::singleton(OperatorValue::scalar(2.0, 5).unwrap()), DistPrimeMethod::Algebraic).unwrap();
    assert!(alg.contains(1.0, 1e-12));
}

#[test]
fn equivalence_examples() {
    let phi0 = NormRep::euclidean(2);
    let diag = NormRep::singleton(OperatorValue::diagonal(&[2.0, 0.5]).unwrap());
    let rep = check_metric_equivalence(&phi0, &diag, 2.0).unwrap();
    assert!(rep.holds);
    assert_relative_eq!(rep.dist.lo, 2f64.ln(), max_relative = 1e-15);
    assert!(rep.dist_prime.contains(1.0, 1e-9));
    let same = check_metric_equivalence(&diag, &diag, 2.0).unwrap();
    assert!(same.holds && same.dist.hi == 0.0);
    assert!(matches!(check_metric_equivalence(&phi0, &diag, 1.5), Err(NormError::OutsideBall { .. })));
}

#[test]
fn pullback_lipschitz_examples() {
    let phi0 = NormRep::euclidean(2);
    let id = OperatorValue::identity(2);
    let stretched = OperatorValue::diagonal(&[1.1, 1.0]).unwrap();
    let rep = check_pullback_lipschitz(&id, &stretched, &phi0, 1.1).unwrap();
    assert!(rep.holds);
    assert_relative_eq!(rep.dist.lo, 1.1f64.ln(), max_relative = 1e-14);
    assert_relative_eq!(rep.bound, 1.1f64.powi(4) * 0.1, max_relative = 1e-12);
    let zero = check_pullback_lipschitz(&stretched, &stretched, &phi0, 1.1).unwrap();
    assert!(zero.holds && zero.dist.hi == 0.0 && zero.bound == 0.0);
    assert!(check_pullback_lipschitz(&id, &stretched, &phi0, 1.05).is_err());
}

#[test]
fn max_inequality_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let list: Vec<NormRep> = (0..3).map(|_| random_norm(&mut rng, 2, 2)).collect();
    let rep = check_max_inequality(&list, &list).unwrap();
    assert!(rep.holds && rep.lhs.hi == 0.0 && rep.rhs == 0.0);
    let (a, b) = (random_norm(&mut rng, 2, 1), random_norm(&mut rng, 2, 1));
    let rep = check_max_inequality(&[a.clone()], &[b.clone()]).unwrap();
    assert_eq!(rep.lhs, norm_distance(&a, &b).unwrap());
    assert!(rep.holds);
    assert!(check_max_inequality(&list, &list[..2]).is_err());
}

#[test]
fn ball_diameter_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for d in [2, 3] {
        for _ in 0..20 {
            let phi = random_norm(&mut rng, d, 3);
            let k = phi.equivalence_constant();
            let dist = norm_distance(&phi, &NormRep::euclidean(d)).unwrap();
            assert!(dist.hi <= k.ln() + 1e-12);
            for v in sphere_points(&mut rng, d, 100) {
                let value = phi.eval(&v).unwrap();
                assert!(value <= k * (1.0 + 1e-12) && value >= (1.0 - 1e-12) / k);
            }
        }
    }
}

fn arb_op2() -> impl Strategy<Value = OperatorValue> {
    prop::array::uniform4(-0.7f64..0.7).prop_filter_map("invertible", |e| {
        let a = OperatorValue::from_rows(2, &[1.0 + e[0], e[1], e[2], 1.0 + e[3]]).ok()?;
        (a.max_norm() < 5.0).then_some(a)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pullback_action_is_isometric(a in arb_op2(), b in arb_op2(), c in arb_op2(), e in arb_op2()) {
        let p = NormRep::singleton(a);
        let q = NormRep::singleton(b);
        let before = norm_distance(&p, &q).unwrap();
        let after = norm_distance(&p.pullback(&c).unwrap(), &q.pullback(&c).unwrap()).unwrap();
        prop_assert!((before.lo - after.lo).abs() < 1e-9);
        let p2 = max_norms(&[p.clone(), NormRep::singleton(e)]).unwrap();
        let before = norm_distance(&p2, &q).unwrap();
        let after = norm_distance(&p2.pullback(&c).unwrap(), &q.pullback(&c).unwrap()).unwrap();
        prop_assert!(before.overlaps(&after, 1e-9));
    }

    #[test]
    fn distance_is_a_metric(a in arb_op2(), b in arb_op2(), c in arb_op2(), e in arb_op2()) {
        let p = max_norms(&[NormRep::singleton(a), NormRep::singleton(e)]).unwrap();
        let q = NormRep::singleton(b);
        let r = NormRep::singleton(c);
        let pq = norm_distance(&p, &q).unwrap();
        let qp = norm_distance(&q, &p).unwrap();
        prop_assert!(pq.overlaps(&qp, 1e-12));
        let pr = norm_distance(&p, &r).unwrap();
        let qr = norm_distance(&q, &r).unwrap();
        prop_assert!(pr.lo <= pq.hi + qr.hi + 1e-12);
    }

    #[test]
    fn monotone_under_max(a in arb_op2(), b in arb_op2(), v in prop::array::uniform2(-1.0f64..1.0)) {
        prop_assume!(v[0].hypot(v[1]) > 1e-3);
        let p = NormRep::singleton(a);
        let m = max_norms(&[p.clone(), NormRep::singleton(b)]).unwrap();
        prop_assert!(m.eval(&v).unwrap() >= p.eval(&v).unwrap() * (1.0 - 1e-12));
    }
}
