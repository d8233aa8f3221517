//! Admissible shift sets, the gcd ladder and the frequency boost.

mod common;

use common::{params, q, random_problem, rat};
use flowtile::admissible::{
    boost_m_bound, brute_force_a_n, check_witness, cosparse_step, enumerate_a_n, frequency_boost, gcd_ladder,
    neighbourhood, BoostOptions, LadderEnd, ShiftProblem,
};
use flowtile::exactnum::{real_gcd, QuadReal};
use flowtile::tileable::{freq_alpha, TileVector};
use num_traits::Signed;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tv(p: u64, q: u64) -> TileVector {
    TileVector::new(p, q)
}

#[test]
fn singleton_and_empty_problems() {
    let p = params();
    let one = ShiftProblem::new(&p, q("1/2"), vec![q("3")], vec![vec![tv(3, 0)]]).unwrap();
    assert_eq!(enumerate_a_n(&p, &one).unwrap().keys(), vec![tv(3, 0)]);
    let empty = ShiftProblem::new(&p, q("1/2"), vec![q("3"), q("3")], vec![vec![tv(3, 0)], vec![]]).unwrap();
    assert!(enumerate_a_n(&p, &empty).unwrap().is_empty());
    assert!(brute_force_a_n(&p, &empty, 100).unwrap().is_empty());
    let single = ShiftProblem::new(&p, q("1/2"), vec![q("3"), q("3")], vec![vec![tv(3, 0)], vec![tv(3, 0)]]).unwrap();
    assert_eq!(brute_force_a_n(&p, &single, 100).unwrap().len(), 1);
}

#[test]
fn zero_deviation_selection_is_admissible() {
    let p = params();
    let gaps = vec![q("3"), q("1 + sqrt(2)"), q("2*sqrt(2)")];
    let cands = vec![
        vec![tv(3, 0), tv(2, 1)],
        vec![tv(1, 1), tv(2, 0)],
        vec![tv(0, 2), tv(3, 0)],
    ];
    let prob = ShiftProblem::new(&p, q("1/2"), gaps, cands).unwrap();
    assert!(enumerate_a_n(&p, &prob).unwrap().contains(tv(4, 3)));
}

#[test]
fn ladder_special_cases() {
    let l = gcd_ladder(&q("-sqrt(2)"), &q("sqrt(2)"), None, 10).unwrap();
    assert_eq!(l.end, LadderEnd::AZero);
    assert_eq!(l.terminal(), q("sqrt(2)"));
    let l = gcd_ladder(&q("-1"), &q("sqrt(2)"), Some(&q("1/100")), 1000).unwrap();
    assert!(l.last().a.abs() < q("1/100") && l.last().b < q("1/100"));
}

#[test]
fn boost_bound_examples() {
    let p = params();
    let b = |d: &str, z: (i64, i64)| boost_m_bound(&p, &q(d), &rat(z.0, z.1)).unwrap();
    assert!(b("5", (1, 4)) >= b("5", (1, 2)));
    assert!(b("8", (1, 2)) >= b("5", (1, 2)));
    assert!(boost_m_bound(&p, &q("5"), &rat(0, 1)).is_err());
}

#[test]
fn boost_rejects_short_problems() {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let prob = common::boost_problem(&mut rng, 3);
    let r = frequency_boost(&p, &prob, &p.rho, &rat(1, 4), &rat(1, 8), &BoostOptions::default());
    assert!(r.is_err());
}

#[test]
fn boost_symmetric_candidates() {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..10 {
        let prob = common::boost_problem(&mut rng, 6);
        let opts = BoostOptions { min_n_override: Some(1) };
        let x = frequency_boost(&p, &prob, &p.rho, &rat(1, 4), &rat(1, 8), &opts).unwrap();
        assert!((freq_alpha(x.counts).unwrap() - &p.rho).abs() <= rat(1, 4));
        assert!(check_witness(&p, &prob, &x.witness));
    }
}

#[test]
fn cosparse_step_elements_are_admissible() {
    let p = params();
    let eps = q("1");
    let gaps: Vec<QuadReal> = (0..16).map(|i| QuadReal::frac(400 + i % 3, 2)).collect();
    let cands: Vec<Vec<TileVector>> = gaps.iter().map(|d| neighbourhood(&p, d, &eps)).collect();
    let prob = ShiftProblem::new(&p, eps, gaps, cands).unwrap();
    let sets = cosparse_step(&p, &prob, &q("1"), &rat(1, 4), &rat(1, 4), &rat(0, 1)).unwrap();
    assert!(!sets.low.is_empty() && !sets.high.is_empty());
    let oracle = enumerate_a_n(&p, &prob).unwrap();
    for e in sets.low.iter().chain(&sets.high) {
        assert!(oracle.contains(e.counts));
        assert!(check_witness(&p, &prob, &e.witness));
    }
}

fn problem_strategy() -> impl Strategy<Value = ShiftProblem> {
    any::<u64>().prop_map(|seed| random_problem(&mut ChaCha8Rng::seed_from_u64(seed), 5, 3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dp_matches_brute_force(prob in problem_strategy()) {
        let p = params();
        let a = enumerate_a_n(&p, &prob).unwrap();
        let b = brute_force_a_n(&p, &prob, 1 << 20).unwrap();
        prop_assert_eq!(a.keys(), b.keys());
    }

    #[test]
    fn witnesses_replay(prob in problem_strategy()) {
        let p = params();
        let a = enumerate_a_n(&p, &prob).unwrap();
        for e in &a.elements {
            prop_assert!(check_witness(&p, &prob, &e.witness));
            let sum = e.witness.iter().fold(TileVector::default(), |s, v| s.plus(*v));
            prop_assert_eq!(sum, e.counts);
            prop_assert_eq!(p.value(sum), e.value.clone());
        }
    }

    #[test]
    fn additivity(seed in any::<u64>(), m in 1usize..3, extra in 1usize..3) {
        // Constant gap d with d itself among the candidates.
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps = q("1/2");
        let d_vec = tv(rand::Rng::gen_range(&mut rng, 1..4), rand::Rng::gen_range(&mut rng, 1..4));
        let d = p.value(d_vec);
        let mut r = neighbourhood(&p, &d, &eps);
        r.truncate(3);
        if !r.contains(&d_vec) {
            r.push(d_vec);
        }
        let mk = |n: usize| ShiftProblem::new(&p, eps.clone(), vec![d.clone(); n], vec![r.clone(); n]).unwrap();
        let am = enumerate_a_n(&p, &mk(m)).unwrap();
        let an = enumerate_a_n(&p, &mk(m + extra)).unwrap();
        for x in am.keys() {
            let shifted = TileVector::new(x.p + d_vec.p * extra as u64, x.q + d_vec.q * extra as u64);
            prop_assert!(an.contains(shifted));
        }
    }

    #[test]
    fn ladder_coefficients(an in 1i64..40, ad in 1i64..5, bn in 1i64..40, bd in 1i64..5, rad in 0u8..3) {
        let unit = match rad { 0 => q("1"), 1 => q("sqrt(2)"), _ => q("1 + sqrt(2)") };
        let a = -(&unit * &QuadReal::frac(an, ad));
        let b = &unit * &QuadReal::frac(bn, bd);
        let l = gcd_ladder(&a, &b, None, 500).unwrap();
        for s in &l.steps {
            let ak = &a.scale_int(s.pa as i64) + &b.scale_int(s.qa as i64);
            let bk = &a.scale_int(s.pb as i64) + &b.scale_int(s.qb as i64);
            prop_assert_eq!(&ak, &s.a);
            prop_assert_eq!(&bk, &s.b);
        }
        prop_assert_eq!(l.terminal(), real_gcd(&a, &b));
    }
}
