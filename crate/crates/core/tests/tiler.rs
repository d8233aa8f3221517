//! Schedules, the sparse and co-sparse pipelines, classification and the
//! frequency scan.

mod common;

use common::{params, q, rat, schedule};
use flowtile::exactnum::QuadReal;
use flowtile::sections::{classes_leq, is_sparse_window, OrbitWindow};
use flowtile::simflow::{generate, GeneratorSpec};
use flowtile::tileable::{freq_alpha, is_n_near, TiledWord};
use flowtile::tiler::{
    build_schedule, classify_limit, cosparse_construct, full_pipeline, sparse_tile, sparse_tile_with,
    verify_uniform_frequency, LimitClass, ScheduleOptions, SparseOptions, TiledSection, UniformFrequency,
};
use num_traits::Signed;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn word(s: &str) -> TiledWord {
    s.parse().unwrap()
}

/// Open section whose gaps are the given words, laid end to end, plus
/// untiled gaps of length `hole` where the word is `None`.
fn section(words: &[Option<&str>], hole: &QuadReal) -> TiledSection {
    let p = params();
    let mut pos = vec![QuadReal::zero()];
    for w in words {
        let len = match w {
            Some(s) => word(s).value(&p),
            None => hole.clone(),
        };
        let next = pos.last().unwrap() + &len;
        pos.push(next);
    }
    let mut t = TiledSection::untiled(&p, &OrbitWindow::open(pos).unwrap(), "test");
    for (i, w) in words.iter().enumerate() {
        t.gaps[i] = w.map(word);
    }
    t
}

#[test]
fn schedule_examples() {
    let p = params();
    let s1 = build_schedule(&p, &ScheduleOptions::with_depth(1)).unwrap();
    assert!(s1.k[0] >= p.beta.scale_int(4));
    // Depth 4 needs SB checks on generator words of ~10^7 letters; 3 is the
    // deepest schedule built here.
    for depth in 1..=3 {
        let s = build_schedule(&p, &ScheduleOptions::with_depth(depth)).unwrap();
        s.check_invariants().unwrap();
        // Later stages keep the L values fixed by earlier ones.
        for (i, pair) in s.l_stages.windows(2).enumerate() {
            assert_eq!(pair[0][..=i], pair[1][..=i]);
        }
        assert!(s.eta.windows(2).all(|e| e[1] < e[0]));
    }
}

#[test]
fn gap_of_six_is_tiled_within_eps() {
    let s = schedule();
    let p = params();
    let w = OrbitWindow::open(vec![q("0"), q("6")]).unwrap();
    let t = sparse_tile(&w, s).unwrap();
    let g = t.gaps[0].as_ref().unwrap();
    assert!((g.value(&p) - q("6")).abs() < s.eps_at(1));
    let f = freq_alpha(g.counts()).unwrap();
    assert!((f - &p.rho).abs() <= s.eta_at(1));
}

#[test]
fn single_class_becomes_one_near_word() {
    let s = schedule();
    let p = params();
    let pos: Vec<QuadReal> = (0..6).map(|i| QuadReal::int(7 * i)).collect();
    let w = OrbitWindow::open(pos).unwrap();
    let opts = SparseOptions { prepare_blocks: false, ..SparseOptions::default() };
    let (t, _) = sparse_tile_with(&w, s, &opts).unwrap();
    assert_eq!(t.regions().len(), 1);
    let word = t.region_word(t.regions()[0]);
    assert!(is_n_near(&p, word.counts(), s.n[1]));
}

#[test]
fn regular_window_is_unchanged() {
    let s = schedule();
    let p = params();
    let mut pos = vec![QuadReal::zero()];
    for i in 0..20 {
        let step = if i % 3 == 0 { &p.alpha } else { &p.beta };
        let next = pos.last().unwrap() + step;
        pos.push(next);
    }
    let w = OrbitWindow::open(pos).unwrap();
    let t = sparse_tile(&w, s).unwrap();
    assert_eq!(t.anchors, w.positions);
    assert_eq!(t.to_window(), w);
}

#[test]
fn cosparse_zero_stages_is_identity() {
    let s = schedule();
    let w = generate(&params(), &GeneratorSpec::uniform(s.k[0].clone(), 60, 4)).unwrap();
    let t = cosparse_construct(&w, s, 0, 1).unwrap();
    assert_eq!(t.anchors, w.positions);
    assert!(t.gaps.iter().all(|g| g.is_none()));
}

#[test]
fn cosparse_stage_one_structure() {
    let s = schedule();
    let p = params();
    let w = generate(&p, &GeneratorSpec::uniform(s.k[0].clone(), 200, 5)).unwrap();
    let t = cosparse_construct(&w, s, 1, 3).unwrap();
    for r in t.regions() {
        let f = freq_alpha(t.region_word(r).counts()).unwrap();
        assert!((f - &p.rho).abs() <= s.eta_at(1));
        assert!(t.ranks[r.first_gap] == 1);
    }
    if !t.flags.iter().any(|f| f.contains("failed")) {
        let starts: Vec<usize> = t.regions().iter().map(|r| r.first_gap).collect();
        let ends: Vec<usize> = t.regions().iter().map(|r| r.first_gap + r.len).collect();
        let n1 = s.cosparse_spacing[0] as usize;
        for i in 1..starts.len() {
            let untouched = starts[i] - ends[i - 1] - 1;
            assert!(untouched >= n1 && untouched <= 2 * n1 + 1, "{untouched} untouched points");
        }
    }
}

#[test]
fn cosparse_tilings_persist_across_stages() {
    let s = schedule();
    let w = generate(&params(), &GeneratorSpec::uniform(s.k[0].clone(), 200, 6)).unwrap();
    let one = cosparse_construct(&w, s, 1, 8).unwrap();
    let two = cosparse_construct(&w, s, 2, 8).unwrap();
    for (i, g) in one.gaps.iter().enumerate() {
        if g.is_some() {
            assert_eq!(&two.gaps[i], g);
            assert!(two.ranks[i] >= 1);
        }
    }
}

#[test]
fn classification_fixtures() {
    let hole = q("100");
    let regular = section(&[Some("ab"), Some("ba"), Some("a")], &hole);
    assert_eq!(classify_limit(&regular), LimitClass::FullyRegular);
    let half = section(&[Some("abab"), Some("ba"), Some("ab"), Some("ab"), None, Some("a")], &q("5"));
    assert_eq!(classify_limit(&half), LimitClass::HalfTiled);
    let finite: Vec<Option<&str>> = (0..12).map(|i| if i % 2 == 0 { Some("ab") } else { None }).collect();
    let t = section(&finite, &hole);
    assert_eq!(classify_limit(&t), LimitClass::FiniteClasses);
    assert!(is_sparse_window(&t.class_endpoint_window(), &hole));
}

#[test]
fn frequency_scan_examples() {
    let alt = section(&[Some(&"ab".repeat(20))], &q("1"));
    let r = verify_uniform_frequency(&alt, &rat(1, 4)).unwrap();
    assert_eq!(r.result, UniformFrequency::Bound { n: 2 });
    // Runs of three letters deviate by 1/6.
    let r = verify_uniform_frequency(&alt, &rat(1, 8)).unwrap();
    assert_eq!(r.result, UniformFrequency::Bound { n: 4 });
    let ones = section(&[Some(&"a".repeat(20))], &q("1"));
    let r = verify_uniform_frequency(&ones, &rat(1, 8)).unwrap();
    assert!(matches!(r.result, UniformFrequency::Counterexample { .. }));
}

#[test]
fn frequency_bound_is_monotone() {
    let s = schedule();
    let w = generate(&params(), &GeneratorSpec::uniform(s.k[0].clone(), 150, 11)).unwrap();
    let t = full_pipeline(&w, s).unwrap();
    let bound = |e: (i64, i64)| match verify_uniform_frequency(&t, &rat(e.0, e.1)).unwrap().result {
        UniformFrequency::Bound { n } => n,
        UniformFrequency::Counterexample { .. } => u64::MAX,
    };
    let ns: Vec<u64> = [(1, 16), (1, 8), (1, 4), (1, 2)].into_iter().map(bound).collect();
    assert!(ns.windows(2).all(|p| p[1] <= p[0]), "{ns:?}");
}

#[test]
fn tiled_section_json_round_trip() {
    let s = schedule();
    let w = generate(&params(), &GeneratorSpec::uniform(s.k[0].clone(), 40, 2)).unwrap();
    let t = full_pipeline(&w, s).unwrap();
    let back: TiledSection = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
    assert_eq!(back, t);
}

#[test]
fn sparse_fixture_preserves_classes() {
    let s = schedule();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let outer = &s.k[s.depth] + QuadReal::int(500);
    let w = common::sparse_fixture(&mut rng, s, 3, &outer);
    let opts = SparseOptions { prepare_blocks: false, ..SparseOptions::default() };
    let (t, reports) = sparse_tile_with(&w, s, &opts).unwrap();
    let before: Vec<Vec<usize>> = s.k.iter().map(|k| classes_leq(&w, k).sizes()).collect();
    for r in &reports {
        assert_eq!(r.class_sizes, before);
    }
    let after: Vec<Vec<usize>> = s.k.iter().map(|k| classes_leq(&t.anchor_window(), k).sizes()).collect();
    assert_eq!(after, before);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pipeline_displacement_and_witnesses(seed in 0u64..10_000, n in 20usize..120) {
        let s = schedule();
        let p = params();
        let w = generate(&p, &GeneratorSpec::uniform(s.k[0].clone(), n, seed)).unwrap();
        let t = full_pipeline(&w, s).unwrap();
        let bound = p.min_alpha_one().scale(&rat(1, 3));
        prop_assert!(s.eps_total() <= bound);
        for (i, (a, b)) in t.anchors.iter().zip(&w.positions).enumerate() {
            prop_assert!((a - b).abs() <= bound);
            let logged: QuadReal = t.shift_log[i].iter().map(|e| e.shift.clone()).sum();
            prop_assert_eq!(&(a - b), &logged);
        }
        t.verify_structure(s).unwrap();
        t.verify_witnesses().unwrap();
        for wt in &t.witnesses {
            if wt.level > 0 {
                prop_assert!(s.eta_at(wt.level) < s.eta_at(wt.level - 1));
            }
        }
    }
}
