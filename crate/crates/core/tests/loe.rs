//! Equidense matching and piecewise translation maps.

mod common;

use common::{params, schedule};
use flowtile::exactnum::QuadReal;
use flowtile::loe::{build_loe, mapped_lengths, match_equidense, order_pairing, tiles, verify_loe, LoeOptions, PiecewiseTranslationMap};
use flowtile::sections::OrbitWindow;
use flowtile::simflow::{generate, GeneratorSpec};
use flowtile::tileable::{Letter, TiledWord};
use flowtile::tiler::{full_pipeline, TiledSection};
use proptest::prelude::*;
use std::collections::{BTreeSet, HashMap};

/// One fully tiled gap holding `word`.
fn single(word: &str) -> TiledSection {
    let p = params();
    let w: TiledWord = word.parse().unwrap();
    let win = OrbitWindow::open(vec![QuadReal::zero(), w.value(&p)]).unwrap();
    let mut t = TiledSection::untiled(&p, &win, "test");
    t.gaps[0] = Some(w);
    t
}

fn alpha_count(t: &TiledSection) -> usize {
    tiles(t).unwrap().iter().filter(|x| x.1 == Letter::A).count()
}

fn order_map(t1: &TiledSection, t2: &TiledSection) -> PiecewiseTranslationMap {
    build_loe(t1, t2, &order_pairing(alpha_count(t1), alpha_count(t2)), &LoeOptions::default()).unwrap()
}

#[test]
fn identity_map() {
    let t = single("abbaabab");
    let m = order_map(&t, &t);
    assert!(verify_loe(&m).passed());
    assert_eq!(m.pieces.len(), 8);
    assert!(m.pieces.iter().all(|p| p.source == p.target && p.source_index == p.target_index));
}

#[test]
fn alternations_in_opposite_phase() {
    let (t1, t2) = (single(&"ab".repeat(10)), single(&"ba".repeat(10)));
    let m = order_map(&t1, &t2);
    assert!(verify_loe(&m).passed());
    assert_eq!(m.pieces.len(), 20);
    let s2 = tiles(&t2).unwrap();
    let a2: Vec<usize> = (0..s2.len()).filter(|&j| s2[j].1 == Letter::A).collect();
    let alpha: Vec<_> = m.pieces.iter().filter(|p| p.kind == Letter::A).collect();
    for (k, p) in alpha.iter().enumerate() {
        assert_eq!(p.target_index, a2[k]);
    }
    let (ls, lt) = mapped_lengths(&m);
    assert_eq!(ls, lt);
}

#[test]
fn corrupted_map_fails_with_index() {
    let t = single("abab");
    let mut m = order_map(&t, &t);
    let k = m.pieces.iter().position(|p| p.kind == Letter::A).unwrap();
    m.pieces[k].kind = Letter::B;
    let rep = verify_loe(&m);
    assert!(!rep.passed());
    assert!(rep.failures.iter().any(|f| f.contains(&format!("piece {k}"))));
}

#[test]
fn empty_map_passes() {
    let m = PiecewiseTranslationMap {
        params: params(),
        pieces: Vec::new(),
        residue_source: Vec::new(),
        residue_target: Vec::new(),
        source_freq: common::rat(1, 2),
        target_freq: common::rat(1, 2),
    };
    assert!(verify_loe(&m).passed());
}

#[test]
fn frequency_mismatch_is_rejected() {
    let (t1, t2) = (single(&"a".repeat(8)), single(&"ab".repeat(4)));
    let r = build_loe(&t1, &t2, &order_pairing(8, 4), &LoeOptions::default());
    assert!(r.is_err());
}

#[test]
fn pipeline_pair_preserves_base_map() {
    let s = schedule();
    let p = params();
    let t1 = full_pipeline(&generate(&p, &GeneratorSpec::uniform(s.k[0].clone(), 60, 1)).unwrap(), s).unwrap();
    let t2 = full_pipeline(&generate(&p, &GeneratorSpec::uniform(s.k[0].clone(), 60, 2)).unwrap(), s).unwrap();
    let psi = order_pairing(alpha_count(&t1), alpha_count(&t2));
    let m = build_loe(&t1, &t2, &psi, &LoeOptions::default()).unwrap();
    assert!(verify_loe(&m).passed());
    let (s1, s2) = (tiles(&t1).unwrap(), tiles(&t2).unwrap());
    let a1: Vec<usize> = (0..s1.len()).filter(|&i| s1[i].1 == Letter::A).collect();
    let a2: Vec<usize> = (0..s2.len()).filter(|&j| s2[j].1 == Letter::A).collect();
    let by_source: HashMap<usize, usize> = m.pieces.iter().map(|pc| (pc.source_index, pc.target_index)).collect();
    for (x, y) in &psi {
        assert_eq!(by_source[&a1[*x]], a2[*y]);
    }
    let json = serde_json::to_string(&m).unwrap();
    let back: PiecewiseTranslationMap = serde_json::from_str(&json).unwrap();
    assert_eq!(back, m);
}

fn index_sets() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (prop::collection::btree_set(0usize..80, 0..30), prop::collection::btree_set(0usize..80, 0..30))
        .prop_map(|(a, b)| (a.into_iter().collect(), b.into_iter().collect()))
}

proptest! {
    #[test]
    fn matching_is_a_disjoint_greedy_bijection((a, b) in index_sets(), max_k in 0usize..40) {
        let m = match_equidense(&a, &b, max_k);
        let mut seen = BTreeSet::new();
        for st in &m.stages {
            for x in st {
                prop_assert!(seen.insert(*x));
            }
        }
        let mut hit = BTreeSet::new();
        let mut stage_of_b = HashMap::new();
        for (x, y, k) in &m.pairs {
            prop_assert_eq!(*y, x + k);
            prop_assert!(a.contains(x) && b.contains(y));
            prop_assert!(hit.insert(*y));
            prop_assert!(*k <= max_k);
            stage_of_b.insert(*y, *k);
        }
        prop_assert_eq!(m.pairs.len() + m.residue_a.len(), a.len());
        prop_assert_eq!(m.pairs.len() + m.residue_b.len(), b.len());
        // An element enters at stage k only if no earlier stage had its
        // successor free; unmatched ones never found a free successor.
        let bset: BTreeSet<usize> = b.iter().copied().collect();
        let free_at = |y: usize, k: usize| bset.contains(&y) && stage_of_b.get(&y).is_none_or(|s| *s >= k);
        for (x, _, k) in &m.pairs {
            for earlier in 0..*k {
                prop_assert!(!free_at(x + earlier, earlier));
            }
        }
        for x in &m.residue_a {
            for k in 0..=max_k {
                prop_assert!(!free_at(x + k, k));
            }
        }
    }
}
