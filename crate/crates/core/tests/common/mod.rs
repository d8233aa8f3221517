//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use flowtile::admissible::{neighbourhood, ShiftProblem};
use flowtile::exactnum::QuadReal;
use flowtile::sections::OrbitWindow;
use flowtile::tileable::{freq_alpha, Params, TileVector};
use flowtile::tiler::{build_schedule, Schedule, ScheduleOptions};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;
use std::sync::OnceLock;

pub fn q(s: &str) -> QuadReal {
    s.parse().unwrap()
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn params() -> Params {
    Params::default_params()
}

/// Depth-2 schedule for the default parameters, built once.
pub fn schedule() -> &'static Schedule {
    static S: OnceLock<Schedule> = OnceLock::new();
    S.get_or_init(|| build_schedule(&params(), &ScheduleOptions::with_depth(2)).unwrap())
}

/// Random rational in `[lo, lo + span)` on a 1/8 grid.
pub fn grid_value<R: Rng>(rng: &mut R, lo: i64, span: i64) -> QuadReal {
    QuadReal::frac(lo * 8 + rng.gen_range(0..span * 8), 8)
}

/// Random shift problem with `n <= max_n` gaps and `|R_k| <= max_r`.
pub fn random_problem<R: Rng>(rng: &mut R, max_n: usize, max_r: usize) -> ShiftProblem {
    let p = params();
    let eps = [q("1/2"), q("1/3"), q("1")][rng.gen_range(0..3)].clone();
    let n = rng.gen_range(1..=max_n);
    let mut gaps = Vec::new();
    let mut adm = Vec::new();
    for _ in 0..n {
        let d = grid_value(rng, 3, 12);
        let mut nb = neighbourhood(&p, &d, &eps);
        nb.shuffle(rng);
        let k = if nb.is_empty() { 0 } else { rng.gen_range(1..=nb.len().min(max_r)) };
        nb.truncate(k);
        gaps.push(d);
        adm.push(nb);
    }
    ShiftProblem::new(&p, eps, gaps, adm).unwrap()
}

fn dense_pair(p: &Params, d: &QuadReal, eps: &QuadReal, cands: &[TileVector]) -> Option<[TileVector; 2]> {
    let mut best: Option<([TileVector; 2], QuadReal)> = None;
    for u in cands {
        for v in cands {
            let (vu, vv) = (p.value(*u), p.value(*v));
            if vu < *d && vv > *d {
                let w = &vv - &vu;
                if w < *eps && best.as_ref().is_none_or(|b| w < b.1) {
                    best = Some(([*u, *v], w));
                }
            }
        }
    }
    best.map(|b| b.0)
}

/// Boost instance: each `R_k` holds a dense pair of low-frequency and a dense
/// pair of high-frequency candidates (`eta = 1/8`, `eps = 1/2`).
pub fn boost_problem<R: Rng>(rng: &mut R, n: usize) -> ShiftProblem {
    let p = params();
    let eps = q("1/2");
    let eta = rat(1, 8);
    let mut gaps = Vec::new();
    let mut adm = Vec::new();
    while gaps.len() < n {
        let d = grid_value(rng, 8, 24);
        let nb = neighbourhood(&p, &d, &eps);
        let side = |high: bool| -> Vec<TileVector> {
            nb.iter()
                .copied()
                .filter(|v| {
                    let f = freq_alpha(*v).unwrap();
                    if high { f >= &p.rho + &eta } else { f <= &p.rho - &eta }
                })
                .collect()
        };
        let (Some(lo), Some(hi)) = (dense_pair(&p, &d, &eps, &side(false)), dense_pair(&p, &d, &eps, &side(true))) else {
            continue;
        };
        gaps.push(d);
        adm.push(vec![lo[0], lo[1], hi[0], hi[1]]);
    }
    ShiftProblem::new(&p, eps, gaps, adm).unwrap()
}

/// Ruler-pattern sparse window made of `classes` copies of
/// `B(K_0, .., K_depth)` whose gaps sit within `jitter < 1` of the level
/// midpoints; copies are separated by gaps `outer` (above `K_depth`).
pub fn sparse_fixture<R: Rng>(rng: &mut R, s: &Schedule, classes: usize, outer: &QuadReal) -> OrbitWindow {
    let depth = s.depth;
    let half = rat(1, 2);
    let mids: Vec<QuadReal> = (0..depth).map(|n| (&s.k[n] + &s.k[n + 1]).scale(&half)).collect();
    let per = 1usize << depth;
    let mut pos = vec![QuadReal::zero()];
    for c in 0..classes {
        for i in 1..per {
            let lvl = (i.trailing_zeros() as usize).min(depth - 1);
            let jitter = QuadReal::frac(rng.gen_range(-63..=63), 64);
            let next = pos.last().unwrap() + &mids[lvl] + jitter;
            pos.push(next);
        }
        if c + 1 < classes {
            let jitter = QuadReal::frac(rng.gen_range(0..64), 64);
            let next = pos.last().unwrap() + outer + jitter;
            pos.push(next);
        }
    }
    OrbitWindow::open(pos).unwrap()
}
