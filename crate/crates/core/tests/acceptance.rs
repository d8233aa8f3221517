//! Acceptance suite: one PASS/FAIL line per criterion, then a single assert.

mod common;

use common::{boost_problem, params, q, random_problem, rat, schedule, sparse_fixture};
use flowtile::admissible::{
    brute_force_a_n, enumerate_a_n, frequency_boost, gcd_ladder, lattice_threshold, neighbourhood,
    rearrange_permutation, BoostOptions, ShiftProblem,
};
use flowtile::exactnum::{real_gcd, QuadReal};
use flowtile::loe::{build_loe, match_equidense, order_pairing, tiles, verify_loe, LoeOptions};
use flowtile::sections::{block_b, check_block_posts, classes_leq, insert_blocks, is_sparse_window, OrbitWindow};
use flowtile::simflow::{generate, GeneratorSpec};
use flowtile::tileable::{freq_alpha, Letter, TileVector};
use flowtile::tiler::{
    full_pipeline, sparse_tile_with, verify_uniform_frequency, SparseOptions, TiledSection, UniformFrequency,
};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn pipeline_outputs() -> (Vec<(OrbitWindow, TiledSection)>, Duration, Vec<String>) {
    let p = params();
    let s = schedule();
    let start = Instant::now();
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for seed in 0..50 {
        let w = generate(&p, &GeneratorSpec::uniform(s.k[0].clone(), 1000, seed)).unwrap();
        match full_pipeline(&w, s) {
            Ok(t) => out.push((w, t)),
            Err(e) => errors.push(format!("seed {seed}: {e}")),
        }
    }
    (out, start.elapsed(), errors)
}

fn c1(runs: &[(OrbitWindow, TiledSection)], took: Duration, errors: &[String]) -> Outcome {
    if let Some(e) = errors.first() {
        return Err(format!("pipeline error: {e}"));
    }
    let p = params();
    let mut gaps = 0usize;
    for (i, (_, t)) in runs.iter().enumerate() {
        for g in t.to_window().gaps() {
            if g != p.alpha && g != p.beta {
                return Err(format!("window {i}: gap {g} is not a tile"));
            }
            gaps += 1;
        }
    }
    if took >= Duration::from_secs(60) {
        return Err(format!("took {took:?}"));
    }
    Ok(format!("{} windows, {gaps} gaps all in {{alpha, beta}}, {took:.2?}", runs.len()))
}

fn c2(runs: &[(OrbitWindow, TiledSection)]) -> Outcome {
    let bound = params().min_alpha_one().scale(&rat(1, 3));
    let mut worst = QuadReal::zero();
    for (i, (w, t)) in runs.iter().enumerate() {
        for (j, (a, b)) in w.positions.iter().zip(&t.anchors).enumerate() {
            let d = (b - a).abs();
            if d > bound {
                return Err(format!("window {i} point {j}: displacement {d}"));
            }
            worst = QuadReal::max_of(&worst, &d);
        }
    }
    Ok(format!("max displacement ~{:.6} <= {:.6}", worst.to_f64(), bound.to_f64()))
}

fn c3(runs: &[(OrbitWindow, TiledSection)]) -> Outcome {
    let p = params();
    let s = schedule();
    let mut ns = [0u64; 2];
    for (i, (_, t)) in runs.iter().enumerate() {
        for (k, eta) in [rat(1, 4), rat(1, 8)].iter().enumerate() {
            match verify_uniform_frequency(t, eta).map_err(|e| e.to_string())?.result {
                UniformFrequency::Bound { n } => ns[k] = ns[k].max(n),
                UniformFrequency::Counterexample { .. } => return Err(format!("window {i}: no N for eta {eta}")),
            }
        }
        let regions = t.regions();
        for j in 1..=4usize {
            let eta_j = rat(1, 1 << j);
            for (ri, r) in regions.iter().enumerate() {
                let w = t
                    .witnesses
                    .iter()
                    .find(|w| w.level == j && w.region == ri)
                    .ok_or_else(|| format!("window {i}: no level-{j} witness for region {ri}"))?;
                if w.limit != s.l[j] || w.eta != eta_j {
                    return Err(format!("window {i}: level-{j} witness has wrong bounds"));
                }
                let word = t.region_word(*r);
                let mut at = 0;
                for &c in &w.cuts {
                    let piece = word.slice(at, c);
                    if piece.is_empty() || piece.value(&p) > s.l[j] {
                        return Err(format!("window {i}: level-{j} piece too long or empty"));
                    }
                    if (freq_alpha(piece.counts()).unwrap() - &p.rho).abs() > eta_j {
                        return Err(format!("window {i}: level-{j} piece frequency off"));
                    }
                    at = c;
                }
                if at != word.len() {
                    return Err(format!("window {i}: level-{j} cuts do not cover the region"));
                }
            }
        }
    }
    Ok(format!("N(1/4) <= {}, N(1/8) <= {}; witnesses at levels 1..=4 replay", ns[0], ns[1]))
}

fn c4() -> Outcome {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let start = Instant::now();
    let mut nonempty = 0;
    for i in 0..500 {
        let prob = random_problem(&mut rng, 8, 4);
        let a = enumerate_a_n(&p, &prob).map_err(|e| e.to_string())?;
        let b = brute_force_a_n(&p, &prob, 1 << 20).map_err(|e| e.to_string())?;
        let ka: BTreeSet<TileVector> = a.keys().into_iter().collect();
        let kb: BTreeSet<TileVector> = b.keys().into_iter().collect();
        if ka != kb {
            return Err(format!("problem {i}: DP and oracle differ"));
        }
        if !ka.is_empty() {
            nonempty += 1;
        }
    }
    let took = start.elapsed();
    if took >= Duration::from_secs(30) {
        return Err(format!("took {took:?}"));
    }
    Ok(format!("500 problems agree ({nonempty} non-empty), {took:.2?}"))
}

fn c5() -> Outcome {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let eta = rat(1, 8);
    let zeta = rat(1, 4);
    for i in 0..100 {
        let n = rng.gen_range(4..=8);
        let prob = boost_problem(&mut rng, n);
        let gamma = rat(24 + rng.gen_range(1..16), 64);
        let opts = BoostOptions { min_n_override: Some(1) };
        let x = frequency_boost(&p, &prob, &gamma, &zeta, &eta, &opts).map_err(|e| format!("problem {i}: {e}"))?;
        let f = freq_alpha(x.counts).unwrap();
        if (&f - &gamma).abs() > zeta {
            return Err(format!("problem {i}: frequency {f} vs gamma {gamma}"));
        }
        let oracle = brute_force_a_n(&p, &prob, 1 << 20).map_err(|e| e.to_string())?;
        if !oracle.contains(x.counts) {
            return Err(format!("problem {i}: result not in the oracle set"));
        }
    }
    Ok("100 boosts inside the zeta band and in the oracle set".into())
}

fn c6() -> Outcome {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut done = 0;
    while done < 1000 {
        let d = common::grid_value(&mut rng, 3, 12);
        let eps = [q("1/2"), q("1")][rng.gen_range(0..2)].clone();
        let nb = neighbourhood(&p, &d, &eps);
        if nb.is_empty() {
            continue;
        }
        let n = rng.gen_range(2..=12);
        let mut vals: Vec<QuadReal> = (0..n - 1).map(|_| p.value(*nb.choose(&mut rng).unwrap())).collect();
        let partial: QuadReal = vals.iter().sum();
        let need = d.scale_int(n as i64) - partial;
        let Some(last) = nb.iter().map(|v| p.value(*v)).find(|x| (&need - x).abs() < eps) else { continue };
        vals.push(last);
        if done % 3 == 0 {
            vals.sort_by(|a, b| b.cmp(a));
        }
        let perm = rearrange_permutation(&vals, &d, &eps).map_err(|e| format!("instance {done}: {e}"))?;
        let mut seen = perm.clone();
        seen.sort_unstable();
        if seen != (0..n).collect::<Vec<_>>() {
            return Err(format!("instance {done}: not a permutation"));
        }
        let mut sum = QuadReal::zero();
        for (k, &i) in perm.iter().enumerate() {
            sum = &sum + &vals[i];
            if (d.scale_int(k as i64 + 1) - &sum).abs() >= eps {
                return Err(format!("instance {done}: prefix {} leaves the band", k + 1));
            }
        }
        done += 1;
    }
    Ok("1000 instances keep every prefix within eps".into())
}

fn c7() -> Outcome {
    let p = params();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut lattice_checked = 0;
    let mut pairs = 0;
    while pairs < 100 {
        // g = gx + gy*sqrt(2) > 0 and a = -pa*g, b = qb*g.
        let (gx, gy) = (rng.gen_range(-2i64..=3), rng.gen_range(-2i64..=2));
        let g = p.value_signed(gx, gy);
        if g.signum() <= 0 {
            continue;
        }
        let (pa, qb) = (rng.gen_range(1i64..=4), rng.gen_range(1i64..=4));
        let a = g.scale_int(-pa);
        let b = g.scale_int(qb);
        pairs += 1;
        let lad = gcd_ladder(&a, &b, None, 200).map_err(|e| e.to_string())?;
        let gcd = real_gcd(&a.abs(), &b);
        if lad.terminal() != gcd || gcd != g.scale_int(num_integer::gcd(pa, qb)) {
            return Err(format!("pair ({a}, {b}): terminal {} vs gcd {gcd}", lad.terminal()));
        }
        for st in &lad.steps {
            if st.a != p_a(&a, &b, st.pa, st.qa) || st.b != p_a(&a, &b, st.pb, st.qb) {
                return Err(format!("pair ({a}, {b}): ladder coefficients do not replay"));
            }
        }
        // Constant gap d with R = {d, d + a, d + b}; x = d + a, y = d + b lie in A_1.
        let base = 3 * (pa.max(qb) * (gx.abs() + gy.abs()) + 1);
        let dv = TileVector::new(base as u64, base as u64);
        let shift = |k: i64| TileVector::new((base + k * gx) as u64, (base + k * gy) as u64);
        let r = vec![dv, shift(-pa), shift(qb)];
        let d = p.value(dv);
        let eps = QuadReal::max_of(&a.abs(), &b) + q("1/2");
        let n = lattice_threshold(&lad, 1, &eps);
        if n > 40 {
            continue;
        }
        let n = n as usize;
        let prob = ShiftProblem::new(&p, eps.clone(), vec![d.clone(); n], vec![r; n]).map_err(|e| e.to_string())?;
        let set = enumerate_a_n(&p, &prob).map_err(|e| e.to_string())?;
        let kmax = (&eps / &gcd).ceil().to_i64().unwrap();
        let step = g.scale_int(num_integer::gcd(pa, qb));
        let (sx, sy) = (gx * num_integer::gcd(pa, qb), gy * num_integer::gcd(pa, qb));
        for k in -kmax..=kmax {
            if step.scale_int(k).abs() >= eps {
                continue;
            }
            let v = TileVector::new((base * n as i64 + k * sx) as u64, (base * n as i64 + k * sy) as u64);
            if !set.contains(v) {
                return Err(format!("pair ({a}, {b}): nd + {k} gcd missing from A_{n}"));
            }
        }
        lattice_checked += 1;
    }
    Ok(format!("100 ladders end at the gcd; lattice points verified on {lattice_checked} of them"))
}

fn p_a(a: &QuadReal, b: &QuadReal, p: u64, q: u64) -> QuadReal {
    a.scale_int(p as i64) + b.scale_int(q as i64)
}

fn c8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for t in 0..200 {
        let len = rng.gen_range(1..=5);
        let mut ks = vec![QuadReal::frac(rng.gen_range(8..160), 8)];
        for _ in 1..len {
            let next = ks.last().unwrap() + QuadReal::frac(rng.gen_range(8..400), 8);
            ks.push(next);
        }
        let b = block_b(&ks).map_err(|e| e.to_string())?;
        let w = OrbitWindow::open(b.positions.clone()).unwrap();
        for n in 0..len - 1 {
            let upper = classes_leq(&w, &ks[n + 1]);
            let lower = classes_leq(&w, &ks[n]).class_of(w.len());
            for c in &upper.classes {
                let inner: BTreeSet<usize> = c.iter().map(|i| lower[*i]).collect();
                if inner.len() != 2 {
                    return Err(format!("list {t}: a K_{}-class holds {} K_{n}-classes", n + 1, inner.len()));
                }
            }
        }
    }
    let p = params();
    let ks = vec![q("2"), q("6"), q("20")];
    let eps = q("1");
    let mut inserted = 0;
    for seed in 0..50 {
        let w = generate(&p, &GeneratorSpec::sparse_geometric(q("10"), 2, 6, 200, seed)).unwrap();
        if !is_sparse_window(&w, &q("640")) {
            return Err(format!("window {seed} is not sparse"));
        }
        let ins = insert_blocks(&w, &ks, &eps).map_err(|e| format!("window {seed}: {e}"))?;
        check_block_posts(&ins.window, &ks, &eps).map_err(|e| format!("window {seed}: {e}"))?;
        if !w.positions.iter().all(|x| ins.window.positions.binary_search(x).is_ok()) {
            return Err(format!("window {seed}: an original point was lost"));
        }
        inserted += ins.inserted;
    }
    Ok(format!("200 block lists split in two; 50 insertions ({inserted} points) meet posts (i)-(iii)"))
}

fn c9() -> Outcome {
    let s = schedule();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let opts = SparseOptions { prepare_blocks: false, ..SparseOptions::default() };
    let outer = &s.k[s.depth] + q("1000");
    let mut stages = 0;
    for i in 0..20 {
        let classes = rng.gen_range(1..=6);
        let w = sparse_fixture(&mut rng, s, classes, &outer);
        let before: Vec<Vec<usize>> = s.k.iter().map(|k| classes_leq(&w, k).sizes()).collect();
        let (t, reports) = sparse_tile_with(&w, s, &opts).map_err(|e| format!("window {i}: {e}"))?;
        for r in &reports {
            if r.class_sizes != before {
                return Err(format!("window {i}: stage {} changed the classes", r.stage));
            }
            stages += 1;
        }
        let after: Vec<Vec<usize>> = s.k.iter().map(|k| classes_leq(&t.anchor_window(), k).sizes()).collect();
        if after != before {
            return Err(format!("window {i}: final classes differ"));
        }
        let inside = w.gaps().iter().filter(|g| **g <= s.k[s.depth]).count();
        let tiled = t.gaps.iter().filter(|g| g.is_some()).count();
        if inside != tiled {
            return Err(format!("window {i}: {tiled} tiled gaps, expected {inside}"));
        }
    }
    Ok(format!("20 sparse windows, {stages} stages preserve sizes and order at every K_n"))
}

fn c10() -> Outcome {
    let p = params();
    let s = schedule();
    let mut pairs = 0;
    for seed in 0..50u64 {
        let w1 = generate(&p, &GeneratorSpec::uniform(s.k[0].clone(), 120, 1000 + seed)).unwrap();
        let w2 = generate(&p, &GeneratorSpec::uniform(s.k[0].clone(), 120, 2000 + seed)).unwrap();
        let t1 = full_pipeline(&w1, s).map_err(|e| e.to_string())?;
        let t2 = full_pipeline(&w2, s).map_err(|e| e.to_string())?;
        let (s1, s2) = (tiles(&t1).unwrap(), tiles(&t2).unwrap());
        let n1 = s1.iter().filter(|x| x.1 == Letter::A).count();
        let n2 = s2.iter().filter(|x| x.1 == Letter::A).count();
        let m = build_loe(&t1, &t2, &order_pairing(n1, n2), &LoeOptions::default()).map_err(|e| e.to_string())?;
        let rep = verify_loe(&m);
        if !rep.passed() {
            return Err(format!("pair {seed}: {}", rep.failures[0]));
        }
        for pc in &m.pieces {
            let len = if pc.kind == Letter::A { &p.alpha } else { &p.beta };
            let (src_kind, dst_kind) = (s1[pc.source_index].1, s2[pc.target_index].1);
            if src_kind != pc.kind || dst_kind != pc.kind || &pc.source.1 - &pc.source.0 != *len {
                return Err(format!("pair {seed}: piece type or length mismatch"));
            }
        }
        pairs += 1;
    }
    let mut fracs = Vec::new();
    for n in [100usize, 1000, 10000] {
        let (a, b) = rotation_sets(n);
        fracs.push(match_equidense(&a, &b, n).residue_fraction());
    }
    if !(fracs[0] > fracs[1] && fracs[1] > fracs[2]) {
        return Err(format!("residue fractions {fracs:?} do not decrease"));
    }
    Ok(format!("{pairs} maps verified; residue fractions {fracs:.4?}"))
}

/// Visits of two rotations in Q(sqrt 2) to `[0, 1/2)`, both of frequency 1/2.
fn rotation_sets(n: usize) -> (Vec<usize>, Vec<usize>) {
    let half = q("1/2");
    let hits = |angle: QuadReal, phase: QuadReal| -> Vec<usize> {
        let mut x = phase;
        let mut out = Vec::new();
        for i in 0..n {
            if x < half {
                out.push(i);
            }
            x = &x + &angle;
            let f = QuadReal::rational(BigRational::from_integer(x.floor()));
            x = &x - &f;
        }
        out
    };
    (hits(q("sqrt(2) - 1"), q("0")), hits(q("3*sqrt(2) - 4"), q("1/3")))
}

fn c11() -> Outcome {
    let p = params();
    let s = schedule();
    let width = p.beta.scale_int(20);
    for (i, rec) in s.witnesses.iter().enumerate() {
        let thr = rec.threshold();
        for k in 0..10 {
            let from = &thr + width.scale_int(k);
            if !rec.check_window(&p, &from, &width).is_dense() {
                return Err(format!("witness {i} ({}) fails on window {k}", rec.purpose));
            }
        }
    }
    Ok(format!("{} witnesses dense on 10 windows each", s.witnesses.len()))
}

#[test]
fn acceptance() {
    let start = Instant::now();
    let (runs, took, errors) = pipeline_outputs();
    println!("pipeline outputs built in {:.1?}", start.elapsed());
    let criteria: Vec<Criterion<'_>> = vec![
        ("regularity", Box::new(|| c1(&runs, took, &errors))),
        ("displacement bound", Box::new(|| c2(&runs))),
        ("uniform frequency", Box::new(|| c3(&runs))),
        ("A_n oracle equivalence", Box::new(c4)),
        ("frequency boost contract", Box::new(c5)),
        ("rearrangement", Box::new(c6)),
        ("gcd ladder dichotomy", Box::new(c7)),
        ("block structure", Box::new(c8)),
        ("class preservation", Box::new(c9)),
        ("LOE assembly", Box::new(c10)),
        ("density witnesses", Box::new(c11)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = run();
        let el = t.elapsed();
        match r {
            Ok(m) => println!("criterion {:>2} {name}: PASS ({m}) [{el:.1?}]", i + 1),
            Err(m) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({m}) [{el:.1?}]", i + 1)
            }
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
