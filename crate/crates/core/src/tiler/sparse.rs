//! Sparse tiling: stage `n + 1` tiles every gap inside each
//! `K_{n+1}`-class, translating whole `K_n`-classes by a running deviation
//! that never leaves `(-eps_{n+1}, eps_{n+1})`.

use super::section::TiledSection;
use super::{Schedule, TilerError};
use crate::exactnum::QuadReal;
use crate::sections::{classes_leq, insert_blocks, OrbitWindow, SectionError};
use crate::tileable::{enumerate_tileable, freq_alpha, is_n_near, FreqBand, Letter, TileVector, TiledWord};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

/// Options for [`sparse_tile_with`].
#[derive(Clone, Debug)]
pub struct SparseOptions {
    /// Run block insertion first.
    pub prepare_blocks: bool,
    /// Tolerance of the inserted gaps around the level midpoints.
    pub insert_eps: QuadReal,
}

impl Default for SparseOptions {
    fn default() -> Self {
        SparseOptions { prepare_blocks: true, insert_eps: QuadReal::one() }
    }
}

/// Class structure after one stage.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageReport {
    /// Stage index.
    pub stage: usize,
    /// Class sizes at every `K_j`, `j = 0..=depth`.
    pub class_sizes: Vec<Vec<usize>>,
    /// Number of gaps tiled at this stage.
    pub tiled: usize,
    /// Gaps that needed a tileable outside the stage families.
    pub fallbacks: usize,
    /// `K_{stage}`-class words that are not `N_{stage}`-near rho.
    pub not_near: usize,
}

/// Sparse tiling with default options.
pub fn sparse_tile(w: &OrbitWindow, s: &Schedule) -> Result<TiledSection, TilerError> {
    sparse_tile_with(w, s, &SparseOptions::default()).map(|r| r.0)
}

fn class_sizes(w: &OrbitWindow, s: &Schedule) -> Vec<Vec<usize>> {
    s.k.iter().map(|k| classes_leq(w, k).sizes()).collect()
}

/// Sparse tiling; also returns the per-stage class reports.
pub fn sparse_tile_with(
    w: &OrbitWindow,
    s: &Schedule,
    opts: &SparseOptions,
) -> Result<(TiledSection, Vec<StageReport>), TilerError> {
    if w.len() < 2 {
        return Err(TilerError::Precondition("window needs at least two points".into()));
    }
    let params = &s.params;
    let gaps = w.gaps();
    if gaps.iter().all(|g| *g == params.alpha || *g == params.beta) {
        let mut t = TiledSection::untiled(params, w, "sparse");
        for (i, g) in gaps.iter().enumerate() {
            let l = if *g == params.alpha { Letter::A } else { Letter::B };
            t.gaps[i] = Some(TiledWord { letters: vec![l] });
        }
        t.attach_witnesses(s, s.depth, 0);
        return Ok((t, Vec::new()));
    }
    let mut flags = Vec::new();
    let prepared = if opts.prepare_blocks {
        match insert_blocks(w, &s.k, &opts.insert_eps) {
            Ok(ins) => {
                if ins.inserted > 0 {
                    flags.push(format!("inserted {} block points", ins.inserted));
                }
                ins.window
            }
            Err(SectionError::InsufficientSparsity { index, .. }) => {
                flags.push(format!("block insertion not applicable at gap {index}; tiling the raw window"));
                w.clone()
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        w.clone()
    };
    let mut t = TiledSection::untiled(params, &prepared, "sparse");
    t.flags = flags;
    let before = class_sizes(&prepared, s);
    let mut reports = Vec::new();
    for n in 0..s.depth {
        let stage = n + 1;
        let report = run_stage(&mut t, s, stage)?;
        let after = class_sizes(&t.anchor_window(), s);
        if after != before {
            return Err(TilerError::Stage { stage, msg: "class structure changed".into() });
        }
        if report.fallbacks > 0 {
            t.flags.push(format!("stage {stage}: {} gaps used tileables outside the stage families", report.fallbacks));
        }
        if report.not_near > 0 {
            t.flags.push(format!("stage {stage}: {} class words not N_{stage}-near rho", report.not_near));
        }
        reports.push(StageReport { class_sizes: after, ..report });
    }
    let untiled = t.gaps.iter().filter(|g| g.is_none()).count();
    if untiled > 0 {
        t.flags.push(format!("{untiled} gaps exceed K_{} and stay untiled", s.depth));
    }
    let missing = t.attach_witnesses(s, s.depth, s.depth);
    if !missing.is_empty() {
        t.flags.push(format!("no partition witness at levels {missing:?}"));
    }
    t.verify_structure(s)?;
    t.verify_witnesses()?;
    Ok((t, reports))
}

fn run_stage(t: &mut TiledSection, s: &Schedule, stage: usize) -> Result<StageReport, TilerError> {
    let params = s.params.clone();
    let k = &s.k[stage];
    let eps = s.eps_at(stage);
    let eta = s.eta_at(stage);
    let [low, high] = &s.stage_families[stage - 1];
    let band = FreqBand::new(
        (&params.rho - &eta).max(BigRational::zero()),
        (&params.rho + &eta).min(BigRational::one()),
    )?;
    let n = t.anchors.len();
    let orig: Vec<QuadReal> = (0..n - 1).map(|i| t.gap_value(i)).collect();
    let mut rep = StageReport { stage, class_sizes: Vec::new(), tiled: 0, fallbacks: 0, not_near: 0 };
    let mut i = 0;
    while i + 1 < n {
        if orig[i] > *k {
            i += 1;
            continue;
        }
        // Class run of points i..=j.
        let mut j = i;
        while j + 1 < n && orig[j] <= *k {
            j += 1;
        }
        let mut d = QuadReal::zero();
        let mut prefix = TileVector::default();
        for g in i..j {
            if let Some(wd) = &t.gaps[g] {
                prefix = prefix.plus(wd.counts());
                let dd = d.clone();
                t.shift_point(g + 1, &dd, stage as u32, stage as u32);
                continue;
            }
            let y = &orig[g];
            let (lo, hi) = if d.signum() <= 0 { (y.clone(), y + &eps) } else { (y - &eps, y.clone()) };
            let inside = |v: &TileVector| {
                let x = params.value(*v);
                if d.signum() <= 0 { x < hi } else { x > lo }
            };
            let fam = if prefix.is_empty() || freq_alpha(prefix).unwrap() <= params.rho { high } else { low };
            let mut cands: Vec<TileVector> = if lo >= fam.threshold {
                fam.members_between(&params, &lo, &hi).into_iter().filter(|v| inside(v)).collect()
            } else {
                Vec::new()
            };
            if cands.is_empty() {
                rep.fallbacks += 1;
                cands = enumerate_tileable(&params, &lo, &hi, Some(&band)).into_iter().filter(|v| inside(v) && !v.is_empty()).collect();
            }
            let best = cands
                .into_iter()
                .map(|v| (&d + (params.value(v) - y), v))
                .min_by(|a, b| a.0.abs().cmp(&b.0.abs()).then(a.1.cmp(&b.1)))
                .ok_or_else(|| TilerError::Stage { stage, msg: format!("no tileable gap near gap {g}") })?;
            d = best.0;
            let dd = d.clone();
            t.shift_point(g + 1, &dd, stage as u32, stage as u32);
            t.gaps[g] = Some(TiledWord::balanced(best.1));
            prefix = prefix.plus(best.1);
            rep.tiled += 1;
        }
        if !is_n_near(&params, prefix, s.n[stage]) {
            rep.not_near += 1;
        }
        i = j + 1;
    }
    Ok(rep)
}
