//! Co-sparse construction: seeded pairing of blocks by rank, each merge an
//! exact placement on tileable offsets, and the full pipeline that closes
//! the remaining gaps.

use super::section::{LimitClass, TiledSection};
use super::segment::{solve, Budget, Frame, TerminalBand, Unit};
use super::{Schedule, TilerError};
use crate::exactnum::{LatCtx, QuadReal};
use crate::sections::OrbitWindow;
use crate::tileable::{TileVector, TiledWord};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HMAX_START: i128 = 8;
const HMAX_CAP: i128 = 1 << 14;

/// A maximal run of points joined by tiled gaps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Span {
    pub first: usize,
    pub last: usize,
}

/// Splits the points into maximal tiled runs (the wrap gap is ignored).
pub(crate) fn spans(t: &TiledSection) -> Vec<Span> {
    let n = t.anchors.len();
    let mut out = Vec::new();
    let mut first = 0;
    for i in 0..n {
        let joined = i + 1 < n && t.gaps[i].is_some();
        if !joined {
            out.push(Span { first, last: i });
            first = i + 1;
        }
    }
    out
}

/// Exact lattice shared by one pipeline run.
pub(crate) fn lattice(t: &TiledSection, s: &Schedule) -> Result<LatCtx, TilerError> {
    Ok(LatCtx::covering(
        [&t.params.alpha, &t.params.beta]
            .into_iter()
            .chain(t.anchors.iter())
            .chain(t.periodic.iter())
            .chain(s.eps.iter()),
    )?)
}

/// Run of spans to be placed by one call of the segment solver.
pub(crate) struct Placement<'a> {
    pub spans: &'a [Span],
    pub levels: Vec<u32>,
    pub terminal: Option<TerminalBand>,
    /// Circumference closing the run back onto its first anchor.
    pub close: Option<QuadReal>,
}

fn span_word(t: &TiledSection, sp: Span) -> TiledWord {
    let mut letters = Vec::new();
    for g in &t.gaps[sp.first..sp.last] {
        letters.extend_from_slice(&g.as_ref().expect("span gaps are tiled").letters);
    }
    TiledWord { letters }
}

/// Places every span of `pl` and fills the gaps between them. The first span
/// stays fixed; span `i` moves by less than `eps_{levels[i]}`. Returns false
/// (leaving `t` untouched) when no placement exists.
pub(crate) fn place(
    t: &mut TiledSection,
    frame: &Frame,
    s: &Schedule,
    pl: &Placement,
    stage: u32,
) -> Result<bool, TilerError> {
    let ctx = frame.ctx;
    let origin = ctx.lat(&t.anchors[pl.spans[0].first])?;
    let mut units = Vec::with_capacity(pl.spans.len() + 1);
    for (i, sp) in pl.spans.iter().enumerate() {
        let word = span_word(t, *sp);
        let (h_lo, h_hi, _) = frame.walk.profile(&word);
        let budget = if i == 0 { Budget::Exact } else { Budget::Strict(ctx.lat(&s.eps_at(pl.levels[i] as usize))?) };
        units.push(Unit { target: ctx.lat(&t.anchors[sp.first])? - origin, budget, counts: word.counts(), h_lo, h_hi });
    }
    if let Some(c) = &pl.close {
        units.push(Unit { target: ctx.lat(c)?, budget: Budget::Exact, counts: TileVector::default(), h_lo: 0, h_hi: 0 });
    }
    let Some((states, _)) = solve(frame, &units, pl.terminal.as_ref(), HMAX_START, HMAX_CAP) else {
        return Ok(false);
    };
    let origin_q = ctx.quad(origin);
    for (i, sp) in pl.spans.iter().enumerate() {
        if i > 0 {
            let new_start = &origin_q + ctx.quad(frame.val(states[i]));
            let shift = &new_start - &t.anchors[sp.first];
            for p in sp.first..=sp.last {
                t.shift_point(p, &shift, stage, pl.levels[i]);
            }
            let prev_end = states[i - 1].plus(units[i - 1].counts);
            t.gaps[pl.spans[i - 1].last] = Some(gap_word(prev_end, states[i]));
        }
    }
    if pl.close.is_some() {
        let k = pl.spans.len();
        let prev_end = states[k - 1].plus(units[k - 1].counts);
        let wrap = t.gaps.len() - 1;
        t.gaps[wrap] = Some(gap_word(prev_end, states[k]));
    }
    Ok(true)
}

fn gap_word(from: TileVector, to: TileVector) -> TiledWord {
    TiledWord::balanced(TileVector::new(to.p - from.p, to.q - from.q))
}

fn band_around(s: &Schedule, eta: &BigRational) -> TerminalBand {
    use num_traits::{One, Zero};
    let rho = &s.params.rho;
    let lo = rho - eta;
    let hi = rho + eta;
    TerminalBand {
        lo: if lo < BigRational::zero() { BigRational::zero() } else { lo },
        hi: if hi > BigRational::one() { BigRational::one() } else { hi },
    }
}

/// Seeded co-sparse construction with `stages` rounds. Stage 1 pairs single
/// points at a seeded offset, leaving `N_1` untouched points between pairs;
/// stage `k` pairs consecutive rank-`(k-1)` blocks, leaving `N_k` such blocks
/// between pairs, and merges each pair with everything in between into one
/// tiled rank-`k` block whose frequency is within `eta_k` of rho.
pub fn cosparse_construct(w: &OrbitWindow, s: &Schedule, stages: usize, seed: u64) -> Result<TiledSection, TilerError> {
    if stages > s.depth {
        return Err(TilerError::Precondition(format!("{stages} stages exceed the schedule depth {}", s.depth)));
    }
    if w.len() < 2 {
        return Err(TilerError::Precondition("window needs at least two points".into()));
    }
    let k0 = &s.k[0];
    let hi = k0 + QuadReal::int(3);
    for (i, g) in w.positions.windows(2).map(|p| &p[1] - &p[0]).enumerate() {
        if g < *k0 || g > hi {
            return Err(TilerError::Precondition(format!("gap {i} is outside [K_0, K_0 + 3]")));
        }
    }
    if w.wrap_gap().is_some_and(|g| g < *k0) {
        return Err(TilerError::Precondition("wrap gap is below K_0".into()));
    }
    let mut t = TiledSection::untiled(&s.params, w, "cosparse");
    let ctx = lattice(&t, s)?;
    let frame = Frame::new(&ctx, &s.params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 1..=stages {
        let spacing = s.cosparse_spacing[k - 1] as usize;
        let offset = rng.gen_range(0..=spacing);
        let all = spans(&t);
        let idx: Vec<usize> = (0..all.len()).filter(|&i| t.ranks[all[i].first] as usize == k - 1).collect();
        let terminal = band_around(s, &s.eta_at(k));
        let mut i = offset;
        let mut failed = 0usize;
        while i + 1 < idx.len() {
            let run = &all[idx[i]..=idx[i + 1]];
            let levels = run.iter().map(|sp| t.ranks[sp.first] + 1).collect();
            let pl = Placement { spans: run, levels, terminal: Some(terminal.clone()), close: None };
            if place(&mut t, &frame, s, &pl, k as u32)? {
                for p in run[0].first..=run[run.len() - 1].last {
                    t.ranks[p] = k as u32;
                }
                i += spacing + 2;
            } else {
                failed += 1;
                i += 1;
            }
        }
        if failed > 0 {
            t.flags.push(format!("stage {k}: {failed} pair placements failed and were skipped"));
        }
        check_spacing(&mut t, s, k);
    }
    t.verify_structure(s)?;
    Ok(t)
}

/// Flags rank-`k` left endpoints farther apart than `D_{k+1}`.
fn check_spacing(t: &mut TiledSection, s: &Schedule, k: usize) {
    let Some(bound) = s.d.get(k + 1) else { return };
    let lefts: Vec<usize> = spans(t).into_iter().filter(|sp| t.ranks[sp.first] as usize == k).map(|sp| sp.first).collect();
    let wide = lefts.windows(2).filter(|p| &t.anchors[p[1]] - &t.anchors[p[0]] > *bound).count();
    if wide > 0 {
        t.flags.push(format!("stage {k}: {wide} rank-{k} spacings exceed D_{}", k + 1));
    }
}

/// Classification of a co-sparse output.
pub fn classify_limit(t: &TiledSection) -> LimitClass {
    t.classify()
}

/// Co-sparse construction at full depth, classification, then one exact
/// placement of every block that tiles all remaining gaps. Partition
/// witnesses are attached for levels up to `max(depth, 4)`.
pub fn full_pipeline(w: &OrbitWindow, s: &Schedule) -> Result<TiledSection, TilerError> {
    let mut t = cosparse_construct(w, s, s.depth, 0)?;
    let class = classify_limit(&t);
    t.flags.push(format!("limit class after co-sparse stages: {}", class_name(class)));
    t.mode = "full".into();
    if class != LimitClass::FullyRegular {
        let ctx = lattice(&t, s)?;
        let frame = Frame::new(&ctx, &s.params);
        let all = spans(&t);
        let levels = all.iter().map(|sp| t.ranks[sp.first] + 1).collect();
        let close = t.periodic.as_ref().map(|_| t.periodic.clone().unwrap());
        let pl = Placement { spans: &all, levels, terminal: None, close };
        if !place(&mut t, &frame, s, &pl, (s.depth + 1) as u32)? {
            return Err(TilerError::Stage { stage: s.depth + 1, msg: "no closing placement within budgets".into() });
        }
    }
    let levels = s.depth.max(4);
    let missing = t.attach_witnesses(s, levels, levels);
    if !missing.is_empty() {
        t.flags.push(format!("no partition witness at levels {missing:?}"));
    }
    t.verify_structure(s)?;
    t.verify_witnesses()?;
    Ok(t)
}

pub(crate) fn class_name(c: LimitClass) -> &'static str {
    match c {
        LimitClass::FullyRegular => "fully_regular",
        LimitClass::HalfTiled => "half_tiled",
        LimitClass::FiniteClasses => "finite_classes",
    }
}
