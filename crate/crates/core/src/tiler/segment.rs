//! Exact dynamic programme placing a run of units (points or tiled blocks)
//! on tileable offsets within per-unit displacement budgets while keeping
//! the alpha-count walk as flat as possible.

use crate::exactnum::{Lat, LatCtx};
use crate::tileable::{Params, TileVector, TiledWord};
use std::collections::HashMap;

/// Displacement allowance of one unit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Budget {
    /// The unit must sit exactly on its target.
    Exact,
    /// Strict bound on the displacement.
    Strict(Lat),
}

/// One unit: its current left anchor, allowance and internal word data.
#[derive(Clone, Debug)]
pub(crate) struct Unit {
    /// Left anchor relative to the first unit's anchor.
    pub target: Lat,
    /// Allowed displacement.
    pub budget: Budget,
    /// Tile counts of the unit's internal word.
    pub counts: TileVector,
    /// Extremes of the walk offset inside the internal word (both include 0).
    pub h_lo: i128,
    /// See `h_lo`.
    pub h_hi: i128,
}

/// Walk increments: each alpha adds `rd - rn`, each beta subtracts `rn`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Walk {
    pub rn: i128,
    pub rd: i128,
}

impl Walk {
    pub fn new(params: &Params) -> Self {
        let (rn, rd) = params.rho_parts();
        Walk { rn, rd }
    }

    pub fn h(&self, v: TileVector) -> i128 {
        self.rd * v.p as i128 - self.rn * v.len() as i128
    }

    /// `(min, max, end)` of the walk offset along a word, counting the start.
    pub fn profile(&self, w: &TiledWord) -> (i128, i128, i128) {
        let (mut lo, mut hi, mut h) = (0i128, 0i128, 0i128);
        for l in &w.letters {
            h += if *l == crate::tileable::Letter::A { self.rd - self.rn } else { -self.rn };
            lo = lo.min(h);
            hi = hi.max(h);
        }
        (lo, hi, h)
    }

    /// Walk extremes of the balanced word with counts `v`.
    pub fn balanced_profile(&self, v: TileVector) -> (i128, i128) {
        let n = v.len() as i128;
        let p = v.p as i128;
        let (mut lo, mut hi) = (0i128, 0i128);
        for i in 1..=n {
            let a = (i * p) / n;
            let h = self.rd * a - self.rn * i;
            lo = lo.min(h);
            hi = hi.max(h);
        }
        (lo, hi)
    }
}

/// Lattice constants shared by the solver.
pub(crate) struct Frame<'a> {
    pub ctx: &'a LatCtx,
    pub alpha: Lat,
    pub beta: Lat,
    pub walk: Walk,
    /// Value of one tile on average along the rho direction (floating).
    alpha_f: f64,
    beta_f: f64,
}

impl<'a> Frame<'a> {
    pub fn new(ctx: &'a LatCtx, params: &Params) -> Self {
        let alpha = ctx.lat(&params.alpha).expect("alpha on lattice");
        let beta = ctx.lat(&params.beta).expect("beta on lattice");
        Frame { ctx, alpha, beta, walk: Walk::new(params), alpha_f: ctx.approx(alpha), beta_f: ctx.approx(beta) }
    }

    pub fn val(&self, v: TileVector) -> Lat {
        self.alpha.times(v.p as i128) + self.beta.times(v.q as i128)
    }

    /// Exact counts with value `t`, if `t` is tileable.
    pub fn exact_counts(&self, t: Lat) -> Option<TileVector> {
        // Solve p*alpha + q*beta = t on both lattice coordinates.
        let (a, b) = (self.alpha, self.beta);
        let det = a.x * b.y - a.y * b.x;
        if det == 0 {
            return None;
        }
        let pn = t.x * b.y - t.y * b.x;
        let qn = a.x * t.y - a.y * t.x;
        if pn % det != 0 || qn % det != 0 {
            return None;
        }
        let (p, q) = (pn / det, qn / det);
        (p >= 0 && q >= 0).then(|| TileVector::new(p as u64, q as u64))
    }

    /// Candidate cumulative counts with value within `b` of `t` and walk
    /// height at most `hmax` in absolute value.
    fn states_near(&self, t: Lat, budget: Budget, hmax: i128) -> Vec<TileVector> {
        match budget {
            Budget::Exact => self.exact_counts(t).into_iter().filter(|v| self.walk.h(*v).abs() <= hmax).collect(),
            Budget::Strict(b) => {
                let tf = self.ctx.approx(t);
                let rho = self.walk.rn as f64 / self.walk.rd as f64;
                let per_tile = rho * self.alpha_f + (1.0 - rho) * self.beta_f;
                let n0 = tf / per_tile;
                let p0 = (rho * n0).round() as i128;
                // Along fixed value, the walk moves by at least one unit per alpha.
                let slope = (self.walk.rd - self.walk.rn) as f64 + self.walk.rn as f64 * self.alpha_f / self.beta_f;
                let reach = ((hmax as f64 + 3.0) / slope).ceil() as i128 + 2;
                let mut out = Vec::new();
                for p in (p0 - reach).max(0)..=p0 + reach {
                    let qf = ((tf - p as f64 * self.alpha_f) / self.beta_f).floor() as i128;
                    for q in (qf - 1).max(0)..=qf + 1 {
                        let v = TileVector::new(p as u64, q as u64);
                        if self.walk.h(v).abs() > hmax {
                            continue;
                        }
                        if self.ctx.abs_lt(self.val(v) - t, b) {
                            out.push(v);
                        }
                    }
                }
                out.sort();
                out.dedup();
                out
            }
        }
    }
}

/// Terminal frequency requirement on the whole run (closed band).
#[derive(Clone, Debug)]
pub(crate) struct TerminalBand {
    pub lo: num_rational::BigRational,
    pub hi: num_rational::BigRational,
}

/// Places every unit. Returns the cumulative counts at each unit's left
/// anchor (the first is zero) and the achieved walk bound, or `None` when no
/// placement exists with walk height up to `hmax_cap`.
pub(crate) fn solve(
    frame: &Frame,
    units: &[Unit],
    terminal: Option<&TerminalBand>,
    hmax_start: i128,
    hmax_cap: i128,
) -> Option<(Vec<TileVector>, i128)> {
    let mut hmax = hmax_start.max(1);
    loop {
        if let Some(r) = solve_at(frame, units, terminal, hmax) {
            return Some(r);
        }
        if hmax >= hmax_cap {
            return None;
        }
        hmax = (hmax * 2).min(hmax_cap);
    }
}

fn solve_at(frame: &Frame, units: &[Unit], terminal: Option<&TerminalBand>, hmax: i128) -> Option<(Vec<TileVector>, i128)> {
    let walk = frame.walk;
    let local = |u: &Unit, s: TileVector| -> i128 {
        let h = walk.h(s);
        h.abs().max((h + u.h_lo).abs()).max((h + u.h_hi).abs())
    };
    let mut gap_cache: HashMap<TileVector, (i128, i128)> = HashMap::new();
    let mut layers: Vec<Vec<(TileVector, i128, usize)>> = Vec::with_capacity(units.len());
    for (i, u) in units.iter().enumerate() {
        let cands = if i == 0 {
            vec![TileVector::default()]
        } else {
            frame.states_near(u.target, u.budget, hmax)
        };
        let mut layer = Vec::with_capacity(cands.len());
        for s in cands {
            let lc = local(u, s);
            if lc > hmax {
                continue;
            }
            if i == 0 {
                layer.push((s, lc, 0));
                continue;
            }
            let prev_unit = &units[i - 1];
            let mut best: Option<(i128, usize)> = None;
            for (j, (ps, pc, _)) in layers[i - 1].iter().enumerate() {
                let end = ps.plus(prev_unit.counts);
                if end.p > s.p || end.q > s.q || end == s {
                    continue;
                }
                let delta = TileVector::new(s.p - end.p, s.q - end.q);
                let (glo, ghi) = *gap_cache.entry(delta).or_insert_with(|| walk.balanced_profile(delta));
                let he = walk.h(end);
                let gc = (he + glo).abs().max((he + ghi).abs());
                let c = (*pc).max(gc).max(lc);
                if best.is_none_or(|(bc, _)| c < bc) {
                    best = Some((c, j));
                }
            }
            if let Some((c, j)) = best {
                if c <= hmax {
                    layer.push((s, c, j));
                }
            }
        }
        if layer.is_empty() {
            return None;
        }
        layers.push(layer);
    }
    let last_unit = units.last().unwrap();
    let fin = layers
        .last()
        .unwrap()
        .iter()
        .enumerate()
        .filter(|(_, (s, _, _))| {
            terminal.is_none_or(|tb| {
                let tot = s.plus(last_unit.counts);
                if tot.is_empty() {
                    return false;
                }
                let f = num_rational::BigRational::new((tot.p as i64).into(), (tot.len() as i64).into());
                tb.lo <= f && f <= tb.hi
            })
        })
        .min_by_key(|(_, (_, c, _))| *c)?;
    let mut idx = fin.0;
    let cost = (fin.1).1;
    let mut states = vec![TileVector::default(); units.len()];
    for i in (0..units.len()).rev() {
        let (s, _, back) = layers[i][idx];
        states[i] = s;
        idx = back;
    }
    Some((states, cost))
}
