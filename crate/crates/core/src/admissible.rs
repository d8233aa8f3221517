//! Reachable-sum sets under bounded prefix deviation, the rearrangement
//! greedy, the gcd ladder, frequency boost and the co-sparse step.

use crate::exactnum::{ExactError, Lat, LatCtx, QuadReal};
use crate::tileable::{eps_dense, freq_alpha, sort_by_value, Density, FreqBand, Params, TileError, TileVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

/// Errors of the admissible-set layer.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdmError {
    /// The problem itself is malformed.
    #[error("invalid shift problem: {0}")]
    InvalidProblem(String),
    /// The oracle would exceed its selection budget.
    #[error("brute force budget exceeded: {0} selections > {1}")]
    BudgetExceeded(u128, u128),
    /// Individually identified precondition failures.
    #[error("preconditions failed: {}", .0.join("; "))]
    Preconditions(Vec<String>),
    /// The construction ran but its post-condition did not hold.
    #[error("post-condition failed: {0}")]
    PostCondition(String),
    /// Exact arithmetic failure.
    #[error(transparent)]
    Exact(#[from] ExactError),
    /// Tileable-layer failure.
    #[error(transparent)]
    Tile(#[from] TileError),
}

/// Gaps `d_k` with candidate tileable replacements `R_k` inside `U_eps(d_k)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftProblem {
    /// Prefix tolerance.
    pub eps: QuadReal,
    /// Target gaps.
    pub gaps: Vec<QuadReal>,
    /// Candidate replacements per gap.
    pub admissible: Vec<Vec<TileVector>>,
}

impl ShiftProblem {
    /// Validated constructor.
    pub fn new(params: &Params, eps: QuadReal, gaps: Vec<QuadReal>, admissible: Vec<Vec<TileVector>>) -> Result<Self, AdmError> {
        let p = ShiftProblem { eps, gaps, admissible };
        p.validate(params)?;
        Ok(p)
    }

    /// Checks shapes and that every candidate lies in `U_eps(d_k)`.
    pub fn validate(&self, params: &Params) -> Result<(), AdmError> {
        if self.eps.signum() <= 0 {
            return Err(AdmError::InvalidProblem("eps must be positive".into()));
        }
        if self.gaps.len() != self.admissible.len() {
            return Err(AdmError::InvalidProblem("gaps and candidate lists differ in length".into()));
        }
        for (k, (d, r)) in self.gaps.iter().zip(&self.admissible).enumerate() {
            for v in r {
                if (params.value(*v) - d).abs() >= self.eps {
                    return Err(AdmError::InvalidProblem(format!("candidate {v:?} of gap {k} is not within eps")));
                }
            }
        }
        Ok(())
    }

    /// Number of gaps.
    pub fn n(&self) -> usize {
        self.gaps.len()
    }

    /// Sum of the target gaps.
    pub fn gap_sum(&self) -> QuadReal {
        self.gaps.iter().sum()
    }

    /// Sub-problem on gaps `[i, j)`.
    pub fn slice(&self, i: usize, j: usize) -> ShiftProblem {
        ShiftProblem {
            eps: self.eps.clone(),
            gaps: self.gaps[i..j].to_vec(),
            admissible: self.admissible[i..j].to_vec(),
        }
    }
}

/// One reachable terminal sum with a certificate selection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissibleElement {
    /// Terminal value.
    pub value: QuadReal,
    /// Total tile counts.
    pub counts: TileVector,
    /// One chosen candidate per gap.
    pub witness: Vec<TileVector>,
}

/// All reachable terminal sums, sorted by value.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissibleSet {
    /// Elements, one per distinct terminal count vector.
    pub elements: Vec<AdmissibleElement>,
}

impl AdmissibleSet {
    /// Terminal count vectors (one per distinct value).
    pub fn keys(&self) -> Vec<TileVector> {
        self.elements.iter().map(|e| e.counts).collect()
    }

    /// Membership by terminal counts.
    pub fn contains(&self, v: TileVector) -> bool {
        self.elements.iter().any(|e| e.counts == v)
    }

    /// Number of elements.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    /// True when nothing is reachable.
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Lattice view of a problem for fast exact prefix checks.
struct Gauge {
    ctx: LatCtx,
    alpha: Lat,
    beta: Lat,
    eps: Lat,
    prefix: Vec<Lat>,
}

impl Gauge {
    fn new(params: &Params, prob: &ShiftProblem) -> Result<Self, AdmError> {
        let ctx = LatCtx::covering(
            [&params.alpha, &params.beta, &prob.eps].into_iter().chain(prob.gaps.iter()),
        )?;
        let mut prefix = vec![Lat::ZERO];
        for d in &prob.gaps {
            let last = *prefix.last().unwrap();
            prefix.push(last + ctx.lat(d)?);
        }
        Ok(Gauge {
            alpha: ctx.lat(&params.alpha)?,
            beta: ctx.lat(&params.beta)?,
            eps: ctx.lat(&prob.eps)?,
            prefix,
            ctx,
        })
    }

    fn val(&self, v: TileVector) -> Lat {
        self.alpha.times(v.p as i128) + self.beta.times(v.q as i128)
    }

    /// Deviation `sum - (d_1 + ... + d_k)`.
    fn dev(&self, k: usize, sum: TileVector) -> Lat {
        self.val(sum) - self.prefix[k]
    }

    fn ok(&self, k: usize, sum: TileVector) -> bool {
        self.ctx.abs_lt(self.dev(k, sum), self.eps)
    }
}

fn element(params: &Params, witness: Vec<TileVector>) -> AdmissibleElement {
    let counts = witness.iter().fold(TileVector::default(), |a, v| a.plus(*v));
    AdmissibleElement { value: params.value(counts), counts, witness }
}

fn sorted(params: &Params, mut els: Vec<AdmissibleElement>) -> AdmissibleSet {
    let mut keys: Vec<TileVector> = els.iter().map(|e| e.counts).collect();
    sort_by_value(params, &mut keys);
    let pos: HashMap<TileVector, usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
    els.sort_by_key(|e| pos[&e.counts]);
    AdmissibleSet { elements: els }
}

/// Forward dynamic programme over reachable prefix count vectors. Distinct
/// count vectors have distinct values, so states are keyed by counts.
pub fn enumerate_a_n(params: &Params, prob: &ShiftProblem) -> Result<AdmissibleSet, AdmError> {
    if prob.n() == 0 {
        return Err(AdmError::InvalidProblem("need at least one gap".into()));
    }
    let g = Gauge::new(params, prob)?;
    // layers[k]: state -> (predecessor state, chosen candidate)
    let mut layers: Vec<HashMap<TileVector, (TileVector, TileVector)>> = Vec::with_capacity(prob.n());
    let mut frontier: Vec<TileVector> = vec![TileVector::default()];
    for (k, r) in prob.admissible.iter().enumerate() {
        let mut next: HashMap<TileVector, (TileVector, TileVector)> = HashMap::new();
        for s in &frontier {
            for y in r {
                let t = s.plus(*y);
                if !next.contains_key(&t) && g.ok(k + 1, t) {
                    next.insert(t, (*s, *y));
                }
            }
        }
        frontier = next.keys().copied().collect();
        frontier.sort();
        layers.push(next);
        if frontier.is_empty() {
            return Ok(AdmissibleSet::default());
        }
    }
    let els = frontier
        .iter()
        .map(|end| {
            let mut witness = Vec::with_capacity(prob.n());
            let mut cur = *end;
            for layer in layers.iter().rev() {
                let (prev, y) = layer[&cur];
                witness.push(y);
                cur = prev;
            }
            witness.reverse();
            element(params, witness)
        })
        .collect();
    Ok(sorted(params, els))
}

/// Exhaustive oracle over every selection, refusing more than `budget`.
pub fn brute_force_a_n(params: &Params, prob: &ShiftProblem, budget: u128) -> Result<AdmissibleSet, AdmError> {
    if prob.n() == 0 {
        return Err(AdmError::InvalidProblem("need at least one gap".into()));
    }
    let total: u128 = prob.admissible.iter().map(|r| r.len() as u128).product();
    if total > budget {
        return Err(AdmError::BudgetExceeded(total, budget));
    }
    if total == 0 {
        return Ok(AdmissibleSet::default());
    }
    // Depth-first over every selection; a prefix that leaves the band
    // rules out all of its extensions, so pruning it loses nothing.
    let devs: Vec<Vec<QuadReal>> = prob
        .admissible
        .iter()
        .zip(&prob.gaps)
        .map(|(r, d)| r.iter().map(|y| params.value(*y) - d).collect())
        .collect();
    let mut found: HashMap<TileVector, Vec<TileVector>> = HashMap::new();
    let mut picks = Vec::with_capacity(prob.n());
    search(prob, &devs, &QuadReal::zero(), &mut picks, &mut found);
    let els = found.into_values().map(|w| element(params, w)).collect();
    Ok(sorted(params, els))
}

fn search(
    prob: &ShiftProblem,
    devs: &[Vec<QuadReal>],
    dev: &QuadReal,
    picks: &mut Vec<TileVector>,
    found: &mut HashMap<TileVector, Vec<TileVector>>,
) {
    let k = picks.len();
    if k == prob.n() {
        let counts = picks.iter().fold(TileVector::default(), |a, v| a.plus(*v));
        found.entry(counts).or_insert_with(|| picks.clone());
        return;
    }
    for (y, dy) in prob.admissible[k].iter().zip(&devs[k]) {
        let next = dev + dy;
        if next.abs() < prob.eps {
            picks.push(*y);
            search(prob, devs, &next, picks, found);
            picks.pop();
        }
    }
}

/// True when `witness` picks one candidate per gap and every prefix
/// deviation is strictly inside `(-eps, eps)`. Uses plain exact arithmetic
/// so it can serve as an independent certificate check.
pub fn check_witness(params: &Params, prob: &ShiftProblem, witness: &[TileVector]) -> bool {
    if witness.len() != prob.n() {
        return false;
    }
    let mut dev = QuadReal::zero();
    for (k, y) in witness.iter().enumerate() {
        if !prob.admissible[k].contains(y) {
            return false;
        }
        dev = dev + params.value(*y) - &prob.gaps[k];
        if dev.abs() >= prob.eps {
            return false;
        }
    }
    true
}

/// Greedy order keeping prefix sums of `values` within `eps` of the
/// matching multiples of `d`. The first value leads; afterwards an
/// undershooting prefix takes the first unused value `>= d` and an
/// overshooting one the first unused value `<= d`, falling back to the
/// smallest remaining value.
pub fn rearrange_permutation(values: &[QuadReal], d: &QuadReal, eps: &QuadReal) -> Result<Vec<usize>, AdmError> {
    let n = values.len();
    let mut fails = Vec::new();
    let total: QuadReal = values.iter().sum();
    if (d.scale_int(n as i64) - &total).abs() >= *eps {
        fails.push("total deviates from n*d by eps or more".to_string());
    }
    for (i, y) in values.iter().enumerate() {
        if (y - d).abs() >= *eps {
            fails.push(format!("value {i} is not within eps of d"));
        }
    }
    if !fails.is_empty() {
        return Err(AdmError::Preconditions(fails));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut used = vec![false; n];
    let mut perm = vec![0usize];
    used[0] = true;
    let mut sum = values[0].clone();
    for k in 1..n {
        let under = sum <= d.scale_int(k as i64);
        let pick = (0..n)
            .find(|&i| !used[i] && if under { values[i] >= *d } else { values[i] <= *d })
            .unwrap_or_else(|| (0..n).filter(|&i| !used[i]).min_by(|&a, &b| values[a].cmp(&values[b])).unwrap());
        used[pick] = true;
        perm.push(pick);
        sum += &values[pick];
    }
    let mut s = QuadReal::zero();
    for (k, &i) in perm.iter().enumerate() {
        s += &values[i];
        if (&s - d.scale_int(k as i64 + 1)).abs() >= *eps {
            return Err(AdmError::PostCondition(format!("prefix {} left the eps band", k + 1)));
        }
    }
    Ok(perm)
}

/// One rung `(a_k, b_k, l_k, l'_k)` with natural coefficients over `(a, b)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LadderStep {
    /// Non-positive rung.
    pub a: QuadReal,
    /// Non-negative rung.
    pub b: QuadReal,
    /// Multiplier producing `a_k`.
    pub l: u64,
    /// Multiplier producing `b_k`.
    pub lp: u64,
    /// `a_k = pa*a + qa*b`.
    pub pa: u64,
    /// See `pa`.
    pub qa: u64,
    /// `b_k = pb*a + qb*b`.
    pub pb: u64,
    /// See `pb`.
    pub qb: u64,
}

/// Why the ladder stopped.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LadderEnd {
    /// `a_K = 0`; the gcd is `b_{K-1}`.
    AZero,
    /// `b_K = 0`; the gcd is `|a_K|`.
    BZero,
    /// Both rungs fell below the supplied threshold.
    BelowDelta,
    /// Step cap reached.
    StepCap,
}

/// The full ladder from `(a_0, b_0) = (a, b)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ladder {
    /// Rungs, starting with `k = 0` (multipliers zero).
    pub steps: Vec<LadderStep>,
    /// Termination reason.
    pub end: LadderEnd,
}

impl Ladder {
    /// Index K of the last rung.
    pub fn k(&self) -> usize {
        self.steps.len() - 1
    }

    /// The last rung.
    pub fn last(&self) -> &LadderStep {
        self.steps.last().unwrap()
    }

    /// Terminal nonzero magnitude (the gcd for dependent inputs).
    pub fn terminal(&self) -> QuadReal {
        match self.end {
            LadderEnd::AZero => {
                let s = &self.steps;
                if s.len() >= 2 {
                    // a_K = 0 means b_{K-1} stays the positive survivor.
                    s[s.len() - 2].b.clone()
                } else {
                    s[0].b.clone()
                }
            }
            LadderEnd::BZero => self.last().a.abs(),
            _ => QuadReal::max_of(&self.last().a.abs(), &self.last().b),
        }
    }
}

/// Runs `a_k = a_{k-1} + l_k b_{k-1}` (largest `l_k` keeping `a_k <= 0`)
/// and `b_k = b_{k-1} + l'_k a_k` (largest `l'_k` keeping `b_k >= 0`)
/// until a rung vanishes, both fall below `delta`, or `max_steps` rungs.
pub fn gcd_ladder(a: &QuadReal, b: &QuadReal, delta: Option<&QuadReal>, max_steps: usize) -> Result<Ladder, AdmError> {
    if a.signum() >= 0 || b.signum() <= 0 {
        return Err(AdmError::Preconditions(vec!["need a < 0 < b".into()]));
    }
    let mut steps = vec![LadderStep { a: a.clone(), b: b.clone(), l: 0, lp: 0, pa: 1, qa: 0, pb: 0, qb: 1 }];
    loop {
        let prev = steps.last().unwrap().clone();
        if let Some(dl) = delta {
            if prev.a.abs() < *dl && prev.b < *dl {
                return Ok(Ladder { steps, end: LadderEnd::BelowDelta });
            }
        }
        if steps.len() > max_steps {
            return Ok(Ladder { steps, end: LadderEnd::StepCap });
        }
        let l = (-&prev.a / &prev.b).floor().to_u64().expect("ladder multiplier");
        let na = &prev.a + prev.b.scale_int(l as i64);
        let (pa, qa) = (prev.pa + l * prev.pb, prev.qa + l * prev.qb);
        if na.is_zero() {
            steps.push(LadderStep { a: na, b: prev.b.clone(), l, lp: 0, pa, qa, pb: prev.pb, qb: prev.qb });
            return Ok(Ladder { steps, end: LadderEnd::AZero });
        }
        let lp = (&prev.b / -&na).floor().to_u64().expect("ladder multiplier");
        let nb = &prev.b + na.scale_int(lp as i64);
        let (pb, qb) = (prev.pb + lp * pa, prev.qb + lp * qa);
        let done = nb.is_zero();
        steps.push(LadderStep { a: na, b: nb, l, lp, pa, qa, pb, qb });
        if done {
            return Ok(Ladder { steps, end: LadderEnd::BZero });
        }
    }
}

/// Test-mode lattice threshold for a dependent ladder: with `c` the
/// terminal gcd, `N_c` the natural with `eps - c <= N_c*c < eps`, and
/// `M` the largest coefficient sum over the last two rungs times `m`,
/// returns `N_c * max(1, l_K) * M`.
pub fn lattice_threshold(ladder: &Ladder, m: u64, eps: &QuadReal) -> u64 {
    let c = ladder.terminal();
    let nc = {
        let f = (eps / &c).ceil().to_u64().unwrap_or(1);
        f.saturating_sub(1).max(1)
    };
    let k = ladder.steps.len();
    let coeff = ladder.steps[k.saturating_sub(2)..]
        .iter()
        .flat_map(|s| [s.pa + s.qa, s.pb + s.qb])
        .max()
        .unwrap_or(1);
    nc * ladder.last().l.max(1) * m * coeff.max(1)
}

/// Smallest natural strictly greater than a nonnegative value.
fn next_natural(x: &QuadReal) -> u64 {
    (x.floor() + BigInt::one()).to_u64().unwrap_or(u64::MAX)
}

/// Length bound `M_1 + M_2` for the frequency boost.
pub fn boost_m_bound(params: &Params, dmax: &QuadReal, zeta: &BigRational) -> Result<u64, AdmError> {
    if !zeta.is_positive() {
        return Err(AdmError::Preconditions(vec!["zeta must be positive".into()]));
    }
    let factor = params.beta.scale_int(2) / (&params.alpha * &params.alpha);
    let inv = BigRational::one() / zeta;
    let m1 = next_natural(&((dmax + QuadReal::int(2)).scale(&inv) * &factor));
    let m2 = next_natural(&((dmax.scale_int(m1 as i64) + QuadReal::int(2)).scale(&inv) * &factor));
    Ok(m1 + m2)
}

/// Knobs for [`frequency_boost`].
#[derive(Clone, Debug, Default)]
pub struct BoostOptions {
    /// Replaces the closed-form length bound (test mode); the band
    /// post-condition is verified either way.
    pub min_n_override: Option<u64>,
}

fn freq_side(params: &Params, v: TileVector, eta: &BigRational, high: bool) -> bool {
    match freq_alpha(v) {
        Ok(f) => {
            if high {
                f >= &params.rho + eta
            } else {
                f <= &params.rho - eta
            }
        }
        Err(_) => false,
    }
}

/// Picks one candidate per gap steering both the value deviation and the
/// running frequency, so the terminal frequency lands within `zeta` of
/// `gamma`.
pub fn frequency_boost(
    params: &Params,
    prob: &ShiftProblem,
    gamma: &BigRational,
    zeta: &BigRational,
    eta: &BigRational,
    opts: &BoostOptions,
) -> Result<AdmissibleElement, AdmError> {
    let n = prob.n();
    let mut fails = Vec::new();
    if n == 0 {
        return Err(AdmError::Preconditions(vec!["no gaps".into()]));
    }
    let dmax = prob.gaps.iter().max().unwrap().clone();
    let bound = match opts.min_n_override {
        Some(b) => b,
        None => boost_m_bound(params, &dmax, zeta)?,
    };
    if (n as u64) < bound {
        fails.push(format!("n = {n} is below the length bound {bound}"));
    }
    if !(gamma > &(&params.rho - eta) && gamma < &(&params.rho + eta)) {
        fails.push("gamma is not strictly inside (rho - eta, rho + eta)".into());
    }
    let low_edge = prob.eps.scale_int(2) + &params.alpha;
    for (k, d) in prob.gaps.iter().enumerate() {
        if *d < low_edge {
            fails.push(format!("gap {k} is shorter than 2*eps + alpha"));
        }
        let lo = d - &prob.eps;
        let hi = d + &prob.eps;
        for (high, name) in [(false, "low"), (true, "high")] {
            let pts: Vec<QuadReal> = prob.admissible[k]
                .iter()
                .filter(|v| freq_side(params, **v, eta, high))
                .map(|v| params.value(*v))
                .collect();
            if let Density::Gap { witness } = eps_dense(&pts, &lo, &hi, &prob.eps) {
                fails.push(format!("gap {k}: {name}-frequency candidates not eps-dense (hole at {witness})"));
            }
        }
    }
    if !fails.is_empty() {
        return Err(AdmError::Preconditions(fails));
    }
    let g = Gauge::new(params, prob)?;
    let abs_cmp = |a: Lat, b: Lat| g.ctx.cmp(if g.ctx.signum(a) < 0 { -a } else { a }, if g.ctx.signum(b) < 0 { -b } else { b });
    let pick_best = |k: usize, sum: TileVector, cands: &mut dyn Iterator<Item = TileVector>| -> Option<TileVector> {
        let mut best: Option<(TileVector, Lat, Lat)> = None;
        for y in cands {
            let t = sum.plus(y);
            if !g.ok(k + 1, t) {
                continue;
            }
            let dev = g.dev(k + 1, t);
            let val = g.val(y);
            let better = match &best {
                None => true,
                Some((_, bd, bv)) => match abs_cmp(dev, *bd) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Equal => g.ctx.cmp(val, *bv) == std::cmp::Ordering::Less,
                    _ => false,
                },
            };
            if better {
                best = Some((y, dev, val));
            }
        }
        best.map(|b| b.0)
    };
    let mut witness = Vec::with_capacity(n);
    let mut sum = TileVector::default();
    let first = pick_best(0, sum, &mut prob.admissible[0].iter().copied())
        .ok_or_else(|| AdmError::PostCondition("no admissible first choice".into()))?;
    witness.push(first);
    sum = sum.plus(first);
    for k in 1..n {
        let under = g.ctx.signum(g.dev(k, sum)) <= 0;
        let dk = g.ctx.lat(&prob.gaps[k])?;
        let fr_low = freq_alpha(sum).map(|f| &f <= gamma).unwrap_or(true);
        let mut it = prob.admissible[k].iter().copied().filter(|y| {
            let c = g.ctx.cmp(g.val(*y), dk);
            let side = if under { c != std::cmp::Ordering::Less } else { c != std::cmp::Ordering::Greater };
            side && freq_side(params, *y, eta, fr_low)
        });
        let y = pick_best(k, sum, &mut it)
            .ok_or_else(|| AdmError::PostCondition(format!("no candidate for gap {k} meets the steering rules")))?;
        witness.push(y);
        sum = sum.plus(y);
    }
    let e = element(params, witness);
    let f = freq_alpha(e.counts)?;
    if (&f - gamma).abs() > *zeta {
        return Err(AdmError::PostCondition(format!(
            "terminal frequency {f} is not within {zeta} of {gamma}; n is too small"
        )));
    }
    Ok(e)
}

/// Result of [`cosparse_step`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CosparseSets {
    /// Elements with frequency in `[rho - nu, rho - nu']`.
    pub low: Vec<AdmissibleElement>,
    /// Elements with frequency in `[rho + nu', rho + nu]`.
    pub high: Vec<AdmissibleElement>,
    /// Split point: gaps before it form the density phase.
    pub m_used: usize,
}

/// Two subsets of `A_n` in mirrored frequency bands, each `delta`-dense in
/// `U_{eps/2}(sum d_k)`. A density phase over the first `M` gaps is
/// followed by a boost over the rest; split points are tried in turn and
/// the first verified one is returned.
pub fn cosparse_step(
    params: &Params,
    prob: &ShiftProblem,
    delta: &QuadReal,
    eta: &BigRational,
    nu: &BigRational,
    nu_p: &BigRational,
) -> Result<CosparseSets, AdmError> {
    let mut fails = Vec::new();
    if !(delta.signum() > 0 && *delta <= prob.eps) {
        fails.push("need 0 < delta <= eps".to_string());
    }
    if !(!nu_p.is_negative() && nu_p < nu && nu <= eta) {
        fails.push("need 0 <= nu' < nu <= eta".to_string());
    }
    if !fails.is_empty() {
        return Err(AdmError::Preconditions(fails));
    }
    let n = prob.n();
    let eps6 = prob.eps.scale(&BigRational::new(1.into(), 6.into()));
    let total = prob.gap_sum();
    let half = prob.eps.scale(&BigRational::new(1.into(), 2.into()));
    let lo_band = FreqBand::new(&params.rho - nu, &params.rho - nu_p)?;
    let hi_band = FreqBand::new(&params.rho + nu_p, &params.rho + nu)?;
    let zeta = (nu - nu_p) / BigRational::from_integer(6.into());
    let mut last_err = String::from("no split point tried");
    for m in 1..n {
        let head = prob.slice(0, m);
        let s = enumerate_a_n(params, &head)?;
        let hsum = head.gap_sum();
        let keep = prob.eps.scale(&BigRational::new(5.into(), 6.into()));
        let starts: Vec<&AdmissibleElement> =
            s.elements.iter().filter(|e| (&e.value - &hsum).abs() < keep).collect();
        // Tail restricted to candidates within eps/6 of their gaps.
        let mut tail = prob.slice(m, n);
        tail.eps = eps6.clone();
        for (k, r) in tail.admissible.iter_mut().enumerate() {
            let d = &prob.gaps[m + k];
            r.retain(|v| (params.value(*v) - d).abs() < eps6);
        }
        let mut out = [Vec::new(), Vec::new()];
        let mut ok = true;
        for (side, band) in [(0usize, &lo_band), (1usize, &hi_band)] {
            let gamma = if side == 0 {
                &params.rho - (nu + nu_p) / BigRational::from_integer(2.into())
            } else {
                &params.rho + (nu + nu_p) / BigRational::from_integer(2.into())
            };
            let y = match frequency_boost(params, &tail, &gamma, &zeta, eta, &BoostOptions { min_n_override: Some(0) }) {
                Ok(y) => y,
                Err(e) => {
                    last_err = format!("split {m}: {e}");
                    ok = false;
                    break;
                }
            };
            for st in &starts {
                let mut w = st.witness.clone();
                w.extend_from_slice(&y.witness);
                let e = element(params, w);
                if band.contains_vec(e.counts) && check_witness(params, prob, &e.witness) {
                    out[side].push(e);
                }
            }
            let pts: Vec<QuadReal> = out[side].iter().map(|e| e.value.clone()).collect();
            if let Density::Gap { witness } = eps_dense(&pts, &(&total - &half), &(&total + &half), delta) {
                last_err = format!("split {m}: band {side} not delta-dense (hole at {witness})");
                ok = false;
                break;
            }
        }
        if ok {
            let [low, high] = out;
            return Ok(CosparseSets { low, high, m_used: m });
        }
    }
    Err(AdmError::PostCondition(last_err))
}

/// All tileable vectors within `eps` of `d` (strict).
pub fn neighbourhood(params: &Params, d: &QuadReal, eps: &QuadReal) -> Vec<TileVector> {
    crate::tileable::enumerate_tileable(params, &(d - eps), &(d + eps), None)
        .into_iter()
        .filter(|v| (params.value(*v) - d).abs() < *eps)
        .collect()
}
