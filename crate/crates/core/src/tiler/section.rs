//! Tiled sections: anchors, gap words, shift logs, partition witnesses and
//! their verification.

use super::{Schedule, TilerError};
use crate::exactnum::{LatCtx, QuadReal};
use crate::sections::{Boundary, OrbitWindow};
use crate::tileable::{ratio_text, Letter, Params, TiledWord};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

/// One recorded displacement of an input point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftEntry {
    /// Stage that applied the shift.
    pub stage: u32,
    /// Budget index: the shift is strictly below `eps_level`.
    pub level: u32,
    /// Signed shift.
    pub shift: QuadReal,
}

/// Partition of one tiled region into pieces of `B_eta[L]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionWitness {
    /// Level j.
    pub level: usize,
    /// Frequency tolerance `eta_j`.
    #[serde(with = "ratio_text")]
    pub eta: BigRational,
    /// Piece length bound `L_j`.
    pub limit: QuadReal,
    /// Region index.
    pub region: usize,
    /// Letter offsets ending each piece (the last equals the region length).
    pub cuts: Vec<usize>,
}

/// Maximal run of consecutive tiled gaps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    /// First gap index.
    pub first_gap: usize,
    /// Number of gaps.
    pub len: usize,
}

/// Outcome of classifying a finite tiled section.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitClass {
    /// Every gap is tiled.
    FullyRegular,
    /// One tiled class reaches an end of the window and covers at least half of it.
    HalfTiled,
    /// Only bounded tiled classes.
    FiniteClasses,
}

/// A section whose tiled gaps are exact words over the two tile lengths.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TiledSection {
    /// Tile lengths and target frequency.
    pub params: Params,
    /// Boundary of the input window.
    pub periodic: Option<QuadReal>,
    /// Input positions.
    pub input: Vec<QuadReal>,
    /// Final positions of the input points.
    pub anchors: Vec<QuadReal>,
    /// Word filling the gap after each anchor (wrap gap last when periodic).
    pub gaps: Vec<Option<TiledWord>>,
    /// Rank of the block each point belongs to.
    pub ranks: Vec<u32>,
    /// Per-point shift history.
    pub shift_log: Vec<Vec<ShiftEntry>>,
    /// Partition witnesses per region and level.
    pub witnesses: Vec<PartitionWitness>,
    /// Which pipeline produced the section.
    pub mode: String,
    /// Non-fatal notes (truncations, fallbacks).
    pub flags: Vec<String>,
}

impl TiledSection {
    /// Untiled section on the points of `w`.
    pub fn untiled(params: &Params, w: &OrbitWindow, mode: &str) -> Self {
        let n = w.len();
        let periodic = match &w.boundary {
            Boundary::Open => None,
            Boundary::Periodic { circumference } => Some(circumference.clone()),
        };
        let g = if periodic.is_some() { n } else { n - 1 };
        TiledSection {
            params: params.clone(),
            periodic,
            input: w.positions.clone(),
            anchors: w.positions.clone(),
            gaps: vec![None; g],
            ranks: vec![0; n],
            shift_log: vec![Vec::new(); n],
            witnesses: Vec::new(),
            mode: mode.to_string(),
            flags: Vec::new(),
        }
    }

    /// Current window of anchors.
    pub fn anchor_window(&self) -> OrbitWindow {
        let boundary = match &self.periodic {
            None => Boundary::Open,
            Some(c) => Boundary::Periodic { circumference: c.clone() },
        };
        OrbitWindow::new(self.anchors.clone(), boundary).expect("anchors stay ordered")
    }

    /// Length of gap `i` between anchors.
    pub fn gap_value(&self, i: usize) -> QuadReal {
        let n = self.anchors.len();
        if i + 1 < n {
            &self.anchors[i + 1] - &self.anchors[i]
        } else {
            let c = self.periodic.as_ref().expect("wrap gap needs a circumference");
            c - (&self.anchors[n - 1] - &self.anchors[0])
        }
    }

    /// Applies a shift to point `i` and logs it.
    pub fn shift_point(&mut self, i: usize, shift: &QuadReal, stage: u32, level: u32) {
        if shift.is_zero() {
            return;
        }
        self.anchors[i] = &self.anchors[i] + shift;
        self.shift_log[i].push(ShiftEntry { stage, level, shift: shift.clone() });
    }

    /// Maximal runs of tiled gaps. For periodic sections with every gap
    /// tiled the single region starts at gap 0.
    pub fn regions(&self) -> Vec<Region> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.gaps.len() {
            if self.gaps[i].is_some() {
                let s = i;
                while i < self.gaps.len() && self.gaps[i].is_some() {
                    i += 1;
                }
                out.push(Region { first_gap: s, len: i - s });
            } else {
                i += 1;
            }
        }
        out
    }

    /// Concatenated word of a region.
    pub fn region_word(&self, r: Region) -> TiledWord {
        let mut letters = Vec::new();
        for g in &self.gaps[r.first_gap..r.first_gap + r.len] {
            letters.extend_from_slice(&g.as_ref().unwrap().letters);
        }
        TiledWord { letters }
    }

    /// Every tile endpoint, in order (the section as a window).
    pub fn tile_positions(&self) -> Vec<QuadReal> {
        let mut out = Vec::new();
        for (i, a) in self.anchors.iter().enumerate() {
            out.push(a.clone());
            if let Some(Some(w)) = self.gaps.get(i) {
                if i + 1 == self.anchors.len() {
                    break;
                }
                let mut at = a.clone();
                for l in &w.letters[..w.len().saturating_sub(1)] {
                    at = &at + if *l == Letter::A { &self.params.alpha } else { &self.params.beta };
                    out.push(at.clone());
                }
            }
        }
        out
    }

    /// Final section as a window of tile endpoints.
    pub fn to_window(&self) -> OrbitWindow {
        let boundary = match &self.periodic {
            None => Boundary::Open,
            Some(c) => Boundary::Periodic { circumference: c.clone() },
        };
        OrbitWindow::new(self.tile_positions(), boundary).expect("tile positions increase")
    }

    /// Classification of the tiled structure.
    pub fn classify(&self) -> LimitClass {
        if self.gaps.iter().all(|g| g.is_some()) {
            return LimitClass::FullyRegular;
        }
        let n = self.anchors.len();
        let total = match &self.periodic {
            Some(c) => c.clone(),
            None => &self.anchors[n - 1] - &self.anchors[0],
        };
        for r in self.regions() {
            let touches = r.first_gap == 0 || r.first_gap + r.len >= n - 1;
            let start = &self.anchors[r.first_gap];
            let end_idx = (r.first_gap + r.len).min(n - 1);
            let span = if r.first_gap + r.len >= n {
                self.periodic.as_ref().unwrap() - (start - &self.anchors[0])
            } else {
                &self.anchors[end_idx] - start
            };
            if touches && span.scale_int(2) >= total {
                return LimitClass::HalfTiled;
            }
        }
        LimitClass::FiniteClasses
    }

    /// Endpoints of the maximal tiled classes and every untiled point.
    pub fn class_endpoint_window(&self) -> OrbitWindow {
        let n = self.anchors.len();
        let mut keep = vec![false; n];
        let mut in_region = vec![false; n];
        for r in self.regions() {
            keep[r.first_gap] = true;
            let last = (r.first_gap + r.len).min(n - 1);
            keep[last] = true;
            for flag in in_region.iter_mut().take(last + 1).skip(r.first_gap) {
                *flag = true;
            }
        }
        for i in 0..n {
            if !in_region[i] {
                keep[i] = true;
            }
        }
        let pos = (0..n).filter(|i| keep[*i]).map(|i| self.anchors[i].clone()).collect();
        let boundary = match &self.periodic {
            None => Boundary::Open,
            Some(c) => Boundary::Periodic { circumference: c.clone() },
        };
        OrbitWindow::new(pos, boundary).expect("subset of ordered anchors")
    }

    /// Exact structural check: every tiled gap's word has the gap's value and
    /// every anchor displacement matches its log and stays within budget.
    pub fn verify_structure(&self, sched: &Schedule) -> Result<(), TilerError> {
        let bad = |m: String| Err(TilerError::Verification(m));
        let n = self.anchors.len();
        let expected = if self.periodic.is_some() { n } else { n - 1 };
        if self.gaps.len() != expected || self.input.len() != n || self.shift_log.len() != n {
            return bad("section arrays have inconsistent lengths".into());
        }
        let ctx = LatCtx::covering(
            [&self.params.alpha, &self.params.beta]
                .into_iter()
                .chain(self.anchors.iter())
                .chain(self.periodic.iter()),
        )
        .ok();
        for (i, g) in self.gaps.iter().enumerate() {
            if let Some(w) = g {
                let gv = self.gap_value(i);
                let ok = match &ctx {
                    Some(c) => {
                        let v = w.counts();
                        let lv = c.lat(&self.params.alpha).unwrap().times(v.p as i128)
                            + c.lat(&self.params.beta).unwrap().times(v.q as i128);
                        c.lat(&gv).map(|x| x == lv).unwrap_or(false)
                    }
                    None => w.value(&self.params) == gv,
                };
                if !ok || w.is_empty() {
                    return bad(format!("gap {i} does not equal its tiled word"));
                }
            }
        }
        for i in 1..n {
            if self.anchors[i] <= self.anchors[i - 1] {
                return bad(format!("anchors not increasing at {i}"));
            }
        }
        let total = sched.eps_total();
        for i in 0..n {
            let sum: QuadReal = self.shift_log[i].iter().map(|e| e.shift.clone()).sum();
            if &self.input[i] + &sum != self.anchors[i] {
                return bad(format!("point {i}: shift log does not replay"));
            }
            if sum.abs() > total {
                return bad(format!("point {i}: displacement exceeds the total budget"));
            }
            let mut levels: Vec<u32> = self.shift_log[i].iter().map(|e| e.level).collect();
            for e in &self.shift_log[i] {
                if e.shift.abs() >= sched.eps_at(e.level as usize) {
                    return bad(format!("point {i}: stage {} shift exceeds its budget", e.stage));
                }
            }
            levels.sort_unstable();
            let before = levels.len();
            levels.dedup();
            if levels.len() != before {
                return bad(format!("point {i}: a budget level was used twice"));
            }
        }
        Ok(())
    }

    /// Replays every partition witness exactly.
    pub fn verify_witnesses(&self) -> Result<(), TilerError> {
        let regions = self.regions();
        let (rn, rd) = self.params.rho_parts();
        for w in &self.witnesses {
            let bad = |m: &str| Err(TilerError::Verification(format!("witness level {} region {}: {m}", w.level, w.region)));
            let Some(r) = regions.get(w.region) else {
                return bad("region does not exist");
            };
            let word = self.region_word(*r);
            if w.cuts.last().copied() != Some(word.len()) && !(word.is_empty() && w.cuts == vec![0]) {
                return bad("cuts do not cover the region");
            }
            let mut start = 0;
            for &c in &w.cuts {
                if c <= start && !word.is_empty() {
                    return bad("empty or decreasing piece");
                }
                let piece = word.slice(start, c);
                let v = piece.counts();
                if self.params.value(v) > w.limit {
                    return bad("piece longer than the limit");
                }
                let dev = (BigRational::new(BigInt::from(v.p as i128 * rd - rn * v.len() as i128), BigInt::from(rd * v.len() as i128))).abs();
                if dev > w.eta {
                    return bad("piece frequency outside the tolerance");
                }
                start = c;
            }
        }
        Ok(())
    }

    /// Computes partition witnesses for levels `1..=levels` on every region.
    /// Returns the levels at which some region had no partition although it
    /// was required (level within `required` or region longer than `L_j`).
    pub fn attach_witnesses(&mut self, sched: &Schedule, levels: usize, required: usize) -> Vec<usize> {
        self.witnesses.clear();
        let mut missing = Vec::new();
        for (ri, r) in self.regions().into_iter().enumerate() {
            let word = self.region_word(r);
            let value = word.value(&self.params);
            for j in 1..=levels.min(sched.l.len() - 1) {
                let eta = sched.eta_at(j);
                let limit = &sched.l[j];
                match crate::tileable::partition_cuts(&self.params, &word, &eta, limit) {
                    Some(cuts) => self.witnesses.push(PartitionWitness {
                        level: j,
                        eta,
                        limit: limit.clone(),
                        region: ri,
                        cuts,
                    }),
                    None => {
                        if j <= required || value >= *limit {
                            missing.push(j);
                        }
                    }
                }
            }
        }
        missing.sort_unstable();
        missing.dedup();
        missing
    }

    /// Finest level whose witnesses cover every region.
    pub fn achieved_level(&self) -> usize {
        let nreg = self.regions().len();
        let mut lvl = 0;
        for j in 1.. {
            let cnt = self.witnesses.iter().filter(|w| w.level == j).count();
            if cnt < nreg || cnt == 0 {
                break;
            }
            lvl = j;
        }
        lvl
    }
}

/// Smallest run length of uniform frequency control, or a failing run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UniformFrequency {
    /// Every run of at least `n` consecutive tiles inside a region has
    /// frequency strictly within eta of rho.
    Bound {
        /// The smallest such run length.
        n: u64,
    },
    /// A whole region fails; no finite bound exists inside the window.
    Counterexample {
        /// Region index.
        region: usize,
        /// First letter of the failing run.
        start: usize,
        /// Run length.
        len: usize,
    },
}

/// Report of [`verify_uniform_frequency`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyReport {
    /// Tolerance used.
    #[serde(with = "ratio_text")]
    pub eta: BigRational,
    /// Outcome of the scan.
    pub result: UniformFrequency,
    /// Number of partition witnesses replayed.
    pub witnesses_checked: usize,
}

/// Exact scan for the smallest `N` such that every run of `>= N` tiles in a
/// tiled region has `|fr - rho| < eta`, plus a replay of every witness.
pub fn verify_uniform_frequency(t: &TiledSection, eta: &BigRational) -> Result<FrequencyReport, TilerError> {
    t.verify_witnesses()?;
    let (rn, rd) = t.params.rho_parts();
    let en = eta.numer().to_i128().ok_or_else(|| TilerError::Precondition("eta too large".into()))?;
    let ed = eta.denom().to_i128().ok_or_else(|| TilerError::Precondition("eta too large".into()))?;
    let mut best: u64 = 1;
    for (ri, r) in t.regions().into_iter().enumerate() {
        let word = t.region_word(r);
        let len = word.len();
        let mut h = Vec::with_capacity(len + 1);
        h.push(0i128);
        for l in &word.letters {
            let last = *h.last().unwrap();
            h.push(last + if *l == Letter::A { rd - rn } else { -rn });
        }
        let spread = h.iter().max().unwrap() - h.iter().min().unwrap();
        // Runs with spread * ed < en * rd * n pass automatically.
        let auto = (spread * ed) / (en * rd) + 1;
        let top = (auto as usize).min(len);
        let fails = |n: usize| -> Option<usize> {
            (0..=len - n).find(|&i| ((h[i + n] - h[i]).abs()) * ed >= en * rd * n as i128)
        };
        if len == 0 {
            continue;
        }
        if let Some(s) = fails(len) {
            return Ok(FrequencyReport {
                eta: eta.clone(),
                result: UniformFrequency::Counterexample { region: ri, start: s, len },
                witnesses_checked: t.witnesses.len(),
            });
        }
        let mut n_ok = top.max(1);
        let mut n = top;
        while n >= 1 {
            if fails(n).is_some() {
                break;
            }
            n_ok = n;
            n -= 1;
        }
        best = best.max(n_ok as u64);
    }
    Ok(FrequencyReport { eta: eta.clone(), result: UniformFrequency::Bound { n: best }, witnesses_checked: t.witnesses.len() })
}
