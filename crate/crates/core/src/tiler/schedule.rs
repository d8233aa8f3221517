//! Stage constants for both pipelines, with every density hypothesis
//! discharged by an explicit, re-checkable witness.

use super::TilerError;
use crate::exactnum::QuadReal;
use crate::tileable::{
    density_threshold_witness_with, enumerate_tileable, eps_dense, ratio_vec_text, Density, DensityWitness, FreqBand,
    Params, WitnessOptions,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// What a recorded density certificate covers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WitnessKind {
    /// A banded family from the flexibility construction.
    Family {
        /// The family.
        witness: DensityWitness,
    },
    /// All tileable reals are `eps`-dense from `from` on, certified on
    /// `[from, from + alpha + eps]` and closed under adding alpha.
    Tileable {
        /// Density scale.
        eps: QuadReal,
        /// Start of the dense ray.
        from: QuadReal,
    },
}

/// A density certificate accepted while building a schedule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessRecord {
    /// Which constant it sized.
    pub purpose: String,
    /// Stage index it belongs to.
    pub stage: usize,
    /// The certificate.
    pub kind: WitnessKind,
}

impl WitnessRecord {
    /// Start of the certified dense ray.
    pub fn threshold(&self) -> QuadReal {
        match &self.kind {
            WitnessKind::Family { witness } => witness.threshold.clone(),
            WitnessKind::Tileable { from, .. } => from.clone(),
        }
    }

    /// Re-checks density on `[from, from + width]`.
    pub fn check_window(&self, params: &Params, from: &QuadReal, width: &QuadReal) -> Density {
        match &self.kind {
            WitnessKind::Family { witness } => witness.check_window(params, from, width),
            WitnessKind::Tileable { eps, .. } => {
                let to = from + width;
                let pts: Vec<QuadReal> =
                    enumerate_tileable(params, from, &to, None).into_iter().map(|v| params.value(v)).collect();
                eps_dense(&pts, from, &to, eps)
            }
        }
    }
}

/// Options for [`build_schedule`].
#[derive(Clone, Debug)]
pub struct ScheduleOptions {
    /// Frequency tolerances `eta_0 = 1 > eta_1 > ...`; defaults to `2^-n`.
    pub eta: Option<Vec<BigRational>>,
    /// Number of stages.
    pub depth: usize,
    /// Number of L levels to compute (at least `depth`).
    pub l_levels: usize,
    /// Initial co-sparse pair spacings `N_k`.
    pub cosparse_spacing: Vec<u64>,
}

impl ScheduleOptions {
    /// Defaults for a given depth.
    pub fn with_depth(depth: usize) -> Self {
        ScheduleOptions { eta: None, depth, l_levels: depth.max(4), cosparse_spacing: vec![4, 2, 2] }
    }
}

/// Stage constants.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    /// Tile lengths and target frequency.
    pub params: Params,
    /// Number of stages.
    pub depth: usize,
    /// `eps_n = 2^-n * min(alpha, 1) / 3`.
    pub eps: Vec<QuadReal>,
    /// Frequency tolerances.
    #[serde(with = "ratio_vec_text")]
    pub eta: Vec<BigRational>,
    /// `nu_n = eta_{n+1} + 2/3 (eta_n - eta_{n+1})`.
    #[serde(with = "ratio_vec_text")]
    pub nu: Vec<BigRational>,
    /// `nu'_n = eta_{n+1} + 1/3 (eta_n - eta_{n+1})`.
    #[serde(with = "ratio_vec_text")]
    pub nu_p: Vec<BigRational>,
    /// Class thresholds `K_0 < K_1 < ...`.
    pub k: Vec<QuadReal>,
    /// Nearness bounds `N_n`.
    pub n: Vec<u64>,
    /// Piece length bounds `L_j` for the partition witnesses.
    pub l: Vec<QuadReal>,
    /// Per-stage L sequences, agreeing with `l` up to their stage index.
    pub l_stages: Vec<Vec<QuadReal>>,
    /// Co-sparse pair spacings.
    pub cosparse_spacing: Vec<u64>,
    /// Co-sparse spacing bounds `D_1 = K_0 + 3`, `D_{k+1} = (2 N_k + 3) D_k`.
    pub d: Vec<QuadReal>,
    /// Sparse-stage families: `[low, high]` per stage, index = stage - 1.
    pub stage_families: Vec<[DensityWitness; 2]>,
    /// Every accepted density certificate.
    pub witnesses: Vec<WitnessRecord>,
}

impl Schedule {
    /// Sum of the displacement budgets used by the pipelines.
    pub fn eps_total(&self) -> QuadReal {
        self.params.min_alpha_one().scale(&rat(1, 3))
    }

    /// `eps_n`, extended geometrically past the stored range.
    pub fn eps_at(&self, n: usize) -> QuadReal {
        if n < self.eps.len() {
            self.eps[n].clone()
        } else {
            let base = self.params.min_alpha_one().scale(&rat(1, 3));
            base.scale(&BigRational::new(BigInt::one(), BigInt::one() << n))
        }
    }

    /// `eta_n`, extended by halving past the stored range.
    pub fn eta_at(&self, n: usize) -> BigRational {
        if n < self.eta.len() {
            self.eta[n].clone()
        } else {
            let last = self.eta.last().unwrap().clone();
            last / BigRational::from_integer(BigInt::one() << (n + 1 - self.eta.len()))
        }
    }

    /// Checks the structural invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        let total: QuadReal = self.eps.iter().skip(1).sum();
        if total > self.eps_total() {
            return Err("stage budgets exceed min(alpha, 1) / 3".into());
        }
        for w in self.k.windows(2) {
            if w[1] < &w[0] + QuadReal::int(4) {
                return Err("K_{n+1} < K_n + 4".into());
            }
        }
        for n in 0..self.nu.len() {
            let e1 = self.eta_at(n + 1);
            if !(e1 < self.nu_p[n] && self.nu_p[n] < self.nu[n] && self.nu[n] < self.eta[n]) {
                return Err(format!("nu ordering fails at {n}"));
            }
        }
        for (s, ls) in self.l_stages.iter().enumerate() {
            if ls[..=s.min(ls.len() - 1)] != self.l[..=s.min(ls.len() - 1)] {
                return Err(format!("stage {s} L sequence is not prefix-stable"));
            }
        }
        let four_max = QuadReal::max_of(&QuadReal::one(), &self.params.beta).scale_int(4);
        if self.k[0] < four_max {
            return Err("K_0 < 4 max(1, beta)".into());
        }
        Ok(())
    }
}

fn band(lo: BigRational, hi: BigRational) -> Result<FreqBand, TilerError> {
    let zero = BigRational::zero();
    let one = BigRational::one();
    let lo = if lo < zero { zero } else { lo };
    let hi = if hi > one { one } else { hi };
    Ok(FreqBand::new(lo, hi)?)
}

/// Builds stage constants by the recursions of the tiling constructions.
///
/// * `K_0`: smallest integer `>= 4 max(1, beta)` such that all tileable reals
///   are `eps_1`-dense from `K_0 - 2` on.
/// * `K_{n+1} = max(2 (N_w + 1), K_n + 4)` rounded up, where `N_w` is the
///   threshold of the stage families (bands `rho +- [eta/8, 3 eta/8]`,
///   `2 N_n`-far, generators in the SB sets of earlier levels).
/// * `N_0 = 1`, `N_{n+1} = floor((K_{n+1} + 1) / alpha)`.
/// * `L_0 = beta`, `L_{j+1} = max(L_j + 1, 2 (N + 2))` with `N` the threshold
///   of families at scale 1/6 over `rho -+ [eta_{j+2}, eta_{j+1}]`.
pub fn build_schedule(params: &Params, opts: &ScheduleOptions) -> Result<Schedule, TilerError> {
    let depth = opts.depth;
    if depth == 0 {
        return Err(TilerError::Schedule("depth must be at least 1".into()));
    }
    let levels = opts.l_levels.max(depth) + 3;
    let eta: Vec<BigRational> = match &opts.eta {
        Some(e) => e.clone(),
        None => (0..levels).map(|n| BigRational::new(BigInt::one(), BigInt::one() << n)).collect(),
    };
    if eta.len() < depth + 2 || eta[0] != BigRational::one() || eta.windows(2).any(|w| w[1] >= w[0]) {
        return Err(TilerError::Schedule("eta must start at 1, decrease strictly and cover depth + 2 levels".into()));
    }
    let one = BigRational::one();
    if eta[1] > params.rho || eta[1] > &one - &params.rho {
        return Err(TilerError::Schedule("eta_1 must not exceed min(rho, 1 - rho)".into()));
    }
    let base = params.min_alpha_one().scale(&rat(1, 3));
    let eps: Vec<QuadReal> =
        (0..=depth + 1).map(|n| base.scale(&BigRational::new(BigInt::one(), BigInt::one() << n))).collect();
    let nu: Vec<BigRational> =
        (0..eta.len() - 1).map(|n| &eta[n + 1] + (&eta[n] - &eta[n + 1]) * rat(2, 3)).collect();
    let nu_p: Vec<BigRational> =
        (0..eta.len() - 1).map(|n| &eta[n + 1] + (&eta[n] - &eta[n + 1]) * rat(1, 3)).collect();
    let mut witnesses = Vec::new();

    // K_0 via a translation certificate for the whole tileable set.
    let four_max = QuadReal::max_of(&QuadReal::one(), &params.beta).scale_int(4);
    let mut k0 = four_max.ceil().to_i64().unwrap();
    let width = &params.alpha + &eps[1];
    loop {
        let from = QuadReal::int(k0 - 2);
        let rec = WitnessRecord {
            purpose: "tileable density for K_0".into(),
            stage: 0,
            kind: WitnessKind::Tileable { eps: eps[1].clone(), from: from.clone() },
        };
        if rec.check_window(params, &from, &width).is_dense() {
            witnesses.push(rec);
            break;
        }
        k0 += 1;
        if k0 > 100_000 {
            return Err(TilerError::Schedule("no K_0 found".into()));
        }
    }

    // L levels.
    let sixth = QuadReal::frac(1, 6);
    let mut l = vec![params.beta.clone()];
    for j in 0..levels - 3 {
        let lo_band = band(&params.rho - &eta[j + 1], &params.rho - &eta[j + 2])?;
        let hi_band = band(&params.rho + &eta[j + 2], &params.rho + &eta[j + 1])?;
        let mut thr = QuadReal::zero();
        for b in [lo_band, hi_band] {
            let w = density_threshold_witness_with(params, &sixth, &b, &WitnessOptions::default())
                .map_err(|e| TilerError::Schedule(format!("L level {}: {e}", j + 1)))?;
            thr = QuadReal::max_of(&thr, &w.threshold);
            witnesses.push(WitnessRecord {
                purpose: format!("L_{} flexibility band", j + 1),
                stage: j + 1,
                kind: WitnessKind::Family { witness: w },
            });
        }
        let next = QuadReal::max_of(&(&l[j] + QuadReal::one()), &(thr + QuadReal::int(2)).scale_int(2));
        l.push(next);
    }

    // K_n, N_n and the sparse stage families.
    let mut k = vec![QuadReal::int(k0)];
    let mut n = vec![1u64];
    let mut stage_families = Vec::new();
    for s in 0..depth {
        let e = &eta[s + 1];
        let eighth = e * rat(1, 8);
        let three = e * rat(3, 8);
        let hi_band = band(&params.rho + &eighth, &params.rho + &three)?;
        let lo_band = band(&params.rho - &three, &params.rho - &eighth)?;
        let opts_w = WitnessOptions {
            far: 2 * n[s],
            sb_levels: (1..=s).map(|j| (eta[j].clone(), l[j].clone())).collect(),
        };
        let mut pair = Vec::new();
        let mut thr = QuadReal::zero();
        for b in [lo_band, hi_band] {
            let w = density_threshold_witness_with(params, &eps[s + 1], &b, &opts_w)
                .map_err(|e| TilerError::Schedule(format!("stage {}: {e}", s + 1)))?;
            thr = QuadReal::max_of(&thr, &w.threshold);
            witnesses.push(WitnessRecord {
                purpose: format!("stage {} family", s + 1),
                stage: s + 1,
                kind: WitnessKind::Family { witness: w.clone() },
            });
            pair.push(w);
        }
        let cand = (thr + QuadReal::one()).scale_int(2).ceil();
        let kn = QuadReal::max_of(&QuadReal::rational(BigRational::from_integer(cand)), &(&k[s] + QuadReal::int(4)));
        let nn = ((&kn + QuadReal::one()) / &params.alpha).floor().to_u64().unwrap();
        k.push(kn);
        n.push(nn);
        let hi = pair.pop().unwrap();
        let lo = pair.pop().unwrap();
        stage_families.push([lo, hi]);
    }

    let l_stages = (0..=depth)
        .map(|s| {
            l.iter()
                .enumerate()
                .map(|(j, lj)| if j <= s { lj.clone() } else { QuadReal::max_of(lj, &(lj.scale_int(2) + &k[s] + QuadReal::int(2))) })
                .collect()
        })
        .collect();
    let mut spacing = opts.cosparse_spacing.clone();
    while spacing.len() < depth {
        spacing.push(*spacing.last().unwrap_or(&2));
    }
    let mut d = vec![QuadReal::zero(), &k[0] + QuadReal::int(3)];
    for s in 1..=depth {
        let next = d[s].scale_int(2 * spacing[s - 1] as i64 + 3);
        d.push(next);
    }
    let sched = Schedule {
        params: params.clone(),
        depth,
        eps,
        eta,
        nu,
        nu_p,
        k,
        n,
        l,
        l_stages,
        cosparse_spacing: spacing,
        d,
        stage_families,
        witnesses,
    };
    sched.check_invariants().map_err(TilerError::Schedule)?;
    Ok(sched)
}
