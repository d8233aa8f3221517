//! Equidense matching of index sets and assembly of piecewise-translation
//! maps between two fully tiled sections.

use crate::exactnum::QuadReal;
use crate::tileable::{ratio_text, Letter, Params};
use crate::tiler::TiledSection;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use thiserror::Error;

/// Errors of LOE assembly.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LoeError {
    /// The two sections have different alpha-frequencies.
    #[error("frequency mismatch: {0} vs {1}")]
    FrequencyMismatch(String, String),
    /// Input does not meet the preconditions.
    #[error("precondition: {0}")]
    Precondition(String),
}

/// Staged greedy matching `A_k -> A_k + k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchState {
    /// `A_k` for `k = 0..` (pairwise disjoint, sorted).
    pub stages: Vec<Vec<usize>>,
    /// Matched pairs `(a, b, k)` with `b = a + k`.
    pub pairs: Vec<(usize, usize, usize)>,
    /// Unmatched elements of `A`.
    pub residue_a: Vec<usize>,
    /// Unmatched elements of `B`.
    pub residue_b: Vec<usize>,
}

impl MatchState {
    /// Image of `a` under the partial bijection.
    pub fn image(&self) -> HashMap<usize, usize> {
        self.pairs.iter().map(|(a, b, _)| (*a, *b)).collect()
    }

    /// Unmatched share of `A` and `B` together.
    pub fn residue_fraction(&self) -> f64 {
        let total = 2 * self.pairs.len() + self.residue_a.len() + self.residue_b.len();
        if total == 0 {
            0.0
        } else {
            (self.residue_a.len() + self.residue_b.len()) as f64 / total as f64
        }
    }
}

/// `A_0 = A ∩ B`; then for `k = 1..=max_k` every remaining `x` whose
/// successor `x + k` is a remaining element of `B` is matched to it.
pub fn match_equidense(a: &[usize], b: &[usize], max_k: usize) -> MatchState {
    let mut ra: BTreeSet<usize> = a.iter().copied().collect();
    let mut rb: BTreeSet<usize> = b.iter().copied().collect();
    let mut stages = Vec::new();
    let mut pairs = Vec::new();
    for k in 0..=max_k {
        if ra.is_empty() || rb.is_empty() {
            break;
        }
        let ak: Vec<usize> = ra.iter().copied().filter(|x| rb.contains(&(x + k))).collect();
        for x in &ak {
            ra.remove(x);
            rb.remove(&(x + k));
            pairs.push((*x, x + k, k));
        }
        stages.push(ak);
    }
    pairs.sort_unstable();
    MatchState { stages, pairs, residue_a: ra.into_iter().collect(), residue_b: rb.into_iter().collect() }
}

/// One translated tile.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapPiece {
    /// Tile type.
    pub kind: Letter,
    /// Tile index in the source section.
    pub source_index: usize,
    /// Tile index in the target section.
    pub target_index: usize,
    /// Source interval `[start, end)`.
    pub source: (QuadReal, QuadReal),
    /// Target interval `[start, end)`.
    pub target: (QuadReal, QuadReal),
}

/// Piecewise translation between two tiled sections.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiecewiseTranslationMap {
    /// Tile lengths.
    pub params: Params,
    /// Mapped pieces, in source order.
    pub pieces: Vec<MapPiece>,
    /// Source tiles left unmapped.
    pub residue_source: Vec<usize>,
    /// Target tiles left unmapped.
    pub residue_target: Vec<usize>,
    /// Alpha-frequency of the source.
    #[serde(with = "ratio_text")]
    pub source_freq: BigRational,
    /// Alpha-frequency of the target.
    #[serde(with = "ratio_text")]
    pub target_freq: BigRational,
}

/// Options for [`build_loe`].
#[derive(Clone, Debug)]
pub struct LoeOptions {
    /// Largest accepted difference of the two alpha-frequencies.
    pub tolerance: BigRational,
    /// Matching depth; defaults to the number of tiles.
    pub max_k: Option<usize>,
}

impl Default for LoeOptions {
    fn default() -> Self {
        LoeOptions { tolerance: BigRational::new(BigInt::from(1), BigInt::from(8)), max_k: None }
    }
}

/// Tiles of a fully tiled section as `(start, letter)`.
pub fn tiles(t: &TiledSection) -> Result<Vec<(QuadReal, Letter)>, LoeError> {
    let mut out = Vec::new();
    for (i, g) in t.gaps.iter().enumerate() {
        let w = g.as_ref().ok_or_else(|| LoeError::Precondition(format!("gap {i} is not tiled")))?;
        let mut at = t.anchors[i].clone();
        for l in &w.letters {
            out.push((at.clone(), *l));
            at = &at + if *l == Letter::A { &t.params.alpha } else { &t.params.beta };
        }
    }
    Ok(out)
}

fn frequency(ts: &[(QuadReal, Letter)]) -> BigRational {
    let a = ts.iter().filter(|t| t.1 == Letter::A).count();
    BigRational::new(BigInt::from(a), BigInt::from(ts.len().max(1)))
}

/// The order pairing `k -> k` of the first `min(n1, n2)` alpha-points.
pub fn order_pairing(n1: usize, n2: usize) -> Vec<(usize, usize)> {
    (0..n1.min(n2)).map(|k| (k, k)).collect()
}

/// Assembles the map. `psi` pairs alpha-point ordinals of `t1` with those of
/// `t2` and must be strictly increasing in both coordinates. Alpha-tiles map
/// by `psi`; beta-tiles map by conjugating the alpha-to-beta matchings of
/// each section through `psi`; beta-tiles left over on both sides are paired
/// in order.
pub fn build_loe(
    t1: &TiledSection,
    t2: &TiledSection,
    psi: &[(usize, usize)],
    opts: &LoeOptions,
) -> Result<PiecewiseTranslationMap, LoeError> {
    if t1.params != t2.params {
        return Err(LoeError::Precondition("sections use different parameters".into()));
    }
    let s1 = tiles(t1)?;
    let s2 = tiles(t2)?;
    let (f1, f2) = (frequency(&s1), frequency(&s2));
    if (&f1 - &f2).abs() > opts.tolerance {
        return Err(LoeError::FrequencyMismatch(f1.to_string(), f2.to_string()));
    }
    let alpha_idx = |s: &[(QuadReal, Letter)], l: Letter| -> Vec<usize> {
        s.iter().enumerate().filter(|(_, t)| t.1 == l).map(|(i, _)| i).collect()
    };
    let (a1, a2) = (alpha_idx(&s1, Letter::A), alpha_idx(&s2, Letter::A));
    let (b1, b2) = (alpha_idx(&s1, Letter::B), alpha_idx(&s2, Letter::B));
    for w in psi.windows(2) {
        if w[1].0 <= w[0].0 || w[1].1 <= w[0].1 {
            return Err(LoeError::Precondition("psi is not order-preserving".into()));
        }
    }
    if psi.iter().any(|(x, y)| *x >= a1.len() || *y >= a2.len()) {
        return Err(LoeError::Precondition("psi leaves the alpha-point range".into()));
    }
    let piece = |i: usize, j: usize| {
        let len = if s1[i].1 == Letter::A { &t1.params.alpha } else { &t1.params.beta };
        MapPiece {
            kind: s1[i].1,
            source_index: i,
            target_index: j,
            source: (s1[i].0.clone(), &s1[i].0 + len),
            target: (s2[j].0.clone(), &s2[j].0 + len),
        }
    };
    let mut pieces = Vec::new();
    let mut used1 = vec![false; s1.len()];
    let mut used2 = vec![false; s2.len()];
    for (x, y) in psi {
        let (i, j) = (a1[*x], a2[*y]);
        pieces.push(piece(i, j));
        used1[i] = true;
        used2[j] = true;
    }
    let max_k = opts.max_k.unwrap_or(s1.len().max(s2.len()));
    let th1 = match_equidense(&a1, &b1, max_k).image();
    let th2 = match_equidense(&a2, &b2, max_k).image();
    for (x, y) in psi {
        if let (Some(bi), Some(bj)) = (th1.get(&a1[*x]), th2.get(&a2[*y])) {
            pieces.push(piece(*bi, *bj));
            used1[*bi] = true;
            used2[*bj] = true;
        }
    }
    let left1: Vec<usize> = b1.iter().copied().filter(|i| !used1[*i]).collect();
    let left2: Vec<usize> = b2.iter().copied().filter(|j| !used2[*j]).collect();
    for (i, j) in left1.iter().zip(left2.iter()) {
        pieces.push(piece(*i, *j));
        used1[*i] = true;
        used2[*j] = true;
    }
    pieces.sort_by_key(|p| p.source_index);
    Ok(PiecewiseTranslationMap {
        params: t1.params.clone(),
        pieces,
        residue_source: (0..s1.len()).filter(|i| !used1[*i]).collect(),
        residue_target: (0..s2.len()).filter(|j| !used2[*j]).collect(),
        source_freq: f1,
        target_freq: f2,
    })
}

/// Itemized result of [`verify_loe`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoeReport {
    /// Number of pieces checked.
    pub pieces: usize,
    /// One line per violation.
    pub failures: Vec<String>,
}

impl LoeReport {
    /// True when nothing failed.
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks that pieces pair distinct tiles on each side, keep their type,
/// have exactly the tile length on both sides, and do not overlap.
pub fn verify_loe(m: &PiecewiseTranslationMap) -> LoeReport {
    let mut failures = Vec::new();
    let mut src = BTreeSet::new();
    let mut dst = BTreeSet::new();
    for (k, p) in m.pieces.iter().enumerate() {
        let len = if p.kind == Letter::A { &m.params.alpha } else { &m.params.beta };
        if &p.source.1 - &p.source.0 != *len {
            failures.push(format!("piece {k}: source length differs from its tile type"));
        }
        if &p.target.1 - &p.target.0 != *len {
            failures.push(format!("piece {k}: target length differs from its tile type"));
        }
        if !src.insert(p.source_index) {
            failures.push(format!("piece {k}: source tile {} mapped twice", p.source_index));
        }
        if !dst.insert(p.target_index) {
            failures.push(format!("piece {k}: target tile {} hit twice", p.target_index));
        }
    }
    for (name, side) in [("source", true), ("target", false)] {
        let mut iv: Vec<(&QuadReal, &QuadReal, usize)> = m
            .pieces
            .iter()
            .enumerate()
            .map(|(k, p)| if side { (&p.source.0, &p.source.1, k) } else { (&p.target.0, &p.target.1, k) })
            .collect();
        iv.sort();
        for w in iv.windows(2) {
            if w[1].0 < w[0].1 {
                failures.push(format!("pieces {} and {} overlap on the {name} side", w[0].2, w[1].2));
            }
        }
    }
    LoeReport { pieces: m.pieces.len(), failures }
}

/// Total mapped length on each side.
pub fn mapped_lengths(m: &PiecewiseTranslationMap) -> (QuadReal, QuadReal) {
    let s = m.pieces.iter().map(|p| &p.source.1 - &p.source.0).sum();
    let t = m.pieces.iter().map(|p| &p.target.1 - &p.target.0).sum();
    (s, t)
}
