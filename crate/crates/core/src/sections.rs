//! Finite orbit windows: gap structure, chain classes, marker subsections,
//! bounded-gap sections and B-block insertion.

use crate::exactnum::QuadReal;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors of the sections layer.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SectionError {
    /// Window data violates its invariants.
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    /// Bad arguments.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A gap is too small to host the required insertions.
    #[error("insufficient sparsity: gap {index} of length {gap} cannot be filled")]
    InsufficientSparsity {
        /// Index of the gap.
        index: usize,
        /// Its length, as exact text.
        gap: String,
    },
    /// Post-condition failed after construction.
    #[error("post-condition failed: {0}")]
    PostCondition(String),
}

/// How a window closes up.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Truncated orbit with two free ends.
    Open,
    /// Cyclic orbit of the given length.
    Periodic {
        /// Total length of the cycle.
        circumference: QuadReal,
    },
}

/// Sorted points of a section on one orbit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawWindow", into = "RawWindow")]
pub struct OrbitWindow {
    /// Strictly increasing positions.
    pub positions: Vec<QuadReal>,
    /// Boundary behaviour.
    pub boundary: Boundary,
}

#[derive(Serialize, Deserialize)]
struct RawWindow {
    boundary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    circumference: Option<QuadReal>,
    positions: Vec<QuadReal>,
}

impl TryFrom<RawWindow> for OrbitWindow {
    type Error = SectionError;
    fn try_from(r: RawWindow) -> Result<Self, SectionError> {
        let boundary = match (r.boundary.as_str(), r.circumference) {
            ("open", None) => Boundary::Open,
            ("periodic", Some(c)) => Boundary::Periodic { circumference: c },
            ("periodic", None) => return Err(SectionError::InvalidWindow("periodic window needs a circumference".into())),
            ("open", Some(_)) => return Err(SectionError::InvalidWindow("open window takes no circumference".into())),
            (b, _) => return Err(SectionError::InvalidWindow(format!("unknown boundary '{b}'"))),
        };
        OrbitWindow::new(r.positions, boundary)
    }
}

impl From<OrbitWindow> for RawWindow {
    fn from(w: OrbitWindow) -> RawWindow {
        match w.boundary {
            Boundary::Open => RawWindow { boundary: "open".into(), circumference: None, positions: w.positions },
            Boundary::Periodic { circumference } => RawWindow {
                boundary: "periodic".into(),
                circumference: Some(circumference),
                positions: w.positions,
            },
        }
    }
}

impl OrbitWindow {
    /// Validated constructor.
    pub fn new(positions: Vec<QuadReal>, boundary: Boundary) -> Result<Self, SectionError> {
        if positions.is_empty() {
            return Err(SectionError::InvalidWindow("no points".into()));
        }
        for (i, w) in positions.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(SectionError::InvalidWindow(format!("positions not strictly increasing at {i}")));
            }
        }
        if let Boundary::Periodic { circumference } = &boundary {
            let span = &positions[positions.len() - 1] - &positions[0];
            if *circumference <= span {
                return Err(SectionError::InvalidWindow("circumference must exceed the span".into()));
            }
        }
        Ok(OrbitWindow { positions, boundary })
    }

    /// Open window.
    pub fn open(positions: Vec<QuadReal>) -> Result<Self, SectionError> {
        OrbitWindow::new(positions, Boundary::Open)
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    /// Never true for a valid window.
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// True for cyclic windows.
    pub fn is_periodic(&self) -> bool {
        matches!(self.boundary, Boundary::Periodic { .. })
    }

    /// Consecutive differences, plus the wrap gap last for periodic windows.
    pub fn gaps(&self) -> Vec<QuadReal> {
        let mut g: Vec<QuadReal> = self.positions.windows(2).map(|w| &w[1] - &w[0]).collect();
        if let Some(wg) = self.wrap_gap() {
            g.push(wg);
        }
        g
    }

    /// Gap from the last point around to the first one.
    pub fn wrap_gap(&self) -> Option<QuadReal> {
        match &self.boundary {
            Boundary::Open => None,
            Boundary::Periodic { circumference } => {
                Some(circumference - (&self.positions[self.len() - 1] - &self.positions[0]))
            }
        }
    }

    /// `last - first`.
    pub fn span(&self) -> QuadReal {
        &self.positions[self.len() - 1] - &self.positions[0]
    }
}

/// Partition of point indices into maximal chains with jumps `<= K`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainClasses {
    /// Threshold.
    pub threshold: QuadReal,
    /// Classes in window order; a periodic wrap class lists its tail indices first.
    pub classes: Vec<Vec<usize>>,
}

impl ChainClasses {
    /// Class sizes in order.
    pub fn sizes(&self) -> Vec<usize> {
        self.classes.iter().map(|c| c.len()).collect()
    }

    /// Index of the class containing each point.
    pub fn class_of(&self, n: usize) -> Vec<usize> {
        let mut out = vec![0; n];
        for (ci, c) in self.classes.iter().enumerate() {
            for &i in c {
                out[i] = ci;
            }
        }
        out
    }
}

/// Chain classes of `w` at threshold `K`.
pub fn classes_leq(w: &OrbitWindow, k: &QuadReal) -> ChainClasses {
    let mut classes: Vec<Vec<usize>> = vec![vec![0]];
    for (i, pair) in w.positions.windows(2).enumerate() {
        if &pair[1] - &pair[0] <= *k {
            classes.last_mut().unwrap().push(i + 1);
        } else {
            classes.push(vec![i + 1]);
        }
    }
    if let Some(wg) = w.wrap_gap() {
        if wg <= *k && classes.len() > 1 {
            let first = classes.remove(0);
            classes.last_mut().unwrap().extend(first);
        }
    }
    ChainClasses { threshold: k.clone(), classes }
}

/// Marker indices with successive index gaps in `{d, d+1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerSelection {
    /// Selected indices, increasing.
    pub indices: Vec<usize>,
    /// True when the window is too short for a single `d^2` step.
    pub truncated: bool,
}

/// Leftmost `d^2`-spaced sub-selection (the last step absorbs the tail so
/// index gaps lie in `[d^2, 2d^2)`), each gap `N = qd + r` then split as
/// `(q - r)` steps of `d` and `r` steps of `d + 1`.
pub fn marker_subsection(w: &OrbitWindow, d: usize) -> Result<MarkerSelection, SectionError> {
    if d == 0 {
        return Err(SectionError::InvalidArgument("d must be at least 1".into()));
    }
    let last = w.len() - 1;
    let step = d * d;
    if last < step {
        return Ok(MarkerSelection { indices: vec![0], truncated: true });
    }
    let mut coarse: Vec<usize> = (0..=last).step_by(step).collect();
    // The short tail joins the last step, keeping every step below 2 d^2.
    *coarse.last_mut().unwrap() = last;
    let mut indices = vec![0];
    for pair in coarse.windows(2) {
        let n = pair[1] - pair[0];
        let (q, r) = (n / d, n % d);
        let mut at = pair[0];
        for _ in 0..(q - r) {
            at += d;
            indices.push(at);
        }
        for _ in 0..r {
            at += d + 1;
            indices.push(at);
        }
    }
    Ok(MarkerSelection { indices, truncated: false })
}

/// Points `a = z_0 < ... < z_m = b` with equal consecutive differences in `[k, K]`.
pub fn bounded_gap_section(a: &QuadReal, b: &QuadReal, k: &QuadReal, kk: &QuadReal) -> Result<OrbitWindow, SectionError> {
    if !(k.signum() > 0 && k < kk) {
        return Err(SectionError::InvalidArgument("need 0 < k < K".into()));
    }
    let len = b - a;
    if len < *k {
        return Err(SectionError::InvalidArgument("span shorter than k".into()));
    }
    let m = (&len / kk).ceil().to_i64().unwrap_or(i64::MAX).max(1);
    if k.scale_int(m) > len {
        return Err(SectionError::InvalidArgument("span too short to split into pieces within [k, K]".into()));
    }
    let piece = len.scale(&BigRational::new(1.into(), m.into()));
    let positions = (0..=m).map(|i| a + piece.scale_int(i)).collect();
    OrbitWindow::open(positions)
}

/// The block `B(K_0, ..., K_n)` and its length `b`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    /// Positions starting at 0.
    pub positions: Vec<QuadReal>,
    /// Distance from first to last point.
    pub length: QuadReal,
}

fn check_increasing(ks: &[QuadReal]) -> Result<(), SectionError> {
    if ks.is_empty() {
        return Err(SectionError::InvalidArgument("empty K list".into()));
    }
    if ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SectionError::InvalidArgument("K list must be increasing".into()));
    }
    Ok(())
}

/// `B(K_0) = {0}`; `B(.., K_{n+1})` is two copies of `B(.., K_n)` joined by
/// a gap of `(K_n + K_{n+1}) / 2`.
pub fn block_b(ks: &[QuadReal]) -> Result<Block, SectionError> {
    check_increasing(ks)?;
    let mut positions = vec![QuadReal::zero()];
    let mut length = QuadReal::zero();
    for w in ks.windows(2) {
        let shift = &length + mid(&w[0], &w[1]);
        let copy: Vec<QuadReal> = positions.iter().map(|p| p + &shift).collect();
        positions.extend(copy);
        length = &length + &shift;
    }
    Ok(Block { positions, length })
}

fn mid(a: &QuadReal, b: &QuadReal) -> QuadReal {
    (a + b).scale(&BigRational::new(1.into(), 2.into()))
}

/// Level of a gap: the `n` with `|gap - (K_n + K_{n+1})/2| < eps`.
pub fn gap_level(gap: &QuadReal, ks: &[QuadReal], eps: &QuadReal) -> Option<usize> {
    ks.windows(2).position(|w| (gap - mid(&w[0], &w[1])).abs() < *eps)
}

/// Checks that (i) every gap exceeds `K_0`, (ii) every non-boundary
/// `K_{n+1}`-class has at least two `K_n`-classes, and (iii) every gap is
/// within `eps` of some `(K_n + K_{n+1})/2`.
pub fn check_block_posts(w: &OrbitWindow, ks: &[QuadReal], eps: &QuadReal) -> Result<(), String> {
    let gaps = w.gaps();
    for (i, g) in gaps.iter().enumerate() {
        if *g <= ks[0] {
            return Err(format!("gap {i} does not exceed K_0"));
        }
        if gap_level(g, ks, eps).is_none() {
            return Err(format!("gap {i} is not near any level midpoint"));
        }
    }
    let last = w.len() - 1;
    for n in 0..ks.len().saturating_sub(1) {
        let upper = classes_leq(w, &ks[n + 1]);
        let lower = classes_leq(w, &ks[n]).class_of(w.len());
        for c in &upper.classes {
            if !w.is_periodic() && (c.contains(&0) || c.contains(&last)) {
                continue;
            }
            if upper.classes.len() == 1 && w.is_periodic() {
                continue;
            }
            let mut seen: Vec<usize> = c.iter().map(|i| lower[*i]).collect();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() < 2 {
                return Err(format!("a K_{}-class at index {} holds fewer than two K_{n}-classes", n + 1, c[0]));
            }
        }
    }
    Ok(())
}

/// Result of [`insert_blocks`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockInsertion {
    /// Enriched window containing every original point.
    pub window: OrbitWindow,
    /// Level used to fill each original gap (empty when unchanged).
    pub levels: Vec<usize>,
    /// Number of inserted points.
    pub inserted: usize,
}

/// Fills every gap of `w` with copies of one block `B(K_0..K_n)` laid from
/// the gap's left end and separated by equal gaps within `eps` of
/// `(K_n + K_{n+1})/2`. Each original point thus starts a block, which makes
/// every interior class split as required. Returns the input unchanged when
/// it already satisfies the posts.
pub fn insert_blocks(w: &OrbitWindow, ks: &[QuadReal], eps: &QuadReal) -> Result<BlockInsertion, SectionError> {
    check_increasing(ks)?;
    if ks.len() < 2 {
        return Err(SectionError::InvalidArgument("need at least two K values".into()));
    }
    if eps.signum() <= 0 {
        return Err(SectionError::InvalidArgument("eps must be positive".into()));
    }
    if ks.windows(2).any(|p| p[1] < &p[0] + eps.scale_int(2)) {
        return Err(SectionError::InvalidArgument("need K_{n+1} >= K_n + 2 eps".into()));
    }
    if check_block_posts(w, ks, eps).is_ok() {
        return Ok(BlockInsertion { window: w.clone(), levels: Vec::new(), inserted: 0 });
    }
    let blocks: Vec<Block> = (1..ks.len()).map(|n| block_b(&ks[..n]).unwrap()).collect();
    let gaps = w.gaps();
    let mut positions = Vec::with_capacity(w.len());
    let mut levels = Vec::with_capacity(gaps.len());
    for (i, g) in gaps.iter().enumerate() {
        let (n, k) = (0..ks.len() - 1)
            .rev()
            .find_map(|n| fill_count(g, &blocks[n].length, &mid(&ks[n], &ks[n + 1]), eps).map(|k| (n, k)))
            .ok_or_else(|| SectionError::InsufficientSparsity { index: i, gap: g.to_string() })?;
        levels.push(n);
        let start = &w.positions[i];
        let sep = g.scale(&BigRational::new(1.into(), (k as i64).into())) - &blocks[n].length;
        let period = &blocks[n].length + &sep;
        for c in 0..k {
            let base = start + period.scale_int(c as i64);
            positions.extend(blocks[n].positions.iter().map(|p| &base + p));
        }
    }
    if !w.is_periodic() {
        positions.push(w.positions[w.len() - 1].clone());
    }
    let inserted = positions.len() - w.len();
    let window = OrbitWindow::new(positions, w.boundary.clone())
        .map_err(|e| SectionError::PostCondition(e.to_string()))?;
    check_block_posts(&window, ks, eps).map_err(SectionError::PostCondition)?;
    Ok(BlockInsertion { window, levels, inserted })
}

/// Smallest `k >= 1` with `|G/k - b - m| < eps`, if any.
fn fill_count(g: &QuadReal, b: &QuadReal, m: &QuadReal, eps: &QuadReal) -> Option<u64> {
    let c = b + m;
    let kmin = (g / (&c + eps)).floor().to_u64()? + 1;
    let k = kmin.max(1);
    let sep = g.scale(&BigRational::new(1.into(), (k as i64).into())) - b;
    ((&sep - m).abs() < *eps).then_some(k)
}

/// True when both halves of the gap sequence contain a gap `>= N`.
pub fn is_sparse_window(w: &OrbitWindow, n: &QuadReal) -> bool {
    let gaps: Vec<QuadReal> = w.positions.windows(2).map(|p| &p[1] - &p[0]).collect();
    let h = gaps.len() / 2;
    if h == 0 {
        return false;
    }
    gaps[..h].iter().any(|g| g >= n) && gaps[gaps.len() - h..].iter().any(|g| g >= n)
}
