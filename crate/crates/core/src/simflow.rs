//! Synthetic orbit windows: bounded random gaps, sparse geometric gaps,
//! rotation return times, or a window read from disk.

use crate::exactnum::QuadReal;
use crate::sections::{Boundary, OrbitWindow, SectionError};
use crate::tileable::{enumerate_tileable, freq_alpha, Params};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

/// Errors raised while generating windows.
#[derive(Debug, Error)]
pub enum GenError {
    /// The spec is malformed.
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    /// The produced or loaded window is invalid.
    #[error(transparent)]
    Window(#[from] SectionError),
    /// Reading a window file failed.
    #[error("cannot read window file: {0}")]
    Io(#[from] std::io::Error),
    /// A window file is not valid JSON.
    #[error("cannot parse window file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Which boundary the generated window gets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    /// Free ends.
    #[default]
    Open,
    /// Cyclic, closed by a tileable circumference.
    Periodic,
}

/// Generator family and its parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Gaps `K0 + 1 + u/grid` with `u` uniform in `0..=grid`.
    Uniform {
        /// Lower gap scale.
        k0: QuadReal,
        /// Grid denominator.
        grid: u32,
    },
    /// Gaps `base * ratio^e + u/grid` with ruler-pattern exponents mirrored
    /// about the centre so both halves reach the top exponent.
    SparseGeometric {
        /// Smallest gap scale.
        base: QuadReal,
        /// Growth ratio.
        ratio: u32,
        /// Largest exponent.
        max_exp: u32,
        /// Jitter grid denominator (0 disables jitter).
        grid: u32,
    },
    /// Return times of `j -> frac(j * angle)` to `[0, width)`, scaled by `roof`.
    RotationSuspension {
        /// Irrational rotation angle.
        angle: QuadReal,
        /// Window width in (0, 1).
        width: QuadReal,
        /// Length of one time step.
        roof: QuadReal,
    },
    /// A window stored as JSON.
    File {
        /// Path to the window file.
        path: PathBuf,
    },
}

/// Full generator specification.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// Family and parameters.
    #[serde(flatten)]
    pub kind: GeneratorKind,
    /// Random seed.
    pub seed: u64,
    /// Number of points.
    pub count: usize,
    /// Boundary of the output.
    #[serde(default)]
    pub boundary: BoundaryMode,
}

impl GeneratorSpec {
    /// Uniform gaps in `[k0 + 1, k0 + 2]` on a 1/64 grid.
    pub fn uniform(k0: QuadReal, count: usize, seed: u64) -> Self {
        GeneratorSpec { kind: GeneratorKind::Uniform { k0, grid: 64 }, seed, count, boundary: BoundaryMode::Open }
    }

    /// Sparse geometric gaps with jitter on a 1/64 grid.
    pub fn sparse_geometric(base: QuadReal, ratio: u32, max_exp: u32, count: usize, seed: u64) -> Self {
        GeneratorSpec {
            kind: GeneratorKind::SparseGeometric { base, ratio, max_exp, grid: 64 },
            seed,
            count,
            boundary: BoundaryMode::Open,
        }
    }
}

fn grid_step(u: u32, grid: u32) -> QuadReal {
    QuadReal::rational(BigRational::new(BigInt::from(u), BigInt::from(grid)))
}

/// Produces a window from `spec`; deterministic in the seed.
pub fn generate(params: &Params, spec: &GeneratorSpec) -> Result<OrbitWindow, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bad = |m: &str| Err(GenError::InvalidSpec(m.to_string()));
    if spec.count == 0 && !matches!(spec.kind, GeneratorKind::File { .. }) {
        return bad("count must be positive");
    }
    let mut gaps: Vec<QuadReal> = match &spec.kind {
        GeneratorKind::Uniform { k0, grid } => {
            if *grid == 0 || k0.is_negative_or_zero() {
                return bad("uniform needs k0 > 0 and grid > 0");
            }
            let lo = k0 + QuadReal::one();
            (0..spec.count).map(|_| &lo + grid_step(rng.gen_range(0..=*grid), *grid)).collect()
        }
        GeneratorKind::SparseGeometric { base, ratio, max_exp, grid } => {
            if *ratio < 2 || base.is_negative_or_zero() {
                return bad("sparse_geometric needs ratio >= 2 and base > 0");
            }
            let g = spec.count.saturating_sub(1) + usize::from(spec.boundary == BoundaryMode::Periodic);
            ruler_exponents(g, *max_exp)
                .into_iter()
                .map(|e| {
                    let scale = QuadReal::int((*ratio as i64).pow(e));
                    let jitter = if *grid == 0 { QuadReal::zero() } else { grid_step(rng.gen_range(0..=*grid), *grid) };
                    base * &scale + jitter
                })
                .collect()
        }
        GeneratorKind::RotationSuspension { angle, width, roof } => {
            if angle.is_rational() {
                return bad("rotation angle must be irrational");
            }
            if width.signum() <= 0 || *width >= QuadReal::one() || roof.is_negative_or_zero() {
                return bad("rotation needs 0 < width < 1 and roof > 0");
            }
            return_gaps(angle, width, spec.count + 1)
                .into_iter()
                .map(|n| roof.scale_int(n as i64))
                .collect()
        }
        GeneratorKind::File { path } => {
            let text = std::fs::read_to_string(path)?;
            return Ok(serde_json::from_str(&text)?);
        }
    };
    let wrap = if spec.boundary == BoundaryMode::Periodic && matches!(spec.kind, GeneratorKind::SparseGeometric { .. }) {
        gaps.pop()
    } else if spec.boundary == BoundaryMode::Periodic {
        gaps.truncate(spec.count);
        gaps.pop()
    } else {
        gaps.truncate(spec.count.saturating_sub(1));
        None
    };
    let mut positions = Vec::with_capacity(spec.count);
    let mut at = QuadReal::zero();
    positions.push(at.clone());
    for g in &gaps {
        at = &at + g;
        positions.push(at.clone());
    }
    let boundary = match wrap {
        None => Boundary::Open,
        Some(wg) => {
            let natural = &at + &wg;
            Boundary::Periodic { circumference: tileable_circumference(params, &natural, &at)? }
        }
    };
    Ok(OrbitWindow::new(positions, boundary)?)
}

/// The tileable value in `[natural, natural + beta]` whose frequency is
/// closest to rho (then the smallest). It always exceeds the span.
fn tileable_circumference(params: &Params, natural: &QuadReal, span: &QuadReal) -> Result<QuadReal, GenError> {
    let hi = natural + &params.beta;
    enumerate_tileable(params, natural, &hi, None)
        .into_iter()
        .filter(|v| params.value(*v) > *span && !v.is_empty())
        .min_by_key(|v| (freq_alpha(*v).unwrap() - &params.rho).abs())
        .map(|v| params.value(v))
        .ok_or_else(|| GenError::InvalidSpec("no tileable circumference".into()))
}

/// Ruler-function exponents capped at `max_exp`, mirrored so both halves of
/// the sequence reach the cap.
fn ruler_exponents(g: usize, max_exp: u32) -> Vec<u32> {
    let h = g.div_ceil(2);
    let mut half: Vec<u32> = (1..=h).map(|i| (i.trailing_zeros()).min(max_exp)).collect();
    if let Some(last) = half.last_mut() {
        *last = max_exp;
    }
    let mut out = half.clone();
    let tail = g - h;
    out.extend(half[..tail].iter().rev());
    out
}

/// Successive differences of the visit times of `frac(j * angle)` to
/// `[0, width)`, starting from `j = 0`.
fn return_gaps(angle: &QuadReal, width: &QuadReal, count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut last = 0u64;
    let mut j = 0u64;
    let mut x = QuadReal::zero();
    while out.len() < count {
        j += 1;
        x = &x + angle;
        let fl = QuadReal::rational(BigRational::from_integer(x.floor()));
        x = &x - &fl;
        if x < *width {
            out.push(j - last);
            last = j;
        }
    }
    out
}

trait NonPositive {
    fn is_negative_or_zero(&self) -> bool;
}

impl NonPositive for QuadReal {
    fn is_negative_or_zero(&self) -> bool {
        self.signum() <= 0
    }
}
