//! `flowtile` command-line front end.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use flowtile::admissible::{enumerate_a_n, frequency_boost, BoostOptions, ShiftProblem};
use flowtile::exactnum::{approx_text, QuadReal};
use flowtile::loe::{build_loe, order_pairing, tiles, verify_loe, LoeOptions};
use flowtile::sections::{classes_leq, insert_blocks, OrbitWindow};
use flowtile::simflow::{generate, BoundaryMode, GeneratorKind, GeneratorSpec};
use flowtile::tileable::{density_threshold_witness, FreqBand, Letter, Params};
use flowtile::tiler::{
    build_schedule, full_pipeline, sparse_tile_with, verify_uniform_frequency, Schedule, ScheduleOptions,
    SparseOptions, TiledSection, UniformFrequency,
};
use num_rational::BigRational;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "flowtile", version, about = "Exact two-valued tilings of flow cross sections")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Uniform,
    SparseGeometric,
    Rotation,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sparse,
    Full,
}

/// Schedule source shared by several subcommands.
#[derive(clap::Args)]
struct SchedArgs {
    /// Schedule JSON; built from the default parameters when omitted.
    #[arg(long)]
    schedule: Option<PathBuf>,
    /// Depth of the schedule built when `--schedule` is omitted.
    #[arg(long, default_value_t = 2)]
    depth: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an orbit window.
    Gen {
        #[arg(long, value_enum, default_value = "uniform")]
        kind: Kind,
        /// Number of points.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Seed (overridden by FLOWTILE_SEED).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Lower gap scale for `uniform`; defaults to the schedule K_0.
        #[arg(long)]
        k0: Option<QuadReal>,
        /// Smallest gap scale for `sparse-geometric`.
        #[arg(long, default_value = "10")]
        base: QuadReal,
        /// Growth ratio for `sparse-geometric`.
        #[arg(long, default_value_t = 2)]
        ratio: u32,
        /// Largest exponent for `sparse-geometric`.
        #[arg(long, default_value_t = 6)]
        max_exp: u32,
        /// Rotation angle for `rotation`.
        #[arg(long, default_value = "-1 + sqrt(2)")]
        angle: QuadReal,
        /// Window width for `rotation`.
        #[arg(long, default_value = "1/3")]
        width: QuadReal,
        /// Time step for `rotation`.
        #[arg(long, default_value = "1")]
        roof: QuadReal,
        /// Close the window into a cycle.
        #[arg(long)]
        periodic: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Class sizes of a window at threshold K.
    Classes {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        k: QuadReal,
    },
    /// Insert block points so every long gap carries a full block.
    Blocks {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        sched: SchedArgs,
        /// Tolerance of inserted gaps.
        #[arg(long, default_value = "1")]
        eps: QuadReal,
        #[arg(long)]
        out: PathBuf,
    },
    /// Density threshold witness for a frequency band.
    Density {
        #[arg(long)]
        eps: QuadReal,
        #[arg(long)]
        band_lo: BigRational,
        #[arg(long)]
        band_hi: BigRational,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Frequency boost on a shift problem.
    Boost {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        gamma: BigRational,
        #[arg(long)]
        zeta: BigRational,
        #[arg(long)]
        eta: BigRational,
        /// Replace the closed-form length bound.
        #[arg(long)]
        min_n: Option<u64>,
        /// Also print the admissible set.
        #[arg(long)]
        enumerate: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tile a window.
    Tile {
        #[arg(long, value_enum, default_value = "full")]
        mode: Mode,
        #[command(flatten)]
        sched: SchedArgs,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the schedule used.
        #[arg(long)]
        save_schedule: Option<PathBuf>,
    },
    /// Verify a tiled section and report N(eta).
    Verify {
        #[arg(long, default_value = "1/8")]
        eta: BigRational,
        #[command(flatten)]
        sched: SchedArgs,
        tiled: PathBuf,
    },
    /// Build and verify an orbit-equivalence map between two tiled sections.
    Loe {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Frequency tolerance between the sections.
        #[arg(long, default_value = "1/8")]
        tolerance: BigRational,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a tiled section as SVG.
    Plot {
        tiled: PathBuf,
        #[arg(long)]
        svg: PathBuf,
    },
}

/// Failure of a verification step (exit status 1).
#[derive(Debug)]
struct VerifyFailed(String);

impl fmt::Display for VerifyFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "verification failed: {}", self.0)
    }
}

impl std::error::Error for VerifyFailed {}

fn read_json<T: DeserializeOwned>(p: &Path) -> Result<T> {
    let s = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    serde_json::from_str(&s).with_context(|| format!("parsing {}", p.display()))
}

fn write_json<T: Serialize>(p: &Path, v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v)?;
    fs::write(p, s + "\n").with_context(|| format!("writing {}", p.display()))
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn load_schedule(a: &SchedArgs, params: &Params) -> Result<Schedule> {
    let s: Schedule = match &a.schedule {
        Some(p) => read_json(p)?,
        None => build_schedule(params, &ScheduleOptions::with_depth(a.depth))?,
    };
    if s.params != *params {
        bail!("schedule parameters differ from the input parameters");
    }
    Ok(s)
}

fn seed(given: u64) -> Result<u64> {
    match std::env::var("FLOWTILE_SEED") {
        Ok(v) => v.trim().parse().with_context(|| format!("FLOWTILE_SEED={v} is not an integer")),
        Err(_) => Ok(given),
    }
}

fn run(cli: Cli) -> Result<()> {
    let params = Params::default_params();
    match cli.cmd {
        Cmd::Gen { kind, n, seed: s, k0, base, ratio, max_exp, angle, width, roof, periodic, out } => {
            let kind = match kind {
                Kind::Uniform => {
                    let k0 = match k0 {
                        Some(k) => k,
                        None => build_schedule(&params, &ScheduleOptions::with_depth(2))?.k[0].clone(),
                    };
                    GeneratorKind::Uniform { k0, grid: 64 }
                }
                Kind::SparseGeometric => GeneratorKind::SparseGeometric { base, ratio, max_exp, grid: 64 },
                Kind::Rotation => GeneratorKind::RotationSuspension { angle, width, roof },
            };
            let boundary = if periodic { BoundaryMode::Periodic } else { BoundaryMode::Open };
            let spec = GeneratorSpec { kind, seed: seed(s)?, count: n, boundary };
            let w = generate(&params, &spec)?;
            write_json(&out, &w)?;
            println!("wrote {} positions to {}", w.len(), out.display());
        }
        Cmd::Classes { input, k } => {
            let w: OrbitWindow = read_json(&input)?;
            print_json(&classes_leq(&w, &k))?;
        }
        Cmd::Blocks { input, sched, eps, out } => {
            let w: OrbitWindow = read_json(&input)?;
            let s = load_schedule(&sched, &params)?;
            let ins = insert_blocks(&w, &s.k, &eps)?;
            write_json(&out, &ins.window)?;
            println!("inserted {} points; {} positions written to {}", ins.inserted, ins.window.len(), out.display());
        }
        Cmd::Density { eps, band_lo, band_hi, out } => {
            let band = FreqBand::new(band_lo, band_hi)?;
            let wit = density_threshold_witness(&params, &eps, &band)?;
            println!("threshold {} ({})", wit.threshold, approx_text(&wit.threshold));
            match out {
                Some(p) => write_json(&p, &wit)?,
                None => print_json(&wit)?,
            }
        }
        Cmd::Boost { problem, gamma, zeta, eta, min_n, enumerate, out } => {
            let prob: ShiftProblem = read_json(&problem)?;
            prob.validate(&params)?;
            if enumerate {
                print_json(&enumerate_a_n(&params, &prob)?)?;
            }
            let opts = BoostOptions { min_n_override: min_n };
            let e = frequency_boost(&params, &prob, &gamma, &zeta, &eta, &opts)?;
            println!("value {} ({})", e.value, approx_text(&e.value));
            match out {
                Some(p) => write_json(&p, &e)?,
                None => print_json(&e)?,
            }
        }
        Cmd::Tile { mode, sched, input, out, save_schedule } => {
            let w: OrbitWindow = read_json(&input)?;
            let s = load_schedule(&sched, &params)?;
            let t = match mode {
                Mode::Full => full_pipeline(&w, &s)?,
                Mode::Sparse => {
                    let (t, reports) = sparse_tile_with(&w, &s, &SparseOptions::default())?;
                    for r in &reports {
                        println!("stage {}: tiled {} gaps, {} fallbacks", r.stage, r.tiled, r.fallbacks);
                    }
                    t
                }
            };
            for f in &t.flags {
                println!("flag: {f}");
            }
            write_json(&out, &t)?;
            if let Some(p) = save_schedule {
                write_json(&p, &s)?;
            }
            println!("tiled section written to {}", out.display());
        }
        Cmd::Verify { eta, sched, tiled } => {
            let t: TiledSection = read_json(&tiled)?;
            let s = load_schedule(&sched, &t.params)?;
            t.verify_structure(&s).map_err(|e| VerifyFailed(e.to_string()))?;
            let rep = verify_uniform_frequency(&t, &eta).map_err(|e| VerifyFailed(e.to_string()))?;
            print_json(&rep)?;
            match rep.result {
                UniformFrequency::Bound { n } => println!("N({eta}) = {n}"),
                UniformFrequency::Counterexample { region, start, len } => {
                    return Err(VerifyFailed(format!("region {region}: run of {len} tiles at {start} is outside eta")).into());
                }
            }
        }
        Cmd::Loe { a, b, tolerance, out } => {
            let t1: TiledSection = read_json(&a)?;
            let t2: TiledSection = read_json(&b)?;
            let count = |t: &TiledSection| -> Result<usize> {
                Ok(tiles(t)?.iter().filter(|x| x.1 == Letter::A).count())
            };
            let psi = order_pairing(count(&t1)?, count(&t2)?);
            let opts = LoeOptions { tolerance, ..LoeOptions::default() };
            let m = build_loe(&t1, &t2, &psi, &opts)?;
            write_json(&out, &m)?;
            let rep = verify_loe(&m);
            print_json(&rep)?;
            if !rep.passed() {
                return Err(VerifyFailed(format!("{} map checks failed", rep.failures.len())).into());
            }
            println!("{} pieces written to {}", m.pieces.len(), out.display());
        }
        Cmd::Plot { tiled, svg } => {
            let t: TiledSection = read_json(&tiled)?;
            fs::write(&svg, render_svg(&t)?).with_context(|| format!("writing {}", svg.display()))?;
            println!("wrote {}", svg.display());
        }
    }
    Ok(())
}

const ALPHA_COLOR: &str = "#1f77b4";
const BETA_COLOR: &str = "#ff7f0e";

/// Tiles as coloured bars, untiled gaps as grey bars, anchors as ticks
/// labelled with their rank.
fn render_svg(t: &TiledSection) -> Result<String> {
    let width = 1200.0;
    let margin = 20.0;
    let first = t.anchors.first().ok_or_else(|| anyhow!("empty section"))?.to_f64();
    let last = t.anchors.last().unwrap().to_f64() + t.periodic.as_ref().map_or(0.0, |_| t.gap_value(t.gaps.len() - 1).to_f64());
    let span = (last - first).max(1e-9);
    let x = |v: f64| margin + (v - first) / span * (width - 2.0 * margin);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"100\" viewBox=\"0 0 {width} 100\">\n"
    );
    let (a, b) = (t.params.alpha.to_f64(), t.params.beta.to_f64());
    for (i, g) in t.gaps.iter().enumerate() {
        let start = t.anchors[i].to_f64();
        match g {
            Some(w) => {
                let mut p = start;
                for l in &w.letters {
                    let (len, color) = if *l == Letter::A { (a, ALPHA_COLOR) } else { (b, BETA_COLOR) };
                    out += &format!(
                        "<rect x=\"{:.3}\" y=\"40\" width=\"{:.3}\" height=\"20\" fill=\"{color}\" stroke=\"white\" stroke-width=\"0.2\"/>\n",
                        x(p),
                        x(p + len) - x(p)
                    );
                    p += len;
                }
            }
            None => {
                let end = start + t.gap_value(i).to_f64();
                out += &format!(
                    "<rect x=\"{:.3}\" y=\"45\" width=\"{:.3}\" height=\"10\" fill=\"#cccccc\"/>\n",
                    x(start),
                    x(end) - x(start)
                );
            }
        }
    }
    for (i, p) in t.anchors.iter().enumerate() {
        let px = x(p.to_f64());
        out += &format!("<line x1=\"{px:.3}\" y1=\"30\" x2=\"{px:.3}\" y2=\"70\" stroke=\"black\" stroke-width=\"0.5\"/>\n");
        if t.ranks[i] > 0 {
            out += &format!("<text x=\"{px:.3}\" y=\"82\" font-size=\"8\" text-anchor=\"middle\">{}</text>\n", t.ranks[i]);
        }
    }
    out += &format!(
        "<text x=\"{margin}\" y=\"15\" font-size=\"10\"><tspan fill=\"{ALPHA_COLOR}\">alpha</tspan> <tspan fill=\"{BETA_COLOR}\">beta</tspan> gaps, {} mode</text>\n",
        t.mode
    );
    out += "</svg>\n";
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<VerifyFailed>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
