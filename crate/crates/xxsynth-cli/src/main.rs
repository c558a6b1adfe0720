//! Command-line surface for the xxsynth library: coordinate queries,
//! membership tests, synthesis, volumes, gate-set landscape scans, and
//! Monte-Carlo statistics with machine-readable output.

use std::f64::consts::FRAC_PI_4;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use xxsynth::circuit_polytope::{member, StrengthSequence};
use xxsynth::decomposer::reconstruct;
use xxsynth::optimizer::{
    expected_cost_monte_carlo, optimal_synthesize, polytope_euclidean_volume,
    polytope_haar_volume, scan_1d, scan_2d, ErrorModel, GateSet, ScanMode, SynthesisMode,
    SynthesisOptions,
};
use xxsynth::polytope::{convex_volume_weighted, ConvexPolytope, DEFAULT_QUADRATURE_ORDER};
use xxsynth::weyl::{
    average_infidelity, haar_density, monodromy_coordinate, swap_gate, Unitary4,
    UnsortedCoordinate,
};
use xxsynth::Error;

const EXIT_PARSE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_DOMAIN: u8 = 4;

#[derive(Parser)]
#[command(name = "xxsynth", about = "Two-qubit synthesis over fixed XX interactions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArgs {
    /// Infidelity slope per full CX of interaction (m * pi/4).
    #[arg(long, default_value_t = 5.76e-3)]
    m: f64,
    /// Per-gate infidelity offset.
    #[arg(long, default_value_t = 1.909e-3)]
    b: f64,
}

impl ModelArgs {
    fn model(&self) -> Result<ErrorModel, CliError> {
        if !self.m.is_finite() || self.m < 0.0 {
            return Err(CliError::validation(format!(
                "--m must be a nonnegative number, got {}",
                self.m
            )));
        }
        if !self.b.is_finite() || self.b < 0.0 {
            return Err(CliError::validation(format!(
                "--b must be a nonnegative number, got {}",
                self.b
            )));
        }
        ErrorModel::new(self.m / FRAC_PI_4, self.b).map_err(CliError::from)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the canonical coordinate of a unitary.
    Coord {
        /// Path to a unitary JSON file ({"re": [[..]], "im": [[..]]}); "-" for stdin.
        input: String,
    },
    /// Test membership of a coordinate (or a unitary's coordinate) in a
    /// circuit polytope.
    Member {
        /// Gate strengths as CX fractions (1.0 = pi/4), comma separated.
        #[arg(long, value_delimiter = ',')]
        gates: Vec<f64>,
        /// Interpret --gates in radians instead of CX fractions.
        #[arg(long)]
        radians: bool,
        /// Coordinate a1,a2,a3 in radians.
        #[arg(long, value_delimiter = ',', conflicts_with = "input")]
        coord: Option<Vec<f64>>,
        /// Unitary JSON file to take the coordinate from.
        #[arg(long)]
        input: Option<String>,
        /// Membership slack tolerance.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Optimal synthesis of a unitary over a gate set.
    Synth {
        /// Path to a unitary JSON file; "-" for stdin.
        input: String,
        /// Gate strengths as CX fractions, comma separated.
        #[arg(long, value_delimiter = ',')]
        gates: Vec<f64>,
        /// Interpret --gates in radians instead of CX fractions.
        #[arg(long)]
        radians: bool,
        #[command(flatten)]
        model: ModelArgs,
        /// Allow approximate synthesis.
        #[arg(long)]
        approx: bool,
        /// Also consider the mirror (U . SWAP) and keep the cheaper result.
        #[arg(long)]
        mirror: bool,
    },
    /// Volumes of circuit polytopes or raw H-representation files.
    Volume {
        /// Gate strengths as CX fractions, comma separated.
        #[arg(long, value_delimiter = ',', conflicts_with = "polytope_file")]
        gates: Option<Vec<f64>>,
        /// Interpret --gates in radians instead of CX fractions.
        #[arg(long)]
        radians: bool,
        /// Raw polytope JSON file {"label": .., "ineqs": [{"coeffs": [..], "rhs": ..}]}.
        #[arg(long)]
        polytope_file: Option<PathBuf>,
        /// Weight by the Haar pushforward density instead of Lebesgue measure.
        #[arg(long)]
        haar: bool,
        /// Quadrature order (Gauss points per collapsed axis).
        #[arg(long, default_value_t = DEFAULT_QUADRATURE_ORDER)]
        order: usize,
    },
    /// Expected-cost landscape over one or two free strengths.
    Scan {
        /// Template with fixed CX fractions and free slots, e.g. "1.0,x" or "1.0,x,y".
        #[arg(long, value_delimiter = ',')]
        gates_template: Vec<String>,
        /// Number of grid points per free axis.
        #[arg(long, default_value_t = 20)]
        grid: usize,
        #[command(flatten)]
        model: ModelArgs,
        /// exact | approx
        #[arg(long, default_value = "exact")]
        mode: String,
        /// Monte-Carlo samples per grid point (approx mode).
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// Monte-Carlo seed (approx mode).
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Monte-Carlo synthesis statistics over Haar-random inputs.
    Stats {
        /// Gate strengths as CX fractions, comma separated.
        #[arg(long, value_delimiter = ',')]
        gates: Vec<f64>,
        /// Interpret --gates in radians instead of CX fractions.
        #[arg(long)]
        radians: bool,
        #[command(flatten)]
        model: ModelArgs,
        /// Number of Haar samples.
        #[arg(long, default_value_t = 10000)]
        n: usize,
        /// RNG seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Allow approximate synthesis.
        #[arg(long)]
        approx: bool,
        /// Also consider mirrors.
        #[arg(long)]
        mirror: bool,
    },
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn parse(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_PARSE,
            message: message.into(),
        }
    }
    fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }
    fn domain(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DOMAIN,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidValue { .. } => EXIT_PARSE,
            Error::NotUnitary { .. }
            | Error::InvalidCoordinate { .. }
            | Error::StrengthOutOfRange { .. } => EXIT_VALIDATION,
            _ => EXIT_DOMAIN,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn fmt_radians(x: f64) -> String {
    format!("{:.16e}", x)
}

fn fmt_triple(a: &[f64; 3]) -> String {
    format!(
        "{}, {}, {}",
        fmt_radians(a[0]),
        fmt_radians(a[1]),
        fmt_radians(a[2])
    )
}

fn read_unitary(path: &str) -> Result<Unitary4, CliError> {
    let text = if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| CliError::parse(format!("cannot read stdin: {}", e)))?;
        buf
    } else {
        std::fs::read_to_string(path)
            .map_err(|e| CliError::parse(format!("cannot read {}: {}", path, e)))?
    };
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::parse(format!("malformed JSON in {}: {}", path, e)))?;
    Unitary4::from_json(&value).map_err(CliError::from)
}

fn strengths_from_flags(gates: &[f64], radians: bool) -> Result<Vec<f64>, CliError> {
    if gates.is_empty() {
        return Err(CliError::domain("--gates must name at least one strength"));
    }
    for &g in gates {
        if !g.is_finite() || g <= 0.0 {
            return Err(CliError::validation(format!(
                "--gates entries must be positive and finite, got {}",
                g
            )));
        }
    }
    Ok(if radians {
        gates.to_vec()
    } else {
        gates.iter().map(|f| f * FRAC_PI_4).collect()
    })
}

fn gate_set(gates: &[f64], radians: bool) -> Result<GateSet, CliError> {
    GateSet::new(strengths_from_flags(gates, radians)?).map_err(CliError::from)
}

fn run() -> Result<(), CliError> {
    if let Ok(threads) = std::env::var("XXSYNTH_THREADS") {
        let n: usize = threads.parse().map_err(|_| {
            CliError::validation(format!(
                "XXSYNTH_THREADS must be a positive integer, got {}",
                threads
            ))
        })?;
        if n == 0 {
            return Err(CliError::validation(
                "XXSYNTH_THREADS must be a positive integer, got 0",
            ));
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Coord { input } => {
            let u = read_unitary(&input)?;
            let c = monodromy_coordinate(&u);
            println!("radians: {}", fmt_triple(&c.0));
            let fr = [c.0[0] / FRAC_PI_4, c.0[1] / FRAC_PI_4, c.0[2] / FRAC_PI_4];
            println!("cx-fractions: {}", fmt_triple(&fr));
        }
        Command::Member {
            gates,
            radians,
            coord,
            input,
            tol,
        } => {
            if tol < 0.0 {
                return Err(CliError::validation(format!(
                    "--tol must be nonnegative, got {}",
                    tol
                )));
            }
            let seq = StrengthSequence::new(strengths_from_flags(&gates, radians)?)
                .map_err(CliError::from)?;
            let c = match (coord, input) {
                (Some(v), None) => {
                    if v.len() != 3 {
                        return Err(CliError::parse(format!(
                            "--coord needs exactly three values, got {}",
                            v.len()
                        )));
                    }
                    let arr = [v[0], v[1], v[2]];
                    UnsortedCoordinate::new(arr)
                        .map_err(CliError::from)?
                        .to_canonical()
                }
                (None, Some(path)) => monodromy_coordinate(&read_unitary(&path)?),
                _ => {
                    return Err(CliError::parse(
                        "exactly one of --coord or --input is required",
                    ))
                }
            };
            println!("{}", member(&seq, &c, tol));
        }
        Command::Synth {
            input,
            gates,
            radians,
            model,
            approx,
            mirror,
        } => {
            let u = read_unitary(&input)?;
            let gs = gate_set(&gates, radians)?;
            let em = model.model()?;
            let opts = SynthesisOptions {
                mode: if approx {
                    SynthesisMode::Approximate
                } else {
                    SynthesisMode::Exact
                },
                mirror,
                ..Default::default()
            };
            let r = optimal_synthesize(&u, &gs, &em, &opts).map_err(CliError::from)?;
            let effective = if r.mirrored {
                Unitary4::new(u.matrix().mul(&swap_gate())).map_err(CliError::from)?
            } else {
                u
            };
            let residual = average_infidelity(&reconstruct(&r.circuit), &effective);
            let target = monodromy_coordinate(&effective);
            let out = serde_json::json!({
                "format": 1,
                "total_cost": r.total_cost,
                "mirrored": r.mirrored,
                "approximant": r.approximant.0,
                "approximation_infidelity":
                    xxsynth::weyl::canonical_infidelity(&target, &r.approximant),
                "reconstruction_residual": residual,
                "xx_strengths": r.circuit.xx_strengths(),
                "circuit": r.circuit.to_json(),
            });
            println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
        }
        Command::Volume {
            gates,
            radians,
            polytope_file,
            haar,
            order,
        } => {
            if order == 0 || order > 64 {
                return Err(CliError::validation(format!(
                    "--order must be in 1..=64, got {}",
                    order
                )));
            }
            let volume = match (gates, polytope_file) {
                (Some(g), None) => {
                    let seq = StrengthSequence::new(strengths_from_flags(&g, radians)?)
                        .map_err(CliError::from)?;
                    if haar {
                        polytope_haar_volume(&seq, order).map_err(CliError::from)?
                    } else {
                        polytope_euclidean_volume(&seq, order).map_err(CliError::from)?
                    }
                }
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| {
                        CliError::parse(format!("cannot read {}: {}", path.display(), e))
                    })?;
                    let p: ConvexPolytope = serde_json::from_str(&text)
                        .map_err(|e| CliError::parse(format!("malformed polytope JSON: {}", e)))?;
                    let density = |x: &[f64; 3]| {
                        if haar {
                            haar_density(&UnsortedCoordinate(*x))
                        } else {
                            1.0
                        }
                    };
                    convex_volume_weighted(&p, &density, order).map_err(CliError::from)?
                }
                _ => {
                    return Err(CliError::parse(
                        "exactly one of --gates or --polytope-file is required",
                    ))
                }
            };
            let out = serde_json::json!({
                "format": 1,
                "density": if haar { "haar" } else { "uniform" },
                "volume": volume,
            });
            println!("{}", out);
        }
        Command::Scan {
            gates_template,
            grid,
            model,
            mode,
            samples,
            seed,
        } => {
            if grid == 0 {
                return Err(CliError::validation("--grid must be positive, got 0"));
            }
            let em = model.model()?;
            let mut fixed = Vec::new();
            let mut free = 0usize;
            for entry in &gates_template {
                match entry.trim() {
                    "x" | "y" => free += 1,
                    other => {
                        let v: f64 = other.parse().map_err(|_| {
                            CliError::parse(format!(
                                "--gates-template entries must be numbers or x/y, got {}",
                                other
                            ))
                        })?;
                        fixed.push(v * FRAC_PI_4);
                    }
                }
            }
            let scan_mode = match mode.as_str() {
                "exact" => ScanMode::Exact,
                "approx" => {
                    if samples == 0 {
                        return Err(CliError::validation("--samples must be positive, got 0"));
                    }
                    ScanMode::Approximate { samples, seed }
                }
                other => {
                    return Err(CliError::parse(format!(
                        "--mode must be exact or approx, got {}",
                        other
                    )))
                }
            };
            match free {
                1 => {
                    let rows = scan_1d(&fixed, grid, &em, scan_mode).map_err(CliError::from)?;
                    println!("x,expected_cost");
                    for (x, cost) in rows {
                        println!("{},{}", fmt_radians(x / FRAC_PI_4), fmt_radians(cost));
                    }
                }
                2 => {
                    let rows = scan_2d(&fixed, grid, &em, scan_mode).map_err(CliError::from)?;
                    println!("x,y,expected_cost");
                    for (x, y, cost) in rows {
                        println!(
                            "{},{},{}",
                            fmt_radians(x / FRAC_PI_4),
                            fmt_radians(y / FRAC_PI_4),
                            fmt_radians(cost)
                        );
                    }
                }
                n => {
                    return Err(CliError::validation(format!(
                        "--gates-template must contain one or two free slots, got {}",
                        n
                    )))
                }
            }
        }
        Command::Stats {
            gates,
            radians,
            model,
            n,
            seed,
            approx,
            mirror,
        } => {
            if n == 0 {
                return Err(CliError::validation("--n must be at least 1, got 0"));
            }
            let gs = gate_set(&gates, radians)?;
            let em = model.model()?;
            let opts = SynthesisOptions {
                mode: if approx {
                    SynthesisMode::Approximate
                } else {
                    SynthesisMode::Exact
                },
                mirror,
                ..Default::default()
            };
            let r = expected_cost_monte_carlo(&gs, &em, &opts, n, seed).map_err(CliError::from)?;
            let out = serde_json::json!({
                "format": 1,
                "n": n,
                "seed": seed,
                "mean": r.mean,
                "stderr": r.stderr,
            });
            println!("{}", out);
            println!("template_cx_fractions,mirrored,count");
            for (strengths, mirrored, count) in r.histogram_rows() {
                let word: Vec<String> = strengths
                    .iter()
                    .map(|s| format!("{:.6}", s / FRAC_PI_4))
                    .collect();
                println!("{},{},{}", word.join(" "), mirrored, count);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
