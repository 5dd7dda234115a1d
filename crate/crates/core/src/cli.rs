//! Command-line front end: argument parsing, subcommand dispatch and CSV
//! output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::compensation::{build_sequence, canonicalize_start, escape_sequence, BoundarySequence, DEFAULT_TRUNCATION_TOL};
use crate::curve::CurveGeometry;
use crate::error::Error;
use crate::model::{validate_model, StepDistribution};
use crate::montecarlo::{
    default_green_horizon, estimate_escape, estimate_green, estimate_halfplane_survival, green_direction_scan,
    martin_kernel_estimate, SimConfig, SimEstimate,
};
use crate::uniformization::UniformizationParams;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "quarter-walk", version, about = "Harmonic functions and escape probabilities of singular quarter-plane walks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ModelArg {
    /// Model file: one `di dj p` line per step, `#` comments.
    pub model: PathBuf,
    /// Write the result here instead of standard output.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MonteCarloArgs {
    /// Number of simulated paths.
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    /// Seed of the random streams (required for reproducibility).
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    Escape,
    Green,
    Martin,
    Halfplane,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the model against the standing assumptions.
    Validate {
        model: PathBuf,
    },
    /// Tabulate the branches f and g on a grid of non-positive arguments.
    CurveDump {
        #[command(flatten)]
        io: ModelArg,
        #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Escape probability from (i, j) by the compensation series.
    Escape {
        #[command(flatten)]
        io: ModelArg,
        #[arg(long)]
        i: u32,
        #[arg(long)]
        j: u32,
        /// Truncation tolerance of the series.
        #[arg(long, default_value_t = DEFAULT_TRUNCATION_TOL)]
        tol: f64,
        /// Also estimate by simulation with this many paths.
        #[arg(long, requires = "seed")]
        mc_paths: Option<usize>,
        #[arg(long, default_value_t = 10_000)]
        mc_horizon: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Table of the harmonic function h(i, j).
    HarmonicTable {
        #[command(flatten)]
        io: ModelArg,
        #[arg(long, default_value_t = 10)]
        imax: u32,
        #[arg(long, default_value_t = 10)]
        jmax: u32,
        #[arg(long, default_value_t = DEFAULT_TRUNCATION_TOL)]
        tol: f64,
        /// Start point `x,y` on the curve; defaults to the origin.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        start: Option<(f64, f64)>,
        /// Append the largest tail bound of each row.
        #[arg(long)]
        bounds: bool,
    },
    /// Table of the boundary harmonic function 2 t'_{ij}(y0).
    BoundaryHarmonic {
        #[command(flatten)]
        io: ModelArg,
        #[arg(long, default_value_t = 10)]
        imax: u32,
        #[arg(long, default_value_t = 10)]
        jmax: u32,
        #[arg(long, default_value_t = DEFAULT_TRUNCATION_TOL)]
        tol: f64,
    },
    /// Uniformized sequence (alpha_n, beta_n) of a small-step model.
    Sequence {
        #[command(flatten)]
        io: ModelArg,
        /// Parameter in (1/rho, 1); defaults to the escape start.
        #[arg(long)]
        s: Option<f64>,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        from: i32,
        #[arg(long, default_value_t = 9, allow_hyphen_values = true)]
        to: i32,
    },
    /// Monte Carlo estimate of one quantity.
    Simulate {
        #[command(flatten)]
        io: ModelArg,
        #[arg(long, value_enum)]
        quantity: Quantity,
        #[arg(long)]
        i: i64,
        #[arg(long)]
        j: i64,
        /// Target site `i,j` for green and martin.
        #[arg(long, value_parser = parse_site)]
        target: Option<(i64, i64)>,
        /// Sample the Green estimators under the tilt towards direction `u1,u2`.
        #[arg(long, value_parser = parse_pair)]
        twist: Option<(f64, f64)>,
        #[arg(long)]
        horizon: Option<usize>,
        #[command(flatten)]
        mc: MonteCarloArgs,
    },
    /// Rescaled Green function along a direction.
    GreenScan {
        #[command(flatten)]
        io: ModelArg,
        #[arg(long)]
        i: i64,
        #[arg(long)]
        j: i64,
        #[arg(long, value_parser = parse_pair)]
        direction: (f64, f64),
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        #[arg(long)]
        horizon: Option<usize>,
        #[command(flatten)]
        mc: MonteCarloArgs,
    },
    /// Series against simulation on a grid of starting points.
    Compare {
        #[command(flatten)]
        io: ModelArg,
        #[arg(long, default_value_t = 1)]
        imin: u32,
        #[arg(long, default_value_t = 3)]
        imax: u32,
        #[arg(long, default_value_t = 1)]
        jmin: u32,
        #[arg(long, default_value_t = 3)]
        jmax: u32,
        #[arg(long, default_value_t = 10_000)]
        horizon: usize,
        #[arg(long, default_value_t = DEFAULT_TRUNCATION_TOL)]
        tol: f64,
        #[command(flatten)]
        mc: MonteCarloArgs,
    },
}

fn parse_pair(text: &str) -> Result<(f64, f64), String> {
    let (a, b) = text.split_once(',').ok_or_else(|| format!("expected `a,b`, got `{text}`"))?;
    let a = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((a, b))
}

fn parse_site(text: &str) -> Result<(i64, i64), String> {
    let (a, b) = text.split_once(',').ok_or_else(|| format!("expected `i,j`, got `{text}`"))?;
    let a = a.trim().parse::<i64>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<i64>().map_err(|e| e.to_string())?;
    Ok((a, b))
}

/// Failure of a subcommand with its exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse { .. } | Error::InvalidModel(_) | Error::DriftNotInterior { .. } | Error::NotSmallStep(_) => {
                EXIT_VALIDATION
            }
            Error::Domain(_) => EXIT_USAGE,
            _ => EXIT_NUMERICAL,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

/// Provenance written as `#` comments at the top of every output.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub model_path: String,
    pub parameters: BTreeMap<String, String>,
    pub tool_version: String,
    pub seed: Option<u64>,
}

impl RunManifest {
    fn new(command: &str, model: &std::path::Path) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            model_path: model.display().to_string(),
            parameters: BTreeMap::new(),
            tool_version: format!("quarter-walk {}", env!("CARGO_PKG_VERSION")),
            seed: None,
        }
    }

    fn param(mut self, key: &str, value: impl ToString) -> RunManifest {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    fn seed(mut self, seed: u64) -> RunManifest {
        self.seed = Some(seed);
        self
    }

    pub fn header(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# command: {}", self.command);
        let _ = writeln!(out, "# model: {}", self.model_path);
        let _ = writeln!(out, "# tool_version: {}", self.tool_version);
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "# seed: {seed}");
        }
        for (k, v) in &self.parameters {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out
    }
}

/// Seventeen significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn load(path: &std::path::Path) -> Result<StepDistribution, CliError> {
    Ok(StepDistribution::from_path(path)?)
}

fn estimate_row(quantity: &str, e: &SimEstimate) -> String {
    format!(
        "{quantity},{},{},{},{},{}\n",
        num(e.mean),
        num(e.std_error),
        e.n_paths,
        e.horizon,
        e.seed
    )
}

const ESTIMATE_HEADER: &str = "quantity,value,std_error,n_paths,horizon,seed\n";

/// Output of a successful subcommand.
pub struct Outcome {
    pub text: String,
    pub output: Option<PathBuf>,
    pub code: i32,
}

fn done(manifest: RunManifest, body: String, output: &Option<PathBuf>) -> Outcome {
    Outcome {
        text: manifest.header() + &body,
        output: output.clone(),
        code: EXIT_OK,
    }
}

/// Executes a parsed command line.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Validate { model } => {
            let dist = load(model)?;
            let report = validate_model(&dist);
            let mut body = String::new();
            let _ = writeln!(body, "passed: {}", if report.passed { "yes" } else { "no" });
            let _ = writeln!(body, "small-step: {}", if report.is_small_step { "yes" } else { "no" });
            let drift = dist.drift();
            let _ = writeln!(body, "drift: {},{}", num(drift.0), num(drift.1));
            for (rule, message) in &report.violations {
                let _ = writeln!(body, "violation: {}: {message}", rule.id());
            }
            for note in &report.notes {
                let _ = writeln!(body, "note: {note}");
            }
            let manifest = RunManifest::new("validate", model);
            Ok(Outcome {
                text: manifest.header() + &body,
                output: None,
                code: if report.passed { EXIT_OK } else { EXIT_VALIDATION },
            })
        }
        Command::CurveDump { io, from, to, step } => {
            if !(step > &0.0) || from > to || *to > 0.0 {
                return Err(CliError {
                    code: EXIT_USAGE,
                    message: "need from <= to <= 0 and step > 0".into(),
                });
            }
            let geom = CurveGeometry::new(&load(&io.model)?)?;
            let mut body = String::from("x,f(x),y,g(y)\n");
            let count = ((to - from) / step + 1e-9).floor() as usize;
            for k in 0..=count {
                let t = (from + k as f64 * step).min(*to);
                let _ = writeln!(
                    body,
                    "{},{},{},{}",
                    num(t),
                    num(geom.f_branch(t)?),
                    num(t),
                    num(geom.g_branch(t)?)
                );
            }
            let manifest = RunManifest::new("curve-dump", &io.model)
                .param("from", num(*from))
                .param("to", num(*to))
                .param("step", num(*step))
                .param("x0", num(geom.x0))
                .param("y0", num(geom.y0))
                .param("c1", num(geom.c1))
                .param("c2", num(geom.c2));
            Ok(done(manifest, body, &io.output))
        }
        Command::Escape {
            io,
            i,
            j,
            tol,
            mc_paths,
            mc_horizon,
            seed,
        } => {
            let geom = CurveGeometry::new(&load(&io.model)?)?;
            let seq = escape_sequence(&geom, *tol, (i + j).max(2))?;
            let h = seq.harmonic_eval(*i, *j)?;
            let mut body = String::from("quantity,value\n");
            let _ = writeln!(body, "series,{}", num(h.value));
            let _ = writeln!(body, "tail_bound,{}", num(h.tail_bound));
            let _ = writeln!(body, "terms,{}", h.terms_used);
            let mut manifest = RunManifest::new("escape", &io.model)
                .param("i", i)
                .param("j", j)
                .param("tol", num(*tol));
            if let (Some(paths), Some(seed)) = (mc_paths, seed) {
                let mc = if *i == 0 || *j == 0 {
                    None
                } else {
                    let cfg = SimConfig::new(*seed, *paths, *mc_horizon)?;
                    Some(estimate_escape(geom.dist(), (i64::from(*i), i64::from(*j)), &cfg)?)
                };
                let (mean, se) = mc.as_ref().map_or((0.0, 0.0), |e| (e.mean, e.std_error));
                let agree = (mean - h.value).abs() <= 3.0 * se + h.tail_bound;
                let _ = writeln!(body, "mc_mean,{}", num(mean));
                let _ = writeln!(body, "mc_std_error,{}", num(se));
                let _ = writeln!(body, "verdict,{}", if agree { "agree" } else { "disagree" });
                manifest = manifest
                    .seed(*seed)
                    .param("mc_paths", paths)
                    .param("mc_horizon", mc_horizon);
            }
            Ok(done(manifest, body, &io.output))
        }
        Command::HarmonicTable {
            io,
            imax,
            jmax,
            tol,
            start,
            bounds,
        } => {
            let geom = CurveGeometry::new(&load(&io.model)?)?;
            let seq = match start {
                None => escape_sequence(&geom, *tol, 2)?,
                Some(p) => build_sequence(&geom, canonicalize_start(&geom, *p)?, *tol, 2)?,
            };
            let mut body = String::from("i");
            for j in 0..=*jmax {
                let _ = write!(body, ",j={j}");
            }
            if *bounds {
                body.push_str(",max_tail_bound");
            }
            body.push('\n');
            for i in 0..=*imax {
                let _ = write!(body, "{i}");
                let mut worst: f64 = 0.0;
                for j in 0..=*jmax {
                    let h = seq.harmonic_eval(i, j)?;
                    worst = worst.max(h.tail_bound);
                    let _ = write!(body, ",{}", num(h.value));
                }
                if *bounds {
                    let _ = write!(body, ",{}", num(worst));
                }
                body.push('\n');
            }
            let s = seq.start();
            let manifest = RunManifest::new("harmonic-table", &io.model)
                .param("imax", imax)
                .param("jmax", jmax)
                .param("tol", num(*tol))
                .param("start", format!("{},{}", num(s.0), num(s.1)));
            Ok(done(manifest, body, &io.output))
        }
        Command::BoundaryHarmonic { io, imax, jmax, tol } => {
            let geom = CurveGeometry::new(&load(&io.model)?)?;
            let seq = BoundarySequence::build(&geom, *tol, 2)?;
            let mut body = String::from("i");
            for j in 0..=*jmax {
                let _ = write!(body, ",j={j}");
            }
            body.push('\n');
            for i in 0..=*imax {
                let _ = write!(body, "{i}");
                for j in 0..=*jmax {
                    let _ = write!(body, ",{}", num(seq.eval(i, j)));
                }
                body.push('\n');
            }
            let manifest = RunManifest::new("boundary-harmonic", &io.model)
                .param("imax", imax)
                .param("jmax", jmax)
                .param("tol", num(*tol));
            Ok(done(manifest, body, &io.output))
        }
        Command::Sequence { io, s, from, to } => {
            let params = UniformizationParams::compute(&load(&io.model)?)?;
            let s = match s {
                Some(s) => *s,
                None => params.escape_parameter()?,
            };
            let mut body = String::from("n,alpha_n,beta_n,inv_alpha_n,inv_beta_n\n");
            for n in *from..=*to {
                let (alpha, beta) = params.sequence_at(s, n)?;
                let _ = writeln!(
                    body,
                    "{n},{},{},{},{}",
                    num(alpha),
                    num(beta),
                    num(1.0 / alpha),
                    num(1.0 / beta)
                );
            }
            let manifest = RunManifest::new("sequence", &io.model)
                .param("s", num(s))
                .param("rho", num(params.rho))
                .param("from", from)
                .param("to", to);
            Ok(done(manifest, body, &io.output))
        }
        Command::Simulate {
            io,
            quantity,
            i,
            j,
            target,
            twist,
            horizon,
            mc,
        } => {
            let dist = load(&io.model)?;
            let x = (*i, *j);
            let need_target = || {
                target.ok_or_else(|| CliError {
                    code: EXIT_USAGE,
                    message: "--target is required for green and martin".into(),
                })
            };
            let mut manifest = RunManifest::new("simulate", &io.model)
                .seed(mc.seed)
                .param("quantity", format!("{quantity:?}").to_lowercase())
                .param("start", format!("{i},{j}"))
                .param("paths", mc.paths);
            let (name, est) = match quantity {
                Quantity::Escape => {
                    let cfg = SimConfig::new(mc.seed, mc.paths, horizon.unwrap_or(10_000))?;
                    ("escape", estimate_escape(&dist, x, &cfg)?)
                }
                Quantity::Halfplane => {
                    let cfg = SimConfig::new(mc.seed, mc.paths, horizon.unwrap_or(10_000))?;
                    ("halfplane_survival", estimate_halfplane_survival(&dist, *j, &cfg)?)
                }
                Quantity::Green | Quantity::Martin => {
                    let y = need_target()?;
                    manifest = manifest.param("target", format!("{},{}", y.0, y.1));
                    let h = horizon.unwrap_or_else(|| default_green_horizon(x, y));
                    let mut cfg = SimConfig::new(mc.seed, mc.paths, h)?;
                    if let Some(u) = twist {
                        let geom = CurveGeometry::new(&dist)?;
                        cfg = cfg.with_twist(geom.cramer_transform(*u)?);
                        manifest = manifest.param("twist", format!("{},{}", num(u.0), num(u.1)));
                    }
                    if *quantity == Quantity::Green {
                        ("green", estimate_green(&dist, x, y, &cfg)?)
                    } else {
                        ("martin", martin_kernel_estimate(&dist, x, y, &cfg)?)
                    }
                }
            };
            manifest = manifest.param("horizon", est.horizon);
            let body = format!("{ESTIMATE_HEADER}{}", estimate_row(name, &est));
            Ok(done(manifest, body, &io.output))
        }
        Command::GreenScan {
            io,
            i,
            j,
            direction,
            radii,
            horizon,
            mc,
        } => {
            let dist = load(&io.model)?;
            let r_max = radii.iter().cloned().fold(0.0, f64::max);
            let h = horizon.unwrap_or((10.0 * 2.0 * r_max).ceil() as usize + 10);
            let cfg = SimConfig::new(mc.seed, mc.paths, h)?;
            let scan = green_direction_scan(&dist, (*i, *j), *direction, radii, &cfg)?;
            let mut body = String::from("radius,y_i,y_j,norm,scaled_green,std_error,n_paths,horizon,seed\n");
            for p in &scan {
                let _ = writeln!(
                    body,
                    "{},{},{},{},{},{},{},{},{}",
                    num(p.radius),
                    p.y.0,
                    p.y.1,
                    num(p.norm),
                    num(p.scaled),
                    num(p.std_error),
                    mc.paths,
                    h,
                    mc.seed
                );
            }
            let manifest = RunManifest::new("green-scan", &io.model)
                .seed(mc.seed)
                .param("start", format!("{i},{j}"))
                .param("direction", format!("{},{}", num(direction.0), num(direction.1)))
                .param("paths", mc.paths)
                .param("horizon", h);
            Ok(done(manifest, body, &io.output))
        }
        Command::Compare {
            io,
            imin,
            imax,
            jmin,
            jmax,
            horizon,
            tol,
            mc,
        } => {
            let geom = CurveGeometry::new(&load(&io.model)?)?;
            let seq = escape_sequence(&geom, *tol, 2)?;
            let cfg = SimConfig::new(mc.seed, mc.paths, *horizon)?;
            let mut body = String::from("i,j,series,tail_bound,mc_mean,mc_std_error,z\n");
            for i in *imin..=*imax {
                for j in *jmin..=*jmax {
                    let h = seq.harmonic_eval(i, j)?;
                    let (mean, se) = if i == 0 || j == 0 {
                        (0.0, 0.0)
                    } else {
                        let e = estimate_escape(geom.dist(), (i64::from(i), i64::from(j)), &cfg)?;
                        (e.mean, e.std_error)
                    };
                    let z = if se > 0.0 { (mean - h.value) / se } else { 0.0 };
                    let _ = writeln!(
                        body,
                        "{i},{j},{},{},{},{},{}",
                        num(h.value),
                        num(h.tail_bound),
                        num(mean),
                        num(se),
                        num(z)
                    );
                }
            }
            let manifest = RunManifest::new("compare", &io.model)
                .seed(mc.seed)
                .param("grid", format!("{imin}..={imax}x{jmin}..={jmax}"))
                .param("paths", mc.paths)
                .param("horizon", horizon)
                .param("tol", num(*tol));
            Ok(done(manifest, body, &io.output))
        }
    }
}

/// Runs the command line and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            match &outcome.output {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, &outcome.text) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return EXIT_USAGE;
                    }
                }
                None => print!("{}", outcome.text),
            }
            outcome.code
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
