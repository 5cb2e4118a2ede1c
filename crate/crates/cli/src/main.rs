use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use matround_core::baselines;
use matround_core::io::driver::{run_driver, structure, Driver};
use matround_core::io::instance::{parse_instance, InstanceFile};
use matround_core::io::report::{emit_report, ReportFormat, RoundingReport};
use matround_core::matroid::Separation;
use matround_core::schedules::{ScheduleError, ScheduleParams};
use matround_core::walk::{self, Structure, WalkConfig, WalkError};

const EXIT_PARSE: u8 = 2;
const EXIT_PRECONDITION: u8 = 3;
const EXIT_CONVERGENCE: u8 = 4;
const EXIT_AUDIT: u8 = 1;

#[derive(Parser)]
#[command(name = "matround", version, about = "Random-walk rounding of fractional points")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// Base seed
    #[arg(long, global = true, env = "MATROUND_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = PresetArg::Practical)]
    preset: PresetArg,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    k0: Option<f64>,
    #[arg(long, global = true)]
    restarts: Option<u32>,
    /// Exponent c of the ‖a‖/f^c slack term
    #[arg(long, global = true)]
    slack_exp: Option<f64>,
    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Paper,
    Practical,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Full rounding with the four-part schedule
    Round {
        instance: PathBuf,
        /// Run this many consecutive seeds in parallel
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
    /// One partial rounding with the constraint file's own multipliers
    RoundMatroid { instance: PathBuf },
    /// Minimum-cost degree-bounded base
    Degmat { instance: PathBuf },
    /// Base within several budgets
    Multicrit { instance: PathBuf },
    /// Single-path routing with congestion
    Rsp { instance: PathBuf },
    /// Multi-path routing with laminar requirements
    LaminarRsp { instance: PathBuf },
    /// Reference rounders
    Baseline {
        #[arg(value_enum)]
        kind: BaselineKind,
        instance: PathBuf,
    },
    /// Runs one partial rounding and audits its invariants
    Verify { instance: PathBuf },
    /// Violation-versus-target sweep on random systems (csv)
    Bench {
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 256)]
        m: usize,
        #[arg(long, value_delimiter = ',', default_value = "16,64,256,1024")]
        b: Vec<f64>,
        #[arg(long, default_value_t = 0.75)]
        density: f64,
        #[arg(long, default_value_t = 1)]
        trials: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineKind {
    Random,
    Iterated,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

fn walk_code(e: &WalkError) -> u8 {
    match e {
        WalkError::BadConfig(_) | WalkError::DimensionMismatch { .. } => EXIT_PARSE,
        WalkError::InvariantBreach(_) => EXIT_CONVERGENCE,
        _ => EXIT_PRECONDITION,
    }
}

impl From<ScheduleError> for Failure {
    fn from(e: ScheduleError) -> Self {
        let code = match &e {
            ScheduleError::Walk(w) => walk_code(w),
            ScheduleError::BadParams(_) | ScheduleError::Invalid(_) => EXIT_PARSE,
            ScheduleError::NoProgress { .. } | ScheduleError::NoCompletion(_) => EXIT_CONVERGENCE,
            _ => EXIT_PRECONDITION,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<WalkError> for Failure {
    fn from(e: WalkError) -> Self {
        Failure::new(walk_code(&e), e.to_string())
    }
}

fn config(g: &Global, n: usize) -> Result<WalkConfig, Failure> {
    let mut cfg = match g.preset {
        PresetArg::Paper => WalkConfig::paper(n),
        PresetArg::Practical => WalkConfig::practical(),
    };
    if let Some(a) = g.alpha {
        cfg.alpha = a;
    }
    if let Some(v) = g.gamma {
        cfg.gamma = v;
    }
    if g.alpha.is_some() || g.gamma.is_some() {
        cfg.steps = (10.0 * cfg.alpha * cfg.alpha / (cfg.gamma * cfg.gamma)).round() as u64;
    }
    if let Some(k) = g.k0 {
        cfg.k0 = k;
    }
    if let Some(r) = g.restarts {
        cfg.restarts = r;
    }
    if let Some(c) = g.slack_exp {
        cfg.slack_exp = c;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load(path: &PathBuf) -> Result<InstanceFile, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    parse_instance(&bytes).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn run(cli: &Cli) -> Result<String, Failure> {
    let g = &cli.global;
    let format = match g.format {
        FormatArg::Table => ReportFormat::Table,
        FormatArg::Csv => ReportFormat::Csv,
    };
    let render = |mut r: RoundingReport, start: Instant| {
        r.meta.wall_time_ms = Some(start.elapsed().as_secs_f64() * 1e3);
        emit_report(&r, format)
    };
    let start = Instant::now();
    let single = |driver: Driver, path: &PathBuf| -> Result<String, Failure> {
        let inst = load(path)?;
        let cfg = config(g, inst.n)?;
        Ok(render(run_driver(driver, &inst, &cfg, g.seed)?, start))
    };
    match &cli.command {
        Command::Round { instance, seeds } => {
            let inst = load(instance)?;
            let cfg = config(g, inst.n)?;
            let mut outs: Vec<(u64, Result<RoundingReport, ScheduleError>)> = (0..(*seeds).max(1))
                .into_par_iter()
                .map(|k| {
                    let seed = g.seed.wrapping_add(k);
                    (seed, run_driver(Driver::Round, &inst, &cfg, seed))
                })
                .collect();
            outs.sort_by_key(|(s, _)| *s);
            let mut text = String::new();
            for (_, r) in outs {
                text.push_str(&render(r?, start));
            }
            Ok(text)
        }
        Command::RoundMatroid { instance } => single(Driver::RoundMatroid, instance),
        Command::Degmat { instance } => single(Driver::Degmat, instance),
        Command::Multicrit { instance } => single(Driver::Multicrit, instance),
        Command::Rsp { instance } => single(Driver::Rsp, instance),
        Command::LaminarRsp { instance } => single(Driver::LaminarRsp, instance),
        Command::Baseline { kind, instance } => match kind {
            BaselineKind::Random => single(Driver::BaselineRandom, instance),
            BaselineKind::Iterated => single(Driver::BaselineIterated, instance),
        },
        Command::Verify { instance } => {
            let inst = load(instance)?;
            let cfg = config(g, inst.n)?;
            verify(&inst, &cfg, g.seed)
        }
        Command::Bench { n, m, b, density, trials } => {
            let cfg = config(g, *n)?;
            let p = ScheduleParams::new(cfg.k0);
            let seeds: Vec<u64> = (0..*trials).map(|k| g.seed.wrapping_add(k)).collect();
            let mut points: Vec<(usize, Result<baselines::SweepPoint, ScheduleError>)> = b
                .par_iter()
                .enumerate()
                .map(|(i, &bv)| (i, baselines::sweep_point(*n, *m, bv, *density, &seeds, &cfg, &p)))
                .collect();
            points.sort_by_key(|(i, _)| *i);
            let mut text = String::from("b,weight,engine,random,envelope,max_ratio\n");
            for (_, pt) in points {
                let pt = pt?;
                text.push_str(&format!(
                    "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                    pt.b, pt.weight, pt.engine, pt.random, pt.envelope, pt.max_ratio
                ));
            }
            Ok(text)
        }
    }
}

/// Audits one partial rounding of the instance: side bands, class sums,
/// truncation count and structure feasibility.
fn verify(inst: &InstanceFile, cfg: &WalkConfig, seed: u64) -> Result<String, Failure> {
    let side = inst.side_constraints();
    let st = structure(inst);
    let q = walk::Polytope::build(&inst.y, &side, st.clone(), cfg)?;
    let out = walk::partial_round(&inst.y, &side, st.clone(), cfg, seed)?;
    let mut checks: Vec<(String, bool)> = Vec::new();
    let f = q.classes.fractional_count();
    let band_ok = q.bands.iter().all(|b| match b.radius {
        Some(r) => (matround_core::numeric::dot(&b.a, &out.x) - b.center).abs() <= r + 1e-6,
        None => true,
    });
    checks.push(("side constraints within their bands".into(), band_ok));
    let drift = q
        .class_sums
        .iter()
        .map(|(_, members, sum)| (members.iter().map(|&i| out.x[i]).sum::<f64>() - sum).abs())
        .fold(0.0, f64::max);
    checks.push((format!("class sums preserved (max drift {drift:.3e})"), drift <= 1e-8));
    checks.push((
        format!("truncations {} <= fractional {}", out.report.truncations, f),
        out.report.truncations <= f,
    ));
    checks.push(("every audit passed".into(), out.attempts.iter().flat_map(|a| &a.audits).all(|a| a.separation_ok)));
    let box_ok = out.x.iter().all(|v| (-1e-9..=1.0 + 1e-9).contains(v));
    checks.push(("point inside the unit box".into(), box_ok));
    match &st {
        Structure::Matroid(m) => {
            let inside = matches!(m.separate(&out.x, &cfg.tol), Ok(Separation::Inside));
            checks.push(("point inside the matroid polytope".into(), inside));
        }
        Structure::Laminar(l) => {
            checks.push(("laminar requirements hold".into(), l.is_satisfied(&out.x, 1e-8)));
        }
        Structure::Free => {}
    }
    let mut text = String::new();
    let mut all = true;
    for (name, ok) in &checks {
        all &= ok;
        text.push_str(&format!("{} {name}\n", if *ok { "PASS" } else { "FAIL" }));
    }
    if all {
        Ok(text)
    } else {
        print!("{text}");
        Err(Failure::new(EXIT_AUDIT, "invariant audit failed"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            let written = match &cli.global.out {
                Some(path) => fs::write(path, text.as_bytes()),
                None => std::io::stdout().write_all(text.as_bytes()),
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_AUDIT);
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
