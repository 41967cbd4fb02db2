//! `pade-lab`: command-line driver for the padelab experiments.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 when a checked
//! bound or residual is violated.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use padelab::analysis::{condition_report, system_norms};
use padelab::bounds::{theta_max, SolverParams};
use padelab::circuit::{l_encoding_stages, sample_a_encoding};
use padelab::experiments::{self, reference_terminal};
use padelab::pade::{pade_coefficients, to_f64};
use padelab::solver::{solve_block_forward, solve_with};
use padelab::suites::run_suite;
use padelab::system::{build_by_name, BlockSystem};
use padelab::{OdeProblem, Result};

const OUT_ENV: &str = "PADE_LAB_OUT";

#[derive(Parser)]
#[command(name = "pade-lab", version, about = "Padé and Taylor ODE encodings: tables, solves, bounds, circuits, sweeps")]
#[command(args_override_self = true)]
struct Cli {
    /// Directory for CSV/JSON artifacts (the PADE_LAB_OUT variable takes precedence)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random draw
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// key=value file presetting flags of the chosen subcommand
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// Problem JSON file
    #[arg(long, conflicts_with = "tridiag")]
    problem: Option<PathBuf>,
    /// Use tridiag(1,-2,1) of this size with b = x0 = 1
    #[arg(long)]
    tridiag: Option<usize>,
    /// Horizon for --tridiag
    #[arg(long, default_value_t = 30.0)]
    horizon: f64,
}

impl ProblemArgs {
    fn load(&self) -> Result<OdeProblem> {
        match (&self.problem, self.tridiag) {
            (Some(p), _) => OdeProblem::load(p),
            (None, Some(n)) => OdeProblem::tridiagonal(n, self.horizon),
            (None, None) => Err(padelab::Error::Input("give --problem FILE or --tridiag N".into())),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact diagonal Padé coefficients as fraction and decimal
    Coeffs {
        #[arg(long)]
        k: usize,
    },
    /// Largest ‖Ah‖ meeting the remainder target, per order
    ThetaTable {
        #[arg(long, default_value_t = 1e-8)]
        delta: f64,
        #[arg(long, default_value_t = 5)]
        kmin: usize,
        #[arg(long, default_value_t = 18)]
        kmax: usize,
    },
    /// Assemble a system and export it in coordinate format
    Build {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value = "pade")]
        scheme: String,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        p: usize,
    },
    /// Solve one configuration
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value = "pade")]
        scheme: String,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long, default_value = "block-forward")]
        solver: String,
    },
    /// Norms, κ and P_succ of an exported system; bounds too when the problem is given
    Analyze {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        problem: Option<PathBuf>,
    },
    /// Seeded bound-check suite
    VerifyBounds {
        #[arg(long)]
        suite: String,
        /// Number of samples
        #[arg(long, default_value_t = 50)]
        seeds: usize,
    },
    /// Build and check the block-encoding circuit of L
    CircuitVerify {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// Order plus one
        #[arg(long)]
        k1: usize,
        #[arg(long, default_value_t = 1.0)]
        h: f64,
        /// Random Hermitian A from this seed instead of A = 0
        #[arg(long)]
        random_a: Option<u64>,
    },
    /// Every scheme at every m in [m-min, m-max]
    SweepM {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 9)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long, default_value_t = 1e-10)]
        eps: f64,
        #[arg(long, default_value_t = 1)]
        m_min: usize,
        #[arg(long, default_value_t = 120)]
        m_max: usize,
        /// Also write every swept system under <out>/systems
        #[arg(long)]
        emit_systems: bool,
    },
    /// Smallest order per scheme at m = p = 1
    SweepK {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Unit-norm stable matrix of this size from --seed, T = 1, b = x0 = 1
        #[arg(long, conflicts_with_all = ["problem", "tridiag"])]
        stable: Option<usize>,
        #[arg(long, default_value_t = 1e-10)]
        eps: f64,
    },
    /// Random stable-matrix suites: m* over horizons, or k* at unit norm
    RandomSuite {
        #[arg(long, default_value = "m-star", value_parser = ["m-star", "k-star"])]
        experiment: String,
        /// Number of seeds, counted up from --seed
        #[arg(long, default_value_t = 100)]
        seeds: u64,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 10.0, 25.0, 50.0])]
        horizons: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 9)]
        k: usize,
        #[arg(long, default_value_t = 1e-10)]
        eps: f64,
    },
}

const SUBCOMMANDS: [&str; 10] = [
    "coeffs",
    "theta-table",
    "build",
    "solve",
    "analyze",
    "verify-bounds",
    "circuit-verify",
    "sweep-m",
    "sweep-k",
    "random-suite",
];

/// Splices `--key=value` flags from a config file right after the
/// subcommand so that flags given on the command line win.
fn with_config(argv: Vec<String>) -> std::result::Result<Vec<String>, String> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = fs::read_to_string(&path).map_err(|e| format!("config {path}: {e}"))?;
    let mut extra = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("config {path}:{}: expected key=value", ln + 1))?;
        let (k, v) = (k.trim().trim_start_matches("--"), v.trim());
        match v {
            "true" => extra.push(format!("--{k}")),
            "false" => {}
            _ => extra.push(format!("--{k}={v}")),
        }
    }
    let Some(at) = argv.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else { return Ok(argv) };
    let mut out = argv[..=at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[at + 1..]);
    Ok(out)
}

struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    fn new(flag: Option<PathBuf>) -> Result<Self> {
        let dir = std::env::var_os(OUT_ENV).map(PathBuf::from).or(flag);
        if let Some(d) = &dir {
            fs::create_dir_all(d)?;
        }
        Ok(Self { dir })
    }

    /// Writes `name` under the output directory, or prints when there is none.
    fn emit(&self, name: &str, body: &str) -> Result<()> {
        match &self.dir {
            Some(d) => {
                let path = d.join(name);
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::write(&path, body)?;
                println!("wrote {}", path.display());
            }
            None => print!("{body}"),
        }
        Ok(())
    }
}

fn json_text(v: &serde_json::Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn system_summary(sys: &BlockSystem) -> Result<serde_json::Value> {
    let (norm, inv) = system_norms(sys)?;
    let b = solve_block_forward(sys)?;
    let l = &sys.layout;
    Ok(json!({
        "scheme": sys.scheme, "dim": sys.dim(), "n": l.n, "m": l.m, "k": l.k, "p": l.p, "h": l.h,
        "norm_l": norm, "norm_l_inv": inv, "kappa": norm * inv,
        "p_succ": b.p_succ, "residual": b.residual,
    }))
}

/// 0 when everything held, 2 on a violated bound.
fn run(cli: Cli) -> Result<u8> {
    let sink = Sink::new(cli.out)?;
    let seed = cli.seed;
    match cli.cmd {
        Cmd::Coeffs { k } => {
            let pc = pade_coefficients(k, k)?;
            let mut s = String::from("j,n_j,n_j_decimal,d_j,d_j_decimal\n");
            for j in 0..=k {
                let (n, d) = (&pc.num_coeffs[j], &pc.den_coeffs[j]);
                s += &format!("{j},{n},{:.17e},{d},{:.17e}\n", to_f64(n), to_f64(d));
            }
            sink.emit("coeffs.csv", &s)?;
        }
        Cmd::ThetaTable { delta, kmin, kmax } => {
            if kmin == 0 || kmin > kmax {
                return Err(padelab::Error::Input(format!("need 1 <= kmin <= kmax, got {kmin}..{kmax}")));
            }
            let mut s = String::from("k,theta_k\n");
            for k in kmin..=kmax {
                s += &format!("{k},{:.6}\n", theta_max(k, delta)?);
            }
            sink.emit("theta_table.csv", &s)?;
        }
        Cmd::Build { problem, scheme, m, k, p } => {
            let pr = problem.load()?;
            let sys = build_by_name(&pr, &SolverParams::new(&scheme, m, k, p, pr.horizon)?)?;
            sink.emit("system.txt", &sys.export())?;
        }
        Cmd::Solve { problem, scheme, m, k, p, solver } => {
            let pr = problem.load()?;
            let sys = build_by_name(&pr, &SolverParams::new(&scheme, m, k, p, pr.horizon)?)?;
            let b = solve_with(&solver, &sys)?;
            let x_t = reference_terminal(&pr)?;
            let dist = (&b.terminal - &x_t).norm();
            let v = json!({
                "terminal": b.terminal.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
                "p_succ": b.p_succ,
                "residual": b.residual,
                "distance_to_reference": dist,
                "rel_error": dist / x_t.norm(),
            });
            sink.emit("solve.json", &json_text(&v)?)?;
        }
        Cmd::Analyze { system, problem } => {
            let sys = BlockSystem::import(&fs::read_to_string(&system)?)?;
            let mut v = system_summary(&sys)?;
            let mut ok = true;
            if let Some(p) = problem {
                let rep = condition_report(&sys, &OdeProblem::load(&p)?)?;
                ok = rep.satisfied.values().all(|&b| b);
                v["bounds"] = serde_json::to_value(&rep)?;
            }
            sink.emit("analyze.json", &json_text(&v)?)?;
            return Ok(if ok { 0 } else { 2 });
        }
        Cmd::VerifyBounds { suite, seeds } => {
            let rep = run_suite(&suite, seeds, seed)?;
            sink.emit(&format!("bounds_{suite}.csv"), &rep.to_csv())?;
            let bad = rep.violations();
            eprintln!("{suite}: {} rows, {bad} violations, {} rejected draws", rep.rows.len(), rep.rejected);
            return Ok(if bad == 0 { 0 } else { 2 });
        }
        Cmd::CircuitVerify { n, m, k1, h, random_a } => {
            if k1 < 2 {
                return Err(padelab::Error::Input("--k1 is the order plus one and must be at least 2".into()));
            }
            let a = sample_a_encoding(n, random_a)?;
            let (_, rep) = l_encoding_stages(&a, h, m, k1 - 1)?;
            let mut s = String::from("stage,residual,unitarity,alpha,ancillas,qubits,passed\n");
            for st in &rep.stages {
                s += &format!(
                    "{},{:.3e},{:.3e},{},{},{},{}\n",
                    st.name, st.residual, st.unitarity, st.alpha, st.ancillas, st.qubits, st.passed
                );
            }
            sink.emit("circuit.csv", &s)?;
            println!("(alpha, ancillas) = ({}, {})", rep.alpha, rep.ancillas);
            return Ok(if rep.passed { 0 } else { 2 });
        }
        Cmd::SweepM { problem, k, p, eps, m_min, m_max, emit_systems } => {
            if m_min == 0 || m_min > m_max {
                return Err(padelab::Error::Input(format!("need 1 <= m-min <= m-max, got {m_min}..{m_max}")));
            }
            let pr = problem.load()?;
            let ms: Vec<usize> = (m_min..=m_max).collect();
            let mut rep = experiments::sweep_m_with(&pr, k, p, eps, &ms)?;
            rep.metadata.seeds = vec![seed];
            sink.emit("sweep_m.csv", &rep.to_csv())?;
            sink.emit("sweep_m.json", &(rep.to_json()? + "\n"))?;
            if emit_systems {
                if sink.dir.is_none() {
                    return Err(padelab::Error::Input("--emit-systems needs --out".into()));
                }
                for r in &rep.rows {
                    let sys = build_by_name(&pr, &SolverParams::new(&r.scheme, r.m, r.k, r.p, pr.horizon)?)?;
                    sink.emit(&format!("systems/{}_m{}.txt", r.scheme, r.m), &sys.export())?;
                }
            }
        }
        Cmd::SweepK { problem, stable, eps } => {
            let pr = match stable {
                Some(n) => {
                    let a = padelab::random::random_stable_matrix(n, seed, true);
                    let ones = padelab::CVec::from_element(n, padelab::linalg::c(1.0));
                    OdeProblem::new(a, ones.clone(), ones, 1.0)?
                }
                None => problem.load()?,
            };
            let mut rep = experiments::sweep_k(&pr, eps)?;
            rep.metadata.seeds = vec![seed];
            sink.emit("sweep_k.csv", &rep.to_csv())?;
            sink.emit("sweep_k.json", &(rep.to_json()? + "\n"))?;
        }
        Cmd::RandomSuite { experiment, seeds, horizons, n, k, eps } => {
            let list: Vec<u64> = (seed..seed + seeds).collect();
            let rep = if experiment == "k-star" {
                experiments::k_star_suite(&list, n, eps)?
            } else {
                experiments::random_suite(&list, &horizons, k, eps, n)?
            };
            let stem = experiment.replace('-', "_");
            sink.emit(&format!("{stem}.csv"), &rep.to_csv())?;
            sink.emit(&format!("{stem}.json"), &(rep.to_json()? + "\n"))?;
            for a in &rep.aggregates {
                eprintln!("{} {}: mean {:.4} sd {:.4} (n={})", a.group, a.quantity, a.mean, a.stddev, a.count);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let argv = match with_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
