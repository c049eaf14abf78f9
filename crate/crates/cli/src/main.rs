//! `steering`: reference dumps, bound verification and SDP sweeps.

use std::f64::consts::SQRT_2;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use steering_selftest::bounds::{
    lemma1_sweep, lemma2_sweep, lemma3_sweep, lemma4_sweep, sec22_lower, sec22_numeric_fidelity, sec23_lower, thm1_sweep,
};
use steering_selftest::experiments::{
    appd_steering_value, assemblage_of, chsh_steering_value, correlations, epr_reference, example_conjugation, example_idle_qubit,
    ghz_mermin_value, ghz_reference, npair_reference, schmidt_state, Experiment, MeasurementSet,
};
use steering_selftest::isometry::{
    appendix_e_fidelity, appendix_e_numeric, ghz_fidelity, optimality_construction_distance, singlet_fidelity,
};
use steering_selftest::linalg::{qubit, trace_distance, Operator};
use steering_selftest::sdp::sweep::{write_csv, write_json};
use steering_selftest::sdp::{default_grid, grid, solver_from_env, sweep, Scenario, SweepRow, DEFAULT_TOL};

const EXIT_VERIFY: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "steering", version, about = "Robust self-testing through EPR-steering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the functional values of a reference experiment and dump it as JSON.
    Reference {
        name: ReferenceName,
        /// Number of pairs for `npair`.
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// JSON output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the robustness bounds on seeded random instances.
    Verify {
        suite: Suite,
        #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Solve the fidelity SDP over a grid of functional deficits.
    Sweep {
        scenario: ScenarioArg,
        /// Largest η; the scenario's default grid is used when neither this nor --steps is given.
        #[arg(long)]
        eta_max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Worker threads; all cores when omitted.
        #[arg(long)]
        jobs: Option<usize>,
        /// Zero the timing column so identical runs give identical bytes.
        #[arg(long)]
        reproducible: bool,
    },
    /// Write one SDP in SDPA sparse format.
    Dump {
        scenario: ScenarioArg,
        #[arg(long, default_value_t = 0.0)]
        eta: f64,
        /// Restrict Γ to real symmetric matrices.
        #[arg(long)]
        real: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReferenceName {
    Epr,
    Ghz1,
    Ghz2,
    Npair,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Lemmas,
    Examples,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Epr,
    Ghz1,
    Ghz2,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Epr => Scenario::Epr,
            ScenarioArg::Ghz1 => Scenario::Ghz1,
            ScenarioArg::Ghz2 => Scenario::Ghz2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

impl From<steering_selftest::Error> for Failure {
    fn from(e: steering_selftest::Error) -> Self {
        match e {
            steering_selftest::Error::Io(io) => io.into(),
            other => fail(EXIT_VERIFY, other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        // a closed downstream pipe is not an error
        let code = if e.kind() == io::ErrorKind::BrokenPipe { 0 } else { EXIT_USAGE };
        fail(code, e.to_string())
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", p.display())))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn matrix_json(m: &Operator) -> serde_json::Value {
    let n = m.side();
    json!((0..n).map(|i| (0..n).map(|j| [m.get(i, j).re, m.get(i, j).im]).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn print_matrix(name: &str, m: &Operator) {
    println!("{name} =");
    for i in 0..m.side() {
        let row: Vec<String> = (0..m.side()).map(|j| format!("{:+.6}", m.get(i, j).re)).collect();
        println!("  [{}]", row.join(" "));
    }
}

fn reference(name: ReferenceName, n: usize, out: &Option<PathBuf>) -> Result<(), Failure> {
    let (e, values): (Experiment, Vec<(&str, f64)>) = match name {
        ReferenceName::Epr => {
            let e = epr_reference();
            let asm = assemblage_of(&e)?;
            let values = vec![
                ("trS", chsh_steering_value(&asm)?),
                ("appendix_d", appd_steering_value(&e)?),
                ("singlet_fidelity", singlet_fidelity(&e)?),
            ];
            (e, values)
        }
        ReferenceName::Ghz1 | ReferenceName::Ghz2 => {
            let setting = if matches!(name, ReferenceName::Ghz1) { 1 } else { 2 };
            let e = ghz_reference(setting)?;
            let asm = assemblage_of(&e)?;
            let key = if setting == 1 { "trB1" } else { "trB2" };
            let values = vec![(key, ghz_mermin_value(&asm, setting)?), ("ghz_fidelity", ghz_fidelity(&e, setting)?)];
            (e, values)
        }
        ReferenceName::Npair => (npair_reference(n).map_err(|e| fail(EXIT_USAGE, e.to_string()))?, Vec::new()),
    };
    for (k, v) in &values {
        println!("{k} = {v:.6}");
    }
    let asm = assemblage_of(&e)?;
    if matches!(name, ReferenceName::Npair) {
        print_matrix("reduced state", asm.reduced());
    }
    let doc = json!({
        "experiment": e.to_doc(),
        "assemblage": asm.to_doc(),
        "reduced_state": matrix_json(asm.reduced()),
        "functionals": values.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
    });
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Check {
    name: String,
    pass: bool,
    value: f64,
    expected: f64,
}

fn check(name: &str, value: f64, expected: f64, tol: f64) -> Check {
    Check { name: name.to_string(), pass: (value - expected).abs() <= tol, value, expected }
}

fn example_checks() -> Result<Vec<Check>, Failure> {
    let mut out = Vec::new();
    for eps in [0.01, 0.05, 0.1] {
        let f = sec22_numeric_fidelity(eps, 64, 3)?;
        out.push(check(&format!("three_dim_fidelity eps={eps}"), f, (1.0f64 - eps).sqrt(), 1e-6));
        out.push(check(&format!("three_dim_distance eps={eps}"), (1.0 - f * f).sqrt(), sec22_lower(1.5 * eps)?, 1e-5));
        out.push(check(&format!("optimality_distance eps={eps}"), optimality_construction_distance(eps)?, sec23_lower(eps)?, 1e-9));
    }
    for lambda in [0.5, 0.6, 0.9] {
        let numeric = appendix_e_numeric(&schmidt_state(lambda)?, 64, 3)?;
        out.push(check(&format!("schmidt_fidelity lambda={lambda}"), numeric, appendix_e_fidelity(lambda)?, 1e-4));
    }
    let idle = assemblage_of(&example_idle_qubit())?;
    let flat = Operator::diag(&[0.25, 0.25]);
    let worst = idle.iter().map(|(_, _, s)| s.max_abs_diff(&flat)).fold(0.0, f64::max);
    out.push(check("idle_qubit_assemblage", worst, 0.0, 1e-12));

    let e = example_conjugation();
    let (a, b) = (assemblage_of(&e)?, assemblage_of(&e.conjugated())?);
    out.push(check("conjugation_trace_distance", trace_distance(a.get(0, 1), b.get(0, 1))?, 0.5, 1e-9));
    let client = MeasurementSet::from_bases(&[vec![qubit::plus_y(), qubit::minus_y()]])?;
    let (ca, cb) = (correlations(&a, &client)?, correlations(&b, &client)?);
    let pa = ca.provider_marginal(&[0], &[1], 0);
    let pb = cb.provider_marginal(&[0], &[1], 0);
    let tv = (0..2).map(|k| (ca.get(&[0], k, &[1], 0) / pa - cb.get(&[0], k, &[1], 0) / pb).abs()).sum::<f64>() / 2.0;
    out.push(check("conjugation_y_distinguisher", tv, 1.0, 1e-9));
    Ok(out)
}

fn verify(suite: Suite, samples: usize, seed: u64) -> Result<(), Failure> {
    let mut ok = true;
    if suite != Suite::Examples {
        for s in [
            lemma1_sweep(samples, seed)?,
            lemma2_sweep(samples, seed)?,
            lemma3_sweep(samples, seed)?,
            lemma4_sweep(samples, seed)?,
            thm1_sweep(samples, seed)?,
        ] {
            ok &= s.pass();
            println!("{}", serde_json::to_string(&json!({"summary": s, "pass": s.pass()})).expect("serializable"));
        }
    }
    if suite != Suite::Lemmas {
        for c in example_checks()? {
            ok &= c.pass;
            println!("{}", serde_json::to_string(&c).expect("serializable"));
        }
    }
    if ok {
        eprintln!("all checks passed");
        Ok(())
    } else {
        Err(fail(EXIT_VERIFY, "bound violation"))
    }
}

fn eta_limit(s: Scenario) -> f64 {
    match s {
        Scenario::Epr => 2.0 * SQRT_2,
        Scenario::Ghz1 | Scenario::Ghz2 => 8.0,
    }
}

fn line_report(rows: &[SweepRow]) {
    let margins: Vec<f64> = rows.iter().map(|r| r.lower_bound - (1.0 - r.eta / SQRT_2)).collect();
    let above = margins.iter().filter(|&&m| m >= -1e-4).count();
    let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
    eprintln!("fitted line 1 − η/√2: {above}/{} rows at or above (min margin {worst:.6})", rows.len());
}

#[allow(clippy::too_many_arguments)]
fn run_sweep(
    scenario: Scenario,
    eta_max: Option<f64>,
    steps: Option<usize>,
    tol: f64,
    out: &Option<PathBuf>,
    format: Format,
    jobs: Option<usize>,
    reproducible: bool,
) -> Result<(), Failure> {
    if !(tol > 0.0) {
        return Err(fail(EXIT_USAGE, format!("--tol must be positive (got {tol})")));
    }
    if jobs == Some(0) {
        return Err(fail(EXIT_USAGE, "--jobs must be at least 1"));
    }
    let etas = match (eta_max, steps) {
        (None, None) => default_grid(scenario),
        (m, s) => {
            let m = m.unwrap_or_else(|| *default_grid(scenario).last().expect("nonempty"));
            if !(0.0..=eta_limit(scenario)).contains(&m) {
                return Err(fail(EXIT_USAGE, format!("--eta-max must lie in [0, {}] for {}", eta_limit(scenario), scenario.name())));
            }
            grid(m, s.unwrap_or(21)).map_err(|e| fail(EXIT_USAGE, e.to_string()))?
        }
    };
    let solver = solver_from_env().map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    let rows = sweep(scenario, &etas, tol, jobs, solver.as_ref()).map_err(|e| fail(EXIT_SOLVER, e.to_string()))?;
    let w = output(out)?;
    match format {
        Format::Csv => write_csv(&rows, w, reproducible)?,
        Format::Json => write_json(&rows, w, reproducible)?,
    }
    if scenario == Scenario::Epr {
        line_report(&rows);
    }
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| matches!(r.status_name().as_str(), "infeasible" | "failed"))
        .map(|r| format!("η={} ({})", r.eta, r.error.clone().unwrap_or_else(|| r.status_name())))
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(fail(EXIT_SOLVER, format!("solver failed on {}", bad.join(", "))))
    }
}

fn dump(scenario: Scenario, eta: f64, real: bool, out: &Option<PathBuf>) -> Result<(), Failure> {
    let mut p = scenario.problem(eta).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    if real {
        p = p.real_restricted();
    }
    let text = p.compile().dump(&p.layout);
    let mut w = output(out)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Reference { name, n, out } => reference(name, n, &out),
        Command::Verify { suite, samples, seed } => verify(suite, samples as usize, seed),
        Command::Sweep { scenario, eta_max, steps, tol, out, format, jobs, reproducible } => {
            run_sweep(scenario.into(), eta_max, steps, tol, &out, format, jobs, reproducible)
        }
        Command::Dump { scenario, eta, real, out } => dump(scenario.into(), eta, real, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) if f.code == 0 => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
