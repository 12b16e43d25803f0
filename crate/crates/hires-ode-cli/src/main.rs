//! Command-line harness: convergence-order tables, trajectory comparisons,
//! divergence counterexamples, and the structural property suite, all as CSV
//! on stdout or a file.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hires_ode::catalog::{
    builtin_rates, hb_lessard_counterexample, pdhg_bilinear_counterexample,
    rates_experiment_names, run_rates, run_trajectory, trajectory_experiment_names,
    CounterexampleReport, DEFAULT_SEED,
};
use hires_ode::corrected::ContractionVerdict;
use hires_ode::metrics::Verdict;
use hires_ode::verify;

#[derive(Parser)]
#[command(name = "hires-ode", version, about = "first-order methods and their resolution ODEs")]
struct Cli {
    /// key=value config file (`#` comments); command-line flags win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Step-size sweep of a builtin experiment; emits the E1/E2/E3 order table
    Rates {
        /// experiment name (table1_pdhg .. table4_nag)
        spec: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Discrete iterates next to their integrated ODE companions
    Trajectory {
        /// experiment name (fig1_pdhg, fig1_cp, fig2_hb_nag, fig3_nag_c)
        spec: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Uncorrected vs corrected scheme on a divergence instance
    Counterexample {
        /// instance name (pdhg_bilinear, hb_lessard)
        which: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the structural property suite; one line per check
    Verify,
}

#[derive(Args, Default, Clone, Debug)]
struct Overrides {
    /// coarsest step of the sweep, or the single step for trajectories
    #[arg(long)]
    s: Option<f64>,
    /// integration horizon
    #[arg(long = "T")]
    t: Option<f64>,
    /// number of discrete steps
    #[arg(long)]
    steps: Option<usize>,
    /// output CSV path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// seed of the random instance
    #[arg(long)]
    seed: Option<u64>,
    /// initial point for hb_lessard
    #[arg(long)]
    x0: Option<f64>,
    /// row count of the bilinear instance
    #[arg(long)]
    m: Option<usize>,
    /// column count of the bilinear instance
    #[arg(long)]
    n: Option<usize>,
}

impl Overrides {
    /// File values fill whatever the flags left unset.
    fn merge_file(&mut self, path: &PathBuf) -> Result<(), String> {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key=value", lineno + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |e| format!("config line {}: bad value for {key}: {e}", lineno + 1);
            match key {
                "s" => fill(&mut self.s, value.parse().map_err(|e| bad(format!("{e}")))?),
                "T" => fill(&mut self.t, value.parse().map_err(|e| bad(format!("{e}")))?),
                "steps" => fill(&mut self.steps, value.parse().map_err(|e| bad(format!("{e}")))?),
                "out" => fill(&mut self.out, PathBuf::from(value)),
                "seed" => fill(&mut self.seed, value.parse().map_err(|e| bad(format!("{e}")))?),
                "x0" => fill(&mut self.x0, value.parse().map_err(|e| bad(format!("{e}")))?),
                "m" => fill(&mut self.m, value.parse().map_err(|e| bad(format!("{e}")))?),
                "n" => fill(&mut self.n, value.parse().map_err(|e| bad(format!("{e}")))?),
                other => return Err(format!("config line {}: unknown key '{other}'", lineno + 1)),
            }
        }
        Ok(())
    }
}

fn fill<T>(slot: &mut Option<T>, value: T) {
    if slot.is_none() {
        *slot = Some(value);
    }
}

const USAGE_ERROR: u8 = 2;
const FAILED_VERDICT: u8 = 1;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(AppError::Usage(msg)) => {
            eprintln!("error: {msg}");
            USAGE_ERROR
        }
        Err(AppError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            FAILED_VERDICT
        }
    };
    ExitCode::from(code)
}

enum AppError {
    Usage(String),
    Runtime(String),
}

fn run(cli: Cli) -> Result<u8, AppError> {
    let merge = |mut o: Overrides| -> Result<Overrides, AppError> {
        if let Some(path) = &cli.config {
            o.merge_file(path).map_err(AppError::Usage)?;
        }
        Ok(o)
    };
    match cli.command {
        Command::Rates { spec, overrides } => cmd_rates(&spec, merge(overrides)?),
        Command::Trajectory { spec, overrides } => cmd_trajectory(&spec, merge(overrides)?),
        Command::Counterexample { which, overrides } => {
            cmd_counterexample(&which, merge(overrides)?)
        }
        Command::Verify => Ok(cmd_verify()),
    }
}

fn emit(out: &Option<PathBuf>, body: &str) -> Result<(), AppError> {
    match out {
        Some(path) => fs::write(path, body)
            .map_err(|e| AppError::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn opt(rate: Option<f64>) -> String {
    rate.map(|r| r.to_string()).unwrap_or_default()
}

fn cmd_rates(spec: &str, o: Overrides) -> Result<u8, AppError> {
    let mut exp = builtin_rates(spec).map_err(|_| {
        AppError::Usage(format!(
            "unknown rates experiment '{spec}' (available: {})",
            rates_experiment_names().join(", ")
        ))
    })?;
    if let Some(s) = o.s {
        let count = exp.s_values.len();
        exp.s_values = (0..count).map(|i| s / 2f64.powi(i as i32)).collect();
    }
    if let Some(t) = o.t {
        exp.horizon = t;
    }
    let table = run_rates(&exp).map_err(|e| AppError::Runtime(format!("{spec}: {e}")))?;
    let mut csv = format!("# experiment: {spec}\n# horizon: {}\n", exp.horizon);
    csv.push_str("s,E1,rate1,E2,rate2,E3,rate3\n");
    for row in &table.rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            row.s,
            row.e1,
            opt(row.rate1),
            row.e2,
            opt(row.rate2),
            row.e3,
            opt(row.rate3)
        )
        .expect("string write");
    }
    emit(&o.out, &csv)?;
    Ok(0)
}

fn cmd_trajectory(spec: &str, o: Overrides) -> Result<u8, AppError> {
    if !trajectory_experiment_names().contains(&spec) {
        return Err(AppError::Usage(format!(
            "unknown trajectory experiment '{spec}' (available: {})",
            trajectory_experiment_names().join(", ")
        )));
    }
    let series = run_trajectory(spec, o.s, o.steps)
        .map_err(|e| AppError::Runtime(format!("{spec}: {e}")))?;
    let dim = series
        .first()
        .and_then(|lt| lt.traj.states.first())
        .map_or(0, |z| z.len());
    let mut csv = format!("# experiment: {spec}\n");
    csv.push_str("series,t");
    for i in 0..dim {
        write!(csv, ",z{i}").expect("string write");
    }
    csv.push('\n');
    if o.steps != Some(0) {
        for lt in &series {
            for (t, z) in lt.traj.times.iter().zip(&lt.traj.states) {
                write!(csv, "{},{t}", lt.label).expect("string write");
                for value in z.iter() {
                    write!(csv, ",{value}").expect("string write");
                }
                csv.push('\n');
            }
        }
    }
    emit(&o.out, &csv)?;
    Ok(0)
}

fn verdict_name(v: &Verdict) -> &'static str {
    match v {
        Verdict::Converged => "converged",
        Verdict::Cycling => "cycling",
        Verdict::Diverging => "diverging",
    }
}

fn envelope_line(e: &Option<ContractionVerdict>) -> String {
    match e {
        None => "not applicable".into(),
        Some(ContractionVerdict::Pass) => "pass".into(),
        Some(ContractionVerdict::Fail { first_violation }) => {
            format!("fail (first violation at k={first_violation})")
        }
    }
}

fn envelope_failed(e: &Option<ContractionVerdict>) -> bool {
    matches!(e, Some(ContractionVerdict::Fail { .. }))
}

fn report_block(csv: &mut String, r: &CounterexampleReport, m: usize, n: usize) {
    writeln!(csv, "# size: {m}x{n}").expect("string write");
    if let Some(seed) = r.seed {
        writeln!(csv, "# seed: {seed}").expect("string write");
    }
    writeln!(
        csv,
        "# {} verdict: {}",
        r.uncorrected.label,
        verdict_name(&r.uncorrected_verdict)
    )
    .expect("string write");
    writeln!(
        csv,
        "# {} verdict: {}",
        r.corrected.label,
        verdict_name(&r.corrected_verdict)
    )
    .expect("string write");
    writeln!(csv, "# envelope: {}", envelope_line(&r.envelope)).expect("string write");
    let (unc, cor) = r.distance_series();
    for (k, (u, c)) in unc.iter().zip(&cor).enumerate() {
        writeln!(csv, "{m},{n},{k},{u},{c}").expect("string write");
    }
}

fn cmd_counterexample(which: &str, o: Overrides) -> Result<u8, AppError> {
    let runtime = |e| AppError::Runtime(format!("{which}: {e}"));
    match which {
        "pdhg_bilinear" => {
            let steps = o.steps.unwrap_or(2000);
            let seed = o.seed.unwrap_or(DEFAULT_SEED);
            let sizes: Vec<(usize, usize)> = match (o.m, o.n) {
                (Some(m), Some(n)) => vec![(m, n)],
                (Some(m), None) => vec![(m, m)],
                (None, Some(n)) => vec![(n, n)],
                (None, None) => vec![(1, 1), (5, 8), (50, 50)],
            };
            let mut csv = format!("# counterexample: {which}\n");
            csv.push_str("m,n,k,uncorrected_distance,corrected_distance\n");
            let mut failed = false;
            for (m, n) in sizes {
                let report = pdhg_bilinear_counterexample(m, n, seed, steps).map_err(runtime)?;
                failed |= envelope_failed(&report.envelope);
                report_block(&mut csv, &report, m, n);
            }
            emit(&o.out, &csv)?;
            Ok(if failed { FAILED_VERDICT } else { 0 })
        }
        "hb_lessard" => {
            let steps = o.steps.unwrap_or(500);
            let x0 = o.x0.unwrap_or(3.25);
            let report = hb_lessard_counterexample(x0, steps).map_err(runtime)?;
            let mut csv = format!("# counterexample: {which}\n# x0: {x0}\n");
            csv.push_str("m,n,k,uncorrected_distance,corrected_distance\n");
            report_block(&mut csv, &report, 1, 1);
            emit(&o.out, &csv)?;
            Ok(if envelope_failed(&report.envelope) {
                FAILED_VERDICT
            } else {
                0
            })
        }
        other => Err(AppError::Usage(format!(
            "unknown counterexample '{other}' (available: pdhg_bilinear, hb_lessard)"
        ))),
    }
}

fn cmd_verify() -> u8 {
    let checks = verify::run_all();
    for c in &checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        println!("{tag} {:<26} {}", c.name, c.detail);
    }
    if verify::all_passed(&checks) {
        println!("verify: all {} checks passed", checks.len());
        0
    } else {
        let failed = checks.iter().filter(|c| !c.pass).count();
        println!("verify: {failed} of {} checks FAILED", checks.len());
        FAILED_VERDICT
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Overrides, String> {
        let dir = std::env::temp_dir().join(format!("hires-ode-cfg-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cfg.txt");
        fs::write(&path, text).unwrap();
        let mut o = Overrides::default();
        o.merge_file(&path).map(|()| o)
    }

    #[test]
    fn config_parses_all_keys_and_comments() {
        let o = parse("# heading\ns = 0.25  # inline\nT=10\nsteps=7\nseed=3\nx0=-1.5\nm=5\nn=8\nout=results.csv\n").unwrap();
        assert_eq!(o.s, Some(0.25));
        assert_eq!(o.t, Some(10.0));
        assert_eq!(o.steps, Some(7));
        assert_eq!(o.seed, Some(3));
        assert_eq!(o.x0, Some(-1.5));
        assert_eq!((o.m, o.n), (Some(5), Some(8)));
        assert_eq!(o.out, Some(PathBuf::from("results.csv")));
    }

    #[test]
    fn flags_beat_file_values() {
        let dir = std::env::temp_dir().join(format!("hires-ode-cfg2-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cfg.txt");
        fs::write(&path, "steps=7\n").unwrap();
        let mut o = Overrides {
            steps: Some(3),
            ..Overrides::default()
        };
        o.merge_file(&path).unwrap();
        assert_eq!(o.steps, Some(3));
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_lines() {
        assert!(parse("bogus=1\n").unwrap_err().contains("unknown key"));
        assert!(parse("just words\n").unwrap_err().contains("key=value"));
        assert!(parse("s=abc\n").unwrap_err().contains("bad value"));
    }

    #[test]
    fn optional_rate_formatting() {
        assert_eq!(opt(None), "");
        assert_eq!(opt(Some(1.5)), "1.5");
    }
}
