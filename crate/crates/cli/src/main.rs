//! `leja`: generate, measure and verify Leja sequences on the unit circle.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 bad input.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use leja::greedy::{
    self, DEFAULT_POSITION_TOLERANCE, DEFAULT_SELF_CONJUGATE_EXCLUSION, DEFAULT_TIE_TOLERANCE,
};
use leja::io::{metrics_to_csv, sequence_from_csv, sequence_to_csv};
use leja::metrics::prefix_metrics;
use leja::pointset::{kronecker, roots_of_unity, van_der_corput};
use leja::verify::{self, Baseline, CheckReport};
use leja::{CirclePointSet, GreedyConfig, InjectionSchedule, KernelKind, Mode, PrefixSelector, Provenance};

use output::RunManifest;

#[derive(Parser)]
#[command(name = "leja", version, about = "Leja sequences on the unit circle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow a seed greedily and write the sequence CSV.
    Generate {
        #[arg(long, default_value = "logsin")]
        kernel: KernelKind,
        #[arg(long, default_value = "plain")]
        mode: Mode,
        /// Comma-separated seed angles in [0, 1).
        #[arg(long, value_delimiter = ',', required = true)]
        seed: Vec<f64>,
        /// Target number of points.
        #[arg(long)]
        n: usize,
        /// Injection schedule file, lines `at_count:angle[,angle...]`.
        #[arg(long)]
        inject: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TIE_TOLERANCE)]
        tie_tolerance: f64,
        #[arg(long, default_value_t = DEFAULT_POSITION_TOLERANCE)]
        position_tolerance: f64,
        #[arg(long, default_value_t = DEFAULT_SELF_CONJUGATE_EXCLUSION)]
        self_conjugate_exclusion: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the first N elements of a reference sequence.
    Reference {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        n: usize,
        /// Rotation number of the Kronecker sequence.
        #[arg(long, default_value_t = std::f64::consts::SQRT_2)]
        alpha: f64,
        /// Output path; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the metrics of insertion-order prefixes.
    Measure {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "all")]
        prefixes: PrefixSelector,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run checks and write one JSON report per line.
    Verify {
        /// Comma-separated check names.
        #[arg(long, value_delimiter = ',', required = true)]
        check: Vec<Check>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// JSON with `theorem1` and `theorem2` ratio maps keyed by N.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Perturbed sequence for the stability check.
        #[arg(long)]
        against: Option<PathBuf>,
        /// Prefix length; defaults to the whole input (50 for fekete).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Vdc,
    Kronecker,
    Roots,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    Lemma1,
    Lemma2,
    Proposition,
    Fekete,
    Wagner,
    Theorem1,
    Theorem2,
    Theorem3,
    Stability,
}

impl Check {
    fn name(self) -> &'static str {
        match self {
            Check::Lemma1 => "lemma1",
            Check::Lemma2 => "lemma2",
            Check::Proposition => "proposition",
            Check::Fekete => "fekete",
            Check::Wagner => "wagner",
            Check::Theorem1 => "theorem1",
            Check::Theorem2 => "theorem2",
            Check::Theorem3 => "theorem3",
            Check::Stability => "stability",
        }
    }
}

/// Bad input or a failed precondition; maps to exit code 2.
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, InputError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {}", e.0);
        return ExitCode::from(2);
    }
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", e.0);
            ExitCode::from(2)
        }
    }
}

/// `LEJA_THREADS` sets the worker count; results do not depend on it.
fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("LEJA_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| InputError(format!("LEJA_THREADS must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(InputError("LEJA_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// `Ok(false)` only when a verification check ran and failed.
fn dispatch(command: Command) -> CliResult<bool> {
    let start = Instant::now();
    match command {
        Command::Generate {
            kernel,
            mode,
            seed,
            n,
            inject,
            tie_tolerance,
            position_tolerance,
            self_conjugate_exclusion,
            out,
        } => {
            let seed_set = CirclePointSet::from_angles(&seed, Provenance::Seed)?;
            let mut config = GreedyConfig::new(kernel, mode, n);
            config.tie_tolerance = tie_tolerance;
            config.position_tolerance = position_tolerance;
            config.self_conjugate_exclusion = self_conjugate_exclusion;
            let schedule = match &inject {
                Some(p) => InjectionSchedule::parse(&read(p)?)
                    .map_err(|e| InputError(format!("{}: {e}", p.display())))?,
                None => InjectionSchedule::default(),
            };
            let run = greedy::run(&seed_set, &config, &schedule)?;
            let csv = sequence_to_csv(&run.final_set)?;
            let mut m = RunManifest::new("generate");
            m.flag("kernel", kernel.name())
                .flag("mode", mode.name())
                .flag("seed", join_angles(&seed))
                .flag("n", n)
                .flag("tie-tolerance", tie_tolerance)
                .flag("position-tolerance", position_tolerance)
                .flag("self-conjugate-exclusion", self_conjugate_exclusion)
                .flag("out", out.display());
            if let Some(p) = &inject {
                m.flag("inject", p.display());
                m.inputs.push(p.display().to_string());
            }
            m.tolerances = [
                ("tie_tolerance".to_string(), tie_tolerance),
                ("position_tolerance".to_string(), position_tolerance),
                ("self_conjugate_exclusion".to_string(), self_conjugate_exclusion),
            ]
            .into();
            m.write_with(&out, csv.as_bytes(), start.elapsed().as_secs_f64())?;
            Ok(true)
        }
        Command::Reference { family, n, alpha, out } => {
            let set = reference(family, n, alpha)?;
            let csv = sequence_to_csv(&set)?;
            match out {
                Some(out) => {
                    let mut m = RunManifest::new("reference");
                    m.flag("family", family.to_possible_value().unwrap().get_name())
                        .flag("n", n)
                        .flag("alpha", alpha)
                        .flag("out", out.display());
                    m.write_with(&out, csv.as_bytes(), start.elapsed().as_secs_f64())?;
                }
                None => print!("{csv}"),
            }
            Ok(true)
        }
        Command::Measure { input, prefixes, out } => {
            let set = read_sequence(&input)?;
            if set.is_empty() {
                return Err(InputError(format!("{}: no points", input.display())));
            }
            let rows = prefix_metrics(&set, prefixes)?;
            let csv = metrics_to_csv(&rows)?;
            let mut m = RunManifest::new("measure");
            m.flag("in", input.display())
                .flag("prefixes", prefixes_name(prefixes))
                .flag("out", out.display());
            m.inputs.push(input.display().to_string());
            m.write_with(&out, csv.as_bytes(), start.elapsed().as_secs_f64())?;
            Ok(true)
        }
        Command::Verify { check, input, baseline, against, n, out } => {
            let set = input.as_deref().map(read_sequence).transpose()?;
            let base: Option<Baseline> = baseline
                .as_deref()
                .map(|p| -> CliResult<Baseline> {
                    serde_json::from_str(&read(p)?)
                        .map_err(|e| InputError(format!("{}: {e}", p.display())))
                })
                .transpose()?;
            let perturbed = against.as_deref().map(read_sequence).transpose()?;
            let mut reports = Vec::with_capacity(check.len());
            for c in &check {
                reports.push(run_check(*c, set.as_ref(), base.as_ref(), perturbed.as_ref(), n)?);
            }
            let text = verify::to_ndjson(&reports)?;
            let mut m = RunManifest::new("verify");
            m.flag("check", check.iter().map(|c| c.name()).collect::<Vec<_>>().join(","))
                .flag("out", out.display());
            for (flag, path) in [("in", &input), ("baseline", &baseline), ("against", &against)] {
                if let Some(p) = path {
                    m.flag(flag, p.display());
                    m.inputs.push(p.display().to_string());
                }
            }
            if let Some(n) = n {
                m.flag("n", n);
            }
            m.write_with(&out, text.as_bytes(), start.elapsed().as_secs_f64())?;
            for r in reports.iter().filter(|r| !r.passed) {
                eprintln!("check {} failed: {}", r.check_name, r.notes);
            }
            Ok(reports.iter().all(|r| r.passed))
        }
    }
}

fn run_check(
    check: Check,
    set: Option<&CirclePointSet>,
    baseline: Option<&Baseline>,
    against: Option<&CirclePointSet>,
    n: Option<usize>,
) -> CliResult<CheckReport> {
    if check == Check::Fekete {
        return Ok(verify::fekete_sweep(n.unwrap_or(verify::FEKETE_MAX_N))?);
    }
    let set = set.ok_or_else(|| InputError(format!("check {} needs --in", check.name())))?;
    let n = n.unwrap_or(set.len());
    if n == 0 || n > set.len() {
        return Err(InputError(format!("--n {n} outside 1..={}", set.len())));
    }
    let prefix = set.prefix(n);
    let report = match check {
        Check::Lemma1 => verify::lemma1_prefix_check(&prefix)?,
        Check::Lemma2 => verify::lemma2_check(&prefix)?,
        Check::Proposition => verify::proposition_check(&prefix)?,
        Check::Wagner => verify::wagner_report(&verify::wagner_samples(&prefix)?)?,
        Check::Theorem1 => verify::theorem1_check(&prefix, &verify::dyadic_lengths(n), baseline)?,
        Check::Theorem2 => verify::theorem2_check(&prefix, &verify::dyadic_lengths(n), baseline)?,
        Check::Theorem3 => verify::theorem3_check(&prefix)?,
        Check::Stability => {
            let perturbed =
                against.ok_or_else(|| InputError("check stability needs --against".into()))?;
            verify::stability_check_sets(set, perturbed, n)?
        }
        Check::Fekete => unreachable!("handled above"),
    };
    Ok(report)
}

fn reference(family: Family, n: usize, alpha: f64) -> CliResult<CirclePointSet> {
    if n == 0 {
        return Err(InputError("--n must be positive".into()));
    }
    Ok(match family {
        Family::Roots => roots_of_unity(n)?,
        Family::Vdc | Family::Kronecker => {
            let angles = (1..=n as i64)
                .map(|i| match family {
                    Family::Vdc => van_der_corput(i),
                    _ => kronecker(i, alpha),
                })
                .collect::<leja::Result<Vec<f64>>>()?;
            CirclePointSet::from_angles(&angles, Provenance::Seed)?
        }
    })
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn read_sequence(path: &Path) -> CliResult<CirclePointSet> {
    sequence_from_csv(&read(path)?).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn join_angles(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn prefixes_name(p: PrefixSelector) -> &'static str {
    match p {
        PrefixSelector::All => "all",
        PrefixSelector::Dyadic => "dyadic",
    }
}
