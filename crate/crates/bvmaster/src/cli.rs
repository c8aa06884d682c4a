//! Command-line dispatch: argument parsing, file loading, exit codes.
//!
//! Exit codes:
//!
//! * `0` — success;
//! * `1` — usage or parse errors: bad flags, unreadable files, syntax errors,
//!   anything detected while interpreting the input text;
//! * `2` — the file was understood but does not define a valid model or
//!   complex (validation by the engine failed);
//! * `3` — an internal identity check failed; these identities are theorems,
//!   so this indicates an engine bug, never a property of valid input;
//! * `4` — an independent oracle disagreed with the solver (`--oracle`).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use bvqft::correlators::{build_correlators, run_partition_oracle, verify_closed_forms, CorrelatorData};
use bvqft::model::{build_model, ModelError};
use bvqft::scalar::Rat;
use bvqft::solver::{MasterState, SolverError};
use bvqft::tower::{ObstructionTower, TowerError};

use crate::bundle::{self, CheckReport, EngineStamp, ModelSummary};
use crate::complexfile::{ComplexFile, ComplexFileError};
use crate::modelfile::{parse_model_file, ModelFile, ModelFileError};
use crate::par;

/// Top-level argument grammar.
#[derive(Parser)]
#[command(name = "bvmaster", version, about = "Quantum master equations on polynomial models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Arguments shared by every subcommand.
#[derive(Args)]
struct Common {
    /// Input file: a TOML model, or a JSON complex for `obstruction`.
    file: PathBuf,
    /// Write the JSON document here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sampled batches (default: `BVMASTER_THREADS` or 1).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the cohomology basis of a model.
    Ring {
        #[command(flatten)]
        common: Common,
    },
    /// Solve the master equation: structure tensors, quantum coordinates,
    /// correlators, and the verification log.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Solve to this order (default: the file's `truncation`, else 4).
        #[arg(long)]
        order: Option<usize>,
        /// Cross-check the correlators against the independent oracles.
        #[arg(long)]
        oracle: bool,
    },
    /// Print the correlator table.
    Correlators {
        #[command(flatten)]
        common: Common,
        /// Solve to this order (default: the file's `truncation`, else 4).
        #[arg(long)]
        order: Option<usize>,
        /// Report correlators with at most this many insertions
        /// (default: the solved order; may not exceed it).
        #[arg(long)]
        arity: Option<usize>,
        /// Cross-check the correlators against the independent oracles.
        #[arg(long)]
        oracle: bool,
    },
    /// Solve and report the verification log alone.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Solve to this order (default: the file's `truncation`, else 4).
        #[arg(long)]
        order: Option<usize>,
        /// Also run the independent correlator oracles.
        #[arg(long)]
        oracle: bool,
    },
    /// Build the obstruction tower of a finite complex and classify its
    /// observable and invisible classes.
    Obstruction {
        #[command(flatten)]
        common: Common,
        /// Truncate the complex to this order (default: all stored orders).
        #[arg(long)]
        order: Option<usize>,
        /// Random gauge transformations to check covariance against.
        #[arg(long, default_value_t = 16)]
        samples: usize,
    },
}

/// A command failure carrying the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn identity(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }

    fn oracle(message: impl Into<String>) -> Self {
        Failure { code: 4, message: message.into() }
    }
}

impl From<ModelFileError> for Failure {
    fn from(e: ModelFileError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::invalid(e.to_string())
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Model(m) => Failure::invalid(m.to_string()),
            SolverError::Gauge(msg) => Failure::invalid(msg),
            SolverError::Algebra(_) | SolverError::IdentityViolation { .. } => {
                Failure::identity(e.to_string())
            }
        }
    }
}

impl From<TowerError> for Failure {
    fn from(e: TowerError) -> Self {
        match e {
            TowerError::Shape(_) | TowerError::NotNilpotent { .. } => {
                Failure::invalid(e.to_string())
            }
            _ => Failure::identity(e.to_string()),
        }
    }
}

impl From<ComplexFileError> for Failure {
    fn from(e: ComplexFileError) -> Self {
        match e {
            ComplexFileError::Json(_) | ComplexFileError::Structure(_) => {
                Failure::usage(e.to_string())
            }
            ComplexFileError::Tower(t) => Failure::from(t),
        }
    }
}

/// Parses the process arguments, runs the selected command, and returns the
/// process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // `--help` and `--version` arrive here as non-error "errors".
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("bvmaster: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Ring { common } => {
            let file = load_model_file(&common.file)?;
            let out = file.output.clone();
            let model = build_model(file.spec)?;
            emit(&common, out.as_deref(), &bundle::RingReport::new(&model))
        }
        Command::Solve { common, order, oracle } => {
            let file = load_model_file(&common.file)?;
            let out = file.output.clone();
            let order = effective_order(order, &file);
            let mut solved = solve_model(file, order, oracle, order)?;
            let report =
                bundle::result_bundle(&mut solved.state, &solved.data, &solved.expectation)?;
            emit(&common, out.as_deref(), &report)
        }
        Command::Correlators { common, order, arity, oracle } => {
            let file = load_model_file(&common.file)?;
            let out = file.output.clone();
            let order = effective_order(order, &file);
            let arity = arity.unwrap_or(order);
            if arity > order {
                return Err(Failure::usage(format!(
                    "--arity {arity} exceeds the solved order {order}"
                )));
            }
            let solved = solve_model(file, order, oracle, arity)?;
            let report = bundle::correlator_report(
                &solved.state,
                &solved.data,
                &solved.expectation,
                arity,
                oracle,
            );
            emit(&common, out.as_deref(), &report)
        }
        Command::Verify { common, order, oracle } => {
            let file = load_model_file(&common.file)?;
            let out = file.output.clone();
            let order = effective_order(order, &file);
            let mut solved = solve_model(file, order, oracle, order)?;
            let semiclassical = solved.state.verify_semiclassical();
            let mut checks: Vec<CheckReport> =
                solved.state.log().iter().map(CheckReport::from).collect();
            checks.extend(solved.data.log().iter().map(CheckReport::from));
            let all_passed = checks.iter().all(|c| c.passed);
            let report = bundle::VerifyReport {
                engine: EngineStamp::current(),
                model: ModelSummary::new(solved.state.model()),
                order: solved.state.order(),
                checks,
                all_passed,
                semiclassical,
            };
            emit(&common, out.as_deref(), &report)
        }
        Command::Obstruction { common, order, samples } => {
            let src = read_input(&common.file)?;
            let mut raw: ComplexFile = serde_json::from_str(&src)
                .map_err(|e| Failure::usage(format!("invalid complex file: {e}")))?;
            if let Some(n) = order {
                let stored = raw.operators.len().saturating_sub(1);
                if n > stored {
                    return Err(Failure::usage(format!(
                        "--order {n} exceeds the stored order {stored}"
                    )));
                }
                raw.operators.truncate(n + 1);
            }
            let complex = raw.into_complex()?;
            let tower = ObstructionTower::build(complex)?;
            let threads = resolve_threads(common.threads)?;
            let outcomes = par::par_map(samples, threads, |i| {
                let mut rng = ChaCha8Rng::seed_from_u64(0xB5_0000 + i as u64);
                let s = tower.random_homotopy(&mut rng);
                let xi = tower.random_automorphism(&mut rng);
                let report = tower.gauge_check(&s, &xi);
                report.chain_relation && report.kappa_squared
            });
            let passed = outcomes.into_iter().filter(|&ok| ok).count();
            if passed != samples {
                return Err(Failure::identity(format!(
                    "gauge covariance failed for {} of {samples} samples",
                    samples - passed
                )));
            }
            emit(&common, None, &bundle::tower_report(&tower, (samples, passed)))
        }
    }
}

/// The order actually solved to: flag, then the file's `truncation`, then 4.
fn effective_order(flag: Option<usize>, file: &ModelFile) -> usize {
    flag.or(file.truncation).unwrap_or(4).max(1)
}

/// Model solved to a fixed order together with its correlator layer and the
/// expectation vector the reports evaluate against.
struct Solved {
    state: MasterState,
    data: CorrelatorData,
    expectation: Vec<Rat>,
}

fn solve_model(
    file: ModelFile,
    order: usize,
    oracle: bool,
    oracle_arity: usize,
) -> Result<Solved, Failure> {
    let model = build_model(file.spec)?;
    let mut state = MasterState::new(model)?;
    state.solve_to(order)?;
    let dim = state.model().h_basis().len();
    let expectation = match file.expectation {
        Some(v) => {
            if v.len() != dim {
                return Err(Failure::invalid(format!(
                    "expectation vector has {} entries but the cohomology has dimension {dim}",
                    v.len()
                )));
            }
            v
        }
        None => {
            // Default normalisation: the socle class has expectation one.
            let mut v = vec![Rat::from_integer(0.into()); dim];
            v[state.model().socle_index()] = Rat::from_integer(1.into());
            v
        }
    };
    let data = build_correlators(&state)?;
    if oracle {
        run_partition_oracle(&state, &data, oracle_arity.min(order))
            .map_err(|e| Failure::oracle(e.to_string()))?;
        if order >= 4 {
            verify_closed_forms(&state, &data).map_err(|e| Failure::oracle(e.to_string()))?;
        }
    }
    Ok(Solved { state, data, expectation })
}

fn read_input(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read `{}`: {e}", path.display())))
}

fn load_model_file(path: &Path) -> Result<ModelFile, Failure> {
    Ok(parse_model_file(&read_input(path)?)?)
}

/// Resolves the worker-thread count: flag, then `BVMASTER_THREADS`, then 1.
fn resolve_threads(flag: Option<usize>) -> Result<usize, Failure> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var("BVMASTER_THREADS") {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| Failure::usage(format!("BVMASTER_THREADS is not a thread count: `{s}`")))?,
            Err(_) => 1,
        },
    };
    if n == 0 {
        return Err(Failure::usage("thread count must be at least 1"));
    }
    Ok(n)
}

/// Prints the report to stdout, or writes it to `--out` (or, failing that,
/// the model file's own `output` path) when one is given.
fn emit<T: Serialize>(common: &Common, default_out: Option<&str>, report: &T) -> Result<(), Failure> {
    let json = bundle::to_json(report);
    let target = common.out.clone().or_else(|| default_out.map(PathBuf::from));
    match target {
        Some(path) => fs::write(&path, &json)
            .map_err(|e| Failure::usage(format!("cannot write `{}`: {e}", path.display()))),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes_map_to_documented_codes() {
        assert_eq!(Failure::from(ModelError::UnitInIdeal).code, 2);
        assert_eq!(
            Failure::from(SolverError::IdentityViolation { name: "x".into(), order: 2 }).code,
            3
        );
        assert_eq!(
            Failure::from(TowerError::NotNilpotent { hbar_order: 2, ghost: 0 }).code,
            2
        );
        assert_eq!(
            Failure::from(ComplexFileError::Structure("ragged".into())).code,
            1
        );
        assert_eq!(
            Failure::from(TowerError::InternalIdentityViolation {
                name: "claim 1",
                hbar_order: 1,
                ghost: 0,
            })
            .code,
            3
        );
    }

    #[test]
    fn thread_resolution_prefers_the_flag() {
        assert_eq!(resolve_threads(Some(3)).unwrap(), 3);
        assert!(resolve_threads(Some(0)).is_err());
    }
}
