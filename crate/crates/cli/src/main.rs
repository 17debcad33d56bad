use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use nmr_pops::reference::{validate, ValidationStatus};
use nmr_pops::scenario::{self, parse_transition, RunOptions, Scenario, BUILTIN_SCENARIOS};
use nmr_pops::{compile, five_qubit_system, load_system, make_pops, GateSpec, SpinSystem};

#[derive(Parser)]
#[command(
    name = "nmr-pops",
    version,
    about = "POPS preparation, gate compilation and spectral products for first-order spin systems"
)]
struct Cli {
    /// Spin system config (JSON). Defaults to the built-in five-qubit system.
    #[arg(long, global = true)]
    system: Option<PathBuf>,
    /// Seed for the noise generator.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Per-experiment noise standard deviation.
    #[arg(long, global = true)]
    noise_sigma: Option<f64>,
    /// Render without noise.
    #[arg(long, global = true, conflicts_with = "noise_sigma")]
    no_noise: bool,
    /// Directory for CSV spectra and report.json.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare generated spectral patterns with the embedded reference table.
    Validate,
    /// Print the signed spectral pattern of a basis state.
    Pattern {
        #[arg(long)]
        state: String,
    },
    /// Compile a controlled gate into selective pi pulses.
    Gate {
        kind: GateKind,
        /// Control values over the non-target qubits in order, e.g. 0010.
        #[arg(long)]
        controls: String,
        /// Target qubit of a CNOT (1-based).
        #[arg(long, required_if_eq("kind", "cnot"))]
        target: Option<usize>,
        /// The two swapped qubits of a CSWAP (1-based).
        #[arg(long, num_args = 1..=2, value_delimiter = ',', required_if_eq("kind", "cswap"))]
        targets: Option<Vec<usize>>,
    },
    /// Print the POPS made from one transition (label like B8, or 00101-01101).
    Pops {
        #[arg(long)]
        transition: String,
    },
    /// Run a built-in scenario (fig1, fig2, fig3, table2) or a scenario file.
    Scenario { name: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum GateKind {
    Cnot,
    Cswap,
}

fn system(path: Option<&Path>) -> Result<SpinSystem> {
    match path {
        Some(p) => load_system(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(five_qubit_system()),
    }
}

fn one_based(q: usize, n: usize) -> Result<usize> {
    if q == 0 || q > n {
        bail!("qubit {q} out of range 1..={n}");
    }
    Ok(q - 1)
}

fn print(v: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Validate => {
            let sys = system(cli.system.as_deref())?;
            let v = validate(&sys);
            print(&v.to_json_value())?;
            match v.status {
                ValidationStatus::Pass => eprintln!("PASS"),
                ValidationStatus::Fail => {
                    eprintln!("FAIL");
                    return Ok(ExitCode::FAILURE);
                }
                ValidationStatus::NoReference => eprintln!("no reference table for this system"),
            }
        }
        Command::Pattern { state } => {
            let sys = system(cli.system.as_deref())?;
            let s = sys.parse_state(state)?;
            let pattern: Vec<String> = sys.pattern_of(s).iter().map(|p| p.to_string()).collect();
            print(&json!({"state": s.bits(), "pattern": pattern}))?;
        }
        Command::Gate {
            kind,
            controls,
            target,
            targets,
        } => {
            let sys = system(cli.system.as_deref())?;
            let n = sys.n();
            let spec = match kind {
                GateKind::Cnot => {
                    let t = target.context("--target is required for cnot")?;
                    GateSpec::cnot_from_bits(n, controls, one_based(t, n)?)?
                }
                GateKind::Cswap => {
                    let ts = targets
                        .as_deref()
                        .context("--targets is required for cswap")?;
                    let &[u, v] = ts else {
                        bail!("--targets takes two qubits")
                    };
                    GateSpec::cswap_from_bits(n, controls, one_based(u, n)?, one_based(v, n)?)?
                }
            };
            print(&json!(compile(&sys, &spec)?.labels()))?;
        }
        Command::Pops { transition } => {
            let sys = system(cli.system.as_deref())?;
            let t = parse_transition(&sys, transition)?;
            let p = make_pops(&sys, &t)?;
            let (pos, neg) = p.pops_members().context("not a POPS")?;
            print(&json!({
                "transition": t.label.to_string(),
                "frequency_hz": t.frequency_hz,
                "populations": {
                    pos.bits(): p.population(pos),
                    neg.bits(): p.population(neg),
                },
            }))?;
        }
        Command::Scenario { name } => {
            let (sc, sys) = if BUILTIN_SCENARIOS.contains(&name.as_str()) {
                (Scenario::builtin(name)?, system(cli.system.as_deref())?)
            } else {
                let path = Path::new(name);
                if !path.exists() {
                    bail!(
                        "unknown scenario {name:?}: expected one of {} or a scenario file",
                        BUILTIN_SCENARIOS.join(", ")
                    );
                }
                let sc = Scenario::from_file(path).with_context(|| format!("reading {name}"))?;
                // --system wins over the file's own system entry
                let sys = match (&cli.system, &sc.system) {
                    (Some(p), _) => system(Some(p))?,
                    (None, Some(rel)) => {
                        system(Some(&path.parent().unwrap_or(Path::new(".")).join(rel)))?
                    }
                    (None, None) => five_qubit_system(),
                };
                (sc, sys)
            };
            let mut opts = RunOptions {
                seed: cli.seed,
                ..RunOptions::default()
            };
            if cli.no_noise {
                opts.noise_sigma = 0.0;
            } else if let Some(s) = cli.noise_sigma {
                opts.noise_sigma = s;
            }
            let result = scenario::run(&sys, &sc, &opts)?;
            let files = result
                .write(&cli.out_dir)
                .with_context(|| format!("writing to {}", cli.out_dir.display()))?;
            print(&result.report())?;
            for f in files {
                eprintln!("wrote {}", f.display());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
