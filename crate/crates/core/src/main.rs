use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use smoney::adversary::{self, CheatStrategy, ClaimPair};
use smoney::bb84::ChannelModel;
use smoney::coordination::{CoordinationParams, DEFAULT_MIN_RECEIVED_FRACTION};
use smoney::harness::{self, fixtures, Run, Scenario};
use smoney::BitString;

#[derive(Parser)]
#[command(name = "smoney", version, about = "Flexible S-money token simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its transcript.
    Run {
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long, env = "SMONEY_SEED")]
        seed: Option<u64>,
        /// Transcript destination; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a scenario and compare with a recorded transcript.
    VerifyTranscript {
        transcript: PathBuf,
        scenario: PathBuf,
        #[arg(long, env = "SMONEY_SEED")]
        seed: Option<u64>,
    },
    /// Monte Carlo double-spend estimate for one cheating strategy.
    EstimateSecurity {
        /// single_basis, intermediate_basis, random_guess or double_unveil_same_y
        #[arg(long)]
        strategy: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        trials: u64,
        #[arg(long, env = "SMONEY_SEED", default_value_t = 0)]
        seed: u64,
        /// Token label length.
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Measurement angle for intermediate_basis.
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_8)]
        theta: f64,
        #[arg(long, default_value_t = 0.0)]
        p_loss: f64,
        #[arg(long, default_value_t = 0.0)]
        p_err: f64,
        #[arg(long, default_value_t = DEFAULT_MIN_RECEIVED_FRACTION)]
        min_received_fraction: f64,
        /// Two comma-separated M-bit claims, e.g. 000,011.
        #[arg(long)]
        claims: Option<String>,
    },
    /// One-bit token decided at P_D and presented at Q_0 and Q_1.
    DemoFig1 {
        #[arg(long, env = "SMONEY_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Three-bit token with a staged decision over eight presentation points.
    DemoFig2 {
        #[arg(long, env = "SMONEY_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure with a stable reason code and exit status.
struct Failure {
    code: &'static str,
    status: u8,
    message: String,
}

impl Failure {
    fn io(message: String) -> Self {
        Failure {
            code: "io",
            status: 1,
            message,
        }
    }

    fn input(message: String) -> Self {
        Failure {
            code: "invalid_input",
            status: 1,
            message,
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    Scenario::from_json(&read(path)?).map_err(|e| Failure {
        code: "scenario_invalid",
        status: 1,
        message: format!("{}: {e}", path.display()),
    })
}

fn write_transcript(run: &Run, out: Option<&Path>) -> Result<(), Failure> {
    let text = run.transcript.to_jsonl();
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn check_expectations(run: &Run) -> Result<(), Failure> {
    if run.mismatches.is_empty() {
        return Ok(());
    }
    let lines: Vec<String> = run
        .mismatches
        .iter()
        .map(|m| {
            format!(
                "step {} ({}): expected {}, got {}",
                m.step, m.action, m.expected, m.verdict
            )
        })
        .collect();
    Err(Failure {
        code: "expectation_mismatch",
        status: 3,
        message: lines.join("; "),
    })
}

fn demo(text: &str, seed: Option<u64>, out: Option<&Path>) -> Result<(), Failure> {
    let scenario = Scenario::from_json(text).map_err(|e| Failure::input(e.to_string()))?;
    let run = harness::run_scenario(&scenario, seed).map_err(|e| Failure::input(e.to_string()))?;
    println!("{} (seed {})", scenario.name, run.seed);
    if let Some(d) = &scenario.description {
        println!("{d}");
    }
    for a in run.transcript.actions() {
        let expected = a.expected.as_deref().unwrap_or("-");
        println!(
            "  {:>2}  {:<15} {:<6} {:<28} expected {}",
            a.step, a.action, a.point, a.verdict, expected
        );
    }
    for o in &run.outcomes {
        println!("  {} accepted at [{}]", o.token, o.accepted_at.join(", "));
    }
    if let Some(path) = out {
        write_transcript(&run, Some(path))?;
    }
    check_expectations(&run)
}

fn parse_claims(s: &str, m: usize) -> Result<ClaimPair, Failure> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| Failure::input(format!("--claims wants two comma-separated strings, got {s:?}")))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<BitString>()
            .map_err(|e| Failure::input(format!("--claims: {e}")))
    };
    let pair = ClaimPair::new(parse(a)?, parse(b)?).map_err(|e| Failure::input(e.to_string()))?;
    if pair.m() != m {
        return Err(Failure::input(format!(
            "--claims have {} bits but --m is {m}",
            pair.m()
        )));
    }
    Ok(pair)
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { scenario, seed, out } => {
            let s = load_scenario(&scenario)?;
            let run = harness::run_scenario(&s, seed).map_err(|e| Failure::input(e.to_string()))?;
            write_transcript(&run, out.as_deref())?;
            let accepted: usize = run.outcomes.iter().map(|o| o.accepted_at.len()).sum();
            eprintln!(
                "{}: {} steps, {} accepted presentations, seed {}",
                s.name,
                s.script.len(),
                accepted,
                run.seed
            );
            check_expectations(&run)
        }
        Command::VerifyTranscript {
            transcript,
            scenario,
            seed,
        } => {
            let s = load_scenario(&scenario)?;
            let text = read(&transcript)?;
            match harness::verify_transcript(&text, &s, seed) {
                Ok(()) => {
                    println!("transcript matches replay of {}", s.name);
                    Ok(())
                }
                Err(harness::VerifyError::Diverged(d)) => Err(Failure {
                    code: "transcript_mismatch",
                    status: 4,
                    message: d.to_string(),
                }),
                Err(e) => Err(Failure::input(e.to_string())),
            }
        }
        Command::EstimateSecurity {
            strategy,
            n,
            gamma,
            trials,
            seed,
            m,
            theta,
            p_loss,
            p_err,
            min_received_fraction,
            claims,
        } => {
            let params = CoordinationParams::new(n, m, gamma)
                .and_then(|p| p.with_min_received_fraction(min_received_fraction))
                .map_err(|e| Failure::input(e.to_string()))?;
            let channel = ChannelModel::new(p_loss, p_err).map_err(|e| Failure::input(e.to_string()))?;
            let claims = match claims {
                Some(s) => parse_claims(&s, m)?,
                None => ClaimPair::single_bit(m).map_err(|e| Failure::input(e.to_string()))?,
            };
            let strategy =
                CheatStrategy::from_name(&strategy, claims, theta).map_err(|e| Failure::input(e.to_string()))?;
            let report = adversary::run_double_spend(&strategy, &params, &channel, trials, seed)
                .map_err(|e| Failure::input(e.to_string()))?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            if report.within_bound() {
                Ok(())
            } else {
                Err(Failure {
                    code: "bound_exceeded",
                    status: 5,
                    message: format!(
                        "empirical {:.3e} exceeds {} {:.3e} + 3σ",
                        report.empirical_probability, report.bound_kind, report.analytical_bound
                    ),
                })
            }
        }
        Command::DemoFig1 { seed, out } => demo(fixtures::FIG1, seed, out.as_deref()),
        Command::DemoFig2 { seed, out } => demo(fixtures::FIG2, seed, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.code, f.message);
            ExitCode::from(f.status)
        }
    }
}
