//! Scenario-driven front end for the `conestab` library.

pub mod report;
pub mod runner;
pub mod scenario;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use scenario::{Analysis, BackendKind, ConfigError, ModeSpec, Scenario, SweepParameter, VariationKind};

/// Exit codes: 0 all verdicts pass, 2 some verdict failed, 1 config or IO error.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VERDICT: i32 = 2;

/// Log level variable, read by `env_logger`.
pub const LOG_ENV: &str = "CONESTAB_LOG";

#[derive(Debug, Parser)]
#[command(name = "conestab", version, about = "Stability of weighted hypersurfaces in solid cones")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Scenario JSON file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Samples per parameter direction.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendKind>,
    /// Stationarity tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Every analysis listed in the scenario.
    Run,
    /// Geometry and Minkowski identity checks.
    Verify,
    /// Stability spectra with eigenvalue CSVs.
    Spectrum {
        #[arg(long, value_enum)]
        mode: Option<ModeSpec>,
    },
    /// Parameter sweep written as CSV.
    Sweep {
        #[arg(long, value_enum)]
        parameter: Option<SweepParameter>,
        #[arg(long, allow_hyphen_values = true)]
        from: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        to: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Curvature-dimension certification of the density.
    Certify,
    /// Finite-difference variations against the analytic rates.
    Variation {
        #[arg(long, value_enum)]
        kind: Option<VariationKind>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::Verify => "verify",
            Command::Spectrum { .. } => "spectrum",
            Command::Sweep { .. } => "sweep",
            Command::Certify => "certify",
            Command::Variation { .. } => "variation",
        }
    }

    /// The scenario analyses this command runs, with defaults when the
    /// scenario lists none of the relevant kind.
    pub fn select(&self, listed: &[Analysis]) -> Result<Vec<Analysis>, ConfigError> {
        let pick = |f: &dyn Fn(&Analysis) -> bool| listed.iter().filter(|a| f(a)).cloned().collect::<Vec<_>>();
        let out = match self {
            Command::Run => {
                if listed.is_empty() {
                    return Err(ConfigError("scenario lists no analyses".into()));
                }
                listed.to_vec()
            }
            Command::Verify => {
                let v = pick(&|a| matches!(a, Analysis::Geometry | Analysis::Minkowski));
                if v.is_empty() {
                    vec![Analysis::Geometry, Analysis::Minkowski]
                } else {
                    v
                }
            }
            Command::Spectrum { mode } => {
                let mut v = pick(&|a| matches!(a, Analysis::Spectrum { .. }));
                if v.is_empty() {
                    v.push(Analysis::Spectrum {
                        mode: ModeSpec::Both,
                        expect_f_stable: None,
                        expect_strongly_f_stable: None,
                    });
                }
                if let Some(m) = mode {
                    for a in &mut v {
                        if let Analysis::Spectrum { mode, .. } = a {
                            *mode = *m;
                        }
                    }
                }
                v
            }
            Command::Sweep { parameter, from, to, steps } => match (parameter, from, to, steps) {
                (Some(p), Some(f), Some(t), Some(s)) => vec![Analysis::Sweep {
                    parameter: *p,
                    from: *f,
                    to: *t,
                    steps: *s,
                }],
                (None, None, None, None) => {
                    let v = pick(&|a| matches!(a, Analysis::Sweep { .. }));
                    if v.is_empty() {
                        return Err(ConfigError("no sweep in the scenario; pass --parameter --from --to --steps".into()));
                    }
                    v
                }
                _ => return Err(ConfigError("sweep flags --parameter --from --to --steps go together".into())),
            },
            Command::Certify => {
                let v = pick(&|a| matches!(a, Analysis::CertifyCd { .. }));
                if v.is_empty() {
                    vec![Analysis::CertifyCd { expect: None }]
                } else {
                    v
                }
            }
            Command::Variation { kind } => match kind {
                Some(k) => vec![Analysis::Variation {
                    variation: *k,
                    u: None,
                    dt: None,
                }],
                None => {
                    let v = pick(&|a| matches!(a, Analysis::Variation { .. }));
                    if v.is_empty() {
                        vec![Analysis::Variation {
                            variation: VariationKind::Dilation,
                            u: None,
                            dt: None,
                        }]
                    } else {
                        v
                    }
                }
            },
        };
        Ok(out)
    }
}

/// Loads the scenario, applies flag overrides, runs and writes the report.
pub fn run(cli: &Cli) -> Result<(report::Report, PathBuf), ConfigError> {
    let path = cli
        .global
        .config
        .as_ref()
        .ok_or_else(|| ConfigError("--config is required".into()))?;
    let mut scenario = Scenario::load(path)?;
    if let Some(g) = cli.global.grid {
        scenario.surface.grid = g;
    }
    if let Some(b) = cli.global.backend {
        scenario.surface.backend = b;
    }
    if let Some(t) = cli.global.tol {
        scenario.tolerances.stationary = Some(t);
    }
    if let Some(o) = &cli.global.out {
        scenario.output.dir = o.clone();
    }
    let analyses = cli.command.select(&scenario.analyses)?;
    let base = path.parent().map(PathBuf::from).unwrap_or_default();
    let out = if scenario.output.dir.is_absolute() || cli.global.out.is_some() {
        scenario.output.dir.clone()
    } else {
        base.join(&scenario.output.dir)
    };
    let ctx = runner::Context::build(scenario, &base, out)?;
    runner::execute(&ctx, cli.command.name(), &analyses)
}

/// Exit code for a finished run.
pub fn exit_code(result: &Result<(report::Report, PathBuf), ConfigError>) -> i32 {
    match result {
        Ok((r, _)) if r.passed => EXIT_PASS,
        Ok(_) => EXIT_VERDICT,
        Err(_) => EXIT_ERROR,
    }
}
