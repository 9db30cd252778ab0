//! Command-line entry point: emits divergence tables, bound estimates,
//! pushforward histograms, contour surfaces and training traces as
//! CSV/JSON. Exit status: 0 on success, 1 on usage errors, 2 on numeric
//! failures.

use clap::{Parser, Subcommand, ValueEnum};
use fdiv::algebra::builtin_tail_table;
use fdiv::dist::{optimal_critic, Critic, Density, FitConstraint, FitObjective};
use fdiv::divergence::{Builtin, Divergence};
use fdiv::net::DenseNet;
use fdiv::pushforward::{divergence_from_pushforward, pushforward_empirical, PushforwardInput};
use fdiv::report;
use fdiv::trainer::{run_suite, train, trace_to_csv, CriticMode, TrainConfig, TrainTrace};
use fdiv::variational::{bound_estimate, SchemeConfig};
use fdiv::{Error, Result};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "fdiv", version, about = "f-divergence calculus and toy GAN training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CriticModeArg {
    Learned,
    Analytic,
}

impl From<CriticModeArg> for CriticMode {
    fn from(m: CriticModeArg) -> CriticMode {
        match m {
            CriticModeArg::Learned => CriticMode::Learned,
            CriticModeArg::Analytic => CriticMode::Analytic,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample the symmetry-preserving curves s(d) of built-in divergences.
    Sfcurves {
        /// Comma-separated divergence names.
        #[arg(long, default_value = "kl,rkl,js4,jeffreys,neymann-chi2,srkl,igog")]
        divergences: String,
        #[arg(long, default_value_t = -8.0, allow_hyphen_values = true)]
        lo: f64,
        #[arg(long, default_value_t = 8.0)]
        hi: f64,
        #[arg(long, default_value_t = 401)]
        points: usize,
        /// Output CSV path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tail weights and boundedness of every built-in divergence.
    Tailweights {
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimate of the variational bound between two densities.
    Estimate {
        /// Density JSON for p.
        #[arg(long)]
        p: PathBuf,
        /// Density JSON for q.
        #[arg(long)]
        q: PathBuf,
        #[arg(long)]
        divergence: String,
        /// `optimal` or a critic checkpoint path.
        #[arg(long, default_value = "optimal")]
        critic: String,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Histograms of critic outputs under p- and q-samples.
    Pushforward {
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        q: PathBuf,
        /// `optimal` or a critic checkpoint path.
        #[arg(long, default_value = "optimal")]
        critic: String,
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        bins: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON sidecar with per-divergence integral estimates.
        #[arg(long)]
        integrals: Option<PathBuf>,
    },
    /// Divergence surface over generator parameters (mu, sigma).
    Contour {
        #[arg(long)]
        divergence: String,
        /// Density JSON for p (defaults to the bimodal benchmark target).
        #[arg(long)]
        p: Option<PathBuf>,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        mu_min: f64,
        #[arg(long, default_value_t = 3.0)]
        mu_max: f64,
        #[arg(long, default_value_t = 0.1)]
        sigma_min: f64,
        #[arg(long, default_value_t = 3.0)]
        sigma_max: f64,
        #[arg(long, default_value_t = 200)]
        resolution: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Optional training-trace JSON to overlay.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Where to write the surface + trajectory JSON.
        #[arg(long)]
        overlay_out: Option<PathBuf>,
    },
    /// One training run of the 1D Gaussian generator.
    Train {
        /// js-saturating | js-nonsaturating | rkl | igog | srkl.
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long, value_enum, default_value_t = CriticModeArg::Learned)]
        critic: CriticModeArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Density JSON for the target (defaults to the bimodal benchmark).
        #[arg(long)]
        p: Option<PathBuf>,
        /// Full TrainConfig JSON; flags above override its seed/steps.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trace JSON output path.
        #[arg(long)]
        out: PathBuf,
        /// Optional trace CSV output path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// The full 16-run benchmark suite (4 schemes x 2 critic modes x 2 seeds).
    Suite {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit a constrained 2D Gaussian to a density.
    Fit {
        #[arg(long)]
        p: PathBuf,
        #[arg(long, value_enum)]
        objective: FitObjectiveArg,
        #[arg(long, value_enum)]
        constraint: FitConstraintArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitObjectiveArg {
    Kl,
    Rkl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitConstraintArg {
    Diagonal,
    Isotropic,
}

fn load_density(path: &Path) -> Result<Density> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn load_critic(spec: &str) -> Result<Option<DenseNet>> {
    if spec == "optimal" {
        Ok(None)
    } else {
        let text = fs::read_to_string(spec)?;
        Ok(Some(DenseNet::from_json(&text)?))
    }
}

fn parse_scheme(s: &str) -> Result<SchemeConfig> {
    let key: String = s.to_ascii_lowercase().replace(['_', ' '], "-");
    match key.as_str() {
        "js-saturating" | "js4-saturating" | "js" | "js4" => {
            Ok(SchemeConfig::saturating(Builtin::Js4, Builtin::Js4))
        }
        "js-nonsaturating" | "js4-nonsaturating" | "nonsaturating" | "ns" => {
            Ok(SchemeConfig::non_saturating(Builtin::Js4))
        }
        "rkl" => Ok(SchemeConfig::saturating(Builtin::Rkl, Builtin::Js4)),
        "igog" => Ok(SchemeConfig::saturating(Builtin::Igog, Builtin::Js4)),
        "srkl" => Ok(SchemeConfig::saturating(Builtin::Srkl, Builtin::Js4)),
        _ => Err(Error::InvalidConfig {
            reason: format!(
                "unknown scheme `{s}`; valid: js-saturating, js-nonsaturating, rkl, igog, srkl"
            ),
        }),
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text)?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn scheme_slug(c: &TrainConfig) -> String {
    use fdiv::variational::Mode;
    let scheme = match (c.scheme.generator, c.scheme.mode) {
        (Builtin::Js4, Mode::Saturating) => "js-saturating".to_string(),
        (Builtin::Js4, Mode::NonSaturating) => "js-nonsaturating".to_string(),
        (g, Mode::Saturating) => g.name().to_ascii_lowercase(),
        (g, Mode::NonSaturating) => format!("{}-nonsaturating", g.name().to_ascii_lowercase()),
    };
    let mode = match c.critic_mode {
        CriticMode::Learned => "learned",
        CriticMode::Analytic => "analytic",
    };
    format!("{scheme}_{mode}_seed{}", c.seed)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sfcurves {
            divergences,
            lo,
            hi,
            points,
            out,
        } => {
            if !(lo < hi) || points < 2 {
                return Err(Error::InvalidConfig {
                    reason: "need lo < hi and at least 2 points".into(),
                });
            }
            let divs: Vec<Divergence> = divergences
                .split(',')
                .map(|name| Divergence::by_name(name.trim()))
                .collect::<Result<_>>()?;
            write_or_print(out.as_deref(), &report::s_curves_csv(&divs, lo, hi, points))
        }

        Command::Tailweights { format, out } => {
            let rows = builtin_tail_table()?;
            let text = match format {
                OutputFormat::Text => report::tail_table_text(&rows),
                OutputFormat::Json => {
                    let mut s = report::to_versioned_json(serde_json::json!({ "rows": rows }))?;
                    s.push('\n');
                    s
                }
            };
            write_or_print(out.as_deref(), &text)
        }

        Command::Estimate {
            p,
            q,
            divergence,
            critic,
            n,
            seed,
            out,
        } => {
            let p = load_density(&p)?;
            let q = load_density(&q)?;
            let div = Divergence::by_name(&divergence)?;
            let net = load_critic(&critic)?;
            let mut rng = fdiv::rng::seeded(seed);
            let sp = p.sample_with(&mut rng, n);
            let sq = q.sample_with(&mut rng, n);
            let est = match &net {
                Some(net) => bound_estimate(&div, &sp, &sq, net)?,
                None => {
                    let c = optimal_critic(&p, &q)?;
                    bound_estimate(&div, &sp, &sq, &c)?
                }
            };
            #[derive(Serialize)]
            struct EstimateOut {
                divergence: String,
                critic: String,
                seed: u64,
                #[serde(flatten)]
                estimate: fdiv::variational::BoundEstimate,
            }
            let mut text = report::to_versioned_json(EstimateOut {
                divergence: div.name().to_string(),
                critic,
                seed,
                estimate: est,
            })?;
            text.push('\n');
            write_or_print(out.as_deref(), &text)
        }

        Command::Pushforward {
            p,
            q,
            critic,
            n,
            bins,
            seed,
            out,
            integrals,
        } => {
            let p = load_density(&p)?;
            let q = load_density(&q)?;
            let net = load_critic(&critic)?;
            let opt;
            let critic_ref: &dyn Critic = match &net {
                Some(net) => net,
                None => {
                    opt = optimal_critic(&p, &q)?;
                    &opt
                }
            };
            let hist = pushforward_empirical(&p, &q, critic_ref, n, bins, seed)?;
            fs::write(&out, report::pushforward_csv(&hist))?;
            if hist.degenerate {
                eprintln!("warning: all critic outputs coincide; wrote a single-bin histogram");
            }
            if let Some(path) = integrals {
                let mut map = serde_json::Map::new();
                for b in [Builtin::Kl, Builtin::Rkl, Builtin::Srkl, Builtin::Js4] {
                    let div = Divergence::builtin(b);
                    let v = divergence_from_pushforward(&div, PushforwardInput::Histogram(&hist))?;
                    map.insert(b.name().to_string(), serde_json::json!(v));
                }
                let text = report::to_versioned_json(serde_json::json!({ "integrals": map }))?;
                fs::write(path, text)?;
            }
            Ok(())
        }

        Command::Contour {
            divergence,
            p,
            mu_min,
            mu_max,
            sigma_min,
            sigma_max,
            resolution,
            out,
            trace,
            overlay_out,
        } => {
            let div = Divergence::by_name(&divergence)?;
            let p = match p {
                Some(path) => load_density(&path)?,
                None => Density::toy_mixture_1d(),
            };
            let surface = fdiv::contour::contour_grid(
                &div,
                &p,
                (mu_min, mu_max),
                (sigma_min, sigma_max),
                (resolution, resolution),
            )?;
            fs::write(&out, report::surface_csv(&surface))?;
            eprintln!(
                "argmin: mu = {:.4}, sigma = {:.4}, value = {:.6}",
                surface.argmin.0, surface.argmin.1, surface.argmin.2
            );
            if let Some(trace_path) = trace {
                let text = fs::read_to_string(trace_path)?;
                let trace: TrainTrace = serde_json::from_str(&text)?;
                let overlay = fdiv::contour::overlay_trajectory(&surface, &trace);
                let out_path = overlay_out.ok_or(Error::InvalidConfig {
                    reason: "--trace requires --overlay-out".into(),
                })?;
                fs::write(out_path, report::to_versioned_json(overlay)?)?;
            }
            Ok(())
        }

        Command::Train {
            scheme,
            critic,
            seed,
            steps,
            p,
            config,
            out,
            csv,
        } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = fs::read_to_string(path)?;
                    serde_json::from_str::<TrainConfig>(&text)?
                }
                None => {
                    let scheme = parse_scheme(scheme.as_deref().ok_or(Error::InvalidConfig {
                        reason: "either --scheme or --config is required".into(),
                    })?)?;
                    TrainConfig::toy(scheme, critic.into(), seed.unwrap_or(0))
                }
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(steps) = steps {
                cfg.total_generator_steps = steps;
            }
            if let Some(p_path) = p {
                cfg.p = load_density(&p_path)?;
            }
            let trace = train(&cfg)?;
            fs::write(&out, report::to_versioned_json(&trace)?)?;
            if let Some(csv_path) = csv {
                fs::write(csv_path, trace_to_csv(&trace))?;
            }
            eprintln!(
                "final: mu = {:.4}, sigma = {:.4}",
                trace.final_mu, trace.final_sigma
            );
            Ok(())
        }

        Command::Suite {
            seed,
            steps,
            out_dir,
        } => {
            let mut base = TrainConfig::toy(
                SchemeConfig::saturating(Builtin::Js4, Builtin::Js4),
                CriticMode::Learned,
                seed,
            );
            if let Some(steps) = steps {
                base.total_generator_steps = steps;
            }
            fs::create_dir_all(&out_dir)?;
            let traces = run_suite(&base)?;
            #[derive(Serialize)]
            struct ManifestEntry {
                file: String,
                final_mu: f64,
                final_sigma: f64,
            }
            let mut manifest = Vec::new();
            for trace in &traces {
                let file = format!("trace_{}.json", scheme_slug(&trace.config));
                fs::write(out_dir.join(&file), report::to_versioned_json(trace)?)?;
                fs::write(
                    out_dir.join(file.replace(".json", ".csv")),
                    trace_to_csv(trace),
                )?;
                manifest.push(ManifestEntry {
                    file,
                    final_mu: trace.final_mu,
                    final_sigma: trace.final_sigma,
                });
            }
            fs::write(
                out_dir.join("manifest.json"),
                report::to_versioned_json(serde_json::json!({ "runs": manifest }))?,
            )?;
            Ok(())
        }

        Command::Fit {
            p,
            objective,
            constraint,
            out,
        } => {
            let p = load_density(&p)?;
            let objective = match objective {
                FitObjectiveArg::Kl => FitObjective::Kl,
                FitObjectiveArg::Rkl => FitObjective::Rkl,
            };
            let constraint = match constraint {
                FitConstraintArg::Diagonal => FitConstraint::Diagonal,
                FitConstraintArg::Isotropic => FitConstraint::Isotropic,
            };
            let q = fdiv::dist::fit_gaussian(&p, objective, constraint)?;
            fs::write(&out, serde_json::to_string_pretty(&q)?)?;
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::QuadratureFailed { .. }
        | Error::FitDidNotConverge { .. }
        | Error::TrainingDiverged { .. }
        | Error::NoPowerLawTail { .. }
        | Error::NotADefiningFunction { .. }
        | Error::DomainError { .. }
        | Error::InvalidInterval { .. }
        | Error::EmptyBatch => 2,
        _ => 1,
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version exit 0; anything else is a usage error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
