//! Alternating SGD on a parametric 1D Gaussian generator against a learned
//! or analytic critic, under saturating, non-saturating and hybrid schemes.
//!
//! One training run is strictly sequential and fully determined by its
//! config: a single ChaCha stream drives every draw, so identical configs
//! produce bit-identical traces. With the analytic critic the procedure is
//! plain SGD on the divergence value itself (the optimal critic is
//! recomputed from the current generator at every step).

use crate::dist::{optimal_critic, Critic, Density};
use crate::divergence::Divergence;
use crate::net::{pairwise_sum_bundles_in_place, DenseNet, Direction};
use crate::rng::{seeded, standard_normal};
use crate::util::pairwise_sum;
use crate::variational::{
    bound_estimate, critic_objective, generator_objective, SchemeConfig,
};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Critic architecture for every learned run: 1 -> 20 -> 20 -> 1 with ELU.
pub const CRITIC_WIDTHS: [usize; 4] = [1, 20, 20, 1];

/// Parameters beyond this magnitude abort a run as diverged.
const DIVERGED_AT: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticMode {
    Learned,
    Analytic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// True distribution (1D).
    pub p: Density,
    pub init_mu: f64,
    pub init_sigma: f64,
    pub scheme: SchemeConfig,
    pub critic_mode: CriticMode,
    pub generator_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub critic_steps_per_generator_step: usize,
    pub total_generator_steps: usize,
    pub seed: u64,
    /// sigma is clamped to this floor after every update.
    pub sigma_floor: f64,
    /// Divergence estimates are logged every this many generator steps.
    pub log_every: usize,
}

impl TrainConfig {
    /// The bimodal-target benchmark configuration: p = 0.5 N(0, 0.3^2) +
    /// 0.5 N(2, 1), generator initialized at (1.8, 1.8), critic lr 2e-2,
    /// batch 256, 5 critic steps per generator step, 4000 generator steps.
    /// Generator lr is 4e-3 for saturating JS4 and 2e-3 otherwise.
    pub fn toy(scheme: SchemeConfig, critic_mode: CriticMode, seed: u64) -> TrainConfig {
        TrainConfig {
            p: Density::toy_mixture_1d(),
            init_mu: 1.8,
            init_sigma: 1.8,
            scheme,
            critic_mode,
            generator_lr: toy_generator_lr(&scheme),
            critic_lr: 2e-2,
            batch_size: 256,
            critic_steps_per_generator_step: 5,
            total_generator_steps: 4000,
            seed,
            sigma_floor: 1e-3,
            log_every: 10,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.p.dim() != 1 {
            return Err(Error::InvalidConfig {
                reason: "the generator is 1D; p must be a 1D density".into(),
            });
        }
        if !(self.generator_lr > 0.0) || !(self.critic_lr > 0.0) {
            return Err(Error::InvalidConfig {
                reason: "learning rates must be positive".into(),
            });
        }
        if !(self.sigma_floor > 0.0) || !(self.init_sigma > self.sigma_floor) {
            return Err(Error::InvalidConfig {
                reason: "need init_sigma > sigma_floor > 0".into(),
            });
        }
        if self.batch_size == 0 || self.log_every == 0 {
            return Err(Error::InvalidConfig {
                reason: "batch_size and log_every must be positive".into(),
            });
        }
        Ok(())
    }
}

fn toy_generator_lr(scheme: &SchemeConfig) -> f64 {
    use crate::divergence::Builtin;
    use crate::variational::Mode;
    if scheme.mode == Mode::Saturating && scheme.generator == Builtin::Js4 {
        4e-3
    } else {
        2e-3
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub mu: f64,
    pub sigma: f64,
    pub gen_loss: f64,
    /// Critic objective from the last critic update of this step
    /// (learned mode only).
    pub critic_value: Option<f64>,
    /// Estimate of the effective divergence, logged every `log_every`
    /// steps: a Monte Carlo bound through the current critic in learned
    /// mode, the quadrature value in analytic mode.
    pub div_estimate: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainTrace {
    pub config: TrainConfig,
    pub steps: Vec<TraceStep>,
    pub final_mu: f64,
    pub final_sigma: f64,
}

pub fn train(config: &TrainConfig) -> Result<TrainTrace> {
    config.validate()?;
    let gen_div = Divergence::builtin(config.scheme.generator);
    let critic_div = Divergence::builtin(config.scheme.critic);
    let est_div = config.scheme.effective_divergence();

    let mut rng = seeded(config.seed);
    let mut net = match config.critic_mode {
        CriticMode::Learned => {
            let net_seed: u64 = rand::Rng::gen(&mut rng);
            Some(DenseNet::init(&CRITIC_WIDTHS, net_seed)?)
        }
        CriticMode::Analytic => None,
    };
    struct Workspace {
        scratch: crate::net::NetScratch,
        bundles: Vec<crate::net::GradBundle>,
    }
    let mut workspace = net.as_ref().map(|n| Workspace {
        scratch: n.scratch(),
        bundles: (0..2 * config.batch_size).map(|_| n.zero_bundle()).collect(),
    });

    let mut mu = config.init_mu;
    let mut sigma = config.init_sigma;
    let mut steps: Vec<TraceStep> = Vec::with_capacity(config.total_generator_steps + 1);

    let draw_z = |rng: &mut crate::rng::SeededRng, n: usize| -> Vec<f64> {
        (0..n).map(|_| standard_normal(rng)).collect()
    };

    // Generator batch evaluated with the current critic: returns the
    // per-sample critic values and input slopes.
    let eval_batch = |net: &Option<DenseNet>,
                      p: &Density,
                      mu: f64,
                      sigma: f64,
                      xs: &[f64]|
     -> Result<(Vec<f64>, Vec<f64>)> {
        match net {
            Some(net) => {
                let mut d = Vec::with_capacity(xs.len());
                let mut slope = Vec::with_capacity(xs.len());
                for &x in xs {
                    let (v, g) = net.value_and_input_grad(&[x]);
                    d.push(v);
                    slope.push(g[0]);
                }
                Ok((d, slope))
            }
            None => {
                let q = Density::gaussian_1d(mu, sigma * sigma)?;
                let critic = optimal_critic(p, &q)?;
                let mut d = Vec::with_capacity(xs.len());
                let mut slope = Vec::with_capacity(xs.len());
                for &x in xs {
                    let pt = [x];
                    d.push(critic.value(&pt));
                    slope.push(critic.input_grad(&pt)[0]);
                }
                Ok((d, slope))
            }
        }
    };

    let estimate = |net: &Option<DenseNet>,
                    rng: &mut crate::rng::SeededRng,
                    p: &Density,
                    mu: f64,
                    sigma: f64|
     -> Result<f64> {
        let q = Density::gaussian_1d(mu, sigma * sigma)?;
        match net {
            Some(net) => {
                let sp = p.sample_with(rng, config.batch_size);
                let sq = q.sample_with(rng, config.batch_size);
                Ok(bound_estimate(&est_div, &sp, &sq, net)?.value)
            }
            None => crate::dist::divergence_quadrature(&est_div, p, &q),
        }
    };

    // Initial row: loss of the untrained system on one evaluation batch.
    {
        let z = draw_z(&mut rng, config.batch_size);
        let xs: Vec<f64> = z.iter().map(|&z| mu + sigma * z).collect();
        let (d, _) = eval_batch(&net, &config.p, mu, sigma, &xs)?;
        let (loss, _) = generator_objective(&gen_div, config.scheme.mode, &d);
        let est = estimate(&net, &mut rng, &config.p, mu, sigma)?;
        steps.push(TraceStep {
            step: 0,
            mu,
            sigma,
            gen_loss: loss,
            critic_value: None,
            div_estimate: Some(est),
        });
    }

    for k in 1..=config.total_generator_steps {
        // Critic phase (learned mode): ascent on fresh batches. One
        // forward/backward per sample into preallocated bundles; the
        // objective's per-sample weights are applied by rescaling, then the
        // bundles are pairwise-reduced in place.
        let mut last_critic_value = None;
        if let Some(mut current) = net.take() {
            let ws = workspace.as_mut().expect("learned mode has a workspace");
            for _ in 0..config.critic_steps_per_generator_step {
                let sp = config.p.sample_with(&mut rng, config.batch_size);
                let z = draw_z(&mut rng, config.batch_size);
                let xq: Vec<f64> = z.iter().map(|&z| mu + sigma * z).collect();

                let mut d_p = Vec::with_capacity(config.batch_size);
                let mut d_q = Vec::with_capacity(config.batch_size);
                for (x, bundle) in sp.iter().zip(ws.bundles.iter_mut()) {
                    d_p.push(current.forward_backward_into(x, 1.0, &mut ws.scratch, bundle));
                }
                for (&x, bundle) in xq.iter().zip(ws.bundles[config.batch_size..].iter_mut()) {
                    d_q.push(current.forward_backward_into(&[x], 1.0, &mut ws.scratch, bundle));
                }
                let co = critic_objective(&critic_div, &d_p, &d_q)?;
                for (bundle, &g) in ws
                    .bundles
                    .iter_mut()
                    .zip(co.grad_on_p.iter().chain(&co.grad_on_q))
                {
                    bundle.scale(g);
                }
                pairwise_sum_bundles_in_place(&mut ws.bundles);
                current = current.sgd_step(&ws.bundles[0], config.critic_lr, Direction::Ascend);
                last_critic_value = Some(co.value);
            }
            net = Some(current);
        }

        // Generator phase: one descent step through the reparameterization
        // x = mu + sigma z.
        let z = draw_z(&mut rng, config.batch_size);
        let xs: Vec<f64> = z.iter().map(|&z| mu + sigma * z).collect();
        let (d, slope) = eval_batch(&net, &config.p, mu, sigma, &xs)?;
        let (loss, dloss_dd) = generator_objective(&gen_div, config.scheme.mode, &d);
        let per_mu: Vec<f64> = dloss_dd
            .iter()
            .zip(&slope)
            .map(|(dl, s)| dl * s)
            .collect();
        let per_sigma: Vec<f64> = per_mu.iter().zip(&z).map(|(g, zi)| g * zi).collect();
        let grad_mu = pairwise_sum(&per_mu);
        let grad_sigma = pairwise_sum(&per_sigma);
        mu -= config.generator_lr * grad_mu;
        sigma = (sigma - config.generator_lr * grad_sigma).max(config.sigma_floor);

        if !mu.is_finite() || !sigma.is_finite() || mu.abs() > DIVERGED_AT || sigma > DIVERGED_AT
        {
            let partial = TrainTrace {
                config: config.clone(),
                final_mu: mu,
                final_sigma: sigma,
                steps,
            };
            return Err(Error::TrainingDiverged {
                step: k,
                mu,
                sigma,
                partial: Box::new(partial),
            });
        }

        let div_estimate = if k % config.log_every == 0 || k == config.total_generator_steps {
            Some(estimate(&net, &mut rng, &config.p, mu, sigma)?)
        } else {
            None
        };
        steps.push(TraceStep {
            step: k,
            mu,
            sigma,
            gen_loss: loss,
            critic_value: last_critic_value,
            div_estimate,
        });
    }

    Ok(TrainTrace {
        config: config.clone(),
        final_mu: mu,
        final_sigma: sigma,
        steps,
    })
}

/// The four benchmark schemes: the critic always ascends JS4; the generator
/// descends saturating JS4, non-saturating JS4 (equivalently saturating
/// SRKL), saturating RKL, and saturating IGOG.
pub fn suite_schemes() -> [SchemeConfig; 4] {
    use crate::divergence::Builtin;
    [
        SchemeConfig::saturating(Builtin::Js4, Builtin::Js4),
        SchemeConfig::non_saturating(Builtin::Js4),
        SchemeConfig::saturating(Builtin::Rkl, Builtin::Js4),
        SchemeConfig::saturating(Builtin::Igog, Builtin::Js4),
    ]
}

/// The full 4 schemes x {learned, analytic} x 2 seeds = 16 runs, in
/// scheme-major order (mode inner, seed innermost). Independent runs
/// execute in parallel. Per-scheme generator learning rates follow the
/// benchmark rule regardless of `base.generator_lr`.
pub fn run_suite(base: &TrainConfig) -> Result<Vec<TrainTrace>> {
    let mut configs = Vec::with_capacity(16);
    for scheme in suite_schemes() {
        for critic_mode in [CriticMode::Learned, CriticMode::Analytic] {
            for seed_offset in 0..2u64 {
                let mut c = base.clone();
                c.scheme = scheme;
                c.critic_mode = critic_mode;
                c.seed = base.seed + seed_offset;
                c.generator_lr = toy_generator_lr(&scheme);
                configs.push(c);
            }
        }
    }
    configs.par_iter().map(train).collect()
}

/// Trace CSV: `step,mu,sigma,gen_loss,critic_value,div_estimate` with empty
/// fields for absent optionals. Floats use the shortest round-trip form.
pub fn trace_to_csv(trace: &TrainTrace) -> String {
    let mut out = String::from("step,mu,sigma,gen_loss,critic_value,div_estimate\n");
    for s in &trace.steps {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.step,
            s.mu,
            s.sigma,
            s.gen_loss,
            opt(s.critic_value),
            opt(s.div_estimate)
        ));
    }
    out
}

pub fn trace_steps_from_csv(text: &str) -> Result<Vec<TraceStep>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != "step,mu,sigma,gen_loss,critic_value,div_estimate" {
        return Err(Error::Parse {
            format: "trace csv",
            reason: format!("unexpected header {header:?}"),
        });
    }
    let parse_f = |s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|e| Error::Parse {
            format: "trace csv",
            reason: format!("bad float {s:?}: {e}"),
        })
    };
    lines
        .map(|line| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 6 {
                return Err(Error::Parse {
                    format: "trace csv",
                    reason: format!("expected 6 cells, got {}", cells.len()),
                });
            }
            let opt = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    parse_f(s).map(Some)
                }
            };
            Ok(TraceStep {
                step: cells[0].parse().map_err(|e| Error::Parse {
                    format: "trace csv",
                    reason: format!("bad step: {e}"),
                })?,
                mu: parse_f(cells[1])?,
                sigma: parse_f(cells[2])?,
                gen_loss: parse_f(cells[3])?,
                critic_value: opt(cells[4])?,
                div_estimate: opt(cells[5])?,
            })
        })
        .collect()
}
