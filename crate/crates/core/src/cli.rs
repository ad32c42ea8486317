//! Experiment configuration and the implementations behind the `prophets`
//! command-line tool. Everything here is deterministic: all randomness flows
//! from the configured master seed, and rendered output is byte-identical
//! across repeated runs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::adversary::{gen_appendix_failure, gen_prop_adversarial, gen_prop_iid};
use crate::analysis::{
    self, AppendixReport, CompetitiveEstimate, LowerBoundFamily, LowerBoundReport,
    SweepReport, Theorem2Report,
};
use crate::engine::{monte_carlo, BatchRun, BatchStats};
use crate::error::{Error, Result};
use crate::market::{
    AdaptiveSpec, CostModel, DistributionSpec, PriceDistribution, PriceProcess,
};
use crate::traders::{
    solve_thresholds, Action, Bbsa, Blsh, EpsMargin, LookaheadTrader, Thresholds, Trader,
};

/// Version stamp carried by every serialized output.
pub const SCHEMA_VERSION: u32 = 1;

/// Serialized form of a price process; the `variant` field selects among the
/// explicit constructions and the named generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    /// "iid" | "independent" | "deterministic" | "prop-adv" | "prop-iid" |
    /// "appendix-fail" | "phase"
    pub variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<DistributionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distributions: Option<Vec<DistributionSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

impl ProcessSpec {
    pub fn load(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_string(),
            message: e.to_string(),
        })
    }

    pub fn generator(variant: &str, eps: f64, horizon: usize) -> Self {
        Self {
            variant: variant.to_string(),
            horizon: Some(horizon),
            distribution: None,
            distributions: None,
            prices: None,
            eps: Some(eps),
            phases: None,
            k: None,
        }
    }

    pub fn iid(dist: &PriceDistribution, horizon: usize) -> Self {
        Self {
            variant: "iid".to_string(),
            horizon: Some(horizon),
            distribution: Some(DistributionSpec::from_distribution(dist)),
            distributions: None,
            prices: None,
            eps: None,
            phases: None,
            k: None,
        }
    }

    pub fn with_horizon(&self, horizon: usize) -> Self {
        let mut spec = self.clone();
        spec.horizon = Some(horizon);
        spec
    }

    fn need<T: Copy>(&self, field: &str, value: Option<T>) -> Result<T> {
        value.ok_or_else(|| {
            Error::config(
                field,
                format!("required by instance variant `{}`", self.variant),
            )
        })
    }

    pub fn to_process(&self) -> Result<PriceProcess> {
        match self.variant.as_str() {
            "iid" => {
                let horizon = self.need("horizon", self.horizon)?;
                let dist = self
                    .distribution
                    .as_ref()
                    .ok_or_else(|| Error::config("distribution", "required by variant `iid`"))?
                    .to_distribution()?;
                PriceProcess::iid(dist, horizon)
            }
            "independent" => {
                let specs = self.distributions.as_ref().ok_or_else(|| {
                    Error::config("distributions", "required by variant `independent`")
                })?;
                let dists = specs
                    .iter()
                    .map(|s| s.to_distribution().map(Arc::new))
                    .collect::<Result<Vec<_>>>()?;
                PriceProcess::independent_shared(dists)
            }
            "deterministic" => {
                let prices = self.prices.clone().ok_or_else(|| {
                    Error::config("prices", "required by variant `deterministic`")
                })?;
                PriceProcess::deterministic(prices)
            }
            "prop-adv" => {
                let eps = self.need("eps", self.eps)?;
                let horizon = self.need("horizon", self.horizon)?;
                gen_prop_adversarial(eps, horizon)
            }
            "prop-iid" => {
                let eps = self.need("eps", self.eps)?;
                let horizon = self.need("horizon", self.horizon)?;
                gen_prop_iid(eps, horizon)
            }
            "appendix-fail" => {
                let eps = self.need("eps", self.eps)?;
                let horizon = self.need("horizon", self.horizon)?;
                gen_appendix_failure(eps, horizon)
            }
            "phase" => {
                let eps = self.need("eps", self.eps)?;
                let phases = self.need("phases", self.phases)?;
                let k = self.k.unwrap_or(1);
                Ok(PriceProcess::Adaptive(AdaptiveSpec::new(eps, phases, k)?))
            }
            other => Err(Error::config(
                "instance",
                format!("unknown variant `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub path: String,
    pub format: OutputFormat,
}

/// A full simulation request; the JSON config-file alternative to flags.
/// With `t_grid` set, the run becomes a competitive-ratio fit over the grid
/// instead of a single batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub instance: ProcessSpec,
    /// "blsh" | "bbsa" | "eps-margin" | "lookahead:<k>"
    pub trader: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    pub cost: CostModel,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

impl ExperimentConfig {
    pub fn load(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_string(),
            message: e.to_string(),
        })
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be >= 1"));
        }
        if let Some(eps) = self.instance.eps {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::config(
                    "eps",
                    format!("must lie in (0, 1), got {eps}"),
                ));
            }
        }
        CostModel::new(self.cost.eps_pi, self.cost.eps_sigma)
            .map_err(|e| Error::config("cost", e.to_string()))?;
        if let Some(grid) = &self.t_grid {
            if grid.len() < 3 {
                return Err(Error::config("t_grid", "needs at least 3 horizons"));
            }
        }
        Ok(())
    }
}

/// Builds a reusable trader factory for the configured policy. Parameter
/// resolution (thresholds, means) happens once, up front.
fn build_trader_factory(
    config: &ExperimentConfig,
    process: &PriceProcess,
) -> Result<Box<dyn Fn() -> Box<dyn Trader> + Sync>> {
    let iid_dist = || -> Result<PriceDistribution> {
        match process {
            PriceProcess::Iid { dist, .. } => Ok(dist.clone()),
            _ => Err(Error::config(
                "trader",
                format!("`{}` needs an i.i.d. instance", config.trader),
            )),
        }
    };
    match config.trader.as_str() {
        "blsh" => Ok(Box::new(|| Box::new(Blsh))),
        "bbsa" => {
            let th = solve_thresholds(&iid_dist()?, &config.cost)?;
            Ok(Box::new(move || Box::new(Bbsa::new(th))))
        }
        "eps-margin" => {
            let margin = config
                .margin
                .or(config.instance.eps)
                .ok_or_else(|| Error::config("margin", "required by trader `eps-margin`"))?;
            let mean = iid_dist()?.mean();
            Ok(Box::new(move || Box::new(EpsMargin::new(mean, margin))))
        }
        name => {
            if let Some(window) = name.strip_prefix("lookahead:") {
                let k: usize = window.parse().map_err(|_| {
                    Error::config("trader", format!("bad lookahead window in `{name}`"))
                })?;
                let round_trip = 2.0 * config.cost.eps_sigma;
                let make = move || {
                    LookaheadTrader::new(k, 1, move |holding, price, reveal: &[f64]| {
                        if holding {
                            if price > reveal[0] {
                                Action::Sell
                            } else {
                                Action::Hold
                            }
                        } else if reveal[0] - price > round_trip {
                            Action::Buy
                        } else {
                            Action::Hold
                        }
                    })
                };
                make().map_err(|e| Error::config("trader", e.to_string()))?;
                Ok(Box::new(move || {
                    Box::new(make().expect("validated at build time"))
                }))
            } else {
                Err(Error::config(
                    "trader",
                    format!(
                        "unknown trader `{name}` (expected blsh, bbsa, eps-margin, \
                         or lookahead:<k>)"
                    ),
                ))
            }
        }
    }
}

/// Outcome of `simulate`: a single batch, or a ratio fit when `t_grid` is set.
#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<BatchStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<CompetitiveEstimate>,
}

pub fn cmd_simulate(config: &ExperimentConfig) -> Result<SimulateReport> {
    config.validate()?;
    if let Some(grid) = config.t_grid.clone() {
        let probe = config.instance.with_horizon(grid[0]).to_process()?;
        let factory = build_trader_factory(config, &probe)?;
        let estimate = analysis::estimate_competitive_ratio_monte_carlo(
            |t| config.instance.with_horizon(t).to_process(),
            factory,
            &config.cost,
            &grid,
            config.trials,
            config.master_seed,
        )?;
        if let Some(output) = &config.output {
            write_estimate(output, config, &estimate)?;
        }
        return Ok(SimulateReport {
            schema_version: SCHEMA_VERSION,
            config: config.clone(),
            stats: None,
            estimate: Some(estimate),
        });
    }

    let process = config.instance.to_process()?;
    let factory = build_trader_factory(config, &process)?;
    let batch = monte_carlo(
        &process,
        factory,
        &config.cost,
        config.trials,
        config.master_seed,
    )?;
    if let Some(output) = &config.output {
        write_batch(output, config, &batch)?;
    }
    Ok(SimulateReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        stats: Some(batch.stats),
        estimate: None,
    })
}

fn write_batch(output: &OutputSpec, config: &ExperimentConfig, batch: &BatchRun) -> Result<()> {
    let bytes = match output.format {
        OutputFormat::Csv => {
            let mut text = String::from("trial,seed,alg_profit,opt_profit\n");
            for r in &batch.records {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    r.trial, r.seed, r.alg_profit, r.opt_profit
                ));
            }
            text
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct BatchDoc<'a> {
                schema_version: u32,
                config: &'a ExperimentConfig,
                stats: &'a BatchStats,
                records: &'a [crate::engine::TrialRecord],
            }
            let doc = BatchDoc {
                schema_version: SCHEMA_VERSION,
                config,
                stats: &batch.stats,
                records: &batch.records,
            };
            serde_json::to_string_pretty(&doc).expect("batch serialization cannot fail") + "\n"
        }
    };
    std::fs::write(&output.path, bytes).map_err(|source| Error::Io {
        path: output.path.clone(),
        source,
    })
}

fn write_estimate(
    output: &OutputSpec,
    config: &ExperimentConfig,
    estimate: &CompetitiveEstimate,
) -> Result<()> {
    let bytes = match output.format {
        OutputFormat::Csv => {
            let mut text = String::from("t,e_alg,e_opt\n");
            for ((t, a), o) in estimate
                .t_grid
                .iter()
                .zip(&estimate.e_alg)
                .zip(&estimate.e_opt)
            {
                text.push_str(&format!("{t},{a},{o}\n"));
            }
            text
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct EstimateDoc<'a> {
                schema_version: u32,
                config: &'a ExperimentConfig,
                estimate: &'a CompetitiveEstimate,
            }
            serde_json::to_string_pretty(&EstimateDoc {
                schema_version: SCHEMA_VERSION,
                config,
                estimate,
            })
            .expect("estimate serialization cannot fail")
                + "\n"
        }
    };
    std::fs::write(&output.path, bytes).map_err(|source| Error::Io {
        path: output.path.clone(),
        source,
    })
}

impl SimulateReport {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "simulate instance={} trader={} trials={} seed={}\n",
            self.config.instance.variant,
            self.config.trader,
            self.config.trials,
            self.config.master_seed
        ));
        if let Some(s) = &self.stats {
            out.push_str(&format!(
                "alg_mean={} alg_se={}\nopt_mean={} opt_se={}\nratio={} ratio_se={}\n",
                s.alg_mean, s.alg_se, s.opt_mean, s.opt_se, s.ratio, s.ratio_se
            ));
        }
        if let Some(e) = &self.estimate {
            out.push_str(&format!(
                "alpha_hat={} c_hat={} alpha_se={} c_se={} residual_norm={}\n",
                e.alpha_hat, e.c_hat, e.alpha_se, e.c_se, e.residual_norm
            ));
            for ((t, a), o) in e.t_grid.iter().zip(&e.e_alg).zip(&e.e_opt) {
                out.push_str(&format!("T={t} e_alg={a} e_opt={o}\n"));
            }
        }
        out
    }
}

/// The verification suites runnable from the CLI.
#[derive(Debug)]
pub enum VerifyRequest {
    Theorem1 {
        instances: usize,
        max_t: usize,
        max_atoms: usize,
        seed: u64,
    },
    Theorem2 {
        dist: PriceDistribution,
        cost: CostModel,
        t: usize,
        trials: usize,
        seed: u64,
    },
    LowerBound {
        family: LowerBoundFamily,
        eps: f64,
        t: usize,
        mc: Option<(usize, u64)>,
    },
    Appendix {
        eps: f64,
        t: usize,
        phases: usize,
        k: usize,
        trials: usize,
        seed: u64,
    },
}

/// A completed verification with its pass flag and rendered table.
#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VerifyReport {
    Theorem1 {
        schema_version: u32,
        general: SweepReport,
        equal_means: SweepReport,
    },
    Theorem2 {
        schema_version: u32,
        report: Theorem2Report,
    },
    LowerBound {
        schema_version: u32,
        report: LowerBoundReport,
    },
    Appendix {
        schema_version: u32,
        report: AppendixReport,
    },
}

pub fn cmd_verify(request: &VerifyRequest) -> Result<VerifyReport> {
    match request {
        VerifyRequest::Theorem1 {
            instances,
            max_t,
            max_atoms,
            seed,
        } => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
            let (general, equal_means) =
                analysis::verify_theorem1(&mut rng, *instances, *max_t, *max_atoms)?;
            Ok(VerifyReport::Theorem1 {
                schema_version: SCHEMA_VERSION,
                general,
                equal_means,
            })
        }
        VerifyRequest::Theorem2 {
            dist,
            cost,
            t,
            trials,
            seed,
        } => Ok(VerifyReport::Theorem2 {
            schema_version: SCHEMA_VERSION,
            report: analysis::verify_theorem2(dist, cost, *t, *trials, *seed)?,
        }),
        VerifyRequest::LowerBound { family, eps, t, mc } => Ok(VerifyReport::LowerBound {
            schema_version: SCHEMA_VERSION,
            report: analysis::verify_lowerbound(*family, *eps, *t, *mc)?,
        }),
        VerifyRequest::Appendix {
            eps,
            t,
            phases,
            k,
            trials,
            seed,
        } => Ok(VerifyReport::Appendix {
            schema_version: SCHEMA_VERSION,
            report: analysis::verify_appendix(*eps, *t, *phases, *k, *trials, *seed)?,
        }),
    }
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        match self {
            VerifyReport::Theorem1 {
                general,
                equal_means,
                ..
            } => general.pass && equal_means.pass,
            VerifyReport::Theorem2 { report, .. } => report.pass,
            VerifyReport::LowerBound { report, .. } => report.pass,
            VerifyReport::Appendix { report, .. } => report.pass,
        }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        match self {
            VerifyReport::Theorem1 {
                general,
                equal_means,
                ..
            } => {
                out.push_str(&format!(
                    "theorem1 general:     instances={} violations={} min_slack={} {}\n",
                    general.instances,
                    general.violations,
                    general.min_slack,
                    pass_str(general.pass)
                ));
                out.push_str(&format!(
                    "theorem1 equal-means: instances={} violations={} min_slack={} {}\n",
                    equal_means.instances,
                    equal_means.violations,
                    equal_means.min_slack,
                    pass_str(equal_means.pass)
                ));
            }
            VerifyReport::Theorem2 { report: r, .. } => {
                out.push_str(&format!(
                    "theorem2 T={} trials={} z_l={} z_h={} v={} p={}\n",
                    r.t,
                    r.trials,
                    r.thresholds.z_l,
                    r.thresholds.z_h,
                    r.thresholds.v,
                    r.thresholds.p
                ));
                out.push_str(&format!(
                    "alg: mean={} se={} floor={} {}\n",
                    r.alg_mean,
                    r.alg_se,
                    r.alg_floor,
                    pass_str(r.pass_alg)
                ));
                out.push_str(&format!(
                    "opt: mean={} se={} ceiling={} {}\n",
                    r.opt_mean,
                    r.opt_se,
                    r.opt_ceiling,
                    pass_str(r.pass_opt)
                ));
                out.push_str(&format!(
                    "chain: opt_mean={} <= v + 2*alg_mean = {} {}\n",
                    r.opt_mean,
                    r.chain_rhs,
                    pass_str(r.pass_chain)
                ));
            }
            VerifyReport::LowerBound { report: r, .. } => {
                out.push_str(&format!(
                    "lowerbound family={:?} eps={} T={}\n",
                    r.family, r.eps, r.t
                ));
                out.push_str(&format!(
                    "e_opt={} e_alg={} ratio={} floor={} {}\n",
                    r.e_opt,
                    r.e_alg,
                    r.ratio,
                    r.floor,
                    pass_str(r.pass)
                ));
                if let (Some(mc), Some(ok)) = (&r.mc, r.mc_pass) {
                    out.push_str(&format!(
                        "mc: alg_mean={} opt_mean={} trials={} {}\n",
                        mc.alg_mean,
                        mc.opt_mean,
                        mc.trials,
                        pass_str(ok)
                    ));
                }
            }
            VerifyReport::Appendix { report: r, .. } => {
                out.push_str(&format!(
                    "appendix phases={} eps={} blsh_victim={} greedy_victim={} prophet={} {}\n",
                    r.phases,
                    r.eps,
                    r.blsh_victim_profit,
                    r.greedy_victim_profit,
                    r.prophet_profit,
                    pass_str(r.pass_phase)
                ));
                out.push_str(&format!(
                    "margin T={} alg_mean={} cap={} opt_mean={} floor={} ratio_floor={} {}\n",
                    r.t,
                    r.margin_alg_mean,
                    r.margin_cap,
                    r.opt_mean,
                    r.opt_floor,
                    r.ratio_floor,
                    pass_str(r.pass_margin)
                ));
            }
        }
        out
    }

    pub fn write_json(&self, path: &str) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        std::fs::write(path, text + "\n").map_err(|source| Error::Io {
            path: path.to_string(),
            source,
        })
    }
}

fn pass_str(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Thresholds for a distribution under a cost model, with the residuals of
/// both defining conditions.
#[derive(Debug, Serialize)]
pub struct ThresholdsReport {
    pub schema_version: u32,
    pub thresholds: Thresholds,
    pub residual_tail_balance: f64,
    pub residual_price_balance: f64,
}

pub fn cmd_thresholds(dist: &PriceDistribution, cm: &CostModel) -> Result<ThresholdsReport> {
    let th = solve_thresholds(dist, cm)?;
    let residual_tail_balance = (dist.tail_above(th.z_h) - dist.cdf(th.z_l)).abs();
    let residual_price_balance = (th.z_h * (1.0 - cm.eps_pi)
        - cm.eps_sigma
        - (th.z_l * (1.0 + cm.eps_pi) + cm.eps_sigma))
        .abs();
    Ok(ThresholdsReport {
        schema_version: SCHEMA_VERSION,
        thresholds: th,
        residual_tail_balance,
        residual_price_balance,
    })
}

impl ThresholdsReport {
    pub fn render_text(&self) -> String {
        let t = &self.thresholds;
        format!(
            "z_l={} z_h={} v={} p={} v_l={} v_h={} median={}\n\
             residual_tail_balance={} residual_price_balance={}\n",
            t.z_l,
            t.z_h,
            t.v,
            t.p,
            t.v_l,
            t.v_h,
            t.median,
            self.residual_tail_balance,
            self.residual_price_balance
        )
    }
}

/// Resolves `--dist`: a built-in name or a path to a distribution spec file.
pub fn resolve_distribution(name_or_path: &str) -> Result<PriceDistribution> {
    match name_or_path {
        "uniform01" => Ok(PriceDistribution::uniform01()),
        path => DistributionSpec::load(path)?.to_distribution(),
    }
}
