//! Price distributions, cost models, and price processes.
//!
//! A [`PriceDistribution`] is a finite list of atoms, optionally smoothed by
//! an independent uniform perturbation of half-width `delta`. With
//! `delta > 0` the cdf is continuous and piecewise linear, which is what the
//! threshold solver requires; with `delta = 0` the distribution is purely
//! discrete. All expectation-style queries (tail gaps, conditional means,
//! pair gaps) are computed exactly by splitting the piecewise-linear density
//! at the relevant breakpoints — no quadrature.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for "probabilities sum to one" at construction.
const PROB_SUM_TOL: f64 = 1e-12;
/// Below this, a conditioning event is treated as impossible.
const MIN_EVENT_PROB: f64 = 1e-15;

/// A nonnegative discrete distribution with an optional uniform perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceDistribution {
    atoms: Vec<(f64, f64)>,
    delta: f64,
}

/// One atom viewed as a unit-weight segment of the perturbed density.
#[derive(Debug, Clone, Copy)]
enum Segment {
    Point { v: f64 },
    Span { a: f64, b: f64 },
}

impl Segment {
    fn mean(self) -> f64 {
        match self {
            Segment::Point { v } => v,
            Segment::Span { a, b } => 0.5 * (a + b),
        }
    }

    /// Pr[X <= x] (right-continuous).
    fn cdf(self, x: f64) -> f64 {
        match self {
            Segment::Point { v } => {
                if x >= v {
                    1.0
                } else {
                    0.0
                }
            }
            Segment::Span { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
        }
    }

    /// Pr[X >= x].
    fn tail(self, x: f64) -> f64 {
        match self {
            Segment::Point { v } => {
                if x <= v {
                    1.0
                } else {
                    0.0
                }
            }
            Segment::Span { a, b } => ((b - x) / (b - a)).clamp(0.0, 1.0),
        }
    }

    /// (mass, first moment) of the part of the segment at or below `z`.
    fn below(self, z: f64) -> (f64, f64) {
        match self {
            Segment::Point { v } => {
                if v <= z {
                    (1.0, v)
                } else {
                    (0.0, 0.0)
                }
            }
            Segment::Span { a, b } => {
                if z <= a {
                    (0.0, 0.0)
                } else if z >= b {
                    (1.0, self.mean())
                } else {
                    let frac = (z - a) / (b - a);
                    (frac, frac * 0.5 * (a + z))
                }
            }
        }
    }

    /// (mass, first moment) of the part of the segment at or above `z`.
    fn above(self, z: f64) -> (f64, f64) {
        match self {
            Segment::Point { v } => {
                if v >= z {
                    (1.0, v)
                } else {
                    (0.0, 0.0)
                }
            }
            Segment::Span { a, b } => {
                if z >= b {
                    (0.0, 0.0)
                } else if z <= a {
                    (1.0, self.mean())
                } else {
                    let frac = (b - z) / (b - a);
                    (frac, frac * 0.5 * (z + b))
                }
            }
        }
    }

    /// E[(t - X)_+] for X in this segment.
    fn gap_below(self, t: f64) -> f64 {
        match self {
            Segment::Point { v } => (t - v).max(0.0),
            Segment::Span { a, b } => {
                if t <= a {
                    0.0
                } else if t >= b {
                    t - self.mean()
                } else {
                    (t - a) * (t - a) / (2.0 * (b - a))
                }
            }
        }
    }

    /// E[(X - t)_+] for X in this segment.
    fn gap_above(self, t: f64) -> f64 {
        match self {
            Segment::Point { v } => (v - t).max(0.0),
            Segment::Span { a, b } => {
                if t >= b {
                    0.0
                } else if t <= a {
                    self.mean() - t
                } else {
                    (b - t) * (b - t) / (2.0 * (b - a))
                }
            }
        }
    }
}

/// E[(A - B)_+] for independent A (this) and B (other), unit weights.
fn segment_pair_gap(cur: Segment, prev: Segment) -> f64 {
    match (cur, prev) {
        (Segment::Point { v }, b) => b.gap_below(v),
        (a, Segment::Point { v }) => a.gap_above(v),
        (Segment::Span { a: a1, b: b1 }, Segment::Span { a: a2, b: b2 }) => {
            // Integrate g(v) = E[(A - v)_+] over B's span; g is linear below
            // a1, quadratic on [a1, b1], zero above b1.
            let m1 = 0.5 * (a1 + b1);
            let len1 = b1 - a1;
            let mut total = 0.0;
            let (lo, hi) = (a2, b2.min(a1));
            if hi > lo {
                total += m1 * (hi - lo) - 0.5 * (hi * hi - lo * lo);
            }
            let (lo, hi) = (a2.max(a1), b2.min(b1));
            if hi > lo {
                let c_lo = b1 - lo;
                let c_hi = b1 - hi;
                total += (c_lo * c_lo * c_lo - c_hi * c_hi * c_hi) / (6.0 * len1);
            }
            total / (b2 - a2)
        }
    }
}

impl PriceDistribution {
    /// Builds a distribution from `(value, probability)` atoms and a
    /// perturbation half-width.
    pub fn new(atoms: Vec<(f64, f64)>, delta: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "delta must be finite and nonnegative, got {delta}"
            )));
        }
        let mut sum = 0.0;
        for &(v, p) in &atoms {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "atom value must be finite and nonnegative, got {v}"
                )));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "atom probability must be finite and nonnegative, got {p}"
                )));
            }
            if delta > 0.0 && v < delta {
                return Err(Error::InvalidDistribution(format!(
                    "atom value {v} < delta {delta} would allow negative prices"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(Self { atoms, delta })
    }

    /// Point mass at `value`.
    pub fn point(value: f64) -> Self {
        Self::new(vec![(value, 1.0)], 0.0).expect("point mass is always valid")
    }

    /// The uniform distribution on [0, 1]: a single atom at 1/2 with
    /// half-width 1/2.
    pub fn uniform01() -> Self {
        Self::new(vec![(0.5, 1.0)], 0.5).expect("uniform01 is valid")
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// True when the perturbed cdf is continuous (perturbed, or a point mass
    /// which the threshold solver handles degenerately).
    pub fn has_continuous_cdf(&self) -> bool {
        self.delta > 0.0
    }

    pub fn min_support(&self) -> f64 {
        let lo = self
            .atoms
            .iter()
            .map(|&(v, _)| v)
            .fold(f64::INFINITY, f64::min);
        (lo - self.delta).max(0.0)
    }

    pub fn max_support(&self) -> f64 {
        let hi = self
            .atoms
            .iter()
            .map(|&(v, _)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        hi + self.delta
    }

    fn segments(&self) -> impl Iterator<Item = (f64, Segment)> + '_ {
        let delta = self.delta;
        self.atoms.iter().map(move |&(v, w)| {
            let seg = if delta > 0.0 {
                Segment::Span {
                    a: v - delta,
                    b: v + delta,
                }
            } else {
                Segment::Point { v }
            };
            (w, seg)
        })
    }

    /// E[X]. The perturbation is symmetric so it does not move the mean.
    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(v, w)| w * v).sum()
    }

    /// Pr[X <= x], right-continuous (continuous when `delta > 0`).
    pub fn cdf(&self, x: f64) -> f64 {
        self.segments().map(|(w, s)| w * s.cdf(x)).sum()
    }

    /// Pr[X >= x]. Equals `1 - cdf(x)` only when there is no atom at `x`.
    pub fn tail_above(&self, x: f64) -> f64 {
        self.segments().map(|(w, s)| w * s.tail(x)).sum()
    }

    /// E[X | X <= z].
    pub fn conditional_mean_below(&self, z: f64) -> Result<f64> {
        let (mass, moment) = self
            .segments()
            .fold((0.0, 0.0), |(m, mo), (w, s)| {
                let (sm, smo) = s.below(z);
                (m + w * sm, mo + w * smo)
            });
        if mass < MIN_EVENT_PROB {
            return Err(Error::ZeroProbabilityEvent(format!("Pr[X <= {z}] = 0")));
        }
        Ok(moment / mass)
    }

    /// E[X | X >= z].
    pub fn conditional_mean_above(&self, z: f64) -> Result<f64> {
        let (mass, moment) = self
            .segments()
            .fold((0.0, 0.0), |(m, mo), (w, s)| {
                let (sm, smo) = s.above(z);
                (m + w * sm, mo + w * smo)
            });
        if mass < MIN_EVENT_PROB {
            return Err(Error::ZeroProbabilityEvent(format!("Pr[X >= {z}] = 0")));
        }
        Ok(moment / mass)
    }

    /// E[(threshold - X)_+].
    pub fn expected_positive_part_gap(&self, threshold: f64) -> f64 {
        self.segments()
            .map(|(w, s)| w * s.gap_below(threshold))
            .sum()
    }

    /// E[(X - threshold)_+].
    pub fn expected_positive_gap_above(&self, threshold: f64) -> f64 {
        self.segments()
            .map(|(w, s)| w * s.gap_above(threshold))
            .sum()
    }

    /// Draws one price: an atom chosen by probability, plus a uniform
    /// perturbation in [-delta, +delta] when delta > 0.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut value = self.atoms[self.atoms.len() - 1].0;
        for &(v, w) in &self.atoms {
            cum += w;
            if u < cum {
                value = v;
                break;
            }
        }
        if self.delta > 0.0 {
            value + rng.random_range(-self.delta..=self.delta)
        } else {
            value
        }
    }
}

/// E[(X_cur - X_prev)_+] for independent draws from the two distributions.
pub fn expected_positive_pair_gap(d_prev: &PriceDistribution, d_cur: &PriceDistribution) -> f64 {
    let mut total = 0.0;
    for (w_cur, seg_cur) in d_cur.segments() {
        for (w_prev, seg_prev) in d_prev.segments() {
            total += w_cur * w_prev * segment_pair_gap(seg_cur, seg_prev);
        }
    }
    total
}

/// The pair `(eps_pi, eps_sigma)`: buying costs `(1+eps_pi)x + eps_sigma`,
/// selling yields `(1-eps_pi)x - eps_sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub eps_pi: f64,
    pub eps_sigma: f64,
}

impl CostModel {
    pub fn new(eps_pi: f64, eps_sigma: f64) -> Result<Self> {
        if !eps_pi.is_finite() || !(0.0..1.0).contains(&eps_pi) {
            return Err(Error::InvalidParameter(format!(
                "eps_pi must lie in [0, 1), got {eps_pi}"
            )));
        }
        if !eps_sigma.is_finite() || eps_sigma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "eps_sigma must be nonnegative, got {eps_sigma}"
            )));
        }
        Ok(Self { eps_pi, eps_sigma })
    }

    pub fn zero() -> Self {
        Self {
            eps_pi: 0.0,
            eps_sigma: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.eps_pi == 0.0 && self.eps_sigma == 0.0
    }

    pub fn buy_price(&self, base: f64) -> f64 {
        (1.0 + self.eps_pi) * base + self.eps_sigma
    }

    /// May be negative; sales below the fee are not clamped.
    pub fn sell_price(&self, base: f64) -> f64 {
        (1.0 - self.eps_pi) * base - self.eps_sigma
    }

    pub fn quote(&self, base: f64) -> PriceQuote {
        PriceQuote {
            base,
            buy_price: self.buy_price(base),
            sell_price: self.sell_price(base),
        }
    }
}

/// Effective buy/sell prices for one base price under a cost model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceQuote {
    pub base: f64,
    pub buy_price: f64,
    pub sell_price: f64,
}

/// Parameters of the adaptive phase adversary (see the `adversary` module).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveSpec {
    /// Additive transaction cost the construction is built around.
    pub eps: f64,
    /// Number of back-to-back phases.
    pub phases: usize,
    /// Lookahead window; each phase price is duplicated `k` times.
    pub k: usize,
}

impl AdaptiveSpec {
    pub fn new(eps: f64, phases: usize, k: usize) -> Result<Self> {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "phase adversary eps must be positive, got {eps}"
            )));
        }
        if phases == 0 {
            return Err(Error::InvalidParameter("phases must be >= 1".into()));
        }
        if k == 0 {
            return Err(Error::InvalidParameter("lookahead k must be >= 1".into()));
        }
        Ok(Self { eps, phases, k })
    }

    /// Upper bound on the number of emitted steps (4 distinct prices per
    /// phase, each duplicated `k` times).
    pub fn max_steps(&self) -> usize {
        4 * self.k * self.phases
    }
}

/// A sequence generator for prices at steps `1..=T`. Conceptual steps 0 and
/// T+1 carry price 0 with probability 1; they are conventions of the engine
/// and the closed forms, not emitted by the process.
#[derive(Debug, Clone)]
pub enum PriceProcess {
    /// Independent draws from per-step distributions; horizon = length.
    Independent { dists: Vec<Arc<PriceDistribution>> },
    /// Independent draws from one distribution at every step.
    Iid {
        dist: PriceDistribution,
        horizon: usize,
    },
    /// A fixed price path (point masses).
    Deterministic { prices: Vec<f64> },
    /// Prices chosen adaptively by the phase adversary.
    Adaptive(AdaptiveSpec),
}

impl PriceProcess {
    pub fn independent(dists: Vec<PriceDistribution>) -> Result<Self> {
        if dists.is_empty() {
            return Err(Error::InvalidParameter(
                "independent sequence must have horizon >= 1".into(),
            ));
        }
        Ok(Self::Independent {
            dists: dists.into_iter().map(Arc::new).collect(),
        })
    }

    pub fn independent_shared(dists: Vec<Arc<PriceDistribution>>) -> Result<Self> {
        if dists.is_empty() {
            return Err(Error::InvalidParameter(
                "independent sequence must have horizon >= 1".into(),
            ));
        }
        Ok(Self::Independent { dists })
    }

    pub fn iid(dist: PriceDistribution, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        Ok(Self::Iid { dist, horizon })
    }

    pub fn deterministic(prices: Vec<f64>) -> Result<Self> {
        if prices.is_empty() {
            return Err(Error::InvalidParameter(
                "deterministic sequence must have at least one price".into(),
            ));
        }
        if let Some(&bad) = prices.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "prices must be finite and nonnegative, got {bad}"
            )));
        }
        Ok(Self::Deterministic { prices })
    }

    /// Number of steps; for the adaptive variant this is the upper bound on
    /// emitted steps (actual length depends on the victim's actions).
    pub fn horizon(&self) -> usize {
        match self {
            Self::Independent { dists } => dists.len(),
            Self::Iid { horizon, .. } => *horizon,
            Self::Deterministic { prices } => prices.len(),
            Self::Adaptive(spec) => spec.max_steps(),
        }
    }

    /// Per-step means for steps `1..=T`. Errors on the adaptive variant.
    pub fn means(&self) -> Result<Vec<f64>> {
        match self {
            Self::Independent { dists } => Ok(dists.iter().map(|d| d.mean()).collect()),
            Self::Iid { dist, horizon } => Ok(vec![dist.mean(); *horizon]),
            Self::Deterministic { prices } => Ok(prices.clone()),
            Self::Adaptive(_) => Err(Error::AdaptiveUnsupported(
                "adaptive prices have no committed means".into(),
            )),
        }
    }

    /// The per-step distributions as a shared sequence. Errors on the
    /// adaptive variant.
    pub fn step_distributions(&self) -> Result<Vec<Arc<PriceDistribution>>> {
        match self {
            Self::Independent { dists } => Ok(dists.clone()),
            Self::Iid { dist, horizon } => {
                let shared = Arc::new(dist.clone());
                Ok(vec![shared; *horizon])
            }
            Self::Deterministic { prices } => Ok(prices
                .iter()
                .map(|&p| Arc::new(PriceDistribution::point(p)))
                .collect()),
            Self::Adaptive(_) => Err(Error::AdaptiveUnsupported(
                "adaptive prices have no per-step distributions".into(),
            )),
        }
    }

    /// Samples a full price path. Errors on the adaptive variant, which must
    /// be driven interactively by the engine.
    pub fn sample_prices<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            Self::Independent { dists } => Ok(dists.iter().map(|d| d.sample(rng)).collect()),
            Self::Iid { dist, horizon } => {
                Ok((0..*horizon).map(|_| dist.sample(rng)).collect())
            }
            Self::Deterministic { prices } => Ok(prices.clone()),
            Self::Adaptive(_) => Err(Error::AdaptiveUnsupported(
                "adaptive prices are generated interactively".into(),
            )),
        }
    }
}

/// On-disk form of a distribution: `{"atoms": [[value, prob], ...], "delta": d}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub atoms: Vec<(f64, f64)>,
    #[serde(default)]
    pub delta: f64,
}

impl DistributionSpec {
    pub fn to_distribution(&self) -> Result<PriceDistribution> {
        PriceDistribution::new(self.atoms.clone(), self.delta)
    }

    pub fn from_distribution(d: &PriceDistribution) -> Self {
        Self {
            atoms: d.atoms().to_vec(),
            delta: d.delta(),
        }
    }

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
}
