//! Online trading policies and the threshold solver.
//!
//! All decision rules are pure: the action depends only on the holding flag,
//! the current market view, and fixed policy parameters. Executed trades are
//! recorded by the engine in a [`TraderState`] whose log alternates buys and
//! sells because at most one unit may be held.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{CostModel, PriceDistribution};

/// What a policy wants to do at the current step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Buy,
    Sell,
    Hold,
}

/// Side of an executed trade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Buy,
    Sell,
}

/// One executed trade at its effective (cost-adjusted) price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeRecord {
    pub step: usize,
    pub side: Side,
    pub effective_price: f64,
}

/// Running position of a trader inside one episode.
#[derive(Debug, Clone)]
pub struct TraderState {
    pub holding: bool,
    pub cash: f64,
    pub trade_log: Vec<TradeRecord>,
}

impl TraderState {
    pub fn new(initial_stock: bool) -> Self {
        Self {
            holding: initial_stock,
            cash: 0.0,
            trade_log: Vec::new(),
        }
    }
}

/// What a policy sees at step `i`: the revealed base price, the mean of the
/// next step's distribution (0 at the final step, by the sentinel
/// convention), and any revealed lookahead prices.
#[derive(Debug, Clone, Copy)]
pub struct MarketView<'a> {
    pub step: usize,
    pub price: f64,
    pub next_mean: f64,
    pub lookahead: &'a [f64],
}

/// Buy-low-sell-high rule: sell when the price beats tomorrow's mean
/// (strictly), buy when it does not (weakly). Ties keep or acquire the stock.
pub fn blsh_decide(holding: bool, view: &MarketView) -> Action {
    if holding {
        if view.price > view.next_mean {
            Action::Sell
        } else {
            Action::Hold
        }
    } else if view.price <= view.next_mean {
        Action::Buy
    } else {
        Action::Hold
    }
}

/// Threshold rule: sell at or above `z_h`, buy at or below `z_l`. When
/// `z_l = z_h` (zero costs) and the price hits the common threshold, the
/// holding flag disambiguates: a held stock is sold.
pub fn bbsa_decide(holding: bool, view: &MarketView, th: &Thresholds) -> Action {
    if holding {
        if view.price >= th.z_h {
            Action::Sell
        } else {
            Action::Hold
        }
    } else if view.price <= th.z_l {
        Action::Buy
    } else {
        Action::Hold
    }
}

/// Margin variant of the buy-low-sell-high rule for i.i.d. prices: trade
/// only when the price clears the (fixed) i.i.d. mean by `margin`. The rule
/// uses the distribution mean at every step, not the engine's sentinel.
pub fn eps_margin_decide(holding: bool, price: f64, iid_mean: f64, margin: f64) -> Action {
    if holding {
        if price >= iid_mean + margin {
            Action::Sell
        } else {
            Action::Hold
        }
    } else if price <= iid_mean - margin {
        Action::Buy
    } else {
        Action::Hold
    }
}

/// An online policy driven by the engine, one decision per revealed price.
pub trait Trader {
    fn decide(&mut self, state: &TraderState, view: &MarketView) -> Action;

    /// Number of revealed future prices the policy requires. The engine
    /// supplies exactly this many (padding with the 0 sentinel at the end of
    /// the horizon).
    fn lookahead(&self) -> usize {
        0
    }
}

impl<T: Trader + ?Sized> Trader for Box<T> {
    fn decide(&mut self, state: &TraderState, view: &MarketView) -> Action {
        (**self).decide(state, view)
    }

    fn lookahead(&self) -> usize {
        (**self).lookahead()
    }
}

/// The buy-low-sell-high trader.
#[derive(Debug, Clone, Copy, Default)]
pub struct Blsh;

impl Trader for Blsh {
    fn decide(&mut self, state: &TraderState, view: &MarketView) -> Action {
        blsh_decide(state.holding, view)
    }
}

/// The threshold trader for i.i.d. prices with transaction costs.
#[derive(Debug, Clone, Copy)]
pub struct Bbsa {
    pub thresholds: Thresholds,
}

impl Bbsa {
    pub fn new(thresholds: Thresholds) -> Self {
        Self { thresholds }
    }

    pub fn solve(dist: &PriceDistribution, cm: &CostModel) -> Result<Self> {
        Ok(Self {
            thresholds: solve_thresholds(dist, cm)?,
        })
    }
}

impl Trader for Bbsa {
    fn decide(&mut self, state: &TraderState, view: &MarketView) -> Action {
        bbsa_decide(state.holding, view, &self.thresholds)
    }
}

/// The margin trader; `iid_mean` is fixed at construction.
#[derive(Debug, Clone, Copy)]
pub struct EpsMargin {
    pub iid_mean: f64,
    pub margin: f64,
}

impl EpsMargin {
    pub fn new(iid_mean: f64, margin: f64) -> Self {
        Self { iid_mean, margin }
    }

    pub fn for_distribution(dist: &PriceDistribution, margin: f64) -> Self {
        Self::new(dist.mean(), margin)
    }
}

impl Trader for EpsMargin {
    fn decide(&mut self, state: &TraderState, view: &MarketView) -> Action {
        eps_margin_decide(state.holding, view.price, self.iid_mean, self.margin)
    }
}

/// Wraps a policy that may only use the current price and the next `k`
/// revealed prices. The policy declares how far it looks (`required`);
/// construction fails if that exceeds the window.
pub struct LookaheadTrader<F> {
    k: usize,
    policy: F,
}

impl<F> LookaheadTrader<F>
where
    F: FnMut(bool, f64, &[f64]) -> Action,
{
    pub fn new(k: usize, required: usize, policy: F) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("lookahead k must be >= 1".into()));
        }
        if required > k {
            return Err(Error::InvalidParameter(format!(
                "policy requires {required} revealed prices but the window is {k}"
            )));
        }
        Ok(Self { k, policy })
    }
}

impl<F> Trader for LookaheadTrader<F>
where
    F: FnMut(bool, f64, &[f64]) -> Action,
{
    fn decide(&mut self, state: &TraderState, view: &MarketView) -> Action {
        (self.policy)(state.holding, view.price, &view.lookahead[..self.k])
    }

    fn lookahead(&self) -> usize {
        self.k
    }
}

/// Buy-low-sell-high evaluated on the revealed next price instead of the
/// next mean: the natural 1-lookahead embedding of [`Blsh`].
#[derive(Debug, Clone, Copy, Default)]
pub struct BlshLookahead;

impl Trader for BlshLookahead {
    fn decide(&mut self, state: &TraderState, view: &MarketView) -> Action {
        let next = view.lookahead[0];
        if state.holding {
            if view.price > next {
                Action::Sell
            } else {
                Action::Hold
            }
        } else if view.price <= next {
            Action::Buy
        } else {
            Action::Hold
        }
    }

    fn lookahead(&self) -> usize {
        1
    }
}

/// Greedy 1-lookahead policy: buy when the revealed next price covers the
/// round-trip cost, sell when the price is about to drop.
#[derive(Debug, Clone, Copy)]
pub struct GreedyLookahead {
    pub round_trip_cost: f64,
}

impl GreedyLookahead {
    pub fn new(cm: &CostModel) -> Self {
        Self {
            round_trip_cost: 2.0 * cm.eps_sigma,
        }
    }
}

impl Trader for GreedyLookahead {
    fn decide(&mut self, state: &TraderState, view: &MarketView) -> Action {
        let next = view.lookahead[0];
        if state.holding {
            if view.price > next {
                Action::Sell
            } else {
                Action::Hold
            }
        } else if next - view.price > self.round_trip_cost {
            Action::Buy
        } else {
            Action::Hold
        }
    }

    fn lookahead(&self) -> usize {
        1
    }
}

/// Buy/sell triggers for [`Bbsa`]: equal tail probabilities (i) and equal
/// effective prices (ii), plus the derived quantities used by the
/// closed-form profit bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub z_l: f64,
    pub z_h: f64,
    /// Common effective price: `z_h(1-eps_pi) - eps_sigma = z_l(1+eps_pi) + eps_sigma`.
    pub v: f64,
    /// `Pr[X <= z_l] = Pr[X >= z_h]`.
    pub p: f64,
    /// `E[X | X <= z_l]`.
    pub v_l: f64,
    /// `E[X | X >= z_h]`.
    pub v_h: f64,
    pub median: f64,
}

/// |f(h)| accepted as a root.
const ROOT_RESIDUAL_TOL: f64 = 1e-10;
/// Target bracket width for the bisection.
const BRACKET_WIDTH_TOL: f64 = 1e-12;

/// Bisection for a nonincreasing function with `f(lo) > 0 >= f(hi)`.
/// Returns the final midpoint.
fn bisect_nonincreasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    debug_assert!(f(lo) > 0.0 && f(hi) <= 0.0);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= BRACKET_WIDTH_TOL {
            return mid.clamp(lo, hi);
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// `l(h)`: the low threshold paired with high threshold `h` by condition (ii).
fn paired_low(h: f64, cm: &CostModel) -> f64 {
    (h * (1.0 - cm.eps_pi) - 2.0 * cm.eps_sigma) / (1.0 + cm.eps_pi)
}

/// The median: `Pr[X >= M] = Pr[X <= M]`.
fn solve_median(d: &PriceDistribution) -> f64 {
    let hi = d.max_support() + 1.0;
    bisect_nonincreasing(|h| d.tail_above(h) - d.cdf(h), 0.0, hi)
}

/// Solves for the thresholds of a distribution under a cost model by
/// bisection on `f(h) = Pr[X >= h] - Pr[X <= l(h)]`.
///
/// Requires a continuous cdf (`delta > 0`). A pure point mass is accepted
/// when the conditions hold degenerately (zero costs); any other
/// discontinuous cdf is rejected unless the bisection happens to land on an
/// exact root, mirroring the perturbation escape hatch.
pub fn solve_thresholds(d: &PriceDistribution, cm: &CostModel) -> Result<Thresholds> {
    if !d.has_continuous_cdf() && d.atoms().len() == 1 {
        let c = d.atoms()[0].0;
        if cm.is_zero() {
            return Ok(Thresholds {
                z_l: c,
                z_h: c,
                v: c,
                p: 1.0,
                v_l: c,
                v_h: c,
                median: c,
            });
        }
        return Err(Error::DiscontinuousCdf(format!(
            "point mass at {c} admits no thresholds under nonzero costs"
        )));
    }

    // f(0) = 1 - Pr[X <= l(0)] > 0 and f(hi) = -Pr[X <= l(hi)] <= 0 at the
    // bracket top, where l(hi) >= max support.
    let hi = d.max_support() + 2.0 * cm.eps_sigma / (1.0 - cm.eps_pi) + 1.0;
    let f = |h: f64| d.tail_above(h) - d.cdf(paired_low(h, cm));
    let z_h = bisect_nonincreasing(f, 0.0, hi);
    let residual = f(z_h);
    if residual.abs() > ROOT_RESIDUAL_TOL {
        return Err(Error::DiscontinuousCdf(format!(
            "no root within tolerance (residual {residual:.3e} at h = {z_h})"
        )));
    }

    let z_l = paired_low(z_h, cm);
    let p = 0.5 * (d.tail_above(z_h) + d.cdf(z_l));
    if p < 1e-12 {
        return Err(Error::DegenerateThresholds(format!(
            "trade probability is 0 at z_l = {z_l}, z_h = {z_h}; the spread \
             exceeds the distribution's support"
        )));
    }
    let v_l = d.conditional_mean_below(z_l)?;
    let v_h = d.conditional_mean_above(z_h)?;
    let v = z_h * (1.0 - cm.eps_pi) - cm.eps_sigma;
    let median = solve_median(d);

    Ok(Thresholds {
        z_l,
        z_h,
        v,
        p,
        v_l,
        v_h,
        median,
    })
}
