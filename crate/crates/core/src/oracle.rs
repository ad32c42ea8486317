//! Offline prophet profit: exact per-realization optima (with and without
//! transaction costs) and closed-form expectations.
//!
//! The prophet starts with one unit of stock endowed free (the conceptual
//! step-0 purchase at price 0, exempt from fees) and any unit still held at
//! the end expires worthless. Under zero costs this matches the telescoping
//! sum of positive price increments; with costs the optimum is computed by a
//! two-state dynamic program over (holding, not holding).

use crate::error::{Error, Result};
use crate::market::{
    expected_positive_pair_gap, CostModel, PriceDistribution, PriceProcess,
};
use crate::traders::Thresholds;

/// Maximum horizon accepted by the exponential brute-force oracle.
pub const BRUTE_FORCE_MAX_T: usize = 20;

/// Realized base prices for steps `1..=T`; steps 0 and T+1 carry price 0.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::len_without_is_empty)] // never empty by construction
pub struct Realization {
    prices: Vec<f64>,
}

impl Realization {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if prices.is_empty() {
            return Err(Error::InvalidParameter(
                "realization must contain at least one price".into(),
            ));
        }
        if let Some(&bad) = prices.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "realized prices must be finite and nonnegative, got {bad}"
            )));
        }
        Ok(Self { prices })
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    /// Number of steps; at least 1 by construction.
    pub fn len(&self) -> usize {
        self.prices.len()
    }
}

/// Zero-cost prophet profit: the telescoping sum of positive increments,
/// with the free initial purchase at the step-0 sentinel.
pub fn opt_telescoping(r: &Realization, cm: &CostModel) -> Result<f64> {
    if !cm.is_zero() {
        return Err(Error::NonzeroCosts {
            eps_pi: cm.eps_pi,
            eps_sigma: cm.eps_sigma,
        });
    }
    let mut prev = 0.0;
    let mut total = 0.0;
    for &x in &r.prices {
        total += (x - prev).max(0.0);
        prev = x;
    }
    Ok(total)
}

/// Maximum profit over all feasible trade sequences under a cost model,
/// holding at most one unit. `initial_stock` endows one unit at cost 0;
/// terminal inventory expires worthless (it is never force-sold).
pub fn opt_with_costs_dp(r: &Realization, cm: &CostModel, initial_stock: bool) -> f64 {
    // Best cash when holding / not holding. Not-holding is unreachable at
    // the start when endowed: one unit max means no purchase before a sale.
    let (mut hold, mut empty) = if initial_stock {
        (0.0, f64::NEG_INFINITY)
    } else {
        (f64::NEG_INFINITY, 0.0)
    };
    for &x in &r.prices {
        let buy = cm.buy_price(x);
        let sell = cm.sell_price(x);
        let new_hold = hold.max(empty - buy);
        let new_empty = empty.max(hold + sell);
        hold = new_hold;
        empty = new_empty;
    }
    hold.max(empty)
}

/// Exhaustive enumeration of all alternating buy/sell time subsets.
/// Exponential by design; the independent cross-check for the DP.
pub fn opt_bruteforce(r: &Realization, cm: &CostModel, initial_stock: bool) -> Result<f64> {
    let t = r.len();
    if t > BRUTE_FORCE_MAX_T {
        return Err(Error::HorizonTooLarge {
            got: t,
            max: BRUTE_FORCE_MAX_T,
        });
    }
    let mut best = 0.0f64; // empty trade set
    for mask in 1u32..(1u32 << t) {
        let mut holding = initial_stock;
        let mut cash = 0.0;
        for (i, &x) in r.prices.iter().enumerate() {
            if mask & (1 << i) != 0 {
                if holding {
                    cash += cm.sell_price(x);
                } else {
                    cash -= cm.buy_price(x);
                }
                holding = !holding;
            }
        }
        best = best.max(cash);
    }
    Ok(best)
}

/// Closed-form E[OPT] for zero costs: the sum of expected positive pair
/// gaps over consecutive independent steps, with the step-0 sentinel.
pub fn expected_opt_zero_cost(process: &PriceProcess) -> Result<f64> {
    match process {
        PriceProcess::Adaptive(_) => Err(Error::AdaptiveUnsupported(
            "expected_opt_zero_cost needs committed distributions".into(),
        )),
        PriceProcess::Iid { dist, horizon } => {
            let step = expected_positive_pair_gap(dist, dist);
            Ok(dist.mean() + (*horizon as f64 - 1.0) * step)
        }
        _ => {
            let dists = process.step_distributions()?;
            let sentinel = PriceDistribution::point(0.0);
            let mut prev: &PriceDistribution = &sentinel;
            let mut total = 0.0;
            for d in &dists {
                total += expected_positive_pair_gap(prev, d);
                prev = d;
            }
            Ok(total)
        }
    }
}

/// The relaxed-prophet upper bound for i.i.d. prices with costs:
/// `v + p T [v_H (1-eps_pi) - v_L (1+eps_pi) - 2 eps_sigma]`.
pub fn expected_opt_upper_bound_iid_costs(cm: &CostModel, t: usize, th: &Thresholds) -> f64 {
    th.v + th.p * t as f64 * per_round_trade_value(cm, th)
}

/// `v_H (1-eps_pi) - v_L (1+eps_pi) - 2 eps_sigma`: the value extracted per
/// unit of trade probability in the threshold analysis.
pub fn per_round_trade_value(cm: &CostModel, th: &Thresholds) -> f64 {
    th.v_h * (1.0 - cm.eps_pi) - th.v_l * (1.0 + cm.eps_pi) - 2.0 * cm.eps_sigma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::PriceDistribution;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn r(prices: &[f64]) -> Realization {
        Realization::new(prices.to_vec()).unwrap()
    }

    #[test]
    fn telescoping_examples_match_brute_force() {
        let zero = CostModel::zero();
        for prices in [vec![1.0, 3.0, 2.0, 5.0], vec![4.5], vec![5.0, 4.0, 3.0]] {
            let real = r(&prices);
            let tel = opt_telescoping(&real, &zero).unwrap();
            let brute = opt_bruteforce(&real, &zero, true).unwrap();
            assert_relative_eq!(tel, brute, epsilon = 1e-12);
        }
        assert_relative_eq!(
            opt_telescoping(&r(&[1.0, 3.0, 2.0, 5.0]), &zero).unwrap(),
            6.0
        );
        assert_relative_eq!(opt_telescoping(&r(&[4.5]), &zero).unwrap(), 4.5);
        assert_relative_eq!(opt_telescoping(&r(&[5.0, 4.0, 3.0]), &zero).unwrap(), 5.0);
    }

    #[test]
    fn telescoping_rejects_nonzero_costs() {
        let cm = CostModel::new(0.1, 0.0).unwrap();
        assert!(matches!(
            opt_telescoping(&r(&[1.0]), &cm),
            Err(Error::NonzeroCosts { .. })
        ));
    }

    #[test]
    fn dp_with_additive_costs() {
        let cm1 = CostModel::new(0.0, 1.0).unwrap();
        assert_relative_eq!(opt_with_costs_dp(&r(&[1.0, 5.0]), &cm1, true), 4.0);
        assert_relative_eq!(
            opt_with_costs_dp(&r(&[1.0, 5.0]), &cm1, true),
            opt_bruteforce(&r(&[1.0, 5.0]), &cm1, true).unwrap()
        );
        let cm3 = CostModel::new(0.0, 3.0).unwrap();
        assert_relative_eq!(opt_with_costs_dp(&r(&[1.0, 5.0]), &cm3, true), 2.0);
    }

    #[test]
    fn dp_zero_cost_equals_telescoping() {
        let zero = CostModel::zero();
        let cases = [
            vec![1.0, 3.0, 2.0, 5.0],
            vec![0.0, 0.0, 0.0],
            vec![2.0, 1.0, 3.0],
            vec![7.0],
        ];
        for prices in cases {
            let real = r(&prices);
            assert_relative_eq!(
                opt_with_costs_dp(&real, &zero, true),
                opt_telescoping(&real, &zero).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn all_zero_prices_yield_zero_profit() {
        let cm = CostModel::new(0.2, 0.5).unwrap();
        assert_relative_eq!(opt_with_costs_dp(&r(&[0.0, 0.0, 0.0]), &cm, true), 0.0);
        assert_relative_eq!(
            opt_bruteforce(&r(&[0.0, 0.0, 0.0]), &cm, true).unwrap(),
            0.0
        );
    }

    #[test]
    fn brute_force_rejects_long_horizons() {
        let prices = vec![1.0; 21];
        assert!(matches!(
            opt_bruteforce(&r(&prices), &CostModel::zero(), true),
            Err(Error::HorizonTooLarge { got: 21, max: 20 })
        ));
    }

    #[test]
    fn dp_matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let t = rng.random_range(1..=12);
            let prices: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..10.0)).collect();
            let cm = CostModel::new(rng.random_range(0.0..0.5), rng.random_range(0.0..1.0))
                .unwrap();
            let initial = rng.random();
            let real = Realization::new(prices).unwrap();
            let dp = opt_with_costs_dp(&real, &cm, initial);
            let brute = opt_bruteforce(&real, &cm, initial).unwrap();
            assert!(
                (dp - brute).abs() <= 1e-9,
                "dp {dp} != brute {brute} on {real:?} with {cm:?}"
            );
        }
    }

    #[test]
    fn expected_opt_for_lower_bound_instance() {
        // eps = 0.25, T = 4: odd/even alternating two-atom distributions.
        let odd = PriceDistribution::new(vec![(4.0, 0.75), (0.0, 0.25)], 0.0).unwrap();
        let even = PriceDistribution::new(vec![(3.0, 0.75), (7.0, 0.25)], 0.0).unwrap();
        let process = PriceProcess::independent(vec![
            odd.clone(),
            even.clone(),
            odd.clone(),
            even.clone(),
        ])
        .unwrap();
        assert_relative_eq!(
            expected_opt_zero_cost(&process).unwrap(),
            6.6875,
            epsilon = 1e-12
        );
    }

    #[test]
    fn expected_opt_iid_per_step_term() {
        // Three-atom i.i.d. instance at eps = 0.2: per-step pair gap 0.09.
        let eps = 0.2f64;
        let d = PriceDistribution::new(
            vec![(1.0, eps / 2.0), (0.5, 1.0 - eps), (0.0, eps / 2.0)],
            0.0,
        )
        .unwrap();
        assert_relative_eq!(
            expected_positive_pair_gap(&d, &d),
            0.09,
            epsilon = 1e-12
        );
        let process = PriceProcess::iid(d.clone(), 11).unwrap();
        assert_relative_eq!(
            expected_opt_zero_cost(&process).unwrap(),
            0.5 + 10.0 * 0.09,
            epsilon = 1e-12
        );
    }

    #[test]
    fn expected_opt_single_point_mass() {
        let process = PriceProcess::iid(PriceDistribution::point(3.25), 1).unwrap();
        assert_relative_eq!(expected_opt_zero_cost(&process).unwrap(), 3.25);
    }

    #[test]
    fn expected_opt_rejects_adaptive() {
        let spec = crate::market::AdaptiveSpec::new(0.1, 10, 1).unwrap();
        assert!(matches!(
            expected_opt_zero_cost(&PriceProcess::Adaptive(spec)),
            Err(Error::AdaptiveUnsupported(_))
        ));
    }

    fn uniform01_thresholds_with_sigma() -> Thresholds {
        Thresholds {
            z_l: 0.4,
            z_h: 0.6,
            v: 0.5,
            p: 0.4,
            v_l: 0.2,
            v_h: 0.8,
            median: 0.5,
        }
    }

    #[test]
    fn relaxed_prophet_bound_examples() {
        let th = uniform01_thresholds_with_sigma();
        let cm = CostModel::new(0.0, 0.1).unwrap();
        assert_relative_eq!(
            expected_opt_upper_bound_iid_costs(&cm, 100, &th),
            16.5,
            epsilon = 1e-12
        );
        assert_relative_eq!(expected_opt_upper_bound_iid_costs(&cm, 0, &th), th.v);

        // Zero costs: median thresholds, bound M + (T/2)(v_H - v_L).
        let zero_th = Thresholds {
            z_l: 0.5,
            z_h: 0.5,
            v: 0.5,
            p: 0.5,
            v_l: 0.25,
            v_h: 0.75,
            median: 0.5,
        };
        let zero = CostModel::zero();
        assert_relative_eq!(
            expected_opt_upper_bound_iid_costs(&zero, 100, &zero_th),
            0.5 + 50.0 * 0.5,
            epsilon = 1e-12
        );
    }

    proptest! {
        /// Raising either cost never increases the optimum.
        #[test]
        fn dp_monotone_in_costs(
            prices in proptest::collection::vec(0.0f64..10.0, 1..=15),
            eps_pi in 0.0f64..0.5,
            eps_sigma in 0.0f64..1.0,
            bump_pi in 0.0f64..0.4,
            bump_sigma in 0.0f64..1.0,
        ) {
            let real = Realization::new(prices).unwrap();
            let base = CostModel::new(eps_pi, eps_sigma).unwrap();
            let worse = CostModel::new(eps_pi + bump_pi, eps_sigma + bump_sigma).unwrap();
            let p_base = opt_with_costs_dp(&real, &base, true);
            let p_worse = opt_with_costs_dp(&real, &worse, true);
            prop_assert!(p_worse <= p_base + 1e-9);
        }

        /// The Monte Carlo mean of the telescoping optimum converges to the
        /// closed form.
        #[test]
        fn expected_opt_matches_sampling(seed in 0u64..50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d1 = PriceDistribution::new(vec![(2.0, 0.5), (6.0, 0.5)], 0.0).unwrap();
            let d2 = PriceDistribution::new(vec![(1.0, 0.25), (3.0, 0.75)], 0.0).unwrap();
            let process = PriceProcess::independent(vec![d1, d2]).unwrap();
            let closed = expected_opt_zero_cost(&process).unwrap();
            let zero = CostModel::zero();
            let trials = 20_000;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..trials {
                let prices = process.sample_prices(&mut rng).unwrap();
                let v = opt_telescoping(&Realization::new(prices).unwrap(), &zero).unwrap();
                sum += v;
                sum_sq += v * v;
            }
            let mean = sum / trials as f64;
            let var = (sum_sq / trials as f64 - mean * mean).max(0.0);
            let se = (var / trials as f64).sqrt().max(1e-12);
            prop_assert!((mean - closed).abs() <= 5.0 * se,
                "mc {} vs closed {} (se {})", mean, closed, se);
        }
    }
}
