//! Exact reference computations for small discrete instances, used to
//! cross-check the closed forms and the simulation path: backward induction
//! over every online policy, and exact expectation of a fixed policy by
//! enumerating all price paths.
//!
//! Both require purely discrete distributions (`delta = 0`); the
//! path-enumeration cost is the product of atom counts.

use crate::error::{Error, Result};
use crate::market::{CostModel, PriceProcess};
use crate::traders::{Action, MarketView};

const MAX_PATHS: u128 = 2_000_000;

fn discrete_dists(
    process: &PriceProcess,
) -> Result<Vec<std::sync::Arc<crate::market::PriceDistribution>>> {
    let dists = process.step_distributions()?;
    if let Some(d) = dists.iter().find(|d| d.delta() > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "exact enumeration requires delta = 0, got delta = {}",
            d.delta()
        )));
    }
    Ok(dists)
}

/// The exact optimal expected profit over all online policies, by backward
/// induction on (step, holding). The optimal policy is Markov in the current
/// price and holding flag because the steps are independent.
pub fn best_online_expected_profit(
    process: &PriceProcess,
    cm: &CostModel,
    initial_stock: bool,
) -> Result<f64> {
    let dists = discrete_dists(process)?;
    // value[h] = expected profit-to-go entering the step with holding = h.
    let mut value = [0.0f64; 2]; // beyond the horizon: inventory expires
    for dist in dists.iter().rev() {
        let mut next = [0.0f64; 2];
        for &(x, w) in dist.atoms() {
            let sell = cm.sell_price(x) + value[0];
            let keep = value[1];
            next[1] += w * sell.max(keep);
            let buy = -cm.buy_price(x) + value[1];
            let pass = value[0];
            next[0] += w * buy.max(pass);
        }
        value = next;
    }
    Ok(value[usize::from(initial_stock)])
}

/// The exact expected profit of a fixed decision rule, by enumerating every
/// atom combination. The rule sees the same view the engine would supply
/// (sentinel next-mean of 0 at the last step, no lookahead).
pub fn policy_expected_profit(
    process: &PriceProcess,
    cm: &CostModel,
    mut decide: impl FnMut(bool, &MarketView) -> Action,
) -> Result<f64> {
    let dists = discrete_dists(process)?;
    let paths: u128 = dists.iter().map(|d| d.atoms().len() as u128).product();
    if paths > MAX_PATHS {
        return Err(Error::InvalidParameter(format!(
            "instance has {paths} price paths, exceeding the enumeration \
             limit {MAX_PATHS}"
        )));
    }
    let means: Vec<f64> = dists.iter().map(|d| d.mean()).collect();
    let t = dists.len();

    // Iterative depth-first walk over atom indices.
    let mut total = 0.0;
    let mut stack: Vec<(usize, bool, f64, f64)> = vec![(0, true, 0.0, 1.0)];
    while let Some((i, holding, cash, prob)) = stack.pop() {
        if i == t {
            total += prob * cash;
            continue;
        }
        let next_mean = if i + 1 < t { means[i + 1] } else { 0.0 };
        for &(x, w) in dists[i].atoms() {
            let view = MarketView {
                step: i + 1,
                price: x,
                next_mean,
                lookahead: &[],
            };
            let (mut holding2, mut cash2) = (holding, cash);
            match decide(holding, &view) {
                Action::Buy => {
                    if holding {
                        return Err(Error::InfeasibleAction {
                            step: i + 1,
                            action: "buy",
                            state: "holding",
                        });
                    }
                    cash2 -= cm.buy_price(x);
                    holding2 = true;
                }
                Action::Sell => {
                    if !holding {
                        return Err(Error::InfeasibleAction {
                            step: i + 1,
                            action: "sell",
                            state: "empty",
                        });
                    }
                    cash2 += cm.sell_price(x);
                    holding2 = false;
                }
                Action::Hold => {}
            }
            stack.push((i + 1, holding2, cash2, prob * w));
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{expected_alg_blsh, instances};
    use crate::market::PriceDistribution;
    use crate::oracle::expected_opt_zero_cost;
    use crate::traders::blsh_decide;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_discrete_process(rng: &mut ChaCha8Rng, max_t: usize) -> PriceProcess {
        loop {
            let p = instances::random_independent_process(rng, max_t, 3);
            let dists = p.step_distributions().unwrap();
            if dists.iter().all(|d| d.delta() == 0.0) {
                return p;
            }
        }
    }

    #[test]
    fn backward_induction_matches_the_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let zero = CostModel::zero();
        for _ in 0..40 {
            let process = random_discrete_process(&mut rng, 6);
            let exact = best_online_expected_profit(&process, &zero, true).unwrap();
            let closed = expected_alg_blsh(&process, &zero).unwrap();
            assert!(
                (exact - closed).abs() <= 1e-9,
                "backward induction {exact} vs closed form {closed} on {process:?}"
            );
        }
    }

    #[test]
    fn blsh_attains_the_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let zero = CostModel::zero();
        for _ in 0..40 {
            let process = random_discrete_process(&mut rng, 6);
            let exact = best_online_expected_profit(&process, &zero, true).unwrap();
            let blsh = policy_expected_profit(&process, &zero, blsh_decide).unwrap();
            assert!(
                (blsh - exact).abs() <= 1e-9,
                "blsh {blsh} vs optimum {exact} on {process:?}"
            );
        }
    }

    #[test]
    fn deterministic_sequences_are_solved_exactly() {
        let process = PriceProcess::deterministic(vec![1.0, 4.0, 2.0, 8.0]).unwrap();
        let zero = CostModel::zero();
        let exact = best_online_expected_profit(&process, &zero, true).unwrap();
        assert_relative_eq!(exact, expected_opt_zero_cost(&process).unwrap());
    }

    #[test]
    fn suboptimal_policies_are_dominated() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cm = CostModel::new(0.1, 0.05).unwrap();
        for _ in 0..20 {
            let process = random_discrete_process(&mut rng, 5);
            let exact = best_online_expected_profit(&process, &cm, true).unwrap();
            // A lazy policy: sell whenever the price is positive, never buy.
            let lazy = policy_expected_profit(&process, &cm, |holding, view| {
                if holding && view.price > 0.0 {
                    Action::Sell
                } else {
                    Action::Hold
                }
            })
            .unwrap();
            assert!(lazy <= exact + 1e-9);
        }
    }

    #[test]
    fn perturbed_distributions_are_rejected() {
        let process =
            PriceProcess::iid(PriceDistribution::uniform01(), 3).unwrap();
        assert!(best_online_expected_profit(&process, &CostModel::zero(), true).is_err());
    }

    #[test]
    fn enumeration_limit_is_enforced() {
        let d = PriceDistribution::new(
            vec![(1.0, 0.25), (2.0, 0.25), (3.0, 0.25), (4.0, 0.25)],
            0.0,
        )
        .unwrap();
        let process = PriceProcess::iid(d, 12).unwrap();
        // 4^12 = 16.7M paths > limit.
        let err = policy_expected_profit(&process, &CostModel::zero(), blsh_decide);
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }
}
