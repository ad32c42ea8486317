//! Hard instances: the two lower-bound families, the margin-trader failure
//! distribution, and the adaptive phase adversary that defeats every
//! k-lookahead policy under additive transaction costs.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::market::{AdaptiveSpec, PriceDistribution, PriceProcess};

fn check_eps(eps: f64) -> Result<()> {
    if !eps.is_finite() || eps <= 0.0 || eps >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    Ok(())
}

/// Alternating two-atom distributions whose prophet/online gap approaches 3:
/// odd steps take `1/eps` w.p. `1-eps` (else 0), even steps take `1/eps - 1`
/// w.p. `1-eps` (else `2/eps - 1`).
pub fn gen_prop_adversarial(eps: f64, t: usize) -> Result<PriceProcess> {
    check_eps(eps)?;
    if t == 0 || !t.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be a positive even integer, got {t}"
        )));
    }
    let odd = Arc::new(PriceDistribution::new(
        vec![(1.0 / eps, 1.0 - eps), (0.0, eps)],
        0.0,
    )?);
    let even = Arc::new(PriceDistribution::new(
        vec![(1.0 / eps - 1.0, 1.0 - eps), (2.0 / eps - 1.0, eps)],
        0.0,
    )?);
    let dists = (0..t)
        .map(|i| {
            if i % 2 == 0 {
                Arc::clone(&odd)
            } else {
                Arc::clone(&even)
            }
        })
        .collect();
    PriceProcess::independent_shared(dists)
}

/// The i.i.d. three-atom family whose gap approaches 2: 1 w.p. `eps/2`,
/// 1/2 w.p. `1-eps`, 0 w.p. `eps/2`.
pub fn gen_prop_iid(eps: f64, t: usize) -> Result<PriceProcess> {
    check_eps(eps)?;
    let d = PriceDistribution::new(
        vec![(1.0, eps / 2.0), (0.5, 1.0 - eps), (0.0, eps / 2.0)],
        0.0,
    )?;
    PriceProcess::iid(d, t)
}

/// The two-atom i.i.d. distribution on which the margin trader never buys:
/// `1 + 2 eps` w.p. 1/5, `1 - eps/2` w.p. 4/5 (mean exactly 1).
pub fn gen_appendix_failure(eps: f64, t: usize) -> Result<PriceProcess> {
    check_eps(eps)?;
    let d = PriceDistribution::new(
        vec![(1.0 + 2.0 * eps, 0.2), (1.0 - eps / 2.0, 0.8)],
        0.0,
    )?;
    PriceProcess::iid(d, t)
}

/// Closed-form lower bound on E[OPT] for the failure distribution under
/// additive cost `eps`: each adjacent low-then-high pair admits a disjoint
/// flip worth `eps/2`, so E[OPT] >= (T-1) * (4/25) * (eps/2).
pub fn appendix_opt_lower_bound(eps: f64, t: usize) -> f64 {
    (t.saturating_sub(1)) as f64 * (4.0 / 25.0) * (eps / 2.0)
}

/// Which continuation the adversary picked for the current phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Victim held after the opening block: prices dip to `1-eps` then
    /// recover to `1+1.5eps`.
    VictimHeld,
    /// Victim was empty: the price runs away to `1+2.5eps`.
    VictimEmpty,
}

/// One emitted step: the current price and the `k` revealed future prices.
#[derive(Debug, Clone)]
pub struct PhaseStep {
    pub price: f64,
    pub reveal: Vec<f64>,
}

/// The adaptive price generator. Phases are concatenated back-to-back; each
/// phase opens with the blocks `1` and `1+eps` (every price duplicated `k`
/// times), observes whether the victim holds at the end of the opening
/// block, and commits the continuation that denies the victim any profit
/// while granting the prophet exactly `eps/2`.
///
/// The adversary sees only the victim's public state (inventory flag and
/// last trade price), never its policy.
pub struct PhaseAdversary {
    eps: f64,
    k: usize,
    phases_total: usize,
    phases_started: usize,
    phases_completed: usize,
    committed: Vec<f64>,
    cursor: usize,
    /// Index of the last copy of the opening price; the branch is decided
    /// when the victim's state after this step is observed.
    branch_decision_at: Option<usize>,
    /// Index of the current phase's final price, once the branch is known.
    phase_last_index: Option<usize>,
    branches: Vec<Branch>,
}

impl PhaseAdversary {
    pub fn new(spec: AdaptiveSpec) -> Self {
        Self {
            eps: spec.eps,
            k: spec.k,
            phases_total: spec.phases,
            phases_started: 0,
            phases_completed: 0,
            committed: Vec::new(),
            cursor: 0,
            branch_decision_at: None,
            phase_last_index: None,
            branches: Vec::new(),
        }
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn lookahead(&self) -> usize {
        self.k
    }

    pub fn is_finished(&self) -> bool {
        self.phases_started == self.phases_total && self.cursor == self.committed.len()
    }

    pub fn phases_completed(&self) -> usize {
        self.phases_completed
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// Prophet profit under the construction's designated trades: one flip
    /// worth `eps/2` per completed phase.
    pub fn prophet_profit(&self) -> f64 {
        self.phases_completed as f64 * (self.eps / 2.0)
    }

    fn push_block(&mut self, price: f64) {
        for _ in 0..self.k {
            self.committed.push(price);
        }
    }

    /// Emits the next price together with the `k` revealed future prices.
    /// Revealed prices that fall beyond the committed sequence are the next
    /// phase's opening price (1) while phases remain, else the 0 sentinel.
    pub fn next_step(&mut self) -> Result<PhaseStep> {
        if self.cursor == self.committed.len() {
            if self.branch_decision_at.is_some() {
                return Err(Error::ProtocolViolation(
                    "branch undecided: the victim's state after the opening \
                     block was never observed"
                        .into(),
                ));
            }
            if self.phases_started == self.phases_total {
                return Err(Error::ProtocolViolation(
                    "all phases exhausted; construct a new adversary to continue".into(),
                ));
            }
            // Start a phase: opening blocks are fixed regardless of branch.
            let start = self.committed.len();
            self.push_block(1.0);
            self.push_block(1.0 + self.eps);
            self.branch_decision_at = Some(start + self.k - 1);
            self.phases_started += 1;
        }

        let price = self.committed[self.cursor];
        let beyond = if self.phases_started < self.phases_total {
            1.0
        } else {
            0.0
        };
        let reveal: Vec<f64> = (self.cursor + 1..=self.cursor + self.k)
            .map(|i| self.committed.get(i).copied().unwrap_or(beyond))
            .collect();
        self.cursor += 1;
        if self.phase_last_index == Some(self.cursor - 1) {
            self.phases_completed += 1;
            self.phase_last_index = None;
        }
        Ok(PhaseStep { price, reveal })
    }

    /// Reports the victim's public state after the step just emitted. The
    /// construction only uses the inventory flag, and only at the end of a
    /// phase's opening block.
    pub fn observe(&mut self, victim_holding: bool, _last_trade_price: Option<f64>) {
        if self.branch_decision_at == Some(self.cursor.wrapping_sub(1)) {
            self.branch_decision_at = None;
            if victim_holding {
                self.push_block(1.0 - self.eps);
                self.push_block(1.0 + 1.5 * self.eps);
                self.branches.push(Branch::VictimHeld);
            } else {
                self.push_block(1.0 + 2.5 * self.eps);
                self.branches.push(Branch::VictimEmpty);
            }
            self.phase_last_index = Some(self.committed.len() - 1);
        }
    }

    /// All prices emitted so far.
    pub fn emitted(&self) -> &[f64] {
        &self.committed[..self.cursor]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::market::expected_positive_pair_gap;

    #[test]
    fn adversarial_family_distributions() {
        let process = gen_prop_adversarial(0.25, 4).unwrap();
        let dists = process.step_distributions().unwrap();
        assert_eq!(dists[0].atoms(), &[(4.0, 0.75), (0.0, 0.25)]);
        assert_eq!(dists[1].atoms(), &[(3.0, 0.75), (7.0, 0.25)]);
        assert_relative_eq!(dists[0].mean(), 3.0); // 1/eps - 1
        assert_relative_eq!(dists[1].mean(), 4.0); // 1/eps

        // Per odd-even pair, the online profit terms are 1 and 0.
        assert_relative_eq!(dists[0].expected_positive_part_gap(4.0), 1.0);
        assert_relative_eq!(dists[1].expected_positive_part_gap(3.0), 0.0);
    }

    #[test]
    fn adversarial_family_rejects_bad_parameters() {
        assert!(gen_prop_adversarial(0.0, 4).is_err());
        assert!(gen_prop_adversarial(1.0, 4).is_err());
        assert!(gen_prop_adversarial(0.25, 5).is_err());
        assert!(gen_prop_adversarial(0.25, 0).is_err());
    }

    #[test]
    fn iid_family_mean_and_gap() {
        let process = gen_prop_iid(0.2, 10).unwrap();
        let dists = process.step_distributions().unwrap();
        assert_relative_eq!(dists[0].mean(), 0.5);
        assert_relative_eq!(dists[0].expected_positive_part_gap(0.5), 0.05); // eps/4
        assert_relative_eq!(expected_positive_pair_gap(&dists[0], &dists[0]), 0.09);
    }

    #[test]
    fn failure_distribution_mean_and_bound() {
        let process = gen_appendix_failure(0.1, 100).unwrap();
        let dists = process.step_distributions().unwrap();
        assert_relative_eq!(dists[0].mean(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(
            appendix_opt_lower_bound(0.1, 10_000),
            9999.0 * 2.0 * 0.1 / 25.0,
            epsilon = 1e-12
        );
    }

    fn drive_scripted(eps: f64, phases: usize, holds_after_opening: bool) -> PhaseAdversary {
        let spec = AdaptiveSpec::new(eps, phases, 1).unwrap();
        let mut adv = PhaseAdversary::new(spec);
        while !adv.is_finished() {
            let _step = adv.next_step().unwrap();
            adv.observe(holds_after_opening, None);
        }
        adv
    }

    #[test]
    fn held_branch_emits_four_prices() {
        let eps = 0.1;
        let adv = drive_scripted(eps, 1, true);
        assert_eq!(adv.emitted(), &[1.0, 1.1, 0.9, 1.0 + 1.5 * eps]);
        assert_eq!(adv.branches(), &[Branch::VictimHeld]);
        assert_relative_eq!(adv.prophet_profit(), eps / 2.0);
    }

    #[test]
    fn empty_branch_emits_three_prices() {
        let eps = 0.1;
        let adv = drive_scripted(eps, 1, false);
        assert_eq!(adv.emitted(), &[1.0, 1.1, 1.0 + 2.5 * eps]);
        assert_eq!(adv.branches(), &[Branch::VictimEmpty]);
        assert_relative_eq!(adv.prophet_profit(), eps / 2.0);
    }

    #[test]
    fn phases_restart_immediately_and_reveals_bridge_phases() {
        let eps = 0.1;
        let spec = AdaptiveSpec::new(eps, 2, 1).unwrap();
        let mut adv = PhaseAdversary::new(spec);
        let mut reveals = Vec::new();
        while !adv.is_finished() {
            let step = adv.next_step().unwrap();
            reveals.push(step.reveal[0]);
            adv.observe(false, None);
        }
        // Two empty-branch phases: [1, 1.1, 1.25] twice.
        assert_eq!(adv.emitted().len(), 6);
        assert_eq!(adv.emitted()[3], 1.0);
        // The reveal at a phase's last step is the next phase's opening
        // price, and the 0 sentinel at the very end.
        assert_eq!(reveals[2], 1.0);
        assert_eq!(reveals[5], 0.0);
        assert_relative_eq!(adv.prophet_profit(), 2.0 * eps / 2.0);
    }

    #[test]
    fn querying_past_the_last_phase_is_a_protocol_violation() {
        let mut adv = drive_scripted(0.1, 1, true);
        assert!(adv.is_finished());
        assert!(matches!(
            adv.next_step(),
            Err(Error::ProtocolViolation(_))
        ));
    }

    #[test]
    fn skipping_the_branch_observation_is_a_protocol_violation() {
        let spec = AdaptiveSpec::new(0.1, 1, 1).unwrap();
        let mut adv = PhaseAdversary::new(spec);
        let _ = adv.next_step().unwrap(); // opening price, branch pending
        let _ = adv.next_step().unwrap(); // 1+eps, still fine (committed)
        // The opening block's observation never arrived; the continuation
        // cannot be committed.
        assert!(matches!(adv.next_step(), Err(Error::ProtocolViolation(_))));
    }

    #[test]
    fn duplication_for_k_greater_than_one() {
        let eps = 0.2;
        let spec = AdaptiveSpec::new(eps, 1, 3).unwrap();
        let mut adv = PhaseAdversary::new(spec);
        let mut emitted = Vec::new();
        while !adv.is_finished() {
            let step = adv.next_step().unwrap();
            assert_eq!(step.reveal.len(), 3);
            emitted.push(step.price);
            // Hold after the opening block (prices of 1).
            adv.observe(true, None);
        }
        let expect: Vec<f64> = [1.0, 1.0 + eps, 1.0 - eps, 1.0 + 1.5 * eps]
            .iter()
            .flat_map(|&p| std::iter::repeat_n(p, 3))
            .collect();
        assert_eq!(emitted, expect);
    }
}
