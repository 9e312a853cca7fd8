//! Guess-and-check verification and desk-scale exhaustive solving of
//! max-minPPS (the value systems of branching simple stochastic games).
//!
//! A candidate pair (σ for the max player, τ for the min player) is accepted
//! iff the ε/4-accurate values of the σ-fixed minPPS and the τ-fixed maxPPS
//! are within ε/4 of each other; by the triangle inequality around
//! q*_σ ≤ q* ≤ q*_τ the accepted value is within ε of q*.

use num_traits::{One, Signed, Zero};

use crate::error::Error;
use crate::gnm;
use crate::linalg::RationalVector;
use crate::rational::{ceil_log2, Rational};
use crate::system::{ChoiceOp, Equation, EquationSystem, Policy};

/// Verdict on a guessed policy pair.
#[derive(Clone, Debug)]
pub enum CandidateOutcome {
    /// ‖q* − value‖∞ ≤ ε.
    Accepted { value: RationalVector },
    /// ‖v_σ − v_τ‖∞ exceeded ε/4.
    Rejected { gap: Rational },
}

/// A checked certificate: the guessed pair plus the verdict.
#[derive(Clone, Debug)]
pub struct CandidateCertificate {
    pub sigma: Policy,
    pub tau: Policy,
    pub epsilon: Rational,
    pub outcome: CandidateOutcome,
}

impl CandidateCertificate {
    /// Runs [`check_candidate`] and bundles the verdict with the guess.
    pub fn check(
        sys: &EquationSystem,
        sigma: Policy,
        tau: Policy,
        epsilon: Rational,
    ) -> Result<Self, Error> {
        let outcome = check_candidate(sys, &sigma, &tau, &epsilon)?;
        Ok(CandidateCertificate { sigma, tau, epsilon, outcome })
    }

    pub fn accepted(&self) -> bool {
        matches!(self.outcome, CandidateOutcome::Accepted { .. })
    }
}

/// M-equation indices per operator.
fn partition_choices(sys: &EquationSystem) -> (Vec<usize>, Vec<usize>) {
    let mut max_eqs = Vec::new();
    let mut min_eqs = Vec::new();
    for i in sys.choice_equations() {
        match sys.equation(i) {
            Equation::Choice(ChoiceOp::Max, ..) => max_eqs.push(i),
            Equation::Choice(ChoiceOp::Min, ..) => min_eqs.push(i),
            _ => unreachable!(),
        }
    }
    (max_eqs, min_eqs)
}

fn check_domain(policy: &Policy, expected: &[usize], who: &str) -> Result<(), Error> {
    let domain: Vec<usize> = policy.choices.keys().copied().collect();
    if domain != expected {
        return Err(Error::PolicyMismatch(format!(
            "{who} policy must cover exactly the {who}-player equations {expected:?}, got {domain:?}"
        )));
    }
    Ok(())
}

/// Smallest j with 2^-j ≤ ε/4.
fn quarter_precision(eps: &Rational) -> u64 {
    ceil_log2(&(Rational::from_integer(4.into()) / eps))
}

/// Fixes σ on the max equations and τ on the min equations of a max-minPPS,
/// solves both single-player systems to ε/4, and accepts iff the values
/// agree within ε/4.
pub fn check_candidate(
    sys: &EquationSystem,
    sigma: &Policy,
    tau: &Policy,
    eps: &Rational,
) -> Result<CandidateOutcome, Error> {
    if !eps.is_positive() || *eps > Rational::one() {
        return Err(Error::invalid("epsilon must lie in (0, 1]"));
    }
    if !sys.is_snf() {
        return Err(Error::invalid("check_candidate requires an SNF system"));
    }
    let (max_eqs, min_eqs) = partition_choices(sys);
    check_domain(sigma, &max_eqs, "max")?;
    check_domain(tau, &min_eqs, "min")?;
    let j = quarter_precision(eps);

    // σ fixed: a minPPS whose LFP is q*_σ ≤ q*
    let min_side = sys.fix_policy_partial(sigma)?;
    let v_sigma = gnm::solve(&min_side, j)?.approximation;
    // τ fixed: a maxPPS whose LFP is q*_τ ≥ q*
    let max_side = sys.fix_policy_partial(tau)?;
    let v_tau = gnm::solve(&max_side, j)?.approximation;

    let gap = v_sigma
        .iter()
        .zip(&v_tau)
        .map(|(a, b)| (a - b).abs())
        .max()
        .unwrap_or_else(Rational::zero);
    let threshold = eps / Rational::from_integer(4.into());
    if gap <= threshold {
        Ok(CandidateOutcome::Accepted { value: v_sigma })
    } else {
        Ok(CandidateOutcome::Rejected { gap })
    }
}

/// Enumerates policy pairs in lexicographic order over the choice vectors
/// (σ outer, τ inner; first argument before second) and returns the first
/// accepted certificate.
pub fn solve_exhaustive(
    sys: &EquationSystem,
    eps: &Rational,
) -> Result<(RationalVector, Policy, Policy), Error> {
    let (max_eqs, min_eqs) = partition_choices(sys);
    let total = max_eqs.len() + min_eqs.len();
    if total > 20 {
        return Err(Error::EnumerationCap {
            policies: 1u128 << total.min(127),
            cap: 1 << 20,
        });
    }
    let policies_of = |eqs: &[usize]| -> Vec<Policy> {
        let mut out = Vec::with_capacity(1 << eqs.len());
        for mask in 0u32..(1u32 << eqs.len()) {
            let mut p = Policy::empty();
            for (bit, &i) in eqs.iter().enumerate() {
                let Equation::Choice(_, j, k) = sys.equation(i) else { unreachable!() };
                p.choices.insert(i, if mask >> bit & 1 == 0 { *j } else { *k });
            }
            out.push(p);
        }
        out
    };
    for sigma in policies_of(&max_eqs) {
        for tau in policies_of(&min_eqs) {
            if let CandidateOutcome::Accepted { value } = check_candidate(sys, &sigma, &tau, eps)? {
                return Ok((value, sigma, tau));
            }
        }
    }
    panic!(
        "internal invariant violated: no policy pair accepted, but optimal \
         policies exist for both players"
    );
}
