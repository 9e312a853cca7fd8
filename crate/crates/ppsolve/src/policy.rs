//! ε-optimal pure policy extraction for max/minPPS.
//!
//! For a minPPS any policy that is greedy with respect to a close enough
//! approximation y of q* is ε-optimal; the required closeness is
//! 2^-(14|P|+3)·ε. For a maxPPS the greedy policy can assign probability 0
//! to variables with q*_i > 0, so it is repaired: while some (q*_σ)_i = 0,
//! an M equation in the zero set with a positive-value argument whose
//! y-values differ by at most 2^-(14|P|+1)·ε is switched; each switch
//! strictly grows the positive set.
//!
//! Policies over eliminated variables are extended separately: zero
//! variables of a minPPS route to a zero argument, one variables of a maxPPS
//! are fixed one at a time, rechecking the one set after each tentative fix.

use std::time::Instant;

use num_traits::{One, Signed};

use crate::error::Error;
use crate::gnm;
use crate::linalg::RationalVector;
use crate::qualitative::{self, QualitativeReport};
use crate::rational::{ceil_log2, pow2_neg, Rational};
use crate::system::{ChoiceOp, Equation, EquationSystem, Flavor, Policy};

/// An ε-optimal policy with the approximation evidence that produced it.
#[derive(Clone, Debug)]
pub struct EpsilonPolicyReport {
    /// Covers every M equation of the input system, including eliminated ones.
    pub policy: Policy,
    pub epsilon: Rational,
    /// Approximation of q*_σ (the value of playing `policy`).
    pub value_under_policy: RationalVector,
    /// The y-vector the greedy choice was taken from (reduced-system space).
    pub certificate_y: RationalVector,
    /// Precision exponent used for y.
    pub certificate_j: u64,
    /// Whether `certificate_j` was overridden below the sound default.
    pub heuristic: bool,
    /// Number of repair switches performed (maxPPS only).
    pub repair_switches: usize,
    pub duration: std::time::Duration,
}

/// For each M equation picks the argument attaining the max/min of
/// y-values, ties broken toward the lower variable index.
pub fn greedy_policy(sys: &EquationSystem, y: &[Rational]) -> Policy {
    let mut policy = Policy::empty();
    for i in sys.choice_equations() {
        let Equation::Choice(op, j, k) = sys.equation(i) else { unreachable!() };
        let (lo, hi) = (*j.min(k), *j.max(k));
        let pick = match op {
            ChoiceOp::Max => {
                if y[hi] > y[lo] {
                    hi
                } else {
                    lo
                }
            }
            ChoiceOp::Min => {
                if y[hi] < y[lo] {
                    hi
                } else {
                    lo
                }
            }
        };
        policy.choices.insert(i, pick);
    }
    policy
}

/// Smallest j with 2^-j ≤ ε.
fn precision_for(eps: &Rational) -> u64 {
    ceil_log2(&eps.recip())
}

fn check_epsilon(eps: &Rational) -> Result<(), Error> {
    if !eps.is_positive() || *eps > Rational::one() {
        return Err(Error::invalid("epsilon must lie in (0, 1]"));
    }
    Ok(())
}

/// ε-optimal policy for a minPPS: greedy with respect to a solve at
/// j = 14|P| + 3 + ⌈log2(1/ε)⌉ on the reduced system, extended over
/// eliminated variables.
pub fn epsilon_policy_min(sys: &EquationSystem, eps: &Rational) -> Result<EpsilonPolicyReport, Error> {
    epsilon_policy_min_with(sys, eps, None)
}

pub fn epsilon_policy_min_with(
    sys: &EquationSystem,
    eps: &Rational,
    override_j: Option<u64>,
) -> Result<EpsilonPolicyReport, Error> {
    check_epsilon(eps)?;
    if !matches!(sys.flavor(), Flavor::Min | Flavor::Pps) {
        return Err(Error::UnsupportedFlavor(sys.flavor().name()));
    }
    let start = Instant::now();
    let report = qualitative::reduce(sys)?;
    let reduced = &report.reduced;
    let default_j = if reduced.n() == 0 {
        1
    } else {
        14 * reduced.encoding_size() + 3 + precision_for(eps)
    };
    let (j, heuristic) = resolve_precision(default_j, override_j);
    let y = reduced_approximation(reduced, j)?;
    let reduced_policy = greedy_policy(reduced, &y);
    let policy = extend_policy(sys, &reduced_policy, &report)?;
    let value = evaluate_policy(sys, &policy, precision_for(eps) + 4)?;
    Ok(EpsilonPolicyReport {
        policy,
        epsilon: eps.clone(),
        value_under_policy: value,
        certificate_y: y,
        certificate_j: j,
        heuristic,
        repair_switches: 0,
        duration: start.elapsed(),
    })
}

/// ε-optimal policy for a maxPPS: greedy at j = 14|P| + 2 + ⌈log2(1/ε)⌉
/// followed by the zero-repair loop, extended over eliminated variables.
pub fn epsilon_policy_max(sys: &EquationSystem, eps: &Rational) -> Result<EpsilonPolicyReport, Error> {
    epsilon_policy_max_with(sys, eps, None)
}

pub fn epsilon_policy_max_with(
    sys: &EquationSystem,
    eps: &Rational,
    override_j: Option<u64>,
) -> Result<EpsilonPolicyReport, Error> {
    check_epsilon(eps)?;
    if !matches!(sys.flavor(), Flavor::Max | Flavor::Pps) {
        return Err(Error::UnsupportedFlavor(sys.flavor().name()));
    }
    let start = Instant::now();
    let report = qualitative::reduce(sys)?;
    let reduced = &report.reduced;
    let p_size = if reduced.n() == 0 { 0 } else { reduced.encoding_size() };
    let default_j = if reduced.n() == 0 {
        1
    } else {
        14 * p_size + 2 + precision_for(eps)
    };
    let (j, heuristic) = resolve_precision(default_j, override_j);
    let y = reduced_approximation(reduced, j)?;

    let mut sigma = greedy_policy(reduced, &y);
    let mut switches = 0usize;
    // switch threshold 2^-(14|P|+1)·ε
    let threshold = pow2_neg(14 * p_size + 1) * eps;
    let m_count = reduced.choice_equations().len();
    loop {
        let fixed = reduced.apply_policy(&sigma)?;
        let zeros = qualitative::zero_set(&fixed);
        if zeros.is_empty() {
            break;
        }
        let mut switched = false;
        'outer: for &i in &zeros {
            let Equation::Choice(_, j_arg, k_arg) = reduced.equation(i) else {
                continue;
            };
            let (lo, hi) = (*j_arg.min(k_arg), *j_arg.max(k_arg));
            for arg in [lo, hi] {
                if zeros.contains(&arg) || sigma.choices[&i] == arg {
                    continue;
                }
                if (&y[i] - &y[arg]).abs() <= threshold {
                    sigma.choices.insert(i, arg);
                    switches += 1;
                    switched = true;
                    break 'outer;
                }
            }
        }
        assert!(
            switched,
            "internal invariant violated: repair loop found no eligible switch"
        );
        assert!(
            switches <= m_count,
            "internal invariant violated: repair loop exceeded the M-equation count"
        );
    }

    let policy = extend_policy(sys, &sigma, &report)?;
    let value = evaluate_policy(sys, &policy, precision_for(eps) + 4)?;
    Ok(EpsilonPolicyReport {
        policy,
        epsilon: eps.clone(),
        value_under_policy: value,
        certificate_y: y,
        certificate_j: j,
        heuristic,
        repair_switches: switches,
        duration: start.elapsed(),
    })
}

fn resolve_precision(default_j: u64, override_j: Option<u64>) -> (u64, bool) {
    match override_j {
        Some(j) if j != default_j => (j, true),
        _ => (default_j, false),
    }
}

/// Solves the (already reduced) system and returns the approximation
/// vector. On an empty system returns the empty vector.
fn reduced_approximation(reduced: &EquationSystem, j: u64) -> Result<RationalVector, Error> {
    if reduced.n() == 0 {
        return Ok(Vec::new());
    }
    Ok(gnm::solve(reduced, j)?.approximation)
}

/// Extends a policy over the reduced system to every M equation of the full
/// system. Zero variables of a minPPS route to a zero-set argument; one
/// variables of a maxPPS are fixed sequentially, rechecking membership in
/// the one set after each tentative first-argument fix.
pub fn extend_policy(
    full: &EquationSystem,
    reduced_policy: &Policy,
    report: &QualitativeReport,
) -> Result<Policy, Error> {
    let mut policy = Policy::empty();
    for (&i, &choice) in &reduced_policy.choices {
        policy.choices.insert(report.back_map[i], report.back_map[choice]);
    }
    let flavor = full.flavor();
    let eliminated =
        |v: &usize| report.zero_set.contains(v) || report.one_set.contains(v);
    // working system for the max-flavor one-extension: already-fixed
    // eliminated M equations become linear routes
    let mut working = full.clone();
    for i in full.choice_equations() {
        if policy.choices.contains_key(&i) {
            continue;
        }
        let Equation::Choice(_, j, k) = full.equation(i) else { unreachable!() };
        let (lo, hi) = (*j.min(k), *j.max(k));
        let pick = if !eliminated(&i) {
            // kept variable whose M equation degraded to a linear route in
            // the reduced system (one argument eliminated): the choice must
            // follow the degradation, max(x, 0) = x and min(x, 1) = x
            if eliminated(&lo) {
                debug_assert!(!eliminated(&hi));
                hi
            } else {
                debug_assert!(eliminated(&hi), "kept binary choice is covered by the reduced policy");
                lo
            }
        } else {
            match flavor {
                Flavor::Min if report.zero_set.contains(&i) => {
                    // some argument is zero; lower index first
                    if report.zero_set.contains(&lo) {
                        lo
                    } else {
                        debug_assert!(report.zero_set.contains(&hi));
                        hi
                    }
                }
                Flavor::Max if report.one_set.contains(&i) => {
                    // tentative first argument, keep if the variable stays one
                    let mut sigma = Policy::empty();
                    sigma.choices.insert(i, *j);
                    let candidate = working.fix_policy_partial(&sigma)?;
                    let zeros = qualitative::zero_set(&candidate);
                    let ones = qualitative::one_set(&candidate, &zeros)?;
                    if ones.contains(&i) {
                        *j
                    } else {
                        *k
                    }
                }
                // remaining cases are value-indifferent; lower index
                _ => lo,
            }
        };
        policy.choices.insert(i, pick);
        if flavor == Flavor::Max {
            let mut sigma = Policy::empty();
            sigma.choices.insert(i, pick);
            working = working.fix_policy_partial(&sigma)?;
        }
    }
    Ok(policy)
}

/// 2^-j-accurate value vector q*_σ of playing `policy`: fixes the policy and
/// solves the resulting pure PPS.
pub fn evaluate_policy(
    sys: &EquationSystem,
    policy: &Policy,
    j: u64,
) -> Result<RationalVector, Error> {
    let fixed = sys.apply_policy(policy)?;
    Ok(gnm::solve(&fixed, j)?.approximation)
}
