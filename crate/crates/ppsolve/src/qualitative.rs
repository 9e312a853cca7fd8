//! Exact qualitative analysis: which coordinates of the least fixed point
//! are exactly 0 or exactly 1, and elimination of those variables to leave a
//! system with LFP strictly inside (0,1)^n.
//!
//! Zero detection is a boolean positivity fixpoint (exact for all flavors:
//! max resolves to OR, min to AND). One detection for pure PPS walks the
//! SCCs bottom-up with full-mass and spectral-radius tests; for max/min
//! flavors it enumerates policies exhaustively, which is exact at desk scale
//! and capped by `GNM_POLICY_ENUM_CAP` (default 2^20).

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};

use crate::error::Error;
use crate::linalg::{solve_linear, spectral_radius_leq_one, RationalMatrix};
use crate::rational::Rational;
use crate::system::{ChoiceOp, Equation, EquationSystem, Flavor, LinearForm, Policy};

/// Result of eliminating the 0- and 1-valued coordinates.
#[derive(Clone, Debug)]
pub struct QualitativeReport {
    pub zero_set: BTreeSet<usize>,
    pub one_set: BTreeSet<usize>,
    /// System over the remaining variables, LFP strictly in (0,1)^n'.
    pub reduced: EquationSystem,
    /// remaining index → original index
    pub back_map: Vec<usize>,
}

impl QualitativeReport {
    /// Splices eliminated 0/1 values around a solution of the reduced system.
    pub fn splice(&self, reduced_solution: &[Rational], n: usize) -> Vec<Rational> {
        assert_eq!(reduced_solution.len(), self.back_map.len());
        let mut out = vec![Rational::zero(); n];
        for &i in &self.one_set {
            out[i] = Rational::one();
        }
        for (r, &orig) in self.back_map.iter().enumerate() {
            out[orig] = reduced_solution[r].clone();
        }
        out
    }
}

/// Default ceiling on exhaustive policy enumeration, overridable through the
/// `GNM_POLICY_ENUM_CAP` environment variable.
pub const POLICY_ENUM_CAP: u128 = 1 << 20;

pub(crate) fn policy_enum_cap() -> u128 {
    std::env::var("GNM_POLICY_ENUM_CAP")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(POLICY_ENUM_CAP)
}

/// The exact set {i : q*_i = 0}, via n rounds of the boolean positivity
/// fixpoint.
pub fn zero_set(sys: &EquationSystem) -> BTreeSet<usize> {
    assert!(sys.is_snf(), "zero_set requires an SNF system");
    let n = sys.n();
    let mut positive = vec![false; n];
    for _ in 0..n {
        let mut changed = false;
        for (i, eq) in sys.equations().iter().enumerate() {
            if positive[i] {
                continue;
            }
            let now = match eq {
                Equation::Linear(f) => {
                    f.constant.is_positive()
                        || f.coeffs.iter().any(|(j, c)| c.is_positive() && positive[*j])
                }
                Equation::Product(j, k) => positive[*j] && positive[*k],
                Equation::Choice(ChoiceOp::Max, j, k) => positive[*j] || positive[*k],
                Equation::Choice(ChoiceOp::Min, j, k) => positive[*j] && positive[*k],
                Equation::Poly { .. } => unreachable!("SNF checked above"),
            };
            if now {
                positive[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..n).filter(|&i| !positive[i]).collect()
}

/// One-set computation for a pure PPS given its zero set: SCCs processed
/// dependencies-first; an SCC is all-ones iff every outside dependency is a
/// one, every equation keeps full mass after substitution, and the SCC
/// Jacobian at the all-ones point has spectral radius ≤ 1 (linear-only SCCs
/// are solved directly instead).
fn pps_one_set(sys: &EquationSystem, zeros: &BTreeSet<usize>) -> BTreeSet<usize> {
    debug_assert!(sys.is_pure_pps());
    let n = sys.n();
    let mut is_one = vec![false; n];
    let sccs = sys.scc_decomposition();
    // the list is dependencies-last, so process it in reverse
    for scc in sccs.iter().rev() {
        if scc.iter().any(|i| zeros.contains(i)) {
            continue;
        }
        let in_scc = |j: usize| scc.binary_search(&j).is_ok();
        let mut ok = true;
        let mut linear_only = true;
        'rows: for &i in scc {
            match sys.equation(i) {
                Equation::Linear(f) => {
                    // full mass after substituting zeros (dropped) and ones
                    let mut mass = f.constant.clone();
                    for (j, c) in &f.coeffs {
                        if zeros.contains(j) {
                            continue;
                        }
                        if !in_scc(*j) && !is_one[*j] {
                            ok = false;
                            break 'rows;
                        }
                        mass += c;
                    }
                    if !mass.is_one() {
                        ok = false;
                        break 'rows;
                    }
                }
                Equation::Product(j, k) => {
                    linear_only = false;
                    for arg in [j, k] {
                        debug_assert!(!zeros.contains(arg), "zero-argument product is zero");
                        if !in_scc(*arg) && !is_one[*arg] {
                            ok = false;
                            break 'rows;
                        }
                    }
                }
                Equation::Choice(..) => unreachable!("pure PPS has no max/min equations"),
                Equation::Poly { .. } => unreachable!("SNF checked by caller"),
            }
        }
        if !ok {
            continue;
        }
        let one = if linear_only {
            // solve (I - A) x = b exactly on the SCC; with full mass the
            // unique solution is the all-ones vector when it exists
            let m = scc.len();
            let pos = |j: usize| scc.binary_search(&j).unwrap();
            let mut a = RationalMatrix::identity(m);
            let mut b = vec![Rational::zero(); m];
            for (r, &i) in scc.iter().enumerate() {
                let Equation::Linear(f) = sys.equation(i) else { unreachable!() };
                b[r] = f.constant.clone();
                for (j, c) in &f.coeffs {
                    if zeros.contains(j) {
                        continue;
                    }
                    if in_scc(*j) {
                        let cur = a.get(r, pos(*j)) - c;
                        a.set(r, pos(*j), cur);
                    } else {
                        b[r] += c; // outside dependency, known to be one
                    }
                }
            }
            match solve_linear(&a, &b) {
                Ok(x) => x.iter().all(Rational::is_one),
                Err(_) => {
                    unreachable!("full-mass linear SCC with an inflow has spectral radius < 1")
                }
            }
        } else {
            // Jacobian of the SCC subsystem at the all-ones point
            let m = scc.len();
            let pos = |j: usize| scc.binary_search(&j).unwrap();
            let mut jac = RationalMatrix::zero(m, m);
            for (r, &i) in scc.iter().enumerate() {
                match sys.equation(i) {
                    Equation::Linear(f) => {
                        for (j, c) in &f.coeffs {
                            if in_scc(*j) {
                                let cur = jac.get(r, pos(*j)) + c;
                                jac.set(r, pos(*j), cur);
                            }
                        }
                    }
                    Equation::Product(j, k) => {
                        for arg in [j, k] {
                            if in_scc(*arg) {
                                let cur = jac.get(r, pos(*arg)) + Rational::one();
                                jac.set(r, pos(*arg), cur);
                            }
                        }
                    }
                    _ => unreachable!(),
                }
            }
            spectral_radius_leq_one(&jac).expect("SCC Jacobian at 1 is nonnegative")
        };
        if one {
            for &i in scc {
                is_one[i] = true;
            }
        }
    }
    (0..n).filter(|&i| is_one[i]).collect()
}

/// Enumerates all policies of a max/min system, invoking `visit` with each;
/// errors beyond the enumeration cap.
pub(crate) fn for_each_policy<F: FnMut(&Policy)>(
    sys: &EquationSystem,
    mut visit: F,
) -> Result<(), Error> {
    let m_eqs = sys.choice_equations();
    let count: u128 = 1u128.checked_shl(m_eqs.len() as u32).unwrap_or(u128::MAX);
    let cap = policy_enum_cap();
    if count > cap {
        return Err(Error::EnumerationCap { policies: count, cap });
    }
    for mask in 0..count {
        let mut policy = Policy::empty();
        for (bit, &i) in m_eqs.iter().enumerate() {
            let Equation::Choice(_, j, k) = sys.equation(i) else { unreachable!() };
            let pick = if mask >> bit & 1 == 0 { *j } else { *k };
            policy.choices.insert(i, pick);
        }
        visit(&policy);
    }
    Ok(())
}

/// The exact set {i : q*_i = 1}. `zeros` must be `zero_set(sys)`.
pub fn one_set(sys: &EquationSystem, zeros: &BTreeSet<usize>) -> Result<BTreeSet<usize>, Error> {
    assert!(sys.is_snf(), "one_set requires an SNF system");
    match sys.flavor() {
        Flavor::Pps => Ok(pps_one_set(sys, zeros)),
        Flavor::Max => {
            // q*_i = 1 iff some policy achieves it
            let mut ones = BTreeSet::new();
            for_each_policy(sys, |policy| {
                let fixed = sys.apply_policy(policy).expect("enumerated policy is valid");
                let z = zero_set(&fixed);
                ones.extend(pps_one_set(&fixed, &z));
            })?;
            Ok(ones)
        }
        Flavor::Min => {
            // q*_i = 1 iff every policy yields it
            let mut ones: Option<BTreeSet<usize>> = None;
            for_each_policy(sys, |policy| {
                let fixed = sys.apply_policy(policy).expect("enumerated policy is valid");
                let z = zero_set(&fixed);
                let o = pps_one_set(&fixed, &z);
                ones = Some(match ones.take() {
                    None => o,
                    Some(acc) => acc.intersection(&o).copied().collect(),
                });
            })?;
            Ok(ones.unwrap_or_default())
        }
        Flavor::MaxMin => Err(Error::UnsupportedFlavor(Flavor::MaxMin.name())),
    }
}

/// Eliminates the 0- and 1-valued variables, substituting their values.
/// Form-M and form-Q equations with one eliminated argument degrade to
/// `x_i = x_j`.
pub fn reduce(sys: &EquationSystem) -> Result<QualitativeReport, Error> {
    assert!(sys.is_snf(), "reduce requires an SNF system");
    let zeros = zero_set(sys);
    let ones = one_set(sys, &zeros)?;
    debug_assert!(zeros.intersection(&ones).next().is_none());
    let n = sys.n();
    let mut back_map = Vec::new();
    let mut new_index = vec![usize::MAX; n];
    for (i, slot) in new_index.iter_mut().enumerate() {
        if !zeros.contains(&i) && !ones.contains(&i) {
            *slot = back_map.len();
            back_map.push(i);
        }
    }
    let keep = |i: &usize| new_index[*i] != usize::MAX;

    let mut equations = Vec::with_capacity(back_map.len());
    for &i in &back_map {
        let eq = match sys.equation(i) {
            Equation::Linear(f) => {
                let mut constant = f.constant.clone();
                let mut coeffs = Vec::new();
                for (j, c) in &f.coeffs {
                    if ones.contains(j) {
                        constant += c;
                    } else if !zeros.contains(j) {
                        coeffs.push((new_index[*j], c.clone()));
                    }
                }
                Equation::Linear(LinearForm { constant, coeffs })
            }
            Equation::Product(j, k) => {
                debug_assert!(!zeros.contains(j) && !zeros.contains(k));
                match (keep(j), keep(k)) {
                    (true, true) => Equation::Product(new_index[*j], new_index[*k]),
                    (true, false) => Equation::Linear(LinearForm::variable(new_index[*j])),
                    (false, true) => Equation::Linear(LinearForm::variable(new_index[*k])),
                    (false, false) => unreachable!("both arguments one makes the product one"),
                }
            }
            Equation::Choice(op, j, k) => {
                let dominated = |arg: &usize| match op {
                    // max(x, 0) = x; min(x, 1) = x
                    ChoiceOp::Max => zeros.contains(arg),
                    ChoiceOp::Min => ones.contains(arg),
                };
                match (keep(j), keep(k)) {
                    (true, true) => Equation::Choice(*op, new_index[*j], new_index[*k]),
                    (true, false) => {
                        debug_assert!(dominated(k), "non-dominated eliminated argument");
                        Equation::Linear(LinearForm::variable(new_index[*j]))
                    }
                    (false, true) => {
                        debug_assert!(dominated(j), "non-dominated eliminated argument");
                        Equation::Linear(LinearForm::variable(new_index[*k]))
                    }
                    (false, false) => {
                        unreachable!("an M equation over eliminated arguments is eliminated")
                    }
                }
            }
            Equation::Poly { .. } => unreachable!("SNF checked above"),
        };
        equations.push(eq);
    }
    let names = back_map.iter().map(|&i| sys.name(i).to_string()).collect();
    let reduced = EquationSystem::new(equations, names, true)?;
    Ok(QualitativeReport { zero_set: zeros, one_set: ones, reduced, back_map })
}
