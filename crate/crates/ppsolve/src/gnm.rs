//! The Generalized Newton's Method engine: linearization of a max/minPPS at
//! a point, the LP-defined iteration operator I(y), plain Newton steps on
//! pure PPS, and the rounded iteration that reaches any target precision.
//!
//! One iteration at anchor y solves
//!
//! ```text
//! minimize Σ a_i  subject to  P^y(a) ≤ a   (maxPPS)
//! maximize Σ a_i  subject to  P^y(a) ≥ a   (minPPS)
//! ```
//!
//! where P^y replaces every product row x_j·x_k by its tangent affine form
//! y_j·x_k + x_j·y_k − y_j·y_k. The LP optimum is the unique fixed point of
//! x = P^y(x), which the solver asserts exactly at every step. Rounding the
//! iterate down to the 2^-h grid with h = j + 2 + 4|P| yields
//! ‖q* − x^(h)‖∞ ≤ 2^-j after h iterations.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num_traits::{One, Zero};

use crate::error::Error;
use crate::linalg::{solve_linear, RationalMatrix, RationalVector};
use crate::lp::{Constraint, Direction, LinearProgram, LpOutcome, Relation};
use crate::qualitative::{self, QualitativeReport};
use crate::rational::{floor_to_grid, Rational};
use crate::snf::to_snf;
use crate::system::{ChoiceOp, Equation, EquationSystem, Flavor, LinearForm, Policy};

/// One row of a linearized system: linear rows (form L and linearized Q) and
/// untouched max/min rows.
#[derive(Clone, Debug, PartialEq, Eq)]
enum LinRow {
    Lin(LinearForm),
    Choice(ChoiceOp, usize, usize),
}

/// The max/min-linear system P^y: form-Q rows replaced by their tangent
/// affine forms at the anchor, everything else verbatim.
#[derive(Clone, Debug)]
pub struct LinearizedSystem {
    anchor: Vec<Rational>,
    rows: Vec<LinRow>,
}

impl LinearizedSystem {
    pub fn anchor(&self) -> &[Rational] {
        &self.anchor
    }

    /// Exact value of P^y at `x`.
    pub fn evaluate(&self, x: &[Rational]) -> RationalVector {
        self.rows
            .iter()
            .map(|row| match row {
                LinRow::Lin(f) => f.evaluate(x),
                LinRow::Choice(op, j, k) => op.pick(&x[*j], &x[*k]).clone(),
            })
            .collect()
    }
}

/// Builds P^y for an SNF system.
pub fn linearize(sys: &EquationSystem, y: &[Rational]) -> Result<LinearizedSystem, Error> {
    if y.len() != sys.n() {
        return Err(Error::DimensionMismatch { expected: sys.n(), got: y.len() });
    }
    if !sys.is_snf() {
        return Err(Error::invalid("linearize requires an SNF system"));
    }
    let rows = sys
        .equations()
        .iter()
        .map(|eq| match eq {
            Equation::Linear(f) => LinRow::Lin(f.clone()),
            Equation::Product(j, k) => {
                let constant = -(&y[*j] * &y[*k]);
                let coeffs = if j == k {
                    vec![(*j, &y[*j] + &y[*j])]
                } else {
                    vec![(*j.min(k), y[*j.max(k)].clone()), (*j.max(k), y[*j.min(k)].clone())]
                };
                let coeffs = coeffs.into_iter().filter(|(_, c)| !c.is_zero()).collect();
                LinRow::Lin(LinearForm { constant, coeffs })
            }
            Equation::Choice(op, j, k) => LinRow::Choice(*op, *j, *k),
            Equation::Poly { .. } => unreachable!("SNF checked above"),
        })
        .collect();
    Ok(LinearizedSystem { anchor: y.to_vec(), rows })
}

/// One iteration of GNM: the unique optimum I(y) of the linearized LP.
/// Preconditions (reduced system with 0 < q* < 1 and 0 ≤ y ≤ q*) make the LP
/// feasible and bounded; a failure is an internal invariant violation.
pub fn gnm_step(sys: &EquationSystem, y: &[Rational]) -> Result<RationalVector, Error> {
    let lin = linearize(sys, y)?;
    let n = sys.n();
    let (direction, relation) = match sys.flavor() {
        Flavor::Max | Flavor::Pps => (Direction::Minimize, Relation::Le),
        Flavor::Min => (Direction::Maximize, Relation::Ge),
        Flavor::MaxMin => return Err(Error::UnsupportedFlavor(Flavor::MaxMin.name())),
    };
    let mut constraints = Vec::new();
    for (i, row) in lin.rows.iter().enumerate() {
        match row {
            LinRow::Lin(f) => {
                // f(a) - a_i REL 0, i.e. coeffs·a - a_i REL -constant
                let mut coeffs = vec![Rational::zero(); n];
                for (j, c) in &f.coeffs {
                    coeffs[*j] = &coeffs[*j] + c;
                }
                coeffs[i] = &coeffs[i] - Rational::one();
                constraints.push(Constraint { coeffs, relation, rhs: -f.constant.clone() });
            }
            LinRow::Choice(_, j, k) => {
                // max(a_j, a_k) ≤ a_i splits into a_j ≤ a_i, a_k ≤ a_i;
                // min(a_j, a_k) ≥ a_i into a_j ≥ a_i, a_k ≥ a_i
                for arg in [*j, *k] {
                    let mut coeffs = vec![Rational::zero(); n];
                    coeffs[arg] = &coeffs[arg] + Rational::one();
                    coeffs[i] = &coeffs[i] - Rational::one();
                    constraints.push(Constraint { coeffs, relation, rhs: Rational::zero() });
                }
            }
        }
    }
    let lp = LinearProgram {
        direction,
        objective: vec![Rational::one(); n],
        constraints,
        bounds: Vec::new(),
    };
    match crate::lp::solve_lp(&lp) {
        LpOutcome::Optimal { point, .. } => {
            let image = lin.evaluate(&point);
            assert_eq!(
                image, point,
                "internal invariant violated: LP optimum is not a fixed point of the linearization"
            );
            Ok(point)
        }
        other => panic!(
            "internal invariant violated: GNM linear program is {other:?} \
             (requires a qualitative-reduced system and 0 <= y <= q*)"
        ),
    }
}

/// One exact Newton step N(y) = y + (I − P'(y))^-1 (P(y) − y) on a pure PPS.
pub fn newton_step(pps: &EquationSystem, y: &[Rational]) -> Result<RationalVector, Error> {
    let n = pps.n();
    let jac = pps.jacobian(y)?;
    let m = RationalMatrix::identity(n).sub(&jac);
    let value = pps.evaluate(y)?;
    let residual: Vec<Rational> = value.iter().zip(y).map(|(p, v)| p - v).collect();
    let step = solve_linear(&m, &residual)?;
    Ok(y.iter().zip(&step).map(|(v, s)| v + s).collect())
}

/// Componentwise max(0, ⌊v_i·2^h⌋ / 2^h).
pub fn round_down(v: &[Rational], h: u64) -> RationalVector {
    v.iter().map(|x| floor_to_grid(x, h)).collect()
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SolveOptions {
    /// Use the LP operator even on pure PPS (differential-testing mode);
    /// otherwise pure PPS take the cheaper exact Newton path.
    pub force_lp: bool,
}

/// Result of a full solve: the certified approximation plus the iteration
/// trace.
#[derive(Clone, Debug)]
pub struct SolveReport {
    /// Approximation of q* over the input system's variables,
    /// ‖q* − approximation‖∞ ≤ 2^-j.
    pub approximation: RationalVector,
    /// Requested precision exponent.
    pub j: u64,
    /// Rounding parameter and iteration count h = j + 2 + 4|P|.
    pub h: u64,
    /// Encoding size |P| of the reduced system.
    pub reduced_size: u64,
    /// Computed iterates on the reduced system: (I(x^(k)), x^(k+1)) pairs.
    /// Once the deterministic iteration revisits a grid point the remaining
    /// steps repeat with that period, so the trace may be shorter than h.
    pub iterates: Vec<(RationalVector, RationalVector)>,
    /// Input variables eliminated by qualitative analysis: (index, value-is-one).
    pub eliminated: Vec<(usize, bool)>,
    /// Operator applications actually computed.
    pub operator_steps: usize,
    pub duration: Duration,
}

/// Approximates the LFP of any max/minPPS to within 2^-j: converts to SNF,
/// eliminates 0/1 coordinates exactly, runs h = j + 2 + 4|P| rounded GNM
/// iterations from the zero vector on the reduced system, and splices the
/// eliminated values back.
pub fn solve(sys: &EquationSystem, j: u64) -> Result<SolveReport, Error> {
    solve_with(sys, j, SolveOptions::default())
}

pub fn solve_with(sys: &EquationSystem, j: u64, opts: SolveOptions) -> Result<SolveReport, Error> {
    let start = Instant::now();
    let n_input = sys.n();
    let (snf, _) = to_snf(sys);
    let report = qualitative::reduce(&snf)?;
    let reduced = &report.reduced;
    let reduced_size = if reduced.n() == 0 { 0 } else { reduced.encoding_size() };
    let h = j + 2 + 4 * reduced_size;

    let mut iterates = Vec::new();
    let mut operator_steps = 0usize;
    let final_reduced = if reduced.n() == 0 {
        Vec::new()
    } else {
        iterate_rounded(reduced, h, opts, &mut iterates, &mut operator_steps)?
    };

    let snf_solution = report.splice(&final_reduced, snf.n());
    let approximation = snf_solution[..n_input].to_vec();
    let eliminated = eliminated_assignments(&report, n_input);
    Ok(SolveReport {
        approximation,
        j,
        h,
        reduced_size,
        iterates,
        eliminated,
        operator_steps,
        duration: start.elapsed(),
    })
}

fn eliminated_assignments(report: &QualitativeReport, n_input: usize) -> Vec<(usize, bool)> {
    let mut out: Vec<(usize, bool)> = report
        .zero_set
        .iter()
        .filter(|&&i| i < n_input)
        .map(|&i| (i, false))
        .chain(report.one_set.iter().filter(|&&i| i < n_input).map(|&i| (i, true)))
        .collect();
    out.sort_unstable();
    out
}

/// Runs the rounded iteration x^(k+1) = round_down(I(x^(k)), h) up to x^(h),
/// shortcutting through detected cycles of the deterministic map.
fn iterate_rounded(
    reduced: &EquationSystem,
    h: u64,
    opts: SolveOptions,
    iterates: &mut Vec<(RationalVector, RationalVector)>,
    operator_steps: &mut usize,
) -> Result<RationalVector, Error> {
    let n = reduced.n();
    let use_newton = reduced.is_pure_pps() && !opts.force_lp;
    let mut states: Vec<RationalVector> = vec![vec![Rational::zero(); n]];
    let mut seen: BTreeMap<RationalVector, u64> = BTreeMap::new();
    seen.insert(states[0].clone(), 0);

    let mut k = 0u64;
    while k < h {
        let x = states.last().unwrap().clone();
        let stepped = if use_newton {
            newton_step(reduced, &x)?
        } else {
            gnm_step(reduced, &x)?
        };
        *operator_steps += 1;
        // exact fixed-point identity P^y(I(y)) = I(y)
        let lin = linearize(reduced, &x)?;
        assert_eq!(
            lin.evaluate(&stepped),
            stepped,
            "internal invariant violated: iterate is not a fixed point of the linearization"
        );
        let one = Rational::one();
        assert!(
            stepped.iter().all(|v| *v <= one),
            "internal invariant violated: iterate exceeds 1 (is the system qualitative-reduced?)"
        );
        let next = round_down(&stepped, h);
        iterates.push((stepped, next.clone()));
        k += 1;
        if let Some(&k0) = seen.get(&next) {
            // the map is deterministic: from step k0 the trajectory repeats
            // with period k - k0, so x^(h) is known without further solves
            let period = k - k0;
            let idx = k0 + (h - k0) % period;
            return Ok(states[idx as usize].clone());
        }
        seen.insert(next.clone(), k);
        states.push(next);
    }
    Ok(states.last().unwrap().clone())
}

/// Policy-improvement computation of I(y) for a minPPS: returns a policy σ
/// with P^y(N_σ(y)) = N_σ(y) together with the iterate N_σ(y), which equals
/// `gnm_step`'s LP optimum exactly. Intended as an independent oracle for the
/// LP path.
pub fn policy_improvement_min(
    sys: &EquationSystem,
    y: &[Rational],
) -> Result<(Policy, RationalVector), Error> {
    if !matches!(sys.flavor(), Flavor::Min | Flavor::Pps) {
        return Err(Error::UnsupportedFlavor(sys.flavor().name()));
    }
    let m_eqs = sys.choice_equations();
    let mut policy = Policy::empty();
    for &i in &m_eqs {
        let Equation::Choice(_, j, _) = sys.equation(i) else { unreachable!() };
        policy.choices.insert(i, *j);
    }
    let lin = linearize(sys, y)?;
    let max_switches = 1u64
        .checked_shl(m_eqs.len() as u32)
        .unwrap_or(u64::MAX)
        .saturating_add(1);
    for _ in 0..max_switches {
        let fixed = sys.apply_policy(&policy)?;
        let iterate = newton_step(&fixed, y)?;
        let image = lin.evaluate(&iterate);
        let worse = (0..sys.n()).find(|&i| image[i] < iterate[i]);
        match worse {
            None => {
                debug_assert_eq!(image, iterate);
                return Ok((policy, iterate));
            }
            Some(i) => {
                let Equation::Choice(_, j, k) = sys.equation(i) else {
                    panic!("internal invariant violated: non-M row above its linearization")
                };
                let pick = if iterate[*j] < iterate[*k] { *j } else { *k };
                debug_assert!(iterate[pick] < iterate[policy.choices[&i]]);
                policy.choices.insert(i, pick);
            }
        }
    }
    panic!("internal invariant violated: policy improvement did not terminate");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_system;
    use crate::rational::{rat, rat_int};
    use num_traits::Signed;

    fn system_a() -> EquationSystem {
        parse_system("x1 = 3/4*x2 + 1/4\nx2 = x1*x1").unwrap()
    }

    fn min_b() -> EquationSystem {
        parse_system(
            "x1 = min(x2, x3)\nx2 = 3/4*x4 + 1/4\nx3 = 1/2*x5 + 3/10\nx4 = x2*x2\nx5 = x3*x3",
        )
        .unwrap()
    }

    #[test]
    fn linearize_examples() {
        let a = system_a();
        // at the origin the Q row becomes the constant 0
        let at0 = linearize(&a, &[rat_int(0), rat_int(0)]).unwrap();
        assert_eq!(at0.rows[1], LinRow::Lin(LinearForm::constant_only(rat_int(0))));

        // at (1/4, 0): x2-row becomes (1/2)x1 - 1/16
        let at = linearize(&a, &[rat(1, 4), rat_int(0)]).unwrap();
        assert_eq!(
            at.rows[1],
            LinRow::Lin(LinearForm { constant: rat(-1, 16), coeffs: vec![(0, rat(1, 2))] })
        );

        // anchor evaluation reproduces evaluate(sys, y)
        let y = vec![rat(1, 5), rat(2, 7)];
        let lin = linearize(&a, &y).unwrap();
        assert_eq!(lin.evaluate(&y), a.evaluate(&y).unwrap());
    }

    #[test]
    fn linearization_identity_lemma() {
        // P^y(x) = P(y) + P'(y)(x - y) on PPS rows, spot-checked pointwise
        let a = system_a();
        let y = vec![rat(1, 3), rat(1, 7)];
        let x = vec![rat(2, 5), rat(1, 2)];
        let lin = linearize(&a, &y).unwrap();
        let jac = a.jacobian(&y).unwrap();
        let py = a.evaluate(&y).unwrap();
        let expect: Vec<Rational> = (0..2)
            .map(|i| {
                let mut acc = py[i].clone();
                for jj in 0..2 {
                    acc += jac.get(i, jj) * (&x[jj] - &y[jj]);
                }
                acc
            })
            .collect();
        assert_eq!(lin.evaluate(&x), expect);
    }

    #[test]
    fn gnm_step_matches_hand_newton() {
        let a = system_a();
        assert_eq!(gnm_step(&a, &[rat_int(0), rat_int(0)]).unwrap(), vec![rat(1, 4), rat_int(0)]);
        assert_eq!(
            gnm_step(&a, &[rat(1, 4), rat_int(0)]).unwrap(),
            vec![rat(13, 40), rat(1, 10)]
        );
    }

    #[test]
    fn newton_step_examples() {
        let a = system_a();
        assert_eq!(newton_step(&a, &[rat_int(0), rat_int(0)]).unwrap(), vec![rat(1, 4), rat_int(0)]);
        assert_eq!(
            newton_step(&a, &[rat(1, 4), rat_int(0)]).unwrap(),
            vec![rat(13, 40), rat(1, 10)]
        );
        // at a fixed point the step returns the point
        let q = vec![rat(1, 3), rat(1, 9)];
        assert_eq!(newton_step(&a, &q).unwrap(), q);
    }

    #[test]
    fn min_gnm_step_is_fixed_point_and_matches_policy_improvement() {
        let b = min_b();
        let y = vec![rat_int(0); 5];
        let by_lp = gnm_step(&b, &y).unwrap();
        let lin = linearize(&b, &y).unwrap();
        assert_eq!(lin.evaluate(&by_lp), by_lp);

        let (_, by_pi) = policy_improvement_min(&b, &y).unwrap();
        assert_eq!(by_lp, by_pi);

        // no M equations: empty policy, iterate = newton_step
        let a = system_a();
        let (sigma, it) = policy_improvement_min(&a, &[rat_int(0), rat_int(0)]).unwrap();
        assert!(sigma.is_empty());
        assert_eq!(it, newton_step(&a, &[rat_int(0), rat_int(0)]).unwrap());
    }

    #[test]
    fn round_down_examples() {
        assert_eq!(
            round_down(&[rat(13, 40), rat(1, 10)], 4),
            vec![rat(5, 16), rat(1, 16)]
        );
        assert_eq!(round_down(&[rat(-1, 100)], 4), vec![rat_int(0)]);
        assert_eq!(round_down(&[rat(1, 4), rat_int(0)], 4), vec![rat(1, 4), rat_int(0)]);
    }

    #[test]
    fn solve_quadratic_to_twenty_bits() {
        let a = system_a();
        let report = solve(&a, 20).unwrap();
        assert_eq!(report.reduced_size, 19);
        assert_eq!(report.h, 20 + 2 + 4 * 19);
        let err = (rat(1, 3) - &report.approximation[0]).abs();
        assert!(err <= crate::rational::pow2_neg(20), "error {err}");
        // iterates are grid multiples in [0, 1)
        for (_, post) in &report.iterates {
            for v in post {
                assert!(*v >= rat_int(0) && *v < rat_int(1));
                let scaled = v * Rational::from_integer(crate::rational::pow2(report.h));
                assert!(scaled.is_integer());
            }
        }
    }

    #[test]
    fn solve_eliminates_and_splices() {
        let sys = parse_system("x1 = x1*x2\nx2 = 1/2*x2 + 1/2\nx3 = 1/2*x3 + 1/4").unwrap();
        let report = solve(&sys, 10).unwrap();
        assert_eq!(report.approximation[0], rat_int(0));
        assert_eq!(report.approximation[1], rat_int(1));
        let err = (rat(1, 2) - &report.approximation[2]).abs();
        assert!(err <= crate::rational::pow2_neg(10));
        assert_eq!(report.eliminated, vec![(0, false), (1, true)]);
        // h is driven by the reduced system's encoding size: the remaining
        // single equation x3 = 1/2 x3 + 1/4 measures (1+2)+(1+3)+1+2 = 10
        assert_eq!(report.reduced_size, 10);
        assert_eq!(report.h, 10 + 2 + 40);
    }

    #[test]
    fn differential_lp_agrees_with_newton() {
        let a = system_a();
        let newton = solve(&a, 12).unwrap();
        let lp = solve_with(&a, 12, SolveOptions { force_lp: true }).unwrap();
        assert_eq!(newton.approximation, lp.approximation);
    }
}
