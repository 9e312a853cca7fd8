//! Shared test oracles, independent of the solver's implementation path:
//! floating-point Kleene iteration, bisection square roots, power-iteration
//! spectral radii, a basic-feasible-point LP oracle, and seeded random
//! instance generators.

#![allow(dead_code)]

use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ppsolve::linalg::{solve_linear, RationalMatrix};
use ppsolve::lp::{Constraint, Direction, LinearProgram, LpOutcome, Relation};
use ppsolve::rational::{rat, rat_int, Rational};
use ppsolve::system::{ChoiceOp, Equation, EquationSystem, LinearForm, Policy};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- fixtures

/// SNF of x = 3/4 x^2 + 1/4; q* = (1/3, 1/9).
pub fn system_a() -> EquationSystem {
    ppsolve::parse::parse_system("x1 = 3/4*x2 + 1/4\nx2 = x1*x1").unwrap()
}

/// SNF of x = 1/2 x^2 + 3/10; q* = (1 - sqrt(2/5), (1 - sqrt(2/5))^2).
pub fn system_irrational() -> EquationSystem {
    ppsolve::parse::parse_system("x1 = 1/2*x2 + 3/10\nx2 = x1*x1").unwrap()
}

/// Five-variable max system over the 1/3 and 1 - sqrt(2/5) gadgets.
pub fn system_b_max() -> EquationSystem {
    ppsolve::parse::parse_system(
        "x1 = max(x2, x3)\nx2 = 3/4*x4 + 1/4\nx3 = 1/2*x5 + 3/10\nx4 = x2*x2\nx5 = x3*x3",
    )
    .unwrap()
}

pub fn system_b_min() -> EquationSystem {
    ppsolve::parse::parse_system(
        "x1 = min(x2, x3)\nx2 = 3/4*x4 + 1/4\nx3 = 1/2*x5 + 3/10\nx4 = x2*x2\nx5 = x3*x3",
    )
    .unwrap()
}

/// Tie-breaking repair fixture: q* = (1/2, 1/2, 1/2).
pub fn system_d() -> EquationSystem {
    ppsolve::parse::parse_system("x1 = max(x2, x3)\nx2 = x1\nx3 = 1/2*x3 + 1/4").unwrap()
}

/// Max-min fixture: max at x1, min at x2, three quadratic gadgets.
pub fn system_e() -> EquationSystem {
    ppsolve::parse::parse_system_with_options(
        "x1 = max(x2, x3)\n\
         x2 = min(x4, x5)\n\
         x3 = 1/2*x6 + 1/4\n\
         x4 = 3/4*x7 + 1/4\n\
         x5 = 1/2*x8 + 3/10\n\
         x6 = x3*x3\n\
         x7 = x4*x4\n\
         x8 = x5*x5",
        true,
    )
    .unwrap()
}

// ------------------------------------------------------------ float oracle

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().expect("rational in [0,1] converts")
}

fn eval_f64(sys: &EquationSystem, x: &[f64]) -> Vec<f64> {
    sys.equations()
        .iter()
        .map(|eq| match eq {
            Equation::Linear(f) => {
                let mut acc = to_f64(&f.constant);
                for (j, c) in &f.coeffs {
                    acc += to_f64(c) * x[*j];
                }
                acc
            }
            Equation::Product(j, k) => x[*j] * x[*k],
            Equation::Choice(ChoiceOp::Max, j, k) => x[*j].max(x[*k]),
            Equation::Choice(ChoiceOp::Min, j, k) => x[*j].min(x[*k]),
            Equation::Poly { op, alternatives } => {
                let vals = alternatives.iter().map(|p| {
                    let mut acc = to_f64(&p.constant);
                    for (c, m) in &p.terms {
                        let mut t = to_f64(c);
                        for (&v, &e) in m {
                            t *= x[v].powi(e as i32);
                        }
                        acc += t;
                    }
                    acc
                });
                match op {
                    Some(ChoiceOp::Min) => vals.fold(f64::INFINITY, f64::min),
                    _ => vals.fold(f64::NEG_INFINITY, f64::max),
                }
            }
        })
        .collect()
}

/// Floating-point Kleene iteration from the zero vector; the numeric view of
/// q* used to cross-validate the exact analysis.
pub fn float_kleene(sys: &EquationSystem, iters: usize) -> Vec<f64> {
    let mut x = vec![0.0; sys.n()];
    for _ in 0..iters {
        x = eval_f64(sys, &x);
    }
    x
}

// -------------------------------------------------------------- sqrt oracle

/// Rational bracket l ≤ sqrt(v) ≤ u with u − l ≤ 2^-bits, by bisection.
pub fn sqrt_bounds(v: &Rational, bits: u64) -> (Rational, Rational) {
    assert!(!v.is_negative());
    let one = Rational::one();
    let mut lo = Rational::zero();
    let mut hi = if *v > one { v.clone() } else { one };
    let eps = ppsolve::rational::pow2_neg(bits);
    while (&hi - &lo) > eps {
        let mid = (&hi + &lo) / rat_int(2);
        if &mid * &mid <= *v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

// ----------------------------------------------------- spectral radius f64

/// Power-iteration estimate of the spectral radius of a nonnegative matrix.
pub fn power_iteration_rho(a: &RationalMatrix, iters: usize) -> f64 {
    let n = a.rows();
    if n == 0 {
        return 0.0;
    }
    let m: Vec<Vec<f64>> = (0..n)
        .map(|i| a.row(i).iter().map(to_f64).collect())
        .collect();
    let mut v = vec![1.0; n];
    let mut lambda = 0.0;
    for _ in 0..iters {
        let mut next = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                next[i] += m[i][j] * v[j];
            }
        }
        let norm: f64 = next.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        for x in next.iter_mut() {
            *x /= norm;
        }
        v = next;
    }
    lambda
}

// ------------------------------------------------------------- LP oracle

/// Brute-force LP oracle: enumerates all candidate vertices (square
/// subsystems of active constraints), keeps the feasible ones, and optimizes
/// over them. Valid for LPs whose feasible set is a pointed polytope, which
/// the random generator guarantees with box rows.
pub fn brute_force_lp(lp: &LinearProgram) -> LpOutcome {
    let n = lp.objective.len();
    let mut rows: Vec<(Vec<Rational>, Relation, Rational)> = lp
        .constraints
        .iter()
        .map(|c| (c.coeffs.clone(), c.relation, c.rhs.clone()))
        .collect();
    for (j, b) in lp.bounds.iter().enumerate() {
        let mut unit = vec![Rational::zero(); n];
        unit[j] = Rational::one();
        if let Some(l) = &b.lower {
            rows.push((unit.clone(), Relation::Ge, l.clone()));
        }
        if let Some(u) = &b.upper {
            rows.push((unit.clone(), Relation::Le, u.clone()));
        }
    }
    let feasible = |x: &[Rational]| {
        rows.iter().all(|(coeffs, rel, rhs)| {
            let lhs = coeffs
                .iter()
                .zip(x)
                .map(|(a, v)| a * v)
                .fold(Rational::zero(), |acc, t| acc + t);
            match rel {
                Relation::Le => lhs <= *rhs,
                Relation::Ge => lhs >= *rhs,
                Relation::Eq => lhs == *rhs,
            }
        })
    };
    let m = rows.len();
    let mut best: Option<(Vec<Rational>, Rational)> = None;
    let mut subset = vec![0usize; n];
    enumerate_subsets(m, n, &mut subset, 0, 0, &mut |chosen: &[usize]| {
        let mat = RationalMatrix::from_rows(chosen.iter().map(|&i| rows[i].0.clone()).collect());
        let rhs: Vec<Rational> = chosen.iter().map(|&i| rows[i].2.clone()).collect();
        let Ok(x) = solve_linear(&mat, &rhs) else {
            return;
        };
        if !feasible(&x) {
            return;
        }
        let value = lp
            .objective
            .iter()
            .zip(&x)
            .map(|(c, v)| c * v)
            .fold(Rational::zero(), |acc, t| acc + t);
        let better = match (&best, lp.direction) {
            (None, _) => true,
            (Some((_, bv)), Direction::Minimize) => value < *bv,
            (Some((_, bv)), Direction::Maximize) => value > *bv,
        };
        if better {
            best = Some((x, value));
        }
    });
    match best {
        Some((point, value)) => LpOutcome::Optimal { point, value },
        None => LpOutcome::Infeasible,
    }
}

fn enumerate_subsets(
    m: usize,
    k: usize,
    subset: &mut Vec<usize>,
    depth: usize,
    start: usize,
    visit: &mut dyn FnMut(&[usize]),
) {
    if depth == k {
        visit(subset);
        return;
    }
    for i in start..m {
        subset[depth] = i;
        enumerate_subsets(m, k, subset, depth + 1, i + 1, visit);
    }
}

/// Random LP with ≤ `max_vars` variables and ≤ `max_rows` extra constraints,
/// boxed so the feasible region (if any) is a polytope.
pub fn random_lp(rng: &mut ChaCha8Rng, max_vars: usize, max_rows: usize) -> LinearProgram {
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(1..=max_rows);
    let coeff = |rng: &mut ChaCha8Rng| {
        let den = rng.gen_range(1..=6i64);
        rat(rng.gen_range(-8..=8i64), den)
    };
    let mut constraints = Vec::new();
    for _ in 0..m {
        let coeffs: Vec<Rational> = (0..n).map(|_| coeff(rng)).collect();
        let relation = match rng.gen_range(0..6u8) {
            0 => Relation::Ge,
            1 => Relation::Eq,
            _ => Relation::Le,
        };
        constraints.push(Constraint { coeffs, relation, rhs: coeff(rng) });
    }
    // box rows keep every instance bounded
    for j in 0..n {
        let mut unit = vec![Rational::zero(); n];
        unit[j] = Rational::one();
        constraints.push(Constraint {
            coeffs: unit.clone(),
            relation: Relation::Le,
            rhs: rat_int(20),
        });
        constraints.push(Constraint { coeffs: unit, relation: Relation::Ge, rhs: rat_int(-20) });
    }
    LinearProgram {
        direction: if rng.gen_bool(0.5) { Direction::Minimize } else { Direction::Maximize },
        objective: (0..n).map(|_| coeff(rng)).collect(),
        constraints,
        bounds: Vec::new(),
    }
}

// ------------------------------------------------ random system generators

/// Random SNF system: linear rows with denominators below 2^`denom_bits`,
/// product rows, and up to `max_m` max/min rows of the given operator
/// (`None` for a pure PPS).
pub fn random_snf_system(
    rng: &mut ChaCha8Rng,
    max_n: usize,
    op: Option<ChoiceOp>,
    max_m: usize,
) -> EquationSystem {
    let n = rng.gen_range(2..=max_n.max(2));
    let mut m_budget = max_m;
    let mut equations = Vec::with_capacity(n);
    for _ in 0..n {
        let kind = rng.gen_range(0..10u8);
        let eq = if kind < 5 {
            // linear row: up to two arguments plus a constant, with the
            // numerators split under a common small denominator
            let den = rng.gen_range(2..=255u32) as i64;
            let args = rng.gen_range(0..=2usize);
            let mut remaining = den;
            let mut coeffs = Vec::new();
            let mut used = Vec::new();
            for _ in 0..args {
                let v = rng.gen_range(0..n);
                if used.contains(&v) {
                    continue;
                }
                used.push(v);
                let num = rng.gen_range(0..=remaining);
                remaining -= num;
                if num > 0 {
                    coeffs.push((v, rat(num, den)));
                }
            }
            let constant = if rng.gen_bool(0.75) {
                let full_mass = rng.gen_bool(0.3);
                let num = if full_mass { remaining } else { rng.gen_range(0..=remaining) };
                rat(num, den)
            } else {
                rat_int(0)
            };
            coeffs.sort_by_key(|(v, _)| *v);
            Equation::Linear(LinearForm { constant, coeffs })
        } else if kind < 8 || m_budget == 0 || op.is_none() {
            Equation::Product(rng.gen_range(0..n), rng.gen_range(0..n))
        } else {
            m_budget -= 1;
            Equation::Choice(op.unwrap(), rng.gen_range(0..n), rng.gen_range(0..n))
        };
        equations.push(eq);
    }
    let names = (0..n).map(|i| format!("x{}", i + 1)).collect();
    EquationSystem::new(equations, names, false).expect("generator produces valid systems")
}

/// Random general (possibly non-SNF) PPS with polynomial rows of degree ≤ 3,
/// for SNF-preservation tests.
pub fn random_general_pps(rng: &mut ChaCha8Rng, max_n: usize) -> EquationSystem {
    use ppsolve::system::ProbPolynomial;
    use std::collections::BTreeMap;
    let n = rng.gen_range(1..=max_n.max(1));
    let mut equations = Vec::with_capacity(n);
    for _ in 0..n {
        let den = rng.gen_range(2..=32u32) as i64;
        let mut remaining = den;
        let terms_count = rng.gen_range(0..=2usize);
        let mut terms: Vec<(Rational, BTreeMap<usize, u32>)> = Vec::new();
        for _ in 0..terms_count {
            let num = rng.gen_range(0..=remaining);
            remaining -= num;
            if num == 0 {
                continue;
            }
            let mut monomial: BTreeMap<usize, u32> = BTreeMap::new();
            for _ in 0..rng.gen_range(1..=3usize) {
                *monomial.entry(rng.gen_range(0..n)).or_insert(0) += 1;
            }
            if let Some(t) = terms.iter_mut().find(|(_, m)| *m == monomial) {
                t.0 += rat(num, den);
            } else {
                terms.push((rat(num, den), monomial));
            }
        }
        let constant = rat(rng.gen_range(0..=remaining), den);
        equations.push(Equation::Poly {
            op: None,
            alternatives: vec![ProbPolynomial { constant, terms }],
        });
    }
    let names = (0..n).map(|i| format!("x{}", i + 1)).collect();
    EquationSystem::new(equations, names, false).expect("generator produces valid systems")
}

// --------------------------------------------------------- policy helpers

/// All policies of an SNF max/min system (small M counts only).
pub fn all_policies(sys: &EquationSystem) -> Vec<Policy> {
    let m_eqs = sys.choice_equations();
    assert!(m_eqs.len() <= 20);
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << m_eqs.len()) {
        let mut p = Policy::empty();
        for (bit, &i) in m_eqs.iter().enumerate() {
            let Equation::Choice(_, j, k) = sys.equation(i) else { unreachable!() };
            p.choices.insert(i, if mask >> bit & 1 == 0 { *j } else { *k });
        }
        out.push(p);
    }
    out
}

/// True iff every SCC Jacobian-at-1 spectral radius of every policy fixing
/// of `sys` is at least `margin` away from 1 (numerically).
pub fn criticality_margin_ok(sys: &EquationSystem, margin: f64) -> bool {
    for policy in all_policies(sys) {
        let fixed = sys.apply_policy(&policy).unwrap();
        let ones = vec![Rational::one(); fixed.n()];
        let jac = fixed.jacobian(&ones).unwrap();
        for scc in fixed.scc_decomposition() {
            let m = scc.len();
            let mut sub = RationalMatrix::zero(m, m);
            for (r, &i) in scc.iter().enumerate() {
                for (c, &j) in scc.iter().enumerate() {
                    sub.set(r, c, jac.get(i, j).clone());
                }
            }
            let rho = power_iteration_rho(&sub, 3000);
            if (rho - 1.0).abs() < margin {
                return false;
            }
        }
    }
    true
}
