//! Data model for probabilistic max/min polynomial systems and the basic
//! operations on them: evaluation, Jacobians, Kleene iteration, policy
//! application, encoding size and dependency structure.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::error::Error;
use crate::linalg::{RationalMatrix, RationalVector};
use crate::rational::{bit_length, Rational};

/// A monomial: variable index → positive exponent.
pub type Monomial = BTreeMap<usize, u32>;

/// A probabilistic polynomial: nonnegative coefficients and constant with
/// total mass ≤ 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbPolynomial {
    pub constant: Rational,
    /// (coefficient, monomial) pairs; monomials are distinct and nonempty.
    pub terms: Vec<(Rational, Monomial)>,
}

impl ProbPolynomial {
    pub fn constant(c: Rational) -> Self {
        ProbPolynomial { constant: c, terms: Vec::new() }
    }

    /// Sum of the constant and all coefficients.
    pub fn mass(&self) -> Rational {
        self.terms
            .iter()
            .fold(self.constant.clone(), |acc, (c, _)| acc + c)
    }

    pub fn check_probabilistic(&self) -> Result<(), String> {
        if self.constant.is_negative() {
            return Err("negative constant term".into());
        }
        for (c, m) in &self.terms {
            if c.is_negative() {
                return Err("negative coefficient".into());
            }
            if m.is_empty() {
                return Err("empty monomial stored as term".into());
            }
            if m.values().any(|&e| e == 0) {
                return Err("zero exponent in monomial".into());
            }
        }
        if self.mass() > Rational::one() {
            return Err(format!(
                "coefficient sum {} exceeds 1",
                crate::rational::fraction_string(&self.mass())
            ));
        }
        Ok(())
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(_, m)| m.values().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// The single variable if this polynomial is exactly `x_j`.
    pub fn as_bare_variable(&self) -> Option<usize> {
        if !self.constant.is_zero() || self.terms.len() != 1 {
            return None;
        }
        let (c, m) = &self.terms[0];
        if c.is_one() && m.len() == 1 {
            let (&v, &e) = m.iter().next().unwrap();
            if e == 1 {
                return Some(v);
            }
        }
        None
    }

    pub fn evaluate(&self, point: &[Rational]) -> Rational {
        let mut acc = self.constant.clone();
        for (c, m) in &self.terms {
            let mut t = c.clone();
            for (&v, &e) in m {
                t *= num_traits::pow::pow(point[v].clone(), e as usize);
            }
            acc += t;
        }
        acc
    }

    pub fn variables(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.iter().flat_map(|(_, m)| m.keys().copied())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChoiceOp {
    Max,
    Min,
}

impl ChoiceOp {
    pub fn pick<'a>(&self, a: &'a Rational, b: &'a Rational) -> &'a Rational {
        match self {
            ChoiceOp::Max => a.max(b),
            ChoiceOp::Min => a.min(b),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ChoiceOp::Max => "max",
            ChoiceOp::Min => "min",
        }
    }
}

/// Linear form `constant + Σ coeff_j · x_j` (form L payload).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearForm {
    pub constant: Rational,
    /// Sorted by variable index, coefficients nonzero.
    pub coeffs: Vec<(usize, Rational)>,
}

impl LinearForm {
    pub fn constant_only(c: Rational) -> Self {
        LinearForm { constant: c, coeffs: Vec::new() }
    }

    /// The linear form `x_j`.
    pub fn variable(j: usize) -> Self {
        LinearForm { constant: Rational::zero(), coeffs: vec![(j, Rational::one())] }
    }

    pub fn mass(&self) -> Rational {
        self.coeffs
            .iter()
            .fold(self.constant.clone(), |acc, (_, c)| acc + c)
    }

    pub fn evaluate(&self, point: &[Rational]) -> Rational {
        self.coeffs
            .iter()
            .fold(self.constant.clone(), |acc, (j, c)| acc + c * &point[*j])
    }
}

/// One equation `x_i = P_i(x)` of a system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Equation {
    /// Form L: `a_0 + Σ a_j x_j`.
    Linear(LinearForm),
    /// Form Q: `x_j · x_k`.
    Product(usize, usize),
    /// Form M: `max(x_j, x_k)` or `min(x_j, x_k)`.
    Choice(ChoiceOp, usize, usize),
    /// Pre-SNF general form: a max/min over probabilistic polynomials
    /// (`op` is `None` iff there is a single alternative).
    Poly {
        op: Option<ChoiceOp>,
        alternatives: Vec<ProbPolynomial>,
    },
}

impl Equation {
    pub fn is_snf(&self) -> bool {
        !matches!(self, Equation::Poly { .. })
    }

    /// Variables this equation depends on (with nonzero coefficient).
    pub fn dependencies(&self) -> Vec<usize> {
        match self {
            Equation::Linear(f) => f.coeffs.iter().map(|(j, _)| *j).collect(),
            Equation::Product(j, k) | Equation::Choice(_, j, k) => {
                if j == k {
                    vec![*j]
                } else {
                    vec![*j, *k]
                }
            }
            Equation::Poly { alternatives, .. } => {
                let mut vars: Vec<usize> =
                    alternatives.iter().flat_map(|p| p.variables()).collect();
                vars.sort_unstable();
                vars.dedup();
                vars
            }
        }
    }
}

/// System flavor: pure PPS, maxPPS, minPPS, or mixed max-minPPS.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    Pps,
    Max,
    Min,
    MaxMin,
}

impl Flavor {
    pub fn name(&self) -> &'static str {
        match self {
            Flavor::Pps => "pure PPS",
            Flavor::Max => "maxPPS",
            Flavor::Min => "minPPS",
            Flavor::MaxMin => "max-minPPS",
        }
    }

    /// The choice operator of a pure max or min system.
    pub fn op(&self) -> Option<ChoiceOp> {
        match self {
            Flavor::Max => Some(ChoiceOp::Max),
            Flavor::Min => Some(ChoiceOp::Min),
            _ => None,
        }
    }
}

/// A pure policy: for each form-M equation index, the chosen argument index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Policy {
    pub choices: BTreeMap<usize, usize>,
}

impl Policy {
    pub fn empty() -> Self {
        Policy::default()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }
}

/// A max/minPPS: `n` equations, equation `i` owning variable `x_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquationSystem {
    equations: Vec<Equation>,
    var_names: Vec<String>,
    flavor: Flavor,
}

impl EquationSystem {
    /// Builds and validates a system. Mixed max/min equations are rejected
    /// unless `allow_max_min` is set.
    pub fn new(
        equations: Vec<Equation>,
        var_names: Vec<String>,
        allow_max_min: bool,
    ) -> Result<Self, Error> {
        let n = equations.len();
        if var_names.len() != n {
            return Err(Error::invalid("one variable name per equation required"));
        }
        let mut saw_max = false;
        let mut saw_min = false;
        for (i, eq) in equations.iter().enumerate() {
            for v in eq.dependencies() {
                if v >= n {
                    return Err(Error::invalid(format!(
                        "equation {i} references variable index {v} out of range (n = {n})"
                    )));
                }
            }
            match eq {
                Equation::Linear(f) => {
                    if f.constant.is_negative() || f.coeffs.iter().any(|(_, c)| c.is_negative()) {
                        return Err(Error::invalid(format!("negative coefficient in equation {i}")));
                    }
                    if f.mass() > Rational::one() {
                        return Err(Error::invalid(format!(
                            "coefficient sum exceeds 1 in equation {i}"
                        )));
                    }
                }
                Equation::Product(..) => {}
                Equation::Choice(op, ..) => match op {
                    ChoiceOp::Max => saw_max = true,
                    ChoiceOp::Min => saw_min = true,
                },
                Equation::Poly { op, alternatives } => {
                    if alternatives.is_empty() {
                        return Err(Error::invalid(format!("equation {i} has no alternatives")));
                    }
                    if op.is_none() && alternatives.len() > 1 {
                        return Err(Error::invalid(format!(
                            "equation {i} has several alternatives but no max/min operator"
                        )));
                    }
                    for p in alternatives {
                        p.check_probabilistic()
                            .map_err(|msg| Error::invalid(format!("equation {i}: {msg}")))?;
                    }
                    if alternatives.len() > 1 {
                        match op.unwrap() {
                            ChoiceOp::Max => saw_max = true,
                            ChoiceOp::Min => saw_min = true,
                        }
                    }
                }
            }
        }
        let flavor = match (saw_max, saw_min) {
            (false, false) => Flavor::Pps,
            (true, false) => Flavor::Max,
            (false, true) => Flavor::Min,
            (true, true) => {
                if !allow_max_min {
                    return Err(Error::invalid(
                        "system mixes max and min equations; max-min systems need the explicit flag",
                    ));
                }
                Flavor::MaxMin
            }
        };
        Ok(EquationSystem { equations, var_names, flavor })
    }

    pub fn n(&self) -> usize {
        self.equations.len()
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    pub fn equation(&self, i: usize) -> &Equation {
        &self.equations[i]
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.var_names[i]
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn is_snf(&self) -> bool {
        self.equations.iter().all(Equation::is_snf)
    }

    pub fn is_pure_pps(&self) -> bool {
        self.flavor == Flavor::Pps
    }

    /// Indices of form-M equations.
    pub fn choice_equations(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| matches!(self.equations[i], Equation::Choice(..)))
            .collect()
    }

    fn check_point(&self, point: &[Rational]) -> Result<(), Error> {
        if point.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: point.len() });
        }
        Ok(())
    }

    /// Exact componentwise value of P at `point`, max/min resolved
    /// numerically.
    pub fn evaluate(&self, point: &[Rational]) -> Result<RationalVector, Error> {
        self.check_point(point)?;
        Ok(self
            .equations
            .iter()
            .map(|eq| match eq {
                Equation::Linear(f) => f.evaluate(point),
                Equation::Product(j, k) => &point[*j] * &point[*k],
                Equation::Choice(op, j, k) => op.pick(&point[*j], &point[*k]).clone(),
                Equation::Poly { op, alternatives } => {
                    let mut vals = alternatives.iter().map(|p| p.evaluate(point));
                    let first = vals.next().expect("nonempty alternatives");
                    match op {
                        None => first,
                        Some(op) => vals.fold(first, |acc, v| op.pick(&acc, &v).clone()),
                    }
                }
            })
            .collect())
    }

    /// Jacobian of a pure PPS in SNF at `point`.
    pub fn jacobian(&self, point: &[Rational]) -> Result<RationalMatrix, Error> {
        self.check_point(point)?;
        let n = self.n();
        let mut m = RationalMatrix::zero(n, n);
        for (i, eq) in self.equations.iter().enumerate() {
            match eq {
                Equation::Linear(f) => {
                    for (j, c) in &f.coeffs {
                        m.set(i, *j, c.clone());
                    }
                }
                Equation::Product(j, k) => {
                    if j == k {
                        m.set(i, *j, &point[*j] + &point[*j]);
                    } else {
                        m.set(i, *j, point[*k].clone());
                        m.set(i, *k, point[*j].clone());
                    }
                }
                Equation::Choice(..) => return Err(Error::UnsupportedFlavor(self.flavor.name())),
                Equation::Poly { .. } => {
                    return Err(Error::invalid("jacobian requires an SNF system"))
                }
            }
        }
        Ok(m)
    }

    /// P applied `k` times to the zero vector, exactly.
    pub fn kleene_iterate(&self, k: usize) -> RationalVector {
        let mut x = vec![Rational::zero(); self.n()];
        for _ in 0..k {
            x = self.evaluate(&x).expect("dimension is consistent");
        }
        x
    }

    /// Replaces the form-M equations in σ's domain by `x_i = x_{σ(i)}`.
    /// The policy may cover a subset of the M equations (used by the
    /// max-min verifier); [`EquationSystem::apply_policy`] requires full
    /// coverage.
    pub fn fix_policy_partial(&self, policy: &Policy) -> Result<EquationSystem, Error> {
        let mut equations = self.equations.clone();
        for (&i, &choice) in &policy.choices {
            match self.equations.get(i) {
                Some(Equation::Choice(_, j, k)) => {
                    if choice != *j && choice != *k {
                        return Err(Error::PolicyMismatch(format!(
                            "choice {choice} is not an argument of equation {i}"
                        )));
                    }
                    equations[i] = Equation::Linear(LinearForm::variable(choice));
                }
                Some(_) => {
                    return Err(Error::PolicyMismatch(format!(
                        "equation {i} is not a max/min equation"
                    )))
                }
                None => {
                    return Err(Error::PolicyMismatch(format!(
                        "equation index {i} out of range"
                    )))
                }
            }
        }
        EquationSystem::new(equations, self.var_names.clone(), true)
    }

    /// Applies a policy covering every form-M equation, producing a pure PPS.
    pub fn apply_policy(&self, policy: &Policy) -> Result<EquationSystem, Error> {
        let m_eqs = self.choice_equations();
        if policy.choices.len() != m_eqs.len()
            || m_eqs.iter().any(|i| !policy.choices.contains_key(i))
        {
            return Err(Error::PolicyMismatch(
                "policy domain must be exactly the set of max/min equations".into(),
            ));
        }
        let fixed = self.fix_policy_partial(policy)?;
        debug_assert!(fixed.is_pure_pps());
        Ok(fixed)
    }

    /// Total bit-encoding size |P| of an SNF system: per equation a 2-bit
    /// kind tag, per form-L coefficient a/b its numerator+denominator bit
    /// lengths, and ⌈log2(n+1)⌉ bits per variable occurrence.
    pub fn encoding_size(&self) -> u64 {
        assert!(self.is_snf(), "encoding_size requires an SNF system");
        let index_bits = bit_length(&num_bigint::BigInt::from(self.n()));
        let rational_size =
            |r: &Rational| bit_length(r.numer()) + bit_length(r.denom());
        let mut total = 0u64;
        for eq in &self.equations {
            total += 2; // kind tag
            match eq {
                Equation::Linear(f) => {
                    if !f.constant.is_zero() {
                        total += rational_size(&f.constant);
                    }
                    for (_, c) in &f.coeffs {
                        total += rational_size(c) + index_bits;
                    }
                }
                Equation::Product(..) | Equation::Choice(..) => {
                    total += 2 * index_bits;
                }
                Equation::Poly { .. } => unreachable!("checked SNF above"),
            }
        }
        total
    }

    /// Strongly connected components of the dependency graph, topologically
    /// sorted with dependencies later in the list. An edge (i, j) exists iff
    /// x_j occurs in P_i with a nonzero coefficient.
    pub fn scc_decomposition(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let adj: Vec<Vec<usize>> = self.equations.iter().map(Equation::dependencies).collect();
        let mut radj = vec![Vec::new(); n];
        for (i, deps) in adj.iter().enumerate() {
            for &j in deps {
                radj[j].push(i);
            }
        }
        // Kosaraju: first pass finish order, second pass on the reverse graph.
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            seen[start] = true;
            while let Some(&mut (v, ref mut idx)) = stack.last_mut() {
                if *idx < adj[v].len() {
                    let next = adj[v][*idx];
                    *idx += 1;
                    if !seen[next] {
                        seen[next] = true;
                        stack.push((next, 0));
                    }
                } else {
                    order.push(v);
                    stack.pop();
                }
            }
        }
        let mut comp = vec![usize::MAX; n];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for &start in order.iter().rev() {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut members = Vec::new();
            let mut stack = vec![start];
            comp[start] = id;
            while let Some(v) = stack.pop() {
                members.push(v);
                for &u in &radj[v] {
                    if comp[u] == usize::MAX {
                        comp[u] = id;
                        stack.push(u);
                    }
                }
            }
            members.sort_unstable();
            comps.push(members);
        }
        comps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_system;
    use crate::rational::{rat, rat_int};

    fn system_a() -> EquationSystem {
        parse_system("x1 = 3/4*x2 + 1/4\nx2 = x1*x1").unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let a = system_a();
        assert_eq!(
            a.evaluate(&[rat_int(0), rat_int(0)]).unwrap(),
            vec![rat(1, 4), rat_int(0)]
        );
        // fixed point stays fixed
        let q = vec![rat(1, 3), rat(1, 9)];
        assert_eq!(a.evaluate(&q).unwrap(), q);

        let m = parse_system("x1 = max(x2, x3)\nx2 = 1/3\nx3 = 1/2").unwrap();
        let v = m
            .evaluate(&[rat_int(0), rat(1, 3), rat(1, 2)])
            .unwrap();
        assert_eq!(v[0], rat(1, 2));

        assert!(matches!(
            a.evaluate(&[rat_int(0)]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn jacobian_examples() {
        let a = system_a();
        let j = a.jacobian(&[rat(1, 4), rat_int(0)]).unwrap();
        assert_eq!(j.row(0), &[rat_int(0), rat(3, 4)]);
        assert_eq!(j.row(1), &[rat(1, 2), rat_int(0)]);

        // all Q rows vanish at the origin
        let j0 = a.jacobian(&[rat_int(0), rat_int(0)]).unwrap();
        assert_eq!(j0.row(1), &[rat_int(0), rat_int(0)]);

        // d(x^2)/dx = 2t
        let sq = parse_system("x1 = 1/2\nx2 = x1*x1").unwrap();
        let j = sq.jacobian(&[rat(1, 5), rat_int(0)]).unwrap();
        assert_eq!(j.row(1), &[rat(2, 5), rat_int(0)]);

        let m = parse_system("x1 = max(x2, x2)\nx2 = 1/2").unwrap();
        assert!(m.jacobian(&[rat_int(0), rat_int(0)]).is_err());
    }

    #[test]
    fn kleene_examples() {
        let a = system_a();
        assert_eq!(a.kleene_iterate(0), vec![rat_int(0), rat_int(0)]);
        assert_eq!(a.kleene_iterate(1), vec![rat(1, 4), rat_int(0)]);
        assert_eq!(a.kleene_iterate(2), vec![rat(1, 4), rat(1, 16)]);
        assert_eq!(a.kleene_iterate(3), vec![rat(19, 64), rat(1, 16)]);
    }

    #[test]
    fn apply_policy_examples() {
        let m = parse_system("x1 = max(x2, x3)\nx2 = 1/2\nx3 = x2*x2").unwrap();
        let mut sigma = Policy::empty();
        sigma.choices.insert(0, 2);
        let fixed = m.apply_policy(&sigma).unwrap();
        assert_eq!(
            fixed.equation(0),
            &Equation::Linear(LinearForm::variable(2))
        );
        assert!(fixed.is_pure_pps());

        // pure PPS with the empty policy is unchanged
        let a = system_a();
        assert_eq!(a.apply_policy(&Policy::empty()).unwrap(), a);

        // domain mismatch
        let bad = Policy::empty();
        assert!(m.apply_policy(&bad).is_err());
        let mut wrong_arg = Policy::empty();
        wrong_arg.choices.insert(0, 1usize.wrapping_neg());
        assert!(m.apply_policy(&wrong_arg).is_err());
    }

    #[test]
    fn encoding_size_examples() {
        let sq = parse_system("x1 = x1*x1").unwrap();
        assert_eq!(sq.encoding_size(), 4);

        // system A: L row (bits(3)+bits(4)) + (bits(1)+bits(4)) + 2 index
        // bits + tag, Q row 2*2 + tag
        assert_eq!(system_a().encoding_size(), 19);

        // zero coefficients contribute nothing
        let z = parse_system("x1 = 0.5").unwrap();
        let with_zero = parse_system("x1 = 0*x1 + 0.5").unwrap();
        assert_eq!(z.encoding_size(), with_zero.encoding_size());
    }

    #[test]
    fn scc_examples() {
        let c = parse_system("x1 = x1*x2\nx2 = 1/2*x2 + 1/2").unwrap();
        assert_eq!(c.scc_decomposition(), vec![vec![0], vec![1]]);

        let self_loop = parse_system("x1 = x1*x1").unwrap();
        assert_eq!(self_loop.scc_decomposition(), vec![vec![0]]);

        let constants = parse_system("x1 = 1/2\nx2 = 1/3\nx3 = 1/4").unwrap();
        assert_eq!(constants.scc_decomposition().len(), 3);
    }

    #[test]
    fn flavor_rules() {
        let mixed = "x1 = max(x2, x3)\nx2 = min(x3, x3)\nx3 = 1/2";
        assert!(parse_system(mixed).is_err());
        assert_eq!(
            crate::parse::parse_system_with_options(mixed, true).unwrap().flavor(),
            Flavor::MaxMin
        );
    }
}
