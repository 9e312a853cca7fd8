//! Conversion of a general max/minPPS to simple normal form (SNF), where
//! every equation is linear (L), a product of two variables (Q), or a binary
//! max/min (M).
//!
//! Original variables keep their indices; auxiliary variables are appended,
//! so the LFP of the input is the prefix projection of the output's LFP and
//! policies correspond bijectively.

use std::collections::BTreeMap;
use std::collections::HashSet;

use num_traits::Zero;

use crate::parse::classify_polynomial;
use crate::rational::Rational;
use crate::system::{
    ChoiceOp, Equation, EquationSystem, LinearForm, Monomial, ProbPolynomial,
};

struct SnfBuilder {
    equations: Vec<Option<Equation>>,
    names: Vec<String>,
    taken: HashSet<String>,
    /// squaring chains: (variable, level) -> chain variable with value v^(2^level)
    square_chain: BTreeMap<(usize, u32), usize>,
    /// monomial -> variable already introduced for it
    monomial_vars: BTreeMap<Monomial, usize>,
}

impl SnfBuilder {
    fn fresh(&mut self, base: &str) -> usize {
        let mut name = base.to_string();
        let mut k = 1usize;
        while self.taken.contains(&name) {
            k += 1;
            name = format!("{base}_{k}");
        }
        self.taken.insert(name.clone());
        self.names.push(name);
        self.equations.push(None);
        self.names.len() - 1
    }

    /// Variable carrying v^(2^level); level ≥ 1 builds the squaring chain
    /// v², (v²)², …
    fn square_var(&mut self, v: usize, level: u32) -> usize {
        if level == 0 {
            return v;
        }
        if let Some(&w) = self.square_chain.get(&(v, level)) {
            return w;
        }
        let prev = self.square_var(v, level - 1);
        let name = if level == 1 {
            format!("{}_sq", self.names[v])
        } else {
            format!("{}_sq{}", self.names[v], 1u64 << level)
        };
        let w = self.fresh(&name);
        self.equations[w] = Some(Equation::Product(prev, prev));
        self.square_chain.insert((v, level), w);
        w
    }

    /// Chains a product of ≥ 2 factors into Q equations, returning the head
    /// equation; `target` receives the head.
    fn emit_product(&mut self, target: usize, factors: &[usize], base: &str) {
        debug_assert!(factors.len() >= 2);
        if factors.len() == 2 {
            self.equations[target] = Some(Equation::Product(factors[0], factors[1]));
            return;
        }
        let rest = self.fresh(&format!("{base}_p"));
        self.equations[target] = Some(Equation::Product(factors[0], rest));
        self.emit_product(rest, &factors[1..], base);
    }

    /// A variable whose value equals the (degree ≥ 2) monomial.
    fn monomial_var(&mut self, m: &Monomial, base: &str) -> usize {
        if let Some(&w) = self.monomial_vars.get(m) {
            return w;
        }
        // binary expansion of each exponent over the squaring chain
        let mut factors = Vec::new();
        for (&v, &e) in m {
            let mut level = 0u32;
            let mut rem = e;
            while rem > 0 {
                if rem & 1 == 1 {
                    factors.push(self.square_var(v, level));
                }
                rem >>= 1;
                level += 1;
            }
        }
        debug_assert!(factors.len() >= 2 || m.values().any(|&e| e >= 2));
        if factors.len() == 1 {
            // a pure power x^(2^k): the chain variable itself
            let w = factors[0];
            self.monomial_vars.insert(m.clone(), w);
            return w;
        }
        let w = self.fresh(&format!("{base}_t"));
        self.emit_product(w, &factors, base);
        self.monomial_vars.insert(m.clone(), w);
        w
    }

    /// Lowers one probabilistic polynomial into the equation for `target`.
    fn emit_polynomial(&mut self, target: usize, poly: &ProbPolynomial) {
        let eq = classify_polynomial(poly.clone());
        match eq {
            Equation::Poly { .. } => {
                // replace every monomial of degree ≥ 2 by a variable
                let base = self.names[target].clone();
                let mut coeffs: BTreeMap<usize, Rational> = BTreeMap::new();
                for (c, m) in &poly.terms {
                    let degree: u32 = m.values().sum();
                    let v = if degree == 1 {
                        *m.keys().next().unwrap()
                    } else {
                        self.monomial_var(m, &base)
                    };
                    *coeffs.entry(v).or_insert_with(Rational::zero) += c;
                }
                self.equations[target] = Some(Equation::Linear(LinearForm {
                    constant: poly.constant.clone(),
                    coeffs: coeffs.into_iter().collect(),
                }));
            }
            snf => self.equations[target] = Some(snf),
        }
    }

    /// Lowers one alternative of a max/min equation to a variable argument.
    fn alternative_var(&mut self, target: usize, poly: &ProbPolynomial) -> usize {
        if let Some(v) = poly.as_bare_variable() {
            return v;
        }
        let base = format!("{}_a", self.names[target]);
        let w = self.fresh(&base);
        self.emit_polynomial(w, poly);
        w
    }

    /// Chains a ≥ 2-ary max/min over variables into binary M equations.
    fn emit_choice(&mut self, target: usize, op: ChoiceOp, args: &[usize]) {
        debug_assert!(args.len() >= 2);
        if args.len() == 2 {
            self.equations[target] = Some(Equation::Choice(op, args[0], args[1]));
            return;
        }
        let rest = self.fresh(&format!("{}_m", self.names[target]));
        self.equations[target] = Some(Equation::Choice(op, args[0], rest));
        self.emit_choice(rest, op, &args[1..]);
    }
}

/// Converts a max/minPPS to SNF. Returns the SNF system and the mapping from
/// original variable indices to indices in the output (the identity into the
/// prefix). Already-SNF systems are returned unchanged.
pub fn to_snf(sys: &EquationSystem) -> (EquationSystem, Vec<usize>) {
    let n = sys.n();
    let mapping: Vec<usize> = (0..n).collect();
    if sys.is_snf() {
        return (sys.clone(), mapping);
    }
    let mut b = SnfBuilder {
        equations: vec![None; n],
        names: sys.var_names().to_vec(),
        taken: sys.var_names().iter().cloned().collect(),
        square_chain: BTreeMap::new(),
        monomial_vars: BTreeMap::new(),
    };
    for i in 0..n {
        match sys.equation(i) {
            Equation::Poly { op, alternatives } => {
                if alternatives.len() == 1 {
                    b.emit_polynomial(i, &alternatives[0]);
                } else {
                    let op = op.expect("validated: multi-alternative has an operator");
                    let args: Vec<usize> = alternatives
                        .iter()
                        .map(|p| b.alternative_var(i, p))
                        .collect();
                    b.emit_choice(i, op, &args);
                }
            }
            eq => b.equations[i] = Some(eq.clone()),
        }
    }
    let equations: Vec<Equation> = b.equations.into_iter().map(Option::unwrap).collect();
    let out = EquationSystem::new(equations, b.names, true)
        .expect("SNF lowering preserves validity");
    debug_assert!(out.is_snf());
    (out, mapping)
}

/// Longest auxiliary definition chain introduced by [`to_snf`]: an upper
/// bound on how many extra Kleene steps the SNF system needs to catch up
/// with one step of the original. Used by tests.
pub fn aux_depth(original: &EquationSystem, snf: &EquationSystem) -> usize {
    snf.n().saturating_sub(original.n())
}
