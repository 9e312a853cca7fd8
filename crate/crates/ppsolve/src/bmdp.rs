//! Branching Markov decision processes and their translation to max/minPPS
//! extinction-probability equation systems.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::error::Error;
use crate::parse::classify_polynomial;
use crate::rational::{parse_rational, Rational};
use crate::system::{ChoiceOp, Equation, EquationSystem, Monomial, ProbPolynomial};

#[derive(Clone, Debug)]
pub struct BmdpRule {
    pub probability: Rational,
    /// Offspring multiset: type index → count. Empty for extinction rules.
    pub offspring: BTreeMap<usize, u32>,
}

#[derive(Clone, Debug)]
pub struct BmdpAction {
    pub name: String,
    pub rules: Vec<BmdpRule>,
}

#[derive(Clone, Debug)]
pub struct Bmdp {
    pub types: Vec<String>,
    /// Actions per type, same order as `types`.
    pub actions: Vec<Vec<BmdpAction>>,
}

impl Bmdp {
    /// Validates the structural invariants: positive rule probabilities
    /// summing to exactly 1 per (type, action).
    pub fn validate(&self) -> Result<(), Error> {
        if self.actions.len() != self.types.len() {
            return Err(Error::invalid("one action list per type required"));
        }
        for (t, actions) in self.actions.iter().enumerate() {
            for action in actions {
                let mut total = Rational::zero();
                for rule in &action.rules {
                    if !rule.probability.is_positive() {
                        return Err(Error::invalid(format!(
                            "type {} action {}: rule probabilities must be positive",
                            self.types[t], action.name
                        )));
                    }
                    total += &rule.probability;
                }
                if !total.is_one() {
                    return Err(Error::invalid(format!(
                        "type {} action {}: rule probabilities sum to {}, not 1",
                        self.types[t],
                        action.name,
                        crate::rational::fraction_string(&total)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Parses the BMDP file format: `type <name>` and `action <name>` section
/// headers, then rule lines `p -> T_a T_b …` or `p -> ()`.
/// (probability, offspring names, source line) triples per named action.
type RawActions = Vec<(String, Vec<(Rational, Vec<String>, usize)>)>;

pub fn parse_bmdp(text: &str) -> Result<Bmdp, Error> {
    let mut types: Vec<String> = Vec::new();
    let mut raw_rules: Vec<RawActions> = Vec::new();

    // first pass for type names so offspring can reference forward
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if let Some(name) = line.strip_prefix("type ") {
            let name = name.trim().to_string();
            if types.contains(&name) {
                return Err(Error::invalid(format!("duplicate type '{name}'")));
            }
            types.push(name);
            raw_rules.push(Vec::new());
        }
    }

    let mut cur_type: Option<usize> = None;
    let mut type_cursor = 0usize;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with("type ") {
            cur_type = Some(type_cursor);
            type_cursor += 1;
            continue;
        }
        if let Some(name) = line.strip_prefix("action ") {
            let Some(t) = cur_type else {
                return Err(Error::Parse {
                    line: line_no,
                    col: 1,
                    msg: "'action' before any 'type'".into(),
                });
            };
            raw_rules[t].push((name.trim().to_string(), Vec::new()));
            continue;
        }
        // rule line: p -> offspring
        let Some((prob_str, rhs)) = line.split_once("->") else {
            return Err(Error::Parse {
                line: line_no,
                col: 1,
                msg: "expected 'type', 'action', or a rule 'p -> …'".into(),
            });
        };
        let t = cur_type.ok_or_else(|| Error::Parse {
            line: line_no,
            col: 1,
            msg: "rule before any 'type'".into(),
        })?;
        let action = raw_rules[t].last_mut().ok_or_else(|| Error::Parse {
            line: line_no,
            col: 1,
            msg: "rule before any 'action'".into(),
        })?;
        let probability = parse_rational(prob_str).map_err(|msg| Error::Parse {
            line: line_no,
            col: 1,
            msg,
        })?;
        let rhs = rhs.trim();
        let offspring: Vec<String> = if rhs == "()" {
            Vec::new()
        } else {
            rhs.split_whitespace().map(str::to_string).collect()
        };
        action.1.push((probability, offspring, line_no));
    }

    let mut actions = Vec::with_capacity(types.len());
    for per_type in raw_rules {
        let mut acts = Vec::new();
        for (name, rules) in per_type {
            let mut out_rules = Vec::new();
            for (probability, offspring_names, line_no) in rules {
                let mut offspring: BTreeMap<usize, u32> = BTreeMap::new();
                for name in offspring_names {
                    let Some(t) = types.iter().position(|t| *t == name) else {
                        return Err(Error::Parse {
                            line: line_no,
                            col: 1,
                            msg: format!("unknown type '{name}' in offspring"),
                        });
                    };
                    *offspring.entry(t).or_insert(0) += 1;
                }
                out_rules.push(BmdpRule { probability, offspring });
            }
            acts.push(BmdpAction { name, rules: out_rules });
        }
        actions.push(acts);
    }
    let bmdp = Bmdp { types, actions };
    bmdp.validate()?;
    Ok(bmdp)
}

/// Builds the extinction-probability Bellman system: one variable per type,
/// `x_i = max_j q_{i,j}(x)` (or min) over the actions `j` of type `i`, where
/// `q_{i,j}(x) = Σ_r p_r · x^{offspring(r)}`.
pub fn bmdp_to_system(bmdp: &Bmdp, objective: ChoiceOp) -> Result<EquationSystem, Error> {
    bmdp.validate()?;
    let mut equations = Vec::with_capacity(bmdp.types.len());
    for (t, actions) in bmdp.actions.iter().enumerate() {
        if actions.is_empty() {
            return Err(Error::invalid(format!(
                "type {} has no actions",
                bmdp.types[t]
            )));
        }
        let polys: Vec<ProbPolynomial> = actions
            .iter()
            .map(|action| {
                let mut constant = Rational::zero();
                let mut terms: Vec<(Rational, Monomial)> = Vec::new();
                for rule in &action.rules {
                    if rule.offspring.is_empty() {
                        constant += &rule.probability;
                    } else if let Some(entry) =
                        terms.iter_mut().find(|(_, m)| *m == rule.offspring)
                    {
                        entry.0 += &rule.probability;
                    } else {
                        terms.push((rule.probability.clone(), rule.offspring.clone()));
                    }
                }
                ProbPolynomial { constant, terms }
            })
            .collect();
        let eq = if polys.len() == 1 {
            classify_polynomial(polys.into_iter().next().unwrap())
        } else {
            Equation::Poly { op: Some(objective), alternatives: polys }
        };
        equations.push(eq);
    }
    EquationSystem::new(equations, bmdp.types.clone(), false)
}
