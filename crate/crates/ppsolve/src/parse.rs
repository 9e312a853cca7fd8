//! Equation-file parsing and writing.
//!
//! Grammar (one equation per line, `#` starts a comment):
//!
//! ```text
//! eq    := var "=" rhs
//! rhs   := "max(" sum ("," sum)+ ")" | "min(" sum ("," sum)+ ")" | sum
//! sum   := term ("+" term)*
//! term  := coeff ("*" var)* | var ("*" var)*
//! coeff := decimal | integer "/" integer
//! ```
//!
//! Variables are indexed in first-appearance order; decimals convert to
//! exact rationals.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{One, Zero};

use crate::error::Error;
use crate::rational::{fraction_string, parse_rational, Rational};
use crate::system::{ChoiceOp, Equation, EquationSystem, LinearForm, Monomial, ProbPolynomial};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Symbol(char),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, col, msg: msg.into() }
}

fn lex_line(text: &str, line_no: usize) -> Result<Vec<Token>, Error> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(pos, ch)) = chars.peek() {
        let col = pos + 1;
        match ch {
            '#' => break,
            c if c.is_whitespace() => {
                chars.next();
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        ident.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Token { tok: Tok::Ident(ident), line: line_no, col });
            }
            c if c.is_ascii_digit() => {
                let mut num = String::new();
                let mut saw_dot = false;
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_ascii_digit() || (c == '.' && !saw_dot) {
                        saw_dot |= c == '.';
                        num.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Token { tok: Tok::Number(num), line: line_no, col });
            }
            '-' => return Err(err(line_no, col, "negative coefficients are not allowed")),
            '=' | '+' | '*' | '/' | '(' | ')' | ',' => {
                chars.next();
                out.push(Token { tok: Tok::Symbol(ch), line: line_no, col });
            }
            other => return Err(err(line_no, col, format!("unexpected character '{other}'"))),
        }
    }
    Ok(out)
}

struct LineParser<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    vars: &'a mut Vars,
}

#[derive(Default)]
struct Vars {
    names: Vec<String>,
    index: BTreeMap<String, usize>,
    first_seen: Vec<(usize, usize)>,
}

impl Vars {
    fn intern(&mut self, name: &str, line: usize, col: usize) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        self.first_seen.push((line, col));
        i
    }
}

impl<'a> LineParser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|t| (t.line, t.col))
            .unwrap_or((self.line, self.toks.last().map_or(1, |t| t.col + 1)))
    }

    fn bump(&mut self) -> Option<&Token> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect_symbol(&mut self, sym: char) -> Result<(), Error> {
        let (line, col) = self.here();
        match self.bump() {
            Some(Token { tok: Tok::Symbol(c), .. }) if *c == sym => Ok(()),
            _ => Err(err(line, col, format!("expected '{sym}'"))),
        }
    }

    fn parse_ident(&mut self) -> Result<(String, usize, usize), Error> {
        let (line, col) = self.here();
        match self.bump() {
            Some(Token { tok: Tok::Ident(name), line, col }) => Ok((name.clone(), *line, *col)),
            _ => Err(err(line, col, "expected a variable name")),
        }
    }

    /// coeff := decimal | integer "/" integer
    fn parse_coeff(&mut self, first: String, line: usize, col: usize) -> Result<Rational, Error> {
        let raw = if matches!(self.peek(), Some(Tok::Symbol('/'))) {
            self.bump();
            let (l2, c2) = self.here();
            match self.bump() {
                Some(Token { tok: Tok::Number(den), .. }) => format!("{first}/{den}"),
                _ => return Err(err(l2, c2, "expected a denominator")),
            }
        } else {
            first
        };
        parse_rational(&raw).map_err(|msg| err(line, col, msg))
    }

    /// term := coeff ("*" var)* | var ("*" var)*
    fn parse_term(&mut self) -> Result<(Rational, Monomial), Error> {
        let mut coeff = Rational::one();
        let mut monomial: Monomial = BTreeMap::new();
        let (line, col) = self.here();
        match self.bump().cloned() {
            Some(Token { tok: Tok::Number(n), line, col }) => {
                coeff = self.parse_coeff(n, line, col)?;
            }
            Some(Token { tok: Tok::Ident(name), line, col }) => {
                let v = self.vars.intern(&name, line, col);
                *monomial.entry(v).or_insert(0) += 1;
            }
            _ => return Err(err(line, col, "expected a coefficient or variable")),
        }
        while matches!(self.peek(), Some(Tok::Symbol('*'))) {
            self.bump();
            let (name, l, c) = self.parse_ident()?;
            let v = self.vars.intern(&name, l, c);
            *monomial.entry(v).or_insert(0) += 1;
        }
        Ok((coeff, monomial))
    }

    /// sum := term ("+" term)*
    fn parse_sum(&mut self) -> Result<ProbPolynomial, Error> {
        let (line, col) = self.here();
        let mut constant = Rational::zero();
        let mut terms: Vec<(Rational, Monomial)> = Vec::new();
        loop {
            let (coeff, monomial) = self.parse_term()?;
            if monomial.is_empty() {
                constant += coeff;
            } else if let Some(entry) = terms.iter_mut().find(|(_, m)| *m == monomial) {
                entry.0 += coeff;
            } else {
                terms.push((coeff, monomial));
            }
            if matches!(self.peek(), Some(Tok::Symbol('+'))) {
                self.bump();
            } else {
                break;
            }
        }
        terms.retain(|(c, _)| !c.is_zero());
        let poly = ProbPolynomial { constant, terms };
        poly.check_probabilistic()
            .map_err(|msg| err(line, col, msg))?;
        Ok(poly)
    }

    fn parse_rhs(&mut self) -> Result<(Option<ChoiceOp>, Vec<ProbPolynomial>), Error> {
        if let Some(Tok::Ident(name)) = self.peek() {
            let op = match name.as_str() {
                "max" => Some(ChoiceOp::Max),
                "min" => Some(ChoiceOp::Min),
                _ => None,
            };
            if let Some(op) = op {
                if self.toks.get(self.pos + 1).map(|t| &t.tok) == Some(&Tok::Symbol('(')) {
                    let (line, col) = self.here();
                    self.bump();
                    self.expect_symbol('(')?;
                    let mut alts = vec![self.parse_sum()?];
                    while matches!(self.peek(), Some(Tok::Symbol(','))) {
                        self.bump();
                        alts.push(self.parse_sum()?);
                    }
                    self.expect_symbol(')')?;
                    if alts.len() < 2 {
                        return Err(err(line, col, format!("{} needs at least two arguments", op.name())));
                    }
                    return Ok((Some(op), alts));
                }
            }
        }
        Ok((None, vec![self.parse_sum()?]))
    }
}

/// Classifies a single probabilistic polynomial into its SNF kind when it
/// already has one.
pub(crate) fn classify_polynomial(poly: ProbPolynomial) -> Equation {
    if poly.total_degree() <= 1 {
        let coeffs = poly
            .terms
            .iter()
            .map(|(c, m)| (*m.keys().next().unwrap(), c.clone()))
            .collect::<BTreeMap<_, _>>();
        return Equation::Linear(LinearForm {
            constant: poly.constant,
            coeffs: coeffs.into_iter().collect(),
        });
    }
    if poly.constant.is_zero() && poly.terms.len() == 1 {
        let (c, m) = &poly.terms[0];
        if c.is_one() && m.values().sum::<u32>() == 2 {
            let mut vars = Vec::new();
            for (&v, &e) in m {
                for _ in 0..e {
                    vars.push(v);
                }
            }
            return Equation::Product(vars[0], vars[1]);
        }
    }
    Equation::Poly { op: None, alternatives: vec![poly] }
}

fn classify_rhs(op: Option<ChoiceOp>, alts: Vec<ProbPolynomial>) -> Equation {
    match op {
        None => classify_polynomial(alts.into_iter().next().unwrap()),
        Some(op) => {
            let bare: Vec<Option<usize>> = alts.iter().map(|p| p.as_bare_variable()).collect();
            if alts.len() == 2 && bare.iter().all(Option::is_some) {
                Equation::Choice(op, bare[0].unwrap(), bare[1].unwrap())
            } else {
                Equation::Poly { op: Some(op), alternatives: alts }
            }
        }
    }
}

/// Parses an equation document into a system. Mixed max/min systems are
/// rejected; use [`parse_system_with_options`] for the max-min flavor.
pub fn parse_system(text: &str) -> Result<EquationSystem, Error> {
    parse_system_with_options(text, false)
}

pub fn parse_system_with_options(text: &str, allow_max_min: bool) -> Result<EquationSystem, Error> {
    let mut vars = Vars::default();
    let mut parsed: Vec<(usize, Equation, usize)> = Vec::new(); // (var, eq, line)
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let toks = lex_line(raw_line, line_no)?;
        if toks.is_empty() {
            continue;
        }
        let mut p = LineParser { toks: &toks, pos: 0, line: line_no, vars: &mut vars };
        let (lhs, l, c) = p.parse_ident()?;
        if lhs == "max" || lhs == "min" {
            return Err(err(l, c, format!("'{lhs}' cannot be used as a variable name")));
        }
        let lhs_idx = p.vars.intern(&lhs, l, c);
        p.expect_symbol('=')?;
        let (op, alts) = p.parse_rhs()?;
        if let Some(tok) = p.toks.get(p.pos) {
            return Err(err(tok.line, tok.col, "unexpected trailing input"));
        }
        if parsed.iter().any(|(v, _, _)| *v == lhs_idx) {
            return Err(err(l, c, format!("duplicate equation for variable '{lhs}'")));
        }
        parsed.push((lhs_idx, classify_rhs(op, alts), line_no));
    }
    let n = vars.names.len();
    let mut equations: Vec<Option<Equation>> = vec![None; n];
    for (v, eq, _) in parsed {
        equations[v] = Some(eq);
    }
    for (i, eq) in equations.iter().enumerate() {
        if eq.is_none() {
            let (line, col) = vars.first_seen[i];
            return Err(err(line, col, format!("undeclared variable '{}'", vars.names[i])));
        }
    }
    EquationSystem::new(
        equations.into_iter().map(Option::unwrap).collect(),
        vars.names,
        allow_max_min,
    )
}

fn write_monomial(out: &mut String, m: &Monomial, names: &[String]) {
    let mut first = true;
    for (&v, &e) in m {
        for _ in 0..e {
            if !first {
                out.push('*');
            }
            out.push_str(&names[v]);
            first = false;
        }
    }
}

fn write_polynomial(out: &mut String, p: &ProbPolynomial, names: &[String]) {
    let mut parts: Vec<String> = Vec::new();
    for (c, m) in &p.terms {
        let mut s = String::new();
        if !c.is_one() {
            let _ = write!(s, "{}*", fraction_string(c));
        }
        write_monomial(&mut s, m, names);
        parts.push(s);
    }
    if !p.constant.is_zero() || parts.is_empty() {
        parts.push(fraction_string(&p.constant));
    }
    out.push_str(&parts.join(" + "));
}

fn write_equation(out: &mut String, eq: &Equation, lhs: &str, names: &[String]) {
    let _ = write!(out, "{lhs} = ");
    match eq {
        Equation::Linear(f) => {
            let poly = ProbPolynomial {
                constant: f.constant.clone(),
                terms: f
                    .coeffs
                    .iter()
                    .map(|(j, c)| (c.clone(), Monomial::from([(*j, 1u32)])))
                    .collect(),
            };
            write_polynomial(out, &poly, names);
        }
        Equation::Product(j, k) => {
            let _ = write!(out, "{}*{}", names[*j], names[*k]);
        }
        Equation::Choice(op, j, k) => {
            let _ = write!(out, "{}({}, {})", op.name(), names[*j], names[*k]);
        }
        Equation::Poly { op, alternatives } => match op {
            None => write_polynomial(out, &alternatives[0], names),
            Some(op) => {
                let _ = write!(out, "{}(", op.name());
                for (i, alt) in alternatives.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_polynomial(out, alt, names);
                }
                out.push(')');
            }
        },
    }
    out.push('\n');
}

/// Emission order and relabeling under which a written document scans its
/// variables in index order, so that `parse(to_text(sys))` reproduces
/// `canonicalize(sys)` structurally.
fn scan_order(sys: &EquationSystem) -> (Vec<usize>, Vec<usize>) {
    let n = sys.n();
    let mut label_of = vec![usize::MAX; n]; // old index -> new label
    let mut labeled: Vec<usize> = Vec::new(); // old indices in label order
    let mut emitted = vec![false; n];
    let mut emission: Vec<usize> = Vec::new();
    let mut next_unemitted_label = 0usize;
    let reveal = |v: usize, label_of: &mut Vec<usize>, labeled: &mut Vec<usize>| {
        if label_of[v] == usize::MAX {
            label_of[v] = labeled.len();
            labeled.push(v);
        }
    };
    while emission.len() < n {
        // next equation: the smallest-labeled revealed-but-unemitted
        // variable, otherwise the smallest unrevealed old index
        let v = loop {
            if next_unemitted_label < labeled.len() {
                let cand = labeled[next_unemitted_label];
                if emitted[cand] {
                    next_unemitted_label += 1;
                    continue;
                }
                break cand;
            }
            break (0..n).find(|&v| label_of[v] == usize::MAX).expect("someone unemitted");
        };
        reveal(v, &mut label_of, &mut labeled);
        match sys.equation(v) {
            Equation::Linear(f) => {
                for (j, _) in &f.coeffs {
                    reveal(*j, &mut label_of, &mut labeled);
                }
            }
            Equation::Product(j, k) | Equation::Choice(_, j, k) => {
                reveal(*j, &mut label_of, &mut labeled);
                reveal(*k, &mut label_of, &mut labeled);
            }
            Equation::Poly { alternatives, .. } => {
                for p in alternatives {
                    for (_, m) in &p.terms {
                        for &j in m.keys() {
                            reveal(j, &mut label_of, &mut labeled);
                        }
                    }
                }
            }
        }
        emitted[v] = true;
        emission.push(v);
    }
    (emission, label_of)
}

fn relabel_equation(eq: &Equation, label: &[usize]) -> Equation {
    match eq {
        Equation::Linear(f) => {
            let mut coeffs: Vec<(usize, Rational)> =
                f.coeffs.iter().map(|(j, c)| (label[*j], c.clone())).collect();
            coeffs.sort_by_key(|(j, _)| *j);
            Equation::Linear(LinearForm { constant: f.constant.clone(), coeffs })
        }
        Equation::Product(j, k) => Equation::Product(label[*j], label[*k]),
        Equation::Choice(op, j, k) => Equation::Choice(*op, label[*j], label[*k]),
        Equation::Poly { op, alternatives } => Equation::Poly {
            op: *op,
            alternatives: alternatives
                .iter()
                .map(|p| ProbPolynomial {
                    constant: p.constant.clone(),
                    terms: p
                        .terms
                        .iter()
                        .map(|(c, m)| {
                            (c.clone(), m.iter().map(|(&v, &e)| (label[v], e)).collect())
                        })
                        .collect(),
                })
                .collect(),
        },
    }
}

/// Renumbers variables into document scan order: the system a written
/// document parses back to.
pub fn canonicalize(sys: &EquationSystem) -> EquationSystem {
    let (_, label) = scan_order(sys);
    let n = sys.n();
    let mut equations = vec![None; n];
    let mut names = vec![String::new(); n];
    for old in 0..n {
        equations[label[old]] = Some(relabel_equation(sys.equation(old), &label));
        names[label[old]] = sys.name(old).to_string();
    }
    EquationSystem::new(
        equations.into_iter().map(Option::unwrap).collect(),
        names,
        true,
    )
    .expect("relabeling preserves validity")
}

/// Writes a system as an equation document. Lines are emitted in an order
/// under which variables first appear in a consistent order, so the document
/// re-parses to [`canonicalize`] of the system (for an already-canonical
/// system, to the system itself).
pub fn to_text(sys: &EquationSystem) -> String {
    let (emission, _) = scan_order(sys);
    let mut out = String::new();
    for v in emission {
        write_equation(&mut out, sys.equation(v), sys.name(v), sys.var_names());
    }
    out
}
