//! Exact rational linear programming: two-phase simplex with Bland's
//! anti-cycling rule.
//!
//! Free variables are split into differences of nonnegative variables and
//! explicit bounds become constraint rows, so the kernel is a pure
//! standard-form simplex. Internally the tableau is kept in integers with a
//! running divisor (fraction-free pivoting): every stored entry is the
//! divisor times the true rational entry, pivot updates divide exactly, and
//! no per-entry gcd normalization is needed. Reported optima are exact
//! vertices.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
}

/// Optional per-variable bounds; variables are free by default.
#[derive(Clone, Debug, Default)]
pub struct VarBounds {
    pub lower: Option<Rational>,
    pub upper: Option<Rational>,
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub direction: Direction,
    pub objective: Vec<Rational>,
    pub constraints: Vec<Constraint>,
    /// Either empty (all variables free) or one entry per variable.
    pub bounds: Vec<VarBounds>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { point: Vec<Rational>, value: Rational },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// Constraint rows, each of length `cols + 1` (last entry is the rhs).
    rows: Vec<Vec<BigInt>>,
    /// Phase-2 reduced-cost row.
    obj: Vec<BigInt>,
    /// Phase-1 reduced-cost row (dropped after phase 1).
    art_obj: Vec<BigInt>,
    /// Common divisor: true entry = stored / den, kept positive.
    den: BigInt,
    /// Basic column per row.
    basis: Vec<usize>,
    /// Columns excluded from entering (artificials after they leave).
    banned: Vec<bool>,
    cols: usize,
    pivots: u64,
    pivot_cap: BigUint,
}

impl Tableau {
    fn truthy_negative(&self, v: &BigInt) -> bool {
        // den > 0 invariant, so stored sign == true sign
        v.is_negative()
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let pivot = self.rows[r][q].clone();
        debug_assert!(!pivot.is_zero());
        self.pivots += 1;
        assert!(
            BigUint::from(self.pivots) <= self.pivot_cap,
            "simplex pivot ceiling exceeded: Bland's rule should terminate within {} pivots",
            self.pivot_cap
        );
        let den = self.den.clone();
        let pivot_row = self.rows[r].clone();
        let update = |row: &mut Vec<BigInt>| {
            let factor = row[q].clone();
            if factor.is_zero() && pivot == den {
                return; // row unchanged: (t*p - 0)/d with p == d
            }
            for (j, v) in row.iter_mut().enumerate() {
                let t = &*v * &pivot - &factor * &pivot_row[j];
                let (quot, rem) = t.div_rem(&den);
                debug_assert!(rem.is_zero(), "fraction-free pivot division not exact");
                *v = quot;
            }
        };
        for i in 0..self.rows.len() {
            if i != r {
                let mut row = std::mem::take(&mut self.rows[i]);
                update(&mut row);
                self.rows[i] = row;
            }
        }
        let mut obj = std::mem::take(&mut self.obj);
        update(&mut obj);
        self.obj = obj;
        let mut art = std::mem::take(&mut self.art_obj);
        update(&mut art);
        self.art_obj = art;

        self.den = pivot;
        self.basis[r] = q;
        if self.den.is_negative() {
            self.den = -std::mem::take(&mut self.den);
            for row in &mut self.rows {
                for v in row.iter_mut() {
                    *v = -std::mem::take(v);
                }
            }
            for v in self.obj.iter_mut().chain(self.art_obj.iter_mut()) {
                *v = -std::mem::take(v);
            }
        }
    }

    /// Bland entering column for minimizing the given reduced-cost row.
    fn entering(&self, obj: &[BigInt]) -> Option<usize> {
        (0..self.cols).find(|&j| !self.banned[j] && self.truthy_negative(&obj[j]))
    }

    /// Bland leaving row for entering column `q`: minimum ratio
    /// rhs_i / T[i][q] over rows with positive pivot entry, ties broken by
    /// the smallest basic-variable index.
    fn leaving(&self, q: usize) -> Option<usize> {
        let rhs = self.cols;
        let mut best: Option<usize> = None;
        for i in 0..self.rows.len() {
            if !self.rows[i][q].is_positive() {
                continue;
            }
            match best {
                None => best = Some(i),
                Some(b) => {
                    // rhs_i/T_iq  vs  rhs_b/T_bq  (both denominators > 0)
                    let lhs = &self.rows[i][rhs] * &self.rows[b][q];
                    let rhs_v = &self.rows[b][rhs] * &self.rows[i][q];
                    if lhs < rhs_v || (lhs == rhs_v && self.basis[i] < self.basis[b]) {
                        best = Some(i);
                    }
                }
            }
        }
        best
    }

    /// Runs simplex iterations on the reduced-cost row selected by `phase1`.
    /// Returns false on unboundedness.
    fn optimize(&mut self, phase1: bool, ban_leaving_artificials: Option<usize>) -> bool {
        loop {
            let row = if phase1 { &self.art_obj } else { &self.obj };
            let Some(q) = self.entering(row) else {
                return true;
            };
            let Some(r) = self.leaving(q) else {
                return false;
            };
            let old_basic = self.basis[r];
            self.pivot(r, q);
            if let Some(first_art) = ban_leaving_artificials {
                if old_basic >= first_art {
                    self.banned[old_basic] = true;
                }
            }
        }
    }
}

/// Solves a linear program exactly. The returned `Optimal` point satisfies
/// every constraint with zero slack violation.
pub fn solve_lp(lp: &LinearProgram) -> LpOutcome {
    let n = lp.objective.len();
    for c in &lp.constraints {
        assert_eq!(c.coeffs.len(), n, "constraint row not conformal with objective");
    }
    assert!(
        lp.bounds.is_empty() || lp.bounds.len() == n,
        "bounds must be empty or one per variable"
    );

    // Bounds become ordinary rows; every variable is then split x = p - m.
    let mut rows: Vec<(Vec<Rational>, Relation, Rational)> = lp
        .constraints
        .iter()
        .map(|c| (c.coeffs.clone(), c.relation, c.rhs.clone()))
        .collect();
    for (j, b) in lp.bounds.iter().enumerate() {
        let unit = |j: usize| {
            let mut row = vec![Rational::zero(); n];
            row[j] = Rational::one();
            row
        };
        if let Some(l) = &b.lower {
            rows.push((unit(j), Relation::Ge, l.clone()));
        }
        if let Some(u) = &b.upper {
            rows.push((unit(j), Relation::Le, u.clone()));
        }
    }

    let minimize_obj: Vec<Rational> = match lp.direction {
        Direction::Minimize => lp.objective.clone(),
        Direction::Maximize => lp.objective.iter().map(|c| -c).collect(),
    };

    let m = rows.len();
    let n_struct = 2 * n;
    let n_slack = m; // one slack or surplus per row at most
    let first_art = n_struct + n_slack;
    let cols = first_art + m; // artificial columns, possibly unused

    let mut tableau_rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut used_art = vec![false; m];
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        let mut rel = *rel;
        let mut coeffs = coeffs.clone();
        let mut rhs = rhs.clone();
        if rhs.is_negative() {
            for c in coeffs.iter_mut() {
                *c = -std::mem::take(c);
            }
            rhs = -rhs;
            rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        // integer scaling of the row
        let mut scale = rhs.denom().clone();
        for c in &coeffs {
            scale = scale.lcm(c.denom());
        }
        let to_int = |v: &Rational| -> BigInt {
            let scaled = v * Rational::from_integer(scale.clone());
            debug_assert!(scaled.denom().is_one());
            scaled.to_integer()
        };
        let mut row = vec![BigInt::zero(); cols + 1];
        for (j, c) in coeffs.iter().enumerate() {
            let v = to_int(c);
            row[j] = v.clone(); // plus part
            row[n + j] = -v; // minus part
        }
        row[cols] = to_int(&rhs);
        match rel {
            Relation::Le => {
                row[n_struct + i] = scale.clone();
                basis.push(n_struct + i);
            }
            Relation::Ge => {
                row[n_struct + i] = -scale.clone();
                row[first_art + i] = scale.clone();
                used_art[i] = true;
                basis.push(first_art + i);
            }
            Relation::Eq => {
                row[first_art + i] = scale.clone();
                used_art[i] = true;
                basis.push(first_art + i);
            }
        }
        tableau_rows.push(row);
    }

    // phase-2 reduced costs: scaled objective, zero on slack/artificial
    let mut obj_scale = BigInt::one();
    for c in &minimize_obj {
        obj_scale = obj_scale.lcm(c.denom());
    }
    let mut obj = vec![BigInt::zero(); cols + 1];
    for (j, c) in minimize_obj.iter().enumerate() {
        let v = (c * Rational::from_integer(obj_scale.clone())).to_integer();
        obj[j] = v.clone();
        obj[n + j] = -v;
    }

    // phase-1 reduced costs: one per artificial, then canonicalized against
    // the artificial basic rows
    let mut art_obj = vec![BigInt::zero(); cols + 1];
    for i in 0..m {
        if used_art[i] {
            art_obj[first_art + i] = BigInt::one();
        }
    }
    for (i, row) in tableau_rows.iter().enumerate() {
        if basis[i] >= first_art {
            for (a, v) in art_obj.iter_mut().zip(row) {
                *a -= v;
            }
        }
    }

    let mut banned = vec![false; cols];
    for i in 0..m {
        if !used_art[i] {
            banned[first_art + i] = true;
        }
    }

    let pivot_cap = binomial(cols as u64, m as u64) + BigUint::from(cols as u64 + 1);
    let mut tab = Tableau {
        rows: tableau_rows,
        obj,
        art_obj,
        den: BigInt::one(),
        basis,
        banned,
        cols,
        pivots: 0,
        pivot_cap,
    };

    // phase 1
    let bounded = tab.optimize(true, Some(first_art));
    debug_assert!(bounded, "phase-1 objective is bounded below by zero");
    if tab.art_obj[cols].is_negative() {
        // current phase-1 objective = -rhs/den > 0: no feasible point
        return LpOutcome::Infeasible;
    }

    // drive leftover artificials out of the basis, dropping redundant rows
    let mut r = 0;
    while r < tab.rows.len() {
        if tab.basis[r] >= first_art {
            let q = (0..first_art).find(|&j| !tab.rows[r][j].is_zero());
            match q {
                Some(q) => tab.pivot(r, q),
                None => {
                    debug_assert!(tab.rows[r][tab.cols].is_zero());
                    tab.rows.remove(r);
                    tab.basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }
    for j in first_art..cols {
        tab.banned[j] = true;
    }

    // phase 2
    if !tab.optimize(false, None) {
        return LpOutcome::Unbounded;
    }

    // read off the split solution and fold it back
    let mut z = vec![Rational::zero(); cols];
    for (i, &b) in tab.basis.iter().enumerate() {
        z[b] = Rational::new(tab.rows[i][tab.cols].clone(), tab.den.clone());
    }
    let point: Vec<Rational> = (0..n).map(|j| &z[j] - &z[n + j]).collect();
    let value = lp
        .objective
        .iter()
        .zip(&point)
        .map(|(c, x)| c * x)
        .fold(Rational::zero(), |acc, t| acc + t);
    LpOutcome::Optimal { point, value }
}

fn binomial(n: u64, k: u64) -> BigUint {
    let k = k.min(n.saturating_sub(k));
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..k {
        num *= BigUint::from(n - i);
        den *= BigUint::from(i + 1);
    }
    num / den
}
