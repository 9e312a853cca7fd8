//! Dense exact rational vectors, matrices, linear solves and inverses, and
//! the nonnegative-matrix spectral-radius test.

use num_traits::{One, Signed, Zero};

use crate::error::Error;
use crate::lp::{Constraint, Direction, LinearProgram, LpOutcome, Relation};
use crate::rational::{rational_bits, Rational};

pub type RationalVector = Vec<Rational>;

/// Dense row-major matrix of exact rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RationalMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        RationalMatrix {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m.set(i, i, Rational::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        RationalMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|v| !v.is_negative())
    }

    pub fn mul_vec(&self, v: &[Rational]) -> RationalVector {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .map(|(a, x)| a * x)
                    .fold(Rational::zero(), |acc, t| acc + t)
            })
            .collect()
    }

    pub fn mul_mat(&self, other: &RationalMatrix) -> RationalMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = RationalMatrix::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let add = a * other.get(k, j);
                    let cur = out.get(i, j) + add;
                    out.set(i, j, cur);
                }
            }
        }
        out
    }

    /// `self - other`.
    pub fn sub(&self, other: &RationalMatrix) -> RationalMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        RationalMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }
}

/// Picks the elimination pivot in `col` among rows `from..n`: a nonzero entry
/// of smallest combined numerator+denominator bit size, to curb coefficient
/// growth.
fn pick_pivot(aug: &[Vec<Rational>], col: usize, from: usize) -> Option<usize> {
    let mut best: Option<(usize, u64)> = None;
    for (i, row) in aug.iter().enumerate().skip(from) {
        if row[col].is_zero() {
            continue;
        }
        let bits = rational_bits(&row[col]);
        if best.is_none_or(|(_, b)| bits < b) {
            best = Some((i, bits));
        }
    }
    best.map(|(i, _)| i)
}

/// Gauss-Jordan elimination on an augmented matrix `[M | rhs...]` with `n`
/// pivot columns. Returns the reduced augmented rows, or the achieved rank on
/// singularity.
fn gauss_jordan(mut aug: Vec<Vec<Rational>>, n: usize) -> Result<Vec<Vec<Rational>>, usize> {
    for col in 0..n {
        let Some(p) = pick_pivot(&aug, col, col) else {
            return Err(col);
        };
        aug.swap(col, p);
        let pivot = aug[col][col].clone();
        for v in aug[col].iter_mut() {
            *v = &*v / &pivot;
        }
        for i in 0..aug.len() {
            if i == col || aug[i][col].is_zero() {
                continue;
            }
            let factor = aug[i][col].clone();
            let (pivot_row, row) = if i < col {
                let (a, b) = aug.split_at_mut(col);
                (&b[0], &mut a[i])
            } else {
                let (a, b) = aug.split_at_mut(i);
                (&a[col], &mut b[0])
            };
            for (v, pv) in row.iter_mut().zip(pivot_row) {
                *v = &*v - &factor * pv;
            }
        }
    }
    Ok(aug)
}

/// Exact solution of `m · z = b`.
pub fn solve_linear(m: &RationalMatrix, b: &[Rational]) -> Result<RationalVector, Error> {
    if m.rows != m.cols {
        return Err(Error::invalid("solve_linear requires a square matrix"));
    }
    if b.len() != m.rows {
        return Err(Error::DimensionMismatch {
            expected: m.rows,
            got: b.len(),
        });
    }
    let n = m.rows;
    let aug: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            let mut row = m.row(i).to_vec();
            row.push(b[i].clone());
            row
        })
        .collect();
    let reduced = gauss_jordan(aug, n).map_err(|rank| Error::SingularMatrix { rank })?;
    Ok(reduced.into_iter().map(|row| row[n].clone()).collect())
}

/// Exact inverse: `invert(m) · m = I`.
pub fn invert(m: &RationalMatrix) -> Result<RationalMatrix, Error> {
    if m.rows != m.cols {
        return Err(Error::invalid("invert requires a square matrix"));
    }
    let n = m.rows;
    let aug: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            let mut row = m.row(i).to_vec();
            row.extend((0..n).map(|j| {
                if i == j {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            }));
            row
        })
        .collect();
    let reduced = gauss_jordan(aug, n).map_err(|rank| Error::SingularMatrix { rank })?;
    let rows = reduced
        .into_iter()
        .map(|row| row[n..].to_vec())
        .collect();
    Ok(RationalMatrix::from_rows(rows))
}

/// Decides ρ(A) ≤ 1 exactly for a nonnegative matrix `A`, via feasibility of
/// {A·v ≤ v, v ≥ 1}. Exact for irreducible `A` (Perron-Frobenius scaling of
/// the positive eigenvector); the caller is responsible for restricting to a
/// single SCC — reducible input is not detected here.
pub fn spectral_radius_leq_one(a: &RationalMatrix) -> Result<bool, Error> {
    if a.rows != a.cols {
        return Err(Error::invalid("spectral test requires a square matrix"));
    }
    if !a.is_nonnegative() {
        return Err(Error::invalid("spectral test requires a nonnegative matrix"));
    }
    let n = a.rows;
    if n == 0 {
        return Ok(true);
    }
    let mut constraints = Vec::with_capacity(2 * n);
    for i in 0..n {
        // (A v)_i - v_i <= 0
        let mut row = a.row(i).to_vec();
        row[i] = &row[i] - Rational::one();
        constraints.push(Constraint {
            coeffs: row,
            relation: Relation::Le,
            rhs: Rational::zero(),
        });
        // v_i >= 1
        let mut unit = vec![Rational::zero(); n];
        unit[i] = Rational::one();
        constraints.push(Constraint {
            coeffs: unit,
            relation: Relation::Ge,
            rhs: Rational::one(),
        });
    }
    let lp = LinearProgram {
        direction: Direction::Minimize,
        objective: vec![Rational::one(); n],
        constraints,
        bounds: Vec::new(),
    };
    match crate::lp::solve_lp(&lp) {
        LpOutcome::Optimal { .. } => Ok(true),
        LpOutcome::Infeasible => Ok(false),
        LpOutcome::Unbounded => unreachable!("objective bounded below by n"),
    }
}
