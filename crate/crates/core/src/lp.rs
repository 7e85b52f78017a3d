//! Decides whether some strictly positive vector `e` satisfies `e^T M = 0`.
//!
//! The open condition `e > 0` is replaced by `e >= 1`, which is equivalent
//! because the condition is invariant under positive scaling. Writing
//! `e = 1 + s` gives the standard-form system `M^T s = -M^T 1`, `s >= 0`,
//! solved here by phase-one simplex in exact rational arithmetic with
//! Bland's rule. On infeasibility the phase-one duals give a nonzero `h` with
//! `M h <= 0` componentwise and `sum(M h) < 0`: a direction that no positive
//! combination of the rows can balance.

use num_traits::{One, Signed, Zero};

use crate::numeric::{primitive_integer_scaling, rational_from_f64, RatMatrix, Rational};

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityResult {
    pub exists: bool,
    /// Every entry >= 1 and `witness_e^T M = 0`.
    pub witness_e: Option<Vec<Rational>>,
    /// Nonzero, with `M h <= 0` and at least one row strictly negative.
    pub certificate_h: Option<Vec<Rational>>,
    pub pivots: usize,
}

impl FeasibilityResult {
    /// Re-checks whichever of witness or certificate is present, exactly.
    pub fn verify(&self, m: &RatMatrix) -> bool {
        match (self.exists, &self.witness_e, &self.certificate_h) {
            (true, Some(e), None) => {
                e.len() == m.nrows()
                    && e.iter().all(|v| *v >= Rational::one())
                    && m.left_mul_vec(e).iter().all(Zero::is_zero)
            }
            (false, None, Some(h)) => {
                let mh = m.mul_vec(h);
                h.len() == m.ncols()
                    && h.iter().any(|v| !v.is_zero())
                    && mh.iter().all(|v| !v.is_positive())
                    && mh.iter().any(|v| v.is_negative())
            }
            _ => false,
        }
    }
}

struct Tableau {
    /// Constraint rows, each `n_vars` wide, plus the right-hand side.
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    /// Reduced costs for every column.
    cost: Vec<Rational>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col].clone();
        for v in self.rows[row].iter_mut() {
            *v /= &piv;
        }
        self.rhs[row] /= &piv;
        let pivot_row = self.rows[row].clone();
        let pivot_rhs = self.rhs[row].clone();
        for i in 0..self.rows.len() {
            if i == row {
                continue;
            }
            let factor = self.rows[i][col].clone();
            if factor.is_zero() {
                continue;
            }
            for (v, p) in self.rows[i].iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v -= &factor * p;
                }
            }
            self.rhs[i] -= &factor * &pivot_rhs;
        }
        let factor = self.cost[col].clone();
        if !factor.is_zero() {
            for (v, p) in self.cost.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v -= &factor * p;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Bland's rule: lowest-index improving column, ties in the ratio test
    /// broken by lowest basic variable index. Returns false at optimality.
    fn step(&mut self) -> bool {
        let Some(col) = self.cost.iter().position(|c| c.is_negative()) else {
            return false;
        };
        let mut best: Option<(usize, Rational)> = None;
        for (i, row) in self.rows.iter().enumerate() {
            let a = &row[col];
            if !a.is_positive() {
                continue;
            }
            let ratio = &self.rhs[i] / a;
            let better = match &best {
                None => true,
                Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
            };
            if better {
                best = Some((i, ratio));
            }
        }
        // Phase one is bounded below by zero, so some row always qualifies.
        let (row, _) = best.expect("phase-one objective is bounded");
        self.pivot(row, col);
        true
    }
}

pub fn exists_positive_null(m: &RatMatrix) -> FeasibilityResult {
    assert!(!m.is_empty(), "matrix must be nonempty");
    let n = m.nrows();
    let p = m.ncols();

    // Constraint j: sum_i M[i][j] s_i = -sum_i M[i][j], flipped so rhs >= 0.
    let mut flip = vec![false; p];
    let mut rows = Vec::with_capacity(p);
    let mut rhs = Vec::with_capacity(p);
    for j in 0..p {
        let col = m.column(j);
        let b: Rational = -col.iter().fold(Rational::zero(), |acc, v| acc + v);
        flip[j] = b.is_negative();
        let sign = if flip[j] { -Rational::one() } else { Rational::one() };
        let mut row: Vec<Rational> = col.into_iter().map(|v| v * &sign).collect();
        row.extend((0..p).map(|k| if k == j { Rational::one() } else { Rational::zero() }));
        rows.push(row);
        rhs.push(b * sign);
    }
    // Reduced costs with the artificials basic: c_s - 1^T A = -column sums.
    let mut cost = vec![Rational::zero(); n + p];
    for row in &rows {
        for (c, v) in cost.iter_mut().zip(row.iter().take(n)) {
            *c -= v;
        }
    }
    let mut tab = Tableau {
        rows,
        rhs,
        cost,
        basis: (n..n + p).collect(),
    };

    let mut pivots = 0;
    while tab.step() {
        pivots += 1;
    }

    let infeasibility = tab
        .basis
        .iter()
        .zip(&tab.rhs)
        .filter(|(&b, _)| b >= n)
        .fold(Rational::zero(), |acc, (_, v)| acc + v);

    if infeasibility.is_zero() {
        let mut e = vec![Rational::one(); n];
        for (&b, v) in tab.basis.iter().zip(&tab.rhs) {
            if b < n {
                e[b] += v;
            }
        }
        FeasibilityResult {
            exists: true,
            witness_e: Some(e),
            certificate_h: None,
            pivots,
        }
    } else {
        // Dual of constraint j is 1 - reduced cost of its artificial.
        let h: Vec<Rational> = (0..p)
            .map(|j| {
                let dual = Rational::one() - &tab.cost[n + j];
                if flip[j] {
                    -dual
                } else {
                    dual
                }
            })
            .collect();
        FeasibilityResult {
            exists: false,
            witness_e: None,
            certificate_h: Some(primitive_integer_scaling(&h)),
            pivots,
        }
    }
}

/// Floating-point entry point: every entry is rationalized through its
/// shortest decimal form before the exact solve. The converted matrix is
/// returned alongside the result.
pub fn exists_positive_null_f64(rows: &[Vec<f64>]) -> Option<(RatMatrix, FeasibilityResult)> {
    let converted = rows
        .iter()
        .map(|r| r.iter().map(|&v| rational_from_f64(v)).collect::<Option<Vec<_>>>())
        .collect::<Option<Vec<_>>>()?;
    let m = RatMatrix::from_rows(converted).ok()?;
    let res = exists_positive_null(&m);
    Some((m, res))
}
