//! Column rank, exactly by fraction-free elimination or by SVD thresholding
//! for genuinely floating-point input.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::numeric::{primitive_integer_scaling, RatMatrix, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMethod {
    ExactRational,
    FloatSvd,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NullVector {
    Exact(Vec<Rational>),
    Float(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankResult {
    pub rank: usize,
    pub cols: usize,
    pub method: RankMethod,
    /// Nonzero β with Mβ = 0, present iff `rank < cols`.
    pub null_vector: Option<NullVector>,
}

impl RankResult {
    pub fn full_column_rank(&self) -> bool {
        self.rank == self.cols
    }
}

/// Exact column rank via Bareiss elimination on an integer rescaling of `m`.
///
/// Each row is multiplied by the lcm of its denominators first, which
/// changes neither the rank nor the null space.
pub fn column_rank(m: &RatMatrix) -> RankResult {
    let (rows, cols) = (m.nrows(), m.ncols());
    let mut a: Vec<Vec<BigInt>> = m
        .rows_iter()
        .map(|row| {
            let lcm = row.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
            row.iter().map(|v| (v * Rational::from_integer(lcm.clone())).to_integer()).collect()
        })
        .collect();

    let mut pivots: Vec<usize> = Vec::new();
    let mut prev = BigInt::one();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        for i in r + 1..rows {
            for j in c + 1..cols {
                let v = &a[r][c] * &a[i][j] - &a[i][c] * &a[r][j];
                a[i][j] = v / &prev;
            }
            a[i][c] = BigInt::zero();
        }
        prev = a[r][c].clone();
        pivots.push(c);
        r += 1;
    }
    let rank = pivots.len();

    let null_vector = if rank < cols {
        let free = (0..cols).find(|c| !pivots.contains(c)).expect("rank < cols");
        let mut x = vec![Rational::zero(); cols];
        x[free] = Rational::one();
        for (row, &pc) in pivots.iter().enumerate().rev() {
            // Only columns after the pivot can be nonzero in an echelon row.
            let acc = (pc + 1..cols).fold(Rational::zero(), |acc, j| {
                acc + Rational::from_integer(a[row][j].clone()) * &x[j]
            });
            x[pc] = -acc / Rational::from_integer(a[row][pc].clone());
        }
        Some(NullVector::Exact(normalize_integer_direction(x)))
    } else {
        None
    };

    RankResult {
        rank,
        cols,
        method: RankMethod::ExactRational,
        null_vector,
    }
}

/// Scales a nonzero rational vector to coprime integers with a positive
/// leading entry.
fn normalize_integer_direction(x: Vec<Rational>) -> Vec<Rational> {
    let scaled = primitive_integer_scaling(&x);
    match scaled.iter().find(|v| !v.is_zero()) {
        Some(v) if v.is_negative() => scaled.into_iter().map(|v| -v).collect(),
        _ => scaled,
    }
}

/// Column rank by singular-value thresholding with tolerance
/// `max(rows, cols) * eps * sigma_max`.
pub fn column_rank_float(m: &nalgebra::DMatrix<f64>) -> RankResult {
    let (rows, cols) = m.shape();
    // Pad to at least square so the SVD exposes a full right basis.
    let size = rows.max(cols);
    let mut padded = nalgebra::DMatrix::<f64>::zeros(size, cols);
    padded.rows_mut(0, rows).copy_from(m);
    let svd = nalgebra::SVD::new(padded, false, true);
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
    let tol = size as f64 * f64::EPSILON * sigma_max;
    let rank = sigma.iter().filter(|&&s| s > tol).count();
    let null_vector = if rank < cols {
        let v_t = svd.v_t.as_ref().expect("requested V^T");
        let (idx, _) = sigma
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        Some(NullVector::Float(v_t.row(idx).iter().copied().collect()))
    } else {
        None
    };
    RankResult {
        rank,
        cols,
        method: RankMethod::FloatSvd,
        null_vector,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{rat, RatMatrix};
    use proptest::prelude::*;

    fn twoway_z() -> RatMatrix {
        RatMatrix::from_i64_rows(&[
            &[1, 0, 0, 1, 0],
            &[1, 0, 0, 0, 1],
            &[0, 1, 0, 1, 0],
            &[0, 1, 0, 0, 1],
            &[0, 0, 1, 1, 0],
            &[0, 0, 1, 0, 1],
        ])
    }

    #[test]
    fn twoway_z_has_rank_four() {
        let z = twoway_z();
        let r = column_rank(&z);
        assert_eq!(r.rank, 4);
        let Some(NullVector::Exact(v)) = r.null_vector else {
            panic!("expected exact null vector")
        };
        assert_eq!(v, vec![rat(1), rat(1), rat(1), rat(-1), rat(-1)]);
        assert!(z.mul_vec(&v).iter().all(Zero::is_zero));
    }

    #[test]
    fn identity_and_oneway_x() {
        assert_eq!(column_rank(&RatMatrix::identity(3)).rank, 3);
        let x = RatMatrix::from_decimal_rows(&[
            &["1", "2.9"],
            &["1", "1.7"],
            &["1", "2.6"],
            &["1", "3.1"],
            &["1", "3.8"],
            &["1", "4.2"],
        ])
        .unwrap();
        let r = column_rank(&x);
        assert!(r.full_column_rank());
        assert!(r.null_vector.is_none());
    }

    #[test]
    fn wide_and_zero_matrices() {
        let m = RatMatrix::from_i64_rows(&[&[1, 2, 3]]);
        let r = column_rank(&m);
        assert_eq!(r.rank, 1);
        let Some(NullVector::Exact(v)) = r.null_vector else { panic!() };
        assert!(m.mul_vec(&v).iter().all(Zero::is_zero));

        let zero = RatMatrix::zeros(3, 2);
        assert_eq!(column_rank(&zero).rank, 0);
    }

    #[test]
    fn float_path_agrees_on_twoway() {
        let r = column_rank_float(&twoway_z().to_dmatrix());
        assert_eq!(r.rank, 4);
        assert_eq!(r.method, RankMethod::FloatSvd);
        let Some(NullVector::Float(v)) = r.null_vector else { panic!() };
        let resid = twoway_z().to_dmatrix() * nalgebra::DVector::from_vec(v);
        assert!(resid.amax() < 1e-12);
    }

    fn small_matrix() -> impl Strategy<Value = RatMatrix> {
        (1usize..6, 1usize..5).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-3i64..=3, r * c)
                .prop_map(move |d| RatMatrix::from_row_major(r, c, d.into_iter().map(rat).collect()))
        })
    }

    proptest! {
        #[test]
        fn rank_of_gram_matches(m in small_matrix()) {
            let gram = m.transpose().matmul(&m);
            prop_assert_eq!(column_rank(&m).rank, column_rank(&gram).rank);
        }

        #[test]
        fn duplicated_column_never_raises_rank(m in small_matrix(), j in 0usize..4) {
            let j = j % m.ncols();
            let dup = m.hcat(&RatMatrix::from_row_major(m.nrows(), 1, m.column(j))).unwrap();
            prop_assert_eq!(column_rank(&dup).rank, column_rank(&m).rank);
        }

        #[test]
        fn signing_rows_preserves_rank(m in small_matrix(), seed in any::<u64>()) {
            let signs: Vec<i8> = (0..m.nrows()).map(|i| if (seed >> (i % 64)) & 1 == 1 { -1 } else { 1 }).collect();
            prop_assert_eq!(column_rank(&m.scale_rows(&signs)).rank, column_rank(&m).rank);
        }

        #[test]
        fn null_vector_is_exact(m in small_matrix()) {
            let r = column_rank(&m);
            if let Some(NullVector::Exact(v)) = r.null_vector {
                prop_assert!(v.iter().any(|x| !x.is_zero()));
                prop_assert!(m.mul_vec(&v).iter().all(Zero::is_zero));
            } else {
                prop_assert!(r.full_column_rank());
            }
        }
    }
}
