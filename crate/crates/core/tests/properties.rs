mod common;

use common::*;
use proptest::prelude::*;
use propriety_core::design::partition_indices;
use propriety_core::glm::fit_glm;
use propriety_core::jeffreys::{jeffreys_density, JeffreysPrior};
use num_traits::Zero;
use propriety_core::linalg::{column_rank, NullVector};
use propriety_core::lp::exists_positive_null;
use propriety_core::model::{Family, Link};
use propriety_core::numeric::{RatMatrix, Rational};

fn matrix(rows: &[Vec<i64>]) -> RatMatrix {
    let refs: Vec<&[i64]> = rows.iter().map(Vec::as_slice).collect();
    RatMatrix::from_i64_rows(&refs)
}

fn int_matrix(max_rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop::collection::vec(prop::collection::vec(-3i64..=3, cols), 1..=max_rows)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn lp_answers_carry_valid_evidence(rows in (1usize..=3).prop_flat_map(|c| int_matrix(8, c))) {
        let m = matrix(&rows);
        let r = exists_positive_null(&m);
        prop_assert!(r.verify(&m));
        // Appending the negated sum of all rows always admits e = 1.
        let mut closed = rows.clone();
        let cols = rows[0].len();
        closed.push((0..cols).map(|c| -rows.iter().map(|r| r[c]).sum::<i64>()).collect());
        prop_assert!(exists_positive_null(&matrix(&closed)).exists);
    }

    #[test]
    fn lp_is_invariant_to_row_order(rows in (1usize..=3).prop_flat_map(|c| int_matrix(7, c)), shift in 0usize..7) {
        let mut rotated = rows.clone();
        let k = shift % rows.len();
        rotated.rotate_left(k);
        prop_assert_eq!(exists_positive_null(&matrix(&rows)).exists, exists_positive_null(&matrix(&rotated)).exists);
    }

    #[test]
    fn rank_ignores_row_order_and_row_signs(rows in (1usize..=4).prop_flat_map(|c| int_matrix(6, c)), flips in prop::collection::vec(any::<bool>(), 6)) {
        let base = column_rank(&matrix(&rows));
        let mut signed: Vec<Vec<i64>> = rows.iter().zip(&flips).map(|(r, &f)| r.iter().map(|v| if f { -v } else { *v }).collect()).collect();
        signed.reverse();
        let other = column_rank(&matrix(&signed));
        prop_assert_eq!(base.rank, other.rank);
        prop_assert!(base.rank <= rows.len().min(rows[0].len()));
    }

    #[test]
    fn partition_covers_each_index_once(pairs in prop::collection::vec((0i64..=5, 1i64..=5), 0..12)) {
        let m: Vec<i64> = pairs.iter().map(|p| p.1).collect();
        let y: Vec<i64> = pairs.iter().map(|p| p.0.min(p.1)).collect();
        let part = partition_indices(&y, &m);
        let mut all: Vec<usize> = part.zeros.iter().chain(&part.saturated).chain(&part.interior).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..y.len()).collect::<Vec<_>>());
        prop_assert!(part.interior.iter().all(|&i| y[i] > 0 && y[i] < m[i]));
        let signs = part.signs(y.len());
        prop_assert_eq!(signs.len(), y.len() + part.k());
        prop_assert!(part.saturated.iter().all(|&i| signs[i] == -1));
    }

    #[test]
    fn glm_fitted_predictor_is_invariant_to_column_recombination(
        data in prop::collection::vec((0i64..=4, -2i64..=2), 4..10),
        k in -2i64..=2,
        s in 1i64..=3,
    ) {
        // X = [1, x] and X A = [1, s·x + k] span the same column space.
        let y: Vec<i64> = data.iter().map(|d| d.0).collect();
        let x: Vec<Vec<i64>> = data.iter().map(|d| vec![1, d.1]).collect();
        let xa: Vec<Vec<i64>> = data.iter().map(|d| vec![1, s * d.1 + k]).collect();
        let m = vec![4; y.len()];
        let a = fit_glm(&y, &m, &matrix(&x), Family::Binomial, &Link::Logit);
        let b = fit_glm(&y, &m, &matrix(&xa), Family::Binomial, &Link::Logit);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.separation_flag, b.separation_flag);
                if !a.separation_flag && a.converged && b.converged {
                    for (row, row_a) in x.iter().zip(&xa) {
                        let eta_a = a.beta_hat[0] + a.beta_hat[1] * row[1] as f64;
                        let eta_b = b.beta_hat[0] + b.beta_hat[1] * row_a[1] as f64;
                        prop_assert!((eta_a - eta_b).abs() < 1e-6 * (1.0 + eta_a.abs()), "{} vs {}", eta_a, eta_b);
                    }
                }
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "fits disagree on identifiability: {:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn jeffreys_density_is_decreasing(c in prop::collection::vec(1e-3f64..1e3, 1..5), t in -4.0f64..6.0) {
        let jp = JeffreysPrior::from_constants(vec![c], vec![0.0]).unwrap();
        let tau = 10f64.powf(t);
        prop_assert!(jeffreys_density(&jp, 0, tau * 1.01).unwrap() <= jeffreys_density(&jp, 0, tau).unwrap());
    }
}

#[test]
fn two_way_z_null_vector_is_the_level_contrast() {
    let rank = column_rank(&two_way_z());
    assert_eq!(rank.rank, 4);
    let Some(NullVector::Exact(v)) = rank.null_vector else { panic!("expected an exact null vector") };
    let expected = [1, 1, 1, -1, -1].map(|k| Rational::from_integer(k.into()));
    let scale = &v[0] / &expected[0];
    assert!(!scale.is_zero());
    for (a, b) in v.iter().zip(&expected) {
        assert_eq!(a, &(b * &scale));
    }
}
