//! Fixtures shared by the benchmarks.

use propriety_core::numeric::ratio;
use propriety_core::{validate, Family, GlmmModel, Link, PriorBlock, RatMatrix, ValidatedModel};

/// One-way binomial model with a covariate and two random-effect levels.
pub fn one_way_binomial() -> ValidatedModel {
    let x = RatMatrix::from_decimal_rows(&[&["1", "2.9"], &["1", "1.7"], &["1", "2.6"], &["1", "3.1"], &["1", "3.8"], &["1", "4.2"]])
        .expect("fixture rows are well formed");
    validate(GlmmModel {
        family: Family::Binomial,
        link: Link::Logit,
        y: vec![0, 4, 2, 4, 3, 5],
        m: Some(vec![3, 4, 5, 4, 3, 5]),
        x,
        z: RatMatrix::from_i64_rows(&[&[1, 0], &[1, 0], &[1, 0], &[0, 1], &[0, 1], &[0, 1]]),
        blocks: vec![PriorBlock::new(2, ratio(3, 2), ratio(1, 10))],
    })
    .expect("fixture is valid")
}

/// Integer matrix with `rows` rows and `cols` columns from a fixed LCG.
pub fn lcg_matrix(rows: usize, cols: usize, seed: u64) -> RatMatrix {
    let mut state = seed;
    let data: Vec<Vec<i64>> = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((state >> 33) % 11) as i64 - 5
                })
                .collect()
        })
        .collect();
    let refs: Vec<&[i64]> = data.iter().map(Vec::as_slice).collect();
    RatMatrix::from_i64_rows(&refs)
}
