#![allow(dead_code)]

use propriety_core::model::{validate, Family, GlmmModel, Link, PriorBlock, ValidatedModel};
use propriety_core::numeric::{rat, ratio, RatMatrix, Rational};

pub fn decimal_rows(rows: &[&[&str]]) -> RatMatrix {
    RatMatrix::from_decimal_rows(rows).unwrap()
}

pub fn int_rows(rows: &[&[i64]]) -> RatMatrix {
    RatMatrix::from_i64_rows(rows)
}

pub fn gamma_block(q: usize) -> PriorBlock {
    PriorBlock::new(q, ratio(3, 2), ratio(1, 10))
}

pub fn one_way_z() -> RatMatrix {
    int_rows(&[&[1, 0], &[1, 0], &[1, 0], &[0, 1], &[0, 1], &[0, 1]])
}

pub fn one_way_binomial_x() -> RatMatrix {
    decimal_rows(&[&["1", "2.9"], &["1", "1.7"], &["1", "2.6"], &["1", "3.1"], &["1", "3.8"], &["1", "4.2"]])
}

/// One-way binomial model: six observations, two levels, covariate column.
pub fn one_way_binomial_with(x: RatMatrix, link: Link, a: Rational, b: Rational) -> ValidatedModel {
    validate(GlmmModel {
        family: Family::Binomial,
        link,
        y: vec![0, 4, 2, 4, 3, 5],
        m: Some(vec![3, 4, 5, 4, 3, 5]),
        x,
        z: one_way_z(),
        blocks: vec![PriorBlock::new(2, a, b)],
    })
    .unwrap()
}

pub fn one_way_binomial() -> ValidatedModel {
    one_way_binomial_with(one_way_binomial_x(), Link::Logit, ratio(3, 2), ratio(1, 10))
}

/// The same data with the covariate replaced by a copy of the intercept.
pub fn one_way_binomial_rank_deficient() -> ValidatedModel {
    one_way_binomial_with(int_rows(&[&[1, 1]; 6].map(|r| &r[..])), Link::Logit, ratio(3, 2), ratio(1, 10))
}

pub fn one_way_poisson_with(a: Rational, b: Rational) -> ValidatedModel {
    validate(GlmmModel {
        family: Family::Poisson,
        link: Link::Log,
        y: vec![0, 0, 0, 2, 0, 0],
        m: None,
        x: decimal_rows(&[&["1", "9.4"], &["1", "8.7"], &["1", "10.2"], &["1", "9.1"], &["1", "8.9"], &["1", "9.5"]]),
        z: one_way_z(),
        blocks: vec![PriorBlock::new(2, a, b)],
    })
    .unwrap()
}

pub fn one_way_poisson() -> ValidatedModel {
    one_way_poisson_with(ratio(3, 2), ratio(1, 10))
}

pub fn two_way_z() -> RatMatrix {
    int_rows(&[
        &[1, 0, 0, 1, 0],
        &[1, 0, 0, 0, 1],
        &[0, 1, 0, 1, 0],
        &[0, 1, 0, 0, 1],
        &[0, 0, 1, 1, 0],
        &[0, 0, 1, 0, 1],
    ])
}

/// Two crossed factors with three and two levels; Z has rank 4 < 5.
pub fn two_way_binomial_with(blocks: Vec<PriorBlock>) -> ValidatedModel {
    validate(GlmmModel {
        family: Family::Binomial,
        link: Link::Logit,
        y: vec![0, 1, 2, 0, 2, 2],
        m: Some(vec![2; 6]),
        x: decimal_rows(&[&["1", "1.8"], &["1", "2.1"], &["1", "3.2"], &["1", "4.9"], &["1", "5.3"], &["1", "6.1"]]),
        z: two_way_z(),
        blocks,
    })
    .unwrap()
}

pub fn two_way_binomial() -> ValidatedModel {
    two_way_binomial_with(vec![gamma_block(3), gamma_block(2)])
}

pub fn rational_rows(m: &RatMatrix) -> Vec<Vec<Rational>> {
    m.rows_iter().map(|r| r.to_vec()).collect()
}

pub fn r(n: i64) -> Rational {
    rat(n)
}
