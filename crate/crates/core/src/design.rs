//! Index partition and the signed, row-augmented design matrices used by the
//! propriety conditions.
//!
//! Observations with `y_i = 0` go to I1, saturated ones (`y_i = m_i`) to I2,
//! and interior ones to I3. Every I3 row appears twice in the augmented
//! matrix: once with sign +1 in its original position and once with sign -1
//! appended after the first n rows, in increasing index order.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{validate, Family, GlmmModel, Link, ValidatedModel};
use crate::numeric::RatMatrix;

/// Zero-based index sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub zeros: Vec<usize>,
    pub saturated: Vec<usize>,
    pub interior: Vec<usize>,
}

impl Partition {
    /// Number of interior observations (the count of appended rows).
    pub fn k(&self) -> usize {
        self.interior.len()
    }

    /// Row signs for the augmented matrices, length n + k.
    pub fn signs(&self, n: usize) -> Vec<i8> {
        let mut t = vec![1i8; n + self.k()];
        for &i in &self.saturated {
            t[i] = -1;
        }
        for s in t.iter_mut().skip(n) {
            *s = -1;
        }
        t
    }
}

pub fn partition_indices(y: &[i64], m: &[i64]) -> Partition {
    debug_assert_eq!(y.len(), m.len());
    let mut part = Partition {
        zeros: Vec::new(),
        saturated: Vec::new(),
        interior: Vec::new(),
    };
    for (i, (&yi, &mi)) in y.iter().zip(m).enumerate() {
        if yi == 0 {
            part.zeros.push(i);
        } else if yi == mi {
            part.saturated.push(i);
        } else {
            part.interior.push(i);
        }
    }
    part
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignBundle {
    pub partition: Partition,
    pub signs: Vec<i8>,
    pub x_aug: RatMatrix,
    pub x_star: RatMatrix,
    pub z_aug: RatMatrix,
    pub z_star: RatMatrix,
}

impl DesignBundle {
    pub fn rows(&self) -> usize {
        self.signs.len()
    }

    /// `(X*△, Z*△)` side by side.
    pub fn xz_star(&self) -> RatMatrix {
        self.x_star.hcat(&self.z_star).expect("bundle matrices share row count")
    }
}

/// Builds the augmented matrices from explicit data. `m` gives the trial
/// counts defining the partition.
pub fn build_bundle_from(x: &RatMatrix, z: &RatMatrix, y: &[i64], m: &[i64]) -> DesignBundle {
    let partition = partition_indices(y, m);
    let n = y.len();
    let x_aug = x
        .vcat(&x.select_rows(&partition.interior))
        .expect("same column count");
    let z_aug = z
        .vcat(&z.select_rows(&partition.interior))
        .expect("same column count");
    let signs = partition.signs(n);
    let x_star = x_aug.scale_rows(&signs);
    let z_star = z_aug.scale_rows(&signs);
    DesignBundle {
        partition,
        signs,
        x_aug,
        x_star,
        z_aug,
        z_star,
    }
}

/// Bundle for a binomial or Bernoulli model using its own trial counts.
/// Poisson models must go through [`poissonize`] first.
pub fn build_bundle(model: &ValidatedModel) -> Result<DesignBundle> {
    if !model.family().is_binomial_like() {
        return Err(Error::WrongFamily {
            expected: "binomial or bernoulli".into(),
            actual: model.family().to_string(),
        });
    }
    Ok(build_bundle_from(model.x(), model.z(), model.y(), model.trials()))
}

/// Rows scaled by c_i = 1 - 2 y_i, for binary data.
pub fn build_binary_star(model: &ValidatedModel) -> Result<(RatMatrix, RatMatrix)> {
    if model.family() != Family::Bernoulli {
        return Err(Error::WrongFamily {
            expected: "bernoulli".into(),
            actual: model.family().to_string(),
        });
    }
    let signs: Vec<i8> = model.y().iter().map(|&y| (1 - 2 * y) as i8).collect();
    Ok((model.x().scale_rows(&signs), model.z().scale_rows(&signs)))
}

/// Pseudo-binomial model with every m_i set to max(y) and the logistic cdf.
pub fn poissonize(model: &ValidatedModel) -> Result<ValidatedModel> {
    if model.family() != Family::Poisson {
        return Err(Error::WrongFamily {
            expected: "poisson".into(),
            actual: model.family().to_string(),
        });
    }
    let y_max = model.y().iter().copied().max().unwrap_or(0);
    if y_max == 0 {
        return Err(Error::DegenerateAllZero);
    }
    let inner = model.model();
    validate(GlmmModel {
        family: Family::Binomial,
        link: Link::Logit,
        y: inner.y.clone(),
        m: Some(vec![y_max; inner.y.len()]),
        x: inner.x.clone(),
        z: inner.z.clone(),
        blocks: inner.blocks.clone(),
    })
}
