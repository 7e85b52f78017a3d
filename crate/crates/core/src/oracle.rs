//! Numerical corroboration by quadrature: complete and marginal
//! log-likelihoods, truncated normalizing constants, and a finite-difference
//! check of the approximate Fisher information for τ.
//!
//! Everything here is deterministic. Divergence seen in a truncation sequence
//! is consistent with impropriety; it is not a proof.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::glm::fit_model_glm;
use crate::likelihood::ObsLik;
use crate::model::{Family, PriorBlock, ValidatedModel};
use crate::numeric::{log_sum_exp, CompensatedSum};
use crate::quadrature::{cubature, gauss_hermite, integrate_vector, shell_regions, AdaptiveConfig, CubatureConfig, Region};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Fraction of the Newton decrement a line-search step must realize.
const SUFFICIENT_GAIN: f64 = 0.25;

/// Largest random-effect dimension the marginal integrator accepts.
pub const MAX_RANDOM_DIM: usize = 4;

fn check_taus(model: &ValidatedModel, tau: &[f64]) -> Result<()> {
    if tau.len() != model.r() {
        return Err(Error::DimensionMismatch(format!("{} precisions for {} blocks", tau.len(), model.r())));
    }
    match tau.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        Some(&t) => Err(Error::NonpositiveTau(t)),
        None => Ok(()),
    }
}

fn check_beta(model: &ValidatedModel, beta: &[f64]) -> Result<()> {
    if beta.len() != model.p() {
        return Err(Error::DimensionMismatch(format!("beta has {} entries, X has {} columns", beta.len(), model.p())));
    }
    Ok(())
}

/// Precision of each random-effect coordinate.
fn coordinate_precisions(model: &ValidatedModel, tau: &[f64]) -> Vec<f64> {
    let mut prec = vec![0.0; model.q()];
    for (j, &t) in tau.iter().enumerate() {
        for col in model.block_columns(j) {
            prec[col] = t;
        }
    }
    prec
}

fn trials_for(model: &ValidatedModel) -> Vec<i64> {
    match model.family() {
        Family::Poisson => vec![0; model.n()],
        _ => model.trials().to_vec(),
    }
}

/// log of `Π_i p(y_i | β, u) · φ_q(u; 0, D(τ)^{-1})`, constants included.
pub fn complete_loglik(beta: &[f64], tau: &[f64], u: &[f64], model: &ValidatedModel) -> Result<f64> {
    check_beta(model, beta)?;
    check_taus(model, tau)?;
    if u.len() != model.q() {
        return Err(Error::DimensionMismatch(format!("u has {} entries, Z has {} columns", u.len(), model.q())));
    }
    Ok(Conditional::full(model, beta, tau)?.value(u))
}

/// Derivative of [`complete_loglik`] in τ_j: `q_j/(2τ_j) − u_jᵀu_j/2`.
pub fn complete_score_tau(tau: &[f64], u: &[f64], model: &ValidatedModel) -> Result<Vec<f64>> {
    check_taus(model, tau)?;
    if u.len() != model.q() {
        return Err(Error::DimensionMismatch(format!("u has {} entries, Z has {} columns", u.len(), model.q())));
    }
    Ok(tau
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let cols = model.block_columns(j);
            let q = cols.len() as f64;
            let uu: f64 = u[cols].iter().map(|v| v * v).sum();
            q / (2.0 * t) - uu / 2.0
        })
        .collect())
}

/// The integrand over a group of random-effect coordinates for fixed
/// (β, τ), restricted to the observations that load on them. Constants of
/// those observations and the normal densities of the coordinates are
/// included.
#[derive(Clone)]
struct Conditional<'a> {
    lik: ObsLik,
    x: Vec<&'a [f64]>,
    y: Vec<i64>,
    trials: Vec<i64>,
    /// Loadings of each observation on this group's coordinates.
    z: Vec<Vec<f64>>,
    eta0: Vec<f64>,
    prec: Vec<f64>,
    constant: f64,
    /// Newton starting point; the last mode found.
    start: Vec<f64>,
}

impl<'a> Conditional<'a> {
    fn new(model: &'a ValidatedModel, rows: &[usize], coords: &[usize], prec: &[f64]) -> Result<Self> {
        let lik = ObsLik::new(model.family(), model.link())?;
        let all_trials = trials_for(model);
        let mut constant = CompensatedSum::new();
        for &i in rows {
            constant.add(lik.log_constant(model.y()[i], all_trials[i]));
        }
        for &c in coords {
            constant.add(0.5 * (prec[c].ln() - LN_2PI));
        }
        Ok(Conditional {
            lik,
            x: rows.iter().map(|&i| model.x_rows()[i].as_slice()).collect(),
            y: rows.iter().map(|&i| model.y()[i]).collect(),
            trials: rows.iter().map(|&i| all_trials[i]).collect(),
            z: rows.iter().map(|&i| coords.iter().map(|&c| model.z_rows()[i][c]).collect()).collect(),
            eta0: vec![0.0; rows.len()],
            prec: coords.iter().map(|&c| prec[c]).collect(),
            constant: constant.value(),
            start: vec![0.0; coords.len()],
        })
    }

    fn full(model: &'a ValidatedModel, beta: &[f64], tau: &[f64]) -> Result<Self> {
        let rows: Vec<usize> = (0..model.n()).collect();
        let coords: Vec<usize> = (0..model.q()).collect();
        let mut c = Conditional::new(model, &rows, &coords, &coordinate_precisions(model, tau))?;
        c.set_beta(beta);
        Ok(c)
    }

    fn set_beta(&mut self, beta: &[f64]) {
        for (e, row) in self.eta0.iter_mut().zip(&self.x) {
            *e = row.iter().zip(beta).map(|(x, b)| x * b).sum();
        }
    }

    /// Rescales every coordinate precision to `tau`.
    fn set_precision(&mut self, tau: f64) {
        let dim = self.prec.len() as f64;
        let old: f64 = self.prec.iter().map(|p| p.ln()).sum();
        self.constant += 0.5 * (dim * tau.ln() - old);
        self.prec.iter_mut().for_each(|p| *p = tau);
    }

    fn eta(&self, i: usize, u: &[f64]) -> f64 {
        self.eta0[i] + self.z[i].iter().zip(u).map(|(z, v)| z * v).sum::<f64>()
    }

    fn value(&self, u: &[f64]) -> f64 {
        let mut s = CompensatedSum::new();
        s.add(self.constant);
        for i in 0..self.y.len() {
            s.add(self.lik.kernel(self.eta(i, u), self.y[i], self.trials[i]));
        }
        for (p, v) in self.prec.iter().zip(u) {
            s.add(-0.5 * p * v * v);
        }
        s.value()
    }

    /// Gradient and negated Hessian. The negated Hessian is positive
    /// definite because every supported log pmf is concave in η.
    fn derivatives(&self, u: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let q = u.len();
        let mut g = DVector::from_iterator(q, self.prec.iter().zip(u).map(|(p, v)| -p * v));
        let mut h = DMatrix::from_diagonal(&DVector::from_column_slice(&self.prec));
        for i in 0..self.y.len() {
            let t = self.lik.term(self.eta(i, u), self.y[i], self.trials[i]);
            let zi = &self.z[i];
            for a in 0..q {
                if zi[a] == 0.0 {
                    continue;
                }
                g[a] += t.d1 * zi[a];
                for b in 0..q {
                    h[(a, b)] -= t.d2 * zi[a] * zi[b];
                }
            }
        }
        (g, h)
    }

    /// Damped Newton from the previous mode. Returns the mode and the
    /// negated Hessian there.
    fn mode(&mut self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let found = if self.prec.len() == 1 { self.mode_scalar() } else { self.mode_general() };
        if let Ok((u, _)) = &found {
            self.start.copy_from_slice(u.as_slice());
        }
        found
    }

    fn scalar_derivatives(&self, u: f64) -> (f64, f64) {
        let mut g = -self.prec[0] * u;
        let mut h = self.prec[0];
        for i in 0..self.y.len() {
            let z = self.z[i][0];
            let t = self.lik.term(self.eta0[i] + z * u, self.y[i], self.trials[i]);
            g += t.d1 * z;
            h -= t.d2 * z * z;
        }
        (g, h)
    }

    fn mode_scalar(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let mut u = self.start[0];
        let mut val = self.value(&[u]);
        for _ in 0..200 {
            let (g, h) = self.scalar_derivatives(u);
            if !(h > 0.0) {
                return Err(Error::ModeSearchFailed("curvature is not positive".into()));
            }
            let step = g / h;
            let decrement = g * step;
            if !decrement.is_finite() {
                return Err(Error::ModeSearchFailed("nonfinite Newton step".into()));
            }
            let noise = 1e-15 * (1.0 + val.abs());
            if decrement <= noise {
                return Ok((DVector::from_element(1, u), DMatrix::from_element(1, 1, h)));
            }
            let mut scale = 1.0;
            loop {
                let cand = u + step * scale;
                let cv = self.value(&[cand]);
                if cv >= val + SUFFICIENT_GAIN * scale * decrement || scale * decrement <= noise {
                    u = cand;
                    val = cv;
                    break;
                }
                scale *= 0.5;
            }
        }
        Err(Error::ModeSearchFailed("Newton iteration limit reached".into()))
    }

    fn mode_general(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let mut u = DVector::from_column_slice(&self.start);
        let mut val = self.value(u.as_slice());
        for _ in 0..200 {
            let (g, h) = self.derivatives(u.as_slice());
            let Some(ch) = h.clone().cholesky() else {
                return Err(Error::ModeSearchFailed("curvature is not positive definite".into()));
            };
            let step = ch.solve(&g);
            let decrement = g.dot(&step);
            if !decrement.is_finite() {
                return Err(Error::ModeSearchFailed("nonfinite Newton step".into()));
            }
            // Half the decrement estimates the remaining gain in the log integrand.
            let noise = 1e-15 * (1.0 + val.abs());
            if decrement <= noise {
                return Ok((u, h));
            }
            let mut scale = 1.0;
            loop {
                let cand = &u + &step * scale;
                let cv = self.value(cand.as_slice());
                // Full Newton steps can overshoot in flat logistic tails and
                // oscillate, so a fixed fraction of the predicted gain is
                // required. Once that gain is below rounding, trust the step.
                if cv >= val + SUFFICIENT_GAIN * scale * decrement || scale * decrement <= noise {
                    u = cand;
                    val = cv;
                    break;
                }
                scale *= 0.5;
            }
        }
        Err(Error::ModeSearchFailed("Newton iteration limit reached".into()))
    }
}

/// The u-integral split into independent groups: coordinates are linked
/// when some observation loads on both, and the prior on u is diagonal, so
/// the integral is a product over connected groups. Observations loading on
/// no coordinate form a fixed factor.
#[derive(Clone)]
struct Factorized<'a> {
    fixed: Conditional<'a>,
    groups: Vec<(Vec<usize>, Conditional<'a>)>,
}

impl<'a> Factorized<'a> {
    fn new(model: &'a ValidatedModel, beta: &[f64], tau: &[f64]) -> Result<Self> {
        let q = model.q();
        let z = model.z_rows();
        // Union-find over coordinates.
        let mut parent: Vec<usize> = (0..q).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for row in z {
            let mut first = None;
            for (c, &v) in row.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                match first {
                    None => first = Some(c),
                    Some(f) => {
                        let (a, b) = (find(&mut parent, f), find(&mut parent, c));
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let roots: Vec<usize> = (0..q).map(|c| find(&mut parent, c)).collect();
        let mut group_coords: Vec<Vec<usize>> = Vec::new();
        let mut group_of = vec![0usize; q];
        for c in 0..q {
            if roots[c] == c {
                group_of[c] = group_coords.len();
                group_coords.push(vec![c]);
            } else {
                group_of[c] = group_of[roots[c]];
                group_coords[group_of[c]].push(c);
            }
        }
        let mut group_rows: Vec<Vec<usize>> = vec![Vec::new(); group_coords.len()];
        let mut free_rows = Vec::new();
        for (i, row) in z.iter().enumerate() {
            match row.iter().position(|&v| v != 0.0) {
                Some(c) => group_rows[group_of[c]].push(i),
                None => free_rows.push(i),
            }
        }
        let prec = coordinate_precisions(model, tau);
        let mut fixed = Conditional::new(model, &free_rows, &[], &prec)?;
        fixed.set_beta(beta);
        let mut groups = Vec::with_capacity(group_coords.len());
        for (coords, rows) in group_coords.into_iter().zip(group_rows) {
            let mut c = Conditional::new(model, &rows, &coords, &prec)?;
            c.set_beta(beta);
            groups.push((coords, c));
        }
        Ok(Factorized { fixed, groups })
    }

    fn set_beta(&mut self, beta: &[f64]) {
        self.fixed.set_beta(beta);
        for (_, g) in &mut self.groups {
            g.set_beta(beta);
        }
    }

    /// Valid for a single block, where every coordinate shares one precision.
    fn set_precision(&mut self, tau: f64) {
        for (_, g) in &mut self.groups {
            g.set_precision(tau);
        }
    }

    fn adapt(&mut self) -> Result<Vec<Adapted>> {
        self.groups.iter_mut().map(|(_, g)| Adapted::new(g)).collect()
    }

    fn integrate(&self, adapted: &[Adapted], nodes: usize) -> f64 {
        let mut s = CompensatedSum::new();
        s.add(self.fixed.value(&[]));
        for ((_, g), a) in self.groups.iter().zip(adapted) {
            s.add(a.integrate(g, nodes));
        }
        s.value()
    }

    fn mode(&self, adapted: &[Adapted], q: usize) -> Vec<f64> {
        let mut u = vec![0.0; q];
        for ((coords, _), a) in self.groups.iter().zip(adapted) {
            for (&c, &v) in coords.iter().zip(a.mode.iter()) {
                u[c] = v;
            }
        }
        u
    }

    fn max_group_dim(&self) -> u32 {
        self.groups.iter().map(|(c, _)| c.len() as u32).max().unwrap_or(0)
    }
}

/// Precomputed mode and scaling for adaptive Gauss-Hermite quadrature.
struct Adapted {
    mode: DVector<f64>,
    /// `√2 L^{-T}` with `L Lᵀ` the negated Hessian at the mode.
    transform: DMatrix<f64>,
    log_jacobian: f64,
}

impl Adapted {
    fn new(cond: &mut Conditional) -> Result<Self> {
        let (mode, h) = cond.mode()?;
        let q = mode.len();
        let l = h
            .cholesky()
            .ok_or_else(|| Error::ModeSearchFailed("curvature at mode is not positive definite".into()))?
            .l();
        let lt_inv = l
            .transpose()
            .try_inverse()
            .ok_or_else(|| Error::ModeSearchFailed("singular curvature at mode".into()))?;
        let log_det: f64 = (0..q).map(|i| l[(i, i)].ln()).sum();
        Ok(Adapted {
            mode,
            transform: lt_inv * std::f64::consts::SQRT_2,
            log_jacobian: 0.5 * q as f64 * std::f64::consts::LN_2 - log_det,
        })
    }

    /// log ∫ exp(integrand) du with `nodes` points per coordinate.
    fn integrate(&self, cond: &Conditional, nodes: usize) -> f64 {
        let rule = gauss_hermite(nodes);
        let q = self.mode.len();
        let total = nodes.pow(q as u32);
        let mut idx = vec![0usize; q];
        let mut u = vec![0.0; q];
        let mut terms = Vec::with_capacity(total);
        for _ in 0..total {
            let mut lw = 0.0;
            u.copy_from_slice(self.mode.as_slice());
            for (d, &k) in idx.iter().enumerate() {
                let x = rule.nodes[k];
                lw += rule.log_weights[k] + x * x;
                for (r, ur) in u.iter_mut().enumerate() {
                    *ur += self.transform[(r, d)] * x;
                }
            }
            terms.push(lw + cond.value(&u));
            for d in 0..q {
                idx[d] += 1;
                if idx[d] < nodes {
                    break;
                }
                idx[d] = 0;
            }
        }
        self.log_jacobian + log_sum_exp(&terms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalConfig {
    /// Stop doubling once successive log values differ by less than this.
    pub rel_tol: f64,
    pub min_nodes: usize,
    pub max_nodes: usize,
    /// Cap on the tensor-grid size.
    pub max_grid: usize,
}

impl Default for MarginalConfig {
    fn default() -> Self {
        MarginalConfig {
            rel_tol: 1e-8,
            min_nodes: 4,
            max_nodes: 64,
            max_grid: 1 << 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalEstimate {
    pub log_value: f64,
    /// Gauss-Hermite points per coordinate in the accepted rule.
    pub nodes: usize,
    pub mode: Vec<f64>,
    /// Whether node doubling met the tolerance before the caps.
    pub converged: bool,
}

fn check_scale(model: &ValidatedModel) -> Result<()> {
    if model.q() > MAX_RANDOM_DIM {
        return Err(Error::ScaleLimit(format!("{} random effects exceed the limit of {MAX_RANDOM_DIM}", model.q())));
    }
    Ok(())
}

/// log L(β, τ | y) by adaptive Gauss-Hermite quadrature with node doubling.
pub fn marginal_loglik(beta: &[f64], tau: &[f64], model: &ValidatedModel) -> Result<f64> {
    Ok(marginal_loglik_detailed(beta, tau, model, &MarginalConfig::default())?.log_value)
}

pub fn marginal_loglik_detailed(beta: &[f64], tau: &[f64], model: &ValidatedModel, cfg: &MarginalConfig) -> Result<MarginalEstimate> {
    check_beta(model, beta)?;
    check_taus(model, tau)?;
    check_scale(model)?;
    let mut fact = Factorized::new(model, beta, tau)?;
    let adapted = fact.adapt()?;
    let dim = fact.max_group_dim();
    let mut nodes = cfg.min_nodes.max(1);
    let mut value = fact.integrate(&adapted, nodes);
    let mut converged = false;
    loop {
        let next = nodes * 2;
        if next > cfg.max_nodes || next.saturating_pow(dim) > cfg.max_grid {
            break;
        }
        let next_value = fact.integrate(&adapted, next);
        let change = (next_value - value).abs();
        nodes = next;
        value = next_value;
        if change < cfg.rel_tol {
            converged = true;
            break;
        }
    }
    Ok(MarginalEstimate {
        log_value: value,
        nodes,
        mode: fact.mode(&adapted, model.q()),
        converged,
    })
}

/// log L(β, τ | y) with a fixed number of nodes per coordinate; smooth in
/// (β, τ), which finite differences and nested integrals rely on.
pub fn marginal_loglik_fixed(beta: &[f64], tau: &[f64], model: &ValidatedModel, nodes: usize) -> Result<f64> {
    check_beta(model, beta)?;
    check_taus(model, tau)?;
    check_scale(model)?;
    let mut fact = Factorized::new(model, beta, tau)?;
    let adapted = fact.adapt()?;
    Ok(fact.integrate(&adapted, nodes))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeCounts {
    pub gauss_hermite: usize,
    /// Outer τ-integrand evaluations.
    pub tau: usize,
    /// Inner β-integrand evaluations.
    pub beta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureEstimate {
    pub value: f64,
    pub log_value: f64,
    /// β-truncation half-width.
    #[serde(rename = "box")]
    pub half_width: f64,
    pub nodes: NodeCounts,
    pub rel_error_est: f64,
    /// `value / previous value`, absent for the first box.
    pub ratio: Option<f64>,
}

impl QuadratureEstimate {
    /// `ratio − 1`: near zero once further truncation stops mattering.
    pub fn convergence_diagnostic(&self) -> Option<f64> {
        self.ratio.map(|r| r - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CyConfig {
    pub rel_tol: f64,
    pub gh_nodes: usize,
    /// Integrate τ over this window instead of (0, ∞).
    pub tau_window: Option<(f64, f64)>,
    pub max_subdivisions: usize,
    pub max_cubature_evals: usize,
    pub parallel: bool,
}

impl Default for CyConfig {
    fn default() -> Self {
        CyConfig {
            rel_tol: 3e-3,
            gh_nodes: 8,
            tau_window: None,
            max_subdivisions: 200,
            max_cubature_evals: 50_000,
            parallel: true,
        }
    }
}

/// Truncated normalizing constants
/// `∫ π(τ) ∫_{[−B,B]^p} L(β, τ | y) dβ dτ` for each `B` in `half_widths`,
/// under a flat prior on β and `π(τ) = τ^{a−1} e^{−bτ}`.
///
/// The τ-integral uses `τ = s/(1−s)`. For every s the β-integral is split
/// into the innermost box and the shells between consecutive boxes, each
/// nonnegative, so the returned values are nondecreasing in `B`.
pub fn truncated_cy(model: &ValidatedModel, prior: &PriorBlock, half_widths: &[f64], cfg: &CyConfig) -> Result<Vec<QuadratureEstimate>> {
    if model.r() != 1 || model.p() > 2 || model.q() > 2 {
        return Err(Error::ScaleLimit(format!(
            "truncated integrals need p <= 2, q <= 2, one block; got p = {}, q = {}, r = {}",
            model.p(),
            model.q(),
            model.r()
        )));
    }
    if prior.q != model.q() {
        return Err(Error::DimensionMismatch(format!("prior block has q = {}, model has {}", prior.q, model.q())));
    }
    if half_widths.is_empty()
        || half_widths[0] <= 0.0
        || half_widths.windows(2).any(|w| w[1] <= w[0])
        || half_widths.iter().any(|b| !b.is_finite())
    {
        return Err(Error::InvalidArgument("half-widths must be positive, finite and strictly increasing".into()));
    }
    let (s_lo, s_hi) = match cfg.tau_window {
        None => (0.0, 1.0),
        Some((lo, hi)) if lo >= 0.0 && hi > lo => (lo / (1.0 + lo), if hi.is_finite() { hi / (1.0 + hi) } else { 1.0 }),
        Some((lo, hi)) => return Err(Error::InvalidArgument(format!("invalid tau window ({lo}, {hi})"))),
    };
    let a = prior.a_f64();
    let b = prior.b_f64();
    let p = model.p();
    let k = half_widths.len();

    // Scale so the integrand is O(1) near β = 0, τ = 1.
    let reference = marginal_loglik_fixed(&vec![0.0; p], &[1.0], model, cfg.gh_nodes)?;
    let template = Factorized::new(model, &vec![0.0; p], &[1.0])?;

    let failure: std::sync::Mutex<Option<Error>> = std::sync::Mutex::new(None);
    let beta_evals = std::sync::atomic::AtomicUsize::new(0);
    let outer = |s: f64| -> Vec<f64> {
        let tau = s / (1.0 - s);
        let log_weight = (a - 1.0) * tau.ln() - b * tau - 2.0 * (1.0 - s).ln() - reference;
        let mut fact = template.clone();
        fact.set_precision(tau);
        let inner = |beta: &[f64]| -> f64 {
            fact.set_beta(beta);
            match fact.adapt() {
                Ok(ad) => (log_weight + fact.integrate(&ad, cfg.gh_nodes)).exp(),
                Err(e) => {
                    failure.lock().expect("poisoned").get_or_insert(e);
                    0.0
                }
            }
        };
        let inner = std::cell::RefCell::new(inner);
        let f = |beta: &[f64]| (inner.borrow_mut())(beta);
        let mut out = Vec::with_capacity(k);
        let core = cubature(
            f,
            &[Region::cube(half_widths[0], p)],
            &CubatureConfig {
                rel_tol: cfg.rel_tol,
                abs_tol: 0.0,
                max_evals: cfg.max_cubature_evals,
            },
        );
        let mut evals = core.evaluations;
        let mut so_far = core.value;
        out.push(core.value);
        for w in half_widths.windows(2) {
            let shell = cubature(
                f,
                &shell_regions(w[0], w[1], p),
                &CubatureConfig {
                    rel_tol: cfg.rel_tol,
                    // Error in a shell matters relative to the cumulative value.
                    abs_tol: cfg.rel_tol * so_far,
                    max_evals: cfg.max_cubature_evals,
                },
            );
            evals += shell.evaluations;
            so_far += shell.value.max(0.0);
            out.push(shell.value.max(0.0));
        }
        beta_evals.fetch_add(evals, std::sync::atomic::Ordering::Relaxed);
        out
    };
    let result = integrate_vector(
        outer,
        s_lo,
        s_hi,
        k,
        4,
        &AdaptiveConfig {
            rel_tol: cfg.rel_tol,
            abs_tol: 0.0,
            max_subdivisions: cfg.max_subdivisions,
            parallel: cfg.parallel,
        },
    );
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    let beta = beta_evals.into_inner();
    let total: f64 = result.values.iter().sum();
    let outer_rel = if total > 0.0 { result.error / total } else { 0.0 };
    let mut cumulative = CompensatedSum::new();
    let mut estimates: Vec<QuadratureEstimate> = Vec::with_capacity(k);
    for (i, (&piece, &half_width)) in result.values.iter().zip(half_widths).enumerate() {
        cumulative.add(piece.max(0.0));
        let scaled = cumulative.value();
        let ratio = estimates.last().map(|prev| if prev.value > 0.0 { scaled * reference.exp() / prev.value } else { f64::INFINITY });
        let ratio = if i == 0 { None } else { ratio };
        estimates.push(QuadratureEstimate {
            value: scaled * reference.exp(),
            log_value: scaled.ln() + reference,
            half_width,
            nodes: NodeCounts {
                gauss_hermite: cfg.gh_nodes,
                tau: result.evaluations,
                beta,
            },
            rel_error_est: outer_rel * total / scaled.max(f64::MIN_POSITIVE) + cfg.rel_tol,
            ratio,
        });
    }
    Ok(estimates)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherFdEstimate {
    /// `−d²/dτ² log L(β̂, τ | y)` by central differences.
    pub value: f64,
    pub tau: f64,
    pub step: f64,
    pub nodes: usize,
}

/// Observed information for τ at the GLM fit, by central finite differences
/// of the marginal log-likelihood at a fixed node count.
pub fn fisher_fd_oracle(model: &ValidatedModel, tau: f64) -> Result<f64> {
    Ok(fisher_fd_detailed(model, tau)?.value)
}

pub fn fisher_fd_detailed(model: &ValidatedModel, tau: f64) -> Result<FisherFdEstimate> {
    if model.r() != 1 || model.q() > 2 {
        return Err(Error::ScaleLimit(format!(
            "finite-difference information needs one block with q <= 2; got q = {}, r = {}",
            model.q(),
            model.r()
        )));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::NonpositiveTau(tau));
    }
    let fit = fit_model_glm(model)?;
    if fit.separation_flag {
        return Err(Error::Separation);
    }
    let beta = fit.beta_hat;
    let cfg = MarginalConfig {
        rel_tol: 1e-13,
        ..MarginalConfig::default()
    };
    let nodes = marginal_loglik_detailed(&beta, &[tau], model, &cfg)?.nodes;
    let h = 1e-3 * tau;
    let f = |t: f64| marginal_loglik_fixed(&beta, &[t], model, nodes);
    let (fp, f0, fm) = (f(tau + h)?, f(tau)?, f(tau - h)?);
    Ok(FisherFdEstimate {
        value: -((fp - f0) + (fm - f0)) / (h * h),
        tau,
        step: h,
        nodes,
    })
}
