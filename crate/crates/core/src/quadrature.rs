//! Quadrature rules and adaptive integrators used by the marginal-likelihood
//! oracle.
//!
//! * Gauss-Hermite and Gauss-Legendre nodes by Newton iteration on the
//!   three-term recurrences (cached per order).
//! * Globally adaptive Gauss-Kronrod (7/15) for vector-valued integrands on
//!   an interval. All components share the nodes, so positive integrands
//!   yield positive components.
//! * Globally adaptive cubature on hyperrectangles: G7/K15 in one dimension,
//!   the 15×15 Kronrod tensor product in two, and the degree-7/5 Genz-Malik
//!   pair in three or more.

// Kronrod tables are transcribed at full published precision.
#![allow(clippy::excessive_precision)]

use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::numeric::CompensatedSum;

/// Nodes with log-weights; log-weights keep far Hermite nodes usable.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub log_weights: Vec<f64>,
}

/// Gauss-Hermite rule for ∫ e^{-x²} f(x) dx.
pub fn gauss_hermite(n: usize) -> Arc<Rule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Rule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard.entry(n).or_insert_with(|| Arc::new(hermite_rule(n))).clone()
}

fn hermite_rule(n: usize) -> Rule {
    assert!(n >= 1);
    let pim4 = PI.powf(-0.25);
    let mut nodes = vec![0.0; n];
    let mut log_weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            // Orthonormal Hermite recurrence.
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        let lw = 2f64.ln() - 2.0 * pp.abs().ln();
        log_weights[i] = lw;
        log_weights[n - 1 - i] = lw;
    }
    if n % 2 == 1 {
        // Newton on an odd order converges to exactly zero only approximately.
        nodes[n / 2] = 0.0;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| nodes[a].total_cmp(&nodes[b]));
    let nodes: Vec<f64> = idx.iter().map(|&i| nodes[i]).collect();
    let log_weights: Vec<f64> = idx.iter().map(|&i| log_weights[i]).collect();
    let weights = log_weights.iter().map(|w| w.exp()).collect();
    Rule {
        nodes,
        weights,
        log_weights,
    }
}

/// Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Rule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard.entry(n).or_insert_with(|| Arc::new(legendre_rule(n))).clone()
}

fn legendre_rule(n: usize) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let log_weights = weights.iter().map(|w: &f64| w.ln()).collect();
    Rule {
        nodes,
        weights,
        log_weights,
    }
}

// Gauss-Kronrod 7/15 on [-1, 1]: Kronrod abscissae (positive half, descending
// from the endpoint), Kronrod weights, and Gauss weights for the odd entries.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// The 15 Kronrod abscissae on [-1, 1] with Kronrod and Gauss weights
/// (Gauss weight zero for Kronrod-only points).
fn gk15_points() -> [(f64, f64, f64); 15] {
    let mut pts = [(0.0, 0.0, 0.0); 15];
    for k in 0..7 {
        let wg = if k % 2 == 1 { WG[k / 2] } else { 0.0 };
        pts[k] = (-XGK[k], WGK[k], wg);
        pts[14 - k] = (XGK[k], WGK[k], wg);
    }
    pts[7] = (0.0, WGK[7], WG[3]);
    pts
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Evaluate the 15 nodes of a panel in parallel.
    pub parallel: bool,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            rel_tol: 1e-8,
            abs_tol: 0.0,
            max_subdivisions: 500,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorIntegral {
    pub values: Vec<f64>,
    /// Estimated absolute error of the component sum.
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

struct Panel {
    a: f64,
    b: f64,
    values: Vec<f64>,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15_panel<F>(f: &F, a: f64, b: f64, dim: usize, parallel: bool) -> Panel
where
    F: Fn(f64) -> Vec<f64> + Sync,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let pts = gk15_points();
    let evals: Vec<Vec<f64>> = if parallel {
        pts.par_iter().map(|&(x, _, _)| f(center + half * x)).collect()
    } else {
        pts.iter().map(|&(x, _, _)| f(center + half * x)).collect()
    };
    let mut kron = vec![CompensatedSum::new(); dim];
    let mut gauss = vec![CompensatedSum::new(); dim];
    for (&(_, wk, wg), v) in pts.iter().zip(&evals) {
        debug_assert_eq!(v.len(), dim);
        for d in 0..dim {
            kron[d].add(wk * v[d]);
            gauss[d].add(wg * v[d]);
        }
    }
    let values: Vec<f64> = kron.iter().map(|s| s.value() * half).collect();
    let total_k: f64 = values.iter().sum();
    let total_g: f64 = gauss.iter().map(|s| s.value() * half).sum();
    Panel {
        a,
        b,
        values,
        error: (total_k - total_g).abs(),
    }
}

/// Adaptive G7/K15 for a vector-valued integrand on [a, b], starting from
/// `initial_panels` equal pieces. Convergence is judged on the component sum.
pub fn integrate_vector<F>(f: F, a: f64, b: f64, dim: usize, initial_panels: usize, cfg: &AdaptiveConfig) -> VectorIntegral
where
    F: Fn(f64) -> Vec<f64> + Sync,
{
    let pieces = initial_panels.max(1);
    let width = (b - a) / pieces as f64;
    let mut heap = BinaryHeap::new();
    for k in 0..pieces {
        let lo = a + width * k as f64;
        let hi = if k + 1 == pieces { b } else { lo + width };
        heap.push(gk15_panel(&f, lo, hi, dim, cfg.parallel));
    }
    let mut evaluations = 15 * pieces;
    let mut subdivisions = 0;
    let converged = loop {
        let (total, err) = totals(&heap, dim);
        let target = cfg.abs_tol.max(cfg.rel_tol * total.iter().sum::<f64>().abs());
        if err <= target {
            break true;
        }
        if subdivisions >= cfg.max_subdivisions {
            break false;
        }
        let worst = heap.pop().expect("nonempty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break false;
        }
        heap.push(gk15_panel(&f, worst.a, mid, dim, cfg.parallel));
        heap.push(gk15_panel(&f, mid, worst.b, dim, cfg.parallel));
        evaluations += 30;
        subdivisions += 1;
    };
    let (values, error) = totals(&heap, dim);
    VectorIntegral {
        values,
        error,
        evaluations,
        converged,
    }
}

fn totals(heap: &BinaryHeap<Panel>, dim: usize) -> (Vec<f64>, f64) {
    // Sorted by endpoint so the reduction order does not depend on heap layout.
    let mut panels: Vec<&Panel> = heap.iter().collect();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut sums = vec![CompensatedSum::new(); dim];
    let mut err = CompensatedSum::new();
    for p in panels {
        for d in 0..dim {
            sums[d].add(p.values[d]);
        }
        err.add(p.error);
    }
    (sums.iter().map(CompensatedSum::value).collect(), err.value())
}

/// Scalar convenience wrapper over [`integrate_vector`].
pub fn integrate<F>(f: F, a: f64, b: f64, cfg: &AdaptiveConfig) -> (f64, f64)
where
    F: Fn(f64) -> f64 + Sync,
{
    let r = integrate_vector(|x| vec![f(x)], a, b, 1, 1, cfg);
    (r.values[0], r.error)
}

/// Axis-aligned box given by lower and upper corners.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Region {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        Region { lower, upper }
    }

    pub fn cube(half_width: f64, dim: usize) -> Self {
        Region::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }
}

struct Cell {
    region: Region,
    value: f64,
    error: f64,
    split_dim: usize,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15_cell<F: Fn(&[f64]) -> f64>(f: &F, region: Region) -> Cell {
    let (a, b) = (region.lower[0], region.upper[0]);
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kron = CompensatedSum::new();
    let mut gauss = CompensatedSum::new();
    for (x, wk, wg) in gk15_points() {
        let v = f(&[center + half * x]);
        kron.add(wk * v);
        gauss.add(wg * v);
    }
    let value = kron.value() * half;
    Cell {
        region,
        value,
        error: (value - gauss.value() * half).abs(),
        split_dim: 0,
    }
}

/// Degree-7 Genz-Malik rule with its degree-5 embedded companion.
fn genz_malik_cell<F: Fn(&[f64]) -> f64>(f: &F, region: Region) -> Cell {
    let d = region.dim();
    let df = d as f64;
    let center: Vec<f64> = region.lower.iter().zip(&region.upper).map(|(l, u)| 0.5 * (l + u)).collect();
    let half: Vec<f64> = region.lower.iter().zip(&region.upper).map(|(l, u)| 0.5 * (u - l)).collect();
    let lambda2 = (9.0f64 / 70.0).sqrt();
    let lambda4 = (9.0f64 / 10.0).sqrt();
    let lambda5 = (9.0f64 / 19.0).sqrt();
    let w1 = (12824.0 - 9120.0 * df + 400.0 * df * df) / 19683.0;
    let w2 = 980.0 / 6561.0;
    let w3 = (1820.0 - 400.0 * df) / 19683.0;
    let w4 = 200.0 / 19683.0;
    let w5 = 6859.0 / 19683.0 / 2f64.powi(d as i32);
    let e1 = (729.0 - 950.0 * df + 50.0 * df * df) / 729.0;
    let e2 = 245.0 / 486.0;
    let e3 = (265.0 - 100.0 * df) / 1458.0;
    let e4 = 25.0 / 729.0;

    let mut x = center.clone();
    let f0 = f(&x);
    let mut sum2 = 0.0;
    let mut sum3 = 0.0;
    let mut best_dim = 0;
    let mut best_diff = f64::NEG_INFINITY;
    for i in 0..d {
        x[i] = center[i] + lambda2 * half[i];
        let a = f(&x);
        x[i] = center[i] - lambda2 * half[i];
        let b = f(&x);
        x[i] = center[i] + lambda4 * half[i];
        let c = f(&x);
        x[i] = center[i] - lambda4 * half[i];
        let dd = f(&x);
        x[i] = center[i];
        sum2 += a + b;
        sum3 += c + dd;
        let fourth = ((a + b - 2.0 * f0) - (lambda2 * lambda2 / (lambda4 * lambda4)) * (c + dd - 2.0 * f0)).abs();
        // Prefer wider sides on ties so flat integrands still split sensibly.
        let score = fourth + 1e-300 * half[i];
        if score > best_diff {
            best_diff = score;
            best_dim = i;
        }
    }
    let mut sum4 = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                x[i] = center[i] + si * lambda4 * half[i];
                x[j] = center[j] + sj * lambda4 * half[j];
                sum4 += f(&x);
            }
            x[i] = center[i];
            x[j] = center[j];
        }
    }
    let mut sum5 = 0.0;
    for mask in 0..(1usize << d) {
        for i in 0..d {
            let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
            x[i] = center[i] + s * lambda5 * half[i];
        }
        sum5 += f(&x);
    }
    let volume = region.volume();
    let value = volume * (w1 * f0 + w2 * sum2 + w3 * sum3 + w4 * sum4 + w5 * sum5);
    let embedded = volume * (e1 * f0 + e2 * sum2 + e3 * sum3 + e4 * sum4);
    if best_diff <= 1e-300 * half.iter().fold(0.0, |m: f64, h| m.max(*h)) * 2.0 {
        // No curvature signal: split the widest side.
        best_dim = (0..d).max_by(|&a, &b| half[a].total_cmp(&half[b])).unwrap_or(0);
    }
    Cell {
        region,
        value,
        error: (value - embedded).abs(),
        split_dim: best_dim,
    }
}

/// Tensor G7/K15 rule on a rectangle. The error compares the Kronrod
/// tensor with rules that drop to Gauss in one axis; the axis with the
/// larger discrepancy is split.
fn product_gk15_cell<F: Fn(&[f64]) -> f64>(f: &F, region: Region) -> Cell {
    let pts = gk15_points();
    let c0 = 0.5 * (region.lower[0] + region.upper[0]);
    let h0 = 0.5 * (region.upper[0] - region.lower[0]);
    let c1 = 0.5 * (region.lower[1] + region.upper[1]);
    let h1 = 0.5 * (region.upper[1] - region.lower[1]);
    let mut kk = CompensatedSum::new();
    let mut gk = CompensatedSum::new();
    let mut kg = CompensatedSum::new();
    for &(x0, wk0, wg0) in &pts {
        let mut row_k = CompensatedSum::new();
        let mut row_g = CompensatedSum::new();
        for &(x1, wk1, wg1) in &pts {
            let v = f(&[c0 + h0 * x0, c1 + h1 * x1]);
            row_k.add(wk1 * v);
            row_g.add(wg1 * v);
        }
        kk.add(wk0 * row_k.value());
        gk.add(wg0 * row_k.value());
        kg.add(wk0 * row_g.value());
    }
    let area = h0 * h1;
    let value = kk.value() * area;
    let e0 = (value - gk.value() * area).abs();
    let e1 = (value - kg.value() * area).abs();
    Cell {
        region,
        value,
        error: e0 + e1,
        split_dim: if e1 > e0 { 1 } else { 0 },
    }
}

fn make_cell<F: Fn(&[f64]) -> f64>(f: &F, region: Region) -> Cell {
    match region.dim() {
        1 => gk15_cell(f, region),
        2 => product_gk15_cell(f, region),
        _ => genz_malik_cell(f, region),
    }
}

fn evals_per_cell(dim: usize) -> usize {
    match dim {
        1 => 15,
        2 => 225,
        _ => 1 + 4 * dim + 2 * dim * (dim - 1) + (1 << dim),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CubatureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evals: usize,
}

impl Default for CubatureConfig {
    fn default() -> Self {
        CubatureConfig {
            rel_tol: 1e-7,
            abs_tol: 0.0,
            max_evals: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubatureResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Globally adaptive cubature of `f` over a union of disjoint boxes.
pub fn cubature<F>(f: F, regions: &[Region], cfg: &CubatureConfig) -> CubatureResult
where
    F: Fn(&[f64]) -> f64,
{
    if regions.is_empty() {
        return CubatureResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
            converged: true,
        };
    }
    let dim = regions[0].dim();
    let per_cell = evals_per_cell(dim);
    let mut heap: BinaryHeap<Cell> = regions.iter().cloned().map(|r| make_cell(&f, r)).collect();
    let mut evaluations = per_cell * regions.len();
    let mut value: f64 = heap.iter().map(|c| c.value).sum();
    let mut error: f64 = heap.iter().map(|c| c.error).sum();
    let converged = loop {
        if error <= cfg.abs_tol.max(cfg.rel_tol * value.abs()) {
            break true;
        }
        if evaluations + 2 * per_cell > cfg.max_evals {
            break false;
        }
        let worst = heap.pop().expect("nonempty");
        let k = worst.split_dim;
        let mid = 0.5 * (worst.region.lower[k] + worst.region.upper[k]);
        let mut left = worst.region.clone();
        left.upper[k] = mid;
        let mut right = worst.region;
        right.lower[k] = mid;
        let l = make_cell(&f, left);
        let r = make_cell(&f, right);
        value += l.value + r.value - worst.value;
        error += l.error + r.error - worst.error;
        heap.push(l);
        heap.push(r);
        evaluations += 2 * per_cell;
    };
    // Re-sum deterministically to shed drift from the running updates.
    let mut cells: Vec<&Cell> = heap.iter().collect();
    cells.sort_by(|a, b| {
        a.region
            .lower
            .iter()
            .zip(&b.region.lower)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let value = cells.iter().map(|c| c.value).collect::<CompensatedSum>().value();
    let error = cells.iter().map(|c| c.error).collect::<CompensatedSum>().value();
    CubatureResult {
        value,
        error,
        evaluations,
        converged,
    }
}

/// Boxes covering `[-outer, outer]^d` minus `[-inner, inner]^d`.
pub fn shell_regions(inner: f64, outer: f64, dim: usize) -> Vec<Region> {
    assert!(outer > inner && inner >= 0.0);
    if inner == 0.0 {
        return vec![Region::cube(outer, dim)];
    }
    let mut out = Vec::new();
    // Peel one coordinate at a time: coordinate k lies in an outer slab while
    // coordinates before k are restricted to the inner interval.
    for k in 0..dim {
        for (lo, hi) in [(-outer, -inner), (inner, outer)] {
            let mut lower = vec![-outer; dim];
            let mut upper = vec![outer; dim];
            for j in 0..k {
                lower[j] = -inner;
                upper[j] = inner;
            }
            lower[k] = lo;
            upper[k] = hi;
            out.push(Region::new(lower, upper));
        }
    }
    out
}
