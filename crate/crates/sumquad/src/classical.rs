//! Deterministic and randomized summation and integration algorithms, with
//! explicit evaluation accounting.

use std::collections::HashMap;

use rand::Rng;

use crate::problem::{ClassSpec, FunctionHandle, SequenceInput};
use crate::rng::RngStream;
use crate::util::{comp_sum_iter, NeumaierSum};
use crate::{Error, Result};

/// Which computational setting produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    Deterministic,
    Randomized,
    Quantum,
}

/// An algorithm output together with the information it consumed: function
/// evaluations in the classical settings, query applications in the quantum
/// one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub evals_used: u64,
    pub setting: Setting,
}

// ---------------------------------------------------------------------------
// Summation
// ---------------------------------------------------------------------------

/// Optimal deterministic method: `(1/N) Σ_{i=1..n} f(i)` from the first n
/// values. Requires `n < N`; at `n >= N` the exact mean is available via
/// `mean_operator` and the minimal error is zero.
pub fn det_partial_mean(f: &SequenceInput, n: usize) -> Result<Estimate> {
    let n_total = f.len();
    if n == 0 || n >= n_total {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= n < N, got n={n}, N={n_total}"
        )));
    }
    let value = comp_sum_iter((1..=n).map(|i| f.get(i))) / n_total as f64;
    Ok(Estimate { value, evals_used: n as u64, setting: Setting::Deterministic })
}

/// Minimal deterministic worst-case error over the `L_p` ball:
/// `((N-n)/N)^{1-1/p}`; equals 1 for p = 1 and `(N-n)/N` for p = ∞.
pub fn theorem1_error(n_total: usize, n: usize, p: f64) -> Result<f64> {
    if n == 0 || n >= n_total {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= n < N, got n={n}, N={n_total}"
        )));
    }
    let frac = (n_total - n) as f64 / n_total as f64;
    Ok(if p.is_infinite() { frac } else { frac.powf(1.0 - 1.0 / p) })
}

/// Coefficient of the optimal randomized subset estimator:
/// `c = (n + sqrt(n(N-n)/(N-1)))^{-1}`, satisfying
/// `1/(n+sqrt(n)) <= c <= 1/n`.
pub fn mathe_coefficient(n: usize, n_total: usize) -> Result<f64> {
    if n_total < 2 {
        return Err(Error::InvalidArgument("need N >= 2".into()));
    }
    if n == 0 || n >= n_total {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= n < N, got n={n}, N={n_total}"
        )));
    }
    let nf = n as f64;
    let big = n_total as f64;
    let c = 1.0 / (nf + (nf * (big - nf) / (big - 1.0)).sqrt());
    debug_assert!(c >= 1.0 / (nf + nf.sqrt()) - 1e-15 && c <= 1.0 / nf + 1e-15);
    Ok(c)
}

/// Closed-form optimal randomized worst-case error over the `L_2` ball:
/// `1/(1 + sqrt((N-1) n / (N-n)))`.
pub fn eq28_error(n_total: usize, n: usize) -> Result<f64> {
    if n == 0 || n >= n_total {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= n < N, got n={n}, N={n_total}"
        )));
    }
    let nf = n as f64;
    let big = n_total as f64;
    Ok(1.0 / (1.0 + ((big - 1.0) * nf / (big - nf)).sqrt()))
}

/// Uniform random n-subset of `{1..N}` by a sparse partial Fisher–Yates
/// shuffle: O(n) time and space, exactly the uniform law over all
/// `(N choose n)` subsets.
pub fn random_subset(n_total: usize, n: usize, rng: &mut RngStream) -> Vec<usize> {
    debug_assert!(n <= n_total);
    let mut swaps: HashMap<usize, usize> = HashMap::with_capacity(2 * n);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let j = rng.random_range(i..n_total);
        let xj = *swaps.get(&j).unwrap_or(&j);
        let xi = *swaps.get(&i).unwrap_or(&i);
        swaps.insert(j, xi);
        out.push(xj + 1);
    }
    out
}

/// Mathé's optimal randomized summation: draw a uniform n-subset and return
/// `c · Σ_j f(i_j)`.
pub fn mathe_estimate(f: &SequenceInput, n: usize, rng: &mut RngStream) -> Result<Estimate> {
    let c = mathe_coefficient(n, f.len())?;
    let subset = random_subset(f.len(), n, rng);
    let value = c * comp_sum_iter(subset.iter().map(|&i| f.get(i)));
    Ok(Estimate { value, evals_used: n as u64, setting: Setting::Randomized })
}

/// Classical Monte Carlo: average of n values sampled independently,
/// uniformly on `{1..N}`.
pub fn classical_mc_mean(f: &SequenceInput, n: usize, rng: &mut RngStream) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("need n >= 1".into()));
    }
    let n_total = f.len();
    let mut acc = NeumaierSum::new();
    for _ in 0..n {
        let i = rng.random_range(1..=n_total);
        acc.add(f.get(i));
    }
    Ok(Estimate { value: acc.value() / n as f64, evals_used: n as u64, setting: Setting::Randomized })
}

/// Truncated Monte Carlo for `1 < p < 2`: drawn values with magnitude above
/// `n^{1/p}` are replaced by zero before averaging. The threshold test is
/// applied to drawn values only, so the evaluation count stays n.
pub fn truncated_mc_mean(
    f: &SequenceInput,
    n: usize,
    p: f64,
    rng: &mut RngStream,
) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("need n >= 1".into()));
    }
    if !(p > 1.0 && p < 2.0) {
        return Err(Error::InvalidArgument(format!("need 1 < p < 2, got {p}")));
    }
    let threshold = (n as f64).powf(1.0 / p);
    let n_total = f.len();
    let mut acc = NeumaierSum::new();
    for _ in 0..n {
        let i = rng.random_range(1..=n_total);
        let v = f.get(i);
        acc.add(if v.abs() <= threshold { v } else { 0.0 });
    }
    Ok(Estimate { value: acc.value() / n as f64, evals_used: n as u64, setting: Setting::Randomized })
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Gauss–Legendre nodes and weights on `[0, 1]`; exact on polynomials of
/// degree `2·points - 1`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(points: usize) -> Self {
        assert!(points >= 1);
        let n = points;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // Newton iteration from the Chebyshev-angle initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_and_derivative(n, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_and_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // Map [-1, 1] -> [0, 1]; reverse so nodes come out ascending.
            nodes[n - 1 - i] = 0.5 * (x + 1.0);
            weights[n - 1 - i] = 0.5 * w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Cells per axis a budget affords: `m = floor((budget/(k+1)^d)^{1/d})`.
pub fn cells_for_budget(n_budget: u64, k: usize, d: usize) -> Result<usize> {
    let per_cell = (k as u64 + 1).pow(d as u32);
    if n_budget < per_cell {
        return Err(Error::BudgetTooSmall { needed: per_cell, got: n_budget });
    }
    let ratio = (n_budget / per_cell) as f64;
    let mut m = ratio.powf(1.0 / d as f64).floor() as usize;
    // Guard the floating-point floor against off-by-one at exact powers.
    while (m as u64 + 1).pow(d as u32) * per_cell <= n_budget {
        m += 1;
    }
    while m > 1 && (m as u64).pow(d as u32) * per_cell > n_budget {
        m -= 1;
    }
    Ok(m)
}

/// Composite tensor-product Gauss–Legendre quadrature: `m^d` congruent cells
/// with `k+1` nodes per axis in each cell, exact on piecewise polynomials of
/// coordinate degree `2k+1` per cell.
pub fn det_quadrature(fh: &FunctionHandle, spec: &ClassSpec, n_budget: u64) -> Result<Estimate> {
    let (k, d) = match spec {
        ClassSpec::Hoelder { k, d, .. } => (*k, *d),
        ClassSpec::Sobolev { k, d, .. } => (*k, *d),
        ClassSpec::LpBall { .. } => {
            return Err(Error::InvalidArgument("quadrature needs a function class".into()))
        }
    };
    spec.validate()?;
    if fh.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: fh.dim() });
    }
    let m = cells_for_budget(n_budget, k, d)?;
    let rule = GaussLegendre::new(k + 1);
    let per_axis = m * rule.len();
    let mut axis_nodes = Vec::with_capacity(per_axis);
    let mut axis_weights = Vec::with_capacity(per_axis);
    for c in 0..m {
        for (x, w) in rule.nodes().iter().zip(rule.weights()) {
            axis_nodes.push((c as f64 + x) / m as f64);
            axis_weights.push(w / m as f64);
        }
    }
    let total = (per_axis as u64).pow(d as u32);
    let mut acc = NeumaierSum::new();
    let mut x = vec![0.0; d];
    for flat in 0..total {
        let mut rest = flat;
        let mut w = 1.0;
        for axis in (0..d).rev() {
            let idx = (rest % per_axis as u64) as usize;
            rest /= per_axis as u64;
            x[axis] = axis_nodes[idx];
            w *= axis_weights[idx];
        }
        acc.add(w * fh.eval(&x));
    }
    Ok(Estimate { value: acc.value(), evals_used: total, setting: Setting::Deterministic })
}

/// Piecewise tensor-polynomial interpolant of coordinate degree k per axis on
/// `m^d` cells, with Gauss–Legendre nodes inside each cell. Its exact
/// integral is the composite Gauss rule on the same node set.
#[derive(Debug, Clone)]
pub struct TensorInterpolant {
    d: usize,
    k: usize,
    cells_per_axis: usize,
    ref_nodes: Vec<f64>,
    ref_weights: Vec<f64>,
    lagrange_denoms: Vec<f64>,
    values: Vec<f64>,
}

impl TensorInterpolant {
    /// Evaluate `fh` on the full node grid; consumes `m^d (k+1)^d`
    /// evaluations.
    pub fn build(fh: &FunctionHandle, k: usize, d: usize, cells_per_axis: usize) -> Result<Self> {
        if cells_per_axis == 0 {
            return Err(Error::InvalidArgument("cells_per_axis must be >= 1".into()));
        }
        if fh.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: fh.dim() });
        }
        let rule = GaussLegendre::new(k + 1);
        let nodes_per_axis = k + 1;
        let m = cells_per_axis;
        let cells = (m as u64).pow(d as u32) as usize;
        let nodes_per_cell = (nodes_per_axis as u64).pow(d as u32) as usize;
        let mut values = Vec::with_capacity(cells * nodes_per_cell);
        let mut x = vec![0.0; d];
        for cell_flat in 0..cells {
            let mut cell_idx = vec![0usize; d];
            let mut rest = cell_flat;
            for axis in (0..d).rev() {
                cell_idx[axis] = rest % m;
                rest /= m;
            }
            for node_flat in 0..nodes_per_cell {
                let mut rest = node_flat;
                for axis in (0..d).rev() {
                    let ni = rest % nodes_per_axis;
                    rest /= nodes_per_axis;
                    x[axis] = (cell_idx[axis] as f64 + rule.nodes()[ni]) / m as f64;
                }
                values.push(fh.eval(&x));
            }
        }
        let mut denoms = vec![1.0; nodes_per_axis];
        for i in 0..nodes_per_axis {
            for j in 0..nodes_per_axis {
                if i != j {
                    denoms[i] *= rule.nodes()[i] - rule.nodes()[j];
                }
            }
        }
        Ok(Self {
            d,
            k,
            cells_per_axis,
            ref_nodes: rule.nodes().to_vec(),
            ref_weights: rule.weights().to_vec(),
            lagrange_denoms: denoms,
            values,
        })
    }

    pub fn evals_used(&self) -> u64 {
        self.values.len() as u64
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    fn lagrange_basis(&self, t: f64) -> Vec<f64> {
        let n = self.ref_nodes.len();
        let mut basis = vec![1.0; n];
        for (i, b) in basis.iter_mut().enumerate() {
            for j in 0..n {
                if i != j {
                    *b *= t - self.ref_nodes[j];
                }
            }
            *b /= self.lagrange_denoms[i];
        }
        basis
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        let m = self.cells_per_axis;
        let npa = self.k + 1;
        let mut cell_flat = 0usize;
        let mut bases = Vec::with_capacity(self.d);
        for &xi in x {
            let c = ((xi * m as f64).floor() as isize).clamp(0, m as isize - 1) as usize;
            cell_flat = cell_flat * m + c;
            let t = xi * m as f64 - c as f64;
            bases.push(self.lagrange_basis(t));
        }
        let nodes_per_cell = (npa as u64).pow(self.d as u32) as usize;
        let base = cell_flat * nodes_per_cell;
        let mut acc = NeumaierSum::new();
        for node_flat in 0..nodes_per_cell {
            let mut rest = node_flat;
            let mut w = 1.0;
            for axis in (0..self.d).rev() {
                let ni = rest % npa;
                rest /= npa;
                w *= bases[axis][ni];
            }
            acc.add(w * self.values[base + node_flat]);
        }
        acc.value()
    }

    /// Exact integral of the interpolant: composite Gauss–Legendre sum over
    /// its own nodes.
    pub fn integral(&self) -> f64 {
        let npa = self.k + 1;
        let nodes_per_cell = (npa as u64).pow(self.d as u32) as usize;
        let cell_volume = 1.0 / (self.cells_per_axis as f64).powi(self.d as i32);
        let mut acc = NeumaierSum::new();
        for (flat, v) in self.values.iter().enumerate() {
            let node_flat = flat % nodes_per_cell;
            let mut rest = node_flat;
            let mut w = 1.0;
            for _ in 0..self.d {
                let ni = rest % npa;
                rest /= npa;
                w *= self.ref_weights[ni];
            }
            acc.add(w * cell_volume * v);
        }
        acc.value()
    }
}

/// Provable sup-norm bound on `f - Πf` for `f` in the Hölder class
/// `F_d^{k,α}` and the interpolant above with `m` cells per axis.
///
/// k = 0: the single node is the cell center, so
/// `|f(x)-f(c)| <= (√d h/2)^α` with `h = 1/m`.
/// k = 1: per axis `|e| <= h^{1+α}` (second divided difference of a C^{1,α}
/// function), telescoped across axes with the two-point Gauss Lebesgue
/// constant `Λ = √3`: bound `h^{1+α} (Λ^d - 1)/(Λ - 1)`.
pub fn interp_error_bound(k: usize, alpha: f64, d: usize, cells_per_axis: usize) -> Result<f64> {
    let h = 1.0 / cells_per_axis as f64;
    match k {
        0 => Ok(((d as f64).sqrt() * h / 2.0).powf(alpha)),
        1 => {
            let lambda = 3.0_f64.sqrt();
            Ok(h.powf(1.0 + alpha) * (lambda.powi(d as i32) - 1.0) / (lambda - 1.0))
        }
        _ => Err(Error::NotImplemented(format!(
            "interpolation error bound implemented for k <= 1, got k={k}"
        ))),
    }
}

/// Control-variate Monte Carlo integration: an even budget split builds the
/// tensor interpolant from the first half and spends the second half on a
/// plain Monte Carlo estimate of the residual integral. Unbiased conditional
/// on the interpolant.
pub fn mc_control_variate_integrate(
    fh: &FunctionHandle,
    spec: &ClassSpec,
    n_budget: u64,
    rng: &mut RngStream,
) -> Result<Estimate> {
    let (k, d) = match spec {
        ClassSpec::Hoelder { k, d, .. } => (*k, *d),
        ClassSpec::Sobolev { k, d, .. } => (*k, *d),
        ClassSpec::LpBall { .. } => {
            return Err(Error::InvalidArgument("integration needs a function class".into()))
        }
    };
    spec.validate()?;
    let per_cell = (k as u64 + 1).pow(d as u32);
    if n_budget < 2 * per_cell {
        return Err(Error::BudgetTooSmall { needed: 2 * per_cell, got: n_budget });
    }
    let n1 = n_budget / 2;
    let n2 = n_budget - n1;
    let m1 = cells_for_budget(n1, k, d)?;
    let interp = TensorInterpolant::build(fh, k, d, m1)?;
    let mut acc = NeumaierSum::new();
    let mut x = vec![0.0; d];
    for _ in 0..n2 {
        for xi in x.iter_mut() {
            *xi = rng.random::<f64>();
        }
        acc.add(fh.eval(&x) - interp.eval(&x));
    }
    let value = interp.integral() + acc.value() / n2 as f64;
    Ok(Estimate {
        value,
        evals_used: interp.evals_used() + n2,
        setting: Setting::Randomized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{bump_family, mean_operator};
    use approx::assert_abs_diff_eq;
    use std::collections::HashSet;
    use std::sync::Arc;

    #[test]
    fn det_partial_mean_examples() {
        let f = SequenceInput::new(vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(det_partial_mean(&f, 2).unwrap().value, 0.5);
        let f = SequenceInput::new(vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let est = det_partial_mean(&f, 2).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!((mean_operator(&f) - est.value).abs(), 0.5);
        let f = SequenceInput::new(vec![2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(det_partial_mean(&f, 1).unwrap().value, 0.5);
        assert!(det_partial_mean(&f, 4).is_err());
    }

    #[test]
    fn theorem1_error_examples() {
        assert_eq!(theorem1_error(4, 2, f64::INFINITY).unwrap(), 0.5);
        assert_eq!(theorem1_error(10, 3, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(theorem1_error(8, 6, 2.0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(theorem1_error(4, 4, 2.0).is_err());
    }

    #[test]
    fn mathe_coefficient_examples() {
        assert_abs_diff_eq!(mathe_coefficient(1, 2).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(mathe_coefficient(2, 10).unwrap(), 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(mathe_coefficient(4, 5).unwrap(), 0.2, epsilon = 1e-15);
        assert!(mathe_coefficient(1, 1).is_err());
    }

    #[test]
    fn eq28_examples() {
        assert_abs_diff_eq!(eq28_error(2, 1).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(eq28_error(5, 4).unwrap(), 0.2, epsilon = 1e-15);
        let big = eq28_error(1_000_000, 100).unwrap();
        let limit = 1.0 / (1.0 + 10.0);
        assert!((big - limit).abs() / limit < 0.01);
    }

    #[test]
    fn random_subset_uniform_and_distinct() {
        let mut rng = RngStream::new(5);
        // Exact small case: both singletons of {1,2} appear about equally.
        let mut ones = 0;
        for _ in 0..2000 {
            let s = random_subset(2, 1, &mut rng);
            if s[0] == 1 {
                ones += 1;
            }
        }
        assert!((ones as f64 / 2000.0 - 0.5).abs() < 0.05);
        for _ in 0..50 {
            let s = random_subset(30, 12, &mut rng);
            let set: HashSet<usize> = s.iter().copied().collect();
            assert_eq!(set.len(), 12);
            assert!(set.iter().all(|&i| (1..=30).contains(&i)));
        }
    }

    #[test]
    fn mathe_estimate_constant_sequence() {
        let f = SequenceInput::constant(1.0, 10).unwrap();
        let mut rng = RngStream::new(9);
        for _ in 0..10 {
            let est = mathe_estimate(&f, 2, &mut rng).unwrap();
            assert_abs_diff_eq!(est.value, 0.6, epsilon = 1e-14);
            assert_eq!(est.evals_used, 2);
        }
    }

    #[test]
    fn mathe_estimate_two_point() {
        let f = SequenceInput::new(vec![1.0, 0.0]).unwrap();
        let mut rng = RngStream::new(3);
        let mut seen = HashSet::new();
        for _ in 0..200 {
            let est = mathe_estimate(&f, 1, &mut rng).unwrap();
            assert!(est.value == 0.0 || est.value == 0.5);
            seen.insert((est.value * 10.0) as i64);
        }
        assert_eq!(seen.len(), 2);
    }

    #[test]
    fn classical_mc_constant_and_reproducible() {
        let f = SequenceInput::constant(2.5, 7).unwrap();
        let mut rng = RngStream::new(1);
        assert_abs_diff_eq!(classical_mc_mean(&f, 13, &mut rng).unwrap().value, 2.5, epsilon = 1e-14);

        let f = SequenceInput::new(vec![1.0, 0.0]).unwrap();
        let a = classical_mc_mean(&f, 100, &mut RngStream::new(77)).unwrap();
        let b = classical_mc_mean(&f, 100, &mut RngStream::new(77)).unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn classical_mc_rms_scales_like_binomial() {
        let f = SequenceInput::new(vec![1.0, 0.0]).unwrap();
        let n = 1000;
        let trials = 200;
        let mut acc = NeumaierSum::new();
        for t in 0..trials {
            let mut rng = RngStream::new(1234).derive(&[t]);
            let err = classical_mc_mean(&f, n, &mut rng).unwrap().value - 0.5;
            acc.add(err * err);
        }
        let rms = (acc.value() / trials as f64).sqrt();
        let expect = 0.5 / (n as f64).sqrt();
        assert!((rms - expect).abs() / expect < 0.2, "rms {rms} vs {expect}");
    }

    #[test]
    fn truncated_mc_behaviour() {
        // Truncation inactive when all values are small.
        let f = SequenceInput::new(vec![0.4, -0.7, 0.1, 0.9]).unwrap();
        let a = truncated_mc_mean(&f, 50, 1.5, &mut RngStream::new(4)).unwrap();
        let b = classical_mc_mean(&f, 50, &mut RngStream::new(4)).unwrap();
        assert_eq!(a.value, b.value);

        // A spike above the threshold contributes nothing.
        let n_total = 1000;
        let p = 1.5;
        let mut values = vec![0.0; n_total];
        values[0] = (n_total as f64).powf(1.0 / p) * 0.999;
        let f = SequenceInput::new(values).unwrap();
        let n = 8; // 8^{2/3} = 4 < spike
        let est = truncated_mc_mean(&f, n, p, &mut RngStream::new(5)).unwrap();
        assert_eq!(est.value, 0.0);

        // Output magnitude never exceeds the threshold.
        let f = SequenceInput::new(vec![100.0, -3.0, 2.0, 1.0]).unwrap();
        for seed in 0..20 {
            let est = truncated_mc_mean(&f, 4, 1.5, &mut RngStream::new(seed)).unwrap();
            assert!(est.value.abs() <= 4.0_f64.powf(1.0 / 1.5) + 1e-12);
        }
        assert!(truncated_mc_mean(&f, 4, 2.0, &mut RngStream::new(0)).is_err());
    }

    #[test]
    fn gauss_legendre_exactness() {
        for points in 1..=5 {
            let rule = GaussLegendre::new(points);
            let wsum: f64 = rule.weights().iter().sum();
            assert_abs_diff_eq!(wsum, 1.0, epsilon = 1e-14);
            // Exact on monomials up to degree 2*points - 1 over [0,1].
            for deg in 0..(2 * points) {
                let approx: f64 = rule
                    .nodes()
                    .iter()
                    .zip(rule.weights())
                    .map(|(x, w)| w * x.powi(deg as i32))
                    .sum();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert_abs_diff_eq!(approx, exact, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn det_quadrature_constant_and_polynomial() {
        let spec = ClassSpec::Hoelder { k: 1, alpha: 1.0, d: 1 };
        let fh = FunctionHandle::new(1, Arc::new(|_: &[f64]| 1.0));
        let est = det_quadrature(&fh, &spec, 10).unwrap();
        assert_abs_diff_eq!(est.value, 1.0, epsilon = 1e-13);
        assert!(est.evals_used <= 10);

        let fh = FunctionHandle::new(1, Arc::new(|x: &[f64]| x[0]));
        let est = det_quadrature(&fh, &spec, 2).unwrap();
        assert_abs_diff_eq!(est.value, 0.5, epsilon = 1e-14);

        // Tensor polynomial of coordinate degree 2k+1, d = 2: exact.
        let spec = ClassSpec::Hoelder { k: 1, alpha: 1.0, d: 2 };
        let fh = FunctionHandle::new(
            2,
            Arc::new(|x: &[f64]| x[0].powi(3) * (2.0 * x[1].powi(3) - x[1] + 0.5)),
        );
        let est = det_quadrature(&fh, &spec, 64).unwrap();
        let exact = 0.25 * (2.0 * 0.25 - 0.5 + 0.5);
        assert_abs_diff_eq!(est.value, exact, epsilon = 1e-12);
        assert!(det_quadrature(&fh, &spec, 3).is_err());
    }

    #[test]
    fn interpolant_reproduces_low_degree() {
        let fh = FunctionHandle::new(2, Arc::new(|x: &[f64]| 1.5 * x[0] - 0.5 * x[1] + 0.25));
        let interp = TensorInterpolant::build(&fh, 1, 2, 3).unwrap();
        for x in crate::problem::grid_points(2, 7) {
            assert_abs_diff_eq!(interp.eval(&x), 1.5 * x[0] - 0.5 * x[1] + 0.25, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(interp.integral(), 1.5 * 0.5 - 0.5 * 0.5 + 0.25, epsilon = 1e-13);
    }

    #[test]
    fn interp_error_bound_holds_on_bumps() {
        for (k, alpha, d, m1) in [(0usize, 1.0, 2usize, 5usize), (1, 1.0, 2, 4), (0, 0.5, 1, 7)] {
            let spec = ClassSpec::Hoelder { k, alpha, d };
            let fam = bump_family(&spec, m1 + 1, 3, 21).unwrap();
            let bound = interp_error_bound(k, alpha, d, m1).unwrap();
            for member in fam.members {
                let member = Arc::new(member);
                let fh = FunctionHandle::from_bump(member.clone());
                let interp = TensorInterpolant::build(&fh, k, d, m1).unwrap();
                for x in crate::problem::grid_points(d, if d == 1 { 101 } else { 17 }) {
                    let r = (member.eval(&x) - interp.eval(&x)).abs();
                    assert!(r <= bound, "residual {r} exceeds bound {bound}");
                }
            }
        }
    }

    #[test]
    fn control_variate_exact_on_interpolable() {
        let spec = ClassSpec::Hoelder { k: 1, alpha: 1.0, d: 2 };
        let fh = FunctionHandle::new(2, Arc::new(|x: &[f64]| x[0] * x[1] + 0.3));
        let est = mc_control_variate_integrate(&fh, &spec, 64, &mut RngStream::new(2)).unwrap();
        assert_abs_diff_eq!(est.value, 0.25 + 0.3, epsilon = 1e-12);
        assert!(est.evals_used <= 64);
    }

    #[test]
    fn mathe_sandwich_random_pairs() {
        let mut rng = RngStream::new(8);
        for _ in 0..1000 {
            let n_total = rng.random_range(2..=1_000_000usize);
            let n = rng.random_range(1..n_total);
            let c = mathe_coefficient(n, n_total).unwrap();
            let nf = n as f64;
            assert!(c >= 1.0 / (nf + nf.sqrt()) - 1e-12);
            assert!(c <= 1.0 / nf + 1e-12);
        }
    }
}
