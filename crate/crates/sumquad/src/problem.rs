//! Problem setup: solution operators, function classes, and fooling families.
//!
//! The two target quantities are the mean of a finite sequence and the
//! integral of a function over `[0,1]^d`. Inputs are drawn from unit balls:
//! `L_p` balls of sequences under the normalized p-norm, Hölder classes
//! `F_d^{k,α}`, and Sobolev classes `W_{p,d}^k`. Fooling families are finite
//! subsets of these balls used as empirical surrogates for worst-case
//! suprema.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;

use crate::rng::RngStream;
use crate::util::{comp_sum_iter, gamma_half, NeumaierSum};
use crate::{Error, Result};

/// A finite real sequence `f(1..N)`, the input to the mean operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceInput {
    values: Vec<f64>,
}

impl SequenceInput {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("sequence must have N >= 1".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value {v}")));
        }
        Ok(Self { values })
    }

    pub fn constant(value: f64, n: usize) -> Result<Self> {
        Self::new(vec![value; n])
    }

    /// Number of entries N.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // N >= 1 by construction
    }

    /// 1-based access, matching the index convention of the mean operator.
    pub fn get(&self, i: usize) -> f64 {
        self.values[i - 1]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Descriptor of a function class and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassSpec {
    /// Unit ball of sequences under the normalized p-norm, `p ∈ [1, ∞]`.
    LpBall { p: f64 },
    /// Hölder class: `C^k` functions on `[0,1]^d` with sup norm at most 1 and
    /// order-k derivatives `α`-Hölder with constant 1.
    Hoelder { k: usize, alpha: f64, d: usize },
    /// Sobolev class: weak derivatives to order k bounded in `L_p`; requires
    /// the embedding condition `k·p > d` so point evaluation is well-defined.
    Sobolev { k: usize, p: f64, d: usize },
}

impl ClassSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ClassSpec::LpBall { p } => {
                if !(p >= 1.0) {
                    return Err(Error::InvalidArgument(format!("p = {p} must be in [1, inf]")));
                }
            }
            ClassSpec::Hoelder { alpha, d, .. } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "alpha = {alpha} must be in (0, 1]"
                    )));
                }
                if d == 0 {
                    return Err(Error::InvalidArgument("dimension d must be >= 1".into()));
                }
            }
            ClassSpec::Sobolev { k, p, d } => {
                if !(p >= 1.0) {
                    return Err(Error::InvalidArgument(format!("p = {p} must be in [1, inf]")));
                }
                if d == 0 {
                    return Err(Error::InvalidArgument("dimension d must be >= 1".into()));
                }
                if !embedding_ok(k, p, d) {
                    return Err(Error::InvalidArgument(format!(
                        "embedding condition k*p > d fails for k={k}, p={p}, d={d}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn smoothness(&self) -> usize {
        match *self {
            ClassSpec::LpBall { .. } => 0,
            ClassSpec::Hoelder { k, .. } | ClassSpec::Sobolev { k, .. } => k,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            ClassSpec::LpBall { .. } => 1,
            ClassSpec::Hoelder { d, .. } | ClassSpec::Sobolev { d, .. } => d,
        }
    }
}

/// Mean operator: `(1/N) Σ_{i=1..N} f(i)`, with compensated summation.
pub fn mean_operator(f: &SequenceInput) -> f64 {
    comp_sum_iter(f.values().iter().copied()) / f.len() as f64
}

/// Normalized sequence p-norm: `((1/N) Σ |f(i)|^p)^{1/p}`, or `max |f(i)|`
/// for `p = ∞`.
pub fn lp_seq_norm(f: &SequenceInput, p: f64) -> f64 {
    assert!(p >= 1.0, "p must be in [1, inf]");
    if p.is_infinite() {
        return f.values().iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let n = f.len() as f64;
    let sum = comp_sum_iter(f.values().iter().map(|v| v.abs().powf(p)));
    (sum / n).powf(1.0 / p)
}

/// Sobolev embedding condition `k·p > d`; for `p = ∞` this reads `k >= 1`.
pub fn embedding_ok(k: usize, p: f64, d: usize) -> bool {
    if p.is_infinite() {
        k >= 1
    } else {
        (k as f64) * p > d as f64
    }
}

/// The worst-case sequence for partial-prefix sampling: unit p-norm mass
/// spread evenly over the unsampled indices, zero elsewhere.
///
/// `f(i) = (N/|U|)^{1/p}` on the unsampled set `U` (1 for `p = ∞`), so that
/// `lp_seq_norm(f, p) = 1` and the mean equals `(|U|/N)^{1-1/p}`.
pub fn extreme_sequence(n_total: usize, p: f64, unsampled: &[usize]) -> Result<SequenceInput> {
    if unsampled.is_empty() {
        return Err(Error::InvalidArgument("unsampled set must be nonempty".into()));
    }
    if unsampled.iter().any(|&i| i == 0 || i > n_total) {
        return Err(Error::InvalidArgument(format!(
            "unsampled indices must lie in 1..={n_total}"
        )));
    }
    let height = if p.is_infinite() {
        1.0
    } else {
        (n_total as f64 / unsampled.len() as f64).powf(1.0 / p)
    };
    let mut values = vec![0.0; n_total];
    for &i in unsampled {
        values[i - 1] = height;
    }
    SequenceInput::new(values)
}

/// A point-evaluation wrapper that tallies how many evaluations an algorithm
/// consumed. The classical cost measure is exactly this count.
///
/// A handle is confined to one worker at a time; independent workers run on
/// distinct handles. The counter is atomic so loads elsewhere stay safe.
pub struct FunctionHandle {
    eval_fn: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    d: usize,
    evals: AtomicU64,
}

impl FunctionHandle {
    pub fn new(d: usize, eval_fn: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>) -> Self {
        Self { eval_fn, d, evals: AtomicU64::new(0) }
    }

    pub fn from_bump(bump: Arc<BumpGrid>) -> Self {
        let d = bump.dim();
        Self::new(d, Arc::new(move |x| bump.eval(x)))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Evaluate and count. Each call increments the tally by exactly one.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        self.evals.fetch_add(1, Ordering::Relaxed);
        (self.eval_fn)(x)
    }

    /// Evaluate without counting. Reserved for building quantum query value
    /// tables: values read through a quantum query are charged per query
    /// application by the simulator, not per classical point.
    pub fn eval_uncounted(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        (self.eval_fn)(x)
    }

    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }
}

impl std::fmt::Debug for FunctionHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FunctionHandle")
            .field("d", &self.d)
            .field("evals", &self.eval_count())
            .finish()
    }
}

/// A finite set of unit-ball members standing in for the supremum in
/// worst-case error definitions.
#[derive(Debug, Clone)]
pub struct FoolingFamily<M> {
    pub members: Vec<M>,
    pub class: ClassSpec,
    pub description: String,
}

impl<M> FoolingFamily<M> {
    pub fn new(members: Vec<M>, class: ClassSpec, description: impl Into<String>) -> Self {
        Self { members, class, description: description.into() }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Check every sequence member against the unit ball of the family's class.
pub fn verify_sequence_family(family: &FoolingFamily<SequenceInput>, tol: f64) -> Result<()> {
    let p = match family.class {
        ClassSpec::LpBall { p } => p,
        _ => return Err(Error::InvalidArgument("sequence family must have an LpBall class".into())),
    };
    for (idx, member) in family.members.iter().enumerate() {
        let norm = lp_seq_norm(member, p);
        if norm > 1.0 + tol {
            return Err(Error::ClassMembership(format!(
                "member {idx} of '{}' has norm {norm} > 1",
                family.description
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Bump constructions
// ---------------------------------------------------------------------------

/// Involution numbers: partitions of a j-set into blocks of size 1 or 2.
/// `I(0)=1, I(1)=1, I(j) = I(j-1) + (j-1) I(j-2)`.
fn involution_number(j: usize) -> f64 {
    let (mut a, mut b) = (1.0_f64, 1.0_f64); // I(0), I(1)
    if j == 0 {
        return a;
    }
    for i in 2..=j {
        let next = b + (i as f64 - 1.0) * a;
        a = b;
        b = next;
    }
    b
}

/// Upper bound on `max_{|i|=j} sup |D^i (1-|u|^2)^q|` over the unit ball.
///
/// Every Faà di Bruno term for g(s), s = |u|^2, pairs a partition of the j
/// differentiations into blocks of size <= 2 (third derivatives of s vanish)
/// with |g^(t)| <= q^t and per-block factors |∂s| <= 2, giving
/// `I(j) · 2^j · q^j`.
fn unit_bump_derivative_bound(q: usize, j: usize) -> f64 {
    involution_number(j) * 2.0_f64.powi(j as i32) * (q as f64).powi(j as i32)
}

/// Integral of `(1-|u|^2)^q` over the unit ball of `R^d`:
/// `π^{d/2} Γ(q+1) / Γ(d/2 + q + 1)`.
pub fn unit_ball_bump_integral(q: usize, d: usize) -> f64 {
    std::f64::consts::PI.powf(d as f64 / 2.0) * gamma_half(2 * q + 2) / gamma_half(d + 2 * q + 2)
}

/// Amplitude making a family of disjointly supported radius-`r` bumps a
/// member of the Hölder class `F_d^{k,α}`.
///
/// Per bump, the order-k Hölder quotient is at most
/// `A r^{-(k+α)} (√d M_{k+1})^α (2 M_k)^{1-α}` with `M_j` the derivative
/// bounds above; pairs straddling two bumps at most double it. The sup-norm
/// constraint adds `A <= 1`.
fn hoelder_amplitude(k: usize, alpha: f64, d: usize, radius: f64) -> f64 {
    let q = k + 2;
    let mk = unit_bump_derivative_bound(q, k);
    let mk1 = unit_bump_derivative_bound(q, k + 1);
    let c = ((d as f64).sqrt() * mk1).powf(alpha) * (2.0 * mk).powf(1.0 - alpha);
    (radius.powf(k as f64 + alpha) / (2.0 * c)).min(1.0)
}

/// Amplitude keeping all derivatives to order k of a radius-`r` bump family
/// bounded by 1 in sup norm, for membership in `W_{∞,d}^k`.
fn sobolev_inf_amplitude(k: usize, radius: f64) -> f64 {
    let q = k + 2;
    (0..=k)
        .map(|j| radius.powi(j as i32) / unit_bump_derivative_bound(q, j))
        .fold(f64::INFINITY, f64::min)
        .min(1.0)
}

/// How the bump amplitude was scaled, fixing the class the member lies in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BumpScaling {
    Hoelder,
    SobolevInf,
}

/// A signed grid of `C^{k+1}` polynomial bumps on `[0,1]^d`.
///
/// The unit cube is split into `m^d` congruent cells; each carries one bump
/// `±A (1 - |x-c|^2/r^2)^{k+2}` of radius `r = 1/(2m)` centered at the cell
/// center. Supports are disjoint, so the analytic integral is the signed sum
/// of per-bump integrals.
#[derive(Debug, Clone)]
pub struct BumpGrid {
    k: usize,
    alpha: f64,
    d: usize,
    cells_per_axis: usize,
    signs: Vec<f64>,
    amplitude: f64,
    scaling: BumpScaling,
}

impl BumpGrid {
    pub fn new_hoelder(
        k: usize,
        alpha: f64,
        d: usize,
        cells_per_axis: usize,
        signs: Vec<f64>,
    ) -> Result<Self> {
        if cells_per_axis == 0 {
            return Err(Error::InvalidArgument("cells_per_axis must be >= 1".into()));
        }
        if signs.len() != cells_per_axis.pow(d as u32) {
            return Err(Error::InvalidArgument("signs must cover all cells".into()));
        }
        let radius = 0.5 / cells_per_axis as f64;
        Ok(Self {
            k,
            alpha,
            d,
            cells_per_axis,
            signs,
            amplitude: hoelder_amplitude(k, alpha, d, radius),
            scaling: BumpScaling::Hoelder,
        })
    }

    pub fn new_sobolev_inf(
        k: usize,
        d: usize,
        cells_per_axis: usize,
        signs: Vec<f64>,
    ) -> Result<Self> {
        if cells_per_axis == 0 {
            return Err(Error::InvalidArgument("cells_per_axis must be >= 1".into()));
        }
        if signs.len() != cells_per_axis.pow(d as u32) {
            return Err(Error::InvalidArgument("signs must cover all cells".into()));
        }
        let radius = 0.5 / cells_per_axis as f64;
        Ok(Self {
            k,
            alpha: 1.0,
            d,
            cells_per_axis,
            signs,
            amplitude: sobolev_inf_amplitude(k, radius),
            scaling: BumpScaling::SobolevInf,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn scaling(&self) -> BumpScaling {
        self.scaling
    }

    pub fn bump_radius(&self) -> f64 {
        0.5 / self.cells_per_axis as f64
    }

    fn cell_of(&self, x: &[f64]) -> (usize, Vec<f64>) {
        let m = self.cells_per_axis;
        let mut flat = 0usize;
        let mut center = Vec::with_capacity(self.d);
        for &xi in x {
            let c = ((xi * m as f64).floor() as isize).clamp(0, m as isize - 1) as usize;
            flat = flat * m + c;
            center.push((c as f64 + 0.5) / m as f64);
        }
        (flat, center)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        let (flat, center) = self.cell_of(x);
        let inv_r = 2.0 * self.cells_per_axis as f64;
        let s: f64 = x
            .iter()
            .zip(&center)
            .map(|(xi, ci)| {
                let u = (xi - ci) * inv_r;
                u * u
            })
            .sum();
        if s >= 1.0 {
            return 0.0;
        }
        let q = (self.k + 2) as i32;
        self.signs[flat] * self.amplitude * (1.0 - s).powi(q)
    }

    /// Gradient, used by membership checks for k = 1 classes.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let (flat, center) = self.cell_of(x);
        let inv_r = 2.0 * self.cells_per_axis as f64;
        let u: Vec<f64> = x.iter().zip(&center).map(|(xi, ci)| (xi - ci) * inv_r).collect();
        let s: f64 = u.iter().map(|v| v * v).sum();
        if s >= 1.0 {
            return vec![0.0; self.d];
        }
        let q = (self.k + 2) as f64;
        let base = self.signs[flat] * self.amplitude * q * (1.0 - s).powi(self.k as i32 + 1);
        u.iter().map(|&ul| base * (-2.0 * ul) * inv_r).collect()
    }

    /// Exact integral over `[0,1]^d`: signed sum of per-bump closed forms.
    pub fn integral(&self) -> f64 {
        let r = self.bump_radius();
        let per_bump = self.amplitude * r.powi(self.d as i32)
            * unit_ball_bump_integral(self.k + 2, self.d);
        per_bump * comp_sum_iter(self.signs.iter().copied())
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }
}

/// Build a Hölder fooling family: the all-positive member plus pseudorandom
/// sign patterns, at `m_per_axis` bumps per axis.
pub fn bump_family(
    spec: &ClassSpec,
    m_per_axis: usize,
    members: usize,
    seed: u64,
) -> Result<FoolingFamily<BumpGrid>> {
    let (k, alpha, d) = match *spec {
        ClassSpec::Hoelder { k, alpha, d } => (k, alpha, d),
        _ => return Err(Error::InvalidArgument("bump_family requires a Hoelder class".into())),
    };
    spec.validate()?;
    if m_per_axis == 0 || members == 0 {
        return Err(Error::InvalidArgument("m_per_axis and members must be >= 1".into()));
    }
    let cells = m_per_axis.pow(d as u32);
    let mut out = Vec::with_capacity(members);
    out.push(BumpGrid::new_hoelder(k, alpha, d, m_per_axis, vec![1.0; cells])?);
    let base = RngStream::new(seed);
    for mi in 1..members {
        let mut rng = base.derive(&[m_per_axis as u64, mi as u64]);
        let signs: Vec<f64> =
            (0..cells).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        out.push(BumpGrid::new_hoelder(k, alpha, d, m_per_axis, signs)?);
    }
    Ok(FoolingFamily::new(
        out,
        spec.clone(),
        format!("hoelder bump family k={k} alpha={alpha} d={d} m={m_per_axis}"),
    ))
}

/// Numerically verify the Hölder membership of a bump member on a uniform
/// grid of `grid_per_axis^d` points: returns the largest observed quotient
/// `|D^i f(x) - D^i f(y)| / |x-y|^α` over `|i| = k` (k <= 1 supported), after
/// checking the sup-norm constraint.
pub fn hoelder_quotient_on_grid(f: &BumpGrid, grid_per_axis: usize) -> Result<f64> {
    if f.k > 1 {
        return Err(Error::NotImplemented(
            "grid membership check implemented for k <= 1 only".into(),
        ));
    }
    let pts = grid_points(f.d, grid_per_axis);
    let mut sup = 0.0_f64;
    for x in &pts {
        sup = sup.max(f.eval(x).abs());
    }
    if sup > 1.0 + 1e-9 {
        return Err(Error::ClassMembership(format!("sup norm {sup} > 1")));
    }
    let fields: Vec<Vec<f64>> = if f.k == 0 {
        pts.iter().map(|x| vec![f.eval(x)]).collect()
    } else {
        pts.iter().map(|x| f.gradient(x)).collect()
    };
    let mut quotient = 0.0_f64;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let dist: f64 = pts[i]
                .iter()
                .zip(&pts[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist == 0.0 {
                continue;
            }
            let denom = dist.powf(f.alpha);
            for c in 0..fields[i].len() {
                let num = (fields[i][c] - fields[j][c]).abs();
                quotient = quotient.max(num / denom);
            }
        }
    }
    Ok(quotient)
}

/// All points of the uniform `grid_per_axis^d` lattice including endpoints.
pub fn grid_points(d: usize, grid_per_axis: usize) -> Vec<Vec<f64>> {
    let n = grid_per_axis;
    let total = n.pow(d as u32);
    let mut out = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rest = flat;
        let mut x = vec![0.0; d];
        for axis in (0..d).rev() {
            let idx = rest % n;
            rest /= n;
            x[axis] = if n == 1 { 0.5 } else { idx as f64 / (n - 1) as f64 };
        }
        out.push(x);
    }
    out
}

/// Midpoints of the uniform `m^d` cell grid, row-major over axes.
pub fn midpoint_grid(d: usize, m: usize) -> Vec<Vec<f64>> {
    let total = m.pow(d as u32);
    let mut out = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rest = flat;
        let mut x = vec![0.0; d];
        for axis in (0..d).rev() {
            let idx = rest % m;
            rest /= m;
            x[axis] = (idx as f64 + 0.5) / m as f64;
        }
        out.push(x);
    }
    out
}

/// Reference integral of a pointwise function by tensor Gauss–Legendre with
/// enough nodes to resolve it, refined until two successive levels agree.
/// Test-side oracle for the analytic bump integrals.
pub fn reference_integral(f: &dyn Fn(&[f64]) -> f64, d: usize, tol: f64) -> f64 {
    let nodes = 12usize;
    let mut prev = f64::NAN;
    let mut cells = 4usize;
    loop {
        let value = composite_gauss(f, d, cells, nodes);
        if (value - prev).abs() <= tol * (1.0 + value.abs()) || cells > 512 {
            return value;
        }
        prev = value;
        cells *= 2;
    }
}

fn composite_gauss(f: &dyn Fn(&[f64]) -> f64, d: usize, cells: usize, nodes: usize) -> f64 {
    let rule = crate::classical::GaussLegendre::new(nodes);
    let per_axis = cells * nodes;
    let mut axis_nodes = Vec::with_capacity(per_axis);
    let mut axis_weights = Vec::with_capacity(per_axis);
    for c in 0..cells {
        for (x, w) in rule.nodes().iter().zip(rule.weights()) {
            axis_nodes.push((c as f64 + x) / cells as f64);
            axis_weights.push(w / cells as f64);
        }
    }
    let total = per_axis.pow(d as u32);
    let mut acc = NeumaierSum::new();
    let mut x = vec![0.0; d];
    for flat in 0..total {
        let mut rest = flat;
        let mut w = 1.0;
        for axis in (0..d).rev() {
            let idx = rest % per_axis;
            rest /= per_axis;
            x[axis] = axis_nodes[idx];
            w *= axis_weights[idx];
        }
        acc.add(w * f(&x));
    }
    acc.value()
}
