//! Executable semantics of the quantum query model: states, queries,
//! algorithm tuples, measurement, and exact output distributions.
//!
//! A quantum algorithm with n queries is the tuple `(m, w, Q, (U_i), φ)`: it
//! prepares the basis state w on m qubits, alternates the fixed unitaries
//! `U_i` with applications of the query unitary `Q_f`, measures the final
//! state, and maps the observed basis index through φ. The input f enters
//! only through `Q_f`; everything else is fixed ahead of time.
//!
//! Dense state-vector simulation is exact; a configurable qubit cap (default
//! 22) bounds what may be materialized.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::rng::RngStream;
use crate::util::{median, NeumaierSum};
use crate::{Error, Result};

/// Default ceiling on dense simulation width.
pub const DEFAULT_QUBIT_CAP: usize = 22;

/// Normalized complex amplitude vector over `2^m` basis states. Wire 0 is
/// the most significant bit of the basis index.
#[derive(Debug, Clone)]
pub struct QState {
    m: usize,
    amps: Vec<Complex64>,
    queries_applied: u64,
}

impl QState {
    /// The basis state `|w⟩`.
    pub fn basis(m: usize, w: usize) -> Result<Self> {
        if m >= usize::BITS as usize {
            return Err(Error::InvalidArgument(format!("too many qubits: {m}")));
        }
        let dim = 1usize << m;
        if w >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {w} out of range for {m} qubits"
            )));
        }
        let mut amps = vec![Complex64::ZERO; dim];
        amps[w] = Complex64::ONE;
        Ok(Self { m, amps, queries_applied: 0 })
    }

    pub fn qubits(&self) -> usize {
        self.m
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn queries_applied(&self) -> u64 {
        self.queries_applied
    }

    pub fn norm_sqr(&self) -> f64 {
        let mut acc = NeumaierSum::new();
        for a in &self.amps {
            acc.add(a.norm_sqr());
        }
        acc.value()
    }

    /// Enforce the state invariant `Σ|α|² = 1` within `tol`.
    pub fn check_norm(&self, tol: f64) -> Result<()> {
        let dev = (self.norm_sqr() - 1.0).abs();
        if dev > tol {
            return Err(Error::InvalidArgument(format!("state norm drifted by {dev:.3e}")));
        }
        Ok(())
    }

    /// Measure in the computational basis: basis index ℓ with probability
    /// `|α_ℓ|²`, via inverse-CDF sampling over a compensated prefix sum.
    /// Tiny negative rounding artifacts are clamped at zero.
    pub fn measure(&self, rng: &mut RngStream) -> usize {
        let u: f64 = rng.random::<f64>() * self.norm_sqr();
        let mut acc = NeumaierSum::new();
        for (idx, a) in self.amps.iter().enumerate() {
            acc.add(a.norm_sqr().max(0.0));
            if acc.value() > u {
                return idx;
            }
        }
        self.amps.len() - 1
    }
}

/// Decode the value of a register from a basis index; `wires[0]` is the most
/// significant bit.
pub fn register_value(l: usize, wires: &[usize], m: usize) -> usize {
    wires.iter().fold(0usize, |acc, &w| (acc << 1) | ((l >> (m - 1 - w)) & 1))
}

/// A quantum query `Q = (m', m'', Z, τ, β)` over an integer-indexed domain.
///
/// τ assigns to each bit string `i ∈ Z ⊆ {0..2^{m'}-1}` the domain index at
/// which f is read; β converts the real value into a word of the `m''`-bit
/// value register. `Q_f` adds `β(f(τ(i)))` into that register modulo
/// `2^{m''}` and acts as the identity for `i ∉ Z`.
pub struct Query {
    m_prime: usize,
    m_dprime: usize,
    z: Vec<usize>,
    tau: Vec<usize>,
    beta: Arc<dyn Fn(f64) -> u64 + Send + Sync>,
}

impl Query {
    pub fn new(
        m_prime: usize,
        m_dprime: usize,
        z: Vec<usize>,
        tau: Vec<usize>,
        beta: Arc<dyn Fn(f64) -> u64 + Send + Sync>,
    ) -> Result<Self> {
        if m_prime == 0 || m_dprime == 0 {
            return Err(Error::InvalidArgument("m' and m'' must be >= 1".into()));
        }
        if z.is_empty() {
            return Err(Error::InvalidArgument("Z must be nonempty".into()));
        }
        if z.len() != tau.len() {
            return Err(Error::InvalidArgument("tau must be defined exactly on Z".into()));
        }
        let mut sorted = z.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != z.len() {
            return Err(Error::InvalidArgument("Z must not contain duplicates".into()));
        }
        if *sorted.last().unwrap() >= (1usize << m_prime) {
            return Err(Error::InvalidArgument("Z must be a subset of {0..2^m'-1}".into()));
        }
        Ok(Self { m_prime, m_dprime, z, tau, beta })
    }

    pub fn m_prime(&self) -> usize {
        self.m_prime
    }

    pub fn m_dprime(&self) -> usize {
        self.m_dprime
    }

    /// Qubits the query touches; any algorithm using it needs at least this
    /// many.
    pub fn width(&self) -> usize {
        self.m_prime + self.m_dprime
    }

    pub fn z(&self) -> &[usize] {
        &self.z
    }

    /// Resolve `β(f(τ(i)))` for every `i ∈ Z`, validating the register range.
    pub fn resolve(&self, f: &dyn Fn(usize) -> f64) -> Result<QueryTable> {
        let limit = 1u64 << self.m_dprime;
        let mut shifts = Vec::with_capacity(self.z.len());
        for (&i, &dom) in self.z.iter().zip(&self.tau) {
            let b = (self.beta)(f(dom));
            if b >= limit {
                return Err(Error::InvalidBeta { value: b, width: self.m_dprime });
            }
            shifts.push((i, b));
        }
        Ok(QueryTable { shifts })
    }
}

impl std::fmt::Debug for Query {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Query")
            .field("m_prime", &self.m_prime)
            .field("m_dprime", &self.m_dprime)
            .field("z_len", &self.z.len())
            .finish()
    }
}

/// The f-dependent data of one query: the additive shift per `i ∈ Z`.
#[derive(Debug, Clone)]
pub struct QueryTable {
    shifts: Vec<(usize, u64)>,
}

/// Apply `Q_f` to the state: for each basis index decomposed as `(i, x, y)`
/// the amplitude moves to `(i, x ⊕ β(f(τ(i))), y)` when `i ∈ Z` (⊕ is
/// addition modulo `2^{m''}`), and stays put otherwise. A permutation of the
/// basis, hence unitary.
pub fn apply_query(state: &mut QState, q: &Query, f: &dyn Fn(usize) -> f64) -> Result<()> {
    let table = q.resolve(f)?;
    apply_query_table(state, q, &table);
    Ok(())
}

/// Apply a pre-resolved query (same permutation as [`apply_query`]).
pub fn apply_query_table(state: &mut QState, q: &Query, table: &QueryTable) {
    let m = state.m;
    assert!(m >= q.width(), "state has too few qubits for the query");
    let x_size = 1usize << q.m_dprime;
    let stride = 1usize << (m - q.m_prime - q.m_dprime);
    let mut scratch = vec![Complex64::ZERO; x_size];
    for &(i, b) in &table.shifts {
        if b == 0 {
            continue;
        }
        let base = i << (m - q.m_prime);
        let shift = b as usize;
        for y in 0..stride {
            for x in 0..x_size {
                scratch[x] = state.amps[base + x * stride + y];
            }
            for (x, &s) in scratch.iter().enumerate() {
                let xs = (x + shift) & (x_size - 1);
                state.amps[base + xs * stride + y] = s;
            }
        }
    }
    state.queries_applied += 1;
    #[cfg(debug_assertions)]
    state.check_norm(1e-10).expect("query must preserve the norm");
}

/// An elementary gate: a (possibly multi-controlled) single-qubit unitary, a
/// reflection about the zero state of a register, modular negation of a
/// register, or a wire swap.
#[derive(Debug, Clone)]
pub enum Gate {
    Unitary { target: usize, controls: Vec<usize>, mat: [[Complex64; 2]; 2] },
    ReflectAboutZero { wires: Vec<usize>, controls: Vec<usize> },
    NegateMod { wires: Vec<usize>, controls: Vec<usize> },
    Swap { a: usize, b: usize },
}

impl Gate {
    pub fn h(target: usize) -> Gate {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Gate::Unitary {
            target,
            controls: vec![],
            mat: [
                [Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
                [Complex64::new(s, 0.0), Complex64::new(-s, 0.0)],
            ],
        }
    }

    pub fn pauli_x(target: usize) -> Gate {
        Gate::Unitary {
            target,
            controls: vec![],
            mat: [[Complex64::ZERO, Complex64::ONE], [Complex64::ONE, Complex64::ZERO]],
        }
    }

    pub fn pauli_z(target: usize) -> Gate {
        Gate::Unitary {
            target,
            controls: vec![],
            mat: [[Complex64::ONE, Complex64::ZERO], [Complex64::ZERO, -Complex64::ONE]],
        }
    }

    /// Rotation `Ry(angle)`: maps `|0⟩` to `cos(angle/2)|0⟩ + sin(angle/2)|1⟩`.
    pub fn ry(target: usize, angle: f64) -> Gate {
        let (s, c) = (0.5 * angle).sin_cos();
        Gate::Unitary {
            target,
            controls: vec![],
            mat: [
                [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
            ],
        }
    }

    /// Phase gate `diag(1, e^{i·angle})`.
    pub fn phase(target: usize, angle: f64) -> Gate {
        Gate::Unitary {
            target,
            controls: vec![],
            mat: [
                [Complex64::ONE, Complex64::ZERO],
                [Complex64::ZERO, Complex64::from_polar(1.0, angle)],
            ],
        }
    }

    /// Attach control wires (all must read 1 for the gate to act).
    pub fn with_controls(self, extra: Vec<usize>) -> Gate {
        match self {
            Gate::Unitary { target, mut controls, mat } => {
                controls.extend(extra);
                Gate::Unitary { target, controls, mat }
            }
            Gate::ReflectAboutZero { wires, mut controls } => {
                controls.extend(extra);
                Gate::ReflectAboutZero { wires, controls }
            }
            Gate::NegateMod { wires, mut controls } => {
                controls.extend(extra);
                Gate::NegateMod { wires, controls }
            }
            Gate::Swap { .. } => panic!("controlled swap not supported"),
        }
    }

    pub fn adjoint(&self) -> Gate {
        match self {
            Gate::Unitary { target, controls, mat } => Gate::Unitary {
                target: *target,
                controls: controls.clone(),
                mat: [
                    [mat[0][0].conj(), mat[1][0].conj()],
                    [mat[0][1].conj(), mat[1][1].conj()],
                ],
            },
            // Reflections, modular negation, and swaps are involutions.
            Gate::ReflectAboutZero { .. } | Gate::NegateMod { .. } | Gate::Swap { .. } => {
                self.clone()
            }
        }
    }
}

/// Apply one gate to the state in place.
pub fn apply_gate(state: &mut QState, gate: &Gate) {
    let m = state.m;
    let dim = state.amps.len();
    match gate {
        Gate::Unitary { target, controls, mat } => {
            let tmask = 1usize << (m - 1 - target);
            let cmask: usize = controls.iter().fold(0, |acc, &c| acc | (1usize << (m - 1 - c)));
            debug_assert_eq!(cmask & tmask, 0, "target cannot be its own control");
            for l in 0..dim {
                if l & tmask != 0 || (l & cmask) != cmask {
                    continue;
                }
                let hi = l | tmask;
                let a0 = state.amps[l];
                let a1 = state.amps[hi];
                state.amps[l] = mat[0][0] * a0 + mat[0][1] * a1;
                state.amps[hi] = mat[1][0] * a0 + mat[1][1] * a1;
            }
        }
        Gate::ReflectAboutZero { wires, controls } => {
            let wmask: usize = wires.iter().fold(0, |acc, &w| acc | (1usize << (m - 1 - w)));
            let cmask: usize = controls.iter().fold(0, |acc, &c| acc | (1usize << (m - 1 - c)));
            for l in 0..dim {
                if (l & cmask) == cmask && (l & wmask) != 0 {
                    state.amps[l] = -state.amps[l];
                }
            }
        }
        Gate::NegateMod { wires, controls } => {
            let w = wires.len();
            let modulus = 1usize << w;
            let cmask: usize = controls.iter().fold(0, |acc, &c| acc | (1usize << (m - 1 - c)));
            for l in 0..dim {
                if (l & cmask) != cmask {
                    continue;
                }
                let x = register_value(l, wires, m);
                let xneg = (modulus - x) & (modulus - 1);
                if xneg <= x {
                    continue; // fixed point, or already swapped from the partner
                }
                let mut partner = l;
                for (pos, &wire) in wires.iter().enumerate() {
                    let bit = (xneg >> (w - 1 - pos)) & 1;
                    let mask = 1usize << (m - 1 - wire);
                    partner = (partner & !mask) | (bit * mask);
                }
                state.amps.swap(l, partner);
            }
        }
        Gate::Swap { a, b } => {
            let amask = 1usize << (m - 1 - a);
            let bmask = 1usize << (m - 1 - b);
            for l in 0..dim {
                if l & amask != 0 && l & bmask == 0 {
                    let partner = (l & !amask) | bmask;
                    state.amps.swap(l, partner);
                }
            }
        }
    }
    #[cfg(debug_assertions)]
    state.check_norm(1e-10).expect("gate must preserve the norm");
}

/// A fixed unitary between query calls: either a dense matrix (the oracle
/// path, for small registers) or a sequence of elementary gates (the
/// preferred path).
pub enum UnitaryOp {
    Dense(DMatrix<Complex64>),
    Gates(Vec<Gate>),
}

impl std::fmt::Debug for UnitaryOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UnitaryOp::Dense(u) => write!(f, "Dense({}x{})", u.nrows(), u.ncols()),
            UnitaryOp::Gates(g) => write!(f, "Gates({})", g.len()),
        }
    }
}

impl UnitaryOp {
    pub fn identity_gates() -> UnitaryOp {
        UnitaryOp::Gates(vec![])
    }

    pub fn adjoint(&self) -> UnitaryOp {
        match self {
            UnitaryOp::Dense(u) => UnitaryOp::Dense(u.adjoint()),
            UnitaryOp::Gates(gates) => {
                UnitaryOp::Gates(gates.iter().rev().map(Gate::adjoint).collect())
            }
        }
    }
}

/// Apply a fixed unitary; dense matrices are checked for unitarity
/// (`‖U†U - I‖_max <= 1e-8`) before use.
pub fn apply_unitary(state: &mut QState, u: &UnitaryOp) -> Result<()> {
    match u {
        UnitaryOp::Dense(mat) => {
            let dim = state.amps.len();
            if mat.nrows() != dim || mat.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: mat.nrows() });
            }
            let gram = mat.adjoint() * mat;
            let mut dev = 0.0f64;
            for i in 0..dim {
                for j in 0..dim {
                    let expect = if i == j { Complex64::ONE } else { Complex64::ZERO };
                    dev = dev.max((gram[(i, j)] - expect).norm());
                }
            }
            if dev > 1e-8 {
                return Err(Error::NotUnitary(dev));
            }
            let mut out = vec![Complex64::ZERO; dim];
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = Complex64::ZERO;
                for j in 0..dim {
                    acc += mat[(i, j)] * state.amps[j];
                }
                *o = acc;
            }
            state.amps = out;
            #[cfg(debug_assertions)]
            state.check_norm(1e-10).expect("dense unitary must preserve the norm");
            Ok(())
        }
        UnitaryOp::Gates(gates) => {
            for g in gates {
                apply_gate(state, g);
            }
            Ok(())
        }
    }
}

/// A quantum algorithm tuple `(m, w, Q, (U_i)_{i=0..n}, φ)`. It owns no f:
/// the input enters only through query applications at run time.
pub struct QAlgorithm {
    m: usize,
    start: usize,
    query: Query,
    unitaries: Vec<UnitaryOp>,
    output: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
}

impl QAlgorithm {
    pub fn new(
        m: usize,
        start: usize,
        query: Query,
        unitaries: Vec<UnitaryOp>,
        output: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
    ) -> Result<Self> {
        if m < query.width() {
            return Err(Error::InvalidArgument(format!(
                "algorithm has {m} qubits but the query needs {}",
                query.width()
            )));
        }
        if m >= usize::BITS as usize {
            return Err(Error::InvalidArgument(format!("too many qubits: {m}")));
        }
        if start >= (1usize << m) {
            return Err(Error::InvalidArgument("starting state out of range".into()));
        }
        if unitaries.is_empty() {
            return Err(Error::InvalidArgument("need at least U_0".into()));
        }
        Ok(Self { m, start, query, unitaries, output })
    }

    pub fn qubits(&self) -> usize {
        self.m
    }

    /// Declared query count n; the unitary list has length n+1.
    pub fn query_count(&self) -> u64 {
        (self.unitaries.len() - 1) as u64
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn output_map(&self) -> &Arc<dyn Fn(usize) -> f64 + Send + Sync> {
        &self.output
    }

    /// Evolve `U_n Q_f U_{n-1} … U_1 Q_f U_0 |w⟩` and return the final state.
    pub fn final_state(&self, f: &dyn Fn(usize) -> f64) -> Result<QState> {
        let table = self.query.resolve(f)?;
        let mut state = QState::basis(self.m, self.start)?;
        let n = self.unitaries.len() - 1;
        for (k, u) in self.unitaries.iter().enumerate() {
            apply_unitary(&mut state, u)?;
            if k < n {
                apply_query_table(&mut state, &self.query, &table);
            }
        }
        debug_assert_eq!(state.queries_applied(), self.query_count());
        state.check_norm(1e-10)?;
        Ok(state)
    }
}

impl std::fmt::Debug for QAlgorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QAlgorithm")
            .field("m", &self.m)
            .field("start", &self.start)
            .field("queries", &self.query_count())
            .finish()
    }
}

/// Run the algorithm once on input f: evolve, measure, and post-process the
/// observed basis index through φ. Applies the query exactly n times.
pub fn run_once(alg: &QAlgorithm, f: &dyn Fn(usize) -> f64, rng: &mut RngStream) -> Result<f64> {
    let state = alg.final_state(f)?;
    let l = state.measure(rng);
    Ok((alg.output)(l))
}

/// Exact law of the algorithm output: enumerate `|α_{ℓ,f}|²` and aggregate
/// through φ. Feasible only under the qubit cap.
pub fn output_distribution(
    alg: &QAlgorithm,
    f: &dyn Fn(usize) -> f64,
) -> Result<OutputDistribution> {
    output_distribution_capped(alg, f, DEFAULT_QUBIT_CAP)
}

/// [`output_distribution`] with an explicit qubit cap.
pub fn output_distribution_capped(
    alg: &QAlgorithm,
    f: &dyn Fn(usize) -> f64,
    cap: usize,
) -> Result<OutputDistribution> {
    if alg.m > cap {
        return Err(Error::QubitCapExceeded { qubits: alg.m, cap });
    }
    let state = alg.final_state(f)?;
    let pairs: Vec<(f64, f64)> = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(l, a)| ((alg.output)(l), a.norm_sqr()))
        .collect();
    let dist = OutputDistribution::from_pairs(pairs);
    let total = dist.total();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("output law sums to {total}")));
    }
    Ok(dist)
}

/// The smallest ε with at least 3/4 of the output mass within ε of `truth`,
/// computed exactly from the output distribution.
pub fn success_error(alg: &QAlgorithm, f: &dyn Fn(usize) -> f64, truth: f64) -> Result<f64> {
    Ok(output_distribution(alg, f)?.success_error(truth))
}

/// Run the algorithm k times (k odd) and return the median of the results.
/// Total query cost is k·n.
pub fn median_boost(
    alg: &QAlgorithm,
    f: &dyn Fn(usize) -> f64,
    k: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::InvalidArgument(format!("k must be odd, got {k}")));
    }
    let mut outs = Vec::with_capacity(k);
    for _ in 0..k {
        outs.push(run_once(alg, f, rng)?);
    }
    Ok(median(&outs))
}

/// A discrete output law: atoms `(value, probability)` sorted by value, with
/// values merged when bit-identical.
#[derive(Debug, Clone)]
pub struct OutputDistribution {
    atoms: Vec<(f64, f64)>,
}

impl OutputDistribution {
    pub fn from_pairs(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        for (v, p) in pairs {
            let p = p.max(0.0);
            match atoms.last_mut() {
                Some(last) if last.0.to_bits() == v.to_bits() => last.1 += p,
                _ => atoms.push((v, p)),
            }
        }
        atoms.retain(|&(_, p)| p > 0.0);
        Self { atoms }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total(&self) -> f64 {
        let mut acc = NeumaierSum::new();
        for &(_, p) in &self.atoms {
            acc.add(p);
        }
        acc.value()
    }

    /// Probability mass within `radius` of `center` (inclusive, with a
    /// relative fp guard).
    pub fn mass_within(&self, center: f64, radius: f64) -> f64 {
        let r = radius * (1.0 + 1e-12) + 1e-15;
        let mut acc = NeumaierSum::new();
        for &(v, p) in &self.atoms {
            if (v - center).abs() <= r {
                acc.add(p);
            }
        }
        acc.value()
    }

    /// Smallest ε such that mass within ε of `truth` reaches at least `q`:
    /// atoms are sorted by distance and accumulated until the level is hit.
    pub fn quantile_abs_error(&self, truth: f64, q: f64) -> f64 {
        let mut by_dist: Vec<(f64, f64)> =
            self.atoms.iter().map(|&(v, p)| ((v - truth).abs(), p)).collect();
        by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
        let level = q * self.total();
        let mut acc = NeumaierSum::new();
        for (dist, p) in by_dist {
            acc.add(p);
            if acc.value() >= level - 1e-12 {
                return dist;
            }
        }
        self.atoms.last().map(|&(v, _)| (v - truth).abs()).unwrap_or(0.0)
    }

    /// The error at confidence 3/4, matching the quantum error definition.
    pub fn success_error(&self, truth: f64) -> f64 {
        self.quantile_abs_error(truth, 0.75)
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let u: f64 = rng.random::<f64>() * self.total();
        let mut acc = NeumaierSum::new();
        for &(v, p) in &self.atoms {
            acc.add(p);
            if acc.value() > u {
                return v;
            }
        }
        self.atoms.last().expect("distribution must be nonempty").0
    }

    /// Kolmogorov–Smirnov distance between the empirical law of `samples`
    /// and this distribution.
    pub fn ks_distance(&self, samples: &[f64]) -> f64 {
        let n = samples.len() as f64;
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut worst = 0.0f64;
        let mut cdf = 0.0;
        for &(v, p) in &self.atoms {
            let below = sorted.partition_point(|&s| s < v) as f64 / n; // F_emp(v-)
            let at_or_below = sorted.partition_point(|&s| s <= v) as f64 / n;
            worst = worst.max((below - cdf).abs());
            cdf += p;
            worst = worst.max((at_or_below - cdf).abs());
        }
        worst
    }
}

// ---------------------------------------------------------------------------
// Circuit library: quantum Fourier transform
// ---------------------------------------------------------------------------

/// Gate sequence for the QFT on the given wires (`wires[0]` = most
/// significant bit): `|x⟩ → (1/√M) Σ_y e^{2πi x y / M} |y⟩`.
pub fn qft_gates(wires: &[usize]) -> Vec<Gate> {
    let t = wires.len();
    let mut gates = Vec::new();
    for j in 0..t {
        gates.push(Gate::h(wires[j]));
        for k in (j + 1)..t {
            let angle = std::f64::consts::PI / 2f64.powi((k - j) as i32);
            gates.push(Gate::phase(wires[j], angle).with_controls(vec![wires[k]]));
        }
    }
    for i in 0..t / 2 {
        gates.push(Gate::Swap { a: wires[i], b: wires[t - 1 - i] });
    }
    gates
}

/// Inverse QFT: the reversed adjoint gate sequence.
pub fn iqft_gates(wires: &[usize]) -> Vec<Gate> {
    qft_gates(wires).iter().rev().map(Gate::adjoint).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn trivial_query(m_prime: usize, m_dprime: usize) -> Query {
        let z: Vec<usize> = (0..(1usize << m_prime)).collect();
        let tau = z.clone();
        Query::new(m_prime, m_dprime, z, tau, Arc::new(|_| 0)).unwrap()
    }

    fn value_query(m_prime: usize, m_dprime: usize) -> Query {
        // beta reads the value itself as the register word.
        let z: Vec<usize> = (0..(1usize << m_prime)).collect();
        let tau = z.clone();
        Query::new(m_prime, m_dprime, z, tau, Arc::new(|v: f64| v as u64)).unwrap()
    }

    #[test]
    fn zero_beta_is_identity() {
        let q = trivial_query(1, 1);
        let mut state = QState::basis(3, 5).unwrap();
        let before = state.amplitudes().to_vec();
        apply_query(&mut state, &q, &|_| 123.0).unwrap();
        assert_eq!(state.amplitudes(), &before[..]);
        assert_eq!(state.queries_applied(), 1);
    }

    #[test]
    fn single_flip_example() {
        // m'=m''=1, Z={0}, beta(f(tau(0))) = 1: |0⟩|0⟩ -> |0⟩|1⟩, |1⟩|0⟩ fixed.
        let q = Query::new(1, 1, vec![0], vec![0], Arc::new(|v: f64| v as u64)).unwrap();
        let mut state = QState::basis(2, 0b00).unwrap();
        apply_query(&mut state, &q, &|_| 1.0).unwrap();
        assert_eq!(state.amplitudes()[0b01], Complex64::ONE);
        let mut state = QState::basis(2, 0b10).unwrap();
        apply_query(&mut state, &q, &|_| 1.0).unwrap();
        assert_eq!(state.amplitudes()[0b10], Complex64::ONE);
    }

    #[test]
    fn double_application_involution_for_one_bit() {
        let q = value_query(2, 1);
        let f = |i: usize| (i % 2) as f64;
        let mut state = QState::basis(4, 0b0110).unwrap();
        apply_query(&mut state, &q, &f).unwrap();
        apply_query(&mut state, &q, &f).unwrap();
        assert_eq!(state.amplitudes()[0b0110], Complex64::ONE);
    }

    #[test]
    fn cycle_order_divides_register_size() {
        // With m''=2 and beta = 1, four applications give the identity but
        // two do not (2·1 ≠ 0 mod 4).
        let q = Query::new(1, 2, vec![0, 1], vec![0, 1], Arc::new(|_| 1)).unwrap();
        let f = |_: usize| 0.0;
        let mut state = QState::basis(3, 0b000).unwrap();
        apply_query(&mut state, &q, &f).unwrap();
        apply_query(&mut state, &q, &f).unwrap();
        assert_eq!(state.amplitudes()[0b010], Complex64::ONE);
        apply_query(&mut state, &q, &f).unwrap();
        apply_query(&mut state, &q, &f).unwrap();
        assert_eq!(state.amplitudes()[0b000], Complex64::ONE);
    }

    #[test]
    fn beta_out_of_range_is_rejected() {
        let q = Query::new(1, 1, vec![0], vec![0], Arc::new(|_| 2)).unwrap();
        let mut state = QState::basis(2, 0).unwrap();
        let err = apply_query(&mut state, &q, &|_| 0.0).unwrap_err();
        assert_eq!(err, Error::InvalidBeta { value: 2, width: 1 });
    }

    #[test]
    fn negate_conjugation_inverts_query() {
        // NegateMod Q NegateMod = Q^{-1} on the value register.
        let q = Query::new(1, 3, vec![0, 1], vec![0, 1], Arc::new(|v: f64| v as u64)).unwrap();
        let f = |i: usize| if i == 0 { 3.0 } else { 5.0 };
        let neg = Gate::NegateMod { wires: vec![1, 2, 3], controls: vec![] };
        let mut state = QState::basis(4, 0b0110).unwrap();
        apply_query(&mut state, &q, &f).unwrap();
        apply_gate(&mut state, &neg);
        apply_query(&mut state, &q, &f).unwrap();
        apply_gate(&mut state, &neg);
        assert_eq!(state.amplitudes()[0b0110], Complex64::ONE);
    }

    #[test]
    fn hadamard_amplitudes() {
        let mut state = QState::basis(1, 0).unwrap();
        apply_gate(&mut state, &Gate::h(0));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(state.amplitudes()[0].re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(state.amplitudes()[1].re, s, epsilon = 1e-15);
    }

    #[test]
    fn dense_unitary_and_adjoint_restore() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(s, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(-s, 0.0),
            ],
        );
        let op = UnitaryOp::Dense(h);
        let mut state = QState::basis(1, 1).unwrap();
        apply_unitary(&mut state, &op).unwrap();
        apply_unitary(&mut state, &op.adjoint()).unwrap();
        assert!((state.amplitudes()[1] - Complex64::ONE).norm() < 1e-9);

        let bad = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.5, 0.0),
                Complex64::ZERO,
                Complex64::ONE,
            ],
        );
        let err = apply_unitary(&mut state, &UnitaryOp::Dense(bad)).unwrap_err();
        assert!(matches!(err, Error::NotUnitary(_)));
    }

    fn identity_alg_returning_start(m: usize, start: usize, n_queries: usize) -> QAlgorithm {
        let unitaries: Vec<UnitaryOp> =
            (0..=n_queries).map(|_| UnitaryOp::identity_gates()).collect();
        QAlgorithm::new(m, start, trivial_query(1, 1), unitaries, Arc::new(|l| l as f64)).unwrap()
    }

    #[test]
    fn run_once_identity_returns_start() {
        let alg = identity_alg_returning_start(3, 5, 2);
        let mut rng = RngStream::new(0);
        for _ in 0..10 {
            assert_eq!(run_once(&alg, &|_| 0.0, &mut rng).unwrap(), 5.0);
        }
        let dist = output_distribution(&alg, &|_| 0.0).unwrap();
        assert_eq!(dist.atoms(), &[(5.0, 1.0)]);
    }

    fn hadamard_alg() -> QAlgorithm {
        QAlgorithm::new(
            2,
            0,
            trivial_query(1, 1),
            vec![UnitaryOp::Gates(vec![Gate::h(0)])],
            Arc::new(|l| (l >> 1) as f64),
        )
        .unwrap()
    }

    #[test]
    fn hadamard_run_frequencies() {
        let alg = hadamard_alg();
        let mut rng = RngStream::new(31);
        let trials = 10_000;
        let mut ones = 0usize;
        for _ in 0..trials {
            if run_once(&alg, &|_| 0.0, &mut rng).unwrap() == 1.0 {
                ones += 1;
            }
        }
        let freq = ones as f64 / trials as f64;
        assert!((0.45..=0.55).contains(&freq), "frequency {freq}");

        let dist = output_distribution(&alg, &|_| 0.0).unwrap();
        assert_eq!(dist.atoms().len(), 2);
        assert_abs_diff_eq!(dist.atoms()[0].1, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(dist.atoms()[1].1, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn run_once_matches_distribution_ks() {
        let alg = hadamard_alg();
        let dist = output_distribution(&alg, &|_| 0.0).unwrap();
        let mut rng = RngStream::new(7);
        let samples: Vec<f64> =
            (0..10_000).map(|_| run_once(&alg, &|_| 0.0, &mut rng).unwrap()).collect();
        // 3-sigma-level KS band for n = 10^4.
        assert!(dist.ks_distance(&samples) < 1.92 / (samples.len() as f64).sqrt());
    }

    #[test]
    fn success_error_examples() {
        let truth = 2.0;
        let d = OutputDistribution::from_pairs(vec![(truth, 1.0)]);
        assert_eq!(d.success_error(truth), 0.0);
        let d = OutputDistribution::from_pairs(vec![(truth, 0.8), (truth + 1.0, 0.2)]);
        assert_eq!(d.success_error(truth), 0.0);
        let d = OutputDistribution::from_pairs(vec![(truth, 0.5), (truth + 1.0, 0.5)]);
        assert_eq!(d.success_error(truth), 1.0);
    }

    #[test]
    fn median_boost_reduces_failures() {
        // Output is truth w.p. 0.75 and truth+10 w.p. 0.25 via an ancilla
        // rotation; no queries are needed.
        let theta = (0.25f64).sqrt().asin();
        let alg = QAlgorithm::new(
            2,
            0,
            trivial_query(1, 1),
            vec![UnitaryOp::Gates(vec![Gate::ry(0, 2.0 * theta)])],
            Arc::new(|l| if l >> 1 == 0 { 1.0 } else { 11.0 }),
        )
        .unwrap();
        let trials = 10_000;
        let mut fail1 = 0usize;
        let mut fail15 = 0usize;
        let mut rng = RngStream::new(99);
        for _ in 0..trials {
            if median_boost(&alg, &|_| 0.0, 1, &mut rng).unwrap() != 1.0 {
                fail1 += 1;
            }
            if median_boost(&alg, &|_| 0.0, 15, &mut rng).unwrap() != 1.0 {
                fail15 += 1;
            }
        }
        assert!(fail15 < fail1, "boosted failures {fail15} not below raw {fail1}");
        assert!(median_boost(&alg, &|_| 0.0, 2, &mut RngStream::new(0)).is_err());

        // Constant-output algorithm: boosting returns the same constant.
        let alg = identity_alg_returning_start(3, 4, 0);
        assert_eq!(median_boost(&alg, &|_| 0.0, 5, &mut RngStream::new(1)).unwrap(), 4.0);
    }

    #[test]
    fn qft_matches_direct_transform() {
        // Non-contiguous register inside a 4-qubit state, spectator wire set.
        let wires = [0usize, 2, 3];
        let m = 4;
        let t = wires.len();
        let big = 1usize << t;
        for x in 0..big {
            let mut start = 1usize << (m - 1 - 1); // wire 1 on
            for (pos, &w) in wires.iter().enumerate() {
                if (x >> (t - 1 - pos)) & 1 == 1 {
                    start |= 1 << (m - 1 - w);
                }
            }
            let mut state = QState::basis(m, start).unwrap();
            for g in qft_gates(&wires) {
                apply_gate(&mut state, &g);
            }
            for (l, amp) in state.amplitudes().iter().enumerate() {
                if (l >> (m - 1 - 1)) & 1 == 0 {
                    assert!(amp.norm() < 1e-12);
                    continue;
                }
                let y = register_value(l, &wires, m);
                let expect = Complex64::from_polar(
                    1.0 / (big as f64).sqrt(),
                    2.0 * std::f64::consts::PI * (x * y) as f64 / big as f64,
                );
                assert!((amp - expect).norm() < 1e-10, "x={x} y={y}");
            }
            // And the inverse undoes it.
            for g in iqft_gates(&wires) {
                apply_gate(&mut state, &g);
            }
            assert!((state.amplitudes()[start] - Complex64::ONE).norm() < 1e-10);
        }
    }

    #[test]
    fn f_independence_of_structure() {
        // The same algorithm runs against different inputs; only the query
        // permutation changes the output law.
        let q = Query::new(1, 1, vec![0, 1], vec![0, 1], Arc::new(|v: f64| v as u64)).unwrap();
        let alg = QAlgorithm::new(
            2,
            0,
            q,
            vec![UnitaryOp::Gates(vec![Gate::h(0)]), UnitaryOp::Gates(vec![])],
            Arc::new(|l| l as f64),
        )
        .unwrap();
        let d0 = output_distribution(&alg, &|_| 0.0).unwrap();
        let d1 = output_distribution(&alg, &|i| i as f64).unwrap();
        assert_eq!(alg.query_count(), 1);
        assert_ne!(d0.atoms(), d1.atoms());
    }
}
