//! Quantum estimators: amplitude estimation for mean computation and the
//! interpolate-then-quantum-sum integration scheme.
//!
//! The amplitude estimation circuit follows the standard construction. An
//! encoding step A prepares a uniform index superposition, reads the
//! quantized value through the query, and rotates an ancilla so the marked
//! probability equals the quantized mean. Phase estimation of the Grover
//! iterate `G = A S0 A† S_χ` with `M = 2^t` grid points then reads off
//! `â = sin²(π y/M)` with `|â - a| <= π/M + π²/M²` at probability `8/π²`
//! per shot; medians over repeated shots boost the confidence.
//!
//! Values are quantized in angle space: `β(v)` rounds `(2/π) asin(√v)` to
//! `b-1` fractional bits, so the rotation angle is `π β(v)/2^b`. Amplitudes
//! on the output grid `sin²(π j/M)` with `M | 2^b` are then encoded exactly,
//! and two-valued {0,1} data is exact at any `b >= 1`. The additive
//! quantization bias for general values is at most `π 2^{-b-1}`.
//!
//! Queries cannot be conditioned, so the controlled iterate interleaves the
//! raw `Q_f` with controlled f-independent gates; with the control off the
//! two queries cancel through negation conjugation (`N Q_f N = Q_f^{-1}`),
//! and with it on the product is exactly G. Each iterate costs two queries;
//! a shot with `M` grid points costs `2(M-1) + 1` including the encoding.
//!
//! Beyond the dense-simulation cap, a reduced executor evaluates the same
//! output law in the 2-dimensional invariant subspace of G (a rotation by
//! `2θ_a`), where phase estimation has the closed-form Fejér-kernel
//! distribution. Both executors are cross-checked to agree exactly on small
//! instances.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::classical::{
    cells_for_budget, interp_error_bound, Estimate, Setting, TensorInterpolant,
};
use crate::problem::{midpoint_grid, ClassSpec, FunctionHandle, SequenceInput};
use crate::quantum::{
    iqft_gates, Gate, OutputDistribution, QAlgorithm, Query, UnitaryOp, DEFAULT_QUBIT_CAP,
};
use crate::rng::RngStream;
use crate::util::{comp_sum_iter, median};
use crate::{Error, Result};

/// Which executor computes the output law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Dense circuit when it fits under the qubit cap, reduced otherwise.
    #[default]
    Auto,
    /// Always the dense circuit (errors above the cap).
    Dense,
    /// Always the reduced two-level executor.
    Reduced,
}

/// Configuration for one amplitude-estimation instance.
#[derive(Debug, Clone)]
pub struct QaeConfig {
    /// Phase qubits t; the readout grid has `M = 2^t` points.
    pub phase_bits: usize,
    /// Value-register bits used by the query's β.
    pub value_bits: usize,
    /// Median-boost repetitions (odd).
    pub shots: usize,
    pub qubit_cap: usize,
    pub backend: Backend,
}

impl Default for QaeConfig {
    fn default() -> Self {
        Self {
            phase_bits: 6,
            value_bits: 10,
            shots: 5,
            qubit_cap: DEFAULT_QUBIT_CAP,
            backend: Backend::Auto,
        }
    }
}

impl QaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.phase_bits == 0 || self.value_bits == 0 {
            return Err(Error::InvalidArgument("need t >= 1 and b >= 1".into()));
        }
        if self.shots == 0 || self.shots % 2 == 0 {
            return Err(Error::InvalidArgument(format!("shots must be odd, got {}", self.shots)));
        }
        Ok(())
    }
}

/// Quantize a value in [0,1] to the angle grid: `round((2/π) asin(√v) 2^{b-1})`.
fn beta_angle(v: f64, value_bits: usize) -> u64 {
    let clamped = v.clamp(0.0, 1.0);
    let angle01 = 2.0 / PI * clamped.sqrt().asin(); // in [0, 1]
    (angle01 * (1u64 << (value_bits - 1)) as f64).round() as u64
}

/// Map a phase readout to the estimate: `sin²(π min(y, M-y)/M)`, rescaled
/// for index registers wider than the sequence.
fn phi_from_y(y: usize, grid: usize, rescale: f64) -> f64 {
    let yc = y.min(grid - y);
    let s = (PI * yc as f64 / grid as f64).sin();
    (s * s * rescale).min(1.0)
}

/// One materialized amplitude-estimation instance over a [0,1]-valued
/// sequence.
pub struct QaePlan {
    n_seq: usize,
    m_prime: usize,
    value_bits: usize,
    phase_bits: usize,
    shots: usize,
    qubit_cap: usize,
    backend: Backend,
    /// Quantized rotation angles per sequence index.
    thetas: Vec<f64>,
    /// Exact marked probability after quantization.
    a_tilde: f64,
    values: Vec<f64>,
}

impl QaePlan {
    pub fn new(values: &SequenceInput, cfg: &QaeConfig) -> Result<Self> {
        cfg.validate()?;
        if let Some(v) = values.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("value {v} outside [0,1]")));
        }
        let n_seq = values.len();
        let m_prime = if n_seq <= 2 {
            1
        } else {
            (usize::BITS - (n_seq - 1).leading_zeros()) as usize
        };
        let scale = 1u64 << (cfg.value_bits - 1);
        let thetas: Vec<f64> = values
            .values()
            .iter()
            .map(|&v| PI * beta_angle(v, cfg.value_bits) as f64 / (2 * scale) as f64)
            .collect();
        let m_big = 1usize << m_prime;
        let a_tilde = comp_sum_iter(thetas.iter().map(|t| {
            let s = t.sin();
            s * s
        })) / m_big as f64;
        Ok(Self {
            n_seq,
            m_prime,
            value_bits: cfg.value_bits,
            phase_bits: cfg.phase_bits,
            shots: cfg.shots,
            qubit_cap: cfg.qubit_cap,
            backend: cfg.backend,
            thetas,
            a_tilde,
            values: values.values().to_vec(),
        })
    }

    /// Readout grid size `M = 2^t`.
    pub fn grid(&self) -> usize {
        1 << self.phase_bits
    }

    /// Marked probability after quantization, `(1/2^{m'}) Σ sin² θ_i`.
    pub fn marked_probability(&self) -> f64 {
        self.a_tilde
    }

    /// Factor recovering the sequence mean from the marked probability when
    /// the index register is wider than the sequence.
    pub fn rescale(&self) -> f64 {
        (1usize << self.m_prime) as f64 / self.n_seq as f64
    }

    /// Total qubits of the dense circuit: index + value + phase + ancilla.
    pub fn qubits(&self) -> usize {
        self.m_prime + self.value_bits + self.phase_bits + 1
    }

    /// Queries consumed by one shot: `2(M-1)` for the phase-estimation
    /// ladder plus one encoding read.
    pub fn queries_per_shot(&self) -> u64 {
        2 * ((1u64 << self.phase_bits) - 1) + 1
    }

    pub fn shots(&self) -> usize {
        self.shots
    }

    /// The estimator's output grid `{sin²(π j/M) · rescale}`.
    pub fn output_grid(&self) -> Vec<f64> {
        let m = self.grid();
        (0..=m / 2).map(|j| phi_from_y(j, m, self.rescale())).collect()
    }

    /// Build the full algorithm tuple for the dense executor.
    pub fn algorithm(&self) -> Result<QAlgorithm> {
        let mp = self.m_prime;
        let b = self.value_bits;
        let t = self.phase_bits;
        let m = self.qubits();
        let index_wires: Vec<usize> = (0..mp).collect();
        let value_wires: Vec<usize> = (mp..mp + b).collect();
        let phase_wires: Vec<usize> = (mp + b..mp + b + t).collect(); // MSB first
        let ancilla = mp + b + t;

        let z: Vec<usize> = (0..self.n_seq).collect();
        let tau = z.clone();
        let vb = self.value_bits;
        let query = Query::new(mp, b, z, tau, Arc::new(move |v| beta_angle(v, vb)))?;

        // Ancilla rotation by π x / 2^b, one controlled Ry per value bit.
        let rot_ladder = |sign: f64, extra_control: Option<usize>| -> Vec<Gate> {
            value_wires
                .iter()
                .enumerate()
                .map(|(idx, &vw)| {
                    let angle = sign * PI / 2f64.powi(idx as i32 + 1);
                    let mut controls = vec![vw];
                    if let Some(c) = extra_control {
                        controls.push(c);
                    }
                    Gate::ry(ancilla, 2.0 * angle).with_controls(controls)
                })
                .collect()
        };

        let mut segments: Vec<Vec<Gate>> = Vec::new();
        let mut current: Vec<Gate> = Vec::new();

        // U_0: uniform phase and index superpositions.
        for &w in phase_wires.iter().chain(&index_wires) {
            current.push(Gate::h(w));
        }
        segments.push(std::mem::take(&mut current)); // encoding query follows

        // U_1 starts with the encoding rotation.
        current.extend(rot_ladder(1.0, None));

        let negate = Gate::NegateMod { wires: value_wires.clone(), controls: vec![] };
        let mut reflect_wires = index_wires.clone();
        reflect_wires.extend(&value_wires);
        reflect_wires.push(ancilla);

        for j in 0..t {
            let control = phase_wires[t - 1 - j]; // wire carrying bit j of y
            for _ in 0..(1u64 << j) {
                // Controlled Grover iterate G = A S0 A† S_χ; queries stay
                // unconditioned and cancel when the control is off.
                current.push(Gate::pauli_z(ancilla).with_controls(vec![control])); // S_χ
                current.extend(rot_ladder(-1.0, Some(control))); // R†
                current.push(negate.clone());
                segments.push(std::mem::take(&mut current)); // query (uncompute)
                current.push(negate.clone());
                for &iw in &index_wires {
                    current.push(Gate::h(iw).with_controls(vec![control]));
                }
                current.push(Gate::ReflectAboutZero {
                    wires: reflect_wires.clone(),
                    controls: vec![control],
                }); // S0
                for &iw in &index_wires {
                    current.push(Gate::h(iw).with_controls(vec![control]));
                }
                segments.push(std::mem::take(&mut current)); // query (recompute)
                current.extend(rot_ladder(1.0, Some(control))); // R
            }
        }
        current.extend(iqft_gates(&phase_wires));
        segments.push(current);

        let grid = self.grid();
        let rescale = self.rescale();
        let pw = phase_wires.clone();
        let output = Arc::new(move |l: usize| {
            let y = crate::quantum::register_value(l, &pw, m);
            phi_from_y(y, grid, rescale)
        });

        let unitaries: Vec<UnitaryOp> = segments.into_iter().map(UnitaryOp::Gates).collect();
        QAlgorithm::new(m, 0, query, unitaries, output)
    }

    /// Exact output law through the dense circuit simulator.
    pub fn dense_distribution(&self) -> Result<OutputDistribution> {
        let alg = self.algorithm()?;
        let values = self.values.clone();
        crate::quantum::output_distribution_capped(&alg, &move |i| values[i], self.qubit_cap)
    }

    /// Exact output law through the two-level reduced executor: phase
    /// estimation of a rotation by `2 θ_a` has the Fejér-kernel law
    /// `P(y) = ½ F_M(y - Mθ/π) + ½ F_M(y + Mθ/π)`.
    pub fn reduced_distribution(&self) -> OutputDistribution {
        let m_grid = self.grid();
        let theta = self.a_tilde.sqrt().min(1.0).asin();
        let omega = theta / PI * m_grid as f64; // eigenphase in grid units
        let rescale = self.rescale();
        let pairs: Vec<(f64, f64)> = (0..m_grid)
            .map(|y| {
                let p =
                    0.5 * fejer(y as f64 - omega, m_grid) + 0.5 * fejer(y as f64 + omega, m_grid);
                (phi_from_y(y, m_grid, rescale), p)
            })
            .collect();
        OutputDistribution::from_pairs(pairs)
    }

    /// Output law under the configured backend.
    pub fn distribution(&self) -> Result<OutputDistribution> {
        match self.backend {
            Backend::Dense => self.dense_distribution(),
            Backend::Reduced => Ok(self.reduced_distribution()),
            Backend::Auto => {
                if self.qubits() <= self.qubit_cap {
                    self.dense_distribution()
                } else {
                    Ok(self.reduced_distribution())
                }
            }
        }
    }

    /// Median over the configured number of measurement shots.
    pub fn estimate(&self, dist: &OutputDistribution, rng: &mut RngStream) -> f64 {
        let outs: Vec<f64> = (0..self.shots).map(|_| dist.sample(rng)).collect();
        median(&outs)
    }
}

/// Squared Dirichlet kernel of phase estimation: the probability of reading
/// `y` when the eigenphase sits `delta` grid steps away.
fn fejer(delta: f64, m_grid: usize) -> f64 {
    let m = m_grid as f64;
    let num = (PI * delta).sin();
    let den = m * (PI * delta / m).sin();
    if den.abs() < 1e-12 {
        1.0
    } else {
        let r = num / den;
        r * r
    }
}

/// Amplitude estimation of the mean of a [0,1]-valued sequence: returns the
/// median over `cfg.shots` measurement shots of `sin²(π y/M)`.
pub fn qae_mean01(values: &SequenceInput, cfg: &QaeConfig, rng: &mut RngStream) -> Result<f64> {
    let plan = QaePlan::new(values, cfg)?;
    let dist = plan.distribution()?;
    Ok(plan.estimate(&dist, rng))
}

/// Options for [`quantum_mean_bounded_with`].
#[derive(Debug, Clone)]
pub struct MeanOptions {
    /// Value-register width; `None` picks 2 bits for exactly {0,1}-valued
    /// data (exact encoding) and `max(10, t+6)` otherwise.
    pub value_bits: Option<usize>,
    pub backend: Backend,
    pub qubit_cap: usize,
}

impl Default for MeanOptions {
    fn default() -> Self {
        Self { value_bits: None, backend: Backend::Auto, qubit_cap: DEFAULT_QUBIT_CAP }
    }
}

/// Split a query budget into (shots, phase bits), maximizing the grid size
/// M and breaking ties toward more shots; one shot costs `s(2^{t+1}-1)`.
fn shot_plan(n_queries: u64) -> Result<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for &s in &[5u64, 3, 1] {
        let mut t = 0usize;
        while t < 40 && s * ((1u64 << (t + 2)) - 1) <= n_queries {
            t += 1;
        }
        if t >= 1 && s * ((1u64 << (t + 1)) - 1) <= n_queries {
            let better = match best {
                None => true,
                Some((bs, bt)) => t > bt || (t == bt && s as usize > bs),
            };
            if better {
                best = Some((s as usize, t));
            }
        }
    }
    best.ok_or(Error::BudgetTooSmall { needed: 3, got: n_queries })
}

/// Quantum mean estimation for sequences bounded by 1 in absolute value:
/// rescales into [0,1], runs amplitude estimation with the largest grid the
/// query budget affords, and maps back. The reported cost is the exact
/// number of query applications.
pub fn quantum_mean_bounded(
    f: &SequenceInput,
    n_queries: u64,
    rng: &mut RngStream,
) -> Result<Estimate> {
    quantum_mean_bounded_with(f, n_queries, &MeanOptions::default(), rng)
}

/// [`quantum_mean_bounded`] with explicit executor options.
pub fn quantum_mean_bounded_with(
    f: &SequenceInput,
    n_queries: u64,
    opts: &MeanOptions,
    rng: &mut RngStream,
) -> Result<Estimate> {
    let (plan, dist) = bounded_mean_plan(f, n_queries, opts)?;
    let raw = plan.estimate(&dist, rng);
    let value = (2.0 * raw - 1.0).clamp(-1.0, 1.0);
    Ok(Estimate {
        value,
        evals_used: plan.shots() as u64 * plan.queries_per_shot(),
        setting: Setting::Quantum,
    })
}

/// Build the amplitude-estimation plan and output law for a bounded-mean
/// instance; callers sampling many trials reuse the distribution.
pub fn bounded_mean_plan(
    f: &SequenceInput,
    n_queries: u64,
    opts: &MeanOptions,
) -> Result<(QaePlan, OutputDistribution)> {
    if let Some(v) = f.values().iter().find(|v| v.abs() > 1.0) {
        return Err(Error::InvalidArgument(format!("value {v} outside [-1,1]")));
    }
    if n_queries < 8 {
        return Err(Error::BudgetTooSmall { needed: 8, got: n_queries });
    }
    let shifted: Vec<f64> = f.values().iter().map(|v| 0.5 * (v + 1.0)).collect();
    let (shots, t) = shot_plan(n_queries)?;
    let value_bits = opts.value_bits.unwrap_or_else(|| {
        if shifted.iter().all(|&v| v == 0.0 || v == 1.0) {
            2
        } else {
            (t + 6).max(10)
        }
    });
    let cfg = QaeConfig {
        phase_bits: t,
        value_bits,
        shots,
        qubit_cap: opts.qubit_cap,
        backend: opts.backend,
    };
    let plan = QaePlan::new(&SequenceInput::new(shifted)?, &cfg)?;
    let dist = plan.distribution()?;
    Ok((plan, dist))
}

/// Quantum integration over a Hölder class: classical evaluations build a
/// piecewise polynomial interpolant, and the quantum budget estimates the
/// mean of the scaled residual on a refined grid.
pub struct QuantumIntegrator {
    deterministic_part: f64,
    residual_bound: f64,
    interp_evals: u64,
    plan: QaePlan,
    dist: OutputDistribution,
}

impl QuantumIntegrator {
    pub fn new(
        fh: &FunctionHandle,
        spec: &ClassSpec,
        n_budget: u64,
        opts: &MeanOptions,
    ) -> Result<Self> {
        let (k, alpha, d) = match *spec {
            ClassSpec::Hoelder { k, alpha, d } => (k, alpha, d),
            _ => {
                return Err(Error::InvalidArgument(
                    "quantum integration requires a Hoelder class".into(),
                ))
            }
        };
        spec.validate()?;
        let per_cell = (k as u64 + 1).pow(d as u32);
        if n_budget < 2 * per_cell + 16 {
            return Err(Error::BudgetTooSmall { needed: 2 * per_cell + 16, got: n_budget });
        }
        let n1 = n_budget / 2;
        let m1 = cells_for_budget(n1, k, d)?;
        let interp = TensorInterpolant::build(fh, k, d, m1)?;
        let n_queries = n_budget - interp.evals_used();
        let bound = interp_error_bound(k, alpha, d, m1)?;

        // Residual discretization: refine the interpolation grid so the
        // midpoint-mean bias sits below the amplitude-estimation error at
        // this budget. The refinement grows with the phase grid M.
        let (_, t) = shot_plan(n_queries)?;
        let refine = ((1usize << t) / 16).clamp(4, 64);
        let m_disc = refine * m1 * (k + 1);
        let grid = midpoint_grid(d, m_disc);
        let mut scaled = Vec::with_capacity(grid.len());
        for point in &grid {
            let r = fh.eval_uncounted(point) - interp.eval(point);
            if r.abs() > bound {
                return Err(Error::ClassMembership(format!(
                    "residual {r} exceeds the interpolation bound {bound}; \
                     the integrand is outside the declared class"
                )));
            }
            scaled.push(r / bound);
        }
        let residual_seq = SequenceInput::new(scaled)?;
        let (plan, dist) = bounded_mean_plan(&residual_seq, n_queries, opts)?;
        Ok(Self {
            deterministic_part: interp.integral(),
            residual_bound: bound,
            interp_evals: interp.evals_used(),
            plan,
            dist,
        })
    }

    pub fn queries_used(&self) -> u64 {
        self.plan.shots() as u64 * self.plan.queries_per_shot()
    }

    pub fn evals_used(&self) -> u64 {
        self.interp_evals + self.queries_used()
    }

    pub fn residual_bound(&self) -> f64 {
        self.residual_bound
    }

    /// One estimate: interpolant integral plus the scaled quantum mean of
    /// the residual.
    pub fn estimate(&self, rng: &mut RngStream) -> Estimate {
        let raw = self.plan.estimate(&self.dist, rng);
        let mean = (2.0 * raw - 1.0).clamp(-1.0, 1.0);
        Estimate {
            value: self.deterministic_part + self.residual_bound * mean,
            evals_used: self.evals_used(),
            setting: Setting::Quantum,
        }
    }

    /// Exact law of the final output (affine image of the readout law).
    pub fn output_distribution(&self) -> OutputDistribution {
        let pairs: Vec<(f64, f64)> = self
            .dist
            .atoms()
            .iter()
            .map(|&(raw, p)| {
                let mean = (2.0 * raw - 1.0).clamp(-1.0, 1.0);
                (self.deterministic_part + self.residual_bound * mean, p)
            })
            .collect();
        OutputDistribution::from_pairs(pairs)
    }
}

/// One-shot quantum Hölder integration at the given budget.
pub fn quantum_integrate_hoelder(
    fh: &FunctionHandle,
    spec: &ClassSpec,
    n_budget: u64,
    rng: &mut RngStream,
) -> Result<Estimate> {
    let integrator = QuantumIntegrator::new(fh, spec, n_budget, &MeanOptions::default())?;
    Ok(integrator.estimate(rng))
}
