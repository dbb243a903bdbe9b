//! Independent exact verifiers: closed-form worst-case errors for small
//! instances, and the empirical worst-case driver used by the experiment
//! harness.
//!
//! The central tool is an eigenvalue computation: a randomized linear
//! estimator with finitely many atoms has mean-square error
//! `E(S(f) - A(f))² = fᵀ M f` with
//! `M = Σ_ω p_ω (s - a_ω)(s - a_ω)ᵀ` and `s = (1/N, …, 1/N)`, so the
//! worst case over the normalized `L_2` ball is `√(N · λ_max(M))`. The
//! factor N converts the Euclidean ball to the ball of the normalized norm
//! `(1/N) Σ f(i)² <= 1`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::rng::RngStream;
use crate::util::{binomial, quantile, rms};
use crate::{Error, Result};

/// Cap on exact atom enumeration: `(N choose n)` stays at most 3432.
pub const ATOM_ENUMERATION_CAP: usize = 14;

/// A randomized linear estimator with finitely supported randomness: atoms
/// `(probability, coefficient vector)` so that `A(f) = Σ_i a_i f(i)` with the
/// drawn coefficients.
#[derive(Debug, Clone)]
pub struct LinearEstimatorSpec {
    pub n_vars: usize,
    pub atoms: Vec<(f64, Vec<f64>)>,
}

impl LinearEstimatorSpec {
    pub fn validate(&self) -> Result<()> {
        let mut total = 0.0;
        for (p, coeffs) in &self.atoms {
            if coeffs.len() != self.n_vars {
                return Err(Error::DimensionMismatch { expected: self.n_vars, got: coeffs.len() });
            }
            if !coeffs.iter().all(|c| c.is_finite()) || !p.is_finite() || *p < 0.0 {
                return Err(Error::InvalidArgument("non-finite atom".into()));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("atom probabilities sum to {total}")));
        }
        Ok(())
    }
}

/// Worst-case root-mean-square error of a finite-atom linear estimator over
/// the normalized `L_2` ball, via the top eigenvalue of the error quadratic
/// form. The eigenpair is verified to residual 1e-12.
pub fn worst_case_rms_l2(est: &LinearEstimatorSpec) -> Result<f64> {
    est.validate()?;
    let n = est.n_vars;
    let s = 1.0 / n as f64;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (p, coeffs) in &est.atoms {
        let diff: Vec<f64> = coeffs.iter().map(|a| s - a).collect();
        for i in 0..n {
            if diff[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                m[(i, j)] += p * diff[i] * diff[j];
            }
        }
    }
    let eig = m.clone().symmetric_eigen();
    let (mut lambda, mut which) = (f64::NEG_INFINITY, 0);
    for (idx, &l) in eig.eigenvalues.iter().enumerate() {
        if l > lambda {
            lambda = l;
            which = idx;
        }
    }
    let v: DVector<f64> = eig.eigenvectors.column(which).into();
    let residual = (&m * &v - lambda * &v).amax();
    if residual > 1e-12 * (1.0 + lambda.abs()) * n as f64 {
        return Err(Error::InvalidArgument(format!("eigen residual {residual:.3e} too large")));
    }
    Ok((n as f64 * lambda.max(0.0)).sqrt())
}

/// Worst-case deterministic error over the `L_p` ball of the partial-mean
/// algorithm reading the given sampled set.
///
/// The algorithm's coefficients match the mean's weights on sampled
/// coordinates, so the error functional is `(1/N) Σ_{i ∉ sampled} f(i)`;
/// Hölder duality on the unsampled block under the constraint
/// `Σ_U |f(i)|^p <= N` gives `(|U|/N)^{1-1/p}` exactly.
pub fn worst_case_det_lp(sampled: &[usize], n_total: usize, p: f64) -> Result<f64> {
    let mut seen = vec![false; n_total + 1];
    for &i in sampled {
        if i == 0 || i > n_total {
            return Err(Error::InvalidArgument(format!("index {i} outside 1..={n_total}")));
        }
        if seen[i] {
            return Err(Error::InvalidArgument(format!("duplicate index {i}")));
        }
        seen[i] = true;
    }
    let unsampled = n_total - sampled.len();
    if unsampled == 0 {
        return Err(Error::InvalidArgument("full sampling has zero error".into()));
    }
    let frac = unsampled as f64 / n_total as f64;
    Ok(if p.is_infinite() { frac } else { frac.powf(1.0 - 1.0 / p) })
}

/// The optimal randomized subset estimator as an explicit atom list: all
/// `(N choose n)` subsets with equal probability, coefficient
/// `c = mathe_coefficient(n, N)` on subset positions.
pub fn mathe_atoms(n_total: usize, n: usize) -> Result<LinearEstimatorSpec> {
    if n_total > ATOM_ENUMERATION_CAP {
        return Err(Error::InvalidArgument(format!(
            "atom enumeration capped at N <= {ATOM_ENUMERATION_CAP}, got {n_total}"
        )));
    }
    if n >= n_total || n == 0 {
        return Err(Error::InvalidArgument(format!("need 1 <= n < N, got n={n}, N={n_total}")));
    }
    let c = crate::classical::mathe_coefficient(n, n_total)?;
    let count = binomial(n_total, n);
    let prob = 1.0 / count;
    let mut atoms = Vec::with_capacity(count as usize);
    let mut subset: Vec<usize> = (0..n).collect();
    loop {
        let mut coeffs = vec![0.0; n_total];
        for &i in &subset {
            coeffs[i] = c;
        }
        atoms.push((prob, coeffs));
        // Next subset in lexicographic order.
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(LinearEstimatorSpec { n_vars: n_total, atoms });
            }
            k -= 1;
            if subset[k] != k + n_total - n {
                break;
            }
        }
        subset[k] += 1;
        for j in (k + 1)..n {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

/// Error criterion matching the setting: absolute error (deterministic),
/// root-mean-square over trials (randomized), or the empirical 3/4-quantile
/// of absolute errors (quantum).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCriterion {
    Absolute,
    Rms,
    Quantile34,
}

impl ErrorCriterion {
    pub fn label(&self) -> &'static str {
        match self {
            ErrorCriterion::Absolute => "abs",
            ErrorCriterion::Rms => "rms",
            ErrorCriterion::Quantile34 => "q34",
        }
    }
}

/// Empirical worst case over a fooling family: per-member error by the given
/// criterion, maximized over members. Deterministic runners use one trial.
///
/// Seeds derive per (member, trial) from the base stream, so results are
/// independent of scheduling; members evaluate in parallel.
pub fn empirical_worst_case<M: Sync>(
    members: &[M],
    truth: impl Fn(usize, &M) -> f64 + Sync,
    run: impl Fn(usize, &M, &mut RngStream) -> f64 + Sync,
    trials: usize,
    criterion: ErrorCriterion,
    seed_stream: &RngStream,
) -> f64 {
    assert!(trials >= 1);
    let trials = if criterion == ErrorCriterion::Absolute { 1 } else { trials };
    let per_member: Vec<f64> = members
        .par_iter()
        .enumerate()
        .map(|(mi, member)| {
            let t = truth(mi, member);
            let errs: Vec<f64> = (0..trials)
                .map(|trial| {
                    let mut rng = seed_stream.derive(&[mi as u64, trial as u64]);
                    (run(mi, member, &mut rng) - t).abs()
                })
                .collect();
            match criterion {
                ErrorCriterion::Absolute => errs[0],
                ErrorCriterion::Rms => rms(&errs),
                ErrorCriterion::Quantile34 => quantile(&errs, 0.75),
            }
        })
        .collect();
    per_member.into_iter().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{det_partial_mean, eq28_error, theorem1_error};
    use crate::problem::{extreme_sequence, mean_operator, SequenceInput};
    use approx::assert_abs_diff_eq;

    fn det_partial_atom(n_total: usize, n: usize) -> LinearEstimatorSpec {
        let mut coeffs = vec![0.0; n_total];
        for c in coeffs.iter_mut().take(n) {
            *c = 1.0 / n_total as f64;
        }
        LinearEstimatorSpec { n_vars: n_total, atoms: vec![(1.0, coeffs)] }
    }

    #[test]
    fn deterministic_atom_matches_theorem1_at_p2() {
        let got = worst_case_rms_l2(&det_partial_atom(8, 6)).unwrap();
        assert_abs_diff_eq!(got, 0.5, epsilon = 1e-13);
        for n_total in 2..=12 {
            for n in 1..n_total {
                let got = worst_case_rms_l2(&det_partial_atom(n_total, n)).unwrap();
                let expect = theorem1_error(n_total, n, 2.0).unwrap();
                assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_estimator_has_unit_error() {
        let est = LinearEstimatorSpec { n_vars: 5, atoms: vec![(1.0, vec![0.0; 5])] };
        assert_abs_diff_eq!(worst_case_rms_l2(&est).unwrap(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn mathe_optimum_certified_small() {
        // N=2, n=1: two atoms with coefficient 1/2.
        let est = mathe_atoms(2, 1).unwrap();
        assert_eq!(est.atoms.len(), 2);
        assert_eq!(est.atoms[0].1, vec![0.5, 0.0]);
        assert_eq!(est.atoms[1].1, vec![0.0, 0.5]);
        assert_abs_diff_eq!(worst_case_rms_l2(&est).unwrap(), 0.5, epsilon = 1e-12);

        // N=3, n=2: three atoms with c = 1/3.
        let est = mathe_atoms(3, 2).unwrap();
        assert_eq!(est.atoms.len(), 3);
        for (_, coeffs) in &est.atoms {
            let nonzero: Vec<f64> = coeffs.iter().copied().filter(|&c| c != 0.0).collect();
            assert_eq!(nonzero.len(), 2);
            for c in nonzero {
                assert_abs_diff_eq!(c, 1.0 / 3.0, epsilon = 1e-15);
            }
        }

        for n_total in 2..=10usize {
            let est = mathe_atoms(n_total, 1).unwrap();
            let total: f64 = est.atoms.iter().map(|(p, _)| p).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
        assert!(mathe_atoms(15, 3).is_err());
    }

    #[test]
    fn mathe_matches_eq28_modest_sizes() {
        for n_total in [2usize, 5, 9] {
            for n in 1..n_total {
                let got = worst_case_rms_l2(&mathe_atoms(n_total, n).unwrap()).unwrap();
                let expect = eq28_error(n_total, n).unwrap();
                assert_abs_diff_eq!(got, expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn classical_mc_never_beats_the_optimum() {
        // Atom law of i.i.d.-uniform sampling with the 1/n average: all N^n
        // index tuples, coefficient count/n.
        for (n_total, n) in [(4usize, 2usize), (5, 2), (6, 3)] {
            let tuples = (n_total as u64).pow(n as u32);
            let prob = 1.0 / tuples as f64;
            let mut atoms = Vec::with_capacity(tuples as usize);
            for code in 0..tuples {
                let mut coeffs = vec![0.0; n_total];
                let mut rest = code;
                for _ in 0..n {
                    let idx = (rest % n_total as u64) as usize;
                    rest /= n_total as u64;
                    coeffs[idx] += 1.0 / n as f64;
                }
                atoms.push((prob, coeffs));
            }
            let est = LinearEstimatorSpec { n_vars: n_total, atoms };
            let mc = worst_case_rms_l2(&est).unwrap();
            let optimal = eq28_error(n_total, n).unwrap();
            assert!(mc >= optimal - 1e-10, "mc {mc} below optimum {optimal}");
        }
    }

    #[test]
    fn det_lp_examples_and_cross_check() {
        assert_eq!(worst_case_det_lp(&[1, 2], 4, f64::INFINITY).unwrap(), 0.5);
        assert_eq!(worst_case_det_lp(&[1], 10, 1.0).unwrap(), 1.0);
        let via_duality = worst_case_det_lp(&[1, 2, 3, 4, 5, 6], 8, 2.0).unwrap();
        let via_eigen = worst_case_rms_l2(&det_partial_atom(8, 6)).unwrap();
        assert_abs_diff_eq!(via_duality, via_eigen, epsilon = 1e-12);
        assert!(worst_case_det_lp(&[1, 2], 2, 2.0).is_err());
        assert!(worst_case_det_lp(&[1, 1], 3, 2.0).is_err());
    }

    #[test]
    fn empirical_worst_case_deterministic_attainment() {
        let n_total = 10;
        let n = 4;
        let p = 2.0;
        let unsampled: Vec<usize> = (n + 1..=n_total).collect();
        let members = vec![
            extreme_sequence(n_total, p, &unsampled).unwrap(),
            SequenceInput::constant(0.5, n_total).unwrap(),
        ];
        let seed = RngStream::new(1);
        let worst = empirical_worst_case(
            &members,
            |_, f| mean_operator(f),
            |_, f, _| det_partial_mean(f, n).unwrap().value,
            1,
            ErrorCriterion::Absolute,
            &seed,
        );
        let expect = theorem1_error(n_total, n, p).unwrap();
        assert_abs_diff_eq!(worst, expect, epsilon = 1e-12);
    }

    #[test]
    fn empirical_worst_case_monotone_in_family() {
        let n_total = 12;
        let n = 3;
        let small = vec![extreme_sequence(n_total, 2.0, &[4, 5, 6]).unwrap()];
        let mut big = small.clone();
        big.push(extreme_sequence(n_total, 2.0, &(4..=12).collect::<Vec<_>>()).unwrap());
        let seed = RngStream::new(2);
        let run = |_: usize, f: &SequenceInput, rng: &mut RngStream| {
            crate::classical::mathe_estimate(f, n, rng).unwrap().value
        };
        let w_small = empirical_worst_case(
            &small,
            |_, f| mean_operator(f),
            run,
            50,
            ErrorCriterion::Rms,
            &seed,
        );
        let w_big =
            empirical_worst_case(&big, |_, f| mean_operator(f), run, 50, ErrorCriterion::Rms, &seed);
        assert!(w_big >= w_small);
    }

    #[test]
    fn exact_algorithm_on_constant_family_scores_zero() {
        let members = vec![SequenceInput::constant(0.7, 6).unwrap()];
        let seed = RngStream::new(3);
        let worst = empirical_worst_case(
            &members,
            |_, f| mean_operator(f),
            |_, f, rng| crate::classical::classical_mc_mean(f, 5, rng).unwrap().value,
            20,
            ErrorCriterion::Rms,
            &seed,
        );
        assert_abs_diff_eq!(worst, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn bad_atom_probabilities_rejected() {
        let est = LinearEstimatorSpec { n_vars: 2, atoms: vec![(0.6, vec![0.0, 0.0])] };
        assert!(worst_case_rms_l2(&est).is_err());
    }
}
