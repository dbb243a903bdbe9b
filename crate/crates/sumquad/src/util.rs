//! Small numeric helpers shared across modules.

/// Compensated (Neumaier) summation accumulator.
///
/// Used wherever means over many terms are formed, so floating-point error
/// never pollutes rate fits.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice.
pub fn comp_sum(xs: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Compensated sum of an iterator of terms.
pub fn comp_sum_iter(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = NeumaierSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Gamma function at integer or half-integer arguments, `gamma(twice / 2)`.
///
/// `twice` is twice the argument, so `gamma_half(7)` is `Γ(7/2)`. Exact
/// recurrences: `Γ(n) = (n-1)!` and `Γ(n + 1/2) = (2n)! √π / (4^n n!)`.
pub fn gamma_half(twice: usize) -> f64 {
    assert!(twice >= 1, "gamma argument must be positive");
    if twice % 2 == 0 {
        let n = twice / 2;
        let mut g = 1.0;
        for i in 1..n {
            g *= i as f64;
        }
        g
    } else {
        // Γ(1/2) = √π, then Γ(x + 1) = x Γ(x).
        let mut g = std::f64::consts::PI.sqrt();
        let mut x: f64 = 0.5;
        while (2.0 * x).round() as usize != twice {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Binomial coefficient as f64; exact for the small instances used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 0..k {
        num *= (n - i) as u128;
        den *= (i + 1) as u128;
    }
    (num / den) as f64
}

/// Empirical q-quantile of the values: smallest `v` such that at least a
/// fraction `q` of the sample is `<= v`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.saturating_sub(1).min(sorted.len() - 1)]
}

/// Median of a sample (odd lengths return the middle element).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Root-mean-square of a sample with compensated accumulation.
pub fn rms(values: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    for &v in values {
        acc.add(v * v);
    }
    (acc.value() / values.len() as f64).sqrt()
}

/// Format a float with 17 significant digits, the round-trip-exact width.
pub fn fmt_f64_17(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn neumaier_beats_naive_on_cancellation() {
        let mut acc = NeumaierSum::new();
        acc.add(1.0);
        acc.add(1e100);
        acc.add(1.0);
        acc.add(-1e100);
        assert_eq!(acc.value(), 2.0);
    }

    #[test]
    fn gamma_small_values() {
        assert_relative_eq!(gamma_half(2), 1.0); // Γ(1)
        assert_relative_eq!(gamma_half(8), 6.0); // Γ(4) = 3!
        assert_relative_eq!(gamma_half(1), std::f64::consts::PI.sqrt());
        // Γ(7/2) = 15√π/8
        assert_relative_eq!(
            gamma_half(7),
            15.0 * std::f64::consts::PI.sqrt() / 8.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(14, 7), 3432.0);
        assert_eq!(binomial(5, 0), 1.0);
        assert_eq!(binomial(5, 6), 0.0);
    }

    #[test]
    fn quantile_and_median() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(quantile(&v, 0.75), 3.0);
        assert_eq!(median(&[5.0, 1.0, 3.0]), 3.0);
    }
}
