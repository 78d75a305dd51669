//! Overflow-free accumulation of sums `Σ wᵢ e^{aᵢ}`.

/// Running value of `Σ wᵢ e^{aᵢ}` stored as `sum · e^{shift}`.
///
/// The shift tracks the largest exponent seen so far, so no term is ever
/// evaluated above `e⁰` in magnitude. Weights may have either sign.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledSum {
    shift: f64,
    sum: f64,
}

impl Default for ScaledSum {
    fn default() -> Self {
        Self::new()
    }
}

impl ScaledSum {
    pub fn new() -> Self {
        Self {
            shift: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    pub fn add(&mut self, weight: f64, exponent: f64) {
        if weight == 0.0 {
            return;
        }
        if exponent > self.shift {
            if self.shift.is_finite() {
                self.sum *= (self.shift - exponent).exp();
            } else {
                self.sum = 0.0;
            }
            self.shift = exponent;
        }
        self.sum += weight * (exponent - self.shift).exp();
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn mantissa(&self) -> f64 {
        self.sum
    }

    /// `ln` of the represented value; `−∞` for an empty or zero sum and
    /// NaN for a negative one.
    pub fn ln(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.sum.ln() + self.shift
        }
    }

    /// Plain value; may overflow to infinity.
    pub fn value(&self) -> f64 {
        if self.sum == 0.0 {
            0.0
        } else {
            self.sum * self.shift.exp()
        }
    }

    /// `self / other` computed without forming either value.
    pub fn ratio(&self, other: &ScaledSum) -> f64 {
        if self.sum == 0.0 {
            return 0.0;
        }
        self.sum / other.sum * (self.shift - other.shift).exp()
    }

    pub fn merge(&mut self, other: &ScaledSum) {
        if other.sum != 0.0 {
            self.add(other.sum, other.shift);
        }
    }
}

/// `ln Σ e^{aᵢ}`.
pub fn log_sum_exp(a: &[f64]) -> f64 {
    let mut s = ScaledSum::new();
    for &x in a {
        s.add(1.0, x);
    }
    s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_sum() {
        let mut s = ScaledSum::new();
        let terms = [(0.5, 1.0), (2.0, -3.0), (-0.1, 2.0), (1.0, 0.0)];
        for (w, a) in terms {
            s.add(w, a);
        }
        let naive: f64 = terms.iter().map(|(w, a)| w * f64::exp(*a)).sum();
        assert!((s.value() - naive).abs() < 1e-14 * naive.abs().max(1.0));
    }

    #[test]
    fn survives_huge_exponents() {
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        let mut a = ScaledSum::new();
        let mut b = ScaledSum::new();
        a.add(3.0, 5000.0);
        b.add(1.0, 4999.0);
        assert!((a.ratio(&b) - 3.0 * 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn empty_is_zero() {
        let s = ScaledSum::new();
        assert_eq!(s.value(), 0.0);
        assert_eq!(s.ln(), f64::NEG_INFINITY);
    }
}
