//! Closed-form Green functions of the built-in surfaces, used as references
//! for the discrete solver.
//!
//! Unit flat torus: Ewald splitting of the heat-kernel representation
//! `G = ∫₀^∞ (H_s − 1) ds` at `s₀`, with the short-time part summed over
//! lattice images via the exponential integral and the long-time part
//! summed over Fourier modes. Round unit sphere:
//! `G = −(1/4π)(log(1 − cos θ) − log 2 + 1)`.

use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SPLIT: f64 = 0.05;
const IMAGES: i64 = 6;

/// Exponential integral `E₁(x)` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 needs x > 0");
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < 1e-18 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        // modified Lentz on 1/(x+1− 1²/(x+3− 2²/(x+5− …)))
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..300 {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let delta = c * d;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

fn fourier_tail(x: [f64; 2]) -> f64 {
    let mut s = 0.0;
    for k1 in -IMAGES..=IMAGES {
        for k2 in -IMAGES..=IMAGES {
            if k1 == 0 && k2 == 0 {
                continue;
            }
            let k2n = (k1 * k1 + k2 * k2) as f64;
            let phase = 2.0 * PI * (k1 as f64 * x[0] + k2 as f64 * x[1]);
            s += phase.cos() * (-4.0 * PI * PI * k2n * SPLIT).exp() / (4.0 * PI * PI * k2n);
        }
    }
    s
}

fn image_sum(x: [f64; 2], skip_origin: bool) -> f64 {
    let mut s = 0.0;
    for n1 in -IMAGES..=IMAGES {
        for n2 in -IMAGES..=IMAGES {
            if skip_origin && n1 == 0 && n2 == 0 {
                continue;
            }
            let r2 = (x[0] - n1 as f64).powi(2) + (x[1] - n2 as f64).powi(2);
            s += exp_integral_e1(r2 / (4.0 * SPLIT)) / (4.0 * PI);
        }
    }
    s
}

/// Mean-zero Green function of the unit flat torus at displacement `x ≠ 0`.
pub fn torus_green(x: [f64; 2]) -> f64 {
    let x = [x[0] - x[0].round(), x[1] - x[1].round()];
    image_sum(x, false) - SPLIT + fourier_tail(x)
}

/// Robin constant of the unit flat torus (the same at every point).
pub fn torus_robin_constant() -> f64 {
    ((4.0 * SPLIT).ln() - EULER_GAMMA) / (4.0 * PI) - SPLIT + image_sum([0.0, 0.0], true) + fourier_tail([0.0, 0.0])
}

/// Mean-zero Green function of the round unit sphere at geodesic angle `θ`.
pub fn sphere_green(theta: f64) -> f64 {
    -((1.0 - theta.cos()).ln() - 2f64.ln() + 1.0) / (4.0 * PI)
}

/// Robin constant of the round unit sphere in the stereographic chart
/// `|y| = 2 tan(θ/2)`.
pub fn sphere_robin_constant() -> f64 {
    (2.0 * 2f64.ln() - 1.0) / (4.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e1_reference_values() {
        // E1(1), E1(0.1), E1(5)
        assert!((exp_integral_e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-14);
        assert!((exp_integral_e1(0.1) - 1.822_923_958_419_390_7).abs() < 1e-13);
        assert!((exp_integral_e1(5.0) - 1.148_295_591_275_325_8e-3).abs() < 1e-16);
        let below = exp_integral_e1(1.0 - 1e-12);
        let above = exp_integral_e1(1.0 + 1e-12);
        assert!((below - above).abs() < 1e-11);
    }

    #[test]
    fn robin_constant_is_regular_limit() {
        let r = 1e-4;
        let near = torus_green([r, 0.0]) + r.ln() / (2.0 * PI);
        assert!((near - torus_robin_constant()).abs() < 1e-7);
    }

    #[test]
    fn torus_symmetries() {
        let a = torus_green([0.2, 0.1]);
        assert!((a - torus_green([0.1, 0.2])).abs() < 1e-14);
        assert!((a - torus_green([-0.2, 0.1])).abs() < 1e-14);
        assert!((a - torus_green([1.2, -0.9])).abs() < 1e-13);
    }

    #[test]
    fn sphere_mean_zero() {
        // ∫ G dA = 2π ∫₀^π G(θ) sin θ dθ, midpoint rule in t = 1 − cos θ
        let n = 200_000;
        let h = 2.0 / n as f64;
        let s: f64 = (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) * h;
                sphere_green((1.0 - t).acos()) * h
            })
            .sum();
        assert!((2.0 * PI * s).abs() < 1e-5, "{s}");
    }
}
