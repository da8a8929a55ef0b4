//! Bessel function of the first kind, order zero.

use std::f64::consts::{FRAC_PI_4, PI};

const SERIES_LIMIT: f64 = 12.0;

/// J₀(x). Power series below |x| = 12, Hankel asymptotic expansion above.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        j0_series(x)
    } else {
        j0_asymptotic(x)
    }
}

fn j0_series(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn j0_asymptotic(x: f64) -> f64 {
    // P and Q series of the Hankel expansion, truncated once terms start to grow.
    let z = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut mag = 1.0;
    for n in 1..30 {
        let a = (2 * n - 1) as f64;
        let next = mag * a * a / (n as f64 * z);
        if next > mag {
            break;
        }
        mag = next;
        let sign = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if n % 2 == 0 {
            p += sign * mag;
        } else {
            q -= sign * mag;
        }
    }
    let chi = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}
