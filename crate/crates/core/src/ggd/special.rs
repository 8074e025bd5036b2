//! Gamma-family special functions on the positive real axis.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma needs a positive argument, got {x}");
    if x < 0.5 {
        // Reflection keeps the series in its accurate range.
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

/// Digamma `ψ(x)` for `x > 0`: upward recurrence then the asymptotic series.
pub fn digamma(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    while x < 20.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv2
        * (1.0 / 12.0
            - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    acc + x.ln() - 0.5 * inv - series
}

/// Trigamma `ψ'(x)` for `x > 0`.
pub fn trigamma(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    while x < 20.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        + 0.5 * inv2
        + inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0))));
    acc + series
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn gamma_exact_values() {
        let mut fact = 1.0;
        for n in 1..25 {
            assert!(rel(gamma(n as f64), fact) < 1e-13, "Γ({n})");
            fact *= n as f64;
        }
        assert!(rel(gamma(0.5), PI.sqrt()) < 1e-14);
        assert!(rel(gamma(1.5), 0.5 * PI.sqrt()) < 1e-14);
        assert!(rel(gamma(0.1), 9.513_507_698_668_732) < 1e-13);
    }

    #[test]
    fn ln_gamma_large_argument() {
        // ln Γ(220) from Stirling with correction terms.
        let x: f64 = 220.0;
        let stirling = (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x.powi(3));
        assert!(rel(ln_gamma(x), stirling) < 1e-13);
    }

    #[test]
    fn digamma_known_values() {
        let e = digamma(1.0) + EULER_GAMMA;
        assert!(e.abs() < 1e-14, "{e:e}");
        assert!((digamma(0.5) + EULER_GAMMA + 2.0 * 2f64.ln()).abs() < 1e-13);
        // Recurrence ψ(x+1) = ψ(x) + 1/x
        for x in [0.05, 0.3, 2.5, 17.0] {
            assert!((digamma(x + 1.0) - digamma(x) - 1.0 / x).abs() < 1e-12);
        }
    }

    #[test]
    fn trigamma_known_values() {
        let e = trigamma(1.0) - PI * PI / 6.0;
        assert!(e.abs() < 1e-13, "{e:e}");
        assert!((trigamma(0.5) - PI * PI / 2.0).abs() < 1e-12);
        // Matches a central difference of digamma.
        for x in [0.2, 1.3, 7.0, 40.0] {
            let h = 1e-5 * x;
            let fd = (digamma(x + h) - digamma(x - h)) / (2.0 * h);
            assert!(rel(trigamma(x), fd) < 1e-7);
        }
    }
}
