//! Special functions: exponentially scaled modified Bessel functions and Gamma.

#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

/// Below this argument `e^{-x} I_0(x)` is summed from its power series; the
/// terms are all positive so the sum is accurate to rounding. Above it the
/// asymptotic expansion is used, whose smallest term is below `e^{-2x}`.
const I0_SERIES_LIMIT: f64 = 30.0;

/// `e^{-x} I_0(x)` for `x >= 0`.
pub fn bessel_i0e(x: f64) -> f64 {
    let x = x.abs();
    if x <= I0_SERIES_LIMIT {
        let y = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= y / (k * k);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // c_k = ((2k-1)!!)^2 / (k! 8^k x^k)
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            let next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * x);
            if next < 1e-17 * sum || next > term {
                break;
            }
            term = next;
            sum += term;
            k += 1.0;
        }
        sum / (2.0 * core::f64::consts::PI * x).sqrt()
    }
}

/// `e^{-x} I_n(x)` for integer `n` and `x >= 0`.
///
/// Miller's backward recurrence normalised by `e^x = I_0 + 2 Σ_k I_k`; the
/// large-argument asymptotic series is used once `x` dominates `n²`.
pub fn bessel_ine(n: u32, x: f64) -> f64 {
    let x = x.abs();
    if n == 0 {
        return bessel_i0e(x);
    }
    if x == 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    if x > 50.0 + 2.0 * nf * nf {
        let mu = 4.0 * nf * nf;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            let odd = 2.0 * k - 1.0;
            let next = -term * (mu - odd * odd) / (8.0 * k * x);
            if next.abs() < 1e-17 * sum.abs() || next.abs() > term.abs() {
                break;
            }
            term = next;
            sum += term;
            k += 1.0;
        }
        return sum / (2.0 * core::f64::consts::PI * x).sqrt();
    }
    let start = (n as usize).max(x as usize) + 20 + (40.0 * (nf + x + 1.0)).sqrt() as usize;
    let start = start + (start & 1);
    let inv_x = 2.0 / x;
    let mut above = 0.0;
    let mut current = 1e-300;
    let mut wanted = 0.0;
    // weighted sum I_0 + 2 Σ_{k>=1} I_k, accumulated in the same scaling
    let mut total = 0.0;
    for k in (1..=start).rev() {
        let below = above + (k as f64) * inv_x * current;
        above = current;
        current = below;
        if k - 1 == n as usize {
            wanted = current;
        }
        total += if k - 1 == 0 { current } else { 2.0 * current };
        if current > 1e250 {
            above *= 1e-250;
            current *= 1e-250;
            wanted *= 1e-250;
            total *= 1e-250;
        }
    }
    wanted / total
}

/// Gamma function.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Natural logarithm of `|Γ(x)|`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    // e^{-x} I_n(x) as (1/π)∫_0^π e^{x(cos θ - 1)} cos(nθ) dθ by a fine trapezoid
    // rule, which is spectrally accurate for this periodic integrand.
    fn integral_form(n: u32, x: f64) -> f64 {
        let steps = 4000;
        let h = core::f64::consts::PI / steps as f64;
        let mut s = 0.0;
        for i in 0..=steps {
            let t = i as f64 * h;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            s += w * (x * (t.cos() - 1.0)).exp() * (n as f64 * t).cos();
        }
        s * h / core::f64::consts::PI
    }

    #[test]
    fn i0e_matches_integral_representation() {
        for &x in &[0.0, 0.3, 1.0, 5.0, 8.0, 29.9, 30.1, 45.0, 120.0, 900.0] {
            let a = bessel_i0e(x);
            let b = integral_form(0, x);
            assert!(
                (a - b).abs() <= 1e-14 * b.max(1e-300) + 1e-16,
                "x={x}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn ine_matches_integral_representation() {
        for n in [1u32, 2, 3, 5, 10] {
            for &x in &[0.01, 0.5, 2.0, 7.5, 20.0, 60.0, 300.0, 2000.0] {
                let a = bessel_ine(n, x);
                let b = integral_form(n, x);
                assert!(
                    (a - b).abs() <= 1e-12 * b.abs() + 1e-15,
                    "n={n} x={x}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn gamma_recurrence() {
        assert!((gamma(2.5) / gamma(1.5) - 1.5).abs() < 1e-14);
        assert!((gamma(0.5) - core::f64::consts::PI.sqrt()).abs() < 1e-14);
    }
}
