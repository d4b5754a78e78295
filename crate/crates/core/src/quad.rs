//! Quadrature kernels shared by the solvers.
//!
//! The workhorse is [`exp_power_integral`], the exponential moment
//! `∫_a^b e^{-r(t-s)} s^p ds` that appears in every modal convolution with a
//! power-law time profile. Interior intervals use composite Gauss–Legendre;
//! intervals touching `s = 0` are mapped to a bounded integrand and handed to
//! tanh–sinh, which tolerates the remaining endpoint non-smoothness.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

const GL_ORDER: usize = 20;
const GL_CHECK_ORDER: usize = 14;

/// Exponential factors below `e^{-CLIP}` are dropped from the integration range.
const CLIP: f64 = 60.0;

struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn legendre_rule(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    GaussRule { nodes, weights }
}

fn rule(n: usize) -> &'static GaussRule {
    static MAIN: OnceLock<GaussRule> = OnceLock::new();
    static CHECK: OnceLock<GaussRule> = OnceLock::new();
    match n {
        GL_ORDER => MAIN.get_or_init(|| legendre_rule(GL_ORDER)),
        GL_CHECK_ORDER => CHECK.get_or_init(|| legendre_rule(GL_CHECK_ORDER)),
        _ => unreachable!("unsupported Gauss-Legendre order {n}"),
    }
}

fn gauss_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, order: usize) -> f64 {
    let r = rule(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    r.nodes
        .iter()
        .zip(&r.weights)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Composite Gauss–Legendre on `[a, b]` with `panels` equal panels.
/// Returns the value and the difference against a lower-order rule.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> (f64, f64) {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut hi = 0.0;
    let mut lo = 0.0;
    for i in 0..panels {
        let pa = a + h * i as f64;
        let pb = if i + 1 == panels { b } else { pa + h };
        hi += gauss_panel(&f, pa, pb, GL_ORDER);
        lo += gauss_panel(&f, pa, pb, GL_CHECK_ORDER);
    }
    (hi, (hi - lo).abs())
}

/// Tanh–sinh quadrature on `[a, b]`.
///
/// The integrand receives `(x, x - a, b - x)`; the two distances are computed
/// directly from the transformation so endpoint singularities can be evaluated
/// without cancellation. Returns the value and the last level-to-level change.
pub fn tanh_sinh<F: Fn(f64, f64, f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> (f64, f64) {
    let len = b - a;
    let eval = |tau: f64| -> f64 {
        let u = FRAC_PI_2 * tau.sinh();
        let cu = u.cosh();
        let w = 0.5 * len * FRAC_PI_2 * tau.cosh() / (cu * cu);
        if !w.is_finite() || w == 0.0 {
            return 0.0;
        }
        let da = len / (1.0 + (-2.0 * u).exp());
        let db = len / (1.0 + (2.0 * u).exp());
        if da <= 0.0 || db <= 0.0 {
            return 0.0;
        }
        let x = if da < db { a + da } else { b - db };
        let v = w * f(x, da, db);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    const TAU_MAX: f64 = 6.5;
    let mut h = 1.0;
    let mut sum = eval(0.0);
    let mut k = 1.0;
    while k * h <= TAU_MAX {
        sum += eval(k * h) + eval(-k * h);
        k += 1.0;
    }
    let mut estimate = sum * h;
    let mut change = f64::INFINITY;
    for _level in 0..12 {
        h *= 0.5;
        let mut add = 0.0;
        let mut j = 1.0;
        while j * h <= TAU_MAX {
            add += eval(j * h) + eval(-j * h);
            j += 2.0;
        }
        sum += add;
        let next = sum * h;
        change = (next - estimate).abs();
        estimate = next;
        if change <= rel_tol * estimate.abs() || change == 0.0 {
            break;
        }
    }
    (estimate, change)
}

/// `∫_a^b e^{-rate (t - s)} s^p ds` for `0 ≤ a < b ≤ t`, `rate ≥ 0`, `p > -1`.
pub fn exp_power_integral(rate: f64, p: f64, a: f64, b: f64, t: f64) -> f64 {
    exp_power_integral_est(rate, p, a, b, t).0
}

/// As [`exp_power_integral`], also returning an error estimate.
pub fn exp_power_integral_est(rate: f64, p: f64, a: f64, b: f64, t: f64) -> (f64, f64) {
    debug_assert!(a >= 0.0 && b >= a && t >= b, "bad interval [{a}, {b}] with t = {t}");
    debug_assert!(p > -1.0);
    if b <= a {
        return (0.0, 0.0);
    }
    if p == 0.0 {
        return (exp_constant_integral(rate, a, b, t), 0.0);
    }
    // Region where the kernel is below e^{-CLIP} relative to its value at b.
    let lower = if rate > 0.0 { a.max(b - CLIP / rate) } else { a };
    if lower > 0.0 {
        return exp_power_interior(rate, p, lower, b, t);
    }
    // s = b y^{1/(p+1)} turns s^p ds into a bounded measure.
    let gamma = 1.0 / (p + 1.0);
    let scale = b.powf(p + 1.0) / (p + 1.0);
    let (v, e) = tanh_sinh(
        |y, _, _| (-rate * (t - b * y.powf(gamma))).exp(),
        0.0,
        1.0,
        1e-15,
    );
    (scale * v, scale * e)
}

fn exp_power_interior(rate: f64, p: f64, a: f64, b: f64, t: f64) -> (f64, f64) {
    let f = |s: f64| (-rate * (t - s)).exp() * s.powf(p);
    let mut total = 0.0;
    let mut err = 0.0;
    // Geometric panels keep the s^p singularity at 0 well separated.
    let mut lo = a;
    while lo < b {
        let hi = if b > 2.0 * lo { 2.0 * lo } else { b };
        let stiff = (rate * (hi - lo) / 4.0).ceil() as usize;
        let (v, e) = gauss_legendre(f, lo, hi, stiff.clamp(1, 64));
        total += v;
        err += e;
        lo = hi;
    }
    (total, err)
}

/// `∫_a^b e^{-rate (t - s)} ds` in closed form.
pub fn exp_constant_integral(rate: f64, a: f64, b: f64, t: f64) -> f64 {
    let len = b - a;
    if rate == 0.0 {
        return len;
    }
    (-rate * (t - b)).exp() * (-(-rate * len).exp_m1()) / rate
}

/// `(1 - e^{-z}) / z`, accurate near zero.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0
    } else {
        -(-z).exp_m1() / z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent check: composite Simpson on a fine uniform mesh.
    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let n = if n % 2 == 1 { n + 1 } else { n };
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + h * i as f64;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (v, _) = gauss_legendre(|x| x.powi(7) - 3.0 * x.powi(4) + 1.0, -1.0, 2.0, 1);
        let exact = (2f64.powi(8) - 1.0) / 8.0 - 3.0 * (2f64.powi(5) + 1.0) / 5.0 + 3.0;
        assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let (v, _) = tanh_sinh(|_, da, _| da.powf(-0.5), 0.0, 1.0, 1e-15);
        assert!((v - 2.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn exp_power_matches_simpson_away_from_zero() {
        let r = 3.0;
        let (a, b, t) = (0.25, 0.75, 1.0);
        let p = -0.4;
        let v = exp_power_integral(r, p, a, b, t);
        let o = simpson(|s| (-r * (t - s)).exp() * s.powf(p), a, b, 20_000);
        assert!((v - o).abs() < 1e-12 * o.abs().max(1.0), "{v} vs {o}");
    }

    #[test]
    fn exp_power_from_zero_matches_closed_form_at_zero_rate() {
        for &p in &[-0.8, -0.4, -0.2, 0.3, 1.5] {
            let v = exp_power_integral(0.0, p, 0.0, 2.0, 2.0);
            let exact = 2f64.powf(p + 1.0) / (p + 1.0);
            assert!((v - exact).abs() < 1e-13 * exact, "p={p}: {v} vs {exact}");
        }
    }

    #[test]
    fn exp_power_from_zero_singular_against_substituted_simpson() {
        // ∫_0^1 e^{-2(1-s)} s^{-0.2} ds, substitute s = y^{1/0.8}
        let p: f64 = -0.2;
        let g = 1.0 / (1.0 + p);
        let o = simpson(|y| (-2.0 * (1.0 - y.powf(g))).exp(), 0.0, 1.0, 200_000) * g;
        let v = exp_power_integral(2.0, p, 0.0, 1.0, 1.0);
        assert!((v - o).abs() < 1e-9, "{v} vs {o}");
    }

    #[test]
    fn stiff_rate_is_clipped_without_losing_accuracy() {
        let r = 1e5;
        let v = exp_power_integral(r, -0.5, 0.0, 1.0, 1.0);
        // Dominated by s near 1: ≈ 1/r (1 + p/r + ...) up to O(r^-3).
        let approx = 1.0 / r * (1.0 + 0.5 / r);
        assert!((v - approx).abs() < 1e-12 * approx * 1e3, "{v} vs {approx}");
    }

    #[test]
    fn constant_integral_closed_form() {
        let v = exp_constant_integral(1.0, 0.0, 1.0, 1.0);
        assert!((v - (1.0 - (-1f64).exp())).abs() < 1e-15);
        assert_eq!(exp_constant_integral(0.0, 0.5, 2.0, 3.0), 1.5);
    }
}
