//! Positive diagonal sectorial operators on a weighted sequence space.
//!
//! An operator is stored as its ascending eigenvalue sequence `λ_k > 0` together
//! with the norm weights `w_k > 0` of the ambient space, `‖v‖² = Σ w_k v_k²`.
//! Every function of the operator acts mode by mode, so semigroups, fractional
//! powers and resolvents are exact up to floating point. Because the operator is
//! diagonal, operator norms of `f(A)` reduce to `max_k |f(λ_k)|` regardless of
//! the weights.

use std::f64::consts::{E, PI};
use std::num::NonZeroU32;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{check_len, Error, Result};

/// Slack allowed when certifying observed smoothing constants.
pub const BOUND_SLACK: f64 = 1e-12;

/// Default number of log-spaced magnitudes sampled per ray.
pub const DEFAULT_RAY_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralOperator {
    eigenvalues: Vec<f64>,
    weights: Vec<f64>,
}

impl SpectralOperator {
    pub fn new(eigenvalues: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::input("operator needs at least one eigenvalue"));
        }
        check_len(eigenvalues.len(), weights.len())?;
        if let Some((i, l)) = eigenvalues
            .iter()
            .enumerate()
            .find(|(_, l)| !(l.is_finite() && **l > 0.0))
        {
            return Err(Error::input(format!("eigenvalue #{i} = {l} is not a positive real")));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::input("eigenvalues must be sorted ascending"));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::input(format!("weight #{i} = {w} is not a positive real")));
        }
        Ok(Self {
            eigenvalues,
            weights,
        })
    }

    pub fn with_unit_weights(eigenvalues: Vec<f64>) -> Result<Self> {
        let n = eigenvalues.len();
        Self::new(eigenvalues, vec![1.0; n])
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn smallest(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn largest(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Weighted norm `(Σ w_k v_k²)^{1/2}`.
    pub fn norm(&self, v: &[f64]) -> f64 {
        weighted_norm(&self.weights, v)
    }

    /// `(A^θ e^{-tA} v)_k = λ_k^θ e^{-λ_k t} v_k`.
    pub fn semigroup_apply(&self, t: f64, theta: f64, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), v.len())?;
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::input(format!("time must be finite and non-negative, got {t}")));
        }
        if !(theta >= 0.0) {
            return Err(Error::input(format!("smoothing exponent must be non-negative, got {theta}")));
        }
        if theta > 0.0 && t == 0.0 {
            return Err(Error::Singularity(format!(
                "A^{theta} S(t) is unbounded at t = 0"
            )));
        }
        Ok(self
            .eigenvalues
            .iter()
            .zip(v)
            .map(|(&l, &x)| semigroup_multiplier(l, t, theta) * x)
            .collect())
    }

    /// `(A^θ v)_k = λ_k^θ v_k` for any real `θ`.
    pub fn frac_power_apply(&self, theta: f64, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), v.len())?;
        Ok(self
            .eigenvalues
            .iter()
            .zip(v)
            .map(|(&l, &x)| power(l, theta) * x)
            .collect())
    }

    /// `‖A^θ‖ = max_k λ_k^θ`.
    pub fn frac_power_norm(&self, theta: f64) -> f64 {
        power(self.smallest(), theta).max(power(self.largest(), theta))
    }

    /// `((λ - A)^{-1} v)_k = v_k / (λ - λ_k)`.
    pub fn resolvent_apply(&self, lambda: Complex64, v: &[f64]) -> Result<Vec<Complex64>> {
        check_len(self.dim(), v.len())?;
        self.check_resolvent_point(lambda)?;
        Ok(self
            .eigenvalues
            .iter()
            .zip(v)
            .map(|(&l, &x)| Complex64::new(x, 0.0) / (lambda - l))
            .collect())
    }

    /// `‖(λ - A)^{-1}‖ = max_k 1/|λ - λ_k|`.
    pub fn resolvent_norm(&self, lambda: Complex64) -> Result<f64> {
        self.check_resolvent_point(lambda)?;
        Ok(self
            .eigenvalues
            .iter()
            .map(|&l| 1.0 / (lambda - l).norm())
            .fold(0.0, f64::max))
    }

    fn check_resolvent_point(&self, lambda: Complex64) -> Result<()> {
        if !(lambda.re.is_finite() && lambda.im.is_finite()) {
            return Err(Error::input("resolvent point must be finite"));
        }
        match self
            .eigenvalues
            .iter()
            .position(|&l| lambda.im == 0.0 && lambda.re == l)
        {
            Some(index) => Err(Error::SpectrumHit {
                index,
                value: self.eigenvalues[index],
            }),
            None => Ok(()),
        }
    }

    /// Estimates the sectorial constant `M_ϖ = sup |λ| ‖(λ - A)^{-1}‖` over the
    /// complement of the sector `|arg λ| < ϖ`.
    ///
    /// Samples the rays `arg λ = ±ϖ` and the negative real axis at log-spaced
    /// magnitudes in `[λ_1/100, 100 λ_N]`.
    pub fn verify_sectorial(&self, angle: f64, ray_samples: usize) -> Result<SectorReport> {
        self.sector_scan(angle, ray_samples, &[angle, -angle, PI])
    }

    /// As [`verify_sectorial`](Self::verify_sectorial), restricted to the given ray angles.
    pub fn sector_scan(&self, angle: f64, ray_samples: usize, rays: &[f64]) -> Result<SectorReport> {
        if !(angle > 0.0 && angle < PI / 2.0) {
            return Err(Error::input(format!("sector angle must lie in (0, π/2), got {angle}")));
        }
        if ray_samples < 8 {
            return Err(Error::input(format!("need at least 8 samples per ray, got {ray_samples}")));
        }
        let lo = (self.smallest() / 100.0).ln();
        let hi = (100.0 * self.largest()).ln();
        let mut m = 0.0f64;
        let mut used = 0;
        for &arg in rays {
            let dir = Complex64::from_polar(1.0, arg);
            for i in 0..ray_samples {
                let r = (lo + (hi - lo) * i as f64 / (ray_samples - 1) as f64).exp();
                let nrm = self.resolvent_norm(dir * r)?;
                m = m.max(r * nrm);
                used += 1;
            }
        }
        Ok(SectorReport {
            angle,
            m_estimate: m,
            sharp_bound: 1.0 / angle.sin(),
            samples_used: used,
            pass: m.is_finite(),
        })
    }

    /// Observed `t^θ ‖A^θ S(t)‖` on `grid` against the certified `(θ/e)^θ`.
    pub fn semigroup_bound_profile(&self, theta: f64, grid: &[f64]) -> Result<BoundProfile> {
        if grid.is_empty() {
            return Err(Error::input("bound profile needs a non-empty grid"));
        }
        if !(theta >= 0.0) {
            return Err(Error::input(format!("θ must be non-negative, got {theta}")));
        }
        if grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input("grid must be positive and strictly increasing"));
        }
        let observed: Vec<f64> = grid
            .iter()
            .map(|&t| {
                self.eigenvalues
                    .iter()
                    .map(|&l| scaled_smoothing(l * t, theta))
                    .fold(0.0, f64::max)
            })
            .collect();
        let certified_bound = smoothing_constant(theta);
        let max_observed = observed.iter().copied().fold(0.0, f64::max);
        Ok(BoundProfile {
            theta,
            grid: grid.to_vec(),
            observed,
            certified_bound,
            max_observed,
            violation: max_observed > certified_bound + BOUND_SLACK,
        })
    }

    /// Yosida approximation `A_n = A (1 + A/n)^{-1}`, eigenvalues `λ/(1 + λ/n)`.
    pub fn yosida(&self, n: NonZeroU32) -> SpectralOperator {
        let n = n.get() as f64;
        SpectralOperator {
            eigenvalues: self.eigenvalues.iter().map(|&l| l / (1.0 + l / n)).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Distance between `A_n^ν S_n(t)` and `A^ν S(t)` on `grid`, and between the
    /// inverse powers `A_n^{-ν}` and `A^{-ν}`.
    pub fn yosida_gap(&self, n: NonZeroU32, nu: f64, grid: &[f64]) -> Result<YosidaReport> {
        if !(nu >= 0.0) {
            return Err(Error::input(format!("ν must be non-negative, got {nu}")));
        }
        if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::input("Yosida grid must be non-empty and positive"));
        }
        let approx = self.yosida(n);
        let mut gap = 0.0f64;
        let mut sup_scaled = 0.0f64;
        for &t in grid {
            for (&l, &ln) in self.eigenvalues.iter().zip(&approx.eigenvalues) {
                let exact = semigroup_multiplier(l, t, nu);
                let yos = semigroup_multiplier(ln, t, nu);
                gap = gap.max((yos - exact).abs());
                let scaled = if nu > 0.0 { t.powf(nu) * yos } else { yos };
                sup_scaled = sup_scaled.max(scaled);
            }
        }
        let inv_gap = self
            .eigenvalues
            .iter()
            .zip(&approx.eigenvalues)
            .map(|(&l, &ln)| (power(ln, -nu) - power(l, -nu)).abs())
            .fold(0.0, f64::max);
        Ok(YosidaReport {
            n: n.get(),
            nu,
            gap,
            inv_gap,
            uniform_constants: sup_scaled.max(approx.frac_power_norm(-nu)),
        })
    }
}

pub fn weighted_norm(weights: &[f64], v: &[f64]) -> f64 {
    weights
        .iter()
        .zip(v)
        .map(|(w, x)| w * x * x)
        .sum::<f64>()
        .sqrt()
}

fn power(l: f64, theta: f64) -> f64 {
    if theta == 0.0 {
        1.0
    } else {
        l.powf(theta)
    }
}

/// `λ^θ e^{-λ t}`.
pub fn semigroup_multiplier(l: f64, t: f64, theta: f64) -> f64 {
    power(l, theta) * (-l * t).exp()
}

/// `x^θ e^{-x}` with `0^0 = 1`.
fn scaled_smoothing(x: f64, theta: f64) -> f64 {
    if theta == 0.0 {
        (-x).exp()
    } else if x == 0.0 {
        0.0
    } else {
        (theta * x.ln() - x).exp()
    }
}

/// Sharp smoothing constant `sup_{x>0} x^θ e^{-x} = (θ/e)^θ` of the positive
/// diagonal class, with `0^0 = 1`.
pub fn smoothing_constant(theta: f64) -> f64 {
    if theta == 0.0 {
        1.0
    } else {
        (theta / E).powf(theta)
    }
}

/// `n` log-spaced points in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if n == 1 {
                lo
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorReport {
    pub angle: f64,
    pub m_estimate: f64,
    /// `1/sin ϖ`, the supremum over the whole complement for this operator class.
    pub sharp_bound: f64,
    pub samples_used: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundProfile {
    pub theta: f64,
    pub grid: Vec<f64>,
    pub observed: Vec<f64>,
    pub certified_bound: f64,
    pub max_observed: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YosidaReport {
    pub n: u32,
    pub nu: f64,
    pub gap: f64,
    pub inv_gap: f64,
    pub uniform_constants: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ladder(n: usize) -> SpectralOperator {
        SpectralOperator::with_unit_weights((1..=n).map(|k| k as f64).collect()).unwrap()
    }

    fn nz(n: u32) -> NonZeroU32 {
        NonZeroU32::new(n).unwrap()
    }

    // Taylor series of e^{-t}, independent of f64::exp.
    fn exp_neg_series(t: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            term *= -t / k as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn construction_rejects_bad_spectra() {
        assert!(SpectralOperator::with_unit_weights(vec![]).is_err());
        assert!(SpectralOperator::with_unit_weights(vec![0.0, 1.0]).is_err());
        assert!(SpectralOperator::with_unit_weights(vec![2.0, 1.0]).is_err());
        assert!(SpectralOperator::new(vec![1.0, 2.0], vec![1.0, -1.0]).is_err());
        assert!(matches!(
            SpectralOperator::new(vec![1.0], vec![1.0, 1.0]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn semigroup_identity_at_zero() {
        let op = ladder(1);
        assert_eq!(op.semigroup_apply(0.0, 0.0, &[3.5]).unwrap(), vec![3.5]);
    }

    #[test]
    fn semigroup_scalar_against_series() {
        let op = ladder(1);
        let v = op.semigroup_apply(1.0, 1.0, &[1.0]).unwrap();
        assert_relative_eq!(v[0], exp_neg_series(1.0), max_relative = 1e-14);
        assert_relative_eq!(v[0], 0.367879, epsilon = 1e-6);
    }

    #[test]
    fn semigroup_errors() {
        let op = ladder(2);
        assert!(matches!(
            op.semigroup_apply(0.0, 0.5, &[1.0, 1.0]),
            Err(Error::Singularity(_))
        ));
        assert!(matches!(
            op.semigroup_apply(1.0, 0.5, &[1.0]),
            Err(Error::Shape { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn smoothing_sup_over_dyadic_grid_is_inverse_e() {
        let op = ladder(50);
        let grid: Vec<f64> = (-12..=8).map(|j| 2f64.powi(j)).collect();
        // Brute force: every mode, every node.
        let mut brute = 0.0f64;
        for &t in &grid {
            for &l in op.eigenvalues() {
                brute = brute.max(t * l * (-t * l).exp());
            }
        }
        let prof = op.semigroup_bound_profile(1.0, &grid).unwrap();
        assert_relative_eq!(prof.max_observed, brute, max_relative = 1e-14);
        // t λ = 1 is hit exactly (t = 1, λ = 1).
        assert_relative_eq!(brute, (-1f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn frac_power_examples() {
        let op = ladder(1);
        assert_eq!(op.frac_power_apply(0.0, &[2.5]).unwrap(), vec![2.5]);
        let op4 = SpectralOperator::with_unit_weights(vec![4.0]).unwrap();
        assert_eq!(op4.frac_power_apply(0.5, &[1.0]).unwrap(), vec![2.0]);
        let op50 = ladder(50);
        // ‖A^{-θ}‖ with θ = -0.3, i.e. A^{0.3}: max over the diagonal.
        let brute = op50.eigenvalues().iter().map(|l| l.powf(-0.3)).fold(0.0, f64::max);
        assert_eq!(op50.frac_power_norm(-0.3), brute);
        assert_eq!(brute, 1.0);
    }

    #[test]
    fn resolvent_examples() {
        let op = ladder(1);
        let z = Complex64::new(-1.0, 0.0);
        let r = op.resolvent_apply(z, &[1.0]).unwrap();
        assert_eq!(r[0], Complex64::new(-0.5, 0.0));
        assert_eq!(z.norm() * op.resolvent_norm(z).unwrap(), 0.5);

        let op2 = ladder(2);
        let z = Complex64::new(0.0, 3.0);
        let brute = [1.0, 2.0]
            .iter()
            .map(|l| 1.0 / (z - *l).norm())
            .fold(0.0, f64::max);
        assert_relative_eq!(op2.resolvent_norm(z).unwrap(), brute, max_relative = 1e-15);
        assert_relative_eq!(brute, 1.0 / 10f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn resolvent_on_eigenvalue_is_rejected() {
        let op = ladder(3);
        assert!(matches!(
            op.resolvent_apply(Complex64::new(2.0, 0.0), &[1.0, 1.0, 1.0]),
            Err(Error::SpectrumHit { index: 1, .. })
        ));
    }

    #[test]
    fn sector_constant_single_mode() {
        let op = ladder(1);
        // Dense brute-force ray scan converges to 1/sin(π/4).
        let dense = op.verify_sectorial(PI / 4.0, 20_000).unwrap();
        assert_relative_eq!(dense.m_estimate, 2f64.sqrt(), max_relative = 1e-6);
        let default = op.verify_sectorial(PI / 4.0, DEFAULT_RAY_SAMPLES).unwrap();
        assert!(default.m_estimate <= dense.sharp_bound + 1e-12);
        assert!(default.pass);

        // Negative real axis only: |λ|/(|λ| + 1) < 1, approaching 1.
        let neg = op.sector_scan(PI / 4.0, 64, &[PI]).unwrap();
        assert!(neg.m_estimate < 1.0);
        assert_relative_eq!(neg.m_estimate, 100.0 / 101.0, max_relative = 1e-12);
    }

    #[test]
    fn sector_constant_shrinks_as_rays_move_away() {
        let op = ladder(20);
        let a = op.verify_sectorial(0.3, 64).unwrap();
        let b = op.verify_sectorial(0.9, 64).unwrap();
        assert!(b.m_estimate <= a.m_estimate);
    }

    #[test]
    fn certified_constants() {
        assert_eq!(smoothing_constant(0.0), 1.0);
        assert_relative_eq!(smoothing_constant(1.0), 0.367879, epsilon = 1e-6);
        assert_relative_eq!(smoothing_constant(0.5), 0.428882, epsilon = 1e-6);
        // Brute-force scan of x^θ e^{-x} on (0, 20].
        for &theta in &[0.25, 0.5, 1.0] {
            let scan = (1..=2_000_000)
                .map(|i| {
                    let x = i as f64 * 1e-5;
                    x.powf(theta) * (-x).exp()
                })
                .fold(0.0, f64::max);
            assert_relative_eq!(scan, smoothing_constant(theta), max_relative = 1e-9);
        }
    }

    #[test]
    fn zero_theta_profile_is_bounded_by_one() {
        let op = ladder(10);
        let grid = log_grid(1e-6, 10.0, 64);
        let p = op.semigroup_bound_profile(0.0, &grid).unwrap();
        assert_eq!(p.certified_bound, 1.0);
        assert!(p.observed.iter().all(|&o| o <= 1.0));
        // ‖S(t)‖ = e^{-λ_1 t} → 1 as t → 0.
        assert_relative_eq!(p.observed[0], (-1e-6f64).exp(), max_relative = 1e-15);
        assert!(!p.violation);
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(matches!(
            ladder(2).semigroup_bound_profile(1.0, &[]),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn yosida_scalar_examples() {
        let one = ladder(1);
        assert_eq!(one.yosida(nz(1)).eigenvalues(), &[0.5]);
        let hundred = SpectralOperator::with_unit_weights(vec![100.0]).unwrap();
        assert_relative_eq!(hundred.yosida(nz(1)).eigenvalues()[0], 100.0 / 101.0, max_relative = 1e-15);
        let mut prev = 0.0;
        for n in [1, 2, 4, 8, 1 << 20] {
            let l = one.yosida(nz(n)).eigenvalues()[0];
            assert!(l > prev && l < 1.0);
            prev = l;
        }
        assert!((1.0 - prev).abs() < 1e-6);
    }

    #[test]
    fn yosida_gap_examples() {
        let one = ladder(1);
        let r = one.yosida_gap(nz(10), 0.0, &[1.0]).unwrap();
        let expect = ((-10.0f64 / 11.0).exp() - (-1.0f64).exp()).abs();
        assert_relative_eq!(r.gap, expect, max_relative = 1e-14);
        assert_relative_eq!(r.gap, 0.035011, epsilon = 1e-6);

        let two = SpectralOperator::with_unit_weights(vec![2.0]).unwrap();
        let r = two.yosida_gap(nz(2), 1.0, &[1.0]).unwrap();
        assert_relative_eq!(r.inv_gap, 0.5, max_relative = 1e-15);
    }

    #[test]
    fn yosida_gap_vanishes_with_rate_one_over_n() {
        let op = ladder(8);
        let grid = log_grid(0.01, 1.0, 32);
        let g1 = op.yosida_gap(nz(1 << 10), 0.5, &grid).unwrap().gap;
        let g2 = op.yosida_gap(nz(1 << 11), 0.5, &grid).unwrap().gap;
        assert!(g2 < g1);
        assert_relative_eq!(g1 / g2, 2.0, max_relative = 0.05);
    }
}
