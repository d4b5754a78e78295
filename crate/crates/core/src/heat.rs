//! Stochastic heat equation `∂u/∂t = Δu - a u + b + σ ∂W/∂t` in `H^{-1}` of
//! the 2π-periodic torus `𝕋^d`, `1 ≤ d ≤ 3`.
//!
//! The state space is spanned by the real Hartley modes
//! `cas(k·x) = cos(k·x) + sin(k·x)`, `k ∈ ℤ^d`, which are orthonormal in
//! `L²(𝕋^d)` for the normalized measure `dx/(2π)^d`. In this basis `-Δ + a`
//! is diagonal with eigenvalues `|k|² + a` and the `H^{-1}` norm carries the
//! weights `w_k = (1 + |k|²)^{-1}`. The noise is cylindrical on `L²(𝕋^d)`
//! with spectral gains `g_k = scale (1 + |k|²)^{-q/2}`; it is Hilbert–Schmidt
//! into `H^{-1}` exactly when `2(1 + q) > d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mild::{maximal_regularity_report, mild_solve, DeterministicProblem, Forcing, RegularityReport, SolutionPath};
use crate::profile::{ModalFunction, ProfileKind, TimeProfile};
use crate::spaces::HolderParams;
use crate::spectral::{weighted_norm, SpectralOperator};
use crate::stats::mean_se;
use crate::stochastic::{
    analytic_second_moment, convolution_moment_profile, empirical_holder_exponent, ito_isometry_check,
    mild_solve_stochastic, ConvolutionEnsemble, DiffusionOperator, HolderExponentOptions, HolderExponentReport,
    IsometryReport, MomentProfile, NoiseConfig, StochasticReport,
};

/// Largest per-axis frequency; keeps lattice noise keys independent of `K`.
pub const MAX_FREQUENCY: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusSpec {
    pub d: usize,
    /// Frequency cut-off `K`: modes with `|k|_∞ ≤ K` are kept.
    pub k_max: usize,
}

impl TorusSpec {
    pub fn new(d: usize, k_max: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::input(format!("torus dimension must be 1, 2 or 3, got {d}")));
        }
        if k_max > MAX_FREQUENCY {
            return Err(Error::input(format!("K must be at most {MAX_FREQUENCY}, got {k_max}")));
        }
        Ok(Self { d, k_max })
    }

    pub fn mode_count(&self) -> usize {
        (2 * self.k_max + 1).pow(self.d as u32)
    }

    /// All modes with `|k|_∞ ≤ K` in lexicographic order.
    pub fn modes(&self) -> Vec<Vec<i64>> {
        let k = self.k_max as i64;
        let mut out = vec![vec![]];
        for _ in 0..self.d {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (-k..=k).map(move |c| {
                        let mut v = prefix.clone();
                        v.push(c);
                        v
                    })
                })
                .collect();
        }
        out
    }
}

fn norm_sq(k: &[i64]) -> i64 {
    k.iter().map(|c| c * c).sum()
}

/// `H^{-1}` weight `(1 + |k|²)^{-1}`.
pub fn h_minus_one_weight(k: &[i64]) -> f64 {
    1.0 / (1.0 + norm_sq(k) as f64)
}

/// Stable label of a lattice point, independent of the cut-off.
fn lattice_key(k: &[i64]) -> u64 {
    let r = MAX_FREQUENCY as i64;
    let base = (2 * r + 1) as u64;
    k.iter().rev().fold(0u64, |acc, &c| acc * base + (c + r) as u64)
}

/// `-Δ + a` on the truncated torus, modes sorted by eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatOperator {
    pub torus: TorusSpec,
    pub a: f64,
    pub op: SpectralOperator,
    /// Lattice point of each sorted mode.
    pub modes: Vec<Vec<i64>>,
}

impl HeatOperator {
    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        self.modes.iter().position(|m| m.as_slice() == k)
    }

    /// Coefficient vector of a spatial pattern.
    pub fn pattern(&self, pattern: SpatialPattern, scale: f64) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.modes.len()];
        let mut e1 = vec![0i64; self.torus.d];
        let mut set = |k: &[i64], c: f64| -> Result<()> {
            let i = self
                .index_of(k)
                .ok_or_else(|| Error::input(format!("pattern needs mode {k:?}, raise K")))?;
            v[i] += c * scale;
            Ok(())
        };
        match pattern {
            SpatialPattern::Zero => {}
            SpatialPattern::Constant => set(&e1, 1.0)?,
            SpatialPattern::Cos | SpatialPattern::Sin => {
                // cos x = (cas(x) + cas(-x)) / 2, sin x = (cas(x) - cas(-x)) / 2
                let sign = if pattern == SpatialPattern::Cos { 1.0 } else { -1.0 };
                e1[0] = 1;
                set(&e1, 0.5)?;
                e1[0] = -1;
                set(&e1, 0.5 * sign)?;
            }
        }
        Ok(v)
    }
}

pub fn assemble_operator(torus: TorusSpec, a: f64) -> Result<HeatOperator> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::input(format!("the reaction coefficient a must be positive, got {a}")));
    }
    let mut modes = torus.modes();
    modes.sort_by(|x, y| norm_sq(x).cmp(&norm_sq(y)).then_with(|| x.cmp(y)));
    let eig = modes.iter().map(|k| norm_sq(k) as f64 + a).collect();
    let weights = modes.iter().map(|k| h_minus_one_weight(k)).collect();
    Ok(HeatOperator {
        torus,
        a,
        op: SpectralOperator::new(eig, weights)?,
        modes,
    })
}

/// Functions of `x` along the first axis used for forcing and initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialPattern {
    Zero,
    Constant,
    /// `cos(x₁)`
    Cos,
    /// `sin(x₁)`
    Sin,
}

impl std::str::FromStr for SpatialPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "zero" | "none" => Self::Zero,
            "constant" => Self::Constant,
            "cos" => Self::Cos,
            "sin" => Self::Sin,
            other => return Err(Error::Parse(format!("unknown spatial pattern `{other}`"))),
        })
    }
}

impl SpatialPattern {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Constant => "constant",
            Self::Cos => "cos",
            Self::Sin => "sin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatNoise {
    pub g: DiffusionOperator,
    pub q: f64,
    pub scale: f64,
    /// `Σ_{|k|_∞ ≤ K} w_k g_k²`
    pub hs_truncated: f64,
    /// The same sum over all of `ℤ^d`, when known in closed form.
    pub hs_continuum: Option<f64>,
    /// Upper bound of `Σ_{|k|_∞ > K} w_k g_k² / (2λ_k)`, the truncation
    /// error of the stationary second moment.
    pub tail_bound: f64,
}

/// `Σ_{|k|_∞ > K} scale² (1+|k|²)^{-1-q} / (2(|k|² + a))`, bounded above.
///
/// For `d = 1` the sum is evaluated directly up to `K + 10⁶` with an integral
/// bound for the remainder. For `d ≥ 2` every lattice point on the shell
/// `|k|_∞ = m` is bounded by its value at `|k| = m`, the shell has
/// `(2m+1)^d - (2m-1)^d` points, and the shells beyond `K + 10⁵` are bounded
/// by an integral.
pub fn second_moment_tail_bound(torus: TorusSpec, q: f64, scale: f64, a: f64) -> f64 {
    let term = |r2: f64| (1.0 + r2).powf(-1.0 - q) / (2.0 * (r2 + a));
    let d = torus.d as i32;
    let k = torus.k_max as f64;
    let (cut, mult): (f64, Box<dyn Fn(f64) -> f64>) = if d == 1 {
        (1e6, Box::new(|_| 2.0))
    } else {
        (1e5, Box::new(move |m: f64| (2.0 * m + 1.0).powi(d) - (2.0 * m - 1.0).powi(d)))
    };
    let mut sum = 0.0;
    let mut m = k + 1.0;
    while m <= k + cut {
        sum += mult(m) * term(m * m);
        m += 1.0;
    }
    // Remainder: count(m) ≤ 2d (3m)^{d-1} and term(m²) ≤ m^{-4-2q}/2.
    let last = k + cut;
    let p = 4.0 + 2.0 * q - d as f64;
    let remainder = d as f64 * 3f64.powi(d - 1) * last.powf(-p + 1.0) / (p - 1.0).max(f64::MIN_POSITIVE);
    scale * scale * (sum + remainder)
}

pub fn assemble_noise(heat: &HeatOperator, q: f64, scale: f64, alpha2: f64, params: HolderParams) -> Result<HeatNoise> {
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::input(format!("noise decay q must be ≥ 0, got {q}")));
    }
    if !scale.is_finite() {
        return Err(Error::input("noise scale must be finite"));
    }
    let d = heat.torus.d as f64;
    if 2.0 * (1.0 + q) <= d {
        return Err(Error::regime(format!(
            "noise is not Hilbert–Schmidt into H^-1: 2(1 + q) > d violated (q = {q}, d = {d})"
        )));
    }
    let coeffs: Vec<f64> = heat
        .modes
        .iter()
        .map(|k| scale * (1.0 + norm_sq(k) as f64).powf(-q / 2.0))
        .collect();
    let hs_truncated = coeffs
        .iter()
        .zip(heat.op.weights())
        .map(|(g, w)| w * g * g)
        .sum();
    let hs_continuum = (heat.torus.d == 1 && q == 0.0).then(|| {
        let pi = std::f64::consts::PI;
        scale * scale * pi / pi.tanh()
    });
    let keys = heat.modes.iter().map(|k| lattice_key(k)).collect();
    let g = DiffusionOperator::new(ModalFunction::new(coeffs, TimeProfile::constant()), alpha2, params)?
        .with_noise_keys(keys)?;
    Ok(HeatNoise {
        g,
        q,
        scale,
        hs_truncated,
        hs_continuum,
        tail_bound: second_moment_tail_bound(heat.torus, q, scale, heat.a),
    })
}

/// `Σ_k w_k g_k² / (2λ_k)`: the stationary `E‖u‖²_{H^{-1}}` of the truncation.
pub fn stationary_second_moment(heat: &HeatOperator, noise: &HeatNoise) -> f64 {
    let op = &heat.op;
    noise
        .g
        .gains
        .coeffs
        .iter()
        .zip(op.weights())
        .zip(op.eigenvalues())
        .map(|((g, w), l)| w * g * g / (2.0 * l))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatProblem {
    pub torus: TorusSpec,
    pub a: f64,
    pub forcing_pattern: SpatialPattern,
    pub forcing_profile: ProfileKind,
    pub forcing_scale: f64,
    pub u0_pattern: SpatialPattern,
    pub u0_scale: f64,
    pub noise_q: f64,
    pub noise_scale: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondMomentCheck {
    pub t: f64,
    /// Monte-Carlo `E‖u(t)‖²_{H^{-1}}`.
    pub mc: f64,
    pub se: f64,
    /// `‖E u(t)‖² + Σ_k w_k g_k² (1 - e^{-2λ_k t}) / (2λ_k)`.
    pub analytic: f64,
    /// `‖E u(t)‖² + Σ_k w_k g_k² / (2λ_k)`.
    pub stationary: f64,
    pub z_score: f64,
    pub z_score_stationary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatReport {
    /// 1: deterministic (`σ ≡ 0`), 2: stochastic.
    pub case: u8,
    pub n_modes: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub hs_truncated: Option<f64>,
    pub hs_continuum: Option<f64>,
    pub tail_bound: Option<f64>,
    pub regularity: Option<RegularityReport>,
    pub stochastic: Option<StochasticReport>,
    pub isometry: Option<IsometryReport>,
    pub moment: Option<MomentProfile>,
    pub holder_exponent: Option<HolderExponentReport>,
    pub holder_exponent_note: Option<String>,
    pub second_moment: Option<SecondMomentCheck>,
}

pub struct HeatRun {
    pub operator: HeatOperator,
    pub noise: Option<HeatNoise>,
    pub deterministic: SolutionPath,
    /// `W_G` paths for Case 2.
    pub ensemble: Option<ConvolutionEnsemble>,
    pub report: HeatReport,
}

impl HeatProblem {
    pub fn params(&self) -> Result<HolderParams> {
        HolderParams::new(self.beta, self.sigma, self.horizon)
    }

    pub fn deterministic(&self, heat: &HeatOperator) -> Result<DeterministicProblem> {
        let params = self.params()?;
        let b = heat.pattern(self.forcing_pattern, self.forcing_scale)?;
        // The solver takes A^{-α₁}F.
        let coeffs = b
            .iter()
            .zip(heat.op.eigenvalues())
            .map(|(c, l)| c * l.powf(-self.alpha1))
            .collect();
        let profile = TimeProfile::from_kind(self.forcing_profile, self.beta, self.sigma)?;
        let xi = heat.pattern(self.u0_pattern, self.u0_scale)?;
        DeterministicProblem::new(
            heat.op.clone(),
            self.alpha1,
            Forcing::Modal(ModalFunction::new(coeffs, profile)),
            xi,
            params,
        )
    }
}

/// Runs the deterministic (Case 1) or stochastic (Case 2) check suite.
pub fn run_heat_experiment(problem: &HeatProblem, config: &NoiseConfig) -> Result<HeatRun> {
    let heat = assemble_operator(problem.torus, problem.a)?;
    let det = problem.deterministic(&heat)?;
    let grid = &config.grid;
    let mut report = HeatReport {
        case: 1,
        n_modes: heat.op.dim(),
        lambda_min: heat.op.smallest(),
        lambda_max: heat.op.largest(),
        hs_truncated: None,
        hs_continuum: None,
        tail_bound: None,
        regularity: None,
        stochastic: None,
        isometry: None,
        moment: None,
        holder_exponent: None,
        holder_exponent_note: None,
        second_moment: None,
    };

    if problem.noise_scale == 0.0 {
        let sol = mild_solve(&det, grid)?;
        report.regularity = Some(maximal_regularity_report(&sol, &det)?);
        return Ok(HeatRun {
            operator: heat,
            noise: None,
            deterministic: sol,
            ensemble: None,
            report,
        });
    }

    report.case = 2;
    let noise = assemble_noise(&heat, problem.noise_q, problem.noise_scale, problem.alpha2, det.params)?;
    report.hs_truncated = Some(noise.hs_truncated);
    report.hs_continuum = noise.hs_continuum;
    report.tail_bound = Some(noise.tail_bound);

    let sol = mild_solve_stochastic(&det, &noise.g, problem.kappa, config)?;
    let t_end = grid.horizon();
    report.isometry = Some(ito_isometry_check(&heat.op, &noise.g, t_end, config)?);
    let frac = sol.convolution.apply_power(&heat.op, problem.kappa)?;
    report.moment = Some(convolution_moment_profile(&frac, &heat.op, &noise.g)?);
    match empirical_holder_exponent(&frac, &HolderExponentOptions::default()) {
        Ok(r) => report.holder_exponent = Some(r),
        Err(e) => report.holder_exponent_note = Some(e.to_string()),
    }

    let last = grid.len() - 1;
    let mean = sol.deterministic.x.value(last).to_vec();
    let mean_sq = weighted_norm(heat.op.weights(), &mean).powi(2);
    let samples: Vec<f64> = (0..sol.convolution.n_paths())
        .map(|p| {
            let w = sol.convolution.value(p, last);
            let u: Vec<f64> = w.iter().zip(&mean).map(|(a, b)| a + b).collect();
            weighted_norm(heat.op.weights(), &u).powi(2)
        })
        .collect();
    let (mc, se) = mean_se(&samples);
    let analytic = mean_sq + analytic_second_moment(&heat.op, &noise.g, 0.0, grid.nodes())[last];
    let stationary = mean_sq + stationary_second_moment(&heat, &noise);
    let z = |target: f64| if mc == target { 0.0 } else { (mc - target).abs() / se };
    report.second_moment = Some(SecondMomentCheck {
        t: t_end,
        mc,
        se,
        analytic,
        stationary,
        z_score: z(analytic),
        z_score_stationary: z(stationary),
    });
    report.stochastic = Some(sol.report.clone());

    Ok(HeatRun {
        operator: heat,
        noise: Some(noise),
        deterministic: sol.deterministic,
        ensemble: Some(sol.convolution),
        report,
    })
}
