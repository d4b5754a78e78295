//! Stochastic convolutions `W_G(t) = ∫_0^t S(t-s) G(s) dW(s)` and the
//! stochastic evolution equation `dX + AX dt = F dt + G dW`.
//!
//! The cylindrical Wiener process is identified with independent scalar
//! Brownian motions `β_k`, one per eigenmode, and `G(t)` acts diagonally:
//! `G(t) e_k = g_k(t) ê_k` with `g_k(t) = c_k φ(t)`. Each mode is an
//! Ornstein–Uhlenbeck process sampled with its exact Gaussian transition over
//! every step, the gain frozen at the left endpoint (or at the midpoint of the
//! step when `φ` is singular at the left endpoint).
//!
//! Paths are stored normalized, `y_k = x_k / c_k`, next to per-mode scales, so
//! that fractional powers `A^κ` act on the scales only.
//!
//! Variates for mode `k` at step `j` come from slot `key_k · M + j` of the
//! path's random stream, where `key_k` labels the noise basis vector. Modes
//! keep their variates when other modes are added or removed, provided their
//! keys are stable.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::mild::{mild_solve, residual_vectors, DeterministicProblem, SolutionPath};
use crate::profile::ModalFunction;
use crate::rng::PathRng;
use crate::spaces::{weighted_holder_norm, HolderParams, PathSample, TimeGrid};
use crate::spectral::{weighted_norm, SpectralOperator};
use crate::stats::{linear_fit, mean_se, median};

/// Noise gains `g_k(t) = c_k φ(t)` together with the exponent `α₂` of the
/// condition `A^{-α₂}G ∈ F^{β,σ}((0,T]; HS)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionOperator {
    pub gains: ModalFunction,
    pub alpha2: f64,
    pub params: HolderParams,
    noise_keys: Vec<u64>,
}

impl DiffusionOperator {
    pub fn new(gains: ModalFunction, alpha2: f64, params: HolderParams) -> Result<Self> {
        if !alpha2.is_finite() {
            return Err(Error::input("α₂ must be finite"));
        }
        if gains.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::input("gain coefficients must be finite"));
        }
        let noise_keys = (0..gains.dim() as u64).collect();
        Ok(Self {
            gains,
            alpha2,
            params,
            noise_keys,
        })
    }

    /// Labels the noise basis vectors; each key selects an independent
    /// sequence of variates. Defaults to `0, 1, …, N-1`.
    pub fn with_noise_keys(mut self, keys: Vec<u64>) -> Result<Self> {
        check_len(self.dim(), keys.len())?;
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::input("noise keys must be distinct"));
        }
        self.noise_keys = keys;
        Ok(self)
    }

    pub fn noise_keys(&self) -> &[u64] {
        &self.noise_keys
    }

    pub fn dim(&self) -> usize {
        self.gains.dim()
    }

    pub fn is_zero(&self) -> bool {
        self.gains.is_zero()
    }

    /// Whether `α₂ < 1/2 - σ` holds.
    pub fn exponent_constraint_holds(&self) -> bool {
        self.alpha2 < 0.5 - self.params.sigma
    }

    /// `A^{-α₂}G` as a path in the Hilbert–Schmidt space, whose norm is the
    /// weighted `ℓ²` norm of the per-mode gains.
    pub fn hs_samples(&self, op: &SpectralOperator, grid: &TimeGrid) -> Result<PathSample> {
        check_len(op.dim(), self.dim())?;
        let lift: Vec<f64> = op
            .eigenvalues()
            .iter()
            .zip(&self.gains.coeffs)
            .map(|(l, c)| l.powf(-self.alpha2) * c)
            .collect();
        let profile = &self.gains.profile;
        PathSample::from_fn(grid.clone(), op.weights().to_vec(), |t| {
            let phi = profile.eval(t);
            lift.iter().map(|c| c * phi).collect()
        })
    }

    /// Discrete `‖A^{-α₂}G‖_{F^{β,σ}(HS)}` on `grid`.
    pub fn hs_norm(&self, op: &SpectralOperator, grid: &TimeGrid) -> Result<f64> {
        Ok(weighted_holder_norm(&self.hs_samples(op, grid)?, &self.params)?.total)
    }
}

impl Serialize for DiffusionOperator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("DiffusionOperator", 3)?;
        st.serialize_field("alpha2", &self.alpha2)?;
        st.serialize_field("profile", &self.gains.profile)?;
        st.serialize_field("modes", &self.dim())?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub grid: TimeGrid,
}

impl NoiseConfig {
    pub fn new(seed: u64, n_paths: usize, grid: TimeGrid) -> Result<Self> {
        if n_paths == 0 {
            return Err(Error::input("an ensemble needs at least one path"));
        }
        if !grid.starts_at_zero() {
            return Err(Error::input("the noise grid must start at t = 0"));
        }
        Ok(Self {
            seed,
            n_paths,
            grid,
        })
    }
}

/// Per-step, per-mode transition data shared by all paths.
struct StepPlan {
    modes: usize,
    steps: usize,
    decay: Vec<f64>,
    sd: Vec<f64>,
    /// Coefficients of `z1`, `z2` in the Brownian increment jointly sampled
    /// with the OU innovation.
    inc1: Vec<f64>,
    inc2: Vec<f64>,
    phi: Vec<f64>,
    keys: Vec<u64>,
}

impl StepPlan {
    fn new(op: &SpectralOperator, g: &DiffusionOperator, nodes: &[f64]) -> Result<Self> {
        let steps = nodes.len() - 1;
        let top = g.noise_keys.iter().copied().max().unwrap_or(0) as u128;
        if (top + 1) * steps as u128 > crate::rng::MAX_SLOT {
            return Err(Error::input("noise keys times steps exceed the random stream"));
        }
        let modes = op.dim();
        let mut decay = Vec::with_capacity(steps * modes);
        let mut sd = Vec::with_capacity(steps * modes);
        let mut inc1 = Vec::with_capacity(steps * modes);
        let mut inc2 = Vec::with_capacity(steps * modes);
        let mut phi = Vec::with_capacity(steps);
        for j in 0..steps {
            let (a, b) = (nodes[j], nodes[j + 1]);
            let h = b - a;
            let left = g.gains.profile.eval(a);
            phi.push(if left.is_finite() {
                left
            } else {
                g.gains.profile.eval(0.5 * (a + b))
            });
            for &l in op.eigenvalues() {
                let var = -(-2.0 * l * h).exp_m1() / (2.0 * l);
                let s = var.sqrt();
                let cov = -(-l * h).exp_m1() / l;
                decay.push((-l * h).exp());
                sd.push(s);
                inc1.push(cov / s);
                inc2.push((h - cov * cov / var).max(0.0).sqrt());
            }
        }
        Ok(Self {
            modes,
            steps,
            decay,
            sd,
            inc1,
            inc2,
            phi,
            keys: g.noise_keys.clone(),
        })
    }

    /// Normalized path and, if requested, the normalized `∫ φ dβ` accumulator.
    fn simulate(&self, seed: u64, path: usize, accumulate: bool) -> (Vec<f64>, Option<Vec<f64>>) {
        let n = self.modes;
        let mut rng = PathRng::new(seed, path as u64);
        let mut y = vec![0.0; (self.steps + 1) * n];
        let mut acc = if accumulate {
            Some(vec![0.0; (self.steps + 1) * n])
        } else {
            None
        };
        for k in 0..n {
            rng.seek(self.keys[k] as u128 * self.steps as u128);
            for j in 0..self.steps {
                let phi = self.phi[j];
                let i = j * n + k;
                let (z1, z2) = rng.normal_pair();
                y[i + n] = self.decay[i] * y[i] + phi * self.sd[i] * z1;
                if let Some(acc) = acc.as_mut() {
                    acc[i + n] = acc[i] + phi * (self.inc1[i] * z1 + self.inc2[i] * z2);
                }
            }
        }
        (y, acc)
    }

    /// Variance of the scheme's normalized value at node `upto`.
    fn scheme_variance(&self, upto: usize, k: usize) -> f64 {
        let mut v = 0.0;
        for j in 0..upto {
            let i = j * self.modes + k;
            v = self.decay[i] * self.decay[i] * v + (self.phi[j] * self.sd[i]).powi(2);
        }
        v
    }
}

/// An ensemble of sampled paths of `A^κ W_G`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionEnsemble {
    kappa: f64,
    grid: TimeGrid,
    weights: Vec<f64>,
    scales: Vec<f64>,
    n_paths: usize,
    seed: Option<u64>,
    /// Path-major, then node, then mode.
    data: Vec<f64>,
}

impl ConvolutionEnsemble {
    /// Wraps given paths as an ensemble with `κ = 0` and unit scales.
    pub fn from_paths(paths: &[PathSample]) -> Result<Self> {
        let first = paths.first().ok_or_else(|| Error::input("no paths given"))?;
        let mut data = Vec::with_capacity(paths.len() * first.data().len());
        for p in paths {
            if p.grid() != first.grid() || p.weights() != first.weights() {
                return Err(Error::input("paths live on different grids or spaces"));
            }
            data.extend_from_slice(p.data());
        }
        Ok(Self {
            kappa: 0.0,
            grid: first.grid().clone(),
            weights: first.weights().to_vec(),
            scales: vec![1.0; first.dim()],
            n_paths: paths.len(),
            seed: None,
            data,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Per-mode factors `λ_k^κ c_k` applied to the normalized paths.
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    fn offset(&self, path: usize, node: usize) -> usize {
        (path * self.grid.len() + node) * self.dim()
    }

    /// `A^κ W_G(t_node)` on path `path`.
    pub fn value(&self, path: usize, node: usize) -> Vec<f64> {
        let o = self.offset(path, node);
        self.data[o..o + self.dim()]
            .iter()
            .zip(&self.scales)
            .map(|(y, s)| s * y + 0.0)
            .collect()
    }

    pub fn norm_at(&self, path: usize, node: usize) -> f64 {
        weighted_norm(&self.weights, &self.value(path, node))
    }

    pub fn path(&self, path: usize) -> PathSample {
        let values = (0..self.grid.len()).map(|j| self.value(path, j)).collect();
        PathSample::new(self.grid.clone(), self.weights.clone(), values).expect("consistent shapes")
    }

    /// `A^θ` applied to every path; only the per-mode scales change.
    pub fn apply_power(&self, op: &SpectralOperator, theta: f64) -> Result<ConvolutionEnsemble> {
        check_len(self.dim(), op.dim())?;
        let mut out = self.clone();
        for (s, l) in out.scales.iter_mut().zip(op.eigenvalues()) {
            *s *= l.powf(theta);
        }
        out.kappa += theta;
        Ok(out)
    }

    /// Writes one `t,c_1,…,c_N` CSV per path, named `path_00000.csv` onwards.
    pub fn write_csv_dir(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        (0..self.n_paths)
            .map(|p| {
                let file = dir.join(format!("path_{p:05}.csv"));
                self.path(p).write_csv(std::fs::File::create(&file)?)?;
                Ok(file)
            })
            .collect()
    }
}

fn check_dims(op: &SpectralOperator, g: &DiffusionOperator) -> Result<()> {
    check_len(op.dim(), g.dim())
}

fn check_kappa(kappa: f64, g: &DiffusionOperator) -> Result<()> {
    if !(kappa < 0.5 - g.alpha2) {
        return Err(Error::regime(format!(
            "κ < 1/2 - α₂ violated: κ = {kappa}, α₂ = {}",
            g.alpha2
        )));
    }
    Ok(())
}

fn simulate_all(plan: &StepPlan, config: &NoiseConfig, accumulate: bool) -> Vec<(Vec<f64>, Option<Vec<f64>>)> {
    (0..config.n_paths)
        .into_par_iter()
        .map(|p| plan.simulate(config.seed, p, accumulate))
        .collect()
}

/// Samples `A^κ W_G` on `config.grid`.
pub fn simulate_convolution(
    op: &SpectralOperator,
    g: &DiffusionOperator,
    kappa: f64,
    config: &NoiseConfig,
) -> Result<ConvolutionEnsemble> {
    check_dims(op, g)?;
    check_kappa(kappa, g)?;
    let plan = StepPlan::new(op, g, config.grid.nodes())?;
    let paths = simulate_all(&plan, config, false);
    let mut data = Vec::with_capacity(paths.len() * config.grid.len() * op.dim());
    for (y, _) in paths {
        data.extend_from_slice(&y);
    }
    let scales = op
        .eigenvalues()
        .iter()
        .zip(&g.gains.coeffs)
        .map(|(l, c)| l.powf(kappa) * c)
        .collect();
    Ok(ConvolutionEnsemble {
        kappa,
        grid: config.grid.clone(),
        weights: op.weights().to_vec(),
        scales,
        n_paths: config.n_paths,
        seed: Some(config.seed),
        data,
    })
}

/// `Σ_k w_k λ_k^{2κ} c_k² ∫_0^{t_j} e^{-2λ_k(t_j-s)} φ(s)² ds` at every node.
pub(crate) fn analytic_second_moment(op: &SpectralOperator, g: &DiffusionOperator, kappa: f64, nodes: &[f64]) -> Vec<f64> {
    let sq = g.gains.profile.squared();
    let mut per_mode = vec![0.0; op.dim()];
    let mut out = vec![0.0; nodes.len()];
    for j in 1..nodes.len() {
        let (a, b) = (nodes[j - 1], nodes[j]);
        let mut total = 0.0;
        for (k, &l) in op.eigenvalues().iter().enumerate() {
            let c = g.gains.coeffs[k];
            if c == 0.0 {
                continue;
            }
            let (m, _) = sq.exp_moment(2.0 * l, a, b, b);
            per_mode[k] = (-2.0 * l * (b - a)).exp() * per_mode[k] + m;
            total += op.weights()[k] * l.powf(2.0 * kappa) * c * c * per_mode[k];
        }
        out[j] = total;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsometryReport {
    pub t: f64,
    pub n_paths: usize,
    /// Monte-Carlo estimate of `E‖W_G(t)‖²`.
    pub mc_mean_square: f64,
    /// `Σ_k w_k ∫_0^t e^{-2λ_k(t-s)} g_k(s)² ds`.
    pub analytic: f64,
    /// Exact second moment of the discretized scheme (frozen gains).
    pub scheme_analytic: f64,
    pub standard_error: f64,
    /// `|mc - analytic| / SE`.
    pub z_score: f64,
    pub pass: bool,
    pub warning: Option<String>,
}

/// Monte-Carlo check of `E‖W_G(t)‖² = ∫_0^t ‖S(t-s)G(s)‖²_HS ds`.
pub fn ito_isometry_check(
    op: &SpectralOperator,
    g: &DiffusionOperator,
    t: f64,
    config: &NoiseConfig,
) -> Result<IsometryReport> {
    check_dims(op, g)?;
    let idx = config
        .grid
        .index_of(t)
        .ok_or_else(|| Error::input(format!("t = {t} is not a grid node")))?;
    let nodes = &config.grid.nodes()[..=idx];
    let analytic = if idx == 0 {
        0.0
    } else {
        analytic_second_moment(op, g, 0.0, nodes)[idx]
    };
    let plan = StepPlan::new(op, g, nodes)?;
    let n = op.dim();
    let coeffs = &g.gains.coeffs;
    let scheme_analytic = (0..n)
        .map(|k| op.weights()[k] * coeffs[k] * coeffs[k] * plan.scheme_variance(idx, k))
        .sum();
    let samples: Vec<f64> = (0..config.n_paths)
        .into_par_iter()
        .map(|p| {
            let (y, _) = plan.simulate(config.seed, p, false);
            let last = &y[idx * n..(idx + 1) * n];
            (0..n)
                .map(|k| op.weights()[k] * (coeffs[k] * last[k]).powi(2))
                .sum::<f64>()
        })
        .collect();
    let (mc, se) = mean_se(&samples);
    let diff = (mc - analytic).abs();
    let z_score = if diff == 0.0 { 0.0 } else { diff / se };
    let warning = (config.n_paths < 100)
        .then(|| format!("only {} paths: the standard error is unreliable", config.n_paths));
    Ok(IsometryReport {
        t,
        n_paths: config.n_paths,
        mc_mean_square: mc,
        analytic,
        scheme_analytic,
        standard_error: se,
        z_score,
        pass: z_score <= 3.0,
        warning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentProfile {
    pub kappa: f64,
    pub times: Vec<f64>,
    /// Monte-Carlo `E‖A^κ W_G(t)‖`.
    pub mean_norm: Vec<f64>,
    pub mean_norm_se: Vec<f64>,
    /// Analytic `√(E‖A^κ W_G(t)‖²)`, an upper envelope of the first moment.
    pub rms_envelope: Vec<f64>,
    /// `max{t^{β-α₂-κ-1/2}, t^{β-1/2}} ‖A^{-α₂}G‖_{F^{β,σ}(HS)}`.
    pub shape: Vec<f64>,
    pub g_norm: f64,
    /// `sup_t mean_norm / shape`.
    pub ratio: f64,
    /// `sup_t rms_envelope / shape`.
    pub envelope_ratio: f64,
}

fn sup_ratio(num: &[f64], den: &[f64], times: &[f64]) -> f64 {
    num.iter()
        .zip(den)
        .zip(times)
        .filter(|(_, t)| **t > 0.0)
        .map(|((a, b), _)| if *a == 0.0 { 0.0 } else { a / b })
        .fold(0.0, f64::max)
}

/// First-moment profile of `A^κ W_G` against the shape of the moment bound.
pub fn convolution_moment_profile(
    ens: &ConvolutionEnsemble,
    op: &SpectralOperator,
    g: &DiffusionOperator,
) -> Result<MomentProfile> {
    check_dims(op, g)?;
    check_len(op.dim(), ens.dim())?;
    let times = ens.grid.nodes().to_vec();
    let kappa = ens.kappa;
    let (mut mean_norm, mut mean_norm_se) = (Vec::new(), Vec::new());
    for j in 0..times.len() {
        let norms: Vec<f64> = (0..ens.n_paths).map(|p| ens.norm_at(p, j)).collect();
        let (m, se) = mean_se(&norms);
        mean_norm.push(m);
        mean_norm_se.push(if ens.n_paths > 1 { se } else { f64::NAN });
    }
    let rms_envelope: Vec<f64> = analytic_second_moment(op, g, kappa, &times)
        .into_iter()
        .map(f64::sqrt)
        .collect();
    let g_norm = g.hs_norm(op, &ens.grid)?;
    let (beta, a2) = (g.params.beta, g.alpha2);
    let shape: Vec<f64> = times
        .iter()
        .map(|&t| t.powf(beta - a2 - kappa - 0.5).max(t.powf(beta - 0.5)) * g_norm)
        .collect();
    Ok(MomentProfile {
        kappa,
        ratio: sup_ratio(&mean_norm, &shape, &times),
        envelope_ratio: sup_ratio(&rms_envelope, &shape, &times),
        times,
        mean_norm,
        mean_norm_se,
        rms_envelope,
        shape,
        g_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderExponentOptions {
    /// Start of the regularity window as a fraction of `T`.
    pub window_start: f64,
    /// Number of dyadic lags `h, 2h, 4h, …`.
    pub n_lags: usize,
    /// Confidence level of the reported band.
    pub level: f64,
}

impl Default for HolderExponentOptions {
    fn default() -> Self {
        Self {
            window_start: 1.0 / 16.0,
            n_lags: 5,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderExponentReport {
    pub gamma_hat: f64,
    /// Half-width of the confidence band on `gamma_hat`.
    pub band: f64,
    pub lags: Vec<f64>,
    pub mean_square_increments: Vec<f64>,
    pub window: (f64, f64),
}

/// Estimates the Hölder exponent of the paths from the scaling of mean-square
/// increments, `E‖X(t+δ) - X(t)‖² ∝ δ^{2γ}`, over dyadic lags on a uniform
/// stretch of the grid inside `[ε, T]`.
pub fn empirical_holder_exponent(
    ens: &ConvolutionEnsemble,
    options: &HolderExponentOptions,
) -> Result<HolderExponentReport> {
    let nodes = ens.grid.nodes();
    let horizon = ens.grid.horizon();
    let eps = options.window_start * horizon;
    let first = nodes
        .iter()
        .position(|&t| t >= eps * (1.0 - 1e-12))
        .ok_or_else(|| Error::input("regularity window is empty"))?;
    let window = &nodes[first..];
    if window.len() < 2 {
        return Err(Error::input("regularity window holds fewer than 2 nodes"));
    }
    let h = window[1] - window[0];
    if window.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::input(format!("no uniform sub-grid on [{eps}, {horizon}]")));
    }
    let steps = window.len() - 1;
    let lag_steps: Vec<usize> = (0..options.n_lags)
        .map(|i| 1usize << i)
        .filter(|&s| 4 * s <= steps)
        .collect();
    if lag_steps.len() < 4 {
        return Err(Error::input(format!(
            "only {} dyadic lags fit the window; at least 4 are needed",
            lag_steps.len()
        )));
    }
    let mut msi = Vec::with_capacity(lag_steps.len());
    for &s in &lag_steps {
        let per_path: Vec<f64> = (0..ens.n_paths)
            .into_par_iter()
            .map(|p| {
                (first..nodes.len() - s)
                    .map(|j| {
                        let (a, b) = (ens.value(p, j), ens.value(p, j + s));
                        a.iter()
                            .zip(&b)
                            .zip(&ens.weights)
                            .map(|((x, y), w)| w * (y - x) * (y - x))
                            .sum::<f64>()
                    })
                    .sum::<f64>()
            })
            .collect();
        let count = (ens.n_paths * (nodes.len() - s - first)) as f64;
        msi.push(per_path.iter().sum::<f64>() / count);
    }
    if msi.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::input("mean-square increments vanish; the exponent is undefined"));
    }
    let lags: Vec<f64> = lag_steps.iter().map(|&s| s as f64 * h).collect();
    let xs: Vec<f64> = lags.iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = msi.iter().map(|m| m.ln()).collect();
    let fit = linear_fit(&xs, &ys);
    Ok(HolderExponentReport {
        gamma_hat: fit.slope / 2.0,
        band: fit.slope_half_width(options.level) / 2.0,
        lags,
        mean_square_increments: msi,
        window: (window[0], horizon),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrictIdentityReport {
    pub n_steps: usize,
    /// Ensemble median of `max_j r(t_j)`.
    pub median_residual: f64,
    /// Per-node ensemble median of `r(t_j)`.
    pub median_profile: Vec<f64>,
    #[serde(skip)]
    pub path_residuals: Vec<f64>,
}

/// Per-path residual vectors of `W_G(t) + ∫_0^t A W_G ds - ∫_0^t G dW`,
/// node-major, with `∫ A W_G` by the trapezoid rule.
fn convolution_residuals(op: &SpectralOperator, g: &DiffusionOperator, nodes: &[f64], y: &[f64], acc: &[f64]) -> Vec<f64> {
    let n = op.dim();
    let lam = op.eigenvalues();
    let c = &g.gains.coeffs;
    let mut out = vec![0.0; y.len()];
    let mut int_ax = vec![0.0; n];
    for j in 1..nodes.len() {
        let h = nodes[j] - nodes[j - 1];
        for k in 0..n {
            let (y0, y1) = (y[(j - 1) * n + k], y[j * n + k]);
            int_ax[k] += 0.5 * h * lam[k] * (y0 + y1);
            out[j * n + k] = c[k] * (y1 + int_ax[k] - acc[j * n + k]);
        }
    }
    out
}

fn residual_summary(per_path: Vec<Vec<f64>>, weights: &[f64], n_steps: usize) -> StrictIdentityReport {
    let n = weights.len();
    let norms: Vec<Vec<f64>> = per_path
        .iter()
        .map(|r| r.chunks(n).map(|v| weighted_norm(weights, v)).collect())
        .collect();
    let path_residuals: Vec<f64> = norms.iter().map(|r| r.iter().copied().fold(0.0, f64::max)).collect();
    let median_profile = (0..=n_steps)
        .map(|j| median(&norms.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect();
    StrictIdentityReport {
        n_steps,
        median_residual: median(&path_residuals),
        median_profile,
        path_residuals,
    }
}

/// Checks the integrated identity `W_G(t) = -∫_0^t A W_G ds + ∫_0^t G dW`
/// pathwise, both sides driven by the same variates.
pub fn strict_identity_check(
    op: &SpectralOperator,
    g: &DiffusionOperator,
    config: &NoiseConfig,
) -> Result<StrictIdentityReport> {
    check_dims(op, g)?;
    if !(g.alpha2 < -0.5) {
        return Err(Error::regime(format!("α₂ < -1/2 violated: α₂ = {}", g.alpha2)));
    }
    let nodes = config.grid.nodes();
    let plan = StepPlan::new(op, g, nodes)?;
    let per_path: Vec<Vec<f64>> = (0..config.n_paths)
        .into_par_iter()
        .map(|p| {
            let (y, acc) = plan.simulate(config.seed, p, true);
            convolution_residuals(op, g, nodes, &y, &acc.expect("accumulator requested"))
        })
        .collect();
    Ok(residual_summary(per_path, op.weights(), config.grid.intervals()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticReport {
    pub kappa: f64,
    pub n_paths: usize,
    /// Monte-Carlo `E‖A^κ X(t)‖` on the grid.
    pub mean_norm: Vec<f64>,
    /// `‖ξ‖t^{-κ} + ‖A^{-α₁}F‖_F t^{β-1} + ‖A^{-α₂}G‖_F max{t^{β-α₂-κ-1/2}, t^{β-1/2}}`
    pub shape: Vec<f64>,
    pub ratio_t49: f64,
    /// `‖A^κ E X‖_{F^{β,σ}}`: the norm of the mean.
    pub norm_of_mean: f64,
    /// `‖A^κ dEX/dt‖_{F^{β,σ}}` when `α₁ ≤ 0`.
    pub norm_of_mean_derivative: Option<f64>,
    /// `E‖A^κ X‖_{F^{β,σ}}`: the mean of pathwise norms.
    pub mean_of_norms: f64,
    pub mean_of_norms_paths: usize,
    /// Median over paths of the full-equation strict residual, when applicable.
    pub strict_residual: Option<f64>,
}

/// Paths used for the pathwise `F^{β,σ}` norms, which cost `O(M² N)` each.
pub const PATHWISE_NORM_PATHS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticSolution {
    pub deterministic: SolutionPath,
    /// `W_G` (with `κ = 0`).
    pub convolution: ConvolutionEnsemble,
    pub report: StochasticReport,
}

impl StochasticSolution {
    /// `X` on path `p`.
    pub fn path(&self, p: usize) -> PathSample {
        self.deterministic
            .x
            .add(&self.convolution.path(p))
            .expect("deterministic and stochastic parts share the grid")
    }
}

/// Mild solution `X = S(·)ξ + ∫S F ds + W_G` on the noise grid.
pub fn mild_solve_stochastic(
    det: &DeterministicProblem,
    g: &DiffusionOperator,
    kappa: f64,
    config: &NoiseConfig,
) -> Result<StochasticSolution> {
    check_dims(&det.op, g)?;
    if g.params != det.params {
        return Err(Error::input("forcing and noise use different Hölder parameters"));
    }
    let (beta, sigma) = (det.params.beta, det.params.sigma);
    let mut violated = Vec::new();
    if !(sigma < beta - 0.5) {
        violated.push(format!("σ < β - 1/2 (σ = {sigma}, β = {beta})"));
    }
    if !(kappa <= 1.0 - det.alpha1) {
        violated.push(format!("κ ≤ 1 - α₁ (κ = {kappa}, α₁ = {})", det.alpha1));
    }
    if !(kappa < 0.5 - g.alpha2) {
        violated.push(format!("κ < 1/2 - α₂ (κ = {kappa}, α₂ = {})", g.alpha2));
    }
    if !violated.is_empty() {
        return Err(Error::regime(violated.join("; ")));
    }

    let grid = &config.grid;
    let op = &det.op;
    let deterministic = mild_solve(det, grid)?;
    let conv = simulate_convolution(op, g, 0.0, config)?;
    let lam_k: Vec<f64> = op.eigenvalues().iter().map(|l| l.powf(kappa)).collect();
    let mean_frac = deterministic.x.scale_modes(&lam_k)?;
    let conv_frac = conv.apply_power(op, kappa)?;
    let times = grid.nodes();

    let n = op.dim();
    let mut mean_norm = vec![0.0; times.len()];
    for (j, m) in mean_norm.iter_mut().enumerate() {
        let base = mean_frac.value(j);
        let total: f64 = (0..conv.n_paths)
            .map(|p| {
                let v: Vec<f64> = conv_frac.value(p, j).iter().zip(base).map(|(a, b)| a + b).collect();
                weighted_norm(op.weights(), &v)
            })
            .sum();
        *m = total / conv.n_paths as f64;
    }

    let forcing_norm = weighted_holder_norm(&deterministic.forcing, &det.params)?.total;
    let g_norm = g.hs_norm(op, grid)?;
    let xi_norm = op.norm(&det.xi);
    let shape: Vec<f64> = times
        .iter()
        .map(|&t| {
            xi_norm * t.powf(-kappa)
                + forcing_norm * t.powf(beta - 1.0)
                + g_norm * t.powf(beta - g.alpha2 - kappa - 0.5).max(t.powf(beta - 0.5))
        })
        .collect();
    let ratio_t49 = sup_ratio(&mean_norm, &shape, times);

    let norm_of_mean = weighted_holder_norm(&mean_frac, &det.params)?.total;
    let norm_of_mean_derivative = if det.alpha1 <= 0.0 {
        let d = deterministic.dxdt.scale_modes(&lam_k)?;
        Some(weighted_holder_norm(&d, &det.params)?.total)
    } else {
        None
    };
    let used = conv.n_paths.min(PATHWISE_NORM_PATHS);
    let pathwise: Vec<f64> = (0..used)
        .into_par_iter()
        .map(|p| {
            let x = mean_frac.add(&conv_frac.path(p))?;
            Ok(weighted_holder_norm(&x, &det.params)?.total)
        })
        .collect::<Result<_>>()?;
    let mean_of_norms = pathwise.iter().sum::<f64>() / used as f64;

    let strict_residual = if det.alpha1 <= 0.0 && g.alpha2 < det.alpha1 - 0.5 {
        let (det_res, _) = residual_vectors(&deterministic, det)?;
        let plan = StepPlan::new(op, g, times)?;
        let per_path: Vec<Vec<f64>> = (0..config.n_paths)
            .into_par_iter()
            .map(|p| {
                let (y, acc) = plan.simulate(config.seed, p, true);
                let mut r = convolution_residuals(op, g, times, &y, &acc.expect("accumulator requested"));
                for (a, b) in r.iter_mut().zip(&det_res) {
                    *a += b;
                }
                r
            })
            .collect();
        Some(residual_summary(per_path, op.weights(), grid.intervals()).median_residual)
    } else {
        None
    };
    debug_assert_eq!(n, conv.dim());

    Ok(StochasticSolution {
        report: StochasticReport {
            kappa,
            n_paths: conv.n_paths,
            mean_norm,
            shape,
            ratio_t49,
            norm_of_mean,
            norm_of_mean_derivative,
            mean_of_norms,
            mean_of_norms_paths: used,
            strict_residual,
        },
        deterministic,
        convolution: conv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::TimeProfile;
    use approx::assert_relative_eq;

    fn unit_noise(lams: Vec<f64>, alpha2: f64) -> (SpectralOperator, DiffusionOperator) {
        let n = lams.len();
        let op = SpectralOperator::with_unit_weights(lams).unwrap();
        let params = HolderParams::new(1.0, 0.2, 1.0).unwrap();
        let g = DiffusionOperator::new(ModalFunction::new(vec![1.0; n], TimeProfile::constant()), alpha2, params)
            .unwrap();
        (op, g)
    }

    #[test]
    fn zero_gain_gives_zero_paths() {
        let (op, mut g) = unit_noise(vec![1.0, 2.0], 0.0);
        g.gains = ModalFunction::zero(2);
        let cfg = NoiseConfig::new(3, 4, TimeGrid::uniform(1.0, 8).unwrap()).unwrap();
        let ens = simulate_convolution(&op, &g, 0.0, &cfg).unwrap();
        for p in 0..4 {
            for j in 0..9 {
                assert!(ens.value(p, j).iter().all(|x| x.to_bits() == 0));
            }
        }
        let iso = ito_isometry_check(&op, &g, 1.0, &cfg).unwrap();
        assert_eq!(iso.mc_mean_square, 0.0);
        assert_eq!(iso.analytic, 0.0);
        assert_eq!(iso.z_score, 0.0);
    }

    #[test]
    fn isometry_analytic_values() {
        let (op, g) = unit_noise(vec![1.0], 0.0);
        let cfg = NoiseConfig::new(1, 10, TimeGrid::uniform(1.0, 8).unwrap()).unwrap();
        let r = ito_isometry_check(&op, &g, 1.0, &cfg).unwrap();
        assert_relative_eq!(r.analytic, 0.432332, epsilon = 1e-6);
        assert_relative_eq!(r.scheme_analytic, r.analytic, max_relative = 1e-13);
        assert!(r.warning.is_some());
        let (op, g) = unit_noise(vec![1.0, 4.0], 0.0);
        let r = ito_isometry_check(&op, &g, 1.0, &cfg).unwrap();
        assert_relative_eq!(r.analytic, 0.557290, epsilon = 1e-6);
    }

    #[test]
    fn kappa_regime() {
        let (op, g) = unit_noise(vec![1.0], 0.0);
        let cfg = NoiseConfig::new(1, 2, TimeGrid::uniform(1.0, 8).unwrap()).unwrap();
        assert!(matches!(simulate_convolution(&op, &g, 0.5, &cfg), Err(Error::Regime(_))));
        assert!(simulate_convolution(&op, &g, 0.49, &cfg).is_ok());
    }

    #[test]
    fn power_commutes_bitwise() {
        let (op, g) = unit_noise(vec![1.0, 3.0, 7.5], -1.0);
        let cfg = NoiseConfig::new(9, 5, TimeGrid::uniform(1.0, 16).unwrap()).unwrap();
        let base = simulate_convolution(&op, &g, 0.0, &cfg).unwrap();
        let direct = simulate_convolution(&op, &g, 0.7, &cfg).unwrap();
        assert_eq!(base.apply_power(&op, 0.7).unwrap(), direct);
        let mut lifted = g.clone();
        lifted.gains.coeffs = op.eigenvalues().iter().map(|l| l.powf(0.7) * 1.0).collect();
        let relabeled = simulate_convolution(&op, &lifted, 0.0, &cfg).unwrap();
        for p in 0..5 {
            for j in 0..17 {
                assert_eq!(relabeled.value(p, j), direct.value(p, j));
            }
        }
    }

    #[test]
    fn strict_identity_regime_and_zero_gain() {
        let (op, g) = unit_noise(vec![1.0], -0.25);
        let cfg = NoiseConfig::new(1, 4, TimeGrid::uniform(1.0, 16).unwrap()).unwrap();
        assert!(matches!(strict_identity_check(&op, &g, &cfg), Err(Error::Regime(_))));
        let (op, mut g) = unit_noise(vec![1.0], -1.0);
        g.gains = ModalFunction::zero(1);
        let r = strict_identity_check(&op, &g, &cfg).unwrap();
        assert_eq!(r.median_residual, 0.0);
    }

    #[test]
    fn holder_exponent_of_smooth_paths() {
        let g = TimeGrid::uniform(1.0, 256).unwrap();
        let paths: Vec<PathSample> = (0..3)
            .map(|i| PathSample::from_fn(g.clone(), vec![1.0, 2.0], |t| vec![t * (i as f64 + 1.0), -t]).unwrap())
            .collect();
        let ens = ConvolutionEnsemble::from_paths(&paths).unwrap();
        let r = empirical_holder_exponent(&ens, &HolderExponentOptions::default()).unwrap();
        assert_relative_eq!(r.gamma_hat, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn holder_exponent_needs_four_lags() {
        let g = TimeGrid::uniform(1.0, 16).unwrap();
        let p = PathSample::from_fn(g, vec![1.0], |t| vec![t]).unwrap();
        let ens = ConvolutionEnsemble::from_paths(&[p]).unwrap();
        assert!(matches!(
            empirical_holder_exponent(&ens, &HolderExponentOptions::default()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn graded_grid_has_no_uniform_window() {
        let g = TimeGrid::graded(1.0, 64, 2.0).unwrap();
        let p = PathSample::from_fn(g, vec![1.0], |t| vec![t]).unwrap();
        let ens = ConvolutionEnsemble::from_paths(&[p]).unwrap();
        assert!(empirical_holder_exponent(&ens, &HolderExponentOptions::default()).is_err());
    }

    #[test]
    fn stochastic_solve_regime_errors_list_inequalities() {
        use crate::mild::Forcing;
        let op = SpectralOperator::with_unit_weights(vec![1.0]).unwrap();
        let params = HolderParams::new(0.6, 0.2, 1.0).unwrap();
        let det = DeterministicProblem::new(op, 0.0, Forcing::Modal(ModalFunction::zero(1)), vec![1.0], params).unwrap();
        let g = DiffusionOperator::new(ModalFunction::zero(1), 0.0, params).unwrap();
        let cfg = NoiseConfig::new(1, 2, TimeGrid::uniform(1.0, 8).unwrap()).unwrap();
        let err = mild_solve_stochastic(&det, &g, 0.6, &cfg).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("σ < β - 1/2"), "{msg}");
        assert!(msg.contains("κ < 1/2 - α₂"), "{msg}");
    }

    #[test]
    fn zero_noise_reduces_to_deterministic() {
        use crate::mild::Forcing;
        let op = SpectralOperator::with_unit_weights(vec![1.0, 2.0]).unwrap();
        let params = HolderParams::new(0.9, 0.2, 1.0).unwrap();
        let f = ModalFunction::new(vec![1.0, 0.5], TimeProfile::constant());
        let det = DeterministicProblem::new(op.clone(), 0.0, Forcing::Modal(f), vec![1.0, -1.0], params).unwrap();
        let g = DiffusionOperator::new(ModalFunction::zero(2), -1.0, params).unwrap();
        let grid = TimeGrid::uniform(1.0, 16).unwrap();
        let cfg = NoiseConfig::new(5, 3, grid.clone()).unwrap();
        let s = mild_solve_stochastic(&det, &g, 0.0, &cfg).unwrap();
        let d = mild_solve(&det, &grid).unwrap();
        for p in 0..3 {
            assert_eq!(s.path(p), d.x);
        }
    }
}
