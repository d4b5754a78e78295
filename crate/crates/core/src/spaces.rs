//! Weighted Hölder spaces `F^{β,σ}((0,T]; E)` on sampled paths.
//!
//! A path is sampled on a [`TimeGrid`] and takes values in the weighted
//! sequence space of a [`SpectralOperator`](crate::spectral::SpectralOperator).
//! Norms are discrete sups over grid nodes and node pairs; they are lower
//! bounds of the continuum quantities and increase monotonically under grid
//! refinement. Graded grids `t_j = T (j/M)^r` put resolution near `t = 0`
//! where the weights are singular.
//!
//! Pairs with `s = 0` carry the weight `0^{1-β+σ} = 0` and are skipped, as is
//! the node `t = 0` in the sup term when `β < 1`. Paths that are undefined at
//! `t = 0` (negative powers) may therefore hold non-finite values there.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{check_len, Error, Result};
use crate::quad::tanh_sinh;
use crate::spectral::weighted_norm;
use crate::stats::linear_fit;

/// Exponent pair `(β, σ)` and horizon `T`, with `0 < σ < β ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderParams {
    pub beta: f64,
    pub sigma: f64,
    pub horizon: f64,
}

impl HolderParams {
    pub fn new(beta: f64, sigma: f64, horizon: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma < beta && beta <= 1.0) {
            return Err(Error::input(format!(
                "Hölder exponents need 0 < σ < β ≤ 1, got β = {beta}, σ = {sigma}"
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::input(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self {
            beta,
            sigma,
            horizon,
        })
    }

    /// Exponent of the pair weight `s^{1-β+σ}`.
    pub fn pair_weight_exponent(&self) -> f64 {
        1.0 - self.beta + self.sigma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    /// Grading exponent when built by [`TimeGrid::graded`].
    grading: Option<f64>,
}

impl TimeGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::input(format!("a grid needs at least 2 nodes, got {}", nodes.len())));
        }
        if nodes.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::input("grid nodes must be finite and non-negative"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input("grid nodes must be strictly increasing"));
        }
        Ok(Self {
            nodes,
            grading: None,
        })
    }

    /// `t_j = T (j/M)^r`, `j = 0..=M`, with `M ≥ 8` and `r ≥ 1`.
    pub fn graded(horizon: f64, m: usize, r: f64) -> Result<Self> {
        if m < 8 {
            return Err(Error::input(format!("grid needs M ≥ 8 intervals, got {m}")));
        }
        if !(r >= 1.0 && r.is_finite()) {
            return Err(Error::input(format!("grading exponent must be ≥ 1, got {r}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::input(format!("horizon must be positive, got {horizon}")));
        }
        let mut nodes: Vec<f64> = (0..=m)
            .map(|j| horizon * (j as f64 / m as f64).powf(r))
            .collect();
        nodes[m] = horizon;
        Ok(Self {
            nodes,
            grading: Some(r),
        })
    }

    pub fn uniform(horizon: f64, m: usize) -> Result<Self> {
        Self::graded(horizon, m, 1.0)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of intervals `M`.
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn grading(&self) -> Option<f64> {
        self.grading
    }

    pub fn horizon(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn starts_at_zero(&self) -> bool {
        self.nodes[0] == 0.0
    }

    /// Index of the node equal to `t` up to a relative `1e-12`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * self.horizon().max(1.0);
        self.nodes.iter().position(|&s| (s - t).abs() <= tol)
    }
}

/// A path sampled on a grid with values in a weighted sequence space.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    grid: TimeGrid,
    weights: Vec<f64>,
    /// Row-major: node-major, mode-minor.
    data: Vec<f64>,
}

impl PathSample {
    pub fn from_flat(grid: TimeGrid, weights: Vec<f64>, data: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::input("path needs at least one mode"));
        }
        check_len(grid.len() * weights.len(), data.len())?;
        Ok(Self {
            grid,
            weights,
            data,
        })
    }

    pub fn new(grid: TimeGrid, weights: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        check_len(grid.len(), values.len())?;
        let dim = weights.len();
        let mut data = Vec::with_capacity(dim * values.len());
        for v in &values {
            check_len(dim, v.len())?;
            data.extend_from_slice(v);
        }
        Self::from_flat(grid, weights, data)
    }

    pub fn from_fn(grid: TimeGrid, weights: Vec<f64>, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let values = grid.nodes().iter().map(|&t| f(t)).collect();
        Self::new(grid, weights, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn value(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.data[j * d..(j + 1) * d]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn norm_at(&self, j: usize) -> f64 {
        weighted_norm(&self.weights, self.value(j))
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.value(i)
            .iter()
            .zip(self.value(j))
            .zip(&self.weights)
            .map(|((a, b), w)| w * (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Multiplies mode `k` by `factors[k]` at every node.
    pub fn scale_modes(&self, factors: &[f64]) -> Result<PathSample> {
        check_len(self.dim(), factors.len())?;
        let d = self.dim();
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, x)| x * factors[i % d])
            .collect();
        Ok(PathSample {
            grid: self.grid.clone(),
            weights: self.weights.clone(),
            data,
        })
    }

    pub fn scaled(&self, c: f64) -> PathSample {
        PathSample {
            grid: self.grid.clone(),
            weights: self.weights.clone(),
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    pub fn add(&self, other: &PathSample) -> Result<PathSample> {
        if self.grid != other.grid || self.weights != other.weights {
            return Err(Error::input("paths live on different grids or spaces"));
        }
        Ok(PathSample {
            grid: self.grid.clone(),
            weights: self.weights.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    /// Scalar path `t ↦ ‖f(t)‖` with unit weight.
    pub fn norm_path(&self) -> PathSample {
        PathSample {
            grid: self.grid.clone(),
            weights: vec![1.0],
            data: (0..self.len()).map(|j| self.norm_at(j)).collect(),
        }
    }

    /// Writes `t,c_1,…,c_N` CSV (UTF-8, `.` decimal separator).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim()).map(|k| format!("c_{k}")));
        w.write_record(&header)?;
        for j in 0..self.len() {
            let mut rec = vec![format!("{}", self.times()[j])];
            rec.extend(self.value(j).iter().map(|x| format!("{x}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a path written by [`write_csv`](Self::write_csv). Unit weights
    /// are used when `weights` is `None`.
    pub fn read_csv<R: Read>(input: R, weights: Option<Vec<f64>>) -> Result<PathSample> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || headers.get(0) != Some("t") {
            return Err(Error::Parse("CSV header must be `t,c_1,…,c_N`".into()));
        }
        let dim = headers.len() - 1;
        let mut times = Vec::new();
        let mut data = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let mut fields = rec.iter().map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("not a number: `{f}`")))
            });
            times.push(fields.next().ok_or_else(|| Error::Parse("empty row".into()))??);
            for x in fields {
                data.push(x?);
            }
        }
        let weights = weights.unwrap_or_else(|| vec![1.0; dim]);
        check_len(dim, weights.len())?;
        PathSample::from_flat(TimeGrid::new(times)?, weights, data)
    }
}

/// Outcome of a finite-sample limit test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The grid does not reach small enough times to decide.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MembershipOptions {
    /// Relative tolerance on the Cauchy oscillation of `t^{1-β} f(t)`.
    pub limit_tol: f64,
    /// Relative tolerance (fraction of the total norm) on the tail of `w_f`.
    pub modulus_tol: f64,
    /// Minimal fitted log-log decay rate accepted as convergence.
    pub min_rate: f64,
    /// Minimal number of positive nodes below a dyadic level.
    pub min_level_nodes: usize,
}

impl Default for MembershipOptions {
    fn default() -> Self {
        Self {
            limit_tol: 1e-2,
            modulus_tol: 1e-2,
            min_rate: 0.05,
            min_level_nodes: 8,
        }
    }
}

/// Dyadic tail measurements backing the two vanishing conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    /// Limit of `t^{1-β} f(t)` as `t → 0`.
    pub limit: Verdict,
    /// `(τ, sup_{s,t ≤ τ} ‖t^{1-β}f(t) - s^{1-β}f(s)‖)` per dyadic level.
    pub limit_tail: Vec<(f64, f64)>,
    pub limit_rate: Option<f64>,
    /// `t^{1-β} f(t)` at the smallest positive node.
    pub limit_estimate: Option<Vec<f64>>,
    /// Vanishing of the Hölder modulus `w_f(t)` as `t → 0`.
    pub modulus: Verdict,
    /// `(τ, max_{τ/2 < t ≤ τ} w_f(t))` per dyadic band.
    pub modulus_tail: Vec<(f64, f64)>,
    pub modulus_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderNormReport {
    pub sup_term: f64,
    pub seminorm: f64,
    pub w_profile: Vec<f64>,
    pub total: f64,
    pub membership: MembershipReport,
}

impl HolderNormReport {
    pub fn limit_exists(&self) -> Verdict {
        self.membership.limit
    }

    pub fn modulus_vanishes(&self) -> Verdict {
        self.membership.modulus
    }
}

struct PairScan {
    sup_term: f64,
    w_profile: Vec<f64>,
}

fn check_path(path: &PathSample, params: &HolderParams) -> Result<()> {
    if path.len() < 2 {
        return Err(Error::input("Hölder norm needs at least 2 nodes"));
    }
    if path.grid.horizon() > params.horizon * (1.0 + 1e-12) {
        return Err(Error::input(format!(
            "path extends to {} beyond the horizon {}",
            path.grid.horizon(),
            params.horizon
        )));
    }
    Ok(())
}

fn pair_scan(path: &PathSample, params: &HolderParams) -> PairScan {
    let times = path.times();
    let beta = params.beta;
    let sigma = params.sigma;
    let e = params.pair_weight_exponent();
    let sup_term = (0..path.len())
        .filter(|&j| times[j] > 0.0 || beta == 1.0)
        .map(|j| {
            let weight = if beta == 1.0 { 1.0 } else { times[j].powf(1.0 - beta) };
            weight * path.norm_at(j)
        })
        .fold(0.0, f64::max);
    let s_weight: Vec<f64> = times.iter().map(|&s| if s > 0.0 { s.powf(e) } else { 0.0 }).collect();
    let w_profile = (0..path.len())
        .map(|j| {
            (0..j)
                .filter(|&i| times[i] > 0.0)
                .map(|i| s_weight[i] * path.distance(i, j) / (times[j] - times[i]).powf(sigma))
                .fold(0.0, f64::max)
        })
        .collect();
    PairScan {
        sup_term,
        w_profile,
    }
}

/// Discrete `F^{β,σ}` norm: `sup_t t^{1-β}‖f(t)‖ + sup_{s<t} s^{1-β+σ}‖f(t)-f(s)‖/(t-s)^σ`.
pub fn weighted_holder_norm(path: &PathSample, params: &HolderParams) -> Result<HolderNormReport> {
    check_path(path, params)?;
    let scan = pair_scan(path, params);
    let seminorm = scan.w_profile.iter().copied().fold(0.0, f64::max);
    let total = scan.sup_term + seminorm;
    let membership = membership_from_scan(path, params, &scan, total, &MembershipOptions::default());
    Ok(HolderNormReport {
        sup_term: scan.sup_term,
        seminorm,
        w_profile: scan.w_profile,
        total,
        membership,
    })
}

/// Tests the two limit conditions of `F^{β,σ}` on the small-time tail of the grid.
pub fn membership_diagnostics(
    path: &PathSample,
    params: &HolderParams,
    options: &MembershipOptions,
) -> Result<MembershipReport> {
    check_path(path, params)?;
    let scan = pair_scan(path, params);
    let total = scan.sup_term + scan.w_profile.iter().copied().fold(0.0, f64::max);
    Ok(membership_from_scan(path, params, &scan, total, options))
}

fn fitted_rate(tail: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .filter(|(_, v)| *v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Some(linear_fit(&xs, &ys).slope)
}

fn membership_from_scan(
    path: &PathSample,
    params: &HolderParams,
    scan: &PairScan,
    total: f64,
    opts: &MembershipOptions,
) -> MembershipReport {
    let times = path.times();
    let tau0 = params.horizon / 4.0;
    let small: Vec<usize> = (0..path.len()).filter(|&j| times[j] > 0.0 && times[j] <= tau0).collect();
    let level_of = |t: f64| (tau0 / t).log2().floor().max(0.0) as usize;
    // Levels m with at least `min_level_nodes` positive nodes in (0, τ0 2^{-m}].
    let mut levels = 0;
    while small
        .iter()
        .filter(|&&j| level_of(times[j]) >= levels)
        .count()
        >= opts.min_level_nodes
    {
        levels += 1;
    }
    let tau = |m: usize| tau0 / 2f64.powi(m as i32);

    let inconclusive = MembershipReport {
        limit: Verdict::Inconclusive,
        limit_tail: vec![],
        limit_rate: None,
        limit_estimate: None,
        modulus: Verdict::Inconclusive,
        modulus_tail: vec![],
        modulus_rate: None,
    };
    if small.len() < opts.min_level_nodes || levels < 3 {
        return inconclusive;
    }

    // Cauchy oscillation of g(t) = t^{1-β} f(t) below each level.
    let d = path.dim();
    let g: Vec<Vec<f64>> = small
        .iter()
        .map(|&j| {
            let wgt = times[j].powf(1.0 - params.beta);
            path.value(j).iter().map(|x| wgt * x).collect()
        })
        .collect();
    let scale = g
        .iter()
        .map(|v| weighted_norm(path.weights(), v))
        .fold(0.0, f64::max);
    let mut osc = vec![0.0f64; levels];
    for b in 0..small.len() {
        let lvl = level_of(times[small[b]]);
        let mut best = 0.0f64;
        for a in 0..b {
            let dist = (0..d)
                .map(|k| path.weights()[k] * (g[a][k] - g[b][k]).powi(2))
                .sum::<f64>()
                .sqrt();
            best = best.max(dist);
        }
        for o in osc.iter_mut().take(lvl.min(levels - 1) + 1) {
            *o = o.max(best);
        }
    }
    // A pair is attributed to the level of its earlier node, so a level's sup
    // covers all pairs inside it.
    let mut osc_nested = osc.clone();
    for m in (0..levels.saturating_sub(1)).rev() {
        osc_nested[m] = osc_nested[m].max(osc_nested[m + 1]);
    }
    let limit_tail: Vec<(f64, f64)> = (0..levels).map(|m| (tau(m), osc_nested[m])).collect();
    let limit_rate = fitted_rate(&limit_tail);
    let final_osc = limit_tail[levels - 1].1;
    let limit = if scale == 0.0
        || final_osc <= opts.limit_tol * scale
        || limit_rate.is_some_and(|r| r >= opts.min_rate)
    {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let limit_estimate = g.first().cloned();

    // Dyadic band maxima of w_f.
    let mut bands = vec![0.0f64; levels];
    let mut band_seen = vec![false; levels];
    for &j in &small {
        let lvl = level_of(times[j]);
        if lvl < levels {
            bands[lvl] = bands[lvl].max(scan.w_profile[j]);
            band_seen[lvl] = true;
        }
    }
    let modulus_tail: Vec<(f64, f64)> = (0..levels)
        .filter(|&m| band_seen[m])
        .map(|m| (tau(m), bands[m]))
        .collect();
    let modulus_rate = fitted_rate(&modulus_tail);
    let modulus = if modulus_tail.len() < 3 {
        Verdict::Inconclusive
    } else {
        let n = modulus_tail.len();
        let last3 = &modulus_tail[n - 3..];
        let fin = last3[2].1;
        let decreasing = last3[0].1 > last3[1].1 && last3[1].1 > last3[2].1;
        let decaying = decreasing && modulus_rate.is_some_and(|r| r >= opts.min_rate);
        if total == 0.0 || fin <= opts.modulus_tol * total || decaying {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    };

    MembershipReport {
        limit,
        limit_tail,
        limit_rate,
        limit_estimate,
        modulus,
        modulus_tail,
        modulus_rate,
    }
}

/// Canonical test functions for the weighted Hölder spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunctionKind {
    /// `t^{β-1} v`
    Power,
    /// `v`
    Constant,
    /// `t^{β-1+σ} v`
    Holder,
    /// `(t^{β-1} + t^{β-1+σ}) v`
    PowerPlusHolder,
    /// `sin(1/t) t^{β-1} v`, which has no weighted limit at 0.
    Oscillatory,
}

impl std::str::FromStr for TestFunctionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "power" => Self::Power,
            "constant" => Self::Constant,
            "holder" => Self::Holder,
            "power_plus_holder" => Self::PowerPlusHolder,
            "oscillatory" => Self::Oscillatory,
            other => return Err(Error::Parse(format!("unknown test function `{other}`"))),
        })
    }
}

pub fn make_test_function(
    kind: TestFunctionKind,
    params: &HolderParams,
    v: &[f64],
    weights: &[f64],
    grid: &TimeGrid,
) -> Result<PathSample> {
    check_len(weights.len(), v.len())?;
    let (b, s) = (params.beta, params.sigma);
    let scalar = move |t: f64| -> f64 {
        match kind {
            TestFunctionKind::Power => t.powf(b - 1.0),
            TestFunctionKind::Constant => 1.0,
            TestFunctionKind::Holder => t.powf(b - 1.0 + s),
            TestFunctionKind::PowerPlusHolder => t.powf(b - 1.0) + t.powf(b - 1.0 + s),
            TestFunctionKind::Oscillatory => (1.0 / t).sin() * t.powf(b - 1.0),
        }
    };
    PathSample::from_fn(grid.clone(), weights.to_vec(), |t| {
        let c = scalar(t);
        v.iter().map(|x| c * x).collect()
    })
}

fn check_beta_args(a: f64, b: f64, s: f64, t: f64) -> Result<()> {
    if !(s.is_finite() && t.is_finite() && s >= 0.0 && s < t) {
        return Err(Error::input(format!("need 0 ≤ s < t, got s = {s}, t = {t}")));
    }
    if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) {
        return Err(Error::UnsupportedSingularity { a, b });
    }
    Ok(())
}

/// `∫_s^t (t-u)^{a-1} (u-s)^{b-1} du`, computed by quadrature.
///
/// After `u = s + (t-s)x` the integral is `(t-s)^{a+b-1} ∫_0^1 x^{b-1}(1-x)^{a-1} dx`.
/// Each half of the unit interval is mapped by `x = y^{1/b}` (resp.
/// `1-x = y^{1/a}`) to a bounded integrand and integrated by tanh–sinh.
pub fn beta_kernel_integral(a: f64, b: f64, s: f64, t: f64) -> Result<f64> {
    check_beta_args(a, b, s, t)?;
    let left = tanh_sinh(|y, _, _| (1.0 - y.powf(1.0 / b)).powf(a - 1.0), 0.0, 0.5f64.powf(b), 1e-15).0 / b;
    let right = tanh_sinh(|y, _, _| (1.0 - y.powf(1.0 / a)).powf(b - 1.0), 0.0, 0.5f64.powf(a), 1e-15).0 / a;
    Ok((t - s).powf(a + b - 1.0) * (left + right))
}

/// Closed form `(t-s)^{a+b-1} B(b, a)` via log-Gamma.
pub fn beta_kernel_closed_form(a: f64, b: f64, s: f64, t: f64) -> Result<f64> {
    check_beta_args(a, b, s, t)?;
    let beta = (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp();
    Ok((t - s).powf(a + b - 1.0) * beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn params(beta: f64, sigma: f64) -> HolderParams {
        HolderParams::new(beta, sigma, 1.0).unwrap()
    }

    #[test]
    fn params_and_grid_validation() {
        assert!(HolderParams::new(0.5, 0.5, 1.0).is_err());
        assert!(HolderParams::new(1.1, 0.2, 1.0).is_err());
        assert!(HolderParams::new(0.8, 0.2, 0.0).is_err());
        assert!(TimeGrid::graded(1.0, 4, 2.0).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.5, 0.5]).is_err());
        let g = TimeGrid::graded(2.0, 16, 2.0).unwrap();
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.horizon(), 2.0);
        assert_relative_eq!(g.nodes()[4], 2.0 / 16.0, max_relative = 1e-15);
    }

    #[test]
    fn too_few_nodes_is_an_input_error() {
        let g = TimeGrid::new(vec![0.5, 1.0]).unwrap();
        let p = PathSample::new(g, vec![1.0], vec![vec![1.0], vec![1.0]]).unwrap();
        // two nodes are enough for the norm itself
        assert!(weighted_holder_norm(&p, &params(1.0, 0.5)).is_ok());
    }

    #[test]
    fn constant_path_with_beta_one() {
        let g = TimeGrid::graded(1.0, 64, 2.0).unwrap();
        let v = [3.0, 4.0];
        let p = make_test_function(TestFunctionKind::Constant, &params(1.0, 0.3), &v, &[1.0, 1.0], &g).unwrap();
        let r = weighted_holder_norm(&p, &params(1.0, 0.3)).unwrap();
        assert_eq!(r.sup_term, 5.0);
        assert_eq!(r.seminorm, 0.0);
        assert_eq!(r.total, 5.0);
        assert_eq!(r.modulus_vanishes(), Verdict::Pass);
        assert_eq!(r.limit_exists(), Verdict::Pass);
    }

    #[test]
    fn power_function_sup_term_is_norm_of_v() {
        let g = TimeGrid::graded(1.0, 256, 2.0).unwrap();
        let prm = params(0.8, 0.2);
        let p = make_test_function(TestFunctionKind::Power, &prm, &[1.0], &[1.0], &g).unwrap();
        let r = weighted_holder_norm(&p, &prm).unwrap();
        assert_relative_eq!(r.sup_term, 1.0, max_relative = 1e-14);
        assert_eq!(r.limit_exists(), Verdict::Pass);
    }

    #[test]
    fn power_plus_holder_value() {
        let g = TimeGrid::new(vec![0.25, 1.0]).unwrap();
        let p = make_test_function(TestFunctionKind::PowerPlusHolder, &params(0.8, 0.2), &[1.0], &[1.0], &g).unwrap();
        assert_relative_eq!(p.value(0)[0], 2.319508, epsilon = 1e-6);
        assert_eq!(p.value(1)[0], 2.0);
    }

    #[test]
    fn constant_with_beta_below_one_has_zero_limit() {
        let g = TimeGrid::graded(1.0, 512, 2.0).unwrap();
        let prm = params(0.8, 0.2);
        let p = make_test_function(TestFunctionKind::Constant, &prm, &[1.0], &[1.0], &g).unwrap();
        let m = membership_diagnostics(&p, &prm, &MembershipOptions::default()).unwrap();
        assert_eq!(m.limit, Verdict::Pass);
        assert!(m.limit_estimate.unwrap()[0] < 0.2);
    }

    #[test]
    fn oscillatory_fails_limit_test_on_refinement() {
        let prm = params(0.8, 0.2);
        for m in [256, 512, 1024] {
            let g = TimeGrid::graded(1.0, m, 2.0).unwrap();
            let p = make_test_function(TestFunctionKind::Oscillatory, &prm, &[1.0], &[1.0], &g).unwrap();
            let r = membership_diagnostics(&p, &prm, &MembershipOptions::default()).unwrap();
            assert_eq!(r.limit, Verdict::Fail, "M = {m}: {:?}", r.limit_tail);
        }
    }

    #[test]
    fn coarse_grid_is_inconclusive() {
        let prm = params(0.8, 0.2);
        let g = TimeGrid::uniform(1.0, 16).unwrap();
        let p = make_test_function(TestFunctionKind::Power, &prm, &[1.0], &[1.0], &g).unwrap();
        let r = membership_diagnostics(&p, &prm, &MembershipOptions::default()).unwrap();
        assert_eq!(r.limit, Verdict::Inconclusive);
        assert_eq!(r.modulus, Verdict::Inconclusive);
    }

    #[test]
    fn holder_member_has_vanishing_modulus_power_does_not() {
        let prm = params(0.8, 0.2);
        let g = TimeGrid::graded(1.0, 1024, 2.0).unwrap();
        let h = make_test_function(TestFunctionKind::Holder, &prm, &[1.0], &[1.0], &g).unwrap();
        let rh = weighted_holder_norm(&h, &prm).unwrap();
        assert_eq!(rh.modulus_vanishes(), Verdict::Pass, "{:?}", rh.membership.modulus_tail);
        let p = make_test_function(TestFunctionKind::Power, &prm, &[1.0], &[1.0], &g).unwrap();
        let rp = weighted_holder_norm(&p, &prm).unwrap();
        // w_f(t) is scale invariant for t^{β-1}: it does not vanish at 0.
        assert_eq!(rp.modulus_vanishes(), Verdict::Fail, "{:?}", rp.membership.modulus_tail);
    }

    #[test]
    fn holder_inequalities_hold_at_node_pairs() {
        let prm = params(0.7, 0.3);
        let g = TimeGrid::graded(1.0, 128, 2.0).unwrap();
        let p = make_test_function(TestFunctionKind::PowerPlusHolder, &prm, &[1.0, -2.0], &[1.0, 0.5], &g).unwrap();
        let r = weighted_holder_norm(&p, &prm).unwrap();
        let t = p.times();
        for j in 1..p.len() {
            assert!(p.norm_at(j) <= r.total * t[j].powf(prm.beta - 1.0) * (1.0 + 1e-12));
            for i in 1..j {
                let bound = r.total * (t[j] - t[i]).powf(prm.sigma) * t[i].powf(prm.beta - prm.sigma - 1.0);
                assert!(p.distance(i, j) <= bound * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn beta_kernel_examples() {
        let v = beta_kernel_integral(0.5, 0.5, 0.0, 1.0).unwrap();
        assert_relative_eq!(v, PI, max_relative = 1e-10);
        let v = beta_kernel_integral(2.0 / 3.0, 1.0 / 3.0, 0.0, 7.0).unwrap();
        assert_relative_eq!(v, PI / (PI / 3.0).sin(), max_relative = 1e-10);
        assert_relative_eq!(v, 3.627599, epsilon = 1e-6);
        let v = beta_kernel_integral(0.5, 0.5, 0.0, 4.0).unwrap();
        assert_relative_eq!(v, PI, max_relative = 1e-10);
    }

    #[test]
    fn beta_kernel_errors() {
        assert!(matches!(beta_kernel_integral(0.5, 0.5, 1.0, 1.0), Err(Error::Input(_))));
        assert!(matches!(
            beta_kernel_integral(1.0, 0.5, 0.0, 1.0),
            Err(Error::UnsupportedSingularity { .. })
        ));
        assert!(matches!(
            beta_kernel_closed_form(0.5, 0.0, 0.0, 1.0),
            Err(Error::UnsupportedSingularity { .. })
        ));
    }

    #[test]
    fn beta_kernel_extreme_exponents() {
        for &(a, b) in &[(0.01, 0.5), (0.5, 0.01), (0.99, 0.99), (0.02, 0.03)] {
            let n = beta_kernel_integral(a, b, 0.3, 1.1).unwrap();
            let c = beta_kernel_closed_form(a, b, 0.3, 1.1).unwrap();
            assert_relative_eq!(n, c, max_relative = 1e-8);
        }
    }

    #[test]
    fn csv_round_trip_preserves_values() {
        let g = TimeGrid::graded(1.0, 8, 2.0).unwrap();
        let prm = params(0.8, 0.2);
        let p = make_test_function(TestFunctionKind::Power, &prm, &[1.0, 0.1], &[1.0, 1.0], &g).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,c_1,c_2\n"));
        let back = PathSample::read_csv(buf.as_slice(), None).unwrap();
        assert_eq!(back.times(), p.times());
        assert_eq!(back.value(3), p.value(3));
        assert!(back.value(0)[0].is_infinite());
    }
}
