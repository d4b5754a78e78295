//! Deterministic evolution equation `dX + AX dt = F dt`, `X(0) = ξ`.
//!
//! The forcing is described through `A^{-α₁}F`, which is what the regularity
//! theory controls. Each mode is integrated exactly against the semigroup
//! kernel: `X_k(t_{j+1}) = e^{-λ_k h} X_k(t_j) + ∫_{t_j}^{t_{j+1}} e^{-λ_k(t_{j+1}-s)} F_k(s) ds`.
//! Closed-form forcings have their exponential moments evaluated by
//! error-controlled quadrature; sampled forcings use product integration,
//! interpolating `s^{1-β} F_k(s)` linearly on each interval so that the
//! `s^{β-1}` singularity is carried by exact moments.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::profile::ModalFunction;
use crate::quad::exp_power_integral;
use crate::spaces::{weighted_holder_norm, HolderParams, PathSample, TimeGrid, Verdict};
use crate::spectral::{weighted_norm, SpectralOperator};

#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    /// `A^{-α₁}F(t) = coeffs_k φ(t)` with a closed-form profile `φ`.
    Modal(ModalFunction),
    /// `A^{-α₁}F` sampled on the solve grid.
    Sampled(PathSample),
}

impl Forcing {
    pub fn dim(&self) -> usize {
        match self {
            Forcing::Modal(m) => m.dim(),
            Forcing::Sampled(p) => p.dim(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicProblem {
    pub op: SpectralOperator,
    pub alpha1: f64,
    pub forcing: Forcing,
    pub xi: Vec<f64>,
    pub params: HolderParams,
}

impl DeterministicProblem {
    pub fn new(
        op: SpectralOperator,
        alpha1: f64,
        forcing: Forcing,
        xi: Vec<f64>,
        params: HolderParams,
    ) -> Result<Self> {
        if !(alpha1 < 1.0) {
            return Err(Error::regime(format!("α₁ must be < 1, got {alpha1}")));
        }
        check_len(op.dim(), xi.len())?;
        check_len(op.dim(), forcing.dim())?;
        if xi.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("initial value must be finite"));
        }
        if let Forcing::Sampled(p) = &forcing {
            if p.weights() != op.weights() {
                return Err(Error::input("sampled forcing uses different space weights"));
            }
        }
        Ok(Self {
            op,
            alpha1,
            forcing,
            xi,
            params,
        })
    }

    /// Per-mode factors `λ_k^{α₁}` turning `A^{-α₁}F` into `F`.
    fn lift(&self) -> Vec<f64> {
        self.op.eigenvalues().iter().map(|l| l.powf(self.alpha1)).collect()
    }

    /// `A^{-α₁}F` sampled on `grid`.
    pub fn forcing_samples(&self, grid: &TimeGrid) -> Result<PathSample> {
        match &self.forcing {
            Forcing::Modal(m) => PathSample::from_fn(grid.clone(), self.op.weights().to_vec(), |t| m.eval(t)),
            Forcing::Sampled(p) => {
                if p.grid() != grid {
                    return Err(Error::input("sampled forcing is not given on the solve grid"));
                }
                Ok(p.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath {
    pub x: PathSample,
    /// `A^{1-α₁}X`
    pub ax_frac: PathSample,
    pub dxdt: PathSample,
    /// `A^{-α₁}F` on the grid.
    pub forcing: PathSample,
    /// Accumulated quadrature error bound for `X` in the space norm.
    pub quadrature_tol: f64,
}

/// Mild solution on `grid`, which must start at `t = 0`.
pub fn mild_solve(problem: &DeterministicProblem, grid: &TimeGrid) -> Result<SolutionPath> {
    if !grid.starts_at_zero() {
        return Err(Error::input("the solve grid must start at t = 0"));
    }
    solve_from(problem, grid, &problem.xi)
}

/// Mild solution on `grid` started from `x_start` at `grid[0]`.
pub fn mild_restart(problem: &DeterministicProblem, grid: &TimeGrid, x_start: &[f64]) -> Result<SolutionPath> {
    check_len(problem.op.dim(), x_start.len())?;
    solve_from(problem, grid, x_start)
}

fn check_grid(problem: &DeterministicProblem, grid: &TimeGrid) -> Result<()> {
    if grid.horizon() > problem.params.horizon * (1.0 + 1e-12) {
        return Err(Error::input(format!(
            "grid reaches {} beyond the horizon {}",
            grid.horizon(),
            problem.params.horizon
        )));
    }
    Ok(())
}

/// Weighted values `g_j = t_j^{1-β} G(t_j)` of a sampled forcing, with the
/// `t = 0` value extended from the first positive node when `G(0)` is singular.
fn weighted_samples(samples: &PathSample, beta: f64) -> Result<Vec<Vec<f64>>> {
    let t = samples.times();
    let mut g: Vec<Vec<f64>> = (0..samples.len())
        .map(|j| {
            let w = if beta == 1.0 { 1.0 } else { t[j].powf(1.0 - beta) };
            samples.value(j).iter().map(|x| w * x).collect()
        })
        .collect();
    for j in 0..g.len() {
        if g[j].iter().all(|x| x.is_finite()) {
            continue;
        }
        if j == 0 && t[0] == 0.0 && beta < 1.0 && g.len() > 1 && g[1].iter().all(|x| x.is_finite()) {
            g[0] = g[1].clone();
        } else {
            return Err(Error::input(format!("forcing undefined at t = {}", t[j])));
        }
    }
    Ok(g)
}

/// Product-integration weights `(w_lo, w_hi)` such that
/// `∫_a^b e^{-λ(b-s)} s^{β-1} (linear interpolant of g) ds = w_lo g(a) + w_hi g(b)`.
fn product_weights(rate: f64, beta: f64, a: f64, b: f64) -> (f64, f64) {
    let h = b - a;
    let m0 = exp_power_integral(rate, beta - 1.0, a, b, b);
    let m1 = exp_power_integral(rate, beta, a, b, b);
    // g(s) = g_a (b - s)/h + g_b (s - a)/h
    ((b * m0 - m1) / h, (m1 - a * m0) / h)
}

fn solve_from(problem: &DeterministicProblem, grid: &TimeGrid, x_start: &[f64]) -> Result<SolutionPath> {
    check_grid(problem, grid)?;
    let n = problem.op.dim();
    let m = grid.len();
    let t = grid.nodes();
    let lam = problem.op.eigenvalues();
    let lift = problem.lift();
    let forcing = problem.forcing_samples(grid)?;

    let mut x = vec![0.0; n * m];
    x[..n].copy_from_slice(x_start);
    // Per-node accumulated error bound, per mode.
    let mut err = vec![0.0; n];
    let mut tol: f64 = 0.0;

    match &problem.forcing {
        Forcing::Modal(mf) => {
            for j in 0..m - 1 {
                let (a, b) = (t[j], t[j + 1]);
                for k in 0..n {
                    let decay = (-lam[k] * (b - a)).exp();
                    let (mom, e) = if mf.coeffs[k] == 0.0 {
                        (0.0, 0.0)
                    } else {
                        mf.profile.exp_moment(lam[k], a, b, b)
                    };
                    let c = lift[k] * mf.coeffs[k];
                    x[(j + 1) * n + k] = decay * x[j * n + k] + c * mom;
                    err[k] = decay * err[k] + c.abs() * e;
                }
                tol = tol.max(weighted_norm(problem.op.weights(), &err));
            }
        }
        Forcing::Sampled(_) => {
            let g = weighted_samples(&forcing, problem.params.beta)?;
            let beta = problem.params.beta;
            for j in 0..m - 1 {
                let (a, b) = (t[j], t[j + 1]);
                for k in 0..n {
                    let decay = (-lam[k] * (b - a)).exp();
                    let (wl, wh) = product_weights(lam[k], beta, a, b);
                    let c = lift[k];
                    let step = wl * g[j][k] + wh * g[j + 1][k];
                    x[(j + 1) * n + k] = decay * x[j * n + k] + c * step;
                    // First-order indicator: linear against left-constant interpolation.
                    err[k] = decay * err[k] + (c * wh * (g[j + 1][k] - g[j][k])).abs();
                }
                tol = tol.max(weighted_norm(problem.op.weights(), &err));
            }
        }
    }

    let scale = x
        .chunks(n)
        .map(|v| weighted_norm(problem.op.weights(), v))
        .fold(0.0, f64::max);
    tol += 4.0 * m as f64 * f64::EPSILON * scale;

    let weights = problem.op.weights().to_vec();
    let x = PathSample::from_flat(grid.clone(), weights.clone(), x)?;
    let frac: Vec<f64> = lam.iter().map(|l| l.powf(1.0 - problem.alpha1)).collect();
    let ax_frac = x.scale_modes(&frac)?;
    // dX/dt = -λX + F per mode, evaluated exactly at the nodes.
    let mut dxdt = Vec::with_capacity(n * m);
    for j in 0..m {
        let f = forcing.value(j);
        for k in 0..n {
            dxdt.push(-lam[k] * x.value(j)[k] + lift[k] * f[k]);
        }
    }
    let dxdt = PathSample::from_flat(grid.clone(), weights, dxdt)?;
    Ok(SolutionPath {
        x,
        ax_frac,
        dxdt,
        forcing,
        quadrature_tol: tol,
    })
}

/// Weights `(a, b)` of the exponentially fitted trapezoid
/// `∫_0^h y ≈ a y(0) + b y(h)`, exact on `span{1, e^{-λs}}`, with `z = λh`.
fn fitted_trapezoid(z: f64, h: f64) -> (f64, f64) {
    if z < 1e-2 {
        let z3 = z * z * z;
        let b = 0.5 + z / 12.0 - z3 / 720.0 + z3 * z * z / 30240.0;
        let a = 0.5 - z / 12.0 + z3 / 720.0 - z3 * z * z / 30240.0;
        (a * h, b * h)
    } else {
        let b = 1.0 / (-(-z).exp_m1()) - 1.0 / z;
        let a = 1.0 / z - 1.0 / z.exp_m1();
        (a * h, b * h)
    }
}

/// Coefficient `c` of the fitted Hermite rule
/// `∫_0^h y ≈ h/2 (y(0) + y(h)) + c (y'(0) - y'(h))`, exact on `span{1, s, e^{-λs}}`.
fn fitted_hermite(z: f64, h: f64) -> f64 {
    let c = if z < 0.2 {
        let z2 = z * z;
        1.0 / 12.0 - z2 / 720.0 + z2 * z2 / 30240.0 - z2 * z2 * z2 / 1209600.0
    } else {
        let e = (-z).exp();
        ((1.0 + e) / 2.0 + (-z).exp_m1() / z) / (-z * (-z).exp_m1())
    };
    c * h * h
}

/// Residual of the integrated equation together with its rounding floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrictResidual {
    /// `max_j ‖X(t_j) - ξ + ∫_0^{t_j} AX ds - ∫_0^{t_j} F ds‖`
    pub residual: f64,
    /// Floating-point floor below which the residual carries no information.
    pub floor: f64,
}

/// `max_j ‖X(t_j) - ξ + ∫_0^{t_j} AX ds - ∫_0^{t_j} F ds‖`.
pub fn strict_residual(sol: &SolutionPath, problem: &DeterministicProblem) -> Result<f64> {
    Ok(strict_residual_report(sol, problem)?.residual)
}

pub fn strict_residual_report(sol: &SolutionPath, problem: &DeterministicProblem) -> Result<StrictResidual> {
    let (res, scale) = residual_vectors(sol, problem)?;
    let n = problem.op.dim();
    let w = problem.op.weights();
    let residual = res.chunks(n).map(|r| weighted_norm(w, r)).fold(0.0, f64::max);
    Ok(StrictResidual {
        residual,
        floor: 4.0 * sol.x.len() as f64 * f64::EPSILON * scale,
    })
}

/// Per-node residual vectors (node-major) and the magnitude scale of the
/// summed terms.
pub(crate) fn residual_vectors(sol: &SolutionPath, problem: &DeterministicProblem) -> Result<(Vec<f64>, f64)> {
    if problem.alpha1 > 0.0 {
        return Err(Error::regime(format!(
            "strict solutions are only guaranteed for α₁ ≤ 0, got {}",
            problem.alpha1
        )));
    }
    let n = problem.op.dim();
    let t = sol.x.times();
    let m = t.len();
    let lam = problem.op.eigenvalues();
    let lift = problem.lift();
    let w = problem.op.weights();
    let start = sol.x.value(0).to_vec();

    let sampled_g = match &problem.forcing {
        Forcing::Sampled(_) => Some(weighted_samples(&sol.forcing, problem.params.beta)?),
        Forcing::Modal(_) => None,
    };
    let beta = problem.params.beta;

    let mut int_ax = vec![0.0; n];
    let mut int_f = vec![0.0; n];
    let mut res = vec![0.0; n * m];
    let mut mag = vec![0.0; n];
    let mut scale: f64 = 0.0;
    for j in 1..m {
        let (a, b) = (t[j - 1], t[j]);
        let h = b - a;
        for k in 0..n {
            let (x0, x1) = (sol.x.value(j - 1)[k], sol.x.value(j)[k]);
            let (d0, d1) = (sol.dxdt.value(j - 1)[k], sol.dxdt.value(j)[k]);
            int_ax[k] += lam[k]
                * if d0.is_finite() && d1.is_finite() {
                    0.5 * h * (x0 + x1) + fitted_hermite(lam[k] * h, h) * (d0 - d1)
                } else {
                    let (wa, wb) = fitted_trapezoid(lam[k] * h, h);
                    wa * x0 + wb * x1
                };
            match (&problem.forcing, &sampled_g) {
                (Forcing::Modal(mf), _) => {
                    let p = &mf.profile;
                    int_f[k] = lift[k] * mf.coeffs[k] * (p.antiderivative(b) - p.antiderivative(t[0]));
                }
                (Forcing::Sampled(_), Some(g)) => {
                    let (wl, wh) = product_weights(0.0, beta, a, b);
                    int_f[k] += lift[k] * (wl * g[j - 1][k] + wh * g[j][k]);
                }
                _ => unreachable!(),
            }
            res[j * n + k] = x1 - start[k] + int_ax[k] - int_f[k];
            mag[k] = x1.abs() + start[k].abs() + int_ax[k].abs() + int_f[k].abs();
        }
        scale = scale.max(weighted_norm(w, &mag));
    }
    Ok((res, scale))
}

/// Measured constants of the existence and maximal-regularity estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    #[serde(rename = "grid_M")]
    pub grid_m: usize,
    pub quadrature_tol: f64,
    /// `sup_t [‖X‖ + t^{1-α₁}‖A^{1-α₁}X‖] / [‖ξ‖ + ‖A^{-α₁}F‖_F max{t^{β-α₁}, t^β}]`
    pub ratio_t1: Option<f64>,
    /// `sup_t t‖dX/dt‖ / (same right-hand side)`, for `α₁ ≤ 0`.
    pub ratio_t13: Option<f64>,
    /// `[‖A^{β-α₁}X‖_C + ‖A^{1-α₁}X‖_F] / [‖A^{β-α₁}ξ‖ + ‖A^{-α₁}F‖_F]`
    pub ratio_t24: Option<f64>,
    /// `‖A^{-α₁}dX/dt‖_F / [‖A^{β-α₁}ξ‖ + ‖A^{-α₁}F‖_F]`, for `α₁ ≤ 0`.
    pub ratio_t25: Option<f64>,
    /// Largest componentwise ratio of the maximal-regularity estimate.
    pub ratio_t2: Option<f64>,
    pub forcing_norm: f64,
    pub sup_frac_x: Option<f64>,
    pub holder_ax: Option<f64>,
    pub holder_dxdt: Option<f64>,
    pub rhs_t2: Option<f64>,
    #[serde(skip)]
    pub lhs_t1: Vec<f64>,
    #[serde(skip)]
    pub rhs_t1: Vec<f64>,
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

fn empty_report(sol: &SolutionPath, forcing_norm: f64) -> RegularityReport {
    RegularityReport {
        grid_m: sol.x.grid().intervals(),
        quadrature_tol: sol.quadrature_tol,
        ratio_t1: None,
        ratio_t13: None,
        ratio_t24: None,
        ratio_t25: None,
        ratio_t2: None,
        forcing_norm,
        sup_frac_x: None,
        holder_ax: None,
        holder_dxdt: None,
        rhs_t2: None,
        lhs_t1: vec![],
        rhs_t1: vec![],
    }
}

/// Pointwise-in-time estimates of the existence theorem.
pub fn t1_estimate_check(sol: &SolutionPath, problem: &DeterministicProblem) -> Result<RegularityReport> {
    let forcing_norm = weighted_holder_norm(&sol.forcing, &problem.params)?.total;
    let mut report = empty_report(sol, forcing_norm);
    fill_t1(&mut report, sol, problem);
    Ok(report)
}

fn fill_t1(report: &mut RegularityReport, sol: &SolutionPath, problem: &DeterministicProblem) {
    let (beta, a1) = (problem.params.beta, problem.alpha1);
    let xi_norm = problem.op.norm(&problem.xi);
    let t = sol.x.times();
    let mut r1: f64 = 0.0;
    let mut r13: f64 = 0.0;
    for j in 0..t.len() {
        if t[j] <= 0.0 {
            continue;
        }
        let lhs = sol.x.norm_at(j) + t[j].powf(1.0 - a1) * sol.ax_frac.norm_at(j);
        let rhs = xi_norm + report.forcing_norm * t[j].powf(beta - a1).max(t[j].powf(beta));
        report.lhs_t1.push(lhs);
        report.rhs_t1.push(rhs);
        r1 = r1.max(ratio(lhs, rhs));
        r13 = r13.max(ratio(t[j] * sol.dxdt.norm_at(j), rhs));
    }
    report.ratio_t1 = Some(r1);
    if a1 <= 0.0 {
        report.ratio_t13 = Some(r13);
    }
}

/// Maximal-regularity norms in `F^{β,σ}` and the measured constants.
pub fn maximal_regularity_report(sol: &SolutionPath, problem: &DeterministicProblem) -> Result<RegularityReport> {
    let params = &problem.params;
    let forcing_report = weighted_holder_norm(&sol.forcing, params)?;
    if forcing_report.limit_exists() == Verdict::Fail {
        return Err(Error::Precondition(
            "A^{-α₁}F has no weighted limit t^{1-β}f(t) as t → 0 on this grid".into(),
        ));
    }
    let forcing_norm = forcing_report.total;
    let mut report = empty_report(sol, forcing_norm);
    fill_t1(&mut report, sol, problem);

    let (beta, a1) = (params.beta, problem.alpha1);
    let lam = problem.op.eigenvalues();
    let to_c: Vec<f64> = lam.iter().map(|l| l.powf(beta - 1.0)).collect();
    let frac_x = sol.ax_frac.scale_modes(&to_c)?;
    let sup_frac_x = (0..frac_x.len()).map(|j| frac_x.norm_at(j)).fold(0.0, f64::max);
    let holder_ax = weighted_holder_norm(&sol.ax_frac, params)?.total;
    let xi_frac: Vec<f64> = problem
        .xi
        .iter()
        .zip(lam)
        .map(|(x, l)| x * l.powf(beta - a1))
        .collect();
    let rhs = problem.op.norm(&xi_frac) + forcing_norm;

    report.sup_frac_x = Some(sup_frac_x);
    report.holder_ax = Some(holder_ax);
    report.rhs_t2 = Some(rhs);
    report.ratio_t24 = Some(ratio(sup_frac_x + holder_ax, rhs));
    let mut r2 = ratio(sup_frac_x, rhs).max(ratio(holder_ax, rhs));
    if a1 <= 0.0 {
        let to_frac: Vec<f64> = lam.iter().map(|l| l.powf(-a1)).collect();
        let d = sol.dxdt.scale_modes(&to_frac)?;
        let holder_d = weighted_holder_norm(&d, params)?.total;
        report.holder_dxdt = Some(holder_d);
        report.ratio_t25 = Some(ratio(holder_d, rhs));
        r2 = r2.max(ratio(holder_d, rhs));
    }
    report.ratio_t2 = Some(r2);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{ProfileKind, TimeProfile};
    use approx::assert_relative_eq;

    fn scalar_problem(lambda: f64, xi: f64, kind: ProfileKind, beta: f64) -> DeterministicProblem {
        let op = SpectralOperator::with_unit_weights(vec![lambda]).unwrap();
        let params = HolderParams::new(beta, 0.2f64.min(beta / 2.0), 1.0).unwrap();
        let profile = TimeProfile::from_kind(kind, beta, params.sigma).unwrap();
        DeterministicProblem::new(op, 0.0, Forcing::Modal(ModalFunction::new(vec![1.0], profile)), vec![xi], params)
            .unwrap()
    }

    #[test]
    fn stationary_point() {
        let p = scalar_problem(1.0, 1.0, ProfileKind::Constant, 1.0);
        let g = TimeGrid::graded(1.0, 64, 2.0).unwrap();
        let s = mild_solve(&p, &g).unwrap();
        for j in 0..g.len() {
            assert_relative_eq!(s.x.value(j)[0], 1.0, epsilon = 1e-14);
        }
        let r = strict_residual_report(&s, &p).unwrap();
        assert!(r.residual <= s.quadrature_tol.max(r.floor), "{r:?}");
    }

    #[test]
    fn free_decay() {
        let p = scalar_problem(1.0, 1.0, ProfileKind::Zero, 1.0);
        let g = TimeGrid::graded(1.0, 32, 2.0).unwrap();
        let s = mild_solve(&p, &g).unwrap();
        assert_relative_eq!(s.x.value(32)[0], 0.367879, epsilon = 1e-6);
        assert_relative_eq!(s.x.value(32)[0], (-1.0f64).exp(), max_relative = 1e-14);
        let r = strict_residual_report(&s, &p).unwrap();
        assert!(r.residual <= s.quadrature_tol.max(r.floor), "{r:?}");
    }

    #[test]
    fn power_forcing_matches_frozen_oracle() {
        let p = scalar_problem(2.0, 0.0, ProfileKind::Power, 0.8);
        let g = TimeGrid::graded(1.0, 16, 2.0).unwrap();
        let s = mild_solve(&p, &g).unwrap();
        assert_relative_eq!(s.x.value(16)[0], 0.491045743440962, max_relative = 1e-12);
    }

    #[test]
    fn sampled_power_forcing_is_exact() {
        let modal = scalar_problem(2.0, 0.0, ProfileKind::Power, 0.8);
        let g = TimeGrid::graded(1.0, 16, 2.0).unwrap();
        let samples = modal.forcing_samples(&g).unwrap();
        let sampled = DeterministicProblem::new(
            modal.op.clone(),
            0.0,
            Forcing::Sampled(samples),
            vec![0.0],
            modal.params,
        )
        .unwrap();
        let s = mild_solve(&sampled, &g).unwrap();
        assert_relative_eq!(s.x.value(16)[0], 0.491045743440962, max_relative = 1e-12);
    }

    #[test]
    fn residual_regime_error() {
        let mut p = scalar_problem(1.0, 1.0, ProfileKind::Zero, 1.0);
        let g = TimeGrid::graded(1.0, 16, 2.0).unwrap();
        let s = mild_solve(&p, &g).unwrap();
        p.alpha1 = 0.5;
        assert!(matches!(strict_residual(&s, &p), Err(Error::Regime(_))));
    }

    #[test]
    fn residual_converges_for_power_forcing() {
        let p = scalar_problem(2.0, 0.0, ProfileKind::Power, 0.8);
        let res: Vec<f64> = [64, 128, 256, 512]
            .iter()
            .map(|&m| {
                let g = TimeGrid::graded(1.0, m, 2.0).unwrap();
                strict_residual(&mild_solve(&p, &g).unwrap(), &p).unwrap()
            })
            .collect();
        for w in res.windows(2) {
            assert!(w[0] / w[1] >= 2.0, "{res:?}");
        }
    }

    #[test]
    fn t1_free_decay_ratio() {
        let p = scalar_problem(1.0, 1.0, ProfileKind::Zero, 1.0);
        let g = TimeGrid::graded(1.0, 256, 2.0).unwrap();
        let s = mild_solve(&p, &g).unwrap();
        let r = t1_estimate_check(&s, &p).unwrap();
        let expect = (-g.nodes()[1]).exp() * (1.0 + g.nodes()[1]);
        assert_relative_eq!(r.ratio_t1.unwrap(), expect, max_relative = 1e-12);
        assert!((r.ratio_t1.unwrap() - 1.0).abs() < 1e-4);

        let mut p2 = p.clone();
        p2.xi = vec![2.0];
        let r2 = t1_estimate_check(&mild_solve(&p2, &g).unwrap(), &p2).unwrap();
        assert_relative_eq!(r.ratio_t1.unwrap(), r2.ratio_t1.unwrap(), max_relative = 1e-14);
    }

    #[test]
    fn zero_problem_has_zero_ratios() {
        let p = scalar_problem(1.0, 0.0, ProfileKind::Zero, 0.8);
        let g = TimeGrid::graded(1.0, 64, 2.0).unwrap();
        let r = maximal_regularity_report(&mild_solve(&p, &g).unwrap(), &p).unwrap();
        assert_eq!(r.ratio_t1, Some(0.0));
        assert_eq!(r.ratio_t24, Some(0.0));
        assert_eq!(r.ratio_t25, Some(0.0));
        let json = serde_json::to_value(&r).unwrap();
        assert!(json.get("grid_M").is_some());
        assert!(json.get("ratio_t13").is_some());
    }

    #[test]
    fn fitted_trapezoid_is_exact_on_exponentials() {
        for &(lam, h) in &[(1e-6, 0.1), (0.05, 0.1), (3.0, 0.5), (1e4, 0.01)] {
            let (a, b) = fitted_trapezoid(lam * h, h);
            assert_relative_eq!(a + b, h, max_relative = 1e-13);
            let exact = -(-lam * h).exp_m1() / lam;
            assert_relative_eq!(a + b * (-lam * h).exp(), exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn fitted_hermite_is_exact_on_exponentials_and_lines() {
        for &(lam, h) in &[(1e-6, 0.1), (1.0, 0.15), (1.0, 0.25), (3.0, 0.5), (1e4, 0.01)] {
            let c = fitted_hermite(lam * h, h);
            let e = (-lam * h).exp();
            let exact = -(-lam * h).exp_m1() / lam;
            let rule = 0.5 * h * (1.0 + e) + c * (-lam + lam * e);
            assert_relative_eq!(rule, exact, max_relative = 1e-12);
        }
        assert_relative_eq!(fitted_hermite(0.2 - 1e-12, 1.0), fitted_hermite(0.2, 1.0), max_relative = 1e-12);
    }

    #[test]
    fn oscillatory_forcing_is_a_precondition_error() {
        let op = SpectralOperator::with_unit_weights(vec![1.0]).unwrap();
        let params = HolderParams::new(0.8, 0.2, 1.0).unwrap();
        let g = TimeGrid::graded(1.0, 256, 2.0).unwrap();
        let f = PathSample::from_fn(g.clone(), vec![1.0], |t| vec![(1.0 / t).sin() * t.powf(-0.2)]).unwrap();
        let mut data = f.data().to_vec();
        data[0] = 0.0;
        let f = PathSample::from_flat(g.clone(), vec![1.0], data).unwrap();
        let p = DeterministicProblem::new(op, 0.0, Forcing::Sampled(f), vec![0.0], params).unwrap();
        let s = mild_solve(&p, &g).unwrap();
        assert!(matches!(maximal_regularity_report(&s, &p), Err(Error::Precondition(_))));
    }
}
