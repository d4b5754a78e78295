//! Config-driven experiment runner behind the `parasemi` binary.
//!
//! A run reads a flat `key = value` file, resolves it against the key set of
//! its subcommand, executes the pipeline and writes into the output directory:
//!
//! * `manifest.json`: the subcommand and the fully resolved config (re-usable
//!   as a config file),
//! * `gates.json`: named pass/fail checks,
//! * report JSON and path CSV files specific to the subcommand,
//! * `error.json` when the run fails.

use std::collections::BTreeMap;
use std::fs;
use std::num::NonZeroU32;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::heat::{run_heat_experiment, HeatProblem, SpatialPattern, TorusSpec};
use crate::mild::{
    maximal_regularity_report, mild_solve, strict_residual_report, DeterministicProblem, Forcing, RegularityReport,
};
use crate::profile::{ModalFunction, ProfileKind, TimeProfile};
use crate::spaces::{
    make_test_function, membership_diagnostics, weighted_holder_norm, HolderParams, MembershipOptions, PathSample,
    TestFunctionKind, TimeGrid, Verdict,
};
use crate::spectral::{log_grid, SpectralOperator};
use crate::stochastic::{
    convolution_moment_profile, empirical_holder_exponent, ito_isometry_check, mild_solve_stochastic,
    simulate_convolution, strict_identity_check, DiffusionOperator, HolderExponentOptions, NoiseConfig,
};

pub const MANIFEST: &str = "manifest.json";
pub const GATES: &str = "gates.json";
pub const SUMMARY: &str = "summary.json";
pub const ERROR: &str = "error.json";

/// Largest `|z|` accepted by the Monte-Carlo gates.
pub const Z_MAX: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    VerifySemigroup,
    HolderNorm,
    SolveDeterministic,
    SimulateConvolution,
    SolveStochastic,
    Heat,
    Report,
}

impl Subcommand {
    pub const ALL: [Subcommand; 7] = [
        Self::VerifySemigroup,
        Self::HolderNorm,
        Self::SolveDeterministic,
        Self::SimulateConvolution,
        Self::SolveStochastic,
        Self::Heat,
        Self::Report,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::VerifySemigroup => "verify-semigroup",
            Self::HolderNorm => "holder-norm",
            Self::SolveDeterministic => "solve-deterministic",
            Self::SimulateConvolution => "simulate-convolution",
            Self::SolveStochastic => "solve-stochastic",
            Self::Heat => "heat",
            Self::Report => "report",
        }
    }

    /// Accepted keys with their defaults; `None` marks a required key.
    pub fn schema(&self) -> &'static [(&'static str, Option<&'static str>)] {
        match self {
            Self::VerifySemigroup => &[
                ("eigenvalues", None),
                ("weights", Some("none")),
                ("theta", Some("0,0.25,0.5,1")),
                ("grid_lo", Some("1e-3")),
                ("grid_hi", Some("100")),
                ("grid_n", Some("512")),
                ("angle", Some("0.7853981633974483")),
                ("ray_samples", Some("64")),
                ("yosida_n", Some("64")),
                ("yosida_nu", Some("0.5")),
            ],
            Self::HolderNorm => &[
                ("beta", Some("1")),
                ("sigma_holder", Some("0.2")),
                ("T", Some("1")),
                ("grid_M", Some("256")),
                ("grading_r", Some("2")),
                ("test_function", Some("power_plus_holder")),
                ("v", Some("1")),
                ("weights", Some("none")),
                ("path_csv", Some("none")),
                ("limit_tol", Some("0.01")),
                ("modulus_tol", Some("0.01")),
            ],
            Self::SolveDeterministic => &[
                ("eigenvalues", None),
                ("weights", Some("none")),
                ("alpha1", Some("0")),
                ("beta", Some("1")),
                ("sigma_holder", Some("0.2")),
                ("T", Some("1")),
                ("grid_M", Some("256")),
                ("grading_r", Some("2")),
                ("xi", Some("0")),
                ("forcing_profile", Some("power_plus_holder")),
                ("forcing_coeffs", Some("1")),
                ("forcing_csv", Some("none")),
                ("residual_tol", Some("none")),
            ],
            Self::SimulateConvolution => &[
                ("eigenvalues", None),
                ("weights", Some("none")),
                ("gains", Some("1")),
                ("gain_profile", Some("constant")),
                ("alpha2", Some("0")),
                ("kappa", Some("0")),
                ("beta", Some("1")),
                ("sigma_holder", Some("0.2")),
                ("T", Some("1")),
                ("grid_M", Some("256")),
                ("grading_r", Some("1")),
                ("seed", Some("0")),
                ("n_paths", Some("1000")),
                ("write_paths", Some("true")),
            ],
            Self::SolveStochastic => &[
                ("eigenvalues", None),
                ("weights", Some("none")),
                ("alpha1", Some("0")),
                ("alpha2", Some("0")),
                ("kappa", Some("0")),
                ("beta", Some("1")),
                ("sigma_holder", Some("0.2")),
                ("T", Some("1")),
                ("grid_M", Some("128")),
                ("grading_r", Some("1")),
                ("xi", Some("0")),
                ("forcing_profile", Some("zero")),
                ("forcing_coeffs", Some("0")),
                ("gains", Some("1")),
                ("gain_profile", Some("constant")),
                ("seed", Some("0")),
                ("n_paths", Some("256")),
                ("write_paths", Some("true")),
            ],
            Self::Heat => &[
                ("d", Some("1")),
                ("K", Some("16")),
                ("a", Some("1")),
                ("beta", Some("1")),
                ("sigma_holder", Some("0.2")),
                ("alpha1", Some("0")),
                ("alpha2", Some("0")),
                ("kappa", Some("0")),
                ("q", Some("0")),
                ("noise_scale", Some("1")),
                ("T", Some("1")),
                ("grid_M", Some("64")),
                ("grading_r", Some("1")),
                ("seed", Some("0")),
                ("n_paths", Some("1000")),
                ("forcing_space", Some("zero")),
                ("forcing_profile", Some("zero")),
                ("forcing_scale", Some("0")),
                ("u0", Some("zero")),
                ("u0_scale", Some("0")),
                ("write_paths", Some("false")),
            ],
            Self::Report => &[],
        }
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown subcommand `{s}`")))
    }
}

/// Flat `key = value` configuration.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    /// Parses `key = value` lines (`#` starts a comment), or a run manifest.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            return Self::from_manifest(text);
        }
        let mut entries = BTreeMap::new();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_string(),
                message: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Config {
                    key: key.to_string(),
                    message: "malformed key".into(),
                });
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(Error::Config {
                    key: key.to_string(),
                    message: "duplicate key".into(),
                });
            }
        }
        Ok(Self { entries })
    }

    fn from_manifest(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        let obj = v
            .get("config")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::Parse("manifest has no `config` object".into()))?;
        let mut entries = BTreeMap::new();
        for (k, v) in obj {
            let s = v
                .as_str()
                .ok_or_else(|| Error::Config {
                    key: k.clone(),
                    message: "manifest values must be strings".into(),
                })?
                .to_string();
            entries.insert(k.clone(), s);
        }
        Ok(Self { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    /// Rejects unknown keys and fills in defaults.
    pub fn resolve(&self, sub: Subcommand) -> Result<Config> {
        let schema = sub.schema();
        if let Some(k) = self.entries.keys().find(|k| !schema.iter().any(|(s, _)| s == k)) {
            return Err(Error::Config {
                key: k.clone(),
                message: format!("unknown key for `{}`", sub.as_str()),
            });
        }
        let mut entries = BTreeMap::new();
        for (key, default) in schema {
            let value = match (self.entries.get(*key), default) {
                (Some(v), _) => v.clone(),
                (None, Some(d)) => d.to_string(),
                (None, None) => {
                    return Err(Error::Config {
                        key: key.to_string(),
                        message: "required key missing".into(),
                    })
                }
            };
            entries.insert(key.to_string(), value);
        }
        Ok(Config { entries })
    }

    fn raw(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Config {
            key: key.into(),
            message: "missing".into(),
        })
    }

    fn bad(key: &str, msg: impl std::fmt::Display) -> Error {
        Error::Config {
            key: key.into(),
            message: msg.to_string(),
        }
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)?.parse().map_err(|e| Self::bad(key, e))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let v: f64 = self.parsed(key)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Self::bad(key, "must be finite"))
        }
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        if self.raw(key)? == "none" {
            Ok(None)
        } else {
            self.f64(key).map(Some)
        }
    }

    fn usize(&self, key: &str) -> Result<usize> {
        self.parsed(key)
    }

    fn bool(&self, key: &str) -> Result<bool> {
        self.parsed(key)
    }

    fn opt_path(&self, key: &str) -> Result<Option<PathBuf>> {
        let v = self.raw(key)?;
        Ok((v != "none").then(|| PathBuf::from(v)))
    }

    /// A comma list of numbers, or an inclusive integer range `a..b`.
    fn list(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.raw(key)?;
        let out: Vec<f64> = if let Some((a, b)) = v.split_once("..") {
            let a: i64 = a.trim().parse().map_err(|e| Self::bad(key, e))?;
            let b: i64 = b.trim().parse().map_err(|e| Self::bad(key, e))?;
            if b < a {
                return Err(Self::bad(key, "empty range"));
            }
            (a..=b).map(|i| i as f64).collect()
        } else {
            v.split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| Self::bad(key, e)))
                .collect::<Result<_>>()?
        };
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Self::bad(key, "entries must be finite"));
        }
        Ok(out)
    }

    /// A list of length `n`; a single entry is broadcast.
    fn vector(&self, key: &str, n: usize) -> Result<Vec<f64>> {
        let v = self.list(key)?;
        match v.len() {
            1 => Ok(vec![v[0]; n]),
            m if m == n => Ok(v),
            m => Err(Self::bad(key, format!("expected 1 or {n} entries, got {m}"))),
        }
    }
}

/// A named pass/fail check written to `gates.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub pass: bool,
}

impl Gate {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value: value.is_finite().then_some(value),
            threshold: Some(threshold),
            pass: value <= threshold,
        }
    }

    fn finite(name: &str, value: f64) -> Self {
        Self {
            name: name.into(),
            value: value.is_finite().then_some(value),
            threshold: None,
            pass: value.is_finite(),
        }
    }

    fn flag(name: &str, pass: bool) -> Self {
        Self {
            name: name.into(),
            value: None,
            threshold: None,
            pass,
        }
    }
}

/// Outcome of a successful pipeline: exit status 0 or 3.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub gates: Vec<Gate>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            3
        }
    }
}

/// Exit status for an error: 2 for regime and precondition failures, 3 for
/// tolerance failures, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Regime(_) | Error::Precondition(_) | Error::UnsupportedSingularity { .. } => 2,
        Error::Tolerance(_) => 3,
        _ => 1,
    }
}

/// Writes `error.json`; the write itself is best effort.
pub fn write_error(out: &Path, err: &Error) {
    let key = match err {
        Error::Config { key, .. } => Some(key.clone()),
        _ => None,
    };
    let body = json!({
        "kind": err.kind(),
        "message": err.to_string(),
        "key": key,
        "exit_code": exit_code(err),
    });
    if fs::create_dir_all(out).is_ok() {
        let _ = fs::write(out.join(ERROR), pretty(&body));
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

fn write_json<T: Serialize>(dir: &Path, name: &str, v: &T) -> Result<()> {
    fs::write(dir.join(name), pretty(v))?;
    Ok(())
}

fn write_path_csv(dir: &Path, name: &str, p: &PathSample) -> Result<()> {
    let f = fs::File::create(dir.join(name))?;
    p.write_csv(std::io::BufWriter::new(f))
}

/// Runs a subcommand. `config` is ignored by `report`, which reads `out`.
///
/// On error nothing but `error.json` is guaranteed; the caller decides
/// whether to write it (the binary does).
pub fn run(sub: Subcommand, config: &Config, out: &Path, seed: Option<u64>) -> Result<RunOutcome> {
    if sub == Subcommand::Report {
        let summary = summarize(out)?;
        let pass = summary["pass"].as_bool().unwrap_or(false);
        return Ok(RunOutcome {
            gates: vec![Gate::flag("summary", pass)],
        });
    }
    let mut config = config.clone();
    if let Some(s) = seed {
        if !sub.schema().iter().any(|(k, _)| *k == "seed") {
            return Err(Error::Config {
                key: "seed".into(),
                message: format!("`{}` takes no seed", sub.as_str()),
            });
        }
        config.set("seed", s.to_string());
    }
    let cfg = config.resolve(sub)?;
    fs::create_dir_all(out)?;
    let _ = fs::remove_file(out.join(ERROR));
    write_json(
        out,
        MANIFEST,
        &json!({ "subcommand": sub.as_str(), "config": cfg.entries() }),
    )?;
    let gates = match sub {
        Subcommand::VerifySemigroup => run_verify_semigroup(&cfg, out)?,
        Subcommand::HolderNorm => run_holder_norm(&cfg, out)?,
        Subcommand::SolveDeterministic => run_solve_deterministic(&cfg, out)?,
        Subcommand::SimulateConvolution => run_simulate_convolution(&cfg, out)?,
        Subcommand::SolveStochastic => run_solve_stochastic(&cfg, out)?,
        Subcommand::Heat => run_heat(&cfg, out)?,
        Subcommand::Report => unreachable!(),
    };
    write_json(out, GATES, &gates)?;
    Ok(RunOutcome { gates })
}

fn operator(cfg: &Config) -> Result<SpectralOperator> {
    let eig = cfg.list("eigenvalues")?;
    match cfg.raw("weights")? {
        "none" => SpectralOperator::with_unit_weights(eig),
        _ => {
            let w = cfg.vector("weights", eig.len())?;
            SpectralOperator::new(eig, w)
        }
    }
}

fn holder_params(cfg: &Config) -> Result<HolderParams> {
    HolderParams::new(cfg.f64("beta")?, cfg.f64("sigma_holder")?, cfg.f64("T")?)
}

fn grid(cfg: &Config) -> Result<TimeGrid> {
    let (t, m, r) = (cfg.f64("T")?, cfg.usize("grid_M")?, cfg.f64("grading_r")?);
    if r == 1.0 {
        TimeGrid::uniform(t, m)
    } else {
        TimeGrid::graded(t, m, r)
    }
}

fn noise_config(cfg: &Config) -> Result<NoiseConfig> {
    NoiseConfig::new(cfg.parsed("seed")?, cfg.usize("n_paths")?, grid(cfg)?)
}

fn run_verify_semigroup(cfg: &Config, out: &Path) -> Result<Vec<Gate>> {
    let op = operator(cfg)?;
    let times = log_grid(cfg.f64("grid_lo")?, cfg.f64("grid_hi")?, cfg.usize("grid_n")?);
    let mut gates = Vec::new();
    let mut profiles = Vec::new();
    for theta in cfg.list("theta")? {
        let p = op.semigroup_bound_profile(theta, &times)?;
        gates.push(Gate {
            name: format!("semigroup_bound_theta_{theta}"),
            value: Some(p.max_observed),
            threshold: Some(p.certified_bound),
            pass: !p.violation,
        });
        profiles.push(json!({
            "theta": p.theta,
            "certified_bound": p.certified_bound,
            "max_observed": p.max_observed,
            "pass": !p.violation,
            "observed": p.observed,
        }));
    }
    let sector = op.verify_sectorial(cfg.f64("angle")?, cfg.usize("ray_samples")?)?;
    gates.push(Gate::finite("sector_constant", sector.m_estimate));
    let n = NonZeroU32::new(cfg.parsed("yosida_n")?).ok_or_else(|| Config::bad("yosida_n", "must be positive"))?;
    let yosida = op.yosida_gap(n, cfg.f64("yosida_nu")?, &times)?;
    let pass = gates.iter().all(|g| g.pass);
    write_json(
        out,
        "semigroup.json",
        &json!({
            "dim": op.dim(),
            "grid": times,
            "profiles": profiles,
            "sector": sector,
            "yosida": yosida,
            "pass": pass,
        }),
    )?;
    Ok(gates)
}

fn run_holder_norm(cfg: &Config, out: &Path) -> Result<Vec<Gate>> {
    let params = holder_params(cfg)?;
    let weights_given = cfg.raw("weights")? != "none";
    let path = match cfg.opt_path("path_csv")? {
        Some(p) => {
            let f = fs::File::open(&p)?;
            let path = PathSample::read_csv(f, None)?;
            if weights_given {
                let w = cfg.vector("weights", path.dim())?;
                PathSample::from_flat(path.grid().clone(), w, path.data().to_vec())?
            } else {
                path
            }
        }
        None => {
            let kind: TestFunctionKind = cfg.parsed("test_function")?;
            let v = cfg.list("v")?;
            let w = if weights_given {
                cfg.vector("weights", v.len())?
            } else {
                vec![1.0; v.len()]
            };
            make_test_function(kind, &params, &v, &w, &grid(cfg)?)?
        }
    };
    let opts = MembershipOptions {
        limit_tol: cfg.f64("limit_tol")?,
        modulus_tol: cfg.f64("modulus_tol")?,
        ..MembershipOptions::default()
    };
    let mut report = weighted_holder_norm(&path, &params)?;
    report.membership = membership_diagnostics(&path, &params, &opts)?;
    write_json(out, "holder_norm.json", &report)?;
    write_path_csv(out, "path.csv", &path)?;
    Ok(vec![
        Gate::finite("holder_norm_finite", report.total),
        Gate::flag("holder_limit_exists", report.limit_exists() != Verdict::Fail),
    ])
}

fn deterministic_problem(cfg: &Config, op: SpectralOperator, params: HolderParams) -> Result<DeterministicProblem> {
    let n = op.dim();
    let alpha1 = cfg.f64("alpha1")?;
    let xi = cfg.vector("xi", n)?;
    let down: Vec<f64> = op.eigenvalues().iter().map(|l| l.powf(-alpha1)).collect();
    let forcing = match cfg.opt_path("forcing_csv").ok().flatten() {
        Some(p) => {
            let f = fs::File::open(&p)?;
            let sampled = PathSample::read_csv(f, Some(op.weights().to_vec()))?;
            Forcing::Sampled(sampled.scale_modes(&down)?)
        }
        None => {
            let kind: ProfileKind = cfg.parsed("forcing_profile")?;
            let profile = TimeProfile::from_kind(kind, params.beta, params.sigma)?;
            let c = cfg.vector("forcing_coeffs", n)?;
            let coeffs = c.iter().zip(&down).map(|(a, b)| a * b).collect();
            Forcing::Modal(ModalFunction::new(coeffs, profile))
        }
    };
    DeterministicProblem::new(op, alpha1, forcing, xi, params)
}

fn regularity_gate(r: &RegularityReport) -> Gate {
    let ratios = [r.ratio_t1, r.ratio_t13, r.ratio_t24, r.ratio_t25, r.ratio_t2];
    let worst = ratios.iter().flatten().copied().fold(0.0, f64::max);
    let all_finite = ratios.iter().flatten().all(|x| x.is_finite());
    Gate {
        name: "regularity_ratios_finite".into(),
        value: all_finite.then_some(worst),
        threshold: None,
        pass: all_finite,
    }
}

fn run_solve_deterministic(cfg: &Config, out: &Path) -> Result<Vec<Gate>> {
    let params = holder_params(cfg)?;
    let problem = deterministic_problem(cfg, operator(cfg)?, params)?;
    let g = grid(cfg)?;
    let sol = mild_solve(&problem, &g)?;
    let report = maximal_regularity_report(&sol, &problem)?;
    let mut gates = vec![regularity_gate(&report)];
    write_json(out, "regularity.json", &report)?;
    if problem.alpha1 <= 0.0 {
        let res = strict_residual_report(&sol, &problem)?;
        let scale = problem.op.norm(&problem.xi) + report.forcing_norm;
        write_json(out, "residual.json", &json!({ "residual": res, "scale": scale }))?;
        if let Some(tol) = cfg.opt_f64("residual_tol")? {
            gates.push(Gate::at_most("strict_residual", res.residual, tol * scale));
        }
    }
    write_path_csv(out, "solution.csv", &sol.x)?;
    write_path_csv(out, "derivative.csv", &sol.dxdt)?;
    Ok(gates)
}

fn diffusion(cfg: &Config, op: &SpectralOperator, params: HolderParams) -> Result<DiffusionOperator> {
    let kind: ProfileKind = cfg.parsed("gain_profile")?;
    let profile = TimeProfile::from_kind(kind, params.beta, params.sigma)?;
    let gains = cfg.vector("gains", op.dim())?;
    DiffusionOperator::new(ModalFunction::new(gains, profile), cfg.f64("alpha2")?, params)
}

fn holder_exponent_json(ens: &crate::stochastic::ConvolutionEnsemble) -> Value {
    match empirical_holder_exponent(ens, &HolderExponentOptions::default()) {
        Ok(r) => serde_json::to_value(r).expect("report serializes"),
        Err(e) => json!({ "gamma_hat": null, "note": e.to_string() }),
    }
}

fn run_simulate_convolution(cfg: &Config, out: &Path) -> Result<Vec<Gate>> {
    let params = holder_params(cfg)?;
    let op = operator(cfg)?;
    let g = diffusion(cfg, &op, params)?;
    let kappa = cfg.f64("kappa")?;
    let nc = noise_config(cfg)?;
    let ens = simulate_convolution(&op, &g, kappa, &nc)?;
    let moment = convolution_moment_profile(&ens, &op, &g)?;
    let iso = ito_isometry_check(&op, &g, nc.grid.horizon(), &nc)?;
    write_json(out, "moment_profile.json", &moment)?;
    write_json(out, "isometry.json", &iso)?;
    write_json(out, "holder_exponent.json", &holder_exponent_json(&ens))?;
    if g.alpha2 < -0.5 {
        write_json(out, "strict_identity.json", &strict_identity_check(&op, &g, &nc)?)?;
    }
    if cfg.bool("write_paths")? {
        let dir = out.join("ensemble");
        fs::create_dir_all(&dir)?;
        ens.write_csv_dir(&dir)?;
        write_json(
            &dir,
            "ensemble.json",
            &json!({
                "seed": nc.seed,
                "n_paths": nc.n_paths,
                "grid": nc.grid,
                "kappa": kappa,
                "gains": g.gains,
                "alpha2": g.alpha2,
            }),
        )?;
    }
    Ok(vec![
        Gate::at_most("isometry_z", iso.z_score, Z_MAX),
        Gate::finite("moment_ratio", moment.ratio),
    ])
}

fn run_solve_stochastic(cfg: &Config, out: &Path) -> Result<Vec<Gate>> {
    let params = holder_params(cfg)?;
    let op = operator(cfg)?;
    let det = deterministic_problem(cfg, op.clone(), params)?;
    let g = diffusion(cfg, &op, params)?;
    let nc = noise_config(cfg)?;
    let sol = mild_solve_stochastic(&det, &g, cfg.f64("kappa")?, &nc)?;
    let iso = ito_isometry_check(&op, &g, nc.grid.horizon(), &nc)?;
    write_json(out, "stochastic_report.json", &sol.report)?;
    write_json(out, "isometry.json", &iso)?;
    write_path_csv(out, "mean_solution.csv", &sol.deterministic.x)?;
    if cfg.bool("write_paths")? {
        let dir = out.join("paths");
        fs::create_dir_all(&dir)?;
        for p in 0..nc.n_paths {
            write_path_csv(&dir, &format!("path_{p:05}.csv"), &sol.path(p))?;
        }
    }
    Ok(vec![
        Gate::finite("moment_ratio", sol.report.ratio_t49),
        Gate::at_most("isometry_z", iso.z_score, Z_MAX),
    ])
}

fn heat_problem(cfg: &Config) -> Result<HeatProblem> {
    Ok(HeatProblem {
        torus: TorusSpec::new(cfg.usize("d")?, cfg.usize("K")?)?,
        a: cfg.f64("a")?,
        forcing_pattern: cfg.parsed::<SpatialPattern>("forcing_space")?,
        forcing_profile: cfg.parsed("forcing_profile")?,
        forcing_scale: cfg.f64("forcing_scale")?,
        u0_pattern: cfg.parsed("u0")?,
        u0_scale: cfg.f64("u0_scale")?,
        noise_q: cfg.f64("q")?,
        noise_scale: cfg.f64("noise_scale")?,
        alpha1: cfg.f64("alpha1")?,
        alpha2: cfg.f64("alpha2")?,
        beta: cfg.f64("beta")?,
        sigma: cfg.f64("sigma_holder")?,
        kappa: cfg.f64("kappa")?,
        horizon: cfg.f64("T")?,
    })
}

fn run_heat(cfg: &Config, out: &Path) -> Result<Vec<Gate>> {
    let problem = heat_problem(cfg)?;
    let nc = noise_config(cfg)?;
    let run = run_heat_experiment(&problem, &nc)?;
    write_json(out, "heat_report.json", &run.report)?;
    write_path_csv(out, "mean_solution.csv", &run.deterministic.x)?;
    let mut modes = csv::Writer::from_path(out.join("modes.csv"))?;
    modes.write_record(["k", "lambda", "weight"])?;
    for (i, k) in run.operator.modes.iter().enumerate() {
        let label = k.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
        modes.write_record([
            label,
            run.operator.op.eigenvalues()[i].to_string(),
            run.operator.op.weights()[i].to_string(),
        ])?;
    }
    modes.flush()?;
    let mut gates = Vec::new();
    if let Some(r) = &run.report.regularity {
        gates.push(regularity_gate(r));
    }
    if let Some(iso) = &run.report.isometry {
        gates.push(Gate::at_most("isometry_z", iso.z_score, Z_MAX));
    }
    if let Some(s) = &run.report.stochastic {
        gates.push(Gate::finite("moment_ratio", s.ratio_t49));
    }
    if let Some(m) = &run.report.second_moment {
        gates.push(Gate::at_most("second_moment_z", m.z_score, Z_MAX));
    }
    if let (Some(ens), true) = (&run.ensemble, cfg.bool("write_paths")?) {
        let dir = out.join("ensemble");
        fs::create_dir_all(&dir)?;
        ens.write_csv_dir(&dir)?;
    }
    Ok(gates)
}

fn read_json(dir: &Path, name: &str) -> Result<Option<Value>> {
    let p = dir.join(name);
    if !p.exists() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_str(&fs::read_to_string(p)?)?))
}

/// Aggregates the reports of a run directory into `summary.json`.
///
/// Gates come from `gates.json`; headline metrics (ratios, z-scores,
/// exponents) are collected from whichever reports are present.
pub fn summarize(dir: &Path) -> Result<Value> {
    let manifest = read_json(dir, MANIFEST)?
        .ok_or_else(|| Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, format!("no {MANIFEST} in {}", dir.display()))))?;
    let gates = read_json(dir, GATES)?.unwrap_or_else(|| json!([]));
    let mut metrics = serde_json::Map::new();
    let mut pick = |file: &str, fields: &[(&str, &str)]| -> Result<()> {
        if let Some(v) = read_json(dir, file)? {
            for (name, pointer) in fields {
                if let Some(x) = v.pointer(pointer) {
                    if !x.is_null() {
                        metrics.insert(name.to_string(), x.clone());
                    }
                }
            }
        }
        Ok(())
    };
    pick(
        "regularity.json",
        &[
            ("ratio_t1", "/ratio_t1"),
            ("ratio_t13", "/ratio_t13"),
            ("ratio_t24", "/ratio_t24"),
            ("ratio_t25", "/ratio_t25"),
            ("quadrature_tol", "/quadrature_tol"),
        ],
    )?;
    pick("residual.json", &[("strict_residual", "/residual/residual")])?;
    pick("holder_norm.json", &[("holder_norm", "/total")])?;
    pick("isometry.json", &[("isometry_z", "/z_score")])?;
    pick("moment_profile.json", &[("moment_ratio", "/ratio")])?;
    pick("holder_exponent.json", &[("gamma_hat", "/gamma_hat")])?;
    pick("strict_identity.json", &[("strict_identity_median", "/median_residual")])?;
    pick("stochastic_report.json", &[("ratio_t49", "/ratio_t49")])?;
    pick(
        "heat_report.json",
        &[
            ("isometry_z", "/isometry/z_score"),
            ("ratio_t49", "/stochastic/ratio_t49"),
            ("gamma_hat", "/holder_exponent/gamma_hat"),
            ("second_moment_z", "/second_moment/z_score"),
            ("ratio_t1", "/regularity/ratio_t1"),
            ("ratio_t24", "/regularity/ratio_t24"),
        ],
    )?;
    let pass = gates
        .as_array()
        .map(|a| a.iter().all(|g| g["pass"].as_bool() == Some(true)))
        .unwrap_or(false);
    let summary = json!({
        "subcommand": manifest.get("subcommand").cloned().unwrap_or(Value::Null),
        "gates": gates,
        "metrics": metrics,
        "pass": pass,
    });
    write_json(dir, SUMMARY, &summary)?;
    Ok(summary)
}
