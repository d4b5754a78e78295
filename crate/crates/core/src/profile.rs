//! Closed-form time profiles `φ(t) = Σ_m c_m t^{p_m}` shared by forcings and
//! noise gains, and separable modal functions `f_k(t) = a_k φ(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::exp_power_integral_est;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coef: f64,
    pub exponent: f64,
}

/// Named members of the profile family, used in configs and manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Zero,
    Constant,
    /// `t^{β-1}`
    Power,
    /// `t^{β-1+σ}`
    Holder,
    /// `t^{β-1} + t^{β-1+σ}`
    PowerPlusHolder,
}

impl std::str::FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "zero" | "none" => ProfileKind::Zero,
            "constant" => ProfileKind::Constant,
            "power" => ProfileKind::Power,
            "holder" => ProfileKind::Holder,
            "power_plus_holder" => ProfileKind::PowerPlusHolder,
            other => return Err(Error::Parse(format!("unknown time profile `{other}`"))),
        })
    }
}

impl ProfileKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProfileKind::Zero => "zero",
            ProfileKind::Constant => "constant",
            ProfileKind::Power => "power",
            ProfileKind::Holder => "holder",
            ProfileKind::PowerPlusHolder => "power_plus_holder",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeProfile {
    terms: Vec<PowerTerm>,
}

impl TimeProfile {
    pub fn new(terms: Vec<PowerTerm>) -> Result<Self> {
        if let Some(t) = terms.iter().find(|t| !(t.exponent > -1.0) || !t.coef.is_finite()) {
            return Err(Error::input(format!(
                "power term {} t^{} is not locally integrable",
                t.coef, t.exponent
            )));
        }
        let terms = terms.into_iter().filter(|t| t.coef != 0.0).collect();
        Ok(Self { terms })
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant() -> Self {
        Self::single(0.0)
    }

    fn single(exponent: f64) -> Self {
        Self {
            terms: vec![PowerTerm { coef: 1.0, exponent }],
        }
    }

    pub fn from_kind(kind: ProfileKind, beta: f64, sigma: f64) -> Result<Self> {
        let terms = match kind {
            ProfileKind::Zero => vec![],
            ProfileKind::Constant => vec![PowerTerm { coef: 1.0, exponent: 0.0 }],
            ProfileKind::Power => vec![PowerTerm { coef: 1.0, exponent: beta - 1.0 }],
            ProfileKind::Holder => vec![PowerTerm { coef: 1.0, exponent: beta - 1.0 + sigma }],
            ProfileKind::PowerPlusHolder => vec![
                PowerTerm { coef: 1.0, exponent: beta - 1.0 },
                PowerTerm { coef: 1.0, exponent: beta - 1.0 + sigma },
            ],
        };
        Self::new(terms)
    }

    pub fn terms(&self) -> &[PowerTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `φ(t)`; non-finite at `t = 0` when some exponent is negative.
    pub fn eval(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                if term.exponent == 0.0 {
                    term.coef
                } else {
                    term.coef * t.powf(term.exponent)
                }
            })
            .sum()
    }

    /// `∫_0^t φ(s) ds`.
    pub fn antiderivative(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| term.coef * t.powf(term.exponent + 1.0) / (term.exponent + 1.0))
            .sum()
    }

    /// `φ(t)²` expanded as a profile.
    pub fn squared(&self) -> TimeProfile {
        let mut terms = Vec::with_capacity(self.terms.len() * self.terms.len());
        for a in &self.terms {
            for b in &self.terms {
                terms.push(PowerTerm {
                    coef: a.coef * b.coef,
                    exponent: a.exponent + b.exponent,
                });
            }
        }
        TimeProfile { terms }
    }

    /// `∫_a^b e^{-rate (t - s)} φ(s) ds` with an error estimate.
    pub fn exp_moment(&self, rate: f64, a: f64, b: f64, t: f64) -> (f64, f64) {
        self.terms.iter().fold((0.0, 0.0), |(v, e), term| {
            let (tv, te) = exp_power_integral_est(rate, term.exponent, a, b, t);
            (v + term.coef * tv, e + term.coef.abs() * te)
        })
    }
}

/// A separable modal function `f_k(t) = coeffs[k] φ(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalFunction {
    pub coeffs: Vec<f64>,
    pub profile: TimeProfile,
}

impl ModalFunction {
    pub fn new(coeffs: Vec<f64>, profile: TimeProfile) -> Self {
        Self { coeffs, profile }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            coeffs: vec![0.0; dim],
            profile: TimeProfile::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.profile.is_zero() || self.coeffs.iter().all(|c| *c == 0.0)
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let phi = self.profile.eval(t);
        self.coeffs.iter().map(|c| c * phi).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_evaluate_as_documented() {
        let (b, s) = (0.8, 0.2);
        let p = TimeProfile::from_kind(ProfileKind::PowerPlusHolder, b, s).unwrap();
        let expect = 0.25f64.powf(-0.2) + 1.0;
        assert!((p.eval(0.25) - expect).abs() < 1e-15);
        assert!((p.eval(0.25) - 2.319508).abs() < 1e-6);
        let pw = TimeProfile::from_kind(ProfileKind::Power, b, s).unwrap();
        assert_eq!(pw.eval(1.0), 1.0);
        assert!(pw.eval(0.0).is_infinite());
        assert!(TimeProfile::from_kind(ProfileKind::Zero, b, s).unwrap().is_zero());
    }

    #[test]
    fn antiderivative_matches_moment_at_zero_rate() {
        let p = TimeProfile::from_kind(ProfileKind::PowerPlusHolder, 0.6, 0.1).unwrap();
        let (m, _) = p.exp_moment(0.0, 0.0, 0.7, 0.7);
        assert!((m - p.antiderivative(0.7)).abs() < 1e-13);
    }

    #[test]
    fn non_integrable_terms_are_rejected() {
        assert!(TimeProfile::new(vec![PowerTerm { coef: 1.0, exponent: -1.0 }]).is_err());
    }

    #[test]
    fn parse_kinds() {
        assert_eq!("power".parse::<ProfileKind>().unwrap(), ProfileKind::Power);
        assert!("wiggly".parse::<ProfileKind>().is_err());
    }
}
