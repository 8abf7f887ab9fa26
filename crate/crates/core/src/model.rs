//! Model parameters of the reserve process
//!
//! ```text
//! dX_t = X_t (a dt + sigma dW_t) + dP_t,   X_0 = u,
//! P_t  = c t + sum of upward Exp(mu2) jumps (rate alpha2)
//!            - sum of downward Exp(mu1) jumps (rate alpha1)
//! ```
//!
//! plus the constants derived from them that every engine shares.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RuinError};

/// Law of the times between consecutive jumps of `P`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Interarrival {
    /// Poisson arrivals with rate `alpha1 + alpha2`.
    #[default]
    PoissonExponential,
    /// Renewal arrivals with Gamma(shape, scale) interarrival times (Sparre
    /// Andersen setting). Only the simulator supports it.
    RenewalGamma { shape: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Drift of the risky asset's relative price.
    pub a: f64,
    /// Volatility of the risky asset.
    pub sigma: f64,
    /// Premium drift of the business activity, any sign.
    pub c: f64,
    /// Intensity of downward jumps (claims).
    pub alpha1: f64,
    /// Intensity of upward jumps.
    pub alpha2: f64,
    /// Mean downward jump size.
    pub mu1: f64,
    /// Mean upward jump size.
    pub mu2: f64,
    #[serde(default)]
    pub interarrival: Interarrival,
}

impl ModelParams {
    pub fn alpha(&self) -> f64 {
        self.alpha1 + self.alpha2
    }

    /// Log-drift of the asset price, `a - sigma^2 / 2`. Defined for `sigma = 0`.
    pub fn kappa(&self) -> f64 {
        self.a - 0.5 * self.sigma * self.sigma
    }

    /// Probability that a given jump is upward.
    pub fn upward_jump_probability(&self) -> f64 {
        self.alpha2 / self.alpha()
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    /// Validates and fails on any invariant violation. Flags are ignored.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.has_violations() {
            Err(RuinError::InvalidParams(report))
        } else {
            Ok(())
        }
    }

    pub fn derive(&self) -> Result<DerivedParams> {
        derive(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    /// Tail exponent `2a / sigma^2 - 1`.
    pub beta: f64,
    /// Log-drift `a - sigma^2 / 2`.
    pub kappa: f64,
    /// `mu2 - mu1`.
    pub delta_mu: f64,
    /// `mu1 * mu2`.
    pub mu_sq: f64,
    /// `alpha1 + alpha2`.
    pub alpha_total: f64,
}

pub fn derive(params: &ModelParams) -> Result<DerivedParams> {
    params.ensure_valid()?;
    let s2 = params.sigma * params.sigma;
    if s2 == 0.0 {
        return Err(RuinError::InvalidArgument(
            "sigma = 0: the tail exponent is undefined (simulator-only configuration)".into(),
        ));
    }
    Ok(DerivedParams {
        beta: 2.0 * params.a / s2 - 1.0,
        kappa: params.a - 0.5 * s2,
        delta_mu: params.mu2 - params.mu1,
        mu_sq: params.mu1 * params.mu2,
        alpha_total: params.alpha1 + params.alpha2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    NonFiniteParameter,
    NegativeJumpMean,
    NegativeIntensity,
    ZeroTotalIntensity,
    NegativeVolatility,
    InvalidInterarrival,
    /// `alpha1 = 0` and `c >= 0`: the reserve can never decrease to zero.
    NoRuinPossible,
    /// `sigma = 0`: only the simulator accepts this configuration.
    SimulatorOnly,
}

impl IssueCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            IssueCode::NonFiniteParameter => "NON_FINITE_PARAMETER",
            IssueCode::NegativeJumpMean => "NEGATIVE_JUMP_MEAN",
            IssueCode::NegativeIntensity => "NEGATIVE_INTENSITY",
            IssueCode::ZeroTotalIntensity => "ZERO_TOTAL_INTENSITY",
            IssueCode::NegativeVolatility => "NEGATIVE_VOLATILITY",
            IssueCode::InvalidInterarrival => "INVALID_INTERARRIVAL",
            IssueCode::NoRuinPossible => "NO_RUIN_POSSIBLE",
            IssueCode::SimulatorOnly => "SIMULATOR_ONLY",
        }
    }

    /// Flags describe legal but degenerate configurations.
    pub fn is_flag(&self) -> bool {
        matches!(self, IssueCode::NoRuinPossible | IssueCode::SimulatorOnly)
    }
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub code: IssueCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, code: IssueCode) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }

    pub fn has_violations(&self) -> bool {
        self.issues.iter().any(|i| !i.code.is_flag())
    }

    fn push(&mut self, code: IssueCode, message: impl Into<String>) {
        self.issues.push(ValidationIssue {
            code,
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return f.write_str("ok");
        }
        for (k, issue) in self.issues.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", issue.code, issue.message)?;
        }
        Ok(())
    }
}

pub fn validate(params: &ModelParams) -> ValidationReport {
    let mut report = ValidationReport::default();
    let named = [
        ("a", params.a),
        ("sigma", params.sigma),
        ("c", params.c),
        ("alpha1", params.alpha1),
        ("alpha2", params.alpha2),
        ("mu1", params.mu1),
        ("mu2", params.mu2),
    ];
    for (name, value) in named {
        if !value.is_finite() {
            report.push(IssueCode::NonFiniteParameter, format!("{name} = {value}"));
        }
    }
    if params.mu1 <= 0.0 {
        report.push(IssueCode::NegativeJumpMean, format!("mu1 = {} must be > 0", params.mu1));
    }
    if params.mu2 <= 0.0 {
        report.push(IssueCode::NegativeJumpMean, format!("mu2 = {} must be > 0", params.mu2));
    }
    if params.alpha1 < 0.0 {
        report.push(IssueCode::NegativeIntensity, format!("alpha1 = {} must be >= 0", params.alpha1));
    }
    if params.alpha2 < 0.0 {
        report.push(IssueCode::NegativeIntensity, format!("alpha2 = {} must be >= 0", params.alpha2));
    }
    if !(params.alpha1 + params.alpha2 > 0.0) {
        report.push(IssueCode::ZeroTotalIntensity, "alpha1 + alpha2 must be > 0");
    }
    if params.sigma < 0.0 {
        report.push(IssueCode::NegativeVolatility, format!("sigma = {} must be >= 0", params.sigma));
    }
    if let Interarrival::RenewalGamma { shape, scale } = params.interarrival {
        if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
            report.push(
                IssueCode::InvalidInterarrival,
                format!("gamma interarrival needs shape, scale > 0 (got {shape}, {scale})"),
            );
        }
    }
    if params.alpha1 == 0.0 && params.c >= 0.0 {
        report.push(
            IssueCode::NoRuinPossible,
            "no downward jumps and c >= 0: the ruin probability is identically 0",
        );
    }
    if params.sigma == 0.0 {
        report.push(IssueCode::SimulatorOnly, "sigma = 0 is supported by the simulator only");
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn reference() -> ModelParams {
        ModelParams {
            a: 1.0,
            sigma: 1.0,
            c: 1.0,
            alpha1: 1.0,
            alpha2: 0.5,
            mu1: 1.0,
            mu2: 2.0,
            interarrival: Interarrival::PoissonExponential,
        }
    }

    #[test]
    fn derive_examples() {
        let d = reference().derive().unwrap();
        assert_eq!(d.beta, 1.0);
        assert_eq!(d.kappa, 0.5);
        assert_eq!(d.delta_mu, 1.0);
        assert_eq!(d.mu_sq, 2.0);
        assert_eq!(d.alpha_total, 1.5);

        let p = ModelParams { a: 0.5, ..reference() };
        let d = p.derive().unwrap();
        assert_eq!(d.beta, 0.0);
        assert_eq!(d.kappa, 0.0);
    }

    #[test]
    fn derive_rejects_zero_sigma() {
        let p = ModelParams { sigma: 0.0, ..reference() };
        assert!(matches!(p.derive(), Err(RuinError::InvalidArgument(_))));
    }

    #[test]
    fn validation_codes() {
        assert!(reference().validate().is_empty());

        let r = ModelParams { mu1: -1.0, ..reference() }.validate();
        assert!(r.has(IssueCode::NegativeJumpMean));
        assert!(r.has_violations());

        let r = ModelParams { alpha1: 0.0, c: 1.0, ..reference() }.validate();
        assert!(r.has(IssueCode::NoRuinPossible));
        assert!(!r.has_violations());

        let r = ModelParams { sigma: 0.0, ..reference() }.validate();
        assert!(r.has(IssueCode::SimulatorOnly));
        assert!(!r.has_violations());

        let r = ModelParams { alpha1: 0.0, alpha2: 0.0, ..reference() }.validate();
        assert!(r.has(IssueCode::ZeroTotalIntensity));

        let r = ModelParams {
            interarrival: Interarrival::RenewalGamma { shape: 0.0, scale: 1.0 },
            ..reference()
        }
        .validate();
        assert!(r.has(IssueCode::InvalidInterarrival));
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let text = r#"{"a":1,"sigma":1,"c":1,"alpha1":1,"alpha2":0.5,"mu1":1,"mu2":2,"lambda":3}"#;
        assert!(ModelParams::from_json(text).is_err());
        let text = r#"{"a":1,"sigma":1,"c":1,"alpha1":1,"alpha2":0.5,"mu1":1,"mu2":2,
                       "interarrival":{"kind":"renewal_gamma","shape":2,"scale":0.5,"x":1}}"#;
        assert!(ModelParams::from_json(text).is_err());
        let text = r#"{"a":1,"sigma":1,"c":1,"alpha1":1,"alpha2":0.5,"mu1":1,"mu2":2}"#;
        assert_eq!(ModelParams::from_json(text).unwrap(), reference());
    }

    fn arb_params() -> impl Strategy<Value = ModelParams> {
        (
            -5.0..5.0f64,
            1e-3..5.0f64,
            -5.0..5.0f64,
            0.0..5.0f64,
            1e-3..5.0f64,
            1e-3..10.0f64,
            1e-3..10.0f64,
            prop::option::of((1e-2..10.0f64, 1e-2..10.0f64)),
        )
            .prop_map(|(a, sigma, c, alpha1, alpha2, mu1, mu2, gamma)| ModelParams {
                a,
                sigma,
                c,
                alpha1,
                alpha2,
                mu1,
                mu2,
                interarrival: match gamma {
                    Some((shape, scale)) => Interarrival::RenewalGamma { shape, scale },
                    None => Interarrival::PoissonExponential,
                },
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn kappa_matches_half_sigma_sq_beta(p in arb_params()) {
            let d = p.derive().unwrap();
            let s2 = p.sigma * p.sigma;
            let alt = 0.5 * s2 * d.beta;
            prop_assert!((d.kappa - alt).abs() <= 1e-12 * (1.0 + d.kappa.abs()));
        }
    }

    proptest! {
        #[test]
        fn json_round_trip(p in arb_params()) {
            let back = ModelParams::from_json(&p.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
