use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Preferences of the investor.
///
/// `beta` is the impatience rate. For power utility `c^gamma / gamma`,
/// `gamma` lies in `(-inf, 0) U (0, 1)`; for exponential utility
/// `-exp(-gamma c) / gamma`, `gamma > 0` and the wealth coefficient of the
/// value function is `kappa = r gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilitySpec {
    Log {
        beta: f64,
    },
    Power {
        beta: f64,
        gamma: f64,
    },
    Exponential {
        beta: f64,
        gamma: f64,
        /// Optional; when present it must equal `r * gamma`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa: Option<f64>,
    },
}

impl UtilitySpec {
    pub fn beta(&self) -> f64 {
        match *self {
            UtilitySpec::Log { beta } | UtilitySpec::Power { beta, .. } | UtilitySpec::Exponential { beta, .. } => beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let beta = self.beta();
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::param("utility.beta", "must be finite and > 0"));
        }
        match *self {
            UtilitySpec::Log { .. } => {}
            UtilitySpec::Power { gamma, .. } => {
                if !gamma.is_finite() || gamma == 0.0 || gamma >= 1.0 {
                    return Err(Error::param("utility.gamma", "power utility needs gamma < 1 and gamma != 0"));
                }
            }
            UtilitySpec::Exponential { gamma, .. } => {
                if !(gamma.is_finite() && gamma > 0.0) {
                    return Err(Error::param("utility.gamma", "exponential utility needs gamma > 0"));
                }
            }
        }
        Ok(())
    }

    /// `kappa = r gamma` for exponential utility, checked against any
    /// configured value.
    pub fn kappa(&self, r: f64) -> Result<f64> {
        match *self {
            UtilitySpec::Exponential { gamma, kappa, .. } => {
                let derived = r * gamma;
                if !(derived > 0.0) {
                    return Err(Error::param("utility.kappa", format!("r * gamma must be > 0, got {derived}")));
                }
                if let Some(k) = kappa {
                    if (k - derived).abs() > 1e-12 * derived.abs() {
                        return Err(Error::param("utility.kappa", format!("must equal r * gamma = {derived}, got {k}")));
                    }
                }
                Ok(derived)
            }
            _ => Err(Error::param("utility.kind", "kappa is defined for exponential utility only")),
        }
    }

    /// Same spec with `kappa` filled in from `r`.
    pub fn resolved(&self, r: f64) -> Result<Self> {
        self.validate()?;
        match *self {
            UtilitySpec::Exponential { beta, gamma, .. } => Ok(UtilitySpec::Exponential { beta, gamma, kappa: Some(self.kappa(r)?) }),
            other => Ok(other),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_is_r_gamma() {
        let u = UtilitySpec::Exponential { beta: 0.1, gamma: 2.0, kappa: None };
        assert_eq!(u.kappa(0.03).unwrap(), 0.06);
        let bad = UtilitySpec::Exponential { beta: 0.1, gamma: 2.0, kappa: Some(0.05) };
        assert!(bad.kappa(0.03).unwrap_err().to_string().starts_with("utility.kappa"));
        assert!(u.kappa(0.0).is_err());
    }

    #[test]
    fn power_gamma_range() {
        assert!(UtilitySpec::Power { beta: 0.1, gamma: 0.0 }.validate().is_err());
        assert!(UtilitySpec::Power { beta: 0.1, gamma: 1.0 }.validate().is_err());
        assert!(UtilitySpec::Power { beta: 0.1, gamma: -2.0 }.validate().is_ok());
    }

    #[test]
    fn json_tagging() {
        let u: UtilitySpec = serde_json::from_str(r#"{"kind":"power","beta":0.1,"gamma":0.5}"#).unwrap();
        assert_eq!(u, UtilitySpec::Power { beta: 0.1, gamma: 0.5 });
    }
}
