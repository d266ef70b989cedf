use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distribution of the scalar jump mark of one class.
///
/// Marks live in `[0, 1]` in the canonical convention where the class jump
/// scaling is non-positive. Configurations written with signed marks
/// (negative marks, positive scaling) are accepted and flipped to the
/// canonical form when a market is built; only the product of scaling and
/// mark is economically meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JumpLaw {
    Deterministic { zbar: f64 },
    /// `u` with probability `p`, `dn` with probability `1 - p`.
    Binomial { u: f64, dn: f64, p: f64 },
    Discrete { support: Vec<f64>, probs: Vec<f64> },
}

impl JumpLaw {
    pub fn validate(&self, field: &str) -> Result<()> {
        let in_range = |z: f64| z.is_finite() && (-1.0..=1.0).contains(&z);
        match self {
            JumpLaw::Deterministic { zbar } => {
                if !in_range(*zbar) {
                    return Err(Error::param(format!("{field}.zbar"), "must lie in [-1, 1]"));
                }
            }
            JumpLaw::Binomial { u, dn, p } => {
                if !in_range(*u) {
                    return Err(Error::param(format!("{field}.u"), "must lie in [-1, 1]"));
                }
                if !in_range(*dn) {
                    return Err(Error::param(format!("{field}.dn"), "must lie in [-1, 1]"));
                }
                if !(p.is_finite() && (0.0..=1.0).contains(p)) {
                    return Err(Error::param(format!("{field}.p"), "must lie in [0, 1]"));
                }
            }
            JumpLaw::Discrete { support, probs } => {
                if support.is_empty() || support.len() != probs.len() {
                    return Err(Error::param(
                        format!("{field}.probs"),
                        "support and probs must be non-empty and of equal length",
                    ));
                }
                for (i, z) in support.iter().enumerate() {
                    if !in_range(*z) {
                        return Err(Error::param(format!("{field}.support[{i}]"), "must lie in [-1, 1]"));
                    }
                }
                for (i, q) in probs.iter().enumerate() {
                    if !(q.is_finite() && *q >= 0.0) {
                        return Err(Error::param(format!("{field}.probs[{i}]"), "must be >= 0"));
                    }
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::param(format!("{field}.probs"), format!("must sum to 1, got {total}")));
                }
            }
        }
        Ok(())
    }

    /// `(mark, probability)` pairs; atoms with zero probability are dropped.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let raw = match self {
            JumpLaw::Deterministic { zbar } => vec![(*zbar, 1.0)],
            JumpLaw::Binomial { u, dn, p } => vec![(*u, *p), (*dn, 1.0 - *p)],
            JumpLaw::Discrete { support, probs } => support.iter().copied().zip(probs.iter().copied()).collect(),
        };
        raw.into_iter().filter(|(_, q)| *q > 0.0).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            JumpLaw::Deterministic { zbar } => *zbar,
            JumpLaw::Binomial { u, dn, p } => {
                if rng.random::<f64>() < *p {
                    *u
                } else {
                    *dn
                }
            }
            JumpLaw::Discrete { support, probs } => {
                let x = rng.random::<f64>();
                let mut acc = 0.0;
                for (z, q) in support.iter().zip(probs) {
                    acc += q;
                    if x < acc {
                        return *z;
                    }
                }
                *support.last().expect("validated law has support")
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.atoms().iter().map(|(z, q)| z * q).sum()
    }

    /// Same law with every mark negated.
    pub fn negated(&self) -> JumpLaw {
        match self {
            JumpLaw::Deterministic { zbar } => JumpLaw::Deterministic { zbar: -zbar },
            JumpLaw::Binomial { u, dn, p } => JumpLaw::Binomial { u: -u, dn: -dn, p: *p },
            JumpLaw::Discrete { support, probs } => JumpLaw::Discrete {
                support: support.iter().map(|z| -z).collect(),
                probs: probs.clone(),
            },
        }
    }

    /// Equivalent discrete representation.
    pub fn to_discrete(&self) -> JumpLaw {
        let atoms = self.atoms();
        JumpLaw::Discrete {
            support: atoms.iter().map(|a| a.0).collect(),
            probs: atoms.iter().map(|a| a.1).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    #[test]
    fn validation() {
        assert!(JumpLaw::Deterministic { zbar: 0.3 }.validate("l").is_ok());
        assert!(JumpLaw::Deterministic { zbar: 1.3 }.validate("l").is_err());
        assert!(JumpLaw::Binomial { u: 0.3, dn: 0.1, p: 1.2 }.validate("l").is_err());
        let bad = JumpLaw::Discrete { support: vec![0.1, 0.2], probs: vec![0.5, 0.4] };
        assert!(bad.validate("laws[0]").unwrap_err().to_string().starts_with("laws[0].probs"));
    }

    #[test]
    fn binomial_sampling_frequency() {
        let law = JumpLaw::Binomial { u: 0.3, dn: 0.1, p: 0.25 };
        let mut rng = substream(1, 0, Stream::Marks);
        let n = 100_000;
        let hits = (0..n).filter(|_| law.sample(&mut rng) == 0.3).count() as f64 / n as f64;
        let se = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((hits - 0.25).abs() < 4.0 * se);
    }

    #[test]
    fn json_shape() {
        let law: JumpLaw = serde_json::from_str(r#"{"type":"binomial","u":0.3,"dn":0.1,"p":0.5}"#).unwrap();
        assert_eq!(law, JumpLaw::Binomial { u: 0.3, dn: 0.1, p: 0.5 });
    }
}
