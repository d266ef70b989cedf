use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use contagion::{HawkesParams, MarketParams, UtilitySpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One run's model: intensity system, market and preferences.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub hawkes: HawkesParams,
    pub market: MarketParams,
    pub utility: UtilitySpec,
    /// Free-form note carried through to the sidecars.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let file = File::open(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let mut de = serde_json::Deserializer::from_reader(BufReader::new(file));
        let mut cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let at = e.path().to_string();
            let msg = e.inner().to_string();
            // Model validation reports `field: reason` relative to its section.
            let nested = msg.split_once(": ").filter(|(f, _)| !f.is_empty() && f.chars().all(|c| c.is_alphanumeric() || "_.[]".contains(c)));
            match nested {
                Some((field, reason)) if at != "." => CliError::Validation(format!("{}: {at}.{field}: {reason}", path.display())),
                _ => CliError::Validation(format!("{}: {at}: {msg}", path.display())),
            }
        })?;
        cfg.check()?;
        cfg.utility = cfg.utility.resolved(cfg.market.r()).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        if self.hawkes.m() != self.market.m() {
            return Err(CliError::Validation(format!(
                "hawkes.m: intensity system has {} classes but market.m is {}",
                self.hawkes.m(),
                self.market.m()
            )));
        }
        Ok(())
    }
}
