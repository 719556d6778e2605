//! Solver settings read by `run --config`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tlap_core::{BcdConfig, DycorsConfig, SpgConfig};

use crate::error::{HarnessError, Result};
use crate::oracle::OracleConfig;

/// Every block is optional; missing fields take their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub spg: SpgConfig,
    pub bcd: BcdConfig,
    pub dycors: DycorsConfig,
    pub oracle: OracleConfig,
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_blocks_keep_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"spg": {"max_iters": 50}, "dycors": {"seed": 4}}"#).unwrap();
        assert_eq!(c.spg.max_iters, 50);
        assert_eq!(c.spg.memory, SpgConfig::default().memory);
        assert_eq!(c.dycors.seed, 4);
        assert_eq!(c.bcd, BcdConfig::default());
        assert!(serde_json::from_str::<RunConfig>(r#"{"spg": {"max_iter": 50}}"#).is_err());
    }
}
