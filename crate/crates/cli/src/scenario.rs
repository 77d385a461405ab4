use std::path::Path;

use covar_core::{MarketModel, RiskSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    #[serde(default = "first_asset")]
    pub conditioning_asset: usize,
    pub risk: RiskSpec,
    #[serde(default)]
    pub constraints: Constraints,
    #[serde(default)]
    pub targets: Option<Targets>,
}

fn first_asset() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constraints {
    #[serde(default)]
    pub non_negative: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Targets {
    Range {
        #[serde(rename = "E_min")]
        e_min: f64,
        #[serde(rename = "E_max")]
        e_max: f64,
        steps: usize,
    },
    Single {
        #[serde(rename = "E")]
        e: f64,
    },
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            format!("field `{path}`: {inner}")
        })?;
        s.check_shape()?;
        Ok(s)
    }

    fn check_shape(&self) -> Result<(), String> {
        let n = self.mu.len();
        if self.sigma.len() != n {
            return Err(format!("field `sigma`: expected {n} rows to match `mu`, found {}", self.sigma.len()));
        }
        for (i, row) in self.sigma.iter().enumerate() {
            if row.len() != n {
                return Err(format!("field `sigma[{i}]`: expected {n} entries, found {}", row.len()));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> MarketModel {
        MarketModel::new(self.mu.clone(), self.sigma.clone(), self.conditioning_asset, self.risk)
    }
}
