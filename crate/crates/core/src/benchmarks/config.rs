use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Overrides for the default benchmark parameters.
///
/// Read from a TOML file of flat `key = value` pairs; every key is optional:
///
/// ```toml
/// N = 256          # full-order dimension; mesh width follows from the domain
/// dt = 5e-6        # POD time step
/// T = 0.05         # POD horizon
/// n_max = 8        # largest ROM dimension of the sweep
/// c1 = 8.9e-13     # shallow ice, cubic coefficient
/// c2 = 2.8e7       # shallow ice, degree-8 coefficient
/// boundary = "neumann"   # Chafee–Infante right boundary: "neumann" | "frozen"
/// form = "divergence"    # shallow ice flux form: "divergence" | "literal"
/// ```
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    #[serde(rename = "N")]
    pub dim: Option<usize>,
    pub dt: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub n_max: Option<usize>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub boundary: Option<String>,
    pub form: Option<String>,
}

impl BenchmarkConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                path: origin.to_string(),
                line,
                message: e.message().to_string(),
            }
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_keys() {
        let c = BenchmarkConfig::from_toml_str("N = 64\ndt = 1e-6\nT = 0.5\nc2 = 3.0\nform = \"literal\"\n", "t").unwrap();
        assert_eq!(c.dim, Some(64));
        assert_eq!(c.dt, Some(1e-6));
        assert_eq!(c.horizon, Some(0.5));
        assert_eq!(c.c2, Some(3.0));
        assert_eq!(c.form.as_deref(), Some("literal"));
        assert_eq!(BenchmarkConfig::from_toml_str("", "t").unwrap(), BenchmarkConfig::default());
    }

    #[test]
    fn reports_line_of_bad_key() {
        let err = BenchmarkConfig::from_toml_str("N = 64\nbogus = 1\n", "cfg.toml").unwrap_err();
        match err {
            Error::Parse { line, path, .. } => {
                assert_eq!(path, "cfg.toml");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other}"),
        }
    }
}
