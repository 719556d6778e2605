//! JSON scenario format.
//!
//! ```json
//! {
//!   "T0": 2, "L": 1, "T": 2, "C": 1.0, "gamma": 1.0, "p0": 1.0,
//!   "alpha": [[1.0], [1.0]],
//!   "user_types": [{
//!     "utility": {"kind": "linear", "param": 1.0},
//!     "delta": 1.0,
//!     "x_ini": [[1.0], [1.0]],
//!     "beta": [{"t": 1, "l": 1, "t_next": 2, "l_next": 1, "prob": 1.0}]
//!   }]
//! }
//! ```
//!
//! Matrices have one row per time slot and one column per location, given
//! inline or as `{"csv": "relative/path.csv"}`. Indices in `beta` are 1-based
//! and omitted entries are zero. Utility kinds are `log` (`k log(1 + x)`),
//! `linear` (`rho x`) and `sqrt` (`2 c sqrt(1 + x)`).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tlap_core::{validate_scenario, LocalMobility, Matrix, Scenario, SquareRoot, UserType, Utility, Violation};

use crate::csv_matrix::read_matrix_csv;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(rename = "T0")]
    pub horizon: usize,
    #[serde(rename = "L")]
    pub locations: usize,
    #[serde(rename = "T")]
    pub interval: usize,
    #[serde(rename = "C")]
    pub capacity: f64,
    pub gamma: f64,
    pub p0: f64,
    pub alpha: MatrixSource,
    pub user_types: Vec<UserTypeFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSource {
    Inline(Vec<Vec<f64>>),
    Csv { csv: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityKind {
    Log,
    Linear,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityFile {
    pub kind: UtilityKind,
    pub param: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaEntry {
    pub t: usize,
    pub l: usize,
    pub t_next: usize,
    pub l_next: usize,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserTypeFile {
    pub utility: UtilityFile,
    pub delta: f64,
    pub x_ini: MatrixSource,
    #[serde(default)]
    pub beta: Vec<BetaEntry>,
}

fn resolve(source: &MatrixSource, base: &Path) -> Result<Vec<Vec<f64>>> {
    match source {
        MatrixSource::Inline(rows) => Ok(rows.clone()),
        MatrixSource::Csv { csv } => read_matrix_csv(&base.join(csv)),
    }
}

fn matrix(rows: Vec<Vec<f64>>, path: &str, t0: usize, l: usize, violations: &mut Vec<Violation>) -> Matrix {
    let shape_ok = rows.len() == t0 && rows.iter().all(|r| r.len() == l);
    match Matrix::from_rows(&rows) {
        Ok(m) if shape_ok => m,
        _ => {
            let got: Vec<usize> = rows.iter().map(Vec::len).collect();
            violations.push(Violation {
                path: path.into(),
                message: format!("expected {t0} rows of {l} values, got row lengths {got:?}"),
            });
            Matrix::zeros(t0, l)
        }
    }
}

fn utility(u: &UtilityFile) -> Utility {
    match u.kind {
        UtilityKind::Log => Utility::Logarithmic { k: u.param },
        UtilityKind::Linear => Utility::Linear { rho: u.param },
        UtilityKind::Sqrt => Utility::GeneralConcave(Arc::new(SquareRoot { scale: u.param })),
    }
}

impl ScenarioFile {
    /// Builds the scenario, resolving CSV paths against `base`, renormalizing
    /// rows within rounding distance of one and validating the result.
    pub fn into_scenario(self, base: &Path, origin: &Path) -> Result<Scenario> {
        let (t0, l, interval) = (self.horizon, self.locations, self.interval);
        let mut violations = Vec::new();
        let alpha = matrix(resolve(&self.alpha, base)?, "alpha", t0, l, &mut violations);
        let mut user_types = Vec::with_capacity(self.user_types.len());
        for (a, ut) in self.user_types.iter().enumerate() {
            let prefix = format!("user_types[{}]", a + 1);
            let initial_demand = matrix(resolve(&ut.x_ini, base)?, &format!("{prefix}.x_ini"), t0, l, &mut violations);
            let mut beta = LocalMobility::zeros(t0, l, interval.max(1));
            for (i, e) in ut.beta.iter().enumerate() {
                let in_range = (1..=t0).contains(&e.t)
                    && (1..=l).contains(&e.l)
                    && (1..=l).contains(&e.l_next)
                    && e.t_next > e.t
                    && e.t_next < e.t + interval
                    && e.t_next <= t0;
                if !in_range || !beta.set(e.t - 1, e.l - 1, e.t_next - 1, e.l_next - 1, e.prob) {
                    violations.push(Violation {
                        path: format!("{prefix}.beta[{}]", i + 1),
                        message: format!(
                            "({}, {}) -> ({}, {}) is outside the scheduling window",
                            e.t, e.l, e.t_next, e.l_next
                        ),
                    });
                }
            }
            user_types.push(UserType {
                utility: utility(&ut.utility),
                delta: ut.delta,
                beta,
                initial_demand,
            });
        }
        let mut s = Scenario {
            horizon: t0,
            locations: l,
            interval,
            capacity: self.capacity,
            gamma: self.gamma,
            base_price: self.p0,
            alpha,
            user_types,
        };
        if violations.is_empty() {
            s.renormalize();
            violations = validate_scenario(&s);
        }
        if violations.is_empty() {
            Ok(s)
        } else {
            Err(HarnessError::Invalid {
                path: origin.to_path_buf(),
                violations,
            })
        }
    }

    /// Inline file representation of `s`. Only log, linear and square-root utilities can be written.
    pub fn from_scenario(s: &Scenario) -> Result<Self> {
        let mut user_types = Vec::with_capacity(s.user_types.len());
        for (a, ut) in s.user_types.iter().enumerate() {
            let utility = match &ut.utility {
                Utility::Logarithmic { k } => UtilityFile {
                    kind: UtilityKind::Log,
                    param: *k,
                },
                Utility::Linear { rho } => UtilityFile {
                    kind: UtilityKind::Linear,
                    param: *rho,
                },
                other => {
                    return Err(HarnessError::Incompatible(format!(
                        "user type {} has a {} utility, which the scenario format cannot express",
                        a + 1,
                        other.kind()
                    )))
                }
            };
            let mut beta = Vec::new();
            for t in 0..s.horizon {
                let window = s.window(t);
                for l in 0..s.locations {
                    for tp in window.future_slots() {
                        for lp in 0..s.locations {
                            let prob = ut.beta.get(t, l, tp, lp);
                            if prob != 0.0 {
                                beta.push(BetaEntry {
                                    t: t + 1,
                                    l: l + 1,
                                    t_next: tp + 1,
                                    l_next: lp + 1,
                                    prob,
                                });
                            }
                        }
                    }
                }
            }
            user_types.push(UserTypeFile {
                utility,
                delta: ut.delta,
                x_ini: MatrixSource::Inline(ut.initial_demand.to_rows()),
                beta,
            });
        }
        Ok(Self {
            description: None,
            horizon: s.horizon,
            locations: s.locations,
            interval: s.interval,
            capacity: s.capacity,
            gamma: s.gamma,
            p0: s.base_price,
            alpha: MatrixSource::Inline(s.alpha.to_rows()),
            user_types,
        })
    }
}

pub fn read_scenario_file(path: &Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads, renormalizes and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let base = path.parent().unwrap_or(Path::new("."));
    read_scenario_file(path)?.into_scenario(base, path)
}

pub fn write_scenario(path: &Path, s: &Scenario) -> Result<()> {
    let file = ScenarioFile::from_scenario(s)?;
    let text = serde_json::to_string_pretty(&file).expect("scenario files always serialize");
    std::fs::write(path, text + "\n").map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_SLOT: &str = r#"{
        "T0": 2, "L": 1, "T": 2, "C": 1.0, "gamma": 1.0, "p0": 1.0,
        "alpha": [[1.0], [1.0]],
        "user_types": [{
            "utility": {"kind": "linear", "param": 1.0},
            "delta": 1.0,
            "x_ini": [[1.0], [1.0]],
            "beta": [{"t": 1, "l": 1, "t_next": 2, "l_next": 1, "prob": 1.0}]
        }]
    }"#;

    fn parse(text: &str) -> Result<Scenario> {
        let file: ScenarioFile = serde_json::from_str(text).unwrap();
        file.into_scenario(Path::new("."), Path::new("inline.json"))
    }

    #[test]
    fn loads_the_two_slot_example() {
        let s = parse(TWO_SLOT).unwrap();
        assert_eq!((s.horizon, s.locations, s.interval), (2, 1, 2));
        assert_eq!(s.user_types[0].beta.get(0, 0, 1, 0), 1.0);
        assert!(s.all_linear());
    }

    #[test]
    fn window_violations_name_the_entry() {
        let text = TWO_SLOT.replace("\"t_next\": 2", "\"t_next\": 3");
        let Err(HarnessError::Invalid { violations, .. }) = parse(&text) else { panic!() };
        assert_eq!(violations[0].path, "user_types[1].beta[1]");
    }

    #[test]
    fn shape_and_normalization_errors() {
        let text = TWO_SLOT.replace("\"alpha\": [[1.0], [1.0]]", "\"alpha\": [[1.0]]");
        let Err(HarnessError::Invalid { violations, .. }) = parse(&text) else { panic!() };
        assert_eq!(violations[0].path, "alpha");
        let text = TWO_SLOT.replace("\"alpha\": [[1.0], [1.0]]", "\"alpha\": [[0.8], [1.0]]");
        assert_eq!(parse(&text).unwrap_err().exit_code(), 1);
        let text = TWO_SLOT.replace("\"alpha\": [[1.0], [1.0]]", "\"alpha\": [[0.9999999], [1.0]]");
        assert_eq!(parse(&text).unwrap().alpha[(0, 0)], 1.0);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = TWO_SLOT.replace("\"gamma\"", "\"gama\": 2, \"gamma\"");
        assert!(serde_json::from_str::<ScenarioFile>(&text).is_err());
    }

    #[test]
    fn csv_sources_resolve_relative_to_the_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("alpha.csv"), "1\n1\n").unwrap();
        let text = TWO_SLOT.replace("\"alpha\": [[1.0], [1.0]]", "\"alpha\": {\"csv\": \"alpha.csv\"}");
        let path = dir.path().join("s.json");
        std::fs::write(&path, text).unwrap();
        assert_eq!(load_scenario(&path).unwrap().alpha, Matrix::filled(2, 1, 1.0));
    }
}
