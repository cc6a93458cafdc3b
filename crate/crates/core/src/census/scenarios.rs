//! Built-in scenario surfaces with frozen configurations and their
//! postconditions.

use serde::Serialize;

use super::config::CensusConfig;
use super::report::{CensusReport, Provenance};
use super::run_census;
use crate::error::{Error, Result};
use crate::index::Classification;

/// A named, frozen census configuration.
#[derive(Clone, Copy, Debug)]
pub struct Scenario {
    pub name: &'static str,
    pub config: &'static str,
}

impl Scenario {
    pub fn config(&self) -> Result<CensusConfig> {
        CensusConfig::parse(self.config)
    }
}

/// The four verification scenarios.
pub fn builtin_scenarios() -> [Scenario; 4] {
    [
        Scenario {
            name: "monotone",
            config: include_str!("../../scenarios/monotone.toml"),
        },
        Scenario {
            name: "inflection",
            config: include_str!("../../scenarios/inflection.toml"),
        },
        Scenario {
            name: "unique-waist",
            config: include_str!("../../scenarios/unique-waist.toml"),
        },
        Scenario {
            name: "bulge",
            config: include_str!("../../scenarios/bulge.toml"),
        },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub label: String,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioCheck {
    pub name: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl ScenarioCheck {
    fn new(name: &str, checks: Vec<Check>) -> Self {
        ScenarioCheck {
            name: name.to_string(),
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }
}

fn check(label: impl Into<String>, passed: bool) -> Check {
    Check {
        label: label.into(),
        passed,
    }
}

/// Evaluates the scenario postconditions on a finished report.
pub fn check_scenario(name: &str, report: &CensusReport) -> Result<ScenarioCheck> {
    let four_pi_sq = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
    let rep = |g: usize| &report.records[report.groups[g].representative];
    let checks = match name {
        "monotone" => {
            let descents: Vec<_> = report.tasks.iter().filter(|t| t.task.starts_with("descend")).collect();
            vec![
                check("census is empty", report.records.is_empty()),
                check("at least one descent ran", !descents.is_empty()),
                check("every descent escaped", descents.iter().all(|t| t.status == "escaped")),
            ]
        }
        "inflection" => {
            let one = report.groups.len() == 1;
            let mut v = vec![check(format!("one group (found {})", report.groups.len()), one)];
            if one {
                let r = rep(0);
                v.push(check(
                    format!("degenerate_flat (found {})", r.index.classification.name()),
                    r.index.classification == Classification::DegenerateFlat,
                ));
                v.push(check(
                    "ind_omega(c^k) = 0 for k <= 16",
                    r.index.iterates.len() >= 16 && r.index.iterates.iter().all(|i| i.ind_omega == 0),
                ));
                v.push(check(
                    format!("nullity 1 (found {})", r.index.nullity()),
                    r.index.nullity() == 1,
                ));
            }
            v
        }
        "unique-waist" => {
            let one = report.groups.len() == 1;
            let converged = report
                .tasks
                .iter()
                .filter(|t| t.task.starts_with("descend") && t.status == "converged")
                .count();
            let mut v = vec![
                check(format!("one group (found {})", report.groups.len()), one),
                check(
                    format!("at least 4 descents converged (found {converged})"),
                    converged >= 4,
                ),
            ];
            if one {
                let r = rep(0);
                v.push(check(
                    format!("energy 4π² within 1e-6 relative (found {:?})", r.energy),
                    ((r.energy - four_pi_sq) / four_pi_sq).abs() <= 1e-6,
                ));
                v.push(check(
                    "nondegenerate_minimum",
                    r.index.classification == Classification::NondegenerateMinimum,
                ));
                v.push(check(
                    "ind_omega(c^k) = 0 and nullity 0 for k <= 16",
                    r.index.iterates.len() >= 16 && r.index.iterates.iter().all(|i| i.ind_omega == 0 && i.nullity == 0),
                ));
                v.push(check(
                    format!("mind = 0 (found {:?})", r.index.mind),
                    r.index.mind == 0.0,
                ));
            }
            v
        }
        "bulge" => {
            let waist = report
                .records
                .iter()
                .find(|r| r.provenance == Provenance::ParallelScan && r.mean_z.abs() < 1e-6);
            match waist {
                None => vec![check("waist parallel found", false)],
                Some(r) => {
                    let om = |k: usize| r.index.iterates.get(k - 1).map(|i| i.ind_omega);
                    vec![
                        check("waist parallel found", true),
                        check(format!("ind_omega(c) = 3 (found {:?})", om(1)), om(1) == Some(3)),
                        check(format!("ind_omega(c³) = 11 (found {:?})", om(3)), om(3) == Some(11)),
                        check(
                            format!("mind = 4.0 ± 0.01 (found {:?})", r.index.mind),
                            (r.index.mind - 4.0).abs() <= 0.01,
                        ),
                    ]
                }
            }
        }
        other => return Err(Error::Precondition(format!("unknown scenario {other:?}"))),
    };
    Ok(ScenarioCheck::new(name, checks))
}

/// Runs the built-in scenarios, optionally only the one named `only`.
pub fn verify_scenarios(only: Option<&str>) -> Result<Vec<ScenarioCheck>> {
    let chosen: Vec<Scenario> = builtin_scenarios()
        .into_iter()
        .filter(|s| only.is_none_or(|n| n == s.name))
        .collect();
    if chosen.is_empty() {
        return Err(Error::Config(format!("unknown scenario {:?}", only.unwrap_or(""))));
    }
    chosen
        .iter()
        .map(|s| {
            let report = run_census(&s.config()?)?;
            check_scenario(s.name, &report)
        })
        .collect()
}
