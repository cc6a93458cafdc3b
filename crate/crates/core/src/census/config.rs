//! Census configuration: one TOML document with `surface`, `discretization`,
//! `search` and `output` tables. Unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesic_flow::{ConnectOptions, ShootOptions};
use crate::index::IndexOptions;
use crate::loop_space::{DescentParams, StepRule};
use crate::minimax::MinimaxParams;
use crate::scalar::{lit, Real};
use crate::surface::{Family, Metric, MetricMode, Profile, Tannery};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensusConfig {
    pub surface: SurfaceConfig,
    #[serde(default)]
    pub discretization: DiscretizationConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    /// Required for the revolution modes.
    pub family: Option<Family>,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default = "default_mode")]
    pub mode: MetricMode,
    pub tabulated: Option<TabulatedConfig>,
    pub tannery: Option<TanneryConfig>,
    /// Search window in z, clipped to the surface domain.
    pub domain: Option<[f64; 2]>,
    pub pole_exclusion: Option<f64>,
}

fn default_mode() -> MetricMode {
    MetricMode::Intrinsic
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedConfig {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TanneryConfig {
    pub alpha: f64,
    /// Coefficients of `x, x³, x⁵, …` in `h`.
    #[serde(default)]
    pub h: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationConfig {
    /// Node count of broken loops.
    pub j: usize,
    /// Segment length cap.
    pub epsilon: f64,
    /// Connection resolution: RK4 steps per unit of `|Δx|·(1 + |Γ|)`.
    pub step: f64,
    /// Fixed step of shooting integrations.
    pub shoot_step: f64,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        DiscretizationConfig {
            j: 64,
            epsilon: 1.0,
            step: 0.01,
            shoot_step: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRuleName {
    Lbfgs,
    Steepest,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DescentConfig {
    pub max_iter: usize,
    pub step_rule: StepRuleName,
    pub memory: usize,
    pub max_node_step: f64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig {
            max_iter: 4000,
            step_rule: StepRuleName::Lbfgs,
            memory: 8,
            max_node_step: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinimaxConfig {
    pub stages: usize,
    pub max_stages: usize,
    pub max_rounds: usize,
    pub steps_per_round: usize,
    pub climb_budget: usize,
    pub tilt: f64,
}

impl Default for MinimaxConfig {
    fn default() -> Self {
        let p = MinimaxParams::<f64>::default();
        MinimaxConfig {
            stages: p.stages,
            max_stages: p.max_stages,
            max_rounds: p.max_rounds,
            steps_per_round: p.steps_per_round,
            climb_budget: p.climb_budget,
            tilt: p.tilt,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub degree: i64,
    pub z_minus: f64,
    pub z_plus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShootingConfig {
    /// `(n_osc, q)` pairs.
    pub targets: Vec<[u32; 2]>,
    /// Clairaut momentum bracket searched for every target.
    pub bracket: [f64; 2],
    #[serde(default = "default_max_time")]
    pub max_time: f64,
}

fn default_max_time() -> f64 {
    400.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub degrees: Vec<i64>,
    /// z-levels of the parallels used as descent seeds.
    pub seeds: Vec<f64>,
    /// Seeds get `seed_tilt·cos θ` added to z.
    pub seed_tilt: f64,
    pub scan: bool,
    pub scan_points: usize,
    pub escape_z: f64,
    pub critical_tol: f64,
    pub distinct_tol: f64,
    pub iterate_cap: usize,
    pub hessian: bool,
    pub family_probe: bool,
    pub mountain_pass: bool,
    pub descent: DescentConfig,
    pub minimax: MinimaxConfig,
    pub sweeps: Vec<SweepConfig>,
    pub shooting: Option<ShootingConfig>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            degrees: vec![1],
            seeds: Vec::new(),
            seed_tilt: 0.0,
            scan: true,
            scan_points: 2401,
            escape_z: 50.0,
            critical_tol: 1e-8,
            distinct_tol: 1e-3,
            iterate_cap: 16,
            hessian: false,
            family_probe: true,
            mountain_pass: true,
            descent: DescentConfig::default(),
            minimax: MinimaxConfig::default(),
            sweeps: Vec::new(),
            shooting: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Json,
    Csv,
    Polyline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    pub formats: Vec<OutputFormat>,
    /// Minimax round traces and shooting trajectory dumps.
    pub trace: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: None,
            formats: vec![OutputFormat::Json, OutputFormat::Csv],
            trace: false,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be positive, got {v}")))
    }
}

impl CensusConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: CensusConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.surface;
        match s.mode {
            MetricMode::Chart => return Err(config_err("chart metrics cannot be configured from a file")),
            MetricMode::Tannery => {
                if s.tannery.is_none() {
                    return Err(config_err("mode = \"tannery\" needs a [surface.tannery] table"));
                }
            }
            MetricMode::Intrinsic | MetricMode::Embedded => match s.family {
                None => return Err(config_err("surface.family is required")),
                Some(Family::Tabulated) if s.tabulated.is_none() => {
                    return Err(config_err("family \"tabulated\" needs a [surface.tabulated] table"))
                }
                _ => {}
            },
        }
        if let Some([lo, hi]) = s.domain {
            if !(lo < hi) {
                return Err(config_err(format!(
                    "surface.domain must be increasing, got [{lo}, {hi}]"
                )));
            }
        }
        if let Some(p) = s.pole_exclusion {
            positive("surface.pole_exclusion", p)?;
        }
        let d = &self.discretization;
        if d.j < 3 {
            return Err(config_err(format!("discretization.j must be at least 3, got {}", d.j)));
        }
        positive("discretization.epsilon", d.epsilon)?;
        positive("discretization.step", d.step)?;
        positive("discretization.shoot_step", d.shoot_step)?;
        let q = &self.search;
        if q.degrees.is_empty() {
            return Err(config_err("search.degrees is empty"));
        }
        let plane = self.metric::<f64>()?.is_plane();
        if !plane && q.degrees.contains(&0) {
            return Err(config_err(
                "degree 0 loops are contractible on a cylinder; use nonzero degrees",
            ));
        }
        positive("search.escape_z", q.escape_z)?;
        positive("search.critical_tol", q.critical_tol)?;
        positive("search.distinct_tol", q.distinct_tol)?;
        if q.iterate_cap == 0 {
            return Err(config_err("search.iterate_cap must be at least 1"));
        }
        if q.scan_points < 3 {
            return Err(config_err("search.scan_points must be at least 3"));
        }
        if q.descent.max_iter == 0 {
            return Err(config_err("search.descent.max_iter must be at least 1"));
        }
        positive("search.descent.max_node_step", q.descent.max_node_step)?;
        if q.minimax.stages < 3 || q.minimax.max_stages < q.minimax.stages {
            return Err(config_err("search.minimax needs 3 <= stages <= max_stages"));
        }
        for w in &q.sweeps {
            if !(w.z_minus < w.z_plus) || w.degree == 0 {
                return Err(config_err(format!("invalid sweep {w:?}")));
            }
        }
        if let Some(sh) = &q.shooting {
            if !(sh.bracket[0] < sh.bracket[1]) {
                return Err(config_err("search.shooting.bracket must be increasing"));
            }
            positive("search.shooting.max_time", sh.max_time)?;
            if sh.targets.iter().any(|t| t[0] == 0 || t[1] == 0) {
                return Err(config_err("shooting targets need n_osc, q >= 1"));
            }
        }
        Ok(())
    }

    pub fn metric<T: Real>(&self) -> Result<Metric<T>> {
        let s = &self.surface;
        let params: Vec<T> = s.params.iter().map(|&v| lit(v)).collect();
        let m = match s.mode {
            MetricMode::Tannery => {
                let t = s
                    .tannery
                    .as_ref()
                    .ok_or_else(|| config_err("missing [surface.tannery]"))?;
                let h: Vec<T> = t.h.iter().map(|&v| lit(v)).collect();
                Metric::tannery(Tannery::new(lit(t.alpha), &h)?)
            }
            mode => {
                let family = s.family.ok_or_else(|| config_err("surface.family is required"))?;
                let profile = match (family, &s.tabulated) {
                    (Family::Tabulated, Some(tab)) => {
                        let z: Vec<T> = tab.z.iter().map(|&v| lit(v)).collect();
                        let r: Vec<T> = tab.r.iter().map(|&v| lit(v)).collect();
                        Profile::tabulated(&z, &r)?
                    }
                    (Family::Tabulated, None) => return Err(config_err("missing [surface.tabulated]")),
                    _ => Profile::new(family, &params)?,
                };
                Metric::revolution(profile, mode)?
            }
        };
        Ok(match s.pole_exclusion {
            Some(p) => m.with_pole_exclusion(lit(p)),
            None => m,
        })
    }

    pub fn metric_arc<T: Real>(&self) -> Result<Arc<Metric<T>>> {
        Ok(Arc::new(self.metric()?))
    }

    /// z-window for scans and trapping searches.
    pub fn window<T: Real>(&self, m: &Metric<T>) -> (T, T) {
        let [lo, hi] = self.surface.domain.unwrap_or([-6.0, 6.0]);
        let d = m.domain();
        let mut lo = lit::<T>(lo).max(d.lo);
        let mut hi = lit::<T>(hi).min(d.hi);
        if m.is_plane() {
            lo = lo.max(d.lo + m.pole_exclusion());
        }
        if m.mode() == MetricMode::Tannery {
            let pad = lit::<T>(1e-3);
            lo = lo.max(d.lo + pad);
            hi = hi.min(d.hi - pad);
        }
        (lo, hi)
    }

    pub fn connect_options<T: Real>(&self) -> ConnectOptions<T> {
        ConnectOptions {
            segment_cap: lit(self.discretization.epsilon),
            resolution: lit(self.discretization.step),
            ..ConnectOptions::default()
        }
    }

    pub fn descent_params<T: Real>(&self) -> DescentParams<T> {
        let q = &self.search;
        DescentParams {
            tol: T::tol(q.critical_tol, 64.0),
            max_iter: q.descent.max_iter,
            escape_z: lit(q.escape_z),
            step_rule: match q.descent.step_rule {
                StepRuleName::Lbfgs => StepRule::Lbfgs {
                    memory: q.descent.memory,
                },
                StepRuleName::Steepest => StepRule::Steepest,
            },
            max_node_step: lit(q.descent.max_node_step),
            ..DescentParams::default()
        }
    }

    pub fn minimax_params<T: Real>(&self) -> MinimaxParams<T> {
        let c = &self.search.minimax;
        MinimaxParams {
            stages: c.stages,
            max_stages: c.max_stages,
            max_rounds: c.max_rounds,
            steps_per_round: c.steps_per_round,
            climb_budget: c.climb_budget,
            tilt: lit(c.tilt),
            distinct_tol: lit(self.search.distinct_tol),
            descent: self.descent_params(),
            ..MinimaxParams::default()
        }
    }

    pub fn index_options<T: Real>(&self) -> IndexOptions<T> {
        let q = &self.search;
        let descent = self.descent_params();
        IndexOptions {
            iterate_cap: q.iterate_cap,
            critical_tol: T::tol(q.critical_tol, 64.0),
            hessian: q.hessian,
            family_probe: q.family_probe,
            probe: DescentParams {
                max_iter: descent.max_iter.min(200),
                ..descent
            },
            ..IndexOptions::default()
        }
    }

    pub fn shoot_options<T: Real>(&self, m: &Metric<T>) -> ShootOptions<T> {
        let window = self.window(m);
        ShootOptions {
            h: lit(self.discretization.shoot_step),
            z_window: window,
            max_time: lit(self.search.shooting.as_ref().map_or(400.0, |s| s.max_time)),
            escape_z: lit(self.search.escape_z),
            ..ShootOptions::default()
        }
    }
}
