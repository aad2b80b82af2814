//! Run configuration: named presets, flat TOML files and overrides.
//!
//! Resolution order is preset, then file, then explicit overrides. A
//! `manifest.json` written by a previous run is accepted as a file and
//! reproduces that run.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linwave::NewtonCotes;
use crate::multistep::MultistepScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Primitive,
    Oscillator,
    Sweep,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Fig1,
        Preset::Fig2,
        Preset::Fig3,
        Preset::Primitive,
        Preset::Oscillator,
        Preset::Sweep,
        Preset::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Primitive => "primitive",
            Preset::Oscillator => "oscillator",
            Preset::Sweep => "sweep",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

/// Fully resolved parameters of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Preset,
    pub alpha: f64,
    pub m: u32,
    pub k: Vec<usize>,
    /// Element size; `1/h - 1` interior nodes.
    pub h: f64,
    pub delta: f64,
    /// Final time.
    #[serde(rename = "T")]
    pub t_end: f64,
    /// Picard runs up to this time and AB5 continues to `T`.
    pub handoff: f64,
    pub rule: NewtonCotes,
    pub multistep: MultistepScheme,
    /// RK4 substeps per output step of the ansatz oracle.
    pub oracle_substeps: usize,
    pub window: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Rescale sine data to unit discrete energy.
    pub normalize: bool,
    /// Linear damping coefficient of the reference run.
    pub beta: f64,
    /// Point of the displacement trace.
    pub probe: f64,
    pub fit_start: f64,
    pub stiffness: f64,
    pub radius: f64,
    pub samples: usize,
    pub target: f64,
    pub osc_horizon: f64,
    pub osc_step: f64,
    pub seed: u64,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn preset(experiment: Preset) -> Self {
        let base = RunConfig {
            experiment,
            alpha: 1.0,
            m: 1,
            k: vec![1, 2, 4, 8],
            h: 0.01,
            delta: 0.002,
            t_end: 10.0,
            handoff: 10.0,
            rule: NewtonCotes::Boole,
            multistep: MultistepScheme::Exponential,
            oracle_substeps: 10,
            window: 1.0,
            tolerance: 1e-8,
            max_iterations: 50,
            normalize: false,
            beta: (2.0 / std::f64::consts::PI).powi(2),
            probe: 0.5,
            fit_start: 10.0,
            stiffness: 1.0,
            radius: 2f64.sqrt(),
            samples: 64,
            target: 0.1,
            osc_horizon: 500.0,
            osc_step: 0.01,
            seed: 0,
            out: PathBuf::from("out").join(experiment.name()),
        };
        match experiment {
            Preset::Fig1 => RunConfig { k: vec![1], ..base },
            Preset::Fig2 | Preset::Custom => base,
            Preset::Fig3 => RunConfig { t_end: 50.0, ..base },
            Preset::Primitive => RunConfig {
                k: vec![1],
                t_end: 50.0,
                ..base
            },
            Preset::Oscillator => base,
            Preset::Sweep => RunConfig {
                normalize: true,
                ..base
            },
        }
    }

    pub fn interior_nodes(&self) -> Result<usize> {
        let inv = 1.0 / self.h;
        let r = inv.round();
        if (inv - r).abs() > 1e-6 * r || r < 2.0 {
            return Err(Error::Config(format!("1/h must be an integer ≥ 2, got h = {}", self.h)));
        }
        Ok(r as usize - 1)
    }

    /// Picard horizon.
    pub fn picard_end(&self) -> f64 {
        self.handoff.min(self.t_end)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h", self.h),
            ("delta", self.delta),
            ("T", self.t_end),
            ("handoff", self.handoff),
            ("window", self.window),
            ("tolerance", self.tolerance),
            ("stiffness", self.stiffness),
            ("radius", self.radius),
            ("target", self.target),
            ("osc_horizon", self.osc_horizon),
            ("osc_step", self.osc_step),
            ("fit_start", self.fit_start),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be nonnegative, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::Config(format!("beta must be nonnegative, got {}", self.beta)));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if self.k.is_empty() || self.k.contains(&0) {
            return Err(Error::Config("k must be a nonempty list of positive integers".into()));
        }
        if self.oracle_substeps == 0 || self.max_iterations == 0 || self.samples == 0 {
            return Err(Error::Config(
                "oracle_substeps, max_iterations and samples must be positive".into(),
            ));
        }
        if !(0.0 < self.probe && self.probe < 1.0) {
            return Err(Error::Config(format!("probe must lie in (0, 1), got {}", self.probe)));
        }
        self.interior_nodes()?;
        for (name, t) in [
            ("T", self.t_end),
            ("handoff", self.picard_end()),
            ("window", self.window),
        ] {
            divides(self.delta, t)
                .map_err(|_| Error::Config(format!("delta = {} does not divide {name} = {t}", self.delta)))?;
        }
        Ok(())
    }

    /// Load `path` (TOML, or a run manifest if it ends in `.json`) on top of
    /// the preset named inside it, or `fallback` if none is named.
    pub fn from_file(path: &Path, fallback: Preset) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let partial = if path.extension().is_some_and(|e| e == "json") {
            let manifest: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let cfg = manifest.get("config").cloned().unwrap_or(manifest);
            serde_json::from_value::<PartialConfig>(cfg)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str::<PartialConfig>(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        let mut cfg = RunConfig::preset(partial.experiment.unwrap_or(fallback));
        partial.apply(&mut cfg);
        Ok(cfg)
    }
}

fn divides(delta: f64, t: f64) -> std::result::Result<(), ()> {
    let r = t / delta;
    if (r - r.round()).abs() > 1e-6 || r.round() < 1.0 {
        Err(())
    } else {
        Ok(())
    }
}

/// Any subset of [`RunConfig`], as read from a file or flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub experiment: Option<Preset>,
    pub alpha: Option<f64>,
    pub m: Option<u32>,
    pub k: Option<Vec<usize>>,
    pub h: Option<f64>,
    /// Alternative to `h`.
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub delta: Option<f64>,
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    pub handoff: Option<f64>,
    pub rule: Option<NewtonCotes>,
    pub multistep: Option<MultistepScheme>,
    pub oracle_substeps: Option<usize>,
    pub window: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub normalize: Option<bool>,
    pub beta: Option<f64>,
    pub probe: Option<f64>,
    pub fit_start: Option<f64>,
    pub stiffness: Option<f64>,
    pub radius: Option<f64>,
    pub samples: Option<usize>,
    pub target: Option<f64>,
    pub osc_horizon: Option<f64>,
    pub osc_step: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl PartialConfig {
    pub fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    cfg.$f = v.clone();
                }
            )*};
        }
        set!(
            alpha,
            m,
            k,
            h,
            delta,
            t_end,
            handoff,
            rule,
            multistep,
            oracle_substeps,
            window,
            tolerance,
            max_iterations,
            normalize,
            beta,
            probe,
            fit_start,
            stiffness,
            radius,
            samples,
            target,
            osc_horizon,
            osc_step,
            seed,
            out
        );
        if let Some(n) = self.n {
            cfg.h = 1.0 / (n as f64 + 1.0);
        }
        if let Some(e) = self.experiment {
            cfg.experiment = e;
        }
    }
}

/// Comma-separated list of positive integers.
pub fn parse_k_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad frequency '{p}' in '{s}'")))
        })
        .collect()
}
