//! Project configuration. Frequencies are in Hz here and converted to rad/s
//! when handed to the core library. Every field has a default; the defaults
//! are the reference lag design on the Lorentz stage.

use std::path::{Path, PathBuf};

use crone_core::fixtures::{lorentz_plant, PlantReading, PLANT_DELAY};
use crone_core::sim::{SimConfig, TrajectoryLimits};
use crone_core::stability::{DelayModel, SolverOptions};
use crone_core::synthesis::DEFAULT_CELLS;
use crone_core::sysid::SweepConfig;
use crone_core::{CroneSpec, RationalTf, ResetTuning, Strategy};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantSource {
    /// `0.5474 / (0.5718 s² + 0.95 s + 146.3)`
    #[default]
    Damping,
    /// `0.5474 / (0.5718 s² + 147.25)`
    Printed,
    /// `num` / `den` below.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub source: PlantSource,
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    /// Transport delay, seconds. Used by simulation and identification; the
    /// synthesis works on the delay-free plant.
    pub delay: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        let p = lorentz_plant(PlantReading::Damping, false);
        Self {
            source: PlantSource::Damping,
            num: p.num().to_vec(),
            den: p.den().to_vec(),
            delay: PLANT_DELAY,
        }
    }
}

impl PlantConfig {
    pub fn rational(&self) -> CliResult<RationalTf> {
        let (num, den) = match self.source {
            PlantSource::Damping | PlantSource::Printed => {
                let reading = if self.source == PlantSource::Damping {
                    PlantReading::Damping
                } else {
                    PlantReading::Printed
                };
                let p = lorentz_plant(reading, false);
                (p.num().to_vec(), p.den().to_vec())
            }
            PlantSource::Custom => (self.num.clone(), self.den.clone()),
        };
        Ok(RationalTf::with_delay(num, den, self.delay)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CroneConfig {
    pub phase_margin_deg: f64,
    pub f_cg: f64,
    pub f_b: f64,
    pub f_h: f64,
    pub f_i: f64,
    pub f_f: f64,
    pub n_i: u32,
    pub n_f: u32,
    pub cells: usize,
}

impl Default for CroneConfig {
    fn default() -> Self {
        Self {
            phase_margin_deg: 55.0,
            f_cg: 100.0,
            f_b: 12.5,
            f_h: 800.0,
            f_i: 8.33,
            f_f: 1200.0,
            n_i: 1,
            n_f: 1,
            cells: DEFAULT_CELLS,
        }
    }
}

impl CroneConfig {
    pub fn spec(&self) -> CliResult<CroneSpec> {
        Ok(CroneSpec::from_hz(
            self.phase_margin_deg,
            self.f_cg,
            self.f_b,
            self.f_h,
            self.f_i,
            self.f_f,
            self.n_i,
            self.n_f,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub limits: TrajectoryLimits,
    /// One scan leg, seconds.
    pub period: f64,
    /// RMS window start, seconds.
    pub settle: f64,
    /// `p` values of the tracking table.
    pub p_values: Vec<f64>,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            limits: TrajectoryLimits::default(),
            period: 0.25,
            settle: 0.5,
            p_values: vec![1.0, 0.75, 0.5, 0.25, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Sine amplitude, metres.
    pub amplitude: f64,
    pub duration: f64,
    pub freqs_hz: Vec<f64>,
    /// `p` of the reset design compared with `p = 1`.
    pub p_reset: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            amplitude: 2e-6,
            duration: 1.0,
            freqs_hz: crone_core::experiments::noise_frequencies(),
            p_reset: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub tol: f64,
    pub max_iterations: usize,
    pub delay_model: DelayModel,
    /// Multiplies the plant in the analysed loop; the design keeps the
    /// nominal plant. `-1` is the sign-flip negative control.
    pub loop_gain: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            tol: o.tol,
            max_iterations: o.max_iterations,
            delay_model: DelayModel::Ignore,
            loop_gain: 1.0,
        }
    }
}

impl StabilityConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iterations: self.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    pub plant: PlantConfig,
    pub crone: CroneConfig,
    pub strategy: Strategy,
    pub tuning: ResetTuning,
    pub sim: SimConfig,
    pub sweep: SweepConfig,
    pub trajectory: TrajectoryConfig,
    pub noise: NoiseConfig,
    pub stability: StabilityConfig,
    pub output_dir: PathBuf,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self {
            plant: PlantConfig::default(),
            crone: CroneConfig::default(),
            strategy: Strategy::LagReset,
            tuning: ResetTuning { gamma: 0.5, p: 0.5 },
            sim: SimConfig {
                duration: 2.0,
                ..SimConfig::default()
            },
            sweep: SweepConfig::default(),
            trajectory: TrajectoryConfig::default(),
            noise: NoiseConfig::default(),
            stability: StabilityConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

fn check(cond: bool, field: &str, msg: &str) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("{field}: {msg}")))
    }
}

impl ProjectConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Invalid(message) => CliError::Config {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Invalid(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Runs every module's validation. Nothing is computed or written by a
    /// command before this passes.
    pub fn validate(&self) -> CliResult<()> {
        let plant = self.plant.rational()?;
        check(
            plant.is_proper() && plant.order() > plant.num().len() - 1,
            "plant",
            "must be strictly proper",
        )?;
        self.crone.spec()?;
        check(self.crone.cells >= 1, "crone.cells", "must be at least 1")?;
        self.tuning.validate()?;
        self.sim.validate()?;
        self.sim.delay_samples(plant.delay())?;
        self.sweep.validate(self.sim.dt)?;
        self.trajectory.limits.validate()?;
        check(
            self.trajectory.period > 0.0,
            "trajectory.period",
            "must be positive",
        )?;
        check(
            self.trajectory.settle >= 0.0 && self.trajectory.settle < self.sim.duration,
            "trajectory.settle",
            "must lie in [0, sim.duration)",
        )?;
        for &p in &self.trajectory.p_values {
            ResetTuning::new(self.tuning.gamma, p)?;
        }
        check(
            self.noise.amplitude > 0.0,
            "noise.amplitude",
            "must be positive",
        )?;
        check(
            self.noise.duration >= self.sim.dt,
            "noise.duration",
            "must cover one sample",
        )?;
        for &f in &self.noise.freqs_hz {
            check(
                f > 0.0 && f < 0.5 / self.sim.dt,
                "noise.freqs_hz",
                "must lie in (0, Nyquist)",
            )?;
        }
        ResetTuning::new(self.tuning.gamma, self.noise.p_reset)?;
        check(
            self.stability.tol > 0.0,
            "stability.tol",
            "must be positive",
        )?;
        check(
            self.stability.max_iterations > 0,
            "stability.max_iterations",
            "must be positive",
        )?;
        check(
            self.stability.loop_gain.is_finite() && self.stability.loop_gain != 0.0,
            "stability.loop_gain",
            "must be finite and nonzero",
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let c = ProjectConfig::default();
        let back = ProjectConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(c, back);
        c.validate().unwrap();
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c =
            ProjectConfig::parse("strategy = \"fof\"\n[tuning]\ngamma = 0.0\np = 0.25\n").unwrap();
        assert_eq!(c.strategy, Strategy::FofReset);
        assert_eq!(c.crone.f_cg, 100.0);
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(ProjectConfig::parse("[crone]\nf_gc = 3.0\n").is_err());
    }
}
