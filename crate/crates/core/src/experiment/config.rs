use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classical::Sign;
use crate::error::{Error, Result};
use crate::extension::WindowParams;
use crate::lattice::{EnergyWindow, ExtensionPolicy, LatticeBox, PacketSpec, PotentialSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModifierKind {
    None,
    Dollard,
    Hj,
}

impl ModifierKind {
    pub fn name(self) -> &'static str {
        match self {
            ModifierKind::None => "none",
            ModifierKind::Dollard => "dollard",
            ModifierKind::Hj => "hj",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub dim: usize,
    pub half_width: usize,
    /// Boundary shell width for mass certificates; `L / 8` when absent.
    #[serde(default)]
    pub margin: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Zero,
    Power,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    pub family: Family,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub decay: f64,
    #[serde(default)]
    pub policy: ExtensionPolicy,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    pub lower: f64,
    pub upper: f64,
    /// `delta`; half the threshold distance when absent.
    #[serde(default)]
    pub margin: Option<f64>,
    #[serde(default)]
    pub smoothing: Option<f64>,
    #[serde(default)]
    pub sharp: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSection {
    pub momentum: Vec<f64>,
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(default = "default_t0")]
    pub t0: f64,
    pub t_end: f64,
    #[serde(default = "default_per_octave")]
    pub per_octave: usize,
}

fn default_t0() -> f64 {
    25.0 / 16.0
}

fn default_per_octave() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModifierSection {
    #[serde(default = "default_modifiers")]
    pub list: Vec<ModifierKind>,
    #[serde(default)]
    pub sign: Sign,
    /// `s` in the intertwining defect.
    #[serde(default = "one")]
    pub intertwining_shift: f64,
}

fn default_modifiers() -> Vec<ModifierKind> {
    vec![ModifierKind::Hj]
}

impl Default for ModifierSection {
    fn default() -> Self {
        ModifierSection {
            list: default_modifiers(),
            sign: Sign::Plus,
            intertwining_shift: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub energy_drift: f64,
    pub chebyshev: f64,
    pub newton: f64,
    pub boundary_mass: f64,
    pub hj_residual: f64,
    pub construction: f64,
    pub isometry: f64,
    pub unitarity: f64,
    pub smallness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            energy_drift: 1e-8,
            chebyshev: 1e-12,
            newton: 1e-10,
            boundary_mass: 1e-8,
            hj_residual: 1e-4,
            construction: 1e-6,
            isometry: 1e-10,
            unitarity: 1e-9,
            smallness: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HjSection {
    /// Fixed seed radius; chosen by doubling when absent.
    pub r1: Option<f64>,
    /// Integrator step grows as `step (1 + t / time_scale)` up to `max_step`.
    pub time_scale: f64,
    pub max_step: f64,
    /// Relative offset of the companion times used for time derivatives.
    pub companions: f64,
}

impl Default for HjSection {
    fn default() -> Self {
        HjSection {
            r1: None,
            time_scale: 10.0,
            max_step: 0.05,
            companions: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalSection {
    pub samples: usize,
    pub horizon: f64,
    pub step: f64,
    /// Horizon of the single long run used for the asymptotic-momentum rates.
    pub asymptotic_horizon: f64,
}

impl Default for ClassicalSection {
    fn default() -> Self {
        ClassicalSection {
            samples: 100,
            horizon: 200.0,
            step: 1e-2,
            asymptotic_horizon: 1e7,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    /// Rate-fit window; `[T/8, T]` when absent.
    pub window: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("runs") }
    }
}

/// One experiment, loaded from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub lattice: LatticeSection,
    pub potential: PotentialSection,
    pub window: WindowSection,
    pub packet: PacketSection,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub modifiers: ModifierSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub hj: HjSection,
    #[serde(default)]
    pub classical: ClassicalSection,
    #[serde(default)]
    pub fits: FitSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn lattice_box(&self) -> Result<LatticeBox> {
        LatticeBox::new(self.lattice.dim, self.lattice.half_width)
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec> {
        let spec = match self.potential.family {
            Family::Zero => PotentialSpec::zero(),
            Family::Power => PotentialSpec::power(self.potential.amplitude, self.potential.decay)?,
        };
        Ok(spec.with_policy(self.potential.policy))
    }

    pub fn mu(&self) -> Option<f64> {
        match self.potential.family {
            Family::Zero => None,
            Family::Power => Some(self.potential.decay),
        }
    }

    pub fn energy_window(&self) -> Result<EnergyWindow> {
        let d = self.lattice.dim;
        let w = match self.window.margin {
            Some(m) => EnergyWindow::new(d, self.window.lower, self.window.upper, m)?,
            None => EnergyWindow::with_auto_margin(d, self.window.lower, self.window.upper)?,
        };
        match self.window.smoothing {
            Some(s) => w.with_smoothing(s),
            None => Ok(w),
        }
    }

    pub fn packet_spec(&self) -> PacketSpec {
        PacketSpec::new(self.packet.momentum.clone(), self.packet.width)
    }

    pub fn margin(&self) -> usize {
        self.lattice.margin.unwrap_or(self.lattice.half_width / 8)
    }

    pub fn fit_window(&self) -> (f64, f64) {
        match self.fits.window {
            Some([a, b]) => (a, b),
            None => (self.schedule.t_end / 8.0, self.schedule.t_end),
        }
    }

    /// Every check that can be made without running physics.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return bad(format!("run name {:?} is not a plain directory name", self.name));
        }
        let bx = self.lattice_box().map_err(|e| Error::Config(e.to_string()))?;
        let d = bx.dim() as f64;
        if self.packet.momentum.len() != bx.dim() {
            return bad(format!("packet momentum has {} entries for d = {}", self.packet.momentum.len(), bx.dim()));
        }
        if !(self.packet.width > 0.0) {
            return bad("packet width must be positive".into());
        }
        if !(self.schedule.t0 > 0.0 && self.schedule.t_end >= self.schedule.t0 && self.schedule.per_octave >= 1) {
            return bad("schedule needs 0 < t0 <= t_end and per_octave >= 1".into());
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("energy_drift", t.energy_drift),
            ("chebyshev", t.chebyshev),
            ("newton", t.newton),
            ("boundary_mass", t.boundary_mass),
            ("hj_residual", t.hj_residual),
            ("construction", t.construction),
            ("isometry", t.isometry),
            ("unitarity", t.unitarity),
            ("smallness", t.smallness),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("tolerance {name} must be positive (got {v})"));
            }
        }
        if self.potential.family == Family::Power && !(self.potential.decay > 0.0 && self.potential.amplitude.is_finite()) {
            return bad("power potential needs decay > 0 and a finite amplitude".into());
        }
        let w = self.energy_window().map_err(|e| Error::Config(e.to_string()))?;
        self.packet_spec().check(&w).map_err(|e| Error::Config(e.to_string()))?;
        // max |v| = sqrt(d); spatial packet scale 1 / width
        let need = d.sqrt() * self.schedule.t_end + 8.0 / self.packet.width;
        if (bx.half_width() as f64) < need {
            return bad(format!(
                "horizon rule violated: L = {} < sqrt(d) T + 8 / width = {need:.1}",
                bx.half_width()
            ));
        }
        if self.potential.policy == ExtensionPolicy::Window && bx.half_width() <= WindowParams::default().radius + 1 {
            return bad(format!(
                "window extension needs L > {} (got {})",
                WindowParams::default().radius + 1,
                bx.half_width()
            ));
        }
        if self.margin() == 0 || self.margin() >= bx.half_width() {
            return bad(format!("boundary margin {} must lie in 1..L", self.margin()));
        }
        if !(self.hj.time_scale > 0.0 && self.hj.max_step > 0.0 && self.hj.companions > 0.0 && self.hj.r1.map_or(true, |r| r > 0.0)) {
            return bad("hj section needs positive time_scale, max_step, companions and r1".into());
        }
        let c = &self.classical;
        if !(c.horizon > 0.0 && c.step > 0.0 && c.asymptotic_horizon >= 100.0) {
            return bad("classical horizon and step must be positive, asymptotic_horizon >= 100".into());
        }
        if self.modifiers.list.is_empty() {
            return bad("modifier list is empty".into());
        }
        if let Some([a, b]) = self.fits.window {
            if !(a > 0.0 && b > a) {
                return bad(format!("fit window [{a}, {b}] is not an interval in t > 0"));
            }
        }
        Ok(())
    }

    /// Content hash of the sections a phase table depends on.
    pub fn hj_cache_key(&self) -> String {
        let key = serde_json::json!({
            "lattice": self.lattice,
            "potential": self.potential,
            "window": self.window,
            "hj": self.hj,
            "schedule": self.schedule,
            "sign": self.modifiers.sign,
            "newton": self.tolerances.newton,
            "smallness": self.tolerances.smallness,
            "drift": self.tolerances.energy_drift,
        });
        let digest = Sha256::digest(key.to_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
