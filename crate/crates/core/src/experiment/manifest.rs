use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::hj::SlopeEntry;

pub const MANIFEST_FILE: &str = "meta.json";
pub const MANIFEST_VERSION: u32 = 1;

/// A numerical check with a hard threshold. Any failure makes the run exit 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub stage: String,
    pub name: String,
    #[serde(with = "nullable")]
    pub value: f64,
    #[serde(with = "nullable")]
    pub threshold: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Certificate {
    /// Passes when `value <= threshold`.
    pub fn at_most(stage: &str, name: &str, value: f64, threshold: f64) -> Self {
        Certificate {
            stage: stage.into(),
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
            note: None,
        }
    }

    /// A yes/no property, recorded as 1 (holds) or 0.
    pub fn holds(stage: &str, name: &str, ok: bool) -> Self {
        Certificate {
            stage: stage.into(),
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            threshold: 1.0,
            passed: ok,
            note: None,
        }
    }

    pub fn failed(stage: &str, name: &str, note: String) -> Self {
        Certificate {
            stage: stage.into(),
            name: name.into(),
            value: f64::NAN,
            threshold: f64::NAN,
            passed: false,
            note: Some(note),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub stage: String,
    #[serde(flatten)]
    pub entry: SlopeEntry,
}

/// Informational values without a pass/fail verdict (doubling ratios, R1, ...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub stage: String,
    pub name: String,
    #[serde(with = "nullable_vec")]
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub wall_clock_s: f64,
    pub artifacts: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub crate_version: String,
    pub config: ExperimentConfig,
    pub stages: Vec<StageRecord>,
    pub certificates: Vec<Certificate>,
    pub slopes: Vec<SlopeRow>,
    pub observations: Vec<Observation>,
}

impl RunManifest {
    pub fn new(config: ExperimentConfig) -> Self {
        RunManifest {
            manifest_version: MANIFEST_VERSION,
            crate_version: env!("CARGO_PKG_VERSION").into(),
            config,
            stages: Vec::new(),
            certificates: Vec::new(),
            slopes: Vec::new(),
            observations: Vec::new(),
        }
    }

    pub fn all_certified(&self) -> bool {
        self.certificates.iter().all(|c| c.passed)
    }

    pub fn slope(&self, stage: &str, name: &str) -> Option<&SlopeEntry> {
        self.slopes
            .iter()
            .find(|r| r.stage == stage && r.entry.name == name)
            .map(|r| &r.entry)
    }

    pub fn observation(&self, stage: &str, name: &str) -> Option<&[f64]> {
        self.observations
            .iter()
            .find(|o| o.stage == stage && o.name == name)
            .map(|o| o.values.as_slice())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    /// Missing file is an I/O error, unparsable content a parse error.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("cannot read manifest {}: {e}", path.display())))?;
        let m: RunManifest = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("corrupt manifest: {e}")))?;
        if m.manifest_version != MANIFEST_VERSION {
            return Err(Error::Parse(format!("unsupported manifest version {}", m.manifest_version)));
        }
        Ok(m)
    }
}

/// Non-finite floats as JSON `null`, read back as NaN.
mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

mod nullable_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opt: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
        opt.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let opt = Vec::<Option<f64>>::deserialize(d)?;
        Ok(opt.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}
