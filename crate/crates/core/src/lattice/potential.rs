use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::LatticeBox;
use crate::error::{Error, Result};

/// Real function on the sites of a [`LatticeBox`], same storage order as the box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteTable {
    lattice_box: LatticeBox,
    values: Vec<f64>,
}

impl SiteTable {
    pub fn new(lattice_box: LatticeBox, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice_box.len() {
            return Err(Error::SizeMismatch {
                expected: lattice_box.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("site table contains non-finite values".into()));
        }
        Ok(SiteTable {
            lattice_box,
            values,
        })
    }

    pub fn from_fn<F: FnMut(&[i64]) -> f64>(lattice_box: LatticeBox, mut f: F) -> Self {
        let mut site = vec![0; lattice_box.dim()];
        let values = (0..lattice_box.len())
            .map(|i| {
                lattice_box.site(i, &mut site);
                f(&site)
            })
            .collect();
        SiteTable {
            lattice_box,
            values,
        }
    }

    pub fn lattice_box(&self) -> LatticeBox {
        self.lattice_box
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, site: &[i64]) -> Option<f64> {
        self.lattice_box.index(site).map(|i| self.values[i])
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Iterated backward differences `d~^alpha V`, where `d~_j V[n] = V[n] - V[n - e_j]`.
///
/// The result lives on the box shrunk by `|alpha|` sites per axis, so every
/// difference stencil stays inside the input box.
pub fn discrete_derivative(v: &SiteTable, alpha: &[usize]) -> Result<SiteTable> {
    let b = v.lattice_box();
    if alpha.len() != b.dim() {
        return Err(Error::SizeMismatch {
            expected: b.dim(),
            got: alpha.len(),
        });
    }
    let order: usize = alpha.iter().sum();
    if order + 1 > b.half_width() {
        return Err(Error::BoxTooSmall(format!(
            "half-width {} cannot host differences of order {order}",
            b.half_width()
        )));
    }
    let mut current = v.clone();
    for (axis, &a) in alpha.iter().enumerate() {
        for _ in 0..a {
            let cb = current.lattice_box();
            let nb = LatticeBox::new(cb.dim(), cb.half_width() - 1)?;
            let mut shifted = vec![0; cb.dim()];
            current = SiteTable::from_fn(nb, |n| {
                shifted.copy_from_slice(n);
                shifted[axis] -= 1;
                current.get(n).unwrap() - current.get(&shifted).unwrap()
            });
        }
    }
    // shrink to exactly |alpha| for a predictable output box
    let target = LatticeBox::new(b.dim(), b.half_width() - order)?;
    if current.lattice_box() != target {
        current = SiteTable::from_fn(target, |n| current.get(n).unwrap());
    }
    Ok(current)
}

/// `<x> = (1 + |x|^2)^(1/2)`.
pub fn japanese_bracket(x: &[f64]) -> f64 {
    (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum PotentialFamily {
    Zero,
    /// `V[n] = amplitude * <n>^(-decay)`.
    Power { amplitude: f64, decay: f64 },
    /// Explicit site values; zero outside the table's box.
    Tabulated { table: SiteTable },
}

/// How `V` is continued off the lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ExtensionPolicy {
    #[default]
    Analytic,
    Window,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub family: PotentialFamily,
    pub policy: ExtensionPolicy,
}

impl PotentialSpec {
    pub fn zero() -> Self {
        PotentialSpec {
            family: PotentialFamily::Zero,
            policy: ExtensionPolicy::Analytic,
        }
    }

    pub fn power(amplitude: f64, decay: f64) -> Result<Self> {
        if !(decay > 0.0) || !decay.is_finite() || !amplitude.is_finite() {
            return Err(Error::InvalidInput(format!(
                "power potential needs finite amplitude and decay > 0 (got c = {amplitude}, mu = {decay})"
            )));
        }
        Ok(PotentialSpec {
            family: PotentialFamily::Power { amplitude, decay },
            policy: ExtensionPolicy::Analytic,
        })
    }

    pub fn tabulated(table: SiteTable) -> Self {
        PotentialSpec {
            family: PotentialFamily::Tabulated { table },
            policy: ExtensionPolicy::Window,
        }
    }

    pub fn with_policy(mut self, policy: ExtensionPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn is_zero(&self) -> bool {
        match &self.family {
            PotentialFamily::Zero => true,
            PotentialFamily::Power { amplitude, .. } => *amplitude == 0.0,
            PotentialFamily::Tabulated { table } => table.values().iter().all(|v| *v == 0.0),
        }
    }

    /// Decay exponent `mu` for the power family.
    pub fn decay(&self) -> Option<f64> {
        match self.family {
            PotentialFamily::Power { decay, .. } => Some(decay),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.family {
            PotentialFamily::Power { amplitude, decay } => {
                Self::power(*amplitude, *decay).map(|_| ())
            }
            PotentialFamily::Tabulated { table } => {
                SiteTable::new(table.lattice_box(), table.values().to_vec()).map(|_| ())
            }
            PotentialFamily::Zero => Ok(()),
        }
    }

    pub fn lattice_value(&self, site: &[i64]) -> f64 {
        match &self.family {
            PotentialFamily::Zero => 0.0,
            PotentialFamily::Power { amplitude, decay } => {
                let r2: f64 = site.iter().map(|&n| (n as f64) * (n as f64)).sum();
                amplitude * (1.0 + r2).powf(-0.5 * decay)
            }
            PotentialFamily::Tabulated { table } => table.get(site).unwrap_or(0.0),
        }
    }

    /// Sample `V` on every site of `lattice_box`.
    pub fn sample(&self, lattice_box: LatticeBox) -> SiteTable {
        SiteTable::from_fn(lattice_box, |n| self.lattice_value(n))
    }

    /// Closed-form continuum value, when one exists.
    fn analytic_value(&self, x: &[f64]) -> Option<f64> {
        match self.family {
            PotentialFamily::Zero => Some(0.0),
            PotentialFamily::Power { amplitude, decay } => {
                Some(amplitude * japanese_bracket(x).powf(-decay))
            }
            PotentialFamily::Tabulated { .. } => None,
        }
    }

    fn analytic_gradient(&self, x: &[f64], out: &mut [f64]) -> bool {
        match self.family {
            PotentialFamily::Zero => {
                out.iter_mut().for_each(|o| *o = 0.0);
                true
            }
            PotentialFamily::Power { amplitude, decay } => {
                let b2 = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
                let s = -amplitude * decay * b2.powf(-0.5 * decay - 1.0);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = s * xi;
                }
                true
            }
            PotentialFamily::Tabulated { .. } => false,
        }
    }
}

/// Smooth potential on `R^d`.
pub trait ContinuumPotential: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    /// Sup of `|V|` over `|x| >= r` if the evaluator can bound it cheaply.
    fn tail_sup_hint(&self, _r: f64) -> Option<f64> {
        None
    }
}

/// A point at which a potential may be evaluated.
#[derive(Clone, Copy, Debug)]
pub enum Point<'a> {
    Site(&'a [i64]),
    Continuum(&'a [f64]),
}

/// Continuum evaluator selected by the spec's extension policy.
#[derive(Clone)]
pub struct Potential {
    spec: PotentialSpec,
    dim: usize,
    extension: Option<Arc<dyn ContinuumPotential>>,
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Potential")
            .field("spec", &self.spec)
            .field("dim", &self.dim)
            .field("extension", &self.extension.is_some())
            .finish()
    }
}

impl Potential {
    pub fn new(spec: PotentialSpec, dim: usize) -> Result<Self> {
        spec.validate()?;
        if let PotentialFamily::Tabulated { table } = &spec.family {
            if table.lattice_box().dim() != dim {
                return Err(Error::SizeMismatch {
                    expected: dim,
                    got: table.lattice_box().dim(),
                });
            }
            if spec.policy == ExtensionPolicy::Analytic {
                return Err(Error::InvalidInput(
                    "tabulated potentials have no closed form; use the window policy".into(),
                ));
            }
        }
        Ok(Potential {
            spec,
            dim,
            extension: None,
        })
    }

    pub fn with_extension(mut self, ext: Arc<dyn ContinuumPotential>) -> Result<Self> {
        if ext.dim() != self.dim {
            return Err(Error::SizeMismatch {
                expected: self.dim,
                got: ext.dim(),
            });
        }
        self.extension = Some(ext);
        Ok(self)
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn has_extension(&self) -> bool {
        self.extension.is_some()
    }

    pub fn eval(&self, point: Point<'_>) -> Result<f64> {
        match point {
            Point::Site(n) => Ok(self.spec.lattice_value(n)),
            Point::Continuum(x) => self.value(x),
        }
    }
}

impl ContinuumPotential for Potential {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        match self.spec.policy {
            ExtensionPolicy::Analytic => self
                .spec
                .analytic_value(x)
                .ok_or(Error::ExtensionMissing),
            ExtensionPolicy::Window => match &self.extension {
                Some(e) => e.value(x),
                None if self.spec.is_zero() => Ok(0.0),
                None => Err(Error::ExtensionMissing),
            },
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match self.spec.policy {
            ExtensionPolicy::Analytic => {
                if self.spec.analytic_gradient(x, out) {
                    Ok(())
                } else {
                    Err(Error::ExtensionMissing)
                }
            }
            ExtensionPolicy::Window => match &self.extension {
                Some(e) => e.gradient(x, out),
                None if self.spec.is_zero() => {
                    out.iter_mut().for_each(|o| *o = 0.0);
                    Ok(())
                }
                None => Err(Error::ExtensionMissing),
            },
        }
    }

    fn tail_sup_hint(&self, r: f64) -> Option<f64> {
        match (self.spec.policy, &self.spec.family) {
            (_, PotentialFamily::Zero) => Some(0.0),
            (ExtensionPolicy::Analytic, PotentialFamily::Power { amplitude, decay }) => {
                Some(amplitude.abs() * (1.0 + r * r).powf(-0.5 * decay))
            }
            _ => None,
        }
    }
}

/// Evaluate `V` at a lattice site or a continuum point.
pub fn potential_eval(potential: &Potential, point: Point<'_>) -> Result<f64> {
    potential.eval(point)
}
