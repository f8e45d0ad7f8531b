use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Family, ModifierKind};
use super::manifest::{Certificate, Observation, RunManifest, SlopeRow, StageRecord};
use crate::classical::{
    asymptotic_momentum, escape_constants, integrate_flow, region_escape_probe, sample_region,
    uniform_times, EscapeConstants, FlowParams, Region, Sign, StepGrowth,
};
use crate::error::{Error, Result};
use crate::extension::{build_window, dyadic_radii, symbol_decay_probe, ExtendedPotential, WindowParams};
use crate::hj::{
    build_phase_table, phase_diagnostics, DollardPhase, FanReport, FreeModifier, HjConfig, Modifier,
    PhaseTable, Schedule, SlopeEntry,
};
use crate::lattice::{
    build_wavepacket, ContinuumPotential, EnergyWindow, ExtensionPolicy, LatticeBox, LatticeField,
    Potential, PotentialSpec,
};
use crate::quantum::{boundary_mass, Hamiltonian, Propagator, PropagatorConfig};
use crate::waveop::{
    approximant, cook_series, dispersive_profile, intertwining_defect, modifier_gauge, WaveOpContext,
};

/// Radius for the escape-constant sweep.
const ESCAPE_SWEEP_RADIUS: f64 = 1e6;
/// Second-difference identity residual at the classical sample spacing.
const IDENTITY_TOLERANCE: f64 = 1e-4;
/// Slope tolerance for the rate fits.
const SLOPE_TOLERANCE: f64 = 0.15;
/// Dilation of the packet image used for the dispersive profile.
const DISPERSIVE_DILATION: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    Extend,
    Classical,
    Hj,
    Evolve,
    Cook,
    Waveop,
    All,
}

impl Stage {
    pub const ORDER: [Stage; 6] = [
        Stage::Extend,
        Stage::Classical,
        Stage::Hj,
        Stage::Evolve,
        Stage::Cook,
        Stage::Waveop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Extend => "extend",
            Stage::Classical => "classical",
            Stage::Hj => "hj",
            Stage::Evolve => "evolve",
            Stage::Cook => "cook",
            Stage::Waveop => "waveop",
            Stage::All => "all",
        }
    }

    fn expand(self) -> Vec<Stage> {
        match self {
            Stage::All => Self::ORDER.to_vec(),
            s => vec![s],
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "extend" => Stage::Extend,
            "classical" => Stage::Classical,
            "hj" => Stage::Hj,
            "evolve" => Stage::Evolve,
            "cook" => Stage::Cook,
            "waveop" => Stage::Waveop,
            "all" => Stage::All,
            other => return Err(Error::Config(format!("unknown stage {other:?}"))),
        })
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

impl RunOutcome {
    /// 0 when every certificate passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.manifest.all_certified() {
            0
        } else {
            1
        }
    }
}

/// Process exit code for an error that aborted a run.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 3,
        _ => 2,
    }
}

struct Lock(PathBuf);

impl Lock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                use std::io::Write;
                writeln!(f, "{}", std::process::id())?;
                Ok(Lock(path))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Io(std::io::Error::new(
                e.kind(),
                format!("run directory {} is locked by another process", dir.display()),
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Run `stage` for `config`, writing artifacts under `output.dir/name`.
///
/// Certificate failures are recorded in the manifest, not returned as errors;
/// `Err` means the run could not be carried out (bad config or I/O).
pub fn run(config: &ExperimentConfig, stage: Stage) -> Result<RunOutcome> {
    config.validate()?;
    let dir = config.output.dir.join(&config.name);
    fs::create_dir_all(&dir)?;
    let _lock = Lock::acquire(&dir)?;
    let stages = stage.expand();
    let mut manifest = match RunManifest::load(&dir) {
        Ok(old) if old.config == *config => old,
        _ => RunManifest::new(config.clone()),
    };
    let names: Vec<&str> = stages.iter().map(|s| s.name()).collect();
    manifest.stages.retain(|s| !names.contains(&s.name.as_str()));
    manifest.certificates.retain(|c| !names.contains(&c.stage.as_str()));
    manifest.slopes.retain(|c| !names.contains(&c.stage.as_str()));
    manifest.observations.retain(|c| !names.contains(&c.stage.as_str()));

    let mut runner = Runner::new(config, dir.clone())?;
    for s in stages {
        let start = Instant::now();
        runner.rec = Records::default();
        let res = match s {
            Stage::Extend => runner.extend(),
            Stage::Classical => runner.classical(),
            Stage::Hj => runner.hj(),
            Stage::Evolve => runner.evolve(),
            Stage::Cook => runner.cook(),
            Stage::Waveop => runner.waveop(),
            Stage::All => unreachable!(),
        };
        match res {
            Ok(()) => {}
            Err(e @ (Error::Io(_) | Error::Config(_))) => return Err(e),
            Err(e) => runner.rec.certificates.push(Certificate::failed(s.name(), "completed", e.to_string())),
        }
        let rec = std::mem::take(&mut runner.rec);
        manifest.stages.push(StageRecord {
            name: s.name().into(),
            wall_clock_s: start.elapsed().as_secs_f64(),
            artifacts: rec.artifacts,
        });
        manifest.certificates.extend(rec.certificates.into_iter().map(|mut c| {
            c.stage = s.name().into();
            c
        }));
        manifest.slopes.extend(rec.slopes.into_iter().map(|entry| SlopeRow {
            stage: s.name().into(),
            entry,
        }));
        manifest.observations.extend(rec.observations.into_iter().map(|(name, values)| Observation {
            stage: s.name().into(),
            name,
            values,
        }));
        manifest.save(&dir)?;
    }
    Ok(RunOutcome { dir, manifest })
}

#[derive(Default)]
struct Records {
    artifacts: Vec<String>,
    certificates: Vec<Certificate>,
    slopes: Vec<SlopeEntry>,
    observations: Vec<(String, Vec<f64>)>,
}

impl Records {
    fn cert(&mut self, name: &str, value: f64, threshold: f64) {
        self.certificates.push(Certificate::at_most("", name, value, threshold));
    }

    fn holds(&mut self, name: &str, ok: bool) {
        self.certificates.push(Certificate::holds("", name, ok));
    }

    fn observe(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.observations.push((name.into(), values));
    }
}

struct Wave {
    ctx: WaveOpContext,
    windowed: LatticeField,
    support: Vec<usize>,
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    dir: PathBuf,
    bx: LatticeBox,
    spec: PotentialSpec,
    window: EnergyWindow,
    sign: Sign,
    potential: Option<Arc<dyn ContinuumPotential>>,
    constants: Option<EscapeConstants>,
    table: Option<Arc<PhaseTable>>,
    fan: Option<FanReport>,
    wave: Option<Wave>,
    rec: Records,
}

/// Full-precision scientific notation: 17 significant digits round-trip every `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a ExperimentConfig, dir: PathBuf) -> Result<Self> {
        Ok(Runner {
            cfg,
            dir,
            bx: cfg.lattice_box()?,
            spec: cfg.potential_spec()?,
            window: cfg.energy_window()?,
            sign: cfg.modifiers.sign,
            potential: None,
            constants: None,
            table: None,
            fan: None,
            wave: None,
            rec: Records::default(),
        })
    }

    fn write_csv(&mut self, file: &str, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
        let mut s = header.join(",");
        s.push('\n');
        for r in rows {
            let line: Vec<String> = r.iter().map(|x| num(*x)).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        fs::write(self.dir.join(file), s)?;
        self.rec.artifacts.push(file.into());
        Ok(())
    }

    fn dim(&self) -> usize {
        self.bx.dim()
    }

    fn axis_names(&self, prefix: &str) -> Vec<String> {
        (1..=self.dim()).map(|j| format!("{prefix}_{j}")).collect()
    }

    fn potential(&mut self) -> Result<Arc<dyn ContinuumPotential>> {
        if let Some(p) = &self.potential {
            return Ok(Arc::clone(p));
        }
        let d = self.dim();
        let base = Potential::new(self.spec.clone(), d)?;
        let p: Arc<dyn ContinuumPotential> = match self.spec.policy {
            ExtensionPolicy::Window if !self.spec.is_zero() => {
                let w = Arc::new(build_window(WindowParams::default())?);
                let ext = ExtendedPotential::new(self.spec.sample(self.bx), w)?;
                Arc::new(base.with_extension(Arc::new(ext))?)
            }
            _ => Arc::new(base),
        };
        self.potential = Some(Arc::clone(&p));
        Ok(p)
    }

    fn constants(&mut self) -> Result<EscapeConstants> {
        if let Some(k) = self.constants {
            return Ok(k);
        }
        let pot = self.potential()?;
        let k = escape_constants(&self.window, pot.as_ref(), ESCAPE_SWEEP_RADIUS)?;
        self.constants = Some(k);
        Ok(k)
    }

    fn schedule(&self) -> Result<Schedule> {
        let s = &self.cfg.schedule;
        Schedule::geometric(s.t0, s.t_end, s.per_octave)
    }

    /// Positive main times (magnitudes).
    fn quantum_times(&self) -> Result<Vec<f64>> {
        Ok(self.schedule()?.main_times().into_iter().filter(|t| *t > 0.0).collect())
    }

    /// `T/8, T/4, T/2, T`.
    fn doubling_times(&self) -> Vec<f64> {
        let t = self.cfg.schedule.t_end;
        vec![t / 8.0, t / 4.0, t / 2.0, t]
    }

    fn mu(&self) -> Option<f64> {
        match self.cfg.potential.family {
            Family::Power if self.cfg.potential.amplitude != 0.0 => self.cfg.mu(),
            _ => None,
        }
    }

    fn table(&mut self) -> Result<Arc<PhaseTable>> {
        if let Some(t) = &self.table {
            return Ok(Arc::clone(t));
        }
        let pot = self.potential()?;
        let cache = self.dir.join("cache").join(format!("hj-{}", self.cfg.hj_cache_key()));
        let (json, csv, fan_path) = (cache.join("table.json"), cache.join("table.csv"), cache.join("fan.json"));
        let cached = (|| -> Result<(PhaseTable, FanReport)> {
            let t = PhaseTable::load(&json, &csv)?;
            let f: FanReport = serde_json::from_str(&fs::read_to_string(&fan_path)?)
                .map_err(|e| Error::Parse(e.to_string()))?;
            Ok((t.with_potential(Arc::clone(&pot)), f))
        })();
        let (table, fan) = match cached {
            Ok(tf) => tf,
            Err(_) => {
                let k = self.constants()?;
                let sched = self.schedule()?.with_companions(self.cfg.hj.companions)?;
                let hj = &self.cfg.hj;
                let cfg = HjConfig {
                    sign: self.sign,
                    r1: hj.r1,
                    flow: FlowParams {
                        drift_tolerance: self.cfg.tolerances.energy_drift,
                        growth: Some(StepGrowth {
                            time_scale: hj.time_scale,
                            max_step: hj.max_step.max(FlowParams::default().step),
                        }),
                        ..FlowParams::default()
                    },
                    smallness: self.cfg.tolerances.smallness,
                    newton_tol: self.cfg.tolerances.newton,
                    mu: self.mu(),
                    ..HjConfig::default()
                };
                let grid = crate::lattice::MomentumGrid::new(self.bx);
                let (t, f) = build_phase_table(Arc::clone(&pot), grid, &self.window, &k, &sched, &cfg)?;
                fs::create_dir_all(&cache)?;
                t.save(&json, &csv)?;
                fs::write(&fan_path, serde_json::to_string_pretty(&f).map_err(|e| Error::Parse(e.to_string()))?)?;
                (t, f)
            }
        };
        let table = Arc::new(table);
        self.table = Some(Arc::clone(&table));
        self.fan = Some(fan);
        Ok(table)
    }

    fn wave(&mut self) -> Result<&Wave> {
        if self.wave.is_none() {
            let tol = &self.cfg.tolerances;
            let pc = PropagatorConfig {
                tolerance: tol.chebyshev,
                boundary_threshold: tol.boundary_mass,
                ..PropagatorConfig::default()
            };
            let prop = Propagator::new(Hamiltonian::new(self.bx, &self.spec)?, pc)?;
            let ctx = WaveOpContext::new(prop, self.cfg.margin())?;
            let packet = self.cfg.packet_spec();
            let phi = build_wavepacket(&ctx.fourier, &packet, &self.window)?;
            let windowed = ctx.window(&self.window, &phi, self.cfg.window.sharp)?;
            let support = packet.support(ctx.fourier.grid());
            self.wave = Some(Wave { ctx, windowed, support });
        }
        Ok(self.wave.as_ref().unwrap())
    }

    fn modifier(&mut self, kind: ModifierKind) -> Result<Arc<dyn Modifier>> {
        let grid = crate::lattice::MomentumGrid::new(self.bx);
        Ok(match kind {
            ModifierKind::None => Arc::new(FreeModifier::new(grid)),
            ModifierKind::Dollard => {
                let pot = self.potential()?;
                Arc::new(DollardPhase::new(pot, grid, &self.schedule()?, self.sign)?)
            }
            ModifierKind::Hj => self.table()?,
        })
    }

    fn extend(&mut self) -> Result<()> {
        let params = WindowParams::default();
        let w = Arc::new(build_window(params)?);
        self.rec.cert("partition_of_unity", w.partition_residual(10_001), 1e-10);
        let unit = (2.0 * std::f64::consts::PI).sqrt();
        let integer_err = (-10i32..=10)
            .map(|k| (w.kernel(k as f64, 0) - if k == 0 { unit } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        self.rec.cert("kernel_at_integers", integer_err, 1e-8);
        let rows: Vec<Vec<f64>> = (0..=4 * params.radius)
            .map(|i| {
                let x = 0.25 * i as f64;
                vec![x, w.kernel(x, 0), w.kernel(x, 1), w.kernel(x, 2)]
            })
            .collect();
        let header = ["x", "kernel", "kernel_d1", "kernel_d2"].map(String::from);
        self.write_csv("extend.csv", &header, &rows)?;

        if self.bx.half_width() <= params.radius + 1 {
            // no reliable region: kernel checks only
            self.rec.observe("extension_skipped_half_width", vec![self.bx.half_width() as f64]);
            return Ok(());
        }
        let source = self.spec.sample(self.bx);
        let ext = ExtendedPotential::new(source.clone(), Arc::clone(&w))?;
        let d = self.dim();
        let mut sites: Vec<Vec<i64>> = Vec::new();
        let reach = 64.min(self.bx.half_width() as i64 - params.radius as i64 - 1);
        for j in 0..d {
            for n in -reach..=reach {
                let mut s = vec![0i64; d];
                s[j] = n;
                sites.push(s);
            }
        }
        let diag = reach.min(8);
        for n in -diag..=diag {
            sites.push(vec![n; d]);
        }
        let interp = sites
            .par_iter()
            .map(|s| {
                let x: Vec<f64> = s.iter().map(|v| *v as f64).collect();
                Ok((ext.value(&x)? - source.get(s).unwrap_or(0.0)).abs())
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        self.rec.cert("interpolation_at_sites", interp, 1e-8);

        if let Some(mu) = self.mu() {
            let radii = dyadic_radii(&ext, 8.0);
            let mut rows = Vec::new();
            for order in 0..2usize {
                let mut alpha = vec![0usize; d];
                alpha[0] = order;
                let name = format!("extension_decay_order{order}");
                let entry = match symbol_decay_probe(&ext, &alpha, &radii) {
                    Ok(p) => {
                        for (r, s) in p.radii.iter().zip(&p.sups) {
                            rows.push(vec![order as f64, *r, *s]);
                        }
                        let lo = radii.first().copied().unwrap_or(1.0);
                        let hi = radii.last().copied().unwrap_or(1.0);
                        SlopeEntry::fit(&name, &p.radii, &p.sups, (lo, hi), Some(-mu - order as f64), 0.2)
                    }
                    Err(e) => SlopeEntry {
                        name,
                        target: Some(-mu - order as f64),
                        tolerance: 0.2,
                        slope: None,
                        note: Some(e.to_string()),
                        at_most: false,
                    },
                };
                self.rec.slopes.push(entry);
            }
            let header = ["order", "radius", "sup_abs"].map(String::from);
            self.write_csv("extend_decay.csv", &header, &rows)?;
        }
        Ok(())
    }

    fn classical(&mut self) -> Result<()> {
        let pot = self.potential()?;
        let k = self.constants()?;
        let cc = &self.cfg.classical;
        let (horizon, step, samples) = (cc.horizon, cc.step, cc.samples);
        let region = Region::new(self.window, k.r0.max(1.0), self.sign)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let starts = sample_region(&mut rng, &region, pot.as_ref(), samples.max(1))?;
        let flow = FlowParams {
            step,
            drift_tolerance: self.cfg.tolerances.energy_drift,
            ..FlowParams::default()
        };
        let s = self.sign.factor();
        let coarse: Vec<f64> = uniform_times(horizon, (horizon.ceil() as usize).max(8))
            .into_iter()
            .map(|t| s * t)
            .collect();
        let results = starts
            .par_iter()
            .map(|p| {
                let rep = region_escape_probe(pot.as_ref(), p, &region, &k, &flow, horizon, step)?;
                let traj = integrate_flow(pot.as_ref(), p, &flow, &coarse, None)?;
                Ok((rep, traj.max_drift(), p.energy(pot.as_ref())?))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut header = vec!["sample".to_string()];
        header.extend(self.axis_names("x"));
        header.extend(self.axis_names("xi"));
        header.extend(["energy", "min_margin", "identity_residual", "bound_holds", "monotone", "drift"].map(String::from));
        let rows: Vec<Vec<f64>> = starts
            .iter()
            .zip(&results)
            .enumerate()
            .map(|(i, (p, (rep, drift, e)))| {
                let mut r = vec![i as f64];
                r.extend_from_slice(p.x());
                r.extend_from_slice(p.xi());
                r.extend([*e, rep.min_margin, rep.identity_residual]);
                r.extend([rep.bound_holds as u8 as f64, rep.monotone as u8 as f64, *drift]);
                r
            })
            .collect();
        self.write_csv("classical.csv", &header, &rows)?;
        self.rec.holds("escape_bound", results.iter().all(|r| r.0.bound_holds));
        self.rec.holds("escape_monotone", results.iter().all(|r| r.0.monotone));
        let resid = results.iter().map(|r| r.0.identity_residual).fold(0.0, f64::max);
        self.rec.cert("escape_identity_residual", resid, IDENTITY_TOLERANCE);
        let drift = results.iter().map(|r| r.1).fold(0.0, f64::max);
        self.rec.cert("energy_drift", drift, self.cfg.tolerances.energy_drift);
        self.rec.observe("escape_delta_r0", vec![k.delta, k.r0]);

        if let Some(mu) = self.mu() {
            // outgoing launch at max(R0, 1) along the packet velocity
            let t_end = cc.asymptotic_horizon;
            let xi0 = self.cfg.packet.momentum.clone();
            let v = crate::lattice::symbols::velocity_vec(&xi0);
            let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            let x0: Vec<f64> = v.iter().map(|c| s * k.r0.max(1.0) * c / n).collect();
            let start = crate::classical::PhasePoint::new(x0, xi0)?;
            let per_octave = 8.0;
            let m = ((t_end.log2()) * per_octave).round() as i32;
            let mut times = vec![0.0];
            times.extend((0..=m).map(|i| s * 2f64.powf(i as f64 / per_octave)));
            let long = FlowParams {
                growth: Some(StepGrowth {
                    time_scale: 10.0,
                    max_step: 1e4,
                }),
                ..flow
            };
            let traj = integrate_flow(pot.as_ref(), &start, &long, &times, None)?;
            let mut tcsv = traj.to_csv();
            if !tcsv.ends_with('\n') {
                tcsv.push('\n');
            }
            fs::write(self.dir.join("classical_trajectory.csv"), tcsv)?;
            self.rec.artifacts.push("classical_trajectory.csv".into());
            let entry = |name: &str, target: f64, slope: Option<f64>, note: Option<String>| SlopeEntry {
                name: name.into(),
                target: Some(target),
                tolerance: SLOPE_TOLERANCE,
                slope,
                note,
                at_most: false,
            };
            match asymptotic_momentum(&traj, mu, (t_end / 100.0, t_end / 8.0)) {
                Ok(a) => {
                    self.rec.slopes.push(entry("momentum_convergence", -mu, a.xi_slope, None));
                    self.rec.slopes.push(entry("position_deviation", 1.0 - mu, a.x_slope, None));
                    self.rec.observe("asymptotic_momentum", a.xi_limit);
                }
                Err(e) => {
                    self.rec.slopes.push(entry("momentum_convergence", -mu, None, Some(e.to_string())));
                    self.rec.slopes.push(entry("position_deviation", 1.0 - mu, None, Some(e.to_string())));
                }
            }
        }
        Ok(())
    }

    fn hj(&mut self) -> Result<()> {
        let table = self.table()?;
        let pot = self.potential()?;
        let k = self.constants()?;
        let fan = self.fan.clone().expect("fan report accompanies the table");
        let tol = self.cfg.tolerances.clone();
        self.rec.cert("fan_smallness", fan.smallness, tol.smallness);
        self.rec.cert("fan_energy_drift", fan.max_energy_drift, tol.energy_drift);
        self.rec.holds("fan_jacobian_positive", fan.min_jacobian_det > 0.0);
        let report = phase_diagnostics(&table, pot.as_ref(), self.mu(), self.cfg.fit_window())?;
        self.rec.cert("hj_residual", report.max_hj_residual, tol.hj_residual);
        self.rec.cert("construction_identity", report.construction_error, tol.construction);
        self.rec.cert("newton_residual", report.max_newton_residual, tol.newton);
        let (lo, hi) = report.image_energy;
        self.rec.holds(
            "image_containment",
            lo >= self.window.lower() - k.delta && hi <= self.window.upper() + k.delta,
        );
        self.rec.observe("r1", vec![table.header().r1]);
        self.rec.observe("interpolation_error", vec![report.interpolation_error]);
        self.rec.slopes.extend(report.slopes.iter().cloned());

        let rows: Vec<Vec<f64>> = report.hj_residual.iter().map(|(t, r)| vec![*t, *r]).collect();
        self.write_csv("hj_residual.csv", &["t".into(), "residual".into()], &rows)?;
        let header = [
            "t",
            "phase_growth",
            "phase_growth_normalized",
            "position_growth",
            "position_growth_normalized",
            "hessian_deviation",
            "hessian_deviation_normalized",
        ]
        .map(String::from);
        let rows: Vec<Vec<f64>> = (0..report.times.len())
            .map(|i| {
                vec![
                    report.times[i],
                    report.phase_growth[i],
                    report.phase_growth_normalized[i],
                    report.position_growth[i],
                    report.position_growth_normalized[i],
                    report.hessian_deviation[i],
                    report.hessian_deviation_normalized[i],
                ]
            })
            .collect();
        self.write_csv("hj_growth.csv", &header, &rows)?;
        table.save(&self.dir.join("hj_table.json"), &self.dir.join("hj_table.csv"))?;
        self.rec.artifacts.extend(["hj_table.json".into(), "hj_table.csv".into()]);
        Ok(())
    }

    fn evolve(&mut self) -> Result<()> {
        let times = self.quantum_times()?;
        let s = self.sign.factor();
        let wave = self.wave()?;
        let margin = wave.ctx.margin;
        let norm0 = wave.windowed.norm();
        let mut u = wave.windowed.clone();
        let mut prev = 0.0;
        let mut rows = Vec::with_capacity(times.len());
        for &tau in &times {
            let t = s * tau;
            u = wave.ctx.propagator.propagate(&u, t - prev)?;
            prev = t;
            let mut r = vec![t, u.norm(), (u.norm() - norm0).abs(), boundary_mass(&u, margin), u.sup_norm()];
            r.extend(u.centroid());
            rows.push(r);
        }
        let mut header: Vec<String> = ["t", "norm", "norm_error", "boundary_mass", "sup_norm"].map(String::from).into();
        header.extend(self.axis_names("centroid"));
        let unit = rows.iter().map(|r| r[2]).fold(0.0, f64::max);
        let mass = rows.iter().map(|r| r[3]).fold(0.0, f64::max);
        self.write_csv("evolve.csv", &header, &rows)?;
        self.rec.cert("unitarity", unit, self.cfg.tolerances.unitarity);
        self.rec.cert("boundary_mass", mass, self.cfg.tolerances.boundary_mass);
        Ok(())
    }

    fn cook(&mut self) -> Result<()> {
        let times = self.quantum_times()?;
        let fit = self.cfg.fit_window();
        let mu = self.mu();
        let sign = self.sign;
        let mass_tol = self.cfg.tolerances.boundary_mass;
        for kind in self.cfg.modifiers.list.clone() {
            let m = self.modifier(kind)?;
            let wave = self.wave()?;
            let (target, one_sided) = match kind {
                ModifierKind::None => (mu.map(|m| -m), false),
                _ => (mu.map(|m| -1.0 - m), true),
            };
            let mut c = cook_series(&wave.ctx, m.as_ref(), &wave.windowed, sign, &times, fit, target, SLOPE_TOLERANCE)?;
            c.fit.name = format!("cook_{}", kind.name());
            if one_sided {
                c.fit = c.fit.one_sided();
            }
            let rows: Vec<Vec<f64>> = (0..c.times.len())
                .map(|i| vec![sign.factor() * c.times[i], c.g[i], c.boundary_mass[i]])
                .collect();
            let header = ["t", "g", "boundary_mass"].map(String::from);
            self.write_csv(&format!("cook_{}.csv", kind.name()), &header, &rows)?;
            let mass = c.boundary_mass.iter().copied().fold(0.0, f64::max);
            self.rec.cert(&format!("boundary_mass_{}", kind.name()), mass, mass_tol);
            self.rec.observe(format!("cook_integral_{}", kind.name()), vec![c.integral, c.tail.unwrap_or(f64::NAN)]);
            self.rec.slopes.push(c.fit);
        }
        Ok(())
    }

    fn waveop(&mut self) -> Result<()> {
        let ts = self.doubling_times();
        let times = self.quantum_times()?;
        let fit = self.cfg.fit_window();
        let tol = self.cfg.tolerances.clone();
        let sign = self.sign;
        let list = self.cfg.modifiers.list.clone();
        for &kind in &list {
            let m = self.modifier(kind)?;
            let wave = self.wave()?;
            let app = approximant(&wave.ctx, m.as_ref(), &wave.windowed, sign, &ts)?;
            let incs = app.doubling_increments()?;
            let ratios = app.doubling_ratios()?;
            let rows: Vec<Vec<f64>> = (0..app.times.len())
                .map(|i| {
                    let inc = if i == 0 { f64::NAN } else { incs[i - 1].increment };
                    let ratio = if i < 2 { f64::NAN } else { ratios[i - 2] };
                    vec![app.times[i], app.states[i].norm(), app.isometry_error[i], app.boundary_mass[i], inc, ratio]
                })
                .collect();
            let disp = dispersive_profile(
                &wave.ctx,
                m.as_ref(),
                &wave.windowed,
                &wave.support,
                sign,
                &times,
                DISPERSIVE_DILATION,
                fit,
                ts[1],
            )?;
            let name = kind.name();
            let header = ["t", "norm", "isometry_error", "boundary_mass", "increment", "ratio"].map(String::from);
            self.write_csv(&format!("waveop_{name}.csv"), &header, &rows)?;
            self.rec.cert(&format!("isometry_{name}"), app.max_isometry_error(), tol.isometry);
            self.rec.cert(&format!("boundary_mass_{name}"), app.max_boundary_mass(), tol.boundary_mass);
            self.rec.observe(format!("doubling_increments_{name}"), incs.iter().map(|c| c.increment).collect());
            self.rec.observe(format!("doubling_ratios_{name}"), ratios);

            let rows: Vec<Vec<f64>> = (0..disp.times.len())
                .map(|i| {
                    vec![disp.times[i], disp.outside_mass[i], disp.sup_norm[i], disp.region_size[i] as f64, disp.size_ratio[i]]
                })
                .collect();
            let header = ["t", "outside_mass", "sup_norm", "region_size", "size_ratio"].map(String::from);
            self.write_csv(&format!("dispersive_{name}.csv"), &header, &rows)?;
            let mut sup = disp.sup_fit.clone();
            sup.name = format!("dispersive_sup_{name}");
            self.rec.slopes.push(sup);
            self.rec.observe(format!("dispersive_c1_{name}"), vec![disp.c1]);
        }

        let primary = if list.contains(&ModifierKind::Hj) { ModifierKind::Hj } else { list[0] };
        let m = self.modifier(primary)?;
        let shift = self.cfg.modifiers.intertwining_shift;
        let wave = self.wave()?;
        let defect = intertwining_defect(&wave.ctx, m.as_ref(), &wave.windowed, sign, &[ts[1], ts[3]], shift)?;
        let rows: Vec<Vec<f64>> = defect.iter().map(|(t, v)| vec![*t, *v]).collect();
        self.write_csv("intertwining.csv", &["t".into(), "defect".into()], &rows)?;
        self.rec.observe(format!("intertwining_defect_{}", primary.name()), defect.iter().map(|p| p.1).collect());

        if list.contains(&ModifierKind::Hj) && list.contains(&ModifierKind::Dollard) {
            let a = self.modifier(ModifierKind::Hj)?;
            let b = self.modifier(ModifierKind::Dollard)?;
            let wave = self.wave()?;
            let g = modifier_gauge(&wave.ctx, a.as_ref(), b.as_ref(), &wave.windowed, &wave.support, sign, &ts)?;
            let rows: Vec<Vec<f64>> = g.times.iter().zip(&g.residual).map(|(t, r)| vec![*t, *r]).collect();
            self.write_csv("gauge.csv", &["t".into(), "residual".into()], &rows)?;
            self.rec.observe("gauge_phase_increments", g.phase_increments.iter().map(|p| p.1).collect());
            self.rec.observe("gauge_phase_spread", vec![g.phase_spread]);
        }
        Ok(())
    }
}

/// Plain-text summary of a manifest: certificate table then slope table.
pub fn render_summary(m: &RunManifest) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "run {} (modwave {})", m.config.name, m.crate_version);
    let _ = writeln!(s, "\n{:<10} {:<34} {:>12} {:>12}  verdict", "stage", "certificate", "value", "threshold");
    for c in &m.certificates {
        let _ = writeln!(
            s,
            "{:<10} {:<34} {:>12.3e} {:>12.3e}  {}{}",
            c.stage,
            c.name,
            c.value,
            c.threshold,
            if c.passed { "PASS" } else { "FAIL" },
            c.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
        );
    }
    let _ = writeln!(s, "\n{:<10} {:<34} {:>9} {:>9} {:>6}  verdict", "stage", "slope", "fitted", "target", "tol");
    for r in &m.slopes {
        let e = &r.entry;
        let verdict = match (e.passes(), &e.note) {
            (Some(true), _) => "ok".to_string(),
            (Some(false), _) => "off-target".to_string(),
            (None, Some(n)) => n.clone(),
            (None, None) => "no target".to_string(),
        };
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
        let target = match (e.target, e.at_most) {
            (Some(t), true) => format!("<={:.3}", t + e.tolerance),
            (t, _) => fmt(t),
        };
        let _ = writeln!(s, "{:<10} {:<34} {:>9} {:>9} {:>6.2}  {}", r.stage, e.name, fmt(e.slope), target, e.tolerance, verdict);
    }
    s
}
