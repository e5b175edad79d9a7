//! Run configuration read from TOML.
//!
//! Every section is optional; missing fields take the defaults below, which
//! reproduce the reference runs. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use sedqm_core::field::SpectralConfig;
use sedqm_core::params::calibrated_coupling;
use sedqm_core::{Grid1, PhysicalParams, Potential};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SedRelax,
    Balance,
    Equivalence,
    WignerContrast,
    GroundState,
    Qpot,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::SedRelax,
        Experiment::Balance,
        Experiment::Equivalence,
        Experiment::WignerContrast,
        Experiment::GroundState,
        Experiment::Qpot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::SedRelax => "sed-relax",
            Experiment::Balance => "balance",
            Experiment::Equivalence => "equivalence",
            Experiment::WignerContrast => "wigner-contrast",
            Experiment::GroundState => "ground-state",
            Experiment::Qpot => "qpot",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Experiment::SedRelax => "driven oscillator ensemble relaxing to the zero-point fixed point; beta calibration",
            Experiment::Balance => "absorbed versus radiated power, with a field-off decay control",
            Experiment::Equivalence => "Madelung fluid against the Schrodinger reference for a coherent state",
            Experiment::WignerContrast => "psi-built Wigner functions against the ensemble-estimated density",
            Experiment::GroundState => "variational ground states checked against a dense eigensolve",
            Experiment::Qpot => "quantum-potential maps, single and two-particle",
        }
    }

    /// Experiments that evolve a driven ensemble.
    pub fn uses_field(self) -> bool {
        matches!(self, Experiment::SedRelax | Experiment::Balance | Experiment::WignerContrast)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub params: ParamsConfig,
    pub potential: PotentialConfig,
    pub spectrum: SpectrumConfig,
    pub ensemble: EnsembleConfig,
    pub times: TimesConfig,
    pub grids: GridsConfig,
    pub equivalence: EquivalenceConfig,
    pub ground_state: GroundStateConfig,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::SedRelax,
            seed: 42,
            output_dir: None,
            params: ParamsConfig::default(),
            potential: PotentialConfig::default(),
            spectrum: SpectrumConfig::default(),
            ensemble: EnsembleConfig::default(),
            times: TimesConfig::default(),
            grids: GridsConfig::default(),
            equivalence: EquivalenceConfig::default(),
            ground_state: GroundStateConfig::default(),
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub mass: f64,
    pub hbar: f64,
    pub omega0: f64,
    /// Radiation-reaction time `tau`.
    pub damping_time: f64,
    /// Field coupling; derived from `tau` when absent.
    pub coupling: Option<f64>,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self { mass: 1.0, hbar: 1.0, omega0: 1.0, damping_time: 1e-3, coupling: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    Harmonic { omega: f64 },
    /// `V = a x^2 + b x^4`.
    Quartic { a: f64, b: f64 },
    Free,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig::Harmonic { omega: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub n_modes: usize,
    /// Relative half-width of the band around `omega0`.
    pub band: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { n_modes: 1000, band: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub members: usize,
    pub x0: f64,
    pub p0: f64,
    /// Disjoint member groups for Monte-Carlo noise floors.
    pub groups: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { members: 2000, x0: 0.0, p0: 0.0, groups: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimesConfig {
    /// Total time; 20 relaxation times when absent.
    pub t_final: Option<f64>,
    /// Upper bound on the step; half the field-resolution limit when absent.
    pub dt: Option<f64>,
    /// Snapshots in the stationary window.
    pub snapshots: usize,
    /// Start of the stationary window as a fraction of `t_final`.
    pub window_start: f64,
    /// Length of the field-off control run in relaxation times.
    pub control_relaxation_times: f64,
}

impl Default for TimesConfig {
    fn default() -> Self {
        Self { t_final: None, dt: None, snapshots: 101, window_start: 0.5, control_relaxation_times: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub const fn new(lo: f64, hi: f64, n: usize) -> Self {
        Self { lo, hi, n }
    }

    pub fn linspace(&self) -> Grid1 {
        Grid1::linspace(self.lo, self.hi, self.n).expect("validated axis")
    }

    pub fn interior(&self) -> Grid1 {
        Grid1::box_interior(self.lo, self.hi, self.n).expect("validated axis")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridsConfig {
    /// Phase-space grid for ensemble statistics.
    pub x: Axis,
    pub p: Axis,
    /// Wave-function grid (interior points of a box).
    pub wave: Axis,
    /// Momentum grid for psi-built Wigner functions.
    pub wigner_p: Axis,
    /// Grid for the ensemble reconstruction through the characteristic function.
    pub recon_x: Axis,
    pub recon_p: Axis,
    /// Half-extent and points per side of the symmetric z grid.
    pub z_half: f64,
    pub z_points: usize,
}

impl Default for GridsConfig {
    fn default() -> Self {
        Self {
            x: Axis::new(-4.0, 4.0, 161),
            p: Axis::new(-4.0, 4.0, 161),
            wave: Axis::new(-10.0, 10.0, 512),
            wigner_p: Axis::new(-6.0, 6.0, 241),
            recon_x: Axis::new(-4.0, 4.0, 81),
            recon_p: Axis::new(-4.0, 4.0, 641),
            z_half: 60.0,
            z_points: 600,
        }
    }
}

impl GridsConfig {
    pub fn z(&self) -> Grid1 {
        Grid1::symmetric(self.z_half, self.z_points).expect("validated z grid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquivalenceConfig {
    /// Center of the coherent state.
    pub x0: f64,
    pub p0: f64,
    pub periods: f64,
    /// Grid sizes for the refinement study.
    pub refinement: Vec<usize>,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        Self { x0: 1.5, p0: 0.5, periods: 1.0, refinement: vec![128, 256, 512] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroundCase {
    /// Harmonic well on `[-10, 10]`.
    Harmonic,
    /// Hard-walled unit box.
    Box,
    /// `V = x^4` on `[-4, 4]`.
    Quartic,
    /// The `[potential]` section on the wave grid.
    Configured,
}

impl GroundCase {
    pub fn name(self) -> &'static str {
        match self {
            GroundCase::Harmonic => "harmonic",
            GroundCase::Box => "box",
            GroundCase::Quartic => "quartic",
            GroundCase::Configured => "configured",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundStateConfig {
    pub cases: Vec<GroundCase>,
    pub tol: f64,
    pub max_iterations: usize,
    pub trials: usize,
}

impl Default for GroundStateConfig {
    fn default() -> Self {
        Self { cases: vec![GroundCase::Harmonic, GroundCase::Box, GroundCase::Quartic], tol: 1e-8, max_iterations: 100_000, trials: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub energy_rel: f64,
    pub beta_rel: f64,
    pub imbalance: f64,
    pub decay_rel: f64,
    /// Multiple of the Monte-Carlo noise floor allowed for sampled residuals.
    pub noise_factor: f64,
    pub equivalence_linf: f64,
    pub refinement_order: f64,
    pub wigner_floor: f64,
    pub wigner_min: f64,
    pub marginals: f64,
    pub harmonic_energy: f64,
    pub box_energy: f64,
    /// Multiple of the solver tolerance allowed against the dense eigensolve.
    pub oracle_factor: f64,
    pub qpot_constant: f64,
    pub plane_wave: f64,
    pub two_particle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            energy_rel: 0.10,
            beta_rel: 0.15,
            imbalance: 0.15,
            decay_rel: 0.05,
            noise_factor: 3.0,
            equivalence_linf: 1e-3,
            refinement_order: 2.0,
            wigner_floor: 1e-9,
            wigner_min: 1e-3,
            marginals: 1e-6,
            harmonic_energy: 1e-4,
            box_energy: 1e-3,
            oracle_factor: 10.0,
            qpot_constant: 1e-6,
            plane_wave: 1e-10,
            two_particle: 1e-12,
        }
    }
}

/// A rejected configuration, naming the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("{0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

fn field(name: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { field: name.to_string(), message: message.into() }
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field(name, format!("must be positive and finite, got {v}")))
    }
}

fn check_axis(name: &str, a: &Axis, min_points: usize) -> Result<(), ConfigError> {
    if !(a.lo.is_finite() && a.hi.is_finite() && a.lo < a.hi) {
        return Err(field(name, format!("need lo < hi, got [{}, {}]", a.lo, a.hi)));
    }
    if a.n < min_points {
        return Err(field(name, format!("need at least {min_points} points, got {}", a.n)));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn physical_params(&self) -> PhysicalParams {
        let p = &self.params;
        PhysicalParams {
            mass: p.mass,
            hbar: p.hbar,
            beta: 0.5 * p.hbar,
            damping_time: p.damping_time,
            coupling: p.coupling.unwrap_or_else(|| calibrated_coupling(p.mass, 1.0, p.damping_time)),
            light_speed: 1.0,
            omega0: p.omega0,
            calibrated: true,
        }
    }

    pub fn potential(&self) -> Potential {
        match self.potential {
            PotentialConfig::Harmonic { omega } => Potential::harmonic(self.params.mass, omega),
            PotentialConfig::Quartic { a, b } => Potential::quartic(a, b),
            PotentialConfig::Free => Potential::Free,
        }
    }

    pub fn spectral_config(&self) -> SpectralConfig {
        SpectralConfig::band(self.params.omega0, self.spectrum.band, self.spectrum.n_modes, self.seed)
    }

    /// Total simulated time.
    pub fn t_final(&self) -> f64 {
        self.times.t_final.unwrap_or(20.0 / (self.params.damping_time * self.params.omega0 * self.params.omega0))
    }

    /// Check everything that can be checked before computing.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.params;
        positive("params.mass", p.mass)?;
        positive("params.hbar", p.hbar)?;
        positive("params.omega0", p.omega0)?;
        if !(p.damping_time >= 0.0 && p.damping_time.is_finite()) {
            return Err(field("params.damping_time", format!("must be non-negative and finite, got {}", p.damping_time)));
        }
        if let Some(c) = p.coupling {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(field("params.coupling", format!("must be non-negative and finite, got {c}")));
            }
        }
        match self.potential {
            PotentialConfig::Harmonic { omega } => positive("potential.omega", omega)?,
            PotentialConfig::Quartic { a, b } => {
                if !(a.is_finite() && b > 0.0 && b.is_finite()) {
                    return Err(field("potential", format!("quartic needs finite a and b > 0, got a={a}, b={b}")));
                }
            }
            PotentialConfig::Free => {}
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.energy_rel", t.energy_rel),
            ("tolerances.beta_rel", t.beta_rel),
            ("tolerances.imbalance", t.imbalance),
            ("tolerances.decay_rel", t.decay_rel),
            ("tolerances.noise_factor", t.noise_factor),
            ("tolerances.equivalence_linf", t.equivalence_linf),
            ("tolerances.refinement_order", t.refinement_order),
            ("tolerances.wigner_floor", t.wigner_floor),
            ("tolerances.wigner_min", t.wigner_min),
            ("tolerances.marginals", t.marginals),
            ("tolerances.harmonic_energy", t.harmonic_energy),
            ("tolerances.box_energy", t.box_energy),
            ("tolerances.oracle_factor", t.oracle_factor),
            ("tolerances.qpot_constant", t.qpot_constant),
            ("tolerances.plane_wave", t.plane_wave),
            ("tolerances.two_particle", t.two_particle),
        ] {
            positive(name, v)?;
        }
        match self.experiment {
            e if e.uses_field() => self.validate_ensemble(),
            Experiment::Equivalence => self.validate_equivalence(),
            Experiment::GroundState => self.validate_ground_state(),
            Experiment::Qpot => {
                self.require_harmonic()?;
                check_axis("grids.wave", &self.grids.wave, 16)
            }
            _ => Ok(()),
        }
    }

    fn validate_ensemble(&self) -> Result<(), ConfigError> {
        if self.params.damping_time <= 0.0 {
            return Err(field("params.damping_time", "relaxation requires τ > 0"));
        }
        self.require_harmonic()?;
        let s = &self.spectrum;
        if s.n_modes < 2 {
            return Err(field("spectrum.n_modes", format!("need at least 2 modes, got {}", s.n_modes)));
        }
        if !(s.band > 0.0 && s.band < 1.0) {
            return Err(field("spectrum.band", format!("must lie in (0, 1), got {}", s.band)));
        }
        let e = &self.ensemble;
        if e.groups < 2 {
            return Err(field("ensemble.groups", "need at least two groups for a noise floor"));
        }
        if e.members < 2 * e.groups {
            return Err(field("ensemble.members", format!("need at least {} members for {} groups, got {}", 2 * e.groups, e.groups, e.members)));
        }
        if !(e.x0.is_finite() && e.p0.is_finite()) {
            return Err(field("ensemble", "x0 and p0 must be finite"));
        }
        let t = &self.times;
        let t_final = self.t_final();
        positive("times.t_final", t_final)?;
        if let Some(dt) = t.dt {
            positive("times.dt", dt)?;
            let omega_max = self.params.omega0 * (1.0 + s.band);
            let limit = 2.0 * std::f64::consts::PI / omega_max / sedqm_core::ensemble::STEPS_PER_FIELD_PERIOD;
            if dt > limit {
                return Err(field("times.dt", format!("{dt} exceeds the field-resolution limit {limit:.4}")));
            }
        }
        if t.snapshots < sedqm_core::ensemble::MIN_BALANCE_SNAPSHOTS {
            return Err(field("times.snapshots", format!("need at least {}, got {}", sedqm_core::ensemble::MIN_BALANCE_SNAPSHOTS, t.snapshots)));
        }
        if !(0.0..1.0).contains(&t.window_start) {
            return Err(field("times.window_start", format!("must lie in [0, 1), got {}", t.window_start)));
        }
        positive("times.control_relaxation_times", t.control_relaxation_times)?;
        // Spacing of the band lattice fixes the recurrence time of the mode sum.
        let spacing = 2.0 * s.band * self.params.omega0 / (s.n_modes - 1) as f64;
        let recurrence = 2.0 * std::f64::consts::PI / spacing;
        if t_final >= recurrence {
            return Err(field(
                "times.t_final",
                format!("{t_final} reaches the mode-sum recurrence time {recurrence:.1}; add modes or shorten the run"),
            ));
        }
        check_axis("grids.x", &self.grids.x, 16)?;
        check_axis("grids.p", &self.grids.p, 16)?;
        if self.experiment == Experiment::WignerContrast {
            self.validate_wigner()?;
        }
        Ok(())
    }

    fn validate_wigner(&self) -> Result<(), ConfigError> {
        let g = &self.grids;
        check_axis("grids.wave", &g.wave, 16)?;
        check_axis("grids.wigner_p", &g.wigner_p, 16)?;
        check_axis("grids.recon_x", &g.recon_x, 16)?;
        check_axis("grids.recon_p", &g.recon_p, 16)?;
        positive("grids.z_half", g.z_half)?;
        if g.z_points < 2 {
            return Err(field("grids.z_points", "need at least 2 points per side"));
        }
        let dp = (g.recon_p.hi - g.recon_p.lo) / (g.recon_p.n - 1) as f64;
        if g.z_half * dp > std::f64::consts::FRAC_PI_4 {
            return Err(field("grids.z_half", format!("z_half * dp = {:.4} exceeds pi/4; refine grids.recon_p", g.z_half * dp)));
        }
        Ok(())
    }

    fn require_harmonic(&self) -> Result<(), ConfigError> {
        if matches!(self.potential, PotentialConfig::Harmonic { .. }) {
            Ok(())
        } else {
            Err(field("potential.kind", format!("{} needs the analytic oscillator states; use kind = \"harmonic\"", self.experiment)))
        }
    }

    fn validate_equivalence(&self) -> Result<(), ConfigError> {
        self.require_harmonic()?;
        check_axis("grids.wave", &self.grids.wave, 16)?;
        let e = &self.equivalence;
        positive("equivalence.periods", e.periods)?;
        if !(e.x0.is_finite() && e.p0.is_finite()) {
            return Err(field("equivalence", "x0 and p0 must be finite"));
        }
        if e.refinement.len() < 2 || e.refinement.windows(2).any(|w| w[1] <= w[0]) || e.refinement[0] < 16 {
            return Err(field("equivalence.refinement", "need at least two increasing grid sizes of 16 points or more"));
        }
        Ok(())
    }

    fn validate_ground_state(&self) -> Result<(), ConfigError> {
        let g = &self.ground_state;
        if g.cases.is_empty() {
            return Err(field("ground_state.cases", "no cases selected"));
        }
        positive("ground_state.tol", g.tol)?;
        if g.max_iterations == 0 {
            return Err(field("ground_state.max_iterations", "must be positive"));
        }
        if g.cases.contains(&GroundCase::Configured) {
            check_axis("grids.wave", &self.grids.wave, 16)?;
            if matches!(self.potential, PotentialConfig::Free) {
                return Err(field("potential.kind", "a free particle on the wave grid is the box case; select `box` instead"));
            }
        }
        Ok(())
    }
}
