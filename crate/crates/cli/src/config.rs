//! Strict JSON run configuration. Unknown keys are rejected; every
//! section is validated before any output is produced.
//!
//! Units: `hbar = 1`; energies (`j`, `u`, `f`, magnitudes) in units of `U`,
//! times in `hbar / U`, lattice spacing 1.

use std::path::Path;

use bhecho::analysis::MIN_FIT_POINTS;
use bhecho::basis::DEFAULT_DIMENSION_CAP;
use bhecho::echo::{log_grid, uniform_grid, validate_time_grid};
use bhecho::{
    AutoGrid, DecayModel, EigConfig, EigMethod, FeshbachParams, ImprintMode, LatticeSpec, PhysicalUnits,
    PredictionKind, PropagatorConfig, ScenarioKind, SequenceSpec, WindowPolicy,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::Job;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// optional; must match the subcommand when present
    #[serde(default)]
    pub job: Option<String>,
    /// required by every job except `scan-critical` and `predict`
    #[serde(default)]
    pub lattice: Option<LatticeConfig>,
    #[serde(default)]
    pub hamiltonian: Option<HamiltonianConfig>,
    #[serde(default)]
    pub initial_state: Option<InitialState>,
    #[serde(default)]
    pub scenarios: Option<Vec<ScenarioConfig>>,
    #[serde(default)]
    pub time_grid: Option<TimeGridConfig>,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub sequence: Option<SequenceConfig>,
    #[serde(default)]
    pub scan: Option<ScanSection>,
    #[serde(default)]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default)]
    pub predict: Option<PredictConfig>,
    #[serde(default)]
    pub propagator: PropagatorSection,
    #[serde(default)]
    pub eigensolver: EigensolverSection,
    /// seeds the iterative eigensolver start vectors
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// worker threads; defaults to the number of available processors
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_seed() -> u64 {
    EigConfig::default().seed
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    /// number of sites N (open chain)
    pub n_sites: usize,
    /// number of bosons M
    pub n_bosons: usize,
    #[serde(default = "default_cap")]
    pub max_dimension: usize,
}

fn default_cap() -> usize {
    DEFAULT_DIMENSION_CAP
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianConfig {
    /// hopping J / U
    pub j: f64,
    /// interaction U (normally 1, the energy unit)
    #[serde(default = "one")]
    pub u: f64,
    /// tilt F = m g d / U; used by `spectrum` and ground-state preparation
    #[serde(default)]
    pub f: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// one boson per site
    Mott,
    Fock {
        occupations: Vec<u8>,
    },
    /// ground state of the configured Hamiltonian
    GroundState,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// ideal | delta_j_symmetric | delta_j_oneleg | delta_u | gravity
    pub kind: String,
    /// dJ, dU or F in units of U; ignored by `ideal`
    #[serde(default)]
    pub magnitude: f64,
    /// file stem `echo_<label>.csv`; defaults to the kind
    #[serde(default)]
    pub label: Option<String>,
    /// overrides the top-level initial state for this curve
    #[serde(default)]
    pub initial_state: Option<InitialState>,
}

impl ScenarioConfig {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.kind)
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeGridConfig {
    /// `points` equally spaced times on `[0, t_max]`
    Uniform {
        t_max: f64,
        points: usize,
    },
    /// 0 followed by `points` log-spaced times on `[t_min, t_max]`
    Log {
        t_min: f64,
        t_max: f64,
        points: usize,
    },
    Explicit {
        times: Vec<f64>,
    },
    /// per curve: double `t_max` until the echo reaches `target`
    Auto {
        #[serde(default = "auto_points")]
        points: usize,
        #[serde(default = "auto_target")]
        target: f64,
        #[serde(default = "one")]
        t_initial: f64,
        #[serde(default = "auto_cap")]
        t_cap: f64,
    },
}

fn auto_points() -> usize {
    AutoGrid::default().points
}
fn auto_target() -> f64 {
    AutoGrid::default().target
}
fn auto_cap() -> f64 {
    AutoGrid::default().t_cap
}

impl TimeGridConfig {
    /// Explicit grid, or `None` for the auto policy.
    pub fn grid(&self) -> Option<Vec<f64>> {
        match self {
            Self::Uniform { t_max, points } => Some(uniform_grid(*t_max, *points)),
            Self::Log { t_min, t_max, points } => Some(log_grid(*t_min, *t_max, *points)),
            Self::Explicit { times } => Some(times.clone()),
            Self::Auto { .. } => None,
        }
    }

    pub fn auto(&self) -> Option<AutoGrid> {
        match *self {
            Self::Auto { points, target, t_initial, t_cap } => Some(AutoGrid { points, target, t_initial, t_cap }),
            _ => None,
        }
    }

    fn validate(&self, path: &str) -> Result<(), CliError> {
        match *self {
            Self::Uniform { t_max, points } => {
                check(t_max > 0.0 && t_max.is_finite(), path, "t_max must be positive")?;
                check(points >= 2, path, "points must be at least 2")?;
            }
            Self::Log { t_min, t_max, points } => {
                check(t_min > 0.0 && t_max > t_min && t_max.is_finite(), path, "need 0 < t_min < t_max")?;
                check(points >= 2, path, "points must be at least 2")?;
            }
            Self::Explicit { .. } => {}
            Self::Auto { points, target, t_initial, t_cap } => {
                check(points >= 2, path, "points must be at least 2")?;
                check(target > 0.0 && target < 1.0, path, "target must lie in (0, 1)")?;
                check(t_initial > 0.0 && t_cap >= t_initial && t_cap.is_finite(), path, "need 0 < t_initial <= t_cap")?;
            }
        }
        if let Some(g) = self.grid() {
            validate_time_grid(&g).map_err(|e| CliError::config(path, e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default)]
    pub decay: Option<DecayFitConfig>,
    /// log-log slope of `1 - f` over `[t_lo, t_hi]`
    #[serde(default)]
    pub slope: Option<SlopeWindow>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DecayFitConfig {
    #[serde(default = "gaussian")]
    pub model: ModelName,
    #[serde(default)]
    pub window: WindowConfig,
}

fn gaussian() -> ModelName {
    ModelName::Gaussian
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Gaussian,
    Quartic,
}

impl From<ModelName> for DecayModel {
    fn from(m: ModelName) -> Self {
        match m {
            ModelName::Gaussian => DecayModel::Gaussian,
            ModelName::Quartic => DecayModel::Quartic,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WindowConfig {
    /// f >= 0.8 (gaussian) or f >= 0.95 (quartic)
    #[default]
    Shoulder,
    FidelityAbove {
        threshold: f64,
    },
    TimeRange {
        t_lo: f64,
        t_hi: f64,
    },
}

impl From<WindowConfig> for WindowPolicy {
    fn from(w: WindowConfig) -> Self {
        match w {
            WindowConfig::Shoulder => WindowPolicy::Shoulder,
            WindowConfig::FidelityAbove { threshold } => WindowPolicy::FidelityAbove(threshold),
            WindowConfig::TimeRange { t_lo, t_hi } => WindowPolicy::TimeRange { t_lo, t_hi },
        }
    }
}

impl WindowConfig {
    fn validate(&self, path: &str) -> Result<(), CliError> {
        match *self {
            Self::Shoulder => Ok(()),
            Self::FidelityAbove { threshold } => {
                check(threshold > 0.0 && threshold < 1.0, path, "threshold must lie in (0, 1)")
            }
            Self::TimeRange { t_lo, t_hi } => {
                check(t_lo >= 0.0 && t_hi > t_lo && t_hi.is_finite(), path, "need 0 <= t_lo < t_hi")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeWindow {
    pub t_lo: f64,
    pub t_hi: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub j: f64,
    #[serde(default = "one")]
    pub u: f64,
    /// static tilt present during both evolution legs
    #[serde(default)]
    pub f_background: f64,
    #[serde(default)]
    pub imprint: ImprintConfig,
    /// phase offset added to pi
    #[serde(default)]
    pub phase_error: f64,
    /// residual interaction after the Feshbach flip: backward U is `-u + delta_u`
    #[serde(default)]
    pub delta_u: f64,
    /// overlap against `P(pi) psi0` instead of `psi0`
    #[serde(default)]
    pub compare_to_imprinted: bool,
    #[serde(default)]
    pub physical: Option<PhysicalConfig>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImprintConfig {
    #[default]
    Ideal,
    Pulsed {
        f_pulse: f64,
        tau: f64,
        #[serde(default = "yes")]
        lattice_active: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConfig {
    pub mass_kg: f64,
    pub spacing_m: f64,
    /// the energy unit U in joules
    pub energy_unit_j: f64,
}

impl SequenceConfig {
    pub fn to_spec(&self) -> SequenceSpec {
        SequenceSpec {
            j: self.j,
            u: self.u,
            f_background: self.f_background,
            imprint: match self.imprint {
                ImprintConfig::Ideal => ImprintMode::Ideal,
                ImprintConfig::Pulsed { f_pulse, tau, lattice_active } => {
                    ImprintMode::Pulsed { f_pulse, tau, lattice_active }
                }
            },
            phase_error: self.phase_error,
            delta_u: self.delta_u,
            compare_to_imprinted: self.compare_to_imprinted,
            physical: self.physical.map(|p| PhysicalUnits {
                mass_kg: p.mass_kg,
                spacing_m: p.spacing_m,
                energy_unit_j: p.energy_unit_j,
            }),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    /// chain lengths; each runs at unit filling (M = N)
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub j_min: f64,
    pub j_step: f64,
    pub j_points: usize,
    pub delta_j: f64,
    #[serde(default = "one")]
    pub u: f64,
    #[serde(default = "scan_t_max")]
    pub t_max: f64,
    #[serde(default = "scan_points")]
    pub time_points: usize,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default = "yes")]
    pub compute_gap: bool,
}

fn scan_t_max() -> f64 {
    0.05
}
fn scan_points() -> usize {
    51
}

impl ScanSection {
    pub fn j_grid(&self) -> Vec<f64> {
        bhecho::ScanConfig::grid(self.j_min, self.j_step, self.j_points)
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    /// number of lowest levels; `null` means the full spectrum (dense path)
    #[serde(default)]
    pub levels: Option<usize>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    pub laws: Vec<LawConfig>,
    #[serde(default)]
    pub feshbach: Option<FeshbachConfig>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    DeltaU { j: f64, delta_u: f64 },
    DeltaJ { delta_j: f64 },
    Gravity { f: f64, j: f64 },
    GaussianCrossover { beta: f64, delta_u: f64, j: f64 },
}

impl LawConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::DeltaU { .. } => "delta_u",
            Self::DeltaJ { .. } => "delta_j",
            Self::Gravity { .. } => "gravity",
            Self::GaussianCrossover { .. } => "gaussian_crossover",
        }
    }

    pub fn kind(&self) -> PredictionKind {
        match *self {
            Self::DeltaU { j, delta_u } => PredictionKind::DeltaU { j, delta_u },
            Self::DeltaJ { delta_j } => PredictionKind::DeltaJ { delta_j },
            Self::Gravity { f, j } => PredictionKind::Gravity { f, j },
            Self::GaussianCrossover { beta, delta_u, j } => PredictionKind::GaussianCrossover { beta, delta_u, j },
        }
    }

    fn values(&self) -> Vec<f64> {
        match *self {
            Self::DeltaU { j, delta_u } => vec![j, delta_u],
            Self::DeltaJ { delta_j } => vec![delta_j],
            Self::Gravity { f, j } => vec![f, j],
            Self::GaussianCrossover { beta, delta_u, j } => vec![beta, delta_u, j],
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FeshbachConfig {
    pub a_bg: f64,
    pub b0: f64,
    pub delta_b: f64,
    /// fields at which `a_s(B)` is tabulated
    pub fields: Vec<f64>,
    /// pole guard as a fraction of `|delta_b|`
    #[serde(default = "pole_guard")]
    pub guard: f64,
}

fn pole_guard() -> f64 {
    1e-6
}

impl FeshbachConfig {
    pub fn guard_abs(&self) -> f64 {
        self.guard * self.delta_b.abs()
    }

    pub fn params(&self) -> Result<FeshbachParams, CliError> {
        FeshbachParams::new(self.a_bg, self.b0, self.delta_b)
            .map_err(|e| CliError::config("predict.feshbach", e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorSection {
    #[serde(default = "krylov_dim")]
    pub krylov_dim: usize,
    #[serde(default = "step_tolerance")]
    pub step_tolerance: f64,
    #[serde(default = "max_substeps")]
    pub max_substeps: usize,
}

fn krylov_dim() -> usize {
    PropagatorConfig::default().krylov_dim
}
fn step_tolerance() -> f64 {
    PropagatorConfig::default().step_tolerance
}
fn max_substeps() -> usize {
    PropagatorConfig::default().max_substeps
}

impl Default for PropagatorSection {
    fn default() -> Self {
        Self { krylov_dim: krylov_dim(), step_tolerance: step_tolerance(), max_substeps: max_substeps() }
    }
}

impl PropagatorSection {
    pub fn to_config(self) -> PropagatorConfig {
        PropagatorConfig {
            krylov_dim: self.krylov_dim,
            step_tolerance: self.step_tolerance,
            max_substeps: self.max_substeps,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Auto,
    Lanczos,
    Dense,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EigensolverSection {
    #[serde(default = "auto_method")]
    pub method: MethodName,
    #[serde(default = "eig_tol")]
    pub tol: f64,
    #[serde(default = "max_krylov")]
    pub max_krylov: usize,
    #[serde(default = "max_restarts")]
    pub max_restarts: usize,
    #[serde(default = "dense_limit")]
    pub dense_limit: usize,
}

fn auto_method() -> MethodName {
    MethodName::Auto
}
fn eig_tol() -> f64 {
    EigConfig::default().tol
}
fn max_krylov() -> usize {
    EigConfig::default().max_krylov
}
fn max_restarts() -> usize {
    EigConfig::default().max_restarts
}
fn dense_limit() -> usize {
    EigConfig::default().dense_limit
}

impl Default for EigensolverSection {
    fn default() -> Self {
        Self {
            method: auto_method(),
            tol: eig_tol(),
            max_krylov: max_krylov(),
            max_restarts: max_restarts(),
            dense_limit: dense_limit(),
        }
    }
}

fn check(ok: bool, path: &str, msg: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(path, msg))
    }
}

fn finite(path: &str, values: &[f64]) -> Result<(), CliError> {
    check(values.iter().all(|v| v.is_finite()), path, "values must be finite")
}

fn require<'a, T>(section: &'a Option<T>, path: &str, job: Job) -> Result<&'a T, CliError> {
    section.as_ref().ok_or_else(|| CliError::config(path, format!("section is required for {job}")))
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config("config", e.to_string()))
    }

    pub fn eig_config(&self) -> EigConfig {
        let e = self.eigensolver;
        EigConfig {
            tol: e.tol,
            method: match e.method {
                MethodName::Auto => EigMethod::Auto,
                MethodName::Lanczos => EigMethod::Lanczos,
                MethodName::Dense => EigMethod::Dense,
            },
            max_krylov: e.max_krylov,
            max_restarts: e.max_restarts,
            dense_limit: e.dense_limit,
            seed: self.seed,
            ..EigConfig::default()
        }
    }

    pub fn lattice(&self) -> Result<&LatticeConfig, CliError> {
        self.lattice.as_ref().ok_or_else(|| CliError::config("lattice", "section is required for this job"))
    }

    pub fn lattice_spec(&self) -> Result<LatticeSpec, CliError> {
        let l = self.lattice()?;
        let spec = LatticeSpec::new(l.n_sites, l.n_bosons).map_err(|e| CliError::config("lattice", e.to_string()))?;
        let dim = spec.dimension();
        check(
            dim <= l.max_dimension as u128,
            "lattice",
            &format!("basis dimension {dim} exceeds max_dimension {}", l.max_dimension),
        )?;
        Ok(spec)
    }

    /// Full schema and cross-field validation for `job`.
    pub fn validate(&self, job: Job) -> Result<(), CliError> {
        if let Some(name) = &self.job {
            check(name == job.as_str(), "job", &format!("config is for '{name}', not '{job}'"))?;
        }
        if let Some(t) = self.threads {
            check(t >= 1, "threads", "must be at least 1")?;
        }
        self.propagator.to_config().validate().map_err(|e| CliError::config("propagator", e.to_string()))?;
        let e = self.eigensolver;
        check(
            e.tol > 0.0 && e.max_krylov >= 2 && e.max_restarts >= 1,
            "eigensolver",
            "need tol > 0, max_krylov >= 2, max_restarts >= 1",
        )?;

        match job {
            Job::EchoCurve => self.validate_echo(),
            Job::Sequence => self.validate_sequence(),
            Job::ScanCritical => self.validate_scan(),
            Job::Spectrum => self.validate_spectrum(),
            Job::Predict => self.validate_predict(),
        }
    }

    fn validate_initial(&self, init: &InitialState, path: &str) -> Result<(), CliError> {
        let l = self.lattice()?;
        match init {
            InitialState::Mott => check(l.n_sites == l.n_bosons, path, "mott state needs M = N"),
            InitialState::Fock { occupations } => {
                check(occupations.len() == l.n_sites, path, "occupations must list one entry per site")?;
                let total: usize = occupations.iter().map(|&n| n as usize).sum();
                check(total == l.n_bosons, path, &format!("occupations sum to {total}, expected {}", l.n_bosons))
            }
            InitialState::GroundState => Ok(()),
        }
    }

    fn validate_hamiltonian(&self, job: Job) -> Result<HamiltonianConfig, CliError> {
        let h = *require(&self.hamiltonian, "hamiltonian", job)?;
        finite("hamiltonian", &[h.j, h.u, h.f])?;
        Ok(h)
    }

    fn validate_echo(&self) -> Result<(), CliError> {
        let job = Job::EchoCurve;
        self.lattice_spec()?;
        self.validate_hamiltonian(job)?;
        let scenarios = require(&self.scenarios, "scenarios", job)?;
        check(!scenarios.is_empty(), "scenarios", "at least one scenario is required")?;
        let default_init = self.initial_state.as_ref();
        let mut labels = Vec::new();
        for (i, s) in scenarios.iter().enumerate() {
            let path = format!("scenarios[{i}]");
            s.kind.parse::<ScenarioKind>().map_err(|e| CliError::config(&format!("{path}.kind"), e.to_string()))?;
            finite(&path, &[s.magnitude])?;
            let label = s.label();
            check(
                !label.is_empty() && label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'),
                &format!("{path}.label"),
                "labels use [A-Za-z0-9_-] only",
            )?;
            check(label != "combined" && !labels.contains(&label), &format!("{path}.label"), "labels must be unique")?;
            labels.push(label);
            let init = s.initial_state.as_ref().or(default_init).ok_or_else(|| {
                CliError::config(&format!("{path}.initial_state"), "no initial state given here or at top level")
            })?;
            self.validate_initial(init, &format!("{path}.initial_state"))?;
        }
        require(&self.time_grid, "time_grid", job)?.validate("time_grid")?;
        if let Some(fit) = &self.fit {
            if let Some(d) = &fit.decay {
                d.window.validate("fit.decay.window")?;
            }
            if let Some(s) = &fit.slope {
                check(s.t_lo > 0.0 && s.t_hi > s.t_lo && s.t_hi.is_finite(), "fit.slope", "need 0 < t_lo < t_hi")?;
            }
        }
        Ok(())
    }

    fn validate_sequence(&self) -> Result<(), CliError> {
        let job = Job::Sequence;
        self.lattice_spec()?;
        let seq = require(&self.sequence, "sequence", job)?;
        seq.to_spec().validate().map_err(|e| CliError::config("sequence", e.to_string()))?;
        if let Some(p) = seq.physical {
            check(
                p.mass_kg > 0.0 && p.spacing_m > 0.0 && p.energy_unit_j > 0.0,
                "sequence.physical",
                "mass, spacing and energy unit must be positive",
            )?;
        }
        let init = require(&self.initial_state, "initial_state", job)?;
        self.validate_initial(init, "initial_state")?;
        let grid = require(&self.time_grid, "time_grid", job)?;
        check(grid.auto().is_none(), "time_grid", "sequence jobs need an explicit grid")?;
        grid.validate("time_grid")
    }

    fn validate_scan(&self) -> Result<(), CliError> {
        let job = Job::ScanCritical;
        let s = require(&self.scan, "scan", job)?;
        check(!s.sizes.is_empty(), "scan.sizes", "at least one size is required")?;
        let mut sorted = s.sizes.clone();
        sorted.dedup();
        check(sorted.len() == s.sizes.len(), "scan.sizes", "sizes must be unique")?;
        for &n in &s.sizes {
            let spec = LatticeSpec::unit_filling(n).map_err(|e| CliError::config("scan.sizes", e.to_string()))?;
            check(
                spec.dimension() <= self.lattice.as_ref().map_or(DEFAULT_DIMENSION_CAP, |l| l.max_dimension) as u128,
                "scan.sizes",
                &format!("N = {n} exceeds lattice.max_dimension"),
            )?;
        }
        finite("scan", &[s.j_min, s.j_step, s.delta_j, s.u, s.t_max])?;
        check(s.j_min >= 0.0, "scan.j_min", "must be non-negative")?;
        check(s.j_step > 0.0, "scan.j_step", "must be positive")?;
        check(s.j_points >= 3, "scan.j_points", "need at least 3 grid points")?;
        check(s.t_max > 0.0, "scan.t_max", "must be positive")?;
        check(s.time_points > MIN_FIT_POINTS, "scan.time_points", &format!("need more than {MIN_FIT_POINTS}"))?;
        s.window.validate("scan.window")
    }

    fn validate_spectrum(&self) -> Result<(), CliError> {
        let spec = self.lattice_spec()?;
        self.validate_hamiltonian(Job::Spectrum)?;
        let cfg = self.spectrum.clone().unwrap_or_default();
        let dim = spec.dimension() as usize;
        match cfg.levels {
            Some(k) => check(k >= 1 && k <= dim, "spectrum.levels", &format!("must lie in 1..={dim}")),
            None => check(
                dim <= self.eigensolver.dense_limit,
                "spectrum.levels",
                &format!("full spectrum needs dimension <= eigensolver.dense_limit ({})", self.eigensolver.dense_limit),
            ),
        }
    }

    fn validate_predict(&self) -> Result<(), CliError> {
        let job = Job::Predict;
        let p = require(&self.predict, "predict", job)?;
        check(!p.laws.is_empty() || p.feshbach.is_some(), "predict", "nothing to evaluate")?;
        for (i, law) in p.laws.iter().enumerate() {
            finite(&format!("predict.laws[{i}]"), &law.values())?;
        }
        if !p.laws.is_empty() {
            let grid = require(&self.time_grid, "time_grid", job)?;
            check(grid.auto().is_none(), "time_grid", "predict jobs need an explicit grid")?;
            grid.validate("time_grid")?;
        }
        if let Some(f) = &p.feshbach {
            let params = f.params()?;
            check(f.guard > 0.0, "predict.feshbach.guard", "must be positive")?;
            for (i, &b) in f.fields.iter().enumerate() {
                params
                    .scattering_length_guarded(b, f.guard_abs())
                    .map_err(|e| CliError::config(&format!("predict.feshbach.fields[{i}]"), e.to_string()))?;
            }
        }
        Ok(())
    }
}
