//! Loschmidt-echo protocols.
//!
//! The echo of a forward generator `H_f` and a backward generator `H_b` is
//!
//! ```text
//! f(t) = |<psi0| exp(-i H_b t) exp(-i H_f t) |psi0>|^2
//! ```
//!
//! evaluated on a time grid by co-propagating `chi(t) = exp(-i H_f t) psi0`
//! and `phi(t) = exp(+i H_b t) psi0` and taking `|<phi|chi>|^2`, so a grid of
//! `n` points costs `O(n)` propagation instead of `O(n^2)`.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::operators::{BhmOperators, BhmParams, DiagonalUnitary, HermitianOperator};
use crate::propagator::{evolve, PropagatorConfig};
use crate::state::StateVector;

/// Raw fidelities may overshoot `[0, 1]` by this much before it is an error.
pub const FIDELITY_SLACK: f64 = 1e-9;

/// Reduced Planck constant in J s, for the pulse-duration check.
pub const HBAR_SI: f64 = 1.054_571_817e-34;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    /// `H_b = -H_f`
    Ideal,
    /// forward hopping `J - dJ/2`, reversed hopping `J + dJ/2`
    DeltaJSymmetric,
    /// imperfect pi imprint: backward hopping `-J + dJ`
    DeltaJOneLeg,
    /// imperfect Feshbach flip: backward interaction `-U + dU`
    DeltaU,
    /// unreversed tilt `F sum_j j n_j` on both legs
    Gravity,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] =
        [Self::Ideal, Self::DeltaJSymmetric, Self::DeltaJOneLeg, Self::DeltaU, Self::Gravity];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Ideal => "ideal",
            Self::DeltaJSymmetric => "delta_j_symmetric",
            Self::DeltaJOneLeg => "delta_j_oneleg",
            Self::DeltaU => "delta_u",
            Self::Gravity => "gravity",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// Forward and backward generators of one echo experiment.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub j: f64,
    pub u: f64,
    /// `dJ`, `dU` or `F` depending on `kind`; ignored for `Ideal`
    pub magnitude: f64,
    pub forward: HermitianOperator,
    pub backward: HermitianOperator,
}

impl Scenario {
    pub fn new(ops: &BhmOperators, kind: ScenarioKind, j: f64, u: f64, magnitude: f64) -> Result<Self> {
        if !(j.is_finite() && u.is_finite() && magnitude.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite scenario parameters J={j} U={u} magnitude={magnitude}"
            )));
        }
        let h = |j: f64, u: f64, f: f64| ops.hamiltonian(BhmParams { j, u, f });
        let (forward, backward) = match kind {
            ScenarioKind::Ideal => {
                let hf = h(j, u, 0.0);
                let hb = hf.negated();
                (hf, hb)
            }
            ScenarioKind::DeltaJSymmetric => (h(j - magnitude / 2.0, u, 0.0), h(j + magnitude / 2.0, u, 0.0).negated()),
            ScenarioKind::DeltaJOneLeg => (h(j, u, 0.0), h(-j + magnitude, -u, 0.0)),
            ScenarioKind::DeltaU => (h(j, u, 0.0), h(-j, -u + magnitude, 0.0)),
            ScenarioKind::Gravity => (h(j, u, magnitude), h(-j, -u, magnitude)),
        };
        Ok(Self { kind, j, u, magnitude, forward, backward })
    }

    /// `Delta = H_f + H_b`; zero for a perfect reversal.
    pub fn perturbation(&self) -> HermitianOperator {
        self.forward.add(&self.backward).expect("legs share one basis")
    }

    fn describe(&self) -> Vec<(String, String)> {
        vec![
            ("protocol".into(), "echo".into()),
            ("scenario".into(), self.kind.to_string()),
            ("J".into(), self.j.to_string()),
            ("U".into(), self.u.to_string()),
            ("magnitude".into(), self.magnitude.to_string()),
        ]
    }
}

/// Sampled echo `f(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EchoCurve {
    pub times: Vec<f64>,
    /// clamped into `[0, 1]`
    pub fidelity: Vec<f64>,
    /// before clamping
    pub raw: Vec<f64>,
    /// protocol descriptor and warnings, in insertion order
    pub metadata: Vec<(String, String)>,
}

impl EchoCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.metadata.iter().filter(|(k, _)| k == "warning").map(|(_, v)| v.as_str())
    }

    /// `# key=value` header lines, then `t,f` rows.
    pub fn write_csv<W: Write>(&self, mut w: W, extra: &[(String, String)]) -> std::io::Result<()> {
        for (k, v) in self.metadata.iter().chain(extra) {
            writeln!(w, "# {k}={v}")?;
        }
        self.write_rows(w)
    }

    pub fn write_rows<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,f")?;
        for (t, f) in self.times.iter().zip(&self.fidelity) {
            writeln!(w, "{t:.10e},{f:.16e}")?;
        }
        Ok(())
    }
}

/// Checks that a grid starts at zero and strictly increases.
pub fn validate_time_grid(grid: &[f64]) -> Result<()> {
    match grid.first() {
        None => return Err(Error::TimeGrid("empty grid".into())),
        Some(&t0) if t0 != 0.0 => return Err(Error::TimeGrid(format!("grid must start at 0, got {t0}"))),
        _ => {}
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::TimeGrid("non-finite time".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::TimeGrid("grid must be strictly ascending".into()));
    }
    Ok(())
}

/// `points` equally spaced times on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n).map(|i| t_max * i as f64 / (n - 1) as f64).collect()
}

/// `0` followed by `points` logarithmically spaced times on `[t_min, t_max]`.
pub fn log_grid(t_min: f64, t_max: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    let (a, b) = (t_min.ln(), t_max.ln());
    std::iter::once(0.0).chain((0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())).collect()
}

fn check_initial(psi0: &StateVector, h: &HermitianOperator) -> Result<()> {
    h.check_tag(psi0.tag())?;
    let n = psi0.norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("initial state norm {n} is not 1")));
    }
    Ok(())
}

/// Shared co-propagation loop: `chi` runs forward under `h_fwd`, `phi` runs
/// backward in time under `h_back` from `reference`, and `between` maps
/// `chi` before the overlap (the imprint in the pulsed sequence).
fn co_propagate(
    psi0: &StateVector,
    reference: &StateVector,
    h_fwd: &HermitianOperator,
    h_back: &HermitianOperator,
    grid: &[f64],
    cfg: &PropagatorConfig,
    between: impl Fn(&StateVector) -> Result<StateVector>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    validate_time_grid(grid)?;
    let mut chi = psi0.clone();
    let mut phi = reference.clone();
    let mut raw = Vec::with_capacity(grid.len());
    let mut prev = 0.0;
    for &t in grid {
        let dt = t - prev;
        if dt != 0.0 {
            chi = evolve(h_fwd, &chi, dt, cfg).map_err(|e| at_time(e, t))?;
            phi = evolve(h_back, &phi, -dt, cfg).map_err(|e| at_time(e, t))?;
        }
        prev = t;
        let mapped = between(&chi).map_err(|e| at_time(e, t))?;
        let f = phi.inner(&mapped)?.norm_sqr();
        if !(-FIDELITY_SLACK..=1.0 + FIDELITY_SLACK).contains(&f) {
            return Err(Error::Propagation { t, reason: format!("fidelity {f} outside [0, 1]") });
        }
        raw.push(f);
    }
    let clamped = raw.iter().map(|f| f.clamp(0.0, 1.0)).collect();
    Ok((clamped, raw))
}

fn at_time(e: Error, t: f64) -> Error {
    match e {
        Error::Propagation { reason, .. } => Error::Propagation { t, reason },
        other => other,
    }
}

/// Echo of a scenario on `grid` (ascending from 0).
pub fn echo_curve(psi0: &StateVector, scenario: &Scenario, grid: &[f64], cfg: &PropagatorConfig) -> Result<EchoCurve> {
    check_initial(psi0, &scenario.forward)?;
    let (fidelity, raw) =
        co_propagate(psi0, psi0, &scenario.forward, &scenario.backward, grid, cfg, |s| Ok(s.clone()))?;
    let mut metadata = scenario.describe();
    metadata.push(("krylov_dim".into(), cfg.krylov_dim.to_string()));
    metadata.push(("step_tolerance".into(), format!("{:e}", cfg.step_tolerance)));
    Ok(EchoCurve { times: grid.to_vec(), fidelity, raw, metadata })
}

/// Literal two-leg evaluation at a single time: evolve forward, then
/// backward, then overlap.
pub fn two_leg_fidelity(psi0: &StateVector, scenario: &Scenario, t: f64, cfg: &PropagatorConfig) -> Result<f64> {
    check_initial(psi0, &scenario.forward)?;
    let fwd = evolve(&scenario.forward, psi0, t, cfg)?;
    let back = evolve(&scenario.backward, &fwd, t, cfg)?;
    Ok(psi0.inner(&back)?.norm_sqr())
}

/// Horizon search for echo curves: grow `t_max` by doubling until the echo
/// reaches `target`, then cut the grid at the first point at or below it.
#[derive(Clone, Debug, PartialEq)]
pub struct AutoGrid {
    pub points: usize,
    pub target: f64,
    pub t_initial: f64,
    pub t_cap: f64,
}

impl Default for AutoGrid {
    fn default() -> Self {
        Self { points: 200, target: 0.1, t_initial: 1.0, t_cap: 1024.0 }
    }
}

/// Returns the chosen uniform grid. If the echo never reaches the target
/// before `t_cap`, the grid spans `[0, t_cap]`.
pub fn auto_time_grid(auto: &AutoGrid, mut curve: impl FnMut(&[f64]) -> Result<EchoCurve>) -> Result<Vec<f64>> {
    if auto.points < 2 || auto.t_initial.is_nan() || auto.t_initial <= 0.0 || auto.t_cap < auto.t_initial {
        return Err(Error::TimeGrid("auto grid needs points >= 2 and 0 < t_initial <= t_cap".into()));
    }
    let mut t_max = auto.t_initial;
    loop {
        let grid = uniform_grid(t_max, auto.points);
        let probe = curve(&grid)?;
        if let Some(i) = probe.fidelity.iter().position(|&f| f <= auto.target) {
            let cut = grid[i.max(1)];
            return Ok(uniform_grid(cut, auto.points));
        }
        if t_max >= auto.t_cap {
            return Ok(grid);
        }
        t_max = (t_max * 2.0).min(auto.t_cap);
    }
}

/// Physical scales for the pulse-duration check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalUnits {
    pub mass_kg: f64,
    pub spacing_m: f64,
    /// energy unit `U` in joules; simulation times are in `hbar / U`
    pub energy_unit_j: f64,
}

impl PhysicalUnits {
    /// `2 m d^2 / (pi^2 hbar)` in seconds.
    pub fn max_pulse_duration_s(&self) -> f64 {
        2.0 * self.mass_kg * self.spacing_m * self.spacing_m / (PI * PI * HBAR_SI)
    }

    pub fn to_seconds(&self, t: f64) -> f64 {
        t * HBAR_SI / self.energy_unit_j
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ImprintMode {
    /// instantaneous `exp(-i (pi + phase_error) sum_j j n_j)`
    Ideal,
    /// evolve under the lattice Hamiltonian plus `f_pulse * D_tilt` for `tau`
    Pulsed {
        f_pulse: f64,
        tau: f64,
        /// when false, hopping and interaction are switched off during the pulse
        lattice_active: bool,
    },
}

/// The full experimental sequence: forward evolution, imprint, evolution
/// with the Feshbach-flipped interaction, overlap.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceSpec {
    pub j: f64,
    pub u: f64,
    pub f_background: f64,
    pub imprint: ImprintMode,
    /// extra phase per site in the ideal imprint
    pub phase_error: f64,
    /// backward interaction is `-U + delta_u`
    pub delta_u: f64,
    /// Overlap with `P(pi) psi0` instead of `psi0`. The imprint maps a state
    /// that is not a Fock state onto `P(pi) psi0` even for a perfect reversal.
    pub compare_to_imprinted: bool,
    pub physical: Option<PhysicalUnits>,
}

impl SequenceSpec {
    pub fn ideal(j: f64, u: f64) -> Self {
        Self {
            j,
            u,
            f_background: 0.0,
            imprint: ImprintMode::Ideal,
            phase_error: 0.0,
            delta_u: 0.0,
            compare_to_imprinted: false,
            physical: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.j, self.u, self.f_background, self.phase_error, self.delta_u];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite sequence parameter".into()));
        }
        if let ImprintMode::Pulsed { f_pulse, tau, .. } = self.imprint {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::InvalidParameter(format!("pulse duration must be positive, got {tau}")));
            }
            if !f_pulse.is_finite() {
                return Err(Error::InvalidParameter("non-finite pulse strength".into()));
            }
        }
        Ok(())
    }

    /// Informational notes; none of them stop the run.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let ImprintMode::Pulsed { f_pulse, tau, .. } = self.imprint {
            let area = f_pulse * tau;
            if (area - PI).abs() > 1e-9 {
                out.push(format!("pulse area F*tau = {area} differs from pi"));
            }
            if let Some(units) = self.physical {
                let tau_s = units.to_seconds(tau);
                let bound = units.max_pulse_duration_s();
                if tau_s >= bound {
                    out.push(format!(
                        "pulse duration {tau_s:e} s reaches the intra-well bound 2md^2/(pi^2 hbar) = {bound:e} s"
                    ));
                }
            }
        }
        out
    }
}

/// Echo of the pulsed experimental sequence at every grid time.
pub fn sequence_echo(
    ops: &BhmOperators,
    psi0: &StateVector,
    seq: &SequenceSpec,
    grid: &[f64],
    cfg: &PropagatorConfig,
) -> Result<EchoCurve> {
    seq.validate()?;
    let h_fwd = ops.hamiltonian(BhmParams { j: seq.j, u: seq.u, f: seq.f_background });
    let h_back = ops.hamiltonian(BhmParams { j: seq.j, u: -seq.u + seq.delta_u, f: seq.f_background });
    check_initial(psi0, &h_fwd)?;
    let reference = if seq.compare_to_imprinted { ops.imprint(PI).apply(psi0)? } else { psi0.clone() };

    let (fidelity, raw) = match seq.imprint {
        ImprintMode::Ideal => {
            let p: DiagonalUnitary = ops.imprint(PI + seq.phase_error);
            co_propagate(psi0, &reference, &h_fwd, &h_back, grid, cfg, |s| p.apply(s))?
        }
        ImprintMode::Pulsed { f_pulse, tau, lattice_active } => {
            let (j, u) = if lattice_active { (seq.j, seq.u) } else { (0.0, 0.0) };
            let h_pulse = ops.hamiltonian(BhmParams { j, u, f: seq.f_background + f_pulse });
            co_propagate(psi0, &reference, &h_fwd, &h_back, grid, cfg, |s| evolve(&h_pulse, s, tau, cfg))?
        }
    };

    let mut metadata: Vec<(String, String)> = vec![
        ("protocol".into(), "sequence".into()),
        ("J".into(), seq.j.to_string()),
        ("U".into(), seq.u.to_string()),
        ("F_background".into(), seq.f_background.to_string()),
        ("delta_U".into(), seq.delta_u.to_string()),
        ("phase_error".into(), seq.phase_error.to_string()),
        ("compare_to_imprinted".into(), seq.compare_to_imprinted.to_string()),
    ];
    match seq.imprint {
        ImprintMode::Ideal => metadata.push(("imprint".into(), "ideal".into())),
        ImprintMode::Pulsed { f_pulse, tau, lattice_active } => {
            metadata.push(("imprint".into(), "pulsed".into()));
            metadata.push(("F_pulse".into(), f_pulse.to_string()));
            metadata.push(("tau".into(), tau.to_string()));
            metadata.push(("lattice_active_during_pulse".into(), lattice_active.to_string()));
        }
    }
    metadata.push(("krylov_dim".into(), cfg.krylov_dim.to_string()));
    metadata.push(("step_tolerance".into(), format!("{:e}", cfg.step_tolerance)));
    metadata.extend(seq.warnings().into_iter().map(|w| ("warning".to_string(), w)));
    Ok(EchoCurve { times: grid.to_vec(), fidelity, raw, metadata })
}
