//! Decay-rate fits, the short-time variance estimate, closed-form decay
//! laws, the critical-point scan and the Feshbach scattering-length helper.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::basis::{FockBasis, LatticeSpec, DEFAULT_DIMENSION_CAP};
use crate::echo::{echo_curve, uniform_grid, EchoCurve, Scenario, ScenarioKind};
use crate::error::{Error, Result};
use crate::operators::{BhmOperators, BhmParams, HermitianOperator};
use crate::propagator::PropagatorConfig;
use crate::spectra::{ground_state, EigConfig};
use crate::state::StateVector;

/// Thermodynamic-limit transition point of the 1-D chain at unit filling,
/// in units of `U`. Printed as a reference marker with every scan.
pub const THERMODYNAMIC_CRITICAL_J: f64 = 0.52;

pub const GAUSSIAN_SHOULDER: f64 = 0.8;
pub const QUARTIC_SHOULDER: f64 = 0.95;
pub const MIN_FIT_POINTS: usize = 8;

// fitted parameters this far below zero are treated as zero
const NEGATIVE_SLACK: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayModel {
    /// `f = exp(-alpha t^2)`, fitted as `-ln f` against `t^2`
    Gaussian,
    /// `f = 1 - c t^4`, fitted as `1 - f` against `t^4`
    Quartic,
}

impl fmt::Display for DecayModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::Quartic => "quartic",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WindowPolicy {
    /// leading run of points above the model's shoulder threshold
    /// ([`GAUSSIAN_SHOULDER`] or [`QUARTIC_SHOULDER`])
    Shoulder,
    /// leading run of points with `f >= threshold`
    FidelityAbove(f64),
    /// every point with `t_lo <= t <= t_hi`
    TimeRange { t_lo: f64, t_hi: f64 },
}

impl fmt::Display for WindowPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Shoulder => write!(f, "shoulder"),
            Self::FidelityAbove(x) => write!(f, "f>={x}"),
            Self::TimeRange { t_lo, t_hi } => write!(f, "t in [{t_lo},{t_hi}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub model: DecayModel,
    /// `alpha` or `c`
    pub parameter: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    /// rms residual of the linearized model
    pub rms_residual: f64,
    /// points with `t > 0` inside the window
    pub points: usize,
}

/// Least squares through the origin of the linearized decay model.
pub fn fit_decay(curve: &EchoCurve, model: DecayModel, policy: WindowPolicy) -> Result<DecayFit> {
    let selected: Vec<(f64, f64)> = match policy {
        WindowPolicy::Shoulder | WindowPolicy::FidelityAbove(_) => {
            let threshold = match (policy, model) {
                (WindowPolicy::FidelityAbove(x), _) => x,
                (_, DecayModel::Gaussian) => GAUSSIAN_SHOULDER,
                (_, DecayModel::Quartic) => QUARTIC_SHOULDER,
            };
            curve
                .times
                .iter()
                .zip(&curve.fidelity)
                .take_while(|(_, &f)| f >= threshold)
                .map(|(&t, &f)| (t, f))
                .collect()
        }
        WindowPolicy::TimeRange { t_lo, t_hi } => curve
            .times
            .iter()
            .zip(&curve.fidelity)
            .filter(|(&t, &f)| t >= t_lo && t <= t_hi && f > 0.0)
            .map(|(&t, &f)| (t, f))
            .collect(),
    };
    let usable: Vec<(f64, f64)> = selected.iter().copied().filter(|&(t, _)| t > 0.0).collect();
    if usable.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!("{} usable points in window '{policy}', need {MIN_FIT_POINTS}", usable.len())));
    }
    let xy: Vec<(f64, f64)> = usable
        .iter()
        .map(|&(t, f)| match model {
            DecayModel::Gaussian => (t * t, -f.ln()),
            DecayModel::Quartic => (t.powi(4), 1.0 - f),
        })
        .collect();
    let sxx: f64 = xy.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = xy.iter().map(|(x, y)| x * y).sum();
    let mut p = sxy / sxx;
    if p < 0.0 {
        if p < -NEGATIVE_SLACK {
            return Err(Error::Fit(format!("negative {model} parameter {p:e}")));
        }
        p = 0.0;
    }
    let rms = (xy.iter().map(|(x, y)| (y - p * x).powi(2)).sum::<f64>() / xy.len() as f64).sqrt();
    Ok(DecayFit {
        model,
        parameter: p,
        t_lo: selected.first().map_or(0.0, |s| s.0),
        t_hi: usable.last().map_or(0.0, |s| s.0),
        rms_residual: rms,
        points: usable.len(),
    })
}

/// Least-squares slope of `ln(1 - f)` against `ln t` for `t_lo <= t <= t_hi`.
pub fn loglog_slope(curve: &EchoCurve, t_lo: f64, t_hi: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = curve
        .times
        .iter()
        .zip(&curve.raw)
        .filter(|(&t, &f)| t > 0.0 && t >= t_lo && t <= t_hi && 1.0 - f > 0.0)
        .map(|(&t, &f)| (t.ln(), (1.0 - f).ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Fit(format!("{} points with 1 - f > 0 in [{t_lo}, {t_hi}]", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// `<A^2> - <A>^2` in `psi` (one sparse product).
pub fn variance(psi: &StateVector, a: &HermitianOperator) -> Result<f64> {
    let a_psi = a.apply(psi)?;
    let mean = psi.inner(&a_psi)?.re;
    Ok((a_psi.norm().powi(2) - mean * mean).max(0.0))
}

/// Second-order decay rate `Var_psi0(H_f + H_b)`.
pub fn variance_oracle(psi0: &StateVector, scenario: &Scenario) -> Result<f64> {
    variance(psi0, &scenario.perturbation())
}

/// Closed-form decay laws.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PredictionKind {
    /// `1 - J^2 dU^2 t^4`, for `t << 1/sqrt(J dU)`
    DeltaU { j: f64, delta_u: f64 },
    /// `1 - dJ^2 t^2`, for `t << 1/dJ`
    DeltaJ { delta_j: f64 },
    /// `1 - (2 F J)^2 t^4` with `F = m g d`, for `t << 1/sqrt(2 F J)`
    Gravity { f: f64, j: f64 },
    /// `exp(-beta dU^2 t^2)`, for `t >~ 1/J`
    GaussianCrossover { beta: f64, delta_u: f64, j: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub value: f64,
    /// the formula applies for `valid_from <= t <= valid_until`
    pub valid_from: f64,
    pub valid_until: f64,
    pub in_window: bool,
}

fn inv_sqrt(x: f64) -> f64 {
    if x == 0.0 {
        f64::INFINITY
    } else {
        1.0 / x.abs().sqrt()
    }
}

pub fn perturbative_prediction(kind: PredictionKind, t: f64) -> Prediction {
    let (value, valid_from, valid_until) = match kind {
        PredictionKind::DeltaU { j, delta_u } => {
            (1.0 - j * j * delta_u * delta_u * t.powi(4), 0.0, inv_sqrt(j * delta_u))
        }
        PredictionKind::DeltaJ { delta_j } => {
            let until = if delta_j == 0.0 { f64::INFINITY } else { 1.0 / delta_j.abs() };
            (1.0 - delta_j * delta_j * t * t, 0.0, until)
        }
        PredictionKind::Gravity { f, j } => (1.0 - (2.0 * f * j).powi(2) * t.powi(4), 0.0, inv_sqrt(2.0 * f * j)),
        PredictionKind::GaussianCrossover { beta, delta_u, j } => {
            let from = if j == 0.0 { f64::INFINITY } else { 1.0 / j.abs() };
            ((-beta * delta_u * delta_u * t * t).exp(), from, f64::INFINITY)
        }
    };
    Prediction { value, valid_from, valid_until, in_window: t >= valid_from && t <= valid_until }
}

/// Parameters of a single-resonance scattering length
/// `a_s(B) = a_bg (1 - dB / (B - B0))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeshbachParams {
    pub a_bg: f64,
    pub b0: f64,
    pub delta_b: f64,
}

impl FeshbachParams {
    pub fn new(a_bg: f64, b0: f64, delta_b: f64) -> Result<Self> {
        if delta_b == 0.0 || !(a_bg.is_finite() && b0.is_finite() && delta_b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Feshbach parameters need finite values and a nonzero width (a_bg={a_bg}, B0={b0}, dB={delta_b})"
            )));
        }
        Ok(Self { a_bg, b0, delta_b })
    }

    /// Pole guard of `1e-6 |dB|`.
    pub fn scattering_length(&self, b: f64) -> Result<f64> {
        self.scattering_length_guarded(b, 1e-6 * self.delta_b.abs())
    }

    pub fn scattering_length_guarded(&self, b: f64, guard: f64) -> Result<f64> {
        if (b - self.b0).abs() < guard || b == self.b0 {
            return Err(Error::FeshbachPole { b, b0: self.b0, guard });
        }
        Ok(self.a_bg * (1.0 - self.delta_b / (b - self.b0)))
    }

    /// Field at which the scattering length equals `a`.
    pub fn field_for(&self, a: f64) -> Result<f64> {
        let denom = 1.0 - a / self.a_bg;
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::InvalidParameter(format!("a_s = {a} is only reached asymptotically")));
        }
        Ok(self.b0 + self.delta_b / denom)
    }
}

/// Inputs of a decay-rate scan across the hopping `J` at fixed `dJ`.
#[derive(Clone, Debug)]
pub struct ScanConfig {
    pub n_sites: usize,
    pub n_bosons: usize,
    /// uniform, ascending, in units of `U`
    pub j_grid: Vec<f64>,
    pub delta_j: f64,
    pub u: f64,
    /// short-time echo grid `[0, t_max]`
    pub t_max: f64,
    pub time_points: usize,
    pub window: WindowPolicy,
    pub compute_gap: bool,
    pub eig: EigConfig,
    pub propagator: PropagatorConfig,
    pub basis_cap: usize,
}

impl ScanConfig {
    pub fn unit_filling(n_sites: usize, j_grid: Vec<f64>, delta_j: f64) -> Self {
        Self {
            n_sites,
            n_bosons: n_sites,
            j_grid,
            delta_j,
            u: 1.0,
            t_max: 0.05,
            time_points: 51,
            window: WindowPolicy::Shoulder,
            compute_gap: true,
            eig: EigConfig::default(),
            propagator: PropagatorConfig::default(),
            basis_cap: DEFAULT_DIMENSION_CAP,
        }
    }

    /// `points` values `start, start + step, ...`
    pub fn grid(start: f64, step: f64, points: usize) -> Vec<f64> {
        (0..points).map(|i| start + step * i as f64).collect()
    }

    fn grid_step(&self) -> Result<f64> {
        let g = &self.j_grid;
        if g.len() < 3 {
            return Err(Error::InvalidParameter("J grid needs at least 3 points".into()));
        }
        let h = g[1] - g[0];
        if h.is_nan() || h <= 0.0 {
            return Err(Error::InvalidParameter("J grid must be ascending".into()));
        }
        if g.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
            return Err(Error::InvalidParameter("J grid must be uniform".into()));
        }
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid_step()?;
        if !(self.delta_j.is_finite() && self.u.is_finite() && self.t_max > 0.0) {
            return Err(Error::InvalidParameter("scan needs finite dJ, U and t_max > 0".into()));
        }
        if self.time_points < MIN_FIT_POINTS + 1 {
            return Err(Error::InvalidParameter(format!("scan needs at least {} time points", MIN_FIT_POINTS + 1)));
        }
        self.propagator.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PointStatus {
    Ok,
    Failed(String),
}

#[derive(Clone, Debug)]
pub struct ScanPoint {
    pub j: f64,
    pub alpha: Option<f64>,
    /// `Var_gs(dJ T)`
    pub alpha_oracle: Option<f64>,
    pub gap: Option<f64>,
    pub fit_residual: Option<f64>,
    pub degenerate: bool,
    pub status: PointStatus,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativePeak {
    /// refined location in units of `U`
    pub j: f64,
    /// refined `|d alpha / dJ|`
    pub height: f64,
    /// signed derivative at the grid maximum
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct CriticalScan {
    pub config: ScanConfig,
    pub points: Vec<ScanPoint>,
    /// fitted `alpha` at `J = 0`
    pub alpha0: Option<f64>,
    /// `alpha / alpha0`
    pub normalized: Vec<Option<f64>>,
    /// central differences; entry `i` belongs to `j_grid[i + 1]`
    pub derivative: Vec<Option<f64>>,
    pub peak: Option<DerivativePeak>,
}

impl CriticalScan {
    /// Second-order value `4 (N - 1) dJ^2` for the Mott state.
    pub fn oracle_alpha0(&self) -> f64 {
        4.0 * (self.config.n_sites as f64 - 1.0) * self.config.delta_j.powi(2)
    }

    /// The bare `(N - 1) dJ^2` normalization, a factor of 4 below
    /// [`CriticalScan::oracle_alpha0`].
    pub fn nominal_alpha0(&self) -> f64 {
        (self.config.n_sites as f64 - 1.0) * self.config.delta_j.powi(2)
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.status != PointStatus::Ok).count()
    }

    pub fn metadata(&self) -> Vec<(String, String)> {
        let c = &self.config;
        let mut m: Vec<(String, String)> = vec![
            ("protocol".into(), "scan-critical".into()),
            ("N".into(), c.n_sites.to_string()),
            ("M".into(), c.n_bosons.to_string()),
            ("delta_J".into(), c.delta_j.to_string()),
            ("U".into(), c.u.to_string()),
            (
                "J_grid".into(),
                format!(
                    "{}..{} ({} points)",
                    c.j_grid.first().copied().unwrap_or(0.0),
                    c.j_grid.last().copied().unwrap_or(0.0),
                    c.j_grid.len()
                ),
            ),
            ("fit_model".into(), "gaussian".into()),
            ("window_policy".into(), c.window.to_string()),
            ("t_max".into(), c.t_max.to_string()),
            ("time_points".into(), c.time_points.to_string()),
            ("thermodynamic_Jc".into(), THERMODYNAMIC_CRITICAL_J.to_string()),
            ("alpha0_fit".into(), self.alpha0.map_or("nan".into(), |a| format!("{a:.10e}"))),
            ("alpha0_oracle_4(N-1)dJ^2".into(), format!("{:.10e}", self.oracle_alpha0())),
            ("alpha0_nominal_(N-1)dJ^2".into(), format!("{:.10e}", self.nominal_alpha0())),
        ];
        if let Some(a0) = self.alpha0 {
            m.push(("alpha0_fit_over_nominal".into(), format!("{:.6}", a0 / self.nominal_alpha0())));
        }
        if let Some(p) = self.peak {
            m.push(("peak_J".into(), format!("{:.6}", p.j)));
            m.push(("peak_abs_dalpha_dJ".into(), format!("{:.10e}", p.height)));
        }
        m.push(("failed_points".into(), self.failures().to_string()));
        m
    }

    /// `J,alpha_raw,alpha_normalized,dalpha_dJ,gap,fit_residual,status`
    pub fn write_csv<W: Write>(&self, mut w: W, extra: &[(String, String)]) -> std::io::Result<()> {
        for (k, v) in self.metadata().iter().chain(extra) {
            writeln!(w, "# {k}={v}")?;
        }
        self.write_rows(w)
    }

    pub fn write_rows<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.12e}"));
        writeln!(w, "J,alpha_raw,alpha_normalized,dalpha_dJ,gap,fit_residual,status")?;
        let n = self.points.len();
        for (i, p) in self.points.iter().enumerate() {
            let d = if i == 0 || i + 1 == n { None } else { self.derivative[i - 1] };
            let status = match &p.status {
                PointStatus::Ok if p.degenerate => "ok;degenerate".to_string(),
                PointStatus::Ok => "ok".to_string(),
                PointStatus::Failed(msg) => format!("failed: {}", msg.replace([',', '\n'], ";")),
            };
            writeln!(
                w,
                "{:.6},{},{},{},{},{},{}",
                p.j,
                opt(p.alpha),
                opt(self.normalized[i]),
                opt(d),
                opt(p.gap),
                opt(p.fit_residual),
                status
            )?;
        }
        Ok(())
    }
}

fn scan_point(ops: &BhmOperators, cfg: &ScanConfig, j: f64) -> ScanPoint {
    let mut point = ScanPoint {
        j,
        alpha: None,
        alpha_oracle: None,
        gap: None,
        fit_residual: None,
        degenerate: false,
        status: PointStatus::Ok,
    };
    let run = |point: &mut ScanPoint| -> Result<()> {
        let h = ops.hamiltonian(BhmParams::hubbard(j, cfg.u));
        let gs = ground_state(&h, &cfg.eig)?;
        point.degenerate = gs.degenerate;
        if cfg.compute_gap {
            point.gap = gs.gap();
        }
        let scenario = Scenario::new(ops, ScenarioKind::DeltaJSymmetric, j, cfg.u, cfg.delta_j)?;
        point.alpha_oracle = Some(variance_oracle(&gs.state, &scenario)?);
        let curve = echo_curve(&gs.state, &scenario, &uniform_grid(cfg.t_max, cfg.time_points), &cfg.propagator)?;
        let fit = fit_decay(&curve, DecayModel::Gaussian, cfg.window)?;
        point.alpha = Some(fit.parameter);
        point.fit_residual = Some(fit.rms_residual);
        Ok(())
    };
    if let Err(e) = run(&mut point) {
        point.status = PointStatus::Failed(e.to_string());
    }
    point
}

/// Ground state at each `J`, symmetric `J -/+ dJ/2` echo, gaussian fit of
/// the initial decay, then normalization, central differences and the peak
/// of `|d alpha / dJ|`. Grid points run in parallel on the current rayon
/// pool; failures are recorded per point.
pub fn critical_scan(cfg: &ScanConfig) -> Result<CriticalScan> {
    cfg.validate()?;
    let step = cfg.grid_step()?;
    let spec = LatticeSpec::new(cfg.n_sites, cfg.n_bosons)?;
    let ops = BhmOperators::new(FockBasis::with_cap(spec, cfg.basis_cap)?);

    let points: Vec<ScanPoint> = cfg.j_grid.par_iter().map(|&j| scan_point(&ops, cfg, j)).collect();

    let alpha0 = match points.iter().find(|p| p.j == 0.0) {
        Some(p) => p.alpha,
        None => scan_point(&ops, cfg, 0.0).alpha,
    };
    let normalized = points.iter().map(|p| Some(p.alpha? / alpha0?)).collect();
    let derivative: Vec<Option<f64>> =
        points.windows(3).map(|w| Some((w[2].alpha? - w[0].alpha?) / (2.0 * step))).collect();
    let peak = find_peak(&cfg.j_grid, &derivative, step);

    Ok(CriticalScan { config: cfg.clone(), points, alpha0, normalized, derivative, peak })
}

/// Argmax of `|d|` refined by a parabola through its neighbours.
fn find_peak(grid: &[f64], derivative: &[Option<f64>], step: f64) -> Option<DerivativePeak> {
    let (i, value) = derivative
        .iter()
        .enumerate()
        .filter_map(|(i, d)| d.map(|d| (i, d)))
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))?;
    let x = grid[i + 1];
    let y1 = value.abs();
    let neighbours = (i > 0).then(|| derivative[i - 1]).flatten().zip(derivative.get(i + 1).copied().flatten());
    let (j, height) = match neighbours {
        Some((a, b)) => {
            let (y0, y2) = (a.abs(), b.abs());
            let curv = y0 - 2.0 * y1 + y2;
            if curv < 0.0 {
                let delta = 0.5 * (y0 - y2) / curv;
                (x + delta * step, y1 - 0.25 * (y0 - y2) * delta)
            } else {
                (x, y1)
            }
        }
        None => (x, y1),
    };
    Some(DerivativePeak { j, height, value })
}
