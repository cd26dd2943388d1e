use std::io::Write;

use bhecho::echo::FIDELITY_SLACK;
use bhecho::spectra::{dense_spectrum, DEGENERACY_TOL};
use bhecho::{
    auto_time_grid, critical_scan, echo_curve, fit_decay, ground_state, loglog_slope, low_spectrum,
    perturbative_prediction, sequence_echo, spacing_ratio, variance_oracle, BhmOperators, BhmParams, EchoCurve,
    FockBasis, FockState, PointStatus, ScanConfig, Scenario, ScenarioKind, StateVector,
};
use serde_json::{json, Map, Value};

use crate::config::{InitialState, RunConfig};
use crate::error::CliError;
use crate::output::{Context, OutputFile};
use crate::{Job, JobReport};

fn echo_file(label: &str) -> String {
    format!("echo_{label}.csv")
}

fn scan_file(n: usize) -> String {
    format!("scan_N{n}.csv")
}

/// File names a job will write (the manifest comes on top).
pub fn planned_outputs(job: Job, cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    Ok(match job {
        Job::EchoCurve => {
            let scenarios = cfg.scenarios.as_deref().unwrap_or_default();
            let mut names: Vec<String> = scenarios.iter().map(|s| echo_file(s.label())).collect();
            names.push("echo_combined.csv".into());
            names
        }
        Job::Sequence => vec!["sequence.csv".into()],
        Job::ScanCritical => cfg.scan.iter().flat_map(|s| s.sizes.iter().map(|&n| scan_file(n))).collect(),
        Job::Spectrum => vec!["spectrum.csv".into()],
        Job::Predict => {
            let mut names = Vec::new();
            if let Some(p) = &cfg.predict {
                if !p.laws.is_empty() {
                    names.push("prediction.csv".into());
                }
                if p.feshbach.is_some() {
                    names.push("feshbach.csv".into());
                }
            }
            names
        }
    })
}

pub fn run(job: Job, cfg: &RunConfig, ctx: &Context) -> Result<JobReport, CliError> {
    match job {
        Job::EchoCurve => echo_job(cfg, ctx),
        Job::Sequence => sequence_job(cfg, ctx),
        Job::ScanCritical => scan_job(cfg, ctx),
        Job::Spectrum => spectrum_job(cfg, ctx),
        Job::Predict => predict_job(cfg, ctx),
    }
}

fn tolerances(cfg: &RunConfig) -> Value {
    let p = cfg.propagator;
    let e = cfg.eigensolver;
    json!({
        "propagator": { "krylov_dim": p.krylov_dim, "step_tolerance": p.step_tolerance, "max_substeps": p.max_substeps },
        "eigensolver": {
            "method": e.method, "tol": e.tol, "max_krylov": e.max_krylov,
            "max_restarts": e.max_restarts, "dense_limit": e.dense_limit, "seed": cfg.seed,
        },
        "fidelity_slack": FIDELITY_SLACK,
        "degeneracy_tol": DEGENERACY_TOL,
    })
}

fn operators(cfg: &RunConfig) -> Result<BhmOperators, CliError> {
    let spec = cfg.lattice_spec()?;
    let cap = cfg.lattice()?.max_dimension;
    Ok(BhmOperators::new(FockBasis::with_cap(spec, cap)?))
}

fn rows(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    write(&mut buf).expect("writing to memory");
    buf
}

fn sci(x: f64) -> String {
    format!("{x:.10e}")
}

/// Initial states, with the ground state computed at most once.
struct Preparer<'a> {
    ops: &'a BhmOperators,
    params: BhmParams,
    cfg: &'a RunConfig,
    ground: Option<(StateVector, Value)>,
}

impl<'a> Preparer<'a> {
    fn new(ops: &'a BhmOperators, params: BhmParams, cfg: &'a RunConfig) -> Self {
        Self { ops, params, cfg, ground: None }
    }

    fn prepare(&mut self, init: &InitialState, warnings: &mut Vec<String>) -> Result<(StateVector, Value), CliError> {
        Ok(match init {
            InitialState::Mott => (StateVector::mott(self.ops.basis())?, json!({ "kind": "mott" })),
            InitialState::Fock { occupations } => (
                StateVector::fock(self.ops.basis(), &FockState::new(occupations.clone()))?,
                json!({ "kind": "fock", "occupations": occupations }),
            ),
            InitialState::GroundState => {
                if self.ground.is_none() {
                    let h = self.ops.hamiltonian(self.params);
                    let gs = ground_state(&h, &self.cfg.eig_config())?;
                    if gs.degenerate {
                        warnings.push(format!(
                            "ground state at J={} U={} F={} is degenerate; an arbitrary vector of the manifold is used",
                            self.params.j, self.params.u, self.params.f
                        ));
                    }
                    let info = json!({
                        "kind": "ground_state",
                        "energy": gs.energy,
                        "residual": gs.residual,
                        "gap": gs.gap(),
                        "degenerate": gs.degenerate,
                        "hamiltonian": { "j": self.params.j, "u": self.params.u, "f": self.params.f },
                    });
                    self.ground = Some((gs.state, info));
                }
                self.ground.clone().expect("just computed")
            }
        })
    }
}

fn curve_meta(curve: &EchoCurve, extra: &[(&str, String)]) -> Vec<(String, String)> {
    let mut meta = curve.metadata.clone();
    meta.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
    meta
}

fn echo_job(cfg: &RunConfig, ctx: &Context) -> Result<JobReport, CliError> {
    let ops = operators(cfg)?;
    let h = cfg.hamiltonian.expect("validated");
    let prop = cfg.propagator.to_config();
    let mut warnings = Vec::new();
    let mut prep = Preparer::new(&ops, BhmParams::new(h.j, h.u, h.f)?, cfg);
    let mut files = Vec::new();
    let mut combined = b"scenario,t,f\n".to_vec();
    let mut results = Map::new();

    for s in cfg.scenarios.as_deref().unwrap_or_default() {
        let kind: ScenarioKind = s.kind.parse()?;
        let scenario = Scenario::new(&ops, kind, h.j, h.u, s.magnitude)?;
        let init = s.initial_state.as_ref().or(cfg.initial_state.as_ref()).expect("validated");
        let (psi, init_info) = prep.prepare(init, &mut warnings)?;
        let grid = match cfg.time_grid.as_ref().expect("validated").grid() {
            Some(g) => g,
            None => {
                let auto = cfg.time_grid.as_ref().and_then(|g| g.auto()).expect("auto grid");
                auto_time_grid(&auto, |g| echo_curve(&psi, &scenario, g, &prop))?
            }
        };
        let curve = echo_curve(&psi, &scenario, &grid, &prop)?;
        let oracle = variance_oracle(&psi, &scenario)?;
        let label = s.label().to_string();

        let mut extra =
            vec![("label", label.clone()), ("initial_state", init_info.to_string()), ("variance_oracle", sci(oracle))];
        let mut entry = json!({
            "file": echo_file(&label),
            "scenario": kind.as_str(),
            "magnitude": s.magnitude,
            "initial_state": init_info,
            "variance_oracle": oracle,
            "points": curve.len(),
            "t_max": grid.last().copied().unwrap_or(0.0),
            "min_fidelity": curve.fidelity.iter().copied().fold(1.0, f64::min),
        });
        if let Some(fit) = cfg.fit.as_ref() {
            if let Some(d) = fit.decay {
                match fit_decay(&curve, d.model.into(), d.window.into()) {
                    Ok(f) => {
                        extra.push((
                            "fit",
                            format!(
                                "{} parameter={} window=[{},{}] rms={:e} points={}",
                                f.model,
                                sci(f.parameter),
                                f.t_lo,
                                f.t_hi,
                                f.rms_residual,
                                f.points
                            ),
                        ));
                        entry["fit"] = json!({
                            "model": f.model.to_string(), "parameter": f.parameter, "t_lo": f.t_lo,
                            "t_hi": f.t_hi, "rms_residual": f.rms_residual, "points": f.points,
                            "window_policy": bhecho::WindowPolicy::from(d.window).to_string(),
                        });
                    }
                    Err(e) => {
                        warnings.push(format!("{label}: {e}"));
                        entry["fit"] = json!({ "error": e.to_string() });
                    }
                }
            }
            if let Some(w) = fit.slope {
                match loglog_slope(&curve, w.t_lo, w.t_hi) {
                    Ok(p) => {
                        extra.push(("loglog_slope", format!("{p:.6} over [{},{}]", w.t_lo, w.t_hi)));
                        entry["loglog_slope"] = json!({ "value": p, "t_lo": w.t_lo, "t_hi": w.t_hi });
                    }
                    Err(e) => {
                        warnings.push(format!("{label}: {e}"));
                        entry["loglog_slope"] = json!({ "error": e.to_string() });
                    }
                }
            }
        }
        warnings.extend(curve.warnings().map(|w| format!("{label}: {w}")));
        for (t, f) in curve.times.iter().zip(&curve.fidelity) {
            writeln!(combined, "{label},{t:.10e},{f:.16e}").expect("writing to memory");
        }
        files.push(OutputFile {
            name: echo_file(&label),
            meta: curve_meta(&curve, &extra),
            rows: rows(|w| curve.write_rows(w)),
        });
        results.insert(label, entry);
    }
    files.push(OutputFile {
        name: "echo_combined.csv".into(),
        meta: vec![("layout".into(), "long format, one row per (scenario, t)".into())],
        rows: combined,
    });
    ctx.finish(files, json!({ "curves": results }), tolerances(cfg), warnings, false)
}

fn sequence_job(cfg: &RunConfig, ctx: &Context) -> Result<JobReport, CliError> {
    let ops = operators(cfg)?;
    let seq = cfg.sequence.as_ref().expect("validated");
    let spec = seq.to_spec();
    let params = match cfg.hamiltonian {
        Some(h) => BhmParams::new(h.j, h.u, h.f)?,
        None => BhmParams::new(seq.j, seq.u, seq.f_background)?,
    };
    let mut warnings = spec.warnings();
    let mut prep = Preparer::new(&ops, params, cfg);
    let (psi, init_info) = prep.prepare(cfg.initial_state.as_ref().expect("validated"), &mut warnings)?;
    let grid = cfg.time_grid.as_ref().and_then(|g| g.grid()).expect("validated");
    let curve = sequence_echo(&ops, &psi, &spec, &grid, &cfg.propagator.to_config())?;
    let meta = curve_meta(&curve, &[("initial_state", init_info.to_string())]);
    let results = json!({
        "initial_state": init_info,
        "points": curve.len(),
        "final_fidelity": curve.fidelity.last(),
        "min_fidelity": curve.fidelity.iter().copied().fold(1.0, f64::min),
        "max_pulse_duration_s": spec.physical.map(|p| p.max_pulse_duration_s()),
    });
    let files = vec![OutputFile { name: "sequence.csv".into(), meta, rows: rows(|w| curve.write_rows(w)) }];
    ctx.finish(files, results, tolerances(cfg), warnings, false)
}

fn scan_job(cfg: &RunConfig, ctx: &Context) -> Result<JobReport, CliError> {
    let s = cfg.scan.as_ref().expect("validated");
    let cap = cfg.lattice.as_ref().map_or(bhecho::basis::DEFAULT_DIMENSION_CAP, |l| l.max_dimension);
    let mut files = Vec::new();
    let mut results = Map::new();
    let mut warnings = Vec::new();
    let mut partial = false;
    for &n in &s.sizes {
        let sc = ScanConfig {
            n_sites: n,
            n_bosons: n,
            j_grid: s.j_grid(),
            delta_j: s.delta_j,
            u: s.u,
            t_max: s.t_max,
            time_points: s.time_points,
            window: s.window.into(),
            compute_gap: s.compute_gap,
            eig: cfg.eig_config(),
            propagator: cfg.propagator.to_config(),
            basis_cap: cap,
        };
        let scan = critical_scan(&sc)?;
        let failures = scan.failures();
        if failures > 0 {
            partial = true;
            warnings.push(format!("N={n}: {failures} of {} grid points failed", scan.points.len()));
        }
        let points: Vec<Value> = scan
            .points
            .iter()
            .map(|p| {
                let status = match &p.status {
                    PointStatus::Ok => "ok".to_string(),
                    PointStatus::Failed(m) => format!("failed: {m}"),
                };
                json!({
                    "J": p.j, "status": status, "alpha": p.alpha, "alpha_oracle": p.alpha_oracle,
                    "gap": p.gap, "degenerate": p.degenerate,
                })
            })
            .collect();
        results.insert(
            format!("N{n}"),
            json!({
                "file": scan_file(n),
                "alpha0_fit": scan.alpha0,
                "alpha0_oracle": scan.oracle_alpha0(),
                "alpha0_nominal": scan.nominal_alpha0(),
                "peak": scan.peak.map(|p| json!({ "J": p.j, "abs_dalpha_dJ": p.height, "dalpha_dJ": p.value })),
                "thermodynamic_Jc": bhecho::THERMODYNAMIC_CRITICAL_J,
                "failed_points": failures,
                "points": points,
            }),
        );
        files.push(OutputFile { name: scan_file(n), meta: scan.metadata(), rows: rows(|w| scan.write_rows(w)) });
    }
    ctx.finish(files, json!({ "scans": results }), tolerances(cfg), warnings, partial)
}

fn spectrum_job(cfg: &RunConfig, ctx: &Context) -> Result<JobReport, CliError> {
    let ops = operators(cfg)?;
    let h = cfg.hamiltonian.expect("validated");
    let ham = ops.hamiltonian(BhmParams::new(h.j, h.u, h.f)?);
    let levels = cfg.spectrum.as_ref().and_then(|s| s.levels);
    let slice = match levels {
        Some(k) => low_spectrum(&ham, k, &cfg.eig_config())?,
        None => dense_spectrum(&ham, cfg.eigensolver.dense_limit)?,
    };
    let ratio = match spacing_ratio(&slice.eigenvalues) {
        Ok(r) => json!({ "mean": r.mean, "samples": r.samples, "degenerate_spacings": r.degenerate_spacings }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let meta = vec![
        ("J".into(), h.j.to_string()),
        ("U".into(), h.u.to_string()),
        ("F".into(), h.f.to_string()),
        ("dimension".into(), ops.basis().dim().to_string()),
        ("levels".into(), levels.map_or("all".into(), |k| k.to_string())),
        ("symmetry_sectors".into(), "not resolved".into()),
    ];
    let results = json!({
        "dimension": ops.basis().dim(),
        "levels": slice.len(),
        "ground_energy": slice.eigenvalues.first(),
        "gap": slice.gap(),
        "max_residual": slice.max_residual(),
        "spacing_ratio": ratio,
        "symmetry_sectors": "not resolved; the ratio mixes reflection sectors",
    });
    let files = vec![OutputFile { name: "spectrum.csv".into(), meta, rows: rows(|w| slice.write_csv(w)) }];
    ctx.finish(files, results, tolerances(cfg), Vec::new(), false)
}

fn predict_job(cfg: &RunConfig, ctx: &Context) -> Result<JobReport, CliError> {
    let p = cfg.predict.as_ref().expect("validated");
    let mut files = Vec::new();
    let mut results = Map::new();
    if !p.laws.is_empty() {
        let grid = cfg.time_grid.as_ref().and_then(|g| g.grid()).expect("validated");
        let mut buf = b"law,t,value,valid_from,valid_until,in_window\n".to_vec();
        let mut laws = Vec::new();
        for law in &p.laws {
            for &t in &grid {
                let pr = perturbative_prediction(law.kind(), t);
                writeln!(
                    buf,
                    "{},{t:.10e},{:.16e},{:.10e},{:.10e},{}",
                    law.name(),
                    pr.value,
                    pr.valid_from,
                    pr.valid_until,
                    pr.in_window
                )
                .expect("writing to memory");
            }
            laws.push(json!({ "law": law.name(), "parameters": law }));
        }
        results.insert("laws".into(), json!(laws));
        files.push(OutputFile { name: "prediction.csv".into(), meta: Vec::new(), rows: buf });
    }
    if let Some(f) = &p.feshbach {
        let params = f.params()?;
        let mut buf = b"B,a_s\n".to_vec();
        for &b in &f.fields {
            let a = params.scattering_length_guarded(b, f.guard_abs())?;
            writeln!(buf, "{b:.10e},{a:.16e}").expect("writing to memory");
        }
        let meta = vec![
            ("a_bg".into(), f.a_bg.to_string()),
            ("B0".into(), f.b0.to_string()),
            ("delta_B".into(), f.delta_b.to_string()),
            ("pole_guard".into(), format!("{:e}", f.guard_abs())),
        ];
        results.insert("feshbach".into(), json!({ "fields": f.fields.len(), "zero_crossing": f.b0 + f.delta_b }));
        files.push(OutputFile { name: "feshbach.csv".into(), meta, rows: buf });
    }
    ctx.finish(files, Value::Object(results), tolerances(cfg), Vec::new(), false)
}
