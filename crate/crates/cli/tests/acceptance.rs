//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned
//! below. Runs without the libtest harness so the lines are never captured.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use bhecho::echo::uniform_grid;
use bhecho::{
    echo_curve, evolve, fit_decay, ground_state, low_spectrum, spacing_ratio, variance_oracle, BhmOperators, BhmParams,
    DecayModel, EigConfig, EigMethod, FockBasis, HermitianOperator, LatticeSpec, PropagatorConfig, Scenario,
    ScenarioKind, StateVector, WindowPolicy,
};
use bhecho_cli::{data_rows, run_job, Job, JobArgs, MANIFEST};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde_json::Value;
use tempfile::TempDir;

// C1
const IDEAL_TOL: f64 = 1e-8;
const IDEAL_BUDGET: Duration = Duration::from_secs(30);
// C2
const CONJUGATION_TOL: f64 = 1e-12;
// C3, C4
const LEVEL_TOL: f64 = 1e-10;
// C5
const PROPAGATOR_TOL: f64 = 1e-9;
const NORM_DRIFT_TOL: f64 = 1e-9;
// C6
const SLOPE_TOL: f64 = 0.1;
const SLOPE_WINDOW: (f64, f64) = (0.01, 0.1);
const FIG1_BUDGET: Duration = Duration::from_secs(300);
// C7: the short-time grid the scan uses; the echo from the J=0 ground
// state saturates near 1, so only t << hbar/U probes the initial rate
const ORACLE_REL_TOL: f64 = 0.02;
const DELTA_J: f64 = 0.05;
const SHORT_T_MAX: f64 = 0.05;
const SHORT_POINTS: usize = 51;
// C8
const BETA_RANGE: (f64, f64) = (0.1, 10.0);
const LATE_WINDOW: (f64, f64) = (1.0, 3.0);
// C9
const PEAK_RANGE_N8: (f64, f64) = (0.2, 0.8);
const SCAN_BUDGET: Duration = Duration::from_secs(3600);
// C10
const POISSON_R: f64 = 0.386;
const GOE_R: f64 = 0.53;
const RATIO_TOL: f64 = 0.01;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ops(n: usize, m: usize) -> BhmOperators {
    BhmOperators::new(FockBasis::new(LatticeSpec::new(n, m).unwrap()).unwrap())
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run_cli(job: Job, config: &Path, out: &Path, threads: Option<usize>) -> Duration {
    let args = JobArgs { config: config.into(), out: out.into(), threads, overwrite: false, no_timestamp: true };
    let start = Instant::now();
    let report = run_job(job, &args).unwrap_or_else(|e| panic!("{job} failed: {e}"));
    assert_eq!(report.exit_code, 0, "{job} exit code");
    start.elapsed()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST)).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    data_rows(&fs::read_to_string(path).unwrap())
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn max_abs(a: &HermitianOperator) -> f64 {
    (0..a.dim()).flat_map(|i| a.row(i).map(|(_, v)| v.norm())).fold(0.0, f64::max)
}

fn ideal_echo_identity() -> Check {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let start = Instant::now();
        let o = ops(6, 6);
        let gs = ground_state(&o.hamiltonian(BhmParams::hubbard(1.0, 1.0)), &EigConfig::default()).unwrap();
        let s = Scenario::new(&o, ScenarioKind::Ideal, 1.0, 1.0, 0.0).unwrap();
        let grid = uniform_grid(10.0, 200);
        let curve = echo_curve(&gs.state, &s, &grid, &PropagatorConfig::default()).unwrap();
        let dev = curve.raw.iter().map(|f| (1.0 - f).abs()).fold(0.0, f64::max);
        let took = start.elapsed();
        ensure(curve.len() == 200, || "expected 200 points".into())?;
        ensure(dev <= IDEAL_TOL, || format!("max|1-f| = {dev:e} > {IDEAL_TOL:e}"))?;
        ensure(took <= IDEAL_BUDGET, || format!("took {took:?} > {IDEAL_BUDGET:?}"))?;
        Ok(format!("N=M=6 ground state, 200 points on [0,10]: max|1-f| = {dev:.2e} (tol {IDEAL_TOL:e}); {:.2}s single-threaded (limit 30s)", took.as_secs_f64()))
    })
}

fn imprint_conjugation() -> Check {
    let mut worst = 0.0f64;
    for n in [4usize, 6] {
        let o = ops(n, n);
        let p = o.imprint(PI);
        let conj = p.conjugate(o.hopping()).unwrap();
        let sum = HermitianOperator::linear_combination(&[(1.0, &conj), (1.0, o.hopping())], &[]).unwrap();
        let dev = max_abs(&sum);
        worst = worst.max(dev);
        ensure(dev <= CONJUGATION_TOL, || format!("({n},{n}): ||P T P^dag + T||_max = {dev:e}"))?;
        for (name, d) in [("interaction", o.interaction()), ("tilt", o.tilt())] {
            let op = d.to_operator();
            let c = p.conjugate(&op).unwrap();
            let diff = HermitianOperator::linear_combination(&[(1.0, &c), (-1.0, &op)], &[]).unwrap();
            let dev = max_abs(&diff);
            ensure(dev <= CONJUGATION_TOL, || format!("({n},{n}): {name} changed by {dev:e}"))?;
        }
    }
    Ok(format!("bases (4,4),(6,6): max ||P T P^dag + T|| = {worst:.1e} (tol {CONJUGATION_TOL:e}); interaction and tilt invariant"))
}

fn single_particle_band() -> Check {
    let mut worst = 0.0f64;
    for n in [3usize, 8] {
        let o = ops(n, 1);
        for method in [EigMethod::Dense, EigMethod::Lanczos] {
            let cfg = EigConfig { method, ..EigConfig::default() };
            let k = if method == EigMethod::Lanczos { n - 1 } else { n };
            let got = low_spectrum(&o.hamiltonian(BhmParams::hubbard(1.0, 1.0)), k, &cfg).unwrap();
            let mut want: Vec<f64> = (1..=n).map(|q| -2.0 * (q as f64 * PI / (n as f64 + 1.0)).cos()).collect();
            want.sort_by(f64::total_cmp);
            for (a, b) in got.eigenvalues.iter().zip(&want) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    ensure(worst <= LEVEL_TOL, || format!("max deviation {worst:e}"))?;
    Ok(format!(
        "M=1, N in {{3,8}}, dense and Lanczos: max |E - (-2J cos(n pi/(N+1)))| = {worst:.1e} (tol {LEVEL_TOL:e})"
    ))
}

fn closed_form_ground_state() -> Check {
    let o = ops(2, 2);
    let gs = ground_state(&o.hamiltonian(BhmParams::hubbard(1.0, 1.0)), &EigConfig::default()).unwrap();
    let exact = 1.0 - 5f64.sqrt();
    let de = (gs.energy - exact).abs();
    ensure(de <= LEVEL_TOL, || format!("E0 = {} vs {exact}", gs.energy))?;
    let mut gaps = Vec::new();
    for n in [4usize, 6] {
        let cfg = EigConfig { method: EigMethod::Lanczos, ..EigConfig::default() };
        let g = ground_state(&ops(n, n).hamiltonian(BhmParams::hubbard(0.0, 1.0)), &cfg).unwrap();
        let gap = g.gap().unwrap();
        ensure((gap - 2.0).abs() <= LEVEL_TOL && g.energy.abs() <= LEVEL_TOL, || format!("N={n}: gap {gap}"))?;
        gaps.push(gap);
    }
    Ok(format!("(2,2): |E0 - (1-sqrt5)| = {de:.1e}; J=0 unit filling N=4,6 gaps {gaps:?} = 2U (tol {LEVEL_TOL:e})"))
}

/// `exp(-i H t) psi` from a dense eigendecomposition.
fn dense_propagate(h: &HermitianOperator, psi: &[Complex64], t: f64) -> Vec<Complex64> {
    let n = h.dim();
    let m = DMatrix::from_fn(n, n, |i, j| h.get(i, j).re);
    let eig = SymmetricEigen::new(m);
    let v = &eig.eigenvectors;
    let c: Vec<Complex64> = (0..n)
        .map(|k| {
            (0..n).map(|i| psi[i] * v[(i, k)]).sum::<Complex64>() * Complex64::from_polar(1.0, -eig.eigenvalues[k] * t)
        })
        .collect();
    (0..n).map(|i| (0..n).map(|k| c[k] * v[(i, k)]).sum()).collect()
}

fn propagator_cross_check() -> Check {
    let o = ops(4, 4);
    let h = o.hamiltonian(BhmParams::new(1.0, 1.0, 0.1).unwrap());
    let amps: Vec<Complex64> =
        (0..o.basis().dim()).map(|i| Complex64::new((0.37 * i as f64).sin() + 0.2, (0.91 * i as f64).cos())).collect();
    let mut psi = StateVector::from_amplitudes(o.tag(), amps);
    psi.normalize().unwrap();
    let cfg = PropagatorConfig::default();
    let got = evolve(&h, &psi, 3.0, &cfg).unwrap();
    let want = dense_propagate(&h, psi.amplitudes(), 3.0);
    let diff = got.amplitudes().iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    ensure(diff <= PROPAGATOR_TOL, || format!("max amplitude difference {diff:e}"))?;

    let once = evolve(&h, &psi, 50.0, &cfg).unwrap();
    let mut stepped = psi.clone();
    let mut drift = (once.norm() - 1.0).abs();
    for _ in 0..50 {
        stepped = evolve(&h, &stepped, 1.0, &cfg).unwrap();
        drift = drift.max((stepped.norm() - 1.0).abs());
    }
    ensure(drift <= NORM_DRIFT_TOL, || format!("norm drift {drift:e}"))?;
    Ok(format!("(4,4) t=3: max |Krylov - dense| = {diff:.1e} (tol {PROPAGATOR_TOL:e}); norm drift over t=50 = {drift:.1e} (tol {NORM_DRIFT_TOL:e})"))
}

struct Run {
    _dir: TempDir,
    out: PathBuf,
    took: Duration,
}

fn fig1_run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let out = dir.path().join("fig1");
        let took = run_cli(Job::EchoCurve, &repo_config("fig1_echo.json"), &out, None);
        Run { _dir: dir, out, took }
    })
}

fn fig2_run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let out = dir.path().join("fig2");
        let took = run_cli(Job::ScanCritical, &repo_config("fig2_scan.json"), &out, None);
        Run { _dir: dir, out, took }
    })
}

/// Least-squares slope of ln(1 - f) against ln t, recomputed from the CSV.
fn slope_from_csv(path: &Path) -> f64 {
    let pts: Vec<(f64, f64)> = csv_rows(path)
        .iter()
        .map(|r| (r[0].parse::<f64>().unwrap(), r[1].parse::<f64>().unwrap()))
        .filter(|&(t, f)| t >= SLOPE_WINDOW.0 && t <= SLOPE_WINDOW.1 && f < 1.0)
        .map(|(t, f)| (t.ln(), (1.0 - f).ln()))
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>()
}

fn short_time_exponents() -> Check {
    let run = fig1_run();
    let m = manifest(&run.out);
    let mut parts = Vec::new();
    for (label, expect) in [("delta_j_oneleg", 2.0), ("delta_u", 4.0), ("gravity", 4.0)] {
        let entry = &m["results"]["curves"][label];
        let slope = entry["loglog_slope"]["value"].as_f64().ok_or_else(|| format!("{label}: no slope in manifest"))?;
        let check = slope_from_csv(&run.out.join(format!("echo_{label}.csv")));
        // the CSV prints t to 10 digits, which can move the window edges by one point
        ensure((slope - check).abs() < 5e-3, || format!("{label}: manifest {slope} vs CSV {check}"))?;
        ensure((slope - expect).abs() <= SLOPE_TOL, || {
            format!("{label}: slope {slope:.4}, expected {expect} +- {SLOPE_TOL}")
        })?;
        parts.push(format!("{label} {slope:.3}"));
    }
    ensure(run.took <= FIG1_BUDGET, || format!("took {:?}", run.took))?;
    Ok(format!(
        "N=7 Mott, slopes over t in [0.01,0.1]: {} (targets 2,4,4 +- {SLOPE_TOL}); {:.1}s (limit 300s)",
        parts.join(", "),
        run.took.as_secs_f64()
    ))
}

fn variance_oracle_agreement() -> Check {
    let mut parts = Vec::new();
    for n in [4usize, 6, 8] {
        let o = ops(n, n);
        let gs = ground_state(&o.hamiltonian(BhmParams::hubbard(0.0, 1.0)), &EigConfig::default()).unwrap();
        let s = Scenario::new(&o, ScenarioKind::DeltaJSymmetric, 0.0, 1.0, DELTA_J).unwrap();
        let oracle = variance_oracle(&gs.state, &s).unwrap();
        let closed = 4.0 * (n as f64 - 1.0) * DELTA_J * DELTA_J;
        ensure((oracle - closed).abs() <= 1e-12, || format!("N={n}: oracle {oracle} vs 4(N-1)dJ^2 = {closed}"))?;
        let curve =
            echo_curve(&gs.state, &s, &uniform_grid(SHORT_T_MAX, SHORT_POINTS), &PropagatorConfig::default()).unwrap();
        let fit = fit_decay(&curve, DecayModel::Gaussian, WindowPolicy::Shoulder).unwrap();
        let rel = fit.parameter / oracle - 1.0;
        ensure(rel.abs() <= ORACLE_REL_TOL, || format!("N={n}: fit {} vs oracle {oracle} ({rel:+.4})", fit.parameter))?;
        let nominal = (n as f64 - 1.0) * DELTA_J * DELTA_J;
        parts.push(format!(
            "N={n} alpha={:.5} oracle={oracle:.5} ({:+.2}%), oracle/(N-1)dJ^2={:.3}",
            fit.parameter,
            100.0 * rel,
            oracle / nominal
        ));
    }
    Ok(format!(
        "J=0, dJ=0.05, shoulder fit on [0,{SHORT_T_MAX}]: {}; the (N-1)dJ^2 normalization is 4x below the oracle",
        parts.join("; ")
    ))
}

fn gaussian_crossover() -> Check {
    let o = ops(7, 7);
    let psi = StateVector::mott(o.basis()).unwrap();
    let du = 0.2;
    let s = Scenario::new(&o, ScenarioKind::DeltaU, 1.0, 1.0, du).unwrap();
    let curve = echo_curve(&psi, &s, &uniform_grid(LATE_WINDOW.1, 301), &PropagatorConfig::default()).unwrap();
    let fit =
        fit_decay(&curve, DecayModel::Gaussian, WindowPolicy::TimeRange { t_lo: LATE_WINDOW.0, t_hi: LATE_WINDOW.1 })
            .unwrap();
    let beta = fit.parameter / (du * du);
    ensure(beta >= BETA_RANGE.0 && beta <= BETA_RANGE.1, || format!("beta = {beta}"))?;
    Ok(format!("N=7 Mott, J/U=1, dU=0.2, gaussian fit on t in [1,3]: beta = {beta:.3} in [0.1,10] U/J"))
}

fn critical_scan() -> Check {
    let run = fig2_run();
    let m = manifest(&run.out);
    let mut heights = Vec::new();
    let mut parts = Vec::new();
    for n in [4usize, 6, 8] {
        let file = run.out.join(format!("scan_N{n}.csv"));
        let text = fs::read_to_string(&file).unwrap();
        ensure(text.lines().any(|l| l == "# thermodynamic_Jc=0.52"), || format!("N={n}: marker 0.52 missing"))?;
        let rows = csv_rows(&file);
        ensure(rows.len() == 25, || format!("N={n}: {} grid points", rows.len()))?;
        ensure(rows.iter().all(|r| r[6] == "ok"), || format!("N={n}: failed points"))?;
        ensure(rows[0][0] == "0.000000" && rows[0][2].parse::<f64>().unwrap() == 1.0, || {
            format!("N={n}: normalized alpha(0) = {}", rows[0][2])
        })?;
        let entry = &m["results"]["scans"][format!("N{n}")];
        let (a0, oracle) = (entry["alpha0_fit"].as_f64().unwrap(), entry["alpha0_oracle"].as_f64().unwrap());
        ensure((a0 / oracle - 1.0).abs() <= ORACLE_REL_TOL, || format!("N={n}: alpha(0) {a0} vs oracle {oracle}"))?;
        let peak_j = entry["peak"]["J"].as_f64().unwrap();
        let height = entry["peak"]["abs_dalpha_dJ"].as_f64().unwrap();
        if n == 8 {
            ensure(peak_j >= PEAK_RANGE_N8.0 && peak_j <= PEAK_RANGE_N8.1, || format!("N=8 peak at J = {peak_j}"))?;
        }
        let gaps: Vec<(f64, f64)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[4].parse().unwrap())).collect();
        ensure(gaps.iter().all(|g| g.1 > 0.0), || format!("N={n}: non-positive gap"))?;
        let toward: Vec<f64> = gaps.iter().filter(|g| g.0 <= peak_j).map(|g| g.1).collect();
        ensure(toward.windows(2).all(|w| w[1] < w[0]), || {
            format!("N={n}: gap not decreasing up to J = {peak_j}: {toward:?}")
        })?;
        heights.push(height);
        parts.push(format!(
            "N={n} peak |dalpha/dJ| = {height:.4} at J = {peak_j:.3}, gap {:.3} -> {:.3}",
            toward[0],
            toward[toward.len() - 1]
        ));
    }
    ensure(heights.windows(2).all(|w| w[1] > w[0]), || format!("peak heights not increasing: {heights:?}"))?;
    ensure(run.took <= SCAN_BUDGET, || format!("took {:?}", run.took))?;
    Ok(format!(
        "{}; heights increasing; normalized alpha(0) = 1; marker 0.52 in every file; {:.1}s for N=4,6,8 (limit 3600s)",
        parts.join("; "),
        run.took.as_secs_f64()
    ))
}

fn spacing_ratio_calibration() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    let exp = Exp::new(1.0).unwrap();
    let mut level = 0.0;
    let levels: Vec<f64> = (0..=100_000)
        .map(|_| {
            level += exp.sample(&mut rng);
            level
        })
        .collect();
    let poisson = spacing_ratio(&levels).unwrap().mean;
    ensure((poisson - POISSON_R).abs() <= RATIO_TOL, || format!("Poisson r = {poisson}"))?;

    let (dim, samples) = (500usize, 50usize);
    let mut sum = 0.0;
    let mut count = 0usize;
    for _ in 0..samples {
        let a = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
        let goe = (&a + a.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(goe).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let r = spacing_ratio(&ev).unwrap();
        sum += r.mean * r.samples as f64;
        count += r.samples;
    }
    let goe = sum / count as f64;
    ensure((goe - GOE_R).abs() <= RATIO_TOL, || format!("GOE r = {goe}"))?;
    Ok(format!("Poisson (1e5 spacings) r = {poisson:.4} (target {POISSON_R} +- {RATIO_TOL}); GOE dim 500 x 50 r = {goe:.4} (target {GOE_R} +- {RATIO_TOL})"))
}

fn compare_dirs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut files = 0;
    for entry in fs::read_dir(a).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().unwrap();
            let (x, y) = (fs::read_to_string(&path).unwrap(), fs::read_to_string(b.join(name)).unwrap());
            ensure(data_rows(&x) == data_rows(&y), || format!("{name:?}: data rows differ"))?;
            ensure(x == y, || format!("{name:?}: headers differ with --no-timestamp"))?;
            files += 1;
        }
    }
    Ok(files)
}

fn determinism() -> Check {
    let dir = TempDir::new().unwrap();
    let fig1 = dir.path().join("fig1");
    run_cli(Job::EchoCurve, &repo_config("fig1_echo.json"), &fig1, Some(1));
    let n1 = compare_dirs(&fig1_run().out, &fig1)?;
    let fig2 = dir.path().join("fig2");
    run_cli(Job::ScanCritical, &repo_config("fig2_scan.json"), &fig2, Some(1));
    let n2 = compare_dirs(&fig2_run().out, &fig2)?;
    Ok(format!(
        "repeat runs of the criterion 6 and 9 configs (default vs 1 thread): {} CSV files byte-identical",
        n1 + n2
    ))
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 11] = [
        ("ideal echo identity", ideal_echo_identity),
        ("imprint conjugation", imprint_conjugation),
        ("single-particle spectrum", single_particle_band),
        ("closed-form ground state", closed_form_ground_state),
        ("propagator cross-check", propagator_cross_check),
        ("short-time exponents", short_time_exponents),
        ("variance-oracle agreement", variance_oracle_agreement),
        ("gaussian crossover", gaussian_crossover),
        ("critical scan", critical_scan),
        ("spacing-ratio calibration", spacing_ratio_calibration),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = format!("C{}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match outcome {
            Ok(detail) => println!("[PASS] {id:<3} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {id:<3} {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion/criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all selected criteria passed");
}
