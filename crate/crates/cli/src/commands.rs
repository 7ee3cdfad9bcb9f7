//! The four subcommands. Each reads a validated config, runs the library and
//! writes its files into the output directory.

use std::path::PathBuf;

use clebsch_geodesic::bvp::{solve_geodesic_bvp, ShootingProblem};
use clebsch_geodesic::clebsch_flow::{clebsch_at_times, integrate_clebsch};
use clebsch_geodesic::conserved::{
    drift_report, generating_function, identity_residuals, uhlenbeck_integrals, InvariantSnapshot,
};
use clebsch_geodesic::direct_flow::{integrate_direct, DirectOptions};
use clebsch_geodesic::error::GeoError;
use clebsch_geodesic::model::{sample_state, to_clebsch, Ellipsoid, PhaseState};
use clebsch_geodesic::poisson::{
    antisymmetry_check, generating_involution_check, gradient_check, hamiltonian_flow_check,
    involution_check, jacobi_check, sample_lambda, sample_point, standard_observables,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{LoadedConfig, Method};
use crate::error::CliError;
use crate::output::{drift_json, plot_script, states_csv, trajectory_csv, write_file, write_json};

/// Settings resolved from the command line over the config file.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub emit_plot_script: bool,
}

impl RunOptions {
    pub fn resolve(
        lc: &LoadedConfig,
        out: Option<PathBuf>,
        seed: Option<u64>,
        emit_plot_script: bool,
    ) -> Self {
        Self {
            out_dir: out
                .or_else(|| lc.cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out")),
            seed: seed.or(lc.cfg.seed).unwrap_or(0),
            emit_plot_script,
        }
    }
}

/// Independent stream for one consumer of the run seed.
fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(k);
    r
}

const DEFAULT_STRIDE: f64 = 0.1;

fn initial_state(lc: &LoadedConfig, e: &Ellipsoid, seed: u64) -> Result<PhaseState, CliError> {
    let tol = lc.tolerances();
    match (&lc.cfg.x0, &lc.cfg.y0) {
        (Some(x), Some(y)) => {
            let s = PhaseState::new(x.clone(), y.clone());
            if let Err(GeoError::ConstraintViolation {
                q0_residual,
                tangency_residual,
            }) = s.check_constraints(e, tol.constraint)
            {
                return Err(lc
                    .error_at(
                        "x0",
                        format!(
                            "initial state is off the constraint manifold: |Q0 - 1| = {q0_residual:e}, \
                             |tangency| = {tangency_residual:e} (tolerance {:e})",
                            tol.constraint
                        ),
                    )
                    .into());
            }
            Ok(s)
        }
        _ => {
            let s = sample_state(e, &mut stream(seed, 0), 1.0)?;
            log::info!("sampled initial state from seed {seed}");
            Ok(s)
        }
    }
}

fn finish(
    lc: &LoadedConfig,
    opts: &RunOptions,
    mut written: Vec<PathBuf>,
    csvs: Vec<String>,
) -> Result<Vec<PathBuf>, CliError> {
    if opts.emit_plot_script && !csvs.is_empty() {
        written.push(write_file(&opts.out_dir, "plot.py", &plot_script(&csvs))?);
    }
    log::debug!("{}: {} files written", lc.source, written.len());
    Ok(written)
}

/// Integrates the configured flow(s); returns the files written.
pub fn run_integrate(lc: &LoadedConfig, opts: &RunOptions) -> Result<Vec<PathBuf>, CliError> {
    let method = lc.validate_integrate()?;
    let cfg = &lc.cfg;
    let e = Ellipsoid::new(cfg.a.clone())?;
    let tol = lc.tolerances();
    let s0 = initial_state(lc, &e, opts.seed)?;
    let ctl = lc.step_control(1e-10, 1e-12);
    let stride = cfg.stride.unwrap_or(DEFAULT_STRIDE);
    let n = e.dim();
    let dir = &opts.out_dir;
    let mut written = Vec::new();
    let mut csvs = Vec::new();

    let direct = if matches!(method, Method::Direct | Method::Both) {
        let t_end = cfg.t_end.expect("validated");
        let dopts = DirectOptions {
            project_every: cfg.project_every.unwrap_or(1),
            stride,
            tol,
        };
        log::info!("direct flow to t = {t_end}");
        let out = integrate_direct(&e, &s0, t_end, ctl, &dopts)?;
        written.push(write_file(
            dir,
            "trajectory_direct.csv",
            &trajectory_csv(n, &out),
        )?);
        written.push(write_json(
            dir,
            "drift_direct.json",
            &drift_json("direct", &drift_report(&out)),
        )?);
        csvs.push("trajectory_direct.csv".to_string());
        Some(out)
    } else {
        None
    };

    let clebsch = match method {
        Method::Clebsch => {
            let tau_end = cfg.tau_end.expect("validated");
            log::info!("Clebsch flow to tau = {tau_end}");
            Some(integrate_clebsch(&e, &s0, tau_end, ctl, stride, &tol)?)
        }
        Method::Both => {
            let times: Vec<f64> = direct
                .as_ref()
                .expect("direct ran")
                .iter()
                .map(|s| s.t)
                .collect();
            log::info!("Clebsch flow at {} matched times", times.len());
            Some(clebsch_at_times(&e, &s0, &times, ctl, &tol)?)
        }
        Method::Direct => None,
    };
    if let Some(out) = &clebsch {
        written.push(write_file(
            dir,
            "trajectory_clebsch.csv",
            &trajectory_csv(n, out),
        )?);
        written.push(write_json(
            dir,
            "drift_clebsch.json",
            &drift_json("clebsch", &drift_report(out)),
        )?);
        csvs.push("trajectory_clebsch.csv".to_string());
    }

    if let (Some(d), Some(c)) = (&direct, &clebsch) {
        let mut worst: f64 = 0.0;
        let mut at = 0.0;
        for (p, q) in d.iter().zip(c) {
            let dev =
                p.x.iter()
                    .zip(&q.x)
                    .map(|(u, v)| (u - v).abs())
                    .fold(0.0, f64::max);
            if dev > worst {
                worst = dev;
                at = p.t;
            }
        }
        log::info!("max direct/Clebsch deviation {worst:e} at t = {at}");
        let record = json!({
            "matched_times": d.len(),
            "t_end": d.last().map(|s| s.t),
            "max_x_deviation": worst,
            "t_of_max_deviation": at,
        });
        written.push(write_json(dir, "comparison.json", &record)?);
    }
    finish(lc, opts, written, csvs)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub max_residual: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub n: usize,
    pub a: Vec<f64>,
    pub seed: u64,
    pub samples: usize,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

/// Finite-difference gradients are only good to about the square root of the
/// step; this bound is fixed rather than configured.
const GRADIENT_BOUND: f64 = 1e-6;

/// Runs the algebraic and Poisson-structure checks and writes `verify.json`.
pub fn run_verify(
    lc: &LoadedConfig,
    opts: &RunOptions,
) -> Result<(VerifyReport, Vec<PathBuf>), CliError> {
    let cfg = &lc.cfg;
    let e = Ellipsoid::new(cfg.a.clone())?;
    e.require_distinct()?;
    let tol = lc.tolerances();
    let samples = cfg.verify.samples.unwrap_or(1000).max(1);
    let bound = cfg.verify.bound.unwrap_or(tol.identity);
    let n = e.dim();
    let seed = opts.seed;
    let mut checks = Vec::new();
    let mut push = |name: &str, max_residual: f64, bound: f64| {
        log::info!("{name}: {max_residual:e} (bound {bound:e})");
        checks.push(CheckResult {
            name: name.to_string(),
            max_residual,
            bound,
            pass: max_residual < bound,
        });
    };

    let mut rng = stream(seed, 1);
    let (mut force, mut split, mut comm, mut tele, mut pf) =
        (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..samples {
        let s = sample_state(&e, &mut rng, 1.0)?;
        let r = identity_residuals(&e, &s, tol.constraint)?;
        force = force.max(r.force);
        split = split.max(r.b_split);
        comm = comm.max(r.commutator);
        let c = to_clebsch(&e, &s, tol.constraint)?;
        let f = uhlenbeck_integrals(&e, &c.y, &c.l)?;
        let yy: f64 = c.y.iter().map(|v| v * v).sum();
        tele = tele.max((f.iter().sum::<f64>() - yy).abs());
        let lambda = sample_lambda(&e, &mut rng);
        let g = generating_function(&e, &c.y, &c.l, lambda)?;
        let sum: f64 = f.iter().zip(e.axes()).map(|(f, a)| f / (a - lambda)).sum();
        pf = pf.max((g - sum).abs());
    }
    push("identity_force", force, bound);
    push("identity_b_split", split, bound);
    push("identity_commutator", comm, bound);
    push("telescoping_sum_F", tele, bound);
    push("partial_fractions_G", pf, bound);

    push(
        "involution_F",
        involution_check(&e, samples, &mut stream(seed, 2))?,
        bound,
    );
    let per_pair = samples.div_ceil(10);
    push(
        "involution_G",
        generating_involution_check(&e, 20, per_pair, &mut stream(seed, 3))?,
        bound,
    );
    push(
        "hamiltonian_flow",
        hamiltonian_flow_check(&e, samples, &mut stream(seed, 4))?,
        bound,
    );
    push(
        "jacobi",
        jacobi_check(n, samples.min(20), &mut stream(seed, 5)),
        bound,
    );

    let mut rng = stream(seed, 6);
    let lambdas = [sample_lambda(&e, &mut rng), sample_lambda(&e, &mut rng)];
    let obs = standard_observables(&e, &lambdas)?;
    push(
        "antisymmetry",
        antisymmetry_check(n, &obs, samples.min(100), &mut rng),
        bound,
    );
    let mut worst: f64 = 0.0;
    for _ in 0..samples.min(100) {
        let (y, l) = sample_point(n, &mut rng);
        for f in &obs {
            worst = worst.max(gradient_check(f.as_ref(), &y, &l, 1e-6));
        }
    }
    push("gradient_fd", worst, GRADIENT_BOUND);

    let pass = checks.iter().all(|c| c.pass);
    let report = VerifyReport {
        n,
        a: cfg.a.clone(),
        seed,
        samples,
        checks,
        pass,
    };
    let value = serde_json::to_value(&report).expect("report serializes");
    let written = vec![write_json(&opts.out_dir, "verify.json", &value)?];
    Ok((report, written))
}

/// Solves the configured two-point problem; writes the solution and its
/// trajectory.
pub fn run_bvp(lc: &LoadedConfig, opts: &RunOptions) -> Result<Vec<PathBuf>, CliError> {
    let b = lc.validate_bvp()?;
    let e = Ellipsoid::new(lc.cfg.a.clone())?;
    let mut prob = ShootingProblem::new(e, b.p.clone(), b.q.clone())?;
    prob.tol = lc.tolerances();
    prob.ctl = lc.step_control(1e-12, 1e-14);
    prob.initial_direction = b.v0.clone();
    if let Some(t) = b.tol_endpoint {
        prob.tol_endpoint = t;
    }
    if let Some(m) = b.max_iter {
        prob.max_iter = m;
    }
    prob.validate()?;
    let sol = solve_geodesic_bvp(&prob)?;
    log::info!(
        "converged in {} iterations, T* = {}",
        sol.iterations,
        sol.length
    );
    let n = prob.e.dim();
    let record = json!({
        "v_star": sol.direction,
        "T_star": sol.length,
        "iterations": sol.iterations,
        "miss": sol.miss,
        "drift": drift_json("direct", &drift_report(&sol.trajectory)),
    });
    let dir = &opts.out_dir;
    let written = vec![
        write_json(dir, "bvp_solution.json", &record)?,
        write_file(
            dir,
            "bvp_trajectory.csv",
            &trajectory_csv(n, &sol.trajectory),
        )?,
    ];
    finish(lc, opts, written, vec!["bvp_trajectory.csv".to_string()])
}

/// Draws random on-manifold tangent states and tabulates their invariants.
pub fn run_sample(lc: &LoadedConfig, opts: &RunOptions) -> Result<Vec<PathBuf>, CliError> {
    let e = Ellipsoid::new(lc.cfg.a.clone())?;
    let count = lc.cfg.sample.count.unwrap_or(10);
    let speed = lc.cfg.sample.speed.unwrap_or(1.0);
    let mut rng = stream(opts.seed, 0);
    let mut states = Vec::with_capacity(count);
    for _ in 0..count {
        let s = sample_state(&e, &mut rng, speed)?;
        let inv = InvariantSnapshot::of_phase(&e, &s);
        states.push((s.x, s.y, inv));
    }
    let header = json!({
        "n": e.dim(),
        "a": lc.cfg.a,
        "seed": opts.seed,
        "count": count,
        "speed": speed,
    });
    let dir = &opts.out_dir;
    let written = vec![
        write_file(dir, "samples.csv", &states_csv(e.dim(), &states))?,
        write_json(dir, "samples.json", &header)?,
    ];
    Ok(written)
}

/// Report written in place of results when a run fails after its output
/// directory is known.
pub fn error_report(err: &CliError) -> Value {
    let kind = match err {
        CliError::Config(_) => "ConfigError",
        CliError::Geo(e) => e.kind(),
        CliError::Io { .. } => "IoError",
    };
    json!({
        "error": kind,
        "message": err.to_string(),
        "exit_code": err.exit_code(),
    })
}
