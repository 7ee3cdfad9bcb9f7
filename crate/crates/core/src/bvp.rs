//! Two-point geodesics by single shooting.
//!
//! A unit-speed geodesic leaves `p` in direction `v` and runs for arc length
//! `T`. The unknowns are `v` on the unit sphere of the tangent space at `p`
//! and `T`; Levenberg–Marquardt drives the endpoint miss `q − x(T)` to zero
//! with a forward-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::direct_flow::{integrate_direct, DirectOptions};
use crate::error::{GeoError, Result};
use crate::model::{Ellipsoid, PhaseState, Tolerances, TrajectorySample};
use crate::ode::StepControl;

/// Forward-difference step for the shooting Jacobian.
pub const FD_STEP: f64 = 1e-7;

/// A chord whose tangent part is shorter than this fraction of its length
/// gives no usable initial direction.
pub const DEGENERATE_CHORD: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ShootingProblem {
    pub e: Ellipsoid,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub tol_endpoint: f64,
    pub max_iter: usize,
    /// Overrides the chord-based initial direction; required when the chord
    /// is normal to the surface at `p`.
    pub initial_direction: Option<Vec<f64>>,
    pub ctl: StepControl,
    pub tol: Tolerances,
    /// Number of intervals in the returned trajectory.
    pub samples: usize,
}

impl ShootingProblem {
    pub fn new(e: Ellipsoid, p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let prob = Self {
            e,
            p,
            q,
            tol_endpoint: 1e-8,
            max_iter: 100,
            initial_direction: None,
            ctl: StepControl::adaptive(1e-12, 1e-14),
            tol: Tolerances::default(),
            samples: 100,
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.e;
        e.check_len(&self.p)?;
        e.check_len(&self.q)?;
        for (name, pt) in [("p", &self.p), ("q", &self.q)] {
            let q0_residual = (e.q0(pt) - 1.0).abs();
            if !(q0_residual <= self.tol.constraint) {
                return Err(GeoError::InvalidProblem(format!(
                    "{name} is off the ellipsoid (|Q0 - 1| = {q0_residual:e})"
                )));
            }
        }
        if dist(&self.p, &self.q) == 0.0 {
            return Err(GeoError::InvalidProblem("p and q coincide".into()));
        }
        if !(self.tol_endpoint > 0.0) || self.samples == 0 {
            return Err(GeoError::InvalidProblem(
                "tol_endpoint and samples must be positive".into(),
            ));
        }
        if let Some(v) = &self.initial_direction {
            e.check_len(v)?;
        }
        self.ctl.validate()
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn dist(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Euclidean projection of `w` onto the tangent space at `p`.
fn tangent_part(e: &Ellipsoid, p: &[f64], w: &[f64]) -> Vec<f64> {
    let g = e.normal(p);
    let c = dot(&g, w) / dot(&g, &g);
    w.iter().zip(&g).map(|(w, g)| w - c * g).collect()
}

/// Orthonormal basis of the directions orthogonal to both the normal at `p`
/// and the unit tangent `v`: the tangent space of the direction sphere.
fn sphere_basis(e: &Ellipsoid, p: &[f64], v: &[f64]) -> Vec<Vec<f64>> {
    let n = e.dim();
    let g = e.normal(p);
    let gn = norm(&g);
    let mut basis: Vec<Vec<f64>> = vec![g.iter().map(|x| x / gn).collect(), v.to_vec()];
    for i in 0..n {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        // two Gram-Schmidt passes keep the basis orthogonal to roundoff
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(w, b)| *w -= c * b);
            }
        }
        let wn = norm(&w);
        if wn > 1e-8 {
            basis.push(w.into_iter().map(|x| x / wn).collect());
        }
        if basis.len() == n {
            break;
        }
    }
    basis.split_off(2)
}

/// Unit tangent at `p` along `w`.
fn unit_tangent(e: &Ellipsoid, p: &[f64], w: &[f64]) -> Option<Vec<f64>> {
    let t = tangent_part(e, p, w);
    let tn = norm(&t);
    (tn > 0.0 && tn.is_finite()).then(|| t.into_iter().map(|x| x / tn).collect())
}

/// Endpoint of the unit-speed geodesic from `(p, v)` after arc length `len`.
/// A negative length runs along `−v`.
fn endpoint(prob: &ShootingProblem, v: &[f64], len: f64) -> Result<Vec<f64>> {
    if len == 0.0 {
        return Ok(prob.p.clone());
    }
    let y: Vec<f64> = v.iter().map(|x| x * len.signum()).collect();
    let opts = DirectOptions {
        stride: len.abs(),
        tol: prob.tol,
        ..DirectOptions::default()
    };
    let s0 = PhaseState::new(prob.p.clone(), y);
    let out = integrate_direct(&prob.e, &s0, len.abs(), prob.ctl, &opts)?;
    Ok(out
        .last()
        .expect("integrator returns at least one sample")
        .x
        .clone())
}

/// Endpoint miss `q − x(T)` of the unit-speed geodesic from `(p, v)`.
pub fn shoot(prob: &ShootingProblem, v: &[f64], len: f64) -> Result<Vec<f64>> {
    prob.e.check_len(v)?;
    let speed = norm(v);
    if (speed - 1.0).abs() > 1e-9 {
        return Err(GeoError::InvalidProblem(format!(
            "shooting direction must be a unit vector, |v| = {speed}"
        )));
    }
    let x = endpoint(prob, v, len)?;
    Ok(prob.q.iter().zip(&x).map(|(q, x)| q - x).collect())
}

#[derive(Debug, Clone)]
pub struct BvpSolution {
    /// Unit initial tangent at `p`.
    pub direction: Vec<f64>,
    /// Arc length, equal to the travel time at unit speed.
    pub length: f64,
    pub iterations: usize,
    /// Euclidean norm of the final endpoint miss.
    pub miss: f64,
    pub trajectory: Vec<TrajectorySample>,
}

fn initial_guess(prob: &ShootingProblem) -> Result<(Vec<f64>, f64)> {
    let (e, p, q) = (&prob.e, &prob.p, &prob.q);
    let chord: Vec<f64> = q.iter().zip(p).map(|(q, p)| q - p).collect();
    let len = norm(&chord);
    let v = match &prob.initial_direction {
        Some(v0) => unit_tangent(e, p, v0).ok_or_else(|| {
            GeoError::InvalidProblem("initial direction has no tangent component".into())
        })?,
        None => {
            let t = tangent_part(e, p, &chord);
            if norm(&t) < DEGENERATE_CHORD * len {
                return Err(GeoError::DegenerateChord);
            }
            unit_tangent(e, p, &t).ok_or(GeoError::DegenerateChord)?
        }
    };
    Ok((v, len))
}

/// Solves for the geodesic from `p` to `q` nearest the initial guess.
pub fn solve_geodesic_bvp(prob: &ShootingProblem) -> Result<BvpSolution> {
    prob.validate()?;
    let e = &prob.e;
    let (mut v, mut len) = initial_guess(prob)?;
    let mut r = shoot(prob, &v, len)?;
    let mut rn = norm(&r);
    let mut damping = 1e-3;
    let mut iterations = 0;

    while rn >= prob.tol_endpoint {
        if iterations == prob.max_iter {
            return Err(GeoError::NoConvergence {
                iterations,
                miss: rn,
            });
        }
        iterations += 1;

        let basis = sphere_basis(e, &prob.p, &v);
        let m = basis.len() + 1;
        let nres = r.len();
        let mut jac = DMatrix::<f64>::zeros(nres, m);
        for (col, w) in basis.iter().enumerate() {
            let vp = step_direction(e, &prob.p, &v, w, FD_STEP);
            let rp = shoot(prob, &vp, len)?;
            for i in 0..nres {
                jac[(i, col)] = (rp[i] - r[i]) / FD_STEP;
            }
        }
        let rp = shoot(prob, &v, len + FD_STEP)?;
        for i in 0..nres {
            jac[(i, m - 1)] = (rp[i] - r[i]) / FD_STEP;
        }

        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * DVector::from_column_slice(&r);
        // inner loop: raise damping until the step reduces the miss
        let mut accepted = false;
        for _ in 0..30 {
            let mut lhs = jtj.clone();
            for k in 0..m {
                lhs[(k, k)] += damping * jtj[(k, k)].max(1e-12);
            }
            let Some(chol) = lhs.cholesky() else {
                damping *= 10.0;
                continue;
            };
            let delta = -chol.solve(&jtr);
            let mut vt = v.clone();
            for (k, w) in basis.iter().enumerate() {
                vt.iter_mut().zip(w).for_each(|(x, w)| *x += delta[k] * w);
            }
            let vt = match unit_tangent(e, &prob.p, &vt) {
                Some(vt) => vt,
                None => {
                    damping *= 10.0;
                    continue;
                }
            };
            let lt = len + delta[m - 1];
            let rt = match shoot(prob, &vt, lt) {
                Ok(rt) => rt,
                Err(_) => {
                    damping *= 10.0;
                    continue;
                }
            };
            let rtn = norm(&rt);
            if rtn < rn {
                (v, len, r, rn) = (vt, lt, rt, rtn);
                damping = (damping / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            damping *= 4.0;
        }
        if !accepted {
            return Err(GeoError::NoConvergence {
                iterations,
                miss: rn,
            });
        }
    }

    if len < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
        len = -len;
    }
    let opts = DirectOptions {
        stride: len / prob.samples as f64,
        tol: prob.tol,
        ..DirectOptions::default()
    };
    let trajectory = integrate_direct(
        e,
        &PhaseState::new(prob.p.clone(), v.clone()),
        len,
        prob.ctl,
        &opts,
    )?;
    Ok(BvpSolution {
        direction: v,
        length: len,
        iterations,
        miss: rn,
        trajectory,
    })
}

/// Unit tangent obtained by moving `v` a distance `h` along `w`.
fn step_direction(e: &Ellipsoid, p: &[f64], v: &[f64], w: &[f64], h: f64) -> Vec<f64> {
    let moved: Vec<f64> = v.iter().zip(w).map(|(v, w)| v + h * w).collect();
    unit_tangent(e, p, &moved).expect("small step off a unit tangent stays tangent")
}
