//! Geodesic motion in physical time with the constraint force written out:
//! `dx_j/dt = y_j`, `dy_j/dt = −ν x_j/a_j` with `ν = B(y)/A(x)`.
//!
//! The state is re-projected onto the surface and its tangent space every
//! `project_every` accepted steps. The speed is never renormalised, so energy
//! drift stays visible to the conservation checks.

use crate::conserved::InvariantSnapshot;
use crate::error::{GeoError, Result};
use crate::model::{project_constraints, Ellipsoid, PhaseState, Tolerances, TrajectorySample};
use crate::ode::{sample_times, OdeSystem, StepControl, Stepper};

/// Time derivative `(dx/dt, dy/dt)` of a phase state.
pub fn direct_rhs(e: &Ellipsoid, s: &PhaseState) -> Result<PhaseState> {
    e.check_len(&s.x)?;
    e.check_len(&s.y)?;
    let a = e.a_form(&s.x);
    if a == 0.0 {
        return Err(GeoError::DegenerateForm("A(x) = 0"));
    }
    let nu = e.b_form(&s.y) / a;
    let dy =
        s.x.iter()
            .zip(e.axes())
            .map(|(x, aj)| -nu * x / aj)
            .collect();
    Ok(PhaseState::new(s.y.clone(), dy))
}

/// Flat `[x, y]` form of the direct equations.
pub struct DirectSystem<'a> {
    e: &'a Ellipsoid,
}

impl<'a> DirectSystem<'a> {
    pub fn new(e: &'a Ellipsoid) -> Self {
        Self { e }
    }
}

impl OdeSystem for DirectSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.e.dim()
    }

    fn rhs(&self, _t: f64, z: &[f64], dz: &mut [f64]) {
        let n = self.e.dim();
        let (x, y) = z.split_at(n);
        // A = 0 only at the origin; the NaN surfaces as NonFiniteState
        let nu = self.e.b_form(y) / self.e.a_form(x);
        let (dx, dy) = dz.split_at_mut(n);
        dx.copy_from_slice(y);
        for ((d, x), a) in dy.iter_mut().zip(x).zip(self.e.axes()) {
            *d = -nu * x / a;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectOptions {
    /// Project after every `project_every` accepted steps.
    pub project_every: usize,
    /// Sample interval in physical time.
    pub stride: f64,
    pub tol: Tolerances,
}

impl Default for DirectOptions {
    fn default() -> Self {
        Self {
            project_every: 1,
            stride: 0.1,
            tol: Tolerances::default(),
        }
    }
}

fn split(z: &[f64], n: usize) -> PhaseState {
    PhaseState::new(z[..n].to_vec(), z[n..].to_vec())
}

fn sample(e: &Ellipsoid, t: f64, s: PhaseState) -> TrajectorySample {
    let invariants = InvariantSnapshot::of_phase(e, &s);
    TrajectorySample {
        t,
        tau: None,
        x: s.x,
        y: s.y,
        invariants,
    }
}

/// Integrates the direct equations on `[0, t_end]`, sampling at multiples of
/// `opts.stride` (plus `t_end`). Steps are truncated to land on each sample
/// time, so samples are integrator states, not interpolants.
pub fn integrate_direct(
    e: &Ellipsoid,
    s0: &PhaseState,
    t_end: f64,
    ctl: StepControl,
    opts: &DirectOptions,
) -> Result<Vec<TrajectorySample>> {
    if !(t_end > 0.0) || !(opts.stride > 0.0) || opts.project_every == 0 {
        return Err(GeoError::InvalidProblem(format!(
            "need t_end > 0, stride > 0, project_every > 0 (t_end={t_end}, stride={}, project_every={})",
            opts.stride, opts.project_every
        )));
    }
    s0.check_constraints(e, opts.tol.constraint)?;
    let n = e.dim();
    let sys = DirectSystem::new(e);
    let z0: Vec<f64> = s0.x.iter().chain(&s0.y).copied().collect();
    let grid = sample_times(0.0, t_end, opts.stride);
    let mut out = Vec::with_capacity(grid.len());
    out.push(sample(e, 0.0, s0.clone()));

    let guard = 1e3 * opts.tol.constraint;
    let mut stepper = Stepper::new(&sys, 0.0, &z0, ctl)?;
    let mut since_projection = 0;
    for &t in &grid[1..] {
        while stepper.t() < t {
            stepper.step(t)?;
            since_projection += 1;
            if since_projection == opts.project_every {
                since_projection = 0;
                let p = project_constraints(e, &split(stepper.state(), n))?;
                let q0_residual = (e.q0(&p.x) - 1.0).abs();
                let tangency_residual = e.tangency(&p.x, &p.y).abs();
                if q0_residual > guard || tangency_residual > guard {
                    return Err(GeoError::ConstraintViolation {
                        q0_residual,
                        tangency_residual,
                    });
                }
                let z: Vec<f64> = p.x.iter().chain(&p.y).copied().collect();
                stepper.reset_state(&z);
            }
        }
        out.push(sample(e, t, split(stepper.state(), n)));
    }
    Ok(out)
}
