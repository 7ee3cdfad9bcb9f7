//! Ellipsoid parameters, phase-space states and the scalar forms built on them.
//!
//! The ellipsoid is the level set `Q0(x) = Σ x_j²/a_j = 1`, with `a_j` the
//! squared semi-axes. A geodesic state is an ambient position `x` on the
//! surface and an ambient velocity `y` tangent to it. The same motion is
//! carried in Clebsch variables `(y, l)` with `l = x ∧ y`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::conserved::InvariantSnapshot;
use crate::error::{GeoError, Result};
use crate::skew::SkewTensor;

/// Numerical thresholds shared across the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Admissible `|Q0 - 1|` and `|tangency|` for a state to count as on-manifold.
    pub constraint: f64,
    /// Admissible residual of an exact identity after reconstruction.
    pub identity: f64,
    /// Smallest `B(y)` for which `x` is reconstructed from `(y, l)`.
    pub eps_b: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            constraint: 1e-9,
            identity: 1e-10,
            eps_b: 1e-14,
        }
    }
}

/// Validated ellipsoid `Σ x_j²/a_j = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    a: Vec<f64>,
    duplicate: Option<(usize, usize)>,
}

impl Ellipsoid {
    /// Validates the axis vector. Coinciding axes are accepted but flagged;
    /// see [`Ellipsoid::require_distinct`].
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if a.len() < 2 {
            return Err(GeoError::DimensionTooSmall(a.len()));
        }
        for (index, &value) in a.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(GeoError::NonPositiveAxis { index, value });
            }
        }
        let mut duplicate = None;
        'outer: for j in 0..a.len() {
            for k in j + 1..a.len() {
                if a[j] == a[k] {
                    duplicate = Some((j, k));
                    break 'outer;
                }
            }
        }
        Ok(Self { a, duplicate })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn axes(&self) -> &[f64] {
        &self.a
    }

    pub fn is_distinct(&self) -> bool {
        self.duplicate.is_none()
    }

    /// Fails with `DuplicateAxis` when two axes coincide.
    pub fn require_distinct(&self) -> Result<()> {
        match self.duplicate {
            None => Ok(()),
            Some((first, second)) => Err(GeoError::DuplicateAxis {
                first,
                second,
                value: self.a[first],
            }),
        }
    }

    pub(crate) fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(GeoError::DimensionMismatch {
                expected: self.dim(),
                actual: v.len(),
            });
        }
        Ok(())
    }

    pub fn q0(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.a).map(|(x, a)| x * x / a).sum()
    }

    /// `A(x) = Σ x_j²/a_j²`, the squared norm of the surface normal `x/a`.
    pub fn a_form(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.a).map(|(x, a)| x * x / (a * a)).sum()
    }

    /// `B(y) = Σ y_j²/a_j`.
    pub fn b_form(&self, y: &[f64]) -> f64 {
        y.iter().zip(&self.a).map(|(y, a)| y * y / a).sum()
    }

    pub fn tangency(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.a)
            .map(|((x, y), a)| x * y / a)
            .sum()
    }

    /// Unnormalised outward normal `g_j = x_j/a_j`.
    pub fn normal(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.a).map(|(x, a)| x / a).collect()
    }
}

/// Ambient position and velocity in physical time.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PhaseState {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y }
    }

    /// Checks `|Q0 - 1|` and `|tangency|` against `tol`.
    pub fn check_constraints(&self, e: &Ellipsoid, tol: f64) -> Result<()> {
        e.check_len(&self.x)?;
        e.check_len(&self.y)?;
        let q0_residual = (e.q0(&self.x) - 1.0).abs();
        let tangency_residual = e.tangency(&self.x, &self.y).abs();
        if !(q0_residual <= tol && tangency_residual <= tol) {
            return Err(GeoError::ConstraintViolation {
                q0_residual,
                tangency_residual,
            });
        }
        Ok(())
    }
}

/// Clebsch variables with local time `tau` and reconstructed physical time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClebschState {
    pub y: Vec<f64>,
    pub l: SkewTensor,
    pub tau: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarForms {
    pub q0: f64,
    pub a: f64,
    pub b: f64,
    pub nu: f64,
    pub tangency: f64,
}

pub fn forms(e: &Ellipsoid, s: &PhaseState) -> Result<ScalarForms> {
    e.check_len(&s.x)?;
    e.check_len(&s.y)?;
    let a = e.a_form(&s.x);
    if a == 0.0 {
        return Err(GeoError::DegenerateForm("A(x) = 0"));
    }
    let b = e.b_form(&s.y);
    Ok(ScalarForms {
        q0: e.q0(&s.x),
        a,
        b,
        nu: b / a,
        tangency: e.tangency(&s.x, &s.y),
    })
}

/// Pulls a state back onto the constraint manifold.
///
/// `x` is rescaled radially to `Q0 = 1`; `y` loses its component along the
/// normal `x/a`. The speed is not renormalised.
pub fn project_constraints(e: &Ellipsoid, s: &PhaseState) -> Result<PhaseState> {
    e.check_len(&s.x)?;
    e.check_len(&s.y)?;
    let q0 = e.q0(&s.x);
    if !(q0 > 0.0) {
        return Err(GeoError::DegenerateForm("Q0(x) = 0"));
    }
    let scale = q0.sqrt().recip();
    let x: Vec<f64> = s.x.iter().map(|v| v * scale).collect();
    let g = e.normal(&x);
    let gg: f64 = g.iter().map(|v| v * v).sum();
    let coef = e.tangency(&x, &s.y) / gg;
    let y = s.y.iter().zip(&g).map(|(y, g)| y - coef * g).collect();
    Ok(PhaseState { x, y })
}

const MAX_RESAMPLES: usize = 16;

/// Draws a random on-manifold tangent state of the given speed.
///
/// Position: `x_j = sqrt(a_j) g_j / |g|` for a standard Gaussian `g`, which
/// puts `x` exactly on the surface (not area-uniform). Velocity: Gaussian,
/// projected to the tangent space and rescaled to `speed`.
pub fn sample_state<R: Rng + ?Sized>(e: &Ellipsoid, rng: &mut R, speed: f64) -> Result<PhaseState> {
    if !(speed > 0.0) {
        return Err(GeoError::InvalidProblem(format!(
            "speed must be positive, got {speed}"
        )));
    }
    let n = e.dim();
    for _ in 0..MAX_RESAMPLES {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let raw_y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if gnorm < 1e-12 {
            continue;
        }
        let x = g
            .iter()
            .zip(e.axes())
            .map(|(g, a)| a.sqrt() * g / gnorm)
            .collect();
        let projected = project_constraints(e, &PhaseState::new(x, raw_y))?;
        let ynorm = projected.y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ynorm < 1e-12 {
            continue;
        }
        // second pass: roundoff from the first projection is relative to the
        // raw draw, which can be much longer than its tangent part
        let y = projected.y.iter().map(|v| v / ynorm).collect();
        let refined = project_constraints(e, &PhaseState::new(projected.x, y))?;
        let rnorm = refined.y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y = refined.y.iter().map(|v| v * speed / rnorm).collect();
        return Ok(PhaseState::new(refined.x, y));
    }
    Err(GeoError::ResamplingFailure(MAX_RESAMPLES))
}

/// Builds `(y, l = x ∧ y)` at `tau = t = 0` from an on-manifold tangent state.
pub fn to_clebsch(e: &Ellipsoid, s: &PhaseState, tol_constraint: f64) -> Result<ClebschState> {
    s.check_constraints(e, tol_constraint)?;
    Ok(ClebschState {
        y: s.y.clone(),
        l: SkewTensor::wedge(&s.x, &s.y),
        tau: 0.0,
        t: 0.0,
    })
}

/// Recovers the position from Clebsch variables:
/// `x_j = B(y)⁻¹ Σ_k l_jk y_k / a_k`.
///
/// This is `x_j = -a_j B⁻¹ dy_j/dτ` with the Clebsch velocity equation
/// substituted; it is only meaningful on the rank-2 locus `l = x ∧ y`.
pub fn reconstruct_x(e: &Ellipsoid, y: &[f64], l: &SkewTensor, eps_b: f64) -> Result<Vec<f64>> {
    e.check_len(y)?;
    if l.dim() != e.dim() {
        return Err(GeoError::DimensionMismatch {
            expected: e.dim(),
            actual: l.dim(),
        });
    }
    let b = e.b_form(y);
    if !(b > eps_b) {
        return Err(GeoError::ZeroVelocity { b });
    }
    let a = e.axes();
    let n = e.dim();
    Ok((0..n)
        .map(|j| (0..n).map(|k| l.get(j, k) * y[k] / a[k]).sum::<f64>() / b)
        .collect())
}

/// Joachimsthal's integral `I = A(x) B(y)`.
pub fn joachimsthal(e: &Ellipsoid, s: &PhaseState) -> f64 {
    e.a_form(&s.x) * e.b_form(&s.y)
}

/// One emitted point of a trajectory in either formulation.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    /// Local time; `None` for direct-flow samples.
    pub tau: Option<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub invariants: InvariantSnapshot,
}
