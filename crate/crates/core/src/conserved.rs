//! Conserved quantities, proof identities and drift bookkeeping.
//!
//! The `n` integrals `F_j = y_j² + Σ_{k≠j} l_jk²/(a_j − a_k)` telescope to
//! `Σ F_j = Σ y_j²` and are the residues of the generating function
//! `G_λ = Σ_j F_j/(a_j − λ)`. The Clebsch Hamiltonian is the pairwise form
//! `H_C = ½(Σ y_j²/a_j − Σ_{j<k} l_jk²/(a_j a_k))`, which equals `½ G_0`.

use crate::clebsch_flow::commutator_term;
use crate::error::{GeoError, Result};
use crate::model::{Ellipsoid, PhaseState, TrajectorySample};
use crate::skew::{index_pairs, SkewTensor};

/// Closest admissible distance between `λ` and an axis value.
pub const POLE_GUARD: f64 = 1e-12;

/// Floor applied to `|F_j(0)|` when forming a relative drift, as a fraction
/// of `Σ_k |F_k(0)|`. Integrals that start at zero (e.g. an axis normal to an
/// invariant coordinate plane) are then measured against the family scale.
pub const F_DRIFT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSnapshot {
    /// Kinetic energy `½ Σ y_j²`.
    pub h_free: f64,
    /// Uhlenbeck integrals; `None` when two axes coincide.
    pub f: Option<Vec<f64>>,
    /// Joachimsthal product `A(x) B(y)`.
    pub i: f64,
    pub q0_residual: f64,
    pub tangency_residual: f64,
    pub plucker_max_residual: f64,
}

impl InvariantSnapshot {
    pub fn new(e: &Ellipsoid, x: &[f64], y: &[f64], l: &SkewTensor) -> Self {
        Self {
            h_free: 0.5 * y.iter().map(|v| v * v).sum::<f64>(),
            f: uhlenbeck_integrals(e, y, l).ok(),
            i: e.a_form(x) * e.b_form(y),
            q0_residual: (e.q0(x) - 1.0).abs(),
            tangency_residual: e.tangency(x, y).abs(),
            plucker_max_residual: plucker_residual(l),
        }
    }

    /// Snapshot of a phase state, with `l = x ∧ y`.
    pub fn of_phase(e: &Ellipsoid, s: &PhaseState) -> Self {
        Self::new(e, &s.x, &s.y, &SkewTensor::wedge(&s.x, &s.y))
    }
}

fn check_l(e: &Ellipsoid, y: &[f64], l: &SkewTensor) -> Result<()> {
    e.check_len(y)?;
    if l.dim() != e.dim() {
        return Err(GeoError::DimensionMismatch {
            expected: e.dim(),
            actual: l.dim(),
        });
    }
    Ok(())
}

pub fn uhlenbeck_integrals(e: &Ellipsoid, y: &[f64], l: &SkewTensor) -> Result<Vec<f64>> {
    e.require_distinct()?;
    check_l(e, y, l)?;
    let a = e.axes();
    let n = e.dim();
    Ok((0..n)
        .map(|j| {
            let pair: f64 = (0..n)
                .filter(|&k| k != j)
                .map(|k| l.get(j, k).powi(2) / (a[j] - a[k]))
                .sum();
            y[j] * y[j] + pair
        })
        .collect())
}

/// `G_λ = Σ_j y_j²/(a_j − λ) − Σ_{j<k} l_jk²/((a_j − λ)(a_k − λ))`.
pub fn generating_function(e: &Ellipsoid, y: &[f64], l: &SkewTensor, lambda: f64) -> Result<f64> {
    check_l(e, y, l)?;
    let a = e.axes();
    if let Some(index) = a.iter().position(|aj| (aj - lambda).abs() < POLE_GUARD) {
        return Err(GeoError::PoleAtAxis { lambda, index });
    }
    let d: Vec<f64> = a.iter().map(|aj| aj - lambda).collect();
    let diag: f64 = y.iter().zip(&d).map(|(y, d)| y * y / d).sum();
    let pairs: f64 = index_pairs(e.dim())
        .zip(l.packed())
        .map(|((j, k), v)| v * v / (d[j] * d[k]))
        .sum();
    Ok(diag - pairs)
}

pub fn clebsch_hamiltonian(e: &Ellipsoid, y: &[f64], l: &SkewTensor) -> Result<f64> {
    e.require_distinct()?;
    check_l(e, y, l)?;
    let a = e.axes();
    let pairs: f64 = index_pairs(e.dim())
        .zip(l.packed())
        .map(|((j, k), v)| v * v / (a[j] * a[k]))
        .sum();
    Ok(0.5 * (e.b_form(y) - pairs))
}

/// Max absolute residuals of the three algebraic identities behind the
/// Clebsch reformulation, evaluated at `l = x ∧ y`, `ω_jk = l_jk/(a_j a_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResiduals {
    /// `B x_j/a_j − Σ_k ω_jk y_k`
    pub force: f64,
    /// `B − Σ_{j<k} l_jk²/(a_j a_k)`
    pub b_split: f64,
    /// `(a_j⁻¹ − a_k⁻¹) B x_j x_k − [Σ_m (l_jm ω_mk − ω_jm l_mk) − (a_j⁻¹ − a_k⁻¹) y_j y_k]`
    pub commutator: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.force.max(self.b_split).max(self.commutator)
    }
}

/// Identity residuals at an on-manifold tangent state.
pub fn identity_residuals(
    e: &Ellipsoid,
    s: &PhaseState,
    tol_constraint: f64,
) -> Result<IdentityResiduals> {
    s.check_constraints(e, tol_constraint)?;
    identity_residuals_unchecked(e, &s.x, &s.y)
}

/// Same as [`identity_residuals`] without the constraint precondition.
///
/// Off the manifold the residuals are, exactly,
/// `force_j = y_j T/a_j`, `b_split = B (1 − Q0) + T²` and
/// `commutator_jk = (a_j⁻¹ − a_k⁻¹)(T (x_j y_k + x_k y_j) − (Q0 − 1) y_j y_k)`
/// with `T` the tangency.
pub fn identity_residuals_unchecked(
    e: &Ellipsoid,
    x: &[f64],
    y: &[f64],
) -> Result<IdentityResiduals> {
    e.check_len(x)?;
    e.check_len(y)?;
    let a = e.axes();
    let n = e.dim();
    let b = e.b_form(y);
    let l = SkewTensor::wedge(x, y);

    let force = (0..n)
        .map(|j| {
            let omega_y: f64 = (0..n).map(|k| l.get(j, k) / (a[j] * a[k]) * y[k]).sum();
            (b * x[j] / a[j] - omega_y).abs()
        })
        .fold(0.0, f64::max);

    let split: f64 = index_pairs(n)
        .zip(l.packed())
        .map(|((j, k), v)| v * v / (a[j] * a[k]))
        .sum();
    let b_split = (b - split).abs();

    let comm = commutator_term(a, &l);
    let commutator = index_pairs(n)
        .zip(comm.packed())
        .map(|((j, k), c)| {
            let da = 1.0 / a[j] - 1.0 / a[k];
            let lhs = da * b * x[j] * x[k];
            let rhs = c - da * y[j] * y[k];
            (lhs - rhs).abs()
        })
        .fold(0.0, f64::max);

    Ok(IdentityResiduals {
        force,
        b_split,
        commutator,
    })
}

/// Largest Plücker residual `|l_ij l_km − l_ik l_jm + l_im l_jk|` over
/// `i < j < k < m`. Zero for `n ≤ 3`; zero exactly when `l` has rank 2.
pub fn plucker_residual(l: &SkewTensor) -> f64 {
    let n = l.dim();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                for m in k + 1..n {
                    let r = l.get(i, j) * l.get(k, m) - l.get(i, k) * l.get(j, m)
                        + l.get(i, m) * l.get(j, k);
                    worst = worst.max(r.abs());
                }
            }
        }
    }
    worst
}

/// `max_k |v_k − v_0| / max(|v_0|, floor)`.
pub fn relative_drift<I: IntoIterator<Item = f64>>(series: I, floor: f64) -> f64 {
    let mut it = series.into_iter();
    let Some(v0) = it.next() else { return 0.0 };
    let scale = v0.abs().max(floor);
    let worst = it.map(|v| (v - v0).abs()).fold(0.0, f64::max);
    if worst == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// Worst drift and constraint residuals along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub samples: usize,
    pub h: f64,
    pub i: f64,
    pub f: Option<Vec<f64>>,
    pub q0_residual: f64,
    pub tangency_residual: f64,
    pub plucker_residual: f64,
}

impl DriftReport {
    /// Largest relative drift among `H`, `I` and every `F_j`.
    pub fn max_invariant_drift(&self) -> f64 {
        let f = self.f.iter().flatten().copied().fold(0.0, f64::max);
        self.h.max(self.i).max(f)
    }

    pub fn max_constraint_residual(&self) -> f64 {
        self.q0_residual.max(self.tangency_residual)
    }

    /// Flat `(name, value)` list in a stable order.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("H_drift".to_string(), self.h),
            ("I_drift".to_string(), self.i),
        ];
        if let Some(f) = &self.f {
            for (j, v) in f.iter().enumerate() {
                out.push((format!("F_{}_drift", j + 1), *v));
            }
        }
        out.push(("q0_res_max".into(), self.q0_residual));
        out.push(("tan_res_max".into(), self.tangency_residual));
        out.push(("plucker_res_max".into(), self.plucker_residual));
        out
    }
}

pub fn drift_report(samples: &[TrajectorySample]) -> DriftReport {
    let snaps: Vec<&InvariantSnapshot> = samples.iter().map(|s| &s.invariants).collect();
    let h = relative_drift(snaps.iter().map(|s| s.h_free), f64::MIN_POSITIVE);
    let i = relative_drift(snaps.iter().map(|s| s.i), f64::MIN_POSITIVE);
    let f = match snaps.first().and_then(|s| s.f.as_ref()) {
        Some(f0) if snaps.iter().all(|s| s.f.is_some()) => {
            let family: f64 = f0.iter().map(|v| v.abs()).sum();
            let floor = (F_DRIFT_FLOOR * family).max(f64::MIN_POSITIVE);
            Some(
                (0..f0.len())
                    .map(|j| relative_drift(snaps.iter().map(|s| s.f.as_ref().unwrap()[j]), floor))
                    .collect(),
            )
        }
        _ => None,
    };
    let fold =
        |get: fn(&InvariantSnapshot) -> f64| snaps.iter().map(|s| get(s)).fold(0.0, f64::max);
    DriftReport {
        samples: samples.len(),
        h,
        i,
        f,
        q0_residual: fold(|s| s.q0_residual),
        tangency_residual: fold(|s| s.tangency_residual),
        plucker_residual: fold(|s| s.plucker_max_residual),
    }
}
