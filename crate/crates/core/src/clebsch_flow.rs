//! The geodesic flow in Clebsch variables.
//!
//! In local time `dτ = dt / A(x)` the motion becomes the quadratic system
//!
//! ```text
//! dy_j/dτ  = −Σ_k ω_jk y_k
//! dl_jk/dτ = Σ_m (l_jm ω_mk − ω_jm l_mk) − (a_j⁻¹ − a_k⁻¹) y_j y_k,   ω_jk = l_jk/(a_j a_k)
//! ```
//!
//! Physical time is carried as an extra state component with
//! `dt/dτ = A = I₀/B(y)`, where `I₀ = A B` is Joachimsthal's constant fixed at
//! the initial state. The flat layout is `[y (n), l packed (n(n−1)/2), t]`.

use crate::conserved::InvariantSnapshot;
use crate::error::{GeoError, Result};
use crate::model::{
    joachimsthal, reconstruct_x, Ellipsoid, PhaseState, Tolerances, TrajectorySample,
};
use crate::ode::{sample_times, OdeSystem, StepControl, Stepper};
use crate::skew::{index_pairs, packed_len, SkewTensor};

pub fn omega_from_l(e: &Ellipsoid, l: &SkewTensor) -> Result<SkewTensor> {
    e.require_distinct()?;
    let a = e.axes();
    let packed = index_pairs(e.dim())
        .zip(l.packed())
        .map(|((j, k), v)| v / (a[j] * a[k]))
        .collect();
    Ok(SkewTensor::from_packed(e.dim(), packed))
}

/// `[l, ω]_jk = Σ_m (l_jm ω_mk − ω_jm l_mk)` for `j < k`.
///
/// Evaluated as `(a_k⁻¹ − a_j⁻¹) Σ_m l_jm l_mk / a_m`, which is the same sum
/// with the diagonal scaling of `ω` factored out.
pub(crate) fn commutator_term(a: &[f64], l: &SkewTensor) -> SkewTensor {
    let n = a.len();
    let packed = index_pairs(n)
        .map(|(j, k)| {
            let s: f64 = (0..n).map(|m| l.get(j, m) * l.get(m, k) / a[m]).sum();
            (1.0 / a[k] - 1.0 / a[j]) * s
        })
        .collect();
    SkewTensor::from_packed(n, packed)
}

/// Writes the Clebsch vector field into `dy` and packed `dl`.
fn clebsch_field(a: &[f64], y: &[f64], l: &SkewTensor, dy: &mut [f64], dl: &mut [f64]) {
    let n = a.len();
    for j in 0..n {
        dy[j] = -(0..n)
            .map(|k| l.get(j, k) / (a[j] * a[k]) * y[k])
            .sum::<f64>();
    }
    let comm = commutator_term(a, l);
    for (idx, (j, k)) in index_pairs(n).enumerate() {
        dl[idx] = comm.packed()[idx] - (1.0 / a[j] - 1.0 / a[k]) * y[j] * y[k];
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClebschDerivative {
    pub dy: Vec<f64>,
    pub dl: SkewTensor,
}

/// Right-hand side of the Clebsch equations at `(y, l)`.
pub fn clebsch_rhs(e: &Ellipsoid, y: &[f64], l: &SkewTensor) -> Result<ClebschDerivative> {
    e.require_distinct()?;
    e.check_len(y)?;
    if l.dim() != e.dim() {
        return Err(GeoError::DimensionMismatch {
            expected: e.dim(),
            actual: l.dim(),
        });
    }
    let n = e.dim();
    let mut dy = vec![0.0; n];
    let mut dl = SkewTensor::zeros(n);
    clebsch_field(e.axes(), y, l, &mut dy, dl.packed_mut());
    Ok(ClebschDerivative { dy, dl })
}

/// The bare Clebsch system on `[y, l]`, without the time quadrature.
///
/// Defined on all of `(y, l)` space, not only the rank-2 locus.
pub struct ClebschSystem {
    a: Vec<f64>,
}

impl ClebschSystem {
    pub fn new(e: &Ellipsoid) -> Result<Self> {
        e.require_distinct()?;
        Ok(Self {
            a: e.axes().to_vec(),
        })
    }
}

impl OdeSystem for ClebschSystem {
    fn dim(&self) -> usize {
        let n = self.a.len();
        n + packed_len(n)
    }

    fn rhs(&self, _tau: f64, z: &[f64], dz: &mut [f64]) {
        let n = self.a.len();
        let l = SkewTensor::from_packed(n, z[n..].to_vec());
        let (dy, dl) = dz.split_at_mut(n);
        clebsch_field(&self.a, &z[..n], &l, dy, dl);
    }
}

/// Clebsch system augmented with `dt/dτ = I₀/B(y)`.
struct AugmentedSystem {
    a: Vec<f64>,
    i0: f64,
}

impl AugmentedSystem {
    fn n(&self) -> usize {
        self.a.len()
    }

    fn b_form(&self, y: &[f64]) -> f64 {
        y.iter().zip(&self.a).map(|(y, a)| y * y / a).sum()
    }
}

impl OdeSystem for AugmentedSystem {
    fn dim(&self) -> usize {
        let n = self.n();
        n + packed_len(n) + 1
    }

    fn rhs(&self, _tau: f64, z: &[f64], dz: &mut [f64]) {
        let n = self.n();
        let m = packed_len(n);
        let l = SkewTensor::from_packed(n, z[n..n + m].to_vec());
        let (dy, rest) = dz.split_at_mut(n);
        let (dl, dt) = rest.split_at_mut(m);
        clebsch_field(&self.a, &z[..n], &l, dy, dl);
        dt[0] = self.i0 / self.b_form(&z[..n]);
    }
}

/// `(y, l)` together with Joachimsthal's constant `I₀ = c²`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedClebschState {
    pub c: crate::model::ClebschState,
    pub i0: f64,
}

impl AugmentedClebschState {
    pub fn from_phase(e: &Ellipsoid, s: &PhaseState, tol: &Tolerances) -> Result<Self> {
        e.require_distinct()?;
        let c = crate::model::to_clebsch(e, s, tol.constraint)?;
        let b = e.b_form(&c.y);
        if !(b > tol.eps_b) {
            return Err(GeoError::ZeroVelocity { b });
        }
        Ok(Self {
            c,
            i0: joachimsthal(e, s),
        })
    }

    fn flat(&self) -> Vec<f64> {
        let mut z = self.c.y.clone();
        z.extend_from_slice(self.c.l.packed());
        z.push(self.c.t);
        z
    }
}

fn sample_from_flat(e: &Ellipsoid, tau: f64, z: &[f64], eps_b: f64) -> Result<TrajectorySample> {
    let n = e.dim();
    let m = packed_len(n);
    let y = z[..n].to_vec();
    let l = SkewTensor::from_packed(n, z[n..n + m].to_vec());
    let x = reconstruct_x(e, &y, &l, eps_b)?;
    let invariants = InvariantSnapshot::new(e, &x, &y, &l);
    Ok(TrajectorySample {
        t: z[n + m],
        tau: Some(tau),
        x,
        y,
        invariants,
    })
}

fn check_velocity(e: &Ellipsoid, z: &[f64], eps_b: f64) -> Result<()> {
    let b = e.b_form(&z[..e.dim()]);
    if !(b > eps_b) {
        return Err(GeoError::ZeroVelocity { b });
    }
    Ok(())
}

/// Integrates the augmented Clebsch system over `τ ∈ [0, tau_end]`, emitting
/// a sample every `stride` units of local time (steps land on sample times
/// exactly). Each sample carries the reconstructed position and `t(τ)`.
pub fn integrate_clebsch(
    e: &Ellipsoid,
    s0: &PhaseState,
    tau_end: f64,
    ctl: StepControl,
    stride: f64,
    tol: &Tolerances,
) -> Result<Vec<TrajectorySample>> {
    if !(tau_end > 0.0) || !(stride > 0.0) {
        return Err(GeoError::InvalidProblem(format!(
            "need tau_end > 0 and stride > 0 (tau_end={tau_end}, stride={stride})"
        )));
    }
    let init = AugmentedClebschState::from_phase(e, s0, tol)?;
    let sys = AugmentedSystem {
        a: e.axes().to_vec(),
        i0: init.i0,
    };
    let grid = sample_times(0.0, tau_end, stride);
    let z0 = init.flat();
    let mut out = Vec::with_capacity(grid.len());
    out.push(sample_from_flat(e, 0.0, &z0, tol.eps_b)?);

    let mut stepper = Stepper::new(&sys, 0.0, &z0, ctl)?;
    for &tau in &grid[1..] {
        while stepper.t() < tau {
            stepper.step(tau)?;
            check_velocity(e, stepper.state(), tol.eps_b)?;
        }
        out.push(sample_from_flat(e, tau, stepper.state(), tol.eps_b)?);
    }
    Ok(out)
}

const NEWTON_MAX_ITER: usize = 30;

/// Clebsch samples at prescribed physical times (ascending, `≥ 0`).
///
/// For each target the local-time increment is found by Newton iteration on
/// `t(τ)` using `dτ/dt = B(y)/I₀`, re-integrating from the previous target.
/// Results are exact hits of the integrator, not interpolants.
pub fn clebsch_at_times(
    e: &Ellipsoid,
    s0: &PhaseState,
    times: &[f64],
    ctl: StepControl,
    tol: &Tolerances,
) -> Result<Vec<TrajectorySample>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < 0.0) {
        return Err(GeoError::InvalidProblem(
            "target times must be ascending and non-negative".into(),
        ));
    }
    let init = AugmentedClebschState::from_phase(e, s0, tol)?;
    let sys = AugmentedSystem {
        a: e.axes().to_vec(),
        i0: init.i0,
    };
    let n = e.dim();
    let t_idx = n + packed_len(n);

    let mut tau_c = 0.0;
    let mut z_c = init.flat();
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let gap = target - z_c[t_idx];
        if gap <= 0.0 {
            out.push(sample_from_flat(e, tau_c, &z_c, tol.eps_b)?);
            continue;
        }
        let mut dtau = gap * sys.b_form(&z_c[..n]) / sys.i0;
        let mut hit = None;
        for _ in 0..NEWTON_MAX_ITER {
            let mut stepper = Stepper::new(&sys, tau_c, &z_c, ctl)?;
            let tau_goal = tau_c + dtau;
            while stepper.t() < tau_goal {
                stepper.step(tau_goal)?;
                check_velocity(e, stepper.state(), tol.eps_b)?;
            }
            let z = stepper.state();
            let miss = target - z[t_idx];
            if miss.abs() <= 1e-13 * target.abs().max(1.0) {
                hit = Some((tau_goal, z.to_vec()));
                break;
            }
            dtau += miss * sys.b_form(&z[..n]) / sys.i0;
            if !(dtau > 0.0) {
                dtau = 0.5 * (tau_goal - tau_c);
            }
        }
        let Some((tau, z)) = hit else {
            return Err(GeoError::NoConvergence {
                iterations: NEWTON_MAX_ITER,
                miss: f64::NAN,
            });
        };
        tau_c = tau;
        z_c = z;
        out.push(sample_from_flat(e, tau_c, &z_c, tol.eps_b)?);
    }
    Ok(out)
}

/// Monotone two-way map between local time `τ` and physical time `t`.
///
/// Nodes are the sample pairs `(τ_k, t_k)`; between nodes a cubic Hermite
/// interpolant uses the exact slopes `dt/dτ = A(x_k)` (and `1/A` for the
/// inverse), with Fritsch–Carlson limiting so each piece stays monotone.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMap {
    tau: Vec<f64>,
    t: Vec<f64>,
    dt_dtau: Vec<f64>,
}

impl TimeMap {
    pub fn from_samples(e: &Ellipsoid, samples: &[TrajectorySample]) -> Result<Self> {
        let mut tau = Vec::with_capacity(samples.len());
        for s in samples {
            tau.push(
                s.tau
                    .ok_or_else(|| GeoError::InvalidProblem("sample without local time".into()))?,
            );
        }
        let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
        for k in 1..samples.len() {
            if !(t[k] > t[k - 1]) || !(tau[k] > tau[k - 1]) {
                return Err(GeoError::NonMonotoneTime(k));
            }
        }
        let dt_dtau = samples.iter().map(|s| e.a_form(&s.x)).collect();
        Ok(Self { tau, t, dt_dtau })
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.tau.iter().copied().zip(self.t.iter().copied())
    }

    /// Physical time at local time `tau`; `None` outside the sampled range.
    pub fn t_of_tau(&self, tau: f64) -> Option<f64> {
        monotone_hermite(&self.tau, &self.t, |k| self.dt_dtau[k], tau)
    }

    /// Local time at physical time `t`; `None` outside the sampled range.
    pub fn tau_of_t(&self, t: f64) -> Option<f64> {
        monotone_hermite(&self.t, &self.tau, |k| 1.0 / self.dt_dtau[k], t)
    }
}

fn monotone_hermite(xs: &[f64], ys: &[f64], slope: impl Fn(usize) -> f64, x: f64) -> Option<f64> {
    let last = xs.len().checked_sub(1)?;
    if x < xs[0] || x > xs[last] {
        return None;
    }
    if last == 0 {
        return Some(ys[0]);
    }
    let k = match xs.partition_point(|v| *v <= x) {
        0 => 0,
        p => (p - 1).min(last - 1),
    };
    let h = xs[k + 1] - xs[k];
    let secant = (ys[k + 1] - ys[k]) / h;
    let (mut m0, mut m1) = (slope(k), slope(k + 1));
    if secant > 0.0 {
        let (alpha, beta) = (m0 / secant, m1 / secant);
        let r2 = alpha * alpha + beta * beta;
        if r2 > 9.0 {
            let scale = 3.0 / r2.sqrt();
            m0 = scale * alpha * secant;
            m1 = scale * beta * secant;
        }
    }
    let s = (x - xs[k]) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    Some(h00 * ys[k] + h10 * h * m0 + h01 * ys[k + 1] + h11 * h * m1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_state, to_clebsch};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn omega_examples() {
        let e = Ellipsoid::new(vec![1.0, 4.0]).unwrap();
        let w = omega_from_l(&e, &SkewTensor::from_packed(2, vec![1.0])).unwrap();
        assert_eq!(w.get(0, 1), 0.25);
        assert_eq!(w.get(1, 0), -0.25);
        let w = omega_from_l(&e, &SkewTensor::zeros(2)).unwrap();
        assert_eq!(w.packed(), &[0.0]);

        let e3 = Ellipsoid::new(vec![3.0, 2.0, 1.0]).unwrap();
        let mut l = SkewTensor::zeros(3);
        l.set(0, 2, 2.0);
        assert!((omega_from_l(&e3, &l).unwrap().get(0, 2) - 2.0 / 3.0).abs() < 1e-16);

        let sphere = Ellipsoid::new(vec![4.0, 4.0, 4.0]).unwrap();
        assert!(matches!(
            omega_from_l(&sphere, &SkewTensor::zeros(3)),
            Err(GeoError::DuplicateAxis { .. })
        ));
    }

    #[test]
    fn commutator_matches_dense_product() {
        let a = [3.0, 2.0, 1.5, 0.7];
        let l = SkewTensor::from_packed(4, vec![0.3, -1.2, 0.5, 0.9, -0.4, 1.1]);
        let lf = l.to_dense();
        let w: Vec<Vec<f64>> = (0..4)
            .map(|j| (0..4).map(|k| lf[j][k] / (a[j] * a[k])).collect())
            .collect();
        let c = commutator_term(&a, &l);
        for (j, k) in index_pairs(4) {
            let direct: f64 = (0..4)
                .map(|m| lf[j][m] * w[m][k] - w[j][m] * lf[m][k])
                .sum();
            assert!((c.get(j, k) - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn rhs_hand_case() {
        let e = Ellipsoid::new(vec![1.0, 4.0]).unwrap();
        let d = clebsch_rhs(&e, &[0.0, 1.0], &SkewTensor::from_packed(2, vec![1.0])).unwrap();
        assert_eq!(d.dy, vec![-0.25, 0.0]);
        assert_eq!(d.dl.packed(), &[0.0]);
    }

    #[test]
    fn rhs_at_rest_is_pure_commutator() {
        let e = Ellipsoid::new(vec![3.0, 2.0, 1.0]).unwrap();
        let l = SkewTensor::from_packed(3, vec![0.4, -0.8, 1.3]);
        let d = clebsch_rhs(&e, &[0.0; 3], &l).unwrap();
        assert_eq!(d.dy, vec![0.0; 3]);
        assert_eq!(d.dl, commutator_term(e.axes(), &l));
    }

    #[test]
    fn rhs_velocity_part_matches_direct_force() {
        let e = Ellipsoid::new(vec![3.0, 2.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let s = sample_state(&e, &mut rng, 1.0).unwrap();
            let c = to_clebsch(&e, &s, 1e-9).unwrap();
            let d = clebsch_rhs(&e, &c.y, &c.l).unwrap();
            let b = e.b_form(&s.y);
            for j in 0..3 {
                assert!((d.dy[j] + b * s.x[j] / e.axes()[j]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn zero_velocity_start_is_rejected() {
        let e = Ellipsoid::new(vec![3.0, 2.0, 1.0]).unwrap();
        let s = PhaseState::new(vec![3f64.sqrt(), 0.0, 0.0], vec![0.0; 3]);
        let r = integrate_clebsch(
            &e,
            &s,
            1.0,
            StepControl::default(),
            0.5,
            &Tolerances::default(),
        );
        assert!(matches!(r, Err(GeoError::ZeroVelocity { .. })));
    }

    #[test]
    fn time_map_basics() {
        let e = Ellipsoid::new(vec![4.0, 4.000001, 3.999999]).unwrap();
        let s = PhaseState::new(vec![2.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]);
        let tol = Tolerances::default();
        let samples = integrate_clebsch(&e, &s, 20.0, StepControl::default(), 0.05, &tol).unwrap();
        let map = TimeMap::from_samples(&e, &samples).unwrap();
        assert_eq!(map.t_of_tau(0.0), Some(0.0));
        for tau in [0.0, 1.3, 7.77, 19.99] {
            let t = map.t_of_tau(tau).unwrap();
            assert!((t - 0.25 * tau).abs() < 1e-4);
        }
        assert_eq!(map.t_of_tau(25.0), None);
    }

    #[test]
    fn time_map_round_trip() {
        let e = Ellipsoid::new(vec![3.0, 2.0, 1.0]).unwrap();
        let s = sample_state(&e, &mut ChaCha8Rng::seed_from_u64(1), 1.0).unwrap();
        let tol = Tolerances::default();
        let samples = integrate_clebsch(&e, &s, 30.0, StepControl::default(), 0.01, &tol).unwrap();
        let map = TimeMap::from_samples(&e, &samples).unwrap();
        let t_max = samples.last().unwrap().t;
        for k in 0..200 {
            let t = t_max * k as f64 / 199.0;
            let back = map.t_of_tau(map.tau_of_t(t).unwrap()).unwrap();
            assert!((back - t).abs() < 1e-8, "t={t} back={back}");
        }
    }

    #[test]
    fn time_map_rejects_non_monotone() {
        let e = Ellipsoid::new(vec![3.0, 2.0, 1.0]).unwrap();
        let s = sample_state(&e, &mut ChaCha8Rng::seed_from_u64(1), 1.0).unwrap();
        let tol = Tolerances::default();
        let mut samples =
            integrate_clebsch(&e, &s, 2.0, StepControl::default(), 0.5, &tol).unwrap();
        samples[2].t = samples[1].t;
        assert!(matches!(
            TimeMap::from_samples(&e, &samples),
            Err(GeoError::NonMonotoneTime(2))
        ));
    }

    #[test]
    fn at_times_hits_targets() {
        let e = Ellipsoid::new(vec![3.0, 2.0, 1.0]).unwrap();
        let s = sample_state(&e, &mut ChaCha8Rng::seed_from_u64(3), 1.0).unwrap();
        let times: Vec<f64> = (0..=10).map(|k| 0.5 * k as f64).collect();
        let out = clebsch_at_times(
            &e,
            &s,
            &times,
            StepControl::default(),
            &Tolerances::default(),
        )
        .unwrap();
        for (sample, t) in out.iter().zip(&times) {
            assert!((sample.t - t).abs() < 1e-12);
        }
        for (u, v) in out[0].x.iter().zip(&s.x) {
            assert!((u - v).abs() < 1e-14);
        }
    }
}
