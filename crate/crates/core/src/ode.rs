//! Explicit Runge–Kutta integration over flat `f64` state vectors.
//!
//! Two step modes are offered: classical fixed-step RK4, and the
//! Dormand–Prince 5(4) embedded pair with proportional step-size control.
//! [`Stepper`] exposes single accepted steps that never overshoot a caller
//! supplied limit, so flows can land exactly on output times and modify the
//! state between steps (constraint projection).

use crate::error::{GeoError, Result};

/// Right-hand side of `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

/// Adapts a closure into an [`OdeSystem`].
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> OdeSystem for FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.f)(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub mode: StepMode,
    /// Step size in fixed mode.
    pub h: f64,
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Cap on attempted steps (accepted plus rejected) per integration.
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            mode: StepMode::Adaptive,
            h: 1e-3,
            rtol: 1e-10,
            atol: 1e-12,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
        }
    }
}

impl StepControl {
    pub fn adaptive(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn fixed(h: f64) -> Self {
        Self {
            mode: StepMode::Fixed,
            h,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GeoError::InvalidControl(msg));
        if self.mode == StepMode::Fixed && !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("fixed step h must be positive, got {}", self.h));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad(format!(
                "tolerances must be positive (rtol={}, atol={})",
                self.rtol, self.atol
            ));
        }
        if !(self.h_min > 0.0 && self.h_min <= self.h_max) {
            return bad(format!(
                "need 0 < h_min <= h_max (h_min={}, h_max={})",
                self.h_min, self.h_max
            ));
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        Ok(())
    }
}

/// One classical RK4 step.
pub fn rk4_step<S: OdeSystem + ?Sized>(sys: &S, t: f64, y: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(GeoError::InvalidControl(format!(
            "rk4 step needs h > 0, got {h}"
        )));
    }
    let n = y.len();
    let mut k1 = vec![0.0; n];
    sys.rhs(t, y, &mut k1);
    let out = rk4_from_derivative(sys, t, y, &k1, h);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(GeoError::NonFiniteState { t: t + h })
    }
}

fn rk4_from_derivative<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    k1: &[f64],
    h: f64,
) -> Vec<f64> {
    let n = y.len();
    let mut tmp = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    sys.rhs(t + 0.5 * h, &tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    sys.rhs(t + 0.5 * h, &tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    sys.rhs(t + h, &tmp, &mut k4);
    (0..n)
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// difference between the 5th- and 4th-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

// quartic dense-output correction weights
const DENSE: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const GROW_MAX: f64 = 5.0;
const SHRINK_MIN: f64 = 0.2;

/// Incremental integrator holding the current time, state and derivative.
pub struct Stepper<'a, S: OdeSystem + ?Sized> {
    sys: &'a S,
    ctl: StepControl,
    t: f64,
    y: Vec<f64>,
    dy: Vec<f64>,
    /// Next trial step; zero until the first step picks one.
    h: f64,
    attempts: usize,
    accepted: usize,
    stages: Vec<Vec<f64>>,
    /// Start time, start state and length of the last accepted step while
    /// its stages are still valid for dense output.
    last: Option<(f64, Vec<f64>, f64)>,
}

impl<'a, S: OdeSystem + ?Sized> Stepper<'a, S> {
    pub fn new(sys: &'a S, t0: f64, y0: &[f64], ctl: StepControl) -> Result<Self> {
        ctl.validate()?;
        if y0.len() != sys.dim() {
            return Err(GeoError::DimensionMismatch {
                expected: sys.dim(),
                actual: y0.len(),
            });
        }
        let mut dy = vec![0.0; y0.len()];
        sys.rhs(t0, y0, &mut dy);
        let h = if ctl.mode == StepMode::Fixed {
            ctl.h
        } else {
            0.0
        };
        Ok(Self {
            sys,
            ctl,
            t: t0,
            y: y0.to_vec(),
            dy,
            h,
            attempts: 0,
            accepted: 0,
            stages: vec![vec![0.0; y0.len()]; 7],
            last: None,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64] {
        &self.y
    }

    pub fn derivative(&self) -> &[f64] {
        &self.dy
    }

    pub fn accepted_steps(&self) -> usize {
        self.accepted
    }

    /// Replaces the current state (e.g. after a projection) and refreshes the
    /// cached derivative.
    pub fn reset_state(&mut self, y: &[f64]) {
        self.y.copy_from_slice(y);
        self.sys.rhs(self.t, &self.y, &mut self.dy);
        self.last = None;
    }

    /// Continuous extension over the last accepted step.
    ///
    /// Adaptive steps use the Dormand–Prince quartic interpolant (the cubic
    /// Hermite polynomial plus a stage-based correction); fixed RK4 steps use
    /// cubic Hermite. `None` if `t` lies outside the step or the state was
    /// reset since.
    pub fn dense_eval(&self, t: f64) -> Option<Vec<f64>> {
        let (t0, y0, h) = self.last.as_ref()?;
        let theta = (t - t0) / h;
        if !(0.0..=1.0).contains(&theta) {
            return None;
        }
        let theta1 = 1.0 - theta;
        let k = &self.stages;
        Some(
            (0..y0.len())
                .map(|i| {
                    let diff = self.y[i] - y0[i];
                    let bspl = h * k[0][i] - diff;
                    let r4 = diff - h * self.dy[i] - bspl;
                    let r5 = match self.ctl.mode {
                        StepMode::Adaptive => h * (0..7).map(|s| DENSE[s] * k[s][i]).sum::<f64>(),
                        StepMode::Fixed => 0.0,
                    };
                    y0[i] + theta * (diff + theta1 * (bspl + theta * (r4 + theta1 * r5)))
                })
                .collect(),
        )
    }

    fn error_scale(&self, i: usize, y_new: &[f64]) -> f64 {
        self.ctl.atol + self.ctl.rtol * self.y[i].abs().max(y_new[i].abs())
    }

    fn initial_step(&self, span: f64) -> f64 {
        let n = self.y.len() as f64;
        let sc = |v: f64| self.ctl.atol + self.ctl.rtol * v.abs();
        let rms = |v: &[f64], base: &[f64]| {
            (v.iter()
                .zip(base)
                .map(|(v, b)| (v / sc(*b)).powi(2))
                .sum::<f64>()
                / n)
                .sqrt()
        };
        let d0 = rms(&self.y, &self.y);
        let d1 = rms(&self.dy, &self.y);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0 = h0.min(span);
        let y1: Vec<f64> = self
            .y
            .iter()
            .zip(&self.dy)
            .map(|(y, d)| y + h0 * d)
            .collect();
        let mut f1 = vec![0.0; self.y.len()];
        self.sys.rhs(self.t + h0, &y1, &mut f1);
        let diff: Vec<f64> = f1.iter().zip(&self.dy).map(|(a, b)| a - b).collect();
        let d2 = rms(&diff, &self.y) / h0;
        let dmax = d1.max(d2);
        let h1 = if dmax <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dmax).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.ctl.h_max).max(self.ctl.h_min)
    }

    /// Takes one accepted step, never passing `t_limit`. A step that would
    /// reach `t_limit` is truncated to land on it exactly.
    pub fn step(&mut self, t_limit: f64) -> Result<()> {
        let remaining = t_limit - self.t;
        if !(remaining > 0.0) {
            return Err(GeoError::InvalidControl(format!(
                "step limit {t_limit} not ahead of current time {}",
                self.t
            )));
        }
        match self.ctl.mode {
            StepMode::Fixed => self.step_fixed(t_limit),
            StepMode::Adaptive => self.step_adaptive(t_limit),
        }
    }

    fn step_fixed(&mut self, t_limit: f64) -> Result<()> {
        self.bump_attempts()?;
        let remaining = t_limit - self.t;
        let (h, lands) = if self.ctl.h >= remaining * (1.0 - 1e-12) {
            (remaining, true)
        } else {
            (self.ctl.h, false)
        };
        let y_new = rk4_from_derivative(self.sys, self.t, &self.y, &self.dy, h);
        if !y_new.iter().all(|v| v.is_finite()) {
            return Err(GeoError::NonFiniteState { t: self.t + h });
        }
        self.stages[0].copy_from_slice(&self.dy);
        self.last = Some((self.t, std::mem::replace(&mut self.y, y_new), h));
        self.t = if lands { t_limit } else { self.t + h };
        self.sys.rhs(self.t, &self.y, &mut self.dy);
        self.accepted += 1;
        Ok(())
    }

    fn bump_attempts(&mut self) -> Result<()> {
        self.attempts += 1;
        if self.attempts > self.ctl.max_steps {
            return Err(GeoError::MaxStepsExceeded(self.ctl.max_steps));
        }
        Ok(())
    }

    fn step_adaptive(&mut self, t_limit: f64) -> Result<()> {
        if self.h == 0.0 {
            self.h = self.initial_step(t_limit - self.t);
        }
        let n = self.y.len();
        let mut y_new = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        loop {
            self.bump_attempts()?;
            let remaining = t_limit - self.t;
            let (h, lands) = if self.h >= remaining * (1.0 - 1e-12) {
                (remaining, true)
            } else {
                (self.h, false)
            };

            self.stages[0].copy_from_slice(&self.dy);
            for s in 1..7 {
                for (i, t) in tmp.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (r, coef) in A[s].iter().enumerate().take(s) {
                        acc += coef * self.stages[r][i];
                    }
                    *t = self.y[i] + h * acc;
                }
                if s == 6 {
                    y_new.copy_from_slice(&tmp);
                }
                self.sys.rhs(self.t + C[s] * h, &tmp, &mut self.stages[s]);
            }

            let mut err: f64 = 0.0;
            let mut finite = true;
            for i in 0..n {
                let e: f64 = h * (0..7).map(|s| E[s] * self.stages[s][i]).sum::<f64>();
                let ratio = e.abs() / self.error_scale(i, &y_new);
                if !ratio.is_finite() || !y_new[i].is_finite() {
                    finite = false;
                }
                err = err.max(ratio);
            }

            if finite && err <= 1.0 {
                let factor = if err == 0.0 {
                    GROW_MAX
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(SHRINK_MIN, GROW_MAX)
                };
                std::mem::swap(&mut self.y, &mut y_new);
                self.last = Some((self.t, y_new, h));
                self.t = if lands { t_limit } else { self.t + h };
                // FSAL: the last stage is f(t + h, y_new)
                self.dy.copy_from_slice(&self.stages[6]);
                // a truncated landing step keeps the controller's proposal
                let proposed = if lands {
                    self.h.max(h * factor)
                } else {
                    h * factor
                };
                self.h = proposed.min(self.ctl.h_max);
                self.accepted += 1;
                return Ok(());
            }

            let factor = if finite {
                (SAFETY * err.powf(-0.2)).clamp(SHRINK_MIN, 1.0)
            } else {
                SHRINK_MIN
            };
            self.h = h * factor;
            if self.h < self.ctl.h_min {
                return Err(if finite {
                    GeoError::StepUnderflow {
                        t: self.t,
                        h: self.h,
                    }
                } else {
                    GeoError::NonFiniteState { t: self.t }
                });
            }
        }
    }
}

/// Integrates from `t0` to `t1`, calling `observer(t, state)` after every
/// accepted step. The final call is made at exactly `t1`.
pub fn adaptive_integrate<S, O>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t1: f64,
    ctl: StepControl,
    mut observer: O,
) -> Result<Vec<f64>>
where
    S: OdeSystem + ?Sized,
    O: FnMut(f64, &[f64]),
{
    if !(t1 > t0) {
        return Err(GeoError::InvalidControl(format!(
            "need t1 > t0 (t0={t0}, t1={t1})"
        )));
    }
    let mut stepper = Stepper::new(sys, t0, y0, ctl)?;
    while stepper.t() < t1 {
        stepper.step(t1)?;
        observer(stepper.t(), stepper.state());
    }
    Ok(stepper.state().to_vec())
}

/// Output grid `t0, t0 + stride, ...` up to and including `t1`.
///
/// A grid point within `1e-9 · stride` of `t1` is merged into it.
pub fn sample_times(t0: f64, t1: f64, stride: f64) -> Vec<f64> {
    let mut out = vec![t0];
    let mut k = 1usize;
    loop {
        let t = t0 + k as f64 * stride;
        if t >= t1 - 1e-9 * stride {
            break;
        }
        out.push(t);
        k += 1;
    }
    if t1 > t0 {
        out.push(t1);
    }
    out
}

/// Dense output on the grid from [`sample_times`], interpolating between
/// accepted steps with [`Stepper::dense_eval`]. Endpoints are exact.
pub fn sample_trajectory<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t1: f64,
    ctl: StepControl,
    stride: f64,
) -> Result<Vec<(f64, Vec<f64>)>> {
    if !(stride > 0.0) {
        return Err(GeoError::InvalidControl(format!(
            "stride must be positive, got {stride}"
        )));
    }
    if !(t1 > t0) {
        return Err(GeoError::InvalidControl(format!(
            "need t1 > t0 (t0={t0}, t1={t1})"
        )));
    }
    let grid = sample_times(t0, t1, stride);
    let mut out = Vec::with_capacity(grid.len());
    out.push((t0, y0.to_vec()));
    let mut next = 1;

    let mut stepper = Stepper::new(sys, t0, y0, ctl)?;
    while stepper.t() < t1 {
        stepper.step(t1)?;
        let tb = stepper.t();
        while next < grid.len() && grid[next] <= tb {
            let tg = grid[next];
            let y = if tg == tb {
                stepper.state().to_vec()
            } else {
                stepper.dense_eval(tg).expect("grid point inside last step")
            };
            out.push((tg, y));
            next += 1;
        }
    }
    Ok(out)
}
