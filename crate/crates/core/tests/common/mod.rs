#![allow(dead_code)]

use clebsch_geodesic::clebsch_flow::{clebsch_at_times, integrate_clebsch};
use clebsch_geodesic::direct_flow::{integrate_direct, DirectOptions};
use clebsch_geodesic::model::{Ellipsoid, PhaseState, Tolerances};
use clebsch_geodesic::ode::StepControl;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ctl(rtol: f64) -> StepControl {
    StepControl::adaptive(rtol, rtol * 1e-2)
}

/// Perimeter of the ellipse with semi-axes `p`, `q` by the trapezoid rule on
/// `∫₀^{2π} sqrt(p² sin²θ + q² cos²θ) dθ`. The integrand is smooth and
/// periodic, so the rule converges geometrically; 4096 nodes is far past
/// double precision for moderate eccentricity.
pub fn ellipse_perimeter(p: f64, q: f64) -> f64 {
    let m = 4096;
    let h = std::f64::consts::TAU / m as f64;
    (0..m)
        .map(|k| {
            let th = k as f64 * h;
            (p * p * th.sin().powi(2) + q * q * th.cos().powi(2)).sqrt()
        })
        .sum::<f64>()
        * h
}

/// Secant refinement of a root of `g` bracketed by `[lo, hi]`, falling back
/// to bisection whenever the secant leaves the bracket.
pub fn refine_root(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let (mut glo, mut ghi) = (g(lo), g(hi));
    assert!(glo * ghi <= 0.0, "root not bracketed");
    for _ in 0..100 {
        let mut t = hi - ghi * (hi - lo) / (ghi - glo);
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        let gt = g(t);
        if gt == 0.0 || (hi - lo) < 1e-13 {
            return t;
        }
        if (gt < 0.0) == (glo < 0.0) {
            lo = t;
            glo = gt;
        } else {
            hi = t;
            ghi = gt;
        }
        if (hi - lo).abs() < 1e-13 * t.abs().max(1.0) {
            return t;
        }
    }
    0.5 * (lo + hi)
}

fn progress(s0: &PhaseState, x: &[f64]) -> f64 {
    x.iter()
        .zip(&s0.x)
        .zip(&s0.y)
        .map(|((x, x0), y0)| (x - x0) * y0)
        .sum()
}

/// First return time of the direct flow to the hyperplane through `x0`
/// normal to `y0`, crossed in the direction of `y0`, searched on
/// `[0.5·guess, 1.5·guess]`.
pub fn direct_period(e: &Ellipsoid, s0: &PhaseState, guess: f64, rtol: f64) -> f64 {
    let opts = DirectOptions {
        stride: guess / 200.0,
        ..DirectOptions::default()
    };
    let coarse = integrate_direct(e, s0, 1.5 * guess, ctl(rtol), &opts).unwrap();
    let g = |t: f64| {
        let o = DirectOptions {
            stride: t,
            ..DirectOptions::default()
        };
        let out = integrate_direct(e, s0, t, ctl(rtol), &o).unwrap();
        progress(s0, &out.last().unwrap().x)
    };
    let w = coarse
        .windows(2)
        .find(|w| {
            w[0].t > 0.5 * guess && progress(s0, &w[0].x) < 0.0 && progress(s0, &w[1].x) >= 0.0
        })
        .expect("no return crossing");
    refine_root(g, w[0].t, w[1].t)
}

/// Same as [`direct_period`] for the reconstructed Clebsch trajectory, in
/// physical time. `tau_end` must carry the orbit past one return.
pub fn clebsch_period(e: &Ellipsoid, s0: &PhaseState, guess: f64, tau_end: f64, rtol: f64) -> f64 {
    let tol = Tolerances::default();
    let coarse = integrate_clebsch(e, s0, tau_end, ctl(rtol), tau_end / 800.0, &tol).unwrap();
    let g = |t: f64| {
        let out = clebsch_at_times(e, s0, &[t], ctl(rtol), &tol).unwrap();
        progress(s0, &out[0].x)
    };
    let w = coarse
        .windows(2)
        .find(|w| {
            w[0].t > 0.5 * guess && progress(s0, &w[0].x) < 0.0 && progress(s0, &w[1].x) >= 0.0
        })
        .expect("no return crossing");
    refine_root(g, w[0].t, w[1].t)
}
