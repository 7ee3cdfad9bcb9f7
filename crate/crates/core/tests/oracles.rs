mod common;

use std::f64::consts::PI;

use clebsch_geodesic::clebsch_flow::{clebsch_at_times, integrate_clebsch};
use clebsch_geodesic::direct_flow::{integrate_direct, DirectOptions};
use clebsch_geodesic::model::{Ellipsoid, PhaseState, Tolerances};
use common::{clebsch_period, ctl, direct_period, ellipse_perimeter};

#[test]
fn perimeter_oracle_matches_known_values() {
    assert!((ellipse_perimeter(1.0, 1.0) - 2.0 * PI).abs() < 1e-13);
    // 8 E(3/4) from the arithmetic-geometric mean
    assert!((ellipse_perimeter(2.0, 1.0) - 9.688448220547675).abs() < 1e-12);
}

#[test]
fn sphere_great_circle_period() {
    let e = Ellipsoid::new(vec![4.0, 4.0, 4.0]).unwrap();
    let s0 = PhaseState::new(vec![2.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]);
    let period = direct_period(&e, &s0, 4.0 * PI, 1e-12);
    assert!((period - 4.0 * PI).abs() < 1e-6, "period {period}");

    let opts = DirectOptions {
        stride: 4.0 * PI,
        ..DirectOptions::default()
    };
    let out = integrate_direct(&e, &s0, 4.0 * PI, ctl(1e-12), &opts).unwrap();
    let last = out.last().unwrap();
    let err = last
        .x
        .iter()
        .zip(&s0.x)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-6, "return error {err}");
}

#[test]
fn ellipse_period_direct() {
    let e = Ellipsoid::new(vec![4.0, 1.0]).unwrap();
    let s0 = PhaseState::new(vec![2.0, 0.0], vec![0.0, 1.0]);
    let oracle = ellipse_perimeter(2.0, 1.0);
    let period = direct_period(&e, &s0, oracle, 1e-12);
    assert!((period - oracle).abs() < 1e-6, "{period} vs {oracle}");
}

#[test]
fn ellipse_period_clebsch() {
    let e = Ellipsoid::new(vec![4.0, 1.0]).unwrap();
    let s0 = PhaseState::new(vec![2.0, 0.0], vec![0.0, 1.0]);
    let oracle = ellipse_perimeter(2.0, 1.0);
    // dt/dτ = A(x) ∈ [1/4, 1] on this orbit, so one period is at most 4·oracle in τ
    let period = clebsch_period(&e, &s0, oracle, 4.5 * oracle, 1e-12);
    assert!((period - oracle).abs() < 1e-6, "{period} vs {oracle}");
}

#[test]
fn near_sphere_clebsch_period() {
    let e = Ellipsoid::new(vec![4.0, 4.000001, 3.999999]).unwrap();
    let s0 = PhaseState::new(vec![2.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]);
    let period = clebsch_period(&e, &s0, 4.0 * PI, 4.5 * 4.0 * PI, 1e-12);
    assert!((period - 4.0 * PI).abs() < 1e-4, "period {period}");
}

#[test]
fn planar_section_stays_planar() {
    let e = Ellipsoid::new(vec![3.0, 2.0, 1.0]).unwrap();
    let th: f64 = 0.7;
    let x = [3f64.sqrt() * th.cos(), 2f64.sqrt() * th.sin(), 0.0];
    let t = [-3f64.sqrt() * th.sin(), 2f64.sqrt() * th.cos(), 0.0];
    let sp = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    let s0 = PhaseState::new(x.to_vec(), t.iter().map(|v| v / sp).collect());
    let opts = DirectOptions::default();
    let out = integrate_direct(&e, &s0, 50.0, ctl(1e-10), &opts).unwrap();
    let worst = out.iter().map(|s| s.x[2].abs()).fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");

    let tol = Tolerances::default();
    let out = integrate_clebsch(&e, &s0, 200.0, ctl(1e-10), 0.1, &tol).unwrap();
    assert!(out.last().unwrap().t > 50.0);
    let worst = out
        .iter()
        .filter(|s| s.t <= 50.0)
        .map(|s| s.x[2].abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn clebsch_hits_requested_times() {
    let e = Ellipsoid::new(vec![4.0, 1.0]).unwrap();
    let s0 = PhaseState::new(vec![2.0, 0.0], vec![0.0, 1.0]);
    let half = 0.5 * ellipse_perimeter(2.0, 1.0);
    let out = clebsch_at_times(&e, &s0, &[half], ctl(1e-12), &Tolerances::default()).unwrap();
    assert!((out[0].t - half).abs() < 1e-12);
    assert!((out[0].x[0] + 2.0).abs() < 1e-8 && out[0].x[1].abs() < 1e-8);
}
