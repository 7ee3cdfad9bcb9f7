mod common;

use clebsch_geodesic::bvp::{shoot, solve_geodesic_bvp, ShootingProblem};
use clebsch_geodesic::conserved::drift_report;
use clebsch_geodesic::direct_flow::{integrate_direct, DirectOptions};
use clebsch_geodesic::model::{project_constraints, sample_state, Ellipsoid, PhaseState};
use common::{ctl, ellipse_perimeter, rng};

fn dist(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// A point of the unit-speed geodesic from `s0` at arc length `len`.
fn forward_point(e: &Ellipsoid, s0: &PhaseState, len: f64) -> Vec<f64> {
    let opts = DirectOptions {
        stride: len,
        ..DirectOptions::default()
    };
    integrate_direct(e, s0, len, ctl(1e-13), &opts)
        .unwrap()
        .last()
        .unwrap()
        .x
        .clone()
}

#[test]
fn shooting_along_known_orbit_hits() {
    let e = Ellipsoid::new(vec![3.0, 2.0, 1.0]).unwrap();
    let mut r = rng(20);
    let s0 = sample_state(&e, &mut r, 1.0).unwrap();
    let q = forward_point(&e, &s0, 1.3);
    let prob = ShootingProblem::new(e, s0.x.clone(), q).unwrap();
    let miss = shoot(&prob, &s0.y, 1.3).unwrap();
    assert!(miss.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-8);
}

#[test]
fn ellipse_half_perimeter() {
    let e = Ellipsoid::new(vec![4.0, 1.0]).unwrap();
    let mut prob = ShootingProblem::new(e, vec![2.0, 0.0], vec![-2.0, 0.0]).unwrap();
    prob.initial_direction = Some(vec![0.0, 1.0]);
    let sol = solve_geodesic_bvp(&prob).unwrap();
    let oracle = 0.5 * ellipse_perimeter(2.0, 1.0);
    assert!(
        (sol.length - oracle).abs() < 1e-6,
        "{} vs {oracle}",
        sol.length
    );
    assert!(sol.miss < 1e-8);
}

#[test]
fn recovers_known_arc_length() {
    let e = Ellipsoid::new(vec![3.0, 2.0, 1.0]).unwrap();
    let mut r = rng(21);
    let s0 = sample_state(&e, &mut r, 1.0).unwrap();
    let q = forward_point(&e, &s0, 1.5);
    let prob = ShootingProblem::new(e, s0.x.clone(), q).unwrap();
    let sol = solve_geodesic_bvp(&prob).unwrap();
    assert!((sol.length - 1.5).abs() < 1e-6, "{}", sol.length);
    assert!(dist(&sol.direction, &s0.y) < 1e-5);
}

#[test]
fn tiny_offset_is_locally_flat() {
    let e = Ellipsoid::new(vec![3.0, 2.0, 1.0]).unwrap();
    let mut r = rng(22);
    let s = sample_state(&e, &mut r, 1e-3).unwrap();
    let moved: Vec<f64> = s.x.iter().zip(&s.y).map(|(x, y)| x + y).collect();
    let q = project_constraints(&e, &PhaseState::new(moved, s.y.clone()))
        .unwrap()
        .x;
    let chord = dist(&s.x, &q);
    assert!((chord - 1e-3).abs() < 1e-5);
    let prob = ShootingProblem::new(e, s.x.clone(), q).unwrap();
    let sol = solve_geodesic_bvp(&prob).unwrap();
    assert!(
        (sol.length - chord).abs() < 0.01 * chord,
        "{} vs {chord}",
        sol.length
    );
}

#[test]
fn reversed_problem_has_same_length() {
    let e = Ellipsoid::new(vec![3.0, 2.0, 1.0]).unwrap();
    let mut r = rng(23);
    let s0 = sample_state(&e, &mut r, 1.0).unwrap();
    let q = forward_point(&e, &s0, 1.1);
    let fwd =
        solve_geodesic_bvp(&ShootingProblem::new(e.clone(), s0.x.clone(), q.clone()).unwrap())
            .unwrap();
    let back = solve_geodesic_bvp(&ShootingProblem::new(e, q, s0.x.clone()).unwrap()).unwrap();
    assert!(
        (fwd.length - back.length).abs() < 1e-6,
        "{} vs {}",
        fwd.length,
        back.length
    );
}

#[test]
fn returned_trajectories_are_geodesics() {
    let sphere = Ellipsoid::new(vec![1.0, 1.0, 1.0]).unwrap();
    let prob = ShootingProblem::new(sphere, vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]).unwrap();
    let e = Ellipsoid::new(vec![4.0, 1.0]).unwrap();
    let mut ell = ShootingProblem::new(e, vec![2.0, 0.0], vec![-2.0, 0.0]).unwrap();
    ell.initial_direction = Some(vec![0.0, 1.0]);
    for p in [prob, ell] {
        let sol = solve_geodesic_bvp(&p).unwrap();
        let rep = drift_report(&sol.trajectory);
        assert!(rep.max_invariant_drift() < 1e-7, "{rep:?}");
        assert!(rep.max_constraint_residual() < 1e-8, "{rep:?}");
        assert!(dist(&sol.trajectory[0].x, &p.p) < 1e-8);
        assert!(dist(&sol.trajectory.last().unwrap().x, &p.q) < 1e-8);
    }
}
