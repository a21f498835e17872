use nalgebra::{DVector, Vector3};

use super::*;
use crate::slq::{solve, Horizon, OcpDefinition, SolverSettings};

fn model() -> QuadrupedModel {
    QuadrupedModel::new(RobotParams::default()).unwrap()
}

fn standing_state(m: &QuadrupedModel) -> DVector<f64> {
    m.default_state(&Vector3::new(0.0, 0.0, 0.45), 0.0)
}

fn ocp(gait: GaitSchedule) -> QuadrupedOcp {
    QuadrupedOcp::new(
        model(),
        gait,
        &SwingProfile::default(),
        &CostWeights::default(),
        BaseCommand::default(),
        origin_anchor(0.45),
        Horizon::new(0.0, 1.0, 100),
    )
    .unwrap()
}

fn standing_input() -> DVector<f64> {
    equilibrium_input(&RobotParams::default(), &GaitSchedule::standing()).unwrap()
}

#[test]
fn equilibrium_input_values() {
    let u = standing_input();
    for leg in Leg::ALL {
        assert!((leg_force(&u, leg).z - 73.575).abs() < 1e-12);
    }
    assert_eq!(u.rows(JOINT_VELOCITIES, 12).amax(), 0.0);
    assert!(equilibrium_input(&RobotParams::default(), &GaitSchedule::trot(0.7)).is_err());
    let m = model();
    let dx = m.eom(&standing_state(&m), &u).unwrap();
    assert!(dx.rows(OMEGA, 6).amax() <= 1e-10);
}

#[test]
fn single_foot_torque_arithmetic() {
    let r = Vector3::new(0.3, 0.2, -0.45);
    let f = Vector3::new(0.0, 0.0, 120.0);
    assert!((r.cross(&f) - Vector3::new(24.0, -36.0, 0.0)).amax() < 1e-12);
}

#[test]
fn default_footprint_is_echoed() {
    let params = RobotParams::default();
    let q0 = params.default_joints();
    let feet = forward_kinematics(&params, &q0, &Vector3::zeros(), &Vector3::zeros());
    for leg in Leg::ALL {
        assert!((feet[leg.index()] - params.default_foot(leg)).amax() < 1e-12);
    }
}

#[test]
fn foot_velocity_examples() {
    let m = model();
    let mut x = standing_state(&m);
    let u = standing_input();
    for leg in Leg::ALL {
        assert!(m.foot_velocity(&x, &u, leg).unwrap().amax() < 1e-15);
    }
    x[VELOCITY] = 1.0;
    for leg in Leg::ALL {
        assert!((m.foot_velocity(&x, &u, leg).unwrap().x - 1.0).abs() < 1e-15);
    }
}

#[test]
fn foot_velocity_matches_flow_of_foot_position() {
    let m = model();
    let mut x = standing_state(&m);
    x[THETA] = 0.1;
    x[THETA + 1] = -0.2;
    x[THETA + 2] = 0.7;
    x[OMEGA] = 0.4;
    x[OMEGA + 2] = -0.3;
    x[VELOCITY + 1] = 0.5;
    let mut u = standing_input();
    for k in 0..12 {
        u[JOINT_VELOCITIES + k] = 0.1 * (k as f64 - 5.5);
    }
    let h = 1e-6;
    let dx = m.eom(&x, &u).unwrap();
    for leg in Leg::ALL {
        let ahead = m.foot_world(&(&x + &dx * h), leg);
        let behind = m.foot_world(&(&x - &dx * h), leg);
        let fd = (ahead - behind) / (2.0 * h);
        assert!((fd - m.foot_velocity(&x, &u, leg).unwrap()).amax() < 1e-5);
    }
}

#[test]
fn newton_consistency_and_yaw_equivariance() {
    let m = model();
    let mut x = standing_state(&m);
    x[THETA] = 0.2;
    x[THETA + 1] = 0.1;
    x[OMEGA + 1] = 0.3;
    x[VELOCITY] = 0.4;
    let u = DVector::from_fn(INPUT_DIM, |i, _| (i as f64 * 1.7).sin() * 40.0);
    let dx = m.eom(&x, &u).unwrap();
    let r = rotation::rotation(&block(&x, THETA));
    let mut total = Vector3::zeros();
    for leg in Leg::ALL {
        total += leg_force(&u, leg);
    }
    let residual = r * block(&dx, VELOCITY) * 30.0 - total - Vector3::new(0.0, 0.0, -9.81 * 30.0);
    assert!(residual.amax() < 1e-10);

    let yaw = 0.9;
    let rz = rotation::rot_z(yaw);
    let mut xr = x.clone();
    xr[THETA + 2] += yaw;
    set_block(&mut xr, POSITION, &(rz * block(&x, POSITION)));
    let mut ur = u.clone();
    for leg in Leg::ALL {
        set_block(&mut ur, 3 * leg.index(), &(rz * leg_force(&u, leg)));
    }
    let dxr = m.eom(&xr, &ur).unwrap();
    assert!((block(&dxr, POSITION) - rz * block(&dx, POSITION)).amax() < 1e-12);
    assert!((block(&dxr, OMEGA) - block(&dx, OMEGA)).amax() < 1e-10);
    assert!((block(&dxr, VELOCITY) - block(&dx, VELOCITY)).amax() < 1e-10);
    assert!((block(&dxr, THETA) - block(&dx, THETA)).amax() < 1e-12);
}

#[test]
fn trot_constraint_rows_and_residuals() {
    let trot = ocp(GaitSchedule::trot(0.7));
    for k in 0..100 {
        assert_eq!(trot.constraint_rows(k as f64 * 0.013), 14);
    }
    let m = model();
    let x = standing_state(&m);
    let stand = ocp(GaitSchedule::standing());
    let g = stand.equality_constraints(&x, &standing_input(), 0.3);
    assert_eq!(g.len(), 12);
    assert!(g.amax() <= 1e-10);

    // RF swings during the first half cycle; mid-swing residual is −c.
    let mut u = standing_input();
    set_block(
        &mut u,
        3 * Leg::RightFront.index(),
        &Vector3::new(1.0, -2.0, 3.0),
    );
    let t_mid = 0.175;
    let g = trot.equality_constraints(&x, &u, t_mid);
    let (_, phase) = trot.mode(t_mid, Leg::RightFront);
    let c_mid = trot.swing_curve().at(phase).0;
    assert!(c_mid.abs() > 1e-3);
    // Rows: LF stance (3), RF swing (4), LH swing (4), RH stance (3).
    assert!((g[3] + c_mid).abs() < 1e-12);
    assert_eq!((g[4], g[5], g[6]), (1.0, -2.0, 3.0));
}

#[test]
fn cost_examples() {
    let stand = ocp(GaitSchedule::standing());
    let m = model();
    let x = standing_state(&m);
    let u = standing_input();
    assert_eq!(stand.state_cost(&x, 0.3), 0.0);
    assert_eq!(stand.input_cost(0.3).value(&u), 0.0);
    let (g, _) = stand.cost().running_state_expansion(&x, 0.3);
    assert_eq!(g.amax(), 0.0);

    let mut xq = x.clone();
    xq[JOINTS + 4] += 0.3;
    assert_eq!(stand.terminal_cost(&xq), stand.terminal_cost(&x));

    let params = RobotParams::default();
    let q0 = params.default_leg_joints();
    let mut uj = u.clone();
    let w = Vector3::new(0.3, -0.2, 0.5);
    set_block(&mut uj, JOINT_VELOCITIES + 3, &w);
    let j = leg_jacobian(&params, Leg::RightFront, &q0);
    let expected = 0.5 * 5.0 * (j * w).norm_squared();
    assert!((stand.input_cost(0.0).value(&uj) - expected).abs() < 1e-12);
}

#[test]
fn standing_is_a_stationary_solution() {
    let stand = ocp(GaitSchedule::standing());
    let m = model();
    let x0 = standing_state(&m);
    let sol = solve(&stand, &x0, &SolverSettings::default(), None).unwrap();
    assert!(sol.converged);
    let u0 = standing_input();
    for u in &sol.trajectory.inputs {
        assert!((u - &u0).amax() <= 1e-3);
    }
    for x in &sol.trajectory.states {
        assert!((x - &x0).amax() <= 1e-6);
    }
}
