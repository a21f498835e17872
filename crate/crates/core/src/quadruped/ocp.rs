use nalgebra::{DMatrix, DVector, Vector3};

use super::cone::project_to_cone;
use super::cost::{Anchor, BaseCommand, CostWeights, QuadrupedCost};
use super::dynamics::{leg_force, set_block, QuadrupedModel, FORCES, INPUT_DIM, STATE_DIM};
use super::gait::{Contact, GaitSchedule, SwingCurve, SwingProfile};
use super::{Leg, ModelError};
use crate::slq::{ConstraintJacobians, CostExpansion, Horizon, InputCost, OcpDefinition};

/// Offset used when sampling the gait at a node time so that a node lying on
/// a mode boundary takes the mode of the interval it starts.
const MODE_EPS: f64 = 1e-9;

/// Baseline kinodynamic trajectory-optimization problem over one horizon.
#[derive(Debug, Clone)]
pub struct QuadrupedOcp {
    model: QuadrupedModel,
    gait: GaitSchedule,
    swing: SwingCurve,
    cost: QuadrupedCost,
    horizon: Horizon,
}

impl QuadrupedOcp {
    pub fn new(
        model: QuadrupedModel,
        gait: GaitSchedule,
        profile: &SwingProfile,
        weights: &CostWeights,
        command: BaseCommand,
        anchor: Anchor,
        horizon: Horizon,
    ) -> Result<Self, ModelError> {
        gait.validate()?;
        let swing = if gait.duty < 1.0 {
            profile.curve(gait.swing_duration())?
        } else {
            SwingProfile::default().curve(1.0)?
        };
        let cost = QuadrupedCost::new(model.params(), weights, command, anchor)?;
        Ok(Self {
            model,
            gait,
            swing,
            cost,
            horizon,
        })
    }

    pub fn model(&self) -> &QuadrupedModel {
        &self.model
    }

    pub fn gait(&self) -> &GaitSchedule {
        &self.gait
    }

    pub fn cost(&self) -> &QuadrupedCost {
        &self.cost
    }

    pub fn swing_curve(&self) -> &SwingCurve {
        &self.swing
    }

    /// Same problem on a different horizon and anchor.
    pub fn reanchored(&self, horizon: Horizon, anchor: Anchor) -> Self {
        let mut next = self.clone();
        next.horizon = horizon;
        next.cost = self.cost.with_anchor(anchor);
        next
    }

    /// Same problem on a different horizon, command and anchor.
    pub fn retargeted(&self, horizon: Horizon, command: BaseCommand, anchor: Anchor) -> Self {
        let mut next = self.clone();
        next.horizon = horizon;
        next.cost = self.cost.with_target(command, anchor);
        next
    }

    pub fn mode(&self, t: f64, leg: Leg) -> (Contact, f64) {
        self.gait.mode_at(t + MODE_EPS, leg)
    }

    /// Number of equality rows active at `t`.
    pub fn constraint_rows(&self, t: f64) -> usize {
        Leg::ALL
            .iter()
            .map(|&l| match self.mode(t, l).0 {
                Contact::Stance => 3,
                Contact::Swing => 4,
            })
            .sum()
    }

    /// Mode-dependent equality residual: stance feet do not move, swing feet
    /// follow the normal-velocity curve and carry no force.
    pub fn mode_constraints(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        t: f64,
    ) -> Result<DVector<f64>, ModelError> {
        let mut g = DVector::zeros(self.constraint_rows(t));
        let normal = self.gait.normal();
        let mut row = 0;
        for leg in Leg::ALL {
            let v = self.model.foot_velocity(x, u, leg)?;
            match self.mode(t, leg) {
                (Contact::Stance, _) => {
                    g.rows_mut(row, 3).copy_from(&v);
                    row += 3;
                }
                (Contact::Swing, phase) => {
                    g[row] = normal.dot(&v) - self.swing.at(phase).0;
                    g.rows_mut(row + 1, 3).copy_from(&leg_force(u, leg));
                    row += 4;
                }
            }
        }
        Ok(g)
    }

    fn mode_constraint_jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        t: f64,
    ) -> Result<ConstraintJacobians, ModelError> {
        let rows = self.constraint_rows(t);
        let mut state = DMatrix::zeros(rows, STATE_DIM);
        let mut input = DMatrix::zeros(rows, INPUT_DIM);
        let normal = self.gait.normal();
        let mut row = 0;
        for leg in Leg::ALL {
            let (vx, vu) = self.model.foot_velocity_jacobians(x, u, leg)?;
            match self.mode(t, leg).0 {
                Contact::Stance => {
                    state.view_mut((row, 0), (3, STATE_DIM)).copy_from(&vx);
                    input.view_mut((row, 0), (3, INPUT_DIM)).copy_from(&vu);
                    row += 3;
                }
                Contact::Swing => {
                    state
                        .view_mut((row, 0), (1, STATE_DIM))
                        .copy_from(&(normal.transpose() * vx));
                    input
                        .view_mut((row, 0), (1, INPUT_DIM))
                        .copy_from(&(normal.transpose() * vu));
                    for k in 0..3 {
                        input[(row + 1 + k, FORCES + 3 * leg.index() + k)] = 1.0;
                    }
                    row += 4;
                }
            }
        }
        Ok(ConstraintJacobians { state, input })
    }

    /// Clamp stance forces into the friction cone.
    pub fn project_forces(&self, u: &DVector<f64>, t: f64) -> DVector<f64> {
        let normal = self.gait.normal();
        let mut out = u.clone();
        for leg in Leg::ALL {
            if self.mode(t, leg).0 == Contact::Stance {
                let f = leg_force(u, leg);
                let p = project_to_cone(&f, &normal, self.gait.friction);
                set_block(&mut out, FORCES + 3 * leg.index(), &p);
            }
        }
        out
    }
}

fn nan_vector(n: usize) -> DVector<f64> {
    DVector::from_element(n, f64::NAN)
}

impl OcpDefinition for QuadrupedOcp {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn input_dim(&self) -> usize {
        INPUT_DIM
    }

    fn horizon(&self) -> Horizon {
        self.horizon
    }

    fn dynamics(&self, x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> DVector<f64> {
        self.model
            .eom(x, u)
            .unwrap_or_else(|_| nan_vector(STATE_DIM))
    }

    fn dynamics_jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        _t: f64,
    ) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        Some(self.model.eom_jacobians(x, u).unwrap_or_else(|_| {
            (
                DMatrix::from_element(STATE_DIM, STATE_DIM, f64::NAN),
                DMatrix::from_element(STATE_DIM, INPUT_DIM, f64::NAN),
            )
        }))
    }

    fn state_cost(&self, x: &DVector<f64>, t: f64) -> f64 {
        self.cost.running_state_cost(x, t)
    }

    fn state_cost_expansion(&self, x: &DVector<f64>, t: f64) -> Option<CostExpansion> {
        let (gradient, hessian) = self.cost.running_state_expansion(x, t);
        Some(CostExpansion { gradient, hessian })
    }

    fn input_cost(&self, _t: f64) -> InputCost {
        InputCost {
            weight: self.cost.input_weight().clone(),
            reference: self.cost.input_reference().clone(),
        }
    }

    fn terminal_cost(&self, x: &DVector<f64>) -> f64 {
        self.cost.terminal(x, self.horizon.end())
    }

    fn terminal_cost_expansion(&self, x: &DVector<f64>) -> Option<CostExpansion> {
        let (gradient, hessian) = self.cost.terminal_expansion(x, self.horizon.end());
        Some(CostExpansion { gradient, hessian })
    }

    fn equality_constraints(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> DVector<f64> {
        self.mode_constraints(x, u, t)
            .unwrap_or_else(|_| nan_vector(self.constraint_rows(t)))
    }

    fn equality_jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        t: f64,
    ) -> Option<ConstraintJacobians> {
        Some(self.mode_constraint_jacobians(x, u, t).unwrap_or_else(|_| {
            let rows = self.constraint_rows(t);
            ConstraintJacobians {
                state: DMatrix::from_element(rows, STATE_DIM, f64::NAN),
                input: DMatrix::from_element(rows, INPUT_DIM, f64::NAN),
            }
        }))
    }

    fn project_input(&self, _x: &DVector<f64>, u: &DVector<f64>, t: f64) -> DVector<f64> {
        self.project_forces(u, t)
    }
}

/// Anchor at the current base pose, level, at the commanded height.
pub fn anchor_from_state(x: &DVector<f64>, t: f64) -> Anchor {
    use super::dynamics::{block, POSITION, THETA};
    Anchor {
        time: t,
        position: block(x, POSITION),
        yaw: block(x, THETA).z,
    }
}

/// Helper for tests and examples: level anchor at the origin.
pub fn origin_anchor(height: f64) -> Anchor {
    Anchor {
        time: 0.0,
        position: Vector3::new(0.0, 0.0, height),
        yaw: 0.0,
    }
}
