//! Classic artificial-potential-field baseline: every sensed object is an
//! obstacle, no estimation and no speed regulation near objects.

use crate::geometry::{Point2, Vec2};
use crate::sim::{Command, IntentMode, Planner, PlannerFault, ProximityReading, SensorFrame, TickOutput};
use crate::world::TargetDomain;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApfConfig {
    pub k_att: f64,
    /// Attraction is capped at `k_att * att_range`.
    pub att_range: f64,
    pub eta: f64,
    /// Influence distance of the repulsion, measured surface to surface.
    pub rho_0: f64,
    pub d_o: f64,
    pub v_max: f64,
}

impl Default for ApfConfig {
    fn default() -> Self {
        Self {
            k_att: 25.0,
            att_range: 0.3,
            eta: 2e-4,
            rho_0: 0.1,
            d_o: 5.0,
            v_max: 0.07,
        }
    }
}

pub fn apf_force(position: Point2, readings: &[ProximityReading], goal: Point2, cfg: &ApfConfig) -> Vec2 {
    let mut f = ((goal - position) * cfg.k_att).clamp_norm(cfg.k_att * cfg.att_range);
    for r in readings {
        let rho = r.clearance.max(1e-4);
        if rho < cfg.rho_0 {
            let mag = cfg.eta * (1.0 / rho - 1.0 / cfg.rho_0) / (rho * rho);
            f -= r.bearing * mag;
        }
    }
    f
}

pub struct ApfPlanner {
    pub cfg: ApfConfig,
}

impl ApfPlanner {
    pub fn new(cfg: ApfConfig) -> Self {
        Self { cfg }
    }
}

impl Planner for ApfPlanner {
    fn name(&self) -> &'static str {
        "apf"
    }

    fn tick(&mut self, frame: &SensorFrame, goal: &TargetDomain) -> Result<TickOutput, PlannerFault> {
        let f = apf_force(frame.position, &frame.proximity, goal.center, &self.cfg);
        let damping = self.cfg.d_o.max(f.norm() / self.cfg.v_max);
        let command = Command::new(f, damping);
        if !command.is_finite() {
            return Err(PlannerFault::NonFinite(format!("{command:?}")));
        }
        Ok(TickOutput {
            command,
            intent: IntentMode::Approach,
            imagined: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::distance;

    fn reading(id: u32, robot: Point2, center: Point2) -> ProximityReading {
        let d = distance(robot, center);
        ProximityReading {
            object_id: id,
            clearance: d - 0.07,
            bearing: (center - robot) / d,
            radius: 0.05,
        }
    }

    #[test]
    fn empty_world_pure_attraction() {
        let cfg = ApfConfig::default();
        let f = apf_force(Point2::new(0.2, 0.2), &[], Point2::new(0.3, 0.2), &cfg);
        assert!((f.x - 2.5).abs() < 1e-12 && f.y == 0.0);
        let far = apf_force(Point2::new(0.0, 0.0), &[], Point2::new(1.0, 0.0), &cfg);
        assert!((far.norm() - cfg.k_att * cfg.att_range).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_has_no_lateral_force() {
        let cfg = ApfConfig::default();
        let robot = Point2::new(0.4, 0.45);
        let rs = [
            reading(1, robot, Point2::new(0.48, 0.53)),
            reading(2, robot, Point2::new(0.48, 0.37)),
        ];
        let f = apf_force(robot, &rs, Point2::new(1.0, 0.45), &cfg);
        assert!(f.y.abs() < 1e-12);
        assert!(f.x < cfg.k_att * cfg.att_range);
    }
}
