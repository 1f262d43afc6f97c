//! Pure proportional navigation.

use crate::error::{Error, Result};
use crate::{AgentState, Vec3};

/// Separation below which the line of sight is considered undefined (m).
pub const RANGE_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceCommand {
    /// Commanded acceleration, perpendicular to the line of sight (m/s^2).
    pub accel: Vec3,
    /// Line-of-sight angular rate (rad/s).
    pub los_rate: Vec3,
    /// Norm of the effector-target relative velocity (m/s).
    pub closing_speed: f64,
}

/// Pure proportional navigation command of `effector` against `target`.
///
/// With `r = p_e - p_t` and `v = v_e - v_t` the LOS rate is `r x v / |r|^2`
/// and the command is `N |v| (los_rate x u_los)`, where `u_los` is the unit
/// line of sight pointing from the effector to the target. The output is not
/// saturated.
pub fn png_command(
    effector: &AgentState,
    target: &AgentState,
    nav_constant: f64,
) -> Result<GuidanceCommand> {
    let r = effector.position - target.position;
    let v = effector.velocity - target.velocity;
    let range_sq = r.norm_squared();
    let range = range_sq.sqrt();
    if !(range > RANGE_FLOOR) {
        return Err(Error::DegenerateRange {
            range,
            floor: RANGE_FLOOR,
        });
    }
    let los_rate = r.cross(v) / range_sq;
    let los_unit = -r / range;
    let closing_speed = v.norm();
    let accel = los_rate.cross(los_unit) * (nav_constant * closing_speed);
    Ok(GuidanceCommand {
        accel,
        los_rate,
        closing_speed,
    })
}
