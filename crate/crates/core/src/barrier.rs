//! Pairwise range barrier, its robust extension under bounded inputs, and the
//! linear constraint row it imposes on an effector's acceleration.
//!
//! With `h = r_s^2 - |r|^2` (safe when `h <= 0`) and `h_dot = -2 r.v`, the
//! robust barrier is `H = h + |h_dot| h_dot / (2 a_max)`. Requiring
//! `H_dot <= alpha(-H)` and substituting `h_ddot = -2|v|^2 - 2 r.(a_i - a_j)`
//! gives
//!
//! ```text
//! -2|h_dot| r.a_i <= a_max (alpha(-H) - h_dot) + 2|h_dot| |v|^2 - 2|h_dot| r.a_j
//! ```
//!
//! A cooperative neighbor is assumed to mirror the maneuver (`a_j = -a_i`),
//! which doubles the coefficient on `a_i`; a neighbor without a link is
//! assumed not to accelerate (`a_j = 0`).

use crate::error::{Error, Result};
use crate::geometry::PairGeometry;
use crate::{PhysicalBounds, Vec3};

/// Rows whose `|h_dot|` falls below this no longer depend on the input.
pub const DEGENERATE_H_DOT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierEval {
    /// `r_s^2 - |r|^2` (m^2).
    pub h: f64,
    /// `-2 r.v` (m^2/s).
    pub h_dot: f64,
    /// Robust barrier `h + |h_dot| h_dot / (2 a_max)` (m^2).
    pub big_h: f64,
    /// Deceleration constant used to build `big_h` (m^2/s^2).
    pub a_max: f64,
}

/// One half-space `coeff . a <= rhs` on the filtered acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyConstraint {
    pub neighbor_id: u32,
    pub coeff: Vec3,
    pub rhs: f64,
    /// Slack price of this row.
    pub weight: f64,
    pub cooperative: bool,
    pub barrier: BarrierEval,
}

impl SafetyConstraint {
    /// `coeff . a - rhs`; positive values are violations.
    pub fn violation(&self, accel: Vec3) -> f64 {
        self.coeff.dot(accel) - self.rhs
    }
}

/// Worst-case bound on `h_ddot` over the safe set: `4 r_s u_max - 4 v_max^2`,
/// scaled by `fraction`. Positive exactly when `r_s > v_max^2 / u_max`.
pub fn rcbf_a_max(r_s: f64, bounds: PhysicalBounds, fraction: f64) -> Result<f64> {
    let bound = 4.0 * r_s * bounds.u_max - 4.0 * bounds.v_max * bounds.v_max;
    if !(bound > 0.0) {
        return Err(Error::InfeasibleBarrier {
            r_s,
            limit: bounds.v_max * bounds.v_max / bounds.u_max,
        });
    }
    Ok(fraction * bound)
}

pub fn barrier_eval(pair: &PairGeometry, r_s: f64, a_max: f64) -> BarrierEval {
    debug_assert!(a_max > 0.0);
    let h = r_s * r_s - pair.range * pair.range;
    let h_dot = -2.0 * pair.r_ij.dot(pair.v_ij);
    let big_h = h + h_dot.abs() * h_dot / (2.0 * a_max);
    BarrierEval {
        h,
        h_dot,
        big_h,
        a_max,
    }
}

/// Builds the constraint row on `a_i` for one triggered neighbor, with a
/// linear class-K function of gain `alpha_gain`.
///
/// Returns `None` when `|h_dot|` vanishes: the row then carries no input
/// dependence and holds on the safe set for every acceleration.
pub fn constraint_row(
    neighbor_id: u32,
    pair: &PairGeometry,
    eval: &BarrierEval,
    alpha_gain: f64,
    cooperative: bool,
    weight: f64,
) -> Option<SafetyConstraint> {
    let abs_h_dot = eval.h_dot.abs();
    if abs_h_dot < DEGENERATE_H_DOT {
        return None;
    }
    let factor = if cooperative { 4.0 } else { 2.0 };
    let coeff = pair.r_ij * (-factor * abs_h_dot);
    let rhs = eval.a_max * (alpha_gain * -eval.big_h - eval.h_dot)
        + 2.0 * abs_h_dot * pair.v_ij.norm_squared();
    Some(SafetyConstraint {
        neighbor_id,
        coeff,
        rhs,
        weight,
        cooperative,
        barrier: *eval,
    })
}
