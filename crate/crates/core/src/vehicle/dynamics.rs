use serde::{Deserialize, Serialize};

use super::VehicleError;

/// Position (m), heading (rad), speed (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub px: f64,
    pub py: f64,
    pub theta: f64,
    pub v: f64,
}

impl VehicleState {
    pub fn new(px: f64, py: f64, theta: f64, v: f64) -> Self {
        VehicleState { px, py, theta, v }
    }
}

/// Steering angle (rad) and acceleration (m/s²).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleInput {
    pub phi: f64,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BicycleParams {
    pub wheelbase: f64,
    pub dt: f64,
    /// Diagonal of the disturbance covariance over `(px, py, theta, v)`.
    pub noise: [f64; 4],
    pub v_min: f64,
    pub v_max: f64,
    pub phi_max: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl Default for BicycleParams {
    fn default() -> Self {
        BicycleParams {
            wheelbase: 2.5,
            dt: 0.1,
            noise: [0.0; 4],
            v_min: 0.0,
            v_max: 10.0,
            phi_max: 0.6,
            a_min: -4.0,
            a_max: 4.0,
        }
    }
}

impl BicycleParams {
    pub fn validate(&self) -> Result<(), VehicleError> {
        let bad = |m: &str| Err(VehicleError::Params(m.to_string()));
        if !(self.wheelbase > 0.0 && self.wheelbase.is_finite()) {
            return bad("wheelbase must be positive");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if self.noise.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("noise variances must be non-negative");
        }
        if !(self.v_min <= self.v_max) || !(self.a_min <= self.a_max) || !(self.phi_max >= 0.0) {
            return bad("empty speed, acceleration or steering range");
        }
        Ok(())
    }

    pub fn admits(&self, u: VehicleInput) -> bool {
        const SLACK: f64 = 1e-12;
        u.phi.abs() <= self.phi_max + SLACK && u.a >= self.a_min - SLACK && u.a <= self.a_max + SLACK
    }
}

/// Explicit-Euler kinematic bicycle plus additive disturbance; the speed is
/// clamped to `[v_min, v_max]` afterwards.
pub fn bicycle_step(
    x: VehicleState,
    u: VehicleInput,
    p: &BicycleParams,
    noise: [f64; 4],
) -> Result<VehicleState, VehicleError> {
    if !p.admits(u) {
        return Err(VehicleError::InputOutOfRange { phi: u.phi, a: u.a });
    }
    Ok(step_unchecked(x, u, p.wheelbase, p.dt, p.v_min, p.v_max, noise))
}

pub(crate) fn step_unchecked(
    x: VehicleState,
    u: VehicleInput,
    wheelbase: f64,
    dt: f64,
    v_min: f64,
    v_max: f64,
    noise: [f64; 4],
) -> VehicleState {
    let (s, c) = x.theta.sin_cos();
    VehicleState {
        px: x.px + x.v * c * dt + noise[0],
        py: x.py + x.v * s * dt + noise[1],
        theta: x.theta + x.v / wheelbase * u.phi.tan() * dt + noise[2],
        v: (x.v + u.a * dt + noise[3]).clamp(v_min, v_max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn params(l: f64) -> BicycleParams {
        BicycleParams {
            wheelbase: l,
            ..Default::default()
        }
    }

    #[test]
    fn straight_roll() {
        let x = bicycle_step(VehicleState::new(0.0, 0.0, 0.0, 1.0), VehicleInput::default(), &params(2.5), [0.0; 4]).unwrap();
        assert_abs_diff_eq!(x.px, 0.1, epsilon = 1e-15);
        assert_eq!((x.py, x.theta, x.v), (0.0, 0.0, 1.0));
    }

    #[test]
    fn heading_north() {
        let x0 = VehicleState::new(0.0, 0.0, FRAC_PI_2, 2.0);
        let x = bicycle_step(x0, VehicleInput::default(), &params(2.5), [0.0; 4]).unwrap();
        assert_abs_diff_eq!(x.px, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x.py, 0.2, epsilon = 1e-15);
        assert_eq!(x.theta, FRAC_PI_2);
    }

    #[test]
    fn steering_turns_heading() {
        let x0 = VehicleState::new(0.0, 0.0, 0.0, 1.0);
        let x = bicycle_step(x0, VehicleInput { phi: 0.1, a: 0.0 }, &params(2.0), [0.0; 4]).unwrap();
        assert_abs_diff_eq!(x.theta, 0.0050167, epsilon = 1e-7);
        // Arc geometry: heading change equals arc length over turning radius.
        let radius = 2.0 / 0.1f64.tan();
        assert_abs_diff_eq!(x.theta, 0.1 / radius, epsilon = 1e-15);
    }

    #[test]
    fn speed_is_clamped_and_inputs_checked() {
        let p = params(2.5);
        let x = bicycle_step(VehicleState::new(0.0, 0.0, 0.0, 0.1), VehicleInput { phi: 0.0, a: -4.0 }, &p, [0.0; 4]).unwrap();
        assert_eq!(x.v, 0.0);
        let err = bicycle_step(VehicleState::default(), VehicleInput { phi: 1.0, a: 0.0 }, &p, [0.0; 4]);
        assert!(matches!(err, Err(VehicleError::InputOutOfRange { .. })));
    }
}
