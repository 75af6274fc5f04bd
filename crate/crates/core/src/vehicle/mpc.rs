use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::dynamics::step_unchecked;
use super::{BicycleParams, VehicleError, VehicleInput, VehicleState};

/// Enumerative tracking controller. Inputs are drawn from a
/// `steer_levels x accel_levels` lattice spanning the admissible box; a beam
/// of the cheapest partial sequences is kept at every prediction step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcParams {
    pub horizon: usize,
    /// Prediction step, decoupled from the simulation step.
    pub dt: f64,
    pub q: [f64; 4],
    pub r: [f64; 2],
    pub steer_levels: usize,
    pub accel_levels: usize,
    pub beam: usize,
}

impl Default for MpcParams {
    fn default() -> Self {
        MpcParams {
            horizon: 3,
            dt: 0.5,
            q: [1.0, 1.0, 0.1, 0.1],
            r: [0.1, 0.1],
            steer_levels: 5,
            accel_levels: 5,
            beam: 25,
        }
    }
}

impl MpcParams {
    pub fn validate(&self) -> Result<(), VehicleError> {
        let ok = self.horizon >= 1
            && self.beam >= 1
            && self.steer_levels >= 1
            && self.accel_levels >= 1
            && self.dt > 0.0
            && self.dt.is_finite()
            && self.q.iter().chain(self.r.iter()).all(|w| *w >= 0.0 && w.is_finite());
        if ok {
            Ok(())
        } else {
            Err(VehicleError::Params("MPC needs positive horizon, beam, lattice, dt and non-negative weights".into()))
        }
    }
}

fn levels(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|k| {
            // Exact zero at the midpoint of a symmetric range.
            let t = 2.0 * k as f64 / (n - 1) as f64 - 1.0;
            0.5 * (lo + hi) + 0.5 * (hi - lo) * t
        })
        .collect()
}

fn wrap(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

fn stage_cost(x: &VehicleState, r: &VehicleState, u: &VehicleInput, m: &MpcParams) -> f64 {
    let e = [x.px - r.px, x.py - r.py, wrap(x.theta - r.theta), x.v - r.v];
    let mut c = m.r[0] * u.phi * u.phi + m.r[1] * u.a * u.a;
    for k in 0..4 {
        c += m.q[k] * e[k] * e[k];
    }
    c
}

/// First input of the cheapest lattice sequence found by the beam search.
pub fn track(
    x0: VehicleState,
    x_ref: VehicleState,
    params: &BicycleParams,
    mpc: &MpcParams,
) -> Result<VehicleInput, VehicleError> {
    mpc.validate()?;
    params.validate()?;
    let mut lattice = Vec::with_capacity(mpc.steer_levels * mpc.accel_levels);
    for &phi in &levels(-params.phi_max, params.phi_max, mpc.steer_levels) {
        for &a in &levels(params.a_min, params.a_max, mpc.accel_levels) {
            lattice.push(VehicleInput { phi, a });
        }
    }
    let predict = |x: VehicleState, u: VehicleInput| {
        step_unchecked(x, u, params.wheelbase, mpc.dt, params.v_min, params.v_max, [0.0; 4])
    };
    // (accumulated cost, current state, first input)
    let mut beam: Vec<(f64, VehicleState, VehicleInput)> = vec![(0.0, x0, VehicleInput::default())];
    for depth in 0..mpc.horizon {
        let mut next = Vec::with_capacity(beam.len() * lattice.len());
        for &(cost, x, first) in &beam {
            for &u in &lattice {
                let y = predict(x, u);
                let head = if depth == 0 { u } else { first };
                next.push((cost + stage_cost(&y, &x_ref, &u, mpc), y, head));
            }
        }
        // Stable sort keeps lattice order on ties, so the result is deterministic.
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        next.truncate(mpc.beam);
        beam = next;
    }
    Ok(beam[0].2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_contains_zero_and_bounds() {
        let l = levels(-0.6, 0.6, 5);
        assert_eq!(l[2], 0.0);
        assert_eq!((l[0], l[4]), (-0.6, 0.6));
    }

    #[test]
    fn at_reference_holds_still() {
        let p = BicycleParams::default();
        let x = VehicleState::new(3.0, 1.0, 0.0, 0.0);
        let u = track(x, x, &p, &MpcParams::default()).unwrap();
        assert_eq!(u, VehicleInput { phi: 0.0, a: 0.0 });
    }

    #[test]
    fn far_ahead_reference_accelerates_fully() {
        let p = BicycleParams::default();
        let m = MpcParams {
            r: [0.0, 0.0],
            ..Default::default()
        };
        let x = VehicleState::new(0.0, 0.0, 0.0, 1.0);
        let r = VehicleState::new(20.0, 0.0, 0.0, p.v_max);
        let u = track(x, r, &p, &m).unwrap();
        assert_eq!(u.a, p.a_max);
        assert_eq!(u.phi, 0.0);
    }

    #[test]
    fn mirrored_references_mirror_steering() {
        let p = BicycleParams::default();
        let m = MpcParams::default();
        let x = VehicleState::new(0.0, 0.0, 0.0, 3.0);
        let left = track(x, VehicleState::new(4.0, 3.0, 0.6, 3.0), &p, &m).unwrap();
        let right = track(x, VehicleState::new(4.0, -3.0, -0.6, 3.0), &p, &m).unwrap();
        assert!(left.phi > 0.0);
        assert_eq!(left.phi, -right.phi);
        assert_eq!(left.a, right.a);
    }

    #[test]
    fn wrap_is_principal() {
        assert!((wrap(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap(-PI) - PI).abs() < 1e-12);
        assert_eq!(wrap(0.5), 0.5);
    }
}
