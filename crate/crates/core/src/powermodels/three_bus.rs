//! Generator–load 3-bus model: swing dynamics of one generator plus the load
//! bus angle and voltage, driven by the load reactive power `q1` (per unit).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const STATE_NAMES: [&str; 4] = ["delta_g", "omega", "delta_l", "v"];

/// Default Newton seed for the first point of a continuation.
pub const DEFAULT_GUESS: ThreeBusState =
    ThreeBusState { delta_g: 0.3, omega: 0.0, delta_l: 0.1, v: 1.0 };

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 100;

/// Generator angle (rad), generator speed deviation (rad/s), load angle
/// (rad) and load voltage (per unit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeBusState {
    pub delta_g: f64,
    pub omega: f64,
    pub delta_l: f64,
    pub v: f64,
}

impl ThreeBusState {
    pub fn to_array(self) -> [f64; 4] {
        [self.delta_g, self.omega, self.delta_l, self.v]
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self { delta_g: s[0], omega: s[1], delta_l: s[2], v: s[3] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Model coefficients that admit a choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeBusModel {
    /// Sign of the linear voltage term of the load-angle equation. The
    /// default `-1.0` reproduces an operational PV branch whose first Hopf
    /// point sits at `q1 ≈ 10.9456`; with `+1.0` no such branch exists near
    /// the nominal seed.
    pub load_voltage_sign: f64,
}

impl Default for ThreeBusModel {
    fn default() -> Self {
        Self { load_voltage_sign: -1.0 }
    }
}

// Swing equation.
const SWING_GAIN: f64 = 16.66667;
const SWING_PHASE: f64 = 0.08727;
const SWING_DAMPING: f64 = 0.16667;
const SWING_INPUT: f64 = 1.88074;
// Load angle equation.
const ANGLE_V2: f64 = 496.87181;
const ANGLE_GEN: f64 = 166.66667;
const ANGLE_GEN_PHASE: f64 = 0.08727;
const ANGLE_INF: f64 = 666.66667;
const ANGLE_INF_PHASE: f64 = 0.20944;
const ANGLE_V: f64 = 93.33333;
const ANGLE_Q: f64 = 33.33333;
const ANGLE_CONST: f64 = 43.33333;
// Load voltage equation.
const VOLT_V2: f64 = 78.76384;
const VOLT_GEN: f64 = 26.21722;
const VOLT_GEN_PHASE: f64 = 0.01241;
const VOLT_INF: f64 = 104.86887;
const VOLT_INF_PHASE: f64 = 0.13458;
const VOLT_V: f64 = 14.52288;
const VOLT_Q: f64 = 5.22876;
const VOLT_CONST: f64 = 7.03268;

impl ThreeBusModel {
    pub fn rhs(&self, s: &ThreeBusState, q1: f64) -> [f64; 4] {
        let rel = s.delta_l - s.delta_g;
        let v = s.v;
        [
            s.omega,
            SWING_GAIN * (rel + SWING_PHASE).sin() * v - SWING_DAMPING * s.omega + SWING_INPUT,
            ANGLE_V2 * v * v
                - ANGLE_GEN * (rel - ANGLE_GEN_PHASE).cos() * v
                - ANGLE_INF * (s.delta_l - ANGLE_INF_PHASE).cos() * v
                + self.load_voltage_sign * ANGLE_V * v
                + ANGLE_Q * q1
                + ANGLE_CONST,
            -VOLT_V2 * v * v
                + VOLT_GEN * (rel - VOLT_GEN_PHASE).cos() * v
                + VOLT_INF * (s.delta_l - VOLT_INF_PHASE).cos() * v
                + VOLT_V * v
                - VOLT_Q * q1
                - VOLT_CONST,
        ]
    }

    /// Hand-differentiated Jacobian of [`rhs`](Self::rhs).
    pub fn jacobian(&self, s: &ThreeBusState, _q1: f64) -> DMatrix<f64> {
        let rel = s.delta_l - s.delta_g;
        let v = s.v;
        let swing_c = SWING_GAIN * (rel + SWING_PHASE).cos() * v;
        let angle_gen_s = ANGLE_GEN * (rel - ANGLE_GEN_PHASE).sin() * v;
        let angle_inf_s = ANGLE_INF * (s.delta_l - ANGLE_INF_PHASE).sin() * v;
        let volt_gen_s = VOLT_GEN * (rel - VOLT_GEN_PHASE).sin() * v;
        let volt_inf_s = VOLT_INF * (s.delta_l - VOLT_INF_PHASE).sin() * v;
        #[rustfmt::skip]
        let j = DMatrix::from_row_slice(4, 4, &[
            0.0, 1.0, 0.0, 0.0,
            -swing_c, -SWING_DAMPING, swing_c, SWING_GAIN * (rel + SWING_PHASE).sin(),
            -angle_gen_s, 0.0, angle_gen_s + angle_inf_s,
            2.0 * ANGLE_V2 * v
                - ANGLE_GEN * (rel - ANGLE_GEN_PHASE).cos()
                - ANGLE_INF * (s.delta_l - ANGLE_INF_PHASE).cos()
                + self.load_voltage_sign * ANGLE_V,
            volt_gen_s, 0.0, -volt_gen_s - volt_inf_s,
            -2.0 * VOLT_V2 * v
                + VOLT_GEN * (rel - VOLT_GEN_PHASE).cos()
                + VOLT_INF * (s.delta_l - VOLT_INF_PHASE).cos()
                + VOLT_V,
        ]);
        j
    }

    /// Central finite-difference Jacobian with relative step `h`.
    pub fn linearize(&self, s: &ThreeBusState, q1: f64, h: f64) -> DMatrix<f64> {
        let x = s.to_array();
        let mut j = DMatrix::zeros(4, 4);
        for k in 0..4 {
            let step = h * x[k].abs().max(1.0);
            let mut plus = x;
            let mut minus = x;
            plus[k] += step;
            minus[k] -= step;
            let fp = self.rhs(&ThreeBusState::from_slice(&plus), q1);
            let fm = self.rhs(&ThreeBusState::from_slice(&minus), q1);
            for i in 0..4 {
                j[(i, k)] = (fp[i] - fm[i]) / (2.0 * step);
            }
        }
        j
    }

    /// Newton iteration with backtracking from `guess` to `‖rhs‖ ≤ 1e-10`.
    pub fn find_equilibrium(&self, q1: f64, guess: &ThreeBusState) -> Result<ThreeBusState> {
        if !guess.is_finite() || !q1.is_finite() {
            return Err(Error::InvalidArgument("equilibrium guess must be finite".into()));
        }
        let mut x = DVector::from_column_slice(&guess.to_array());
        let residual = |x: &DVector<f64>| -> f64 {
            DVector::from_column_slice(&self.rhs(&ThreeBusState::from_slice(x.as_slice()), q1)).norm()
        };
        let mut r = residual(&x);
        for _ in 0..NEWTON_MAX_ITER {
            if r <= NEWTON_TOL {
                let mut s = ThreeBusState::from_slice(x.as_slice());
                // The first equation makes the speed deviation vanish identically.
                s.omega = 0.0;
                return Ok(s);
            }
            let s = ThreeBusState::from_slice(x.as_slice());
            let f = DVector::from_column_slice(&self.rhs(&s, q1));
            let step = match self.jacobian(&s, q1).lu().solve(&f) {
                Some(d) => d,
                None => break,
            };
            let mut t = 1.0;
            loop {
                let trial = &x - &step * t;
                let rt = residual(&trial);
                if rt.is_finite() && (rt < r || t < 1e-4) {
                    x = trial;
                    r = rt;
                    break;
                }
                t *= 0.5;
            }
            if !r.is_finite() {
                break;
            }
        }
        if r <= NEWTON_TOL {
            let mut s = ThreeBusState::from_slice(x.as_slice());
            s.omega = 0.0;
            return Ok(s);
        }
        Err(Error::NoConvergence { what: format!("equilibrium at q1 = {q1}"), iterations: NEWTON_MAX_ITER })
    }
}

/// Right-hand side of the default model.
pub fn three_bus_rhs(state: &ThreeBusState, q1: f64) -> [f64; 4] {
    ThreeBusModel::default().rhs(state, q1)
}

/// Equilibrium of the default model reached from `guess`.
pub fn find_equilibrium(q1: f64, guess: &ThreeBusState) -> Result<ThreeBusState> {
    ThreeBusModel::default().find_equilibrium(q1, guess)
}

/// Finite-difference Jacobian of the default model.
pub fn linearize(state: &ThreeBusState, q1: f64, h: f64) -> DMatrix<f64> {
    ThreeBusModel::default().linearize(state, q1, h)
}
