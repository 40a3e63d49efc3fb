//! Trajectory generation for the truncated closed loop.
//!
//! Two integrators, chosen so that time discretization never confounds a
//! certificate check: piecewise-constant-input regimes (the sampled and
//! event-triggered laws) advance with the exact per-mode exponential step,
//! while the continuous-feedback disturbed loop uses adaptive RK4 with a
//! step-doubling error estimate. The output grid is decoupled from internal
//! stepping; diagnostics are attached at output points only.

use nalgebra::DVector;
use serde::Serialize;

use crate::feedback::FeedbackGain;
use crate::linalg::phi1;
use crate::nonlinearity::SectorNonlinearity;
use crate::spectral::ModalModel;
use crate::{Error, Result};

/// Blow-up guard: distinguishes instability from float overflow.
pub const BLOWUP_GUARD: f64 = 1e12;

/// External disturbance entering the modal state equation.
#[derive(Debug, Clone)]
pub enum Disturbance {
    Zero,
    /// amplitude * sin(omega t + phase) * direction.
    Sinusoid {
        amplitude: f64,
        omega: f64,
        phase: f64,
        direction: DVector<f64>,
    },
    /// amplitude * e^(-decay t) * sin(omega t) * direction.
    DecayingBurst {
        amplitude: f64,
        decay: f64,
        omega: f64,
        direction: DVector<f64>,
    },
    /// Replay of a recorded held-input mismatch `B (f(F x(t_k)) - f(F x(t)))`,
    /// linearly interpolated between samples. Not smooth enough for the
    /// continuous-feedback integrator.
    MismatchInduced {
        times: Vec<f64>,
        values: Vec<DVector<f64>>,
    },
}

impl Disturbance {
    pub fn eval(&self, t: f64, dim: usize) -> DVector<f64> {
        match self {
            Self::Zero => DVector::zeros(dim),
            Self::Sinusoid {
                amplitude,
                omega,
                phase,
                direction,
            } => {
                assert_eq!(direction.len(), dim);
                direction * (amplitude * (omega * t + phase).sin())
            }
            Self::DecayingBurst {
                amplitude,
                decay,
                omega,
                direction,
            } => {
                assert_eq!(direction.len(), dim);
                direction * (amplitude * (-decay * t).exp() * (omega * t).sin())
            }
            Self::MismatchInduced { times, values } => {
                if times.is_empty() {
                    return DVector::zeros(dim);
                }
                if t <= times[0] {
                    return values[0].clone();
                }
                if t >= *times.last().unwrap() {
                    return values.last().unwrap().clone();
                }
                let idx = times.partition_point(|&s| s <= t) - 1;
                let frac = (t - times[idx]) / (times[idx + 1] - times[idx]);
                &values[idx] * (1.0 - frac) + &values[idx + 1] * frac
            }
        }
    }

    /// Smooth kinds admit the continuous-feedback integrator.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, Self::MismatchInduced { .. })
    }
}

/// Per-output-point diagnostics; filled by the verification layer.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub lyapunov: Option<f64>,
    pub trigger_lhs: Option<f64>,
    pub trigger_rhs: Option<f64>,
    pub envelope: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateReason {
    Sampled,
    Triggered,
}

/// One controller update.
#[derive(Debug, Clone, Serialize)]
pub struct ControllerEvent {
    pub index: usize,
    pub time: f64,
    /// |x(t_k)| at the update instant.
    pub state_norm: f64,
    /// t_k - t_(k-1); None for the initial update.
    pub gap: Option<f64>,
    pub reason: UpdateReason,
}

/// Time grid, trajectory, held inputs, controller updates and diagnostics of
/// one run.
#[derive(Debug, Clone)]
pub struct SimulationRecord {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Held control vector at each output time (piecewise constant).
    pub inputs: Vec<DVector<f64>>,
    pub events: Vec<ControllerEvent>,
    pub diagnostics: Vec<Diagnostics>,
}

impl SimulationRecord {
    fn new() -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            inputs: Vec::new(),
            events: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    fn push(&mut self, t: f64, state: DVector<f64>, input: DVector<f64>) {
        self.times.push(t);
        self.states.push(state);
        self.inputs.push(input);
        self.diagnostics.push(Diagnostics::default());
    }

    pub fn state_norms(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.norm()).collect()
    }

    /// Minimum gap between consecutive controller updates.
    pub fn min_event_gap(&self) -> Option<f64> {
        self.events
            .iter()
            .filter_map(|e| e.gap)
            .fold(None, |acc, g| Some(acc.map_or(g, |a: f64| a.min(g))))
    }
}

/// Exact one-step advance under a held control vector: per mode,
/// `w_j ← e^(lambda_j h) w_j + h phi1(lambda_j h) (b_j · f(u_held))`.
pub fn step_exact(
    model: &ModalModel,
    state: &DVector<f64>,
    u_held: &DVector<f64>,
    f: &SectorNonlinearity,
    h: f64,
) -> DVector<f64> {
    assert!(h > 0.0, "step must be positive");
    let drive = &model.input_matrix * f.apply(u_held);
    let mut next = DVector::zeros(model.dim());
    for j in 0..model.dim() {
        let lam = model.eigenvalues()[j];
        next[j] = (lam * h).exp() * state[j] + h * phi1(lam * h) * drive[j];
    }
    next
}

fn guard_norm(state: &DVector<f64>, t: f64) -> Result<f64> {
    let norm = state.norm();
    if !norm.is_finite() || norm > BLOWUP_GUARD {
        return Err(Error::SimulationBlowUp { time: t, norm });
    }
    Ok(norm)
}

/// Simulates the zero-order-hold law `u(t) = F x(k tau)` by exact stepping.
/// At sampling instants the recorded states coincide with the one-step map
/// iterates to float precision.
pub fn simulate_sampled(
    model: &ModalModel,
    gain: &FeedbackGain,
    f: &SectorNonlinearity,
    tau: f64,
    x0: &DVector<f64>,
    t_end: f64,
    out_points: usize,
) -> Result<SimulationRecord> {
    if !(tau > 0.0) || t_end < tau {
        return Err(Error::InvalidConfig(format!(
            "need 0 < tau <= t_end, got tau = {tau}, t_end = {t_end}"
        )));
    }
    assert!(out_points >= 2);
    assert_eq!(x0.len(), model.dim());

    let mut record = SimulationRecord::new();
    let mut state = x0.clone();
    let mut u = gain.apply(&state);
    record.events.push(ControllerEvent {
        index: 0,
        time: 0.0,
        state_norm: state.norm(),
        gap: None,
        reason: UpdateReason::Sampled,
    });
    record.push(0.0, state.clone(), u.clone());

    let close = 1e-12 * t_end.max(1.0);
    let mut t = 0.0;
    let mut next_out_idx = 1usize;
    let mut next_sample_idx = 1usize;
    while next_out_idx < out_points {
        let t_out = t_end * next_out_idx as f64 / (out_points - 1) as f64;
        let t_sample = tau * next_sample_idx as f64;
        let target = t_out.min(t_sample);
        if target > t + close {
            state = step_exact(model, &state, &u, f, target - t);
        }
        t = target;
        guard_norm(&state, t)?;
        if (t - t_sample).abs() <= close && t_sample <= t_end + close {
            u = gain.apply(&state);
            record.events.push(ControllerEvent {
                index: next_sample_idx,
                time: t_sample,
                state_norm: state.norm(),
                gap: Some(tau),
                reason: UpdateReason::Sampled,
            });
            next_sample_idx += 1;
        }
        if (t - t_out).abs() <= close {
            record.push(t_out, state.clone(), u.clone());
            next_out_idx += 1;
        }
    }
    Ok(record)
}

/// RK4 right-hand side of the disturbed continuous-feedback loop.
fn disturbed_rhs(
    model: &ModalModel,
    gain: &FeedbackGain,
    f: &SectorNonlinearity,
    d: &Disturbance,
    t: f64,
    w: &DVector<f64>,
) -> DVector<f64> {
    let u = gain.apply(w);
    let mut dw = &model.input_matrix * f.apply(&u) + d.eval(t, model.dim());
    for j in 0..model.dim() {
        dw[j] += model.eigenvalues()[j] * w[j];
    }
    dw
}

pub(crate) fn rk4_step(
    model: &ModalModel,
    gain: &FeedbackGain,
    f: &SectorNonlinearity,
    d: &Disturbance,
    t: f64,
    w: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    let k1 = disturbed_rhs(model, gain, f, d, t, w);
    let k2 = disturbed_rhs(model, gain, f, d, t + 0.5 * h, &(w + &k1 * (0.5 * h)));
    let k3 = disturbed_rhs(model, gain, f, d, t + 0.5 * h, &(w + &k2 * (0.5 * h)));
    let k4 = disturbed_rhs(model, gain, f, d, t + h, &(w + &k3 * h));
    w + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// One accepted adaptive RK4 advance (step doubling); returns the new state
/// and the step actually taken.
#[allow(clippy::too_many_arguments)]
fn rk4_adaptive(
    model: &ModalModel,
    gain: &FeedbackGain,
    f: &SectorNonlinearity,
    d: &Disturbance,
    t: f64,
    w: &DVector<f64>,
    h_try: f64,
    scale: f64,
) -> Result<(DVector<f64>, f64, f64)> {
    let mut h = h_try;
    loop {
        if h < 1e-14 * scale.max(1e-12) {
            return Err(Error::StepSizeUnderflow { time: t });
        }
        let full = rk4_step(model, gain, f, d, t, w, h);
        let half = rk4_step(model, gain, f, d, t, w, 0.5 * h);
        let two_halves = rk4_step(model, gain, f, d, t + 0.5 * h, &half, 0.5 * h);
        let err = (&full - &two_halves).norm() / 15.0;
        let tol = 1e-9 * two_halves.norm().max(1e-6 * scale);
        if err <= tol {
            let grow = if err > 0.0 {
                0.9 * (tol / err).powf(0.2)
            } else {
                5.0
            };
            return Ok((two_halves, h, h * grow.clamp(0.2, 5.0)));
        }
        h *= 0.9 * (tol / err).powf(0.25).clamp(0.1, 0.9);
    }
}

/// Integrates `dx = A x + B f(F x) + d(t)` with continuous feedback; used by
/// the dissipation checks. Substeps are chosen so the local error estimate
/// stays below 1e-9 relative, with a hard cap for explicit-scheme stability
/// on stiff tails.
pub fn simulate_disturbed(
    model: &ModalModel,
    gain: &FeedbackGain,
    f: &SectorNonlinearity,
    d: &Disturbance,
    x0: &DVector<f64>,
    t_end: f64,
    out_points: usize,
) -> Result<SimulationRecord> {
    if !d.is_smooth() {
        return Err(Error::NonSmoothDisturbance);
    }
    assert!(out_points >= 2 && t_end > 0.0);
    assert_eq!(x0.len(), model.dim());

    let fastest = model
        .eigenvalues()
        .iter()
        .fold(0.0f64, |a, &l| a.max(l.abs()));
    let h_cap = 2.5 / fastest.max(1e-6);
    let scale = x0.norm().max(1.0);

    let mut record = SimulationRecord::new();
    let mut state = x0.clone();
    record.push(0.0, state.clone(), gain.apply(&state));

    let mut t = 0.0;
    let mut h_next = h_cap.min(t_end / (out_points as f64 * 4.0));
    for i in 1..out_points {
        let t_out = t_end * i as f64 / (out_points - 1) as f64;
        while t < t_out - 1e-13 * t_end {
            let h_try = h_next.min(h_cap).min(t_out - t);
            let (next, taken, h_new) = rk4_adaptive(model, gain, f, d, t, &state, h_try, scale)?;
            t += taken;
            state = next;
            h_next = h_new.min(h_cap);
            guard_norm(&state, t)?;
        }
        t = t_out;
        record.push(t_out, state.clone(), gain.apply(&state));
    }
    Ok(record)
}
