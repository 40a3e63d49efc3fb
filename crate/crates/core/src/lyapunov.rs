//! Coercive Lyapunov functional for the disturbed closed loop:
//! `V(x) = sup_(t >= 0) e^(zeta t) |e^(A_cl t) x|` with
//! `zeta` strictly inside `(theta_f beta / M, xi)`, and the numerical
//! verification of its dissipation inequality
//! `D+ V <= -l V + N |d|` with `l = zeta - theta_f beta / M`.
//!
//! V is an equivalent norm, so the comparison functions of the linear case
//! are slopes: `psi1(s) = s`, `psi2(s) = N s`, `alpha(s) = l s`,
//! `gamma(s) = N s`. The Dini derivative is checked by forward differences
//! with an explicit tolerance; V is a supremum, so only upper difference
//! quotients are meaningful.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::certificates::{SemigroupCertificate, WeightedSupNorm};
use crate::feedback::FeedbackGain;
use crate::linalg::spectral_abscissa;
use crate::nonlinearity::SectorNonlinearity;
use crate::simulator::{rk4_step, Disturbance, SimulationRecord};
use crate::spectral::ModalModel;
use crate::{Error, Result};

/// Linear comparison-function slopes of the 1-homogeneous case.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComparisonFunctions {
    /// psi1 slope (lower coercivity), always 1.
    pub lower: f64,
    /// psi2 slope (upper coercivity) = N.
    pub upper: f64,
    /// alpha slope (decay) = l.
    pub decay: f64,
    /// gamma slope (disturbance gain) = N.
    pub gain: f64,
}

/// Precomputed machinery for evaluating V and its decay functions.
#[derive(Debug, Clone)]
pub struct LyapunovOracle {
    /// Renorming rate zeta.
    pub rate: f64,
    /// Decay modulus l = zeta - theta_f beta / M > 0.
    pub decay_modulus: f64,
    /// Upper coercivity constant N.
    pub gain: f64,
    /// Guaranteed sup horizon.
    pub horizon: f64,
    pub funcs: ComparisonFunctions,
    /// Micro step used for forward difference quotients.
    pub micro_step: f64,
    norm: WeightedSupNorm,
}

impl LyapunovOracle {
    /// Evaluates V(x); satisfies `|x| <= V(x) <= N |x|`.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.norm.value(x)
    }

    /// alpha(s) = l s.
    pub fn alpha(&self, s: f64) -> f64 {
        self.decay_modulus * s
    }

    /// gamma(s) = N s.
    pub fn gamma(&self, s: f64) -> f64 {
        self.gain * s
    }

    pub fn grid_len(&self) -> usize {
        self.norm.grid_len()
    }
}

/// Builds the oracle for a certified closed loop and sector bound. Errors
/// when `theta_f beta / M >= xi` (the admissible rate interval is empty).
pub fn build_oracle(
    cert: &SemigroupCertificate,
    a_cl: &DMatrix<f64>,
    theta_f: f64,
    zeta_fraction: f64,
) -> Result<LyapunovOracle> {
    if !(zeta_fraction > 0.0 && zeta_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "zeta fraction must lie in (0, 1), got {zeta_fraction}"
        )));
    }
    let xi = cert.closed_loop_rate;
    let floor = theta_f * cert.loop_gain / cert.open_loop_gain;
    if floor >= xi {
        return Err(Error::SectorTooLarge { product: floor, xi });
    }
    let rate = floor + zeta_fraction * (xi - floor);
    let decay_modulus = rate - floor;
    let norm = WeightedSupNorm::new(a_cl, cert.closed_loop_gain, xi, rate)?;
    let micro_step = 1e-4 / spectral_abscissa(a_cl).abs().max(1.0);
    Ok(LyapunovOracle {
        rate,
        decay_modulus,
        gain: cert.closed_loop_gain,
        horizon: norm.horizon,
        funcs: ComparisonFunctions {
            lower: 1.0,
            upper: cert.closed_loop_gain,
            decay: decay_modulus,
            gain: cert.closed_loop_gain,
        },
        micro_step,
        norm,
    })
}

/// One dissipation sample along a disturbed trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct DissipationSample {
    pub time: f64,
    pub value: f64,
    /// Forward difference quotient of V.
    pub quotient: f64,
    /// Right-hand side -l V + N |d|.
    pub bound: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DissipationReport {
    pub samples: Vec<DissipationSample>,
    pub max_residual: f64,
    pub passed: bool,
}

/// Verifies the dissipation inequality along a disturbed record by forward
/// difference quotients `(V(x(t+h)) - V(x(t)))/h` with
/// `h = 1e-4 / max(1, |abscissa|)`, against `-l V + N |d|` plus the explicit
/// tolerance `1e-3 (l V + N |d| + 1)`. A violation returns an error carrying
/// the witness sample.
pub fn check_dissipation(
    oracle: &LyapunovOracle,
    model: &ModalModel,
    gain: &FeedbackGain,
    f: &SectorNonlinearity,
    d: &Disturbance,
    record: &SimulationRecord,
) -> Result<DissipationReport> {
    let h = oracle.micro_step;
    let mut samples = Vec::with_capacity(record.times.len().saturating_sub(1));
    let mut max_residual = f64::NEG_INFINITY;
    for (i, &t) in record.times.iter().enumerate() {
        if i + 1 == record.times.len() {
            break;
        }
        let x = &record.states[i];
        let value = oracle.value(x);
        // four micro RK4 substeps keep the fast-tail integration error far
        // below the quotient tolerance
        let mut ahead = x.clone();
        let sub = h / 4.0;
        for s in 0..4 {
            ahead = rk4_step(model, gain, f, d, t + s as f64 * sub, &ahead, sub);
        }
        let quotient = (oracle.value(&ahead) - value) / h;
        let disturbance = d.eval(t, model.dim()).norm();
        let bound = -oracle.decay_modulus * value + oracle.gain * disturbance;
        let residual = quotient - bound;
        let tolerance = 1e-3 * (oracle.decay_modulus * value + oracle.gain * disturbance + 1.0);
        if residual > tolerance {
            return Err(Error::DissipationViolated {
                time: t,
                residual,
                value,
                disturbance,
            });
        }
        max_residual = max_residual.max(residual);
        samples.push(DissipationSample {
            time: t,
            value,
            quotient,
            bound,
            residual,
        });
    }
    Ok(DissipationReport {
        samples,
        max_residual,
        passed: true,
    })
}

/// Integral-form comparison check along a disturbed record:
/// `V(x(t)) <= e^(-l t) V(x0) + N Int_0^t e^(-l (t-s)) |d(s)| ds`, the
/// right side evaluated by composite Simpson quadrature between record
/// points. Returns the worst ratio of left to right side.
pub fn check_comparison_integral(
    oracle: &LyapunovOracle,
    model_dim: usize,
    d: &Disturbance,
    record: &SimulationRecord,
) -> (f64, bool) {
    let l = oracle.decay_modulus;
    let v0 = oracle.value(&record.states[0]);
    let mut integral = 0.0f64; // Int_0^(t_i) e^(-l (t_i - s)) |d(s)| ds
    let mut worst_ratio = 0.0f64;
    for i in 0..record.times.len() {
        if i > 0 {
            let (a, b) = (record.times[i - 1], record.times[i]);
            let dt = b - a;
            integral *= (-l * dt).exp();
            // composite Simpson with 64 panels per record interval
            let panels = 64usize;
            let hh = dt / panels as f64;
            let mut local = 0.0;
            for p in 0..panels {
                let s0 = a + p as f64 * hh;
                let s1 = s0 + 0.5 * hh;
                let s2 = s0 + hh;
                let f0 = (-l * (b - s0)).exp() * d.eval(s0, model_dim).norm();
                let f1 = (-l * (b - s1)).exp() * d.eval(s1, model_dim).norm();
                let f2 = (-l * (b - s2)).exp() * d.eval(s2, model_dim).norm();
                local += hh / 6.0 * (f0 + 4.0 * f1 + f2);
            }
            integral += local;
        }
        let t = record.times[i];
        let lhs = oracle.value(&record.states[i]);
        let rhs = (-l * t).exp() * v0 + oracle.gain * integral;
        if rhs > 0.0 {
            worst_ratio = worst_ratio.max(lhs / rhs);
        }
    }
    (worst_ratio, worst_ratio <= 1.0 + 1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::estimate_decay_bounds;
    use crate::feedback::{closed_loop_matrix, design_gain};
    use crate::linalg::{expm, random_unit_vector};
    use crate::simulator::simulate_disturbed;
    use crate::spectral::SpatialProblem;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pde_setup() -> (ModalModel, FeedbackGain, DMatrix<f64>, SemigroupCertificate) {
        let problem = SpatialProblem::new(1.0, vec![10.0; 256], vec![vec![1.0; 256]]).unwrap();
        let model = ModalModel::build(&problem, 8, 0.5).unwrap();
        let gain = design_gain(&model.unstable_block(), &model.unstable_inputs(), 1.0).unwrap();
        let a_cl = closed_loop_matrix(&model, &gain).unwrap();
        let cert =
            SemigroupCertificate::estimate(&model.generator(), &a_cl, &model.input_matrix, 0.9)
                .unwrap();
        (model, gain, a_cl, cert)
    }

    #[test]
    fn oracle_rate_arithmetic() {
        let (.., a_cl, cert) = pde_setup();
        let xi = cert.closed_loop_rate;
        let oracle = build_oracle(&cert, &a_cl, 0.0, 0.5).unwrap();
        assert!((oracle.rate - 0.5 * xi).abs() < 1e-12);
        assert!((oracle.decay_modulus - 0.5 * xi).abs() < 1e-12);

        // empty admissible interval
        let theta_too_big = xi * cert.open_loop_gain / cert.loop_gain;
        assert!(matches!(
            build_oracle(&cert, &a_cl, theta_too_big, 0.5),
            Err(Error::SectorTooLarge { .. })
        ));
    }

    #[test]
    fn normal_loop_collapses_to_euclidean_norm() {
        // N = 1 forces T* = 0 and V = |x|
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0, -3.0]));
        let (n_gain, xi) = estimate_decay_bounds(&a, 0.9).unwrap();
        assert!((n_gain - 1.0).abs() < 1e-9);
        let cert = SemigroupCertificate {
            open_loop_gain: 1.0,
            open_loop_rate: 1e-6,
            closed_loop_gain: n_gain,
            closed_loop_rate: xi,
            input_norm: 1.0,
            loop_gain: n_gain,
            xi_fraction: 0.9,
            horizon: 1.0,
            grid_step: 0.01,
        };
        let oracle = build_oracle(&cert, &a, 0.0, 0.5).unwrap();
        assert_eq!(oracle.grid_len(), 1);
        let x = DVector::from_vec(vec![0.3, -0.4, 1.2]);
        assert!((oracle.value(&x) - x.norm()).abs() <= 1e-12 * x.norm());
    }

    #[test]
    fn value_examples_and_norm_axioms() {
        let (_, _, a_cl, cert) = pde_setup();
        let oracle = build_oracle(&cert, &a_cl, 0.05, 0.5).unwrap();
        let dim = a_cl.nrows();
        assert_eq!(oracle.value(&DVector::zeros(dim)), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let x = random_unit_vector(&mut rng, dim);
            let y = random_unit_vector(&mut rng, dim);
            let vx = oracle.value(&x);
            let vy = oracle.value(&y);
            // coercivity sandwich
            assert!(vx >= 1.0 - 1e-12 && vx <= oracle.gain * (1.0 + 1e-12));
            // homogeneity
            for c in [-3.0f64, 0.25, 7.5] {
                let vcx = oracle.value(&(&x * c));
                assert!(
                    (vcx - c.abs() * vx).abs() <= 1e-12 * vcx.max(1e-12),
                    "homogeneity: {vcx} vs {}",
                    c.abs() * vx
                );
            }
            // triangle inequality
            let vsum = oracle.value(&(&x + &y));
            assert!(vsum <= vx + vy + 1e-9);
            // Lipschitz bound |V(x) - V(y)| <= N |x - y|
            assert!((vx - vy).abs() <= oracle.gain * (&x - &y).norm() + 1e-9);
        }
    }

    #[test]
    fn semigroup_decay_of_value() {
        let (_, _, a_cl, cert) = pde_setup();
        let oracle = build_oracle(&cert, &a_cl, 0.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for &h in &[0.01f64, 0.1, 1.0] {
            let flow = expm(&a_cl, h);
            for _ in 0..30 {
                let x = random_unit_vector(&mut rng, a_cl.nrows());
                let lhs = oracle.value(&(&flow * &x));
                let rhs = (-oracle.rate * h).exp() * oracle.value(&x);
                assert!(
                    lhs <= rhs * (1.0 + 1e-6),
                    "h = {h}: V(e^(Ah)x) = {lhs} vs e^(-zeta h) V(x) = {rhs}"
                );
            }
        }
    }

    #[test]
    fn dissipation_pure_decay() {
        let (model, gain, a_cl, cert) = pde_setup();
        let f = SectorNonlinearity::Identity;
        let oracle = build_oracle(&cert, &a_cl, 0.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x0 = random_unit_vector(&mut rng, model.dim());
        let record =
            simulate_disturbed(&model, &gain, &f, &Disturbance::Zero, &x0, 3.0, 61).unwrap();
        let report =
            check_dissipation(&oracle, &model, &gain, &f, &Disturbance::Zero, &record).unwrap();
        assert!(report.passed);
        // pure decay: V(x(t)) <= e^(-zeta t) V(x0)
        let v0 = oracle.value(&x0);
        for (i, &t) in record.times.iter().enumerate() {
            let v = oracle.value(&record.states[i]);
            assert!(
                v <= (-oracle.rate * t).exp() * v0 * (1.0 + 1e-6),
                "t = {t}: {v}"
            );
        }
    }

    #[test]
    fn dissipation_zero_state() {
        let (model, gain, a_cl, cert) = pde_setup();
        let f = SectorNonlinearity::Identity;
        let oracle = build_oracle(&cert, &a_cl, 0.0, 0.5).unwrap();
        let record = simulate_disturbed(
            &model,
            &gain,
            &f,
            &Disturbance::Zero,
            &DVector::zeros(model.dim()),
            1.0,
            11,
        )
        .unwrap();
        let report =
            check_dissipation(&oracle, &model, &gain, &f, &Disturbance::Zero, &record).unwrap();
        assert!(report.samples.iter().all(|s| s.residual <= 0.0 + 1e-12));
    }

    #[test]
    fn dissipation_and_integral_form_under_sinusoid() {
        let (model, gain, a_cl, cert) = pde_setup();
        let f = SectorNonlinearity::TanhBlend { delta: 0.05 };
        let theta_f = f.deviation() * gain.norm;
        let oracle = build_oracle(&cert, &a_cl, theta_f, 0.5).unwrap();
        let mut dir = DVector::zeros(model.dim());
        dir[0] = 0.8;
        dir[1] = 0.6;
        let d = Disturbance::Sinusoid {
            amplitude: 0.3,
            omega: 2.0,
            phase: 0.5,
            direction: dir,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x0 = random_unit_vector(&mut rng, model.dim());
        let record = simulate_disturbed(&model, &gain, &f, &d, &x0, 4.0, 81).unwrap();
        let report = check_dissipation(&oracle, &model, &gain, &f, &d, &record).unwrap();
        assert!(report.passed);
        let (worst, ok) = check_comparison_integral(&oracle, model.dim(), &d, &record);
        assert!(ok, "integral comparison ratio {worst}");
    }
}
