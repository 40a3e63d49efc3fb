//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//! Criteria 3-9 run against the reference reaction-diffusion loop
//! (c = 10 on the unit interval, one constant input shape).

mod common;

use common::TempDir;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use etpde::certificates::{
    find_tau_star, psi_map, sampled_decay_constants, verify_power_stability,
    SampledDataCertificate, SemigroupCertificate, WeightedSupNorm,
};
use etpde::event_trigger::{
    check_corollary, iterate_report, simulate_et, update_savings_from_record, IterateReport,
    TriggerConfig,
};
use etpde::feedback::{closed_loop_matrix, design_gain, FeedbackGain};
use etpde::linalg::random_unit_vector;
use etpde::lyapunov::{build_oracle, check_comparison_integral, check_dissipation, LyapunovOracle};
use etpde::nonlinearity::{certify_sector, check_small_gain, SectorNonlinearity};
use etpde::pipeline::{reference_config, run_pipeline, Stage};
use etpde::simulator::{simulate_disturbed, simulate_sampled, step_exact, Disturbance};
use etpde::spectral::{solve_eigensystem, ModalModel, SpatialProblem};

fn report(criterion: &str, passed: bool, detail: &str) {
    println!(
        "[{}] criterion {criterion}: {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "criterion {criterion} failed: {detail}");
}

/// Reference loop shared by the event-triggered criteria: small sector
/// deviation, sigma = 0.5, tau at half the certified stable period.
struct Lab {
    model: ModalModel,
    gain: FeedbackGain,
    a_cl: DMatrix<f64>,
    cert: SemigroupCertificate,
    f: SectorNonlinearity,
    theta_f: f64,
    oracle: LyapunovOracle,
    tau: f64,
    tau_star: f64,
    sd: SampledDataCertificate,
    trigger: TriggerConfig,
    iterate: IterateReport,
}

fn build_lab(delta: f64, sigma: f64, tau_fraction: f64) -> Lab {
    let n_grid = 256;
    let problem = SpatialProblem::new(1.0, vec![10.0; n_grid], vec![vec![1.0; n_grid]]).unwrap();
    let model = ModalModel::build(&problem, 16, 0.5).unwrap();
    let gain = design_gain(&model.unstable_block(), &model.unstable_inputs(), 1.0).unwrap();
    let a_cl = closed_loop_matrix(&model, &gain).unwrap();
    let cert = SemigroupCertificate::estimate(&model.generator(), &a_cl, &model.input_matrix, 0.9)
        .unwrap();
    let f = if delta == 0.0 {
        SectorNonlinearity::Identity
    } else {
        SectorNonlinearity::TanhBlend { delta }
    };
    let sector = certify_sector(&f, gain.norm).unwrap();
    let tau_star = find_tau_star(&model, &gain, &f, 2.0, 1e-3, 12, 80, 424242).unwrap();
    let tau = tau_fraction * tau_star;
    let power = verify_power_stability(&model, &gain, &f, tau, 200, 80, 90210);
    assert!(power.passed, "reference loop must contract at tau = {tau}");
    let sd = sampled_decay_constants(&model, &gain, &f, &power, tau, tau_star).unwrap();
    let oracle = build_oracle(&cert, &a_cl, sector.sector_bound, 0.5).unwrap();
    let trigger = TriggerConfig::new(tau, sigma, 50.0).unwrap();
    let iterate = iterate_report(&sd, &oracle, &trigger);
    Lab {
        model,
        gain,
        a_cl,
        cert,
        f,
        theta_f: sector.sector_bound,
        oracle,
        tau,
        tau_star,
        sd,
        trigger,
        iterate,
    }
}

fn et_lab() -> &'static Lab {
    static LAB: OnceLock<Lab> = OnceLock::new();
    LAB.get_or_init(|| build_lab(0.05, 0.5, 0.5))
}

#[test]
fn criterion_01_eigen_oracle() {
    let started = Instant::now();
    let truncation = 32usize;
    let n_grid = 8 * truncation;
    let c = 10.0;
    let problem = SpatialProblem::new(1.0, vec![c; n_grid], vec![]).unwrap();
    let eig = solve_eigensystem(&problem, truncation).unwrap();
    let mut worst_rel = 0.0f64;
    for j in 1..=truncation / 4 {
        let exact = c - (j as f64 * PI).powi(2);
        let rel = ((eig.eigenvalues[j - 1] - exact) / exact).abs();
        worst_rel = worst_rel.max(rel);
    }
    let residual = eig.orthonormality_residual();
    let elapsed = started.elapsed().as_secs_f64();
    report(
        "1 (eigen oracle)",
        worst_rel <= 1e-5 && residual <= 1e-8 && elapsed < 1.0,
        &format!(
            "max rel eigenvalue error {worst_rel:.3e} (<= 1e-5), \
             orthonormality residual {residual:.3e} (<= 1e-8), runtime {elapsed:.3}s (< 1s)"
        ),
    );
}

fn scalar_tau_star_loop() -> (ModalModel, FeedbackGain) {
    let mut inputs = DMatrix::zeros(5, 1);
    inputs[(0, 0)] = 1.0;
    let model =
        ModalModel::from_modal_data(vec![1.0, -40.0, -90.0, -160.0, -250.0], inputs, 0.5).unwrap();
    let gain = FeedbackGain {
        gain: DMatrix::from_element(1, 1, -2.0),
        norm: 2.0,
        block_abscissa: -1.0,
        state_weight: 0.0,
    };
    (model, gain)
}

#[test]
fn criterion_02_scalar_tau_star_oracle() {
    let started = Instant::now();
    let (model, gain) = scalar_tau_star_loop();
    let f = SectorNonlinearity::Identity;
    let found = find_tau_star(&model, &gain, &f, 2.0, 1e-3, 12, 80, 99).unwrap();
    let target = 3.0f64.ln();
    let close = (found - target).abs() <= 1e-3;

    let mut x0 = DVector::zeros(5);
    x0[0] = 1.0;
    let diverges = matches!(
        simulate_sampled(&model, &gain, &f, 1.2, &x0, 400.0, 41),
        Err(etpde::Error::SimulationBlowUp { .. })
    );
    let record = simulate_sampled(&model, &gain, &f, 1.0, &x0, 40.0, 41).unwrap();
    let contracts = record.state_norms().last().unwrap() < &1e-2;
    let elapsed = started.elapsed().as_secs_f64();
    report(
        "2 (scalar tau* oracle)",
        close && diverges && contracts && elapsed < 5.0,
        &format!(
            "tau* = {found:.6} vs ln 3 = {target:.6} (tol 1e-3), \
             diverges at tau = 1.2: {diverges}, contracts at tau = 1.0: {contracts}, \
             runtime {elapsed:.2}s (< 5s)"
        ),
    );
}

#[test]
fn criterion_03_power_stability() {
    // sector bound at exactly 80% of the small-gain threshold (margin 0.2 xi/beta)
    let probe = build_lab(0.0, 0.5, 0.5);
    let threshold = probe.cert.closed_loop_rate / probe.cert.loop_gain;
    let delta = (0.8 * threshold / probe.gain.norm).min(0.9);
    let lab = build_lab(delta, 0.5, 0.5);
    let small_gain = check_small_gain(lab.theta_f, &lab.cert);
    assert!(
        small_gain.passed && small_gain.margin >= 0.2 * small_gain.threshold - 1e-9,
        "sector margin {} below 0.2 * threshold {}",
        small_gain.margin,
        small_gain.threshold
    );

    let power = verify_power_stability(&lab.model, &lab.gain, &lab.f, lab.tau, 100, 80, 777);
    let contraction_ok = power.passed && power.contraction < 1.0;

    // one-step contraction in the renormed state norm on all samples
    let renorm = WeightedSupNorm::new(
        &lab.a_cl,
        lab.cert.closed_loop_gain,
        lab.cert.closed_loop_rate,
        0.95 * lab.cert.closed_loop_rate,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(313);
    let mut worst_ratio = 0.0f64;
    for _ in 0..100 {
        let x = random_unit_vector(&mut rng, lab.model.dim());
        let after = psi_map(&lab.model, &lab.gain, &lab.f, lab.tau, &x).combined;
        let ratio = renorm.value(&after) / renorm.value(&x);
        worst_ratio = worst_ratio.max(ratio);
    }
    report(
        "3 (power stability)",
        contraction_ok && worst_ratio < 1.0,
        &format!(
            "fitted contraction {:.6} (< 1) over 100 trials within envelope prefactor {:.4}; \
             renormed one-step ratio max {worst_ratio:.6} (< 1)",
            power.contraction, power.prefactor
        ),
    );
}

#[test]
fn criterion_04_sampled_envelope() {
    let lab = et_lab();
    let sd = &lab.sd;
    let t_end = 20.0 / sd.envelope_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let x0 = random_unit_vector(&mut rng, lab.model.dim());
        let record =
            simulate_sampled(&lab.model, &lab.gain, &lab.f, lab.tau, &x0, t_end, 301).unwrap();
        for (i, &t) in record.times.iter().enumerate() {
            let bound = sd.envelope_gain * (-sd.envelope_rate * t).exp();
            let ratio = record.states[i].norm() / bound;
            worst = worst.max(ratio);
        }
    }
    report(
        "4 (sampled-data envelope)",
        worst <= 1.0 + 1e-6,
        &format!(
            "max |x(t)| / (G e^(-chi t) |x0|) = {worst:.9} over 50 random states, \
             T_end = {t_end:.2} (tolerance 1 + 1e-6)"
        ),
    );
}

#[test]
fn criterion_05_lyapunov_sandwich_and_decay() {
    let lab = et_lab();
    let oracle = &lab.oracle;
    let dim = lab.model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(505);

    // coercivity sandwich on 1000 random states
    let mut sandwich_ok = true;
    for _ in 0..1000 {
        let scale = 10.0f64.powf(rng.random_range(-3.0..3.0));
        let x = random_unit_vector(&mut rng, dim) * scale;
        let v = oracle.value(&x);
        let n = x.norm();
        if !(v >= n * (1.0 - 1e-9) && v <= oracle.gain * n * (1.0 + 1e-9)) {
            sandwich_ok = false;
            break;
        }
    }

    // semigroup decay of V at fixed offsets (1e-6 evaluation slack, the same
    // relative tolerance the integral form below is pinned to)
    let mut decay_ok = true;
    for &h in &[0.01f64, 0.1, 1.0] {
        let flow = etpde::linalg::expm(&lab.a_cl, h);
        for _ in 0..50 {
            let x = random_unit_vector(&mut rng, dim);
            let lhs = oracle.value(&(&flow * &x));
            let rhs = (-oracle.rate * h).exp() * oracle.value(&x);
            if lhs > rhs * (1.0 + 1e-6) {
                decay_ok = false;
            }
        }
    }

    // dissipation + integral form along 10 disturbed runs
    let mut dissipation_ok = true;
    let mut integral_ok = true;
    let mut worst_ratio = 0.0f64;
    let t_end = 5.0 / oracle.decay_modulus;
    for run in 0..10 {
        let mut direction = DVector::zeros(dim);
        direction[run % 3] = 1.0;
        let d = match run % 3 {
            0 => Disturbance::Zero,
            1 => Disturbance::Sinusoid {
                amplitude: 0.05 + 0.1 * run as f64,
                omega: 1.0 + run as f64,
                phase: 0.3 * run as f64,
                direction,
            },
            _ => Disturbance::DecayingBurst {
                amplitude: 0.3,
                decay: 0.5,
                omega: 2.0,
                direction,
            },
        };
        let x0 = random_unit_vector(&mut rng, dim);
        let record = simulate_disturbed(&lab.model, &lab.gain, &lab.f, &d, &x0, t_end, 61).unwrap();
        match check_dissipation(&lab.oracle, &lab.model, &lab.gain, &lab.f, &d, &record) {
            Ok(rep) => {
                if !rep.passed {
                    dissipation_ok = false;
                }
            }
            Err(_) => dissipation_ok = false,
        }
        let (ratio, ok) = check_comparison_integral(&lab.oracle, dim, &d, &record);
        worst_ratio = worst_ratio.max(ratio);
        if !ok {
            integral_ok = false;
        }
    }
    report(
        "5 (Lyapunov sandwich and decay)",
        sandwich_ok && decay_ok && dissipation_ok && integral_ok,
        &format!(
            "sandwich on 1000 states: {sandwich_ok}, semigroup decay at h in {{0.01, 0.1, 1}}: \
             {decay_ok}, dissipation on 10 disturbed runs: {dissipation_ok}, \
             integral form worst ratio {worst_ratio:.9} (<= 1 + 1e-6)"
        ),
    );
}

#[test]
fn criterion_06_zeno_freeness_and_trigger_semantics() {
    let lab = et_lab();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut min_gap = f64::INFINITY;
    let mut semantics_ok = true;
    let mut tested_points = 0usize;
    for _ in 0..10 {
        let x0 = random_unit_vector(&mut rng, lab.model.dim());
        let run = simulate_et(
            &lab.model,
            &lab.gain,
            &lab.f,
            &lab.oracle,
            &lab.trigger,
            &x0,
            12.0,
            61,
        )
        .unwrap();
        for event in run.record.events.iter().skip(1) {
            min_gap = min_gap.min(event.gap.unwrap());
        }
        for point in &run.trace {
            tested_points += 1;
            if !point.fired && point.lhs >= point.rhs {
                semantics_ok = false;
            }
        }
    }
    report(
        "6 (Zeno-freeness and trigger semantics)",
        min_gap >= lab.trigger.tau && semantics_ok,
        &format!(
            "min inter-event gap {min_gap:.6} >= dwell {:.6}; \
             lhs < rhs at all {tested_points} non-firing test points: {semantics_ok}",
            lab.trigger.tau
        ),
    );
}

#[test]
fn criterion_07_event_chain_bounds() {
    let started = Instant::now();
    let lab = et_lab();
    assert!(
        lab.iterate.per_event_contraction < 1.0,
        "reference configuration must contract per event, got {}",
        lab.iterate.per_event_contraction
    );
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst_chain = 0.0f64;
    let mut worst_exp = 0.0f64;
    let mut all_passed = true;
    for _ in 0..20 {
        let x0 = random_unit_vector(&mut rng, lab.model.dim());
        let run = simulate_et(
            &lab.model,
            &lab.gain,
            &lab.f,
            &lab.oracle,
            &lab.trigger,
            &x0,
            12.0,
            41,
        )
        .unwrap();
        let verdict = check_corollary(&lab.iterate, &run.record);
        worst_chain = worst_chain.max(verdict.worst_chain_ratio);
        worst_exp = worst_exp.max(verdict.worst_exponential_ratio);
        if !(verdict.conclusive && verdict.passed) {
            all_passed = false;
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        "7 (event chain bounds)",
        all_passed && elapsed < 60.0,
        &format!(
            "tau = {:.3} (tau* = {:.3}), per-event contraction {:.4} < 1; \
             worst iterated-bound ratio {worst_chain:.9}, \
             worst exponential-bound ratio {worst_exp:.9} (both <= 1 + 1e-6) over 20 states; \
             runtime {elapsed:.1}s (< 60s)",
            lab.tau, lab.tau_star, lab.iterate.per_event_contraction
        ),
    );
}

#[test]
fn criterion_08_update_savings() {
    // a dwell short against the loop timescale leaves the trigger slack to
    // stretch inter-event times; sigma = 0.5 per the criterion
    let lab = build_lab(0.05, 0.5, 0.05);
    let t_end = 20.0 / lab.sd.envelope_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let x0 = random_unit_vector(&mut rng, lab.model.dim());
    let run = simulate_et(
        &lab.model,
        &lab.gain,
        &lab.f,
        &lab.oracle,
        &lab.trigger,
        &x0,
        t_end,
        201,
    )
    .unwrap();
    let savings = update_savings_from_record(&run.record, lab.trigger.tau, t_end);
    report(
        "8 (update savings)",
        savings.count_et < savings.count_sampled,
        &format!(
            "sigma = 0.5, tau = {:.3}: {} event-triggered updates vs {} sampled updates \
             over T = {t_end:.1}; measured savings {:.1}%",
            lab.trigger.tau,
            savings.count_et,
            savings.count_sampled,
            100.0 * savings.savings
        ),
    );
}

#[test]
fn criterion_09_integrator_exactness() {
    let lab = et_lab();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let dim = lab.model.dim();
    let mut worst_semigroup = 0.0f64;
    for _ in 0..100 {
        let w = random_unit_vector(&mut rng, dim);
        let u = DVector::from_fn(lab.model.n_inputs(), |_, _| rng.random_range(-2.0..2.0));
        let h1 = rng.random_range(0.01..0.4);
        let h2 = rng.random_range(0.01..0.4);
        let direct = step_exact(&lab.model, &w, &u, &lab.f, h1 + h2);
        let composed = step_exact(
            &lab.model,
            &step_exact(&lab.model, &w, &u, &lab.f, h1),
            &u,
            &lab.f,
            h2,
        );
        let rel = (&direct - &composed).norm() / direct.norm().max(1e-12);
        worst_semigroup = worst_semigroup.max(rel);
    }

    let mut worst_psi = 0.0f64;
    for _ in 0..10 {
        let x0 = random_unit_vector(&mut rng, dim);
        let record = simulate_sampled(
            &lab.model,
            &lab.gain,
            &lab.f,
            lab.tau,
            &x0,
            10.0 * lab.tau,
            11,
        )
        .unwrap();
        let mut iterate = x0.clone();
        for k in 1..=10usize {
            iterate = psi_map(&lab.model, &lab.gain, &lab.f, lab.tau, &iterate).combined;
            let t = k as f64 * lab.tau;
            let idx = record
                .times
                .iter()
                .position(|&s| (s - t).abs() < 1e-9)
                .unwrap();
            let rel = (&record.states[idx] - &iterate).norm() / iterate.norm().max(1e-12);
            worst_psi = worst_psi.max(rel);
        }
    }
    report(
        "9 (integrator exactness)",
        worst_semigroup <= 1e-12 && worst_psi <= 1e-12,
        &format!(
            "semigroup composition max rel error {worst_semigroup:.3e}, \
             one-step-map cross-check max rel error {worst_psi:.3e} (both <= 1e-12, 100 cases)"
        ),
    );
}

#[test]
fn criterion_10_determinism() {
    let dir_a = TempDir::new("acceptance-det-a");
    let dir_b = TempDir::new("acceptance-det-b");
    let config_a = reference_config(dir_a.path().to_path_buf());
    let config_b = reference_config(dir_b.path().to_path_buf());
    let summary_a = run_pipeline(&config_a, Stage::Verify).unwrap();
    let summary_b = run_pipeline(&config_b, Stage::Verify).unwrap();
    assert_eq!(summary_a.artifacts, summary_b.artifacts);
    let mut identical = true;
    let mut compared = 0usize;
    for name in &summary_a.artifacts {
        let bytes_a = std::fs::read(dir_a.path().join(name)).unwrap();
        let bytes_b = std::fs::read(dir_b.path().join(name)).unwrap();
        if bytes_a != bytes_b {
            identical = false;
            println!("  mismatch in {name}");
        }
        compared += 1;
    }
    report(
        "10 (determinism)",
        identical,
        &format!("two pipeline runs produced byte-identical outputs ({compared} artifacts)"),
    );
}
