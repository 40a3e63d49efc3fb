//! Experiment pipeline: eigensolve -> design -> certify -> simulate ->
//! verify, with every stage flushing its artifacts before the next one runs.
//! A failing stage still leaves the partial artifacts and a summary naming
//! the stage on disk.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::certificates::{
    find_tau_star, sampled_decay_constants, verify_power_stability, PowerStabilityReport,
    SampledDataCertificate, SemigroupCertificate,
};
use crate::config::{DisturbanceConfig, ExperimentConfig, HorizonSpec, InitialStateSpec, TauSpec};
use crate::event_trigger::{
    check_corollary, iterate_report, simulate_et, ugas_witness, update_savings_from_record,
    CorollaryVerdict, IterateReport, TriggerConfig, UgasWitness, UpdateSavings,
};
use crate::feedback::{closed_loop_matrix, design_gain, DesignReport, FeedbackGain};
use crate::linalg::random_unit_vector;
use crate::lyapunov::{build_oracle, check_comparison_integral, check_dissipation, LyapunovOracle};
use crate::nonlinearity::{
    certify_sector, check_small_gain, SectorCertificate, SectorNonlinearity, SmallGainCheck,
};
use crate::report;
use crate::simulator::{simulate_disturbed, simulate_sampled, Disturbance, SimulationRecord};
use crate::spectral::{ModalModel, SpatialProblem};
use crate::{Error, Result};

/// Pipeline stages in execution order; each subcommand runs the pipeline up
/// to its stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Stage {
    Eigen,
    Design,
    Certify,
    Simulate,
    Verify,
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eig" | "eigen" => Ok(Self::Eigen),
            "design" => Ok(Self::Design),
            "certify" => Ok(Self::Certify),
            "simulate" => Ok(Self::Simulate),
            "verify" | "run" => Ok(Self::Verify),
            other => Err(Error::InvalidConfig(format!("unknown stage '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenSummary {
    pub truncation: usize,
    pub n_unstable: usize,
    pub margin: f64,
    pub lambda_first: f64,
    pub lambda_last: f64,
    pub orthonormality_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovSummary {
    pub rate: f64,
    pub decay_modulus: f64,
    pub gain: f64,
    pub horizon: f64,
    pub grid_len: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifySummary {
    pub semigroup: SemigroupCertificate,
    pub sector: SectorCertificate,
    pub small_gain: SmallGainCheck,
    pub tau: f64,
    pub tau_source: String,
    pub tau_star: f64,
    pub power: PowerStabilityReport,
    pub sampled_data: SampledDataCertificate,
    pub lyapunov: LyapunovSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub t_end: f64,
    pub out_points: usize,
    pub initial_norm: f64,
    pub sampled_events: usize,
    pub sampled_final_norm: f64,
    pub et_events: usize,
    pub et_final_norm: f64,
    pub min_et_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub iterate: IterateReport,
    pub corollary: CorollaryVerdict,
    pub savings: UpdateSavings,
    pub dissipation_max_residual: f64,
    pub comparison_ratio: f64,
    pub comparison_ok: bool,
    pub ugas: Option<UgasWitness>,
}

/// Run summary; also the sink for partial results when a stage fails.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub requested_stage: String,
    pub completed_stage: Option<String>,
    pub error: Option<String>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
    pub eigen: Option<EigenSummary>,
    pub design: Option<DesignReport>,
    pub certify: Option<CertifySummary>,
    pub simulate: Option<SimulateSummary>,
    pub verify: Option<VerifySummary>,
}

pub const ARTIFACT_EIGEN: &str = "eigen.csv";
pub const ARTIFACT_EIGENFUNCTIONS: &str = "eigenfunctions.csv";
pub const ARTIFACT_GAIN: &str = "gain.csv";
pub const ARTIFACT_DESIGN: &str = "design.json";
pub const ARTIFACT_CERTIFICATE: &str = "certificate.json";
pub const ARTIFACT_TRAJECTORY_SAMPLED: &str = "trajectory_sampled.csv";
pub const ARTIFACT_EVENTS_SAMPLED: &str = "events_sampled.csv";
pub const ARTIFACT_TRAJECTORY_ET: &str = "trajectory_et.csv";
pub const ARTIFACT_EVENTS_ET: &str = "events_et.csv";
pub const ARTIFACT_DISSIPATION: &str = "dissipation.csv";
pub const ARTIFACT_ITERATE: &str = "iterate_report.json";
pub const ARTIFACT_SUMMARY: &str = "summary.json";

/// Everything the pipeline built in memory, for callers that keep going
/// (sweeps, bindings, tests).
pub struct PipelineState {
    pub model: ModalModel,
    pub gain: Option<FeedbackGain>,
    pub oracle: Option<LyapunovOracle>,
    pub sampled_record: Option<SimulationRecord>,
    pub et_record: Option<SimulationRecord>,
}

fn stage_name(stage: Stage) -> &'static str {
    match stage {
        Stage::Eigen => "eigen",
        Stage::Design => "design",
        Stage::Certify => "certify",
        Stage::Simulate => "simulate",
        Stage::Verify => "verify",
    }
}

/// Runs the pipeline up to `upto`, writing artifacts into
/// `config.output_dir`. On failure the summary (with the failing stage and
/// message) is still written.
pub fn run_pipeline(config: &ExperimentConfig, upto: Stage) -> Result<Summary> {
    let mut summary = Summary {
        seed: config.seed,
        requested_stage: stage_name(upto).to_string(),
        completed_stage: None,
        error: None,
        warnings: Vec::new(),
        artifacts: Vec::new(),
        eigen: None,
        design: None,
        certify: None,
        simulate: None,
        verify: None,
    };
    std::fs::create_dir_all(&config.output_dir)?;
    let result = run_stages(config, upto, &mut summary);
    if let Err(e) = &result {
        summary.error = Some(e.to_string());
    } else {
        summary.completed_stage = Some(stage_name(upto).to_string());
    }
    let summary_path = config.output_dir.join(ARTIFACT_SUMMARY);
    summary.artifacts.push(ARTIFACT_SUMMARY.to_string());
    report::write_json(&summary_path, &summary)?;
    result.map(|_state| summary)
}

/// Same as [`run_pipeline`] but hands back the in-memory state.
pub fn run_pipeline_with_state(
    config: &ExperimentConfig,
    upto: Stage,
) -> Result<(Summary, PipelineState)> {
    let mut summary = Summary {
        seed: config.seed,
        requested_stage: stage_name(upto).to_string(),
        completed_stage: None,
        error: None,
        warnings: Vec::new(),
        artifacts: Vec::new(),
        eigen: None,
        design: None,
        certify: None,
        simulate: None,
        verify: None,
    };
    std::fs::create_dir_all(&config.output_dir)?;
    let state = run_stages(config, upto, &mut summary)?;
    summary.completed_stage = Some(stage_name(upto).to_string());
    let summary_path = config.output_dir.join(ARTIFACT_SUMMARY);
    summary.artifacts.push(ARTIFACT_SUMMARY.to_string());
    report::write_json(&summary_path, &summary)?;
    Ok((summary, state))
}

fn build_problem(config: &ExperimentConfig) -> Result<SpatialProblem> {
    let p = &config.problem;
    let reaction = p.reaction.materialize(p.n_grid, p.length)?;
    let inputs = p
        .inputs
        .iter()
        .map(|spec| spec.materialize(p.n_grid, p.length))
        .collect::<Result<Vec<_>>>()?;
    SpatialProblem::new(p.length, reaction, inputs)
}

fn build_disturbance(spec: &DisturbanceConfig, dim: usize) -> Disturbance {
    let mut direction = DVector::zeros(dim);
    direction[spec.mode - 1] = 1.0;
    match spec.kind.as_str() {
        "zero" => Disturbance::Zero,
        "decaying-burst" => Disturbance::DecayingBurst {
            amplitude: spec.amplitude,
            decay: spec.decay,
            omega: spec.omega,
            direction,
        },
        _ => Disturbance::Sinusoid {
            amplitude: spec.amplitude,
            omega: spec.omega,
            phase: spec.phase,
            direction,
        },
    }
}

fn initial_state(
    config: &ExperimentConfig,
    model: &ModalModel,
    problem: &SpatialProblem,
) -> Result<DVector<f64>> {
    match &config.simulation.x0 {
        InitialStateSpec::Modal { modal } => {
            if modal.len() != model.dim() {
                return Err(Error::InvalidConfig(format!(
                    "simulation.x0.modal has {} entries, model has {} modes",
                    modal.len(),
                    model.dim()
                )));
            }
            Ok(DVector::from_vec(modal.clone()))
        }
        InitialStateSpec::Profile { profile } => {
            let samples = profile.materialize(problem.n_grid(), problem.length)?;
            let mut w = DVector::zeros(model.dim());
            for j in 0..model.dim() {
                w[j] = model
                    .eigen
                    .l2_inner(&samples, model.eigen.eigenfunctions[j].as_slice());
            }
            Ok(w)
        }
        InitialStateSpec::Random { random } => {
            if !(random > &0.0) {
                return Err(Error::InvalidConfig(
                    "simulation.x0.random must be a positive norm".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(config.stage_seed("x0"));
            Ok(random_unit_vector(&mut rng, model.dim()) * *random)
        }
    }
}

fn run_stages(
    config: &ExperimentConfig,
    upto: Stage,
    summary: &mut Summary,
) -> Result<PipelineState> {
    let out = &config.output_dir;
    let push = |summary: &mut Summary, name: &str| {
        summary.artifacts.push(name.to_string());
    };

    // ---- eigen ----
    let problem = build_problem(config)?;
    let model = ModalModel::build(
        &problem,
        config.model.truncation,
        config.model.margin_fraction,
    )?;
    report::write_eigen_csv(&out.join(ARTIFACT_EIGEN), &model.eigen)?;
    report::write_eigenfunctions_csv(&out.join(ARTIFACT_EIGENFUNCTIONS), &model.eigen)?;
    push(summary, ARTIFACT_EIGEN);
    push(summary, ARTIFACT_EIGENFUNCTIONS);
    summary.eigen = Some(EigenSummary {
        truncation: model.dim(),
        n_unstable: model.n_unstable,
        margin: model.margin,
        lambda_first: model.eigenvalues()[0],
        lambda_last: *model.eigenvalues().last().unwrap(),
        orthonormality_residual: model.eigen.orthonormality_residual(),
    });
    if upto == Stage::Eigen {
        return Ok(PipelineState {
            model,
            gain: None,
            oracle: None,
            sampled_record: None,
            et_record: None,
        });
    }

    // ---- design ----
    let gain = design_gain(
        &model.unstable_block(),
        &model.unstable_inputs(),
        config.design.margin,
    )?;
    let a_cl = closed_loop_matrix(&model, &gain)?;
    report::write_gain_csv(&out.join(ARTIFACT_GAIN), &gain)?;
    let design_report = DesignReport::new(&model, &gain, &a_cl);
    report::write_json(&out.join(ARTIFACT_DESIGN), &design_report)?;
    push(summary, ARTIFACT_GAIN);
    push(summary, ARTIFACT_DESIGN);
    summary.design = Some(design_report);
    if upto == Stage::Design {
        return Ok(PipelineState {
            model,
            gain: Some(gain),
            oracle: None,
            sampled_record: None,
            et_record: None,
        });
    }

    // ---- certify ----
    let f = SectorNonlinearity::new(&config.nonlinearity.kind, config.nonlinearity.delta)?;
    let cert = SemigroupCertificate::estimate(
        &model.generator(),
        &a_cl,
        &model.input_matrix,
        config.certificates.xi_fraction,
    )?;
    let sector = certify_sector(&f, gain.norm)?;
    let small_gain = check_small_gain(sector.sector_bound, &cert);
    if !small_gain.passed {
        summary.warnings.push(format!(
            "small-gain condition failed (margin {}); continuing with empirical checks",
            small_gain.margin
        ));
    }
    let cc = &config.certificates;
    let tau_star = find_tau_star(
        &model,
        &gain,
        &f,
        cc.tau_max,
        cc.tau_tol,
        cc.trials.min(20),
        cc.power_steps,
        config.stage_seed("tau-star"),
    )?;
    let (tau, tau_source) = match config.sampling.tau {
        TauSpec::Fixed(tau) => {
            if tau > tau_star {
                summary.warnings.push(format!(
                    "configured tau = {tau} exceeds the certified tau* = {tau_star}"
                ));
            }
            (tau, "fixed".to_string())
        }
        TauSpec::Auto(_) => (config.sampling.safety * tau_star, "auto".to_string()),
    };
    let power = verify_power_stability(
        &model,
        &gain,
        &f,
        tau,
        cc.trials,
        cc.power_steps,
        config.stage_seed("power"),
    );
    if !power.passed {
        // flush what we know before failing the stage
        report::write_json(
            &out.join(ARTIFACT_CERTIFICATE),
            &serde_json::json!({
                "semigroup": cert,
                "sector": sector,
                "small_gain": small_gain,
                "tau": tau,
                "tau_star": tau_star,
                "power": power,
            }),
        )?;
        push(summary, ARTIFACT_CERTIFICATE);
        return Err(Error::PowerStabilityFailed {
            tau,
            contraction: power.contraction,
        });
    }
    let sampled_data = sampled_decay_constants(&model, &gain, &f, &power, tau, tau_star)?;
    let oracle = build_oracle(&cert, &a_cl, sector.sector_bound, cc.zeta_fraction)?;
    let certify_summary = CertifySummary {
        semigroup: cert,
        sector,
        small_gain,
        tau,
        tau_source,
        tau_star,
        power,
        sampled_data,
        lyapunov: LyapunovSummary {
            rate: oracle.rate,
            decay_modulus: oracle.decay_modulus,
            gain: oracle.gain,
            horizon: oracle.horizon,
            grid_len: oracle.grid_len(),
        },
    };
    report::write_json(&out.join(ARTIFACT_CERTIFICATE), &certify_summary)?;
    push(summary, ARTIFACT_CERTIFICATE);
    summary.certify = Some(certify_summary.clone());
    if upto == Stage::Certify {
        return Ok(PipelineState {
            model,
            gain: Some(gain),
            oracle: Some(oracle),
            sampled_record: None,
            et_record: None,
        });
    }

    // ---- simulate ----
    let sd = &certify_summary.sampled_data;
    let x0 = initial_state(config, &model, &problem)?;
    let t_end = match config.simulation.t_end {
        HorizonSpec::Fixed(t) => t,
        HorizonSpec::Auto(_) => 20.0 / sd.envelope_rate,
    };
    let out_points = config.simulation.out_points;
    let mut sampled_record = simulate_sampled(&model, &gain, &f, tau, &x0, t_end, out_points)?;
    let x0_norm = x0.norm();
    for (i, t) in sampled_record.times.clone().iter().enumerate() {
        sampled_record.diagnostics[i].lyapunov = Some(oracle.value(&sampled_record.states[i]));
        sampled_record.diagnostics[i].envelope =
            Some(sd.envelope_gain * (-sd.envelope_rate * t).exp() * x0_norm);
    }
    let trigger_cfg = TriggerConfig::new(tau, config.trigger.sigma, config.trigger.stride_divisor)?;
    let et_run = simulate_et(
        &model,
        &gain,
        &f,
        &oracle,
        &trigger_cfg,
        &x0,
        t_end,
        out_points,
    )?;
    let mut et_record = et_run.record;
    for (i, t) in et_record.times.clone().iter().enumerate() {
        et_record.diagnostics[i].envelope =
            Some(sd.envelope_gain * (-sd.envelope_rate * t).exp() * x0_norm);
    }
    report::write_trajectory_csv(&out.join(ARTIFACT_TRAJECTORY_SAMPLED), &sampled_record)?;
    report::write_events_csv(&out.join(ARTIFACT_EVENTS_SAMPLED), &sampled_record)?;
    report::write_trajectory_csv(&out.join(ARTIFACT_TRAJECTORY_ET), &et_record)?;
    report::write_events_csv(&out.join(ARTIFACT_EVENTS_ET), &et_record)?;
    push(summary, ARTIFACT_TRAJECTORY_SAMPLED);
    push(summary, ARTIFACT_EVENTS_SAMPLED);
    push(summary, ARTIFACT_TRAJECTORY_ET);
    push(summary, ARTIFACT_EVENTS_ET);
    summary.simulate = Some(SimulateSummary {
        t_end,
        out_points,
        initial_norm: x0_norm,
        sampled_events: sampled_record.events.len(),
        sampled_final_norm: *sampled_record.state_norms().last().unwrap(),
        et_events: et_record.events.len(),
        et_final_norm: *et_record.state_norms().last().unwrap(),
        min_et_gap: et_record.min_event_gap(),
    });
    if upto == Stage::Simulate {
        return Ok(PipelineState {
            model,
            gain: Some(gain),
            oracle: Some(oracle),
            sampled_record: Some(sampled_record),
            et_record: Some(et_record),
        });
    }

    // ---- verify ----
    let disturbance = build_disturbance(&config.disturbance, model.dim());
    let disturbed_horizon = (6.0 / oracle.decay_modulus).min(t_end);
    let disturbed = simulate_disturbed(
        &model,
        &gain,
        &f,
        &disturbance,
        &x0,
        disturbed_horizon,
        (out_points / 2).max(2),
    )?;
    let dissipation = check_dissipation(&oracle, &model, &gain, &f, &disturbance, &disturbed)?;
    report::write_dissipation_csv(&out.join(ARTIFACT_DISSIPATION), &dissipation)?;
    push(summary, ARTIFACT_DISSIPATION);
    let (comparison_ratio, comparison_ok) =
        check_comparison_integral(&oracle, model.dim(), &disturbance, &disturbed);
    let iterate = iterate_report(sd, &oracle, &trigger_cfg);
    let corollary = check_corollary(&iterate, &et_record);
    let savings = update_savings_from_record(&et_record, tau, t_end);
    let ugas = ugas_witness(&iterate, x0_norm.max(1.0), 1e-3);
    let verify_summary = VerifySummary {
        iterate,
        corollary,
        savings,
        dissipation_max_residual: dissipation.max_residual,
        comparison_ratio,
        comparison_ok,
        ugas,
    };
    report::write_json(&out.join(ARTIFACT_ITERATE), &verify_summary)?;
    push(summary, ARTIFACT_ITERATE);
    summary.verify = Some(verify_summary);

    Ok(PipelineState {
        model,
        gain: Some(gain),
        oracle: Some(oracle),
        sampled_record: Some(sampled_record),
        et_record: Some(et_record),
    })
}

/// Sweep axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepAxis {
    Tau,
    Sigma,
    Delta,
    Truncation,
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tau" => Ok(Self::Tau),
            "sigma" => Ok(Self::Sigma),
            "delta" => Ok(Self::Delta),
            "J" | "truncation" => Ok(Self::Truncation),
            other => Err(Error::InvalidConfig(format!(
                "sweep axis must be tau | sigma | delta | J, got '{other}'"
            ))),
        }
    }
}

/// One sweep cell result; failed cells carry the error text in `status`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    pub contraction: Option<f64>,
    pub envelope_rate: Option<f64>,
    pub per_event_contraction: Option<f64>,
    pub event_count: Option<usize>,
    pub savings: Option<f64>,
    pub power_ok: Option<bool>,
    pub corollary_ok: Option<bool>,
    pub status: String,
}

fn apply_axis(config: &mut ExperimentConfig, axis: SweepAxis, value: f64) -> Result<()> {
    match axis {
        SweepAxis::Tau => config.sampling.tau = TauSpec::Fixed(value),
        SweepAxis::Sigma => config.trigger.sigma = value,
        SweepAxis::Delta => config.nonlinearity.delta = value,
        SweepAxis::Truncation => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "truncation sweep values must be positive integers, got {value}"
                )));
            }
            config.model.truncation = value as usize;
        }
    }
    config.validate()
}

fn sweep_cell(base: &ExperimentConfig, axis: SweepAxis, index: usize, value: f64) -> SweepRow {
    let mut row = SweepRow {
        index,
        value,
        contraction: None,
        envelope_rate: None,
        per_event_contraction: None,
        event_count: None,
        savings: None,
        power_ok: None,
        corollary_ok: None,
        status: "ok".to_string(),
    };
    let mut config = base.clone();
    config.output_dir = base
        .output_dir
        .join("sweep")
        .join(format!("{axis:?}_{index:03}").to_lowercase());
    if let Err(e) = apply_axis(&mut config, axis, value) {
        row.status = e.to_string();
        return row;
    }
    match run_pipeline(&config, Stage::Verify) {
        Ok(summary) => {
            if let Some(c) = &summary.certify {
                row.contraction = Some(c.power.contraction);
                row.envelope_rate = Some(c.sampled_data.envelope_rate);
                row.power_ok = Some(c.power.passed);
            }
            if let Some(v) = &summary.verify {
                row.per_event_contraction = Some(v.iterate.per_event_contraction);
                row.event_count = Some(v.savings.count_et);
                row.savings = Some(v.savings.savings);
                row.corollary_ok = Some(v.corollary.passed);
            }
        }
        Err(e) => {
            row.status = e.to_string();
        }
    }
    row
}

/// Runs the full pipeline once per axis value in a worker pool, then writes
/// the aggregated `sweep.csv`. Failed cells are marked and do not stop the
/// sweep.
pub fn sweep(
    config: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    std::fs::create_dir_all(&config.output_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        use rayon::prelude::*;
        values
            .par_iter()
            .enumerate()
            .map(|(i, &v)| sweep_cell(config, axis, i, v))
            .collect()
    });
    write_sweep_csv(&config.output_dir.join("sweep.csv"), axis, &rows)?;
    Ok(rows)
}

fn write_sweep_csv(path: &Path, axis: SweepAxis, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "axis",
        "value",
        "q_hat",
        "chi",
        "per_event_contraction",
        "event_count",
        "savings",
        "power_ok",
        "corollary_ok",
        "status",
    ])?;
    let fmt_opt = |v: Option<f64>| v.map(report::fmt_float).unwrap_or_default();
    for row in rows {
        w.write_record([
            format!("{axis:?}").to_lowercase(),
            report::fmt_float(row.value),
            fmt_opt(row.contraction),
            fmt_opt(row.envelope_rate),
            fmt_opt(row.per_event_contraction),
            row.event_count.map(|c| c.to_string()).unwrap_or_default(),
            fmt_opt(row.savings),
            row.power_ok.map(|b| b.to_string()).unwrap_or_default(),
            row.corollary_ok.map(|b| b.to_string()).unwrap_or_default(),
            row.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Convenience used by tests and bindings: the bundled reference
/// configuration (constant reaction rate 10 on the unit interval, one
/// constant input shape).
pub fn reference_config(output_dir: PathBuf) -> ExperimentConfig {
    let text = r#"
seed = 42
[problem]
length = 1.0
n_grid = 256
reaction = { constant = 10.0 }
inputs = [{ constant = 1.0 }]
[model]
truncation = 16
[nonlinearity]
kind = "tanh-blend"
delta = 0.05
[simulation]
x0 = { random = 1.0 }
out_points = 201
"#;
    let mut config = ExperimentConfig::from_toml_str(text).expect("reference config parses");
    config.output_dir = output_dir;
    config
}
