//! Python bindings: a `Lab` class bundling one certified control loop, plus
//! module-level helpers mirroring the pipeline entry points.

use nalgebra::DVector;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use etpde::certificates::{
    find_tau_star, psi_map, sampled_decay_constants, verify_power_stability,
    SampledDataCertificate, SemigroupCertificate,
};
use etpde::config::ExperimentConfig;
use etpde::event_trigger::{
    check_corollary, iterate_report, simulate_et, update_savings_from_record, TriggerConfig,
};
use etpde::feedback::{closed_loop_matrix, design_gain, FeedbackGain};
use etpde::lyapunov::{build_oracle, LyapunovOracle};
use etpde::nonlinearity::{certify_sector, SectorNonlinearity};
use etpde::pipeline::{run_pipeline, Stage};
use etpde::simulator::simulate_sampled;
use etpde::spectral::{solve_eigensystem, ModalModel, SpatialProblem};

fn err(e: etpde::Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_state(x0: Vec<f64>, dim: usize) -> PyResult<DVector<f64>> {
    if x0.len() != dim {
        return Err(PyValueError::new_err(format!(
            "state must have {dim} entries, got {}",
            x0.len()
        )));
    }
    Ok(DVector::from_vec(x0))
}

/// One certified loop: modal truncation, stabilizing gain, sector
/// nonlinearity, semigroup certificates, Lyapunov oracle, and the sampling
/// period (half the certified stable period unless overridden).
#[pyclass]
struct Lab {
    model: ModalModel,
    gain: FeedbackGain,
    f: SectorNonlinearity,
    cert: SemigroupCertificate,
    oracle: LyapunovOracle,
    sd: SampledDataCertificate,
    #[pyo3(get)]
    tau: f64,
    #[pyo3(get)]
    tau_star: f64,
}

#[pymethods]
impl Lab {
    #[new]
    #[pyo3(signature = (length, reaction, inputs, truncation, delta = 0.0, kind = "tanh-blend",
                        design_margin = 1.0, tau = None, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        length: f64,
        reaction: Vec<f64>,
        inputs: Vec<Vec<f64>>,
        truncation: usize,
        delta: f64,
        kind: &str,
        design_margin: f64,
        tau: Option<f64>,
        seed: u64,
    ) -> PyResult<Self> {
        let problem = SpatialProblem::new(length, reaction, inputs).map_err(err)?;
        let model = ModalModel::build(&problem, truncation, 0.5).map_err(err)?;
        let gain = design_gain(
            &model.unstable_block(),
            &model.unstable_inputs(),
            design_margin,
        )
        .map_err(err)?;
        let a_cl = closed_loop_matrix(&model, &gain).map_err(err)?;
        let cert =
            SemigroupCertificate::estimate(&model.generator(), &a_cl, &model.input_matrix, 0.9)
                .map_err(err)?;
        let f = if delta == 0.0 {
            SectorNonlinearity::Identity
        } else {
            SectorNonlinearity::new(kind, delta).map_err(err)?
        };
        let sector = certify_sector(&f, gain.norm).map_err(err)?;
        let tau_star =
            find_tau_star(&model, &gain, &f, 2.0, 1e-3, 12, 80, seed ^ 0x7a75).map_err(err)?;
        let tau = tau.unwrap_or(0.5 * tau_star);
        let power = verify_power_stability(&model, &gain, &f, tau, 100, 60, seed ^ 0x9e);
        if !power.passed {
            return Err(PyRuntimeError::new_err(format!(
                "loop is not power stable at tau = {tau} (fitted contraction {})",
                power.contraction
            )));
        }
        let sd = sampled_decay_constants(&model, &gain, &f, &power, tau, tau_star).map_err(err)?;
        let oracle = build_oracle(&cert, &a_cl, sector.sector_bound, 0.5).map_err(err)?;
        Ok(Self {
            model,
            gain,
            f,
            cert,
            oracle,
            sd,
            tau,
            tau_star,
        })
    }

    /// Retained eigenvalues, largest first.
    fn eigenvalues(&self) -> Vec<f64> {
        self.model.eigenvalues().to_vec()
    }

    #[getter]
    fn n_unstable(&self) -> usize {
        self.model.n_unstable
    }

    #[getter]
    fn dim(&self) -> usize {
        self.model.dim()
    }

    #[getter]
    fn gain_norm(&self) -> f64 {
        self.gain.norm
    }

    /// Gain matrix on the unstable block, row per input channel.
    fn gain_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.gain.n_inputs())
            .map(|r| self.gain.gain.row(r).iter().copied().collect())
            .collect()
    }

    /// Fitted per-step contraction of the sampled loop.
    #[getter]
    fn contraction(&self) -> f64 {
        self.sd.contraction
    }

    /// Continuous-time envelope pair (G, chi) of the sampled loop.
    fn envelope(&self) -> (f64, f64) {
        (self.sd.envelope_gain, self.sd.envelope_rate)
    }

    /// Semigroup constants (M, nu, N, xi).
    fn semigroup_constants(&self) -> (f64, f64, f64, f64) {
        (
            self.cert.open_loop_gain,
            self.cert.open_loop_rate,
            self.cert.closed_loop_gain,
            self.cert.closed_loop_rate,
        )
    }

    /// Lyapunov functional V(x).
    fn lyapunov(&self, x: Vec<f64>) -> PyResult<f64> {
        Ok(self.oracle.value(&to_state(x, self.model.dim())?))
    }

    /// One step of the sampled closed loop.
    #[pyo3(signature = (x, tau = None))]
    fn psi(&self, x: Vec<f64>, tau: Option<f64>) -> PyResult<Vec<f64>> {
        let state = to_state(x, self.model.dim())?;
        let parts = psi_map(
            &self.model,
            &self.gain,
            &self.f,
            tau.unwrap_or(self.tau),
            &state,
        );
        Ok(parts.combined.iter().copied().collect())
    }

    /// Sampled-data trajectory; returns (times, state norms).
    #[pyo3(signature = (x0, t_end, points = 201))]
    fn simulate_sampled(
        &self,
        x0: Vec<f64>,
        t_end: f64,
        points: usize,
    ) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let state = to_state(x0, self.model.dim())?;
        let record = simulate_sampled(
            &self.model,
            &self.gain,
            &self.f,
            self.tau,
            &state,
            t_end,
            points,
        )
        .map_err(err)?;
        Ok((record.times.clone(), record.state_norms()))
    }

    /// Event-triggered run; returns a dict with times, norms, event times,
    /// inter-event gaps, update savings, and the decay verdict.
    #[pyo3(signature = (x0, t_end, sigma = 0.5, points = 201))]
    fn simulate_et<'py>(
        &self,
        py: Python<'py>,
        x0: Vec<f64>,
        t_end: f64,
        sigma: f64,
        points: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let state = to_state(x0, self.model.dim())?;
        let cfg = TriggerConfig::new(self.tau, sigma, 50.0).map_err(err)?;
        let run = simulate_et(
            &self.model,
            &self.gain,
            &self.f,
            &self.oracle,
            &cfg,
            &state,
            t_end,
            points,
        )
        .map_err(err)?;
        let report = iterate_report(&self.sd, &self.oracle, &cfg);
        let verdict = check_corollary(&report, &run.record);
        let savings = update_savings_from_record(&run.record, self.tau, t_end);
        let out = PyDict::new(py);
        out.set_item("times", run.record.times.clone())?;
        out.set_item("norms", run.record.state_norms())?;
        out.set_item(
            "event_times",
            run.record.events.iter().map(|e| e.time).collect::<Vec<_>>(),
        )?;
        out.set_item(
            "gaps",
            run.record
                .events
                .iter()
                .filter_map(|e| e.gap)
                .collect::<Vec<_>>(),
        )?;
        out.set_item("count_sampled", savings.count_sampled)?;
        out.set_item("count_et", savings.count_et)?;
        out.set_item("savings", savings.savings)?;
        out.set_item("per_event_contraction", report.per_event_contraction)?;
        out.set_item("event_decay_rate", report.event_decay_rate)?;
        out.set_item("bounds_conclusive", verdict.conclusive)?;
        out.set_item("bounds_passed", verdict.passed)?;
        Ok(out)
    }
}

/// Eigenvalues and grid-sampled eigenfunctions of the reaction-diffusion
/// operator with Dirichlet ends.
#[pyfunction]
fn eigensystem(
    length: f64,
    reaction: Vec<f64>,
    count: usize,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let problem = SpatialProblem::new(length, reaction, vec![]).map_err(err)?;
    let eig = solve_eigensystem(&problem, count).map_err(err)?;
    let functions = eig
        .eigenfunctions
        .iter()
        .map(|f| f.iter().copied().collect())
        .collect();
    Ok((eig.eigenvalues, functions))
}

/// Runs the experiment pipeline from a TOML string; returns the summary as a
/// JSON string. `stage` is one of eig | design | certify | simulate | verify
/// | run.
#[pyfunction]
#[pyo3(signature = (config_toml, output_dir, stage = "run"))]
fn run_experiment(config_toml: &str, output_dir: &str, stage: &str) -> PyResult<String> {
    let mut config = ExperimentConfig::from_toml_str(config_toml).map_err(err)?;
    config.output_dir = output_dir.into();
    let stage: Stage = stage.parse().map_err(err)?;
    let summary = run_pipeline(&config, stage).map_err(err)?;
    serde_json::to_string_pretty(&summary).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn etpde_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Lab>()?;
    m.add_function(wrap_pyfunction!(eigensystem, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
