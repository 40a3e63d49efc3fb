use thiserror::Error;

/// Errors produced by model construction, certification and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "grid too coarse: {n_grid} points cannot resolve {requested} modes (need n_grid >= 4*J)"
    )]
    GridTooCoarse { n_grid: usize, requested: usize },

    #[error("non-finite sample in {what} at index {index}")]
    NonFiniteSample { what: &'static str, index: usize },

    #[error("grid mismatch: expected {expected} samples, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("all {count} computed modes are nonnegative; raise the truncation order")]
    AllModesUnstable { count: usize },

    #[error("stable tail too short: J = {truncation} leaves only {stable_tail} stable modes (need >= {required})")]
    StableTailTooShort {
        truncation: usize,
        stable_tail: usize,
        required: usize,
    },

    #[error(
        "pair (A, B) is uncontrollable: mode {mode_index} (lambda = {eigenvalue}) is unreachable"
    )]
    Uncontrollable { mode_index: usize, eigenvalue: f64 },

    #[error("stability margin {requested} unachievable within the iteration budget (best abscissa {achieved})")]
    MarginUnachievable { requested: f64, achieved: f64 },

    #[error("closed loop is not Hurwitz: eigenvalue with real part {real_part} (spillover; raise J or redesign)")]
    NotHurwitz { real_part: f64 },

    #[error("matrix has spectral abscissa {abscissa} >= 0; decay bound undefined")]
    NotDecaying { abscissa: f64 },

    #[error(
        "sector certification failed: empirical deviation ratio {observed} exceeds delta = {delta}"
    )]
    SectorBoundViolated { observed: f64, delta: f64 },

    #[error("rate {rate} is not strictly below the certified decay rate {certified}")]
    RateAboveCertified { rate: f64, certified: f64 },

    #[error("sector bound too large for this certificate: loop product {product} must lie below xi = {xi}")]
    SectorTooLarge { product: f64, xi: f64 },

    #[error("no stable sampling period found above the floor {floor}")]
    NoStableSamplingPeriod { floor: f64 },

    #[error("power stability failed at tau = {tau}: fitted contraction {contraction}")]
    PowerStabilityFailed { tau: f64, contraction: f64 },

    #[error("state norm {norm:.3e} exceeded the blow-up guard at t = {time}")]
    SimulationBlowUp { time: f64, norm: f64 },

    #[error("integrator step size underflow at t = {time}")]
    StepSizeUnderflow { time: f64 },

    #[error("dissipation inequality violated at t = {time}: residual {residual:.3e} with V = {value:.3e}, |d| = {disturbance:.3e}")]
    DissipationViolated {
        time: f64,
        residual: f64,
        value: f64,
        disturbance: f64,
    },

    #[error("disturbance kind is not smooth enough for continuous-feedback integration")]
    NonSmoothDisturbance,

    #[error("semigroup envelope search did not settle within the horizon cap {cap}")]
    EnvelopeSearchStalled { cap: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("failed to parse config: {0}")]
    ConfigParse(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code class: 2 = validation, 3 = certification failure,
    /// 4 = simulation blow-up, 1 = anything else.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            GridTooCoarse { .. }
            | NonFiniteSample { .. }
            | GridMismatch { .. }
            | InvalidConfig(_)
            | ConfigParse(_) => 2,
            AllModesUnstable { .. }
            | StableTailTooShort { .. }
            | Uncontrollable { .. }
            | MarginUnachievable { .. }
            | NotHurwitz { .. }
            | NotDecaying { .. }
            | SectorBoundViolated { .. }
            | RateAboveCertified { .. }
            | SectorTooLarge { .. }
            | NoStableSamplingPeriod { .. }
            | PowerStabilityFailed { .. }
            | DissipationViolated { .. }
            | EnvelopeSearchStalled { .. } => 3,
            SimulationBlowUp { .. } | StepSizeUnderflow { .. } => 4,
            NonSmoothDisturbance | Io(_) | Csv(_) | Json(_) => 1,
        }
    }
}
