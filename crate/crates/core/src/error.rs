use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("rate {family} evaluates to {value} < 0 at t = {t}")]
    NegativeRate { family: String, value: f64, t: f64 },

    #[error("rates of family `{0}` grow without bound in the state index")]
    Unbounded(String),

    #[error("series diverges: {0}")]
    DivergentSeries(String),

    #[error("infimum over states not stabilized: probe limit {probe} is below stabilization index {required}")]
    NotStabilized { probe: usize, required: usize },

    #[error("contraction rate `{source_name}` has non-positive period mean {mean}; catastrophe rates are not essential")]
    NotEssential { source_name: String, mean: f64 },

    #[error("decay envelope for `{source_name}` failed certification: excess {excess:e} at s = {s}, t = {t}")]
    EnvelopeCertification {
        source_name: String,
        excess: f64,
        s: f64,
        t: f64,
    },

    #[error("mean bound unavailable: W = inf d_k/k is zero for this weight sequence")]
    ZeroW,

    #[error("initial state {state} lies outside truncation level {level}")]
    InitialStateOutside { state: usize, level: usize },

    #[error("no truncation level up to {cap} meets target {target:e}; bound floor {floor:e}")]
    TargetUnreachable { target: f64, cap: usize, floor: f64 },

    #[error("step {step} too large for stiffness scale L = {l} (need step * 2L <= 0.5)")]
    StepTooLarge { step: f64, l: f64 },

    #[error("integration quality: entry {index} = {value:e} at t = {t}")]
    NegativeProbability { index: usize, value: f64, t: f64 },

    #[error("thinning majorant {majorant} below exit rate {rate} (state {state}, t = {t})")]
    MajorantViolated {
        majorant: f64,
        rate: f64,
        state: usize,
        t: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag used by the CLI and the C ABI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "invalid_model",
            Error::NegativeRate { .. } => "negative_rate",
            Error::Unbounded(_) => "unbounded_rates",
            Error::DivergentSeries(_) => "divergent_series",
            Error::NotStabilized { .. } => "not_stabilized",
            Error::NotEssential { .. } => "not_essential",
            Error::EnvelopeCertification { .. } => "envelope_certification",
            Error::ZeroW => "zero_w",
            Error::InitialStateOutside { .. } => "initial_state_outside",
            Error::TargetUnreachable { .. } => "target_unreachable",
            Error::StepTooLarge { .. } => "step_too_large",
            Error::NegativeProbability { .. } => "negative_probability",
            Error::MajorantViolated { .. } => "majorant_violated",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
