use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bind error at gate {gate}: {reason}")]
    Bind { gate: usize, reason: String },

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("unsupported gate at position {gate}: {reason}")]
    UnsupportedGate { gate: usize, reason: String },

    #[error("qubit index {qubit} out of range for {n_qubits} qubits")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },

    #[error("circuit incompatible with device at gate {gate}: {reason}")]
    Incompatible { gate: usize, reason: String },

    #[error("calibration error at `{path}`: {reason}")]
    Calibration { path: String, reason: String },

    #[error("sampler error: {0}")]
    Sampler(String),

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("ranking error: {0}")]
    Ranking(String),

    #[error("svm error: {0}")]
    Svm(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("csv error at line {line}: {reason}")]
    Csv { line: u64, reason: String },

    #[error("stage `{stage}` failed for circuit {circuit_id}: {source}")]
    Stage {
        stage: &'static str,
        circuit_id: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str, circuit_id: u64) -> Self {
        Error::Stage { stage, circuit_id, source: Box::new(self) }
    }

    /// True for errors caused by user-supplied configuration or input files,
    /// as opposed to failures during a run.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::Config(_) | Error::Calibration { .. } | Error::Csv { .. } | Error::Json(_) => true,
            Error::Stage { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
