use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("identification `{spectrum_id}` has non-finite score {score}")]
    NonFiniteScore { spectrum_id: String, score: f64 },

    #[error("spectrum `{0}` appears more than once; one identification per spectrum is required")]
    DuplicateSpectrum(String),

    #[error("decoy identification `{0}` is labelled correct")]
    CorrectDecoy(String),

    #[error("truth labels are required but missing for `{0}`")]
    MissingTruth(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("enumeration over {n} incorrect identifications refused (limit is {max})")]
    EnumerationTooLarge { n: usize, max: usize },

    #[error("conditioning event has zero probability: {0}")]
    ZeroProbabilityEvent(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
