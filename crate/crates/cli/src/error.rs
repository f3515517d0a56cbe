//! One error type for the whole binary, mapping every failure onto the
//! documented exit codes.

use sessnas::cost::CostError;
use sessnas::nn::NnError;
use sessnas::report::ReportError;
use sessnas::search::SearchError;
use sessnas::session::SessionError;
use sessnas::space::SpaceError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("no input capture files given")]
    EmptyInput,
    /// Configuration file problems: unreadable, unparsable, unknown keys,
    /// or values that do not form a legal module config.
    #[error("{0}")]
    Config(String),
    /// A required value came neither from a flag nor from the config.
    #[error("missing {0}")]
    Missing(&'static str),
    #[error("model expects {model} classes but the dataset defines {dataset}")]
    ClassMismatch { model: usize, dataset: usize },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Stable exit codes; 0 is used only on full success.
    ///
    /// - 1: unexpected failure (I/O, internal invariants)
    /// - 2: usage — empty input list, unlabeled capture, missing required
    ///   value (clap also exits 2 on malformed flags)
    /// - 3: unparsable or invalid input text — config file, capture,
    ///   dataset, model, or search log
    /// - 4: invalid genome (text or shape)
    /// - 5: no feasible genome under the active thresholds
    /// - 6: model/dataset class-count mismatch
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::EmptyInput | CliError::Missing(_) => 2,
            CliError::Config(_) => 3,
            CliError::ClassMismatch { .. } => 6,
            CliError::Session(e) => session_code(e),
            CliError::Space(_) => 4,
            CliError::Cost(e) => cost_code(e),
            CliError::Nn(e) => nn_code(e),
            CliError::Search(e) => search_code(e),
            CliError::Report(_) | CliError::Io(_) => 1,
        }
    }
}

fn session_code(e: &SessionError) -> i32 {
    match e {
        SessionError::UnlabeledFile(_) => 2,
        SessionError::Pcap(_) | SessionError::MalformedDataset(_) => 3,
        SessionError::BadLabelMap(_) | SessionError::BadFraction(_) => 3,
        _ => 1,
    }
}

fn cost_code(e: &CostError) -> i32 {
    match e {
        CostError::BadThreshold(_) => 3,
        _ => 1,
    }
}

fn nn_code(e: &NnError) -> i32 {
    match e {
        NnError::Space(_) => 4,
        NnError::BadConfig(_) => 3,
        NnError::MalformedModel(_) => 3,
        _ => 1,
    }
}

fn search_code(e: &SearchError) -> i32 {
    match e {
        SearchError::NoFeasibleGenome(_) | SearchError::RetryCapExceeded(_) => 5,
        SearchError::BadConfig(_) | SearchError::MalformedLog(_) => 3,
        SearchError::Space(_) => 4,
        SearchError::Cost(e) => cost_code(e),
        SearchError::Nn(e) => nn_code(e),
        SearchError::Io(_) => 1,
    }
}
