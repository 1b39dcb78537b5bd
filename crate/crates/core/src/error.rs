use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    InvalidInput(String),
    #[error("{0}")]
    Parse(String),
    #[error("{message}, row {row}")]
    Row { row: usize, message: String },
    #[error("mCI undefined for empty train")]
    EmptyTrainMci,
    #[error("CS divergence undefined for empty train")]
    EmptyTrainCs,
    #[error("bandwidth undefined: at least 2 spikes required")]
    BandwidthUndefined,
    #[error("insufficient bins: {0} overlapping bins, at least 3 required")]
    InsufficientBins(usize),
    #[error("unknown event id in grouping overrides: {0}")]
    UnknownEventId(String),
    #[error("episodes overlap: [{0}, {1}] and [{2}, {3}]")]
    OverlappingEpisodes(f64, f64, f64, f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
