use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spatial frequencies (u={u}, v={v}) lie outside the unit disc")]
    InfeasibleSfp { u: f64, v: f64 },

    #[error("subarray size {subarray} invalid for {positions} positions and {paths} paths")]
    BadSubarray {
        subarray: usize,
        positions: usize,
        paths: usize,
    },

    #[error("{axis}-axis spectrum has {found} separated peaks, {wanted} required")]
    InsufficientPeaks {
        axis: char,
        found: usize,
        wanted: usize,
    },

    #[error("{paths} paths exceed the exhaustive pairing limit of {limit}")]
    SearchSpaceTooLarge { paths: usize, limit: usize },

    #[error("no pairing yields a physically valid direction for every path")]
    NoValidPairing,

    #[error("no restart reached a feasible orientation (worst margin {worst_margin:.3e})")]
    NoFeasiblePoint { worst_margin: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
