use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("angle of arrival is unobservable with a single subcarrier block (M = 1)")]
    AngleUnobservable,

    #[error("degenerate equalization: |AF| below guard on block b_f = {block}")]
    DegenerateEqualization { block: i32 },

    #[error("delay of antenna {antenna} ({delay_s:e} s) exceeds the cyclic prefix ({cp_s:e} s)")]
    OutOfCp { antenna: f64, delay_s: f64, cp_s: f64 },

    #[error("framing error: expected {expected} samples, got {got}")]
    Framing { expected: usize, got: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),
}
