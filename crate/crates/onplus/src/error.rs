use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Kac N=2 excluded (need N >= 3, got N={0})")]
    InvalidN(usize),
    #[error("cap exceeded: {what} needs {size} > cap {cap}")]
    CapExceeded { what: String, size: u128, cap: u128 },
    #[error("numerical rank {got} != expected {expected} for {what}")]
    Rank { what: String, got: usize, expected: usize },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("degenerate: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn cap_check(what: impl FnOnce() -> String, size: u128, cap: u128) -> Result<()> {
    if size > cap {
        Err(Error::CapExceeded { what: what(), size, cap })
    } else {
        Ok(())
    }
}
