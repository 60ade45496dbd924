use crate::key::VoxelKey;

/// Errors raised by the map and its update machinery.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum Error {
    #[error("voxel {0} lies outside the configured array bounds")]
    OutOfBounds(VoxelKey),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input data: {0}")]
    Data(String),
    #[error("voxel {0} is not allocated")]
    Unallocated(VoxelKey),
    #[error("linked list corruption: {0}")]
    ListCorruption(String),
    #[error("update queue exceeded {limit} entries; propagation is not converging")]
    NonTermination { limit: usize },
    #[error("gradient unavailable: stencil around the query is not fully observed")]
    GradientUnavailable,
    #[error("allocation of {0} voxel records failed")]
    Resource(usize),
}

impl Error {
    /// True for errors that indicate the internal state is inconsistent,
    /// as opposed to bad input.
    pub fn is_corruption(&self) -> bool {
        matches!(
            self,
            Error::Unallocated(_) | Error::ListCorruption(_) | Error::NonTermination { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
