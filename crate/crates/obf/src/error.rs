use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::kv::KvError;

#[derive(Debug, Error)]
pub enum ObfError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Kv { path: PathBuf, source: KvError },
    #[error(transparent)]
    Core(#[from] obf_core::Error),
}

pub type Result<T, E = ObfError> = std::result::Result<T, E>;

impl ObfError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn kv(path: &Path, source: KvError) -> Self {
        Self::Kv {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 usage, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use obf_core::Error as E;
        match self {
            Self::Usage(_) => 1,
            Self::Data(_) | Self::Io { .. } | Self::Kv { .. } => 2,
            Self::Core(e) => match e {
                E::NonFinite(_) | E::NonFiniteLoss { .. } => 3,
                E::Config(_) | E::Episode(_) => 1,
                _ => 2,
            },
        }
    }
}
