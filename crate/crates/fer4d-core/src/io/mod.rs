//! File formats: text meshes and landmarks, the dataset manifest, Netpbm
//! image export and CSV feature tables.

mod manifest;
mod mesh_text;
mod netpbm;
mod tables;

pub use manifest::{load_dataset, write_dataset};
pub use mesh_text::{
    parse_landmarks, parse_mesh, read_landmark_file, read_mesh_file, write_landmark_file,
    write_mesh_file,
};
pub use netpbm::{
    read_pgm16, read_ppm8, write_pbm, write_pgm16, write_pgm16_values, write_ppm8,
    write_ppm8_values,
};
pub use tables::{read_feature_csv, write_feature_csv};

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{file}:{line}: {message}")]
    ParseError {
        file: String,
        line: usize,
        message: String,
    },
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{file}: {message}")]
    SchemaMismatch { file: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
}

impl IoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> IoError {
        IoError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: &str, line: usize, message: impl Into<String>) -> IoError {
        IoError::ParseError {
            file: file.to_string(),
            line,
            message: message.into(),
        }
    }
}
