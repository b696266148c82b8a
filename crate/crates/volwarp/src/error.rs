use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("VOLT: {0}")]
    Volt(String),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("PNG: {0}")]
    Png(#[from] image::ImageError),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] volwarp_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn io_at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
