//! Loading digraphs from edge-list files.

use std::fmt;
use std::fs;
use std::path::Path;

use pathlim_core::graph::{parse_digraph, ParseError, WeightedDigraph};

/// Why a file failed to load: unreadable, or readable but malformed.
#[derive(Debug)]
pub enum LoadError {
    Read { path: String, source: std::io::Error },
    Parse { path: String, source: ParseError },
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Read { path, source } => write!(f, "{path}: {source}"),
            LoadError::Parse { path, source } => write!(f, "{path}: {source}"),
        }
    }
}

impl std::error::Error for LoadError {}

/// Reads and parses one edge-list file.
pub fn read_digraph(path: &Path) -> Result<WeightedDigraph, LoadError> {
    let shown = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| LoadError::Read {
        path: shown.clone(),
        source,
    })?;
    parse_digraph(&text).map_err(|source| LoadError::Parse { path: shown, source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_file_reports_the_path() {
        let err = read_digraph(Path::new("/nonexistent/digraph.txt")).unwrap_err();
        assert!(matches!(err, LoadError::Read { .. }));
        assert!(err.to_string().contains("/nonexistent/digraph.txt"));
    }

    #[test]
    fn malformed_text_reports_the_line() {
        let dir = std::env::temp_dir().join("pathlim-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let file = dir.join("bad.txt");
        std::fs::write(&file, "a b 1.0\nbogus line\n").unwrap();
        let err = read_digraph(&file).unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }
}
