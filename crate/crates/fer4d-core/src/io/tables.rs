//! CSV import/export of per-frame feature rows.

use super::IoError;
use std::fmt::Write as _;
use std::path::Path;

/// Writes one row per frame, shortest round-trip float formatting.
pub fn write_feature_csv(rows: &[Vec<f64>], path: &Path) -> Result<(), IoError> {
    let mut out = String::new();
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| IoError::io(path, e))
}

pub fn read_feature_csv(path: &Path) -> Result<Vec<Vec<f64>>, IoError> {
    if !path.exists() {
        return Err(IoError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let file = path.display().to_string();
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, line)| {
            line.split(',')
                .map(|t| {
                    t.trim().parse::<f64>().map_err(|_| {
                        IoError::parse(&file, idx + 1, format!("bad number {t:?}"))
                    })
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_csv_roundtrip_is_exact() {
        let rows = vec![
            vec![0.1, 1.0 / 3.0, -2.5e-17],
            vec![1.0, 2.0, 3.0000000000000004],
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_feature_csv(&rows, &path).unwrap();
        assert_eq!(read_feature_csv(&path).unwrap(), rows);
    }
}
