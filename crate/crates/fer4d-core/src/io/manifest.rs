//! The dataset manifest: a flat text file naming the landmark schema and,
//! per sample, the subject, expression, and ordered frame file pairs.
//! Frame paths are relative to the manifest's directory.

use super::mesh_text::{read_landmark_file, read_mesh_file, write_landmark_file, write_mesh_file};
use super::IoError;
use crate::mesh::{Dataset, Expression, LandmarkSchema, MeshSequence};
use std::fmt::Write as _;
use std::path::Path;

const MANIFEST_NAME: &str = "manifest.txt";

fn parse_index_list(value: &str, file: &str, line: usize) -> Result<Vec<usize>, IoError> {
    value
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| IoError::parse(file, line, format!("bad index {t:?}")))
        })
        .collect()
}

/// Loads a dataset from a manifest file.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, IoError> {
    if !manifest_path.exists() {
        return Err(IoError::MissingFile(manifest_path.to_path_buf()));
    }
    let file = manifest_path.display().to_string();
    let text = std::fs::read_to_string(manifest_path).map_err(|e| IoError::io(manifest_path, e))?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));

    let mut total_count: Option<usize> = None;
    let mut border: Option<Vec<usize>> = None;
    let mut eyebrows: Option<Vec<usize>> = None;
    let mut nose_tip: Option<usize> = None;

    struct PendingSample {
        subject: Option<String>,
        expression: Option<Expression>,
        frames: Vec<(String, String)>,
        line: usize,
    }
    let mut pending: Option<PendingSample> = None;
    let mut samples_raw: Vec<PendingSample> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "[sample]" {
            if let Some(p) = pending.take() {
                samples_raw.push(p);
            }
            pending = Some(PendingSample {
                subject: None,
                expression: None,
                frames: Vec::new(),
                line: line_no,
            });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| IoError::parse(&file, line_no, "expected key = value"))?;
        let key = key.trim();
        let value = value.trim();
        match (&mut pending, key) {
            (None, "schema.total_count") => {
                total_count = Some(value.parse().map_err(|_| {
                    IoError::parse(&file, line_no, format!("bad count {value:?}"))
                })?);
            }
            (None, "schema.border") => border = Some(parse_index_list(value, &file, line_no)?),
            (None, "schema.eyebrows") => eyebrows = Some(parse_index_list(value, &file, line_no)?),
            (None, "schema.nose_tip") => {
                nose_tip = Some(value.parse().map_err(|_| {
                    IoError::parse(&file, line_no, format!("bad index {value:?}"))
                })?);
            }
            (Some(p), "subject") => p.subject = Some(value.to_string()),
            (Some(p), "expression") => {
                p.expression = Some(Expression::parse(value).ok_or_else(|| {
                    IoError::parse(&file, line_no, format!("unknown expression {value:?}"))
                })?);
            }
            (Some(p), "frame") => {
                let (mesh, lm) = value.split_once(char::is_whitespace).ok_or_else(|| {
                    IoError::parse(&file, line_no, "frame needs mesh and landmark paths")
                })?;
                p.frames.push((mesh.trim().to_string(), lm.trim().to_string()));
            }
            (_, other) => {
                return Err(IoError::parse(
                    &file,
                    line_no,
                    format!("unexpected key {other:?}"),
                ))
            }
        }
    }
    if let Some(p) = pending.take() {
        samples_raw.push(p);
    }

    let schema = LandmarkSchema::new(
        total_count.ok_or_else(|| IoError::parse(&file, 0, "missing schema.total_count"))?,
        border.ok_or_else(|| IoError::parse(&file, 0, "missing schema.border"))?,
        eyebrows.ok_or_else(|| IoError::parse(&file, 0, "missing schema.eyebrows"))?,
        nose_tip.ok_or_else(|| IoError::parse(&file, 0, "missing schema.nose_tip"))?,
    )?;

    let mut samples = Vec::with_capacity(samples_raw.len());
    for p in samples_raw {
        let subject_id = p
            .subject
            .ok_or_else(|| IoError::parse(&file, p.line, "sample missing subject"))?;
        let expression = p
            .expression
            .ok_or_else(|| IoError::parse(&file, p.line, "sample missing expression"))?;
        if p.frames.is_empty() {
            return Err(IoError::parse(&file, p.line, "sample has no frames"));
        }
        let mut frames = Vec::with_capacity(p.frames.len());
        for (mesh_rel, lm_rel) in &p.frames {
            let mesh = read_mesh_file(&root.join(mesh_rel))?;
            let landmarks = read_landmark_file(&root.join(lm_rel), &schema)?;
            frames.push((mesh, landmarks));
        }
        samples.push(MeshSequence {
            subject_id,
            expression,
            frames,
        });
    }
    let dataset = Dataset { samples, schema };
    dataset.validate()?;
    Ok(dataset)
}

/// Writes a dataset into `dir` (created if needed): mesh/landmark files
/// under `frames/` plus the manifest. Returns the manifest path.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<std::path::PathBuf, IoError> {
    dataset.validate()?;
    let frames_dir = dir.join("frames");
    std::fs::create_dir_all(&frames_dir).map_err(|e| IoError::io(&frames_dir, e))?;

    let mut manifest = String::new();
    let _ = writeln!(manifest, "# 4D face dataset manifest");
    let _ = writeln!(manifest, "schema.total_count = {}", dataset.schema.total_count);
    let _ = writeln!(manifest, "schema.border = {}", join_indices(&dataset.schema.border_indices));
    let _ = writeln!(
        manifest,
        "schema.eyebrows = {}",
        join_indices(&dataset.schema.eyebrow_indices)
    );
    let _ = writeln!(manifest, "schema.nose_tip = {}", dataset.schema.nose_tip_index);

    for sample in &dataset.samples {
        let _ = writeln!(manifest, "\n[sample]");
        let _ = writeln!(manifest, "subject = {}", sample.subject_id);
        let _ = writeln!(manifest, "expression = {}", sample.expression);
        for (t, (mesh, landmarks)) in sample.frames.iter().enumerate() {
            let stem = format!("{}_{}_{:03}", sample.subject_id, sample.expression, t);
            let mesh_rel = format!("frames/{stem}.msh");
            let lm_rel = format!("frames/{stem}.lm3");
            write_mesh_file(mesh, &dir.join(&mesh_rel))?;
            write_landmark_file(landmarks, &dir.join(&lm_rel))?;
            let _ = writeln!(manifest, "frame = {mesh_rel} {lm_rel}");
        }
    }
    let manifest_path = dir.join(MANIFEST_NAME);
    std::fs::write(&manifest_path, manifest).map_err(|e| IoError::io(&manifest_path, e))?;
    Ok(manifest_path)
}

fn join_indices(indices: &[usize]) -> String {
    indices
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_synthetic, SyntheticSpec};

    #[test]
    fn write_then_load_is_identity() {
        let spec = SyntheticSpec {
            subjects: 2,
            frames: 3,
            noise: 0.004,
            seed: 13,
        };
        let ds = generate_synthetic(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(&manifest).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn missing_frame_file_is_named() {
        let spec = SyntheticSpec {
            subjects: 1,
            frames: 2,
            noise: 0.0,
            seed: 1,
        };
        let ds = generate_synthetic(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_dataset(&ds, dir.path()).unwrap();
        let victim = dir.path().join("frames/s00_anger_001.msh");
        std::fs::remove_file(&victim).unwrap();
        let err = load_dataset(&manifest).unwrap_err();
        match err {
            IoError::MissingFile(p) => assert_eq!(p, victim),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn short_landmark_file_is_schema_mismatch() {
        let spec = SyntheticSpec {
            subjects: 1,
            frames: 1,
            noise: 0.0,
            seed: 1,
        };
        let ds = generate_synthetic(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_dataset(&ds, dir.path()).unwrap();
        let victim = dir.path().join("frames/s00_anger_000.lm3");
        let text = std::fs::read_to_string(&victim).unwrap();
        let truncated: Vec<&str> = text.lines().take(82).collect();
        std::fs::write(&victim, truncated.join("\n")).unwrap();
        let err = load_dataset(&manifest).unwrap_err();
        match err {
            IoError::SchemaMismatch { file, message } => {
                assert!(file.contains("s00_anger_000.lm3"));
                assert!(message.contains("82"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn two_sample_manifest_loads_counts() {
        let spec = SyntheticSpec {
            subjects: 1,
            frames: 3,
            noise: 0.0,
            seed: 2,
        };
        let mut ds = generate_synthetic(&spec).unwrap();
        ds.samples.truncate(2);
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(&manifest).unwrap();
        assert_eq!(back.samples.len(), 2);
        assert!(back.samples.iter().all(|s| s.frame_count() == 3));
    }
}
