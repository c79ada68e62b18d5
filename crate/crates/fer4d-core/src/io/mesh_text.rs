//! Text formats for mesh frames and landmark sets.
//!
//! Mesh file: one `v x y z` or `v x y z r g b` line per vertex (all lines
//! must agree on whether colors are present), then `f i j k` lines with
//! 0-based vertex indices. Landmark file: one `x y z` triple per line.
//! Floats are written in shortest round-trip form, so write-then-read is
//! exact.

use super::IoError;
use crate::mesh::{LandmarkSchema, LandmarkSet, Mesh, Rgb, Vertex3};
use std::fmt::Write as _;
use std::path::Path;

fn parse_f64(tok: &str, file: &str, line: usize) -> Result<f64, IoError> {
    tok.parse::<f64>()
        .map_err(|_| IoError::parse(file, line, format!("bad number {tok:?}")))
}

fn parse_usize(tok: &str, file: &str, line: usize) -> Result<usize, IoError> {
    tok.parse::<usize>()
        .map_err(|_| IoError::parse(file, line, format!("bad index {tok:?}")))
}

/// Parses mesh text; `file` names the source in errors.
pub fn parse_mesh(text: &str, file: &str) -> Result<Mesh, IoError> {
    let mut vertices: Vec<Vertex3> = Vec::new();
    let mut colors: Vec<Rgb> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let mut has_colors: Option<bool> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let rest: Vec<&str> = toks.collect();
                let colored = match rest.len() {
                    3 => false,
                    6 => true,
                    n => {
                        return Err(IoError::parse(
                            file,
                            line_no,
                            format!("vertex line has {n} fields, expected 3 or 6"),
                        ))
                    }
                };
                if *has_colors.get_or_insert(colored) != colored {
                    return Err(IoError::parse(
                        file,
                        line_no,
                        "mixed colored and uncolored vertex lines",
                    ));
                }
                let x = parse_f64(rest[0], file, line_no)?;
                let y = parse_f64(rest[1], file, line_no)?;
                let z = parse_f64(rest[2], file, line_no)?;
                vertices.push(Vertex3::new(x, y, z));
                if colored {
                    colors.push([
                        parse_f64(rest[3], file, line_no)?,
                        parse_f64(rest[4], file, line_no)?,
                        parse_f64(rest[5], file, line_no)?,
                    ]);
                }
            }
            Some("f") => {
                let rest: Vec<&str> = toks.collect();
                if rest.len() != 3 {
                    return Err(IoError::parse(
                        file,
                        line_no,
                        format!("face line has {} fields, expected 3", rest.len()),
                    ));
                }
                let a = parse_usize(rest[0], file, line_no)?;
                let b = parse_usize(rest[1], file, line_no)?;
                let c = parse_usize(rest[2], file, line_no)?;
                faces.push([a, b, c]);
            }
            Some(other) => {
                return Err(IoError::parse(
                    file,
                    line_no,
                    format!("unknown record {other:?}"),
                ))
            }
            None => {}
        }
    }
    let colors = if has_colors == Some(true) {
        Some(colors)
    } else {
        None
    };
    // Face index range errors surface here with the file name attached.
    Mesh::new(vertices, colors, faces).map_err(|e| IoError::parse(file, 0, e.to_string()))
}

pub fn read_mesh_file(path: &Path) -> Result<Mesh, IoError> {
    if !path.exists() {
        return Err(IoError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_mesh(&text, &path.display().to_string())
}

pub fn write_mesh_file(mesh: &Mesh, path: &Path) -> Result<(), IoError> {
    let mut out = String::new();
    for (i, v) in mesh.vertices.iter().enumerate() {
        match &mesh.colors {
            Some(colors) => {
                let c = colors[i];
                let _ = writeln!(out, "v {} {} {} {} {} {}", v.x, v.y, v.z, c[0], c[1], c[2]);
            }
            None => {
                let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
            }
        }
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0], f[1], f[2]);
    }
    std::fs::write(path, out).map_err(|e| IoError::io(path, e))
}

/// Parses landmark text and checks the count against the schema.
pub fn parse_landmarks(
    text: &str,
    schema: &LandmarkSchema,
    file: &str,
) -> Result<LandmarkSet, IoError> {
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(IoError::parse(
                file,
                line_no,
                format!("landmark line has {} fields, expected 3", toks.len()),
            ));
        }
        points.push(Vertex3::new(
            parse_f64(toks[0], file, line_no)?,
            parse_f64(toks[1], file, line_no)?,
            parse_f64(toks[2], file, line_no)?,
        ));
    }
    if points.len() != schema.total_count {
        return Err(IoError::SchemaMismatch {
            file: file.to_string(),
            message: format!(
                "{} landmarks against schema count {}",
                points.len(),
                schema.total_count
            ),
        });
    }
    LandmarkSet::new(points, schema).map_err(IoError::from)
}

pub fn read_landmark_file(path: &Path, schema: &LandmarkSchema) -> Result<LandmarkSet, IoError> {
    if !path.exists() {
        return Err(IoError::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_landmarks(&text, schema, &path.display().to_string())
}

pub fn write_landmark_file(landmarks: &LandmarkSet, path: &Path) -> Result<(), IoError> {
    let mut out = String::new();
    for p in &landmarks.points {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    std::fs::write(path, out).map_err(|e| IoError::io(path, e))
}
