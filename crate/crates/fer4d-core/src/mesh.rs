//! Domain types for 4D face data and the per-frame preprocessing stage:
//! statistical outlier removal followed by landmark-guided face cropping.

use thiserror::Error;

/// The six basic expression classes, in fixed label order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expression {
    Anger,
    Disgust,
    Fear,
    Happiness,
    Sadness,
    Surprise,
}

/// Number of expression classes.
pub const CLASS_COUNT: usize = 6;

impl Expression {
    pub const ALL: [Expression; CLASS_COUNT] = [
        Expression::Anger,
        Expression::Disgust,
        Expression::Fear,
        Expression::Happiness,
        Expression::Sadness,
        Expression::Surprise,
    ];

    /// Zero-based class index.
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&e| e == self).unwrap()
    }

    pub fn from_index(idx: usize) -> Option<Expression> {
        Self::ALL.get(idx).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Expression::Anger => "anger",
            Expression::Disgust => "disgust",
            Expression::Fear => "fear",
            Expression::Happiness => "happiness",
            Expression::Sadness => "sadness",
            Expression::Surprise => "surprise",
        }
    }

    pub fn parse(name: &str) -> Option<Expression> {
        Self::ALL.iter().find(|e| e.name() == name).copied()
    }
}

impl std::fmt::Display for Expression {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A point in scan units. All coordinates must be finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vertex3 {
    pub fn new(x: f64, y: f64, z: f64) -> Vertex3 {
        Vertex3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dist(&self, other: &Vertex3) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn dist_sq(&self, other: &Vertex3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }
}

/// Per-vertex RGB color with components in `[0, 1]`.
pub type Rgb = [f64; 3];

/// An indexed triangle mesh, optionally carrying per-vertex colors.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vertex3>,
    pub colors: Option<Vec<Rgb>>,
    pub faces: Vec<[usize; 3]>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("mesh invalid: {0}")]
    InvalidMesh(String),
    #[error("cropping left {survivors} vertices; fewer than 3 cannot form a face")]
    EmptyCrop { survivors: usize },
    #[error("landmark schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("frame {frame}: {source}")]
    Frame {
        frame: usize,
        #[source]
        source: Box<MeshError>,
    },
}

impl Mesh {
    /// Validates the type invariants: at least 3 vertices, finite coordinates,
    /// in-range face indices and a color entry per vertex when colors exist.
    pub fn new(
        vertices: Vec<Vertex3>,
        colors: Option<Vec<Rgb>>,
        faces: Vec<[usize; 3]>,
    ) -> Result<Mesh, MeshError> {
        if vertices.len() < 3 {
            return Err(MeshError::InvalidMesh(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if let Some(v) = vertices.iter().find(|v| !v.is_finite()) {
            return Err(MeshError::InvalidMesh(format!(
                "non-finite vertex ({}, {}, {})",
                v.x, v.y, v.z
            )));
        }
        if let Some(c) = &colors {
            if c.len() != vertices.len() {
                return Err(MeshError::InvalidMesh(format!(
                    "{} colors for {} vertices",
                    c.len(),
                    vertices.len()
                )));
            }
        }
        for face in &faces {
            if face.iter().any(|&i| i >= vertices.len()) {
                return Err(MeshError::InvalidMesh(format!(
                    "face ({}, {}, {}) references a vertex out of range 0..{}",
                    face[0],
                    face[1],
                    face[2],
                    vertices.len()
                )));
            }
        }
        Ok(Mesh {
            vertices,
            colors,
            faces,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Mean of all vertex positions.
    pub fn centroid(&self) -> Vertex3 {
        let n = self.vertices.len() as f64;
        let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
        for v in &self.vertices {
            x += v.x;
            y += v.y;
            z += v.z;
        }
        Vertex3::new(x / n, y / n, z / n)
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounding_box(&self) -> (Vertex3, Vertex3) {
        bounding_box(&self.vertices)
    }

    /// Keeps exactly the vertices whose index passes `keep`, drops faces that
    /// reference removed vertices and remaps the surviving indices.
    ///
    /// Fewer than three survivors cannot form a face and are treated as an
    /// empty crop.
    pub fn retain_vertices(&self, keep: impl Fn(usize) -> bool) -> Result<Mesh, MeshError> {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut colors = self.colors.as_ref().map(|_| Vec::new());
        for (i, v) in self.vertices.iter().enumerate() {
            if keep(i) {
                remap[i] = vertices.len();
                vertices.push(*v);
                if let (Some(out), Some(src)) = (&mut colors, &self.colors) {
                    out.push(src[i]);
                }
            }
        }
        if vertices.len() < 3 {
            return Err(MeshError::EmptyCrop {
                survivors: vertices.len(),
            });
        }
        let faces = self
            .faces
            .iter()
            .filter(|f| f.iter().all(|&i| remap[i] != usize::MAX))
            .map(|f| [remap[f[0]], remap[f[1]], remap[f[2]]])
            .collect();
        Mesh::new(vertices, colors, faces)
    }
}

fn bounding_box(points: &[Vertex3]) -> (Vertex3, Vertex3) {
    let mut min = Vertex3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut max = Vertex3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        min.x = min.x.min(p.x);
        min.y = min.y.min(p.y);
        min.z = min.z.min(p.z);
        max.x = max.x.max(p.x);
        max.y = max.y.max(p.y);
        max.z = max.z.max(p.z);
    }
    (min, max)
}

/// Maps positions in an ordered landmark list to semantic groups.
///
/// The index sets are data-driven so any labeled-point convention can be
/// described without code changes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LandmarkSchema {
    pub total_count: usize,
    pub border_indices: Vec<usize>,
    pub eyebrow_indices: Vec<usize>,
    pub nose_tip_index: usize,
}

impl LandmarkSchema {
    pub fn new(
        total_count: usize,
        border_indices: Vec<usize>,
        eyebrow_indices: Vec<usize>,
        nose_tip_index: usize,
    ) -> Result<LandmarkSchema, MeshError> {
        let schema = LandmarkSchema {
            total_count,
            border_indices,
            eyebrow_indices,
            nose_tip_index,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if self.border_indices.is_empty() || self.eyebrow_indices.is_empty() {
            return Err(MeshError::SchemaMismatch(
                "border and eyebrow index sets must be non-empty".into(),
            ));
        }
        let out_of_range = self
            .border_indices
            .iter()
            .chain(self.eyebrow_indices.iter())
            .chain(std::iter::once(&self.nose_tip_index))
            .find(|&&i| i >= self.total_count);
        if let Some(&i) = out_of_range {
            return Err(MeshError::SchemaMismatch(format!(
                "index {} out of range 0..{}",
                i, self.total_count
            )));
        }
        if self.eyebrow_indices.contains(&self.nose_tip_index) {
            return Err(MeshError::SchemaMismatch(
                "nose tip index listed among the eyebrow indices".into(),
            ));
        }
        Ok(())
    }
}

/// An ordered landmark point set; its length must match the schema.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    pub points: Vec<Vertex3>,
}

impl LandmarkSet {
    pub fn new(points: Vec<Vertex3>, schema: &LandmarkSchema) -> Result<LandmarkSet, MeshError> {
        if points.len() != schema.total_count {
            return Err(MeshError::SchemaMismatch(format!(
                "{} landmarks against schema count {}",
                points.len(),
                schema.total_count
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(MeshError::SchemaMismatch("non-finite landmark".into()));
        }
        Ok(LandmarkSet { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One 4D sample: an ordered sequence of (mesh, landmarks) frames together
/// with its subject id and expression label.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshSequence {
    pub subject_id: String,
    pub expression: Expression,
    pub frames: Vec<(Mesh, LandmarkSet)>,
}

impl MeshSequence {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }
}

/// A collection of 4D samples sharing one landmark schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<MeshSequence>,
    pub schema: LandmarkSchema,
}

impl Dataset {
    /// Checks the dataset-level invariants: non-empty, unique
    /// (subject, expression) pairs, per-frame landmark counts matching the
    /// schema and at least one frame per sample.
    pub fn validate(&self) -> Result<(), MeshError> {
        if self.samples.is_empty() {
            return Err(MeshError::InvalidMesh("dataset has no samples".into()));
        }
        self.schema.validate()?;
        let mut seen = std::collections::HashSet::new();
        for sample in &self.samples {
            if !seen.insert((sample.subject_id.clone(), sample.expression)) {
                return Err(MeshError::InvalidMesh(format!(
                    "duplicate sample ({}, {})",
                    sample.subject_id, sample.expression
                )));
            }
            if sample.frames.is_empty() {
                return Err(MeshError::InvalidMesh(format!(
                    "sample ({}, {}) has no frames",
                    sample.subject_id, sample.expression
                )));
            }
            for (i, (_, lm)) in sample.frames.iter().enumerate() {
                if lm.len() != self.schema.total_count {
                    return Err(MeshError::Frame {
                        frame: i,
                        source: Box::new(MeshError::SchemaMismatch(format!(
                            "{} landmarks against schema count {}",
                            lm.len(),
                            self.schema.total_count
                        ))),
                    });
                }
            }
        }
        Ok(())
    }

    /// Subject ids in first-appearance order, deduplicated.
    pub fn subject_ids(&self) -> Vec<String> {
        let mut ids = Vec::new();
        for s in &self.samples {
            if !ids.contains(&s.subject_id) {
                ids.push(s.subject_id.clone());
            }
        }
        ids
    }
}

/// Parameters for [`preprocess_sequence`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    /// Fraction of the eyebrow-to-nose-tip vertical distance kept above the
    /// eyebrow line before the forehead cut.
    pub forehead_fraction: f64,
    /// Hull inflation margin as a fraction of the landmark bounding-box
    /// diagonal. Derived from the landmarks (not the mesh) so that cropping
    /// is idempotent.
    pub margin_fraction: f64,
    /// Neighbor count for statistical outlier removal.
    pub outlier_k: usize,
    /// Standard-deviation multiplier for the outlier threshold.
    pub outlier_stddev_mult: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            forehead_fraction: 0.6,
            margin_fraction: 0.02,
            outlier_k: 8,
            outlier_stddev_mult: 2.0,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), MeshError> {
        if !(self.forehead_fraction > 0.0) || !self.forehead_fraction.is_finite() {
            return Err(MeshError::InvalidMesh(
                "forehead_fraction must be positive".into(),
            ));
        }
        if self.margin_fraction < 0.0 || !self.margin_fraction.is_finite() {
            return Err(MeshError::InvalidMesh(
                "margin_fraction must be non-negative".into(),
            ));
        }
        if self.outlier_k < 1 {
            return Err(MeshError::InvalidMesh("outlier_k must be >= 1".into()));
        }
        if !(self.outlier_stddev_mult > 0.0) {
            return Err(MeshError::InvalidMesh(
                "outlier_stddev_mult must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Convex hull of 2D points (x–y projections), counter-clockwise, via
/// Andrew's monotone chain.
fn convex_hull_xy(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// True when `(x, y)` lies inside the counter-clockwise convex polygon
/// inflated outward by `margin` (every edge half-plane shifted by `margin`).
fn inside_inflated_hull(hull: &[(f64, f64)], x: f64, y: f64, margin: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => {
            let dx = x - hull[0].0;
            let dy = y - hull[0].1;
            dx * dx + dy * dy <= margin * margin
        }
        2 => {
            // Degenerate hull: distance to the segment.
            let (ax, ay) = hull[0];
            let (bx, by) = hull[1];
            let (ex, ey) = (bx - ax, by - ay);
            let len_sq = ex * ex + ey * ey;
            let t = (((x - ax) * ex + (y - ay) * ey) / len_sq).clamp(0.0, 1.0);
            let (px, py) = (ax + t * ex, ay + t * ey);
            let (dx, dy) = (x - px, y - py);
            dx * dx + dy * dy <= margin * margin
        }
        _ => {
            for i in 0..hull.len() {
                let (ax, ay) = hull[i];
                let (bx, by) = hull[(i + 1) % hull.len()];
                let (ex, ey) = (bx - ax, by - ay);
                let len = (ex * ex + ey * ey).sqrt();
                if len == 0.0 {
                    continue;
                }
                // Signed distance of the point to the edge line; positive on
                // the interior side for a CCW polygon.
                let signed = (ex * (y - ay) - ey * (x - ax)) / len;
                if signed < -margin {
                    return false;
                }
            }
            true
        }
    }
}

/// Crops a mesh to the face region described by its landmarks.
///
/// A vertex survives when its x–y projection lies inside the convex hull of
/// the border landmarks (inflated by the margin) and it sits below the
/// forehead plane `y = y_brow + forehead_fraction * (y_brow - y_nose_tip)`,
/// where `y_brow` is the mean eyebrow-landmark height.
pub fn crop_face(
    mesh: &Mesh,
    landmarks: &LandmarkSet,
    schema: &LandmarkSchema,
    forehead_fraction: f64,
    margin_fraction: f64,
) -> Result<Mesh, MeshError> {
    schema.validate()?;
    if landmarks.len() != schema.total_count {
        return Err(MeshError::SchemaMismatch(format!(
            "{} landmarks against schema count {}",
            landmarks.len(),
            schema.total_count
        )));
    }
    if !(forehead_fraction > 0.0) {
        return Err(MeshError::InvalidMesh(
            "forehead_fraction must be positive".into(),
        ));
    }

    let border: Vec<(f64, f64)> = schema
        .border_indices
        .iter()
        .map(|&i| (landmarks.points[i].x, landmarks.points[i].y))
        .collect();
    let hull = convex_hull_xy(&border);

    let y_brow = schema
        .eyebrow_indices
        .iter()
        .map(|&i| landmarks.points[i].y)
        .sum::<f64>()
        / schema.eyebrow_indices.len() as f64;
    let y_nose = landmarks.points[schema.nose_tip_index].y;
    let forehead_y = y_brow + forehead_fraction * (y_brow - y_nose);

    // Margin from the landmark bounding box, not the mesh: the landmarks are
    // crop-invariant, which makes repeated crops agree exactly.
    let (lo, hi) = bounding_box(&landmarks.points);
    let diag = lo.dist(&hi);
    let margin = margin_fraction * diag;

    mesh.retain_vertices(|i| {
        let v = &mesh.vertices[i];
        v.y <= forehead_y && inside_inflated_hull(&hull, v.x, v.y, margin)
    })
    .map_err(|e| match e {
        MeshError::EmptyCrop { survivors } => MeshError::EmptyCrop { survivors },
        other => other,
    })
}

/// Statistical outlier removal: drops vertices whose mean distance to their
/// `k` nearest neighbors exceeds `global mean + stddev_mult * global stddev`.
pub fn remove_outliers(mesh: &Mesh, k: usize, stddev_mult: f64) -> Result<Mesh, MeshError> {
    if k < 1 {
        return Err(MeshError::InvalidMesh("k must be >= 1".into()));
    }
    if !(stddev_mult > 0.0) {
        return Err(MeshError::InvalidMesh(
            "stddev_mult must be positive".into(),
        ));
    }
    let n = mesh.vertices.len();
    let k = k.min(n - 1);
    let mut mean_knn = vec![0.0f64; n];
    let mut dist_sq = vec![0.0f64; n];
    for i in 0..n {
        for (j, d) in dist_sq.iter_mut().enumerate() {
            *d = mesh.vertices[i].dist_sq(&mesh.vertices[j]);
        }
        dist_sq[i] = f64::INFINITY; // exclude self
        let mut dists = dist_sq.clone();
        dists.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
        mean_knn[i] = dists[..k].iter().map(|d| d.sqrt()).sum::<f64>() / k as f64;
    }
    let mean = mean_knn.iter().sum::<f64>() / n as f64;
    let var = mean_knn.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
    let threshold = mean + stddev_mult * var.sqrt();
    mesh.retain_vertices(|i| mean_knn[i] <= threshold)
}

/// Applies [`remove_outliers`] then [`crop_face`] to every frame, attaching
/// the frame index to any per-frame failure. Frame count, subject id and
/// label are preserved.
pub fn preprocess_sequence(
    seq: &MeshSequence,
    schema: &LandmarkSchema,
    cfg: &PreprocessConfig,
) -> Result<MeshSequence, MeshError> {
    cfg.validate()?;
    let mut frames = Vec::with_capacity(seq.frames.len());
    for (idx, (mesh, landmarks)) in seq.frames.iter().enumerate() {
        let frame = || -> Result<Mesh, MeshError> {
            let cleaned = remove_outliers(mesh, cfg.outlier_k, cfg.outlier_stddev_mult)?;
            crop_face(
                &cleaned,
                landmarks,
                schema,
                cfg.forehead_fraction,
                cfg.margin_fraction,
            )
        }()
        .map_err(|e| MeshError::Frame {
            frame: idx,
            source: Box::new(e),
        })?;
        frames.push((frame, landmarks.clone()));
    }
    Ok(MeshSequence {
        subject_id: seq.subject_id.clone(),
        expression: seq.expression,
        frames,
    })
}
