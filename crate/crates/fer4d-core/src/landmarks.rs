//! Landmark projection into binary images and per-frame descriptors for the
//! temporal classifier.
//!
//! Landmark sets are rotated by the view yaw, orthographically projected to
//! the x-y plane and stamped into a BxB grid as filled disks. The grid
//! mapping comes from a bounding box shared across all frames of one
//! sequence, so frame-to-frame motion survives the normalization.

use crate::mesh::{LandmarkSet, MeshSequence, Vertex3};
use crate::render::ViewAngle;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LandmarkError {
    #[error("projected bounding box has zero extent")]
    DegenerateBounds,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

/// Axis-aligned bounds in the projected plane, shared by every frame of a
/// sequence under one view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneBounds {
    pub min_x: f64,
    pub max_x: f64,
    pub min_y: f64,
    pub max_y: f64,
}

impl PlaneBounds {
    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

/// A binary landmark raster for one frame under one view.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkImage {
    pub size: usize,
    pub bits: Vec<bool>,
    pub view: ViewAngle,
}

impl LandmarkImage {
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.size + col]
    }

    pub fn set_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Per-frame descriptor rows of one sequence under one view.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub rows: Vec<Vec<f64>>,
    pub view: ViewAngle,
}

impl FeatureSequence {
    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

/// Rotates a landmark point by the view yaw about a pivot (the sequence
/// centroid) and drops z.
fn project(p: &Vertex3, pivot: &Vertex3, yaw_degrees: f64) -> (f64, f64) {
    if yaw_degrees == 0.0 {
        return (p.x, p.y);
    }
    let (sin, cos) = yaw_degrees.to_radians().sin_cos();
    let dx = p.x - pivot.x;
    let dz = p.z - pivot.z;
    (pivot.x + cos * dx + sin * dz, p.y)
}

fn landmark_centroid(seq: &MeshSequence) -> Vertex3 {
    let mut c = Vertex3::new(0.0, 0.0, 0.0);
    let mut n = 0usize;
    for (_, lm) in &seq.frames {
        for p in &lm.points {
            c.x += p.x;
            c.y += p.y;
            c.z += p.z;
            n += 1;
        }
    }
    Vertex3::new(c.x / n as f64, c.y / n as f64, c.z / n as f64)
}

/// Projected bounds over every frame of the sequence under one view.
pub fn sequence_bounds(seq: &MeshSequence, view: &ViewAngle) -> Result<PlaneBounds, LandmarkError> {
    let pivot = landmark_centroid(seq);
    let mut b = PlaneBounds {
        min_x: f64::INFINITY,
        max_x: f64::NEG_INFINITY,
        min_y: f64::INFINITY,
        max_y: f64::NEG_INFINITY,
    };
    for (_, lm) in &seq.frames {
        for p in &lm.points {
            let (x, y) = project(p, &pivot, view.yaw_degrees());
            b.min_x = b.min_x.min(x);
            b.max_x = b.max_x.max(x);
            b.min_y = b.min_y.min(y);
            b.max_y = b.max_y.max(y);
        }
    }
    if !(b.width() > 0.0) || !(b.height() > 0.0) {
        return Err(LandmarkError::DegenerateBounds);
    }
    Ok(b)
}

/// Stamps the projected landmarks into a BxB binary grid, each landmark as a
/// filled disk of the given pixel radius. `pivot` must be the same rotation
/// pivot used to compute `bounds` (the sequence landmark centroid).
pub fn rasterize_landmarks(
    landmarks: &LandmarkSet,
    view: &ViewAngle,
    pivot: &Vertex3,
    bounds: &PlaneBounds,
    grid_size: usize,
    radius: usize,
) -> Result<LandmarkImage, LandmarkError> {
    if grid_size < 8 {
        return Err(LandmarkError::InvalidParams(format!(
            "grid size {grid_size} below minimum 8"
        )));
    }
    if !(bounds.width() > 0.0) || !(bounds.height() > 0.0) {
        return Err(LandmarkError::DegenerateBounds);
    }
    let b = grid_size;
    let mut bits = vec![false; b * b];
    let r2 = (radius * radius) as i64;
    for p in &landmarks.points {
        let (x, y) = project(p, pivot, view.yaw_degrees());
        // Flip y so larger world y maps to smaller row index.
        let col = (((x - bounds.min_x) / bounds.width()) * b as f64) as i64;
        let row = (((bounds.max_y - y) / bounds.height()) * b as f64) as i64;
        let col = col.clamp(0, b as i64 - 1);
        let row = row.clamp(0, b as i64 - 1);
        let rad = radius as i64;
        for dr in -rad..=rad {
            for dc in -rad..=rad {
                if dr * dr + dc * dc > r2 {
                    continue;
                }
                let (rr, cc) = (row + dr, col + dc);
                if rr >= 0 && rr < b as i64 && cc >= 0 && cc < b as i64 {
                    bits[rr as usize * b + cc as usize] = true;
                }
            }
        }
    }
    Ok(LandmarkImage {
        size: b,
        bits,
        view: *view,
    })
}

/// Descriptor of one landmark image: per-cell set-pixel fractions on a
/// `grid x grid` partition, then the set-pixel centroid (2 values) and the
/// set-pixel coordinate standard deviation (2 values), all normalized by the
/// image size. An empty image maps to the zero vector.
pub fn describe_frame(img: &LandmarkImage, grid: usize) -> Result<Vec<f64>, LandmarkError> {
    if grid == 0 || img.size % grid != 0 {
        return Err(LandmarkError::InvalidParams(format!(
            "grid {grid} must divide image size {}",
            img.size
        )));
    }
    let cell = img.size / grid;
    let mut out = vec![0.0f64; grid * grid + 4];
    let mut count = 0usize;
    let (mut sum_x, mut sum_y) = (0.0f64, 0.0f64);
    let (mut sum_x2, mut sum_y2) = (0.0f64, 0.0f64);
    for r in 0..img.size {
        for c in 0..img.size {
            if !img.get(r, c) {
                continue;
            }
            out[(r / cell) * grid + (c / cell)] += 1.0;
            let x = (c as f64 + 0.5) / img.size as f64;
            let y = (r as f64 + 0.5) / img.size as f64;
            sum_x += x;
            sum_y += y;
            sum_x2 += x * x;
            sum_y2 += y * y;
            count += 1;
        }
    }
    let cell_area = (cell * cell) as f64;
    for v in out.iter_mut().take(grid * grid) {
        *v /= cell_area;
    }
    if count > 0 {
        let n = count as f64;
        let mean_x = sum_x / n;
        let mean_y = sum_y / n;
        out[grid * grid] = mean_x;
        out[grid * grid + 1] = mean_y;
        out[grid * grid + 2] = (sum_x2 / n - mean_x * mean_x).max(0.0).sqrt();
        out[grid * grid + 3] = (sum_y2 / n - mean_y * mean_y).max(0.0).sqrt();
    }
    Ok(out)
}

/// One descriptor row per frame, in frame order, all sharing the
/// sequence-global bounds.
pub fn sequence_features(
    seq: &MeshSequence,
    view: &ViewAngle,
    image_size: usize,
    radius: usize,
    grid: usize,
) -> Result<FeatureSequence, LandmarkError> {
    let pivot = landmark_centroid(seq);
    let bounds = sequence_bounds(seq, view)?;
    let rows = seq
        .frames
        .iter()
        .map(|(_, lm)| {
            let img = rasterize_landmarks(lm, view, &pivot, &bounds, image_size, radius)?;
            describe_frame(&img, grid)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FeatureSequence { rows, view: *view })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Expression, LandmarkSchema, LandmarkSet, Mesh, MeshSequence};

    fn dummy_mesh() -> Mesh {
        Mesh::new(
            vec![
                Vertex3::new(0.0, 0.0, 0.0),
                Vertex3::new(1.0, 0.0, 0.0),
                Vertex3::new(0.0, 1.0, 0.0),
            ],
            None,
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    fn unit_bounds() -> PlaneBounds {
        PlaneBounds {
            min_x: 0.0,
            max_x: 1.0,
            min_y: 0.0,
            max_y: 1.0,
        }
    }

    fn landmark(x: f64, y: f64) -> LandmarkSet {
        LandmarkSet {
            points: vec![Vertex3::new(x, y, 0.0)],
        }
    }

    #[test]
    fn centered_landmark_hits_center_pixel() {
        let img = rasterize_landmarks(
            &landmark(0.5, 0.5),
            &ViewAngle::frontal(),
            &Vertex3::new(0.5, 0.5, 0.0),
            &unit_bounds(),
            9,
            0,
        )
        .unwrap();
        assert_eq!(img.set_count(), 1);
        assert!(img.get(4, 4));
    }

    #[test]
    fn mirror_symmetric_set_rasterizes_symmetrically() {
        // Odd grid so the axis point is self-mirroring; coordinates stay off
        // exact bin boundaries since the floor-based mapping only mirrors
        // exactly for interior points.
        let points = vec![
            Vertex3::new(0.23, 0.31, 0.0),
            Vertex3::new(0.77, 0.31, 0.0),
            Vertex3::new(0.23, 0.69, 0.0),
            Vertex3::new(0.77, 0.69, 0.0),
            Vertex3::new(0.5, 0.52, 0.0),
        ];
        let set = LandmarkSet { points };
        let img = rasterize_landmarks(
            &set,
            &ViewAngle::frontal(),
            &Vertex3::new(0.5, 0.5, 0.0),
            &unit_bounds(),
            9,
            0,
        )
        .unwrap();
        for r in 0..9 {
            for c in 0..9 {
                assert_eq!(img.get(r, c), img.get(r, 8 - c), "({r},{c})");
            }
        }
    }

    #[test]
    fn radius_one_stamps_von_neumann_disk() {
        let img = rasterize_landmarks(
            &landmark(0.5, 0.5),
            &ViewAngle::frontal(),
            &Vertex3::new(0.5, 0.5, 0.0),
            &unit_bounds(),
            9,
            1,
        )
        .unwrap();
        // Oracle: pixels within squared distance 1 of (4, 4).
        let mut expected = 0;
        for r in 0..9i64 {
            for c in 0..9i64 {
                if (r - 4) * (r - 4) + (c - 4) * (c - 4) <= 1 {
                    expected += 1;
                    assert!(img.get(r as usize, c as usize));
                }
            }
        }
        assert_eq!(expected, 5);
        assert_eq!(img.set_count(), 5);
    }

    #[test]
    fn degenerate_bounds_rejected() {
        let b = PlaneBounds {
            min_x: 0.0,
            max_x: 0.0,
            min_y: 0.0,
            max_y: 1.0,
        };
        let err = rasterize_landmarks(
            &landmark(0.0, 0.5),
            &ViewAngle::frontal(),
            &Vertex3::new(0.0, 0.5, 0.0),
            &b,
            9,
            0,
        )
        .unwrap_err();
        assert_eq!(err, LandmarkError::DegenerateBounds);
    }

    #[test]
    fn empty_image_describes_to_zero() {
        let img = LandmarkImage {
            size: 8,
            bits: vec![false; 64],
            view: ViewAngle::frontal(),
        };
        let d = describe_frame(&img, 4).unwrap();
        assert_eq!(d.len(), 20);
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_image_has_unit_cells_and_centered_centroid() {
        let img = LandmarkImage {
            size: 8,
            bits: vec![true; 64],
            view: ViewAngle::frontal(),
        };
        let d = describe_frame(&img, 4).unwrap();
        for v in &d[..16] {
            assert_eq!(*v, 1.0);
        }
        assert!((d[16] - 0.5).abs() < 1e-12);
        assert!((d[17] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_pixel_descriptor_counts_once() {
        let mut bits = vec![false; 64];
        bits[2 * 8 + 5] = true; // row 2, col 5 -> cell (1, 2) on a 4x4 grid
        let img = LandmarkImage {
            size: 8,
            bits,
            view: ViewAngle::frontal(),
        };
        let d = describe_frame(&img, 4).unwrap();
        for (i, v) in d[..16].iter().enumerate() {
            let expect = if i == 1 * 4 + 2 { 1.0 / 4.0 } else { 0.0 };
            assert_eq!(*v, expect, "cell {i}");
        }
        assert!((d[16] - 5.5 / 8.0).abs() < 1e-12);
        assert!((d[17] - 2.5 / 8.0).abs() < 1e-12);
        assert_eq!(d[18], 0.0);
        assert_eq!(d[19], 0.0);
    }

    fn sequence_of(landmark_frames: Vec<Vec<Vertex3>>) -> MeshSequence {
        MeshSequence {
            subject_id: "s".into(),
            expression: Expression::Anger,
            frames: landmark_frames
                .into_iter()
                .map(|pts| (dummy_mesh(), LandmarkSet { points: pts }))
                .collect(),
        }
    }

    #[test]
    fn static_landmarks_give_identical_rows() {
        let pts = vec![
            Vertex3::new(0.1, 0.2, 0.0),
            Vertex3::new(0.9, 0.8, 0.0),
            Vertex3::new(0.4, 0.6, 0.3),
        ];
        let seq = sequence_of(vec![pts.clone(), pts.clone(), pts]);
        let fs = sequence_features(&seq, &ViewAngle::frontal(), 16, 1, 4).unwrap();
        assert_eq!(fs.rows.len(), 3);
        assert_eq!(fs.rows[0], fs.rows[1]);
        assert_eq!(fs.rows[1], fs.rows[2]);
        assert_eq!(fs.dim(), 20);
    }

    #[test]
    fn rightward_translation_increases_centroid_x() {
        // Two anchor landmarks pin the shared bounds; one landmark walks
        // right over the frames.
        let frames: Vec<Vec<Vertex3>> = (0..5)
            .map(|t| {
                vec![
                    Vertex3::new(0.0, 0.0, 0.0),
                    Vertex3::new(1.0, 1.0, 0.0),
                    Vertex3::new(0.1 + 0.18 * t as f64, 0.5, 0.0),
                ]
            })
            .collect();
        let seq = sequence_of(frames);
        let fs = sequence_features(&seq, &ViewAngle::frontal(), 32, 0, 4).unwrap();
        let centroid_x: Vec<f64> = fs.rows.iter().map(|r| r[16]).collect();
        for w in centroid_x.windows(2) {
            assert!(w[1] > w[0], "{centroid_x:?}");
        }
    }

    #[test]
    fn single_frame_sequence_yields_single_row() {
        let seq = sequence_of(vec![vec![
            Vertex3::new(0.0, 0.0, 0.0),
            Vertex3::new(1.0, 1.0, 0.0),
        ]]);
        let fs = sequence_features(&seq, &ViewAngle::frontal(), 16, 1, 4).unwrap();
        assert_eq!(fs.rows.len(), 1);
    }

    #[test]
    fn translation_by_one_cell_shifts_cell_mass() {
        // A landmark in cell (1, 1) moved exactly one cell right lands in
        // cell (1, 2) with the same fraction.
        let b = 16usize;
        let grid = 4usize;
        let bounds = unit_bounds();
        let pivot = Vertex3::new(0.5, 0.5, 0.0);
        let cell_w = 1.0 / grid as f64;
        let p0 = landmark(0.375, 0.625); // pixel (6, 6) -> cell (1, 1)
        let p1 = landmark(0.375 + cell_w, 0.625); // pixel (6, 10) -> cell (1, 2)
        let d0 = describe_frame(
            &rasterize_landmarks(&p0, &ViewAngle::frontal(), &pivot, &bounds, b, 1).unwrap(),
            grid,
        )
        .unwrap();
        let d1 = describe_frame(
            &rasterize_landmarks(&p1, &ViewAngle::frontal(), &pivot, &bounds, b, 1).unwrap(),
            grid,
        )
        .unwrap();
        assert!(d0[grid + 1] > 0.0);
        assert_eq!(d0[grid + 1], d1[grid + 2]);
        assert_eq!(d1[grid + 1], 0.0);
    }

    #[test]
    fn schema_roundtrip_unused_but_bounds_from_sequence() {
        // sequence_bounds must cover every frame so motion is preserved.
        let frames: Vec<Vec<Vertex3>> = (0..3)
            .map(|t| vec![Vertex3::new(t as f64, 0.0, 0.0), Vertex3::new(0.0, 1.0, 0.0)])
            .collect();
        let seq = sequence_of(frames);
        let b = sequence_bounds(&seq, &ViewAngle::frontal()).unwrap();
        assert_eq!(b.min_x, 0.0);
        assert_eq!(b.max_x, 2.0);
        let _ = LandmarkSchema::new(83, vec![0], vec![1], 2).unwrap();
    }
}
