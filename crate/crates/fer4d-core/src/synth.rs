//! Synthetic 4D face data: parametric height-field heads with 83 surface
//! landmarks and six class-specific temporal deformation patterns.
//!
//! Every sequence starts at a neutral frame and ramps its expression
//! deformation linearly to the apex at the last frame, so classes share
//! frame one and diverge over time. Heads vary per subject (global scale
//! and feature amplitudes), per-vertex colors follow a fixed smooth
//! colormap of surface protrusion, and Gaussian jitter plus far-out scan
//! flies are injected per (subject, frame) so preprocessing has real work
//! to do. Everything is deterministic in the seed.

use crate::mesh::{
    Dataset, Expression, LandmarkSchema, LandmarkSet, Mesh, MeshSequence, Vertex3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Parameters of the synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub subjects: usize,
    pub frames: usize,
    /// Standard deviation of vertex jitter, in head units (head height ~ 2.5).
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            subjects: 10,
            frames: 20,
            noise: 0.005,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.subjects == 0 || self.frames == 0 {
            return Err("subjects and frames must be positive".into());
        }
        if self.noise < 0.0 || !self.noise.is_finite() {
            return Err("noise must be non-negative".into());
        }
        Ok(())
    }
}

// Landmark group boundaries; see `synthetic_schema`.
const BORDER: usize = 17;
const BROWS: usize = 10;
const EYES: usize = 16;
const NOSE: usize = 12;
const MOUTH: usize = 28;
const TOTAL: usize = BORDER + BROWS + EYES + NOSE + MOUTH;
const NOSE_TIP: usize = BORDER + BROWS + EYES; // first nose landmark

/// The landmark convention used by the generator: 17 border points along
/// the face outline, 10 eyebrow points, 16 eye-ring points, 12 nose points
/// (tip first) and 28 mouth points, 83 in total.
pub fn synthetic_schema() -> LandmarkSchema {
    LandmarkSchema::new(
        TOTAL,
        (0..BORDER).collect(),
        (BORDER..BORDER + BROWS).collect(),
        NOSE_TIP,
    )
    .expect("generator schema is fixed")
}

/// Per-subject shape variation drawn once from the subject stream.
struct SubjectShape {
    scale_x: f64,
    scale_y: f64,
    depth: f64,
    nose_amp: f64,
    brow_amp: f64,
    lip_amp: f64,
    cheek_amp: f64,
    deform_gain: f64,
}

impl SubjectShape {
    fn draw(seed: u64, subject: usize) -> SubjectShape {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0xA11CE, subject as u64));
        let mut v = |lo: f64, hi: f64| rng.random_range(lo..hi);
        SubjectShape {
            scale_x: v(0.92, 1.08),
            scale_y: v(0.92, 1.08),
            depth: v(0.5, 0.62),
            nose_amp: v(0.24, 0.32),
            brow_amp: v(0.05, 0.09),
            lip_amp: v(0.08, 0.13),
            cheek_amp: v(0.06, 0.10),
            deform_gain: v(0.85, 1.15),
        }
    }
}

fn mix(seed: u64, salt: u64, index: u64) -> u64 {
    // splitmix-style avalanche over (seed, salt, index)
    let mut z = seed
        .wrapping_add(salt.wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add(index.wrapping_mul(0xBF58476D1CE4E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn gauss2(x: f64, y: f64, cx: f64, cy: f64, sx: f64, sy: f64) -> f64 {
    let dx = (x - cx) / sx;
    let dy = (y - cy) / sy;
    (-0.5 * (dx * dx + dy * dy)).exp()
}

/// Neutral surface depth (negative z faces the camera) at (x, y).
fn neutral_depth(shape: &SubjectShape, x: f64, y: f64) -> f64 {
    let rx = 1.15 * shape.scale_x;
    let ry = 1.55 * shape.scale_y;
    let dome = 1.0 - (x / rx).powi(2) - (y / ry).powi(2);
    let mut z = -shape.depth * dome.max(0.0).sqrt();
    // Features protrude toward the camera (more negative z).
    z -= shape.nose_amp * gauss2(x, y, 0.0, -0.05, 0.13, 0.22);
    z -= shape.brow_amp * gauss2(x, y, -0.32, 0.33, 0.18, 0.07);
    z -= shape.brow_amp * gauss2(x, y, 0.32, 0.33, 0.18, 0.07);
    z -= shape.lip_amp * gauss2(x, y, 0.0, -0.52, 0.24, 0.08);
    z -= shape.cheek_amp * gauss2(x, y, -0.45, -0.25, 0.20, 0.18);
    z -= shape.cheek_amp * gauss2(x, y, 0.45, -0.25, 0.20, 0.18);
    z -= 0.06 * gauss2(x, y, 0.0, -0.88, 0.18, 0.12);
    // Eye sockets recede.
    z += 0.05 * gauss2(x, y, -0.30, 0.15, 0.11, 0.06);
    z += 0.05 * gauss2(x, y, 0.30, 0.15, 0.11, 0.06);
    z
}

/// Class-specific displacement of a surface point at ramp strength
/// `s` in [0, 1]. Returns (dx, dy, dz).
fn deformation(expr: Expression, x: f64, y: f64, s: f64) -> (f64, f64, f64) {
    let corner_l = gauss2(x, y, -0.30, -0.50, 0.12, 0.10);
    let corner_r = gauss2(x, y, 0.30, -0.50, 0.12, 0.10);
    let corners = corner_l + corner_r;
    let chin = gauss2(x, y, 0.0, -0.82, 0.28, 0.20);
    let brow_l = gauss2(x, y, -0.30, 0.36, 0.20, 0.10);
    let brow_r = gauss2(x, y, 0.30, 0.36, 0.20, 0.10);
    let brows = brow_l + brow_r;
    let eye_l = gauss2(x, y, -0.30, 0.15, 0.15, 0.10);
    let eye_r = gauss2(x, y, 0.30, 0.15, 0.15, 0.10);
    let nose_bridge = gauss2(x, y, 0.0, 0.10, 0.12, 0.14);
    let upper_lip = gauss2(x, y, 0.0, -0.42, 0.20, 0.07);
    let cheeks = gauss2(x, y, -0.42, -0.22, 0.18, 0.14) + gauss2(x, y, 0.42, -0.22, 0.18, 0.14);

    match expr {
        // Mouth corners up and outward, cheeks push toward the camera.
        Expression::Happiness => (
            s * 0.10 * (corner_r - corner_l),
            s * (0.22 * corners),
            s * (-0.06 * cheeks),
        ),
        // Mouth corners down, inner brows pinch up.
        Expression::Sadness => (
            0.0,
            s * (-0.22 * corners + 0.08 * gauss2(x, y, 0.0, 0.38, 0.12, 0.08)),
            0.0,
        ),
        // Jaw drops, brows rise.
        Expression::Surprise => (
            0.0,
            s * (-0.30 * chin + 0.16 * brows),
            s * (0.05 * chin),
        ),
        // Brows slam down and inward, lips press flat.
        Expression::Anger => (
            s * 0.07 * (brow_l - brow_r),
            s * (-0.18 * brows),
            s * (0.06 * upper_lip + 0.05 * corners),
        ),
        // Eyes widen radially, mouth opens slightly.
        Expression::Fear => {
            let spread_l = eye_l * 0.16;
            let spread_r = eye_r * 0.16;
            (
                s * (-spread_l + spread_r) * 0.8,
                s * ((eye_l + eye_r) * 0.10 - 0.10 * chin),
                s * (-0.04 * (eye_l + eye_r)),
            )
        }
        // Nose scrunch: bridge pulls toward the camera, upper lip rises,
        // brows dip.
        Expression::Disgust => (
            0.0,
            s * (0.14 * upper_lip - 0.07 * brows),
            s * (-0.10 * nose_bridge + 0.04 * chin),
        ),
    }
}

/// Fixed smooth colormap from surface protrusion to skin-like RGB.
fn colormap(protrusion: f64) -> [f64; 3] {
    let q = protrusion.clamp(0.0, 1.0);
    [
        0.45 + 0.45 * q,
        0.32 + 0.38 * (q * 0.9 + 0.05 * (q * 6.28).sin()),
        0.28 + 0.26 * q * q,
    ]
}

/// Landmark positions in the neutral parametric plane.
fn landmark_plane_positions() -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(TOTAL);
    // Border: ellipse arc from above the left temple, under the chin, up to
    // the right temple. Angles run 115..425 degrees so the top endpoints sit
    // above the brow line.
    for i in 0..BORDER {
        let a = (115.0 + 310.0 * i as f64 / (BORDER - 1) as f64).to_radians();
        pts.push((0.88 * a.cos(), -0.02 + 0.98 * a.sin()));
    }
    // Eyebrows: two five-point arcs.
    for side in [-1.0f64, 1.0] {
        for i in 0..BROWS / 2 {
            let t = i as f64 / (BROWS / 2 - 1) as f64;
            let x = side * (0.14 + 0.32 * t);
            let y = 0.38 + 0.06 * (1.0 - (2.0 * t - 1.0).powi(2));
            pts.push((x, y));
        }
    }
    // Eyes: two eight-point rings.
    for side in [-1.0f64, 1.0] {
        for i in 0..EYES / 2 {
            let a = std::f64::consts::TAU * i as f64 / (EYES / 2) as f64;
            pts.push((side * 0.30 + 0.10 * a.cos(), 0.15 + 0.05 * a.sin()));
        }
    }
    // Nose: tip first, then bridge and wings.
    pts.push((0.0, -0.05));
    for i in 0..5 {
        pts.push((0.0, 0.30 - 0.07 * i as f64));
    }
    for side in [-1.0f64, 1.0] {
        for i in 0..3 {
            pts.push((side * (0.05 + 0.03 * i as f64), -0.12 + 0.02 * i as f64));
        }
    }
    // Mouth: outer ring of 16, inner ring of 12.
    for i in 0..16 {
        let a = std::f64::consts::TAU * i as f64 / 16.0;
        pts.push((0.28 * a.cos(), -0.52 + 0.10 * a.sin()));
    }
    for i in 0..12 {
        let a = std::f64::consts::TAU * i as f64 / 12.0;
        pts.push((0.18 * a.cos(), -0.52 + 0.05 * a.sin()));
    }
    assert_eq!(pts.len(), TOTAL);
    pts
}

/// Grid resolution of the head height field.
const GRID_X: usize = 30;
const GRID_Y: usize = 42;

/// True when a parametric point belongs to the head (face plus scalp).
fn in_head(x: f64, y: f64) -> bool {
    (x / 1.02).powi(2) + ((y - 0.1) / 1.45).powi(2) <= 1.0
}

/// Builds one frame's mesh and landmarks.
fn build_frame(
    shape: &SubjectShape,
    expr: Expression,
    ramp: f64,
    noise: f64,
    noise_rng: &mut ChaCha8Rng,
) -> (Mesh, LandmarkSet) {
    let ramp = ramp * shape.deform_gain;
    // Vertex grid over the head outline.
    let mut vertices = Vec::new();
    let mut colors = Vec::new();
    let mut index = vec![usize::MAX; GRID_X * GRID_Y];
    let normal = Normal::new(0.0, 1.0).unwrap();
    for gy in 0..GRID_Y {
        for gx in 0..GRID_X {
            let x = -1.05 + 2.10 * gx as f64 / (GRID_X - 1) as f64;
            let y = -1.30 + 2.90 * gy as f64 / (GRID_Y - 1) as f64;
            if !in_head(x * shape.scale_x.recip(), y * shape.scale_y.recip()) {
                continue;
            }
            let z = neutral_depth(shape, x, y);
            let (dx, dy, dz) = deformation(expr, x, y, ramp);
            let mut v = Vertex3::new(x + dx, y + dy, z + dz);
            if noise > 0.0 {
                v.x += noise * normal.sample(noise_rng);
                v.y += noise * normal.sample(noise_rng);
                v.z += noise * normal.sample(noise_rng);
            }
            index[gy * GRID_X + gx] = vertices.len();
            let protrusion = (-z) / (shape.depth + shape.nose_amp);
            colors.push(colormap(protrusion));
            vertices.push(v);
        }
    }
    // Scan flies: a couple of far-out artifact points per frame whenever the
    // scan is noisy, for the outlier filter to remove.
    if noise > 0.0 {
        for _ in 0..2 {
            let dir = normal.sample(noise_rng).signum();
            vertices.push(Vertex3::new(
                3.0 * dir + 0.2 * normal.sample(noise_rng),
                2.5 + 0.2 * normal.sample(noise_rng),
                -1.5 + 0.2 * normal.sample(noise_rng),
            ));
            colors.push([0.0, 0.0, 0.0]);
        }
    }
    // Quad grid triangulation over surviving cells.
    let mut faces = Vec::new();
    for gy in 0..GRID_Y - 1 {
        for gx in 0..GRID_X - 1 {
            let a = index[gy * GRID_X + gx];
            let b = index[gy * GRID_X + gx + 1];
            let c = index[(gy + 1) * GRID_X + gx];
            let d = index[(gy + 1) * GRID_X + gx + 1];
            if a != usize::MAX && b != usize::MAX && c != usize::MAX {
                faces.push([a, b, c]);
            }
            if b != usize::MAX && d != usize::MAX && c != usize::MAX {
                faces.push([b, d, c]);
            }
        }
    }
    let mesh = Mesh::new(vertices, Some(colors), faces).expect("generator mesh is valid");

    // Landmarks ride the clean surface through the same deformation field.
    let points = landmark_plane_positions()
        .into_iter()
        .map(|(px, py)| {
            let x = px * shape.scale_x;
            let y = py * shape.scale_y;
            let z = neutral_depth(shape, x, y);
            let (dx, dy, dz) = deformation(expr, x, y, ramp);
            Vertex3::new(x + dx, y + dy, z + dz)
        })
        .collect();
    let landmarks = LandmarkSet { points };
    (mesh, landmarks)
}

/// One synthetic sequence for (subject, expression).
pub fn generate_sequence(
    spec: &SyntheticSpec,
    subject: usize,
    expression: Expression,
) -> MeshSequence {
    let shape = SubjectShape::draw(spec.seed, subject);
    let frames = (0..spec.frames)
        .map(|t| {
            // The jitter stream depends on (seed, subject, frame) only, so
            // different expressions of one subject share identical neutral
            // first frames even on noisy scans.
            let mut noise_rng =
                ChaCha8Rng::seed_from_u64(mix(spec.seed, 0xF00D, (subject * 100_000 + t) as u64));
            let ramp = if spec.frames == 1 {
                0.0
            } else {
                t as f64 / (spec.frames - 1) as f64
            };
            build_frame(&shape, expression, ramp, spec.noise, &mut noise_rng)
        })
        .collect();
    MeshSequence {
        subject_id: format!("s{subject:02}"),
        expression,
        frames,
    }
}

/// The full synthetic dataset: every subject performs all six expressions.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset, String> {
    spec.validate()?;
    let mut samples = Vec::with_capacity(spec.subjects * Expression::ALL.len());
    for subject in 0..spec.subjects {
        for expression in Expression::ALL {
            samples.push(generate_sequence(spec, subject, expression));
        }
    }
    let dataset = Dataset {
        samples,
        schema: synthetic_schema(),
    };
    dataset.validate().map_err(|e| e.to_string())?;
    Ok(dataset)
}
