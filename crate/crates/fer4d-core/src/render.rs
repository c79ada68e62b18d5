//! Multi-view orthographic rendering of meshes into depth and texture
//! images.
//!
//! The mesh is rotated by the view yaw about the vertical axis through its
//! centroid and projected orthographically. The image window is the
//! axis-aligned bounding square of the rotated mesh (side = the larger of
//! the x/y extents, centered on the bounding-box center); world x maps to
//! increasing column, world y maps to decreasing row. A pixel is covered
//! iff its center lies inside a triangle under a top-left tie rule, and a
//! z-buffer keeps the camera-nearest (smallest z) surface. Covered depths
//! are affinely normalized so the nearest covered point reads 1 and the
//! farthest reads 0; background pixels carry 0.

use crate::clahe;
use crate::mesh::{Mesh, Vertex3};
use thiserror::Error;

/// Coarse profile label for a view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProfileTag {
    /// Right profile (negative yaw).
    Rp,
    /// Frontal profile (zero yaw).
    Fp,
    /// Left profile (positive yaw).
    Lp,
}

impl ProfileTag {
    pub fn name(self) -> &'static str {
        match self {
            ProfileTag::Rp => "RP",
            ProfileTag::Fp => "FP",
            ProfileTag::Lp => "LP",
        }
    }

    pub fn parse(s: &str) -> Option<ProfileTag> {
        match s {
            "RP" | "rp" => Some(ProfileTag::Rp),
            "FP" | "fp" => Some(ProfileTag::Fp),
            "LP" | "lp" => Some(ProfileTag::Lp),
            _ => None,
        }
    }
}

impl std::fmt::Display for ProfileTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A yaw rotation (degrees, about the vertical axis through the mesh
/// centroid) tagged with its profile. Frontal means exactly zero yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewAngle {
    yaw_degrees: f64,
    profile_tag: ProfileTag,
}

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("invalid view: {0}")]
    InvalidView(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("mesh covers no pixel after projection")]
    DegenerateMesh,
    #[error("texture rendering needs per-vertex colors")]
    MissingColors,
}

impl ViewAngle {
    /// Validates yaw in (-90, 90) and tag/sign consistency: FP iff yaw = 0,
    /// RP for negative yaw, LP for positive.
    pub fn new(yaw_degrees: f64, profile_tag: ProfileTag) -> Result<ViewAngle, RenderError> {
        if !yaw_degrees.is_finite() || yaw_degrees <= -90.0 || yaw_degrees >= 90.0 {
            return Err(RenderError::InvalidView(format!(
                "yaw {yaw_degrees} outside (-90, 90)"
            )));
        }
        let expected = match yaw_degrees {
            y if y == 0.0 => ProfileTag::Fp,
            y if y < 0.0 => ProfileTag::Rp,
            _ => ProfileTag::Lp,
        };
        if expected != profile_tag {
            return Err(RenderError::InvalidView(format!(
                "tag {profile_tag} inconsistent with yaw {yaw_degrees}"
            )));
        }
        Ok(ViewAngle {
            yaw_degrees,
            profile_tag,
        })
    }

    /// Infers the tag from the yaw sign.
    pub fn from_yaw(yaw_degrees: f64) -> Result<ViewAngle, RenderError> {
        let tag = if yaw_degrees == 0.0 {
            ProfileTag::Fp
        } else if yaw_degrees < 0.0 {
            ProfileTag::Rp
        } else {
            ProfileTag::Lp
        };
        ViewAngle::new(yaw_degrees, tag)
    }

    pub fn frontal() -> ViewAngle {
        ViewAngle {
            yaw_degrees: 0.0,
            profile_tag: ProfileTag::Fp,
        }
    }

    pub fn yaw_degrees(&self) -> f64 {
        self.yaw_degrees
    }

    pub fn profile_tag(&self) -> ProfileTag {
        self.profile_tag
    }
}

/// What a geometric image holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageKind {
    Depth,
    EnhancedDepth,
    Texture,
}

/// A K x K raster of a mesh under one view. Depth kinds store one scalar
/// per pixel, texture stores RGB; all values in [0, 1]. `background[i]` is
/// true where no surface was hit, and such pixels carry value 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GeomImage {
    pub kind: ImageKind,
    pub size: usize,
    pub pixels: Vec<f64>,
    pub background: Vec<bool>,
}

impl GeomImage {
    pub fn channels(&self) -> usize {
        match self.kind {
            ImageKind::Texture => 3,
            _ => 1,
        }
    }

    pub fn scalar(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.size + col]
    }

    pub fn rgb(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.size + col) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn is_background(&self, row: usize, col: usize) -> bool {
        self.background[row * self.size + col]
    }

    /// Fraction of covered pixels.
    pub fn coverage(&self) -> f64 {
        let fg = self.background.iter().filter(|&&b| !b).count();
        fg as f64 / self.background.len() as f64
    }
}

/// Rotates a mesh by `yaw_degrees` about the vertical (y) axis through its
/// centroid. A zero yaw returns the mesh unchanged, bit for bit.
pub fn rotate_about_centroid(mesh: &Mesh, yaw_degrees: f64) -> Mesh {
    if yaw_degrees == 0.0 {
        return mesh.clone();
    }
    let c = mesh.centroid();
    let rad = yaw_degrees.to_radians();
    let (sin, cos) = rad.sin_cos();
    let vertices = mesh
        .vertices
        .iter()
        .map(|v| {
            let (dx, dz) = (v.x - c.x, v.z - c.z);
            Vertex3::new(c.x + cos * dx + sin * dz, v.y, c.z - sin * dx + cos * dz)
        })
        .collect();
    Mesh {
        vertices,
        colors: mesh.colors.clone(),
        faces: mesh.faces.clone(),
    }
}

/// World-to-raster mapping for one rotated mesh: raster x = (x - cx) * scale
/// + K/2, raster y = (cy - y) * scale + K/2, with pixel (r, c) centered at
/// (c + 0.5, r + 0.5).
struct RasterMap {
    cx: f64,
    cy: f64,
    scale: f64,
    k: f64,
}

impl RasterMap {
    fn new(mesh: &Mesh, k: usize) -> Result<RasterMap, RenderError> {
        let (lo, hi) = mesh.bounding_box();
        let side = (hi.x - lo.x).max(hi.y - lo.y);
        if !(side > 0.0) {
            return Err(RenderError::DegenerateMesh);
        }
        Ok(RasterMap {
            cx: (lo.x + hi.x) / 2.0,
            cy: (lo.y + hi.y) / 2.0,
            scale: k as f64 / side,
            k: k as f64,
        })
    }

    fn to_raster(&self, v: &Vertex3) -> (f64, f64) {
        (
            (v.x - self.cx) * self.scale + self.k / 2.0,
            (self.cy - v.y) * self.scale + self.k / 2.0,
        )
    }
}

fn orient(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

/// Top-left tie rule for an edge with direction `d` of a triangle oriented
/// to positive area in raster (y-down) coordinates: boundary pixels belong
/// to edges that go up, or horizontal edges that go right.
fn edge_is_top_left(d: (f64, f64)) -> bool {
    d.1 < 0.0 || (d.1 == 0.0 && d.0 > 0.0)
}

/// Z-buffer plus per-pixel barycentric weights of the winning triangle.
struct RasterResult {
    zbuf: Vec<f64>,
    /// Winning face index and barycentric weights per covered pixel.
    hits: Vec<Option<(usize, [f64; 3])>>,
}

fn rasterize(mesh: &Mesh, map: &RasterMap, k: usize) -> RasterResult {
    let mut zbuf = vec![f64::INFINITY; k * k];
    let mut hits: Vec<Option<(usize, [f64; 3])>> = vec![None; k * k];
    for (face_idx, face) in mesh.faces.iter().enumerate() {
        let va = &mesh.vertices[face[0]];
        let vb = &mesh.vertices[face[1]];
        let vc = &mesh.vertices[face[2]];
        let mut p = [map.to_raster(va), map.to_raster(vb), map.to_raster(vc)];
        let mut z = [va.z, vb.z, vc.z];
        let mut order = [0usize, 1, 2];
        let area = orient(p[0], p[1], p[2]);
        if area == 0.0 {
            continue;
        }
        if area < 0.0 {
            p.swap(1, 2);
            z.swap(1, 2);
            order.swap(1, 2);
        }
        let area = orient(p[0], p[1], p[2]);

        let min_x = p[0].0.min(p[1].0).min(p[2].0);
        let max_x = p[0].0.max(p[1].0).max(p[2].0);
        let min_y = p[0].1.min(p[1].1).min(p[2].1);
        let max_y = p[0].1.max(p[1].1).max(p[2].1);
        let c0 = (min_x - 0.5).ceil().max(0.0) as usize;
        let c1 = (max_x - 0.5).floor().min(k as f64 - 1.0);
        let r0 = (min_y - 0.5).ceil().max(0.0) as usize;
        let r1 = (max_y - 0.5).floor().min(k as f64 - 1.0);
        if c1 < 0.0 || r1 < 0.0 {
            continue;
        }
        let (c1, r1) = (c1 as usize, r1 as usize);

        // Edge i runs from p[(i + 1) % 3] to p[(i + 2) % 3] and its weight
        // belongs to vertex i.
        let tie: Vec<bool> = (0..3)
            .map(|i| {
                let (s, e) = (p[(i + 1) % 3], p[(i + 2) % 3]);
                edge_is_top_left((e.0 - s.0, e.1 - s.1))
            })
            .collect();

        for r in r0..=r1 {
            for c in c0..=c1 {
                let pc = (c as f64 + 0.5, r as f64 + 0.5);
                let w = [
                    orient(p[1], p[2], pc),
                    orient(p[2], p[0], pc),
                    orient(p[0], p[1], pc),
                ];
                let inside = (0..3).all(|i| w[i] > 0.0 || (w[i] == 0.0 && tie[i]));
                if !inside {
                    continue;
                }
                let l = [w[0] / area, w[1] / area, w[2] / area];
                let depth = l[0] * z[0] + l[1] * z[1] + l[2] * z[2];
                let idx = r * k + c;
                if depth < zbuf[idx] {
                    zbuf[idx] = depth;
                    // Report weights in the face's original vertex order.
                    let mut bary = [0.0; 3];
                    for i in 0..3 {
                        bary[order[i]] = l[i];
                    }
                    hits[idx] = Some((face_idx, bary));
                }
            }
        }
    }
    RasterResult { zbuf, hits }
}

fn check_k(k: usize) -> Result<(), RenderError> {
    if k < 8 {
        return Err(RenderError::InvalidParams(format!(
            "image size {k} below minimum 8"
        )));
    }
    Ok(())
}

/// Renders the normalized depth image of a mesh under a view.
pub fn render_depth(mesh: &Mesh, view: &ViewAngle, k: usize) -> Result<GeomImage, RenderError> {
    check_k(k)?;
    let rotated = rotate_about_centroid(mesh, view.yaw_degrees);
    let map = RasterMap::new(&rotated, k)?;
    let raster = rasterize(&rotated, &map, k);

    let mut z_min = f64::INFINITY;
    let mut z_max = f64::NEG_INFINITY;
    let mut covered = false;
    for (idx, hit) in raster.hits.iter().enumerate() {
        if hit.is_some() {
            covered = true;
            z_min = z_min.min(raster.zbuf[idx]);
            z_max = z_max.max(raster.zbuf[idx]);
        }
    }
    if !covered {
        return Err(RenderError::DegenerateMesh);
    }

    let mut pixels = vec![0.0; k * k];
    let mut background = vec![true; k * k];
    for idx in 0..k * k {
        if raster.hits[idx].is_some() {
            background[idx] = false;
            pixels[idx] = if z_max > z_min {
                (z_max - raster.zbuf[idx]) / (z_max - z_min)
            } else {
                1.0
            };
        }
    }
    Ok(GeomImage {
        kind: ImageKind::Depth,
        size: k,
        pixels,
        background,
    })
}

/// Renders the texture image: same rasterization and z-buffer as
/// [`render_depth`], pixel color barycentrically interpolated from the
/// winning triangle's vertex colors.
pub fn render_texture(mesh: &Mesh, view: &ViewAngle, k: usize) -> Result<GeomImage, RenderError> {
    check_k(k)?;
    let colors = mesh.colors.as_ref().ok_or(RenderError::MissingColors)?;
    let rotated = rotate_about_centroid(mesh, view.yaw_degrees);
    let map = RasterMap::new(&rotated, k)?;
    let raster = rasterize(&rotated, &map, k);

    let mut pixels = vec![0.0; k * k * 3];
    let mut background = vec![true; k * k];
    let mut covered = false;
    for idx in 0..k * k {
        let Some((face_idx, bary)) = raster.hits[idx] else {
            continue;
        };
        covered = true;
        background[idx] = false;
        let face = &mesh.faces[face_idx];
        for ch in 0..3 {
            let v = bary[0] * colors[face[0]][ch]
                + bary[1] * colors[face[1]][ch]
                + bary[2] * colors[face[2]][ch];
            pixels[idx * 3 + ch] = v.clamp(0.0, 1.0);
        }
    }
    if !covered {
        return Err(RenderError::DegenerateMesh);
    }
    Ok(GeomImage {
        kind: ImageKind::Texture,
        size: k,
        pixels,
        background,
    })
}

/// The depth, enhanced-depth and texture renders of one mesh under one view.
#[derive(Debug, Clone)]
pub struct ViewRender {
    pub view: ViewAngle,
    pub depth: GeomImage,
    pub enhanced: GeomImage,
    pub texture: GeomImage,
}

/// Renders all three geometric images for every view, in view order.
pub fn render_views(
    mesh: &Mesh,
    views: &[ViewAngle],
    k: usize,
    clahe_clip: f64,
    clahe_tiles: usize,
) -> Result<Vec<ViewRender>, RenderError> {
    views
        .iter()
        .map(|view| {
            let depth = render_depth(mesh, view, k)?;
            let enhanced = clahe::enhance_depth(&depth, clahe_clip, clahe_tiles)?;
            let texture = render_texture(mesh, view, k)?;
            Ok(ViewRender {
                view: *view,
                depth,
                enhanced,
                texture,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    /// One triangle spanning most of the window, parallel to the image
    /// plane at constant z.
    fn flat_triangle(z: f64) -> Mesh {
        Mesh::new(
            vec![
                Vertex3::new(0.0, 0.0, z),
                Vertex3::new(4.0, 0.0, z),
                Vertex3::new(0.0, 4.0, z),
            ],
            Some(vec![[1.0, 0.0, 0.0]; 3]),
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    /// Brute-force point-in-triangle oracle on raster coordinates using
    /// sign-consistent barycentrics (strict interior only).
    fn strictly_inside(p: (f64, f64), a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> bool {
        let s0 = orient(a, b, p);
        let s1 = orient(b, c, p);
        let s2 = orient(c, a, p);
        (s0 > 0.0 && s1 > 0.0 && s2 > 0.0) || (s0 < 0.0 && s1 < 0.0 && s2 < 0.0)
    }

    #[test]
    fn flat_triangle_coverage_matches_analytic_oracle() {
        let k = 32;
        let mesh = flat_triangle(1.0);
        let img = render_depth(&mesh, &ViewAngle::frontal(), k).unwrap();

        // Re-derive the documented mapping: 4x4 window centered at (2, 2).
        let to_raster = |x: f64, y: f64| {
            (
                (x - 2.0) * (k as f64 / 4.0) + k as f64 / 2.0,
                (2.0 - y) * (k as f64 / 4.0) + k as f64 / 2.0,
            )
        };
        let a = to_raster(0.0, 0.0);
        let b = to_raster(4.0, 0.0);
        let c = to_raster(0.0, 4.0);
        let mut strict_mismatches = 0;
        for r in 0..k {
            for col in 0..k {
                let pc = (col as f64 + 0.5, r as f64 + 0.5);
                if strictly_inside(pc, a, b, c) {
                    assert!(!img.is_background(r, col), "pixel ({r},{col}) should be covered");
                } else if !img.is_background(r, col) {
                    strict_mismatches += 1;
                }
            }
        }
        // Only exact-boundary pixels may differ from the strict-interior
        // oracle; this scene has pixel centers on the diagonal edge line.
        assert!(strict_mismatches <= k, "{strict_mismatches} non-boundary extras");
        // Constant-z surface: all covered depths equal after normalization.
        for r in 0..k {
            for col in 0..k {
                if !img.is_background(r, col) {
                    assert_eq!(img.scalar(r, col), 1.0);
                }
            }
        }
    }

    #[test]
    fn mirror_symmetric_mesh_renders_mirror_symmetric_depth() {
        // Two triangles symmetric about x = 0, tilted in z.
        let mesh = Mesh::new(
            vec![
                Vertex3::new(-2.0, -1.0, 0.5),
                Vertex3::new(0.0, -1.0, 0.0),
                Vertex3::new(0.0, 1.0, 0.0),
                Vertex3::new(-2.0, 1.0, 0.5),
                Vertex3::new(2.0, -1.0, 0.5),
                Vertex3::new(2.0, 1.0, 0.5),
            ],
            None,
            vec![[0, 1, 2], [0, 2, 3], [4, 1, 2], [4, 2, 5]],
        )
        .unwrap();
        let k = 32;
        let img = render_depth(&mesh, &ViewAngle::frontal(), k).unwrap();
        let mut worst = 0.0f64;
        for r in 0..k {
            for c in 0..k {
                let m = k - 1 - c;
                if img.is_background(r, c) != img.is_background(r, m) {
                    continue; // 1-pixel quantization at edges
                }
                worst = worst.max((img.scalar(r, c) - img.scalar(r, m)).abs());
            }
        }
        assert!(worst < 1e-9, "asymmetry {worst}");
    }

    #[test]
    fn zbuffer_keeps_near_triangle() {
        // Far triangle at z = 2 underneath, near triangle at z = 1 on top.
        let mesh = Mesh::new(
            vec![
                Vertex3::new(0.0, 0.0, 2.0),
                Vertex3::new(4.0, 0.0, 2.0),
                Vertex3::new(0.0, 4.0, 2.0),
                Vertex3::new(0.5, 0.5, 1.0),
                Vertex3::new(2.5, 0.5, 1.0),
                Vertex3::new(0.5, 2.5, 1.0),
            ],
            Some(vec![
                [0.0, 0.0, 1.0],
                [0.0, 0.0, 1.0],
                [0.0, 0.0, 1.0],
                [1.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
            ]),
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();

        let k = 32;
        let depth = render_depth(&mesh, &ViewAngle::frontal(), k).unwrap();
        let tex = render_texture(&mesh, &ViewAngle::frontal(), k).unwrap();
        // Center of the near triangle.
        let map = RasterMap::new(&mesh, k).unwrap();
        let (px, py) = map.to_raster(&Vertex3::new(1.0, 1.0, 0.0));
        let (r, c) = (py as usize, px as usize);
        assert!(!depth.is_background(r, c));
        // Near surface (z = 1) normalizes to 1, far (z = 2) to 0.
        assert_eq!(depth.scalar(r, c), 1.0);
        assert_eq!(tex.rgb(r, c), [1.0, 0.0, 0.0]);
        // A point only the far triangle covers.
        let (px, py) = map.to_raster(&Vertex3::new(0.2, 3.0, 0.0));
        let (r, c) = (py as usize, px as usize);
        assert!(!depth.is_background(r, c));
        assert_eq!(depth.scalar(r, c), 0.0);
        assert_eq!(tex.rgb(r, c), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_color_triangle_renders_constant_color() {
        let mesh = flat_triangle(1.0);
        let img = render_texture(&mesh, &ViewAngle::frontal(), 32).unwrap();
        for r in 0..32 {
            for c in 0..32 {
                if !img.is_background(r, c) {
                    assert_eq!(img.rgb(r, c), [1.0, 0.0, 0.0]);
                }
            }
        }
    }

    #[test]
    fn barycenter_pixel_interpolates_vertex_colors() {
        // K = 32; place the triangle so its barycenter lands exactly on the
        // center of pixel (16, 16) = raster (16.5, 16.5).
        let k = 32usize;
        // Window: x in [0, 4], y in [0, 4]; raster (16.5, 16.5) is world
        // (2.0625, 1.9375). Build a triangle with that barycenter.
        let bx = 2.0625;
        let by = 1.9375;
        let verts = [
            (bx - 1.0, by - 1.0),
            (bx + 1.0, by - 1.0),
            (bx, by + 2.0),
        ];
        // Anchor vertices forcing the bounding square to [0,4]x[0,4].
        let mesh = Mesh::new(
            vec![
                Vertex3::new(verts[0].0, verts[0].1, 1.0),
                Vertex3::new(verts[1].0, verts[1].1, 1.0),
                Vertex3::new(verts[2].0, verts[2].1, 1.0),
                Vertex3::new(0.0, 0.0, 1.0),
                Vertex3::new(4.0, 4.0, 1.0),
            ],
            Some(vec![
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
                [0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0],
            ]),
            vec![[0, 1, 2]],
        )
        .unwrap();
        let img = render_texture(&mesh, &ViewAngle::frontal(), k).unwrap();
        let got = img.rgb(16, 16);
        for ch in got {
            assert!((ch - 1.0 / 3.0).abs() < 1e-6, "channel {ch}");
        }
    }

    #[test]
    fn yaw_on_mesh_equals_prerotated_frontal_render() {
        let mesh = Mesh::new(
            vec![
                Vertex3::new(0.0, 0.0, 0.0),
                Vertex3::new(3.0, 0.3, 1.0),
                Vertex3::new(0.5, 3.0, -1.0),
                Vertex3::new(-1.0, 1.0, 2.0),
            ],
            None,
            vec![[0, 1, 2], [1, 2, 3]],
        )
        .unwrap();
        let view = ViewAngle::from_yaw(25.0).unwrap();
        let direct = render_depth(&mesh, &view, 32).unwrap();
        let pre = rotate_about_centroid(&mesh, 25.0);
        let frontal = render_depth(&pre, &ViewAngle::frontal(), 32).unwrap();
        assert_eq!(direct, frontal);
    }

    #[test]
    fn adjacent_triangles_cover_shared_edges_exactly_once() {
        // A square split along the diagonal; count per-pixel wins when both
        // triangles are at the same depth: the tie rule must assign each
        // boundary pixel center to exactly one triangle.
        let k = 32;
        let quad = Mesh::new(
            vec![
                Vertex3::new(0.0, 0.0, 1.0),
                Vertex3::new(4.0, 0.0, 1.0),
                Vertex3::new(4.0, 4.0, 1.0),
                Vertex3::new(0.0, 4.0, 1.0),
            ],
            None,
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let map = RasterMap::new(&quad, k).unwrap();
        let raster = rasterize(&quad, &map, k);
        // Every pixel center inside the square must be covered (by exactly
        // one triangle; double coverage would be invisible here, but any gap
        // along the diagonal shows up as a hole).
        for r in 0..k {
            for c in 0..k {
                assert!(raster.hits[r * k + c].is_some(), "hole at ({r},{c})");
            }
        }
    }

    #[test]
    fn depth_normalization_spans_unit_interval() {
        let mesh = Mesh::new(
            vec![
                Vertex3::new(0.0, 0.0, 0.0),
                Vertex3::new(4.0, 0.0, 3.0),
                Vertex3::new(0.0, 4.0, 1.5),
            ],
            None,
            vec![[0, 1, 2]],
        )
        .unwrap();
        let img = render_depth(&mesh, &ViewAngle::frontal(), 32).unwrap();
        let fg: Vec<f64> = (0..32 * 32)
            .filter(|&i| !img.background[i])
            .map(|i| img.pixels[i])
            .collect();
        let lo = fg.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = fg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(lo, 0.0);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn texture_without_colors_errors() {
        let mesh = Mesh::new(
            vec![
                Vertex3::new(0.0, 0.0, 0.0),
                Vertex3::new(1.0, 0.0, 0.0),
                Vertex3::new(0.0, 1.0, 0.0),
            ],
            None,
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(
            render_texture(&mesh, &ViewAngle::frontal(), 32).unwrap_err(),
            RenderError::MissingColors
        );
    }

    #[test]
    fn coverage_mask_identical_between_depth_and_texture() {
        let mesh = flat_triangle(2.0);
        let d = render_depth(&mesh, &ViewAngle::frontal(), 32).unwrap();
        let t = render_texture(&mesh, &ViewAngle::frontal(), 32).unwrap();
        assert_eq!(d.background, t.background);
    }

    #[test]
    fn view_angle_validation() {
        assert!(ViewAngle::new(0.0, ProfileTag::Fp).is_ok());
        assert!(ViewAngle::new(0.0, ProfileTag::Lp).is_err());
        assert!(ViewAngle::new(-30.0, ProfileTag::Rp).is_ok());
        assert!(ViewAngle::new(-30.0, ProfileTag::Lp).is_err());
        assert!(ViewAngle::new(95.0, ProfileTag::Lp).is_err());
        assert!(ViewAngle::new(f64::NAN, ProfileTag::Fp).is_err());
    }
}
