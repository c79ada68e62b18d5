//! Contrast-limited adaptive histogram equalization for depth images.
//!
//! Each tile builds a 256-bin histogram over its foreground pixels, clips
//! every bin at `clip_limit * foreground count` and spreads the excess
//! uniformly over all bins. A pixel is remapped through the CDFs of the (up
//! to) four surrounding tiles, blended bilinearly by its position between
//! the tile centers. Background pixels keep value 0 and their mask.

use crate::render::{GeomImage, ImageKind, RenderError};

const BINS: usize = 256;

/// Per-tile intensity mapping. Tiles without foreground pixels pass values
/// through unchanged.
#[derive(Clone)]
enum TileLut {
    Cdf(Box<[f64; BINS]>),
    Identity,
}

impl TileLut {
    fn apply(&self, value: f64) -> f64 {
        match self {
            TileLut::Cdf(cdf) => cdf[bin_of(value)],
            TileLut::Identity => value,
        }
    }
}

fn bin_of(value: f64) -> usize {
    ((value * BINS as f64) as usize).min(BINS - 1)
}

fn tile_lut(values: &[f64], clip_limit: f64) -> TileLut {
    if values.is_empty() {
        return TileLut::Identity;
    }
    let total = values.len() as f64;
    let mut hist = [0.0f64; BINS];
    for &v in values {
        hist[bin_of(v)] += 1.0;
    }
    // Clip and redistribute the excess uniformly.
    let cap = clip_limit * total;
    let mut excess = 0.0;
    for h in hist.iter_mut() {
        if *h > cap {
            excess += *h - cap;
            *h = cap;
        }
    }
    let share = excess / BINS as f64;
    let mut cdf = Box::new([0.0f64; BINS]);
    let mut acc = 0.0;
    for (i, h) in hist.iter().enumerate() {
        acc += h + share;
        cdf[i] = acc / total;
    }
    TileLut::Cdf(cdf)
}

/// Applies CLAHE to a depth image, yielding an enhanced-depth image.
pub fn enhance_depth(
    img: &GeomImage,
    clip_limit: f64,
    tiles: usize,
) -> Result<GeomImage, RenderError> {
    if img.kind != ImageKind::Depth {
        return Err(RenderError::InvalidParams(
            "enhancement expects a depth image".into(),
        ));
    }
    if tiles < 1 {
        return Err(RenderError::InvalidParams("tiles must be >= 1".into()));
    }
    if !(clip_limit > 0.0 && clip_limit <= 1.0) {
        return Err(RenderError::InvalidParams(format!(
            "clip limit {clip_limit} outside (0, 1]"
        )));
    }
    let k = img.size;
    let tiles = tiles.min(k);
    let tile_size = k as f64 / tiles as f64;
    let tile_of = |i: usize| ((i as f64 / tile_size) as usize).min(tiles - 1);

    // Gather foreground values per tile.
    let mut tile_values: Vec<Vec<f64>> = vec![Vec::new(); tiles * tiles];
    for r in 0..k {
        for c in 0..k {
            if !img.is_background(r, c) {
                tile_values[tile_of(r) * tiles + tile_of(c)].push(img.scalar(r, c));
            }
        }
    }
    let luts: Vec<TileLut> = tile_values
        .iter()
        .map(|v| tile_lut(v, clip_limit))
        .collect();

    let mut pixels = vec![0.0; k * k];
    for r in 0..k {
        // Position between tile centers along rows.
        let ty = (r as f64 + 0.5) / tile_size - 0.5;
        let ty0 = ty.floor().max(0.0) as usize;
        let ty1 = (ty0 + 1).min(tiles - 1);
        let fy = (ty - ty.floor()).clamp(0.0, 1.0);
        let fy = if ty < 0.0 { 0.0 } else { fy };
        for c in 0..k {
            if img.is_background(r, c) {
                continue;
            }
            let v = img.scalar(r, c);
            let tx = (c as f64 + 0.5) / tile_size - 0.5;
            let tx0 = tx.floor().max(0.0) as usize;
            let tx1 = (tx0 + 1).min(tiles - 1);
            let fx = (tx - tx.floor()).clamp(0.0, 1.0);
            let fx = if tx < 0.0 { 0.0 } else { fx };

            let top = (1.0 - fx) * luts[ty0 * tiles + tx0].apply(v)
                + fx * luts[ty0 * tiles + tx1].apply(v);
            let bottom = (1.0 - fx) * luts[ty1 * tiles + tx0].apply(v)
                + fx * luts[ty1 * tiles + tx1].apply(v);
            pixels[r * k + c] = ((1.0 - fy) * top + fy * bottom).clamp(0.0, 1.0);
        }
    }
    Ok(GeomImage {
        kind: ImageKind::EnhancedDepth,
        size: k,
        pixels,
        background: img.background.clone(),
    })
}
