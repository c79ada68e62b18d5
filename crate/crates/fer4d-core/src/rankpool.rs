//! Rank pooling: collapse an ordered frame sequence into a single vector
//! whose direction encodes the temporal evolution of the video.
//!
//! Two closed-form approximations are provided along with the exact pairwise
//! ranking objective solved by subgradient descent. The closed forms weight
//! frames by coefficients that always sum to zero, so constant videos pool
//! to the zero vector.

use thiserror::Error;

/// Which pooling rule to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolingVariant {
    /// Coefficients `2t - T - 1` applied to raw frames.
    LinearArp,
    /// Harmonic-number coefficients applied to running means.
    HarmonicArp,
    /// Pairwise hinge ranking objective on running means, solved exactly.
    ExactRankSvm,
}

impl PoolingVariant {
    pub fn name(self) -> &'static str {
        match self {
            PoolingVariant::LinearArp => "linear_arp",
            PoolingVariant::HarmonicArp => "harmonic_arp",
            PoolingVariant::ExactRankSvm => "exact_ranksvm",
        }
    }

    pub fn parse(s: &str) -> Option<PoolingVariant> {
        match s {
            "linear_arp" => Some(PoolingVariant::LinearArp),
            "harmonic_arp" => Some(PoolingVariant::HarmonicArp),
            "exact_ranksvm" => Some(PoolingVariant::ExactRankSvm),
            _ => None,
        }
    }
}

/// Pooling parameters. `lambda`, `max_iters` and `step_size` only apply to
/// the exact ranking variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolingConfig {
    pub variant: PoolingVariant,
    pub lambda: f64,
    pub max_iters: usize,
    pub step_size: f64,
}

impl Default for PoolingConfig {
    fn default() -> Self {
        PoolingConfig {
            variant: PoolingVariant::LinearArp,
            lambda: 1.0,
            max_iters: 200,
            step_size: 1.0,
        }
    }
}

impl PoolingConfig {
    pub fn validate(&self) -> Result<(), PoolError> {
        if !(self.lambda > 0.0) || !(self.step_size > 0.0) || self.max_iters == 0 {
            return Err(PoolError::InvalidConfig);
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PoolError {
    #[error("frames have mismatched lengths")]
    LengthMismatch,
    #[error("no frames to pool")]
    Empty,
    #[error("pooling configuration invalid")]
    InvalidConfig,
}

/// The pooled representation of one frame sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicImage {
    pub values: Vec<f64>,
}

/// Error-free sum of two doubles: `(s, e)` with `s + e == a + b` exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Error-free product via fused multiply-add.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Double-double addition: `(ah, al) + (bh, bl)` renormalized.
#[inline]
fn dd_add(ah: f64, al: f64, bh: f64, bl: f64) -> (f64, f64) {
    let (s, e) = two_sum(ah, bh);
    two_sum(s, e + al + bl)
}

/// Neumaier-compensated sum; accurate enough to verify identities that a
/// plain left-to-right sum would bury under its own rounding.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Frame coefficients for the closed-form pooling variants.
///
/// * linear: `a_t = 2t - T - 1`
/// * harmonic: `a_t = 2(T - t + 1) - (T + 1)(H_T - H_{t-1})` with
///   `H_t = sum_{i=1..t} 1/i`, `H_0 = 0`
///
/// Both families sum to zero for every T. The harmonic suffix sums are
/// evaluated in double-double precision so every returned coefficient is
/// correctly rounded; plain f64 accumulation would leak more than 1e-12
/// into the null-sum identity by T ~ 50.
pub fn arp_coefficients(t_len: usize, variant: PoolingVariant) -> Vec<f64> {
    assert!(t_len >= 1, "need at least one frame");
    let t_f = t_len as f64;
    match variant {
        PoolingVariant::LinearArp => (1..=t_len)
            .map(|t| 2.0 * t as f64 - t_f - 1.0)
            .collect(),
        PoolingVariant::HarmonicArp => {
            // Suffix sums S_t = H_T - H_{t-1} = sum_{i=t..T} 1/i, backward,
            // in double-double.
            let mut suffix = vec![(0.0f64, 0.0f64); t_len + 2];
            for t in (1..=t_len).rev() {
                let q = 1.0 / t as f64;
                // Correction so that (q, r) is 1/t to double-double accuracy.
                let (ph, pl) = two_prod(q, t as f64);
                let r = ((1.0 - ph) - pl) / t as f64;
                let (sh, sl) = suffix[t + 1];
                suffix[t] = dd_add(sh, sl, q, r);
            }
            (1..=t_len)
                .map(|t| {
                    let (sh, sl) = suffix[t];
                    let (ph, pl) = two_prod(t_f + 1.0, sh);
                    let pl = pl + (t_f + 1.0) * sl;
                    let (rh, rl) = dd_add(2.0 * (t_f - t as f64 + 1.0), 0.0, -ph, -pl);
                    rh + rl
                })
                .collect()
        }
        PoolingVariant::ExactRankSvm => {
            panic!("exact variant has no closed-form coefficients")
        }
    }
}

fn check_frames(frames: &[Vec<f64>]) -> Result<usize, PoolError> {
    let first = frames.first().ok_or(PoolError::Empty)?;
    if frames.iter().any(|f| f.len() != first.len()) {
        return Err(PoolError::LengthMismatch);
    }
    Ok(first.len())
}

/// Per-step cumulative means `V_t = (1/t) * sum_{s<=t} f_s`.
fn running_means(frames: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = frames[0].len();
    let mut acc = vec![0.0f64; dim];
    let mut out = Vec::with_capacity(frames.len());
    for (t, frame) in frames.iter().enumerate() {
        for (a, &v) in acc.iter_mut().zip(frame) {
            *a += v;
        }
        out.push(acc.iter().map(|&a| a / (t + 1) as f64).collect());
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `lambda/2 ||u||^2 + (2 / (T(T-1))) * sum_{t' > t} hinge(1 -
/// u . (V_t' - V_t))` by deterministic subgradient descent from zero with
/// step `step_size / (lambda * iter)`.
fn exact_ranksvm(frames: &[Vec<f64>], cfg: &PoolingConfig) -> Vec<f64> {
    let dim = frames[0].len();
    let t_len = frames.len();
    if t_len < 2 {
        return vec![0.0; dim];
    }
    let means = running_means(frames);
    let mut diffs: Vec<Vec<f64>> = Vec::with_capacity(t_len * (t_len - 1) / 2);
    for t in 0..t_len {
        for t2 in (t + 1)..t_len {
            diffs.push(
                means[t2]
                    .iter()
                    .zip(&means[t])
                    .map(|(a, b)| a - b)
                    .collect(),
            );
        }
    }
    let pair_weight = 2.0 / (t_len as f64 * (t_len as f64 - 1.0));
    let mut u = vec![0.0f64; dim];
    let mut grad = vec![0.0f64; dim];
    for iter in 1..=cfg.max_iters {
        for (g, &ui) in grad.iter_mut().zip(&u) {
            *g = cfg.lambda * ui;
        }
        for d in &diffs {
            if dot(&u, d) < 1.0 {
                for (g, &di) in grad.iter_mut().zip(d) {
                    *g -= pair_weight * di;
                }
            }
        }
        let step = cfg.step_size / (cfg.lambda * iter as f64);
        for (ui, &gi) in u.iter_mut().zip(&grad) {
            *ui -= step * gi;
        }
    }
    u
}

/// Objective value of the exact ranking problem at `u`; used by callers to
/// certify descent quality.
pub fn ranking_objective(frames: &[Vec<f64>], u: &[f64], lambda: f64) -> f64 {
    let t_len = frames.len();
    if t_len < 2 {
        return 0.5 * lambda * dot(u, u);
    }
    let means = running_means(frames);
    let mut hinge_sum = 0.0;
    for t in 0..t_len {
        for t2 in (t + 1)..t_len {
            let d: Vec<f64> = means[t2].iter().zip(&means[t]).map(|(a, b)| a - b).collect();
            hinge_sum += (1.0 - dot(u, &d)).max(0.0);
        }
    }
    let pair_weight = 2.0 / (t_len as f64 * (t_len as f64 - 1.0));
    0.5 * lambda * dot(u, u) + pair_weight * hinge_sum
}

/// Pools a frame sequence into a dynamic image.
pub fn dynamic_image(frames: &[Vec<f64>], cfg: &PoolingConfig) -> Result<DynamicImage, PoolError> {
    cfg.validate()?;
    let dim = check_frames(frames)?;
    let values = match cfg.variant {
        PoolingVariant::LinearArp => {
            let coeffs = arp_coefficients(frames.len(), PoolingVariant::LinearArp);
            weighted_sum(frames, &coeffs, dim)
        }
        PoolingVariant::HarmonicArp => {
            let coeffs = arp_coefficients(frames.len(), PoolingVariant::HarmonicArp);
            let means = running_means(frames);
            weighted_sum(&means, &coeffs, dim)
        }
        PoolingVariant::ExactRankSvm => exact_ranksvm(frames, cfg),
    };
    Ok(DynamicImage { values })
}

fn weighted_sum(frames: &[Vec<f64>], coeffs: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; dim];
    for (frame, &a) in frames.iter().zip(coeffs) {
        for (o, &v) in out.iter_mut().zip(frame) {
            *o += a * v;
        }
    }
    out
}

/// Affine min-max map to [0, 1] for display; an all-equal input maps to 0.5.
pub fn normalize_display(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.5; values.len()];
    }
    values.iter().map(|&v| (v - lo) / (hi - lo)).collect()
}
