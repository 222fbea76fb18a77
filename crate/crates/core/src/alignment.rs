//! Scene normalization, scene-to-scene transforms and topic warping.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::corpus::{ClipDocument, GridSpec, SceneCorpus};
use crate::error::{Error, Result};
use crate::topic_model::{fixed_topic_bound, DirichletPrior, LdaConfig, TopicMatrix};

/// Homogeneous 2-D similarity transform over cell coordinates:
///
/// ```text
/// | s·cos φ  -s·sin φ  tx |
/// | s·sin φ   s·cos φ  ty |
/// |   0         0       1 |
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneTransform {
    pub scale: f64,
    pub rotation: f64,
    pub tx: f64,
    pub ty: f64,
}

pub type Mat3 = [[f64; 3]; 3];

impl SceneTransform {
    pub fn new(scale: f64, rotation: f64, tx: f64, ty: f64) -> Result<Self> {
        if !(scale > 0.0)
            || !scale.is_finite()
            || !rotation.is_finite()
            || !tx.is_finite()
            || !ty.is_finite()
        {
            return Err(Error::domain(format!(
                "invalid transform scale={scale} rotation={rotation} t=({tx},{ty})"
            )));
        }
        Ok(Self {
            scale,
            rotation,
            tx,
            ty,
        })
    }

    pub const fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: 0.0,
            tx: 0.0,
            ty: 0.0,
        }
    }

    pub fn rotation_only(angle: f64) -> Self {
        Self {
            scale: 1.0,
            rotation: angle,
            tx: 0.0,
            ty: 0.0,
        }
    }

    pub fn matrix(&self) -> Mat3 {
        let (s, c) = if self.rotation == 0.0 {
            (0.0, 1.0)
        } else {
            (libm::sin(self.rotation), libm::cos(self.rotation))
        };
        [
            [self.scale * c, -self.scale * s, self.tx],
            [self.scale * s, self.scale * c, self.ty],
            [0.0, 0.0, 1.0],
        ]
    }

    /// Recovers the parameters of a similarity matrix.
    pub fn from_matrix(m: &Mat3) -> Result<Self> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if !(det.abs() > 1e-300) || !det.is_finite() {
            return Err(Error::numeric("singular transform"));
        }
        let scale = libm::hypot(m[0][0], m[1][0]);
        let rotation = if m[1][0] == 0.0 && m[0][0] > 0.0 {
            0.0
        } else {
            libm::atan2(m[1][0], m[0][0])
        };
        Self::new(scale, rotation, m[0][2], m[1][2])
    }

    pub fn inverse(&self) -> Self {
        let inv_s = 1.0 / self.scale;
        let rot = -self.rotation;
        let (s, c) = if rot == 0.0 {
            (0.0, 1.0)
        } else {
            (libm::sin(rot), libm::cos(rot))
        };
        // -(1/s) R(-φ) t
        let tx = -inv_s * (c * self.tx - s * self.ty);
        let ty = -inv_s * (s * self.tx + c * self.ty);
        Self {
            scale: inv_s,
            rotation: rot,
            tx,
            ty,
        }
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let m = self.matrix();
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2],
        ]
    }

    /// `self · other` (apply `other` first).
    pub fn after(&self, other: &SceneTransform) -> Result<SceneTransform> {
        Self::from_matrix(&mat_mul(&self.matrix(), &other.matrix()))
    }

    pub fn is_rotation_free(&self) -> bool {
        self.rotation == 0.0
    }
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Count-weighted center of a scene's words and their mean distance to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationStats {
    pub center: [f64; 2],
    pub mean_radius: f64,
}

impl NormalizationStats {
    pub fn from_clips<'a>(
        clips: impl IntoIterator<Item = &'a ClipDocument> + Clone,
        grid: &GridSpec,
    ) -> Result<Self> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for clip in clips.clone() {
            for &(w, c) in clip.counts() {
                let word = grid.word_coords(w)?;
                let c = c as f64;
                sx += c * word.cx as f64;
                sy += c * word.cy as f64;
                n += c;
            }
        }
        if n == 0.0 {
            return Err(Error::domain("no words to normalize"));
        }
        let center = [sx / n, sy / n];
        let mut r = 0.0;
        for clip in clips {
            for &(w, c) in clip.counts() {
                let word = grid.coords_unchecked(w);
                r += c as f64 * libm::hypot(word.cx as f64 - center[0], word.cy as f64 - center[1]);
            }
        }
        Ok(Self {
            center,
            mean_radius: r / n,
        })
    }

    /// `t_s = 1 / mean_radius`, translation `-t_s · center`, no rotation.
    pub fn transform(&self) -> Result<SceneTransform> {
        if !(self.mean_radius > 0.0) {
            return Err(Error::domain("all words lie in one cell"));
        }
        let s = 1.0 / self.mean_radius;
        SceneTransform::new(s, 0.0, -s * self.center[0], -s * self.center[1])
    }
}

/// Closed-form normalization of a scene's training words to zero mean and
/// unit mean radius.
pub fn estimate_normalization(corpus: &SceneCorpus) -> Result<SceneTransform> {
    estimate_normalization_from_clips(&corpus.scene_id, &corpus.training_clips, &corpus.grid)
}

pub fn estimate_normalization_from_clips(
    scene_id: &str,
    clips: &[ClipDocument],
    grid: &GridSpec,
) -> Result<SceneTransform> {
    let degenerate = |reason: &str| Error::DegenerateScene {
        scene: scene_id.into(),
        reason: reason.into(),
    };
    let stats =
        NormalizationStats::from_clips(clips.iter(), grid).map_err(|_| degenerate("no words"))?;
    stats
        .transform()
        .map_err(|_| degenerate("all words lie in a single cell"))
}

/// Transform from scene `a`'s cells to scene `b`'s: `T_b⁻¹ · T_a`.
pub fn compose_a_to_b(ta: &SceneTransform, tb: &SceneTransform) -> Result<SceneTransform> {
    let m = tb.matrix();
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if !(det.abs() > 1e-300) {
        return Err(Error::numeric("target transform is singular"));
    }
    tb.inverse().after(ta)
}

/// Source direction bin for target bin `d_prime`: the bin nearest to
/// `T*⁻¹ · vec(d')`, where `T*` is the linear part of `t`. Ties go to the
/// smaller bin.
pub fn remap_direction(d_prime: usize, t: &SceneTransform, directions: usize) -> usize {
    if t.rotation == 0.0 {
        return d_prime;
    }
    let angle = 2.0 * PI * d_prime as f64 / directions as f64;
    let inv = t.inverse();
    let m = inv.matrix();
    let v = [libm::cos(angle), libm::sin(angle)];
    let src = [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ];
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for d in 0..directions {
        let a = 2.0 * PI * d as f64 / directions as f64;
        let dist = libm::hypot(src[0] - libm::cos(a), src[1] - libm::sin(a));
        if dist < best_dist - 1e-12 {
            best = d;
            best_dist = dist;
        }
    }
    best
}

/// Catmull-Rom cubic convolution kernel (a = -0.5).
#[inline]
fn cubic_weight(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (A + 2.0) * t * t * t - (A + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        A * t * t * t - 5.0 * A * t * t + 8.0 * A * t - 4.0 * A
    } else {
        0.0
    }
}

/// Bicubic sample of one direction layer at fractional cell `(x, y)`.
/// Positions outside the grid footprint read as 0; taps are clamped to the
/// grid edge.
fn sample_layer(beta: &[f64], grid: &GridSpec, d: usize, x: f64, y: f64) -> f64 {
    let na = grid.cells_x as f64;
    let nb = grid.cells_y as f64;
    if x < -0.5 || y < -0.5 || x > na - 0.5 || y > nb - 0.5 {
        return 0.0;
    }
    let x0 = libm::floor(x);
    let y0 = libm::floor(y);
    let fx = x - x0;
    let fy = y - y0;
    let wx = [
        cubic_weight(fx + 1.0),
        cubic_weight(fx),
        cubic_weight(1.0 - fx),
        cubic_weight(2.0 - fx),
    ];
    let wy = [
        cubic_weight(fy + 1.0),
        cubic_weight(fy),
        cubic_weight(1.0 - fy),
        cubic_weight(2.0 - fy),
    ];
    let clamp = |v: f64, n: usize| -> usize { (v.max(0.0) as usize).min(n - 1) };
    let mut acc = 0.0;
    for (j, wyj) in wy.iter().enumerate() {
        if *wyj == 0.0 {
            continue;
        }
        let cy = clamp(y0 - 1.0 + j as f64, grid.cells_y);
        for (i, wxi) in wx.iter().enumerate() {
            if *wxi == 0.0 {
                continue;
            }
            let cx = clamp(x0 - 1.0 + i as f64, grid.cells_x);
            acc += wyj * wxi * beta[grid.index_unchecked(cx, cy, d)];
        }
    }
    acc
}

/// Warps a topic distribution by `t`: every target cell traces back through
/// `t⁻¹`, is read by bicubic interpolation within its direction layer, and the
/// cropped, non-negative result is renormalized to sum to 1.
pub fn transform_topic(beta: &[f64], grid: &GridSpec, t: &SceneTransform) -> Result<Vec<f64>> {
    if beta.len() != grid.vocab_size() {
        return Err(Error::domain("topic length does not match the grid"));
    }
    let inv = t.inverse();
    let layers: Vec<usize> = (0..grid.directions)
        .map(|d| remap_direction(d, t, grid.directions))
        .collect();
    let mut out = vec![0.0; beta.len()];
    for cy in 0..grid.cells_y {
        for cx in 0..grid.cells_x {
            let [x, y] = inv.apply([cx as f64, cy as f64]);
            for (d_prime, &d) in layers.iter().enumerate() {
                let v = sample_layer(beta, grid, d, x, y);
                out[grid.index_unchecked(cx, cy, d_prime)] = v.max(0.0);
            }
        }
    }
    let sum: f64 = out.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::EmptyProjection);
    }
    out.iter_mut().for_each(|v| *v /= sum);
    Ok(out)
}

/// Warps every topic of a matrix; topics that leave the grid entirely become
/// uniform after flooring.
pub fn transform_topics_lenient(topics: &TopicMatrix, t: &SceneTransform) -> Result<TopicMatrix> {
    let grid = *topics.grid();
    let rows = topics
        .topics()
        .map(|beta| match transform_topic(beta, &grid, t) {
            Ok(row) => Ok(row),
            Err(Error::EmptyProjection) => {
                log::debug!("topic projects outside the grid; using a flat distribution");
                Ok(vec![0.0; beta.len()])
            }
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    TopicMatrix::from_unnormalized(grid, rows)
}

/// Result of a rotation search; `trace` pairs every tried angle with its score.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationSearch {
    pub best_angle: f64,
    pub best_score: f64,
    pub trace: Vec<(f64, f64)>,
}

/// `n` evenly spaced angles over `[0, 2π)`.
pub fn uniform_angle_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect()
}

/// Scores rotations of a source scene's topics against target clips.
///
/// Each candidate maps source cells to target cells by
/// `T_target⁻¹ · R(φ) · T_source`, rotating about the normalized origin, and
/// is scored with the fixed-topic variational bound of the target clips.
pub fn search_rotation(
    source_topics: &TopicMatrix,
    source_alpha: &DirichletPrior,
    source_norm: &SceneTransform,
    target_norm: &SceneTransform,
    target_clips: &[ClipDocument],
    angles: &[f64],
    cfg: &LdaConfig,
) -> Result<RotationSearch> {
    if angles.is_empty() {
        return Err(Error::domain("empty angle grid"));
    }
    if target_clips.is_empty() {
        return Err(Error::domain("no target clips"));
    }
    let mut trace = Vec::with_capacity(angles.len());
    for &angle in angles {
        let rotated = SceneTransform::rotation_only(angle).after(source_norm)?;
        let t = target_norm.inverse().after(&rotated)?;
        let warped = transform_topics_lenient(source_topics, &t)?;
        let score = fixed_topic_bound(target_clips, &warped, source_alpha, cfg)?;
        trace.push((angle, score));
    }
    let (best_angle, best_score) =
        trace
            .iter()
            .copied()
            .fold((f64::NAN, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
    Ok(RotationSearch {
        best_angle,
        best_score,
        trace,
    })
}
