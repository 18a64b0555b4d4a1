//! Orthographic rasterizer for the planar scene.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::seeding::Rng;
use crate::sim::config::WorldConfig;
use crate::sim::kinematics::point_segment_distance;
use crate::sim::world::{WorldState, CATCHER, THROWER};

pub const FRAME_HEIGHT: usize = 48;
pub const FRAME_WIDTH: usize = 64;
/// Side of the square average-pooling window.
pub const POOL: usize = 4;
pub const POOLED_DIM: usize = (FRAME_HEIGHT / POOL) * (FRAME_WIDTH / POOL) * 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub background: [f64; 3],
    pub thrower_color: [f64; 3],
    pub catcher_color: [f64; 3],
    /// Half thickness of drawn links, m.
    pub link_half_width: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            background: [0.5, 0.5, 0.5],
            thrower_color: [0.25, 0.25, 0.25],
            catcher_color: [0.72, 0.72, 0.72],
            link_half_width: 0.015,
        }
    }
}

/// RGB image stored as bytes (value / 255 is the channel intensity in
/// [0, 1]), row-major with interleaved channels, plus the object mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub height: usize,
    pub width: usize,
    pub rgb: Vec<u8>,
    pub mask: Vec<bool>,
}

impl Frame {
    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = 3 * (row * self.width + col);
        [self.rgb[i] as f64 / 255.0, self.rgb[i + 1] as f64 / 255.0, self.rgb[i + 2] as f64 / 255.0]
    }

    pub fn labels(&self) -> Labels {
        labels_from_mask(&self.mask, self.height, self.width)
    }

    /// Average-pooled intensities, row-major `(row, col, channel)`.
    pub fn pooled(&self) -> Vec<f64> {
        let (ph, pw) = (self.height / POOL, self.width / POOL);
        let mut out = vec![0.0; ph * pw * 3];
        let norm = 1.0 / (255.0 * (POOL * POOL) as f64);
        for r in 0..self.height {
            for c in 0..self.width {
                let o = 3 * ((r / POOL) * pw + c / POOL);
                let i = 3 * (r * self.width + c);
                for ch in 0..3 {
                    out[o + ch] += self.rgb[i + ch] as f64;
                }
            }
        }
        for v in &mut out {
            *v *= norm;
        }
        out
    }

    /// Copy with fresh per-pixel N(0, σ) noise on every pixel that still
    /// shows the plain background colour and is not object. The mask and
    /// labels are unchanged.
    pub fn with_background_noise(&self, background: [f64; 3], std: f64, rng: &mut Rng) -> Frame {
        let bg = background.map(quantize);
        let normal = Normal::new(0.0, std).expect("finite std");
        let mut out = self.clone();
        for (i, px) in out.rgb.chunks_exact_mut(3).enumerate() {
            if !self.mask[i] && px == bg {
                let n = normal.sample(rng);
                for ch in 0..3 {
                    px[ch] = quantize(background[ch] + n);
                }
            }
        }
        out
    }
}

/// Encoder supervision: object pixel fraction and normalized centroid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub delta: f64,
    pub x: f64,
    pub y: f64,
}

impl Labels {
    /// Returned for an empty mask.
    pub const EMPTY: Labels = Labels { delta: 0.0, x: 0.5, y: 0.5 };

    pub fn to_array(self) -> [f64; 3] {
        [self.delta, self.x, self.y]
    }
}

/// `δ` = mask fraction; centroid = mean column / width, mean row / height.
pub fn labels_from_mask(mask: &[bool], height: usize, width: usize) -> Labels {
    assert_eq!(mask.len(), height * width, "mask size");
    let (mut n, mut sr, mut sc) = (0usize, 0usize, 0usize);
    for (i, &m) in mask.iter().enumerate() {
        if m {
            n += 1;
            sr += i / width;
            sc += i % width;
        }
    }
    if n == 0 {
        return Labels::EMPTY;
    }
    Labels {
        delta: n as f64 / mask.len() as f64,
        x: sc as f64 / n as f64 / width as f64,
        y: sr as f64 / n as f64 / height as f64,
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// World coordinates of the centre of pixel `(row, col)`.
pub fn pixel_center(config: &WorldConfig, row: usize, col: usize) -> [f64; 2] {
    let v = &config.view;
    let sx = (v.x[1] - v.x[0]) / FRAME_WIDTH as f64;
    let sz = (v.z[1] - v.z[0]) / FRAME_HEIGHT as f64;
    [v.x[0] + (col as f64 + 0.5) * sx, v.z[1] - (row as f64 + 0.5) * sz]
}

/// Rasterizes the scene. Draw order: background, thrower, catcher, object.
/// Background pixels receive per-pixel N(0, σ) noise, one draw shared by the
/// three channels, when the episode drew the noisy-background option.
pub fn render(world: &WorldConfig, style: &RenderConfig, state: &WorldState, rng: &mut Rng) -> Frame {
    let n = FRAME_HEIGHT * FRAME_WIDTH;
    let mut rgb = vec![0u8; 3 * n];
    let mut mask = vec![false; n];
    let arms = [
        (state.pose(world, THROWER).segments(), style.thrower_color),
        (state.pose(world, CATCHER).segments(), style.catcher_color),
    ];
    let object = &state.object;
    let reach = object.shape.shape.bounding_radius();
    let (s, c) = (-object.angle).sin_cos();
    let noise_std = world.randomization.background_noise_std;
    let noisy = state.params.background_noise && noise_std > 0.0;
    let normal = Normal::new(0.0, noise_std.max(f64::MIN_POSITIVE)).expect("positive std");
    for row in 0..FRAME_HEIGHT {
        for col in 0..FRAME_WIDTH {
            let p = pixel_center(world, row, col);
            let i = row * FRAME_WIDTH + col;
            let mut color = None;
            let d = [p[0] - object.position[0], p[1] - object.position[1]];
            if d[0].abs() <= reach && d[1].abs() <= reach {
                let local = [c * d[0] - s * d[1], s * d[0] + c * d[1]];
                if object.shape.shape.contains(local) {
                    color = Some(object.color);
                    mask[i] = true;
                }
            }
            if color.is_none() {
                for (segments, arm_color) in arms.iter().rev() {
                    if segments.iter().any(|(a, b)| point_segment_distance(p, *a, *b) <= style.link_half_width) {
                        color = Some(*arm_color);
                        break;
                    }
                }
            }
            let px = match color {
                Some(col) => col,
                None if noisy => {
                    let n = normal.sample(rng);
                    style.background.map(|ch| ch + n)
                }
                None => style.background,
            };
            for ch in 0..3 {
                rgb[3 * i + ch] = quantize(px[ch]);
            }
        }
    }
    Frame {
        height: FRAME_HEIGHT,
        width: FRAME_WIDTH,
        rgb,
        mask,
    }
}
