//! Cumulative probability of blur detection (Narvekar & Karam).
//!
//! Blocks of the image are classified as edge blocks with a Canny detector;
//! inside each edge block the width of every vertical Sobel edge is measured
//! along the row (Marziliano widths) and converted to a probability of blur
//! detection `1 - exp(-(w / w_jnb)^β)` where the just-noticeable width depends
//! on the block contrast. The score is the fraction of edges whose
//! probability stays below the just-noticeable level (63%).

use serde::{Deserialize, Serialize};

use crate::frame::Plane;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpbdParams {
    pub block_size: usize,
    /// Minimum fraction of Canny edge pixels for a block to count.
    pub edge_block_fraction: f64,
    pub beta: f64,
    /// Just-noticeable blur width for blocks with contrast up to `contrast_split`.
    pub jnb_low_contrast: f64,
    /// Just-noticeable blur width for higher-contrast blocks.
    pub jnb_high_contrast: f64,
    pub contrast_split: usize,
    pub canny_sigma: f64,
    pub canny_low: f64,
    pub canny_high: f64,
    /// Longest one-sided walk when measuring an edge width.
    pub max_edge_walk: usize,
}

impl Default for CpbdParams {
    fn default() -> Self {
        CpbdParams {
            block_size: 64,
            edge_block_fraction: 0.002,
            beta: 3.6,
            jnb_low_contrast: 5.0,
            jnb_high_contrast: 3.0,
            contrast_split: 50,
            canny_sigma: 1.0,
            canny_low: 0.1,
            canny_high: 0.2,
            max_edge_walk: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpbdScore {
    /// Sharpness in `[0, 1]`, higher is sharper.
    pub score: f64,
    /// Number of edge pixels that entered the histogram.
    pub edges: usize,
    /// Set when no edge was measured; `score` is then 0.
    pub no_edges: bool,
}

/// CPBD of a grayscale image whose white level is `peak`.
///
/// The procedure is defined on an 8-bit scale, so the plane is rescaled to
/// `[0, 255]` internally.
pub fn cpbd(img: &Plane, peak: f64, params: &CpbdParams) -> Result<CpbdScore> {
    if img.width < params.block_size || img.height < params.block_size {
        return Err(Error::invalid(format!(
            "image {}x{} is smaller than one {} px block",
            img.width, img.height, params.block_size
        )));
    }
    if !(peak > 0.0) {
        return Err(Error::invalid("peak must be positive"));
    }
    let scaled;
    let img = if peak == 255.0 {
        img
    } else {
        scaled = img.map(|v| v * 255.0 / peak);
        &scaled
    };

    let canny_edges = canny(img, params.canny_sigma, params.canny_low, params.canny_high);
    let sobel_edges = sobel_vertical_edges(img);
    let widths = marziliano_widths(&sobel_edges, img, params.max_edge_walk);

    let (w, h, bs) = (img.width, img.height, params.block_size);
    let mut hist = [0usize; 101];
    let mut total = 0usize;
    let min_edges = (bs * bs) as f64 * params.edge_block_fraction;
    for by in 0..h / bs {
        for bx in 0..w / bs {
            let rows = by * bs..(by + 1) * bs;
            let cols = bx * bs..(bx + 1) * bs;
            let edge_count = rows
                .clone()
                .flat_map(|y| cols.clone().map(move |x| y * w + x))
                .filter(|&i| canny_edges[i])
                .count();
            if edge_count as f64 <= min_edges {
                continue;
            }
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for y in rows.clone() {
                for x in cols.clone() {
                    let v = img.data[y * w + x];
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            let contrast = (hi - lo) as usize;
            let jnb = if contrast <= params.contrast_split {
                params.jnb_low_contrast
            } else {
                params.jnb_high_contrast
            };
            for y in rows.clone() {
                for x in cols.clone() {
                    let width = widths[y * w + x];
                    if width == 0.0 {
                        continue;
                    }
                    let p = 1.0 - (-(width / jnb).abs().powf(params.beta)).exp();
                    hist[round_half_even(p * 100.0) as usize] += 1;
                    total += 1;
                }
            }
        }
    }
    if total == 0 {
        return Ok(CpbdScore {
            score: 0.0,
            edges: 0,
            no_edges: true,
        });
    }
    let below: usize = hist[..64].iter().sum();
    Ok(CpbdScore {
        score: below as f64 / total as f64,
        edges: total,
        no_edges: false,
    })
}

fn round_half_even(v: f64) -> f64 {
    let r = v.round();
    if (v - v.trunc()).abs() == 0.5 {
        2.0 * (v / 2.0).round()
    } else {
        r
    }
}

/// Half-sample symmetric index (`d c b a | a b c d`).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m >= n { period - 1 - m } else { m }) as usize
}

/// Thresholded, thinned horizontal-gradient edges.
fn sobel_vertical_edges(img: &Plane) -> Vec<bool> {
    let (w, h) = (img.width, img.height);
    let at = |x: isize, y: isize| img.data[reflect(y, h) * w + reflect(x, w)];
    let mut strength = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut g = 0.0;
            for (dy, k) in [(-1isize, 1.0), (0, 2.0), (1, 1.0)] {
                g += k * (at(x + 1, y + dy) - at(x - 1, y + dy));
            }
            let g = g / 8.0;
            strength[y as usize * w + x as usize] = g * g;
        }
    }
    let mean = strength.iter().sum::<f64>() / strength.len() as f64;
    let cutoff = 2.0 * mean.sqrt();
    for s in strength.iter_mut() {
        if *s <= cutoff {
            *s = 0.0;
        }
    }
    let s = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            strength[y as usize * w + x as usize]
        }
    };
    let mut edges = vec![false; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let v = s(x, y);
            let horiz = v > s(x - 1, y) && v > s(x + 1, y);
            let vert = v > s(x, y - 1) && v > s(x, y + 1);
            edges[y as usize * w + x as usize] = horiz || vert;
        }
    }
    edges
}

/// Width of each edge pixel measured along its row, zero elsewhere.
fn marziliano_widths(edges: &[bool], img: &Plane, max_walk: usize) -> Vec<f64> {
    let (w, h) = (img.width, img.height);
    let px = |x: usize, y: usize| img.data[y * w + x];
    let grad = |v: &dyn Fn(usize) -> f64, i: usize, n: usize| -> f64 {
        if n == 1 {
            0.0
        } else if i == 0 {
            v(1) - v(0)
        } else if i == n - 1 {
            v(n - 1) - v(n - 2)
        } else {
            (v(i + 1) - v(i - 1)) / 2.0
        }
    };
    let mut angles = vec![0.0; w * h];
    let mut any_angle = false;
    for y in 0..h {
        for x in 0..w {
            let gx = grad(&|i| px(i, y), x, w);
            if gx != 0.0 {
                let gy = grad(&|i| px(x, i), y, h);
                let a = gy.atan2(gx).to_degrees();
                any_angle |= a != 0.0;
                angles[y * w + x] = 45.0 * round_half_even(a / 45.0);
            }
        }
    }
    let mut widths = vec![0.0; w * h];
    if !any_angle {
        return widths;
    }
    for y in 1..h.saturating_sub(1) {
        for x in 1..w - 1 {
            if !edges[y * w + x] {
                continue;
            }
            let q = angles[y * w + x];
            // falling edge (gradient points left) or rising edge (points right)
            let falling = q == 180.0 || q == -180.0;
            if !falling && q != 0.0 {
                continue;
            }
            let sign = if falling { 1.0 } else { -1.0 };
            let mut left = 0;
            for m in 0..=max_walk {
                left = m;
                let inner = x as isize - 1 - m as isize;
                let outer = x as isize - 2 - m as isize;
                if outer < 0 || sign * (px(outer as usize, y) - px(inner as usize, y)) <= 0.0 {
                    break;
                }
            }
            let mut right = 0;
            for m in 0..=max_walk {
                right = m;
                let inner = x + 1 + m;
                let outer = x + 2 + m;
                if outer >= w || sign * (px(outer, y) - px(inner, y)) >= 0.0 {
                    break;
                }
            }
            widths[y * w + x] = (left + 1 + right + 1) as f64;
        }
    }
    widths
}

/// Canny edge map: Gaussian smoothing (zero padding, renormalized by the
/// padded weight), Sobel gradients, bilinear non-maximum suppression and
/// hysteresis over 8-connected components. Border pixels are never edges.
fn canny(img: &Plane, sigma: f64, low: f64, high: f64) -> Vec<bool> {
    let (w, h) = (img.width, img.height);
    let radius = (4.0 * sigma + 0.5) as isize;
    let kernel: Vec<f64> = {
        let k: Vec<f64> = (-radius..=radius)
            .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let t: f64 = k.iter().sum();
        k.into_iter().map(|v| v / t).collect()
    };
    let blur = |data: &[f64]| -> Vec<f64> {
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, &kv) in kernel.iter().enumerate() {
                    let sx = x as isize + k as isize - radius;
                    if sx >= 0 && sx < w as isize {
                        acc += kv * data[y * w + sx as usize];
                    }
                }
                tmp[y * w + x] = acc;
            }
        }
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, &kv) in kernel.iter().enumerate() {
                    let sy = y as isize + k as isize - radius;
                    if sy >= 0 && sy < h as isize {
                        acc += kv * tmp[sy as usize * w + x];
                    }
                }
                out[y * w + x] = acc;
            }
        }
        out
    };
    let num = blur(&img.data);
    let den = blur(&vec![1.0; w * h]);
    let smoothed: Vec<f64> = num
        .iter()
        .zip(&den)
        .map(|(n, d)| n / (d + f64::EPSILON))
        .collect();

    let at = |x: isize, y: isize| smoothed[reflect(y, h) * w + reflect(x, w)];
    let mut gi = vec![0.0; w * h]; // derivative along rows (vertical)
    let mut gj = vec![0.0; w * h]; // derivative along columns (horizontal)
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            gj[i] = (at(x + 1, y - 1) - at(x - 1, y - 1))
                + 2.0 * (at(x + 1, y) - at(x - 1, y))
                + (at(x + 1, y + 1) - at(x - 1, y + 1));
            gi[i] = (at(x - 1, y + 1) - at(x - 1, y - 1))
                + 2.0 * (at(x, y + 1) - at(x, y - 1))
                + (at(x + 1, y + 1) - at(x + 1, y - 1));
        }
    }
    let mag: Vec<f64> = gi.iter().zip(&gj).map(|(a, b)| (a * a + b * b).sqrt()).collect();
    let m = |x: usize, y: usize| mag[y * w + x];

    let mut low_mask = vec![false; w * h];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let i = y * w + x;
            let v = mag[i];
            if v < low {
                continue;
            }
            let (di, dj) = (gi[i], gj[i]);
            let (ai, aj) = (di.abs(), dj.abs());
            let same_sign = (di >= 0.0 && dj >= 0.0) || (di <= 0.0 && dj <= 0.0);
            let is_max = if same_sign && ai >= aj {
                let wgt = if ai == 0.0 { 0.0 } else { aj / ai };
                m(x + 1, y + 1) * wgt + m(x, y + 1) * (1.0 - wgt) <= v
                    && m(x - 1, y - 1) * wgt + m(x, y - 1) * (1.0 - wgt) <= v
            } else if same_sign {
                let wgt = ai / aj;
                m(x + 1, y + 1) * wgt + m(x + 1, y) * (1.0 - wgt) <= v
                    && m(x - 1, y - 1) * wgt + m(x - 1, y) * (1.0 - wgt) <= v
            } else if ai <= aj {
                let wgt = ai / aj;
                m(x + 1, y - 1) * wgt + m(x + 1, y) * (1.0 - wgt) <= v
                    && m(x - 1, y + 1) * wgt + m(x - 1, y) * (1.0 - wgt) <= v
            } else {
                let wgt = aj / ai;
                m(x + 1, y - 1) * wgt + m(x, y - 1) * (1.0 - wgt) <= v
                    && m(x - 1, y + 1) * wgt + m(x, y + 1) * (1.0 - wgt) <= v
            };
            low_mask[i] = is_max;
        }
    }

    // keep 8-connected weak components that contain a strong pixel
    let mut out = vec![false; w * h];
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut component = Vec::new();
    for start in 0..w * h {
        if !low_mask[start] || seen[start] {
            continue;
        }
        component.clear();
        let mut strong = false;
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            component.push(i);
            strong |= mag[i] >= high;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if low_mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if strong {
            for &i in &component {
                out[i] = true;
            }
        }
    }
    out
}
