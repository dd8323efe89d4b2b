//! Convolution and dense layers with explicit backward passes.
//!
//! Every convolution is a 3D convolution over `(C, T, H, W)`; a per-frame 2D
//! convolution is the special case of temporal kernel 1 and a temporal 1D
//! convolution the case of spatial kernel 1.

use ndarray::{Array1, Array2, Array4, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Conv {
    pub w: Array2<f32>,
    pub b: Array1<f32>,
    pub cin: usize,
    pub cout: usize,
    pub k: [usize; 3],
    pub s: [usize; 3],
    pub p: [usize; 3],
}

pub(crate) struct ConvCache {
    cols: Array2<f32>,
    in_dims: [usize; 4],
}

fn out_len(n: usize, k: usize, s: usize, p: usize) -> usize {
    (n + 2 * p - k) / s + 1
}

impl Conv {
    /// He-normal weights scaled by `gain`, zero bias. `gain = 0` zero-inits.
    pub fn new(
        cin: usize,
        cout: usize,
        k: [usize; 3],
        s: [usize; 3],
        gain: f32,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = cin * k[0] * k[1] * k[2];
        let std = gain * (2.0 / fan_in as f32).sqrt();
        let w = if std > 0.0 {
            let dist = Normal::new(0.0f32, std).unwrap();
            Array2::from_shape_simple_fn((cout, fan_in), || dist.sample(rng))
        } else {
            Array2::zeros((cout, fan_in))
        };
        Conv {
            w,
            b: Array1::zeros(cout),
            cin,
            cout,
            k,
            s,
            p: [k[0] / 2, k[1] / 2, k[2] / 2],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Conv {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
            ..self.clone()
        }
    }

    pub fn out_dims(&self, d: [usize; 4]) -> [usize; 4] {
        [
            self.cout,
            out_len(d[1], self.k[0], self.s[0], self.p[0]),
            out_len(d[2], self.k[1], self.s[1], self.p[1]),
            out_len(d[3], self.k[2], self.s[2], self.p[2]),
        ]
    }

    fn im2col(&self, x: &Array4<f32>) -> Array2<f32> {
        let (c, t, h, w) = x.dim();
        let [_, to, ho, wo] = self.out_dims([c, t, h, w]);
        let [kt, kh, kw] = self.k;
        let [st, sh, sw] = self.s;
        let [pt, ph, pw] = self.p;
        let xs = x.as_slice().expect("standard layout");
        let cols_n = to * ho * wo;
        let mut cols = vec![0.0f32; c * kt * kh * kw * cols_n];
        let mut row = 0;
        for ci in 0..c {
            for a in 0..kt {
                for i in 0..kh {
                    for j in 0..kw {
                        let dst = &mut cols[row * cols_n..(row + 1) * cols_n];
                        for ot in 0..to {
                            let ti = (ot * st + a) as isize - pt as isize;
                            if ti < 0 || ti >= t as isize {
                                continue;
                            }
                            for oh in 0..ho {
                                let hi = (oh * sh + i) as isize - ph as isize;
                                if hi < 0 || hi >= h as isize {
                                    continue;
                                }
                                let base = ((ci * t + ti as usize) * h + hi as usize) * w;
                                let drow = (ot * ho + oh) * wo;
                                for ow in 0..wo {
                                    let wi = (ow * sw + j) as isize - pw as isize;
                                    if wi >= 0 && wi < w as isize {
                                        dst[drow + ow] = xs[base + wi as usize];
                                    }
                                }
                            }
                        }
                        row += 1;
                    }
                }
            }
        }
        Array2::from_shape_vec((c * kt * kh * kw, cols_n), cols).unwrap()
    }

    fn col2im(&self, cols: &Array2<f32>, d: [usize; 4]) -> Array4<f32> {
        let [c, t, h, w] = d;
        let [_, to, ho, wo] = self.out_dims(d);
        let [kt, kh, kw] = self.k;
        let [st, sh, sw] = self.s;
        let [pt, ph, pw] = self.p;
        let cols = cols.as_standard_layout();
        let cs = cols.as_slice().unwrap();
        let cols_n = to * ho * wo;
        let mut x = vec![0.0f32; c * t * h * w];
        let mut row = 0;
        for ci in 0..c {
            for a in 0..kt {
                for i in 0..kh {
                    for j in 0..kw {
                        let src = &cs[row * cols_n..(row + 1) * cols_n];
                        for ot in 0..to {
                            let ti = (ot * st + a) as isize - pt as isize;
                            if ti < 0 || ti >= t as isize {
                                continue;
                            }
                            for oh in 0..ho {
                                let hi = (oh * sh + i) as isize - ph as isize;
                                if hi < 0 || hi >= h as isize {
                                    continue;
                                }
                                let base = ((ci * t + ti as usize) * h + hi as usize) * w;
                                let srow = (ot * ho + oh) * wo;
                                for ow in 0..wo {
                                    let wi = (ow * sw + j) as isize - pw as isize;
                                    if wi >= 0 && wi < w as isize {
                                        x[base + wi as usize] += src[srow + ow];
                                    }
                                }
                            }
                        }
                        row += 1;
                    }
                }
            }
        }
        Array4::from_shape_vec((c, t, h, w), x).unwrap()
    }

    pub fn forward(&self, x: &Array4<f32>) -> (Array4<f32>, ConvCache) {
        let d = x.dim();
        let d = [d.0, d.1, d.2, d.3];
        let od = self.out_dims(d);
        let cols = self.im2col(x);
        let mut y = self.w.dot(&cols);
        y += &self.b.view().insert_axis(Axis(1));
        let y = y.into_shape_with_order((od[0], od[1], od[2], od[3])).unwrap();
        (y, ConvCache { cols, in_dims: d })
    }

    /// Accumulates parameter gradients into `g` and returns the input gradient.
    pub fn backward(&self, cache: &ConvCache, dy: &Array4<f32>, g: &mut Conv) -> Array4<f32> {
        let p = dy.len() / self.cout;
        let dy2 = dy
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((self.cout, p))
            .unwrap();
        g.w += &dy2.dot(&cache.cols.t());
        g.b += &dy2.sum_axis(Axis(1));
        let dcols = self.w.t().dot(&dy2);
        self.col2im(&dcols, cache.in_dims)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Linear {
    pub w: Array2<f32>,
    pub b: Array1<f32>,
}

impl Linear {
    pub fn new(input: usize, output: usize, gain: f32, rng: &mut impl Rng) -> Self {
        let dist = Normal::new(0.0f32, gain * (2.0 / input as f32).sqrt()).unwrap();
        Linear {
            w: Array2::from_shape_simple_fn((output, input), || dist.sample(rng)),
            b: Array1::zeros(output),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Linear {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }

    pub fn forward(&self, x: &Array1<f32>) -> Array1<f32> {
        self.w.dot(x) + &self.b
    }

    pub fn backward(&self, x: &Array1<f32>, dy: &Array1<f32>, g: &mut Linear) -> Array1<f32> {
        let outer = dy
            .view()
            .insert_axis(Axis(1))
            .dot(&x.view().insert_axis(Axis(0)));
        g.w += &outer;
        g.b += dy;
        self.w.t().dot(dy)
    }
}

pub(crate) fn relu4(mut x: Array4<f32>) -> Array4<f32> {
    x.mapv_inplace(|v| v.max(0.0));
    x
}

/// Zeroes `dy` wherever the activation output was not positive.
pub(crate) fn relu4_back(out: &Array4<f32>, mut dy: Array4<f32>) -> Array4<f32> {
    ndarray::Zip::from(&mut dy).and(out).for_each(|d, &o| {
        if o <= 0.0 {
            *d = 0.0
        }
    });
    dy
}
