use ndarray::{Array1, Array2, Array4, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{relu4, relu4_back, Conv, ConvCache, Linear};
use crate::frame::ClipTensor;
use crate::{Error, Result};

/// One spatio-temporal convolution, `kernel` and `stride` as `[t, h, w]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StLayer {
    pub out_channels: usize,
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
}

/// Residual refine network applied to every frame. Stage `i` has
/// `base_width * 2^i` channels and halves the resolution when `i > 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineSpec {
    pub base_width: usize,
    pub blocks: Vec<usize>,
}

impl Default for RefineSpec {
    fn default() -> Self {
        RefineSpec {
            base_width: 64,
            blocks: vec![2, 2, 2, 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub struct STNetConfig {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub st_stage: Vec<StLayer>,
    pub refine: RefineSpec,
    /// Temporal kernel of the fusion convolution.
    pub fusion_kernel: usize,
    /// Length of the pooled clip feature.
    pub feature_dim: usize,
    pub mlp_hidden: Vec<usize>,
    pub num_classes: usize,
}

impl Default for STNetConfig {
    fn default() -> Self {
        STNetConfig {
            frames: 29,
            height: 88,
            width: 88,
            channels: 1,
            st_stage: vec![
                StLayer {
                    out_channels: 64,
                    kernel: [5, 7, 7],
                    stride: [1, 2, 2],
                },
                StLayer {
                    out_channels: 64,
                    kernel: [3, 3, 3],
                    stride: [1, 1, 1],
                },
            ],
            refine: RefineSpec::default(),
            fusion_kernel: 3,
            feature_dim: 256,
            mlp_hidden: vec![256],
            num_classes: 300,
        }
    }
}

impl STNetConfig {
    /// A narrow network for small synthetic clips.
    pub fn small(frames: usize, height: usize, width: usize, channels: usize, classes: usize) -> Self {
        STNetConfig {
            frames,
            height,
            width,
            channels,
            st_stage: vec![
                StLayer {
                    out_channels: 8,
                    kernel: [5, 3, 3],
                    stride: [1, 1, 1],
                },
                StLayer {
                    out_channels: 8,
                    kernel: [3, 3, 3],
                    stride: [1, 2, 2],
                },
            ],
            refine: RefineSpec {
                base_width: 8,
                blocks: vec![2, 2, 2, 2],
            },
            fusion_kernel: 3,
            feature_dim: 32,
            mlp_hidden: vec![32],
            num_classes: classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.frames < 2 {
            return bad(format!("need at least 2 frames, got {}", self.frames));
        }
        if self.feature_dim < 2 {
            return bad(format!("feature_dim must be >= 2, got {}", self.feature_dim));
        }
        if self.num_classes < 2 {
            return bad(format!("num_classes must be >= 2, got {}", self.num_classes));
        }
        if self.height == 0 || self.width == 0 || !(self.channels == 1 || self.channels == 3) {
            return bad("input geometry must be non-empty with 1 or 3 channels".into());
        }
        if self.st_stage.is_empty() {
            return bad("spatio-temporal stage needs at least one layer".into());
        }
        for l in &self.st_stage {
            if l.out_channels == 0 || l.kernel.iter().any(|k| k % 2 == 0) || l.stride.contains(&0) {
                return bad(format!("invalid spatio-temporal layer {l:?}"));
            }
            if l.stride[0] != 1 {
                return bad("temporal stride must be 1 so every frame keeps a feature".into());
            }
        }
        if self.refine.base_width == 0 || self.refine.blocks.is_empty() || self.refine.blocks.contains(&0) {
            return bad("refine stage needs a width and non-empty stages".into());
        }
        if self.fusion_kernel.is_multiple_of(2) {
            return bad("fusion kernel must be odd".into());
        }
        if self.mlp_hidden.contains(&0) {
            return bad("mlp hidden sizes must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Block {
    pub c1: Conv,
    pub c2: Conv,
    pub proj: Option<Conv>,
}

struct BlockCache {
    c1: ConvCache,
    h1: Array4<f32>,
    c2: ConvCache,
    proj: Option<ConvCache>,
    out: Array4<f32>,
}

impl Block {
    fn forward(&self, x: &Array4<f32>) -> (Array4<f32>, BlockCache) {
        let (h1, c1) = self.c1.forward(x);
        let h1 = relu4(h1);
        let (h2, c2) = self.c2.forward(&h1);
        let (sc, proj) = match &self.proj {
            Some(p) => {
                let (s, c) = p.forward(x);
                (s, Some(c))
            }
            None => (x.clone(), None),
        };
        let out = relu4(h2 + sc);
        (
            out.clone(),
            BlockCache {
                c1,
                h1,
                c2,
                proj,
                out,
            },
        )
    }

    fn backward(&self, cache: &BlockCache, dy: Array4<f32>, g: &mut Block) -> Array4<f32> {
        let dsum = relu4_back(&cache.out, dy);
        let dh1 = self.c2.backward(&cache.c2, &dsum, &mut g.c2);
        let dh1 = relu4_back(&cache.h1, dh1);
        let mut dx = self.c1.backward(&cache.c1, &dh1, &mut g.c1);
        match (&self.proj, &cache.proj) {
            (Some(p), Some(pc)) => dx += &p.backward(pc, &dsum, g.proj.as_mut().unwrap()),
            _ => dx += &dsum,
        }
        dx
    }

    fn zeros_like(&self) -> Block {
        Block {
            c1: self.c1.zeros_like(),
            c2: self.c2.zeros_like(),
            proj: self.proj.as_ref().map(Conv::zeros_like),
        }
    }
}

/// The spatio-temporal network: 3D convolutions, a residual refine stage
/// per frame, spatial pooling, a temporal fusion convolution, temporal
/// pooling to the clip feature `z'`, then an MLP classifier. The angular
/// margin head's class directions live alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct StNet {
    pub(crate) config: STNetConfig,
    pub(crate) st: Vec<Conv>,
    pub(crate) blocks: Vec<Block>,
    pub(crate) fusion: Conv,
    pub(crate) mlp: Vec<Linear>,
    /// `feature_dim x num_classes`.
    pub(crate) arc_w: Array2<f32>,
}

/// Per-clip activations kept for the backward pass.
pub(crate) struct Trace {
    st: Vec<(ConvCache, Array4<f32>)>,
    blocks: Vec<BlockCache>,
    refined_dims: [usize; 4],
    fusion: ConvCache,
    mlp_inputs: Vec<Array1<f32>>,
    pub feature: Array1<f32>,
    pub logits: Array1<f32>,
}

impl StNet {
    pub fn new(config: STNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut st = Vec::new();
        let mut cin = config.channels;
        for l in &config.st_stage {
            st.push(Conv::new(cin, l.out_channels, l.kernel, l.stride, 1.0, &mut rng));
            cin = l.out_channels;
        }
        // without normalization layers, each residual branch starts as the
        // zero map and its first convolution is damped by the depth
        let depth: usize = config.refine.blocks.iter().sum();
        let damp = (depth as f32).powf(-0.5);
        let mut blocks = Vec::new();
        for (stage, &n) in config.refine.blocks.iter().enumerate() {
            let cout = config.refine.base_width << stage;
            for i in 0..n {
                let stride = if stage > 0 && i == 0 { 2 } else { 1 };
                let c1 = Conv::new(cin, cout, [1, 3, 3], [1, stride, stride], damp, &mut rng);
                let c2 = Conv::new(cout, cout, [1, 3, 3], [1, 1, 1], 0.0, &mut rng);
                let proj = (stride != 1 || cin != cout)
                    .then(|| Conv::new(cin, cout, [1, 1, 1], [1, stride, stride], 1.0, &mut rng));
                blocks.push(Block { c1, c2, proj });
                cin = cout;
            }
        }
        let mut fusion = Conv::new(cin, config.feature_dim, [config.fusion_kernel, 1, 1], [1, 1, 1], 1.0, &mut rng);
        // the fusion output is not followed by an activation
        fusion.w.mapv_inplace(|v| v * std::f32::consts::FRAC_1_SQRT_2);
        let mut mlp = Vec::new();
        let mut din = config.feature_dim;
        for &h in &config.mlp_hidden {
            mlp.push(Linear::new(din, h, 1.0, &mut rng));
            din = h;
        }
        mlp.push(Linear::new(din, config.num_classes, 0.5, &mut rng));
        let arc = Linear::new(config.num_classes, config.feature_dim, 1.0, &mut rng).w;
        Ok(StNet {
            config,
            st,
            blocks,
            fusion,
            mlp,
            arc_w: arc,
        })
    }

    pub fn config(&self) -> &STNetConfig {
        &self.config
    }

    pub(crate) fn zeros_like(&self) -> StNet {
        StNet {
            config: self.config.clone(),
            st: self.st.iter().map(Conv::zeros_like).collect(),
            blocks: self.blocks.iter().map(Block::zeros_like).collect(),
            fusion: self.fusion.zeros_like(),
            mlp: self.mlp.iter().map(Linear::zeros_like).collect(),
            arc_w: Array2::zeros(self.arc_w.raw_dim()),
        }
    }

    /// Every parameter tensor in a fixed order with a stable name.
    pub(crate) fn tensors(&self) -> Vec<(String, Vec<usize>, &[f32])> {
        fn conv<'a>(name: String, c: &'a Conv, out: &mut Vec<(String, Vec<usize>, &'a [f32])>) {
            out.push((format!("{name}.w"), c.w.shape().to_vec(), c.w.as_slice().unwrap()));
            out.push((format!("{name}.b"), c.b.shape().to_vec(), c.b.as_slice().unwrap()));
        }
        let mut out = Vec::new();
        for (i, c) in self.st.iter().enumerate() {
            conv(format!("st.{i}"), c, &mut out);
        }
        for (i, b) in self.blocks.iter().enumerate() {
            conv(format!("refine.{i}.c1"), &b.c1, &mut out);
            conv(format!("refine.{i}.c2"), &b.c2, &mut out);
            if let Some(p) = &b.proj {
                conv(format!("refine.{i}.proj"), p, &mut out);
            }
        }
        conv("fusion".into(), &self.fusion, &mut out);
        for (i, l) in self.mlp.iter().enumerate() {
            out.push((format!("mlp.{i}.w"), l.w.shape().to_vec(), l.w.as_slice().unwrap()));
            out.push((format!("mlp.{i}.b"), l.b.shape().to_vec(), l.b.as_slice().unwrap()));
        }
        out.push(("arc.w".into(), self.arc_w.shape().to_vec(), self.arc_w.as_slice().unwrap()));
        out
    }

    /// Mutable views in the same order as [`StNet::tensors`].
    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [f32]> {
        fn conv<'a>(c: &'a mut Conv, out: &mut Vec<&'a mut [f32]>) {
            let Conv { w, b, .. } = c;
            out.push(w.as_slice_mut().unwrap());
            out.push(b.as_slice_mut().unwrap());
        }
        let mut out = Vec::new();
        for c in self.st.iter_mut() {
            conv(c, &mut out);
        }
        for b in self.blocks.iter_mut() {
            let Block { c1, c2, proj } = b;
            conv(c1, &mut out);
            conv(c2, &mut out);
            if let Some(p) = proj {
                conv(p, &mut out);
            }
        }
        conv(&mut self.fusion, &mut out);
        for l in self.mlp.iter_mut() {
            let Linear { w, b } = l;
            out.push(w.as_slice_mut().unwrap());
            out.push(b.as_slice_mut().unwrap());
        }
        out.push(self.arc_w.as_slice_mut().unwrap());
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.2.len()).sum()
    }

    pub(crate) fn add_assign(&mut self, other: &StNet) {
        let src: Vec<Vec<f32>> = other.tensors().into_iter().map(|t| t.2.to_vec()).collect();
        for (dst, src) in self.tensors_mut().into_iter().zip(src) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
    }

    /// Converts a clip into the `(C, T, H, W)` input layout after checking
    /// it against the configured geometry.
    pub fn clip_input(&self, clip: &ClipTensor) -> Result<Array4<f32>> {
        let c = &self.config;
        let (h, w, ch) = clip.frame_shape();
        if clip.len() != c.frames || h != c.height || w != c.width || ch != c.channels {
            return Err(Error::InvalidInput(format!(
                "clip {} is {}x{}x{}x{}, network expects {}x{}x{}x{}",
                clip.id,
                clip.len(),
                h,
                w,
                ch,
                c.frames,
                c.height,
                c.width,
                c.channels
            )));
        }
        let mut x = Array4::zeros((ch, clip.len(), h, w));
        for (t, f) in clip.frames.iter().enumerate() {
            for y in 0..h {
                for xx in 0..w {
                    for k in 0..ch {
                        x[[k, t, y, xx]] = f.get(xx, y, k);
                    }
                }
            }
        }
        Ok(x)
    }

    pub(crate) fn forward_trace(&self, x: &Array4<f32>) -> Trace {
        let mut h = x.clone();
        let mut st = Vec::with_capacity(self.st.len());
        for conv in &self.st {
            let (y, cache) = conv.forward(&h);
            h = relu4(y);
            st.push((cache, h.clone()));
        }
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, cache) = b.forward(&h);
            h = y;
            blocks.push(cache);
        }
        let (c, t, hh, ww) = h.dim();
        let pooled = h
            .mean_axis(Axis(3))
            .unwrap()
            .mean_axis(Axis(2))
            .unwrap()
            .into_shape_with_order((c, t, 1, 1))
            .unwrap();
        let (fused, fusion) = self.fusion.forward(&pooled);
        let feature = fused
            .into_shape_with_order((self.config.feature_dim, t))
            .unwrap()
            .mean_axis(Axis(1))
            .unwrap();
        let mut a = feature.clone();
        let mut mlp_inputs = Vec::with_capacity(self.mlp.len());
        for (i, l) in self.mlp.iter().enumerate() {
            mlp_inputs.push(a.clone());
            a = l.forward(&a);
            if i + 1 < self.mlp.len() {
                a.mapv_inplace(|v| v.max(0.0));
            }
        }
        Trace {
            st,
            blocks,
            refined_dims: [c, t, hh, ww],
            fusion,
            mlp_inputs,
            feature,
            logits: a,
        }
    }

    /// Backpropagates gradients of the clip feature and of the logits.
    pub(crate) fn backward(
        &self,
        trace: &Trace,
        d_feature: &Array1<f32>,
        d_logits: Option<&Array1<f32>>,
        g: &mut StNet,
    ) {
        let mut dfeat = d_feature.clone();
        if let Some(dl) = d_logits {
            let mut d = dl.clone();
            for i in (0..self.mlp.len()).rev() {
                let x = &trace.mlp_inputs[i];
                d = self.mlp[i].backward(x, &d, &mut g.mlp[i]);
                if i > 0 {
                    // input of layer i is relu output of layer i-1
                    ndarray::Zip::from(&mut d).and(x).for_each(|d, &v| {
                        if v <= 0.0 {
                            *d = 0.0
                        }
                    });
                }
            }
            dfeat += &d;
        }
        let [c, t, hh, ww] = trace.refined_dims;
        let dfused = Array2::from_shape_fn((self.config.feature_dim, t), |(k, _)| dfeat[k] / t as f32)
            .into_shape_with_order((self.config.feature_dim, t, 1, 1))
            .unwrap();
        let dpooled = self.fusion.backward(&trace.fusion, &dfused, &mut g.fusion);
        let scale = 1.0 / (hh * ww) as f32;
        let mut dh = Array4::from_shape_fn((c, t, hh, ww), |(ci, ti, _, _)| dpooled[[ci, ti, 0, 0]] * scale);
        for i in (0..self.blocks.len()).rev() {
            dh = self.blocks[i].backward(&trace.blocks[i], dh, &mut g.blocks[i]);
        }
        for i in (0..self.st.len()).rev() {
            let (cache, out) = &trace.st[i];
            let d = relu4_back(out, dh);
            dh = self.st[i].backward(cache, &d, &mut g.st[i]);
        }
    }

    /// Clip feature `z'` and MLP logits for one clip.
    pub fn forward(&self, clip: &ClipTensor) -> Result<(Array1<f32>, Array1<f32>)> {
        let x = self.clip_input(clip)?;
        let t = self.forward_trace(&x);
        Ok((t.feature, t.logits))
    }

    /// Features `B x C''` and logits `B x V` for a batch. Each clip is
    /// evaluated independently, so its rows do not depend on the batch.
    pub fn forward_batch(&self, clips: &[ClipTensor]) -> Result<(Array2<f32>, Array2<f32>)> {
        use rayon::prelude::*;
        let outs = clips
            .par_iter()
            .map(|c| self.forward(c))
            .collect::<Result<Vec<_>>>()?;
        let mut feats = Array2::zeros((clips.len(), self.config.feature_dim));
        let mut logits = Array2::zeros((clips.len(), self.config.num_classes));
        for (i, (f, l)) in outs.into_iter().enumerate() {
            feats.row_mut(i).assign(&f);
            logits.row_mut(i).assign(&l);
        }
        Ok((feats, logits))
    }

    /// Class directions of the angular margin head as f64.
    pub fn arc_directions(&self) -> Array2<f64> {
        self.arc_w.mapv(|v| v as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Frame;
    use rand::{Rng, SeedableRng};

    fn tiny() -> STNetConfig {
        STNetConfig {
            frames: 3,
            height: 6,
            width: 6,
            channels: 1,
            st_stage: vec![StLayer {
                out_channels: 2,
                kernel: [3, 3, 3],
                stride: [1, 1, 1],
            }],
            refine: RefineSpec {
                base_width: 2,
                blocks: vec![1, 1],
            },
            fusion_kernel: 3,
            feature_dim: 3,
            mlp_hidden: vec![4],
            num_classes: 2,
        }
    }

    fn clip(seed: u64) -> ClipTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames = (0..3)
            .map(|_| Frame::from_fn(6, 6, 1, |_, _, _| rng.random_range(0.0..1.0)))
            .collect();
        ClipTensor::new(format!("c{seed}"), frames, 25.0).unwrap()
    }

    /// Objective `u·feature + v·logits` in f64.
    fn objective(net: &StNet, x: &Array4<f32>, u: &Array1<f32>, v: &Array1<f32>) -> f64 {
        let t = net.forward_trace(x);
        let a: f64 = t.feature.iter().zip(u).map(|(a, b)| *a as f64 * *b as f64).sum();
        let b: f64 = t.logits.iter().zip(v).map(|(a, b)| *a as f64 * *b as f64).sum();
        a + b
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut net = StNet::new(tiny(), 11).unwrap();
        // give the zero-initialized branch convolutions some weight
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for b in net.blocks.iter_mut() {
            b.c2.w.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        // zero biases put dead windows exactly on the ReLU kink
        let names: Vec<String> = net.tensors().into_iter().map(|t| t.0).collect();
        for (name, t) in names.iter().zip(net.tensors_mut()) {
            if name.ends_with(".b") {
                t.iter_mut().for_each(|v| *v = rng.random_range(-0.2..0.2));
            }
        }
        let x = net.clip_input(&clip(1)).unwrap();
        let u = Array1::from(vec![0.3f32, -0.7, 0.2]);
        let v = Array1::from(vec![1.0f32, -0.4]);
        let trace = net.forward_trace(&x);
        let mut g = net.zeros_like();
        net.backward(&trace, &u, Some(&v), &mut g);
        let grads: Vec<Vec<f32>> = g.tensors().into_iter().map(|t| t.2.to_vec()).collect();
        let names: Vec<String> = net.tensors().into_iter().map(|t| t.0).collect();
        // the smallest step suffers f32 rounding, the largest may cross a
        // ReLU kink; one of them has to agree
        let steps = [1e-3f32, 3e-4, 1e-4];
        let mut checked = 0;
        for (k, name) in names.iter().enumerate() {
            if name == "arc.w" {
                continue;
            }
            for idx in [0, grads[k].len() / 2, grads[k].len() - 1] {
                let an = grads[k][idx] as f64;
                let best = steps
                    .iter()
                    .map(|&h| {
                        let mut plus = net.clone();
                        plus.tensors_mut()[k][idx] += h;
                        let mut minus = net.clone();
                        minus.tensors_mut()[k][idx] -= h;
                        let fd = (objective(&plus, &x, &u, &v) - objective(&minus, &x, &u, &v))
                            / (2.0 * h as f64);
                        (fd - an).abs() - 1e-2 * fd.abs().max(an.abs())
                    })
                    .fold(f64::INFINITY, f64::min);
                // 1% relative plus an absolute allowance for f32 rounding
                assert!(best < 3e-4, "{name}[{idx}]: excess error {best}");
                checked += 1;
            }
        }
        assert!(checked > 30);
    }

    #[test]
    fn outputs_do_not_depend_on_batch() {
        let net = StNet::new(tiny(), 3).unwrap();
        let (a, b) = (clip(4), clip(5));
        let (fa, la) = net.forward(&a).unwrap();
        let (feats, logits) = net.forward_batch(&[b.clone(), a.clone(), a.clone()]).unwrap();
        assert_eq!(feats.row(1), fa);
        assert_eq!(logits.row(1), la);
        assert_eq!(feats.row(1), feats.row(2));
        assert_eq!(feats.dim(), (3, 3));
        assert_eq!(logits.dim(), (3, 2));
    }

    #[test]
    fn zero_clip_is_finite() {
        let net = StNet::new(STNetConfig::small(8, 16, 16, 1, 3), 0).unwrap();
        let frames = vec![Frame::filled(16, 16, 1, 0.0); 8];
        let (f, l) = net.forward(&ClipTensor::new("zero", frames, 25.0).unwrap()).unwrap();
        assert!(f.iter().chain(l.iter()).all(|v| v.is_finite()));
    }

    #[test]
    fn shape_mismatch_is_invalid_input() {
        let net = StNet::new(tiny(), 0).unwrap();
        let frames = vec![Frame::filled(6, 6, 1, 0.0); 4];
        let err = net.forward(&ClipTensor::new("long", frames, 25.0).unwrap());
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn config_invariants() {
        let mut c = tiny();
        c.frames = 1;
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.feature_dim = 1;
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.num_classes = 1;
        assert!(c.validate().is_err());
        assert!(STNetConfig::default().validate().is_ok());
    }
}
