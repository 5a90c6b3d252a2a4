//! Dueling Q-network with weight-normalized layers and factorized noisy
//! layers in the value/advantage branches.
//!
//! Layer order: conv stack (optional), dense trunk, then the split layer
//! (advantage hidden, value hidden) and the two heads. The split layer and
//! the heads are the noisy ones. Every weight matrix is stored as a
//! direction `v` plus one norm per output row, W_i = g_i v_i / |v_i|.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::DqnError;
use crate::tensor::{ParamSet, Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel: usize,
    pub stride: usize,
    pub filters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Dense,
    Conv,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    /// Flat input width (channels × length for the conv variant).
    pub input: usize,
    /// Input channels of the conv stack; the length is `input / channels`.
    pub channels: usize,
    pub conv: Vec<ConvSpec>,
    pub hidden: Vec<usize>,
    pub advantage_hidden: usize,
    pub value_hidden: usize,
    pub actions: usize,
}

impl NetworkSpec {
    /// 512 → 256 → (256 advantage, 128 value) → (21, 1).
    pub fn paper_dense(input: usize) -> Self {
        Self {
            input,
            channels: 1,
            conv: Vec::new(),
            hidden: vec![512, 256],
            advantage_hidden: 256,
            value_hidden: 128,
            actions: 21,
        }
    }

    /// Three 1-D convolutions (13/5, 11/4, 9/4 with 32, 64, 64 filters),
    /// then 256 → (256, 128) → (21, 1).
    pub fn paper_conv(channels: usize, length: usize) -> Self {
        Self {
            input: channels * length,
            channels,
            conv: vec![
                ConvSpec { kernel: 13, stride: 5, filters: 32 },
                ConvSpec { kernel: 11, stride: 4, filters: 64 },
                ConvSpec { kernel: 9, stride: 4, filters: 64 },
            ],
            hidden: vec![256],
            advantage_hidden: 256,
            value_hidden: 128,
            actions: 21,
        }
    }

    /// A small dense network for tests and smoke runs.
    pub fn small(input: usize, hidden: &[usize], branch: usize, actions: usize) -> Self {
        Self {
            input,
            channels: 1,
            conv: Vec::new(),
            hidden: hidden.to_vec(),
            advantage_hidden: branch,
            value_hidden: branch,
            actions,
        }
    }

    pub fn variant(&self) -> Variant {
        if self.conv.is_empty() {
            Variant::Dense
        } else {
            Variant::Conv
        }
    }

    /// Sequence lengths after each conv layer, or an error if a kernel does
    /// not fit.
    pub fn conv_lengths(&self) -> Result<Vec<usize>, DqnError> {
        if self.channels == 0 || self.input % self.channels != 0 {
            return Err(DqnError::Config(format!(
                "input width {} not divisible by {} channels",
                self.input, self.channels
            )));
        }
        let mut len = self.input / self.channels;
        let mut out = vec![len];
        for c in &self.conv {
            if c.kernel > len || c.stride == 0 {
                return Err(DqnError::Config(format!("kernel {} does not fit length {len}", c.kernel)));
            }
            len = (len - c.kernel) / c.stride + 1;
            out.push(len);
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), DqnError> {
        if self.actions < 1 || self.input == 0 || self.advantage_hidden == 0 || self.value_hidden == 0 {
            return Err(DqnError::Config("network widths must be positive".into()));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(DqnError::Config("hidden widths must be positive".into()));
        }
        self.conv_lengths().map(|_| ())
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Dense,
    Conv { channels: usize, length: usize, kernel: usize, stride: usize, out_len: usize },
}

/// One weighted layer. `rows` × `cols` is the shape of its (normalized)
/// weight matrix; for a conv layer a row is one filter over channels × kernel.
#[derive(Debug, Clone)]
struct Layer {
    kind: Kind,
    rows: usize,
    cols: usize,
    v: usize,
    g: usize,
    b: usize,
    /// Slots of σ_w, σ_b and the index into the noise draw.
    noisy: Option<(usize, usize, usize)>,
}

impl Layer {
    fn in_width(&self) -> usize {
        match self.kind {
            Kind::Dense => self.cols,
            Kind::Conv { channels, length, .. } => channels * length,
        }
    }
}

/// Factorized noise for the noisy layers of one network: per layer the
/// transformed input and output factors f(ε) = sign(ε)√|ε|.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw<T> {
    pub factors: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Real> NoiseDraw<T> {
    pub fn is_zero(&self) -> bool {
        self.factors.iter().all(|(a, b)| a.iter().chain(b).all(|v| v.is_zero()))
    }
}

fn signed_sqrt<T: Real>(x: f64) -> T {
    T::of(x.signum() * x.abs().sqrt())
}

/// Affine map applied to raw observations: (x − shift) · scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer<T> {
    pub shift: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Real> Normalizer<T> {
    pub fn identity(n: usize) -> Self {
        Self {
            shift: vec![T::zero(); n],
            scale: vec![T::one(); n],
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(&v, (&s, &k))| (v - s) * k)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct QNetwork<T> {
    spec: NetworkSpec,
    params: ParamSet<T>,
    layers: Vec<Layer>,
    pub normalizer: Normalizer<T>,
}

/// Activations recorded by a forward pass; needed for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    /// chain[0] is the normalized input, chain[i + 1] the ReLU output of trunk layer i.
    chain: Vec<Vec<T>>,
    adv_hidden: Vec<T>,
    value_hidden: Vec<T>,
    noise_group: usize,
}

/// Gradients with respect to the effective weights, accumulated over a
/// batch before being pulled back through the weight normalization.
#[derive(Debug, Clone)]
pub struct GradAccumulator<T> {
    dw: Vec<Vec<T>>,
    db: Vec<Vec<T>>,
    dsw: Vec<Vec<T>>,
    dsb: Vec<Vec<T>>,
}

/// A network with its effective weights computed once, for repeated
/// forward passes under fixed parameters.
#[derive(Debug, Clone)]
pub struct Frozen<'a, T> {
    net: &'a QNetwork<T>,
    weights: Vec<Vec<T>>,
}

impl<T: Real> QNetwork<T> {
    /// Random initialization: directions and biases uniform in ±1/√fan_in,
    /// norms equal to the initial row norms, noise scales 0.5/√fan_in.
    pub fn new<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self, DqnError> {
        spec.validate()?;
        let lengths = spec.conv_lengths()?;
        let mut params = ParamSet::new();
        let mut layers = Vec::new();
        let mut channels = spec.channels;
        let mut width = spec.input;

        let add = |params: &mut ParamSet<T>, name: String, kind: Kind, rows: usize, cols: usize, noise_index: Option<usize>, rng: &mut R| {
            let bound = 1.0 / (cols as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            let mut v = Tensor::zeros(format!("{name}.v"), &[rows, cols]);
            for x in &mut v.data {
                *x = T::of(dist.sample(rng));
            }
            let mut g = Tensor::zeros(format!("{name}.g"), &[rows]);
            for (i, gi) in g.data.iter_mut().enumerate() {
                *gi = v.data[i * cols..(i + 1) * cols].iter().map(|&a| a * a).sum::<T>().sqrt();
            }
            let mut b = Tensor::zeros(format!("{name}.b"), &[rows]);
            for x in &mut b.data {
                *x = T::of(dist.sample(rng));
            }
            let (v, g, b) = (params.push(v), params.push(g), params.push(b));
            let noisy = noise_index.map(|slot| {
                let mut sw = Tensor::zeros(format!("{name}.sigma_w"), &[rows, cols]);
                sw.data.iter_mut().for_each(|x| *x = T::of(0.5 * bound));
                let mut sb = Tensor::zeros(format!("{name}.sigma_b"), &[rows]);
                sb.data.iter_mut().for_each(|x| *x = T::of(0.5 * bound));
                (params.push(sw), params.push(sb), slot)
            });
            Layer { kind, rows, cols, v, g, b, noisy }
        };

        for (i, c) in spec.conv.iter().enumerate() {
            let kind = Kind::Conv {
                channels,
                length: lengths[i],
                kernel: c.kernel,
                stride: c.stride,
                out_len: lengths[i + 1],
            };
            layers.push(add(&mut params, format!("conv{i}"), kind, c.filters, channels * c.kernel, None, rng));
            channels = c.filters;
            width = c.filters * lengths[i + 1];
        }
        for (i, &h) in spec.hidden.iter().enumerate() {
            layers.push(add(&mut params, format!("fc{i}"), Kind::Dense, h, width, None, rng));
            width = h;
        }
        layers.push(add(&mut params, "adv_hidden".into(), Kind::Dense, spec.advantage_hidden, width, Some(0), rng));
        layers.push(add(&mut params, "value_hidden".into(), Kind::Dense, spec.value_hidden, width, Some(1), rng));
        layers.push(add(&mut params, "adv_head".into(), Kind::Dense, spec.actions, spec.advantage_hidden, Some(2), rng));
        layers.push(add(&mut params, "value_head".into(), Kind::Dense, 1, spec.value_hidden, Some(3), rng));

        Ok(Self {
            normalizer: Normalizer::identity(spec.input),
            spec,
            params,
            layers,
        })
    }

    /// Rebuilds a network around given parameters (checkpoint loading).
    pub fn from_params(spec: NetworkSpec, params: ParamSet<T>, normalizer: Normalizer<T>) -> Result<Self, DqnError> {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let template = Self::new(spec, &mut rng)?;
        if template.params.tensors.len() != params.tensors.len() {
            return Err(DqnError::Format(format!(
                "expected {} parameter tensors, found {}",
                template.params.tensors.len(),
                params.tensors.len()
            )));
        }
        for (a, b) in template.params.tensors.iter().zip(&params.tensors) {
            if a.name != b.name || a.shape != b.shape || b.data.len() != a.data.len() {
                return Err(DqnError::Format(format!("tensor {} does not match {}{:?}", b.name, a.name, a.shape)));
            }
        }
        if normalizer.shift.len() != template.spec.input || normalizer.scale.len() != template.spec.input {
            return Err(DqnError::Shape {
                expected: template.spec.input,
                got: normalizer.shift.len(),
            });
        }
        Ok(Self {
            params,
            normalizer,
            ..template
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn actions(&self) -> usize {
        self.spec.actions
    }

    fn noisy_layers(&self) -> impl Iterator<Item = &Layer> {
        self.layers.iter().filter(|l| l.noisy.is_some())
    }

    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> NoiseDraw<T> {
        let mut draw = |n: usize| -> Vec<T> {
            (0..n)
                .map(|_| signed_sqrt::<T>(StandardNormal.sample(&mut *rng)))
                .collect()
        };
        NoiseDraw {
            factors: self.noisy_layers().map(|l| (draw(l.cols), draw(l.rows))).collect(),
        }
    }

    pub fn zero_noise(&self) -> NoiseDraw<T> {
        NoiseDraw {
            factors: self
                .noisy_layers()
                .map(|l| (vec![T::zero(); l.cols], vec![T::zero(); l.rows]))
                .collect(),
        }
    }

    /// Sets every σ tensor to zero, making the network deterministic.
    pub fn clear_noise_scales(&mut self) {
        for l in &self.layers {
            if let Some((sw, sb, _)) = l.noisy {
                self.params.tensors[sw].data.iter_mut().for_each(|x| *x = T::zero());
                self.params.tensors[sb].data.iter_mut().for_each(|x| *x = T::zero());
            }
        }
    }

    pub fn freeze(&self) -> Frozen<'_, T> {
        let weights = self
            .layers
            .iter()
            .map(|l| {
                let v = &self.params.tensors[l.v].data;
                let g = &self.params.tensors[l.g].data;
                let mut w = v.clone();
                for i in 0..l.rows {
                    let row = &mut w[i * l.cols..(i + 1) * l.cols];
                    let n = row.iter().map(|&a| a * a).sum::<T>().sqrt();
                    let s = if n > T::zero() { g[i] / n } else { T::zero() };
                    row.iter_mut().for_each(|a| *a = *a * s);
                }
                w
            })
            .collect();
        Frozen { net: self, weights }
    }

    /// Q-values of one observation.
    pub fn q_values(&self, obs: &[T], noise: &NoiseDraw<T>) -> Result<Vec<T>, DqnError> {
        self.freeze().q_values(obs, noise)
    }

    pub fn accumulator(&self) -> GradAccumulator<T> {
        let z = |n: usize| vec![T::zero(); n];
        GradAccumulator {
            dw: self.layers.iter().map(|l| z(l.rows * l.cols)).collect(),
            db: self.layers.iter().map(|l| z(l.rows)).collect(),
            dsw: self
                .layers
                .iter()
                .map(|l| if l.noisy.is_some() { z(l.rows * l.cols) } else { Vec::new() })
                .collect(),
            dsb: self
                .layers
                .iter()
                .map(|l| if l.noisy.is_some() { z(l.rows) } else { Vec::new() })
                .collect(),
        }
    }

    /// Pulls effective-weight gradients back to (v, g, b, σ) parameters.
    pub fn parameter_gradients(&self, acc: &GradAccumulator<T>) -> ParamSet<T> {
        let mut grads = self.params.zeros_like();
        for (li, l) in self.layers.iter().enumerate() {
            let v = &self.params.tensors[l.v].data;
            let g = &self.params.tensors[l.g].data;
            let dw = &acc.dw[li];
            for i in 0..l.rows {
                let vr = &v[i * l.cols..(i + 1) * l.cols];
                let dr = &dw[i * l.cols..(i + 1) * l.cols];
                let n = vr.iter().map(|&a| a * a).sum::<T>().sqrt();
                if n <= T::zero() {
                    continue;
                }
                let dg = vr.iter().zip(dr).map(|(&a, &d)| a * d).sum::<T>() / n;
                grads.tensors[l.g].data[i] = dg;
                let s = g[i] / n;
                let out = &mut grads.tensors[l.v].data[i * l.cols..(i + 1) * l.cols];
                for j in 0..l.cols {
                    out[j] = s * (dr[j] - dg * vr[j] / n);
                }
            }
            grads.tensors[l.b].data.copy_from_slice(&acc.db[li]);
            if let Some((sw, sb, _)) = l.noisy {
                grads.tensors[sw].data.copy_from_slice(&acc.dsw[li]);
                grads.tensors[sb].data.copy_from_slice(&acc.dsb[li]);
            }
        }
        grads
    }
}

fn relu_in_place<T: Real>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

impl<T: Real> Frozen<'_, T> {
    pub fn network(&self) -> &QNetwork<T> {
        self.net
    }

    pub fn q_values(&self, obs: &[T], noise: &NoiseDraw<T>) -> Result<Vec<T>, DqnError> {
        self.forward(obs, noise, 0).map(|(q, _)| q)
    }

    /// Greedy action and its Q-value; ties go to the lowest index.
    pub fn greedy(&self, obs: &[T], noise: &NoiseDraw<T>) -> Result<(usize, T), DqnError> {
        let q = self.q_values(obs, noise)?;
        Ok(argmax(&q))
    }

    fn layer_forward(&self, li: usize, x: &[T], noise: Option<&(Vec<T>, Vec<T>)>) -> Vec<T> {
        let l = &self.net.layers[li];
        let w = &self.weights[li];
        let b = &self.net.params.tensors[l.b].data;
        match l.kind {
            Kind::Dense => {
                let mut y: Vec<T> = (0..l.rows)
                    .map(|i| {
                        let row = &w[i * l.cols..(i + 1) * l.cols];
                        row.iter().zip(x).map(|(&a, &c)| a * c).sum::<T>() + b[i]
                    })
                    .collect();
                if let (Some((sw, sb, _)), Some((fin, fout))) = (l.noisy, noise) {
                    let sw = &self.net.params.tensors[sw].data;
                    let sb = &self.net.params.tensors[sb].data;
                    let xf: Vec<T> = x.iter().zip(fin).map(|(&a, &f)| a * f).collect();
                    for i in 0..l.rows {
                        if fout[i].is_zero() {
                            continue;
                        }
                        let row = &sw[i * l.cols..(i + 1) * l.cols];
                        let s = row.iter().zip(&xf).map(|(&a, &c)| a * c).sum::<T>();
                        y[i] += fout[i] * (s + sb[i]);
                    }
                }
                y
            }
            Kind::Conv {
                channels,
                length,
                kernel,
                stride,
                out_len,
            } => {
                let mut y = vec![T::zero(); l.rows * out_len];
                for f in 0..l.rows {
                    let wf = &w[f * l.cols..(f + 1) * l.cols];
                    for o in 0..out_len {
                        let mut acc = b[f];
                        for c in 0..channels {
                            let xs = &x[c * length + o * stride..c * length + o * stride + kernel];
                            let ws = &wf[c * kernel..(c + 1) * kernel];
                            acc += ws.iter().zip(xs).map(|(&a, &v)| a * v).sum::<T>();
                        }
                        y[f * out_len + o] = acc;
                    }
                }
                y
            }
        }
    }

    /// Backpropagates `dy` through layer `li` given its input `x`,
    /// accumulating weight gradients; returns dL/dx when `want_dx`.
    fn layer_backward(
        &self,
        li: usize,
        x: &[T],
        dy: &[T],
        noise: Option<&(Vec<T>, Vec<T>)>,
        acc: &mut GradAccumulator<T>,
        want_dx: bool,
    ) -> Vec<T> {
        let l = &self.net.layers[li];
        let w = &self.weights[li];
        let mut dx = if want_dx { vec![T::zero(); l.in_width()] } else { Vec::new() };
        match l.kind {
            Kind::Dense => {
                let dw = &mut acc.dw[li];
                for i in 0..l.rows {
                    let d = dy[i];
                    if d.is_zero() {
                        continue;
                    }
                    acc.db[li][i] += d;
                    let drow = &mut dw[i * l.cols..(i + 1) * l.cols];
                    for (a, &c) in drow.iter_mut().zip(x) {
                        *a += d * c;
                    }
                    if want_dx {
                        let row = &w[i * l.cols..(i + 1) * l.cols];
                        for (a, &c) in dx.iter_mut().zip(row) {
                            *a += d * c;
                        }
                    }
                }
                if let (Some((sw, _, _)), Some((fin, fout))) = (l.noisy, noise) {
                    let sw = &self.net.params.tensors[sw].data;
                    let xf: Vec<T> = x.iter().zip(fin).map(|(&a, &f)| a * f).collect();
                    for i in 0..l.rows {
                        let d = dy[i] * fout[i];
                        if d.is_zero() {
                            continue;
                        }
                        acc.dsb[li][i] += d;
                        let drow = &mut acc.dsw[li][i * l.cols..(i + 1) * l.cols];
                        for (a, &c) in drow.iter_mut().zip(&xf) {
                            *a += d * c;
                        }
                        if want_dx {
                            let row = &sw[i * l.cols..(i + 1) * l.cols];
                            for j in 0..l.cols {
                                dx[j] += d * row[j] * fin[j];
                            }
                        }
                    }
                }
            }
            Kind::Conv {
                channels,
                length,
                kernel,
                stride,
                out_len,
            } => {
                for f in 0..l.rows {
                    let wf = &w[f * l.cols..(f + 1) * l.cols];
                    for o in 0..out_len {
                        let d = dy[f * out_len + o];
                        if d.is_zero() {
                            continue;
                        }
                        acc.db[li][f] += d;
                        for c in 0..channels {
                            let start = c * length + o * stride;
                            let dws = &mut acc.dw[li][f * l.cols + c * kernel..f * l.cols + (c + 1) * kernel];
                            for (a, &v) in dws.iter_mut().zip(&x[start..start + kernel]) {
                                *a += d * v;
                            }
                            if want_dx {
                                let ws = &wf[c * kernel..(c + 1) * kernel];
                                for (a, &v) in dx[start..start + kernel].iter_mut().zip(ws) {
                                    *a += d * v;
                                }
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    /// Forward pass recording activations. `noise_group` is stored in the
    /// trace so the backward pass can reuse the same draw.
    pub fn forward(&self, obs: &[T], noise: &NoiseDraw<T>, noise_group: usize) -> Result<(Vec<T>, Trace<T>), DqnError> {
        let net = self.net;
        if obs.len() != net.spec.input {
            return Err(DqnError::Shape {
                expected: net.spec.input,
                got: obs.len(),
            });
        }
        let n_trunk = net.layers.len() - 4;
        let mut chain = Vec::with_capacity(n_trunk + 1);
        chain.push(net.normalizer.apply(obs));
        for li in 0..n_trunk {
            let mut y = self.layer_forward(li, chain.last().unwrap(), None);
            relu_in_place(&mut y);
            chain.push(y);
        }
        let top = chain.last().unwrap();
        let nz = |k: usize| noise.factors.get(k);
        let mut ah = self.layer_forward(n_trunk, top, nz(0));
        relu_in_place(&mut ah);
        let mut vh = self.layer_forward(n_trunk + 1, top, nz(1));
        relu_in_place(&mut vh);
        let adv = self.layer_forward(n_trunk + 2, &ah, nz(2));
        let value = self.layer_forward(n_trunk + 3, &vh, nz(3))[0];
        let mean = adv.iter().copied().sum::<T>() / T::of(adv.len() as f64);
        let q = adv.iter().map(|&a| value + a - mean).collect();
        Ok((
            q,
            Trace {
                chain,
                adv_hidden: ah,
                value_hidden: vh,
                noise_group,
            },
        ))
    }

    /// Accumulates the gradient of Σ_a dq[a]·Q(s, a) for one traced sample.
    pub fn backward(&self, trace: &Trace<T>, dq: &[T], noise: &NoiseDraw<T>, acc: &mut GradAccumulator<T>) {
        let n_trunk = self.net.layers.len() - 4;
        let nz = |k: usize| noise.factors.get(k);
        let total: T = dq.iter().copied().sum();
        let mean = total / T::of(dq.len() as f64);
        let d_adv: Vec<T> = dq.iter().map(|&d| d - mean).collect();
        let d_value = [total];

        let mut d_ah = self.layer_backward(n_trunk + 2, &trace.adv_hidden, &d_adv, nz(2), acc, true);
        let mut d_vh = self.layer_backward(n_trunk + 3, &trace.value_hidden, &d_value, nz(3), acc, true);
        mask(&mut d_ah, &trace.adv_hidden);
        mask(&mut d_vh, &trace.value_hidden);
        let top = trace.chain.last().unwrap();
        let want = n_trunk > 0;
        let mut d_top = self.layer_backward(n_trunk, top, &d_ah, nz(0), acc, want);
        let d2 = self.layer_backward(n_trunk + 1, top, &d_vh, nz(1), acc, want);
        for (a, b) in d_top.iter_mut().zip(d2) {
            *a += b;
        }
        for li in (0..n_trunk).rev() {
            mask(&mut d_top, &trace.chain[li + 1]);
            d_top = self.layer_backward(li, &trace.chain[li], &d_top, None, acc, li > 0);
        }
    }
}

impl<T> Trace<T> {
    pub fn noise_group(&self) -> usize {
        self.noise_group
    }
}

fn mask<T: Real>(d: &mut [T], out: &[T]) {
    for (a, &o) in d.iter_mut().zip(out) {
        if o <= T::zero() {
            *a = T::zero();
        }
    }
}

/// Index and value of the maximum; ties go to the lowest index.
pub fn argmax<T: Real>(q: &[T]) -> (usize, T) {
    let mut best = (0, q[0]);
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}
