//! Convolutional VAE (encoder, reparametrized latent, decoder), ELBO
//! loss, deterministic scoring, and the training loop. The sinc variant
//! prepends the learnable filterbank to the encoder.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use train::{history_csv, train, EarlyStopper, EpochStats, StopDecision, TrainConfig};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::ChannelStats;
use crate::sinc;
use crate::tensor::{Graph, NormAxis, Pad, ParamSet, Real, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plain,
    Sinc,
}

impl Variant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Variant::Plain),
            "sinc" => Ok(Variant::Sinc),
            _ => Err(Error::Config(format!(
                "unknown variant {s:?} (expected plain or sinc)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Sinc => "sinc",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            _ => Err(Error::Config(format!(
                "unknown activation {s:?} (expected relu, tanh, or identity)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

/// Hyperparameters fixing the model's layer stack.
///
/// Encoder: `[sinc filterbank → time layer-norm → activation]` (sinc
/// variant only) → `conv_blocks` × (conv1d k=3 stride 2 same,
/// activation) → flatten → two dense heads. Decoder mirrors it: dense →
/// activation → reshape → blocks of (upsample ×2 → conv1d k=3 same →
/// activation) → linear output conv, cropped to the input length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VaeArchitecture {
    pub variant: Variant,
    /// Sinc filters per input channel (sinc variant; ignored for plain).
    pub filter_count: usize,
    /// Sinc kernel length, odd (sinc variant; ignored for plain).
    pub kernel_length: usize,
    pub activation: Activation,
    pub latent_dim: usize,
    pub conv_blocks: usize,
    /// Channels in every encoder/decoder conv block.
    pub channels: usize,
    pub input_channels: usize,
    pub window_len: usize,
    pub sampling_rate: f64,
}

impl VaeArchitecture {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Config("architecture: latent_dim must be ≥ 1".into()));
        }
        if self.input_channels == 0 || self.window_len == 0 {
            return Err(Error::Config(
                "architecture: input window shape must be non-empty".into(),
            ));
        }
        if self.channels == 0 {
            return Err(Error::Config("architecture: channels must be ≥ 1".into()));
        }
        if !(self.sampling_rate > 0.0) {
            return Err(Error::Config(format!(
                "architecture: sampling_rate must be positive, got {}",
                self.sampling_rate
            )));
        }
        if self.variant == Variant::Sinc {
            if self.filter_count == 0 {
                return Err(Error::Config(
                    "architecture: sinc variant needs filter_count ≥ 1".into(),
                ));
            }
            if self.kernel_length < 3 || self.kernel_length % 2 == 0 {
                return Err(Error::Config(format!(
                    "architecture: sinc kernel length must be odd and ≥ 3, got {}",
                    self.kernel_length
                )));
            }
            if self.kernel_length > self.window_len {
                return Err(Error::Config(format!(
                    "architecture: sinc kernel length {} exceeds window length {}",
                    self.kernel_length, self.window_len
                )));
            }
        }
        Ok(())
    }

    /// Encoder channel count entering the first conv block.
    fn stem_channels(&self) -> usize {
        match self.variant {
            Variant::Plain => self.input_channels,
            Variant::Sinc => self.input_channels * self.filter_count,
        }
    }

    /// Time length after the strided encoder blocks.
    pub fn encoder_time_len(&self) -> usize {
        let mut t = self.window_len;
        for _ in 0..self.conv_blocks {
            t = t.div_ceil(2);
        }
        t
    }

    /// Time length produced by the decoder before cropping; always
    /// ≥ `window_len` because each encoder block rounds up.
    pub fn decoder_time_len(&self) -> usize {
        self.encoder_time_len() << self.conv_blocks
    }

    /// Flattened feature size feeding the latent heads.
    pub fn flat_len(&self) -> usize {
        let ch = if self.conv_blocks == 0 { self.stem_channels() } else { self.channels };
        ch * self.encoder_time_len()
    }

    /// Named parameter shapes in their canonical (creation) order.
    pub fn param_specs(&self) -> Vec<(String, Vec<usize>)> {
        let mut specs = Vec::new();
        if self.variant == Variant::Sinc {
            specs.push(("sinc.f1".to_string(), vec![self.filter_count]));
            specs.push(("sinc.f2".to_string(), vec![self.filter_count]));
        }
        let mut c_in = self.stem_channels();
        for i in 0..self.conv_blocks {
            specs.push((format!("enc.block{i}.w"), vec![self.channels, c_in, 3]));
            specs.push((format!("enc.block{i}.b"), vec![self.channels]));
            c_in = self.channels;
        }
        let flat = self.flat_len();
        specs.push(("enc.mu.w".to_string(), vec![flat, self.latent_dim]));
        specs.push(("enc.mu.b".to_string(), vec![self.latent_dim]));
        specs.push(("enc.logvar.w".to_string(), vec![flat, self.latent_dim]));
        specs.push(("enc.logvar.b".to_string(), vec![self.latent_dim]));
        let dec_ch = if self.conv_blocks == 0 { self.stem_channels() } else { self.channels };
        let dec_flat = dec_ch * self.encoder_time_len();
        specs.push(("dec.fc.w".to_string(), vec![self.latent_dim, dec_flat]));
        specs.push(("dec.fc.b".to_string(), vec![dec_flat]));
        for i in 0..self.conv_blocks {
            specs.push((format!("dec.block{i}.w"), vec![self.channels, self.channels, 3]));
            specs.push((format!("dec.block{i}.b"), vec![self.channels]));
        }
        specs.push(("dec.out.w".to_string(), vec![self.input_channels, dec_ch, 3]));
        specs.push(("dec.out.b".to_string(), vec![self.input_channels]));
        specs
    }
}

/// Seeded parameter initialization: conv/dense weights uniform in
/// ±√(1/fan_in), biases zero, sinc cutoffs uniform over [0, f_s/2]
/// (pair-ordered).
pub fn init_params(arch: &VaeArchitecture, rng: &mut ChaCha8Rng) -> Result<ParamSet> {
    arch.validate()?;
    let mut params = ParamSet::new();
    for (name, shape) in arch.param_specs() {
        let tensor = if name == "sinc.f1" || name == "sinc.f2" {
            // Both cutoff vectors come from one paired draw; f2 reuses
            // the values drawn when f1 was visited.
            continue;
        } else if name.ends_with(".b") {
            Tensor::zeros(&shape)
        } else {
            let fan_in: usize = match shape.len() {
                2 => shape[0],
                3 => shape[1] * shape[2],
                _ => shape.iter().product(),
            };
            let s = (1.0 / fan_in as f64).sqrt();
            let data = (0..shape.iter().product::<usize>())
                .map(|_| rng.gen_range(-s..s) as Real)
                .collect();
            Tensor::new(shape.clone(), data)?
        };
        params.insert(name, tensor)?;
    }
    if arch.variant == Variant::Sinc {
        let (f1, f2) = sinc::init_cutoffs(arch.filter_count, arch.sampling_rate, rng);
        let mut with_cutoffs = ParamSet::new();
        with_cutoffs.insert("sinc.f1", Tensor::from_vec(f1))?;
        with_cutoffs.insert("sinc.f2", Tensor::from_vec(f2))?;
        for (name, tensor) in params.iter() {
            with_cutoffs.insert(name, tensor.clone())?;
        }
        params = with_cutoffs;
    }
    Ok(params)
}

/// Parameter tensors registered in a graph, name-addressable.
pub struct GraphParams {
    names: Vec<String>,
    vars: Vec<Var>,
}

impl GraphParams {
    /// Register every parameter as a trainable leaf.
    pub fn trainable(g: &mut Graph, params: &ParamSet) -> Self {
        Self::register(g, params, true)
    }

    /// Register every parameter as a constant (scoring/eval).
    pub fn frozen(g: &mut Graph, params: &ParamSet) -> Self {
        Self::register(g, params, false)
    }

    fn register(g: &mut Graph, params: &ParamSet, trainable: bool) -> Self {
        let mut names = Vec::with_capacity(params.len());
        let mut vars = Vec::with_capacity(params.len());
        for (name, tensor) in params.iter() {
            names.push(name.to_string());
            vars.push(if trainable {
                g.leaf(tensor.clone())
            } else {
                g.constant(tensor.clone())
            });
        }
        Self { names, vars }
    }

    fn get(&self, name: &str) -> Result<Var> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.vars[i])
            .ok_or_else(|| Error::Config(format!("model parameter {name:?} missing")))
    }

    /// Gradients in registration order, after `backward`.
    pub fn grads(&self, g: &Graph) -> Result<Vec<Tensor>> {
        self.names
            .iter()
            .zip(&self.vars)
            .map(|(name, &v)| {
                g.grad(v).cloned().ok_or_else(|| {
                    Error::Numeric(format!("no gradient reached parameter {name}"))
                })
            })
            .collect()
    }
}

/// Vars of interest from one assembled forward pass.
pub struct ForwardPass {
    pub mu: Var,
    pub logvar: Var,
    pub z: Var,
    pub xhat: Var,
    pub recon: Var,
    pub kl: Var,
    pub total: Var,
}

fn apply_act(g: &mut Graph, v: Var, act: Activation) -> Var {
    match act {
        Activation::Relu => g.relu(v),
        Activation::Tanh => g.tanh(v),
        Activation::Identity => v,
    }
}

fn build_encoder(
    g: &mut Graph,
    arch: &VaeArchitecture,
    params: &GraphParams,
    x: Var,
) -> Result<(Var, Var)> {
    let shape = g.value(x).shape().to_vec();
    if shape.len() != 3 || shape[1] != arch.input_channels || shape[2] != arch.window_len {
        return Err(Error::shape(
            "encode input",
            &[0, arch.input_channels, arch.window_len],
            &shape,
        ));
    }
    let batch = shape[0];
    let mut h = x;
    if arch.variant == Variant::Sinc {
        let f1 = params.get("sinc.f1")?;
        let f2 = params.get("sinc.f2")?;
        let kernels = g.sinc_kernels(f1, f2, arch.kernel_length, arch.sampling_rate)?;
        h = g.depthwise_conv1d(h, kernels)?;
        h = g.layer_norm(h, NormAxis::Time)?;
        h = apply_act(g, h, arch.activation);
    }
    for i in 0..arch.conv_blocks {
        let w = params.get(&format!("enc.block{i}.w"))?;
        let b = params.get(&format!("enc.block{i}.b"))?;
        h = g.conv1d(h, w, Some(b), 2, Pad::Same)?;
        h = apply_act(g, h, arch.activation);
    }
    let flat = g.reshape(h, &[batch, arch.flat_len()])?;
    let mu = {
        let w = params.get("enc.mu.w")?;
        let b = params.get("enc.mu.b")?;
        g.affine(flat, w, b)?
    };
    let logvar = {
        let w = params.get("enc.logvar.w")?;
        let b = params.get("enc.logvar.b")?;
        g.affine(flat, w, b)?
    };
    Ok((mu, logvar))
}

fn build_decoder(
    g: &mut Graph,
    arch: &VaeArchitecture,
    params: &GraphParams,
    z: Var,
) -> Result<Var> {
    let shape = g.value(z).shape().to_vec();
    if shape.len() != 2 || shape[1] != arch.latent_dim {
        return Err(Error::shape("decode input", &[0, arch.latent_dim], &shape));
    }
    let batch = shape[0];
    let dec_ch = if arch.conv_blocks == 0 { arch.stem_channels() } else { arch.channels };
    let mut h = {
        let w = params.get("dec.fc.w")?;
        let b = params.get("dec.fc.b")?;
        let fc = g.affine(z, w, b)?;
        let fc = apply_act(g, fc, arch.activation);
        g.reshape(fc, &[batch, dec_ch, arch.encoder_time_len()])?
    };
    for i in 0..arch.conv_blocks {
        h = g.upsample(h, 2)?;
        let w = params.get(&format!("dec.block{i}.w"))?;
        let b = params.get(&format!("dec.block{i}.b"))?;
        h = g.conv1d(h, w, Some(b), 1, Pad::Same)?;
        h = apply_act(g, h, arch.activation);
    }
    let w = params.get("dec.out.w")?;
    let b = params.get("dec.out.b")?;
    let full = g.conv1d(h, w, Some(b), 1, Pad::Same)?;
    // Linear output, cropped back to the input window length.
    g.slice(full, 2, 0, arch.window_len)
}

/// Assemble the full pass: encoder, reparametrized sample, decoder, and
/// the three loss nodes (`recon` mean squared error, closed-form `kl`
/// meaned over the batch, `total` their sum).
pub fn build_forward(
    g: &mut Graph,
    arch: &VaeArchitecture,
    params: &GraphParams,
    x: Var,
    eps: Var,
) -> Result<ForwardPass> {
    let batch = g.value(x).shape()[0];
    let eps_shape = g.value(eps).shape();
    if eps_shape != [batch, arch.latent_dim] {
        return Err(Error::shape("eps", &[batch, arch.latent_dim], eps_shape));
    }
    let (mu, logvar) = build_encoder(g, arch, params, x)?;
    let z = {
        let half = g.mul_scalar(logvar, 0.5);
        let sigma = g.exp(half);
        let noise = g.mul(sigma, eps)?;
        g.add(mu, noise)?
    };
    let xhat = build_decoder(g, arch, params, z)?;
    let recon = {
        let diff = g.sub(x, xhat)?;
        let sq = g.square(diff);
        g.mean_all(sq)
    };
    let kl = {
        let mu2 = g.square(mu);
        let var = g.exp(logvar);
        let sum = g.add(mu2, var)?;
        let sum = g.add_scalar(sum, -1.0);
        let sum = g.sub(sum, logvar)?;
        let total = g.sum_all(sum);
        g.mul_scalar(total, (0.5 / batch as f64) as Real)
    };
    let total = g.add(recon, kl)?;
    Ok(ForwardPass { mu, logvar, z, xhat, recon, kl, total })
}

/// Trained model: architecture, parameters, training history, and the
/// artifacts needed to score new data exactly as during training.
#[derive(Clone, Debug)]
pub struct VaeModel {
    pub architecture: VaeArchitecture,
    pub params: ParamSet,
    pub history: Vec<EpochStats>,
    pub seed: u64,
    /// Normalization fitted on the training split, applied to any data
    /// scored by this model.
    pub norm_stats: Option<ChannelStats>,
    /// Per-window validation MSE scores of the final model; threshold
    /// policies resolve against these.
    pub val_scores: Vec<f64>,
}

/// Posterior parameters for a batch `[b, C, T] → ([b, latent], [b, latent])`.
pub fn encode(model: &VaeModel, x: &Tensor) -> Result<(Tensor, Tensor)> {
    let mut g = Graph::new();
    let params = GraphParams::frozen(&mut g, &model.params);
    let xv = g.constant(x.clone());
    let (mu, logvar) = build_encoder(&mut g, &model.architecture, &params, xv)?;
    Ok((g.value(mu).clone(), g.value(logvar).clone()))
}

/// Decode latent codes `[b, latent] → [b, C, T]`.
pub fn decode(model: &VaeModel, z: &Tensor) -> Result<Tensor> {
    let mut g = Graph::new();
    let params = GraphParams::frozen(&mut g, &model.params);
    let zv = g.constant(z.clone());
    let xhat = build_decoder(&mut g, &model.architecture, &params, zv)?;
    Ok(g.value(xhat).clone())
}

/// `z = μ + exp(logvar/2) ⊙ ε`.
pub fn reparametrize(mu: &Tensor, logvar: &Tensor, eps: &Tensor) -> Result<Tensor> {
    if mu.shape() != logvar.shape() || mu.shape() != eps.shape() {
        return Err(Error::shape("reparametrize", mu.shape(), eps.shape()));
    }
    let data = mu
        .data()
        .iter()
        .zip(logvar.data())
        .zip(eps.data())
        .map(|((&m, &lv), &e)| m + (lv / 2.0).exp() * e)
        .collect();
    Tensor::new(mu.shape().to_vec(), data)
}

/// Closed-form KL divergence of `N(μ, diag σ²)` from `N(0, I)`, meaned
/// over the batch: `½ Σ_i (μ_i² + σ_i² − 1 − log σ_i²)`.
pub fn kl_closed_form(mu: &Tensor, logvar: &Tensor) -> Result<f64> {
    if mu.shape() != logvar.shape() || mu.rank() != 2 {
        return Err(Error::shape("kl_closed_form", mu.shape(), logvar.shape()));
    }
    let batch = mu.shape()[0] as f64;
    let sum: f64 = mu
        .data()
        .iter()
        .zip(logvar.data())
        .map(|(&m, &lv)| {
            let (m, lv) = (m as f64, lv as f64);
            m * m + lv.exp() - 1.0 - lv
        })
        .sum();
    Ok(0.5 * sum / batch)
}

/// Monte-Carlo estimate of the same KL via
/// `E_q[log q(z) − log p(z)] = ½ E[z² − ε² − logvar]`; verification
/// helper for the closed form.
pub fn kl_monte_carlo(mu: &Tensor, logvar: &Tensor, samples: usize, seed: u64) -> Result<f64> {
    if mu.shape() != logvar.shape() || mu.rank() != 2 {
        return Err(Error::shape("kl_monte_carlo", mu.shape(), logvar.shape()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch = mu.shape()[0];
    let latent = mu.shape()[1];
    let mut acc = 0.0f64;
    for _ in 0..samples {
        let eps = standard_normal(&mut rng, batch * latent);
        for (i, &e) in eps.iter().enumerate() {
            let m = mu.data()[i] as f64;
            let lv = logvar.data()[i] as f64;
            let e = e as f64;
            let z = m + (lv / 2.0).exp() * e;
            acc += 0.5 * (z * z - e * e - lv);
        }
    }
    Ok(acc / samples as f64 / batch as f64)
}

/// `(total, recon, kl)` for already-computed tensors; the in-graph loss
/// nodes of [`build_forward`] compute the same quantities.
pub fn elbo_loss(x: &Tensor, xhat: &Tensor, mu: &Tensor, logvar: &Tensor) -> Result<(f64, f64, f64)> {
    if x.shape() != xhat.shape() {
        return Err(Error::shape("elbo_loss", x.shape(), xhat.shape()));
    }
    let recon = x
        .data()
        .iter()
        .zip(xhat.data())
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum::<f64>()
        / x.len() as f64;
    let kl = kl_closed_form(mu, logvar)?;
    Ok((recon + kl, recon, kl))
}

/// Standard normal draws via Box-Muller; deterministic per RNG state.
pub(crate) fn standard_normal(rng: &mut ChaCha8Rng, n: usize) -> Vec<Real> {
    let mut out = Vec::with_capacity(n + 1);
    while out.len() < n {
        let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        out.push((r * c) as Real);
        out.push((r * s) as Real);
    }
    out.truncate(n);
    out
}

/// Batch rows `idx` of a `[n, C, T]` tensor into a new `[m, C, T]`.
pub(crate) fn gather_rows(data: &Tensor, idx: &[usize]) -> Tensor {
    let row: usize = data.shape()[1..].iter().product();
    let mut out = Vec::with_capacity(idx.len() * row);
    for &i in idx {
        out.extend_from_slice(&data.data()[i * row..(i + 1) * row]);
    }
    let mut shape = data.shape().to_vec();
    shape[0] = idx.len();
    Tensor::new(shape, out).expect("gather shape")
}

const SCORE_BATCH: usize = 256;

/// Deterministic per-window anomaly scores: reconstruction MSE through
/// the posterior mean (ε = 0). `windows: [n, C, T]`.
pub fn reconstruct_mse(model: &VaeModel, windows: &Tensor) -> Result<Vec<f64>> {
    let arch = &model.architecture;
    if windows.rank() != 3
        || windows.shape()[1] != arch.input_channels
        || windows.shape()[2] != arch.window_len
    {
        return Err(Error::shape(
            "reconstruct_mse",
            &[0, arch.input_channels, arch.window_len],
            windows.shape(),
        ));
    }
    let n = windows.shape()[0];
    let per_window = arch.input_channels * arch.window_len;
    let mut scores = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let len = SCORE_BATCH.min(n - start);
        let idx: Vec<usize> = (start..start + len).collect();
        let batch = gather_rows(windows, &idx);
        let mut g = Graph::new();
        let params = GraphParams::frozen(&mut g, &model.params);
        let xv = g.constant(batch);
        let eps = g.constant(Tensor::zeros(&[len, arch.latent_dim]));
        let pass = build_forward(&mut g, arch, &params, xv, eps)?;
        let xhat = g.value(pass.xhat);
        let x = g.value(xv);
        for w in 0..len {
            let off = w * per_window;
            let mse = x.data()[off..off + per_window]
                .iter()
                .zip(&xhat.data()[off..off + per_window])
                .map(|(&a, &b)| {
                    let d = a as f64 - b as f64;
                    d * d
                })
                .sum::<f64>()
                / per_window as f64;
            scores.push(mse);
        }
        start += len;
    }
    Ok(scores)
}

/// Learned cutoff export rows `(filter_index, f1_abs_hz, f2_abs_hz)`;
/// empty for the plain variant.
pub fn cutoff_rows(model: &VaeModel) -> Vec<(usize, f64, f64)> {
    match (model.params.get("sinc.f1"), model.params.get("sinc.f2")) {
        (Some(f1), Some(f2)) => sinc::cutoff_table(f1.data(), f2.data()),
        _ => Vec::new(),
    }
}
