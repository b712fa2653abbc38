//! Minibatch Adam training with early stopping and best-parameter
//! restore. Fully deterministic given the seed: initialization,
//! validation split, shuffling, and ε draws each use their own derived
//! RNG stream.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signal::WindowSet;
use crate::tensor::{Adam, AdamConfig, Graph, Tensor};

use super::{
    build_forward, gather_rows, init_params, reconstruct_mse, standard_normal, GraphParams,
    VaeArchitecture, VaeModel,
};

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            batch_size: 128,
            max_epochs: 1000,
            patience: 20,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "train: learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config(
                "train: batch_size, max_epochs, and patience must be ≥ 1".into(),
            ));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train: val_fraction must be in (0, 1), got {}",
                self.val_fraction
            )));
        }
        Ok(())
    }
}

/// One history row; `val_*` come from a deterministic ε = 0 pass over
/// the validation split.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_recon: f64,
    pub val_kl: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Patience-based early stopping on validation loss: stops exactly
/// `patience` epochs after the best epoch if no improvement arrives.
#[derive(Clone, Debug)]
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    best_epoch: usize,
    seen_any: bool,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: f64::INFINITY, best_epoch: 0, seen_any: false }
    }

    /// Feed the validation loss of `epoch` (strictly increasing calls).
    /// Returns `Stop` once `epoch − best_epoch ≥ patience`.
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        if !self.seen_any || val_loss < self.best {
            self.seen_any = true;
            self.best = val_loss;
            self.best_epoch = epoch;
            return StopDecision::Continue;
        }
        if epoch - self.best_epoch >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_value(&self) -> f64 {
        self.best
    }

    /// True when `observe` just recorded `epoch` as the new best.
    pub fn improved_at(&self, epoch: usize) -> bool {
        self.best_epoch == epoch
    }
}

// Derived RNG stream ids (same seed, disjoint ChaCha streams).
const STREAM_INIT: u64 = 1;
const STREAM_SPLIT: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_EPS: u64 = 4;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn shuffle(rng: &mut ChaCha8Rng, idx: &mut [usize]) {
    for i in (1..idx.len()).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
}

/// Mean `(total, recon, kl)` over `rows` with ε = 0, evaluated in
/// `batch_size` chunks with frozen parameters.
fn evaluate(
    arch: &VaeArchitecture,
    params: &crate::tensor::ParamSet,
    data: &Tensor,
    rows: &[usize],
    batch_size: usize,
) -> Result<(f64, f64, f64)> {
    let mut totals = (0.0f64, 0.0f64, 0.0f64);
    let mut seen = 0usize;
    for chunk in rows.chunks(batch_size) {
        let x = gather_rows(data, chunk);
        let mut g = Graph::new();
        let gp = GraphParams::frozen(&mut g, params);
        let xv = g.constant(x);
        let eps = g.constant(Tensor::zeros(&[chunk.len(), arch.latent_dim]));
        let pass = build_forward(&mut g, arch, &gp, xv, eps)?;
        let w = chunk.len() as f64;
        totals.0 += g.value(pass.total).item() as f64 * w;
        totals.1 += g.value(pass.recon).item() as f64 * w;
        totals.2 += g.value(pass.kl).item() as f64 * w;
        seen += chunk.len();
    }
    let n = seen as f64;
    Ok((totals.0 / n, totals.1 / n, totals.2 / n))
}

/// Train a VAE on non-seizure windows. Returns the model with
/// best-validation parameters restored, full history, and the final
/// per-window validation scores.
pub fn train(
    train_windows: &WindowSet,
    cfg: &TrainConfig,
    arch: &VaeArchitecture,
) -> Result<VaeModel> {
    cfg.validate()?;
    arch.validate()?;
    let n = train_windows.count();
    if n < 2 {
        return Err(Error::Config(format!(
            "train: need at least 2 windows (one for validation), got {n}"
        )));
    }
    if train_windows.channel_count() != arch.input_channels
        || train_windows.window_len() != arch.window_len
    {
        return Err(Error::shape(
            "train windows",
            &[n, arch.input_channels, arch.window_len],
            train_windows.data().shape(),
        ));
    }

    // Validation split: uniform shuffle, final block held out.
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut stream_rng(cfg.seed, STREAM_SPLIT), &mut order);
    let n_val = ((n as f64 * cfg.val_fraction).round() as usize).clamp(1, n - 1);
    let mut val_rows = order.split_off(n - n_val);
    let mut train_rows = order;
    train_rows.sort_unstable();
    val_rows.sort_unstable();

    let data = train_windows.data();
    let mut params = init_params(arch, &mut stream_rng(cfg.seed, STREAM_INIT))?;
    let mut adam = Adam::new(
        AdamConfig { lr: cfg.learning_rate, ..AdamConfig::default() },
        &params,
    );
    let mut shuffle_rng = stream_rng(cfg.seed, STREAM_SHUFFLE);
    let mut eps_rng = stream_rng(cfg.seed, STREAM_EPS);

    let mut stopper = EarlyStopper::new(cfg.patience);
    let mut best_params = params.clone();
    let mut history = Vec::new();

    for epoch in 0..cfg.max_epochs {
        shuffle(&mut shuffle_rng, &mut train_rows);
        let mut epoch_loss = 0.0f64;
        for (batch_no, chunk) in train_rows.chunks(cfg.batch_size).enumerate() {
            let x = gather_rows(data, chunk);
            let eps_data = standard_normal(&mut eps_rng, chunk.len() * arch.latent_dim);
            let eps = Tensor::new(vec![chunk.len(), arch.latent_dim], eps_data)?;

            let mut g = Graph::new();
            let gp = GraphParams::trainable(&mut g, &params);
            let xv = g.constant(x);
            let ev = g.constant(eps);
            let pass = build_forward(&mut g, arch, &gp, xv, ev)?;
            let loss = g.value(pass.total).item() as f64;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "train: non-finite loss {loss} at epoch {epoch}, batch {batch_no}"
                )));
            }
            epoch_loss += loss * chunk.len() as f64;
            g.backward(pass.total)?;
            let grads = gp.grads(&g)?;
            adam.step(&mut params, &grads)?;
        }
        let train_loss = epoch_loss / train_rows.len() as f64;
        let (val_loss, val_recon, val_kl) =
            evaluate(arch, &params, data, &val_rows, cfg.batch_size)?;
        history.push(EpochStats { epoch, train_loss, val_loss, val_recon, val_kl });

        let decision = stopper.observe(epoch, val_loss);
        if stopper.improved_at(epoch) {
            best_params = params.clone();
        }
        if decision == StopDecision::Stop {
            break;
        }
    }

    let model = VaeModel {
        architecture: arch.clone(),
        params: best_params,
        history,
        seed: cfg.seed,
        norm_stats: None,
        val_scores: Vec::new(),
    };
    let val_data = gather_rows(data, &val_rows);
    let val_scores = reconstruct_mse(&model, &val_data)?;
    Ok(VaeModel { val_scores, ..model })
}

/// History rows as `epoch,train_loss,val_loss,recon,kl` CSV.
pub fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,recon,kl\n");
    for row in history {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.epoch, row.train_loss, row.val_loss, row.val_recon, row.val_kl
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Real;
    use crate::vae::{Activation, Variant};

    #[test]
    fn early_stopper_halts_exactly_patience_after_best() {
        let mut s = EarlyStopper::new(3);
        // Best at epoch 2, flat afterwards: stop must fire at epoch 5.
        let vals = [5.0, 4.0, 3.0, 3.0, 3.0, 3.0, 3.0];
        let mut stopped_at = None;
        for (e, &v) in vals.iter().enumerate() {
            if s.observe(e, v) == StopDecision::Stop {
                stopped_at = Some(e);
                break;
            }
        }
        assert_eq!(stopped_at, Some(5));
        assert_eq!(s.best_epoch(), 2);
        assert_eq!(s.best_value(), 3.0);
    }

    #[test]
    fn early_stopper_resets_on_improvement() {
        let mut s = EarlyStopper::new(2);
        assert_eq!(s.observe(0, 5.0), StopDecision::Continue);
        assert_eq!(s.observe(1, 6.0), StopDecision::Continue);
        assert_eq!(s.observe(2, 4.0), StopDecision::Continue); // new best
        assert_eq!(s.observe(3, 4.5), StopDecision::Continue);
        assert_eq!(s.observe(4, 4.4), StopDecision::Stop);
        assert_eq!(s.best_epoch(), 2);
    }

    fn toy_windows(count: usize) -> WindowSet {
        // Smooth tones with deterministic per-window phase/noise.
        let len = 32usize;
        let mut state = 0x1357_9bdf_u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut data = Vec::with_capacity(count * len);
        for _ in 0..count {
            let phase = next() * std::f64::consts::TAU;
            for i in 0..len {
                let t = i as f64 / len as f64;
                let v = (std::f64::consts::TAU * 2.0 * t + phase).sin()
                    + 0.05 * (next() - 0.5);
                data.push(v as Real);
            }
        }
        WindowSet::from_parts(
            Tensor::new(vec![count, 1, len], data).unwrap(),
            32.0,
            (0..count).map(|i| i as f64).collect(),
            None,
            None,
        )
        .unwrap()
    }

    fn toy_arch() -> VaeArchitecture {
        VaeArchitecture {
            variant: Variant::Plain,
            filter_count: 0,
            kernel_length: 0,
            activation: Activation::Tanh,
            latent_dim: 2,
            conv_blocks: 1,
            channels: 4,
            input_channels: 1,
            window_len: 32,
            sampling_rate: 32.0,
        }
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let ws = toy_windows(48);
        let cfg = TrainConfig {
            batch_size: 16,
            max_epochs: 4,
            learning_rate: 2e-3,
            seed: 42,
            ..TrainConfig::default()
        };
        let a = train(&ws, &cfg, &toy_arch()).unwrap();
        let b = train(&ws, &cfg, &toy_arch()).unwrap();
        assert_eq!(a.history, b.history);
        for i in 0..a.params.len() {
            assert_eq!(
                a.params.tensor_at(i).data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                b.params.tensor_at(i).data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                "parameter {} differs between identical runs",
                a.params.name_at(i)
            );
        }
        let c = train(&ws, &TrainConfig { seed: 43, ..cfg }, &toy_arch()).unwrap();
        assert_ne!(a.history, c.history);
    }

    #[test]
    fn training_reduces_validation_loss() {
        let ws = toy_windows(64);
        let cfg = TrainConfig {
            batch_size: 16,
            max_epochs: 25,
            learning_rate: 5e-3,
            seed: 7,
            ..TrainConfig::default()
        };
        let model = train(&ws, &cfg, &toy_arch()).unwrap();
        let first = model.history.first().unwrap().val_loss;
        let best = model
            .history
            .iter()
            .map(|h| h.val_loss)
            .fold(f64::INFINITY, f64::min);
        assert!(
            best < first,
            "validation loss never improved: first {first}, best {best}"
        );
        assert!(model.history.len() <= 25);
        assert_eq!(model.val_scores.len(),expected_val_count(64, 0.2));
        assert!(model.val_scores.iter().all(|&s| s >= 0.0));
    }

    fn expected_val_count(n: usize, vf: f64) -> usize {
        ((n as f64 * vf).round() as usize).clamp(1, n - 1)
    }

    #[test]
    fn training_rejects_bad_inputs() {
        let ws = toy_windows(4);
        let arch = toy_arch();
        let bad_cfg = TrainConfig { val_fraction: 0.0, ..TrainConfig::default() };
        assert!(train(&ws, &bad_cfg, &arch).is_err());

        let mismatched = VaeArchitecture { window_len: 64, ..arch };
        assert!(train(&ws, &TrainConfig::default(), &mismatched).is_err());
    }

    #[test]
    fn history_csv_shape() {
        let rows = vec![EpochStats {
            epoch: 0,
            train_loss: 1.5,
            val_loss: 1.25,
            val_recon: 1.0,
            val_kl: 0.25,
        }];
        let csv = history_csv(&rows);
        assert_eq!(csv, "epoch,train_loss,val_loss,recon,kl\n0,1.5,1.25,1,0.25\n");
    }
}
