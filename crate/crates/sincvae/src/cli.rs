//! Command-line pipeline: synthesize → preprocess → train → score →
//! evaluate, plus grid-search selection and EDF inspection.
//!
//! Every command resolves one flat key-value configuration (defaults,
//! then `--config` file, then `--set` overrides, then `--seed`/`--out`)
//! and writes the fully resolved result next to its outputs, so a run
//! is reproducible from that file alone. Inputs are never mutated;
//! artifacts go only under the configured output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::detector::{self, Horizons, ThresholdPolicy};
use crate::error::{Error, Result};
use crate::ingest::{self, BurstSpec, EdfWriteOptions, SynthSpec};
use crate::selection::{self, SearchSpace, SelectionSettings};
use crate::signal::{
    fir_filter, read_svws, segment_windows, write_svws, zscore_windows, ChannelStats, FirKind,
    Label, Phase, TimeSeriesRecording, WindowSet,
};
use crate::vae::{
    history_csv, load_checkpoint, reconstruct_mse, save_checkpoint, train, Activation,
    TrainConfig, VaeArchitecture, Variant,
};

/// Every configuration key with its default and one-line description.
/// This table is the single source of truth: unknown keys are rejected
/// and `--help` prints it.
const KNOWN_KEYS: &[(&str, &str, &str)] = &[
    ("data.format", "edf", "preprocess input format: edf | bonn"),
    ("data.input", "", "input path (EDF file, segment directory, or window file)"),
    ("data.channels", "", "comma-separated EDF channel labels to keep (empty = all)"),
    ("data.annotations", "", "seizure annotation CSV used to label windows"),
    ("preprocess.window_s", "1", "window length in seconds"),
    ("preprocess.stride_s", "", "window stride in seconds (empty = window length)"),
    ("preprocess.filter", "none", "prefilter: none | lowpass:<hz> | bandpass:<lo>,<hi>"),
    ("preprocess.taps", "101", "prefilter FIR length (odd)"),
    ("model.checkpoint", "", "trained model path, consumed by score and eval"),
    ("model.variant", "sinc", "encoder stem: sinc | plain"),
    ("model.filters", "16", "sinc filters per input channel"),
    ("model.kernel", "41", "sinc kernel length (odd)"),
    ("model.activation", "identity", "activation: relu | tanh | identity"),
    ("model.latent", "32", "latent dimension"),
    ("model.blocks", "2", "strided conv blocks after the stem"),
    ("model.channels", "32", "channels per conv block"),
    ("train.lr", "0.0005", "Adam learning rate"),
    ("train.batch", "128", "minibatch size"),
    ("train.epochs", "1000", "epoch cap"),
    ("train.patience", "20", "early-stopping patience in epochs"),
    ("train.val_fraction", "0.2", "fraction of windows held out for validation"),
    ("threshold.policy", "percentile:95", "max | percentile:<p> | nearest:<p>"),
    ("phase.preictal_s", "900", "seconds before each onset tagged preictal"),
    ("phase.postictal_s", "900", "seconds after each offset tagged postictal"),
    ("select.space", "chb", "search grid: chb | bonn"),
    ("select.limit", "0", "cap on grid configurations (0 = full grid)"),
    ("select.folds", "5", "cross-validation folds"),
    ("select.alpha", "0.05", "significance level for the selection tests"),
    ("select.epochs", "30", "per-trial epoch cap"),
    ("select.parallel", "false", "fan trials out across threads"),
    ("synth.duration_s", "120", "synthetic recording length in seconds"),
    ("synth.channels", "1", "synthetic channel count"),
    ("synth.fs", "128", "synthetic sampling rate in Hz"),
    ("synth.background", "0.5,25", "background band lo,hi in Hz"),
    ("synth.sines", "10", "comma-separated sine frequencies in Hz (empty = none)"),
    ("synth.sine_amp", "0.5", "sine amplitude"),
    ("synth.burst_count", "4", "number of planted bursts"),
    ("synth.burst_duration_s", "4", "burst length in seconds"),
    ("synth.burst_gain", "3", "in-burst RMS as a multiple of background RMS"),
    ("synth.burst_band", "2,20", "burst band lo,hi in Hz"),
    ("synth.track_id", "synthetic", "track id stamped on synthetic outputs"),
    ("seed", "0", "RNG seed"),
    ("out", "out", "output directory"),
];

/// Flat run configuration; keys restricted to `KNOWN_KEYS`.
#[derive(Clone, Debug)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: KNOWN_KEYS
                .iter()
                .map(|&(k, v, _)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

impl RunConfig {
    /// Apply a `key = value` file (`#` starts a comment line).
    /// Duplicate keys within one file are rejected as likely typos.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut seen = std::collections::BTreeSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "{}:{}: expected key = value, got {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!(
                    "{}:{}: duplicate key {key:?}",
                    path.display(),
                    lineno + 1
                )));
            }
            self.set(key, value.trim()).map_err(|e| {
                Error::Config(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.iter().any(|&(k, _, _)| k == key) {
            return Err(Error::Config(format!(
                "unknown configuration key {key:?} (see --help for the key list)"
            )));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Apply a `key=value` command-line override.
    pub fn set_arg(&mut self, arg: &str) -> Result<()> {
        let (key, value) = arg.split_once('=').ok_or_else(|| {
            Error::Config(format!("--set expects key=value, got {arg:?}"))
        })?;
        self.set(key.trim(), value.trim())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("unknown configuration key {key:?}"))
    }

    fn required(&self, key: &str) -> Result<&str> {
        let v = self.get(key);
        if v.is_empty() {
            return Err(Error::Config(format!(
                "{key} is required (set it in the config file or with --set {key}=...)"
            )));
        }
        Ok(v)
    }

    fn path(&self, key: &str) -> Result<PathBuf> {
        Ok(PathBuf::from(self.required(key)?))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let v = self.get(key);
        v.parse().map_err(|_| {
            Error::Config(format!("{key} must be a number, got {v:?}"))
        })
    }

    fn usize(&self, key: &str) -> Result<usize> {
        let v = self.get(key);
        v.parse().map_err(|_| {
            Error::Config(format!("{key} must be a non-negative integer, got {v:?}"))
        })
    }

    fn u64(&self, key: &str) -> Result<u64> {
        let v = self.get(key);
        v.parse().map_err(|_| {
            Error::Config(format!("{key} must be a non-negative integer, got {v:?}"))
        })
    }

    fn bool(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            "true" => Ok(true),
            "false" => Ok(false),
            v => Err(Error::Config(format!(
                "{key} must be true or false, got {v:?}"
            ))),
        }
    }

    /// `lo,hi` pair.
    fn band(&self, key: &str) -> Result<(f64, f64)> {
        let v = self.get(key);
        let (lo, hi) = v.split_once(',').ok_or_else(|| {
            Error::Config(format!("{key} must be lo,hi in Hz, got {v:?}"))
        })?;
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{key}: {s:?} is not a number")))
        };
        Ok((parse(lo)?, parse(hi)?))
    }

    /// Comma-separated list; empty string is an empty list.
    fn list(&self, key: &str) -> Vec<String> {
        let v = self.get(key);
        if v.is_empty() {
            return Vec::new();
        }
        v.split(',').map(|s| s.trim().to_string()).collect()
    }

    fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.list(key)
            .iter()
            .map(|s| {
                s.parse().map_err(|_| {
                    Error::Config(format!("{key}: {s:?} is not a number"))
                })
            })
            .collect()
    }

    pub fn seed(&self) -> Result<u64> {
        self.u64("seed")
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.get("out"))
    }

    /// Canonical `key = value` rendering of the full key set.
    pub fn resolved_text(&self, command: &str) -> String {
        let mut out = format!("# resolved configuration ({command})\n");
        for (k, v) in &self.values {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Create the output directory and persist the resolved config in it.
fn prepare_out(cfg: &RunConfig, command: &str) -> Result<PathBuf> {
    let out = cfg.out_dir();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_text(&out.join(format!("{command}.config")), &cfg.resolved_text(command))?;
    Ok(out)
}

fn parse_policy(s: &str) -> Result<ThresholdPolicy> {
    if s == "max" {
        return Ok(ThresholdPolicy::MaxValidation);
    }
    let percentile = |p: &str| -> Result<f64> {
        p.parse().map_err(|_| {
            Error::Config(format!("threshold.policy: {p:?} is not a percentile"))
        })
    };
    if let Some(p) = s.strip_prefix("percentile:") {
        return Ok(ThresholdPolicy::Percentile(percentile(p)?));
    }
    if let Some(p) = s.strip_prefix("nearest:") {
        return Ok(ThresholdPolicy::NearestRank(percentile(p)?));
    }
    Err(Error::Config(format!(
        "unknown threshold.policy {s:?} (expected max, percentile:<p>, or nearest:<p>)"
    )))
}

fn parse_filter(cfg: &RunConfig) -> Result<Option<FirKind>> {
    let s = cfg.get("preprocess.filter");
    if s == "none" {
        return Ok(None);
    }
    if let Some(hz) = s.strip_prefix("lowpass:") {
        let cutoff_hz: f64 = hz.parse().map_err(|_| {
            Error::Config(format!("preprocess.filter: {hz:?} is not a frequency"))
        })?;
        return Ok(Some(FirKind::Lowpass { cutoff_hz }));
    }
    if let Some(band) = s.strip_prefix("bandpass:") {
        let (lo, hi) = band.split_once(',').ok_or_else(|| {
            Error::Config(format!("preprocess.filter: bandpass needs lo,hi, got {band:?}"))
        })?;
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| {
                Error::Config(format!("preprocess.filter: {s:?} is not a frequency"))
            })
        };
        return Ok(Some(FirKind::Bandpass { low_hz: parse(lo)?, high_hz: parse(hi)? }));
    }
    Err(Error::Config(format!(
        "unknown preprocess.filter {s:?} (expected none, lowpass:<hz>, or bandpass:<lo>,<hi>)"
    )))
}

fn architecture_from(cfg: &RunConfig, ws: &WindowSet) -> Result<VaeArchitecture> {
    Ok(VaeArchitecture {
        variant: Variant::parse(cfg.get("model.variant"))?,
        filter_count: cfg.usize("model.filters")?,
        kernel_length: cfg.usize("model.kernel")?,
        activation: Activation::parse(cfg.get("model.activation"))?,
        latent_dim: cfg.usize("model.latent")?,
        conv_blocks: cfg.usize("model.blocks")?,
        channels: cfg.usize("model.channels")?,
        input_channels: ws.channel_count(),
        window_len: ws.window_len(),
        sampling_rate: ws.sampling_rate(),
    })
}

fn train_config_from(cfg: &RunConfig, epochs_key: &str) -> Result<TrainConfig> {
    Ok(TrainConfig {
        learning_rate: cfg.f64("train.lr")?,
        batch_size: cfg.usize("train.batch")?,
        max_epochs: cfg.usize(epochs_key)?,
        patience: cfg.usize("train.patience")?,
        val_fraction: cfg.f64("train.val_fraction")?,
        seed: cfg.seed()?,
    })
}

/// Keep only windows labeled normal. A set without labels passes
/// through untouched (it is taken to be all-normal by construction).
fn normal_only(ws: WindowSet) -> Result<(WindowSet, usize)> {
    let Some(labels) = ws.labels() else {
        return Ok((ws, 0));
    };
    let keep: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == Label::NonSeizure)
        .map(|(i, _)| i)
        .collect();
    let dropped = ws.count() - keep.len();
    if keep.is_empty() {
        return Err(Error::Config(
            "every window is labeled anomalous; nothing to train on".into(),
        ));
    }
    if dropped == 0 {
        return Ok((ws, 0));
    }
    Ok((ws.subset(&keep)?, dropped))
}

fn load_windows(cfg: &RunConfig) -> Result<WindowSet> {
    read_svws(&cfg.path("data.input")?)
}

fn cmd_preprocess(cfg: &RunConfig) -> Result<String> {
    let input = cfg.path("data.input")?;
    let recordings: Vec<TimeSeriesRecording> = match cfg.get("data.format") {
        "bonn" => ingest::read_bonn(&input)?,
        "edf" => {
            let names = cfg.list("data.channels");
            let picked = if names.is_empty() { None } else { Some(&names[..]) };
            vec![ingest::read_edf(&input, picked)?]
        }
        other => {
            return Err(Error::Config(format!(
                "unknown data.format {other:?} (expected edf or bonn)"
            )))
        }
    };

    let filter = parse_filter(cfg)?;
    let taps = cfg.usize("preprocess.taps")?;
    let window_s = cfg.f64("preprocess.window_s")?;
    let stride_s = match cfg.get("preprocess.stride_s") {
        "" => None,
        _ => Some(cfg.f64("preprocess.stride_s")?),
    };
    let horizons = Horizons {
        preictal_s: cfg.f64("phase.preictal_s")?,
        postictal_s: cfg.f64("phase.postictal_s")?,
    };
    let annotations: BTreeMap<String, Vec<(f64, f64)>> = match cfg.get("data.annotations") {
        "" => BTreeMap::new(),
        _ => ingest::read_annotations(&cfg.path("data.annotations")?)?
            .into_iter()
            .map(|a| (a.track_id, a.intervals))
            .collect(),
    };

    let mut sets = Vec::with_capacity(recordings.len());
    for rec in &recordings {
        let filtered;
        let rec = match filter {
            Some(kind) => {
                filtered = fir_filter(rec, kind, taps)?;
                &filtered
            }
            None => rec,
        };
        let mut ws = segment_windows(rec, window_s, stride_s)?;
        if !annotations.is_empty() {
            let empty = Vec::new();
            let intervals = annotations.get(rec.source_id()).unwrap_or(&empty);
            let seconds = rec.duration_seconds().ceil() as usize;
            let phase_per_second = detector::tag_phases(seconds, intervals, &horizons)?;
            let labels: Vec<Label> = ws
                .start_times()
                .iter()
                .map(|&s| {
                    let overlaps = intervals.iter().any(|&(a, b)| s < b && a < s + window_s);
                    if overlaps { Label::Seizure } else { Label::NonSeizure }
                })
                .collect();
            let phases: Vec<Phase> = ws
                .start_times()
                .iter()
                .map(|&s| phase_per_second[(s.floor() as usize).min(seconds - 1)])
                .collect();
            ws.set_labels(labels)?;
            ws.set_phases(phases)?;
        }
        sets.push(ws);
    }
    let all = WindowSet::concat(&sets)?;

    let out = prepare_out(cfg, "preprocess")?;
    let path = out.join("windows.svws");
    write_svws(&path, &all)?;
    Ok(format!(
        "wrote {} windows x {} channels x {} samples to {}",
        all.count(),
        all.channel_count(),
        all.window_len(),
        path.display()
    ))
}

fn cmd_train(cfg: &RunConfig) -> Result<String> {
    let (ws, dropped) = normal_only(load_windows(cfg)?)?;
    let arch = architecture_from(cfg, &ws)?;
    let tc = train_config_from(cfg, "train.epochs")?;

    let stats = ChannelStats::fit(&ws);
    let z = zscore_windows(&ws, &stats)?;
    let mut model = train(&z, &tc, &arch)?;
    model.norm_stats = Some(stats);

    let out = prepare_out(cfg, "train")?;
    let ckpt = out.join("model.svae");
    save_checkpoint(&ckpt, &model)?;
    write_text(&out.join("history.csv"), &history_csv(&model.history))?;

    let best = model
        .history
        .iter()
        .map(|e| e.val_loss)
        .fold(f64::INFINITY, f64::min);
    let note = if dropped > 0 {
        format!(" (dropped {dropped} anomalous windows)")
    } else {
        String::new()
    };
    Ok(format!(
        "trained {} epochs on {} windows{note}, best val loss {best:.6}, wrote {}",
        model.history.len(),
        z.count(),
        ckpt.display()
    ))
}

fn scores_for(cfg: &RunConfig) -> Result<(crate::vae::VaeModel, WindowSet, Vec<f64>)> {
    let model = load_checkpoint(&cfg.path("model.checkpoint")?)?;
    let ws = load_windows(cfg)?;
    let scores = match &model.norm_stats {
        Some(stats) => reconstruct_mse(&model, zscore_windows(&ws, stats)?.data())?,
        None => reconstruct_mse(&model, ws.data())?,
    };
    Ok((model, ws, scores))
}

fn cmd_score(cfg: &RunConfig) -> Result<String> {
    let (_, ws, scores) = scores_for(cfg)?;
    let mut csv = String::from("window,start_s,mse\n");
    for (i, (start, score)) in ws.start_times().iter().zip(&scores).enumerate() {
        csv.push_str(&format!("{i},{start},{score}\n"));
    }
    let out = prepare_out(cfg, "score")?;
    let path = out.join("scores.csv");
    write_text(&path, &csv)?;
    Ok(format!("scored {} windows to {}", scores.len(), path.display()))
}

fn cmd_eval(cfg: &RunConfig) -> Result<String> {
    let (model, ws, scores) = scores_for(cfg)?;
    let labels = ws.labels().ok_or_else(|| {
        Error::Config(
            "windows carry no labels; preprocess with data.annotations to evaluate".into(),
        )
    })?;
    let policy = parse_policy(cfg.get("threshold.policy"))?;
    let report = detector::evaluate(&scores, labels, &model.val_scores, policy)?;

    let phases: Vec<Phase> = match ws.phases() {
        Some(p) => p.to_vec(),
        None => vec![Phase::Interictal; scores.len()],
    };
    let trace = detector::score_trace_csv(&scores, &report.predictions, &phases)?;

    let out = prepare_out(cfg, "eval")?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Malformed(format!("report serialization failed: {e}")))?;
    write_text(&out.join("report.json"), &(json + "\n"))?;
    write_text(&out.join("confusion.txt"), &report.render_text())?;
    write_text(&out.join("trace.csv"), &trace)?;
    Ok(report.render_text().trim_end().to_string())
}

fn cmd_select(cfg: &RunConfig) -> Result<String> {
    let (ws, _) = normal_only(load_windows(cfg)?)?;
    let space = match cfg.get("select.space") {
        "chb" => SearchSpace::chb_mit(),
        "bonn" => SearchSpace::bonn(),
        other => {
            return Err(Error::Config(format!(
                "unknown select.space {other:?} (expected chb or bonn)"
            )))
        }
    };
    let mut configs = selection::grid_expand(&space)?;
    let limit = cfg.usize("select.limit")?;
    if limit > 0 {
        configs.truncate(limit);
    }

    let k = cfg.usize("select.folds")?;
    let seed = cfg.seed()?;
    let folds = selection::kfold(ws.count(), k, seed)?;
    let base = architecture_from(cfg, &ws)?;
    let tc = train_config_from(cfg, "select.epochs")?;

    let eval = |c: &selection::Configuration, f: usize| -> Result<f64> {
        let val_idx = &folds[f];
        let train_idx: Vec<usize> = (0..ws.count()).filter(|i| !val_idx.contains(i)).collect();
        let train_ws = ws.subset(&train_idx)?;
        let val_ws = ws.subset(val_idx)?;
        let stats = ChannelStats::fit(&train_ws);
        let z_train = zscore_windows(&train_ws, &stats)?;
        let z_val = zscore_windows(&val_ws, &stats)?;
        let trial_tc = TrainConfig {
            seed: selection::trial_seed(seed, c.id as u64, f as u64),
            ..tc
        };
        let model = train(&z_train, &trial_tc, &c.apply(&base))?;
        let scores = reconstruct_mse(&model, z_val.data())?;
        Ok(scores.iter().sum::<f64>() / scores.len() as f64)
    };
    let param_count = |c: &selection::Configuration| -> usize {
        c.apply(&base)
            .param_specs()
            .iter()
            .map(|(_, shape)| shape.iter().product::<usize>())
            .sum()
    };
    let parallel = cfg.bool("select.parallel")?;
    let results = selection::run_trials(&configs, k, eval, param_count, parallel)?;

    let settings = SelectionSettings { alpha: cfg.f64("select.alpha")?, ..Default::default() };
    let report = selection::select_configuration(&configs, &results, &settings)?;

    let out = prepare_out(cfg, "select")?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Malformed(format!("report serialization failed: {e}")))?;
    write_text(&out.join("selection.json"), &(json + "\n"))?;
    write_text(&out.join("p_matrix.csv"), &selection::p_matrix_csv(&report.p_matrix))?;
    write_text(&out.join("results.csv"), &selection::results_csv(&configs, &results)?)?;

    let chosen = configs
        .iter()
        .find(|c| c.id == report.chosen)
        .expect("chosen id comes from configs");
    Ok(format!(
        "selected config {}: kernel {}, {} filters, {}, latent {} ({} candidates)",
        chosen.id,
        chosen.kernel_length,
        chosen.filter_count,
        chosen.activation.name(),
        chosen.latent_dim,
        configs.len()
    ))
}

fn cmd_synth(cfg: &RunConfig) -> Result<String> {
    let (bg_lo, bg_hi) = cfg.band("synth.background")?;
    let (b_lo, b_hi) = cfg.band("synth.burst_band")?;
    let spec = SynthSpec {
        duration_s: cfg.f64("synth.duration_s")?,
        channels: cfg.usize("synth.channels")?,
        sampling_rate: cfg.f64("synth.fs")?,
        background_low_hz: bg_lo,
        background_high_hz: bg_hi,
        sine_hzs: cfg.f64_list("synth.sines")?,
        sine_amp: cfg.f64("synth.sine_amp")?,
        bursts: BurstSpec {
            count: cfg.usize("synth.burst_count")?,
            duration_s: cfg.f64("synth.burst_duration_s")?,
            gain: cfg.f64("synth.burst_gain")?,
            low_hz: b_lo,
            high_hz: b_hi,
        },
        seed: cfg.seed()?,
        track_id: cfg.get("synth.track_id").to_string(),
    };
    let (rec, ann) = ingest::synth_generate(&spec)?;

    let out = prepare_out(cfg, "synth")?;
    let edf = out.join(format!("{}.edf", spec.track_id));
    let csv = out.join(format!("{}_annotations.csv", spec.track_id));
    ingest::write_edf(&edf, &rec, &EdfWriteOptions::covering(&rec))?;
    ingest::write_annotations(&csv, std::slice::from_ref(&ann))?;
    Ok(format!(
        "wrote {} ({} channels, {} s, {} bursts) and {}",
        edf.display(),
        spec.channels,
        spec.duration_s,
        ann.intervals.len(),
        csv.display()
    ))
}

fn cmd_edf_info(cfg: &RunConfig) -> Result<String> {
    let header = ingest::read_edf_header(&cfg.path("data.input")?)?;
    Ok(header.render_text().trim_end().to_string())
}

fn help_footer() -> String {
    let mut out = String::from("Exit codes:\n");
    out.push_str("  0  success\n");
    out.push_str("  2  configuration error (bad key, value, or combination)\n");
    out.push_str("  3  missing input file or directory\n");
    out.push_str("  4  malformed data (unparseable or corrupt file)\n");
    out.push_str("  5  numeric failure (non-finite loss or statistic)\n");
    out.push_str("\nErrors print one line on stderr: sincvae: [E<code>] <kind>: <message>\n");
    out.push_str("\nConfiguration keys (key = default  description):\n");
    for &(k, v, help) in KNOWN_KEYS {
        let shown = if v.is_empty() { "(empty)" } else { v };
        out.push_str(&format!("  {k} = {shown}\n      {help}\n"));
    }
    out
}

#[derive(Parser)]
#[command(
    name = "sincvae",
    version,
    about = "Anomaly detection on multichannel recordings with a sinc-filterbank VAE",
    after_help = help_footer()
)]
pub struct Cli {
    /// Configuration file (one `key = value` per line, # comments)
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Override one configuration key (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Override the `seed` key
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Override the `out` key
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Window recordings (EDF or segment directory) into a window file
    Preprocess,
    /// Train a model on a window file and save a checkpoint
    Train,
    /// Score windows with a trained model
    Score,
    /// Threshold scores against labels and report detection metrics
    Eval,
    /// Grid-search architectures with cross-validated trials
    Select,
    /// Generate a synthetic recording with planted bursts
    Synth,
    /// Print an EDF header
    EdfInfo,
}

/// Resolve the configuration for a parsed invocation: defaults, then
/// the config file, then --set overrides in order, then --seed/--out.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for arg in &cli.set {
        cfg.set_arg(arg)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(out) = &cli.out {
        cfg.set("out", &out.to_string_lossy())?;
    }
    Ok(cfg)
}

/// Run one command against a resolved configuration, returning its
/// one-line (or short multi-line) stdout summary.
pub fn run(command: Command, cfg: &RunConfig) -> Result<String> {
    match command {
        Command::Preprocess => cmd_preprocess(cfg),
        Command::Train => cmd_train(cfg),
        Command::Score => cmd_score(cfg),
        Command::Eval => cmd_eval(cfg),
        Command::Select => cmd_select(cfg),
        Command::Synth => cmd_synth(cfg),
        Command::EdfInfo => cmd_edf_info(cfg),
    }
}

/// Binary entry point: parse, run, report, exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    let outcome = resolve_config(&cli).and_then(|cfg| run(cli.command, &cfg));
    match outcome {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(err) => {
            let line = err.to_string().replace('\n', "; ");
            eprintln!("sincvae: [E{}] {line}", err.exit_code());
            err.exit_code()
        }
    }
}
