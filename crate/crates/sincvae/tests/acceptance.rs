//! End-to-end acceptance checks, one per core contract of the crate.
//! Each test prints exactly one `criterion N (...): PASS/FAIL` line
//! (run with `--nocapture` to see them on success).

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sincvae::cli::{run, Command, RunConfig};
use sincvae::detector::{classify, compute_metrics, resolve_threshold, ThresholdPolicy};
use sincvae::ingest::{read_edf, read_edf_header, write_edf, EdfWriteOptions};
use sincvae::selection::{grid_expand, select_configuration, SearchSpace, SelectionSettings, TrialResult};
use sincvae::signal::{segment_windows, zscore_windows, ChannelStats, Label, TimeSeriesRecording, WindowSet};
use sincvae::sinc::{effective_cutoffs, frequency_response, kernel_bank, peak_response};
use sincvae::stats::{anova_oneway, kruskal_wallis, mann_whitney_u, shapiro_wilk};
use sincvae::tensor::{Graph, ParamSet, Real, Tensor};
use sincvae::vae::{
    build_forward, init_params, kl_closed_form, kl_monte_carlo, reconstruct_mse, train,
    Activation, GraphParams, TrainConfig, VaeArchitecture, VaeModel, Variant,
};

fn criterion(n: usize, name: &str, body: impl FnOnce() -> Result<String, String>) {
    match body() {
        Ok(detail) => println!("criterion {n} ({name}): PASS — {detail}"),
        Err(msg) => {
            println!("criterion {n} ({name}): FAIL — {msg}");
            panic!("criterion {n} ({name}): {msg}");
        }
    }
}

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- 1

fn tiny_arch() -> VaeArchitecture {
    VaeArchitecture {
        variant: Variant::Sinc,
        filter_count: 2,
        kernel_length: 7,
        activation: Activation::Tanh, // smooth everywhere, so finite differences are valid
        latent_dim: 2,
        conv_blocks: 1,
        channels: 2,
        input_channels: 1,
        window_len: 64,
        sampling_rate: 64.0,
    }
}

fn elbo_loss(arch: &VaeArchitecture, params: &ParamSet, x: &Tensor, eps: &Tensor) -> Result<f64, String> {
    let mut g = Graph::new();
    let gp = GraphParams::trainable(&mut g, params);
    let xv = g.constant(x.clone());
    let ev = g.constant(eps.clone());
    let pass = build_forward(&mut g, arch, &gp, xv, ev).map_err(s)?;
    Ok(g.value(pass.total).item() as f64)
}

#[test]
fn criterion_1_elbo_gradients() {
    criterion(1, "elbo gradient check", || {
        let start = Instant::now();
        let arch = tiny_arch();
        let mut rng = ChaCha8Rng::seed_from_u64(0xACC1);
        let params = init_params(&arch, &mut rng).map_err(s)?;
        let batch = 3;
        let x = Tensor::new(
            vec![batch, 1, 64],
            (0..batch * 64).map(|_| rng.gen_range(-0.8..0.8) as Real).collect(),
        )
        .map_err(s)?;
        let eps = Tensor::new(
            vec![batch, 2],
            (0..batch * 2).map(|_| rng.gen_range(-1.0..1.0) as Real).collect(),
        )
        .map_err(s)?;

        // analytic gradients
        let mut g = Graph::new();
        let gp = GraphParams::trainable(&mut g, &params);
        let xv = g.constant(x.clone());
        let ev = g.constant(eps.clone());
        let pass = build_forward(&mut g, &arch, &gp, xv, ev).map_err(s)?;
        g.backward(pass.total).map_err(s)?;
        let grads = gp.grads(&g).map_err(s)?;

        // central finite differences over every parameter element,
        // including the raw sinc cutoffs
        let mut max_rel = 0.0f64;
        let mut worst = String::new();
        let mut checked = 0usize;
        for k in 0..params.len() {
            let name = params.name_at(k).to_string();
            for j in 0..grads[k].data().len() {
                let v = params.tensor_at(k).data()[j] as f64;
                let h = 1e-4 * v.abs().max(1.0);
                let mut plus = params.clone();
                plus.tensor_at_mut(k).data_mut()[j] = (v + h) as Real;
                let mut minus = params.clone();
                minus.tensor_at_mut(k).data_mut()[j] = (v - h) as Real;
                let numeric =
                    (elbo_loss(&arch, &plus, &x, &eps)? - elbo_loss(&arch, &minus, &x, &eps)?)
                        / (2.0 * h);
                let analytic = grads[k].data()[j] as f64;
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                if rel > max_rel {
                    max_rel = rel;
                    worst = format!("{name}[{j}]");
                }
                checked += 1;
            }
        }
        let elapsed = start.elapsed().as_secs_f64();
        if max_rel >= 1e-4 {
            return Err(format!(
                "max relative gradient error {max_rel:.3e} at {worst} (limit 1e-4)"
            ));
        }
        if elapsed >= 10.0 {
            return Err(format!("took {elapsed:.1} s (limit 10 s)"));
        }
        if !params.iter().any(|(n, _)| n == "sinc.f1")
            || !params.iter().any(|(n, _)| n == "sinc.f2")
        {
            return Err("cutoff parameters missing from the checked set".into());
        }
        Ok(format!(
            "{checked} parameter elements, max relative error {max_rel:.2e}, {elapsed:.1} s"
        ))
    });
}

// ---------------------------------------------------------------- 2

#[test]
fn criterion_2_filterbank_spectrum() {
    criterion(2, "filterbank spectral contract", || {
        let start = Instant::now();
        let (fs, len, nfft) = (256.0, 101usize, 4096usize);
        let bin = fs / nfft as f64;
        let nyquist = fs / 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED2);
        let mut worst_db = f64::INFINITY;
        for i in 0..20 {
            // bands wide enough for the passband to form and far enough
            // from DC/Nyquist that both probes sit in the stopband
            let f1: f64 = rng.gen_range(6.0..40.0);
            let width: f64 = rng.gen_range(10.0..50.0);
            let f2 = f1 + width;
            let (f1_abs, f2_abs) = effective_cutoffs(f1, f2);
            let bank = kernel_bank(&[f1 as Real], &[f2 as Real], len, fs).map_err(s)?;
            let taps = bank.data();

            let (peak_f, peak_m) = peak_response(taps, fs, nfft);
            if peak_f < f1_abs - bin || peak_f > f2_abs + bin {
                return Err(format!(
                    "pair {i}: peak {peak_f:.3} Hz outside [{f1_abs:.3}, {f2_abs:.3}] ± {bin} Hz"
                ));
            }
            let probe = (2.0 * f2_abs).min(0.95 * nyquist);
            let mags = frequency_response(taps, fs, &[0.0, probe]);
            for (freq, mag) in [(0.0, mags[0]), (probe, mags[1])] {
                let db_below = 20.0 * (peak_m / mag.max(1e-300)).log10();
                worst_db = worst_db.min(db_below);
                if db_below < 20.0 {
                    return Err(format!(
                        "pair {i}: response at {freq:.2} Hz only {db_below:.1} dB below peak"
                    ));
                }
            }
        }
        let elapsed = start.elapsed().as_secs_f64();
        if elapsed >= 5.0 {
            return Err(format!("took {elapsed:.1} s (limit 5 s)"));
        }
        Ok(format!(
            "20 pairs, peaks in band ± {bin} Hz, worst stopband rejection {worst_db:.1} dB, {elapsed:.1} s"
        ))
    });
}

// ---------------------------------------------------------------- 3

#[test]
fn criterion_3_kl_closed_form() {
    criterion(3, "kl closed form vs monte carlo", || {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED3);
        let mut max_rel = 0.0f64;
        for pair in 0..10u64 {
            let mu = Tensor::new(
                vec![1, 4],
                (0..4).map(|_| rng.gen_range(-1.5..1.5) as Real).collect(),
            )
            .map_err(s)?;
            let logvar = Tensor::new(
                vec![1, 4],
                (0..4).map(|_| rng.gen_range(-1.5..1.5) as Real).collect(),
            )
            .map_err(s)?;
            let cf = kl_closed_form(&mu, &logvar).map_err(s)?;
            let mc = kl_monte_carlo(&mu, &logvar, 100_000, 1000 + pair).map_err(s)?;
            let rel = (mc - cf).abs() / cf.abs();
            max_rel = max_rel.max(rel);
            if rel > 0.01 {
                return Err(format!(
                    "pair {pair}: closed form {cf:.6}, monte carlo {mc:.6} (rel {rel:.4})"
                ));
            }
        }
        let zeros = Tensor::new(vec![1, 4], vec![0.0; 4]).map_err(s)?;
        let at_prior = kl_closed_form(&zeros, &zeros).map_err(s)?;
        if at_prior != 0.0 {
            return Err(format!("KL at (0, 0) is {at_prior}, expected exactly 0"));
        }
        let elapsed = start.elapsed().as_secs_f64();
        if elapsed >= 10.0 {
            return Err(format!("took {elapsed:.1} s (limit 10 s)"));
        }
        Ok(format!(
            "10 pairs within 1% (max rel {max_rel:.4}), exact zero at the prior, {elapsed:.1} s"
        ))
    });
}

// ---------------------------------------------------------------- 4

#[test]
fn criterion_4_statistics_reference() {
    criterion(4, "statistics reference values", || {
        let start = Instant::now();
        let stat_tol = 1e-6;
        let p_tol = 1e-3;
        let check = |what: &str, got: (f64, f64), want: (f64, f64)| -> Result<(), String> {
            if (got.0 - want.0).abs() > stat_tol {
                return Err(format!("{what}: statistic {} vs reference {}", got.0, want.0));
            }
            if (got.1 - want.1).abs() > p_tol {
                return Err(format!("{what}: p {} vs reference {}", got.1, want.1));
            }
            Ok(())
        };

        // published worked examples, references from independent
        // implementations
        let weights = [148.0, 154.0, 158.0, 160.0, 161.0, 162.0, 166.0, 170.0, 182.0, 195.0, 236.0];
        check(
            "shapiro-wilk n=11",
            shapiro_wilk(&weights).map_err(s)?,
            (0.7888146948631716, 0.006703814061898823),
        )?;
        let n12 = [35.0, 23.0, 12.0, 10.0, 18.0, 41.0, 27.0, 8.0, 31.0, 22.0, 15.0, 29.0];
        check(
            "shapiro-wilk n=12",
            shapiro_wilk(&n12).map_err(s)?,
            (0.9694977951116115, 0.9054723188098259),
        )?;
        let a = [12.1, 9.8, 14.3, 11.0, 10.5, 13.2, 9.1, 12.7];
        let b = [8.4, 7.9, 9.3, 8.8, 7.2, 8.1];
        check(
            "mann-whitney no ties",
            mann_whitney_u(&a, &b).map_err(s)?,
            (47.0, 0.003675612117741231),
        )?;
        let a = [1.0, 2.0, 2.0, 3.0, 5.0, 5.0, 5.0, 8.0];
        let b = [2.0, 3.0, 3.0, 5.0, 6.0, 7.0];
        check(
            "mann-whitney midranks",
            mann_whitney_u(&a, &b).map_err(s)?,
            (19.5, 0.5982452156787472),
        )?;
        let groups = [
            vec![6.4, 6.8, 7.2, 8.3, 8.4, 9.1, 9.4, 9.7],
            vec![2.5, 3.7, 4.9, 5.4, 5.9, 8.1, 8.2],
            vec![1.3, 4.1, 4.9, 5.2, 5.5, 8.2],
        ];
        check(
            "kruskal-wallis k=3",
            kruskal_wallis(&groups).map_err(s)?,
            (9.849061861415572, 0.007266133800809759),
        )?;
        let groups = [
            vec![23.0, 25.0, 21.0, 27.0, 24.0],
            vec![30.0, 28.0, 31.0, 26.0, 29.0],
            vec![22.0, 20.0, 25.0, 24.0, 21.0],
        ];
        check(
            "anova k=3",
            anova_oneway(&groups).map_err(s)?,
            (12.8, 0.0010567211668325313),
        )?;

        // hand-derived fixtures (see the library's doc comments)
        let (h, _) = kruskal_wallis(&[vec![1.0, 2.0], vec![3.0, 4.0]]).map_err(s)?;
        if (h - 2.4).abs() > 1e-12 {
            return Err(format!("H fixture: got {h}, want 2.4"));
        }
        let (u, _) = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).map_err(s)?;
        if u != 0.0 {
            return Err(format!("U fixture: got {u}, want exactly 0"));
        }
        let (f, _) = anova_oneway(&[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0]]).map_err(s)?;
        if f != 1.5 {
            return Err(format!("F fixture: got {f}, want exactly 1.5"));
        }

        let elapsed = start.elapsed().as_secs_f64();
        if elapsed >= 5.0 {
            return Err(format!("took {elapsed:.1} s (limit 5 s)"));
        }
        Ok(format!(
            "6 reference examples within tolerance; H=2.4 (±1e-12), U=0 and F=1.5 exact; {elapsed:.1} s"
        ))
    });
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_5_selection_pipeline() {
    criterion(5, "selection pipeline", || {
        let configs = grid_expand(&SearchSpace::chb_mit()).map_err(s)?;
        if configs.len() != 210 {
            return Err(format!("grid has {} configurations, expected 210", configs.len()));
        }

        // one clearly dominant configuration
        let four = &configs[..4];
        let fold_mse = [
            vec![1.00, 1.05, 0.95, 1.02, 0.98],
            vec![5.00, 5.10, 4.90, 5.05, 4.95],
            vec![6.00, 6.10, 5.90, 6.05, 5.95],
            vec![7.00, 7.10, 6.90, 7.05, 6.95],
        ];
        let results: Vec<TrialResult> = four
            .iter()
            .zip(&fold_mse)
            .map(|(c, mse)| TrialResult::new(c.id, mse.clone(), 1000 + c.id))
            .collect::<Result<_, _>>()
            .map_err(s)?;
        let settings = SelectionSettings::default();
        let report = select_configuration(four, &results, &settings).map_err(s)?;
        if report.chosen != four[0].id {
            return Err(format!(
                "dominant config {} not chosen (got {})",
                four[0].id, report.chosen
            ));
        }

        // survivor sets must be nested stage over stage
        let mut prev: Option<&[usize]> = None;
        for stage in &report.stages {
            if let Some(p) = prev {
                if !stage.survivors.iter().all(|id| p.contains(id)) {
                    return Err(format!(
                        "stage {} survivors {:?} not a subset of {:?}",
                        stage.stage, stage.survivors, p
                    ));
                }
            }
            prev = Some(&stage.survivors);
        }

        // deterministic choice: identical inputs, identical report
        let again = select_configuration(four, &results, &settings).map_err(s)?;
        let a = serde_json::to_string(&report).map_err(s)?;
        let b = serde_json::to_string(&again).map_err(s)?;
        if a != b {
            return Err("selection report differs between identical runs".into());
        }
        Ok(format!(
            "210-point grid, nested stages {:?}, dominant config selected deterministically",
            report.stages.iter().map(|t| t.stage.as_str()).collect::<Vec<_>>()
        ))
    });
}

// ---------------------------------------------------------------- 6

struct PipelineDirs {
    root: PathBuf,
}

impl PipelineDirs {
    fn path(&self, sub: &str) -> String {
        self.root.join(sub).to_string_lossy().into_owned()
    }
}

fn cfg_from(pairs: &[(&str, &str)]) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::default();
    for &(k, v) in pairs {
        cfg.set(k, v).map_err(s)?;
    }
    Ok(cfg)
}

fn run_cmd(command: Command, pairs: &[(&str, &str)]) -> Result<String, String> {
    run(command, &cfg_from(pairs)?).map_err(s)
}

fn json_at(path: &Path) -> Result<serde_json::Value, String> {
    let text = std::fs::read_to_string(path).map_err(s)?;
    serde_json::from_str(&text).map_err(s)
}

#[test]
fn criterion_6_end_to_end_synthetic() {
    criterion(6, "end-to-end synthetic detection", || {
        let start = Instant::now();
        let dir = tempfile::tempdir().map_err(s)?;
        let d = PipelineDirs { root: dir.path().to_path_buf() };

        // normal-only training track: 2600 one-second windows at 128 Hz,
        // so the 80% training split alone exceeds 2000 windows. No sine
        // component: a track's sine phase is constant across windows, so
        // it would be a learnable fingerprint that differs between the
        // train and test tracks instead of shared structure.
        run_cmd(Command::Synth, &[
            ("synth.duration_s", "2600"),
            ("synth.burst_count", "0"),
            ("synth.sines", ""),
            ("synth.track_id", "train"),
            ("seed", "11"),
            ("out", &d.path("raw")),
        ])?;
        // held-out mix with 3x RMS bursts (30 bursts x 12 s)
        run_cmd(Command::Synth, &[
            ("synth.duration_s", "1200"),
            ("synth.burst_count", "30"),
            ("synth.burst_duration_s", "12"),
            ("synth.burst_gain", "3"),
            ("synth.sines", ""),
            ("synth.track_id", "test"),
            ("seed", "12"),
            ("out", &d.path("raw")),
        ])?;

        let msg = run_cmd(Command::Preprocess, &[
            ("data.input", &d.path("raw/train.edf")),
            ("out", &d.path("pre_train")),
        ])?;
        if !msg.contains("wrote 2600 windows") {
            return Err(format!("training set unexpectedly small: {msg}"));
        }
        run_cmd(Command::Preprocess, &[
            ("data.input", &d.path("raw/test.edf")),
            ("data.annotations", &d.path("raw/test_annotations.csv")),
            ("out", &d.path("pre_test")),
        ])?;

        let train_pairs = [
            ("data.input", d.path("pre_train/windows.svws")),
            ("model.filters", "4".into()),
            ("model.kernel", "33".into()),
            ("model.latent", "16".into()),
            ("model.channels", "16".into()),
            ("train.epochs", "60".into()),
            ("train.patience", "10".into()),
            ("seed", "7".into()),
            ("out", d.path("model")),
        ];
        let borrowed: Vec<(&str, &str)> =
            train_pairs.iter().map(|(k, v)| (*k, v.as_str())).collect();
        run_cmd(Command::Train, &borrowed)?;

        run_cmd(Command::Eval, &[
            ("data.input", &d.path("pre_test/windows.svws")),
            ("model.checkpoint", &d.path("model/model.svae")),
            ("threshold.policy", "percentile:95"),
            ("out", &d.path("eval")),
        ])?;
        let report = json_at(&dir.path().join("eval/report.json"))?;
        let f1 = report["metrics"]["f1"].as_f64().ok_or("f1 missing")?;
        let fpr = report["metrics"]["false_positive_rate"].as_f64().ok_or("fpr missing")?;
        if f1 < 0.9 {
            return Err(format!("sinc variant F1 {f1:.4} below 0.9"));
        }
        if fpr > 0.07 {
            return Err(format!("false-positive rate {fpr:.4} above 0.07"));
        }

        // the plain variant must run the same pipeline to completion
        run_cmd(Command::Train, &[
            ("data.input", &d.path("pre_train/windows.svws")),
            ("model.variant", "plain"),
            ("model.latent", "16"),
            ("model.channels", "16"),
            ("train.epochs", "8"),
            ("train.patience", "8"),
            ("seed", "7"),
            ("out", &d.path("model_plain")),
        ])?;
        run_cmd(Command::Eval, &[
            ("data.input", &d.path("pre_test/windows.svws")),
            ("model.checkpoint", &d.path("model_plain/model.svae")),
            ("out", &d.path("eval_plain")),
        ])?;
        let plain = json_at(&dir.path().join("eval_plain/report.json"))?;
        if plain["metrics"]["f1"].as_f64().is_none() {
            return Err("plain-variant report lacks metrics".into());
        }

        let elapsed = start.elapsed().as_secs_f64();
        if elapsed >= 600.0 {
            return Err(format!("took {elapsed:.0} s (limit 600 s)"));
        }
        Ok(format!(
            "sinc F1 {f1:.4}, FPR {fpr:.4} at the 95th-percentile threshold; plain variant completed; {elapsed:.0} s"
        ))
    });
}

// ---------------------------------------------------------------- 7

#[test]
fn criterion_7_edf_round_trip() {
    criterion(7, "edf round trip", || {
        let dir = tempfile::tempdir().map_err(s)?;
        for seed in 0..5u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let channels = 1 + (seed as usize % 3);
            let n = 256 * (2 + seed as usize % 2);
            let amp = 50.0 + 20.0 * seed as f64;
            let chans: Vec<Vec<Real>> = (0..channels)
                .map(|_| (0..n).map(|_| rng.gen_range(-amp..amp) as Real).collect())
                .collect();
            let names = (0..channels).map(|i| format!("EEG F{i}")).collect();
            let rec = TimeSeriesRecording::new(chans, 256.0, names, format!("fixture{seed}"))
                .map_err(s)?;
            let opts = EdfWriteOptions::covering(&rec);
            let path = dir.path().join(format!("{seed}.edf"));
            write_edf(&path, &rec, &opts).map_err(s)?;

            let back = read_edf(&path, None).map_err(s)?;
            let lsb = (opts.physical_max - opts.physical_min) / 65535.0;
            for (c, (a, b)) in rec.channels().iter().zip(back.channels()).enumerate() {
                for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
                    let err = (x as f64 - y as f64).abs();
                    if err > lsb / 2.0 + 1e-12 {
                        return Err(format!(
                            "seed {seed} ch {c} sample {i}: error {err:.3e} exceeds half LSB {:.3e}",
                            lsb / 2.0
                        ));
                    }
                }
            }

            // a decoded file re-encodes byte-identically: headers and data
            let rewritten = dir.path().join(format!("{seed}b.edf"));
            write_edf(&rewritten, &back, &opts).map_err(s)?;
            let first = std::fs::read(&path).map_err(s)?;
            let second = std::fs::read(&rewritten).map_err(s)?;
            if first != second {
                return Err(format!("seed {seed}: rewrite differs from original file"));
            }
            let h1 = read_edf_header(&path).map_err(s)?;
            let h2 = read_edf_header(&rewritten).map_err(s)?;
            if h1 != h2 {
                return Err(format!("seed {seed}: parsed headers differ"));
            }
        }
        Ok("5 seeded fixtures: samples within half LSB, rewrites byte-identical".into())
    });
}

// ---------------------------------------------------------------- 8

/// Locate user-supplied single-channel segment sets (normal set A /
/// seizure set E). Checked: $SINCVAE_BONN_DIR, then <repo>/data/bonn,
/// with per-set directory names A|Z|setA and E|S|setE.
fn bonn_dirs() -> Option<(PathBuf, PathBuf)> {
    let roots: Vec<PathBuf> = match std::env::var_os("SINCVAE_BONN_DIR") {
        Some(v) => vec![PathBuf::from(v)],
        None => vec![Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/bonn")],
    };
    let find = |root: &Path, names: &[&str]| -> Option<PathBuf> {
        names.iter().map(|n| root.join(n)).find(|p| p.is_dir())
    };
    for root in roots {
        let a = find(&root, &["A", "Z", "setA", "set_a"]);
        let e = find(&root, &["E", "S", "setE", "set_e"]);
        if let (Some(a), Some(e)) = (a, e) {
            return Some((a, e));
        }
    }
    None
}

fn windows_of(recs: &[TimeSeriesRecording]) -> Result<Vec<WindowSet>, String> {
    recs.iter().map(|r| segment_windows(r, 1.0, None).map_err(s)).collect()
}

#[test]
fn criterion_8_bonn_reproduction() {
    let Some((a_dir, e_dir)) = bonn_dirs() else {
        println!(
            "criterion 8 (bonn sets A/E reproduction): SKIP — segment data not found \
             (set SINCVAE_BONN_DIR or place sets under data/bonn)"
        );
        return;
    };
    criterion(8, "bonn sets A/E reproduction", || {
        let normal = sincvae::ingest::read_bonn(&a_dir).map_err(s)?;
        let seizure = sincvae::ingest::read_bonn(&e_dir).map_err(s)?;
        let (train_segs, test_segs) = sincvae::signal::split_bonn(normal, 0.2).map_err(s)?;
        let train_ws = WindowSet::concat(&windows_of(&train_segs)?).map_err(s)?;
        let test_normal = WindowSet::concat(&windows_of(&test_segs)?).map_err(s)?;
        let test_seizure = WindowSet::concat(&windows_of(&seizure)?).map_err(s)?;

        let arch = VaeArchitecture {
            variant: Variant::Sinc,
            filter_count: 16,
            kernel_length: 41,
            activation: Activation::Identity,
            latent_dim: 32,
            conv_blocks: 2,
            channels: 32,
            input_channels: 1,
            window_len: train_ws.window_len(),
            sampling_rate: train_ws.sampling_rate(),
        };
        let stats = ChannelStats::fit(&train_ws);
        let z_train = zscore_windows(&train_ws, &stats).map_err(s)?;
        let z_normal = zscore_windows(&test_normal, &stats).map_err(s)?;
        let z_seizure = zscore_windows(&test_seizure, &stats).map_err(s)?;

        let mut labels = vec![Label::NonSeizure; z_normal.count()];
        labels.extend(vec![Label::Seizure; z_seizure.count()]);

        let mut f1s = Vec::new();
        for seed in [1u64, 2, 3] {
            let tc = TrainConfig {
                max_epochs: 200,
                patience: 20,
                seed,
                ..TrainConfig::default()
            };
            let model: VaeModel = train(&z_train, &tc, &arch).map_err(s)?;
            let mut scores = reconstruct_mse(&model, z_normal.data()).map_err(s)?;
            scores.extend(reconstruct_mse(&model, z_seizure.data()).map_err(s)?);
            let t2 = resolve_threshold(&model.val_scores, ThresholdPolicy::Percentile(95.0))
                .map_err(s)?;
            let preds = classify(&scores, t2);
            let metrics = compute_metrics(&preds, &labels).map_err(s)?;
            if metrics.f1 < 0.95 {
                return Err(format!("seed {seed}: F1 {:.4} below 0.95", metrics.f1));
            }
            f1s.push(metrics.f1);
        }
        Ok(format!(
            "3 seeds at the 95th-percentile threshold, F1 = {:?}",
            f1s.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
        ))
    });
}

// ---------------------------------------------------------------- 9

/// Run the full artifact pipeline into `root` and return a sorted
/// snapshot of every file it produced.
fn artifact_pipeline(d: &PipelineDirs) -> Result<Vec<(PathBuf, Vec<u8>)>, String> {
    run_cmd(Command::Synth, &[
        ("synth.duration_s", "60"),
        ("synth.burst_count", "2"),
        ("synth.burst_duration_s", "4"),
        ("seed", "21"),
        ("out", &d.path("raw")),
    ])?;
    run_cmd(Command::Preprocess, &[
        ("data.input", &d.path("raw/synthetic.edf")),
        ("data.annotations", &d.path("raw/synthetic_annotations.csv")),
        ("out", &d.path("pre")),
    ])?;
    let tiny_model: &[(&str, &str)] = &[
        ("model.filters", "2"),
        ("model.kernel", "9"),
        ("model.latent", "4"),
        ("model.channels", "4"),
        ("train.batch", "16"),
    ];
    let mut train_pairs = vec![
        ("data.input", d.path("pre/windows.svws")),
        ("train.epochs", "3".into()),
        ("seed", "22".into()),
        ("out", d.path("model")),
    ];
    train_pairs.extend(tiny_model.iter().map(|&(k, v)| (k, v.to_string())));
    let borrowed: Vec<(&str, &str)> = train_pairs.iter().map(|(k, v)| (*k, v.as_str())).collect();
    run_cmd(Command::Train, &borrowed)?;
    run_cmd(Command::Score, &[
        ("data.input", &d.path("pre/windows.svws")),
        ("model.checkpoint", &d.path("model/model.svae")),
        ("out", &d.path("scores")),
    ])?;
    run_cmd(Command::Eval, &[
        ("data.input", &d.path("pre/windows.svws")),
        ("model.checkpoint", &d.path("model/model.svae")),
        ("out", &d.path("eval")),
    ])?;
    let mut select_pairs = vec![
        ("data.input", d.path("pre/windows.svws")),
        ("select.limit", "2".into()),
        ("select.folds", "3".into()),
        ("select.epochs", "2".into()),
        ("seed", "23".into()),
        ("out", d.path("select")),
    ];
    select_pairs.extend(tiny_model.iter().map(|&(k, v)| (k, v.to_string())));
    let borrowed: Vec<(&str, &str)> =
        select_pairs.iter().map(|(k, v)| (*k, v.as_str())).collect();
    run_cmd(Command::Select, &borrowed)?;

    let mut files = Vec::new();
    let mut stack = vec![d.root.clone()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(s)? {
            let path = entry.map_err(s)?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push((path.clone(), std::fs::read(&path).map_err(s)?));
            }
        }
    }
    files.sort();
    Ok(files)
}

#[test]
fn criterion_9_bit_identical_artifacts() {
    criterion(9, "bit-identical artifacts on rerun", || {
        let dir = tempfile::tempdir().map_err(s)?;
        let d = PipelineDirs { root: dir.path().to_path_buf() };
        let first = artifact_pipeline(&d)?;
        let second = artifact_pipeline(&d)?; // identical configs and seeds, same out dirs
        if first.len() != second.len() {
            return Err(format!(
                "artifact count changed between runs: {} vs {}",
                first.len(),
                second.len()
            ));
        }
        let mut kinds = std::collections::BTreeSet::new();
        for ((pa, ba), (pb, bb)) in first.iter().zip(&second) {
            if pa != pb {
                return Err(format!("artifact set changed: {} vs {}", pa.display(), pb.display()));
            }
            if ba != bb {
                return Err(format!("{} differs between identical reruns", pa.display()));
            }
            if let Some(ext) = pa.extension().and_then(|e| e.to_str()) {
                kinds.insert(ext.to_string());
            }
        }
        for required in ["svae", "svws", "edf", "csv", "json", "txt", "config"] {
            if !kinds.contains(required) {
                return Err(format!("no .{required} artifact was produced"));
            }
        }
        Ok(format!(
            "{} artifacts ({}) byte-identical across reruns",
            first.len(),
            kinds.into_iter().collect::<Vec<_>>().join(", ")
        ))
    });
}
