//! Cross-validated grid search over a small custom space, then the
//! staged statistical selection: normality, omnibus test, pairwise
//! comparisons, one-sigma rule, and complexity tie-break.

use rand::SeedableRng;
use sincvae::ingest::{synth_generate, BurstSpec, SynthSpec};
use sincvae::selection::{
    grid_expand, kfold, results_csv, run_trials, select_configuration, trial_seed,
    SearchSpace, SelectionSettings,
};
use sincvae::signal::{segment_windows, zscore_windows, ChannelStats};
use sincvae::vae::{
    init_params, reconstruct_mse, train, Activation, TrainConfig, VaeArchitecture, Variant,
};

fn main() -> sincvae::Result<()> {
    let space = SearchSpace {
        kernel_lengths: vec![9, 17],
        filter_counts: vec![2],
        activations: vec![Activation::Identity],
        latent_dims: vec![4, 8],
    };
    let configs = grid_expand(&space)?;
    println!("grid: {} configurations", configs.len());

    // small normal-only pool to cross-validate on
    let spec = SynthSpec {
        duration_s: 90.0,
        bursts: BurstSpec { count: 0, ..SynthSpec::default().bursts },
        seed: 41,
        ..SynthSpec::default()
    };
    let (rec, _) = synth_generate(&spec)?;
    let raw = segment_windows(&rec, 1.0, None)?;
    let stats = ChannelStats::fit(&raw);
    let pool = zscore_windows(&raw, &stats)?;

    let folds = kfold(pool.count(), 3, 41)?;
    let base = VaeArchitecture {
        variant: Variant::Sinc,
        filter_count: 2,
        kernel_length: 9,
        activation: Activation::Identity,
        latent_dim: 4,
        conv_blocks: 1,
        channels: 4,
        input_channels: 1,
        window_len: pool.window_len(),
        sampling_rate: pool.sampling_rate(),
    };

    // one trial = train on all folds but one, score the held-out fold
    let eval = |cfg: &sincvae::selection::Configuration, fold: usize| -> sincvae::Result<f64> {
        let arch = cfg.apply(&base);
        let held: &[usize] = &folds[fold];
        let train_idx: Vec<usize> = (0..pool.count()).filter(|i| !held.contains(i)).collect();
        let tc = TrainConfig {
            max_epochs: 3,
            patience: 3,
            batch_size: 16,
            seed: trial_seed(41, cfg.id as u64, fold as u64),
            ..TrainConfig::default()
        };
        let model = train(&pool.subset(&train_idx)?, &tc, &arch)?;
        let scores = reconstruct_mse(&model, pool.subset(held)?.data())?;
        Ok(scores.iter().sum::<f64>() / scores.len() as f64)
    };
    let param_count = |cfg: &sincvae::selection::Configuration| -> usize {
        let arch = cfg.apply(&base);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        init_params(&arch, &mut rng)
            .map(|p| p.iter().map(|(_, t)| t.data().len()).sum())
            .unwrap_or(usize::MAX)
    };

    let results = run_trials(&configs, folds.len(), eval, param_count, false)?;
    print!("{}", results_csv(&configs, &results)?);

    let report = select_configuration(&configs, &results, &SelectionSettings::default())?;
    for stage in &report.stages {
        println!("stage {:<10} survivors {:?}", stage.stage, stage.survivors);
    }
    let chosen = configs.iter().find(|c| c.id == report.chosen).expect("chosen id is from the grid");
    println!(
        "chosen: id {} (kernel {}, filters {}, {}, latent {})",
        chosen.id,
        chosen.kernel_length,
        chosen.filter_count,
        chosen.activation.name(),
        chosen.latent_dim
    );
    Ok(())
}
