//! Grid-search expansion, cross-validation resampling, and the
//! statistical configuration-selection pipeline.
//!
//! Selection runs in fixed stages: keep every configuration whose mean
//! fold MSE is within one standard deviation of the best, test each
//! survivor's folds for normality (Shapiro-Wilk, recorded), run an
//! omnibus location test over the survivors (Kruskal-Wallis when any
//! survivor looks non-normal at the significance level, one-way ANOVA
//! otherwise), and — only when the omnibus test is significant — drop
//! survivors that differ from the lowest-mean configuration in a
//! pairwise Mann-Whitney comparison. Whatever remains is ranked by
//! model complexity. Survivor sets are nested across stages and the
//! best-mean configuration can never be eliminated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::stats::{anova_oneway, kruskal_wallis, mann_whitney_u, shapiro_wilk};
use crate::vae::{Activation, VaeArchitecture};

/// Finite ordered value sets, one per tuned architecture axis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub kernel_lengths: Vec<usize>,
    pub filter_counts: Vec<usize>,
    pub activations: Vec<Activation>,
    pub latent_dims: Vec<usize>,
}

impl SearchSpace {
    /// Single-channel grid: 16 kernel sizes x 9 filter counts x
    /// 3 activations x 5 latent dims = 2160 configurations.
    pub fn bonn() -> Self {
        let mut kernel_lengths = vec![3, 5, 7];
        kernel_lengths.extend((0..13).map(|i| 11 + 10 * i));
        Self {
            kernel_lengths,
            filter_counts: (1..=9).map(|n| 1 << n).collect(),
            activations: vec![Activation::Relu, Activation::Tanh, Activation::Identity],
            latent_dims: (3..=7).map(|n| 1 << n).collect(),
        }
    }

    /// Multi-channel grid: 5 x 7 x 2 x 3 = 210 configurations.
    pub fn chb_mit() -> Self {
        Self {
            kernel_lengths: vec![71, 81, 111, 131, 151],
            filter_counts: (2..=8).map(|n| 1 << n).collect(),
            activations: vec![Activation::Relu, Activation::Identity],
            latent_dims: vec![32, 64, 128],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel_lengths.is_empty()
            || self.filter_counts.is_empty()
            || self.activations.is_empty()
            || self.latent_dims.is_empty()
        {
            return Err(Error::Config("search space has an empty axis".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.kernel_lengths.len()
            * self.filter_counts.len()
            * self.activations.len()
            * self.latent_dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One grid point. The id is the configuration's position in the
/// expansion order and is stable for a given space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    pub id: usize,
    pub kernel_length: usize,
    pub filter_count: usize,
    pub activation: Activation,
    pub latent_dim: usize,
}

impl Configuration {
    /// Overlay this grid point on a base architecture.
    pub fn apply(&self, base: &VaeArchitecture) -> VaeArchitecture {
        let mut arch = base.clone();
        arch.kernel_length = self.kernel_length;
        arch.filter_count = self.filter_count;
        arch.activation = self.activation;
        arch.latent_dim = self.latent_dim;
        arch
    }
}

/// Cartesian product in declared axis order (kernel, filters,
/// activation, latent), last axis fastest; ids count up from 0.
pub fn grid_expand(space: &SearchSpace) -> Result<Vec<Configuration>> {
    space.validate()?;
    let mut out = Vec::with_capacity(space.len());
    for &kernel_length in &space.kernel_lengths {
        for &filter_count in &space.filter_counts {
            for &activation in &space.activations {
                for &latent_dim in &space.latent_dims {
                    out.push(Configuration {
                        id: out.len(),
                        kernel_length,
                        filter_count,
                        activation,
                        latent_dim,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Shuffle 0..n into k disjoint covering folds (sizes differ by at
/// most one), deterministic per seed. Fold slices are sorted.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::Config(format!(
            "kfold: need 2 <= k <= n, got k {k}, n {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = rand::Rng::gen_range(&mut rng, 0..=i);
        order.swap(i, j);
    }
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut cursor = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold: Vec<usize> = order[cursor..cursor + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        cursor += size;
    }
    Ok(folds)
}

/// Each track takes one turn as the held-out test set; the remainder
/// trains. Returns (train track indices, test track index) per split.
pub fn leave_one_track_out(track_count: usize) -> Result<Vec<(Vec<usize>, usize)>> {
    if track_count < 2 {
        return Err(Error::Config(format!(
            "leave_one_track_out: need at least 2 tracks, got {track_count}"
        )));
    }
    Ok((0..track_count)
        .map(|test| ((0..track_count).filter(|&t| t != test).collect(), test))
        .collect())
}

/// Fold-level outcome of evaluating one configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialResult {
    pub config_id: usize,
    pub fold_mse: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of the fold vector.
    pub std: f64,
    pub param_count: usize,
}

impl TrialResult {
    pub fn new(config_id: usize, fold_mse: Vec<f64>, param_count: usize) -> Result<Self> {
        if fold_mse.len() < 2 {
            return Err(Error::Config(format!(
                "trial for config {config_id} has {} folds, need at least 2",
                fold_mse.len()
            )));
        }
        if fold_mse.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "trial for config {config_id} has a non-finite fold MSE"
            )));
        }
        let n = fold_mse.len() as f64;
        let mean = fold_mse.iter().sum::<f64>() / n;
        let var = fold_mse.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(Self {
            config_id,
            fold_mse,
            mean,
            std: var.sqrt(),
            param_count,
        })
    }
}

/// Keep configuration c iff mean(c) <= mean(best) + std(best). Returns
/// surviving config ids in ascending order; the best always survives.
pub fn one_sigma_filter(results: &[TrialResult]) -> Result<Vec<usize>> {
    let best = results
        .iter()
        .min_by(|a, b| {
            (a.mean, a.config_id)
                .partial_cmp(&(b.mean, b.config_id))
                .expect("finite means")
        })
        .ok_or_else(|| Error::Config("one_sigma_filter: no results".into()))?;
    let cut = best.mean + best.std;
    let mut keep: Vec<usize> = results
        .iter()
        .filter(|r| r.mean <= cut)
        .map(|r| r.config_id)
        .collect();
    keep.sort_unstable();
    Ok(keep)
}

/// Mix a base seed with trial coordinates so every (configuration,
/// fold) pair trains from its own stream regardless of scheduling.
pub fn trial_seed(base: u64, config_id: u64, fold: u64) -> u64 {
    let mut z = base
        ^ config_id.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ fold.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Evaluate every (configuration, fold) pair through `eval` and gather
/// per-configuration results. With `parallel` the pairs run on the
/// rayon pool; because each job is pure given its own derived seed,
/// the output is identical to the serial path.
pub fn run_trials<E, P>(
    configs: &[Configuration],
    fold_count: usize,
    eval: E,
    param_count: P,
    parallel: bool,
) -> Result<Vec<TrialResult>>
where
    E: Fn(&Configuration, usize) -> Result<f64> + Sync,
    P: Fn(&Configuration) -> usize + Sync,
{
    if fold_count < 2 {
        return Err(Error::Config(format!(
            "run_trials: need at least 2 folds, got {fold_count}"
        )));
    }
    let jobs: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..fold_count).map(move |f| (c, f)))
        .collect();
    let scores: Vec<f64> = if parallel {
        jobs.par_iter()
            .map(|&(c, f)| eval(&configs[c], f))
            .collect::<Result<_>>()?
    } else {
        jobs.iter()
            .map(|&(c, f)| eval(&configs[c], f))
            .collect::<Result<_>>()?
    };
    configs
        .iter()
        .enumerate()
        .map(|(c, cfg)| {
            let fold_mse = scores[c * fold_count..(c + 1) * fold_count].to_vec();
            TrialResult::new(cfg.id, fold_mse, param_count(cfg))
        })
        .collect()
}

/// Complexity axes, applied in order until a comparison differs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreakKey {
    Latent,
    Filters,
    Kernel,
    Activation,
}

impl TieBreakKey {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "latent" => Ok(Self::Latent),
            "filters" => Ok(Self::Filters),
            "kernel" => Ok(Self::Kernel),
            "activation" => Ok(Self::Activation),
            other => Err(Error::Config(format!(
                "unknown tie-break key {other:?} (expected latent|filters|kernel|activation)"
            ))),
        }
    }
}

/// Identity is the simplest activation (a no-op), then ReLU, then Tanh.
fn activation_rank(a: Activation) -> usize {
    match a {
        Activation::Identity => 0,
        Activation::Relu => 1,
        Activation::Tanh => 2,
    }
}

fn key_rank(cfg: &Configuration, key: TieBreakKey) -> usize {
    match key {
        TieBreakKey::Latent => cfg.latent_dim,
        TieBreakKey::Filters => cfg.filter_count,
        TieBreakKey::Kernel => cfg.kernel_length,
        TieBreakKey::Activation => activation_rank(cfg.activation),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SelectionSettings {
    pub alpha: f64,
    pub complexity_order: Vec<TieBreakKey>,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            complexity_order: vec![
                TieBreakKey::Latent,
                TieBreakKey::Filters,
                TieBreakKey::Kernel,
                TieBreakKey::Activation,
            ],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageTrace {
    pub stage: String,
    pub survivors: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormalityEntry {
    pub config_id: usize,
    pub w: f64,
    pub p: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OmnibusResult {
    pub test: String,
    pub statistic: f64,
    pub p: f64,
    pub significant: bool,
}

/// Symmetric pairwise Mann-Whitney p-values over `ids`; diagonal 1.
#[derive(Clone, Debug, Serialize)]
pub struct PMatrix {
    pub ids: Vec<usize>,
    pub p: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelectionReport {
    pub alpha: f64,
    pub complexity_order: Vec<TieBreakKey>,
    pub stages: Vec<StageTrace>,
    pub normality: Vec<NormalityEntry>,
    pub omnibus: Option<OmnibusResult>,
    pub p_matrix: PMatrix,
    pub chosen: usize,
}

pub fn select_configuration(
    configs: &[Configuration],
    results: &[TrialResult],
    settings: &SelectionSettings,
) -> Result<SelectionReport> {
    if !(settings.alpha > 0.0 && settings.alpha < 1.0) {
        return Err(Error::Config(format!(
            "significance level must be in (0, 1), got {}",
            settings.alpha
        )));
    }
    if configs.is_empty() {
        return Err(Error::Config("select_configuration: no configurations".into()));
    }
    let mut by_id = std::collections::BTreeMap::new();
    for r in results {
        if by_id.insert(r.config_id, r).is_some() {
            return Err(Error::Config(format!(
                "duplicate trial result for config {}",
                r.config_id
            )));
        }
        // Normality testing bounds the usable fold count.
        if r.fold_mse.len() < 3 || r.fold_mse.len() > 50 {
            return Err(Error::Config(format!(
                "config {} has {} folds; selection needs 3..=50",
                r.config_id,
                r.fold_mse.len()
            )));
        }
    }
    for cfg in configs {
        if !by_id.contains_key(&cfg.id) {
            return Err(Error::Config(format!(
                "missing trial result for config {}",
                cfg.id
            )));
        }
    }
    if by_id.len() != configs.len() {
        return Err(Error::Config(format!(
            "{} trial results for {} configurations",
            by_id.len(),
            configs.len()
        )));
    }
    let config_of = |id: usize| -> &Configuration {
        configs.iter().find(|c| c.id == id).expect("validated id")
    };

    let mut stages = Vec::new();
    let mut all_ids: Vec<usize> = configs.iter().map(|c| c.id).collect();
    all_ids.sort_unstable();
    stages.push(StageTrace {
        stage: "grid".into(),
        survivors: all_ids,
    });

    let survivors = one_sigma_filter(results)?;
    stages.push(StageTrace {
        stage: "one_sigma".into(),
        survivors: survivors.clone(),
    });

    let mut normality = Vec::with_capacity(survivors.len());
    let mut any_non_normal = false;
    for &id in &survivors {
        let (w, p) = shapiro_wilk(&by_id[&id].fold_mse)?;
        any_non_normal |= p < settings.alpha;
        normality.push(NormalityEntry { config_id: id, w, p });
    }

    let omnibus = if survivors.len() >= 2 {
        let groups: Vec<Vec<f64>> = survivors.iter().map(|id| by_id[id].fold_mse.clone()).collect();
        let (test, (statistic, p)) = if any_non_normal {
            ("kruskal_wallis", kruskal_wallis(&groups)?)
        } else {
            ("anova", anova_oneway(&groups)?)
        };
        Some(OmnibusResult {
            test: test.into(),
            statistic,
            p,
            significant: p < settings.alpha,
        })
    } else {
        None
    };

    let mut p_rows = vec![vec![1.0; survivors.len()]; survivors.len()];
    for i in 0..survivors.len() {
        for j in i + 1..survivors.len() {
            let (_, p) = mann_whitney_u(
                &by_id[&survivors[i]].fold_mse,
                &by_id[&survivors[j]].fold_mse,
            )?;
            p_rows[i][j] = p;
            p_rows[j][i] = p;
        }
    }
    let p_matrix = PMatrix {
        ids: survivors.clone(),
        p: p_rows,
    };

    let mut finalists = survivors.clone();
    if omnibus.as_ref().is_some_and(|o| o.significant) {
        let best_id = *survivors
            .iter()
            .min_by(|a, b| {
                (by_id[a].mean, **a)
                    .partial_cmp(&(by_id[b].mean, **b))
                    .expect("finite means")
            })
            .expect("non-empty survivors");
        let best_row = survivors.iter().position(|&id| id == best_id).expect("best in survivors");
        finalists = survivors
            .iter()
            .enumerate()
            .filter(|&(i, &id)| id == best_id || p_matrix.p[best_row][i] >= settings.alpha)
            .map(|(_, &id)| id)
            .collect();
        stages.push(StageTrace {
            stage: "pairwise".into(),
            survivors: finalists.clone(),
        });
    }

    let chosen = *finalists
        .iter()
        .min_by_key(|&&id| {
            let cfg = config_of(id);
            let keys: Vec<usize> = settings
                .complexity_order
                .iter()
                .map(|&k| key_rank(cfg, k))
                .collect();
            (keys, id)
        })
        .expect("best always survives");
    stages.push(StageTrace {
        stage: "tie_break".into(),
        survivors: vec![chosen],
    });

    Ok(SelectionReport {
        alpha: settings.alpha,
        complexity_order: settings.complexity_order.clone(),
        stages,
        normality,
        omnibus,
        p_matrix,
        chosen,
    })
}

/// One row per (configuration, fold).
pub fn results_csv(configs: &[Configuration], results: &[TrialResult]) -> Result<String> {
    let mut out =
        String::from("config_id,kernel_length,filter_count,activation,latent_dim,fold,mse\n");
    for r in results {
        let cfg = configs
            .iter()
            .find(|c| c.id == r.config_id)
            .ok_or_else(|| {
                Error::Config(format!("results_csv: unknown config id {}", r.config_id))
            })?;
        for (fold, mse) in r.fold_mse.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                cfg.id,
                cfg.kernel_length,
                cfg.filter_count,
                cfg.activation.name(),
                cfg.latent_dim,
                fold,
                mse
            ));
        }
    }
    Ok(out)
}

pub fn p_matrix_csv(m: &PMatrix) -> String {
    let mut out = String::from("config_id");
    for id in &m.ids {
        out.push_str(&format!(",{id}"));
    }
    out.push('\n');
    for (i, id) in m.ids.iter().enumerate() {
        out.push_str(&id.to_string());
        for p in &m.p[i] {
            out.push_str(&format!(",{p}"));
        }
        out.push('\n');
    }
    out
}
