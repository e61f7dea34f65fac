//! Experiment configuration, repetition-averaged runs, and the
//! augmentation-vs-baseline comparison.
//!
//! Config files are UTF-8 lines of `key = value`; `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::augment::AugmentConfig;
use crate::cnn::{default_cnn_config, train_cnn, CnnArchitecture, CnnModel};
use crate::datasets::{
    binary_subset, load_digits_csv, load_idx, load_pgm_dir, resize_area, Dataset,
};
use crate::embedding::qubits_for;
use crate::error::{Error, Result};
use crate::qcnn::build_architecture;
use crate::seeding::{derive_seed, Stream};
use crate::training::{format_sig6, metrics_csv, train_qcnn, MetricsRow, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Qcnn,
    Cnn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    Digits,
    Fashion,
    CatDog,
}

impl DatasetKind {
    /// Augmentation recipe used for this dataset.
    pub fn augment_recipe(self) -> AugmentConfig {
        match self {
            DatasetKind::Digits => AugmentConfig::digits(),
            DatasetKind::Fashion | DatasetKind::CatDog => AugmentConfig::flip_rotate(),
        }
    }
}

/// Every recognised config key, in the order `config_resolved.cfg` lists them.
pub const CONFIG_KEYS: &[&str] = &[
    "model",
    "dataset",
    "digits_path",
    "idx_images",
    "idx_labels",
    "pgm_dir",
    "class_map",
    "resize",
    "class_a",
    "class_b",
    "n_per_class",
    "n_test",
    "epochs",
    "repetitions",
    "base_seed",
    "augment",
    "max_rotation",
    "contrast_lo",
    "contrast_hi",
    "n_qubits",
    "depth",
    "lr0",
    "lr_decay",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "preview_count",
    "preview_draws",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub dataset: DatasetKind,
    pub digits_path: PathBuf,
    pub idx_images: PathBuf,
    pub idx_labels: PathBuf,
    pub pgm_dir: PathBuf,
    pub class_map: Vec<(String, u8)>,
    /// Square side to block-average images down to; 0 keeps the input size.
    pub resize: usize,
    pub class_a: u8,
    pub class_b: Vec<u8>,
    pub n_per_class: Vec<usize>,
    pub n_test: usize,
    pub repetitions: usize,
    pub base_seed: u64,
    /// `None` disables augmentation.
    pub augment: Option<AugmentConfig>,
    /// 0 picks the smallest register that holds the image.
    pub n_qubits: usize,
    pub depth: usize,
    pub train: TrainConfig,
    pub preview_count: usize,
    pub preview_draws: usize,
}

/// Raw `key = value` pairs before defaults are applied.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMap(BTreeMap<String, String>);

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected `key = value`, got {raw:?}",
                    i + 1
                ))
            })?;
            let key = normalize_key(k.trim());
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "line {}: unknown key {:?}",
                    i + 1,
                    k.trim()
                )));
            }
            map.insert(key, v.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let key = normalize_key(key);
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        self.0.insert(key, value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}"))),
        }
    }

    fn list_or<T: std::str::FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("{key}: cannot parse {s:?}")))
                })
                .collect(),
        }
    }
}

fn normalize_key(k: &str) -> String {
    k.replace('-', "_")
}

impl ExperimentConfig {
    /// Applies defaults; `model` and `dataset` pick model-specific ones.
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        let model = match map.get("model").unwrap_or("qcnn") {
            "qcnn" => ModelKind::Qcnn,
            "cnn" => ModelKind::Cnn,
            other => {
                return Err(Error::Config(format!(
                    "model: expected qcnn or cnn, got {other:?}"
                )))
            }
        };
        let dataset = match map.get("dataset").unwrap_or("digits") {
            "digits" => DatasetKind::Digits,
            "fashion" => DatasetKind::Fashion,
            "catdog" => DatasetKind::CatDog,
            other => {
                return Err(Error::Config(format!(
                    "dataset: expected digits, fashion or catdog, got {other:?}"
                )))
            }
        };
        let base_train = match model {
            ModelKind::Qcnn => TrainConfig::default(),
            ModelKind::Cnn => default_cnn_config(),
        };
        let train = TrainConfig {
            epochs: map.parse_or("epochs", base_train.epochs)?,
            lr0: map.parse_or("lr0", base_train.lr0)?,
            lr_decay: map.parse_or("lr_decay", base_train.lr_decay)?,
            adam_beta1: map.parse_or("adam_beta1", base_train.adam_beta1)?,
            adam_beta2: map.parse_or("adam_beta2", base_train.adam_beta2)?,
            adam_eps: map.parse_or("adam_eps", base_train.adam_eps)?,
            seed: 0,
        };
        train.validate()?;

        let recipe = dataset.augment_recipe();
        let mut augment = match map.get("augment").unwrap_or("none") {
            "none" | "off" => None,
            "default" | "on" => Some(recipe),
            list => {
                let mut a = AugmentConfig::disabled();
                for item in list.split(',').map(str::trim) {
                    match item {
                        "flip" => a.flip_horizontal = true,
                        "rotation" => a.rotation = true,
                        "contrast" => a.contrast = true,
                        other => {
                            return Err(Error::Config(format!(
                                "augment: expected none, default, or a list of flip/rotation/contrast, got {other:?}"
                            )))
                        }
                    }
                }
                Some(a)
            }
        };
        if let Some(a) = augment.as_mut() {
            a.max_rotation = map.parse_or("max_rotation", a.max_rotation)?;
            a.contrast_range = (
                map.parse_or("contrast_lo", a.contrast_range.0)?,
                map.parse_or("contrast_hi", a.contrast_range.1)?,
            );
            a.validate()?;
        }

        let class_map = match map.get("class_map") {
            None => vec![("cat".to_string(), 0), ("dog".to_string(), 1)],
            Some(v) => {
                v.split(',')
                    .map(|item| {
                        let (p, l) = item.split_once(':').ok_or_else(|| {
                            Error::Config(format!("class_map: expected prefix:label, got {item:?}"))
                        })?;
                        let l = l.trim().parse().map_err(|_| {
                            Error::Config(format!("class_map: bad label in {item:?}"))
                        })?;
                        Ok((p.trim().to_string(), l))
                    })
                    .collect::<Result<_>>()?
            }
        };

        let cfg = Self {
            model,
            dataset,
            digits_path: map.parse_or("digits_path", PathBuf::from("data/digits.csv"))?,
            idx_images: map
                .parse_or("idx_images", PathBuf::from("data/train-images-idx3-ubyte"))?,
            idx_labels: map
                .parse_or("idx_labels", PathBuf::from("data/train-labels-idx1-ubyte"))?,
            pgm_dir: map.parse_or("pgm_dir", PathBuf::from("data/catdog"))?,
            class_map,
            resize: map.parse_or(
                "resize",
                if dataset == DatasetKind::CatDog {
                    32
                } else {
                    0
                },
            )?,
            class_a: map.parse_or("class_a", 0)?,
            class_b: map.list_or("class_b", vec![1])?,
            n_per_class: map.list_or("n_per_class", vec![50])?,
            n_test: map.parse_or("n_test", 100)?,
            repetitions: map.parse_or("repetitions", 20)?,
            base_seed: map.parse_or("base_seed", 0)?,
            augment,
            n_qubits: map.parse_or("n_qubits", 0)?,
            depth: map.parse_or("depth", 2)?,
            train,
            preview_count: map.parse_or("preview_count", 4)?,
            preview_draws: map.parse_or("preview_draws", 3)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.class_b.is_empty() || self.n_per_class.is_empty() {
            return Err(Error::Config(
                "class_b and n_per_class must be nonempty".into(),
            ));
        }
        if self.class_b.contains(&self.class_a) {
            return Err(Error::Config("class_b must differ from class_a".into()));
        }
        if self.n_test < 2 || self.n_per_class.contains(&0) {
            return Err(Error::Config(
                "n_test must be >= 2 and every n_per_class >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Every effective setting, one `key = value` per line.
    pub fn resolved(&self) -> String {
        let join = |v: &[String]| v.join(",");
        let augment = match &self.augment {
            None => "none".to_string(),
            Some(a) => {
                let mut parts = Vec::new();
                if a.flip_horizontal {
                    parts.push("flip");
                }
                if a.rotation {
                    parts.push("rotation");
                }
                if a.contrast {
                    parts.push("contrast");
                }
                if parts.is_empty() {
                    "none".to_string()
                } else {
                    parts.join(",")
                }
            }
        };
        let aug = self
            .augment
            .clone()
            .unwrap_or_else(|| self.dataset.augment_recipe());
        let values: Vec<(&str, String)> = vec![
            (
                "model",
                match self.model {
                    ModelKind::Qcnn => "qcnn".into(),
                    ModelKind::Cnn => "cnn".into(),
                },
            ),
            (
                "dataset",
                match self.dataset {
                    DatasetKind::Digits => "digits".into(),
                    DatasetKind::Fashion => "fashion".into(),
                    DatasetKind::CatDog => "catdog".into(),
                },
            ),
            ("digits_path", self.digits_path.display().to_string()),
            ("idx_images", self.idx_images.display().to_string()),
            ("idx_labels", self.idx_labels.display().to_string()),
            ("pgm_dir", self.pgm_dir.display().to_string()),
            (
                "class_map",
                join(
                    &self
                        .class_map
                        .iter()
                        .map(|(p, l)| format!("{p}:{l}"))
                        .collect::<Vec<_>>(),
                ),
            ),
            ("resize", self.resize.to_string()),
            ("class_a", self.class_a.to_string()),
            (
                "class_b",
                join(&self.class_b.iter().map(u8::to_string).collect::<Vec<_>>()),
            ),
            (
                "n_per_class",
                join(
                    &self
                        .n_per_class
                        .iter()
                        .map(usize::to_string)
                        .collect::<Vec<_>>(),
                ),
            ),
            ("n_test", self.n_test.to_string()),
            ("epochs", self.train.epochs.to_string()),
            ("repetitions", self.repetitions.to_string()),
            ("base_seed", self.base_seed.to_string()),
            ("augment", augment),
            ("max_rotation", format!("{:?}", aug.max_rotation)),
            ("contrast_lo", format!("{:?}", aug.contrast_range.0)),
            ("contrast_hi", format!("{:?}", aug.contrast_range.1)),
            ("n_qubits", self.n_qubits.to_string()),
            ("depth", self.depth.to_string()),
            ("lr0", format!("{:?}", self.train.lr0)),
            ("lr_decay", format!("{:?}", self.train.lr_decay)),
            ("adam_beta1", format!("{:?}", self.train.adam_beta1)),
            ("adam_beta2", format!("{:?}", self.train.adam_beta2)),
            ("adam_eps", format!("{:?}", self.train.adam_eps)),
            ("preview_count", self.preview_count.to_string()),
            ("preview_draws", self.preview_draws.to_string()),
        ];
        debug_assert_eq!(values.len(), CONFIG_KEYS.len());
        values
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Loads the configured dataset, resizing square images when `resize > 0`.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let mut ds = match cfg.dataset {
        DatasetKind::Digits => load_digits_csv(&cfg.digits_path)?,
        DatasetKind::Fashion => load_idx(&cfg.idx_images, &cfg.idx_labels)?,
        DatasetKind::CatDog => load_pgm_dir(&cfg.pgm_dir, &cfg.class_map)?,
    };
    if cfg.resize > 0 {
        for s in &mut ds.samples {
            if (s.height, s.width) != (cfg.resize, cfg.resize) {
                *s = resize_area(s, cfg.resize, cfg.resize)?;
            }
        }
    }
    if ds.is_empty() {
        return Err(Error::InsufficientSamples {
            class: cfg.class_a,
            available: 0,
            needed: 1,
        });
    }
    Ok(ds)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RepetitionResult {
    pub seed: u64,
    pub metrics: Vec<MetricsRow>,
    pub final_params: Vec<f64>,
}

impl RepetitionResult {
    pub fn final_test_acc(&self) -> f64 {
        self.metrics.last().map_or(0.0, |r| r.test_acc)
    }
}

/// All repetitions of one `(class_b, n_per_class)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRun {
    pub class_b: u8,
    pub n_per_class: usize,
    pub reps: Vec<RepetitionResult>,
    pub mean: Vec<MetricsRow>,
}

impl ExperimentRun {
    pub fn mean_final_test_acc(&self) -> f64 {
        self.reps
            .iter()
            .map(RepetitionResult::final_test_acc)
            .sum::<f64>()
            / self.reps.len() as f64
    }
}

/// Epoch-wise arithmetic mean of several runs' metrics.
pub fn mean_curve(runs: &[Vec<MetricsRow>]) -> Vec<MetricsRow> {
    let n = runs.len() as f64;
    let epochs = runs.iter().map(Vec::len).min().unwrap_or(0);
    (0..epochs)
        .map(|e| {
            let sum = |f: fn(&MetricsRow) -> f64| runs.iter().map(|r| f(&r[e])).sum::<f64>() / n;
            MetricsRow {
                epoch: e,
                train_loss: sum(|r| r.train_loss),
                train_acc: sum(|r| r.train_acc),
                test_loss: sum(|r| r.test_loss),
                test_acc: sum(|r| r.test_acc),
            }
        })
        .collect()
}

/// One training run; `seed` drives subset sampling, initialization and augmentation.
pub fn run_repetition(
    cfg: &ExperimentConfig,
    data: &Dataset,
    class_b: u8,
    n_per_class: usize,
    seed: u64,
    augment: Option<&AugmentConfig>,
) -> Result<RepetitionResult> {
    let (train, test) = binary_subset(
        data,
        cfg.class_a,
        class_b,
        n_per_class,
        cfg.n_test,
        derive_seed(seed, Stream::Subset, 0),
    )?;
    let (h, w) = train.shape().expect("nonempty subset");
    let tc = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    match cfg.model {
        ModelKind::Qcnn => {
            let n_qubits = if cfg.n_qubits == 0 {
                qubits_for(h * w)
            } else {
                cfg.n_qubits
            };
            let arch = build_architecture(n_qubits, cfg.depth)?;
            let out = train_qcnn(&arch, &train.samples, &test.samples, &tc, augment)?;
            Ok(RepetitionResult {
                seed,
                metrics: out.metrics,
                final_params: out.params,
            })
        }
        ModelKind::Cnn => {
            let model = CnnModel::init(CnnArchitecture::for_input(h, w), seed);
            let (metrics, model) = train_cnn(model, &train.samples, &test.samples, &tc, augment)?;
            Ok(RepetitionResult {
                seed,
                metrics,
                final_params: model.params,
            })
        }
    }
}

fn run_cell(
    cfg: &ExperimentConfig,
    data: &Dataset,
    class_b: u8,
    n_per_class: usize,
    augment: Option<&AugmentConfig>,
) -> Result<ExperimentRun> {
    let reps = (0..cfg.repetitions as u64)
        .into_par_iter()
        .map(|k| run_repetition(cfg, data, class_b, n_per_class, cfg.base_seed + k, augment))
        .collect::<Result<Vec<_>>>()?;
    let curves: Vec<Vec<MetricsRow>> = reps.iter().map(|r| r.metrics.clone()).collect();
    Ok(ExperimentRun {
        class_b,
        n_per_class,
        mean: mean_curve(&curves),
        reps,
    })
}

/// Runs every `(class_b, n_per_class)` cell with `cfg.augment`.
pub fn run_experiment(cfg: &ExperimentConfig, data: &Dataset) -> Result<Vec<ExperimentRun>> {
    run_with(cfg, data, cfg.augment.as_ref())
}

fn run_with(
    cfg: &ExperimentConfig,
    data: &Dataset,
    augment: Option<&AugmentConfig>,
) -> Result<Vec<ExperimentRun>> {
    let mut runs = Vec::new();
    for &b in &cfg.class_b {
        for &n in &cfg.n_per_class {
            runs.push(run_cell(cfg, data, b, n, augment)?);
        }
    }
    Ok(runs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub class_b: u8,
    pub n_per_class: usize,
    pub acc_no_da: f64,
    pub acc_da: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    pub class_a: u8,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class_a,class_b,n_per_class,acc_no_da,acc_da,delta\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                self.class_a,
                r.class_b,
                r.n_per_class,
                format_sig6(r.acc_no_da),
                format_sig6(r.acc_da),
                format_sig6(r.delta)
            );
        }
        out
    }

    /// Column-aligned table of accuracies in percent.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:>7} {:>7} {:>11} {:>9} {:>8} {:>8}\n",
            "class_a", "class_b", "n_per_class", "no_DA %", "DA %", "delta"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>7} {:>7} {:>11} {:>9.1} {:>8.1} {:>+8.1}",
                self.class_a,
                r.class_b,
                r.n_per_class,
                100.0 * r.acc_no_da,
                100.0 * r.acc_da,
                100.0 * r.delta
            );
        }
        out
    }
}

/// Both arms of the comparison plus the table.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonOutcome {
    pub no_da: Vec<ExperimentRun>,
    pub da: Vec<ExperimentRun>,
    pub table: ComparisonTable,
}

/// Runs every cell without and with augmentation using the same seeds.
pub fn compare_da(cfg: &ExperimentConfig, data: &Dataset) -> Result<ComparisonOutcome> {
    let no_da = run_with(cfg, data, None)?;
    let da = run_with(cfg, data, cfg.augment.as_ref())?;
    let rows = no_da
        .iter()
        .zip(&da)
        .map(|(a, b)| {
            let (acc_no_da, acc_da) = (a.mean_final_test_acc(), b.mean_final_test_acc());
            ComparisonRow {
                class_b: a.class_b,
                n_per_class: a.n_per_class,
                acc_no_da,
                acc_da,
                delta: acc_da - acc_no_da,
            }
        })
        .collect();
    Ok(ComparisonOutcome {
        no_da,
        da,
        table: ComparisonTable {
            class_a: cfg.class_a,
            rows,
        },
    })
}

/// Files to write, relative to an output directory.
pub type OutputFiles = Vec<(PathBuf, Vec<u8>)>;

fn params_csv(params: &[f64]) -> String {
    params.iter().map(|v| format!("{v:?}\n")).collect()
}

/// Per-repetition and mean CSVs. A single cell writes at the top of `prefix`;
/// several cells each get a `<a>v<b>_n<N>` subdirectory.
pub fn experiment_files(
    cfg: &ExperimentConfig,
    runs: &[ExperimentRun],
    prefix: &Path,
) -> OutputFiles {
    let mut files = Vec::new();
    for run in runs {
        let dir = if runs.len() == 1 {
            prefix.to_path_buf()
        } else {
            prefix.join(format!(
                "{}v{}_n{}",
                cfg.class_a, run.class_b, run.n_per_class
            ))
        };
        for (k, rep) in run.reps.iter().enumerate() {
            files.push((
                dir.join(format!("metrics_rep{k}.csv")),
                metrics_csv(&rep.metrics).into_bytes(),
            ));
            files.push((
                dir.join(format!("params_final_rep{k}.csv")),
                params_csv(&rep.final_params).into_bytes(),
            ));
        }
        files.push((
            dir.join("metrics_mean.csv"),
            metrics_csv(&run.mean).into_bytes(),
        ));
    }
    files
}

pub fn comparison_files(cfg: &ExperimentConfig, outcome: &ComparisonOutcome) -> OutputFiles {
    let mut files = experiment_files(cfg, &outcome.no_da, Path::new("no_da"));
    files.extend(experiment_files(cfg, &outcome.da, Path::new("da")));
    files.push(("comparison.csv".into(), outcome.table.to_csv().into_bytes()));
    files.push((
        "comparison.txt".into(),
        outcome.table.to_text().into_bytes(),
    ));
    files
}

/// Writes all files under `out`. Nothing is written unless every file's
/// content was produced, so a failed run leaves no partial output.
pub fn write_outputs(out: &Path, cfg: &ExperimentConfig, mut files: OutputFiles) -> Result<()> {
    files.push(("config_resolved.cfg".into(), cfg.resolved().into_bytes()));
    for (rel, bytes) in files {
        let path = out.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
