//! Repeated train/test evaluation of the classifiers on correlation matrices.

mod report;
mod split;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{ClassLabel, CorrelationMatrix};
use crate::nn::{softmax_cross_entropy, Arch, Model, Scalar, Tensor};
use crate::rng::{derive_seed, stream_rng};

pub use report::{config_echo, emit_report, summary_csv, SUMMARY_HEADER};
pub use split::{make_split, Split, TestSize, MAX_REJECTIONS};

/// Loss-trace sampling interval in epochs.
pub const LOSS_INTERVAL: usize = 25;

/// Two classes compared by one experiment. The positive class is the more
/// advanced diagnosis (AD over MCI over CN) and maps to class index 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassPair {
    pub negative: ClassLabel,
    pub positive: ClassLabel,
}

fn severity(c: ClassLabel) -> u8 {
    match c {
        ClassLabel::Cn => 0,
        ClassLabel::Mci => 1,
        ClassLabel::Ad => 2,
    }
}

impl ClassPair {
    pub fn new(a: ClassLabel, b: ClassLabel) -> Result<Self> {
        if a == b {
            return Err(Error::Config(format!("class pair needs two different classes, got {a} twice")));
        }
        let (negative, positive) = if severity(a) < severity(b) { (a, b) } else { (b, a) };
        Ok(ClassPair { negative, positive })
    }

    /// 0 for the negative class, 1 for the positive class.
    pub fn index_of(&self, label: ClassLabel) -> Option<usize> {
        if label == self.negative {
            Some(0)
        } else if label == self.positive {
            Some(1)
        } else {
            None
        }
    }
}

impl fmt::Display for ClassPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.negative, self.positive)
    }
}

impl FromStr for ClassPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| Error::Config(format!("class pair {s:?} must look like CN-AD")))?;
        ClassPair::new(a.parse()?, b.parse()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Rates are fractions in `[0, 1]`; a rate with an empty denominator is 0.
impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn sensitivity(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }

    /// `(tp, tn, fp, fn)` each as a fraction of its class: tp and fn over
    /// positives, tn and fp over negatives.
    pub fn class_rates(&self) -> [f64; 4] {
        let pos = self.tp + self.fn_;
        let neg = self.tn + self.fp;
        [ratio(self.tp, pos), ratio(self.tn, neg), ratio(self.fp, neg), ratio(self.fn_, pos)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 4,
            lr: 1e-4,
            seed: 0,
        }
    }
}

/// Mean loss over `data` without updating the model.
pub fn mean_loss<T: Scalar>(model: &mut Model<T>, data: &[(&Tensor<T>, usize)]) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in data {
        let logits = model.forward(x)?;
        total += softmax_cross_entropy(&logits, *y)?.0.to_f64().unwrap_or(f64::NAN);
    }
    Ok(total / data.len() as f64)
}

/// Mini-batch Adam training. Each epoch visits every sample once in a seeded
/// shuffled order; the final partial batch is kept and each batch's gradient
/// is its mean. Returns `(epoch, mean training loss)` at epoch 0 (before any
/// update) and every `LOSS_INTERVAL` epochs.
pub fn train<T: Scalar>(model: &mut Model<T>, data: &[(&Tensor<T>, usize)], cfg: &TrainConfig) -> Result<Vec<(usize, f64)>> {
    if data.is_empty() {
        return Err(Error::InsufficientSamples("training set is empty".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    let mut trace = vec![(0, mean_loss(model, data)?)];
    let mut order: Vec<usize> = (0..data.len()).collect();
    model.zero_grad();
    for epoch in 1..=cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut stream_rng(cfg.seed, 0x7a1e, epoch as u64));
        for batch in order.chunks(cfg.batch_size) {
            let scale = T::of(1.0 / batch.len() as f64);
            for &i in batch {
                let (x, y) = data[i];
                let logits = model.forward(x)?;
                let (_, g) = softmax_cross_entropy(&logits, y)?;
                let g: Vec<T> = g.into_iter().map(|v| v * scale).collect();
                model.backward(&g)?;
            }
            model.adam_step(cfg.lr);
        }
        if epoch % LOSS_INTERVAL == 0 {
            trace.push((epoch, mean_loss(model, data)?));
        }
    }
    Ok(trace)
}

/// Confusion counts with class 1 as the positive class.
pub fn evaluate<T: Scalar>(model: &mut Model<T>, data: &[(&Tensor<T>, usize)]) -> Result<ConfusionCounts> {
    let mut c = ConfusionCounts::default();
    for (x, y) in data {
        match (model.predict(x)?, *y) {
            (1, 1) => c.tp += 1,
            (0, 0) => c.tn += 1,
            (1, _) => c.fp += 1,
            _ => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F64,
    F32,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F64 => "f64",
            Precision::F32 => "f32",
        })
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "f64" | "double" => Ok(Precision::F64),
            "f32" | "single" => Ok(Precision::F32),
            other => Err(Error::Config(format!("unknown precision {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub arch: Arch,
    /// Segment half length the matrices were built with; echoed only.
    pub half_length: Option<usize>,
    pub repetitions: usize,
    pub train: TrainConfig,
    pub test_size: TestSize,
    pub balance_tol: f64,
    pub pair: ClassPair,
    pub precision: Precision,
    /// Replace every label by a seeded permutation of the labels before
    /// splitting (null control).
    pub shuffle_labels: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            arch: Arch::Net4,
            half_length: Some(100),
            repetitions: 30,
            train: TrainConfig::default(),
            test_size: TestSize::Fraction(0.2),
            balance_tol: 0.2,
            pair: ClassPair {
                negative: ClassLabel::Cn,
                positive: ClassLabel::Ad,
            },
            precision: Precision::F64,
            shuffle_labels: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepResult {
    /// 1-based repetition number.
    pub rep: usize,
    pub seed: u64,
    pub split_seed: u64,
    pub rejections: u32,
    pub train_size: usize,
    pub test_size: usize,
    pub counts: ConfusionCounts,
    pub loss_trace: Vec<(usize, f64)>,
}

/// Mean and population standard deviation, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std_pct(values: impl Iterator<Item = f64> + Clone) -> MeanStd {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd {
        mean: 100.0 * mean,
        std: 100.0 * var.sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub acc: MeanStd,
    pub se: MeanStd,
    pub sp: MeanStd,
    /// tp, tn, fp, fn class rates.
    pub rates: [MeanStd; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub input_side: usize,
    pub core_params: usize,
    pub head_params: usize,
    pub subjects: usize,
    pub reps: Vec<RepResult>,
    pub aggregate: Aggregate,
}

fn aggregate(reps: &[RepResult]) -> Aggregate {
    let it = || reps.iter().map(|r| r.counts);
    Aggregate {
        acc: mean_std_pct(it().map(|c| c.accuracy())),
        se: mean_std_pct(it().map(|c| c.sensitivity())),
        sp: mean_std_pct(it().map(|c| c.specificity())),
        rates: std::array::from_fn(|k| mean_std_pct(it().map(move |c| c.class_rates()[k]))),
    }
}

fn run_rep<T: Scalar>(
    rep: usize,
    master_seed: u64,
    inputs: &[Tensor<T>],
    labels: &[usize],
    side: usize,
    cfg: &ExperimentConfig,
) -> Result<RepResult> {
    let seed = derive_seed(master_seed, 0x7e9, rep as u64);
    let split = make_split(labels, cfg.test_size, cfg.balance_tol, derive_seed(seed, 1, 0))?;
    let mut model = Model::<T>::new(cfg.arch, side, derive_seed(seed, 2, 0))?;
    let pick = |ids: &[usize]| -> Vec<(&Tensor<T>, usize)> { ids.iter().map(|&i| (&inputs[i], labels[i])).collect() };
    let train_cfg = TrainConfig {
        seed: derive_seed(seed, 3, 0),
        ..cfg.train
    };
    let loss_trace = train(&mut model, &pick(&split.train), &train_cfg)?;
    let counts = evaluate(&mut model, &pick(&split.test))?;
    Ok(RepResult {
        rep: rep + 1,
        seed,
        split_seed: split.seed,
        rejections: split.rejections,
        train_size: split.train.len(),
        test_size: split.test.len(),
        counts,
        loss_trace,
    })
}

fn run_typed<T: Scalar>(
    matrices: &[&CorrelationMatrix],
    labels: &[usize],
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<Vec<RepResult>> {
    let side = matrices[0].size;
    let inputs: Vec<Tensor<T>> = matrices.iter().map(|m| Tensor::from_matrix(m)).collect();
    (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| run_rep(r, seed, &inputs, labels, side, cfg))
        .collect()
}

/// Runs `cfg.repetitions` independent split/train/evaluate cycles on the
/// matrices of the two classes in `cfg.pair`. Everything derives from `seed`.
pub fn run_experiment(dataset: &[CorrelationMatrix], cfg: &ExperimentConfig, seed: u64) -> Result<ExperimentReport> {
    if cfg.repetitions == 0 {
        return Err(Error::Config("at least one repetition is required".into()));
    }
    let selected: Vec<(&CorrelationMatrix, usize)> = dataset
        .iter()
        .filter_map(|m| cfg.pair.index_of(m.label).map(|y| (m, y)))
        .collect();
    let Some(first) = selected.first() else {
        return Err(Error::InsufficientSamples(format!("no matrices of classes {}", cfg.pair)));
    };
    let side = first.0.size;
    if let Some((m, _)) = selected.iter().find(|(m, _)| m.size != side) {
        return Err(Error::Shape(format!(
            "matrix {} is {}x{}, expected {side}x{side}",
            m.subject_id, m.size, m.size
        )));
    }
    let matrices: Vec<&CorrelationMatrix> = selected.iter().map(|s| s.0).collect();
    let mut labels: Vec<usize> = selected.iter().map(|s| s.1).collect();
    if cfg.shuffle_labels {
        labels.shuffle(&mut stream_rng(seed, 0x5ff1e, 0));
    }

    let reps = match cfg.precision {
        Precision::F64 => run_typed::<f64>(&matrices, &labels, seed, cfg)?,
        Precision::F32 => run_typed::<f32>(&matrices, &labels, seed, cfg)?,
    };
    let probe = Model::<f64>::new(cfg.arch, side, 0)?;
    Ok(ExperimentReport {
        config: cfg.clone(),
        seed,
        input_side: side,
        core_params: probe.param_count_core(),
        head_params: probe.param_count_head(),
        subjects: matrices.len(),
        aggregate: aggregate(&reps),
        reps,
    })
}
