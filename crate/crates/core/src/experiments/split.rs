use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

/// Maximum consecutive rejected draws before a split is declared infeasible.
pub const MAX_REJECTIONS: u32 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestSize {
    /// `ceil(fraction * n)` subjects.
    Fraction(f64),
    Count(usize),
}

impl TestSize {
    pub fn resolve(self, n: usize) -> Result<usize> {
        let k = match self {
            TestSize::Fraction(f) if f > 0.0 && f < 1.0 => (f * n as f64).ceil() as usize,
            TestSize::Fraction(f) => return Err(Error::Config(format!("test fraction {f} not in (0, 1)"))),
            TestSize::Count(k) => k,
        };
        if k == 0 || k >= n {
            return Err(Error::Config(format!("test size {k} leaves no data on one side of {n} subjects")));
        }
        Ok(k)
    }
}

impl std::fmt::Display for TestSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TestSize::Fraction(x) => write!(f, "{x}"),
            TestSize::Count(k) => write!(f, "{k}"),
        }
    }
}

impl std::str::FromStr for TestSize {
    type Err = Error;

    /// Integers are counts, anything else a fraction.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(k) = s.parse::<usize>() {
            return Ok(TestSize::Count(k));
        }
        s.parse::<f64>()
            .map(TestSize::Fraction)
            .map_err(|_| Error::Config(format!("test size {s:?} is neither a count nor a fraction")))
    }
}

/// Disjoint train/test partition of subject positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    /// Ascending positions into the labels the split was drawn from.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Seed of the accepted draw.
    pub seed: u64,
    pub rejections: u32,
    /// Fraction of class 1 among training subjects.
    pub train_positive_fraction: f64,
    pub test_positive_fraction: f64,
}

impl Split {
    /// `|fraction(class 0) - fraction(class 1)|` on the training side.
    pub fn train_imbalance(&self) -> f64 {
        (1.0 - 2.0 * self.train_positive_fraction).abs()
    }
}

fn positive_fraction(labels: &[usize], ids: &[usize]) -> f64 {
    ids.iter().filter(|&&i| labels[i] == 1).count() as f64 / ids.len() as f64
}

/// Random train/test split of binary `labels` (0 or 1), redrawn with derived
/// seeds until the training-side class fractions differ by at most
/// `balance_tol`.
pub fn make_split(labels: &[usize], test_size: TestSize, balance_tol: f64, seed: u64) -> Result<Split> {
    let n = labels.len();
    if n < 10 {
        return Err(Error::InsufficientSamples(format!("split needs at least 10 subjects, got {n}")));
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Config(format!("split labels must be 0 or 1, found {bad}")));
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::InsufficientSamples("split needs subjects of both classes".into()));
    }
    let k = test_size.resolve(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    for attempt in 0..MAX_REJECTIONS {
        let draw_seed = derive_seed(seed, 0x5911, attempt as u64);
        order.sort_unstable();
        order.shuffle(&mut stream_rng(draw_seed, 0, 0));
        let mut test = order[..k].to_vec();
        let mut train = order[k..].to_vec();
        test.sort_unstable();
        train.sort_unstable();
        let split = Split {
            train_positive_fraction: positive_fraction(labels, &train),
            test_positive_fraction: positive_fraction(labels, &test),
            train,
            test,
            seed: draw_seed,
            rejections: attempt,
        };
        if split.train_imbalance() <= balance_tol {
            return Ok(split);
        }
    }
    Err(Error::Infeasible(format!(
        "{MAX_REJECTIONS} consecutive splits exceeded training imbalance {balance_tol}"
    )))
}
