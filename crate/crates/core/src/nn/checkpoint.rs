//! Plain-text model checkpoints.
//!
//! ```text
//! hilbert-fc-checkpoint 1
//! arch net4
//! input_side 90
//! seed 7
//! adam_step 1600
//! adam_state true
//! param conv1 36
//! value <36 numbers>
//! adam_m <36 numbers>      (only with adam_state true)
//! adam_v <36 numbers>
//! param conv2 288
//! ...
//! ```
//!
//! Numbers are written in shortest round-trip form, so a save/load cycle is
//! exact for both precisions.

use std::fmt::Write as _;
use std::path::Path;

use super::{Arch, Model, Scalar};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "hilbert-fc-checkpoint";

fn push_row<T: Scalar>(s: &mut String, key: &str, values: &[T]) {
    s.push_str(key);
    for v in values {
        let _ = write!(s, " {:e}", v.to_f64().unwrap_or(f64::NAN));
    }
    s.push('\n');
}

pub fn write_checkpoint<T: Scalar>(model: &Model<T>, with_adam: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {CHECKPOINT_VERSION}");
    let _ = writeln!(s, "arch {}", model.arch);
    let _ = writeln!(s, "input_side {}", model.input_shape()[1]);
    let _ = writeln!(s, "seed {}", model.seed);
    let _ = writeln!(s, "adam_step {}", model.adam_step);
    let _ = writeln!(s, "adam_state {with_adam}");
    for (name, p) in model.params() {
        let _ = writeln!(s, "param {name} {}", p.value.len());
        push_row(&mut s, "value", &p.value);
        if with_adam {
            push_row(&mut s, "adam_m", &p.adam_m);
            push_row(&mut s, "adam_v", &p.adam_v);
        }
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next line split into its key and the rest.
    fn expect(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self
            .inner
            .next()
            .ok_or_else(|| Error::parse(key, "checkpoint ends early"))?;
        let (k, rest) = line.split_once(' ').unwrap_or((line, ""));
        if k != key {
            return Err(Error::parse(key, format!("line {}: expected {key:?}, found {k:?}", n + 1)));
        }
        Ok((n + 1, rest.trim()))
    }

    fn value<V: std::str::FromStr>(&mut self, key: &str) -> Result<V> {
        let (n, rest) = self.expect(key)?;
        rest.parse()
            .map_err(|_| Error::parse(key, format!("line {n}: cannot parse {rest:?}")))
    }

    fn row<T: Scalar>(&mut self, key: &str, dst: &mut [T]) -> Result<()> {
        let (n, rest) = self.expect(key)?;
        let mut count = 0;
        for (i, tok) in rest.split_ascii_whitespace().enumerate() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(key, format!("line {n}: bad number {tok:?}")))?;
            if i < dst.len() {
                dst[i] = T::of(v);
            }
            count += 1;
        }
        if count != dst.len() {
            return Err(Error::parse(key, format!("line {n}: {count} values, expected {}", dst.len())));
        }
        Ok(())
    }
}

pub fn read_checkpoint<T: Scalar>(text: &str) -> Result<Model<T>> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let version: u32 = lines.value(MAGIC)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            expected: CHECKPOINT_VERSION as u8,
            found: version.min(255) as u8,
        });
    }
    let arch: Arch = lines.value::<String>("arch")?.parse()?;
    let side: usize = lines.value("input_side")?;
    let seed: u64 = lines.value("seed")?;
    let adam_step: u64 = lines.value("adam_step")?;
    let with_adam: bool = lines.value("adam_state")?;

    let mut model = Model::<T>::new(arch, side, seed)?;
    model.adam_step = adam_step;
    for (name, p) in model.params_mut() {
        let (n, rest) = lines.expect("param")?;
        let expected = format!("{name} {}", p.value.len());
        if rest != expected {
            return Err(Error::parse("param", format!("line {n}: expected {expected:?}, found {rest:?}")));
        }
        lines.row("value", &mut p.value)?;
        if with_adam {
            lines.row("adam_m", &mut p.adam_m)?;
            lines.row("adam_v", &mut p.adam_v)?;
        }
    }
    Ok(model)
}

pub fn save_checkpoint<T: Scalar>(model: &Model<T>, path: &Path, with_adam: bool) -> Result<()> {
    std::fs::write(path, write_checkpoint(model, with_adam)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Model<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{build_net2, Tensor};

    #[test]
    fn round_trip_exact() {
        let mut m = Model::<f64>::new(Arch::Net4, 20, 9).unwrap();
        m.layers[0].param.as_mut().unwrap().grad[3] = 0.25;
        m.adam_step(1e-3);
        let back: Model<f64> = read_checkpoint(&write_checkpoint(&m, true)).unwrap();
        assert_eq!(back.adam_step, 1);
        for ((_, a), (_, b)) in m.params().zip(back.params()) {
            assert_eq!(a.value, b.value);
            assert_eq!(a.adam_m, b.adam_m);
            assert_eq!(a.adam_v, b.adam_v);
        }
        let x = Tensor::new([1, 20, 20], (0..400).map(|i| (i as f64).sin()).collect()).unwrap();
        assert_eq!(m.clone().forward(&x).unwrap(), back.clone().forward(&x).unwrap());
    }

    #[test]
    fn f32_round_trip() {
        let m = Model::<f32>::new(Arch::Net2, 16, 4).unwrap();
        let back: Model<f32> = read_checkpoint(&write_checkpoint(&m, false)).unwrap();
        for ((_, a), (_, b)) in m.params().zip(back.params()) {
            assert_eq!(a.value, b.value);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let text = write_checkpoint(&build_net2(1), false);
        let bumped = text.replacen("checkpoint 1", "checkpoint 2", 1);
        assert!(matches!(read_checkpoint::<f64>(&bumped), Err(Error::Version { .. })));
        let cut: String = text.lines().take(8).collect::<Vec<_>>().join("\n");
        assert!(read_checkpoint::<f64>(&cut).is_err());
        let short = text.replacen("value ", "value 1.0 ", 1);
        assert!(matches!(read_checkpoint::<f64>(&short), Err(Error::Parse { .. })));
    }
}
