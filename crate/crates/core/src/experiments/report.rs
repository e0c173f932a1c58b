//! Report files: `summary.csv`, `loss_rep_NN.csv` and `config.txt`.
//!
//! `summary.csv` has one row per repetition followed by one `mean` row. Rates
//! are percentages; the `*_std` columns are filled on the `mean` row only and
//! hold the population standard deviation over repetitions.

use std::fmt::Write as _;
use std::path::Path;

use super::{ExperimentReport, MeanStd};
use crate::config::ConfigMap;
use crate::error::{Error, Result};

pub const SUMMARY_HEADER: &str = "rep,seed,split_seed,rejections,train,test,tp,tn,fp,fn,\
acc,se,sp,tp_rate,tn_rate,fp_rate,fn_rate,acc_std,se_std,sp_std,tp_rate_std,tn_rate_std,fp_rate_std,fn_rate_std";

fn pct(v: f64) -> String {
    format!("{:.4}", 100.0 * v)
}

pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in &report.reps {
        let c = r.counts;
        let rates = c.class_rates();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},,,,,,,",
            r.rep,
            r.seed,
            r.split_seed,
            r.rejections,
            r.train_size,
            r.test_size,
            c.tp,
            c.tn,
            c.fp,
            c.fn_,
            pct(c.accuracy()),
            pct(c.sensitivity()),
            pct(c.specificity()),
            pct(rates[0]),
            pct(rates[1]),
            pct(rates[2]),
            pct(rates[3]),
        );
    }
    let a = &report.aggregate;
    let cols: Vec<&MeanStd> = [&a.acc, &a.se, &a.sp].into_iter().chain(a.rates.iter()).collect();
    let means: Vec<String> = cols.iter().map(|m| format!("{:.4}", m.mean)).collect();
    let stds: Vec<String> = cols.iter().map(|m| format!("{:.4}", m.std)).collect();
    let _ = writeln!(s, "mean,{},,,,,,,,,{},{}", report.seed, means.join(","), stds.join(","));
    s
}

fn loss_csv(trace: &[(usize, f64)]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (e, l) in trace {
        let _ = writeln!(s, "{e},{l:.10}");
    }
    s
}

/// Settings that reproduce the run, keyed by command-line flag name.
pub fn config_echo(report: &ExperimentReport) -> ConfigMap {
    let c = &report.config;
    let mut m = ConfigMap::new();
    m.set("arch", c.arch);
    m.set("half-length", c.half_length.map_or("auto".to_string(), |h| h.to_string()));
    m.set("reps", c.repetitions);
    m.set("epochs", c.train.epochs);
    m.set("batch", c.train.batch_size);
    m.set("lr", c.train.lr);
    m.set("seed", report.seed);
    m.set("test-size", c.test_size);
    m.set("balance-tol", c.balance_tol);
    m.set("pair", c.pair);
    m.set("precision", c.precision);
    m.set("shuffle-labels", c.shuffle_labels);
    m.set("info.core-params", report.core_params);
    m.set("info.head-params", report.head_params);
    m.set("info.input-side", report.input_side);
    m.set("info.subjects", report.subjects);
    m.set("info.std", "population");
    m.set("info.tie-break", "class 0");
    m
}

/// Writes the report files into `out_dir`; `extra` entries are added to the
/// config echo.
pub fn emit_report(report: &ExperimentReport, out_dir: &Path, extra: &ConfigMap) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let write = |name: &str, body: String| {
        let p = out_dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
    };
    write("summary.csv", summary_csv(report))?;
    for r in &report.reps {
        write(&format!("loss_rep_{:02}.csv", r.rep), loss_csv(&r.loss_trace))?;
    }
    let mut echo = config_echo(report);
    for (k, v) in extra.iter() {
        echo.set(k, v);
    }
    echo.write(&out_dir.join("config.txt"))
}
