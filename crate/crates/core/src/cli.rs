//! Command-line front end: `gen`, `extract`, `train-eval` and `reho`.
//!
//! Every setting is a `key=value` pair. A `--config` file supplies values,
//! flags given on the command line override them, and the remaining keys take
//! their defaults. Each run writes the resolved settings to `config.txt` in
//! the output directory, so `--config <out>/config.txt` repeats the run.
//! Keys starting with `info.` are accepted in config files and ignored.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or parse
//! error, 3 infeasible request.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::config::ConfigMap;
use crate::error::{Error, Result};
use crate::experiments::{emit_report, run_experiment, ExperimentConfig, TrainConfig};
use crate::features::{
    build_segments, extract_matrix, load_seed_atlas, read_matrix, reho_pairwise, reho_region, reho_summary,
    write_matrix, ClassLabel, GridEmbedding, RehoTable, SeedAtlas,
};
use crate::hilbert::HilbertCurve;
use crate::manifest::Manifest;
use crate::preprocess::{cohort_stats, gaussian_smooth, slice_time_correct, time_average, HistogramSpec};
use crate::synth::{gen_cohort_matrices, SynthCohort, SynthSpec};
use crate::volume::{read_volume, write_volume, Axis, Volume4D, VolumeFormat};

macro_rules! log {
    ($($t:tt)*) => { eprintln!("[hilbert-fc] {}", format!($($t)*)) };
}

struct Flag {
    key: &'static str,
    help: &'static str,
    /// `None` marks a required value; switches default to `false`.
    default: Option<&'static str>,
    switch: bool,
}

const fn opt(key: &'static str, default: &'static str, help: &'static str) -> Flag {
    Flag { key, help, default: Some(default), switch: false }
}

const fn req(key: &'static str, help: &'static str) -> Flag {
    Flag { key, help, default: None, switch: false }
}

const fn switch(key: &'static str, help: &'static str) -> Flag {
    Flag { key, help, default: Some("false"), switch: true }
}

const OFFSETS: [Flag; 3] = [
    opt("offset-x", "auto", "grid offset inside the curve cube along x (auto centres)"),
    opt("offset-y", "auto", "grid offset along y"),
    opt("offset-z", "auto", "grid offset along z"),
];

const PREPROCESS: [Flag; 3] = [
    opt("fwhm", "8", "Gaussian smoothing FWHM in mm (0 disables)"),
    opt("slice-axis", "z", "slice axis for slice-timing correction (x, y, z or none)"),
    opt("hist-width", "1000", "intensity histogram bin width"),
];

fn gen_flags() -> Vec<Flag> {
    let mut f = vec![
        req("out", "output directory"),
        opt("mode", "matrices", "matrices or volumes"),
        opt("per-class", "100", "subjects per class"),
        opt("classes", "CN,AD", "comma-separated class labels"),
        opt("separation", "1", "class separation in [0, 1]"),
        opt("regions", "90", "number of regions"),
        opt("half-length", "50", "segment half length (segments have 2h+1 voxels)"),
        opt("order", "6", "Hilbert curve order"),
        opt("grid", "53x63x52", "volume grid dimensions"),
        opt("nt", "164", "time samples per volume"),
        opt("tr", "2.2", "repetition time in seconds"),
        opt("voxel-mm", "3", "isotropic voxel size in mm"),
        opt("intensity-mean", "12692", "mean voxel intensity"),
        opt("intensity-std", "2155", "voxel intensity deviation"),
        opt("format", "nifti", "volume file format: nifti or internal"),
        opt("atlas", "none", "seed atlas to use instead of generating one"),
        opt("seed", "0", "master seed"),
    ];
    f.extend(OFFSETS);
    f
}

fn extract_flags() -> Vec<Flag> {
    let mut f = vec![
        req("input", "volume manifest (directory or manifest.csv)"),
        req("atlas", "seed atlas file"),
        req("out", "output directory"),
        opt("order", "6", "Hilbert curve order"),
        opt("half-length", "50", "segment half length"),
        switch("reho", "also write the ReHo table"),
    ];
    f.extend(PREPROCESS);
    f.extend(OFFSETS);
    f
}

fn reho_flags() -> Vec<Flag> {
    let mut f = vec![
        req("input", "volume manifest (directory or manifest.csv)"),
        req("atlas", "seed atlas file"),
        req("out", "output directory"),
        opt("order", "6", "Hilbert curve order"),
        opt("half-length", "50", "segment half length"),
    ];
    f.extend(PREPROCESS);
    f.extend(OFFSETS);
    f
}

fn train_flags() -> Vec<Flag> {
    vec![
        req("input", "matrix manifest (directory or manifest.csv)"),
        req("out", "output directory"),
        opt("arch", "net4", "network: net2 or net4"),
        opt("half-length", "auto", "expected segment half length of the matrices"),
        opt("epochs", "200", "training epochs"),
        opt("lr", "0.0001", "Adam learning rate"),
        opt("batch", "4", "batch size"),
        opt("reps", "30", "repetitions"),
        opt("seed", "0", "master seed"),
        opt("test-size", "0.2", "test set fraction, or an integer count"),
        opt("balance-tol", "0.2", "maximum training-side class fraction difference"),
        opt("pair", "CN-AD", "class pair, negative-positive"),
        opt("precision", "f64", "f64 or f32"),
        switch("shuffle-labels", "permute labels before splitting (null control)"),
    ]
}

fn subcommands() -> Vec<(&'static str, &'static str, Vec<Flag>)> {
    vec![
        ("gen", "generate a synthetic cohort of matrices or volumes", gen_flags()),
        ("extract", "preprocess volumes and write correlation matrices", extract_flags()),
        ("train-eval", "run repeated split/train/evaluate on matrices", train_flags()),
        ("reho", "regional homogeneity table and summaries from volumes", reho_flags()),
    ]
}

fn command() -> Command {
    let mut cmd = Command::new("hilbert-fc")
        .about("Hilbert-curve ROI correlation features and CNN classification")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about, flags) in subcommands() {
        let mut sub = Command::new(name).about(about).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key=value settings; flags override them"),
        );
        for f in flags {
            let mut arg = Arg::new(f.key).long(f.key).help(f.help);
            if f.switch {
                arg = arg.action(ArgAction::SetTrue);
            } else {
                arg = arg.value_name("VALUE");
                if let Some(d) = f.default {
                    arg = arg.help(format!("{} [default: {d}]", f.help));
                }
            }
            sub = sub.arg(arg);
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

/// Config-file values overridden by command-line flags, with defaults filled.
fn resolve(flags: &[Flag], m: &ArgMatches) -> Result<ConfigMap> {
    let cfg = match m.get_one::<String>("config") {
        Some(p) => ConfigMap::load(Path::new(p))?,
        None => ConfigMap::new(),
    };
    for (k, _) in cfg.iter() {
        if !k.starts_with("info.") && !flags.iter().any(|f| f.key == k) {
            return Err(Error::Config(format!("unknown config key {k:?}")));
        }
    }
    let mut out = ConfigMap::new();
    for (k, v) in cfg.iter().filter(|(k, _)| k.starts_with("info.")) {
        out.set(k, v);
    }
    for f in flags {
        let from_cli = m.value_source(f.key) == Some(ValueSource::CommandLine);
        let value = if f.switch && from_cli {
            Some("true".to_string())
        } else if from_cli {
            m.get_one::<String>(f.key).cloned()
        } else {
            cfg.get(f.key).or(f.default).map(str::to_string)
        };
        match value {
            Some(v) => out.set(f.key, v),
            None => return Err(Error::Config(format!("missing required setting --{}", f.key))),
        }
    }
    Ok(out)
}

fn get<T: std::str::FromStr>(cfg: &ConfigMap, key: &str) -> Result<T> {
    let v = cfg.require(key)?;
    v.parse()
        .map_err(|_| Error::Config(format!("invalid value {v:?} for --{key}")))
}

/// `None` for the literal `auto`.
fn get_auto<T: std::str::FromStr>(cfg: &ConfigMap, key: &str) -> Result<Option<T>> {
    match cfg.require(key)? {
        "auto" => Ok(None),
        _ => get(cfg, key).map(Some),
    }
}

fn path(cfg: &ConfigMap, key: &str) -> Result<PathBuf> {
    cfg.require(key).map(PathBuf::from)
}

fn existing(cfg: &ConfigMap, key: &str) -> Result<PathBuf> {
    let p = path(cfg, key)?;
    if !p.exists() {
        return Err(Error::io(
            &p,
            std::io::Error::new(std::io::ErrorKind::NotFound, format!("--{key} does not exist")),
        ));
    }
    Ok(p)
}

fn out_dir(cfg: &ConfigMap) -> Result<PathBuf> {
    let p = path(cfg, "out")?;
    std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    Ok(p)
}

/// Explicit offsets need all three axes.
fn offsets(cfg: &ConfigMap) -> Result<Option<[usize; 3]>> {
    let o = [
        get_auto::<usize>(cfg, "offset-x")?,
        get_auto::<usize>(cfg, "offset-y")?,
        get_auto::<usize>(cfg, "offset-z")?,
    ];
    match o {
        [None, None, None] => Ok(None),
        [Some(x), Some(y), Some(z)] => Ok(Some([x, y, z])),
        _ => Err(Error::Config("set all of --offset-x/y/z or none".into())),
    }
}

fn embedding(cfg: &ConfigMap, curve: &HilbertCurve, dims: [usize; 3]) -> Result<GridEmbedding> {
    let e = match offsets(cfg)? {
        Some(offset) => GridEmbedding { offset },
        None => GridEmbedding::centered(curve.side(), dims)?,
    };
    e.check_fits(curve.side(), dims)?;
    Ok(e)
}

fn parse_grid(s: &str) -> Result<[usize; 3]> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("grid {s:?} is not NXxNYxNZ")))?;
    match parts[..] {
        [x, y, z] if x * y * z > 0 => Ok([x, y, z]),
        _ => Err(Error::Config(format!("grid {s:?} is not NXxNYxNZ"))),
    }
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn cmd_gen(cfg: &ConfigMap) -> Result<()> {
    let mode = cfg.require("mode")?.to_string();
    if mode != "matrices" && mode != "volumes" {
        return Err(Error::Config(format!("--mode must be matrices or volumes, got {mode:?}")));
    }
    let format = match cfg.require("format")? {
        "nifti" => VolumeFormat::Nifti,
        "internal" => VolumeFormat::Internal,
        other => return Err(Error::Config(format!("--format must be nifti or internal, got {other:?}"))),
    };
    let classes = cfg
        .require("classes")?
        .split(',')
        .map(str::parse)
        .collect::<Result<Vec<ClassLabel>>>()
        .map_err(|e| Error::Config(e.to_string()))?;
    let spec = SynthSpec {
        n_per_class: get(cfg, "per-class")?,
        classes,
        r_regions: get(cfg, "regions")?,
        half_length: get(cfg, "half-length")?,
        grid_dims: parse_grid(cfg.require("grid")?)?,
        nt: get(cfg, "nt")?,
        tr_seconds: get(cfg, "tr")?,
        voxel_mm: [get(cfg, "voxel-mm")?; 3],
        intensity_mean: get(cfg, "intensity-mean")?,
        intensity_std: get(cfg, "intensity-std")?,
        separation: get(cfg, "separation")?,
        order: get(cfg, "order")?,
        offset: offsets(cfg)?,
        seed: get(cfg, "seed")?,
    };
    spec.validate()?;
    let atlas_in = match cfg.require("atlas")? {
        "none" => None,
        _ => Some(existing(cfg, "atlas")?),
    };
    let out = out_dir(cfg)?;
    let mut manifest = Manifest::default();

    if mode == "matrices" {
        log!("generating {} matrices", spec.n_per_class * spec.classes.len());
        for m in gen_cohort_matrices(&spec)? {
            let file = write_matrix(&m, &out)?;
            manifest.push(&m.subject_id, m.label, file_name(&file));
        }
    } else {
        let curve = HilbertCurve::new(spec.order)?;
        let cohort = match atlas_in {
            Some(p) => SynthCohort::with_atlas(&spec, load_seed_atlas(&p, curve.side())?)?,
            None => SynthCohort::new(&spec)?,
        };
        cohort.atlas().write(&out.join("atlas.txt"))?;
        let ext = match format {
            VolumeFormat::Nifti => "nii",
            VolumeFormat::Internal => "hfcv",
        };
        for (i, item) in cohort.volumes().enumerate() {
            let (id, label, vol) = item?;
            let file = out.join(format!("{id}.{ext}"));
            write_volume(&vol, &file, format)?;
            manifest.push(&id, label, file_name(&file));
            log!("volume {}/{} {id}", i + 1, cohort.subjects().len());
        }
    }
    manifest.write(&out)?;
    cfg.write(&out.join("config.txt"))?;
    log!("wrote {} subjects to {}", manifest.entries.len(), out.display());
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Slice timing and smoothing as configured.
fn preprocess(cfg: &ConfigMap, vol: Volume4D) -> Result<Volume4D> {
    let vol = match cfg.require("slice-axis")? {
        "none" => vol,
        "x" => slice_time_correct(&vol, Axis::X)?,
        "y" => slice_time_correct(&vol, Axis::Y)?,
        "z" => slice_time_correct(&vol, Axis::Z)?,
        other => return Err(Error::Config(format!("--slice-axis must be x, y, z or none, got {other:?}"))),
    };
    let fwhm: f64 = get(cfg, "fwhm")?;
    if fwhm == 0.0 {
        Ok(vol)
    } else {
        gaussian_smooth(&vol, fwhm)
    }
}

struct VolumeInputs {
    manifest: Manifest,
    base: PathBuf,
    curve: HilbertCurve,
    atlas: SeedAtlas,
    half_length: usize,
}

fn volume_inputs(cfg: &ConfigMap) -> Result<VolumeInputs> {
    let input = existing(cfg, "input")?;
    let atlas_path = existing(cfg, "atlas")?;
    let curve = HilbertCurve::new(get(cfg, "order")?)?;
    let atlas = load_seed_atlas(&atlas_path, curve.side())?;
    let (manifest, base) = Manifest::load(&input)?;
    if manifest.entries.is_empty() {
        return Err(Error::InsufficientSamples(format!("{} lists no subjects", input.display())));
    }
    for e in &manifest.entries {
        let p = base.join(&e.file);
        if !p.is_file() {
            return Err(Error::io(&p, std::io::Error::new(std::io::ErrorKind::NotFound, "listed in manifest")));
        }
    }
    Ok(VolumeInputs {
        manifest,
        base,
        curve,
        atlas,
        half_length: get(cfg, "half-length")?,
    })
}

fn reho_row(vol: &Volume4D, segments: &[crate::features::RoiSegment], emb: &GridEmbedding) -> Result<Vec<f64>> {
    segments
        .iter()
        .map(|s| reho_pairwise(vol, s, emb).map(|pc| reho_region(&pc)))
        .collect()
}

fn cmd_extract(cfg: &ConfigMap) -> Result<()> {
    let inp = volume_inputs(cfg)?;
    let with_reho: bool = get(cfg, "reho")?;
    let hist = HistogramSpec {
        bin_width: get(cfg, "hist-width")?,
        ..HistogramSpec::default()
    };
    let out = out_dir(cfg)?;
    let segments = build_segments(&inp.curve, &inp.atlas, inp.half_length)?;
    let mut manifest = Manifest::default();
    let mut averages = Vec::new();
    let mut table = RehoTable {
        subjects: Vec::new(),
        regions: inp.atlas.regions().iter().map(|r| r.id).collect(),
        values: Vec::new(),
    };
    let mut emb = None;
    for (i, e) in inp.manifest.entries.iter().enumerate() {
        let vol = preprocess(cfg, read_volume(&inp.base.join(&e.file))?)?;
        let emb = match emb {
            Some(x) => x,
            None => *emb.insert(embedding(cfg, &inp.curve, vol.spatial_dims())?),
        };
        if with_reho {
            table.values.extend(reho_row(&vol, &segments, &emb)?);
            table.subjects.push(e.subject_id.clone());
        }
        let avg = time_average(&vol);
        let m = extract_matrix(&avg, &segments, &emb, &e.subject_id, e.label)?;
        let file = write_matrix(&m, &out)?;
        manifest.push(&e.subject_id, e.label, file_name(&file));
        averages.push(avg);
        log!("extracted {}/{} {}", i + 1, inp.manifest.entries.len(), e.subject_id);
    }
    let emb = emb.expect("manifest is non-empty");
    manifest.write(&out)?;
    cohort_stats(&averages, &segments, &emb, hist)?.write_csv(&out)?;
    if with_reho {
        write_reho(&table, &inp.manifest, &out)?;
    }
    let mut echo = cfg.clone();
    echo.set("info.offset", format!("{},{},{}", emb.offset[0], emb.offset[1], emb.offset[2]));
    echo.write(&out.join("config.txt"))
}

fn write_reho(table: &RehoTable, manifest: &Manifest, out: &Path) -> Result<()> {
    use std::fmt::Write as _;
    let nr = table.regions.len();
    let mut s = String::from("subject_id,label");
    for r in &table.regions {
        let _ = write!(s, ",{r}");
    }
    s.push('\n');
    for (i, (id, e)) in table.subjects.iter().zip(&manifest.entries).enumerate() {
        let _ = write!(s, "{id},{}", e.label);
        for v in &table.values[i * nr..(i + 1) * nr] {
            let _ = write!(s, ",{v:.16e}");
        }
        s.push('\n');
    }
    write_text(&out.join("reho.csv"), &s)?;

    let summary = reho_summary(table)?;
    let mut s = String::from("scope,id,mean,std_literal,std_sample\n");
    for (id, sp) in table.subjects.iter().zip(&summary.per_subject) {
        let _ = writeln!(s, "subject,{id},{:.16e},{:.16e},{:.16e}", sp.mean, sp.std_literal, sp.std_sample);
    }
    for (id, sp) in table.regions.iter().zip(&summary.per_region) {
        let _ = writeln!(s, "region,{id},{:.16e},{:.16e},{:.16e}", sp.mean, sp.std_literal, sp.std_sample);
    }
    write_text(&out.join("reho_summary.csv"), &s)
}

fn cmd_reho(cfg: &ConfigMap) -> Result<()> {
    let inp = volume_inputs(cfg)?;
    let out = out_dir(cfg)?;
    let segments = build_segments(&inp.curve, &inp.atlas, inp.half_length)?;
    let mut table = RehoTable {
        subjects: Vec::new(),
        regions: inp.atlas.regions().iter().map(|r| r.id).collect(),
        values: Vec::new(),
    };
    for e in &inp.manifest.entries {
        let vol = preprocess(cfg, read_volume(&inp.base.join(&e.file))?)?;
        let emb = embedding(cfg, &inp.curve, vol.spatial_dims())?;
        table.values.extend(reho_row(&vol, &segments, &emb)?);
        table.subjects.push(e.subject_id.clone());
        log!("reho {}", e.subject_id);
    }
    write_reho(&table, &inp.manifest, &out)?;
    cfg.write(&out.join("config.txt"))
}

fn cmd_train_eval(cfg: &ConfigMap) -> Result<()> {
    let input = existing(cfg, "input")?;
    let exp = ExperimentConfig {
        arch: cfg.require("arch")?.parse()?,
        half_length: get_auto(cfg, "half-length")?,
        repetitions: get(cfg, "reps")?,
        train: TrainConfig {
            epochs: get(cfg, "epochs")?,
            batch_size: get(cfg, "batch")?,
            lr: get(cfg, "lr")?,
            seed: 0,
        },
        test_size: cfg.require("test-size")?.parse()?,
        balance_tol: get(cfg, "balance-tol")?,
        pair: cfg.require("pair")?.parse()?,
        precision: cfg.require("precision")?.parse()?,
        shuffle_labels: get(cfg, "shuffle-labels")?,
    };
    let seed: u64 = get(cfg, "seed")?;
    if exp.train.batch_size == 0 || exp.train.epochs == 0 || !(exp.train.lr > 0.0) {
        return Err(Error::Config("--epochs, --batch and --lr must be positive".into()));
    }
    let out = out_dir(cfg)?;
    let (manifest, base) = Manifest::load(&input)?;
    let mut matrices = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        let m = read_matrix(&base.join(&e.file))?;
        if m.label != e.label {
            return Err(Error::parse(&e.file, format!("label {} disagrees with manifest {}", m.label, e.label)));
        }
        m.check_invariants()?;
        matrices.push(m);
    }
    let mut exp = exp;
    let found = matrices.iter().find_map(|m| m.half_length);
    match (exp.half_length, found) {
        (Some(want), Some(have)) if want != have => {
            return Err(Error::Config(format!("--half-length {want} but matrices were built with {have}")));
        }
        (None, h) => exp.half_length = h,
        _ => {}
    }
    log!(
        "{} matrices, arch {}, {} reps of {} epochs",
        matrices.len(),
        exp.arch,
        exp.repetitions,
        exp.train.epochs
    );
    let start = std::time::Instant::now();
    let report = run_experiment(&matrices, &exp, seed)?;
    let mut extra = ConfigMap::new();
    for key in ["input", "out"] {
        extra.set(key, cfg.require(key)?);
    }
    for (k, v) in cfg.iter().filter(|(k, _)| k.starts_with("info.")) {
        extra.set(k, v);
    }
    emit_report(&report, &out, &extra)?;
    let a = &report.aggregate;
    log!("finished in {:.1} s", start.elapsed().as_secs_f64());
    println!(
        "acc {:.2} +/- {:.2}  se {:.2} +/- {:.2}  sp {:.2} +/- {:.2}",
        a.acc.mean, a.acc.std, a.se.mean, a.se.std, a.sp.mean, a.sp.std
    );
    Ok(())
}

fn dispatch(name: &str, m: &ArgMatches) -> Result<()> {
    let (_, _, flags) = subcommands()
        .into_iter()
        .find(|(n, _, _)| *n == name)
        .ok_or_else(|| Error::Config(format!("unknown subcommand {name:?}")))?;
    let cfg = resolve(&flags, m)?;
    match name {
        "gen" => cmd_gen(&cfg),
        "extract" => cmd_extract(&cfg),
        "train-eval" => cmd_train_eval(&cfg),
        "reho" => cmd_reho(&cfg),
        _ => unreachable!("subcommand table and dispatch agree"),
    }
}

/// Runs the tool on `args` (program name first) and returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let mut cmd = command();
    let matches = match cmd.try_get_matches_from_mut(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let Some((name, sub)) = matches.subcommand() else {
        let _ = cmd.print_help();
        return 1;
    };
    match dispatch(name, sub) {
        Ok(()) => 0,
        Err(e) => {
            log!("error: {e}");
            if e.exit_code() == 1 {
                if let Some(sc) = cmd.find_subcommand_mut(name) {
                    eprintln!("{}", sc.render_usage());
                }
            }
            e.exit_code()
        }
    }
}
