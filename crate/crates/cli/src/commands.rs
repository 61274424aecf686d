use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use adaptive_stft::config::{RunConfig, TransformMode};
use adaptive_stft::io::{self, ManifestEntry};
use adaptive_stft::metrics::{balanced_cv_vectors, quality_report, QualityReport, DEFAULT_EPS};
use adaptive_stft::optimize::{optimize_lengths, OptimizeOptions, Tying};
use adaptive_stft::signal::{frame_signal_with, FrameMatrix, Padding};
use adaptive_stft::transfer::data::{generate_benchmark, BenchmarkSpec, LabeledSet, CLASS_NAMES};
use adaptive_stft::transfer::persist::{format_checkpoint, format_history, Checkpoint};
use adaptive_stft::transfer::{evaluate, train_with_progress, HistoryRow};
use adaptive_stft::transform::{magnitude, ModulatedTransform, Spectrogram};
use adaptive_stft::window::WindowParams;
use adaptive_stft::{Error, Matrix};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Diverged(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Diverged(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Diverged(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Divergence(_) => Failure::Diverged(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn with_path(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| match e {
        Error::Divergence(_) => Failure::Diverged(e.to_string()),
        _ => Failure::Data(format!("{}: {e}", path.display())),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Failure::Usage(format!("missing required {flag}")))
}

/// `<path><suffix>` without touching the existing extension.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn bench_spec(cfg: &RunConfig) -> BenchmarkSpec {
    BenchmarkSpec {
        classes: cfg.classes,
        per_class: cfg.per_class,
        sample_rate: cfg.sample_rate,
        sample_len: cfg.train.sample_len,
    }
}

const DOMAINS: [&str; 3] = ["source", "target", "test"];

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let out = required(&cfg.output, "--out")?;
    if cfg.per_class == 0 {
        return Err(Failure::Usage("--per-class must be >= 1".into()));
    }
    let b = generate_benchmark(&bench_spec(cfg), cfg.train.seed)?;
    for (domain, set) in DOMAINS.iter().zip([&b.source, &b.target, &b.target_test]) {
        let mut entries = Vec::with_capacity(set.len());
        for (i, (sig, &label)) in set.signals.iter().zip(&set.labels).enumerate() {
            let file = format!("{domain}/{i:04}_{}.txt", CLASS_NAMES[label]);
            write(&out.join(&file), &io::format_signal(sig))?;
            entries.push(ManifestEntry {
                file,
                label,
                domain: domain.to_string(),
            });
        }
        write(&out.join(format!("{domain}.csv")), &io::format_manifest(&entries))?;
    }
    write(&out.join("config.txt"), &cfg.render())?;
    println!(
        "wrote {} source, {} target and {} test signals to {}",
        b.source.len(),
        b.target.len(),
        b.target_test.len(),
        out.display()
    );
    Ok(())
}

fn frames_of(cfg: &RunConfig, input: &Path) -> Result<FrameMatrix> {
    let x = io::load_signal(input).map_err(with_path(input))?;
    let t = &cfg.train;
    Ok(frame_signal_with(&x, t.support, t.hop, Padding::Zero, t.framecount)?)
}

/// Lengths from `cfg.lengths`, or the full support with a warning.
fn initial_lengths(cfg: &RunConfig, n_frames: usize) -> Result<Vec<f64>> {
    let t = &cfg.train;
    let Some(path) = &cfg.lengths else {
        eprintln!("warning: no --lengths given, using window length {} for every frame", t.support);
        return Ok(vec![t.support as f64; n_frames]);
    };
    let l = io::parse_lengths(&read(path)?).map_err(with_path(path))?;
    if l.support != t.support || l.beta != t.beta {
        return Err(Failure::Data(format!(
            "{}: lengths were written for support={} beta={}, run uses support={} beta={}",
            path.display(),
            l.support,
            l.beta,
            t.support,
            t.beta
        )));
    }
    Ok(l.lengths)
}

fn report_line(r: &QualityReport) -> String {
    format!("q_f={} q_t={} bsq={} renyi={}", r.q_f, r.q_t, r.bsq, r.renyi)
}

/// Bin with the largest time-averaged magnitude.
fn peak_bin(mag: &Matrix) -> usize {
    let (t, f) = mag.shape();
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for j in 0..f {
        let v: f64 = (0..t).map(|i| mag[(i, j)]).sum();
        if v > best_v {
            best_v = v;
            best = j;
        }
    }
    best
}

pub fn transform(cfg: &RunConfig) -> Result<()> {
    let input = required(&cfg.input, "--input")?;
    let frames = frames_of(cfg, input)?;
    let t = &cfg.train;
    let n_frames = frames.n_frames();
    let lengths = match cfg.mode {
        TransformMode::Stft => vec![t.support as f64; n_frames],
        TransformMode::Dstft => {
            let l = initial_lengths(cfg, 1)?;
            let theta = l[0];
            if l.iter().any(|&v| v != theta) {
                return Err(Failure::Data("dstft needs a single shared window length".into()));
            }
            vec![theta; n_frames]
        }
        TransformMode::Mdstft => initial_lengths(cfg, n_frames)?,
    };
    if lengths.len() != n_frames {
        return Err(Failure::Data(format!(
            "{} window lengths for {n_frames} frames",
            lengths.len()
        )));
    }
    let params = WindowParams::new(lengths, t.beta, t.support, t.hop)?;
    // reporting always uses the hard mask
    let spec: Spectrogram = ModulatedTransform::new(params, 0.0, cfg.dft)?.forward(&frames)?;
    let mag = magnitude(&spec);
    let report = quality_report(&mag, DEFAULT_EPS, cfg.alpha)?;
    if let Some(out) = &cfg.output {
        write(out, &io::format_spectrogram(&spec, cfg.complex))?;
        write(&sibling(out, ".config"), &cfg.render())?;
    }
    let pb = peak_bin(&mag);
    println!(
        "mode={} frames={n_frames} bins={} peak_bin={pb} peak_hz={}",
        cfg.mode.name(),
        spec.bins,
        spec.bin_frequency(pb)
    );
    println!("{}", report_line(&report));
    Ok(())
}

pub fn optimize_window(cfg: &RunConfig, trajectory: Option<PathBuf>) -> Result<()> {
    let input = required(&cfg.input, "--input")?;
    let out = required(&cfg.output, "--output")?;
    let tying = match cfg.mode {
        TransformMode::Mdstft => Tying::PerFrame,
        TransformMode::Dstft => Tying::Shared,
        TransformMode::Stft => {
            return Err(Failure::Usage("optimize-window needs --mode mdstft or dstft".into()));
        }
    };
    let frames = frames_of(cfg, input)?;
    let t = &cfg.train;
    let n_frames = frames.n_frames();
    let mut lengths = if cfg.lengths.is_some() {
        initial_lengths(cfg, n_frames)?
    } else {
        vec![t.support as f64; n_frames]
    };
    if tying == Tying::Shared && lengths.len() == 1 {
        lengths = vec![lengths[0]; n_frames];
    }
    if lengths.len() != n_frames {
        return Err(Failure::Data(format!(
            "{} window lengths for {n_frames} frames",
            lengths.len()
        )));
    }
    let init = WindowParams::new(lengths, t.beta, t.support, t.hop)?;
    let opts = OptimizeOptions {
        iterations: cfg.iterations,
        lr: t.lr_window,
        soft_width: t.soft_width,
        method: cfg.dft,
        tying,
        ..OptimizeOptions::default()
    };
    let r = optimize_lengths(&frames, init, &opts)?;
    let saved: &[f64] = match tying {
        Tying::Shared => &r.params.lengths[..1],
        Tying::PerFrame => &r.params.lengths,
    };
    write(out, &io::format_lengths(saved, t.beta, t.support))?;
    let mut csv = String::from("iter,bsq,soft_bsq,step,grad_norm\n");
    for row in &r.trajectory {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.iter,
            io::fmt_f64(row.bsq),
            io::fmt_f64(row.soft_bsq),
            io::fmt_f64(row.step),
            io::fmt_f64(row.grad_norm)
        ));
    }
    let traj = trajectory.unwrap_or_else(|| sibling(out, ".trajectory.csv"));
    write(&traj, &csv)?;
    write(&sibling(out, ".config"), &cfg.render())?;
    let last = r.trajectory.last().map_or(r.initial_bsq, |row| row.bsq);
    println!("initial_bsq={} final_bsq={} iterations={}", r.initial_bsq, last, r.trajectory.len());
    Ok(())
}

fn load_set(dir: &Path, domain: &str, classes: usize) -> Result<Option<LabeledSet>> {
    let manifest = dir.join(format!("{domain}.csv"));
    if !manifest.exists() {
        return Ok(None);
    }
    let entries = io::parse_manifest(&read(&manifest)?).map_err(with_path(&manifest))?;
    let mut signals = Vec::with_capacity(entries.len());
    let mut labels = Vec::with_capacity(entries.len());
    for e in entries {
        let p = dir.join(&e.file);
        signals.push(io::load_signal(&p).map_err(with_path(&p))?);
        labels.push(e.label);
    }
    Ok(Some(LabeledSet::new(signals, labels, classes).map_err(with_path(&manifest))?))
}

fn confusion_text(m: &Matrix) -> String {
    let k = m.rows();
    let mut s = String::from("true\\pred");
    for name in CLASS_NAMES.iter().take(k) {
        s.push_str(&format!(" {name:>5}"));
    }
    s.push('\n');
    for (i, name) in CLASS_NAMES.iter().enumerate().take(k) {
        s.push_str(&format!("{name:>9}"));
        for v in m.row(i) {
            s.push_str(&format!(" {:>5}", *v as usize));
        }
        s.push('\n');
    }
    s
}

pub fn transfer(cfg: &RunConfig, quiet: bool) -> Result<()> {
    let out = required(&cfg.output, "--out")?;
    let (source, target, test) = match &cfg.data_dir {
        Some(dir) => {
            let need = |d: &str| -> Result<LabeledSet> {
                load_set(dir, d, cfg.classes)?
                    .ok_or_else(|| Failure::Data(format!("{}: missing {d}.csv", dir.display())))
            };
            let source = need("source")?;
            let target = need("target")?;
            let test = load_set(dir, "test", cfg.classes)?;
            (source, target, test)
        }
        None => {
            let b = generate_benchmark(&bench_spec(cfg), cfg.train.seed)?;
            (b.source, b.target, Some(b.target_test))
        }
    };
    let eval_set = test.as_ref().unwrap_or(&target);
    let max_epoch = cfg.train.max_epoch;
    let (state, history) = train_with_progress(&source, &target.signals, Some(eval_set), &cfg.train, |r: &HistoryRow| {
        if !quiet {
            eprintln!(
                "epoch {}/{max_epoch} l_cl={:.5} l_m={:.5} l_sbsq={:.5} l_tbsq={:.5} total={:.5} target_acc={:.4}",
                r.epoch + 1,
                r.l_cl,
                r.l_m,
                r.l_sbsq,
                r.l_tbsq,
                r.total,
                r.target_acc
            );
        }
    })?;
    let ev = evaluate(&state, eval_set, &cfg.train)?;
    write(&out.join("history.csv"), &format_history(&history))?;
    write(
        &out.join("checkpoint.txt"),
        &format_checkpoint(&Checkpoint {
            net: state.net.clone(),
            theta0: state.theta0.clone(),
            theta1: state.theta1.clone(),
        }),
    )?;
    let report = format!("target_accuracy={}\n{}", ev.accuracy, confusion_text(&ev.confusion));
    write(&out.join("report.txt"), &report)?;
    write(&out.join("config.txt"), &cfg.render())?;
    print!("{report}");
    Ok(())
}

pub fn metrics(cfg: &RunConfig, files: &[PathBuf], compare: bool, cv: bool) -> Result<()> {
    let mut rows = Vec::with_capacity(files.len());
    for f in files {
        let parsed = io::parse_spectrogram(&read(f)?).map_err(with_path(f))?;
        let r = quality_report(&parsed.magnitude, DEFAULT_EPS, cfg.alpha).map_err(with_path(f))?;
        if cv {
            let (c_f, c_t) = balanced_cv_vectors(&parsed.magnitude, DEFAULT_EPS)?;
            let mut s = String::from("axis,index,value\n");
            for (axis, v) in [("f", &c_f), ("t", &c_t)] {
                for (i, x) in v.iter().enumerate() {
                    s.push_str(&format!("{axis},{i},{}\n", io::fmt_f64(*x)));
                }
            }
            write(&sibling(f, ".cv.csv"), &s)?;
        }
        rows.push((f.display().to_string(), r));
    }
    if compare {
        rows.sort_by(|a, b| a.1.bsq.total_cmp(&b.1.bsq));
        println!("rank,file,bsq,renyi,q_f,q_t");
        for (i, (f, r)) in rows.iter().enumerate() {
            println!("{},{f},{},{},{},{}", i + 1, r.bsq, r.renyi, r.q_f, r.q_t);
        }
    } else {
        for (f, r) in &rows {
            println!("{} file={f}", report_line(r));
        }
    }
    Ok(())
}
