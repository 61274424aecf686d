//! Composite-objective training loop: label-smoothed classification on the
//! source domain, a joint kernel discrepancy between domains, and BSQ
//! regularisation of both modulated front-ends.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dft::DftMethod;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{bsq_grad, bsq_loss, DEFAULT_EPS};
use crate::signal::{frame_signal_with, FrameCount, FrameMatrix, Padding, Signal};
use crate::transfer::classifier::{smoothed_cross_entropy, Activations, ClassifierShape, TinyClassifier};
use crate::transfer::data::LabeledSet;
use crate::transfer::domain::{domain_metric_grad, median_bandwidths};
use crate::transfer::optim::{AdamW, AdamWConfig};
use crate::transform::{magnitude, ModulatedTransform};
use crate::window::WindowParams;

/// Which activation feeds the feature kernel of the domain metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureTap {
    /// Pooled, log-compressed spectrogram.
    #[default]
    Pooled,
    /// Hidden-layer activations.
    Hidden,
}

/// Update rule for the window-length groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowUpdate {
    #[default]
    AdamW,
    /// Plain gradient step `ϖ ← ϖ - κ ∂L/∂ϖ`.
    Sgd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub hop: usize,
    pub max_epoch: usize,
    pub seed: u64,
    pub lr_net: f64,
    pub lr_window: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// When false the domain term weight is 0 for every epoch.
    pub lambda0_enabled: bool,
    pub sample_len: usize,
    pub support: usize,
    pub beta: f64,
    pub soft_width: f64,
    pub smoothing: f64,
    pub weight_decay: f64,
    pub framecount: FrameCount,
    pub pool_rows: usize,
    pub pool_cols: usize,
    pub hidden: usize,
    pub feature_tap: FeatureTap,
    pub window_update: WindowUpdate,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 20,
            hop: 16,
            max_epoch: 200,
            seed: 3407,
            lr_net: 0.001,
            lr_window: 100.0,
            lambda1: 1.0,
            lambda2: 0.01,
            lambda0_enabled: true,
            sample_len: 3072,
            support: 128,
            beta: 8.0,
            soft_width: 2.0,
            smoothing: 0.1,
            weight_decay: 0.01,
            framecount: FrameCount::Strict,
            pool_rows: 8,
            pool_cols: 8,
            hidden: 64,
            feature_tap: FeatureTap::Pooled,
            window_update: WindowUpdate::AdamW,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size as f64),
            ("hop", self.hop as f64),
            ("max_epoch", self.max_epoch as f64),
            ("lr_net", self.lr_net),
            ("lr_window", self.lr_window),
            ("sample_len", self.sample_len as f64),
            ("pool_rows", self.pool_rows as f64),
            ("pool_cols", self.pool_cols as f64),
            ("hidden", self.hidden as f64),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        let nonneg = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("beta", self.beta),
            ("soft_width", self.soft_width),
            ("weight_decay", self.weight_decay),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.support < 2 {
            return Err(Error::invalid("support must be >= 2"));
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return Err(Error::invalid(format!("smoothing {} outside [0, 1)", self.smoothing)));
        }
        Ok(())
    }

    /// Weight of the domain term at `epoch`.
    pub fn lambda0_at(&self, epoch: usize) -> f64 {
        if self.lambda0_enabled {
            lambda0(epoch, self.max_epoch)
        } else {
            0.0
        }
    }
}

/// `-4 / (sqrt(epoch / max_epoch) + 1) + 4`, rising from 0 to 2.
pub fn lambda0(epoch: usize, max_epoch: usize) -> f64 {
    if max_epoch == 0 {
        return 0.0;
    }
    -4.0 / ((epoch as f64 / max_epoch as f64).sqrt() + 1.0) + 4.0
}

pub fn total_loss(l_cl: f64, l_m: f64, l_sbsq: f64, l_tbsq: f64, epoch: usize, cfg: &TrainConfig) -> f64 {
    l_cl + cfg.lambda0_at(epoch) * l_m + cfg.lambda1 * l_sbsq + cfg.lambda2 * l_tbsq
}

/// Term weights of one gradient evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub cl: f64,
    pub m: f64,
    pub sbsq: f64,
    pub tbsq: f64,
}

impl LossWeights {
    pub fn at_epoch(cfg: &TrainConfig, epoch: usize) -> Self {
        Self {
            cl: 1.0,
            m: cfg.lambda0_at(epoch),
            sbsq: cfg.lambda1,
            tbsq: cfg.lambda2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub net: TinyClassifier,
    /// Source-domain window lengths.
    pub theta0: WindowParams,
    /// Target-domain window lengths.
    pub theta1: WindowParams,
    pub opt_net: AdamW,
    pub opt_theta0: AdamW,
    pub opt_theta1: AdamW,
    pub epoch: usize,
    pub rng: ChaCha8Rng,
}

impl TrainState {
    pub fn new(cfg: &TrainConfig, classes: usize, n_frames: usize) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let shape = ClassifierShape {
            pool_rows: cfg.pool_rows,
            pool_cols: cfg.pool_cols,
            hidden: cfg.hidden,
            classes,
        };
        let net = TinyClassifier::new(shape, &mut rng)?;
        let theta = WindowParams::full(n_frames, cfg.beta, cfg.support, cfg.hop)?;
        Ok(Self {
            opt_net: AdamW::new(AdamWConfig::new(cfg.lr_net, cfg.weight_decay), shape.n_params()),
            opt_theta0: AdamW::new(AdamWConfig::new(cfg.lr_window, 0.0), n_frames),
            opt_theta1: AdamW::new(AdamWConfig::new(cfg.lr_window, 0.0), n_frames),
            net,
            theta0: theta.clone(),
            theta1: theta,
            epoch: 0,
            rng,
        })
    }
}

/// Gradients of the composite loss for every parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub net: Vec<f64>,
    pub theta0: Vec<f64>,
    pub theta1: Vec<f64>,
}

/// Loss components averaged over one batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchLosses {
    pub l_cl: f64,
    pub l_m: f64,
    pub l_sbsq: f64,
    pub l_tbsq: f64,
    pub total: f64,
}

/// One parameter update. Window lengths are projected back onto
/// `[MIN_WINDOW_LENGTH, N]`.
pub fn optimizer_step(state: &mut TrainState, grads: &Grads, cfg: &TrainConfig) -> Result<()> {
    state.opt_net.step(&mut state.net.params, &grads.net)?;
    for (theta, opt, g) in [
        (&mut state.theta0, &mut state.opt_theta0, &grads.theta0),
        (&mut state.theta1, &mut state.opt_theta1, &grads.theta1),
    ] {
        match cfg.window_update {
            WindowUpdate::AdamW => opt.step(&mut theta.lengths, g)?,
            WindowUpdate::Sgd => {
                if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Divergence(format!("non-finite window gradient at frame {i}")));
                }
                for (l, d) in theta.lengths.iter_mut().zip(g) {
                    *l -= cfg.lr_window * d;
                }
            }
        }
        theta.clamp();
    }
    Ok(())
}

/// Frame every signal with the training framing.
pub fn frame_all(signals: &[Signal], cfg: &TrainConfig) -> Result<Vec<FrameMatrix>> {
    let frames: Vec<FrameMatrix> = signals
        .par_iter()
        .map(|s| frame_signal_with(s, cfg.support, cfg.hop, Padding::Zero, cfg.framecount))
        .collect::<Result<_>>()?;
    if let Some(first) = frames.first() {
        if let Some(i) = frames.iter().position(|f| f.n_frames() != first.n_frames()) {
            return Err(Error::shape(format!(
                "signal {i} has {} frames, signal 0 has {}",
                frames[i].n_frames(),
                first.n_frames()
            )));
        }
    }
    Ok(frames)
}

struct Forward {
    mag: Matrix,
    bsq: f64,
    acts: Activations,
}

fn forward_one(t: &ModulatedTransform, net: &TinyClassifier, frames: &FrameMatrix) -> Result<Forward> {
    let mag = magnitude(&t.forward(frames)?);
    let bsq = bsq_loss(&mag, DEFAULT_EPS)?;
    let acts = net.forward(&mag)?;
    Ok(Forward { mag, bsq, acts })
}

fn tap(acts: &Activations, tap: FeatureTap) -> Vec<f64> {
    match tap {
        FeatureTap::Pooled => acts.pooled.clone(),
        FeatureTap::Hidden => acts.hidden.clone(),
    }
}

/// Per-sample backward: network gradient and window-length gradient.
fn backward_one(
    t: &ModulatedTransform,
    net: &TinyClassifier,
    frames: &FrameMatrix,
    fw: &Forward,
    d_logits: &[f64],
    d_feature: &[f64],
    feature_tap: FeatureTap,
    bsq_weight: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut g_net = vec![0.0; net.params.len()];
    let (extra_hidden, extra_pooled) = match feature_tap {
        FeatureTap::Hidden => (Some(d_feature), None),
        FeatureTap::Pooled => (None, Some(d_feature)),
    };
    let mut d_pooled = net.backward(&fw.acts, d_logits, extra_hidden, &mut g_net);
    if let Some(extra) = extra_pooled {
        for (d, e) in d_pooled.iter_mut().zip(extra) {
            *d += e;
        }
    }
    let (rows, cols) = fw.mag.shape();
    let mut d_mag = net.pool_backward(&fw.acts.pooled, &d_pooled, rows, cols);
    if bsq_weight != 0.0 {
        let g = bsq_grad(&fw.mag, DEFAULT_EPS, bsq_weight)?;
        d_mag.add_assign_scaled(&g, 1.0);
    }
    let d_len = t.backward(frames, &d_mag, false)?.d_lengths;
    Ok((g_net, d_len))
}

fn sum_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// Loss and gradients on one batch pair. Source and target batches must have
/// equal size.
pub fn batch_gradients(
    state: &TrainState,
    cfg: &TrainConfig,
    weights: LossWeights,
    src: &[&FrameMatrix],
    labels: &[usize],
    tgt: &[&FrameMatrix],
) -> Result<(BatchLosses, Grads)> {
    if src.len() != labels.len() {
        return Err(Error::shape("source frames and labels differ in count"));
    }
    if src.len() != tgt.len() || src.is_empty() {
        return Err(Error::shape(format!(
            "source batch {} vs target batch {}",
            src.len(),
            tgt.len()
        )));
    }
    let n = src.len() as f64;
    let t0 = ModulatedTransform::new(state.theta0.clone(), cfg.soft_width, DftMethod::Fft)?;
    let t1 = ModulatedTransform::new(state.theta1.clone(), cfg.soft_width, DftMethod::Fft)?;
    let net = &state.net;

    let fs: Vec<Forward> = src.par_iter().map(|f| forward_one(&t0, net, f)).collect::<Result<_>>()?;
    let ft: Vec<Forward> = tgt.par_iter().map(|f| forward_one(&t1, net, f)).collect::<Result<_>>()?;

    let mut l_cl = 0.0;
    let mut d_logits_s = Vec::with_capacity(src.len());
    for (f, &y) in fs.iter().zip(labels) {
        let (l, g) = smoothed_cross_entropy(&f.acts.logits, y, cfg.smoothing)?;
        l_cl += l / n;
        d_logits_s.push(g.into_iter().map(|v| weights.cl * v / n).collect::<Vec<f64>>());
    }
    let l_sbsq = fs.iter().map(|f| f.bsq).sum::<f64>() / n;
    let l_tbsq = ft.iter().map(|f| f.bsq).sum::<f64>() / n;

    let x_s: Vec<Vec<f64>> = fs.iter().map(|f| tap(&f.acts, cfg.feature_tap)).collect();
    let x_t: Vec<Vec<f64>> = ft.iter().map(|f| tap(&f.acts, cfg.feature_tap)).collect();
    let z_s: Vec<Vec<f64>> = fs.iter().map(|f| f.acts.logits.clone()).collect();
    let z_t: Vec<Vec<f64>> = ft.iter().map(|f| f.acts.logits.clone()).collect();
    let bw = median_bandwidths(&x_s, &x_t);
    let dm = domain_metric_grad(&x_s, &z_s, &x_t, &z_t, &bw)?;
    let l_m = dm.value;

    let scale = |v: &[f64], k: f64| -> Vec<f64> { v.iter().map(|x| x * k).collect() };
    let src_parts: Vec<(Vec<f64>, Vec<f64>)> = (0..src.len())
        .into_par_iter()
        .map(|i| {
            let mut dl = d_logits_s[i].clone();
            sum_into(&mut dl, &scale(&dm.d_z_s[i], weights.m));
            let dx = scale(&dm.d_x_s[i], weights.m);
            backward_one(&t0, net, src[i], &fs[i], &dl, &dx, cfg.feature_tap, weights.sbsq / n)
        })
        .collect::<Result<_>>()?;
    let tgt_parts: Vec<(Vec<f64>, Vec<f64>)> = (0..tgt.len())
        .into_par_iter()
        .map(|i| {
            let dl = scale(&dm.d_z_t[i], weights.m);
            let dx = scale(&dm.d_x_t[i], weights.m);
            backward_one(&t1, net, tgt[i], &ft[i], &dl, &dx, cfg.feature_tap, weights.tbsq / n)
        })
        .collect::<Result<_>>()?;

    let mut grads = Grads {
        net: vec![0.0; net.params.len()],
        theta0: vec![0.0; state.theta0.n_frames()],
        theta1: vec![0.0; state.theta1.n_frames()],
    };
    for (g_net, g_len) in &src_parts {
        sum_into(&mut grads.net, g_net);
        sum_into(&mut grads.theta0, g_len);
    }
    for (g_net, g_len) in &tgt_parts {
        sum_into(&mut grads.net, g_net);
        sum_into(&mut grads.theta1, g_len);
    }
    let total = weights.cl * l_cl + weights.m * l_m + weights.sbsq * l_sbsq + weights.tbsq * l_tbsq;
    Ok((
        BatchLosses {
            l_cl,
            l_m,
            l_sbsq,
            l_tbsq,
            total,
        },
        grads,
    ))
}

/// One row of the training history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub l_cl: f64,
    pub l_m: f64,
    pub l_sbsq: f64,
    pub l_tbsq: f64,
    pub lambda0: f64,
    pub total: f64,
    /// Accuracy on the evaluation set, NaN when none was given.
    pub target_acc: f64,
}

pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Train from a fresh state. `tgt` labels are never read.
pub fn train(
    src: &LabeledSet,
    tgt: &[Signal],
    eval: Option<&LabeledSet>,
    cfg: &TrainConfig,
) -> Result<(TrainState, Vec<HistoryRow>)> {
    train_with_progress(src, tgt, eval, cfg, |_| {})
}

pub fn train_with_progress(
    src: &LabeledSet,
    tgt: &[Signal],
    eval: Option<&LabeledSet>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&HistoryRow),
) -> Result<(TrainState, Vec<HistoryRow>)> {
    cfg.validate()?;
    if src.is_empty() || tgt.is_empty() {
        return Err(Error::invalid("source and target sets must be non-empty"));
    }
    let src_frames = frame_all(&src.signals, cfg)?;
    let tgt_frames = frame_all(tgt, cfg)?;
    let n_frames = src_frames[0].n_frames();
    if tgt_frames[0].n_frames() != n_frames {
        return Err(Error::shape(format!(
            "source signals give {n_frames} frames, target {}",
            tgt_frames[0].n_frames()
        )));
    }
    let eval_frames = match eval {
        Some(e) => {
            if e.classes != src.classes {
                return Err(Error::invalid(format!(
                    "evaluation set has {} classes, source {}",
                    e.classes, src.classes
                )));
            }
            Some(frame_all(&e.signals, cfg)?)
        }
        None => None,
    };
    let mut state = TrainState::new(cfg, src.classes, n_frames)?;
    let bs = cfg.batch_size.min(src.len()).min(tgt.len());
    let n_batches = (src.len().min(tgt.len()) / bs).max(1);
    let mut history = Vec::with_capacity(cfg.max_epoch);

    for epoch in 0..cfg.max_epoch {
        state.epoch = epoch;
        let mut src_order: Vec<usize> = (0..src.len()).collect();
        let mut tgt_order: Vec<usize> = (0..tgt.len()).collect();
        src_order.shuffle(&mut state.rng);
        tgt_order.shuffle(&mut state.rng);
        let weights = LossWeights::at_epoch(cfg, epoch);
        let mut acc = BatchLosses::default();
        for b in 0..n_batches {
            let si = &src_order[b * bs..(b + 1) * bs];
            let ti = &tgt_order[b * bs..(b + 1) * bs];
            let sf: Vec<&FrameMatrix> = si.iter().map(|&i| &src_frames[i]).collect();
            let labels: Vec<usize> = si.iter().map(|&i| src.labels[i]).collect();
            let tf: Vec<&FrameMatrix> = ti.iter().map(|&i| &tgt_frames[i]).collect();
            let (losses, grads) = batch_gradients(&state, cfg, weights, &sf, &labels, &tf)?;
            if !losses.total.is_finite() || losses.total > DIVERGENCE_LIMIT {
                return Err(Error::Divergence(format!(
                    "loss {} at epoch {epoch}, batch {b}",
                    losses.total
                )));
            }
            optimizer_step(&mut state, &grads, cfg)?;
            let k = 1.0 / n_batches as f64;
            acc.l_cl += k * losses.l_cl;
            acc.l_m += k * losses.l_m;
            acc.l_sbsq += k * losses.l_sbsq;
            acc.l_tbsq += k * losses.l_tbsq;
            acc.total += k * losses.total;
        }
        let target_acc = match (&eval_frames, eval) {
            (Some(frames), Some(e)) => evaluate_frames(&state, frames, &e.labels, e.classes)?.accuracy,
            _ => f64::NAN,
        };
        let row = HistoryRow {
            epoch,
            l_cl: acc.l_cl,
            l_m: acc.l_m,
            l_sbsq: acc.l_sbsq,
            l_tbsq: acc.l_tbsq,
            lambda0: weights.m,
            total: acc.total,
            target_acc,
        };
        on_epoch(&row);
        history.push(row);
    }
    state.epoch = cfg.max_epoch;
    Ok((state, history))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[(true, predicted)]` counts.
    pub confusion: Matrix,
    pub predictions: Vec<usize>,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Classify with the target-domain windows under the hard mask.
pub fn evaluate(state: &TrainState, test: &LabeledSet, cfg: &TrainConfig) -> Result<Evaluation> {
    let frames = frame_all(&test.signals, cfg)?;
    evaluate_frames(state, &frames, &test.labels, test.classes)
}

fn evaluate_frames(state: &TrainState, frames: &[FrameMatrix], labels: &[usize], classes: usize) -> Result<Evaluation> {
    if classes != state.net.shape.classes {
        return Err(Error::invalid(format!(
            "test set has {classes} classes, model {}",
            state.net.shape.classes
        )));
    }
    if frames.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let t1 = ModulatedTransform::new(state.theta1.clone(), 0.0, DftMethod::Fft)?;
    let predictions: Vec<usize> = frames
        .par_iter()
        .map(|f| {
            let mag = magnitude(&t1.forward(f)?);
            Ok(argmax(&state.net.forward(&mag)?.logits))
        })
        .collect::<Result<_>>()?;
    let mut confusion = Matrix::zeros(classes, classes);
    let mut correct = 0usize;
    for (&p, &y) in predictions.iter().zip(labels) {
        confusion[(y, p)] += 1.0;
        correct += usize::from(p == y);
    }
    Ok(Evaluation {
        accuracy: correct as f64 / frames.len() as f64,
        confusion,
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::data::{generate_benchmark, BenchmarkSpec};

    #[test]
    fn lambda0_examples() {
        assert_eq!(lambda0(0, 200), 0.0);
        assert_eq!(lambda0(200, 200), 2.0);
        assert_eq!(lambda0(50, 200), -4.0 / 1.5 + 4.0);
        for e in 1..=200 {
            assert!(lambda0(e, 200) > lambda0(e - 1, 200));
        }
    }

    #[test]
    fn total_loss_examples() {
        let cfg = TrainConfig::default();
        assert_eq!(total_loss(0.7, 5.0, 0.4, 0.3, 0, &cfg), 0.7 + 0.4 + 0.01 * 0.3);
        assert_eq!(total_loss(0.0, 0.0, 0.0, 0.0, 17, &cfg), 0.0);
        assert!((total_loss(1.0, 1.0, 1.0, 1.0, 200, &cfg) - 4.01).abs() < 1e-15);
    }

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.batch_size, c.hop, c.max_epoch, c.seed, c.sample_len), (20, 16, 200, 3407, 3072));
        assert_eq!((c.lr_net, c.lr_window, c.lambda1, c.lambda2), (0.001, 100.0, 1.0, 0.01));
    }

    fn tiny_state(cfg: &TrainConfig) -> TrainState {
        TrainState::new(cfg, 4, 10).unwrap()
    }

    #[test]
    fn zero_gradient_keeps_windows_and_clamps() {
        let cfg = TrainConfig {
            support: 16,
            hop: 4,
            ..TrainConfig::default()
        };
        let mut s = tiny_state(&cfg);
        let before = s.theta0.clone();
        let g = Grads {
            net: vec![0.0; s.net.params.len()],
            theta0: vec![0.0; 10],
            theta1: vec![-1.0; 10],
        };
        optimizer_step(&mut s, &g, &cfg).unwrap();
        assert_eq!(s.theta0, before);
        // pushed outward from N: stays at N
        assert!(s.theta1.lengths.iter().all(|&l| l == 16.0));
    }

    #[test]
    fn nan_gradient_aborts() {
        let cfg = TrainConfig {
            support: 16,
            hop: 4,
            ..TrainConfig::default()
        };
        let mut s = tiny_state(&cfg);
        let mut g = Grads {
            net: vec![0.0; s.net.params.len()],
            theta0: vec![0.0; 10],
            theta1: vec![0.0; 10],
        };
        g.net[3] = f64::NAN;
        assert!(matches!(optimizer_step(&mut s, &g, &cfg), Err(Error::Divergence(_))));
    }

    fn small_task() -> (TrainConfig, LabeledSet, LabeledSet) {
        let cfg = TrainConfig {
            batch_size: 4,
            max_epoch: 2,
            sample_len: 512,
            support: 32,
            hop: 8,
            pool_rows: 4,
            pool_cols: 4,
            hidden: 8,
            ..TrainConfig::default()
        };
        let b = generate_benchmark(
            &BenchmarkSpec {
                classes: 4,
                per_class: 2,
                sample_rate: 12800.0,
                sample_len: 512,
            },
            11,
        )
        .unwrap();
        (cfg, b.source, b.target)
    }

    #[test]
    fn history_length_and_determinism() {
        let (cfg, src, tgt) = small_task();
        let (_, h1) = train(&src, &tgt.signals, Some(&tgt), &cfg).unwrap();
        let (_, h2) = train(&src, &tgt.signals, Some(&tgt), &cfg).unwrap();
        assert_eq!(h1.len(), 2);
        assert_eq!(h1, h2);
    }

    #[test]
    fn gradient_routing() {
        let (cfg, src, tgt) = small_task();
        let sf = frame_all(&src.signals, &cfg).unwrap();
        let tf = frame_all(&tgt.signals, &cfg).unwrap();
        let s = TrainState::new(&cfg, 4, sf[0].n_frames()).unwrap();
        let sref: Vec<&FrameMatrix> = sf.iter().take(4).collect();
        let tref: Vec<&FrameMatrix> = tf.iter().take(4).collect();
        let labels = &src.labels[..4];

        // BSQ only: network untouched, window gradients are the BSQ gradients
        let w = LossWeights {
            cl: 0.0,
            m: 0.0,
            sbsq: 1.0,
            tbsq: 0.5,
        };
        let (_, g) = batch_gradients(&s, &cfg, w, &sref, labels, &tref).unwrap();
        assert!(g.net.iter().all(|&v| v == 0.0));
        let t0 = ModulatedTransform::new(s.theta0.clone(), cfg.soft_width, DftMethod::Direct).unwrap();
        let mut expect = vec![0.0; sf[0].n_frames()];
        for f in &sref {
            let mag = magnitude(&t0.forward(f).unwrap());
            let up = bsq_grad(&mag, DEFAULT_EPS, 0.25).unwrap();
            sum_into(&mut expect, &t0.backward(f, &up, false).unwrap().d_lengths);
        }
        for (a, b) in g.theta0.iter().zip(&expect) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }

        // no BSQ, no domain term: target windows receive nothing
        let w = LossWeights {
            cl: 1.0,
            m: 0.0,
            sbsq: 0.0,
            tbsq: 0.0,
        };
        let (_, g) = batch_gradients(&s, &cfg, w, &sref, labels, &tref).unwrap();
        assert!(g.theta1.iter().all(|&v| v == 0.0));
        assert!(g.net.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn constant_logits_give_chance_accuracy() {
        let (cfg, src, _) = small_task();
        let sf = frame_all(&src.signals, &cfg).unwrap();
        let mut s = TrainState::new(&cfg, 4, sf[0].n_frames()).unwrap();
        s.net.params.iter_mut().for_each(|p| *p = 0.0);
        let e = evaluate(&s, &src, &cfg).unwrap();
        assert_eq!(e.accuracy, 0.25);
        for r in 0..4 {
            assert_eq!(e.confusion.row(r).iter().sum::<f64>(), 2.0);
        }
    }
}
