//! The epoch loop.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::data::{Dataset, Normalizer, Split, SplitKind, Windowing};
use crate::error::{Error, ErrorKind, Result};
use crate::model::AnyModel;
use crate::tensor::{Scalar, Tensor};

use super::loss::{relative_l2_per_sample, relative_l2_with_grad};
use super::optim::{clip_grad_norm, lr_schedule, optimizer_step};
use super::rollout::{frame, rollout_eval, shift_window, shift_window_adjoint};
use super::{seeded_rng, EpochRecord, TrainConfig, TrainReport, TrainState};

const METRICS_HEADER: &str = "epoch,lr,train_rel_l2,test_rel_l2,wall_seconds";

/// Where a run writes its artifacts. Either may be absent.
#[derive(Debug, Clone, Default)]
pub struct TrainOutputs {
    /// Receives `last/` (and `best/` on improvement).
    pub checkpoint_dir: Option<PathBuf>,
    /// Per-epoch metrics, appended to.
    pub metrics_csv: Option<PathBuf>,
}

/// Train from `state.epoch` up to `cfg.epochs`, then evaluate.
pub fn train<T: Scalar>(
    state: &mut TrainState<T>,
    data: &Dataset<T>,
    cfg: &TrainConfig,
    outputs: &TrainOutputs,
    on_epoch: &mut (dyn FnMut(&EpochRecord) + Send),
) -> Result<TrainReport> {
    cfg.validate()?;
    if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| run(state, data, cfg, outputs, on_epoch))
    } else {
        run(state, data, cfg, outputs, on_epoch)
    }
}

fn run<T: Scalar>(
    state: &mut TrainState<T>,
    data: &Dataset<T>,
    cfg: &TrainConfig,
    outputs: &TrainOutputs,
    on_epoch: &mut (dyn FnMut(&EpochRecord) + Send),
) -> Result<TrainReport> {
    check_channels(&state.model, data)?;
    state.normalizers = Some((data.input_norm().clone(), data.output_norm().clone()));
    let train = Split::new(data.encode_inputs(&data.train.inputs)?, data.train.targets.clone())?;
    if train.is_empty() && state.epoch < cfg.epochs {
        return Err(Error::Data("no training samples".into()));
    }
    let mut best = state
        .history
        .iter()
        .map(|r| r.test_rel_l2)
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);

    for epoch in state.epoch..cfg.epochs {
        let start = Instant::now();
        let lr = lr_schedule(epoch, cfg);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut seeded_rng(state.seed, epoch as u64 + 1));

        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = train.gather(chunk)?;
            state.model.zero_grad();
            let loss = loss_and_backward(&mut state.model, data, &batch.inputs, &batch.targets)
                .map_err(|e| diverged(e, epoch))?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            let mut params = state.model.params_mut();
            if let Some(c) = cfg.grad_clip {
                clip_grad_norm(&mut params, c);
            }
            state.step += 1;
            optimizer_step(&mut params, &mut state.moments, state.step, lr, cfg.weight_decay)
                .map_err(|e| diverged(e, epoch))?;
            total += loss * chunk.len() as f64;
        }
        let train_rel_l2 = total / train.len() as f64;
        let test_rel_l2 = evaluate(&state.model, data, SplitKind::Test, cfg.batch_size).map_err(|e| diverged(e, epoch))?;
        if !test_rel_l2.is_finite() && !data.test.is_empty() {
            return Err(Error::Divergence { epoch, loss: test_rel_l2 });
        }
        let record = EpochRecord {
            epoch,
            lr,
            train_rel_l2,
            test_rel_l2,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        state.history.push(record);
        state.epoch = epoch + 1;
        if let Some(path) = &outputs.metrics_csv {
            append_metrics(path, &record)?;
        }
        on_epoch(&record);

        if let Some(dir) = &outputs.checkpoint_dir {
            if test_rel_l2 < best {
                best = test_rel_l2;
                state.save(dir.join("best"))?;
            }
            if cfg.checkpoint_every > 0 && state.epoch % cfg.checkpoint_every == 0 {
                state.save(dir.join("last"))?;
            }
        }
    }

    if let Some(dir) = &outputs.checkpoint_dir {
        state.save(dir.join("last"))?;
    }
    let final_test = match state.history.last() {
        Some(r) if r.epoch + 1 == state.epoch => r.test_rel_l2,
        _ => evaluate(&state.model, data, SplitKind::Test, cfg.batch_size)?,
    };
    Ok(state.report(final_test))
}

fn diverged(e: Error, epoch: usize) -> Error {
    match (&e, e.kind()) {
        (Error::Divergence { .. }, _) => e,
        (_, ErrorKind::Divergence) => {
            eprintln!("warning: {e}");
            Error::Divergence { epoch, loss: f64::NAN }
        }
        _ => e,
    }
}

fn check_channels<T: Scalar>(model: &AnyModel<T>, data: &Dataset<T>) -> Result<()> {
    let arch = model.architecture();
    let (cin, cout) = (arch.in_channels(), arch.out_channels());
    if cin != data.model_in_channels() || cout != data.model_out_channels() {
        return Err(Error::Config(format!(
            "model maps {cin} -> {cout} channels but the data supplies {} -> {}",
            data.model_in_channels(),
            data.model_out_channels()
        )));
    }
    Ok(())
}

fn append_metrics(path: &Path, r: &EpochRecord) -> Result<()> {
    let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str(METRICS_HEADER);
        text.push('\n');
    }
    text.push_str(&format!(
        "{},{},{},{},{:.3}\n",
        r.epoch, r.lr, r.train_rel_l2, r.test_rel_l2, r.wall_seconds
    ));
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Batch loss in physical units; parameter gradients are accumulated into
/// the model. `inputs` are encoded, `targets` physical.
pub fn loss_and_backward<T: Scalar>(
    model: &mut AnyModel<T>,
    data: &Dataset<T>,
    inputs: &Tensor<T>,
    targets: &Tensor<T>,
) -> Result<f64> {
    match data.windowing() {
        None => {
            let norm = data.output_norm();
            let (out, cache) = model.forward_cached(inputs)?;
            let (loss, g) = relative_l2_with_grad(&norm.decode(&out)?, targets)?;
            model.backward(&cache, &norm.decode_grad(&g)?)?;
            Ok(loss)
        }
        Some(w) => rollout_backward(model, data.output_norm(), w, inputs, targets),
    }
}

/// Loss averaged over the horizon, differentiated through every step.
fn rollout_backward<T: Scalar>(
    model: &mut AnyModel<T>,
    norm: &Normalizer,
    w: Windowing,
    inputs: &Tensor<T>,
    targets: &Tensor<T>,
) -> Result<f64> {
    let ct = norm.channels();
    let scale = T::of(1.0 / w.horizon as f64);
    let mut x = inputs.clone();
    let mut caches = Vec::with_capacity(w.horizon);
    let mut grads = Vec::with_capacity(w.horizon);
    let mut loss = 0.0;
    for t in 0..w.horizon {
        let (out, cache) = model.forward_cached(&x)?;
        let (l, g) = relative_l2_with_grad(&norm.decode(&out)?, &frame(targets, t, ct, w.horizon)?)?;
        loss += l / w.horizon as f64;
        grads.push(norm.decode_grad(&g)?.map(|v| v * scale));
        caches.push(cache);
        x = shift_window(&x, &out, ct, w.history)?;
    }
    // `carry` is the gradient with respect to the window fed to step t + 1.
    let mut carry: Option<Tensor<T>> = None;
    for (t, (cache, mut g_out)) in caches.iter().zip(grads).enumerate().rev() {
        let mut from_window = None;
        if let Some(c) = &carry {
            let (gx, gy) = shift_window_adjoint(c, ct, w.history)?;
            g_out.add_assign(&gy)?;
            from_window = Some(gx);
        }
        let dx = model.backward(cache, &g_out)?;
        if t > 0 {
            carry = Some(match from_window {
                Some(gx) => dx.add(&gx)?,
                None => dx,
            });
        }
    }
    Ok(loss)
}

/// Mean relative L2 error of a split in physical units: single-step for
/// static data, full-horizon rollout for trajectories. An empty split
/// gives NaN.
pub fn evaluate<T: Scalar>(model: &AnyModel<T>, data: &Dataset<T>, split: SplitKind, batch: usize) -> Result<f64> {
    let s = data.split(split);
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    if let Some(w) = data.windowing() {
        return Ok(rollout_eval(model, data, split, w.horizon, batch)?.rel_l2);
    }
    let idx: Vec<usize> = (0..s.len()).collect();
    let mut errors = Vec::with_capacity(s.len());
    for part in idx.chunks(batch.max(1)) {
        let b = s.gather(part)?;
        let pred = data.output_norm().decode(&model.forward(&data.encode_inputs(&b.inputs)?)?)?;
        errors.extend(relative_l2_per_sample(&pred, &b.targets)?.into_iter().flatten());
    }
    if errors.is_empty() {
        return Err(Error::Data("every target in the split has zero norm".into()));
    }
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

/// Physical-unit predictions for the selected samples of a split.
pub fn predict<T: Scalar>(
    model: &AnyModel<T>,
    data: &Dataset<T>,
    split: SplitKind,
    indices: &[usize],
) -> Result<Tensor<T>> {
    let b = data.split(split).gather(indices)?;
    match data.windowing() {
        Some(w) => Ok(super::rollout::rollout_with(data, &b.inputs, &b.targets, w.horizon, |_, x| model.forward(x))?
            .prediction),
        None => data.output_norm().decode(&model.forward(&data.encode_inputs(&b.inputs)?)?),
    }
}
