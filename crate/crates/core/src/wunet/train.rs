use std::fmt::Write as _;
use std::path::Path;

use super::{save_checkpoint, Checkpoint, TrainConfig, WUNet};
use crate::autodiff::{adam_step, AdamState, Graph, Var};
use crate::datasets::read_manifest;
use crate::imaging::read_ppm;
use crate::rng::{derive, CounterRng};
use crate::{Error, Image, Result};

/// A weather-corrupted input and its clear target, both RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Image,
    pub target: Image,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_mse: f64,
    pub test_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub best: Checkpoint,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

/// Reads every `(image, clear_ref)` pair of a manifest.
pub fn load_samples(manifest: &Path) -> Result<Vec<Sample>> {
    let m = read_manifest(manifest)?;
    m.records
        .iter()
        .map(|r| {
            let read = |p: &Path, what: &str| {
                read_ppm(p).map_err(|e| Error::Data(format!("record {}: {what}: {e}", r.id)))
            };
            Ok(Sample {
                input: read(&m.image(r), "image")?,
                target: read(&m.clear_ref(r), "clear reference")?,
            })
        })
        .collect()
}

/// Network-sized planar tiles of every sample, in the model's color space.
fn tensorize(model: &WUNet, samples: &[Sample]) -> Result<Vec<(Vec<f32>, Vec<f32>)>> {
    let mut out = Vec::new();
    for s in samples {
        let inputs = model.tiles(&s.input)?;
        let targets = model.tiles(&s.target)?;
        out.extend(inputs.iter().zip(&targets).map(|(i, t)| (i.to_planar(), t.to_planar())));
    }
    Ok(out)
}

fn mean_mse(model: &WUNet, tiles: &[(Vec<f32>, Vec<f32>)]) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for chunk in tiles.chunks(32) {
        let batch: Vec<f32> = chunk.iter().flat_map(|(x, _)| x.iter().copied()).collect();
        let pred = model.forward_batch(&batch, chunk.len())?;
        for (p, t) in pred.iter().zip(chunk.iter().flat_map(|(_, t)| t.iter())) {
            let d = (*p - *t) as f64;
            sum += d * d;
        }
        count += pred.len();
    }
    Ok(sum / count as f64)
}

/// Minibatch MSE training with Adam, keeping the weights with the lowest
/// test MSE. On return `model` holds those weights.
///
/// With `checkpoint_dir` set, `last.wun`, `best.wun` and `train_log.csv`
/// are written there after every epoch.
pub fn train(model: &mut WUNet, train_set: &[Sample], test_set: &[Sample], tcfg: &TrainConfig) -> Result<TrainOutcome> {
    tcfg.validate()?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::Data("training needs non-empty train and test sets".into()));
    }
    let cfg = model.config().clone();
    let train_tiles = tensorize(model, train_set)?;
    let test_tiles = tensorize(model, test_set)?;
    let (w, h) = cfg.tensor_size();
    let mut adam = AdamState::new(tcfg.lr);
    let mut log = Vec::with_capacity(tcfg.epochs);
    let mut best: Option<(f64, usize, Vec<crate::autodiff::Tensor<f32>>)> = None;
    for epoch in 1..=tcfg.epochs {
        let order = CounterRng::new(derive(tcfg.seed, &format!("epoch{epoch}"))).permutation(train_tiles.len());
        let mut loss_sum = 0.0;
        for (b, idx) in order.chunks(tcfg.batch_size).enumerate() {
            let n = idx.len();
            let mut x = Vec::with_capacity(n * 3 * w * h);
            let mut y = Vec::with_capacity(n * 3 * w * h);
            for &i in idx {
                x.extend_from_slice(&train_tiles[i].0);
                y.extend_from_slice(&train_tiles[i].1);
            }
            let mut g = Graph::new();
            let params: Vec<Var> = model.param_leaves(&mut g);
            let xv = g.input(vec![n, 3, h, w], x, false)?;
            let yv = g.input(vec![n, 3, h, w], y, false)?;
            let pred = WUNet::forward_graph(&cfg, &mut g, &params, xv)?;
            let loss = g.mse_loss(pred, yv)?;
            let value = g.value(loss)[0] as f64;
            if !value.is_finite() {
                return Err(Error::Diverged(format!(
                    "loss {value} at epoch {epoch}, batch {b} (lr {}, batch size {})",
                    tcfg.lr, tcfg.batch_size
                )));
            }
            g.backward(loss)?;
            for (v, p) in params.iter().zip(model.params_mut()) {
                g.accumulate_into(*v, p)?;
            }
            adam_step(model.params_mut(), &mut adam)?;
            loss_sum += value * n as f64;
        }
        let test_mse = mean_mse(model, &test_tiles)?;
        let entry = EpochLog {
            epoch,
            train_mse: loss_sum / train_tiles.len() as f64,
            test_mse,
        };
        log::info!("epoch {epoch}: train {:.6} test {:.6}", entry.train_mse, test_mse);
        log.push(entry);
        let improved = best.as_ref().map_or(true, |(m, _, _)| test_mse < *m);
        if improved {
            best = Some((test_mse, epoch, model.params().to_vec()));
        }
        if let Some(dir) = &tcfg.checkpoint_dir {
            model.test_mse = Some(test_mse);
            save_checkpoint(model, &dir.join("last.wun"))?;
            if improved {
                save_checkpoint(model, &dir.join("best.wun"))?;
            }
            write_train_log(&dir.join("train_log.csv"), &log)?;
        }
    }
    let (best_mse, best_epoch, params) = best.expect("at least one epoch");
    for (dst, mut src) in model.params_mut().iter_mut().zip(params) {
        src.clear_grad();
        *dst = src;
    }
    model.test_mse = Some(best_mse);
    Ok(TrainOutcome {
        best: Checkpoint::from_model(model),
        best_epoch,
        log,
    })
}

pub fn format_train_log(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch,train_mse,test_mse\n");
    for e in log {
        writeln!(out, "{},{},{}", e.epoch, e.train_mse, e.test_mse).expect("write to String");
    }
    out
}

pub fn write_train_log(path: &Path, log: &[EpochLog]) -> Result<()> {
    std::fs::write(path, format_train_log(log)).map_err(|e| Error::io(path, e))
}
