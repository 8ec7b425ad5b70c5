use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::metrics::roc;
use crate::rng::{self, derive_seed, tag};

use super::adam::Adam;
use super::layers::Layer;
use super::loss::{bce_with_logits, mse_loss, Loss};
use super::network::{Gradients, Network};
use super::tensor::{Real, Tensor};

/// What a training sample should produce.
#[derive(Clone, Debug, PartialEq)]
pub enum Target<T> {
    Image(Tensor<T>),
    Label(f64),
}

/// A source of training pairs. `epoch` lets sources regenerate measurement
/// noise every pass; validation sets are always read with `epoch = 0`.
pub trait TrainData<T>: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sample(&self, index: usize, epoch: usize) -> Result<(Tensor<T>, Target<T>)>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub loss: Loss,
    pub seed: u64,
    /// Pass the epoch number to the training source so it can draw fresh
    /// noise; otherwise every epoch sees epoch 0.
    pub on_the_fly_noise: bool,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(invalid(format!("learning rate must be non-negative, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// Validation AUC of the logits, for cross-entropy training.
    pub val_auc: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    /// Snapshot with the best validation result (the last epoch when there
    /// is no validation set).
    pub network: Network<T>,
    pub optimizer: Adam,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

/// Layers whose output the loss sees: cross-entropy is taken on the logit
/// before a trailing sigmoid.
fn loss_depth<T: Real>(net: &Network<T>, loss: Loss) -> Result<usize> {
    match loss {
        Loss::Mse => Ok(net.layers.len()),
        Loss::Bce => match net.layers.last() {
            Some(Layer::Sigmoid) => Ok(net.layers.len() - 1),
            _ => Err(invalid("cross-entropy training needs a network ending in a sigmoid")),
        },
    }
}

fn sample_loss<T: Real>(loss: Loss, out: &Tensor<T>, target: &Target<T>) -> Result<(f64, Tensor<T>)> {
    match (loss, target) {
        (Loss::Mse, Target::Image(t)) => mse_loss(out, t),
        (Loss::Bce, Target::Label(y)) => {
            if out.len() != 1 {
                return Err(invalid(format!("cross-entropy needs a scalar output, got {}", out.len())));
            }
            let (l, g) = bce_with_logits(out.data[0].as_f64(), *y);
            Ok((l, Tensor::vector(vec![T::of_f64(g)])))
        }
        _ => Err(invalid("target kind does not match the loss")),
    }
}

/// Mean loss over `data` and, for cross-entropy, the AUC of the logits.
fn evaluate<T: Real>(net: &Network<T>, data: &dyn TrainData<T>, loss: Loss, depth: usize) -> Result<(f64, Option<f64>)> {
    let rows = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let (x, target) = data.sample(i, 0)?;
            let out = net.forward_upto(&x, depth)?;
            let (l, _) = sample_loss(loss, &out, &target)?;
            let label = match target {
                Target::Label(y) => Some((y, out.data[0].as_f64())),
                Target::Image(_) => None,
            };
            Ok((l, label))
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = rows.iter().map(|r| r.0).sum::<f64>() / rows.len().max(1) as f64;
    let auc = if loss == Loss::Bce {
        let s0: Vec<f64> = rows.iter().filter_map(|r| r.1).filter(|p| p.0 < 0.5).map(|p| p.1).collect();
        let s1: Vec<f64> = rows.iter().filter_map(|r| r.1).filter(|p| p.0 >= 0.5).map(|p| p.1).collect();
        roc::auc(&s0, &s1).ok()
    } else {
        None
    };
    Ok((mean, auc))
}

/// Mini-batch Adam training with seeded shuffling and best-validation
/// model selection (highest AUC for cross-entropy, lowest loss otherwise).
pub fn train<T: Real>(
    net: Network<T>,
    train_set: &dyn TrainData<T>,
    validation: &dyn TrainData<T>,
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(invalid("training set is empty"));
    }
    let depth = loss_depth(&net, config.loss)?;
    let mut net = net;
    let mut optimizer = Adam::new(&net, config.learning_rate)?;
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(Network<T>, usize, f64, f64)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 0..config.epochs {
        let mut r = rng::rng(derive_seed(config.seed, tag("shuffle"), epoch as u64));
        order.shuffle(&mut r);
        let data_epoch = if config.on_the_fly_noise { epoch } else { 0 };
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let net_ref = &net;
            let per_sample = batch
                .par_iter()
                .map(|&i| {
                    let (x, target) = train_set.sample(i, data_epoch)?;
                    let (out, cache) = net_ref.forward_cached(&x, depth)?;
                    let (l, g) = sample_loss(config.loss, &out, &target)?;
                    Ok((l, net_ref.backward(&cache, &g, false)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let scale = 1.0 / batch.len() as f64;
            let mut grads = Gradients::zeros_like(&net);
            let mut batch_loss = 0.0;
            for (l, g) in &per_sample {
                batch_loss += l;
                grads.accumulate(g, scale);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    loss: batch_loss,
                });
            }
            epoch_loss += batch_loss;
            optimizer.step(&mut net, &grads.params)?;
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let (val_loss, val_auc) = if validation.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate(&net, validation, config.loss, depth)?;
            if !l.is_finite() {
                return Err(Error::Divergence { epoch, loss: l });
            }
            (Some(l), a)
        };
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            val_auc,
        });
        // higher score is better: AUC first, then lower loss
        let score = (val_auc.unwrap_or(0.0), -val_loss.unwrap_or(0.0));
        let improves = match &best {
            None => true,
            Some((_, _, a, l)) => validation.is_empty() || score.0 > *a || (score.0 == *a && score.1 > *l),
        };
        if improves {
            best = Some((net.clone(), epoch, score.0, score.1));
        }
    }

    let (network, best_epoch) = match best {
        Some((n, e, _, _)) => (n, e),
        None => (net, 0),
    };
    Ok(TrainOutcome {
        network,
        optimizer,
        history,
        best_epoch,
    })
}

/// In-memory dataset of fixed pairs.
pub struct VecData<T> {
    pub items: Vec<(Tensor<T>, Target<T>)>,
}

impl<T: Real> TrainData<T> for VecData<T> {
    fn len(&self) -> usize {
        self.items.len()
    }

    fn sample(&self, index: usize, _epoch: usize) -> Result<(Tensor<T>, Target<T>)> {
        Ok(self.items[index].clone())
    }
}
