//! Gradient-based weight change: multitask loss, backpropagation through a
//! genome's enabled DAG, true SGD with early stopping, and the hybrid
//! operator that picks between training and classic perturbation.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::{ActionLabel, ActionSchema};
use crate::dataset::Snapshot;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::network::{Genome, Network, Prediction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub learning_rate: f64,
    pub patience: u32,
    pub max_epochs: u32,
    pub validation_fraction: f64,
    pub min_samples_for_validation: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            learning_rate: 0.1,
            patience: 30,
            max_epochs: 300,
            validation_fraction: 0.2,
            min_samples_for_validation: 25,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.patience < 1 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.max_epochs < 1 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config("validation_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Every `stride`-th snapshot goes to validation.
    fn validation_stride(&self) -> usize {
        ((1.0 / self.validation_fraction).round() as usize).max(2)
    }
}

/// Loss target for one labelled sample, precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub class: usize,
    pub params: Vec<f64>,
}

impl Target {
    pub fn new(label: &ActionLabel, actions: &ActionSchema) -> Result<Target> {
        let class = actions
            .index_of(label.kind())
            .ok_or_else(|| Error::UnknownAction(label.kind().to_string()))?;
        Ok(Target {
            class,
            params: actions.normalize_params(label),
        })
    }
}

/// Cross-entropy of the labelled action plus squared error of its own
/// regression heads.
pub fn loss(pred: &Prediction, label: &ActionLabel, actions: &ActionSchema) -> Result<f64> {
    let t = Target::new(label, actions)?;
    Ok(target_loss(pred, &t))
}

fn target_loss(pred: &Prediction, t: &Target) -> f64 {
    let ce = -pred.action_probs[t.class].max(f64::MIN_POSITIVE).ln();
    let heads = pred.params.get(t.class).map(Vec::as_slice).unwrap_or(&[]);
    let se: f64 = heads.iter().zip(&t.params).map(|(p, y)| (p - y) * (p - y)).sum();
    ce + se
}

/// Per-connection gradients plus the activations and deltas of one
/// forward/backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTape {
    /// Indexed like `genome.connections`; `None` for disabled ones.
    pub grads: Vec<Option<f64>>,
    pub activations: Vec<f64>,
    pub deltas: Vec<f64>,
    pub loss: f64,
}

/// Reusable buffers for repeated passes over one compiled network.
#[derive(Debug, Clone, Default)]
struct Scratch {
    values: Vec<f64>,
    deltas: Vec<f64>,
    grads: Vec<f64>,
    logits: Vec<f64>,
}

/// Forward and backward pass; fills `s.grads` (dense, zero for disabled
/// connections) and returns the loss.
fn backprop(net: &Network, weights: &[f64], x: &[f64], t: &Target, s: &mut Scratch) -> Result<f64> {
    net.forward_into(weights, x, &mut s.values)?;
    let values = &s.values;
    s.deltas.clear();
    s.deltas.resize(values.len(), 0.0);

    // Softmax + cross-entropy: dL/dz_k = p_k - [k = y].
    s.logits.clear();
    s.logits.extend(net.class_heads().iter().map(|&i| values[i]));
    let max = s.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = s.logits.iter().map(|z| (z - max).exp()).sum();
    let mut loss = 0.0;
    for (k, &node) in net.class_heads().iter().enumerate() {
        let p = (s.logits[k] - max).exp() / denom;
        let y = (k == t.class) as u8 as f64;
        if k == t.class {
            loss -= p.max(f64::MIN_POSITIVE).ln();
        }
        s.deltas[node] += p - y;
    }
    // Masked regression: only the labelled action's heads.
    if let Some(heads) = net.reg_heads().get(t.class) {
        for (&node, &y) in heads.iter().zip(&t.params) {
            let a = values[node];
            loss += (a - y) * (a - y);
            s.deltas[node] += 2.0 * (a - y) * (1.0 - a * a);
        }
    }

    s.grads.clear();
    s.grads.resize(weights.len(), 0.0);
    for &node in net.order().iter().rev() {
        let mut d = s.deltas[node];
        if net.is_hidden(node) {
            // Deltas of hidden nodes were accumulated as dL/da.
            let a = values[node];
            d *= 1.0 - a * a;
            s.deltas[node] = d;
        }
        if d == 0.0 {
            continue;
        }
        for &(src, ci) in net.incoming(node) {
            s.grads[ci] += values[src] * d;
            s.deltas[src] += weights[ci] * d;
        }
    }
    Ok(loss)
}

/// Exact gradient of the loss for one sample with respect to every enabled
/// connection weight.
pub fn backward(genome: &Genome, x: &FeatureVector, label: &ActionLabel, actions: &ActionSchema) -> Result<GradientTape> {
    let net = Network::compile(genome)?;
    let t = Target::new(label, actions)?;
    let weights = genome.weights();
    let mut s = Scratch::default();
    let loss = backprop(&net, &weights, x.as_slice(), &t, &mut s)?;
    let grads = genome
        .connections
        .iter()
        .zip(&s.grads)
        .map(|(c, &g)| c.enabled.then_some(g))
        .collect();
    Ok(GradientTape {
        grads,
        activations: s.values,
        deltas: s.deltas,
        loss,
    })
}

/// `w ← w − α·g` for every connection that has a gradient.
pub fn sgd_step(genome: &mut Genome, tape: &GradientTape, alpha: f64) {
    for (c, g) in genome.connections.iter_mut().zip(&tape.grads) {
        if let Some(g) = g {
            c.weight -= alpha * g;
        }
    }
}

/// Early-stopping bookkeeping. Epoch 0 is the untrained model.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: u32,
    best: f64,
    best_epoch: u32,
    since_best: u32,
}

impl EarlyStopping {
    pub fn new(patience: u32, initial_loss: f64) -> Self {
        EarlyStopping {
            patience,
            best: initial_loss,
            best_epoch: 0,
            since_best: 0,
        }
    }

    /// Records the monitored loss after `epoch`. Returns true if it is a new
    /// minimum.
    pub fn observe(&mut self, epoch: u32, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.since_best = 0;
            true
        } else {
            self.since_best += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.since_best >= self.patience
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> u32 {
        self.best_epoch
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub weights: Vec<f64>,
    pub best_epoch: u32,
    pub epochs_run: u32,
    /// Monitored loss per epoch, starting with epoch 0.
    pub losses: Vec<f64>,
}

/// Generic epoch loop with early stopping and best-weight restoration.
/// `epoch` performs one epoch of updates; `monitor` scores a weight vector.
pub fn fit<E, M>(mut weights: Vec<f64>, patience: u32, max_epochs: u32, mut epoch: E, mut monitor: M) -> Result<FitResult>
where
    E: FnMut(&mut Vec<f64>, u32) -> Result<()>,
    M: FnMut(&[f64]) -> Result<f64>,
{
    let initial = monitor(&weights)?;
    let mut stop = EarlyStopping::new(patience, initial);
    let mut best = weights.clone();
    let mut losses = vec![initial];
    let mut epochs_run = 0;
    for e in 1..=max_epochs {
        epoch(&mut weights, e)?;
        let l = monitor(&weights)?;
        losses.push(l);
        epochs_run = e;
        if stop.observe(e, l) {
            best.clone_from(&weights);
        }
        if stop.should_stop() {
            break;
        }
    }
    Ok(FitResult {
        weights: best,
        best_epoch: stop.best_epoch(),
        epochs_run,
        losses,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub used_validation: bool,
    pub best_epoch: u32,
    pub epochs_run: u32,
    pub losses: Vec<f64>,
}

/// True SGD over `snapshots` with early stopping. Only weights change.
pub fn train<R: Rng>(
    genome: &Genome,
    snapshots: &[Snapshot],
    actions: &ActionSchema,
    config: &LossConfig,
    rng: &mut R,
) -> Result<(Genome, TrainReport)> {
    if snapshots.is_empty() {
        return Err(Error::EmptySnapshots);
    }
    let net = Network::compile(genome)?;
    let samples: Vec<(&[f64], Target)> = snapshots
        .iter()
        .map(|s| Ok((s.features.as_slice(), Target::new(&s.label, actions)?)))
        .collect::<Result<_>>()?;

    let used_validation = samples.len() >= config.min_samples_for_validation;
    let stride = config.validation_stride();
    let (train_idx, monitor_idx): (Vec<usize>, Vec<usize>) = if used_validation {
        (0..samples.len()).partition(|i| i % stride != stride - 1)
    } else {
        ((0..samples.len()).collect(), (0..samples.len()).collect())
    };

    let enabled: Vec<bool> = genome.connections.iter().map(|c| c.enabled).collect();
    let alpha = config.learning_rate;
    let mut s = Scratch::default();
    let mut s2 = Scratch::default();
    let mut order = train_idx.clone();

    let result = fit(
        genome.weights(),
        config.patience,
        config.max_epochs,
        |w, _| {
            order.shuffle(rng);
            for &i in &order {
                let (x, t) = &samples[i];
                backprop(&net, w, x, t, &mut s)?;
                for (ci, g) in s.grads.iter().enumerate() {
                    if enabled[ci] {
                        w[ci] -= alpha * g;
                    }
                }
            }
            Ok(())
        },
        |w| {
            let mut total = 0.0;
            for &i in &monitor_idx {
                let (x, t) = &samples[i];
                total += backprop(&net, w, x, t, &mut s2)?;
            }
            Ok(total / monitor_idx.len() as f64)
        },
    )?;

    let mut out = genome.clone();
    out.set_weights(&result.weights);
    Ok((
        out,
        TrainReport {
            used_validation,
            best_epoch: result.best_epoch,
            epochs_run: result.epochs_run,
            losses: result.losses,
        },
    ))
}

/// Mean loss of `genome` over `snapshots`.
pub fn mean_loss(genome: &Genome, snapshots: &[Snapshot], actions: &ActionSchema) -> Result<f64> {
    let net = Network::compile(genome)?;
    let w = genome.weights();
    let mut s = Scratch::default();
    let mut total = 0.0;
    for snap in snapshots {
        let t = Target::new(&snap.label, actions)?;
        total += backprop(&net, &w, snap.features.as_slice(), &t, &mut s)?;
    }
    Ok(total / snapshots.len().max(1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    pub perturb: f64,
    pub replace: f64,
    pub power: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            perturb: 0.8,
            replace: 0.1,
            power: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightChange {
    Sgd,
    Perturbation,
    /// Gradient descent was drawn but no session covers the target.
    Fallback,
}

/// With probability `p` trains on `snapshots` (the sessions that covered the
/// current target); otherwise, or when there are none, perturbs weights.
pub fn hybrid_weight_change<R: Rng>(
    genome: &Genome,
    snapshots: &[Snapshot],
    p: f64,
    actions: &ActionSchema,
    loss: &LossConfig,
    perturb: &PerturbConfig,
    rng: &mut R,
) -> Result<(Genome, WeightChange)> {
    let u: f64 = rng.gen();
    if u < p {
        if !snapshots.is_empty() {
            let (g, _) = train(genome, snapshots, actions, loss, rng)?;
            return Ok((g, WeightChange::Sgd));
        }
        log::debug!("gradient descent drawn but no session covers the target; perturbing");
    }
    let mut g = genome.clone();
    g.perturb_weights(rng, perturb.perturb, perturb.replace, perturb.power);
    let kind = if u < p { WeightChange::Fallback } else { WeightChange::Perturbation };
    Ok((g, kind))
}
