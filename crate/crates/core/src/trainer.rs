//! Expert demonstrations and supervised training of the ReLU controller.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controllers::{expert_control, ExpertConfig, LeftTurnPath, ReferencePath};
use crate::dynamics::{closed_form_unicycle, ControlInput, Pose, OMEGA_MAX, V_MAX};
use crate::error::{Error, Result};
use crate::network::{Activation, Layer, NetworkSpec};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub pose: Pose,
    pub control: ControlInput,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Demonstration {
    pub id: usize,
    pub samples: Vec<Sample>,
}

/// Offsets added to the nominal start pose, drawn uniformly per trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JitterBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl JitterBox {
    pub const ZERO: JitterBox = JitterBox {
        lo: [0.0; 3],
        hi: [0.0; 3],
    };
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub n_traj: usize,
    pub start: Pose,
    pub jitter: JitterBox,
    /// Jittered starts farther than this from the path are redrawn.
    pub max_path_offset: f64,
    pub rate_hz: f64,
    /// Per-trajectory time limit, seconds.
    pub timeout: f64,
    pub path: LeftTurnPath,
    pub expert: ExpertConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_traj: 100,
            start: Pose::new(0.5, 1.0, 0.0),
            jitter: JitterBox {
                lo: [-0.2, -0.5, -1.6],
                hi: [3.8, 2.5, 1.6],
            },
            max_path_offset: 0.8,
            rate_hz: 20.0,
            timeout: 60.0,
            path: LeftTurnPath::default(),
            expert: ExpertConfig::default(),
        }
    }
}

/// Simulates the expert from jittered starts. Trajectories that miss the
/// goal zone within the timeout are dropped with a warning.
pub fn generate_dataset(cfg: &DatasetConfig, seed: u64) -> Result<Vec<Demonstration>> {
    if cfg.n_traj == 0 {
        return Err(Error::Config("n_traj must be at least 1".into()));
    }
    let path = ReferencePath::left_turn(&cfg.path)?;
    let dt = 1.0 / cfg.rate_hz;
    let mut out = Vec::with_capacity(cfg.n_traj);
    for id in 0..cfg.n_traj {
        // one stream per trajectory so ids stay stable if counts change
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id as u64);
        let mut pose = cfg.start;
        for _ in 0..1000 {
            let mut off = [0.0; 3];
            for k in 0..3 {
                let (lo, hi) = (cfg.jitter.lo[k], cfg.jitter.hi[k]);
                if hi > lo {
                    off[k] = rng.gen_range(lo..=hi);
                }
            }
            pose = Pose::new(cfg.start.x + off[0], cfg.start.y + off[1], cfg.start.theta + off[2]);
            if path.nearest(pose.x, pose.y).1 <= cfg.max_path_offset {
                break;
            }
        }
        let mut samples = Vec::new();
        let mut reached = false;
        for step in 0..=(cfg.timeout * cfg.rate_hz).round() as usize {
            if cfg.expert.goal.contains(&pose) {
                reached = true;
                break;
            }
            let control = expert_control(&pose, &path, &cfg.expert);
            samples.push(Sample {
                t: step as f64 * dt,
                pose,
                control,
            });
            pose = closed_form_unicycle(pose, control, dt).wrapped();
        }
        if reached {
            out.push(Demonstration { id, samples });
        } else {
            log::warn!("demonstration {id} did not reach the goal zone; discarded");
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

const DATASET_HEADER: &str = "traj_id,t,x,y,theta,v,omega";

pub fn dataset_to_csv(data: &[Demonstration]) -> String {
    let mut s = String::from(DATASET_HEADER);
    s.push('\n');
    for d in data {
        for p in &d.samples {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                d.id, p.t, p.pose.x, p.pose.y, p.pose.theta, p.control.v, p.control.omega
            );
        }
    }
    s
}

pub fn dataset_from_csv(text: &str) -> Result<Vec<Demonstration>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(DATASET_HEADER) {
        return Err(Error::parse("dataset", "missing header"));
    }
    let mut out: Vec<Demonstration> = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::parse("dataset", format!("row {} has {} fields", n + 2, f.len())));
        }
        let id: usize = f[0]
            .trim()
            .parse()
            .map_err(|e| Error::parse("dataset", format!("row {}: {e}", n + 2)))?;
        let mut v = [0.0; 6];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = f[k + 1]
                .trim()
                .parse()
                .map_err(|e| Error::parse("dataset", format!("row {}: {e}", n + 2)))?;
        }
        let sample = Sample {
            t: v[0],
            pose: Pose::new(v[1], v[2], v[3]),
            control: ControlInput::new(v[4], v[5]),
        };
        match out.last_mut() {
            Some(d) if d.id == id => d.samples.push(sample),
            _ => out.push(Demonstration {
                id,
                samples: vec![sample],
            }),
        }
    }
    Ok(out)
}

pub fn write_dataset(path: impl AsRef<Path>, data: &[Demonstration]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dataset_to_csv(data)).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub momentum: f64,
    pub decay_every: usize,
    pub decay_factor: f64,
    /// Epochs over which the step size ramps up linearly.
    pub warmup_epochs: usize,
    pub hidden: Vec<usize>,
    pub heldout_fraction: f64,
    /// Mini-batch gradients longer than this are rescaled to it.
    pub max_grad_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 4e-2,
            batch_size: 64,
            momentum: 0.9,
            decay_every: 20,
            decay_factor: 0.5,
            warmup_epochs: 5,
            hidden: vec![64, 64],
            heldout_fraction: 0.1,
            max_grad_norm: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub heldout_loss: f64,
    pub learning_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_heldout: f64,
    pub train_samples: usize,
    pub heldout_samples: usize,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,heldout_loss,learning_rate\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{},{},{}", e.epoch, e.train_loss, e.heldout_loss, e.learning_rate);
        }
        s
    }
}

/// One `(state, label)` training pair.
pub type Example = ([f64; 3], [f64; 2]);

fn examples(data: &[&Demonstration]) -> Vec<Example> {
    data.iter()
        .flat_map(|d| d.samples.iter())
        .map(|s| (s.pose.as_array(), [s.control.v, s.control.omega]))
        .collect()
}

/// Fan-in scaled uniform initialization `U(-√(6/n), √(6/n))`, zero biases.
pub fn init_network(dims: &[usize], rng: &mut impl Rng) -> Result<NetworkSpec> {
    if dims.len() < 2 {
        return Err(Error::InvalidNetwork("need input and output sizes".into()));
    }
    let mut layers = Vec::new();
    for (k, w) in dims.windows(2).enumerate() {
        let (cols, rows) = (w[0], w[1]);
        let bound = (6.0 / cols as f64).sqrt();
        let weights = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
        let act = if k + 2 == dims.len() {
            Activation::Identity
        } else {
            Activation::Relu
        };
        layers.push(Layer::new(rows, cols, weights, vec![0.0; rows], act)?);
    }
    NetworkSpec::new(layers)
}

/// Mean of `‖net(x) − y‖²` over `batch`.
pub fn mse(net: &NetworkSpec, batch: &[Example]) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let total: f64 = batch
        .iter()
        .map(|(x, y)| {
            let out = net.eval(x).expect("dimensions checked");
            out.iter().zip(y).map(|(o, t)| (o - t) * (o - t)).sum::<f64>()
        })
        .sum();
    total / batch.len() as f64
}

/// Gradients laid out like the layers: per layer, weights then bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.bias)
            .flatten()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    fn clip_norm(&mut self, max: f64) {
        let n = self.norm();
        if n > max && n.is_finite() {
            let k = max / n;
            for g in self.weights.iter_mut().chain(self.bias.iter_mut()).flatten() {
                *g *= k;
            }
        }
    }

    fn zeros(net: &NetworkSpec) -> Self {
        Gradient {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }
}

/// Loss and its exact gradient by backpropagation.
pub fn loss_and_gradient(net: &NetworkSpec, batch: &[Example]) -> (f64, Gradient) {
    let mut grad = Gradient::zeros(net);
    let mut loss = 0.0;
    let scale = 1.0 / batch.len().max(1) as f64;
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(net.layers.len() + 1);
    for (x, y) in batch {
        acts.clear();
        acts.push(x.to_vec());
        for layer in &net.layers {
            let mut z = layer.affine(acts.last().expect("input pushed"));
            for v in &mut z {
                *v = layer.activation.apply(*v);
            }
            acts.push(z);
        }
        let out = acts.last().expect("output");
        let mut delta: Vec<f64> = out.iter().zip(y).map(|(o, t)| 2.0 * (o - t) * scale).collect();
        loss += out.iter().zip(y).map(|(o, t)| (o - t) * (o - t)).sum::<f64>() * scale;
        for (k, layer) in net.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Relu {
                for (d, a) in delta.iter_mut().zip(&acts[k + 1]) {
                    if *a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input = &acts[k];
            let gw = &mut grad.weights[k];
            for (j, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                grad.bias[k][j] += d;
                for (i, a) in input.iter().enumerate() {
                    gw[j * layer.cols + i] += d * a;
                }
            }
            if k > 0 {
                let mut next = vec![0.0; layer.cols];
                for (j, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    for (i, w) in layer.row(j).iter().enumerate() {
                        next[i] += w * d;
                    }
                }
                delta = next;
            }
        }
    }
    (loss, grad)
}

/// Largest relative disagreement between backpropagated and central
/// finite-difference gradients over 100 randomly chosen parameters.
pub fn gradient_check(net: &NetworkSpec, batch: &[Example], seed: u64) -> f64 {
    const EPS: f64 = 1e-5;
    let (_, grad) = loss_and_gradient(net, batch);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = net.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.gen_range(0..net.layers.len());
        let layer = &net.layers[k];
        let n = layer.weights.len() + layer.bias.len();
        let p = rng.gen_range(0..n);
        let (analytic, orig) = if p < layer.weights.len() {
            (grad.weights[k][p], layer.weights[p])
        } else {
            (grad.bias[k][p - layer.weights.len()], layer.bias[p - layer.weights.len()])
        };
        let set = |w: &mut NetworkSpec, v: f64| {
            let l = &mut w.layers[k];
            if p < l.weights.len() {
                l.weights[p] = v;
            } else {
                let i = p - l.weights.len();
                l.bias[i] = v;
            }
        };
        set(&mut work, orig + EPS);
        let up = mse(&work, batch);
        set(&mut work, orig - EPS);
        let down = mse(&work, batch);
        set(&mut work, orig);
        let numeric = (up - down) / (2.0 * EPS);
        let denom = (analytic.abs() + numeric.abs()).max(1e-8);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    worst
}

fn check_labels(data: &[Demonstration]) -> Result<()> {
    for d in data {
        for s in &d.samples {
            let c = s.control;
            if !(c.v.abs() <= V_MAX && c.omega.abs() <= OMEGA_MAX) {
                return Err(Error::LabelOutOfCaps { v: c.v, omega: c.omega });
            }
        }
    }
    Ok(())
}

/// Mini-batch gradient descent with momentum. Trajectories are split
/// 90/10 into training and held-out sets; the weights with the lowest
/// held-out loss are returned. With a single trajectory the training set
/// doubles as the held-out set.
pub fn train(data: &[Demonstration], cfg: &TrainConfig, seed: u64) -> Result<(NetworkSpec, TrainReport)> {
    if data.iter().all(|d| d.samples.is_empty()) {
        return Err(Error::EmptyDataset);
    }
    check_labels(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<&Demonstration> = data.iter().collect();
    order.shuffle(&mut rng);
    let n_held = if order.len() >= 2 {
        ((order.len() as f64 * cfg.heldout_fraction).round() as usize).clamp(1, order.len() - 1)
    } else {
        0
    };
    let (held, rest) = order.split_at(n_held);
    let mut train_set = examples(rest);
    let held_set = if held.is_empty() { train_set.clone() } else { examples(held) };

    let mut dims = vec![3];
    dims.extend(&cfg.hidden);
    dims.push(2);
    let mut net = init_network(&dims, &mut rng)?;
    let mut velocity = Gradient::zeros(&net);
    let mut best = (net.clone(), f64::INFINITY, 0);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let batch = cfg.batch_size.max(1);

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate * cfg.decay_factor.powi((epoch / cfg.decay_every.max(1)) as i32);
        train_set.shuffle(&mut rng);
        let n_batches = train_set.len().div_ceil(batch);
        for (b, chunk) in train_set.chunks(batch).enumerate() {
            let lr = if epoch < cfg.warmup_epochs {
                lr * ((epoch * n_batches + b + 1) as f64 / (cfg.warmup_epochs * n_batches) as f64)
            } else {
                lr
            };
            let (loss, mut g) = loss_and_gradient(&net, chunk);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            if let Some(max) = cfg.max_grad_norm {
                g.clip_norm(max);
            }
            for (k, layer) in net.layers.iter_mut().enumerate() {
                for (i, w) in layer.weights.iter_mut().enumerate() {
                    let v = &mut velocity.weights[k][i];
                    *v = cfg.momentum * *v - lr * g.weights[k][i];
                    *w += *v;
                }
                for (i, b) in layer.bias.iter_mut().enumerate() {
                    let v = &mut velocity.bias[k][i];
                    *v = cfg.momentum * *v - lr * g.bias[k][i];
                    *b += *v;
                }
            }
        }
        let train_loss = mse(&net, &train_set);
        let heldout_loss = mse(&net, &held_set);
        if !train_loss.is_finite() || !heldout_loss.is_finite() {
            return Err(Error::Divergence { epoch, loss: train_loss });
        }
        log::debug!("epoch {epoch}: train {train_loss:.3e} held-out {heldout_loss:.3e}");
        epochs.push(EpochStats {
            epoch,
            train_loss,
            heldout_loss,
            learning_rate: lr,
        });
        if heldout_loss < best.1 {
            best = (net.clone(), heldout_loss, epoch);
        }
    }
    let report = TrainReport {
        epochs,
        best_epoch: best.2,
        best_heldout: best.1,
        train_samples: train_set.len(),
        heldout_samples: held_set.len(),
    };
    Ok((best.0, report))
}
