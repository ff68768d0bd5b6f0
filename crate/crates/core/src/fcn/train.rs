use std::path::Path as FsPath;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{Gradients, NetworkModel};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::exec::{derive_seed, Execution};
use crate::grid::{FloatGrid, GridSpec};
use crate::raster::{encode_input_raster, RasterStyle};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Loss weight for label pixels above 0.5.
    pub positive_weight: f64,
    /// Train each sample under a random flip or quarter turn about the
    /// robot pixel, drawn afresh every epoch.
    #[serde(default)]
    pub augment: bool,
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 1e-3,
            batch_size: 8,
            seed: 0,
            optimizer: Optimizer::Adam,
            positive_weight: 1.0,
            augment: false,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_mse: f64,
    pub validation_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingReport {
    pub epochs: Vec<EpochStats>,
}

impl TrainingReport {
    pub fn final_train_mse(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_mse)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,validation_mse\n");
        for e in &self.epochs {
            let v = e.validation_mse.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_mse, v));
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// An (input raster, path label) training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Tensor,
    pub label: Tensor,
}

impl Sample {
    pub fn from_grids(input: &FloatGrid, label: &FloatGrid) -> Self {
        Sample {
            input: Tensor::from_grid(input),
            label: Tensor::from_grid(label),
        }
    }
}

struct Adam {
    m: Gradients,
    v: Gradients,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn apply_update(model: &mut NetworkModel, grads: &Gradients, lr: f64, adam: Option<&mut Adam>) {
    match adam {
        None => {
            for (p, g) in model.params_mut().iter_mut().zip(&grads.layers) {
                p.iter_mut().zip(g.iter()).for_each(|(w, g)| *w -= lr * g);
            }
        }
        Some(state) => {
            state.t += 1;
            let c1 = 1.0 - BETA1.powi(state.t);
            let c2 = 1.0 - BETA2.powi(state.t);
            for (i, p) in model.params_mut().iter_mut().enumerate() {
                let g = &grads.layers[i];
                let (m, v) = (&mut state.m.layers[i], &mut state.v.layers[i]);
                for (((w, g), m), v) in p
                    .iter_mut()
                    .zip(g.iter())
                    .zip(m.iter_mut())
                    .zip(v.iter_mut())
                {
                    *m = BETA1 * *m + (1.0 - BETA1) * g;
                    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                    *w -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Mini-batch training. Per-sample gradients of a batch may be computed in
/// parallel; they are summed in sample order. The epoch's train MSE is the
/// mean loss of its samples, each measured before that batch's update.
pub fn train(
    model: &mut NetworkModel,
    dataset: &[Sample],
    validation: &[Sample],
    config: &TrainConfig,
) -> Result<TrainingReport> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if config.batch_size == 0 || !(config.learning_rate >= 0.0) || !(config.positive_weight > 0.0) {
        return Err(Error::InvalidArgument(
            "batch size must be positive, learning rate non-negative, positive weight positive"
                .into(),
        ));
    }
    let mut adam = (config.optimizer == Optimizer::Adam).then(|| Adam {
        m: Gradients::zeros_like(model),
        v: Gradients::zeros_like(model),
        t: 0,
    });
    let mut report = TrainingReport::default();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[epoch as u64]));
        order.shuffle(&mut rng);
        let symmetry: Vec<u8> = (0..dataset.len())
            .map(|_| if config.augment { rng.gen_range(0..8) } else { 0 })
            .collect();
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let snapshot = &*model;
            let first = b * config.batch_size;
            let results = config.execution.map(batch, |j, &i| {
                let sample = &dataset[i];
                match symmetry[first + j] {
                    0 => snapshot.loss_and_gradient_weighted(
                        &sample.input,
                        &sample.label,
                        config.positive_weight,
                    ),
                    k => snapshot.loss_and_gradient_weighted(
                        &sample.input.dihedral(k),
                        &sample.label.dihedral(k),
                        config.positive_weight,
                    ),
                }
            });
            let mut total = Gradients::zeros_like(model);
            for r in results {
                let (loss, g) = r?;
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch, loss });
                }
                loss_sum += loss;
                total.add_assign(&g);
            }
            total.scale(1.0 / batch.len() as f64);
            apply_update(model, &total, config.learning_rate, adam.as_mut());
        }
        let train_mse = loss_sum / dataset.len() as f64;
        let validation_mse = if validation.is_empty() {
            None
        } else {
            let losses = config
                .execution
                .map(validation, |_, s| model.loss(&s.input, &s.label));
            let mut sum = 0.0;
            for l in losses {
                sum += l?;
            }
            Some(sum / validation.len() as f64)
        };
        log::debug!("epoch {epoch}: train {train_mse:.6} validation {validation_mse:?}");
        report.epochs.push(EpochStats {
            epoch,
            train_mse,
            validation_mse,
        });
    }
    Ok(report)
}

/// Encodes the scenario on `spec`, runs the network and returns the path
/// intensity grid in the same frame.
pub fn predict(
    model: &NetworkModel,
    scenario: &Scenario,
    spec: &GridSpec,
    style: &RasterStyle,
) -> Result<FloatGrid> {
    let input = encode_input_raster(scenario, spec, style)?;
    model.forward(&Tensor::from_grid(&input))?.to_grid(*spec)
}

#[cfg(test)]
mod tests {
    use super::super::network::build_reference_network;
    use super::*;
    use crate::geometry::Pose2D;
    use crate::path::Path;
    use crate::raster::rasterize_world_path;

    fn toy_sample(spec: &GridSpec, goal_y: f64) -> Sample {
        let s = Scenario::new(Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(3.0, goal_y, 0.0));
        let input = encode_input_raster(&s, spec, &RasterStyle::default()).unwrap();
        let path = Path::new(vec![s.start(), s.goal_point()]).unwrap();
        let label = rasterize_world_path(&path, &s, spec).unwrap();
        Sample::from_grids(&input, &label)
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let spec = GridSpec::window(16).unwrap();
        let data = vec![toy_sample(&spec, 0.0), toy_sample(&spec, 1.0)];
        let mut m = build_reference_network(16).unwrap().initialized(1);
        let before = m.clone();
        let cfg = TrainConfig {
            epochs: 3,
            learning_rate: 0.0,
            batch_size: 1,
            ..TrainConfig::default()
        };
        let r = train(&mut m, &data, &data, &cfg).unwrap();
        assert_eq!(m, before);
        let first = r.epochs[0].train_mse;
        assert!(r.epochs.iter().all(|e| e.train_mse == first));
        assert!(r.epochs.iter().all(|e| e.validation_mse == Some(first)));
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let spec = GridSpec::window(16).unwrap();
        let data = vec![toy_sample(&spec, 0.0), toy_sample(&spec, 2.0)];
        let cfg = TrainConfig {
            epochs: 60,
            learning_rate: 3e-3,
            batch_size: 2,
            ..TrainConfig::default()
        };
        let run = |exec| {
            let mut m = build_reference_network(16).unwrap().initialized(2);
            let r = train(
                &mut m,
                &data,
                &[],
                &TrainConfig {
                    execution: exec,
                    ..cfg.clone()
                },
            )
            .unwrap();
            (m, r)
        };
        let (m1, r1) = run(Execution::Sequential);
        let (m2, r2) = run(Execution::Parallel);
        assert_eq!(m1.to_bytes(), m2.to_bytes());
        assert_eq!(r1, r2);
        assert!(r1.final_train_mse().unwrap() < r1.epochs[0].train_mse * 0.5);
    }

    #[test]
    fn sgd_also_descends() {
        let spec = GridSpec::window(16).unwrap();
        let data = vec![toy_sample(&spec, 0.0)];
        let mut m = build_reference_network(16).unwrap().initialized(3);
        let cfg = TrainConfig {
            epochs: 20,
            learning_rate: 0.5,
            batch_size: 1,
            optimizer: Optimizer::Sgd,
            ..TrainConfig::default()
        };
        let r = train(&mut m, &data, &[], &cfg).unwrap();
        assert!(r.final_train_mse().unwrap() < r.epochs[0].train_mse);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let mut m = build_reference_network(16).unwrap();
        assert!(train(&mut m, &[], &[], &TrainConfig::default()).is_err());
    }

    #[test]
    fn prediction_shares_the_input_frame() {
        let spec = GridSpec::window(16).unwrap();
        let m = build_reference_network(16).unwrap();
        let s = Scenario::new(Pose2D::new(1.0, 2.0, 0.3), Pose2D::new(3.0, 2.0, 0.0));
        let g = predict(&m, &s, &spec, &RasterStyle::default()).unwrap();
        assert_eq!(g.spec(), &spec);
        assert!(g.values().iter().all(|&v| v == 0.5));
    }
}
