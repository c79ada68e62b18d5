//! Bidirectional LSTM sequence classifier: one LSTM pass per direction,
//! final hidden states concatenated, dropout (training only, inverted
//! scaling), then a fully connected softmax readout.

use super::tensor::Tensor;
use super::{
    check_classes_present, cross_entropy, gradient_descent, softmax, DifferentiableClassifier,
    NeuralError, Probs, TrainConfig, TrainOutcome,
};
use crate::mesh::CLASS_COUNT;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// One sequence: `T` rows of `input_dim` features each.
pub type SeqRows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmConfig {
    pub input_dim: usize,
    pub hidden: usize,
    /// Dropout probability on the concatenated final states, in [0, 1).
    pub dropout: f64,
    pub seed: u64,
}

impl Default for BiLstmConfig {
    fn default() -> Self {
        BiLstmConfig {
            input_dim: 68,
            hidden: 64,
            dropout: 0.5,
            seed: 0,
        }
    }
}

/// Gate parameter block of one direction. Rows are the four gates stacked
/// in the order input, forget, candidate, output (`4H` rows).
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub bias: Tensor,
}

impl LstmCell {
    fn new(input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> LstmCell {
        let g = 4 * hidden;
        let ih = Normal::new(0.0, (1.0 / input_dim as f64).sqrt()).unwrap();
        let hh = Normal::new(0.0, (1.0 / hidden as f64).sqrt()).unwrap();
        let w_ih = Tensor::from_vec(
            &[g, input_dim],
            (0..g * input_dim).map(|_| ih.sample(rng)).collect(),
        );
        let w_hh = Tensor::from_vec(&[g, hidden], (0..g * hidden).map(|_| hh.sample(rng)).collect());
        let mut bias = Tensor::zeros(&[g]);
        // Forget-gate bias starts at 1 so early training passes state along.
        for b in bias.data[hidden..2 * hidden].iter_mut() {
            *b = 1.0;
        }
        LstmCell { w_ih, w_hh, bias }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmModel {
    pub cfg: BiLstmConfig,
    pub forward_cell: LstmCell,
    pub backward_cell: LstmCell,
    pub fc_w: Tensor,
    pub fc_b: Tensor,
    offsets: Vec<usize>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-step saved activations of one direction.
struct StepCache {
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
}

struct DirectionRun {
    caches: Vec<StepCache>,
    final_h: Vec<f64>,
}

impl BiLstmModel {
    pub fn new(cfg: BiLstmConfig) -> Result<BiLstmModel, NeuralError> {
        if cfg.input_dim == 0 || cfg.hidden == 0 {
            return Err(NeuralError::InvalidConfig(
                "input_dim and hidden must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&cfg.dropout) {
            return Err(NeuralError::InvalidConfig(format!(
                "dropout {} outside [0, 1)",
                cfg.dropout
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let forward_cell = LstmCell::new(cfg.input_dim, cfg.hidden, &mut rng);
        let backward_cell = LstmCell::new(cfg.input_dim, cfg.hidden, &mut rng);
        let concat = 2 * cfg.hidden;
        let fc = Normal::new(0.0, (1.0 / concat as f64).sqrt()).unwrap();
        let fc_w = Tensor::from_vec(
            &[CLASS_COUNT, concat],
            (0..CLASS_COUNT * concat).map(|_| fc.sample(&mut rng)).collect(),
        );
        let fc_b = Tensor::zeros(&[CLASS_COUNT]);
        let mut model = BiLstmModel {
            cfg,
            forward_cell,
            backward_cell,
            fc_w,
            fc_b,
            offsets: Vec::new(),
        };
        model.rebuild_offsets();
        Ok(model)
    }

    pub(crate) fn rebuild_offsets(&mut self) {
        let lens: Vec<usize> = self.tensors().iter().map(|t| t.len()).collect();
        self.offsets.clear();
        let mut acc = 0;
        for len in lens {
            acc += len;
            self.offsets.push(acc);
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        vec![
            &self.forward_cell.w_ih,
            &self.forward_cell.w_hh,
            &self.forward_cell.bias,
            &self.backward_cell.w_ih,
            &self.backward_cell.w_hh,
            &self.backward_cell.bias,
            &self.fc_w,
            &self.fc_b,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.forward_cell.w_ih,
            &mut self.forward_cell.w_hh,
            &mut self.forward_cell.bias,
            &mut self.backward_cell.w_ih,
            &mut self.backward_cell.w_hh,
            &mut self.backward_cell.bias,
            &mut self.fc_w,
            &mut self.fc_b,
        ]
    }

    fn decay_flags(&self) -> [bool; 8] {
        [true, true, false, true, true, false, true, false]
    }

    fn locate(&self, index: usize) -> (usize, usize) {
        let t = self.offsets.partition_point(|&end| end <= index);
        let start = if t == 0 { 0 } else { self.offsets[t - 1] };
        (t, index - start)
    }

    fn check_input(&self, rows: &SeqRows) -> Result<(), NeuralError> {
        if rows.is_empty() {
            return Err(NeuralError::ShapeMismatch("empty sequence".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != self.cfg.input_dim) {
            return Err(NeuralError::ShapeMismatch(format!(
                "row dim {} does not match model input dim {}",
                bad.len(),
                self.cfg.input_dim
            )));
        }
        Ok(())
    }

    /// Runs one direction over `rows` in the order given by `step_index`.
    fn run_direction(&self, cell: &LstmCell, rows: &SeqRows, reverse: bool) -> DirectionRun {
        let h_dim = self.cfg.hidden;
        let steps = rows.len();
        let mut h = vec![0.0f64; h_dim];
        let mut c = vec![0.0f64; h_dim];
        let mut caches = Vec::with_capacity(steps);
        for s in 0..steps {
            let x = if reverse {
                &rows[steps - 1 - s]
            } else {
                &rows[s]
            };
            let mut gates = cell.bias.data.clone();
            for (row, gate) in gates.iter_mut().enumerate() {
                let wrow = &cell.w_ih.data[row * self.cfg.input_dim..(row + 1) * self.cfg.input_dim];
                *gate += wrow.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                let hrow = &cell.w_hh.data[row * h_dim..(row + 1) * h_dim];
                *gate += hrow.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>();
            }
            let i: Vec<f64> = gates[..h_dim].iter().map(|&z| sigmoid(z)).collect();
            let f: Vec<f64> = gates[h_dim..2 * h_dim].iter().map(|&z| sigmoid(z)).collect();
            let g: Vec<f64> = gates[2 * h_dim..3 * h_dim].iter().map(|&z| z.tanh()).collect();
            let o: Vec<f64> = gates[3 * h_dim..].iter().map(|&z| sigmoid(z)).collect();
            let c_prev = c.clone();
            let h_prev = h.clone();
            for j in 0..h_dim {
                c[j] = f[j] * c_prev[j] + i[j] * g[j];
            }
            let tanh_c: Vec<f64> = c.iter().map(|&v| v.tanh()).collect();
            for j in 0..h_dim {
                h[j] = o[j] * tanh_c[j];
            }
            caches.push(StepCache {
                i,
                f,
                g,
                o,
                tanh_c,
                h_prev,
                c_prev,
            });
        }
        DirectionRun {
            caches,
            final_h: h,
        }
    }

    /// Concatenated final states, optionally passed through a dropout mask.
    fn forward_concat(&self, rows: &SeqRows, mask: Option<&[f64]>) -> (DirectionRun, DirectionRun, Vec<f64>) {
        let fwd = self.run_direction(&self.forward_cell, rows, false);
        let bwd = self.run_direction(&self.backward_cell, rows, true);
        let mut concat = Vec::with_capacity(2 * self.cfg.hidden);
        concat.extend_from_slice(&fwd.final_h);
        concat.extend_from_slice(&bwd.final_h);
        if let Some(mask) = mask {
            for (v, m) in concat.iter_mut().zip(mask) {
                *v *= m;
            }
        }
        (fwd, bwd, concat)
    }

    fn logits_from_concat(&self, concat: &[f64]) -> [f64; CLASS_COUNT] {
        let n = concat.len();
        let mut logits = [0.0; CLASS_COUNT];
        for out in 0..CLASS_COUNT {
            let row = &self.fc_w.data[out * n..(out + 1) * n];
            logits[out] =
                self.fc_b.data[out] + row.iter().zip(concat).map(|(w, v)| w * v).sum::<f64>();
        }
        logits
    }

    fn forward_probs(&self, rows: &SeqRows, mask: Option<&[f64]>) -> Result<Probs, NeuralError> {
        self.check_input(rows)?;
        let (_, _, concat) = self.forward_concat(rows, mask);
        Ok(softmax(&self.logits_from_concat(&concat)))
    }

    /// Loss and flat gradient for one sequence under an optional dropout
    /// mask (training) or none (evaluation).
    fn backward(
        &self,
        rows: &SeqRows,
        label: usize,
        mask: Option<&[f64]>,
    ) -> Result<(Vec<f64>, f64), NeuralError> {
        self.check_input(rows)?;
        let h_dim = self.cfg.hidden;
        let (fwd, bwd, concat) = self.forward_concat(rows, mask);
        let probs = softmax(&self.logits_from_concat(&concat));
        let loss = cross_entropy(&probs, label);

        let mut grad = vec![0.0; self.param_count()];
        let mut dlogits = probs;
        dlogits[label] -= 1.0;

        // FC block offsets: tensors 6 (fc_w) and 7 (fc_b).
        let fc_w_off = self.offsets[5];
        let fc_b_off = self.offsets[6];
        let n = concat.len();
        let mut dconcat = vec![0.0f64; n];
        for out in 0..CLASS_COUNT {
            let d = dlogits[out];
            grad[fc_b_off + out] = d;
            let row = &self.fc_w.data[out * n..(out + 1) * n];
            for j in 0..n {
                grad[fc_w_off + out * n + j] = d * concat[j];
                dconcat[j] += d * row[j];
            }
        }
        if let Some(mask) = mask {
            for (dv, m) in dconcat.iter_mut().zip(mask) {
                *dv *= m;
            }
        }

        let dh_fwd = dconcat[..h_dim].to_vec();
        let dh_bwd = dconcat[h_dim..].to_vec();
        self.backprop_direction(&self.forward_cell, rows, false, &fwd, &dh_fwd, 0, &mut grad);
        self.backprop_direction(&self.backward_cell, rows, true, &bwd, &dh_bwd, 3, &mut grad);
        Ok((grad, loss))
    }

    /// Backpropagation through time for one direction. `tensor_base` is the
    /// canonical index of the direction's first tensor (0 forward, 3
    /// backward).
    #[allow(clippy::too_many_arguments)]
    fn backprop_direction(
        &self,
        cell: &LstmCell,
        rows: &SeqRows,
        reverse: bool,
        run: &DirectionRun,
        dh_final: &[f64],
        tensor_base: usize,
        grad: &mut [f64],
    ) {
        let h_dim = self.cfg.hidden;
        let in_dim = self.cfg.input_dim;
        let steps = rows.len();
        let w_ih_off = if tensor_base == 0 { 0 } else { self.offsets[tensor_base - 1] };
        let w_hh_off = w_ih_off + cell.w_ih.len();
        let b_off = w_hh_off + cell.w_hh.len();

        let mut dh = dh_final.to_vec();
        let mut dc = vec![0.0f64; h_dim];
        let mut dgates = vec![0.0f64; 4 * h_dim];
        for s in (0..steps).rev() {
            let cache = &run.caches[s];
            let x = if reverse {
                &rows[steps - 1 - s]
            } else {
                &rows[s]
            };
            for j in 0..h_dim {
                let do_ = dh[j] * cache.tanh_c[j] * cache.o[j] * (1.0 - cache.o[j]);
                let dcj = dc[j] + dh[j] * cache.o[j] * (1.0 - cache.tanh_c[j] * cache.tanh_c[j]);
                let di = dcj * cache.g[j] * cache.i[j] * (1.0 - cache.i[j]);
                let dg = dcj * cache.i[j] * (1.0 - cache.g[j] * cache.g[j]);
                let df = dcj * cache.c_prev[j] * cache.f[j] * (1.0 - cache.f[j]);
                dgates[j] = di;
                dgates[h_dim + j] = df;
                dgates[2 * h_dim + j] = dg;
                dgates[3 * h_dim + j] = do_;
                dc[j] = dcj * cache.f[j];
            }
            for (row, &dgate) in dgates.iter().enumerate() {
                if dgate == 0.0 {
                    continue;
                }
                grad[b_off + row] += dgate;
                let w_row = w_ih_off + row * in_dim;
                for (k, &xv) in x.iter().enumerate() {
                    grad[w_row + k] += dgate * xv;
                }
                let h_row = w_hh_off + row * h_dim;
                for (k, &hv) in cache.h_prev.iter().enumerate() {
                    grad[h_row + k] += dgate * hv;
                }
            }
            // dh for the previous step: W_hh^T * dgates.
            for j in dh.iter_mut() {
                *j = 0.0;
            }
            for (row, &dgate) in dgates.iter().enumerate() {
                if dgate == 0.0 {
                    continue;
                }
                let h_row = &cell.w_hh.data[row * h_dim..(row + 1) * h_dim];
                for (j, &w) in h_row.iter().enumerate() {
                    dh[j] += dgate * w;
                }
            }
        }
    }

    /// Trains with mini-batch gradient descent; one inverted-dropout mask is
    /// drawn per update step and shared by the batch.
    pub fn train(
        &mut self,
        data: &[(SeqRows, usize)],
        val: &[(SeqRows, usize)],
        cfg: &TrainConfig,
    ) -> Result<TrainOutcome, NeuralError> {
        check_classes_present(data)?;
        for (rows, _) in data.iter().chain(val) {
            self.check_input(rows)?;
        }
        let p = self.cfg.dropout;
        let concat = 2 * self.cfg.hidden;
        gradient_descent(
            self,
            data,
            val,
            cfg,
            |rng: &mut ChaCha8Rng| -> Vec<f64> {
                if p == 0.0 {
                    vec![1.0; concat]
                } else {
                    (0..concat)
                        .map(|_| {
                            if rng.random::<f64>() < p {
                                0.0
                            } else {
                                1.0 / (1.0 - p)
                            }
                        })
                        .collect()
                }
            },
            |model, batch, mask| {
                let mut grad = vec![0.0; model.param_count()];
                let mut loss = 0.0;
                for (rows, label) in batch {
                    let (g, l) = model.backward(rows, *label, Some(mask))?;
                    for (acc, v) in grad.iter_mut().zip(&g) {
                        *acc += v;
                    }
                    loss += l;
                }
                let inv = 1.0 / batch.len() as f64;
                for g in grad.iter_mut() {
                    *g *= inv;
                }
                Ok((grad, loss * inv))
            },
        )
    }
}

impl DifferentiableClassifier for BiLstmModel {
    type Input = SeqRows;

    fn param_count(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    fn param(&self, index: usize) -> f64 {
        let (t, inner) = self.locate(index);
        self.tensors()[t].data[inner]
    }

    fn set_param(&mut self, index: usize, value: f64) {
        let (t, inner) = self.locate(index);
        self.tensors_mut()[t].data[inner] = value;
    }

    fn params_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for t in self.tensors() {
            out.extend_from_slice(&t.data);
        }
        out
    }

    fn set_params_vec(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.param_count());
        let mut cursor = 0;
        for t in self.tensors_mut() {
            let len = t.data.len();
            t.data.copy_from_slice(&values[cursor..cursor + len]);
            cursor += len;
        }
    }

    fn apply_update(&mut self, grad: &[f64], learning_rate: f64, weight_decay: f64) {
        assert_eq!(grad.len(), self.param_count());
        let flags = self.decay_flags();
        let mut cursor = 0;
        for (t, decays) in self.tensors_mut().into_iter().zip(flags) {
            let wd = if decays { weight_decay } else { 0.0 };
            for w in t.data.iter_mut() {
                *w -= learning_rate * (grad[cursor] + wd * *w);
                cursor += 1;
            }
        }
    }

    fn predict(&self, input: &SeqRows) -> Result<Probs, NeuralError> {
        self.forward_probs(input, None)
    }

    fn loss(&self, input: &SeqRows, label: usize) -> Result<f64, NeuralError> {
        Ok(cross_entropy(&self.forward_probs(input, None)?, label))
    }

    fn loss_grad(&self, input: &SeqRows, label: usize) -> Result<Vec<f64>, NeuralError> {
        Ok(self.backward(input, label, None)?.0)
    }
}

/// Class probabilities for one feature sequence (evaluation mode).
pub fn bilstm_forward(model: &BiLstmModel, rows: &SeqRows) -> Result<Probs, NeuralError> {
    model.predict(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{argmax, grad_check};

    fn tiny_cfg() -> BiLstmConfig {
        BiLstmConfig {
            input_dim: 4,
            hidden: 3,
            dropout: 0.0,
            seed: 21,
        }
    }

    fn seq(t: usize, d: usize, f: impl Fn(usize, usize) -> f64) -> SeqRows {
        (0..t).map(|s| (0..d).map(|j| f(s, j)).collect()).collect()
    }

    #[test]
    fn zero_parameter_model_is_uniform() {
        let mut m = BiLstmModel::new(tiny_cfg()).unwrap();
        let zeros = vec![0.0; m.param_count()];
        m.set_params_vec(&zeros);
        let p = bilstm_forward(&m, &seq(5, 4, |s, j| (s + j) as f64 * 0.1)).unwrap();
        for v in p {
            assert!((v - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_row_sequence_is_well_defined() {
        let m = BiLstmModel::new(tiny_cfg()).unwrap();
        let p = bilstm_forward(&m, &seq(1, 4, |_, j| j as f64 * 0.2)).unwrap();
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn random_model_outputs_distribution() {
        let m = BiLstmModel::new(BiLstmConfig {
            input_dim: 7,
            hidden: 5,
            dropout: 0.3,
            seed: 2,
        })
        .unwrap();
        // Inference ignores dropout.
        let p = bilstm_forward(&m, &seq(9, 7, |s, j| ((s * 3 + j * 5) % 13) as f64 / 13.0 - 0.4)).unwrap();
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let m = BiLstmModel::new(tiny_cfg()).unwrap();
        assert!(matches!(
            bilstm_forward(&m, &seq(3, 5, |_, _| 0.0)),
            Err(NeuralError::ShapeMismatch(_))
        ));
        assert!(matches!(
            bilstm_forward(&m, &Vec::new()),
            Err(NeuralError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn gradcheck_tiny_bilstm() {
        let mut m = BiLstmModel::new(tiny_cfg()).unwrap();
        let rows = seq(5, 4, |s, j| ((s * 7 + j * 3) % 11) as f64 / 11.0 - 0.3);
        let err = grad_check(&mut m, &rows, 2, 1e-5, 200, 77).unwrap();
        assert!(err <= 1e-4, "gradient error {err}");
    }

    #[test]
    fn reversal_swaps_directions_with_tied_parameters() {
        let mut m = BiLstmModel::new(tiny_cfg()).unwrap();
        // Tie backward to forward and both fc halves to the same weights.
        m.backward_cell = m.forward_cell.clone();
        let h = m.cfg.hidden;
        let n = 2 * h;
        for out in 0..CLASS_COUNT {
            for j in 0..h {
                let v = m.fc_w.data[out * n + j];
                m.fc_w.data[out * n + h + j] = v;
            }
        }
        let rows = seq(6, 4, |s, j| ((s * 5 + j) % 7) as f64 / 7.0);
        let reversed: SeqRows = rows.iter().rev().cloned().collect();
        let p1 = bilstm_forward(&m, &rows).unwrap();
        let p2 = bilstm_forward(&m, &reversed).unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn motion_dataset() -> Vec<(SeqRows, usize)> {
        // Six separable temporal patterns in a 4-dim feature.
        let mut data = Vec::new();
        for class in 0..CLASS_COUNT {
            for rep in 0..3 {
                let phase = rep as f64 * 0.05;
                let rows = seq(8, 4, |s, j| {
                    let t = s as f64 / 7.0 + phase;
                    match class {
                        0 => t + 0.01 * j as f64,          // ascending
                        1 => 1.0 - t + 0.01 * j as f64,    // descending
                        2 => (t * std::f64::consts::PI).sin(),
                        3 => (t * std::f64::consts::PI).cos(),
                        4 => if s % 2 == 0 { 1.0 } else { 0.0 },
                        _ => 0.5 + 0.3 * t * j as f64 / 4.0,
                    }
                });
                data.push((rows, class));
            }
        }
        data
    }

    #[test]
    fn separable_motions_reach_full_accuracy() {
        let data = motion_dataset();
        let mut m = BiLstmModel::new(BiLstmConfig {
            input_dim: 4,
            hidden: 8,
            dropout: 0.0,
            seed: 4,
        })
        .unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.2,
            epochs: 100,
            batch_size: data.len(),
            weight_decay: 0.0,
            seed: 3,
        };
        m.train(&data, &[], &cfg).unwrap();
        let correct = data
            .iter()
            .filter(|(rows, label)| argmax(&m.predict(rows).unwrap()) == *label)
            .count();
        assert_eq!(correct, data.len());
    }

    #[test]
    fn zero_learning_rate_is_flat() {
        let data = motion_dataset();
        let mut m = BiLstmModel::new(tiny_cfg()).unwrap();
        let before = m.params_vec();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            batch_size: data.len(),
            weight_decay: 0.0,
            seed: 3,
        };
        let out = m.train(&data, &[], &cfg).unwrap();
        assert_eq!(m.params_vec(), before);
        for w in out.loss_history.windows(2) {
            assert_eq!(w[0], w[1]);
        }
    }

    #[test]
    fn seed_determinism() {
        let data = motion_dataset();
        let cfg = TrainConfig {
            learning_rate: 0.1,
            epochs: 5,
            batch_size: 6,
            weight_decay: 1e-4,
            seed: 8,
        };
        let run = |seed| {
            let mut m = BiLstmModel::new(BiLstmConfig {
                input_dim: 4,
                hidden: 6,
                dropout: 0.5,
                seed,
            })
            .unwrap();
            let h = m.train(&data, &[], &cfg).unwrap();
            (h.loss_history, m.params_vec())
        };
        assert_eq!(run(5), run(5));
    }
}
