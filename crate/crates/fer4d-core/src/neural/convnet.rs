//! A small convolutional classifier: `[conv3x3 -> ReLU -> maxpool2x2]` per
//! block, then a fully connected layer into softmax over the six classes.
//! Convolutions are valid (no padding); pooling floors odd extents.

use super::tensor::Tensor;
use super::{
    check_classes_present, cross_entropy, gradient_descent, softmax, DifferentiableClassifier,
    NeuralError, Probs, TrainConfig, TrainOutcome,
};
use crate::mesh::CLASS_COUNT;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Architecture of a [`ConvNetModel`]: input `[channels, height, width]` and
/// the filter count of each conv block. An empty filter list degenerates to
/// a linear softmax classifier on the flattened input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvNetConfig {
    pub in_shape: [usize; 3],
    pub filters: Vec<usize>,
    pub seed: u64,
}

impl Default for ConvNetConfig {
    fn default() -> Self {
        ConvNetConfig {
            in_shape: [5, 32, 32],
            filters: vec![8, 16],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvNetModel {
    pub cfg: ConvNetConfig,
    /// One `[filters, in_channels, 3, 3]` kernel tensor per block.
    pub conv_w: Vec<Tensor>,
    /// One `[filters]` bias tensor per block.
    pub conv_b: Vec<Tensor>,
    /// `[6, flattened]` readout weights.
    pub fc_w: Tensor,
    /// `[6]` readout bias.
    pub fc_b: Tensor,
    /// Flat-index boundaries of the parameter tensors, in listing order.
    offsets: Vec<usize>,
}

const KERNEL: usize = 3;

/// Shapes `[c, h, w]` produced by each block, ending with the flatten input.
fn block_shapes(cfg: &ConvNetConfig) -> Result<Vec<[usize; 3]>, NeuralError> {
    let mut shapes = vec![cfg.in_shape];
    let mut cur = cfg.in_shape;
    for (i, &f) in cfg.filters.iter().enumerate() {
        if f == 0 {
            return Err(NeuralError::InvalidConfig(format!(
                "block {i} has zero filters"
            )));
        }
        if cur[1] < KERNEL || cur[2] < KERNEL {
            return Err(NeuralError::InvalidConfig(format!(
                "block {i} input {}x{} smaller than the {KERNEL}x{KERNEL} kernel",
                cur[1], cur[2]
            )));
        }
        let conv = [f, cur[1] - KERNEL + 1, cur[2] - KERNEL + 1];
        let pooled = [f, conv[1] / 2, conv[2] / 2];
        if pooled[1] == 0 || pooled[2] == 0 {
            return Err(NeuralError::InvalidConfig(format!(
                "block {i} pools to an empty map"
            )));
        }
        shapes.push(pooled);
        cur = pooled;
    }
    Ok(shapes)
}

impl ConvNetModel {
    /// Builds a model with normally distributed weights scaled by fan-in and
    /// zero biases, deterministic in the seed.
    pub fn new(cfg: ConvNetConfig) -> Result<ConvNetModel, NeuralError> {
        let shapes = block_shapes(&cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut conv_w = Vec::new();
        let mut conv_b = Vec::new();
        for (i, &f) in cfg.filters.iter().enumerate() {
            let c_in = shapes[i][0];
            let fan_in = (c_in * KERNEL * KERNEL) as f64;
            let dist = Normal::new(0.0, (2.0 / fan_in).sqrt()).unwrap();
            let data = (0..f * c_in * KERNEL * KERNEL)
                .map(|_| dist.sample(&mut rng))
                .collect();
            conv_w.push(Tensor::from_vec(&[f, c_in, KERNEL, KERNEL], data));
            // Small positive bias keeps the ReLUs alive at initialization
            // even for flat inputs.
            let mut bias = Tensor::zeros(&[f]);
            bias.data.fill(0.02);
            conv_b.push(bias);
        }
        let last = shapes.last().unwrap();
        let flat = last[0] * last[1] * last[2];
        let dist = Normal::new(0.0, (1.0 / flat as f64).sqrt()).unwrap();
        let fc_w = Tensor::from_vec(
            &[CLASS_COUNT, flat],
            (0..CLASS_COUNT * flat).map(|_| dist.sample(&mut rng)).collect(),
        );
        let fc_b = Tensor::zeros(&[CLASS_COUNT]);
        let mut model = ConvNetModel {
            cfg,
            conv_w,
            conv_b,
            fc_w,
            fc_b,
            offsets: Vec::new(),
        };
        model.rebuild_offsets();
        Ok(model)
    }

    /// Cumulative end positions of the tensors in canonical order.
    pub(crate) fn rebuild_offsets(&mut self) {
        let lens: Vec<usize> = self.tensors().iter().map(|t| t.len()).collect();
        self.offsets.clear();
        let mut acc = 0;
        for len in lens {
            acc += len;
            self.offsets.push(acc);
        }
    }

    /// Parameter tensors in their canonical order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut v = Vec::new();
        for (w, b) in self.conv_w.iter().zip(&self.conv_b) {
            v.push(w);
            v.push(b);
        }
        v.push(&self.fc_w);
        v.push(&self.fc_b);
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v: Vec<&mut Tensor> = Vec::new();
        for (w, b) in self.conv_w.iter_mut().zip(self.conv_b.iter_mut()) {
            v.push(w);
            v.push(b);
        }
        v.push(&mut self.fc_w);
        v.push(&mut self.fc_b);
        v
    }

    /// Decay flags in canonical tensor order: true for weight tensors.
    fn decay_flags(&self) -> Vec<bool> {
        let mut v = Vec::new();
        for _ in &self.conv_w {
            v.push(true); // kernel
            v.push(false); // bias
        }
        v.push(true); // fc_w
        v.push(false); // fc_b
        v
    }

    fn locate(&self, index: usize) -> (usize, usize) {
        let t = self.offsets.partition_point(|&end| end <= index);
        let start = if t == 0 { 0 } else { self.offsets[t - 1] };
        (t, index - start)
    }

    fn check_input(&self, image: &Tensor) -> Result<(), NeuralError> {
        if image.shape.as_slice() != self.cfg.in_shape.as_slice() {
            return Err(NeuralError::ShapeMismatch(format!(
                "input shape {:?} does not match model input {:?}",
                image.shape, self.cfg.in_shape
            )));
        }
        Ok(())
    }

    fn forward_tape(&self, image: &Tensor) -> Result<Tape, NeuralError> {
        self.check_input(image)?;
        let mut tape = Tape {
            pre_relu: Vec::new(),
            pooled: Vec::new(),
            argmax: Vec::new(),
            logits: [0.0; CLASS_COUNT],
            probs: [0.0; CLASS_COUNT],
        };
        let mut cur = image.clone();
        for (w, b) in self.conv_w.iter().zip(&self.conv_b) {
            let conv = conv_forward(&cur, w, b);
            let (pool, arg) = maxpool_relu(&conv);
            tape.pre_relu.push(conv);
            tape.argmax.push(arg);
            tape.pooled.push(pool.clone());
            cur = pool;
        }
        for out in 0..CLASS_COUNT {
            let row = &self.fc_w.data[out * cur.len()..(out + 1) * cur.len()];
            tape.logits[out] = self.fc_b.data[out]
                + row.iter().zip(&cur.data).map(|(w, x)| w * x).sum::<f64>();
        }
        tape.probs = softmax(&tape.logits);
        Ok(tape)
    }

    /// Analytic gradient as per-tensor blocks in canonical order, plus loss.
    fn backward(&self, image: &Tensor, label: usize) -> Result<(Vec<f64>, f64), NeuralError> {
        let tape = self.forward_tape(image)?;
        let loss = cross_entropy(&tape.probs, label);
        let mut grad = vec![0.0; self.param_count()];

        let mut dlogits = tape.probs;
        dlogits[label] -= 1.0;

        let blocks = self.conv_w.len();
        let flat_input: &Tensor = if blocks == 0 {
            image
        } else {
            &tape.pooled[blocks - 1]
        };
        let flat = flat_input.len();

        // FC weights, bias and the gradient flowing into the flat input.
        let fc_w_off = if blocks == 0 {
            0
        } else {
            self.offsets[2 * blocks - 1]
        };
        let fc_b_off = fc_w_off + self.fc_w.len();
        let mut dflat = vec![0.0f64; flat];
        for out in 0..CLASS_COUNT {
            let d = dlogits[out];
            grad[fc_b_off + out] = d;
            let row = &self.fc_w.data[out * flat..(out + 1) * flat];
            for (i, (&x, &w)) in flat_input.data.iter().zip(row).enumerate() {
                grad[fc_w_off + out * flat + i] = d * x;
                dflat[i] += d * w;
            }
        }

        // Walk conv blocks backward.
        let mut dout = Tensor::from_vec(&flat_input.shape, dflat);
        for b in (0..blocks).rev() {
            let pre = &tape.pre_relu[b];
            // Un-pool: route gradient to each window's argmax, then gate by
            // ReLU (pool ran on relu(pre); relu' = pre > 0).
            let mut dpre = Tensor::zeros(&pre.shape);
            for (flat_idx, &src) in tape.argmax[b].iter().enumerate() {
                if pre.data[src] > 0.0 {
                    dpre.data[src] += dout.data[flat_idx];
                }
            }
            let input: &Tensor = if b == 0 { image } else { &tape.pooled[b - 1] };
            let w_off = if b == 0 { 0 } else { self.offsets[2 * b - 1] };
            let b_off = w_off + self.conv_w[b].len();
            let (head, tail) = grad.split_at_mut(b_off);
            let dinput = conv_backward(
                input,
                &self.conv_w[b],
                &dpre,
                &mut head[w_off..],
                &mut tail[..self.conv_b[b].len()],
                b > 0,
            );
            if b > 0 {
                dout = dinput;
            }
        }
        Ok((grad, loss))
    }

    /// Trains with plain mini-batch gradient descent; returns the per-epoch
    /// loss history. An optional validation set selects the kept epoch by
    /// accuracy.
    pub fn train(
        &mut self,
        data: &[(Tensor, usize)],
        val: &[(Tensor, usize)],
        cfg: &TrainConfig,
    ) -> Result<TrainOutcome, NeuralError> {
        check_classes_present(data)?;
        for (img, _) in data.iter().chain(val) {
            self.check_input(img)?;
        }
        gradient_descent(
            self,
            data,
            val,
            cfg,
            |_| (),
            |model, batch, _| {
                let mut grad = vec![0.0; model.param_count()];
                let mut loss = 0.0;
                for (img, label) in batch {
                    let (g, l) = model.backward(img, *label)?;
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

/// Forward-pass intermediates kept for the backward pass.
struct Tape {
    pre_relu: Vec<Tensor>,
    pooled: Vec<Tensor>,
    /// For each block, per pooled element: flat index of the winning input.
    argmax: Vec<Vec<usize>>,
    logits: [f64; CLASS_COUNT],
    probs: Probs,
}

fn conv_forward(input: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let (c_in, h, wid) = (input.shape[0], input.shape[1], input.shape[2]);
    let f = w.shape[0];
    let (oh, ow) = (h - KERNEL + 1, wid - KERNEL + 1);
    let mut out = Tensor::zeros(&[f, oh, ow]);
    for fi in 0..f {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = b.data[fi];
                for c in 0..c_in {
                    for ky in 0..KERNEL {
                        for kx in 0..KERNEL {
                            acc += w.data[((fi * c_in + c) * KERNEL + ky) * KERNEL + kx]
                                * input.at3(c, y + ky, x + kx);
                        }
                    }
                }
                *out.at3_mut(fi, y, x) = acc;
            }
        }
    }
    out
}

/// ReLU then 2x2 max pooling with stride 2; returns the pooled map and the
/// flat pre-activation index feeding each pooled element.
fn maxpool_relu(pre: &Tensor) -> (Tensor, Vec<usize>) {
    let (c, h, w) = (pre.shape[0], pre.shape[1], pre.shape[2]);
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[c, oh, ow]);
    let mut arg = vec![0usize; c * oh * ow];
    for ci in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let (sy, sx) = (2 * y + dy, 2 * x + dx);
                        let v = pre.at3(ci, sy, sx);
                        if v > best {
                            best = v;
                            best_idx = (ci * h + sy) * w + sx;
                        }
                    }
                }
                let flat = (ci * oh + y) * ow + x;
                out.data[flat] = best.max(0.0);
                arg[flat] = best_idx;
            }
        }
    }
    (out, arg)
}

/// Accumulates kernel/bias gradients; optionally returns the input gradient.
fn conv_backward(
    input: &Tensor,
    w: &Tensor,
    dout: &Tensor,
    dw: &mut [f64],
    db: &mut [f64],
    need_dinput: bool,
) -> Tensor {
    let (c_in, _h, _wid) = (input.shape[0], input.shape[1], input.shape[2]);
    let f = w.shape[0];
    let (oh, ow) = (dout.shape[1], dout.shape[2]);
    let mut dinput = if need_dinput {
        Tensor::zeros(&input.shape)
    } else {
        Tensor::zeros(&[1, 1, 1])
    };
    for fi in 0..f {
        for y in 0..oh {
            for x in 0..ow {
                let d = dout.at3(fi, y, x);
                if d == 0.0 {
                    continue;
                }
                db[fi] += d;
                for c in 0..c_in {
                    for ky in 0..KERNEL {
                        for kx in 0..KERNEL {
                            let widx = ((fi * c_in + c) * KERNEL + ky) * KERNEL + kx;
                            dw[widx] += d * input.at3(c, y + ky, x + kx);
                            if need_dinput {
                                *dinput.at3_mut(c, y + ky, x + kx) += d * w.data[widx];
                            }
                        }
                    }
                }
            }
        }
    }
    dinput
}

impl DifferentiableClassifier for ConvNetModel {
    type Input = Tensor;

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

    fn predict(&self, input: &Tensor) -> Result<Probs, NeuralError> {
        Ok(self.forward_tape(input)?.probs)
    }

    fn loss(&self, input: &Tensor, label: usize) -> Result<f64, NeuralError> {
        Ok(cross_entropy(&self.forward_tape(input)?.probs, label))
    }

    fn loss_grad(&self, input: &Tensor, label: usize) -> Result<Vec<f64>, NeuralError> {
        Ok(self.backward(input, label)?.0)
    }
}

/// Class probabilities for one image.
pub fn convnet_forward(model: &ConvNetModel, image: &Tensor) -> Result<Probs, NeuralError> {
    model.predict(image)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{argmax, grad_check};

    fn tiny_cfg() -> ConvNetConfig {
        ConvNetConfig {
            in_shape: [1, 8, 8],
            filters: vec![2],
            seed: 11,
        }
    }

    fn image(shape: [usize; 3], f: impl Fn(usize) -> f64) -> Tensor {
        let len = shape.iter().product();
        Tensor::from_vec(&shape, (0..len).map(f).collect())
    }

    #[test]
    fn zero_weight_model_is_uniform() {
        let mut m = ConvNetModel::new(tiny_cfg()).unwrap();
        for i in 0..m.param_count() {
            m.set_param(i, 0.0);
        }
        let img = image([1, 8, 8], |i| i as f64 / 64.0);
        let p = convnet_forward(&m, &img).unwrap();
        for v in p {
            assert!((v - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_kernel_preserves_interior_pre_pooling() {
        let mut m = ConvNetModel::new(tiny_cfg()).unwrap();
        for i in 0..m.param_count() {
            m.set_param(i, 0.0);
        }
        // Filter 0 becomes the identity: 1 at the kernel center.
        m.conv_w[0].data[(0 * KERNEL + 1) * KERNEL + 1] = 1.0;
        let img = image([1, 8, 8], |i| (i % 7) as f64 * 0.1 + 0.1);
        let conv = conv_forward(&img, &m.conv_w[0], &m.conv_b[0]);
        for y in 0..6 {
            for x in 0..6 {
                assert!((conv.at3(0, y, x) - img.at3(0, y + 1, x + 1)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let m = ConvNetModel::new(ConvNetConfig {
            in_shape: [2, 12, 12],
            filters: vec![3, 4],
            seed: 5,
        })
        .unwrap();
        let img = image([2, 12, 12], |i| ((i * 37) % 19) as f64 / 19.0 - 0.5);
        let p = convnet_forward(&m, &img).unwrap();
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let m = ConvNetModel::new(tiny_cfg()).unwrap();
        let img = image([1, 9, 9], |_| 0.0);
        assert!(matches!(
            convnet_forward(&m, &img),
            Err(NeuralError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn gradcheck_tiny_convnet() {
        let mut m = ConvNetModel::new(tiny_cfg()).unwrap();
        let img = image([1, 8, 8], |i| ((i * 13) % 29) as f64 / 29.0 - 0.4);
        let err = grad_check(&mut m, &img, 3, 1e-5, 200, 7).unwrap();
        assert!(err <= 1e-4, "gradient error {err}");
    }

    #[test]
    fn gradcheck_linear_only_model() {
        let mut m = ConvNetModel::new(ConvNetConfig {
            in_shape: [1, 4, 4],
            filters: vec![],
            seed: 3,
        })
        .unwrap();
        let img = image([1, 4, 4], |i| (i as f64 - 8.0) / 8.0);
        let err = grad_check(&mut m, &img, 1, 1e-5, 200, 7).unwrap();
        assert!(err <= 1e-7, "gradient error {err}");
    }

    #[test]
    fn separable_images_reach_full_accuracy_within_50_epochs() {
        // Classes 0 and 1 are the all-zero / all-one extremes; the other
        // four light a class-specific row band. Linearly separable, so a
        // perfect rule exists.
        let mut data = Vec::new();
        for class in 0..CLASS_COUNT {
            for rep in 0..3 {
                let jitter = rep as f64 * 1e-3;
                let img = image([1, 8, 8], |i| match class {
                    0 => jitter,
                    1 => 1.0 - jitter,
                    c => {
                        if i / 8 == c + 1 {
                            0.9 + jitter
                        } else {
                            0.05
                        }
                    }
                });
                data.push((img, class));
            }
        }
        let mut m = ConvNetModel::new(ConvNetConfig {
            in_shape: [1, 8, 8],
            filters: vec![4],
            seed: 11,
        })
        .unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.2,
            epochs: 50,
            batch_size: data.len(),
            weight_decay: 0.0,
            seed: 1,
        };
        let out = m.train(&data, &[], &cfg).unwrap();
        let correct = data
            .iter()
            .filter(|(img, label)| argmax(&m.predict(img).unwrap()) == *label)
            .count();
        assert_eq!(correct, data.len(), "history {:?}", out.loss_history);
        assert!(out.loss_history.last().unwrap() <= out.loss_history.first().unwrap());
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let mut data = Vec::new();
        for class in 0..CLASS_COUNT {
            data.push((image([1, 8, 8], |i| (i + class) as f64 / 70.0), class));
        }
        let mut m = ConvNetModel::new(tiny_cfg()).unwrap();
        let before: Vec<f64> = (0..m.param_count()).map(|i| m.param(i)).collect();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 4,
            batch_size: data.len(),
            weight_decay: 0.0,
            seed: 1,
        };
        let out = m.train(&data, &[], &cfg).unwrap();
        let after: Vec<f64> = (0..m.param_count()).map(|i| m.param(i)).collect();
        assert_eq!(before, after);
        for w in out.loss_history.windows(2) {
            assert_eq!(w[0], w[1]);
        }
    }

    #[test]
    fn same_seed_gives_identical_history() {
        let mut data = Vec::new();
        for class in 0..CLASS_COUNT {
            for rep in 0..2 {
                data.push((
                    image([1, 8, 8], |i| ((i * (class + 2) + rep) % 11) as f64 / 11.0),
                    class,
                ));
            }
        }
        let cfg = TrainConfig {
            learning_rate: 0.1,
            epochs: 6,
            batch_size: 4,
            weight_decay: 1e-4,
            seed: 9,
        };
        let mut m1 = ConvNetModel::new(tiny_cfg()).unwrap();
        let h1 = m1.train(&data, &[], &cfg).unwrap();
        let mut m2 = ConvNetModel::new(tiny_cfg()).unwrap();
        let h2 = m2.train(&data, &[], &cfg).unwrap();
        assert_eq!(h1.loss_history, h2.loss_history);
        for i in 0..m1.param_count() {
            assert_eq!(m1.param(i), m2.param(i));
        }
    }

    #[test]
    fn empty_class_is_rejected() {
        let data = vec![(image([1, 8, 8], |_| 0.0), 0usize)];
        let mut m = ConvNetModel::new(tiny_cfg()).unwrap();
        assert!(matches!(
            m.train(&data, &[], &TrainConfig::default()),
            Err(NeuralError::EmptyClass(_))
        ));
    }
}
