use std::sync::Arc;

use rand::Rng;

use super::layers::{Layer, LayerCache, LayerSpec};
use super::params::{ensure_layout, BlockRole, Gradients, NetParams, ParamLayout};
use super::Tensor;
use crate::error::{Error, Result};

/// A validated feed-forward stack with its parameter layout.
#[derive(Debug, Clone)]
pub struct Network {
    input_shape: Vec<usize>,
    specs: Vec<LayerSpec>,
    layers: Vec<Layer>,
    shapes: Vec<Vec<usize>>,
    layout: Arc<ParamLayout>,
}

/// Intermediates recorded by [`Network::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    inputs: Vec<Tensor>,
    caches: Vec<LayerCache>,
    output_shape: Vec<usize>,
}

impl Tape {
    pub fn input(&self) -> &Tensor {
        &self.inputs[0]
    }
}

/// Parameter gradients plus, when requested, the gradient w.r.t. the input.
#[derive(Debug, Clone)]
pub struct Backward {
    pub grads: Gradients,
    pub input_grad: Option<Tensor>,
}

impl Network {
    pub fn build(input_shape: &[usize], specs: &[LayerSpec]) -> Result<Self> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::Shape(format!("bad input shape {input_shape:?}")));
        }
        let mut shapes = vec![input_shape.to_vec()];
        let mut layers = Vec::with_capacity(specs.len());
        let mut layout = ParamLayout::default();
        for (i, spec) in specs.iter().enumerate() {
            let (layer, out) = Layer::resolve(spec, shapes.last().expect("non-empty"))
                .map_err(|e| Error::Shape(format!("layer {i} ({spec}): {e}")))?;
            if let Some((wl, bl, fan_in, fan_out)) = layer.param_shape() {
                layout.push(i, BlockRole::Weight, wl, fan_in, fan_out);
                layout.push(i, BlockRole::Bias, bl, fan_in, fan_out);
            }
            layers.push(layer);
            shapes.push(out);
        }
        Ok(Self { input_shape: input_shape.to_vec(), specs: specs.to_vec(), layers, shapes, layout: Arc::new(layout) })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().expect("non-empty")
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn total_count(&self) -> usize {
        self.layout.total_count()
    }

    /// Text manifest identifying the architecture (used by checkpoints).
    pub fn manifest(&self) -> String {
        let mut s = format!("input {:?}\n", self.input_shape);
        for spec in &self.specs {
            s.push_str(&spec.to_string());
            s.push('\n');
        }
        s
    }

    /// Uniform `+-sqrt(6 / (fan_in + fan_out))` weights, zero biases.
    pub fn init_params<R: Rng>(&self, rng: &mut R) -> NetParams {
        let mut params = NetParams::zeros(self.layout.clone());
        for block in self.layout.blocks() {
            if block.role == BlockRole::Weight {
                let limit = (6.0 / (block.fan_in + block.fan_out) as f64).sqrt();
                for v in &mut params.values_mut()[block.offset..block.offset + block.len] {
                    *v = rng.gen_range(-limit..limit);
                }
            }
        }
        params
    }

    /// Index of the last layer that carries parameters.
    pub fn last_param_layer(&self) -> Option<usize> {
        self.layers.iter().rposition(|l| l.param_shape().is_some())
    }

    fn weights<'a>(&self, params: &'a NetParams, i: usize) -> (&'a [f64], &'a [f64]) {
        match (params.block(i, BlockRole::Weight), params.block(i, BlockRole::Bias)) {
            (Some(w), Some(b)) => (w, b),
            _ => (&[], &[]),
        }
    }

    pub fn forward(&self, params: &NetParams, x: &Tensor) -> Result<(Tensor, Tape)> {
        ensure_layout(params, &self.layout)?;
        if x.shape() != self.input_shape.as_slice() {
            return Err(Error::Shape(format!("input shape {:?}, network expects {:?}", x.shape(), self.input_shape)));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let (w, b) = self.weights(params, i);
            let (next, cache) = layer.forward(w, b, &cur, &self.shapes[i + 1]);
            inputs.push(cur);
            caches.push(cache);
            cur = next;
        }
        let tape = Tape { inputs, caches, output_shape: cur.shape().to_vec() };
        Ok((cur, tape))
    }

    /// Reverse-mode gradients of `<output, grad_out>`.
    pub fn backward(&self, params: &NetParams, tape: &Tape, grad_out: &Tensor, need_input_grad: bool) -> Result<Backward> {
        let mut grads = Gradients::zeros(self.layout.clone());
        let input_grad = self.backward_into(params, tape, grad_out, need_input_grad, &mut grads)?;
        Ok(Backward { grads, input_grad })
    }

    /// Like [`Network::backward`] but accumulates into an existing store.
    pub fn backward_into(
        &self,
        params: &NetParams,
        tape: &Tape,
        grad_out: &Tensor,
        need_input_grad: bool,
        grads: &mut Gradients,
    ) -> Result<Option<Tensor>> {
        ensure_layout(params, &self.layout)?;
        if !grads.same_layout(&self.layout) {
            return Err(Error::Layout("gradient store belongs to another network".into()));
        }
        let stale = tape.inputs.len() != self.layers.len()
            || tape.output_shape != *self.output_shape()
            || tape.inputs.iter().zip(&self.shapes).any(|(t, s)| t.shape() != s.as_slice());
        if stale {
            return Err(Error::Shape("tape was not recorded by this network".into()));
        }
        if grad_out.shape() != self.output_shape() {
            return Err(Error::Shape(format!(
                "grad_out shape {:?}, network output is {:?}",
                grad_out.shape(),
                self.output_shape()
            )));
        }

        let mut dy = grad_out.data().to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let need_dx = i > 0 || need_input_grad;
            let (w, _) = self.weights(params, i);
            let dx = if layer.param_shape().is_some() {
                let wr = grads.block_range(i, BlockRole::Weight);
                let br = grads.block_range(i, BlockRole::Bias);
                let (head, tail) = grads.values_mut().split_at_mut(br.start);
                let dw = &mut head[wr];
                let db = &mut tail[..br.len()];
                layer.backward(w, &tape.inputs[i], &tape.caches[i], &dy, dw, db, need_dx)
            } else {
                layer.backward(w, &tape.inputs[i], &tape.caches[i], &dy, &mut [], &mut [], need_dx)
            };
            match dx {
                Some(d) => dy = d,
                None => return Ok(None),
            }
        }
        Ok(Some(Tensor::new(self.input_shape.clone(), dy)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fc_zero_weights_outputs_bias() {
        let net = Network::build(&[4], &[LayerSpec::Fc { out: 2 }]).unwrap();
        let mut p = NetParams::zeros(net.layout().clone());
        p.block_mut(0, BlockRole::Bias).unwrap().copy_from_slice(&[0.3, -1.5]);
        let (y, _) = net.forward(&p, &Tensor::vector(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(y.data(), &[0.3, -1.5]);
    }

    #[test]
    fn fc_sum_loss_gradient_is_outer_product() {
        let net = Network::build(&[3], &[LayerSpec::Fc { out: 2 }]).unwrap();
        let p = net.init_params(&mut ChaCha8Rng::seed_from_u64(1));
        let x = Tensor::vector(vec![0.5, -1.0, 2.0]);
        let (_, tape) = net.forward(&p, &x).unwrap();
        let b = net.backward(&p, &tape, &Tensor::vector(vec![1.0, 1.0]), false).unwrap();
        assert_eq!(b.grads.block(0, BlockRole::Weight).unwrap(), &[0.5, -1.0, 2.0, 0.5, -1.0, 2.0]);
        assert_eq!(b.grads.block(0, BlockRole::Bias).unwrap(), &[1.0, 1.0]);
    }

    #[test]
    fn build_rejects_missing_flatten() {
        let err = Network::build(&[1, 8, 8], &[LayerSpec::Conv { out_channels: 2, kernel: 3, stride: 1 }, LayerSpec::Fc { out: 3 }]);
        assert!(err.is_err());
    }

    #[test]
    fn forward_rejects_wrong_input_and_foreign_params() {
        let net = Network::build(&[3], &[LayerSpec::Fc { out: 2 }]).unwrap();
        let other = Network::build(&[4], &[LayerSpec::Fc { out: 2 }]).unwrap();
        let p = net.init_params(&mut ChaCha8Rng::seed_from_u64(2));
        assert!(net.forward(&p, &Tensor::vector(vec![1.0; 4])).is_err());
        let q = other.init_params(&mut ChaCha8Rng::seed_from_u64(2));
        assert!(net.forward(&q, &Tensor::vector(vec![1.0; 3])).is_err());
    }

    #[test]
    fn stale_tape_rejected() {
        let a = Network::build(&[3], &[LayerSpec::Fc { out: 2 }]).unwrap();
        let b = Network::build(&[3], &[LayerSpec::Fc { out: 2 }, LayerSpec::Relu]).unwrap();
        let pa = a.init_params(&mut ChaCha8Rng::seed_from_u64(3));
        let pb = b.init_params(&mut ChaCha8Rng::seed_from_u64(3));
        let (_, tape) = a.forward(&pa, &Tensor::vector(vec![1.0, 2.0, 3.0])).unwrap();
        assert!(b.backward(&pb, &tape, &Tensor::vector(vec![1.0, 1.0]), false).is_err());
    }

    #[test]
    fn deterministic_init_and_forward() {
        let net = Network::build(
            &[1, 9, 9],
            &[LayerSpec::Conv { out_channels: 3, kernel: 3, stride: 2 }, LayerSpec::Relu, LayerSpec::Flatten, LayerSpec::Fc { out: 2 }],
        )
        .unwrap();
        let p1 = net.init_params(&mut ChaCha8Rng::seed_from_u64(9));
        let p2 = net.init_params(&mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(p1, p2);
        let x = Tensor::new(vec![1, 9, 9], (0..81).map(|i| (i as f64).sin()).collect()).unwrap();
        assert_eq!(net.forward(&p1, &x).unwrap().0, net.forward(&p2, &x).unwrap().0);
    }
}
