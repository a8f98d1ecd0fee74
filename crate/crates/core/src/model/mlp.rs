use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use crate::autodiff::{ParamStore, Tape, Var};
use crate::error::Result;
use crate::tensor::Tensor;

/// Forward-pass context: train mode applies inverted dropout after every
/// hidden activation.
pub(crate) struct ForwardCtx<'r> {
    pub dropout: f64,
    pub rng: Option<&'r mut ChaCha8Rng>,
}

impl ForwardCtx<'_> {
    pub fn eval() -> Self {
        Self {
            dropout: 0.0,
            rng: None,
        }
    }

    fn maybe_dropout(&mut self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let Some(rng) = self.rng.as_deref_mut() else {
            return Ok(x);
        };
        if self.dropout <= 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - self.dropout;
        let (r, c) = tape.value(x).shape();
        let mask: Vec<f64> = (0..r * c)
            .map(|_| {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect();
        tape.mul_const(x, Tensor::from_vec(r, c, mask)?)
    }
}

#[derive(Debug, Clone, Copy)]
struct Linear {
    weight: usize,
    bias: usize,
}

/// Stack of affine layers with ReLU after every hidden layer, and after the
/// last one too when `relu_last` is set.
#[derive(Debug, Clone)]
pub(crate) struct Mlp {
    layers: Vec<Linear>,
    relu_last: bool,
}

impl Mlp {
    /// `widths` lists input width, hidden widths and output width.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        widths: &[usize],
        relu_last: bool,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let unif = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                let weight_data = (0..fan_in * fan_out).map(|_| unif.sample(rng)).collect();
                let bias_data = (0..fan_out).map(|_| unif.sample(rng)).collect();
                let weight = store.push(
                    format!("{name}.{k}.weight"),
                    Tensor::from_vec(fan_in, fan_out, weight_data).expect("sized"),
                );
                let bias = store.push(
                    format!("{name}.{k}.bias"),
                    Tensor::from_vec(1, fan_out, bias_data).expect("sized"),
                );
                Linear { weight, bias }
            })
            .collect();
        Self { layers, relu_last }
    }

    pub fn forward(
        &self,
        tape: &mut Tape<'_>,
        handles: &[Var],
        mut x: Var,
        ctx: &mut ForwardCtx<'_>,
    ) -> Result<Var> {
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let z = tape.matmul(x, handles[layer.weight])?;
            x = tape.add_row(z, handles[layer.bias])?;
            if k < last || self.relu_last {
                x = tape.relu(x);
                x = ctx.maybe_dropout(tape, x)?;
            }
        }
        Ok(x)
    }
}
