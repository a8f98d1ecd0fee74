use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{HiNetConfig, MAX_INPUT_DIM};
use super::mlp::{ForwardCtx, Mlp};
use crate::autodiff::{Gradients, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;
use crate::seed;
use crate::tensor::Tensor;

/// Network family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Encoder, outcome GIN branch, adversarial treatment branch.
    Hinet,
    /// HINet's outcome branch alone: no treatment head, no balancing.
    Gin,
    /// Shared MLP on `x_i` with one outcome head per treatment arm; blind
    /// to the network.
    NoNetwork,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Hinet => "hinet",
            Architecture::Gin => "gin",
            Architecture::NoNetwork => "no_network",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active, driven by the given seed.
    Train {
        seed: u64,
    },
    Eval,
}

#[derive(Debug, Clone)]
struct TreatmentBranch {
    gin_t: Option<(usize, Mlp)>,
    d_t: Mlp,
}

#[derive(Debug, Clone)]
enum Layout {
    Hinet {
        encoder: Mlp,
        eps_y: usize,
        gin_y: Mlp,
        p_y: Mlp,
        /// Absent for the GIN baseline.
        treatment: Option<TreatmentBranch>,
    },
    NoNetwork {
        shared: Mlp,
        heads: [Mlp; 2],
    },
}

/// Which parts of the graph to record and whether the treatment branch's
/// gradient reversal is active.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Branches {
    pub treatment: bool,
    pub reverse_gradients: bool,
}

pub(crate) struct Recorded {
    pub y_hat: Var,
    pub t_logits: Option<Var>,
    pub representation: Option<Var>,
}

/// Output of a full forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub y_hat: Vec<f64>,
    /// Treatment logits; `None` for architectures without a treatment head.
    pub t_logits: Option<Vec<f64>>,
}

/// Which loss terms to differentiate, for gradient diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub alpha: f64,
    pub outcome_term: bool,
    pub treatment_term: bool,
    /// `false` replaces the gradient reversal layers with identities.
    pub reverse_gradients: bool,
}

impl LossSpec {
    pub fn combined(alpha: f64) -> Self {
        Self {
            alpha,
            outcome_term: true,
            treatment_term: true,
            reverse_gradients: true,
        }
    }
}

/// A network with its parameters. Parameter creation order, and therefore
/// the checkpoint layout, is fixed by `(architecture, input_dim, config)`.
#[derive(Debug, Clone)]
pub struct Model {
    architecture: Architecture,
    config: HiNetConfig,
    input_dim: usize,
    params: ParamStore,
    layout: Layout,
}

pub(crate) fn treatment_column(t: &[u8]) -> Tensor {
    Tensor::column(t.iter().map(|&v| f64::from(v)).collect())
}

impl Model {
    pub fn new(architecture: Architecture, config: HiNetConfig, input_dim: usize) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 || input_dim > MAX_INPUT_DIM {
            return Err(Error::param(
                "d",
                format!("input dimension must be in 1..={MAX_INPUT_DIM}"),
            ));
        }
        let h = config.hidden_size;
        let d = input_dim;
        let mut rng = seed::rng(config.seed, "model/init", 0);
        let mut params = ParamStore::new();
        let layout = match architecture {
            Architecture::Hinet | Architecture::Gin => {
                let encoder = Mlp::new(&mut params, "encoder", &[d, h, h], true, &mut rng);
                let eps_y = params.push("gin_y.eps", Tensor::scalar(0.0));
                let gin_y = Mlp::new(&mut params, "gin_y.mlp", &[h + 1, h, h], true, &mut rng);
                let p_y = Mlp::new(
                    &mut params,
                    "p_y",
                    &[2 * h + 1, h, h, h, 1],
                    false,
                    &mut rng,
                );
                let treatment = (architecture == Architecture::Hinet).then(|| {
                    let gin_t = config.use_gin_t.then(|| {
                        let eps = params.push("gin_t.eps", Tensor::scalar(0.0));
                        (
                            eps,
                            Mlp::new(&mut params, "gin_t.mlp", &[h, h, h], true, &mut rng),
                        )
                    });
                    let d_in = if config.use_gin_t { 2 * h } else { h };
                    let d_t = Mlp::new(&mut params, "d_t", &[d_in, h, h, h, 1], false, &mut rng);
                    TreatmentBranch { gin_t, d_t }
                });
                Layout::Hinet {
                    encoder,
                    eps_y,
                    gin_y,
                    p_y,
                    treatment,
                }
            }
            Architecture::NoNetwork => {
                let shared = Mlp::new(&mut params, "shared", &[d, h, h], true, &mut rng);
                let head0 = Mlp::new(&mut params, "head0", &[h, h, 1], false, &mut rng);
                let head1 = Mlp::new(&mut params, "head1", &[h, h, 1], false, &mut rng);
                Layout::NoNetwork {
                    shared,
                    heads: [head0, head1],
                }
            }
        };
        Ok(Self {
            architecture,
            config,
            input_dim,
            params,
            layout,
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn config(&self) -> &HiNetConfig {
        &self.config
    }

    pub(crate) fn set_epochs(&mut self, epochs: usize) {
        self.config.epochs = epochs;
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn has_treatment_head(&self) -> bool {
        matches!(
            self.layout,
            Layout::Hinet {
                treatment: Some(_),
                ..
            }
        )
    }

    fn check_inputs(&self, graph: &UndirectedGraph, x: &Tensor, t: &[u8]) -> Result<()> {
        let n = graph.node_count();
        if x.rows() != n || t.len() != n {
            return Err(Error::shape(
                "forward",
                format!(
                    "graph has {n} nodes, x has {} rows, t has {} entries",
                    x.rows(),
                    t.len()
                ),
            ));
        }
        if x.cols() != self.input_dim {
            return Err(Error::shape(
                "forward",
                format!(
                    "model expects {} features, got {}",
                    self.input_dim,
                    x.cols()
                ),
            ));
        }
        if t.iter().any(|&v| v > 1) {
            return Err(Error::InvalidInput("treatments must be 0 or 1".into()));
        }
        Ok(())
    }

    pub(crate) fn record<'g>(
        &self,
        tape: &mut Tape<'g>,
        handles: &[Var],
        graph: &'g UndirectedGraph,
        x: Var,
        t: Var,
        branches: Branches,
        ctx: &mut ForwardCtx<'_>,
    ) -> Result<Recorded> {
        let reverse = |tape: &mut Tape<'g>, v: Var| {
            if branches.reverse_gradients {
                tape.gradient_reversal(v)
            } else {
                v
            }
        };
        match &self.layout {
            Layout::Hinet {
                encoder,
                eps_y,
                gin_y,
                p_y,
                treatment,
            } => {
                let phi = encoder.forward(tape, handles, x, ctx)?;
                let c = tape.concat_cols(&[phi, t])?;
                let agg = tape.gin_aggregate(graph, c, handles[*eps_y])?;
                let g = gin_y.forward(tape, handles, agg, ctx)?;
                let head_in = tape.concat_cols(&[g, phi, t])?;
                let y_hat = p_y.forward(tape, handles, head_in, ctx)?;

                let t_logits = match treatment.as_ref().filter(|_| branches.treatment) {
                    Some(TreatmentBranch { gin_t, d_t }) => {
                        let d_in = match gin_t {
                            Some((eps_t, mlp)) => {
                                let r = reverse(tape, phi);
                                let agg_t = tape.gin_aggregate(graph, r, handles[*eps_t])?;
                                let gt = mlp.forward(tape, handles, agg_t, ctx)?;
                                let own = reverse(tape, phi);
                                tape.concat_cols(&[gt, own])?
                            }
                            None => reverse(tape, phi),
                        };
                        Some(d_t.forward(tape, handles, d_in, ctx)?)
                    }
                    None => None,
                };
                Ok(Recorded {
                    y_hat,
                    t_logits,
                    representation: Some(phi),
                })
            }
            Layout::NoNetwork { shared, heads } => {
                let phi = shared.forward(tape, handles, x, ctx)?;
                let y0 = heads[0].forward(tape, handles, phi, ctx)?;
                let y1 = heads[1].forward(tape, handles, phi, ctx)?;
                let arm1 = tape.value(t).clone();
                let arm0 = arm1.map(|v| 1.0 - v);
                let a = tape.mul_const(y0, arm0)?;
                let b = tape.mul_const(y1, arm1)?;
                let y_hat = tape.add(a, b)?;
                Ok(Recorded {
                    y_hat,
                    t_logits: None,
                    representation: Some(phi),
                })
            }
        }
    }

    /// Full forward pass, including the treatment head when present. Train
    /// mode applies dropout; eval mode is a pure function of the inputs.
    pub fn forward(
        &self,
        graph: &UndirectedGraph,
        x: &Tensor,
        t: &[u8],
        mode: Mode,
    ) -> Result<ForwardOutput> {
        self.check_inputs(graph, x, t)?;
        let mut rng: Option<ChaCha8Rng> = match mode {
            Mode::Train { seed } => Some(seed::rng(seed, "model/dropout", 0)),
            Mode::Eval => None,
        };
        let mut ctx = ForwardCtx {
            dropout: self.config.dropout,
            rng: rng.as_mut(),
        };
        let mut tape = Tape::new();
        let handles = self.params.register(&mut tape);
        let xv = tape.constant(x.clone());
        let tv = tape.constant(treatment_column(t));
        let branches = Branches {
            treatment: true,
            reverse_gradients: true,
        };
        let out = self.record(&mut tape, &handles, graph, xv, tv, branches, &mut ctx)?;
        Ok(ForwardOutput {
            y_hat: tape.value(out.y_hat).data().to_vec(),
            t_logits: out.t_logits.map(|v| tape.value(v).data().to_vec()),
        })
    }

    /// Eval-mode outcome predictions under treatment vector `t`.
    pub fn predict(&self, graph: &UndirectedGraph, x: &Tensor, t: &[u8]) -> Result<Vec<f64>> {
        self.check_inputs(graph, x, t)?;
        let mut tape = Tape::new();
        let handles = self.params.register(&mut tape);
        let xv = tape.constant(x.clone());
        let tv = tape.constant(treatment_column(t));
        let branches = Branches {
            treatment: false,
            reverse_gradients: true,
        };
        let out = self.record(
            &mut tape,
            &handles,
            graph,
            xv,
            tv,
            branches,
            &mut ForwardCtx::eval(),
        )?;
        Ok(tape.value(out.y_hat).data().to_vec())
    }

    /// Eval-mode node representations (`φ`), for architectures that have one.
    pub fn representation(
        &self,
        graph: &UndirectedGraph,
        x: &Tensor,
        t: &[u8],
    ) -> Result<Option<Tensor>> {
        self.check_inputs(graph, x, t)?;
        let mut tape = Tape::new();
        let handles = self.params.register(&mut tape);
        let xv = tape.constant(x.clone());
        let tv = tape.constant(treatment_column(t));
        let branches = Branches {
            treatment: false,
            reverse_gradients: true,
        };
        let out = self.record(
            &mut tape,
            &handles,
            graph,
            xv,
            tv,
            branches,
            &mut ForwardCtx::eval(),
        )?;
        Ok(out.representation.map(|v| tape.value(v).clone()))
    }

    /// Eval-mode loss and its gradient with respect to every parameter, in
    /// parameter order (zeros where a parameter does not influence the loss).
    pub fn loss_and_gradients(
        &self,
        graph: &UndirectedGraph,
        x: &Tensor,
        t: &[u8],
        y: &[f64],
        spec: &LossSpec,
    ) -> Result<(f64, Vec<Tensor>)> {
        self.check_inputs(graph, x, t)?;
        if y.len() != t.len() {
            return Err(Error::shape(
                "loss",
                "outcome length differs from node count",
            ));
        }
        let mut tape = Tape::new();
        let handles = self.params.register(&mut tape);
        let xv = tape.constant(x.clone());
        let t_col = treatment_column(t);
        let tv = tape.constant(t_col.clone());
        let branches = Branches {
            treatment: spec.treatment_term && self.has_treatment_head(),
            reverse_gradients: spec.reverse_gradients,
        };
        let out = self.record(
            &mut tape,
            &handles,
            graph,
            xv,
            tv,
            branches,
            &mut ForwardCtx::eval(),
        )?;
        let loss = build_loss(&mut tape, &out, y, t_col, spec)?;
        let value = tape.value(loss).item();
        let mut grads = tape.backward(loss)?;
        Ok((value, collect(&self.params, &handles, &mut grads)))
    }

    /// Eval-mode loss only.
    pub fn loss(
        &self,
        graph: &UndirectedGraph,
        x: &Tensor,
        t: &[u8],
        y: &[f64],
        spec: &LossSpec,
    ) -> Result<f64> {
        Ok(self.loss_and_gradients(graph, x, t, y, spec)?.0)
    }
}

pub(crate) fn build_loss(
    tape: &mut Tape<'_>,
    out: &Recorded,
    y: &[f64],
    t_col: Tensor,
    spec: &LossSpec,
) -> Result<Var> {
    let mut terms = Vec::new();
    if spec.outcome_term {
        terms.push(tape.mse_loss(out.y_hat, Tensor::column(y.to_vec()))?);
    }
    if spec.treatment_term {
        if let Some(logits) = out.t_logits {
            let bce = tape.bce_with_logits_loss(logits, t_col)?;
            terms.push(tape.scale(bce, spec.alpha));
        }
    }
    let mut iter = terms.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::InvalidInput("loss has no terms".into()))?;
    iter.try_fold(first, |acc, v| tape.add(acc, v))
}

fn collect(params: &ParamStore, handles: &[Var], grads: &mut Gradients) -> Vec<Tensor> {
    params
        .iter()
        .zip(handles)
        .map(|(p, &h)| {
            grads
                .take(h)
                .unwrap_or_else(|| Tensor::zeros(p.value.rows(), p.value.cols()))
        })
        .collect()
}

/// `L_y + α L_t` evaluated on plain values.
pub fn combined_loss(
    y_hat: &[f64],
    y: &[f64],
    t_logits: &[f64],
    t: &[u8],
    alpha: f64,
) -> Result<f64> {
    let mut tape = Tape::new();
    let pred = tape.constant(Tensor::column(y_hat.to_vec()));
    let logits = tape.constant(Tensor::column(t_logits.to_vec()));
    let out = Recorded {
        y_hat: pred,
        t_logits: Some(logits),
        representation: None,
    };
    let loss = build_loss(
        &mut tape,
        &out,
        y,
        treatment_column(t),
        &LossSpec::combined(alpha),
    )?;
    Ok(tape.value(loss).item())
}
