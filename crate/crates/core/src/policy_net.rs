//! Bidirectional LSTM frame-selection policy.
//!
//! Each direction runs a standard four-gate LSTM (gate order `i, f, g, o`, no
//! peepholes) over the feature sequence. The two hidden states are
//! concatenated and mapped to a selection probability through a linear layer
//! and a sigmoid. Gradients are derived by hand; see [`backward_logits`].

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{init_params, Init, ParamKind, ParamSet, ParamSpec};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside logs.
pub const PROB_CLAMP: f64 = 1e-7;

/// Default uniform initialization bound for weight matrices.
pub const INIT_BOUND: f64 = 0.05;

const FWD_W_IN: usize = 0;
const FWD_W_HID: usize = 1;
const FWD_BIAS: usize = 2;
const BWD_W_IN: usize = 3;
const BWD_W_HID: usize = 4;
const BWD_BIAS: usize = 5;
const OUT_W: usize = 6;
const OUT_BIAS: usize = 7;

const TENSOR_NAMES: [&str; 8] = [
    "fwd.w_input",
    "fwd.w_hidden",
    "fwd.bias",
    "bwd.w_input",
    "bwd.w_hidden",
    "bwd.bias",
    "out.weight",
    "out.bias",
];

/// All trainable weights of the policy head.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    input_dim: usize,
    hidden: usize,
    pub set: ParamSet,
}

impl PolicyParams {
    pub fn param_specs(input_dim: usize, hidden: usize) -> Vec<ParamSpec> {
        let gates = 4 * hidden;
        let shapes = [
            (
                ParamKind::Weight,
                gates,
                input_dim,
                Init::Uniform(INIT_BOUND),
            ),
            (ParamKind::Weight, gates, hidden, Init::Uniform(INIT_BOUND)),
            (ParamKind::Bias, 1, gates, Init::LstmBias { hidden }),
            (
                ParamKind::Weight,
                gates,
                input_dim,
                Init::Uniform(INIT_BOUND),
            ),
            (ParamKind::Weight, gates, hidden, Init::Uniform(INIT_BOUND)),
            (ParamKind::Bias, 1, gates, Init::LstmBias { hidden }),
            (ParamKind::Weight, 1, 2 * hidden, Init::Uniform(INIT_BOUND)),
            (ParamKind::Bias, 1, 1, Init::Zeros),
        ];
        TENSOR_NAMES
            .iter()
            .zip(shapes)
            .map(|(name, (kind, r, c, init))| ParamSpec::new(*name, kind, r, c, init))
            .collect()
    }

    pub fn new(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let set = init_params(&Self::param_specs(input_dim, hidden), seed);
        PolicyParams {
            input_dim,
            hidden,
            set,
        }
    }

    /// All tensors zero, including biases.
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let mut p = Self::new(input_dim, hidden, 0);
        p.set.tensors.iter_mut().for_each(|t| t.values.fill(0.0));
        p
    }

    /// Wraps a loaded parameter set after checking names and shapes.
    pub fn from_set(set: ParamSet) -> Result<Self> {
        if set.tensors.len() != TENSOR_NAMES.len() {
            return Err(Error::format(
                "policy checkpoint",
                format!("expected 8 tensors, found {}", set.tensors.len()),
            ));
        }
        let out = &set.tensors[OUT_W].values;
        if out.nrows() != 1 || !out.ncols().is_multiple_of(2) || out.ncols() == 0 {
            return Err(Error::format(
                "policy checkpoint",
                "output weight must be 1 x 2H",
            ));
        }
        let hidden = out.ncols() / 2;
        let input_dim = set.tensors[FWD_W_IN].values.ncols();
        for (t, spec) in set.tensors.iter().zip(Self::param_specs(input_dim, hidden)) {
            if t.name != spec.name
                || t.values.dim() != (spec.rows, spec.cols)
                || t.kind != spec.kind
            {
                return Err(Error::format(
                    "policy checkpoint",
                    format!(
                        "tensor {} has shape {:?}, expected {} {:?}",
                        t.name,
                        t.values.dim(),
                        spec.name,
                        (spec.rows, spec.cols)
                    ),
                ));
            }
        }
        Ok(PolicyParams {
            input_dim,
            hidden,
            set,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Copies the forward-direction LSTM weights into the backward direction.
    pub fn tie_directions(&mut self) {
        for (src, dst) in [
            (FWD_W_IN, BWD_W_IN),
            (FWD_W_HID, BWD_W_HID),
            (FWD_BIAS, BWD_BIAS),
        ] {
            self.set.tensors[dst].values = self.set.tensors[src].values.clone();
        }
    }
}

/// Cached activations of one LSTM direction, indexed by time step.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionTrace {
    /// Post-activation gates `[i, f, g, o]`, `T × 4H`.
    pub gates: Array2<f64>,
    pub cells: Array2<f64>,
    pub hidden: Array2<f64>,
    reverse: bool,
}

/// Everything a backward pass needs from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub inputs: Array2<f64>,
    pub forward: DirectionTrace,
    pub backward: DirectionTrace,
    /// `[h_fwd ; h_bwd]` per step, `T × 2H`.
    pub hidden: Array2<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn run_direction(
    w_in: &Array2<f64>,
    w_hid: &Array2<f64>,
    bias: ArrayView1<f64>,
    x: ArrayView2<f64>,
    reverse: bool,
) -> DirectionTrace {
    let steps = x.nrows();
    let hidden = w_hid.ncols();
    let projected = x.dot(&w_in.t()) + &bias;
    let mut gates = Array2::zeros((steps, 4 * hidden));
    let mut cells = Array2::zeros((steps, hidden));
    let mut hs = Array2::zeros((steps, hidden));
    let mut h_prev = Array1::<f64>::zeros(hidden);
    let mut c_prev = Array1::<f64>::zeros(hidden);
    for k in 0..steps {
        let t = if reverse { steps - 1 - k } else { k };
        let z = &projected.row(t) + &w_hid.dot(&h_prev);
        let mut g_row = gates.row_mut(t);
        for j in 0..hidden {
            let i_g = sigmoid(z[j]);
            let f_g = sigmoid(z[hidden + j]);
            let c_g = z[2 * hidden + j].tanh();
            let o_g = sigmoid(z[3 * hidden + j]);
            g_row[j] = i_g;
            g_row[hidden + j] = f_g;
            g_row[2 * hidden + j] = c_g;
            g_row[3 * hidden + j] = o_g;
            let c = f_g * c_prev[j] + i_g * c_g;
            c_prev[j] = c;
            h_prev[j] = o_g * c.tanh();
        }
        cells.row_mut(t).assign(&c_prev);
        hs.row_mut(t).assign(&h_prev);
    }
    DirectionTrace {
        gates,
        cells,
        hidden: hs,
        reverse,
    }
}

/// Runs both LSTM directions and the sigmoid head over `features` (`T × D`).
pub fn forward(params: &PolicyParams, features: ArrayView2<f64>) -> Result<ForwardTrace> {
    if features.nrows() == 0 {
        return Err(Error::invariant("features", "sequence is empty"));
    }
    if features.ncols() != params.input_dim {
        return Err(Error::invariant(
            "features",
            format!(
                "width {} does not match policy input {}",
                features.ncols(),
                params.input_dim
            ),
        ));
    }
    let ts = &params.set.tensors;
    let fwd = run_direction(
        &ts[FWD_W_IN].values,
        &ts[FWD_W_HID].values,
        ts[FWD_BIAS].values.row(0),
        features,
        false,
    );
    let bwd = run_direction(
        &ts[BWD_W_IN].values,
        &ts[BWD_W_HID].values,
        ts[BWD_BIAS].values.row(0),
        features,
        true,
    );
    let hidden = ndarray::concatenate(Axis(1), &[fwd.hidden.view(), bwd.hidden.view()])
        .expect("directions share the step count");
    let out_bias = ts[OUT_BIAS].values[[0, 0]];
    let logits: Vec<f64> = hidden
        .dot(&ts[OUT_W].values.row(0))
        .iter()
        .map(|z| z + out_bias)
        .collect();
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite {
            name: "policy logits".into(),
        });
    }
    let probs = logits.iter().map(|&z| sigmoid(z)).collect();
    Ok(ForwardTrace {
        inputs: features.to_owned(),
        forward: fwd,
        backward: bwd,
        hidden,
        logits,
        probs,
    })
}

/// Independent Bernoulli draws `a_t ~ Bernoulli(p_t)` from a caller-owned generator.
pub fn sample_actions_with<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Vec<bool> {
    probs.iter().map(|&p| rng.random::<f64>() < p).collect()
}

pub fn sample_actions(trace: &ForwardTrace, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_actions_with(&trace.probs, &mut rng)
}

/// `Σ_t a_t log p_t + (1 - a_t) log(1 - p_t)` with clamped probabilities.
pub fn log_prob_of(trace: &ForwardTrace, actions: &[bool]) -> f64 {
    log_prob_from_probs(&trace.probs, actions)
}

pub fn log_prob_from_probs(probs: &[f64], actions: &[bool]) -> f64 {
    probs
        .iter()
        .zip(actions)
        .map(|(&p, &a)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if a {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        })
        .sum()
}

/// Extra gradient terms folded into a backward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegularizerGrads {
    /// Gradient of any probability-level regularizer with respect to the logits.
    pub dlogits: Option<Vec<f64>>,
    /// Coefficient `c` of a `c · Σ w²` penalty on weight matrices.
    pub weight_scale: f64,
}

/// Accumulates into `params.set` the gradient of
/// `Σ_n w_n log π(a^n) + (regularizers)` for the given weighted episodes.
///
/// The per-step log-likelihood gradient with respect to the logit is `a_t - p_t`.
pub fn backward_reinforce(
    params: &mut PolicyParams,
    trace: &ForwardTrace,
    episodes: &[(&[bool], f64)],
    reg: &RegularizerGrads,
) -> Result<()> {
    let steps = trace.len();
    let mut dlogits = reg.dlogits.clone().unwrap_or_else(|| vec![0.0; steps]);
    if dlogits.len() != steps {
        return Err(Error::invariant(
            "regularizer gradient",
            "length differs from trace",
        ));
    }
    for (actions, weight) in episodes {
        if actions.len() != steps {
            return Err(Error::invariant("actions", "length differs from trace"));
        }
        for ((d, &a), &p) in dlogits.iter_mut().zip(actions.iter()).zip(&trace.probs) {
            *d += weight * (f64::from(u8::from(a)) - p);
        }
    }
    backward_logits(params, trace, &dlogits)?;
    if reg.weight_scale != 0.0 {
        for t in params
            .set
            .tensors
            .iter_mut()
            .filter(|t| t.kind == ParamKind::Weight)
        {
            t.grad.scaled_add(2.0 * reg.weight_scale, &t.values);
        }
    }
    Ok(())
}

/// Backpropagates `∂L/∂z_t` (one value per step) through the head and both
/// LSTM directions, adding the result to the parameter gradients.
pub fn backward_logits(
    params: &mut PolicyParams,
    trace: &ForwardTrace,
    dlogits: &[f64],
) -> Result<()> {
    let steps = trace.len();
    let hidden = params.hidden;
    if dlogits.len() != steps {
        return Err(Error::invariant(
            "logit gradient",
            "length differs from trace",
        ));
    }
    let dz = ArrayView1::from(dlogits);

    let ts = &mut params.set.tensors;
    // out.weight grad: Σ_t dz_t h_t
    let d_out = trace.hidden.t().dot(&dz);
    ts[OUT_W].grad.row_mut(0).scaled_add(1.0, &d_out);
    ts[OUT_BIAS].grad[[0, 0]] += dz.sum();

    let w_out = ts[OUT_W].values.row(0).to_owned();
    // ∂L/∂h for each direction, T × H
    let dh_all = dz.insert_axis(Axis(1)).dot(&w_out.insert_axis(Axis(0)));
    let dh_fwd = dh_all.slice(s![.., ..hidden]);
    let dh_bwd = dh_all.slice(s![.., hidden..]);

    let inputs = trace.inputs.view();
    for (dir, dh, w_in, w_hid, bias) in [
        (&trace.forward, dh_fwd, FWD_W_IN, FWD_W_HID, FWD_BIAS),
        (&trace.backward, dh_bwd, BWD_W_IN, BWD_W_HID, BWD_BIAS),
    ] {
        let (dgates, h_prev) = direction_bptt(dir, dh, &ts[w_hid].values);
        ts[w_in].grad += &dgates.t().dot(&inputs);
        ts[w_hid].grad += &dgates.t().dot(&h_prev);
        ts[bias]
            .grad
            .row_mut(0)
            .scaled_add(1.0, &dgates.sum_axis(Axis(0)));
    }
    if ts.iter().any(|t| t.grad.iter().any(|g| !g.is_finite())) {
        return Err(Error::NonFinite {
            name: "policy gradient".into(),
        });
    }
    Ok(())
}

/// Returns the pre-activation gate gradients (`T × 4H`) and the matrix of
/// previous hidden states seen at each step (`T × H`).
fn direction_bptt(
    dir: &DirectionTrace,
    dh_out: ArrayView2<f64>,
    w_hid: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let steps = dir.hidden.nrows();
    let hidden = dir.hidden.ncols();
    let order: Vec<usize> = if dir.reverse {
        (0..steps).rev().collect()
    } else {
        (0..steps).collect()
    };
    let mut dgates = Array2::zeros((steps, 4 * hidden));
    let mut h_prev = Array2::zeros((steps, hidden));
    for k in 1..steps {
        h_prev
            .row_mut(order[k])
            .assign(&dir.hidden.row(order[k - 1]));
    }
    let mut dh_next = Array1::<f64>::zeros(hidden);
    let mut dc_next = Array1::<f64>::zeros(hidden);
    for k in (0..steps).rev() {
        let t = order[k];
        let g = dir.gates.row(t);
        let mut dz = dgates.row_mut(t);
        for j in 0..hidden {
            let (i_g, f_g, c_g, o_g) = (g[j], g[hidden + j], g[2 * hidden + j], g[3 * hidden + j]);
            let c = dir.cells[[t, j]];
            let c_prev = if k > 0 {
                dir.cells[[order[k - 1], j]]
            } else {
                0.0
            };
            let tanh_c = c.tanh();
            let dh = dh_out[[t, j]] + dh_next[j];
            let d_o = dh * tanh_c;
            let dc = dh * o_g * (1.0 - tanh_c * tanh_c) + dc_next[j];
            dz[j] = dc * c_g * i_g * (1.0 - i_g);
            dz[hidden + j] = dc * c_prev * f_g * (1.0 - f_g);
            dz[2 * hidden + j] = dc * i_g * (1.0 - c_g * c_g);
            dz[3 * hidden + j] = d_o * o_g * (1.0 - o_g);
            dc_next[j] = dc * f_g;
        }
        dh_next = w_hid.t().dot(&dz);
    }
    (dgates, h_prev)
}
