//! One direction of an LSTM layer with hand-written backpropagation.
//! Gate order in the stacked weight matrices is input, forget, cell, output.

use rand::Rng;

use crate::tagger::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_ih: Matrix,
    pub w_hh: Matrix,
    pub bias: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w_ih: Matrix::zeros(4 * hidden, input),
            w_hh: Matrix::zeros(4 * hidden, hidden),
            bias: vec![0.0; 4 * hidden],
        }
    }

    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        LstmParams {
            w_ih: Matrix::uniform(4 * hidden, input, bound, rng),
            w_hh: Matrix::uniform(4 * hidden, hidden, bound, rng),
            bias: (0..4 * hidden).map(|_| rng.gen_range(-bound..=bound)).collect(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.cols()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct Step {
    input: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Activations of one direction over a sequence, kept for the backward pass.
/// `outputs[t]` is the hidden state at original position `t`.
pub struct LstmTrace {
    reverse: bool,
    steps: Vec<Step>,
    pub outputs: Vec<Vec<f64>>,
}

pub fn forward(params: &LstmParams, inputs: &[Vec<f64>], reverse: bool) -> LstmTrace {
    let h = params.hidden();
    let n = inputs.len();
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    let mut steps = Vec::with_capacity(n);
    let mut outputs = vec![Vec::new(); n];
    let order: Vec<usize> = if reverse {
        (0..n).rev().collect()
    } else {
        (0..n).collect()
    };
    for &t in &order {
        let mut z = params.bias.clone();
        params.w_ih.mul_vec_add(&inputs[t], &mut z);
        params.w_hh.mul_vec_add(&h_prev, &mut z);
        let i: Vec<f64> = z[..h].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[2 * h..3 * h].iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * h..].iter().map(|&v| sigmoid(v)).collect();
        let c: Vec<f64> = (0..h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h_new: Vec<f64> = (0..h).map(|k| o[k] * tanh_c[k]).collect();
        outputs[t] = h_new.clone();
        steps.push(Step {
            input: inputs[t].clone(),
            h_prev: std::mem::replace(&mut h_prev, h_new),
            c_prev: std::mem::replace(&mut c_prev, c),
            i,
            f,
            g,
            o,
            tanh_c,
        });
    }
    LstmTrace {
        reverse,
        steps,
        outputs,
    }
}

/// Accumulates parameter gradients into `grads` given the loss gradient
/// with respect to every output, and returns the gradient for every input.
pub fn backward(
    params: &LstmParams,
    trace: &LstmTrace,
    d_outputs: &[Vec<f64>],
    grads: &mut LstmParams,
) -> Vec<Vec<f64>> {
    let h = params.hidden();
    let n = trace.steps.len();
    let mut d_inputs = vec![vec![0.0; params.w_ih.cols()]; n];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    for (k, step) in trace.steps.iter().enumerate().rev() {
        let t = if trace.reverse { n - 1 - k } else { k };
        let mut dz = vec![0.0; 4 * h];
        for u in 0..h {
            let dh = d_outputs[t][u] + dh_next[u];
            let d_o = dh * step.tanh_c[u];
            let dc = dh * step.o[u] * (1.0 - step.tanh_c[u] * step.tanh_c[u]) + dc_next[u];
            let d_i = dc * step.g[u];
            let d_g = dc * step.i[u];
            let d_f = dc * step.c_prev[u];
            dc_next[u] = dc * step.f[u];
            dz[u] = d_i * step.i[u] * (1.0 - step.i[u]);
            dz[h + u] = d_f * step.f[u] * (1.0 - step.f[u]);
            dz[2 * h + u] = d_g * (1.0 - step.g[u] * step.g[u]);
            dz[3 * h + u] = d_o * step.o[u] * (1.0 - step.o[u]);
        }
        grads.w_ih.add_outer(&dz, &step.input);
        grads.w_hh.add_outer(&dz, &step.h_prev);
        for (b, d) in grads.bias.iter_mut().zip(&dz) {
            *b += d;
        }
        params.w_ih.mul_vec_t_add(&dz, &mut d_inputs[t]);
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        params.w_hh.mul_vec_t_add(&dz, &mut dh_next);
    }
    d_inputs
}
