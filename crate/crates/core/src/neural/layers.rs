//! Dense layers and LSTM cells with hand-written backward passes.
//!
//! Sequences are stored as one `Vec<f64>` per time step.

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_at_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `act(W x + b)` with `W` stored `out × in`.
#[derive(Debug, Clone, Copy)]
pub struct Dense<'a> {
    pub w: &'a [f64],
    pub b: &'a [f64],
    pub input: usize,
    pub output: usize,
    pub act: Activation,
}

impl Dense<'_> {
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.output)
            .map(|r| self.act.apply(self.b[r] + dot(&self.w[r * self.input..(r + 1) * self.input], x)))
            .collect()
    }

    /// Accumulates parameter gradients into `dw`/`db` and returns `dL/dx`.
    /// `y` is this layer's output for `x`, `dy` the upstream gradient.
    pub fn backward(&self, x: &[f64], y: &[f64], dy: &[f64], dw: &mut [f64], db: &mut [f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.input];
        for r in 0..self.output {
            let dz = dy[r] * self.act.derivative_at_output(y[r]);
            if dz == 0.0 {
                continue;
            }
            db[r] += dz;
            let row = r * self.input..(r + 1) * self.input;
            axpy(dz, x, &mut dw[row.clone()]);
            axpy(dz, &self.w[row], &mut dx);
        }
        dx
    }
}

/// LSTM cell parameters. Gate rows are stacked in the order input, forget,
/// output, candidate: `wx` is `4H × I`, `wh` is `4H × H`, `b` is `4H`.
#[derive(Debug, Clone, Copy)]
pub struct LstmCell<'a> {
    pub wx: &'a [f64],
    pub wh: &'a [f64],
    pub b: &'a [f64],
    pub input: usize,
    pub hidden: usize,
}

/// Everything the backward pass needs from one step.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    /// `tanh(c)`
    pub tc: Vec<f64>,
    pub h: Vec<f64>,
}

/// Mutable gradient buffers matching an [`LstmCell`].
pub struct LstmGrads<'a> {
    pub wx: &'a mut [f64],
    pub wh: &'a mut [f64],
    pub b: &'a mut [f64],
}

impl LstmCell<'_> {
    /// `i, f, o = σ(·)`, `g = tanh(·)`, `c = f⊙c_prev + i⊙g`, `h = o⊙tanh(c)`.
    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> LstmStep {
        let (n_in, n_h) = (self.input, self.hidden);
        let z: Vec<f64> = (0..4 * n_h)
            .map(|r| {
                self.b[r] + dot(&self.wx[r * n_in..(r + 1) * n_in], x) + dot(&self.wh[r * n_h..(r + 1) * n_h], h_prev)
            })
            .collect();
        let i: Vec<f64> = z[..n_h].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[n_h..2 * n_h].iter().map(|&v| sigmoid(v)).collect();
        let o: Vec<f64> = z[2 * n_h..3 * n_h].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[3 * n_h..].iter().map(|v| v.tanh()).collect();
        let c: Vec<f64> = (0..n_h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tc: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h = (0..n_h).map(|k| o[k] * tc[k]).collect();
        LstmStep { i, f, o, g, c, tc, h }
    }

    /// Runs over `xs` from zero states, right to left when `reverse`. The
    /// returned steps are indexed by position in `xs`.
    pub fn run(&self, xs: &[Vec<f64>], reverse: bool) -> Vec<LstmStep> {
        let n = xs.len();
        let mut steps: Vec<Option<LstmStep>> = vec![None; n];
        let zero = vec![0.0; self.hidden];
        let mut prev: Option<usize> = None;
        for k in 0..n {
            let t = if reverse { n - 1 - k } else { k };
            let (h, c) = match prev {
                Some(p) => {
                    let s = steps[p].as_ref().expect("previous step computed");
                    (s.h.clone(), s.c.clone())
                }
                None => (zero.clone(), zero.clone()),
            };
            steps[t] = Some(self.step(&xs[t], &h, &c));
            prev = Some(t);
        }
        steps.into_iter().map(|s| s.expect("every step computed")).collect()
    }

    /// Backpropagation through time. `dh[t]` is `dL/dh_t` from above; adds
    /// parameter gradients into `grads` and input gradients into `dxs`.
    pub fn backward(&self, xs: &[Vec<f64>], steps: &[LstmStep], dh: &[Vec<f64>], reverse: bool, grads: &mut LstmGrads<'_>, dxs: &mut [Vec<f64>]) {
        let (n_in, n_h) = (self.input, self.hidden);
        let n = xs.len();
        let zero = vec![0.0; n_h];
        let mut dh_next = vec![0.0; n_h];
        let mut dc_next = vec![0.0; n_h];
        let mut dz = vec![0.0; 4 * n_h];
        // walk the processing order backwards
        for k in (0..n).rev() {
            let t = if reverse { n - 1 - k } else { k };
            let prev = if k == 0 {
                None
            } else if reverse {
                Some(t + 1)
            } else {
                Some(t - 1)
            };
            let (h_prev, c_prev) = match prev {
                Some(p) => (&steps[p].h, &steps[p].c),
                None => (&zero, &zero),
            };
            let s = &steps[t];
            for q in 0..n_h {
                let dhq = dh[t][q] + dh_next[q];
                let dc = dc_next[q] + dhq * s.o[q] * (1.0 - s.tc[q] * s.tc[q]);
                dz[q] = dc * s.g[q] * s.i[q] * (1.0 - s.i[q]);
                dz[n_h + q] = dc * c_prev[q] * s.f[q] * (1.0 - s.f[q]);
                dz[2 * n_h + q] = dhq * s.tc[q] * s.o[q] * (1.0 - s.o[q]);
                dz[3 * n_h + q] = dc * s.i[q] * (1.0 - s.g[q] * s.g[q]);
                dc_next[q] = dc * s.f[q];
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..4 * n_h {
                let d = dz[r];
                if d == 0.0 {
                    continue;
                }
                grads.b[r] += d;
                let xr = r * n_in..(r + 1) * n_in;
                let hr = r * n_h..(r + 1) * n_h;
                axpy(d, &xs[t], &mut grads.wx[xr.clone()]);
                axpy(d, h_prev, &mut grads.wh[hr.clone()]);
                axpy(d, &self.wx[xr], &mut dxs[t]);
                axpy(d, &self.wh[hr], &mut dh_next);
            }
        }
    }
}

/// Bidirectional run: per step, forward hidden state followed by backward
/// hidden state.
pub fn blstm_forward(fwd: &LstmCell<'_>, bwd: &LstmCell<'_>, seq: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NnError> {
    if seq.is_empty() {
        return Err(NnError::EmptySequence);
    }
    let f = fwd.run(seq, false);
    let b = bwd.run(seq, true);
    Ok(f.into_iter().zip(b).map(|(f, b)| [f.h, b.h].concat()).collect())
}

/// Single LSTM step from explicit states.
pub fn lstm_step(cell: &LstmCell<'_>, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let s = cell.step(x, h_prev, c_prev);
    (s.h, s.c)
}
