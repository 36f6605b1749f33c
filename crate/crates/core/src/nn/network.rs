use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    DenseRelu,
    DenseLinear,
    LstmTanh,
    SoftmaxHead,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub width: usize,
}

impl LayerSpec {
    pub fn new(kind: LayerKind, width: usize) -> Self {
        Self { kind, width }
    }
}

/// Layer stack of a feed-forward or single-LSTM network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = Self { input_dim, layers };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return config("network input dimension must be positive");
        }
        if self.layers.is_empty() {
            return config("network needs at least one layer");
        }
        if self.layers.iter().any(|l| l.width == 0) {
            return config("layer widths must be positive");
        }
        let recurrent = self
            .layers
            .iter()
            .filter(|l| l.kind == LayerKind::LstmTanh)
            .count();
        if recurrent > 1 {
            return config("at most one recurrent layer is supported");
        }
        let last = self.layers.len() - 1;
        if self.layers[..last]
            .iter()
            .any(|l| l.kind == LayerKind::SoftmaxHead)
        {
            return config("softmax head must be the terminal layer");
        }
        Ok(())
    }

    pub fn input_dim_of(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim
        } else {
            self.layers[layer - 1].width
        }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.width)
    }

    pub fn recurrent_layer(&self) -> Option<usize> {
        self.layers.iter().position(|l| l.kind == LayerKind::LstmTanh)
    }

    pub fn is_recurrent(&self) -> bool {
        self.recurrent_layer().is_some()
    }

    pub fn param_count(&self) -> usize {
        (0..self.layers.len())
            .map(|i| {
                let n_in = self.input_dim_of(i);
                let w = self.layers[i].width;
                match self.layers[i].kind {
                    LayerKind::LstmTanh => 4 * w * (n_in + w + 1),
                    _ => w * (n_in + 1),
                }
            })
            .sum()
    }
}

/// Weights of one layer. Dense weights are `width x input` row-major; LSTM
/// weights stack the input, forget, cell and output gates (`4*width` rows).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub recurrent: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub layers: Vec<LayerParams>,
}

impl ParamSet {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let layers = spec
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let n_in = spec.input_dim_of(i);
                match l.kind {
                    LayerKind::LstmTanh => LayerParams {
                        weights: vec![0.0; 4 * l.width * n_in],
                        bias: vec![0.0; 4 * l.width],
                        recurrent: Some(vec![0.0; 4 * l.width * l.width]),
                    },
                    _ => LayerParams {
                        weights: vec![0.0; l.width * n_in],
                        bias: vec![0.0; l.width],
                        recurrent: None,
                    },
                }
            })
            .collect();
        Self { layers }
    }

    /// Glorot-uniform weights, zero biases, forget-gate bias 1.
    pub fn glorot<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Self {
        let mut params = Self::zeros(spec);
        for (i, (layer, p)) in spec.layers.iter().zip(&mut params.layers).enumerate() {
            let n_in = spec.input_dim_of(i);
            let w = layer.width;
            let mut fill = |v: &mut [f64], fan_in: usize, fan_out: usize| {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for x in v.iter_mut() {
                    *x = rng.random_range(-limit..limit);
                }
            };
            match layer.kind {
                LayerKind::LstmTanh => {
                    fill(&mut p.weights, n_in, 4 * w);
                    if let Some(rec) = p.recurrent.as_mut() {
                        fill(rec, w, 4 * w);
                    }
                    p.bias[w..2 * w].iter_mut().for_each(|b| *b = 1.0);
                }
                _ => fill(&mut p.weights, n_in, w),
            }
        }
        params
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| {
            [Some(&l.weights[..]), Some(&l.bias[..]), l.recurrent.as_deref()]
                .into_iter()
                .flatten()
        })
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| {
            let LayerParams {
                weights,
                bias,
                recurrent,
            } = l;
            [
                Some(weights.as_mut_slice()),
                Some(bias.as_mut_slice()),
                recurrent.as_deref_mut(),
            ]
            .into_iter()
            .flatten()
        })
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.tensors().flat_map(|t| t.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.tensors().map(<[f64]>::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn l2_norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.fill(value);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn add_assign(&mut self, other: &ParamSet) {
        for (a, b) in self.tensors_mut().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    /// Index of the first layer holding a NaN or infinity.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.layers.iter().position(|l| {
            l.weights
                .iter()
                .chain(&l.bias)
                .chain(l.recurrent.iter().flatten())
                .any(|v| !v.is_finite())
        })
    }

    pub fn same_shape(&self, other: &ParamSet) -> bool {
        self.layers.len() == other.layers.len()
            && self.tensors().zip(other.tensors()).all(|(a, b)| a.len() == b.len())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrentState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl RecurrentState {
    pub fn zeros(width: usize) -> Self {
        Self {
            hidden: vec![0.0; width],
            cell: vec![0.0; width],
        }
    }

    pub fn for_spec(spec: &NetworkSpec) -> Option<Self> {
        spec.recurrent_layer()
            .map(|i| Self::zeros(spec.layers[i].width))
    }

    pub fn is_zero(&self) -> bool {
        self.hidden.iter().chain(&self.cell).all(|&v| v == 0.0)
    }
}

#[derive(Clone, Debug)]
enum LayerCache {
    Dense {
        input: Vec<f64>,
        output: Vec<f64>,
    },
    Lstm {
        input: Vec<f64>,
        h_prev: Vec<f64>,
        c_prev: Vec<f64>,
        /// Activated gates, `[i | f | g | o]`.
        gates: Vec<f64>,
        tanh_c: Vec<f64>,
    },
}

/// Activations recorded by a forward pass over one or more time steps.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    steps: Vec<Vec<LayerCache>>,
}

impl Tape {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Gradients {
    pub params: ParamSet,
    /// Gradient with respect to each step's network input.
    pub inputs: Vec<Vec<f64>>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    v.iter_mut().for_each(|x| *x /= sum);
}

/// `out = bias + weights * input` for a row-major `out.len() x input.len()` matrix.
#[inline]
fn affine(weights: &[f64], bias: &[f64], input: &[f64], out: &mut Vec<f64>) {
    let n_in = input.len();
    out.clear();
    out.extend(bias.iter().enumerate().map(|(j, &b)| {
        let row = &weights[j * n_in..(j + 1) * n_in];
        b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>()
    }));
}

#[inline]
fn add_matvec(weights: &[f64], input: &[f64], out: &mut [f64]) {
    let n_in = input.len();
    for (j, o) in out.iter_mut().enumerate() {
        let row = &weights[j * n_in..(j + 1) * n_in];
        *o += row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
    }
}

/// `grad_w += dz x^T`; `dx += W^T dz` when requested.
#[inline]
fn dense_backward(
    weights: &[f64],
    input: &[f64],
    dz: &[f64],
    grad_w: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let n_in = input.len();
    for (j, &d) in dz.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let g = &mut grad_w[j * n_in..(j + 1) * n_in];
        g.iter_mut().zip(input).for_each(|(g, x)| *g += d * x);
    }
    if let Some(dx) = dx {
        for (j, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &weights[j * n_in..(j + 1) * n_in];
            dx.iter_mut().zip(row).for_each(|(a, w)| *a += w * d);
        }
    }
}

/// Parameters bundled with the layer stack they belong to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetworkSpec,
    pub params: ParamSet,
}

impl Network {
    pub fn new<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let params = ParamSet::glorot(&spec, rng);
        Ok(Self { spec, params })
    }

    pub fn from_params(spec: NetworkSpec, params: ParamSet) -> Result<Self> {
        spec.validate()?;
        if !ParamSet::zeros(&spec).same_shape(&params) {
            return config("parameter shapes do not match network spec");
        }
        Ok(Self { spec, params })
    }

    pub fn initial_state(&self) -> Option<RecurrentState> {
        RecurrentState::for_spec(&self.spec)
    }

    fn check_state(&self, state: Option<&RecurrentState>) -> Result<()> {
        match (self.spec.recurrent_layer(), state) {
            (Some(i), Some(s)) => {
                let w = self.spec.layers[i].width;
                if s.hidden.len() != w || s.cell.len() != w {
                    return config("recurrent state width does not match LSTM layer");
                }
                Ok(())
            }
            (None, None) => Ok(()),
            (Some(_), None) => config("recurrent network needs a recurrent state"),
            (None, Some(_)) => config("feed-forward network given a recurrent state"),
        }
    }

    fn step(
        &self,
        input: &[f64],
        state: &mut Option<RecurrentState>,
        mut cache: Option<&mut Vec<LayerCache>>,
    ) -> Result<Vec<f64>> {
        if input.len() != self.spec.input_dim {
            return config(format!(
                "input has length {}, network expects {}",
                input.len(),
                self.spec.input_dim
            ));
        }
        let mut x = input.to_vec();
        let mut y = Vec::new();
        for (layer, p) in self.spec.layers.iter().zip(&self.params.layers) {
            match layer.kind {
                LayerKind::LstmTanh => {
                    let w = layer.width;
                    let st = state.as_mut().expect("state checked");
                    let mut z = Vec::with_capacity(4 * w);
                    affine(&p.weights, &p.bias, &x, &mut z);
                    add_matvec(p.recurrent.as_ref().expect("lstm recurrent"), &st.hidden, &mut z);
                    for v in &mut z[..2 * w] {
                        *v = sigmoid(*v);
                    }
                    for v in &mut z[2 * w..3 * w] {
                        *v = v.tanh();
                    }
                    for v in &mut z[3 * w..] {
                        *v = sigmoid(*v);
                    }
                    let mut c = vec![0.0; w];
                    let mut tanh_c = vec![0.0; w];
                    let mut h = vec![0.0; w];
                    for k in 0..w {
                        c[k] = z[w + k] * st.cell[k] + z[k] * z[2 * w + k];
                        tanh_c[k] = c[k].tanh();
                        h[k] = z[3 * w + k] * tanh_c[k];
                    }
                    let h_prev = std::mem::replace(&mut st.hidden, h.clone());
                    let c_prev = std::mem::replace(&mut st.cell, c);
                    if let Some(cache) = cache.as_deref_mut() {
                        cache.push(LayerCache::Lstm {
                            input: std::mem::take(&mut x),
                            h_prev,
                            c_prev,
                            gates: z,
                            tanh_c,
                        });
                    }
                    y = h;
                }
                kind => {
                    affine(&p.weights, &p.bias, &x, &mut y);
                    match kind {
                        LayerKind::DenseRelu => y.iter_mut().for_each(|v| *v = v.max(0.0)),
                        LayerKind::SoftmaxHead => softmax_in_place(&mut y),
                        _ => {}
                    }
                    if let Some(cache) = cache.as_deref_mut() {
                        cache.push(LayerCache::Dense {
                            input: std::mem::take(&mut x),
                            output: y.clone(),
                        });
                    }
                }
            }
            std::mem::swap(&mut x, &mut y);
        }
        Ok(x)
    }

    /// Single-step forward pass recording a tape.
    pub fn forward(
        &self,
        input: &[f64],
        state: Option<&RecurrentState>,
    ) -> Result<(Vec<f64>, Option<RecurrentState>, Tape)> {
        let (mut out, state, tape) = self.forward_sequence(std::slice::from_ref(&input), state)?;
        Ok((out.pop().expect("one step"), state, tape))
    }

    /// Forward over a trace, threading the recurrent state from step to step.
    pub fn forward_sequence<I: AsRef<[f64]>>(
        &self,
        inputs: &[I],
        state: Option<&RecurrentState>,
    ) -> Result<(Vec<Vec<f64>>, Option<RecurrentState>, Tape)> {
        self.check_state(state)?;
        let mut state = state.cloned();
        let mut tape = Tape {
            steps: Vec::with_capacity(inputs.len()),
        };
        let mut outputs = Vec::with_capacity(inputs.len());
        for input in inputs {
            let mut cache = Vec::with_capacity(self.spec.layers.len());
            outputs.push(self.step(input.as_ref(), &mut state, Some(&mut cache))?);
            tape.steps.push(cache);
        }
        Ok((outputs, state, tape))
    }

    /// Tape-free forward pass, advancing `state` in place.
    pub fn predict(&self, input: &[f64], state: Option<&mut RecurrentState>) -> Result<Vec<f64>> {
        self.check_state(state.as_deref())?;
        match state {
            Some(s) => {
                let mut owned = Some(std::mem::replace(s, RecurrentState::zeros(0)));
                let out = self.step(input, &mut owned, None);
                *s = owned.expect("state kept");
                out
            }
            None => self.step(input, &mut None, None),
        }
    }

    /// Reverse-mode gradients (backprop through time for traces). One output
    /// gradient per taped step; steps without a loss take a zero vector.
    pub fn backward(&self, tape: &Tape, output_grads: &[Vec<f64>]) -> Result<Gradients> {
        let mut acc = ParamSet::zeros(&self.spec);
        let inputs = self.backward_into(tape, output_grads, &mut acc)?;
        Ok(Gradients {
            params: acc,
            inputs,
        })
    }

    /// As [`Network::backward`], accumulating parameter gradients into `acc`.
    pub fn backward_into(
        &self,
        tape: &Tape,
        output_grads: &[Vec<f64>],
        acc: &mut ParamSet,
    ) -> Result<Vec<Vec<f64>>> {
        if output_grads.len() != tape.steps.len() {
            return config(format!(
                "{} output gradients for a tape of {} steps",
                output_grads.len(),
                tape.steps.len()
            ));
        }
        let out_dim = self.spec.output_dim();
        if output_grads.iter().any(|g| g.len() != out_dim) {
            return config("output gradient length does not match network output");
        }
        let n_layers = self.spec.layers.len();
        let mut input_grads = vec![Vec::new(); tape.steps.len()];
        // Gradients flowing backwards in time into the LSTM layer.
        let mut dh_next: Option<Vec<f64>> = None;
        let mut dc_next: Option<Vec<f64>> = None;

        for t in (0..tape.steps.len()).rev() {
            let caches = &tape.steps[t];
            let mut dy = output_grads[t].clone();
            for li in (0..n_layers).rev() {
                let p = &self.params.layers[li];
                let g = &mut acc.layers[li];
                let n_in = self.spec.input_dim_of(li);
                let mut dx = vec![0.0; n_in];
                match (&caches[li], self.spec.layers[li].kind) {
                    (LayerCache::Dense { input, output }, kind) => {
                        let dz: Vec<f64> = match kind {
                            LayerKind::DenseRelu => dy
                                .iter()
                                .zip(output)
                                .map(|(d, o)| if *o > 0.0 { *d } else { 0.0 })
                                .collect(),
                            LayerKind::SoftmaxHead => {
                                let dot: f64 = dy.iter().zip(output).map(|(d, p)| d * p).sum();
                                dy.iter().zip(output).map(|(d, p)| p * (d - dot)).collect()
                            }
                            _ => dy,
                        };
                        g.bias.iter_mut().zip(&dz).for_each(|(b, d)| *b += d);
                        dense_backward(&p.weights, input, &dz, &mut g.weights, Some(&mut dx));
                    }
                    (
                        LayerCache::Lstm {
                            input,
                            h_prev,
                            c_prev,
                            gates,
                            tanh_c,
                        },
                        _,
                    ) => {
                        let w = self.spec.layers[li].width;
                        if let Some(dh) = dh_next.take() {
                            dy.iter_mut().zip(&dh).for_each(|(a, b)| *a += b);
                        }
                        let mut dc = dc_next.take().unwrap_or_else(|| vec![0.0; w]);
                        let mut dz = vec![0.0; 4 * w];
                        let mut dc_prev = vec![0.0; w];
                        for k in 0..w {
                            let (i, f, gg, o) = (gates[k], gates[w + k], gates[2 * w + k], gates[3 * w + k]);
                            dc[k] += dy[k] * o * (1.0 - tanh_c[k] * tanh_c[k]);
                            let d_o = dy[k] * tanh_c[k];
                            let d_i = dc[k] * gg;
                            let d_g = dc[k] * i;
                            let d_f = dc[k] * c_prev[k];
                            dc_prev[k] = dc[k] * f;
                            dz[k] = d_i * i * (1.0 - i);
                            dz[w + k] = d_f * f * (1.0 - f);
                            dz[2 * w + k] = d_g * (1.0 - gg * gg);
                            dz[3 * w + k] = d_o * o * (1.0 - o);
                        }
                        g.bias.iter_mut().zip(&dz).for_each(|(b, d)| *b += d);
                        dense_backward(&p.weights, input, &dz, &mut g.weights, Some(&mut dx));
                        let mut dh_prev = vec![0.0; w];
                        dense_backward(
                            p.recurrent.as_ref().expect("lstm recurrent"),
                            h_prev,
                            &dz,
                            g.recurrent.as_mut().expect("lstm recurrent"),
                            Some(&mut dh_prev),
                        );
                        dh_next = Some(dh_prev);
                        dc_next = Some(dc_prev);
                    }
                }
                dy = dx;
            }
            input_grads[t] = dy;
        }
        if let Some(layer) = acc.first_non_finite_layer() {
            return Err(Error::Numerical {
                layer,
                context: "backward pass produced a non-finite gradient",
            });
        }
        Ok(input_grads)
    }
}
