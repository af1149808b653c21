//! Minimal layers over `candle` tensors. Weights live in a [`ParamStore`];
//! initialisation is U(-1/sqrt(fan_in), 1/sqrt(fan_in)) throughout.

use candle_core::{Tensor, D};

use crate::error::Result;
use crate::params::ParamStore;

fn bound(fan_in: usize) -> f64 {
    1.0 / (fan_in as f64).sqrt()
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Result<Tensor> {
    Ok(candle_nn::ops::leaky_relu(x, slope)?)
}

pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok(candle_nn::ops::sigmoid(x)?)
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
    pub weight_name: String,
    pub bias_name: String,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize) -> Result<Self> {
        let b = bound(inputs);
        let (weight_name, bias_name) = (format!("{name}.weight"), format!("{name}.bias"));
        Ok(Self {
            weight: store.uniform(&weight_name, &[outputs, inputs], b)?,
            bias: store.uniform(&bias_name, &[outputs], b)?,
            weight_name,
            bias_name,
        })
    }

    /// (N, in) → (N, out).
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.matmul(&self.weight.t()?)?.broadcast_add(&self.bias)?)
    }
}

#[derive(Clone, Debug)]
pub struct Conv1d {
    weight: Tensor,
    bias: Tensor,
    stride: usize,
    padding: usize,
}

impl Conv1d {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let b = bound(inputs * kernel);
        Ok(Self {
            weight: store.uniform(&format!("{name}.weight"), &[outputs, inputs, kernel], b)?,
            bias: store.uniform(&format!("{name}.bias"), &[outputs], b)?,
            stride,
            padding,
        })
    }

    /// (N, C, L) → (N, C', L'). Evaluated as a height-1 2-D convolution over
    /// exactly the span the strides read: the 1-D kernel gradient of
    /// `candle` 0.11 is wrong, and its 2-D input gradient mis-sizes widths
    /// that the stride does not divide.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let k = self.weight.dim(2)?;
        let padded = x.pad_with_zeros(2, self.padding, self.padding)?;
        let len = padded.dim(2)?;
        if len < k {
            return Err(crate::Error::InvalidArgument(format!("input width {len} below kernel {k}")));
        }
        let used = (len - k) / self.stride * self.stride + k;
        let padded = padded.narrow(2, 0, used)?.unsqueeze(2)?;
        let y = padded.conv2d(&self.weight.unsqueeze(2)?, 0, self.stride, 1, 1)?.squeeze(2)?;
        Ok(y.broadcast_add(&self.bias.reshape((1, (), 1))?)?)
    }
}

#[derive(Clone, Debug)]
pub struct Conv2d {
    weight: Tensor,
    bias: Tensor,
    stride: usize,
    padding: usize,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let b = bound(inputs * kernel * kernel);
        Ok(Self {
            weight: store.uniform(&format!("{name}.weight"), &[outputs, inputs, kernel, kernel], b)?,
            bias: store.uniform(&format!("{name}.bias"), &[outputs], b)?,
            stride,
            padding,
        })
    }

    /// (N, C, H, W) → (N, C', H', W'). Inputs whose padded extent the stride
    /// does not divide are trimmed to the span actually read, which keeps
    /// `candle`'s input gradient correctly sized.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (_, _, h, w) = x.dims4()?;
        let k = self.weight.dim(2)?;
        let (p, s) = (self.padding, self.stride);
        if h + 2 * p < k || w + 2 * p < k {
            return Err(crate::Error::InvalidArgument(format!("input {h}×{w} below kernel {k}")));
        }
        let exact = |n: usize| (n + 2 * p - k) % s == 0;
        let y = if exact(h) && exact(w) {
            x.conv2d(&self.weight, p, s, 1, 1)?
        } else {
            let used = |n: usize| (n + 2 * p - k) / s * s + k;
            x.pad_with_zeros(2, p, p)?
                .pad_with_zeros(3, p, p)?
                .narrow(2, 0, used(h))?
                .narrow(3, 0, used(w))?
                .conv2d(&self.weight, 0, s, 1, 1)?
        };
        Ok(y.broadcast_add(&self.bias.reshape((1, (), 1, 1))?)?)
    }
}

/// Per-sample, per-channel normalisation over the spatial plane with a
/// learned affine transform.
#[derive(Clone, Debug)]
pub struct InstanceNorm {
    gamma: Tensor,
    beta: Tensor,
    eps: f64,
}

impl InstanceNorm {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Result<Self> {
        Ok(Self {
            gamma: store.constant(&format!("{name}.weight"), &[channels], 1.0)?,
            beta: store.constant(&format!("{name}.bias"), &[channels], 0.0)?,
            eps: 1e-5,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (n, c, h, w) = x.dims4()?;
        let flat = x.reshape((n, c, h * w))?;
        let centred = flat.broadcast_sub(&flat.mean_keepdim(D::Minus1)?)?;
        let var = centred.sqr()?.mean_keepdim(D::Minus1)?;
        let normed = centred.broadcast_div(&(var + self.eps)?.sqrt()?)?;
        let y = normed
            .broadcast_mul(&self.gamma.reshape((1, c, 1))?)?
            .broadcast_add(&self.beta.reshape((1, c, 1))?)?;
        Ok(y.reshape((n, c, h, w))?)
    }
}

/// Gated recurrent unit cell (reset, update, candidate gate order).
#[derive(Clone, Debug)]
pub struct GruCell {
    w_input: Tensor,
    w_hidden: Tensor,
    b_input: Tensor,
    b_hidden: Tensor,
    hidden: usize,
}

impl GruCell {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, hidden: usize) -> Result<Self> {
        let b = bound(hidden);
        Ok(Self {
            w_input: store.uniform(&format!("{name}.weight_ih"), &[3 * hidden, inputs], b)?,
            w_hidden: store.uniform(&format!("{name}.weight_hh"), &[3 * hidden, hidden], b)?,
            b_input: store.uniform(&format!("{name}.bias_ih"), &[3 * hidden], b)?,
            b_hidden: store.uniform(&format!("{name}.bias_hh"), &[3 * hidden], b)?,
            hidden,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Runs the cell over (B, T, I) from a zero state and returns (B, T, H).
    pub fn forward_sequence(&self, x: &Tensor) -> Result<Tensor> {
        let (b, t, i) = x.dims3()?;
        let h3 = 3 * self.hidden;
        let projected = x
            .reshape((b * t, i))?
            .matmul(&self.w_input.t()?)?
            .broadcast_add(&self.b_input)?
            .reshape((b, t, h3))?;
        let mut h = Tensor::zeros((b, self.hidden), x.dtype(), x.device())?;
        let mut outputs = Vec::with_capacity(t);
        for step in 0..t {
            let gi = projected.narrow(1, step, 1)?.squeeze(1)?;
            let gh = h.matmul(&self.w_hidden.t()?)?.broadcast_add(&self.b_hidden)?;
            let chunk = |g: &Tensor, k: usize| g.narrow(1, k * self.hidden, self.hidden);
            let r = sigmoid(&(chunk(&gi, 0)? + chunk(&gh, 0)?)?)?;
            let z = sigmoid(&(chunk(&gi, 1)? + chunk(&gh, 1)?)?)?;
            let n = (chunk(&gi, 2)? + (r * chunk(&gh, 2)?)?)?.tanh()?;
            h = ((z.ones_like()? - &z)? * n)?.add(&(z * &h)?)?;
            outputs.push(h.clone());
        }
        Ok(Tensor::stack(&outputs, 1)?)
    }
}
