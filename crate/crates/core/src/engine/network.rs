use std::fmt;

use crate::compress::WeightTensor;
use crate::error::{Error, Result};

/// Channel-major feature map shape; dense layers produce `(units, 1, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn new(c: usize, h: usize, w: usize) -> Self {
        Self { c, h, w }
    }

    pub fn flat(n: usize) -> Self {
        Self::new(n, 1, 1)
    }

    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.h + y) * self.w + x
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.c, self.h, self.w)
    }
}

/// Output side length of a sliding window, or `None` when it does not fit.
pub fn window_out(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let span = input + 2 * padding;
    (stride > 0 && kernel > 0 && span >= kernel).then(|| (span - kernel) / stride + 1)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    /// Weights are `[out, in, kh, kw]`.
    Conv2d {
        weights: WeightTensor,
        bias: Option<Vec<f64>>,
        stride: usize,
        padding: usize,
    },
    /// Weights are `[out, in]` over the flattened input.
    Dense {
        weights: WeightTensor,
        bias: Option<Vec<f64>>,
    },
    /// Window sum. With `reciprocal` set the sum is also multiplied by one
    /// over the number of in-bounds inputs, giving a true average.
    ScaledAvgPool {
        window: usize,
        stride: usize,
        padding: usize,
        reciprocal: bool,
    },
    /// Per-channel `scale * x + shift`.
    BatchNorm { scale: Vec<f64>, shift: Vec<f64> },
    /// `c0 + c1 x + c2 x^2`, coefficients ascending.
    PolyActivation { coeffs: Vec<f64> },
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Conv2d { .. } => "conv",
            Self::Dense { .. } => "dense",
            Self::ScaledAvgPool { .. } => "pool",
            Self::BatchNorm { .. } => "batchnorm",
            Self::PolyActivation { .. } => "act",
        }
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        match self {
            Self::Conv2d {
                weights,
                bias,
                stride,
                padding,
            } => {
                let [out, cin, kh, kw] = dims4(&weights.shape)?;
                if cin != input.c {
                    return Err(Error::Shape(format!("conv expects {cin} channels, input is {input}")));
                }
                check_bias(bias, out)?;
                let h = window_out(input.h, kh, *stride, *padding);
                let w = window_out(input.w, kw, *stride, *padding);
                match (h, w) {
                    (Some(h), Some(w)) => Ok(Shape::new(out, h, w)),
                    _ => Err(Error::Shape(format!("{kh}x{kw} kernel does not fit {input}"))),
                }
            }
            Self::Dense { weights, bias } => {
                let [out, fan_in] = dims2(&weights.shape)?;
                if fan_in != input.len() {
                    return Err(Error::Shape(format!("dense expects {fan_in} inputs, input is {input}")));
                }
                check_bias(bias, out)?;
                Ok(Shape::flat(out))
            }
            Self::ScaledAvgPool {
                window,
                stride,
                padding,
                ..
            } => {
                if *padding >= *window {
                    return Err(Error::Shape("pool padding must be smaller than the window".into()));
                }
                match (
                    window_out(input.h, *window, *stride, *padding),
                    window_out(input.w, *window, *stride, *padding),
                ) {
                    (Some(h), Some(w)) => Ok(Shape::new(input.c, h, w)),
                    _ => Err(Error::Shape(format!("{window}x{window} pool does not fit {input}"))),
                }
            }
            Self::BatchNorm { scale, shift } => {
                if scale.len() != input.c || shift.len() != input.c {
                    return Err(Error::Shape(format!(
                        "batch norm has {} / {} channels, input is {input}",
                        scale.len(),
                        shift.len()
                    )));
                }
                Ok(input)
            }
            Self::PolyActivation { coeffs } => {
                if coeffs.is_empty() || coeffs.len() > 3 {
                    return Err(Error::Shape(format!("activation degree {} not in 0..=2", coeffs.len() as i64 - 1)));
                }
                Ok(input)
            }
        }
    }

    /// Whether evaluation needs a ciphertext product.
    pub fn is_multiplicative(&self) -> bool {
        matches!(self, Self::PolyActivation { coeffs } if coeffs.get(2).is_some_and(|&c| c != 0.0))
    }
}

pub(crate) fn dims4(shape: &[usize]) -> Result<[usize; 4]> {
    shape
        .try_into()
        .map_err(|_| Error::Shape(format!("expected 4 weight dimensions, got {shape:?}")))
}

pub(crate) fn dims2(shape: &[usize]) -> Result<[usize; 2]> {
    shape
        .try_into()
        .map_err(|_| Error::Shape(format!("expected 2 weight dimensions, got {shape:?}")))
}

fn check_bias(bias: &Option<Vec<f64>>, out: usize) -> Result<()> {
    match bias {
        Some(b) if b.len() != out => Err(Error::Shape(format!("bias has {} entries for {out} outputs", b.len()))),
        _ => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub input: Shape,
    pub layers: Vec<Layer>,
}

impl NetworkSpec {
    pub fn new(input: Shape, layers: Vec<Layer>) -> Result<Self> {
        let net = Self { input, layers };
        net.shapes()?;
        Ok(net)
    }

    /// Input shape followed by every layer's output shape.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        let mut out = vec![self.input];
        for layer in &self.layers {
            out.push(layer.output_shape(*out.last().expect("non-empty"))?);
        }
        Ok(out)
    }

    pub fn output_shape(&self) -> Result<Shape> {
        Ok(*self.shapes()?.last().expect("non-empty"))
    }

    pub fn multiplicative_depth(&self) -> usize {
        self.layers.iter().filter(|l| l.is_multiplicative()).count()
    }

    /// Stable per-layer labels such as `conv-1`, `act-2`.
    pub fn layer_names(&self) -> Vec<String> {
        let mut seen = std::collections::HashMap::new();
        self.layers
            .iter()
            .map(|l| {
                let k = seen.entry(l.kind()).or_insert(0);
                *k += 1;
                format!("{}-{}", l.kind(), k)
            })
            .collect()
    }
}

/// Visits the in-bounds positions of one sliding window.
pub(crate) fn window_taps(
    input: Shape,
    oy: usize,
    ox: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
) -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..kh).flat_map(move |ky| {
        (0..kw).filter_map(move |kx| {
            let y = (oy * stride + ky).checked_sub(padding)?;
            let x = (ox * stride + kx).checked_sub(padding)?;
            (y < input.h && x < input.w).then_some((ky, kx, y, x))
        })
    })
}

/// Exact forward pass in floating point.
pub fn eval_plain(net: &NetworkSpec, input: &[f64]) -> Result<Vec<f64>> {
    if input.len() != net.input.len() {
        return Err(Error::Shape(format!("input has {} values, network expects {}", input.len(), net.input)));
    }
    let shapes = net.shapes()?;
    let mut x = input.to_vec();
    for (layer, (&ins, &outs)) in net.layers.iter().zip(shapes.iter().zip(&shapes[1..])) {
        x = eval_layer_plain(layer, ins, outs, &x);
    }
    Ok(x)
}

fn eval_layer_plain(layer: &Layer, ins: Shape, outs: Shape, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; outs.len()];
    match layer {
        Layer::Conv2d {
            weights,
            bias,
            stride,
            padding,
        } => {
            let [_, cin, kh, kw] = dims4(&weights.shape).expect("validated");
            for o in 0..outs.c {
                for oy in 0..outs.h {
                    for ox in 0..outs.w {
                        let mut acc = bias.as_ref().map_or(0.0, |b| b[o]);
                        for (ky, kx, iy, ix) in window_taps(ins, oy, ox, kh, kw, *stride, *padding) {
                            for i in 0..cin {
                                acc += weights.effective(((o * cin + i) * kh + ky) * kw + kx) * x[ins.index(i, iy, ix)];
                            }
                        }
                        y[outs.index(o, oy, ox)] = acc;
                    }
                }
            }
        }
        Layer::Dense { weights, bias } => {
            let fan_in = ins.len();
            for (o, out) in y.iter_mut().enumerate() {
                *out = bias.as_ref().map_or(0.0, |b| b[o])
                    + (0..fan_in).map(|i| weights.effective(o * fan_in + i) * x[i]).sum::<f64>();
            }
        }
        Layer::ScaledAvgPool {
            window,
            stride,
            padding,
            reciprocal,
        } => {
            for c in 0..outs.c {
                for oy in 0..outs.h {
                    for ox in 0..outs.w {
                        let mut acc = 0.0;
                        let mut count = 0;
                        for (_, _, iy, ix) in window_taps(ins, oy, ox, *window, *window, *stride, *padding) {
                            acc += x[ins.index(c, iy, ix)];
                            count += 1;
                        }
                        if *reciprocal {
                            acc /= count as f64;
                        }
                        y[outs.index(c, oy, ox)] = acc;
                    }
                }
            }
        }
        Layer::BatchNorm { scale, shift } => {
            let per = ins.h * ins.w;
            for (i, (o, &v)) in y.iter_mut().zip(x).enumerate() {
                let c = i / per;
                *o = scale[c] * v + shift[c];
            }
        }
        Layer::PolyActivation { coeffs } => {
            for (o, &v) in y.iter_mut().zip(x) {
                *o = coeffs.iter().rev().fold(0.0, |acc, &c| acc * v + c);
            }
        }
    }
    y
}

/// Absorbs every batch-norm layer into an adjacent linear layer: the one
/// before it when there is one, otherwise the unpadded one after it.
pub fn fold_batchnorm(net: &NetworkSpec) -> Result<NetworkSpec> {
    let shapes = net.shapes()?;
    let mut layers: Vec<Layer> = Vec::with_capacity(net.layers.len());
    let mut pending: Option<(Vec<f64>, Vec<f64>, Shape)> = None;
    for (idx, layer) in net.layers.iter().enumerate() {
        if let Layer::BatchNorm { scale, shift } = layer {
            if pending.is_some() {
                return Err(Error::Shape("consecutive batch-norm layers".into()));
            }
            match layers.last_mut() {
                Some(prev @ (Layer::Conv2d { .. } | Layer::Dense { .. })) => fold_after(prev, scale, shift)?,
                _ => pending = Some((scale.clone(), shift.clone(), shapes[idx])),
            }
            continue;
        }
        let mut layer = layer.clone();
        if let Some((scale, shift, ins)) = pending.take() {
            fold_before(&mut layer, &scale, &shift, ins)?;
        }
        layers.push(layer);
    }
    if pending.is_some() {
        return Err(Error::Shape("batch norm with no foldable neighbour".into()));
    }
    NetworkSpec::new(net.input, layers)
}

fn fold_after(layer: &mut Layer, scale: &[f64], shift: &[f64]) -> Result<()> {
    let (weights, bias) = match layer {
        Layer::Conv2d { weights, bias, .. } | Layer::Dense { weights, bias, .. } => (weights, bias),
        _ => unreachable!("caller matched a linear layer"),
    };
    let out = weights.shape[0];
    let per_out = weights.len() / out;
    let mut b = bias.take().unwrap_or_else(|| vec![0.0; out]);
    for o in 0..out {
        for v in &mut weights.values[o * per_out..(o + 1) * per_out] {
            *v *= scale[o];
        }
        b[o] = b[o] * scale[o] + shift[o];
    }
    *bias = Some(b);
    Ok(())
}

fn fold_before(layer: &mut Layer, scale: &[f64], shift: &[f64], ins: Shape) -> Result<()> {
    let per = ins.h * ins.w;
    match layer {
        Layer::Dense { weights, bias } => {
            let [out, fan_in] = dims2(&weights.shape)?;
            let mut b = bias.take().unwrap_or_else(|| vec![0.0; out]);
            for (o, bo) in b.iter_mut().enumerate() {
                for i in 0..fan_in {
                    let c = i / per;
                    *bo += weights.effective(o * fan_in + i) * shift[c];
                    weights.values[o * fan_in + i] *= scale[c];
                }
            }
            *bias = Some(b);
            Ok(())
        }
        Layer::Conv2d {
            weights,
            bias,
            padding: 0,
            ..
        } => {
            let [out, cin, kh, kw] = dims4(&weights.shape)?;
            let mut b = bias.take().unwrap_or_else(|| vec![0.0; out]);
            for (o, bo) in b.iter_mut().enumerate() {
                for i in 0..cin {
                    for k in 0..kh * kw {
                        let idx = (o * cin + i) * kh * kw + k;
                        *bo += weights.effective(idx) * shift[i];
                        weights.values[idx] *= scale[i];
                    }
                }
            }
            *bias = Some(b);
            Ok(())
        }
        _ => Err(Error::Shape("batch norm with no foldable neighbour".into())),
    }
}
