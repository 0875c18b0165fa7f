//! Dense categorical and Dirichlet tensors over small factored index spaces,
//! plus the information-theoretic primitives used by the planner.
//!
//! Every tensor is stored row-major. By convention the normalisation axis is
//! axis 0 (the outcome), conditioning axes follow, and a control axis, when
//! present, is last. The types accept any `norm_axis` but all builders in this
//! crate follow the convention.

use crate::error::{Error, Result};

/// Floor added inside every logarithm so deterministic likelihoods never
/// produce `-inf`.
pub const LOG_FLOOR: f64 = 1e-16;

/// Tolerance for column sums of categorical tensors.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[inline]
pub fn ln_floor(x: f64) -> f64 {
    (x + LOG_FLOOR).ln()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Axis {
    pub name: String,
    pub size: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, size: usize) -> Self {
        Self {
            name: name.into(),
            size,
        }
    }
}

/// Plain nonnegative array with named axes. Nothing about normalisation is
/// assumed.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn new(axes: Vec<Axis>, values: Vec<f64>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidTensor(
                "tensor needs at least one axis".into(),
            ));
        }
        for (i, a) in axes.iter().enumerate() {
            if a.size == 0 {
                return Err(Error::InvalidTensor(format!(
                    "axis `{}` has size 0",
                    a.name
                )));
            }
            if axes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::InvalidTensor(format!("duplicate axis `{}`", a.name)));
            }
        }
        let len: usize = axes.iter().map(|a| a.size).product();
        if values.len() != len {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: len,
            });
        }
        let mut strides = vec![1; axes.len()];
        for i in (0..axes.len() - 1).rev() {
            strides[i] = strides[i + 1] * axes[i + 1].size;
        }
        Ok(Self {
            axes,
            strides,
            values,
        })
    }

    pub fn filled(axes: Vec<Axis>, value: f64) -> Result<Self> {
        let len: usize = axes.iter().map(|a| a.size).product();
        Self::new(axes, vec![value; len])
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.size).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn offset(&self, index: &[usize]) -> Result<usize> {
        if index.len() != self.axes.len() {
            return Err(Error::LengthMismatch {
                left: index.len(),
                right: self.axes.len(),
            });
        }
        let mut off = 0;
        for ((&i, axis), stride) in index.iter().zip(&self.axes).zip(&self.strides) {
            if i >= axis.size {
                return Err(Error::IndexOutOfRange {
                    axis: axis.name.clone(),
                    index: i,
                    size: axis.size,
                });
            }
            off += i * stride;
        }
        Ok(off)
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.values[self.offset(index)?])
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        let off = self.offset(index)?;
        self.values[off] = value;
        Ok(())
    }

    /// Flat offsets of every column along `axis`: yields (start, stride)
    /// pairs, one per setting of the remaining axes.
    pub fn columns(&self, axis: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let size = self.axes[axis].size;
        let stride = self.strides[axis];
        let outer = self.values.len() / (size * stride);
        (0..outer).flat_map(move |o| (0..stride).map(move |i| (o * size * stride + i, stride)))
    }

    fn column_sum(&self, start: usize, stride: usize, size: usize) -> f64 {
        (0..size).map(|k| self.values[start + k * stride]).sum()
    }
}

/// Nonnegative tensor whose columns along `norm_axis` each sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalTensor {
    data: DenseTensor,
    norm_axis: usize,
}

impl CategoricalTensor {
    /// Wraps an already-normalised tensor, checking the invariants.
    pub fn new(data: DenseTensor, norm_axis: usize) -> Result<Self> {
        let t = Self { data, norm_axis };
        if let Some(problem) = t.check() {
            return Err(Error::InvalidTensor(problem));
        }
        Ok(t)
    }

    /// Constructs without checking; used by `validate` tests to build
    /// deliberately broken models.
    pub fn new_unchecked(data: DenseTensor, norm_axis: usize) -> Self {
        Self { data, norm_axis }
    }

    pub fn uniform(axes: Vec<Axis>, norm_axis: usize) -> Result<Self> {
        let n = axes
            .get(norm_axis)
            .ok_or_else(|| Error::InvalidTensor("norm axis out of range".into()))?
            .size;
        Self::new(DenseTensor::filled(axes, 1.0 / n as f64)?, norm_axis)
    }

    /// Returns a description of the first violated invariant, if any.
    pub fn check(&self) -> Option<String> {
        if self.norm_axis >= self.data.axes.len() {
            return Some(format!("norm axis {} out of range", self.norm_axis));
        }
        if let Some(v) = self
            .data
            .values
            .iter()
            .find(|v| **v < 0.0 || !v.is_finite())
        {
            return Some(format!("entry {v} is negative or non-finite"));
        }
        let size = self.data.axes[self.norm_axis].size;
        for (col, (start, stride)) in self.data.columns(self.norm_axis).enumerate() {
            let s = self.data.column_sum(start, stride, size);
            if (s - 1.0).abs() > SUM_TOLERANCE {
                return Some(format!("column {col} sums to {s}"));
            }
        }
        None
    }

    pub fn norm_axis(&self) -> usize {
        self.norm_axis
    }

    pub fn axes(&self) -> &[Axis] {
        self.data.axes()
    }

    pub fn values(&self) -> &[f64] {
        self.data.values()
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        self.data.get(index)
    }

    pub fn as_dense(&self) -> &DenseTensor {
        &self.data
    }
}

/// Concentration parameters congruent to a categorical tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletTensor {
    data: DenseTensor,
    norm_axis: usize,
}

impl DirichletTensor {
    pub fn new(data: DenseTensor, norm_axis: usize) -> Result<Self> {
        if norm_axis >= data.axes.len() {
            return Err(Error::InvalidTensor("norm axis out of range".into()));
        }
        if let Some(&a) = data.values.iter().find(|a| **a <= 0.0 || !a.is_finite()) {
            return Err(Error::InvalidConcentration(a));
        }
        Ok(Self { data, norm_axis })
    }

    pub fn filled(axes: Vec<Axis>, norm_axis: usize, alpha: f64) -> Result<Self> {
        Self::new(DenseTensor::filled(axes, alpha)?, norm_axis)
    }

    pub fn norm_axis(&self) -> usize {
        self.norm_axis
    }

    pub fn axes(&self) -> &[Axis] {
        self.data.axes()
    }

    pub fn values(&self) -> &[f64] {
        self.data.values()
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        self.data.get(index)
    }

    pub fn as_dense(&self) -> &DenseTensor {
        &self.data
    }

    /// Callers must only add nonnegative amounts.
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        self.data.values_mut()
    }
}

/// A probability vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Simplex {
    probs: Vec<f64>,
}

impl Simplex {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidTensor("empty simplex".into()));
        }
        if probs.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite);
        }
        if probs.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidTensor("negative probability".into()));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidTensor(format!("probabilities sum to {s}")));
        }
        Ok(Self { probs })
    }

    /// Normalises a nonnegative weight vector.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if !s.is_finite() {
            return Err(Error::NonFinite);
        }
        if s <= 0.0 {
            return Err(Error::AllZeroColumn { axis: 0, column: 0 });
        }
        Self::new(weights.into_iter().map(|w| w / s).collect())
    }

    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn delta(n: usize, index: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Normalises every column of `t` along `axis`.
pub fn normalize(t: &DenseTensor, axis: usize) -> Result<CategoricalTensor> {
    if axis >= t.axes.len() {
        return Err(Error::InvalidTensor(format!("axis {axis} out of range")));
    }
    if t.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if t.values.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidTensor("negative entry".into()));
    }
    let size = t.axes[axis].size;
    let mut out = t.clone();
    for (col, (start, stride)) in t.columns(axis).enumerate() {
        let s = t.column_sum(start, stride, size);
        if s <= 0.0 {
            return Err(Error::AllZeroColumn { axis, column: col });
        }
        for k in 0..size {
            out.values[start + k * stride] /= s;
        }
    }
    Ok(CategoricalTensor {
        data: out,
        norm_axis: axis,
    })
}

pub(crate) fn kl_slices(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(&pi, &qi)| pi * (ln_floor(pi) - ln_floor(qi)))
        .sum()
}

/// KL(p || q) in nats.
pub fn kl_divergence(p: &Simplex, q: &Simplex) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    // flooring can push the sum a hair below zero when p == q numerically
    Ok(kl_slices(&p.probs, &q.probs).max(0.0))
}

pub fn entropy(p: &Simplex) -> f64 {
    -p.probs
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Numerically stable softmax of `precision * x`.
pub fn softmax(x: &[f64], precision: f64) -> Result<Simplex> {
    if precision <= 0.0 || !precision.is_finite() {
        return Err(Error::InvalidPrecision(precision));
    }
    if x.is_empty() {
        return Err(Error::InvalidTensor("softmax of empty vector".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| (precision * (v - max)).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(Simplex::from_vec_unchecked(
        exps.into_iter().map(|e| e / z).collect(),
    ))
}

/// Expected categorical under a Dirichlet: each column is α / Σα.
pub fn dirichlet_mean(d: &DirichletTensor) -> CategoricalTensor {
    let size = d.data.axes[d.norm_axis].size;
    let mut out = d.data.clone();
    for (start, stride) in d.data.columns(d.norm_axis) {
        let s = d.data.column_sum(start, stride, size);
        for k in 0..size {
            out.values[start + k * stride] /= s;
        }
    }
    CategoricalTensor {
        data: out,
        norm_axis: d.norm_axis,
    }
}

/// Novelty weights `½ (1/α − 1/Σα)` per entry, where the sum runs over the
/// entry's column. Larger for rarely observed entries, zero in the limit of
/// infinite counts.
pub fn wnorm(d: &DirichletTensor) -> DenseTensor {
    let size = d.data.axes[d.norm_axis].size;
    let mut out = d.data.clone();
    for (start, stride) in d.data.columns(d.norm_axis) {
        let s = d.data.column_sum(start, stride, size);
        for k in 0..size {
            let a = d.data.values[start + k * stride];
            out.values[start + k * stride] = (0.5 * (1.0 / a - 1.0 / s)).max(0.0);
        }
    }
    out
}
