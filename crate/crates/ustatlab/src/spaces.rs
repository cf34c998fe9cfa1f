//! Finite measure spaces, products, disjoint unions, and dense tensor-valued
//! functions with exact (weighted-sum) integration.
//!
//! Atoms are identified by their position `0..len`. A [`TensorField`] stores a
//! real value for every atom multi-index of its axes, row-major with the last
//! axis fastest. All integrals are plain weighted sums, so linearity, Fubini
//! and separation of variables hold to rounding error.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Hard cap on dense element counts (2^24). Operations that would materialize
/// more return [`Error::TooLarge`] instead of silently crawling.
pub const MAX_FIELD_ELEMENTS: usize = 1 << 24;

/// Tolerance for "weights sum to one" when constructing probability spaces.
pub const PROB_MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    /// Weights sum to one; axes of this kind can be integrated away by
    /// conditional expectations.
    Probability,
    /// Arbitrary positive weights (disjoint unions, counting measures).
    SigmaFinite,
    /// Counting measure with unit weights; used as the value axis of
    /// Hilbert-space-valued functions and never integrated.
    HilbertValue,
}

/// A finite measure space: ordered atoms `0..len` with strictly positive
/// weights. Disjoint unions additionally record where each original block
/// starts so that a function on the union can be read back blockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Space {
    weights: Vec<f64>,
    kind: SpaceKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    blocks: Option<Vec<usize>>,
}

impl Space {
    /// Build a space from weights, validating the kind-specific invariants.
    pub fn new(weights: Vec<f64>, kind: SpaceKind) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidMeasure(format!("weight of atom {i} is {w}")));
            }
        }
        match kind {
            SpaceKind::Probability => {
                let mass: f64 = weights.iter().sum();
                if (mass - 1.0).abs() > PROB_MASS_TOL {
                    return Err(Error::NotProbability(format!("total mass {mass}")));
                }
            }
            SpaceKind::HilbertValue => {
                if weights.iter().any(|&w| w != 1.0) {
                    return Err(Error::InvalidMeasure(
                        "hilbert_value axes carry counting measure (all weights 1)".into(),
                    ));
                }
            }
            SpaceKind::SigmaFinite => {}
        }
        Ok(Space { weights, kind, blocks: None })
    }

    /// Uniform probability space on `n` atoms.
    pub fn uniform(n: usize) -> Arc<Self> {
        Arc::new(Space::new(vec![1.0 / n as f64; n], SpaceKind::Probability).expect("uniform"))
    }

    /// Counting measure on `n` atoms.
    pub fn counting(n: usize) -> Arc<Self> {
        Arc::new(Space::new(vec![1.0; n], SpaceKind::SigmaFinite).expect("counting"))
    }

    /// Value axis of dimension `n` (counting measure, never integrated).
    pub fn hilbert(n: usize) -> Arc<Self> {
        Arc::new(Space::new(vec![1.0; n], SpaceKind::HilbertValue).expect("hilbert"))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, atom: usize) -> f64 {
        self.weights[atom]
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Start offsets of the original blocks when this space was built by
    /// [`disjoint_union`]; `None` otherwise.
    pub fn block_offsets(&self) -> Option<&[usize]> {
        self.blocks.as_deref()
    }
}

/// Product of spaces as a single flattened axis: the atom set is the
/// Cartesian product (first factor slowest), the weight of a tuple is the
/// product of component weights.
pub fn product(spaces: &[Arc<Space>]) -> Result<Arc<Space>> {
    if spaces.is_empty() {
        return Err(Error::InvalidMeasure("product of no spaces".into()));
    }
    if spaces.len() == 1 {
        return Ok(spaces[0].clone());
    }
    let mut count: usize = 1;
    for s in spaces {
        count = count
            .checked_mul(s.len())
            .filter(|&c| c <= MAX_FIELD_ELEMENTS)
            .ok_or_else(|| Error::TooLarge(format!("product exceeds {MAX_FIELD_ELEMENTS} atoms")))?;
    }
    let mut weights = vec![1.0f64];
    for s in spaces {
        let mut next = Vec::with_capacity(weights.len() * s.len());
        for &w in &weights {
            for &v in s.weights() {
                next.push(w * v);
            }
        }
        weights = next;
    }
    let kind = if spaces.iter().all(|s| s.kind() == SpaceKind::Probability) {
        SpaceKind::Probability
    } else {
        SpaceKind::SigmaFinite
    };
    Ok(Arc::new(Space { weights, kind, blocks: None }))
}

/// Disjoint union of spaces: atoms are concatenated, each block keeps its own
/// measure, so the total mass is the sum of component masses. The result is
/// sigma-finite with block offsets recorded.
pub fn disjoint_union(spaces: &[Arc<Space>]) -> Result<Arc<Space>> {
    if spaces.is_empty() {
        return Err(Error::InvalidMeasure("union of no spaces".into()));
    }
    let mut weights = Vec::new();
    let mut blocks = Vec::with_capacity(spaces.len());
    for s in spaces {
        blocks.push(weights.len());
        weights.extend_from_slice(s.weights());
    }
    if weights.len() > MAX_FIELD_ELEMENTS {
        return Err(Error::TooLarge(format!("union exceeds {MAX_FIELD_ELEMENTS} atoms")));
    }
    Ok(Arc::new(Space { weights, kind: SpaceKind::SigmaFinite, blocks: Some(blocks) }))
}

/// A dense real-valued function on a product of spaces. Values are stored
/// row-major (last axis fastest) and are finite by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorField {
    axes: Vec<Arc<Space>>,
    values: Vec<f64>,
}

impl TensorField {
    pub fn new(axes: Vec<Arc<Space>>, values: Vec<f64>) -> Result<Self> {
        let expected = element_count(&axes)?;
        if values.len() != expected {
            return Err(Error::BadAxis(format!(
                "value array has {} entries, axes require {expected}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure(format!("non-finite value {v}")));
        }
        Ok(TensorField { axes, values })
    }

    pub fn constant(axes: Vec<Arc<Space>>, c: f64) -> Result<Self> {
        let n = element_count(&axes)?;
        TensorField::new(axes, vec![c; n])
    }

    pub fn zeros(axes: Vec<Arc<Space>>) -> Result<Self> {
        TensorField::constant(axes, 0.0)
    }

    /// Build a field by evaluating `f` at every atom multi-index.
    pub fn from_fn(axes: Vec<Arc<Space>>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let n = element_count(&axes)?;
        let mut values = Vec::with_capacity(n);
        let mut idx = vec![0usize; axes.len()];
        for _ in 0..n {
            values.push(f(&idx));
            advance(&mut idx, &axes);
        }
        TensorField::new(axes, values)
    }

    /// A scalar is a field with no axes.
    pub fn scalar(v: f64) -> Self {
        TensorField { axes: Vec::new(), values: vec![v] }
    }

    pub fn axes(&self) -> &[Arc<Space>] {
        &self.axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Row-major strides, last axis fastest.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.axes.len()];
        for k in (0..self.axes.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.axes[k + 1].len();
        }
        s
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.axes.len());
        let mut flat = 0usize;
        for (k, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.axes[k].len());
            flat = flat * self.axes[k].len() + i;
        }
        flat
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.flat_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let flat = self.flat_index(idx);
        self.values[flat] = v;
    }

    /// The scalar value of a zero-axis field.
    pub fn as_scalar(&self) -> f64 {
        debug_assert_eq!(self.values.len(), 1);
        self.values[0]
    }

    /// Product of axis weights at a multi-index.
    pub fn weight_at(&self, idx: &[usize]) -> f64 {
        idx.iter().zip(&self.axes).map(|(&i, ax)| ax.weight(i)).fold(1.0, |a, b| a * b)
    }

    /// Per-entry product weights, in flat order.
    pub fn flat_weights(&self) -> Vec<f64> {
        let mut w = vec![1.0f64];
        for ax in &self.axes {
            let mut next = Vec::with_capacity(w.len() * ax.len());
            for &a in &w {
                for &b in ax.weights() {
                    next.push(a * b);
                }
            }
            w = next;
        }
        w
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        TensorField { axes: self.axes.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.axes != other.axes {
            return Err(Error::BadAxis("zip of fields on different axes".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(TensorField { axes: self.axes.clone(), values })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// Weighted inner product `Σ f·g·w` over all axes (value axes carry
    /// counting weight 1, so they are summed too).
    pub fn inner(&self, other: &Self) -> Result<f64> {
        if self.axes != other.axes {
            return Err(Error::BadAxis("inner product of fields on different axes".into()));
        }
        let w = self.flat_weights();
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(&w)
            .map(|((&a, &b), &w)| a * b * w)
            .sum())
    }

    /// Integrate out the given axes (weighted sum), returning a field over
    /// the remaining axes. Integrating every axis yields a scalar field.
    pub fn integrate(&self, axes: &[usize]) -> Result<TensorField> {
        for &a in axes {
            if a >= self.axes.len() {
                return Err(Error::BadAxis(format!("axis {a} of a {}-axis field", self.axes.len())));
            }
            if self.axes[a].kind() == SpaceKind::HilbertValue {
                return Err(Error::BadAxis(format!("axis {a} is a hilbert_value axis")));
            }
        }
        let mut keep_axes = Vec::new();
        let mut is_integrated = vec![false; self.axes.len()];
        for &a in axes {
            is_integrated[a] = true;
        }
        for (k, ax) in self.axes.iter().enumerate() {
            if !is_integrated[k] {
                keep_axes.push(ax.clone());
            }
        }
        let out_len = element_count(&keep_axes)?;
        let mut out = vec![0.0f64; out_len];
        let mut idx = vec![0usize; self.axes.len()];
        for &v in &self.values {
            let mut w = 1.0;
            let mut flat = 0usize;
            for (k, &i) in idx.iter().enumerate() {
                if is_integrated[k] {
                    w *= self.axes[k].weight(i);
                } else {
                    flat = flat * self.axes[k].len() + i;
                }
            }
            out[flat] += v * w;
            advance(&mut idx, &self.axes);
        }
        TensorField::new(keep_axes, out)
    }

    /// Integrate out the given axes but keep the original axis list, i.e.
    /// broadcast the averaged value back so the result is constant along the
    /// integrated axes. This is the conditional-expectation shape.
    pub fn integrate_keep(&self, axes: &[usize]) -> Result<TensorField> {
        let reduced = self.integrate(axes)?;
        let mut is_integrated = vec![false; self.axes.len()];
        for &a in axes {
            is_integrated[a] = true;
        }
        let mut values = Vec::with_capacity(self.values.len());
        let mut idx = vec![0usize; self.axes.len()];
        let keep: Vec<usize> = (0..self.axes.len()).filter(|&k| !is_integrated[k]).collect();
        let mut ridx = vec![0usize; keep.len()];
        for _ in 0..self.values.len() {
            for (slot, &k) in keep.iter().enumerate() {
                ridx[slot] = idx[k];
            }
            values.push(reduced.get(&ridx));
            advance(&mut idx, &self.axes);
        }
        TensorField::new(self.axes.clone(), values)
    }

    /// Serialize to the flat numeric exchange format: an axis metadata header
    /// (atom counts, weights, kinds, block offsets) followed by row-major
    /// values. Floats are printed in shortest round-trip form, so
    /// `read_flat(write_flat(f)) == f` bit for bit.
    pub fn write_flat(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "ustatlab-field v1");
        let _ = writeln!(s, "axes {}", self.axes.len());
        for ax in &self.axes {
            let kind = match ax.kind() {
                SpaceKind::Probability => "probability",
                SpaceKind::SigmaFinite => "sigma_finite",
                SpaceKind::HilbertValue => "hilbert_value",
            };
            let _ = write!(s, "axis {} {}", ax.len(), kind);
            for w in ax.weights() {
                let _ = write!(s, " {w:?}");
            }
            if let Some(blocks) = ax.block_offsets() {
                let _ = write!(s, " blocks");
                for b in blocks {
                    let _ = write!(s, " {b}");
                }
            }
            let _ = writeln!(s);
        }
        let _ = writeln!(s, "values {}", self.values.len());
        for v in &self.values {
            let _ = writeln!(s, "{v:?}");
        }
        s
    }

    /// Parse the format produced by [`TensorField::write_flat`].
    pub fn read_flat(text: &str) -> Result<TensorField> {
        let bad = |m: &str| Error::Usage(format!("flat field parse: {m}"));
        let mut lines = text.lines();
        if lines.next() != Some("ustatlab-field v1") {
            return Err(bad("missing header"));
        }
        let axes_line = lines.next().ok_or_else(|| bad("missing axes count"))?;
        let n_axes: usize = axes_line
            .strip_prefix("axes ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad axes count"))?;
        let mut axes = Vec::with_capacity(n_axes);
        for _ in 0..n_axes {
            let line = lines.next().ok_or_else(|| bad("missing axis line"))?;
            let mut tok = line.split_whitespace();
            if tok.next() != Some("axis") {
                return Err(bad("expected axis line"));
            }
            let len: usize = tok.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("axis len"))?;
            let kind = match tok.next() {
                Some("probability") => SpaceKind::Probability,
                Some("sigma_finite") => SpaceKind::SigmaFinite,
                Some("hilbert_value") => SpaceKind::HilbertValue,
                _ => return Err(bad("axis kind")),
            };
            let rest: Vec<&str> = tok.collect();
            let split = rest.iter().position(|&t| t == "blocks").unwrap_or(rest.len());
            let weights: Vec<f64> = rest[..split]
                .iter()
                .map(|t| t.parse::<f64>().map_err(|_| bad("axis weight")))
                .collect::<Result<_>>()?;
            if weights.len() != len {
                return Err(bad("axis weight count"));
            }
            let blocks: Option<Vec<usize>> = if split < rest.len() {
                Some(
                    rest[split + 1..]
                        .iter()
                        .map(|t| t.parse::<usize>().map_err(|_| bad("block offset")))
                        .collect::<Result<_>>()?,
                )
            } else {
                None
            };
            let mut space = Space::new(weights, kind)?;
            space.blocks = blocks;
            axes.push(Arc::new(space));
        }
        let values_line = lines.next().ok_or_else(|| bad("missing values count"))?;
        let n_values: usize = values_line
            .strip_prefix("values ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad values count"))?;
        let mut values = Vec::with_capacity(n_values);
        for _ in 0..n_values {
            let line = lines.next().ok_or_else(|| bad("missing value"))?;
            values.push(line.trim().parse::<f64>().map_err(|_| bad("bad value"))?);
        }
        TensorField::new(axes, values)
    }
}

/// Element count of a product of axes, guarded by [`MAX_FIELD_ELEMENTS`].
pub fn element_count(axes: &[Arc<Space>]) -> Result<usize> {
    let mut n: usize = 1;
    for ax in axes {
        n = n
            .checked_mul(ax.len())
            .filter(|&c| c <= MAX_FIELD_ELEMENTS)
            .ok_or_else(|| Error::TooLarge(format!("field exceeds {MAX_FIELD_ELEMENTS} elements")))?;
    }
    Ok(n)
}

/// Advance a row-major multi-index (last axis fastest). Wraps to all zeros
/// after the last index.
pub fn advance(idx: &mut [usize], axes: &[Arc<Space>]) {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < axes[k].len() {
            return;
        }
        idx[k] = 0;
    }
}

/// An indexed family `{f_i : i strictly increasing in [0,n)^m}` of m-variable
/// kernels over a common base space, optionally with a trailing value axis:
/// the data of a generalized U-statistic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelFamily {
    m: usize,
    n: usize,
    base: Arc<Space>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    value_axis: Option<Arc<Space>>,
    kernels: Vec<(Vec<usize>, TensorField)>,
}

impl KernelFamily {
    pub fn new(m: usize, n: usize, base: Arc<Space>, value_axis: Option<Arc<Space>>) -> Result<Self> {
        if m > n {
            return Err(Error::BadLevel(format!("arity {m} exceeds {n} coordinates")));
        }
        if let Some(ax) = &value_axis {
            if ax.kind() != SpaceKind::HilbertValue {
                return Err(Error::BadAxis("value axis must be hilbert_value".into()));
            }
        }
        Ok(KernelFamily { m, n, base, value_axis, kernels: Vec::new() })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> &Arc<Space> {
        &self.base
    }

    pub fn value_axis(&self) -> Option<&Arc<Space>> {
        self.value_axis.as_ref()
    }

    /// Insert the kernel for a strictly increasing index tuple (0-based).
    pub fn insert(&mut self, tuple: Vec<usize>, kernel: TensorField) -> Result<()> {
        if tuple.len() != self.m {
            return Err(Error::BadLevel(format!(
                "tuple {tuple:?} has arity {}, family has {}",
                tuple.len(),
                self.m
            )));
        }
        if tuple.windows(2).any(|w| w[0] >= w[1]) || tuple.iter().any(|&i| i >= self.n) {
            return Err(Error::BadLevel(format!(
                "tuple {tuple:?} is not strictly increasing in [0,{})",
                self.n
            )));
        }
        let want_axes = self.m + usize::from(self.value_axis.is_some());
        if kernel.axes().len() != want_axes {
            return Err(Error::BadAxis(format!(
                "kernel for {tuple:?} has {} axes, expected {want_axes}",
                kernel.axes().len()
            )));
        }
        for ax in &kernel.axes()[..self.m] {
            if **ax != *self.base {
                return Err(Error::BadAxis("kernel axis differs from the base space".into()));
            }
        }
        if let Some(v) = &self.value_axis {
            if *kernel.axes()[self.m] != **v {
                return Err(Error::BadAxis("kernel value axis mismatch".into()));
            }
        }
        if self.kernels.iter().any(|(t, _)| t == &tuple) {
            return Err(Error::BadLevel(format!("duplicate tuple {tuple:?}")));
        }
        self.kernels.push((tuple, kernel));
        self.kernels.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(())
    }

    pub fn kernels(&self) -> impl Iterator<Item = (&[usize], &TensorField)> {
        self.kernels.iter().map(|(t, f)| (t.as_slice(), f))
    }

    pub fn get(&self, tuple: &[usize]) -> Option<&TensorField> {
        self.kernels.iter().find(|(t, _)| t == tuple).map(|(_, f)| f)
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    /// All strictly increasing `m`-tuples in `[0,n)`, in lexicographic order.
    pub fn increasing_tuples(m: usize, n: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        if m > n {
            return out;
        }
        let mut t: Vec<usize> = (0..m).collect();
        loop {
            out.push(t.clone());
            // next combination
            let mut k = m;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                if t[k] != k + n - m {
                    break;
                }
                if k == 0 {
                    return out;
                }
            }
            t[k] += 1;
            for j in k + 1..m {
                t[j] = t[j - 1] + 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_space_examples() {
        let s = Space::new(vec![0.5, 0.5], SpaceKind::Probability).unwrap();
        assert_eq!(s.len(), 2);
        let s = Space::new(vec![1.0, 1.0, 1.0], SpaceKind::SigmaFinite).unwrap();
        assert_eq!(s.total_mass(), 3.0);
        assert!(matches!(
            Space::new(vec![0.5, -0.5], SpaceKind::Probability),
            Err(Error::InvalidMeasure(_))
        ));
        assert!(matches!(
            Space::new(vec![0.5, 0.6], SpaceKind::Probability),
            Err(Error::NotProbability(_))
        ));
    }

    #[test]
    fn product_examples() {
        let u = Space::uniform(2);
        let p = product(&[u.clone(), u.clone()]).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.weights().iter().all(|&w| (w - 0.25).abs() < 1e-15));
        let single = product(&[u.clone()]).unwrap();
        assert_eq!(*single, *u);
        let four = Space::uniform(4);
        let spaces: Vec<_> = (0..25).map(|_| four.clone()).collect();
        assert!(matches!(product(&spaces), Err(Error::TooLarge(_))));
    }

    #[test]
    fn union_examples() {
        let one = Arc::new(Space::new(vec![1.0], SpaceKind::SigmaFinite).unwrap());
        let u = disjoint_union(&[one.clone(), one.clone()]).unwrap();
        assert_eq!(u.len(), 2);
        assert_eq!(u.total_mass(), 2.0);

        let p = Space::uniform(3);
        let u = disjoint_union(&[p.clone(), p.clone(), p.clone(), p.clone()]).unwrap();
        assert!((u.total_mass() - 4.0).abs() < 1e-12);

        let a = Space::counting(2);
        let b = Space::counting(3);
        let u = disjoint_union(&[a, b]).unwrap();
        assert_eq!(u.block_offsets(), Some(&[0usize, 2][..]));
    }

    #[test]
    fn integrate_examples() {
        let u = Space::uniform(4);
        let f = TensorField::constant(vec![u.clone()], 2.5).unwrap();
        assert!((f.integrate(&[0]).unwrap().as_scalar() - 2.5).abs() < 1e-15);

        let s = Arc::new(Space::new(vec![0.25, 0.75], SpaceKind::Probability).unwrap());
        let ind = TensorField::new(vec![s], vec![1.0, 0.0]).unwrap();
        assert!((ind.integrate(&[0]).unwrap().as_scalar() - 0.25).abs() < 1e-15);

        // f(x,y) = x*y on uniform {0,1}^2, atoms carrying values 0 and 1:
        // direct 4-term summation gives 1*1*0.25 = 0.25.
        let u2 = Space::uniform(2);
        let f = TensorField::from_fn(vec![u2.clone(), u2.clone()], |idx| (idx[0] * idx[1]) as f64)
            .unwrap();
        assert!((f.integrate(&[0, 1]).unwrap().as_scalar() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn fubini_and_separation() {
        let a = Space::uniform(3);
        let b = Arc::new(Space::new(vec![0.2, 0.3, 0.5], SpaceKind::Probability).unwrap());
        let g = TensorField::new(vec![a.clone()], vec![1.0, -2.0, 0.5]).unwrap();
        let h = TensorField::new(vec![b.clone()], vec![3.0, 0.0, -1.0]).unwrap();
        let gh = TensorField::from_fn(vec![a.clone(), b.clone()], |idx| {
            g.values()[idx[0]] * h.values()[idx[1]]
        })
        .unwrap();
        let lhs = gh.integrate(&[0, 1]).unwrap().as_scalar();
        let rhs = g.integrate(&[0]).unwrap().as_scalar() * h.integrate(&[0]).unwrap().as_scalar();
        assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));

        let step = gh.integrate(&[0]).unwrap().integrate(&[0]).unwrap().as_scalar();
        assert!((step - lhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn flat_roundtrip_is_exact() {
        let a = Space::uniform(2);
        let b = Space::counting(3);
        let u = disjoint_union(&[a.clone(), Space::uniform(2)]).unwrap();
        let f = TensorField::from_fn(vec![a, b, u], |idx| {
            (idx[0] as f64 + 0.1) * (idx[1] as f64 - 0.7) / (idx[2] as f64 + 3.0)
        })
        .unwrap();
        let text = f.write_flat();
        let g = TensorField::read_flat(&text).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn increasing_tuples_enumeration() {
        assert_eq!(KernelFamily::increasing_tuples(2, 4).len(), 6);
        assert_eq!(KernelFamily::increasing_tuples(0, 3), vec![Vec::<usize>::new()]);
        assert_eq!(
            KernelFamily::increasing_tuples(2, 3),
            vec![vec![0, 1], vec![0, 2], vec![1, 2]]
        );
    }
}
