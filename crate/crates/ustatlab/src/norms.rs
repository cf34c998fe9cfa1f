//! Exact evaluation of `L^p`, `ℓ^p` and mixed `L^q(L^p)` norms, and of the
//! U-statistic functionals on the left-hand side of the moment inequalities,
//! with a Monte Carlo fallback for the latter.
//!
//! A [`NormSpec`] is a chain of layers, outermost first; each layer reduces
//! one group of axes by `x ↦ (Σ w·x^p)^{1/p}`. Exponents are arbitrary
//! positive reals (quasinorms for `p < 1`); `f64::INFINITY` denotes the
//! (unweighted) max and is used for dual norms.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::spaces::{advance, element_count, KernelFamily, Space, TensorField};
use crate::{Error, Result};

/// One reduction layer of a mixed norm: exponent and the axes it consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormLayer {
    pub p: f64,
    pub axes: Vec<usize>,
}

/// A mixed-norm specification: layers outermost first, every axis of the
/// target field in exactly one layer. `L^q(A, L^p(B))` is
/// `NormSpec::nested(&[(q, A), (p, B)])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    layers: Vec<NormLayer>,
}

impl NormSpec {
    pub fn nested(layers: &[(f64, &[usize])]) -> Self {
        NormSpec {
            layers: layers
                .iter()
                .map(|(p, axes)| NormLayer { p: *p, axes: axes.to_vec() })
                .collect(),
        }
    }

    /// Single-layer `L^p` over the given axes.
    pub fn lp(p: f64, axes: &[usize]) -> Self {
        Self::nested(&[(p, axes)])
    }

    /// Single-layer `L^p` over all `n_axes` axes of the target field.
    pub fn flat(p: f64, n_axes: usize) -> Self {
        let axes: Vec<usize> = (0..n_axes).collect();
        Self::lp(p, &axes)
    }

    pub fn layers(&self) -> &[NormLayer] {
        &self.layers
    }

    /// All layer exponents are `>= 1` (convexity; required by the solver).
    pub fn is_convex(&self) -> bool {
        self.layers.iter().all(|l| l.p >= 1.0)
    }

    /// Conjugate-exponent spec: `p ↦ p/(p-1)`, with `1 ↦ ∞` and `∞ ↦ 1`.
    /// Under the weighted pairing `⟨f,g⟩ = Σ f g w` this evaluates the dual
    /// norm of a mixed norm.
    pub fn conjugate(&self) -> Self {
        NormSpec {
            layers: self
                .layers
                .iter()
                .map(|l| NormLayer {
                    p: if l.p == 1.0 {
                        f64::INFINITY
                    } else if l.p.is_infinite() {
                        1.0
                    } else {
                        l.p / (l.p - 1.0)
                    },
                    axes: l.axes.clone(),
                })
                .collect(),
        }
    }

    fn validate_for(&self, n_axes: usize) -> Result<()> {
        let mut seen = vec![false; n_axes];
        for layer in &self.layers {
            if !(layer.p > 0.0) {
                return Err(Error::BadSpec(format!("exponent {} is not positive", layer.p)));
            }
            for &a in &layer.axes {
                if a >= n_axes {
                    return Err(Error::BadSpec(format!("axis {a} of a {n_axes}-axis field")));
                }
                if seen[a] {
                    return Err(Error::BadSpec(format!("axis {a} appears twice")));
                }
                seen[a] = true;
            }
        }
        if let Some(a) = seen.iter().position(|&s| !s) {
            return Err(Error::BadSpec(format!("axis {a} not covered by the spec")));
        }
        Ok(())
    }

    /// Short human-readable form, e.g. `L1.0[0]∘L2.0[1,2]`.
    pub fn describe(&self) -> String {
        self.layers
            .iter()
            .map(|l| {
                let axes: Vec<String> = l.axes.iter().map(|a| a.to_string()).collect();
                format!("L{}[{}]", l.p, axes.join(","))
            })
            .collect::<Vec<_>>()
            .join("∘")
    }
}

/// Compiled evaluation plan for one (field shape, spec) pair: entries are
/// permuted so each layer's atoms are contiguous, and layer weights are
/// folded into per-entry scales (`w^{1/p}` per layer), so evaluation reduces
/// to an unweighted nested power sum.
#[derive(Debug, Clone)]
pub struct NormPlan {
    /// plan position -> original flat index
    perm: Vec<usize>,
    scale: Vec<f64>,
    /// layer exponents, outermost first
    exps: Vec<f64>,
    /// atoms per layer, outermost first
    sizes: Vec<usize>,
}

impl NormPlan {
    pub fn new(field: &TensorField, spec: &NormSpec) -> Result<Self> {
        spec.validate_for(field.axes().len())?;
        let axes = field.axes();
        let strides = field.strides();
        // Per-layer flattened index tables: (flat offset within the layer,
        // stride contribution in the original array, weight).
        let mut layer_tables: Vec<Vec<(usize, f64)>> = Vec::new();
        for layer in &spec.layers {
            let mut table = vec![(0usize, 1.0f64)];
            for &a in &layer.axes {
                let mut next = Vec::with_capacity(table.len() * axes[a].len());
                for &(off, w) in &table {
                    for (i, &wa) in axes[a].weights().iter().enumerate() {
                        next.push((off + i * strides[a], w * wa));
                    }
                }
                table = next;
            }
            layer_tables.push(table);
        }
        let sizes: Vec<usize> = layer_tables.iter().map(|t| t.len()).collect();
        let total: usize = sizes.iter().product();
        debug_assert_eq!(total, field.len());
        let mut perm = Vec::with_capacity(total);
        let mut scale = Vec::with_capacity(total);
        let mut pos = vec![0usize; spec.layers.len()];
        for _ in 0..total {
            let mut off = 0usize;
            let mut s = 1.0f64;
            for (j, &k) in pos.iter().enumerate() {
                let (o, w) = layer_tables[j][k];
                off += o;
                let p = spec.layers[j].p;
                if p.is_finite() {
                    s *= w.powf(1.0 / p);
                }
            }
            perm.push(off);
            scale.push(s);
            // advance pos, innermost layer fastest
            for j in (0..pos.len()).rev() {
                pos[j] += 1;
                if pos[j] < sizes[j] {
                    break;
                }
                pos[j] = 0;
            }
        }
        Ok(NormPlan {
            perm,
            scale,
            exps: spec.layers.iter().map(|l| l.p).collect(),
            sizes,
        })
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// plan position -> original flat index
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// per plan position, the folded layer-weight factor `Π w^{1/p}`
    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// atoms per layer, outermost first
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    fn leaf_exp(&self) -> f64 {
        *self.exps.last().unwrap()
    }

    /// Evaluate the norm; `eps > 0` replaces `|x|` at the leaves by
    /// `sqrt(x² + eps²)` (the smoothing used by the K-functional solver).
    pub fn eval(&self, values: &[f64], eps: f64) -> f64 {
        let k = self.exps.len();
        let mut acc = vec![0.0f64; k];
        let leaf_p = self.leaf_exp();
        let leaf_max = leaf_p.is_infinite();
        for (pos, (&idx, &s)) in self.perm.iter().zip(&self.scale).enumerate() {
            let x = values[idx] * s;
            let a = if eps > 0.0 { (x * x + eps * eps).sqrt() } else { x.abs() };
            if leaf_max {
                acc[k - 1] = acc[k - 1].max(a);
            } else {
                acc[k - 1] += powp(a, leaf_p);
            }
            // Fold completed layers into their parents.
            let mut block = 1usize;
            for j in (1..k).rev() {
                block *= self.sizes[j];
                if (pos + 1) % block != 0 {
                    break;
                }
                let v = finish(acc[j], self.exps[j]);
                acc[j] = 0.0;
                if self.exps[j - 1].is_infinite() {
                    acc[j - 1] = acc[j - 1].max(v);
                } else {
                    acc[j - 1] += powp(v, self.exps[j - 1]);
                }
            }
        }
        finish(acc[0], self.exps[0])
    }

    /// Value and gradient of the (smoothed) norm. Requires finite exponents.
    pub fn eval_grad(&self, values: &[f64], eps: f64, grad: &mut [f64]) -> f64 {
        debug_assert!(self.exps.iter().all(|p| p.is_finite()));
        let k = self.exps.len();
        // Forward pass: per-layer node values. nodes[j] has length
        // sizes[0]*...*sizes[j-1] and stores finished layer-j values.
        let mut counts = vec![1usize; k + 1];
        for j in 1..=k {
            counts[j] = counts[j - 1] * self.sizes[j - 1];
        }
        let mut nodes: Vec<Vec<f64>> = (0..=k).map(|j| vec![0.0f64; counts[j]]).collect();
        // leaf accumulation
        let mut leaf = vec![0.0f64; self.perm.len()];
        for (pos, (&idx, &s)) in self.perm.iter().zip(&self.scale).enumerate() {
            let x = values[idx] * s;
            leaf[pos] = (x * x + eps * eps).sqrt();
        }
        // nodes[k] = leaf magnitudes; reduce upward
        nodes[k] = leaf;
        for j in (0..k).rev() {
            let p = self.exps[j];
            let (head, tail) = nodes.split_at_mut(j + 1);
            let src = &tail[0];
            let dst = &mut head[j];
            for (b, d) in dst.iter_mut().enumerate() {
                let mut s = 0.0f64;
                for i in 0..self.sizes[j] {
                    s += powp(src[b * self.sizes[j] + i], p);
                }
                *d = finish(s, p);
            }
        }
        let value = nodes[0][0];
        // Backward pass: dN/dnode. For a layer value v = (Σ u_i^p)^{1/p},
        // dv/du_i = (u_i / v)^{p-1}, with 0/0 treated as 0.
        let mut adj: Vec<f64> = vec![1.0];
        for j in 0..k {
            let p = self.exps[j];
            let mut next = vec![0.0f64; counts[j + 1]];
            for (b, &a) in adj.iter().enumerate() {
                let v = nodes[j][b];
                if v <= 0.0 || a == 0.0 {
                    continue;
                }
                for i in 0..self.sizes[j] {
                    let u = nodes[j + 1][b * self.sizes[j] + i];
                    if u > 0.0 {
                        next[b * self.sizes[j] + i] = a * powp(u / v, p - 1.0);
                    }
                }
            }
            adj = next;
        }
        // Leaves: d sqrt(x²+eps²)/dx = x/sqrt(x²+eps²), times the scale.
        for g in grad.iter_mut() {
            *g = 0.0;
        }
        for (pos, (&idx, &s)) in self.perm.iter().zip(&self.scale).enumerate() {
            let x = values[idx] * s;
            let mag = nodes[k][pos];
            if mag > 0.0 {
                grad[idx] += adj[pos] * (x / mag) * s;
            }
        }
        value
    }
}

#[inline]
fn powp(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else {
        x.powf(p)
    }
}

#[inline]
fn finish(acc: f64, p: f64) -> f64 {
    if p.is_infinite() {
        acc
    } else if p == 1.0 {
        acc
    } else if p == 2.0 {
        acc.sqrt()
    } else {
        acc.powf(1.0 / p)
    }
}

/// Exact weighted evaluation of a mixed norm.
pub fn norm(f: &TensorField, spec: &NormSpec) -> Result<f64> {
    Ok(NormPlan::new(f, spec)?.eval(f.values(), 0.0))
}

/// Dual norm of `f` under the weighted pairing, i.e. the conjugate spec
/// evaluated exactly (`L^1` layers become maxima).
pub fn dual_norm(f: &TensorField, spec: &NormSpec) -> Result<f64> {
    Ok(NormPlan::new(f, &spec.conjugate())?.eval(f.values(), 0.0))
}

/// How to evaluate a U-statistic functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method {
    Exact,
    /// Monte Carlo with `samples` draws from the product measure, seeded;
    /// per-sample streams are counter-derived so results are order-independent.
    Mc { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mode {
    Coupled,
    Decoupled,
}

/// Value of a U-statistic functional, with a standard error in MC mode.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UStatValue {
    pub value: f64,
    pub std_err: Option<f64>,
}

/// The left-hand-side functional `∫ (Σ_i f_i(…)^p)^{1/p}` of the moment
/// inequalities, over `Ω^n` (coupled) or `(Ω^n)^m` (decoupled). Kernels must
/// be nonnegative; `p` is an arbitrary positive exponent.
pub fn ustat_lhs(k: &KernelFamily, p: f64, mode: Mode, method: Method) -> Result<UStatValue> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::BadSpec(format!("exponent {p} is not a positive real")));
    }
    if k.value_axis().is_some() {
        return Err(Error::BadAxis("U-statistic functionals take scalar kernels".into()));
    }
    for (tuple, kernel) in k.kernels() {
        if !kernel.is_nonnegative() {
            return Err(Error::NotNonnegative(format!("kernel {tuple:?} has negative values")));
        }
    }
    let tuples: Vec<(Vec<usize>, &TensorField)> =
        k.kernels().map(|(t, f)| (t.to_vec(), f)).collect();
    let groups = match mode {
        Mode::Coupled => 1,
        Mode::Decoupled => k.m().max(1),
    };
    lhs_general(k.n(), groups, k.base(), &tuples, p, method)
}

/// Shared evaluator for `∫ (Σ_i f_i^p)^{1/p}` over `groups` independent
/// copies of `Ω^n`; slot `j` of a tuple reads group `min(j, groups-1)`.
/// Used by [`ustat_lhs`] and by the decomposition pipelines (which run over
/// arbitrary, not necessarily increasing, index tuples).
pub(crate) fn lhs_general(
    n: usize,
    groups: usize,
    base: &Arc<Space>,
    tuples: &[(Vec<usize>, &TensorField)],
    p: f64,
    method: Method,
) -> Result<UStatValue> {
    match method {
        Method::Exact => {
            let coords = n * groups;
            element_count(&vec![base.clone(); coords])?;
            let axes = vec![base.clone(); coords];
            let mut idx = vec![0usize; coords];
            let total: usize = base.len().checked_pow(coords as u32).unwrap();
            let mut sum = 0.0f64;
            let mut comp = 0.0f64; // Kahan compensation
            for _ in 0..total {
                let integrand = integrand_at(&idx, n, groups, tuples, p);
                let mut w = 1.0f64;
                for &i in &idx {
                    w *= base.weight(i);
                }
                let term = integrand * w - comp;
                let t = sum + term;
                comp = (t - sum) - term;
                sum = t;
                advance(&mut idx, &axes);
            }
            Ok(UStatValue { value: sum, std_err: None })
        }
        Method::Mc { samples, seed } => {
            if samples == 0 {
                return Err(Error::BadSpec("mc with zero samples".into()));
            }
            let coords = n * groups;
            let cdf = cumulative(base.weights());
            let mut sum = 0.0f64;
            let mut comp = 0.0f64;
            let mut sumsq = 0.0f64;
            let mut idx = vec![0usize; coords];
            for s in 0..samples {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(s);
                for slot in idx.iter_mut() {
                    *slot = draw_atom(&cdf, rng.gen::<f64>());
                }
                let v = integrand_at(&idx, n, groups, tuples, p);
                let term = v - comp;
                let t = sum + term;
                comp = (t - sum) - term;
                sum = t;
                sumsq += v * v;
            }
            let nf = samples as f64;
            let mean = sum / nf;
            let var = (sumsq / nf - mean * mean).max(0.0);
            let std_err = (var / nf).sqrt();
            Ok(UStatValue { value: mean, std_err: Some(std_err) })
        }
    }
}

#[inline]
fn integrand_at(
    idx: &[usize],
    n: usize,
    groups: usize,
    tuples: &[(Vec<usize>, &TensorField)],
    p: f64,
) -> f64 {
    let mut acc = 0.0f64;
    for (tuple, kernel) in tuples {
        let mut kflat = 0usize;
        for (j, &i) in tuple.iter().enumerate() {
            let group = j.min(groups - 1);
            kflat = kflat * kernel.axes()[j].len() + idx[group * n + i];
        }
        // Kernels may carry extra trailing axes only when those have length
        // folded into kflat already; scalar kernels by contract.
        acc += powp(kernel.values()[kflat], p);
    }
    finish(acc, p)
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect()
}

fn draw_atom(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Pointwise Euclidean length of the Hoeffding components of levels `<= max`:
/// `x ↦ sqrt(Σ_{|A| <= max} P_A f(x)²)`. Fails with
/// [`Error::HigherLevelsPresent`] unless the higher levels vanish.
pub fn square_function(f: &TensorField, max_level: usize) -> Result<TensorField> {
    let shape = crate::hoeffding::coord_shape(f)?;
    let mut out = TensorField::zeros(f.axes().to_vec())?;
    let tol = 1e-10 * f.max_abs().max(1.0);
    for a in crate::hoeffding::CoordSet::all(shape.n) {
        let pa = crate::hoeffding::hoeffding_project(f, a)?;
        if a.len() > max_level {
            if pa.max_abs() > tol {
                return Err(Error::HigherLevelsPresent(format!(
                    "level {} component has magnitude {}",
                    a.len(),
                    pa.max_abs()
                )));
            }
            continue;
        }
        out = out.zip(&pa, |s, v| s + v * v)?;
    }
    Ok(out.map(f64::sqrt))
}
