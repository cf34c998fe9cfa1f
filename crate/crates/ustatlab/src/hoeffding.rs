//! Conditional expectations `E_A`, Hoeffding projections `P_A` and `P_m`, the
//! full Hoeffding decomposition, kernel extraction and U-statistic assembly.
//!
//! A function on `Ω^n` decomposes uniquely as `f = Σ_A P_A f` over subsets
//! `A ⊆ {0,…,n-1}`, where `P_A f` depends only on the coordinates in `A` and
//! has mean zero in each of them. `P_A` is the tensor factor operator that
//! applies `id − E` on the axes in `A` and `E` on the rest; the
//! inclusion–exclusion form `Σ_{B⊆A} (−1)^{|A\B|} E_B` is kept in
//! [`crate::oracle`] as an independent cross-check.

use std::sync::Arc;

use crate::spaces::{advance, KernelFamily, Space, SpaceKind, TensorField};
use crate::{Error, Result};

/// Guard for operations that enumerate all `2^n` coordinate subsets.
pub const MAX_COORDS: usize = 16;

/// A subset of coordinate positions `0..n`, stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CoordSet(pub u32);

impl CoordSet {
    pub const EMPTY: CoordSet = CoordSet(0);

    pub fn from_slice(coords: &[usize]) -> Self {
        let mut m = 0u32;
        for &c in coords {
            m |= 1 << c;
        }
        CoordSet(m)
    }

    pub fn full(n: usize) -> Self {
        CoordSet(((1u64 << n) - 1) as u32)
    }

    pub fn contains(self, c: usize) -> bool {
        self.0 >> c & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: CoordSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&c| self.contains(c))
    }

    /// All subsets of `{0,…,n-1}` in increasing mask order.
    pub fn all(n: usize) -> impl Iterator<Item = CoordSet> {
        (0u32..1 << n).map(CoordSet)
    }

    /// All subsets of `self`, in increasing mask order.
    pub fn subsets(self) -> impl Iterator<Item = CoordSet> {
        let mask = self.0;
        (0..=mask).filter(move |s| s & !mask == 0).map(CoordSet)
    }
}

/// Shape of a field used by the Hoeffding operators: `n` coordinate copies of
/// one probability space, plus an optional trailing value axis that every
/// operator leaves untouched.
pub struct CoordShape {
    pub n: usize,
    pub has_value_axis: bool,
}

/// Validate that `f` lives on `Ω^n` for a single probability space (an
/// optional `hilbert_value` axis may trail the coordinate axes).
pub fn coord_shape(f: &TensorField) -> Result<CoordShape> {
    let axes = f.axes();
    if axes.is_empty() {
        return Ok(CoordShape { n: 0, has_value_axis: false });
    }
    let has_value_axis = axes.last().map(|a| a.kind() == SpaceKind::HilbertValue) == Some(true);
    let n = axes.len() - usize::from(has_value_axis);
    let coords = &axes[..n];
    for ax in coords {
        if ax.kind() != SpaceKind::Probability {
            return Err(Error::NotProbability("coordinate axes must be probability spaces".into()));
        }
        if **ax != *coords[0] {
            return Err(Error::BadAxis("coordinate axes must be copies of one space".into()));
        }
    }
    Ok(CoordShape { n, has_value_axis })
}

/// Conditional expectation `E_A f`: integrates away the dependence on every
/// coordinate outside `A`. Returned on the same axis list (constant along the
/// integrated axes) so that projections compose.
pub fn cond_expect(f: &TensorField, a: CoordSet) -> Result<TensorField> {
    let shape = coord_shape(f)?;
    let out_axes: Vec<usize> = (0..shape.n).filter(|&c| !a.contains(c)).collect();
    if out_axes.is_empty() {
        return Ok(f.clone());
    }
    f.integrate_keep(&out_axes)
}

/// Hoeffding projection `P_A f`, computed by applying `id − E` on the axes in
/// `A` and `E` on the remaining coordinate axes, one axis at a time.
pub fn hoeffding_project(f: &TensorField, a: CoordSet) -> Result<TensorField> {
    let shape = coord_shape(f)?;
    let mut cur = f.clone();
    for c in 0..shape.n {
        let mean = cur.integrate_keep(&[c])?;
        cur = if a.contains(c) { cur.sub(&mean)? } else { mean };
    }
    Ok(cur)
}

/// Level projection `P_m f = Σ_{|B| = m} P_B f`.
pub fn hoeffding_level(f: &TensorField, m: usize) -> Result<TensorField> {
    let shape = coord_shape(f)?;
    if m > shape.n {
        return Err(Error::BadLevel(format!("level {m} of an {}-coordinate field", shape.n)));
    }
    let mut out = TensorField::zeros(f.axes().to_vec())?;
    for b in CoordSet::all(shape.n).filter(|b| b.len() == m) {
        out = out.add(&hoeffding_project(f, b)?)?;
    }
    Ok(out)
}

/// The full decomposition: all `2^n` components `P_B f`, keyed by subset, in
/// increasing mask order. Their sum reconstructs `f` to rounding error.
pub fn hoeffding_decompose(f: &TensorField) -> Result<Vec<(CoordSet, TensorField)>> {
    let shape = coord_shape(f)?;
    if shape.n > MAX_COORDS {
        return Err(Error::TooLarge(format!("2^{} Hoeffding components", shape.n)));
    }
    CoordSet::all(shape.n).map(|b| Ok((b, hoeffding_project(f, b)?))).collect()
}

/// Extract the level-`m` kernels of `f`: for each increasing tuple `i`, the
/// m-variable kernel obtained by restricting `P_i f` to its supporting
/// coordinates. Each kernel is mean zero in every variable.
pub fn extract_kernels(f: &TensorField, m: usize) -> Result<KernelFamily> {
    let shape = coord_shape(f)?;
    if shape.n > MAX_COORDS {
        return Err(Error::TooLarge(format!("2^{} Hoeffding components", shape.n)));
    }
    if m > shape.n {
        return Err(Error::BadLevel(format!("level {m} of an {}-coordinate field", shape.n)));
    }
    let base = if shape.n > 0 {
        f.axes()[0].clone()
    } else {
        // A zero-coordinate field only has a mean; any probability base works.
        Space::uniform(1)
    };
    let value_axis = shape.has_value_axis.then(|| f.axes().last().unwrap().clone());
    let mut family = KernelFamily::new(m, shape.n, base, value_axis)?;
    for tuple in KernelFamily::increasing_tuples(m, shape.n) {
        let proj = hoeffding_project(f, CoordSet::from_slice(&tuple))?;
        // P_i f is constant along the other coordinates; integrating them out
        // against probability weights is the exact restriction.
        let drop: Vec<usize> = (0..shape.n).filter(|c| !tuple.contains(c)).collect();
        family.insert(tuple, proj.integrate(&drop)?)?;
    }
    Ok(family)
}

/// Assemble the U-statistic of a kernel family.
///
/// Coupled mode returns `x ↦ Σ_i f_i(x_{i_1},…,x_{i_m})` on `Ω^n`; decoupled
/// mode returns the same sum on `(Ω^n)^m` with slot `j` of each kernel fed by
/// the `j`-th independent copy.
pub fn assemble_ustat(k: &KernelFamily, decoupled: bool) -> Result<TensorField> {
    let groups = if decoupled { k.m().max(1) } else { 1 };
    let mut axes: Vec<Arc<Space>> = Vec::new();
    for _ in 0..groups * k.n() {
        axes.push(k.base().clone());
    }
    if let Some(v) = k.value_axis() {
        axes.push(v.clone());
    }
    let vdim = k.value_axis().map_or(1, |v| v.len());
    let mut out = TensorField::zeros(axes)?;
    let n = k.n();
    let coords = groups * n;
    let mut idx = vec![0usize; coords];
    let total = out.len() / vdim;
    let mut kernel_idx: Vec<usize> = Vec::new();
    for flat in 0..total {
        for (tuple, kernel) in k.kernels() {
            kernel_idx.clear();
            for (j, &i) in tuple.iter().enumerate() {
                let group = if decoupled { j } else { 0 };
                kernel_idx.push(idx[group * n + i]);
            }
            let kflat = {
                let mut f = 0usize;
                for (&i, ax) in kernel_idx.iter().zip(kernel.axes()) {
                    f = f * ax.len() + i;
                }
                f * vdim
            };
            for v in 0..vdim {
                out.values_mut()[flat * vdim + v] += kernel.values()[kflat + v];
            }
        }
        advance(&mut idx, &out.axes()[..coords]);
    }
    Ok(out)
}

/// Assemble kernel evaluations side by side instead of summing them: the
/// result carries a trailing value axis indexed by the kernel tuples, so that
/// `L^1(coordinates, ℓ^p(index))` norms of the assembly reproduce the
/// U-statistic functionals of [`crate::norms`].
pub fn assemble_indexed(k: &KernelFamily, decoupled: bool) -> Result<TensorField> {
    if k.value_axis().is_some() {
        return Err(Error::BadAxis("indexed assembly requires scalar kernels".into()));
    }
    if k.is_empty() {
        return Err(Error::BadLevel("indexed assembly of an empty family".into()));
    }
    let groups = if decoupled { k.m().max(1) } else { 1 };
    let n = k.n();
    let mut axes: Vec<Arc<Space>> = Vec::new();
    for _ in 0..groups * n {
        axes.push(k.base().clone());
    }
    axes.push(Space::hilbert(k.len()));
    let mut out = TensorField::zeros(axes)?;
    let coords = groups * n;
    let kcount = k.len();
    let mut idx = vec![0usize; coords];
    let total = out.len() / kcount;
    for flat in 0..total {
        for (slot, (tuple, kernel)) in k.kernels().enumerate() {
            let mut kflat = 0usize;
            for (j, &i) in tuple.iter().enumerate() {
                let group = if decoupled { j } else { 0 };
                kflat = kflat * kernel.axes()[j].len() + idx[group * n + i];
            }
            out.values_mut()[flat * kcount + slot] = kernel.values()[kflat];
        }
        advance(&mut idx, &out.axes()[..coords]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::random_field;
    use crate::oracle::projection_inclusion_exclusion;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_field(n: usize, atoms: usize, seed: u64) -> TensorField {
        let base = Space::uniform(atoms);
        random_field(&vec![base; n], &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn cond_expect_examples() {
        let u = Space::uniform(2);
        // f = indicator(x1 = atom 0) on Ω², conditioned on coordinate 2.
        let f = TensorField::from_fn(vec![u.clone(), u.clone()], |i| f64::from(i[0] == 0)).unwrap();
        let e = cond_expect(&f, CoordSet::from_slice(&[1])).unwrap();
        assert!(e.values().iter().all(|&v| (v - 0.5).abs() < 1e-15));

        let f = uniform_field(3, 2, 1);
        let e = cond_expect(&f, CoordSet::full(3)).unwrap();
        assert_eq!(e, f);

        // A = {0}: matches direct weighted summation over the other axes.
        let f = uniform_field(2, 3, 2);
        let e = cond_expect(&f, CoordSet::from_slice(&[0])).unwrap();
        for x0 in 0..3 {
            let direct: f64 = (0..3).map(|x1| f.get(&[x0, x1]) / 3.0).sum();
            assert!((e.get(&[x0, 0]) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn projection_of_constants_and_tensors() {
        let u = Space::uniform(3);
        let c = TensorField::constant(vec![u.clone(), u.clone()], 4.2).unwrap();
        let p0 = hoeffding_project(&c, CoordSet::EMPTY).unwrap();
        assert!(p0.values().iter().all(|&v| (v - 4.2).abs() < 1e-14));
        for a in CoordSet::all(2).skip(1) {
            let pa = hoeffding_project(&c, a).unwrap();
            assert!(pa.max_abs() < 1e-14);
        }

        // Mean-zero g ⊗ h: everything lands in the top component.
        let g = [1.0, -2.0, 1.0];
        let h = [0.5, 0.5, -1.0];
        let f = TensorField::from_fn(vec![u.clone(), u.clone()], |i| g[i[0]] * h[i[1]]).unwrap();
        let top = hoeffding_project(&f, CoordSet::full(2)).unwrap();
        for (a, b) in f.values().iter().zip(top.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        for a in CoordSet::all(2).take(3) {
            assert!(hoeffding_project(&f, a).unwrap().max_abs() < 1e-14);
        }
    }

    #[test]
    fn tensor_formula_matches_inclusion_exclusion() {
        let f = uniform_field(3, 3, 7);
        for a in CoordSet::all(3) {
            let fast = hoeffding_project(&f, a).unwrap();
            let slow = projection_inclusion_exclusion(&f, a).unwrap();
            assert!(fast.sub(&slow).unwrap().max_abs() <= 1e-12);
        }
    }

    #[test]
    fn level_sums_and_identity() {
        let f = uniform_field(3, 2, 9);
        let lvl0 = hoeffding_level(&f, 0).unwrap();
        let mean = f.integrate(&[0, 1, 2]).unwrap().as_scalar();
        assert!(lvl0.values().iter().all(|&v| (v - mean).abs() < 1e-13));

        let mut sum = TensorField::zeros(f.axes().to_vec()).unwrap();
        for m in 0..=3 {
            sum = sum.add(&hoeffding_level(&f, m).unwrap()).unwrap();
        }
        assert!(sum.sub(&f).unwrap().max_abs() <= 1e-12);

        // Level 2 equals the sum over the three two-element subsets.
        let mut two = TensorField::zeros(f.axes().to_vec()).unwrap();
        for b in [[0, 1], [0, 2], [1, 2]] {
            two = two.add(&hoeffding_project(&f, CoordSet::from_slice(&b)).unwrap()).unwrap();
        }
        assert!(two.sub(&hoeffding_level(&f, 2).unwrap()).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn decompose_orthogonality_and_support() {
        let f = uniform_field(3, 2, 11);
        let parts = hoeffding_decompose(&f).unwrap();
        let mut sum = TensorField::zeros(f.axes().to_vec()).unwrap();
        for (_, p) in &parts {
            sum = sum.add(p).unwrap();
        }
        assert!(sum.sub(&f).unwrap().max_abs() <= 1e-12);
        for (a, pa) in &parts {
            for (b, pb) in &parts {
                if a != b {
                    assert!(pa.inner(pb).unwrap().abs() <= 1e-10);
                }
            }
        }

        // One-variable split.
        let u = Space::uniform(3);
        let f1 = TensorField::new(vec![u], vec![1.0, 2.0, 6.0]).unwrap();
        let parts = hoeffding_decompose(&f1).unwrap();
        assert_eq!(parts.len(), 2);
        assert!(parts[0].1.values().iter().all(|&v| (v - 3.0).abs() < 1e-14));

        // F_A-measurable f has no components outside A.
        let g = uniform_field(1, 2, 13);
        let f = TensorField::from_fn(vec![Space::uniform(2), Space::uniform(2)], |i| {
            g.values()[i[0]]
        })
        .unwrap();
        let a = CoordSet::from_slice(&[0]);
        for (b, pb) in hoeffding_decompose(&f).unwrap() {
            if !b.is_subset_of(a) {
                assert!(pb.max_abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn idempotence_partial_sums_self_adjointness_mean_zero() {
        let f = uniform_field(3, 3, 17);
        let g = uniform_field(3, 3, 18);
        for a in CoordSet::all(3) {
            let pa = hoeffding_project(&f, a).unwrap();
            assert!(hoeffding_project(&pa, a).unwrap().sub(&pa).unwrap().max_abs() <= 1e-12);
            // Self-adjointness.
            let lhs = pa.inner(&g).unwrap();
            let rhs = f.inner(&hoeffding_project(&g, a).unwrap()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
            // Partial sums Σ_{B⊆A} P_B f = E_A f.
            let mut sum = TensorField::zeros(f.axes().to_vec()).unwrap();
            for b in a.subsets() {
                sum = sum.add(&hoeffding_project(&f, b).unwrap()).unwrap();
            }
            assert!(sum.sub(&cond_expect(&f, a).unwrap()).unwrap().max_abs() <= 1e-12);
            // Mean zero along every coordinate of A.
            for c in a.iter() {
                assert!(pa.integrate_keep(&[c]).unwrap().max_abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn extract_and_assemble_roundtrip() {
        // f(x) = g(x_2) with mean-zero g, n = 3, m = 1: a single kernel.
        let u = Space::uniform(2);
        let g = [1.5, -1.5];
        let f = TensorField::from_fn(vec![u.clone(), u.clone(), u.clone()], |i| g[i[1]]).unwrap();
        let fam = extract_kernels(&f, 1).unwrap();
        for (tuple, kernel) in fam.kernels() {
            if tuple == [1] {
                assert!((kernel.values()[0] - 1.5).abs() < 1e-14);
            } else {
                assert!(kernel.max_abs() < 1e-14);
            }
        }

        // m = 0 is the plain mean.
        let f = uniform_field(2, 3, 19);
        let fam0 = extract_kernels(&f, 0).unwrap();
        let mean = f.integrate(&[0, 1]).unwrap().as_scalar();
        assert!((fam0.get(&[]).unwrap().as_scalar() - mean).abs() < 1e-13);

        // Reassembling level-m kernels reproduces hoeffding_level(f, m).
        let f = uniform_field(3, 2, 23);
        for m in 0..=3 {
            let fam = extract_kernels(&f, m).unwrap();
            let assembled = assemble_ustat(&fam, false).unwrap();
            let level = hoeffding_level(&f, m).unwrap();
            assert!(assembled.sub(&level).unwrap().max_abs() <= 1e-12);
        }
    }

    #[test]
    fn assembly_examples() {
        let u = Space::uniform(2);
        // Single kernel family, coupled, m = 1: f(x) = f_1(x_1).
        let mut fam = KernelFamily::new(1, 2, u.clone(), None).unwrap();
        fam.insert(vec![0], TensorField::new(vec![u.clone()], vec![2.0, -1.0]).unwrap()).unwrap();
        let f = assemble_ustat(&fam, false).unwrap();
        assert_eq!(f.get(&[0, 1]), 2.0);
        assert_eq!(f.get(&[1, 0]), -1.0);

        // Empty family: the zero field.
        let empty = KernelFamily::new(1, 2, u.clone(), None).unwrap();
        assert_eq!(assemble_ustat(&empty, false).unwrap().max_abs(), 0.0);

        // m = 2, n = 3: coupled assembly at one atom tuple equals the hand sum
        // over the three index pairs.
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut fam = KernelFamily::new(2, 3, u.clone(), None).unwrap();
        for t in KernelFamily::increasing_tuples(2, 3) {
            fam.insert(t, random_field(&[u.clone(), u.clone()], &mut rng)).unwrap();
        }
        let f = assemble_ustat(&fam, false).unwrap();
        let x = [1usize, 0, 1];
        let hand: f64 = [(0usize, 1usize), (0, 2), (1, 2)]
            .iter()
            .map(|&(i, j)| fam.get(&[i, j]).unwrap().get(&[x[i], x[j]]))
            .sum();
        assert!((f.get(&x) - hand).abs() < 1e-14);

        // Decoupled assembly feeds slot j from copy j.
        let dec = assemble_ustat(&fam, true).unwrap();
        assert_eq!(dec.axes().len(), 6);
        let y = [0usize, 1, 0, 1, 1, 0];
        let hand: f64 = [(0usize, 1usize), (0, 2), (1, 2)]
            .iter()
            .map(|&(i, j)| fam.get(&[i, j]).unwrap().get(&[y[i], y[3 + j]]))
            .sum();
        assert!((dec.get(&y) - hand).abs() < 1e-14);
    }
}
