//! Seeded instance builders shared by the checkers, the CLI runner and the
//! test suites.
//!
//! Every batch entry point derives a per-instance generator as
//! `ChaCha8Rng::seed_from_u64(master).set_stream(k)`, so instance `k` is
//! reproducible in isolation and results do not depend on evaluation order.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::spaces::{KernelFamily, Space, SpaceKind, TensorField};

/// The per-instance stream for entry `k` under a master seed.
pub fn instance_rng(master: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(k);
    rng
}

/// Random probability space with `atoms` atoms and weights bounded away from
/// zero (each at least `1/(4·atoms)`).
pub fn random_prob_space(atoms: usize, rng: &mut ChaCha8Rng) -> Arc<Space> {
    let raw: Vec<f64> = (0..atoms).map(|_| 0.25 + rng.gen::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    Arc::new(Space::new(raw.iter().map(|w| w / total).collect(), SpaceKind::Probability).unwrap())
}

/// Random field with values uniform in [-1, 1).
pub fn random_field(axes: &[Arc<Space>], rng: &mut ChaCha8Rng) -> TensorField {
    TensorField::from_fn(axes.to_vec(), |_| 2.0 * rng.gen::<f64>() - 1.0).unwrap()
}

/// Random field with values uniform in [0, 1).
pub fn random_nonneg_field(axes: &[Arc<Space>], rng: &mut ChaCha8Rng) -> TensorField {
    TensorField::from_fn(axes.to_vec(), |_| rng.gen::<f64>()).unwrap()
}

/// Random nonnegative kernel family on `Ω^m` over all increasing tuples.
pub fn random_nonneg_family(
    m: usize,
    n: usize,
    base: &Arc<Space>,
    rng: &mut ChaCha8Rng,
) -> KernelFamily {
    let mut fam = KernelFamily::new(m, n, base.clone(), None).unwrap();
    let axes = vec![base.clone(); m];
    for tuple in KernelFamily::increasing_tuples(m, n) {
        fam.insert(tuple, random_nonneg_field(&axes, rng)).unwrap();
    }
    fam
}

/// Random kernel family whose kernels are mean zero in every variable
/// (obtained by projecting random kernels onto their top Hoeffding level).
pub fn random_canonical_family(
    m: usize,
    n: usize,
    base: &Arc<Space>,
    value_dim: Option<usize>,
    rng: &mut ChaCha8Rng,
) -> KernelFamily {
    let value_axis = value_dim.map(Space::hilbert);
    let mut fam = KernelFamily::new(m, n, base.clone(), value_axis.clone()).unwrap();
    let mut axes = vec![base.clone(); m];
    if let Some(v) = &value_axis {
        axes.push(v.clone());
    }
    for tuple in KernelFamily::increasing_tuples(m, n) {
        let raw = random_field(&axes, rng);
        let canonical = crate::hoeffding::hoeffding_project(
            &raw,
            crate::hoeffding::CoordSet::full(m),
        )
        .unwrap();
        fam.insert(tuple, canonical).unwrap();
    }
    fam
}

/// Random field lying in the span of Hoeffding levels `0..=max_level`.
pub fn random_low_level_field(
    base: &Arc<Space>,
    n: usize,
    max_level: usize,
    rng: &mut ChaCha8Rng,
) -> TensorField {
    let raw = random_field(&vec![base.clone(); n], rng);
    let mut out = TensorField::zeros(raw.axes().to_vec()).unwrap();
    for m in 0..=max_level.min(n) {
        out = out.add(&crate::hoeffding::hoeffding_level(&raw, m).unwrap()).unwrap();
    }
    out
}
