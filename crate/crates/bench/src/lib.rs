//! Workloads shared by the criterion benches.

use pgcp_core::fixtures::{heightfield, split_polygon_pair};
use pgcp_core::pipeline::balanced_cuts;
use pgcp_core::{Complex64, CutEdgeSet, TriMesh};
use rand::SeedableRng;

/// A `k`×`k` bumpy heightfield cut into `n` balanced slabs.
pub fn slab_workload(k: usize, n: usize) -> (TriMesh, CutEdgeSet) {
    let mesh = heightfield(k, k, 0.15, 3);
    let cuts = balanced_cuts(&mesh, n);
    (mesh, cuts)
}

/// A reproducible pair of polygons sharing a `k`-edge prefix.
pub fn weld_pair(seed: u64) -> (Vec<Complex64>, Vec<Complex64>, usize) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    split_polygon_pair(&mut rng)
}
