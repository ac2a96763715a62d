#![allow(dead_code)]

pub mod oracle;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tradeshock_core::ImportMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn m3() -> ImportMatrix {
    ImportMatrix::from_rows(&[&[0., 2., 1.], &[1., 0., 1.], &[1., 2., 0.]]).unwrap()
}

pub fn balanced() -> ImportMatrix {
    ImportMatrix::from_rows(&[&[0., 5.], &[5., 0.]]).unwrap()
}

/// Random import matrix with `n` nodes; each off-diagonal entry is present
/// with probability `density` and uniform on (0, 100]. At least one entry
/// is always present so total income is positive.
pub fn random_matrix(rng: &mut impl Rng, n: usize, density: f64) -> ImportMatrix {
    let mut rows = vec![vec![0.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            if i != j && rng.random::<f64>() < density {
                *cell = 100.0 * (1.0 - rng.random::<f64>());
            }
        }
    }
    if rows.iter().flatten().all(|&v| v == 0.0) {
        rows[0][n - 1] = 1.0 + rng.random::<f64>();
    }
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    ImportMatrix::from_rows(&refs).unwrap()
}

/// Matrix drawn from the acceptance family: n in [lo, hi], density in [0.1, 1].
pub fn random_family(rng: &mut impl Rng, lo: usize, hi: usize) -> ImportMatrix {
    let n = rng.random_range(lo..=hi);
    let density = rng.random_range(0.1..=1.0);
    random_matrix(rng, n, density)
}

pub fn rows_of(m: &ImportMatrix) -> Vec<Vec<f64>> {
    (0..m.n()).map(|i| (0..m.n()).map(|j| m.get(i, j)).collect()).collect()
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-300)).fold(0.0, f64::max)
}
