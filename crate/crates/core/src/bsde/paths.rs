use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Brownian increments and positions on a grid.
///
/// Path `p` draws from stream `p` of a ChaCha8 generator keyed by the
/// seed, so every path is reproducible independently of the others.
/// Storage is step-major: `increments[(j * n_paths + p) * d + l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    n_paths: usize,
    dim_d: usize,
    grid: TimeGrid,
    increments: Vec<f64>,
    positions: Vec<f64>,
    seed: u64,
}

pub fn simulate_paths(d: usize, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    if d == 0 || n_paths == 0 {
        return Err(Error::invalid("ensemble needs d >= 1 and at least one path"));
    }
    for j in 0..grid.steps() {
        let dt = grid.dt(j);
        if !(dt > 0.0) {
            return Err(Error::DegenerateGrid { index: j, dt });
        }
    }
    let steps = grid.steps();
    let sq: Vec<f64> = (0..steps).map(|j| grid.dt(j).sqrt()).collect();
    let mut increments = vec![0.0; steps * n_paths * d];
    let mut positions = vec![0.0; grid.len() * n_paths * d];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in 0..n_paths {
        rng.set_stream(p as u64);
        rng.set_word_pos(0);
        for j in 0..steps {
            for l in 0..d {
                let dw: f64 = StandardNormal.sample(&mut rng);
                let dw = dw * sq[j];
                increments[(j * n_paths + p) * d + l] = dw;
                positions[((j + 1) * n_paths + p) * d + l] = positions[(j * n_paths + p) * d + l] + dw;
            }
        }
    }
    Ok(PathEnsemble { n_paths, dim_d: d, grid: grid.clone(), increments, positions, seed })
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn dim_d(&self) -> usize {
        self.dim_d
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `ΔB_j` of path `p`.
    #[inline]
    pub fn increment(&self, step: usize, path: usize) -> &[f64] {
        let o = (step * self.n_paths + path) * self.dim_d;
        &self.increments[o..o + self.dim_d]
    }

    /// `B_{t_j}` of path `p`.
    #[inline]
    pub fn position(&self, node: usize, path: usize) -> &[f64] {
        let o = (node * self.n_paths + path) * self.dim_d;
        &self.positions[o..o + self.dim_d]
    }

    /// All increments of one step, path-major.
    pub fn step_increments(&self, step: usize) -> &[f64] {
        let o = step * self.n_paths * self.dim_d;
        &self.increments[o..o + self.n_paths * self.dim_d]
    }

    /// All positions at one node, path-major.
    pub fn node_positions(&self, node: usize) -> &[f64] {
        let o = node * self.n_paths * self.dim_d;
        &self.positions[o..o + self.n_paths * self.dim_d]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_moments() {
        let g = TimeGrid::uniform(1.0, 1).unwrap();
        let e = simulate_paths(1, &g, 100_000, 7).unwrap();
        let xs = e.step_increments(0);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        assert!(mean.abs() < 5.0 / n.sqrt(), "{mean}");
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // Var of the sample variance of N(0,1) is 2/(n-1).
        assert!((var - 1.0).abs() < 5.0 * (2.0 / n).sqrt(), "{var}");
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let g = TimeGrid::geometric(2.0, 10, 1.3).unwrap();
        let a = simulate_paths(2, &g, 500, 42).unwrap();
        let b = simulate_paths(2, &g, 500, 42).unwrap();
        let c = simulate_paths(2, &g, 500, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.step_increments(0), c.step_increments(0));
    }

    #[test]
    fn paths_do_not_depend_on_ensemble_size() {
        let g = TimeGrid::uniform(1.0, 5).unwrap();
        let small = simulate_paths(1, &g, 10, 3).unwrap();
        let large = simulate_paths(1, &g, 1000, 3).unwrap();
        for p in 0..10 {
            assert_eq!(small.position(5, p), large.position(5, p));
        }
    }

    #[test]
    fn terminal_variance() {
        let g = TimeGrid::uniform(2.0, 20).unwrap();
        let e = simulate_paths(1, &g, 50_000, 11).unwrap();
        let xs = e.node_positions(20);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 2.0).abs() < 5.0 * 2.0 * (2.0 / n).sqrt(), "{var}");
    }
}
