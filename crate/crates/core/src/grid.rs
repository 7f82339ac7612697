use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How nodes are distributed over `[0, T_eff]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grading {
    Uniform,
    /// Step lengths grow geometrically away from `t = 0` by `ratio` per step.
    Geometric {
        ratio: f64,
    },
}

/// Partition of `[0, T_eff]`, with metadata recording whether `T_eff` is a
/// truncation of an infinite horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    truncation_eps: Option<f64>,
}

impl TimeGrid {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::invalid("a time grid needs at least two nodes"));
        }
        if nodes[0] != 0.0 {
            return Err(Error::invalid(format!("grid must start at 0, starts at {}", nodes[0])));
        }
        for (i, w) in nodes.windows(2).enumerate() {
            let dt = w[1] - w[0];
            if !(dt > 0.0) || !w[1].is_finite() {
                return Err(Error::DegenerateGrid { index: i, dt });
            }
        }
        Ok(Self { nodes, truncation_eps: None })
    }

    pub fn uniform(t_end: f64, steps: usize) -> Result<Self> {
        Self::graded(t_end, steps, Grading::Uniform)
    }

    pub fn geometric(t_end: f64, steps: usize, ratio: f64) -> Result<Self> {
        Self::graded(t_end, steps, Grading::Geometric { ratio })
    }

    pub fn graded(t_end: f64, steps: usize, grading: Grading) -> Result<Self> {
        if steps == 0 || !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::invalid(format!(
                "grid needs steps > 0 and a finite positive end (got {steps}, {t_end})"
            )));
        }
        let nodes = match grading {
            Grading::Uniform => (0..=steps).map(|j| t_end * j as f64 / steps as f64).collect(),
            Grading::Geometric { ratio } => {
                if !(ratio >= 1.0) {
                    return Err(Error::invalid(format!("geometric ratio must be >= 1, got {ratio}")));
                }
                if ratio == 1.0 {
                    return Self::uniform(t_end, steps);
                }
                let denom = ratio.powi(steps as i32) - 1.0;
                let mut v: Vec<f64> = (0..=steps).map(|j| t_end * (ratio.powi(j as i32) - 1.0) / denom).collect();
                v[steps] = t_end;
                v
            }
        };
        Self::from_nodes(nodes)
    }

    pub fn with_truncation(mut self, eps: f64) -> Self {
        self.truncation_eps = Some(eps);
        self
    }

    /// `Some(eps)` when the end node truncates an infinite horizon.
    pub fn truncation_eps(&self) -> Option<f64> {
        self.truncation_eps
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn t_end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn dt(&self, step: usize) -> f64 {
        self.nodes[step + 1] - self.nodes[step]
    }

    /// Grid with every cell bisected.
    pub fn refined(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(self.t_end());
        Self { nodes, truncation_eps: self.truncation_eps }
    }

    /// Index of the node closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, &s) in self.nodes.iter().enumerate() {
            if (s - t).abs() < (self.nodes[best] - t).abs() {
                best = i;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_grid_is_graded_toward_zero() {
        let g = TimeGrid::geometric(1.0, 20, 1.2).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g.t_end(), 1.0);
        assert!(g.dt(0) < g.dt(19));
        for j in 1..20 {
            assert!((g.dt(j) / g.dt(j - 1) - 1.2).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_nodes_rejected() {
        let e = TimeGrid::from_nodes(vec![0.0, 0.5, 0.5, 1.0]).unwrap_err();
        assert!(matches!(e, Error::DegenerateGrid { index: 1, .. }));
    }

    #[test]
    fn refinement_bisects() {
        let g = TimeGrid::uniform(1.0, 4).unwrap().refined();
        assert_eq!(g.len(), 9);
        assert!((g.nodes()[1] - 0.125).abs() < 1e-15);
    }
}
