//! Derivative-free minimization over a box by tensor grids with zoom refinement.
//!
//! The box center is always evaluated, so the returned value never exceeds
//! the objective at the center.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpec {
    /// Grid points per axis; rounded up to an odd number.
    pub points_per_axis: usize,
    /// Minimum number of zoom rounds.
    pub refine_rounds: usize,
    /// Stop once the objective spread over the final window is below this.
    pub objective_tol: f64,
    pub max_rounds: usize,
    /// Number of best points refined in each round.
    pub starts: usize,
    /// Window shrink factor per round, relative to the current grid spacing.
    pub shrink: f64,
    /// Radius multiplier `(1 + |x|)` used when no a priori radius is available.
    pub fallback_radius: f64,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            points_per_axis: 17,
            refine_rounds: 3,
            objective_tol: 1e-6,
            max_rounds: 60,
            starts: 3,
            shrink: 4.0,
            fallback_radius: 10.0,
        }
    }
}

impl SearchSpec {
    pub fn light() -> Self {
        Self { points_per_axis: 9, refine_rounds: 2, objective_tol: 1e-4, max_rounds: 30, starts: 2, ..Self::default() }
    }

    fn odd_points(&self) -> usize {
        let p = self.points_per_axis.max(3);
        if p.is_multiple_of(2) {
            p + 1
        } else {
            p
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.starts == 0 || self.max_rounds == 0 || !(self.objective_tol > 0.0) || !(self.shrink > 1.0) {
            return Err(Error::invalid(format!("invalid search spec {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub argmin: Vec<f64>,
    pub value: f64,
    pub rounds: usize,
    pub evaluations: usize,
}

/// Evaluated points, coordinates stored flat.
struct Points {
    m: usize,
    values: Vec<f64>,
    coords: Vec<f64>,
}

impl Points {
    fn new(m: usize) -> Self {
        Self { m, values: Vec::new(), coords: Vec::new() }
    }

    fn clear(&mut self) {
        self.values.clear();
        self.coords.clear();
    }

    fn at(&self, i: usize) -> &[f64] {
        &self.coords[i * self.m..(i + 1) * self.m]
    }

    fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[a].partial_cmp(&self.values[b]).unwrap());
        idx
    }
}

#[allow(clippy::too_many_arguments)]
fn grid_eval(
    center: &[f64],
    half: &[f64],
    lo: &[f64],
    hi: &[f64],
    p: usize,
    f: &mut dyn FnMut(&[f64]) -> f64,
    feasible: &dyn Fn(&[f64]) -> bool,
    x: &mut [f64],
    out: &mut Points,
) -> usize {
    let m = center.len();
    let total = p.pow(m as u32);
    let mut evals = 0;
    for idx in 0..total {
        let mut rem = idx;
        for i in 0..m {
            let k = rem % p;
            rem /= p;
            let off = -1.0 + 2.0 * k as f64 / (p - 1) as f64;
            x[i] = (center[i] + off * half[i]).clamp(lo[i], hi[i]);
        }
        if !feasible(x) {
            continue;
        }
        let v = f(x);
        evals += 1;
        if v.is_finite() {
            out.values.push(v);
            out.coords.extend_from_slice(x);
        }
    }
    evals
}

/// Minimizes `f` over `[center - radius, center + radius]` restricted to
/// `feasible`. The center must be feasible.
pub fn minimize_box(
    center: &[f64],
    radius: &[f64],
    spec: &SearchSpec,
    f: &mut dyn FnMut(&[f64]) -> f64,
    feasible: &dyn Fn(&[f64]) -> bool,
) -> Result<SearchResult> {
    let m = center.len();
    let v0 = f(center);
    let mut best_v = v0;
    let mut best_x = center.to_vec();
    if m == 0 || radius.iter().all(|&r| r == 0.0) {
        return Ok(SearchResult { argmin: best_x, value: best_v, rounds: 0, evaluations: 1 });
    }
    let p = spec.odd_points();
    let lo: Vec<f64> = center.iter().zip(radius).map(|(c, r)| c - r).collect();
    let hi: Vec<f64> = center.iter().zip(radius).map(|(c, r)| c + r).collect();
    let mut x = vec![0.0; m];
    let mut evaluations = 1;
    let mut pts = Points::new(m);
    let mut local = Points::new(m);
    evaluations += grid_eval(center, radius, &lo, &hi, p, f, feasible, &mut x, &mut pts);
    let mut half: Vec<f64> = radius.to_vec();
    let mut spread = f64::INFINITY;
    let mut seeds: Vec<f64> = Vec::with_capacity(spec.starts * m);
    for round in 1..=spec.max_rounds {
        let order = pts.order();
        if let Some(&b) = order.first() {
            if pts.values[b] < best_v {
                best_v = pts.values[b];
                best_x.copy_from_slice(pts.at(b));
            }
        }
        // Distinct seeds, at least one spacing apart in some coordinate.
        let spacing: Vec<f64> = half.iter().map(|h| h * 2.0 / (p - 1) as f64).collect();
        seeds.clear();
        for &i in &order {
            if seeds.len() == spec.starts * m {
                break;
            }
            let cand = pts.at(i);
            let distinct =
                seeds.chunks(m).all(|s| s.iter().zip(cand).zip(&spacing).any(|((a, b), h)| (a - b).abs() >= 0.999 * h));
            if distinct {
                seeds.extend_from_slice(cand);
            }
        }
        if seeds.is_empty() {
            break;
        }
        // One grid spacing on each side of a seed, shrunk.
        for h in half.iter_mut() {
            *h = *h * 2.0 / (p - 1) as f64 * (2.0 / spec.shrink).max(1.0);
        }
        pts.clear();
        let mut window_spread = None;
        for seed in seeds.chunks(m) {
            local.clear();
            evaluations += grid_eval(seed, &half, &lo, &hi, p, f, feasible, &mut x, &mut local);
            if window_spread.is_none() && !local.values.is_empty() {
                let mx = local.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mn = local.values.iter().cloned().fold(f64::INFINITY, f64::min);
                window_spread = Some(mx - mn);
            }
            pts.values.extend_from_slice(&local.values);
            pts.coords.extend_from_slice(&local.coords);
        }
        for i in 0..pts.values.len() {
            if pts.values[i] < best_v {
                best_v = pts.values[i];
                best_x.copy_from_slice(pts.at(i));
            }
        }
        if let Some(s) = window_spread {
            spread = s;
        }
        if round >= spec.refine_rounds && spread <= spec.objective_tol {
            return Ok(SearchResult { argmin: best_x, value: best_v, rounds: round, evaluations });
        }
    }
    Err(Error::SearchBudgetExceeded { rounds: spec.max_rounds, spread })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_minimum() {
        let mut f = |x: &[f64]| (x[0] - 0.3).powi(2) + (x[1] + 0.7).abs();
        let r = minimize_box(&[0.0, 0.0], &[2.0, 2.0], &SearchSpec::default(), &mut f, &|_| true).unwrap();
        assert!(r.value < 1e-6, "{r:?}");
        assert!((r.argmin[0] - 0.3).abs() < 1e-3);
        assert!((r.argmin[1] + 0.7).abs() < 1e-5);
    }

    #[test]
    fn never_worse_than_center() {
        let mut f = |x: &[f64]| (x[0] * 5.0).sin();
        let r = minimize_box(&[0.4], &[1.0], &SearchSpec::default(), &mut f, &|_| true).unwrap();
        assert!(r.value <= (0.4f64 * 5.0).sin());
        assert!((r.value + 1.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn respects_feasibility() {
        let mut f = |x: &[f64]| x[0];
        let r = minimize_box(&[0.0], &[1.0], &SearchSpec::default(), &mut f, &|x| x[0] >= -0.5).unwrap();
        assert!((r.value + 0.5).abs() < 1e-6);
    }
}
