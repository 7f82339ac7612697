//! Adaptive Gauss–Kronrod quadrature with geometric grading toward a
//! declared singular endpoint.
//!
//! Singular integrands are integrated piece by piece over
//! `[a + w 2^{-(l+1)}, a + w 2^{-l}]`. Integrable singularities produce
//! piece masses that decay geometrically; the decay ratio is used both to
//! extrapolate the remaining mass and to flag divergence (ratio → 1).

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss 7-point weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Any partial value above this magnitude is reported as divergent.
    pub value_cap: f64,
    /// Number of geometric levels tried toward a singular endpoint.
    pub max_levels: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self { abs_tol: 1e-13, rel_tol: 1e-12, max_subdivisions: 2000, value_cap: 1e12, max_levels: 400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Global adaptive bisection on `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, s: &QuadSettings) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0 });
    }
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::invalid(format!("bad integration interval [{a}, {b}]")));
    }
    let (v, e) = gk15(f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    loop {
        if !total.is_finite() {
            return Err(Error::QuadratureFailure { a, b, estimate: f64::INFINITY });
        }
        if total.abs() > s.value_cap {
            return Err(Error::DivergentIntegral(format!("|integral| over [{a}, {b}] exceeds cap {:e}", s.value_cap)));
        }
        if err <= s.abs_tol.max(s.rel_tol * total.abs()) {
            return Ok(QuadResult { value: total, error: err });
        }
        if intervals.len() >= s.max_subdivisions {
            return Err(Error::QuadratureFailure { a, b, estimate: err });
        }
        let (idx, _) =
            intervals.iter().enumerate().fold((0, -1.0), |acc, (i, iv)| if iv.3 > acc.1 { (i, iv.3) } else { acc });
        let (lo, hi, v0, e0) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval cannot be split further in floating point.
            return Err(Error::QuadratureFailure { a, b, estimate: err });
        }
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        total += v1 + v2 - v0;
        err += e1 + e2 - e0;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Integrates over `(a, b]` with an integrable singularity at `a`, using a
/// geometric mesh of ratio 0.5 toward `a`.
pub fn integrate_singular_left(f: &dyn Fn(f64) -> f64, a: f64, b: f64, s: &QuadSettings) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0 });
    }
    let width = b - a;
    let mut total = 0.0;
    let mut err = 0.0;
    let mut prev_piece: Option<f64> = None;
    let mut ratios: Vec<f64> = Vec::new();
    let mut hi = b;
    for level in 0..s.max_levels {
        let lo = a + width * 0.5_f64.powi(level as i32 + 1);
        if lo <= a || lo >= hi {
            // Underflow: no more room to refine. Accept only if mass is vanishing.
            break;
        }
        let piece_settings = QuadSettings { abs_tol: s.abs_tol * 1e-3, ..*s };
        let piece = integrate(f, lo, hi, &piece_settings)?;
        total += piece.value;
        err += piece.error;
        if total.abs() > s.value_cap {
            return Err(Error::DivergentIntegral(format!(
                "partial integral toward singular endpoint {a} exceeds cap {:e}",
                s.value_cap
            )));
        }
        let mag = piece.value.abs();
        if let Some(p) = prev_piece {
            if p > 0.0 {
                ratios.push(mag / p);
            }
        }
        prev_piece = Some(mag);
        hi = lo;

        let tol = s.abs_tol.max(s.rel_tol * total.abs());
        if mag == 0.0 && level > 8 {
            return Ok(QuadResult { value: total, error: err });
        }
        if ratios.len() >= 3 {
            let r = ratios[ratios.len() - 3..].iter().cloned().fold(0.0, f64::max);
            if r < 1.0 - 1e-6 {
                let remainder = mag * r / (1.0 - r);
                if remainder <= tol {
                    return Ok(QuadResult { value: total + remainder, error: err + remainder });
                }
            }
        }
    }
    let r = ratios.last().copied().unwrap_or(1.0);
    let last = prev_piece.unwrap_or(0.0);
    if r < 1.0 - 1e-6 {
        let remainder = last * r / (1.0 - r);
        if remainder <= 1e3 * s.abs_tol.max(s.rel_tol * total.abs()) {
            return Ok(QuadResult { value: total + remainder, error: err + remainder });
        }
    }
    Err(Error::DivergentIntegral(format!(
        "piece masses toward {a} do not decay (last ratio {r:.6}, partial value {total:e})"
    )))
}

/// Integrates over `[a, b]`, splitting at `breakpoints` and grading toward
/// `0` when `singular_at_zero` is set and `a == 0`.
pub fn integrate_pieces(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    singular_at_zero: bool,
    s: &QuadSettings,
) -> Result<QuadResult> {
    let mut cuts: Vec<f64> = vec![a];
    cuts.extend(breakpoints.iter().copied().filter(|&c| c > a && c < b));
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut out = QuadResult { value: 0.0, error: 0.0 };
    for (i, w) in cuts.windows(2).enumerate() {
        let r = if i == 0 && singular_at_zero && w[0] == 0.0 {
            integrate_singular_left(f, w[0], w[1], s)?
        } else {
            integrate(f, w[0], w[1], s)?
        };
        out.value += r.value;
        out.error += r.error;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(&|x| 3.0 * x * x, 0.0, 2.0, &QuadSettings::default()).unwrap();
        assert!((r.value - 8.0).abs() < 1e-13);
    }

    #[test]
    fn inverse_sqrt_singularity() {
        let r = integrate_singular_left(&|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &QuadSettings::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn slow_power_singularity_converges() {
        // ∫_0^1 t^{-0.9} dt = 10
        let r = integrate_singular_left(&|x: f64| x.powf(-0.9), 0.0, 1.0, &QuadSettings::default()).unwrap();
        assert!((r.value - 10.0).abs() < 1e-7, "{}", r.value);
    }

    #[test]
    fn harmonic_singularity_diverges() {
        let r = integrate_singular_left(&|x: f64| 1.0 / x, 0.0, 1.0, &QuadSettings::default());
        assert!(matches!(r, Err(Error::DivergentIntegral(_))), "{r:?}");
    }

    #[test]
    fn jump_handled_by_breakpoint() {
        let f = |x: f64| if x < 0.3 { 1.0 } else { 2.0 };
        let r = integrate_pieces(&f, 0.0, 1.0, &[0.3], false, &QuadSettings::default()).unwrap();
        assert!((r.value - 1.7).abs() < 1e-13);
    }
}
