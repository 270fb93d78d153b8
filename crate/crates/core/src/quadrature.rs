//! Gauss–Legendre rules and the θ-parameterized band grid `E = 2 t_c cos θ`.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Quadrature nodes on the open band `(-2 t_c, 2 t_c)`.
///
/// `weight[i]` integrates in energy: `∫ g(E) dE ≈ Σ weight[i] g(energy[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGrid {
    pub t_c: f64,
    pub theta: Vec<f64>,
    pub energy: Vec<f64>,
    pub weight: Vec<f64>,
}

impl EnergyGrid {
    /// Single Gauss–Legendre panel over `θ ∈ [0, π]`.
    pub fn new(t_c: f64, nodes: usize) -> Self {
        Self::with_breakpoints(t_c, nodes, &[])
    }

    /// Composite rule with panel boundaries at the given in-band energies,
    /// so that kinks of the integrand (Fermi steps) sit on panel edges.
    pub fn with_breakpoints(t_c: f64, nodes: usize, breakpoints: &[f64]) -> Self {
        let mut cuts: Vec<f64> =
            breakpoints.iter().filter(|e| e.abs() < 2.0 * t_c).map(|e| (e / (2.0 * t_c)).acos()).collect();
        cuts.push(0.0);
        cuts.push(PI);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let panels: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
        let min_nodes = 16.min(nodes);
        let mut counts: Vec<usize> =
            panels.iter().map(|(a, b)| (((b - a) / PI * nodes as f64).round() as usize).max(min_nodes)).collect();
        // Keep the requested total by adjusting the widest panel.
        let total: usize = counts.iter().sum();
        if total != nodes {
            let widest = (0..panels.len())
                .max_by(|&i, &j| (panels[i].1 - panels[i].0).total_cmp(&(panels[j].1 - panels[j].0)))
                .unwrap();
            let adjusted = counts[widest] as i64 + nodes as i64 - total as i64;
            counts[widest] = adjusted.max(min_nodes as i64) as usize;
        }
        let mut grid = Self { t_c, theta: Vec::new(), energy: Vec::new(), weight: Vec::new() };
        for ((a, b), count) in panels.into_iter().zip(counts) {
            let (x, w) = gauss_legendre(count);
            let half = 0.5 * (b - a);
            for k in 0..count {
                let theta = a + half * (x[k] + 1.0);
                grid.theta.push(theta);
                grid.energy.push(2.0 * t_c * theta.cos());
                grid.weight.push(half * w[k] * 2.0 * t_c * theta.sin());
            }
        }
        grid
    }

    pub fn len(&self) -> usize {
        self.energy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energy.is_empty()
    }

    /// `Σ weight[i] values[i]`.
    pub fn integrate(&self, values: impl IntoIterator<Item = f64>) -> f64 {
        self.weight.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Adaptive Simpson integration of `f` on `[a, b]`.
pub fn adaptive_simpson(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(7);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((integral - 2.0 / 13.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn grid_integrates_band_density() {
        for grid in [EnergyGrid::new(1.3, 128), EnergyGrid::with_breakpoints(1.3, 128, &[-0.4, 0.9])] {
            assert_eq!(grid.len(), 128);
            // ∫ √(4t² − E²) dE = 2π t²
            let v = grid.integrate(grid.energy.iter().map(|e| (4.0 * 1.69 - e * e).sqrt()));
            assert!((v - 2.0 * PI * 1.69).abs() < 1e-12);
        }
    }

    #[test]
    fn simpson_on_smooth_function() {
        let v = adaptive_simpson(&mut |x: f64| x.sin(), 0.0, PI, 1e-12, 30);
        assert!((v - 2.0).abs() < 1e-10);
    }
}
