//! Self-consistent Hartree equilibrium of the isolated sample at fixed
//! particle number.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{hermitian_eigen, hermitian_function};
use crate::model::{fermi_dirac, hartree_potential, SampleMatrix, SystemSpec};
use crate::{c64, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SampleEquilibrium {
    pub rho_s: SampleMatrix,
    pub mu_s: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Last observed ratio of successive residuals.
    pub contraction_ratio: Option<f64>,
    /// Mixing parameter in effect at convergence.
    pub mixing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Linear mixing `γ ← (1 − m) γ + m F(γ)`.
    pub mixing: f64,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iterations: 2000, mixing: 1.0 }
    }
}

fn trace_at(levels: &[f64], beta: f64, x: f64) -> f64 {
    levels.iter().map(|&e| fermi_dirac(e, beta, x)).sum()
}

/// Chemical potential `µ_s(γ)` with `Tr f_FD(h_s + V_λ{γ} − µ) = 𝒩`.
pub fn solve_mu(gamma: &SampleMatrix, spec: &SystemSpec) -> Result<f64> {
    let h = &spec.h_s + hartree_potential(gamma, spec)?;
    let (levels, _) = hermitian_eigen(&h);
    Ok(mu_for_levels(&levels, spec.beta_s, spec.n_particles))
}

fn mu_for_levels(levels: &[f64], beta: f64, n_particles: f64) -> f64 {
    let mut lo = levels[0] - 50.0 / beta;
    let mut hi = levels[levels.len() - 1] + 50.0 / beta;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if trace_at(levels, beta, mid) < n_particles {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `F(γ) = f_FD(h_s + V_λ{γ} − µ_s(γ))` at the sample temperature.
pub fn fermi_map(gamma: &SampleMatrix, spec: &SystemSpec) -> Result<(SampleMatrix, f64)> {
    let h = &spec.h_s + hartree_potential(gamma, spec)?;
    let (levels, _) = hermitian_eigen(&h);
    let mu = mu_for_levels(&levels, spec.beta_s, spec.n_particles);
    let rho = hermitian_function(&h, |e| fermi_dirac(e, spec.beta_s, mu));
    Ok((rho, mu))
}

pub fn solve_sample_equilibrium(spec: &SystemSpec) -> Result<SampleEquilibrium> {
    solve_sample_equilibrium_with(spec, EquilibriumOptions::default())
}

pub fn solve_sample_equilibrium_with(spec: &SystemSpec, options: EquilibriumOptions) -> Result<SampleEquilibrium> {
    spec.validate()?;
    let n = spec.n();
    let mut gamma = SampleMatrix::identity(n, n) * c64::new(spec.n_particles / n as f64, 0.0);
    let mut mixing = options.mixing;
    let mut history: Vec<f64> = Vec::new();
    for k in 1..=options.max_iterations {
        let (image, mu) = fermi_map(&gamma, spec)?;
        let residual = (&image - &gamma).norm();
        let next = &gamma * c64::new(1.0 - mixing, 0.0) + &image * c64::new(mixing, 0.0);
        let ratio = history.last().map(|prev| residual / prev);
        if residual < options.tol {
            return Ok(SampleEquilibrium {
                rho_s: image,
                mu_s: mu,
                iterations: k,
                residual,
                contraction_ratio: ratio,
                mixing,
            });
        }
        // Two consecutive growing residuals signal oscillation; damp once.
        if mixing > 0.5
            && history.len() >= 2
            && residual > history[history.len() - 1]
            && history[history.len() - 1] > history[history.len() - 2]
        {
            mixing = 0.5;
        }
        history.push(residual);
        gamma = next;
    }
    Err(Error::NoConvergence {
        iterations: options.max_iterations,
        residual: history.last().copied().unwrap_or(f64::NAN),
    })
}
