//! Self-consistent steady state in the energy representation.
//!
//! The amplitudes `w_n(E, σ)` of the outgoing spectral representation solve
//!
//! ```text
//! w_n = w⁰_n − λ Σ_j d_j ⟨ζ_j|(H − E + i0)⁻¹|ζ_n⟩ w_j,   d_j = Σ_k ν_jk c_k,
//! c_k = Σ_σ ∫ f_σ(E) |w_k(E, σ)|² dE,
//! ```
//!
//! which is affine in `w` at fixed `c`. Each sweep solves the `N×N` system
//! exactly at every node and then refreshes `c`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::greens::{Resolvent, Side};
use crate::linalg::{CMatrix, CVector, I, ZERO};
use crate::model::{hartree_from_occupations, Lead, LocalizedVector, SampleMatrix, SystemSpec};
use crate::quadrature::EnergyGrid;
use crate::scattering::{transmittance0, WaveTransform};
use crate::{c64, Error, Result, Warning};

/// Grid with panel edges at the reservoir chemical potentials.
pub fn reservoir_grid(spec: &SystemSpec, nodes: usize) -> EnergyGrid {
    EnergyGrid::with_breakpoints(spec.t_c, nodes, &[spec.reservoirs[0].mu, spec.reservoirs[1].mu])
}

/// Functions of `(n, σ, E_i)` on an energy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAmplitudes {
    pub grid: EnergyGrid,
    n: usize,
    values: Vec<c64>,
}

impl SpectralAmplitudes {
    fn zeros(grid: &EnergyGrid, n: usize) -> Self {
        Self { grid: grid.clone(), n, values: vec![ZERO; grid.len() * 2 * n] }
    }

    fn offset(&self, lead: Lead, i: usize) -> usize {
        (i * 2 + lead.index()) * self.n
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, lead: Lead, i: usize) -> c64 {
        self.values[self.offset(lead, i) + k]
    }

    /// All `N` amplitudes at `(σ, E_i)`.
    pub fn node(&self, lead: Lead, i: usize) -> &[c64] {
        let o = self.offset(lead, i);
        &self.values[o..o + self.n]
    }

    fn node_mut(&mut self, lead: Lead, i: usize) -> &mut [c64] {
        let o = self.offset(lead, i);
        &mut self.values[o..o + self.n]
    }

    /// `c_k = Σ_σ ∫ f_σ |w_k|² dE`.
    pub fn occupations(&self, spec: &SystemSpec) -> Vec<f64> {
        let mut c = vec![0.0; self.n];
        for i in 0..self.grid.len() {
            for lead in Lead::BOTH {
                let weight = self.grid.weight[i] * spec.reservoirs[lead.index()].occupation(self.grid.energy[i]);
                if weight == 0.0 {
                    continue;
                }
                for (ck, w) in c.iter_mut().zip(self.node(lead, i)) {
                    *ck += weight * w.norm_sqr();
                }
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NessOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    /// Linear mixing of the occupation scalars between sweeps.
    pub mixing: f64,
    /// Contraction threshold; a warning is attached when `λ ≥ λ₀`.
    pub lambda0: Option<f64>,
}

impl Default for NessOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_sweeps: 500, mixing: 1.0, lambda0: None }
    }
}

/// Converged amplitudes and iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct NessSolution {
    pub w: SpectralAmplitudes,
    pub free: SpectralAmplitudes,
    /// `c_k` at the fixed point.
    pub c: Vec<f64>,
    /// `d_j = Σ_k ν_jk c_k` used for the final amplitudes.
    pub d: Vec<f64>,
    pub iterations: usize,
    /// `max_k |c_k^{p+1} − c_k^p|` per sweep.
    pub residuals: Vec<f64>,
    pub warnings: Vec<Warning>,
}

impl NessSolution {
    /// Ratios of successive residuals while both are above `floor`.
    pub fn contraction_ratios(&self, floor: f64) -> Vec<f64> {
        self.residuals.windows(2).filter(|w| w[0] > floor && w[1] > floor).map(|w| w[1] / w[0]).collect()
    }

    /// Self-consistent potential `λ diag(ν c)`.
    pub fn potential(&self, spec: &SystemSpec) -> SampleMatrix {
        hartree_from_occupations(&self.c, spec)
    }
}

/// Free term `w⁰_n(E, σ) = −τ (𝔉L_σ)(E) conj((S(E)⁻¹ S_σ)_n)` and the
/// `(H − E + i0)⁻¹` sample block at each node.
fn node_data(spec: &SystemSpec, grid: &EnergyGrid) -> Result<(SpectralAmplitudes, Vec<CMatrix>)> {
    let n = spec.n();
    let mut free = SpectralAmplitudes::zeros(grid, n);
    let mut blocks = Vec::with_capacity(grid.len());
    for (i, &e) in grid.energy.iter().enumerate() {
        let wt = WaveTransform::new(spec, e)?;
        for lead in Lead::BOTH {
            for k in 0..n {
                free.node_mut(lead, i)[k] = wt.apply_basis(k, lead);
            }
        }
        blocks.push(wt.resolvent().s_inverse().clone());
    }
    Ok((free, blocks))
}

pub fn solve_w(spec: &SystemSpec, grid: &EnergyGrid, options: NessOptions) -> Result<NessSolution> {
    spec.validate()?;
    let n = spec.n();
    let mut warnings = Vec::new();
    if let Some(lambda0) = options.lambda0 {
        if spec.lambda >= lambda0 {
            warnings.push(Warning::LambdaAboveThreshold { lambda: spec.lambda, lambda0 });
        }
    }
    let (free, blocks) = node_data(spec, grid)?;
    let mut w = free.clone();
    let mut c = free.occupations(spec);
    let mut residuals = Vec::new();
    for sweep in 1..=options.max_sweeps {
        let d: Vec<f64> = (0..n).map(|j| (0..n).map(|k| spec.nu[(j, k)] * c[k]).sum()).collect();
        for (i, p) in blocks.iter().enumerate() {
            // (I + λ Pᵀ diag(d)) w = w⁰ with P = S₊⁻¹.
            let a = CMatrix::from_fn(n, n, |r, j| {
                let delta = if r == j { 1.0 } else { 0.0 };
                c64::new(delta, 0.0) + p[(j, r)] * (spec.lambda * d[j])
            });
            let lu = a.lu();
            for lead in Lead::BOTH {
                let rhs = CVector::from_column_slice(free.node(lead, i));
                let x = lu.solve(&rhs).ok_or(Error::SingularS { energy: grid.energy[i], condition: f64::INFINITY })?;
                w.node_mut(lead, i).copy_from_slice(x.as_slice());
            }
        }
        let fresh = w.occupations(spec);
        let residual = fresh.iter().zip(&c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        residuals.push(residual);
        if !residual.is_finite() || residual > 1e6 {
            return Err(Error::NoConvergence { iterations: sweep, residual });
        }
        if residual < options.tol {
            return Ok(NessSolution { w, free, c: fresh, d, iterations: sweep, residuals, warnings });
        }
        for (ck, f) in c.iter_mut().zip(&fresh) {
            *ck += options.mixing * (f - *ck);
        }
    }
    Err(Error::NoConvergence {
        iterations: options.max_sweeps,
        residual: residuals.last().copied().unwrap_or(f64::NAN),
    })
}

/// Evaluates `(𝔉_L W_− A_{λ,∞} ψ)(E_i, σ)` for compactly supported `ψ`.
#[derive(Debug)]
pub struct SteadyTransform<'a> {
    spec: &'a SystemSpec,
    solution: &'a NessSolution,
}

impl<'a> SteadyTransform<'a> {
    pub fn new(spec: &'a SystemSpec, solution: &'a NessSolution) -> Self {
        Self { spec, solution }
    }

    /// Values for `σ = 1, 2` at node `i`.
    pub fn at_node(&self, i: usize, psi: &LocalizedVector) -> Result<[c64; 2]> {
        let e = self.solution.w.grid.energy[i];
        let wt = WaveTransform::new(self.spec, e)?;
        Ok(self.with_transform(&wt, i, psi))
    }

    fn with_transform(&self, wt: &WaveTransform<'_>, i: usize, psi: &LocalizedVector) -> [c64; 2] {
        let n = self.spec.n();
        let coupling: Vec<c64> = (0..n)
            .map(|j| {
                if self.solution.d[j] == 0.0 {
                    ZERO
                } else {
                    self.spec.lambda * self.solution.d[j] * wt.resolvent().element(&LocalizedVector::basis(n, j), psi)
                }
            })
            .collect();
        Lead::BOTH.map(|lead| {
            let w = self.solution.w.node(lead, i);
            wt.apply(psi, lead) - coupling.iter().zip(w).map(|(a, b)| a * b).sum::<c64>()
        })
    }

    /// `ω_λ(|f⟩⟨g|) = Σ_σ ∫ f_σ conj(X g) X f dE`.
    pub fn expectation(&self, f: &LocalizedVector, g: &LocalizedVector) -> Result<c64> {
        let grid = &self.solution.w.grid;
        let mut acc = ZERO;
        for i in 0..grid.len() {
            let wt = WaveTransform::new(self.spec, grid.energy[i])?;
            let xf = self.with_transform(&wt, i, f);
            let xg = if f == g { xf } else { self.with_transform(&wt, i, g) };
            for lead in Lead::BOTH {
                let weight = grid.weight[i] * self.spec.reservoirs[lead.index()].occupation(grid.energy[i]);
                acc += xg[lead.index()].conj() * xf[lead.index()] * weight;
            }
        }
        Ok(acc)
    }
}

/// `2π 𝒯(E) = (τ/2) Σ_j (−1)^{j−1} |u + i(−1)^j v|²` from the lead-2
/// components `u`, `v` of the transformed `S_1` and `L_1`.
fn sesquilinear_transmittance(tau: f64, u: c64, v: c64) -> f64 {
    let plus = (u - I * v).norm_sqr();
    let minus = (u + I * v).norm_sqr();
    0.5 * tau * (plus - minus) / (2.0 * PI)
}

fn coupling_vectors(spec: &SystemSpec) -> (LocalizedVector, LocalizedVector) {
    (
        LocalizedVector::on_sample(spec.sample_coupling[0].iter().copied()),
        LocalizedVector::on_lead(Lead::One, spec.lead_coupling[0].clone()),
    )
}

/// Interacting transmittance `𝒯_λ(E_i)` on the solution grid.
pub fn steady_transmittance(solution: &NessSolution, spec: &SystemSpec) -> Result<Vec<f64>> {
    let x = SteadyTransform::new(spec, solution);
    let (s1, l1) = coupling_vectors(spec);
    (0..solution.w.grid.len())
        .map(|i| {
            let u = x.at_node(i, &s1)?[1];
            let v = x.at_node(i, &l1)?[1];
            Ok(sesquilinear_transmittance(spec.tau, u, v))
        })
        .collect()
}

/// `ω(I₁) = 2π ∫ (f₂ − f₁) 𝒯 dE`; positive means net flow into lead 1.
pub fn steady_current(spec: &SystemSpec, grid: &EnergyGrid, transmittance: &[f64]) -> f64 {
    let [r1, r2] = spec.reservoirs;
    2.0 * PI
        * grid
            .energy
            .iter()
            .zip(&grid.weight)
            .zip(transmittance)
            .map(|((&e, &w), &t)| w * (r2.occupation(e) - r1.occupation(e)) * t)
            .sum::<f64>()
}

/// `⟨ζ_k|ρ_{λ,∞}|ζ_k⟩` for every `k`.
pub fn steady_occupations(solution: &NessSolution, spec: &SystemSpec) -> Result<Vec<f64>> {
    let x = SteadyTransform::new(spec, solution);
    let n = spec.n();
    (0..n).map(|k| x.expectation(&LocalizedVector::basis(n, k), &LocalizedVector::basis(n, k)).map(|z| z.re)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateResult {
    pub solution: NessSolution,
    pub occupations: Vec<f64>,
    pub transmittance: Vec<f64>,
    pub current_1: f64,
}

pub fn solve_steady_state(spec: &SystemSpec, grid: &EnergyGrid, options: NessOptions) -> Result<SteadyStateResult> {
    let solution = solve_w(spec, grid, options)?;
    let occupations = steady_occupations(&solution, spec)?;
    let transmittance = steady_transmittance(&solution, spec)?;
    let current_1 = steady_current(spec, grid, &transmittance);
    Ok(SteadyStateResult { solution, occupations, transmittance, current_1 })
}

/// `V_eff,λ = V_λ{W ρ_i W*}` and the non-interacting specification with
/// `h_s ← h_s + V_eff,λ` (its `λ` set to zero).
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveHamiltonian {
    /// `s_k = ⟨ζ_k|W ρ_i W*|ζ_k⟩`.
    pub s: Vec<f64>,
    pub v_eff: SampleMatrix,
    pub spec_eff: SystemSpec,
}

pub fn effective_hamiltonian(spec: &SystemSpec, grid: &EnergyGrid) -> Result<EffectiveHamiltonian> {
    spec.validate()?;
    let (free, _) = node_data(spec, grid)?;
    let s = free.occupations(spec);
    let v_eff = hartree_from_occupations(&s, spec);
    let spec_eff = spec.with_extra_potential(&v_eff).with_lambda(0.0);
    Ok(EffectiveHamiltonian { s, v_eff, spec_eff })
}

impl EffectiveHamiltonian {
    /// `Tr(ρ_eff |f⟩⟨g|) = Σ_σ ∫ f_σ conj(𝔉_eff g) 𝔉_eff f dE`.
    pub fn expectation(&self, grid: &EnergyGrid, f: &LocalizedVector, g: &LocalizedVector) -> Result<c64> {
        let spec = &self.spec_eff;
        let mut acc = ZERO;
        for (i, &e) in grid.energy.iter().enumerate() {
            let wt = WaveTransform::new(spec, e)?;
            for lead in Lead::BOTH {
                let weight = grid.weight[i] * spec.reservoirs[lead.index()].occupation(e);
                acc += wt.apply(g, lead).conj() * wt.apply(f, lead) * weight;
            }
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveTransmittance {
    /// `transmittance0` with `h_s + V_eff`.
    pub direct: Vec<f64>,
    /// Sesquilinear assembly from the effective spectral representation.
    pub sesquilinear: Vec<f64>,
}

impl EffectiveTransmittance {
    pub fn max_route_gap(&self) -> f64 {
        self.direct.iter().zip(&self.sesquilinear).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

pub fn effective_transmittance(spec: &SystemSpec, grid: &EnergyGrid) -> Result<EffectiveTransmittance> {
    let eff = effective_hamiltonian(spec, grid)?;
    effective_transmittance_from(spec, &eff, grid)
}

pub fn effective_transmittance_from(
    spec: &SystemSpec,
    eff: &EffectiveHamiltonian,
    grid: &EnergyGrid,
) -> Result<EffectiveTransmittance> {
    let (s1, l1) = coupling_vectors(spec);
    let mut direct = Vec::with_capacity(grid.len());
    let mut sesquilinear = Vec::with_capacity(grid.len());
    for &e in &grid.energy {
        direct.push(transmittance0(e, spec, Some(&eff.v_eff))?);
        let wt = WaveTransform::new(&eff.spec_eff, e)?;
        sesquilinear.push(sesquilinear_transmittance(spec.tau, wt.apply(&s1, Lead::Two), wt.apply(&l1, Lead::Two)));
    }
    Ok(EffectiveTransmittance { direct, sesquilinear })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MnOptions {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for MnOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iterations: 500 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MnResult {
    pub n: Vec<f64>,
    pub s: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl MnResult {
    /// `max_k |n_k − s_k|`.
    pub fn distance_to_s(&self) -> f64 {
        self.n.iter().zip(&self.s).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// One application of `n ↦ (1/π) ∫ f Im[(S(E) + λ diag(ν n))⁻¹]_kk dE`.
pub fn mn_map(spec: &SystemSpec, grid: &EnergyGrid, occupations: &[f64]) -> Result<Vec<f64>> {
    let extra = hartree_from_occupations(occupations, spec);
    let reservoir = spec.reservoirs[0];
    let n = spec.n();
    let mut out = vec![0.0; n];
    for (&e, &w) in grid.energy.iter().zip(&grid.weight) {
        let f = reservoir.occupation(e);
        if f == 0.0 {
            continue;
        }
        let r = Resolvent::new(spec, e, Some(&extra), Side::MinusI0)?;
        for (k, o) in out.iter_mut().enumerate() {
            *o += w * f * r.s_inverse()[(k, k)].im / PI;
        }
    }
    Ok(out)
}

/// Occupation fixed point of the equal-reservoir mean-field scheme, started
/// from the non-interacting steady occupations `s`.
pub fn mn_fixed_point(spec: &SystemSpec, grid: &EnergyGrid, options: MnOptions) -> Result<MnResult> {
    if !spec.equal_reservoirs() {
        return Err(Error::NotEquilibrium);
    }
    let s = effective_hamiltonian(spec, grid)?.s;
    let mut n = s.clone();
    let mut residual = f64::INFINITY;
    for k in 1..=options.max_iterations {
        let next = mn_map(spec, grid, &n)?;
        residual = next.iter().zip(&n).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        n = next;
        if residual < options.tol {
            return Ok(MnResult { n, s, iterations: k, residual });
        }
    }
    Err(Error::NoConvergence { iterations: options.max_iterations, residual })
}
