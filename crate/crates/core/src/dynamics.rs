//! Time-domain oracle on truncated lattices.
//!
//! `i dρ/dt = [H + V_λ{ρ}, ρ]` is integrated with classical RK4, either on the
//! dense density matrix or on an orbital decomposition
//! `ρ = a·Id + Σ_o w_o |ψ_o⟩⟨ψ_o|` whose orbitals obey the same mean-field
//! equation. The Picard construction of the propagator `U(t)` provides an
//! independent path on small systems.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{hermitian_eigen, row_sum_norm, CMatrix, ZERO};
use crate::model::{assemble_truncated, fermi_dirac, Lead, SampleMatrix, SystemSpec, TruncatedOperator};
use crate::ness::SteadyStateResult;
use crate::{c64, Error, Result, Warning};

const MINUS_I: c64 = c64::new(0.0, -1.0);

/// Eigenpairs of the Dirichlet chain of length `l`:
/// `ε_k = 2t_c cos(kπ/(l+1))`, `φ_k(n) = √(2/(l+1)) sin(kπ(n+1)/(l+1))`.
pub fn dirichlet_eigenpairs(l: usize, t_c: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let scale = (2.0 / (l as f64 + 1.0)).sqrt();
    let mut values = Vec::with_capacity(l);
    let mut vectors = Vec::with_capacity(l);
    for k in 1..=l {
        let q = k as f64 * PI / (l as f64 + 1.0);
        values.push(2.0 * t_c * q.cos());
        vectors.push((0..l).map(|n| scale * (q * (n as f64 + 1.0)).sin()).collect());
    }
    (values, vectors)
}

/// Midpoint between the two Dirichlet levels of a length-`l` lead that
/// bracket `mu`. At zero temperature a chemical potential placed there makes
/// the number of filled levels match the continuum density of states.
pub fn midgap_chemical_potential(mu: f64, l: usize, t_c: f64) -> f64 {
    let (levels, _) = dirichlet_eigenpairs(l, t_c);
    // levels are decreasing in k
    match levels.windows(2).find(|w| w[0] >= mu && w[1] < mu) {
        Some(w) => 0.5 * (w[0] + w[1]),
        None => mu,
    }
}

fn check_sample_density(spec: &SystemSpec, rho_s: &SampleMatrix) -> Result<()> {
    if rho_s.nrows() != spec.n() || rho_s.ncols() != spec.n() {
        return Err(Error::DimensionMismatch { expected: spec.n(), found: rho_s.nrows() });
    }
    Ok(())
}

/// `ρ_i = f_FD(h₁) ⊕ f_FD(h₂) ⊕ ρ_s` on the truncated space.
pub fn initial_state_truncated(spec: &SystemSpec, l: usize, rho_s: &SampleMatrix) -> Result<CMatrix> {
    check_sample_density(spec, rho_s)?;
    let n = spec.n();
    let dim = 2 * l + n;
    let mut rho = CMatrix::zeros(dim, dim);
    let (values, vectors) = dirichlet_eigenpairs(l, spec.t_c);
    for lead in Lead::BOTH {
        let r = spec.reservoirs[lead.index()];
        let o = lead.index() * l;
        for (e, v) in values.iter().zip(&vectors) {
            let f = fermi_dirac(*e, r.beta, r.mu);
            if f == 0.0 {
                continue;
            }
            for b in 0..l {
                let fb = f * v[b];
                for a in 0..l {
                    rho[(o + a, o + b)].re += v[a] * fb;
                }
            }
        }
    }
    rho.view_mut((2 * l, 2 * l), (n, n)).copy_from(rho_s);
    Ok(rho)
}

/// Occupation, block offset and amplitudes of one initial eigenmode.
type Mode = (f64, usize, Vec<c64>);

/// `ρ = offset·Id + Σ_o weights[o] |ψ_o⟩⟨ψ_o|`, orbitals stored as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalDensity {
    pub offset: f64,
    pub weights: Vec<f64>,
    pub orbitals: CMatrix,
}

impl OrbitalDensity {
    /// Orbital form of `ρ_i`; occupations within `cutoff` of 0 (or of 1, when
    /// holes are fewer than particles) are dropped.
    pub fn initial(spec: &SystemSpec, l: usize, rho_s: &SampleMatrix, cutoff: f64) -> Result<Self> {
        check_sample_density(spec, rho_s)?;
        let n = spec.n();
        let dim = 2 * l + n;
        let (values, vectors) = dirichlet_eigenpairs(l, spec.t_c);
        // (occupation, global offset, vector)
        let mut modes: Vec<Mode> = Vec::new();
        for lead in Lead::BOTH {
            let r = spec.reservoirs[lead.index()];
            for (e, v) in values.iter().zip(&vectors) {
                let f = fermi_dirac(*e, r.beta, r.mu);
                modes.push((f, lead.index() * l, v.iter().map(|&x| c64::new(x, 0.0)).collect()));
            }
        }
        let (occ, vecs) = hermitian_eigen(rho_s);
        for (k, &p) in occ.iter().enumerate() {
            modes.push((p, 2 * l, vecs.column(k).iter().copied().collect()));
        }
        let particles = modes.iter().filter(|m| m.0 > cutoff).count();
        let holes = modes.iter().filter(|m| 1.0 - m.0 > cutoff).count();
        let (offset, keep): (f64, Vec<&Mode>) = if particles <= holes {
            (0.0, modes.iter().filter(|m| m.0 > cutoff).collect())
        } else {
            (1.0, modes.iter().filter(|m| 1.0 - m.0 > cutoff).collect())
        };
        let mut orbitals = CMatrix::zeros(dim, keep.len());
        let mut weights = Vec::with_capacity(keep.len());
        for (c, (f, start, v)) in keep.into_iter().enumerate() {
            weights.push(if offset == 0.0 { *f } else { f - 1.0 });
            for (a, z) in v.iter().enumerate() {
                orbitals[(start + a, c)] = *z;
            }
        }
        Ok(Self { offset, weights, orbitals })
    }

    pub fn dim(&self) -> usize {
        self.orbitals.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> c64 {
        let mut acc = if i == j { c64::new(self.offset, 0.0) } else { ZERO };
        for (o, &w) in self.weights.iter().enumerate() {
            acc += self.orbitals[(i, o)] * self.orbitals[(j, o)].conj() * w;
        }
        acc
    }

    pub fn to_dense(&self) -> CMatrix {
        let scaled = CMatrix::from_fn(self.dim(), self.weights.len(), |i, o| self.orbitals[(i, o)] * self.weights[o]);
        CMatrix::identity(self.dim(), self.dim()) * c64::new(self.offset, 0.0) + scaled * self.orbitals.adjoint()
    }

    fn trace_defect(&self) -> f64 {
        self.weights.iter().enumerate().map(|(o, w)| w * (self.orbitals.column(o).norm_squared() - 1.0)).sum()
    }
}

/// Observables recorded along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub occupations: Vec<f64>,
    /// `Tr(ρ I₁) = −2τ Im⟨L₁|ρ|S₁⟩`.
    pub current: f64,
    pub trace_defect: f64,
    pub unitarity_defect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Time between recorded samples (rounded to a multiple of `dt`).
    pub output_every: f64,
}

/// Classical RK4 step for `y' = f(y)` on a flat complex state.
struct Rk4 {
    k: [Vec<c64>; 4],
    stage: Vec<c64>,
}

impl Rk4 {
    fn new(len: usize) -> Self {
        Self { k: [vec![ZERO; len], vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]], stage: vec![ZERO; len] }
    }

    fn step(&mut self, y: &mut [c64], dt: f64, f: &mut impl FnMut(&[c64], &mut [c64])) {
        let [k1, k2, k3, k4] = &mut self.k;
        let stage = &mut self.stage;
        f(y, k1);
        for ((s, a), b) in stage.iter_mut().zip(y.iter()).zip(k1.iter()) {
            *s = a + b * (0.5 * dt);
        }
        f(stage, k2);
        for ((s, a), b) in stage.iter_mut().zip(y.iter()).zip(k2.iter()) {
            *s = a + b * (0.5 * dt);
        }
        f(stage, k3);
        for ((s, a), b) in stage.iter_mut().zip(y.iter()).zip(k3.iter()) {
            *s = a + b * dt;
        }
        f(stage, k4);
        for i in 0..y.len() {
            y[i] += (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]) * (dt / 6.0);
        }
    }
}

/// `H` split into the uniform lead-chain hopping, applied as a contiguous
/// stencil, and the remaining entries (couplings, sample block).
struct SplitOperator {
    dim: usize,
    lead_length: usize,
    hop: c64,
    extra: Vec<(usize, usize, c64)>,
}

impl SplitOperator {
    fn new(op: &TruncatedOperator, t_c: f64) -> Self {
        let l = op.lead_length;
        let hop = c64::new(t_c, 0.0);
        let mut extra = Vec::new();
        for i in 0..op.dim() {
            for (j, v) in op.row(i) {
                let same_lead = i < 2 * l && j < 2 * l && i / l == j / l;
                if same_lead && i.abs_diff(j) == 1 && v == hop {
                    continue;
                }
                extra.push((i, j, v));
            }
        }
        Self { dim: op.dim(), lead_length: l, hop, extra }
    }

    /// `out = factor · (H + diag(diagonal)) x` for `cols` contiguous columns.
    fn apply(&self, diagonal: &[f64], factor: c64, x: &[c64], out: &mut [c64], cols: usize) {
        let (dim, l) = (self.dim, self.lead_length);
        let hop = self.hop * factor;
        let scaled: Vec<c64> = diagonal.iter().map(|d| factor * *d).collect();
        for c in 0..cols {
            let xc = &x[c * dim..(c + 1) * dim];
            let oc = &mut out[c * dim..(c + 1) * dim];
            for (o, (xi, d)) in oc.iter_mut().zip(xc.iter().zip(&scaled)) {
                *o = xi * d;
            }
            for lead in 0..2 {
                let (xs, os) = (&xc[lead * l..(lead + 1) * l], &mut oc[lead * l..(lead + 1) * l]);
                if l > 1 {
                    os[0] += hop * xs[1];
                    os[l - 1] += hop * xs[l - 2];
                }
                for i in 1..l.saturating_sub(1) {
                    os[i] += hop * (xs[i - 1] + xs[i + 1]);
                }
            }
            for &(i, j, v) in &self.extra {
                oc[i] += factor * v * xc[j];
            }
        }
    }
}

fn mean_field_diagonal(dim: usize, sample0: usize, potential: &[f64], shift: f64) -> Vec<f64> {
    (0..dim).map(|i| if i >= sample0 { potential[i - sample0] - shift } else { -shift }).collect()
}

fn hartree_diagonal(spec: &SystemSpec, occupations: &[f64]) -> Vec<f64> {
    let n = spec.n();
    (0..n).map(|j| spec.lambda * (0..n).map(|k| spec.nu[(j, k)] * occupations[k]).sum::<f64>()).collect()
}

fn recurrence_warning(spec: &SystemSpec, l: usize, t_end: f64) -> Vec<Warning> {
    let horizon = 0.8 * l as f64 / (2.0 * spec.t_c);
    if t_end > horizon {
        vec![Warning::RecurrenceHorizon { t_end, horizon }]
    } else {
        Vec::new()
    }
}

fn schedule(options: &EvolveOptions) -> (usize, usize) {
    let steps = (options.t_end / options.dt).round() as usize;
    let stride = ((options.output_every / options.dt).round() as usize).max(1);
    (steps, stride)
}

fn dense_sample(spec: &SystemSpec, l: usize, t: f64, rho: &CMatrix, trace0: f64) -> Sample {
    let n = spec.n();
    let s0 = 2 * l;
    let occupations = (0..n).map(|k| rho[(s0 + k, s0 + k)].re).collect();
    let s1 = &spec.sample_coupling[0];
    let mut overlap = ZERO;
    for &(site, amp) in spec.lead_coupling[0].entries() {
        for a in 0..n {
            overlap += amp.conj() * rho[(site, s0 + a)] * s1[a];
        }
    }
    Sample {
        t,
        occupations,
        current: -2.0 * spec.tau * overlap.im,
        trace_defect: rho.trace().re - trace0,
        unitarity_defect: None,
    }
}

/// Final state and trajectory of a dense evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseEvolution {
    pub trajectory: Trajectory,
    pub rho: CMatrix,
}

/// Dense RK4 integration of the nonlinear Liouville equation.
pub fn evolve_liouville(
    spec: &SystemSpec,
    l: usize,
    rho_i: &CMatrix,
    options: EvolveOptions,
) -> Result<DenseEvolution> {
    let op = assemble_truncated(spec, l, None)?;
    let dim = op.dim();
    if rho_i.nrows() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: rho_i.nrows() });
    }
    let n = spec.n();
    let s0 = 2 * l;
    let trace0 = rho_i.trace().re;
    let split = SplitOperator::new(&op, spec.t_c);
    let mut rho = rho_i.clone();
    let mut rk = Rk4::new(dim * dim);
    let mut product = vec![ZERO; dim * dim];
    let mut rhs = |y: &[c64], dy: &mut [c64]| {
        let occ: Vec<f64> = (0..n).map(|k| y[(s0 + k) * dim + s0 + k].re).collect();
        let v = hartree_diagonal(spec, &occ);
        split.apply(&mean_field_diagonal(dim, s0, &v, 0.0), c64::new(1.0, 0.0), y, &mut product, dim);
        // −i [K, ρ] = −i (Kρ − (Kρ)†)
        for c in 0..dim {
            for r in 0..dim {
                dy[c * dim + r] = MINUS_I * (product[c * dim + r] - product[r * dim + c].conj());
            }
        }
    };
    let (steps, stride) = schedule(&options);
    let mut samples = vec![dense_sample(spec, l, 0.0, &rho, trace0)];
    for step in 1..=steps {
        rk.step(rho.as_mut_slice(), options.dt, &mut rhs);
        if step % stride == 0 || step == steps {
            samples.push(dense_sample(spec, l, step as f64 * options.dt, &rho, trace0));
        }
    }
    Ok(DenseEvolution { trajectory: Trajectory { samples, warnings: recurrence_warning(spec, l, options.t_end) }, rho })
}

/// Final state and trajectory of an orbital evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalEvolution {
    pub trajectory: Trajectory,
    pub state: OrbitalDensity,
}

fn orbital_sample(spec: &SystemSpec, l: usize, t: f64, state: &OrbitalDensity) -> Sample {
    let n = spec.n();
    let s0 = 2 * l;
    let occupations = (0..n).map(|k| state.entry(s0 + k, s0 + k).re).collect();
    let s1 = &spec.sample_coupling[0];
    let mut overlap = ZERO;
    for (o, &w) in state.weights.iter().enumerate() {
        let psi = state.orbitals.column(o);
        let left: c64 = spec.lead_coupling[0].entries().iter().map(|&(site, amp)| amp.conj() * psi[site]).sum();
        let right: c64 = (0..n).map(|a| psi[s0 + a].conj() * s1[a]).sum();
        overlap += left * right * w;
    }
    Sample {
        t,
        occupations,
        current: -2.0 * spec.tau * overlap.im,
        trace_defect: state.trace_defect(),
        unitarity_defect: None,
    }
}

/// RK4 integration of the mean-field orbital equations
/// `i ψ_o' = (H + V_λ{ρ(t)}) ψ_o`, equivalent to the Liouville equation.
pub fn evolve_orbitals(
    spec: &SystemSpec,
    l: usize,
    initial: OrbitalDensity,
    options: EvolveOptions,
) -> Result<OrbitalEvolution> {
    let op = assemble_truncated(spec, l, None)?;
    let dim = op.dim();
    if initial.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: initial.dim() });
    }
    let n = spec.n();
    let s0 = 2 * l;
    let cols = initial.weights.len();
    let weights = initial.weights.clone();
    let offset = initial.offset;
    // A global energy shift leaves ρ unchanged and reduces the RK4 phase error.
    let shift =
        if cols == 0 { 0.0 } else { (0..cols).map(|o| rayleigh(&op, &initial.orbitals, o)).sum::<f64>() / cols as f64 };
    let mut state = initial;
    let split = SplitOperator::new(&op, spec.t_c);
    let mut rk = Rk4::new(dim * cols);
    let mut rhs = |y: &[c64], dy: &mut [c64]| {
        let occ: Vec<f64> = (0..n)
            .map(|k| offset + (0..cols).map(|o| weights[o] * y[o * dim + s0 + k].norm_sqr()).sum::<f64>())
            .collect();
        let v = hartree_diagonal(spec, &occ);
        split.apply(&mean_field_diagonal(dim, s0, &v, shift), MINUS_I, y, dy, cols);
    };
    let (steps, stride) = schedule(&options);
    let mut samples = vec![orbital_sample(spec, l, 0.0, &state)];
    for step in 1..=steps {
        rk.step(state.orbitals.as_mut_slice(), options.dt, &mut rhs);
        if step % stride == 0 || step == steps {
            samples.push(orbital_sample(spec, l, step as f64 * options.dt, &state));
        }
    }
    Ok(OrbitalEvolution {
        trajectory: Trajectory { samples, warnings: recurrence_warning(spec, l, options.t_end) },
        state,
    })
}

fn rayleigh(op: &TruncatedOperator, orbitals: &CMatrix, o: usize) -> f64 {
    let dim = op.dim();
    let x = &orbitals.as_slice()[o * dim..(o + 1) * dim];
    let mut hx = vec![ZERO; dim];
    op.apply(x, &mut hx);
    let num: c64 = x.iter().zip(&hx).map(|(a, b)| a.conj() * b).sum();
    let den: f64 = x.iter().map(|a| a.norm_sqr()).sum();
    if den > 0.0 {
        num.re / den
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    /// Quadrature spacing inside each window.
    pub dt: f64,
    pub tol: f64,
    pub max_iterations: usize,
    /// Fraction of the admissible window actually used.
    pub safety: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { dt: 0.005, tol: 1e-13, max_iterations: 200, safety: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardResult {
    pub u: CMatrix,
    pub rho: CMatrix,
    /// Window width used.
    pub window: f64,
    /// Admissible width `min(1/L_{3/2}, 1/(2M_{3/2}))`.
    pub admissible_window: f64,
    pub windows: usize,
    /// Largest contraction ratio observed between Picard iterates.
    pub max_contraction: f64,
    pub unitarity_defect: f64,
    /// State at the end of every window.
    pub trajectory: Trajectory,
}

/// `min(1/L_{3/2}, 1/(2M_{3/2}))` with `r + ‖A₀‖ = 3/2` and `‖H‖` bounded by
/// the row-sum norm of the truncated matrix.
fn window_bound(spec: &SystemSpec, h: &CMatrix) -> f64 {
    let h_norm = row_sum_norm(h);
    let r = 1.5;
    let lip = h_norm + 4.0 * spec.lambda * spec.nu_norm1() * r * r;
    let bound = r * (h_norm + spec.lambda * spec.nu_norm1() * r * r);
    (1.0 / lip).min(1.0 / (2.0 * bound))
}

/// Admissible Picard window for a truncation of length `l`.
pub fn admissible_window(spec: &SystemSpec, l: usize) -> Result<f64> {
    Ok(window_bound(spec, &assemble_truncated(spec, l, None)?.to_dense()))
}

/// Cumulative composite Simpson integral on uniform nodes.
fn cumulative_simpson(f: &[CMatrix], h: f64) -> Vec<CMatrix> {
    let m = f.len() - 1;
    let shape = (f[0].nrows(), f[0].ncols());
    let mut out = vec![CMatrix::zeros(shape.0, shape.1); m + 1];
    if m >= 1 {
        out[1] = if m >= 2 {
            (&f[0] * c64::new(5.0, 0.0) + &f[1] * c64::new(8.0, 0.0) - &f[2]) * c64::new(h / 12.0, 0.0)
        } else {
            (&f[0] + &f[1]) * c64::new(h / 2.0, 0.0)
        };
    }
    for k in 2..=m {
        out[k] = if k % 2 == 0 {
            &out[k - 2] + (&f[k - 2] + &f[k - 1] * c64::new(4.0, 0.0) + &f[k]) * c64::new(h / 3.0, 0.0)
        } else {
            &out[k - 3]
                + (&f[k - 3] + (&f[k - 2] + &f[k - 1]) * c64::new(3.0, 0.0) + &f[k]) * c64::new(3.0 * h / 8.0, 0.0)
        };
    }
    out
}

/// `U(t)` from `U(t) = Id − i ∫₀^t G(U(s)) ds`, `G(U) = (H + V_λ{U ρ_i U*}) U`,
/// by Picard iteration on successive windows.
pub fn picard_propagator(
    spec: &SystemSpec,
    l: usize,
    rho_i: &CMatrix,
    t_end: f64,
    options: PicardOptions,
) -> Result<PicardResult> {
    let op = assemble_truncated(spec, l, None)?;
    let h = op.to_dense();
    let dim = op.dim();
    if rho_i.nrows() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: rho_i.nrows() });
    }
    let n = spec.n();
    let s0 = 2 * l;
    let admissible = window_bound(spec, &h);
    let windows = ((t_end / (options.safety * admissible)).ceil() as usize).max(1);
    let width = t_end / windows as f64;
    let sub = {
        let m = (width / options.dt).ceil() as usize;
        (m + m % 2).max(2)
    };
    let step = width / sub as f64;
    let generator = |u: &CMatrix| -> CMatrix {
        let rho = u * rho_i * u.adjoint();
        let occ: Vec<f64> = (0..n).map(|k| rho[(s0 + k, s0 + k)].re).collect();
        let v = hartree_diagonal(spec, &occ);
        let mut g = &h * u;
        for k in 0..n {
            let mut row = g.row_mut(s0 + k);
            row += u.row(s0 + k) * c64::new(v[k], 0.0);
        }
        g
    };
    let trace0 = rho_i.trace().re;
    let mut u = CMatrix::identity(dim, dim);
    let mut samples = vec![dense_sample(spec, l, 0.0, rho_i, trace0)];
    let mut max_contraction = 0.0f64;
    for w in 0..windows {
        let u0 = u.clone();
        let mut iterate = vec![u0.clone(); sub + 1];
        let mut previous_change = f64::INFINITY;
        let mut converged = false;
        for _ in 0..options.max_iterations {
            let g: Vec<CMatrix> = iterate.iter().map(&generator).collect();
            let integral = cumulative_simpson(&g, step);
            let mut change = 0.0f64;
            for (k, int) in integral.into_iter().enumerate() {
                let next = &u0 + int * MINUS_I;
                change = change.max((&next - &iterate[k]).norm());
                iterate[k] = next;
            }
            let scale = (dim as f64).sqrt();
            if previous_change.is_finite() && previous_change > 1e-9 * scale && change > 1e-9 * scale {
                let ratio = change / previous_change;
                max_contraction = max_contraction.max(ratio);
                if ratio > 0.95 {
                    return Err(Error::WindowTooLarge { ratio });
                }
            }
            previous_change = change;
            if change < options.tol * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence { iterations: options.max_iterations, residual: previous_change });
        }
        u = iterate.pop().expect("nonempty");
        let rho = &u * rho_i * u.adjoint();
        let mut sample = dense_sample(spec, l, (w + 1) as f64 * width, &rho, trace0);
        sample.unitarity_defect = Some(unitarity_defect(&u));
        samples.push(sample);
    }
    let rho = &u * rho_i * u.adjoint();
    Ok(PicardResult {
        unitarity_defect: unitarity_defect(&u),
        u,
        rho,
        window: width,
        admissible_window: admissible,
        windows,
        max_contraction,
        trajectory: Trajectory { samples, warnings: Vec::new() },
    })
}

/// `‖U*U − Id‖` in the Frobenius norm.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    (u.adjoint() * u - CMatrix::identity(u.ncols(), u.ncols())).norm()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateauValues {
    pub occupations: Vec<f64>,
    pub current: f64,
    /// Relative drift between the two halves of the plateau window.
    pub drift: f64,
}

/// Averages over the last `fraction` of the samples; fails with `NoPlateau`
/// when the two halves of that window differ by more than `max_drift`
/// relative to `scale` (current) or absolutely (occupations).
pub fn plateau(trajectory: &Trajectory, fraction: f64, max_drift: f64, current_scale: f64) -> Result<PlateauValues> {
    let samples = &trajectory.samples;
    let count = ((samples.len() as f64 * fraction).round() as usize).clamp(2, samples.len());
    let window = &samples[samples.len() - count..];
    let half = count / 2;
    let mean = |s: &[Sample], f: &dyn Fn(&Sample) -> f64| s.iter().map(f).sum::<f64>() / s.len() as f64;
    let current = mean(window, &|s| s.current);
    let c_drift = (mean(&window[half..], &|s| s.current) - mean(&window[..half], &|s| s.current)).abs()
        / current_scale.max(current.abs()).max(f64::MIN_POSITIVE);
    let n = window[0].occupations.len();
    let mut occupations = Vec::with_capacity(n);
    let mut o_drift = 0.0f64;
    for k in 0..n {
        occupations.push(mean(window, &|s| s.occupations[k]));
        let d = (mean(&window[half..], &|s| s.occupations[k]) - mean(&window[..half], &|s| s.occupations[k])).abs();
        o_drift = o_drift.max(d);
    }
    if c_drift > max_drift {
        return Err(Error::NoPlateau { observable: "current", drift: c_drift });
    }
    if o_drift > max_drift {
        return Err(Error::NoPlateau { observable: "occupations", drift: o_drift });
    }
    Ok(PlateauValues { occupations, current, drift: c_drift.max(o_drift) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyDiagnostics {
    pub plateau: PlateauValues,
    pub steady_current: f64,
    pub steady_occupations: Vec<f64>,
    /// `|I_plateau − I_ness| / |I_ness|` (absolute when the steady current vanishes).
    pub current_deviation: f64,
    pub occupation_deviation: f64,
    /// Largest occupation gap between two evolutions from different `ρ_s`.
    pub initial_state_gap: Option<f64>,
}

/// Compares time-domain plateaus with the energy-domain steady state. The
/// optional second trajectory starts from a different sample state.
pub fn steady_diagnostics(
    trajectory: &Trajectory,
    other: Option<&Trajectory>,
    ness: &SteadyStateResult,
) -> Result<SteadyDiagnostics> {
    const FRACTION: f64 = 0.2;
    const MAX_DRIFT: f64 = 1e-3;
    let scale = ness.current_1.abs();
    let main = plateau(trajectory, FRACTION, MAX_DRIFT, scale)?;
    let initial_state_gap = match other {
        Some(t) => {
            let p = plateau(t, FRACTION, MAX_DRIFT, scale)?;
            Some(p.occupations.iter().zip(&main.occupations).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        }
        None => None,
    };
    let current_deviation =
        if scale > 0.0 { (main.current - ness.current_1).abs() / scale } else { main.current.abs() };
    let occupation_deviation =
        main.occupations.iter().zip(&ness.occupations).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(SteadyDiagnostics {
        steady_current: ness.current_1,
        steady_occupations: ness.occupations.clone(),
        plateau: main,
        current_deviation,
        occupation_deviation,
        initial_state_gap,
    })
}

/// Global index of a sample site on a truncation of length `l`.
pub fn sample_index(l: usize, k: usize) -> usize {
    2 * l + k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitary_exp;

    #[test]
    fn split_operator_matches_sparse_product() {
        let mut spec = SystemSpec::single_dot(0.3, 0.7, 1.2);
        spec.lead_coupling[1] = crate::LeadVector::new([(0, c64::new(1.0, 0.0)), (2, c64::new(0.2, -0.4))]);
        let op = assemble_truncated(&spec, 7, None).unwrap();
        let split = SplitOperator::new(&op, spec.t_c);
        let x: Vec<c64> = (0..2 * op.dim()).map(|k| c64::new((k as f64).sin(), (k as f64 * 0.7).cos())).collect();
        let diagonal: Vec<f64> = (0..op.dim()).map(|i| 0.1 * i as f64).collect();
        let mut fast = vec![ZERO; x.len()];
        split.apply(&diagonal, MINUS_I, &x, &mut fast, 2);
        for c in 0..2 {
            let xc = &x[c * op.dim()..(c + 1) * op.dim()];
            let mut slow = vec![ZERO; op.dim()];
            op.apply(xc, &mut slow);
            for i in 0..op.dim() {
                let expected = MINUS_I * (slow[i] + xc[i] * diagonal[i]);
                assert!((fast[c * op.dim() + i] - expected).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn dirichlet_pairs_are_orthonormal() {
        let (_, v) = dirichlet_eigenpairs(7, 1.0);
        for a in 0..7 {
            for b in 0..7 {
                let dot: f64 = v[a].iter().zip(&v[b]).map(|(x, y)| x * y).sum();
                assert!((dot - if a == b { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn zero_temperature_lead_block_rank() {
        let spec = SystemSpec::single_dot(0.0, 0.2, 1.0);
        for l in [10, 11] {
            let rho = initial_state_truncated(&spec, l, &SampleMatrix::from_element(1, 1, c64::new(0.5, 0.0))).unwrap();
            let block = rho.view((0, 0), (l, l)).into_owned();
            let (ev, _) = hermitian_eigen(&block);
            let rank = ev.iter().filter(|&&e| e > 0.5).count();
            // The zero mode of an odd chain sits at cos(π/2) > 0 in floating point.
            assert_eq!(rank, l / 2);
            assert!((rho.trace().re - (2 * (l / 2)) as f64 - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn midgap_potential_sits_between_levels() {
        let (levels, _) = dirichlet_eigenpairs(600, 1.0);
        let mu = midgap_chemical_potential(0.1, 600, 1.0);
        let above = levels.iter().copied().filter(|&e| e > mu).fold(f64::INFINITY, f64::min);
        let below = levels.iter().copied().filter(|&e| e < mu).fold(f64::NEG_INFINITY, f64::max);
        assert!((mu - 0.5 * (above + below)).abs() < 1e-15);
        assert!(below < 0.1 && 0.1 <= above);
    }

    #[test]
    fn orbital_form_reproduces_dense_state() {
        let mut spec = SystemSpec::single_dot(0.1, 0.3, 1.0);
        spec.reservoirs[0].beta = 3.0;
        spec.reservoirs[1].mu = 0.4;
        let rho_s = SampleMatrix::from_element(1, 1, c64::new(0.3, 0.0));
        let dense = initial_state_truncated(&spec, 9, &rho_s).unwrap();
        let orb = OrbitalDensity::initial(&spec, 9, &rho_s, 0.0).unwrap();
        assert!((orb.to_dense() - dense).norm() < 1e-13);
    }

    #[test]
    fn simpson_weights_integrate_cubics() {
        let h = 0.1;
        for m in [2usize, 3, 5, 6] {
            let f: Vec<CMatrix> =
                (0..=m).map(|k| CMatrix::from_element(1, 1, c64::new((k as f64 * h).powi(2), 0.0))).collect();
            let int = cumulative_simpson(&f, h);
            for k in 1..=m {
                let exact = (k as f64 * h).powi(3) / 3.0;
                assert!((int[k][(0, 0)].re - exact).abs() < 1e-15, "m = {m}, k = {k}");
            }
        }
    }

    #[test]
    fn linear_picard_is_exponential() {
        let spec = SystemSpec::single_dot(0.2, 0.4, 1.0);
        let l = 6;
        let rho = initial_state_truncated(&spec, l, &SampleMatrix::from_element(1, 1, c64::new(0.5, 0.0))).unwrap();
        let res = picard_propagator(&spec, l, &rho, 0.5, PicardOptions::default()).unwrap();
        let h = assemble_truncated(&spec, l, None).unwrap().to_dense();
        assert!((res.u - unitary_exp(&h, 0.5)).norm() < 1e-9);
    }
}
