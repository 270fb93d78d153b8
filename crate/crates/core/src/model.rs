//! System specification, index conventions and Hamiltonian assembly.
//!
//! Global ordering on truncated lattices: lead-1 sites `0..L`, lead-2 sites
//! `0..L`, then the sample basis `ζ_1 … ζ_N`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{hermiticity_defect, CMatrix, CVector, ZERO};
use crate::{c64, Error, Result};

/// Dense `N×N` operator on the sample: Hamiltonians, densities, `S(E)`.
pub type SampleMatrix = CMatrix;

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lead {
    One,
    Two,
}

impl Lead {
    pub const BOTH: [Lead; 2] = [Lead::One, Lead::Two];

    pub fn index(self) -> usize {
        match self {
            Lead::One => 0,
            Lead::Two => 1,
        }
    }
}

/// Compactly supported vector on one lead: `(site, amplitude)` pairs with
/// distinct sites in ascending order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LeadVector {
    entries: Vec<(usize, c64)>,
}

impl LeadVector {
    pub fn new(entries: impl IntoIterator<Item = (usize, c64)>) -> Self {
        let mut merged: Vec<(usize, c64)> = Vec::new();
        let mut raw: Vec<(usize, c64)> = entries.into_iter().collect();
        raw.sort_by_key(|e| e.0);
        for (site, value) in raw {
            match merged.last_mut() {
                Some(last) if last.0 == site => last.1 += value,
                _ => merged.push((site, value)),
            }
        }
        merged.retain(|e| e.1 != ZERO);
        Self { entries: merged }
    }

    pub fn delta(site: usize) -> Self {
        Self::new([(site, c64::new(1.0, 0.0))])
    }

    pub fn entries(&self) -> &[(usize, c64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_site(&self) -> Option<usize> {
        self.entries.last().map(|e| e.0)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|e| e.1.norm_sqr()).sum()
    }
}

/// Compactly supported vector on the whole configuration space.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizedVector {
    pub leads: [LeadVector; 2],
    /// Sample components; empty means zero.
    pub sample: Vec<c64>,
}

impl LocalizedVector {
    pub fn on_lead(lead: Lead, v: LeadVector) -> Self {
        let mut leads = [LeadVector::default(), LeadVector::default()];
        leads[lead.index()] = v;
        Self { leads, sample: Vec::new() }
    }

    pub fn on_sample(v: impl IntoIterator<Item = c64>) -> Self {
        Self { leads: [LeadVector::default(), LeadVector::default()], sample: v.into_iter().collect() }
    }

    /// Sample basis vector `ζ_k` (zero-based `k`).
    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = vec![ZERO; n];
        v[k] = c64::new(1.0, 0.0);
        Self::on_sample(v)
    }

    pub fn sample_component(&self, k: usize) -> c64 {
        self.sample.get(k).copied().unwrap_or(ZERO)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.leads.iter().map(LeadVector::norm_sqr).sum::<f64>() + self.sample.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }
}

/// Reservoir parameters. `beta = ∞` means zero temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reservoir {
    pub beta: f64,
    pub mu: f64,
}

impl Reservoir {
    pub fn occupation(&self, energy: f64) -> f64 {
        fermi_dirac(energy, self.beta, self.mu)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub t_c: f64,
    pub tau: f64,
    pub h_s: SampleMatrix,
    pub nu: DMatrix<f64>,
    pub lambda: f64,
    /// `|S_1⟩, |S_2⟩`.
    pub sample_coupling: [CVector; 2],
    /// `|L_1⟩, |L_2⟩`.
    pub lead_coupling: [LeadVector; 2],
    pub reservoirs: [Reservoir; 2],
    pub beta_s: f64,
    pub n_particles: f64,
}

impl SystemSpec {
    /// Single level `α` coupled at site 0 of both leads with `S_j = ζ`.
    pub fn single_dot(alpha: f64, tau: f64, t_c: f64) -> Self {
        let one = CVector::from_element(1, c64::new(1.0, 0.0));
        Self {
            t_c,
            tau,
            h_s: SampleMatrix::from_element(1, 1, c64::new(alpha, 0.0)),
            nu: DMatrix::from_element(1, 1, 1.0),
            lambda: 0.0,
            sample_coupling: [one.clone(), one],
            lead_coupling: [LeadVector::delta(0), LeadVector::delta(0)],
            reservoirs: [Reservoir { beta: f64::INFINITY, mu: 0.0 }; 2],
            beta_s: 1.0,
            n_particles: 0.5,
        }
    }

    pub fn n(&self) -> usize {
        self.h_s.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 || self.h_s.ncols() != n {
            return Err(Error::InvalidSpec("h_s must be a non-empty square matrix"));
        }
        if hermiticity_defect(&self.h_s) > HERMITIAN_TOL * (1.0 + self.h_s.norm()) {
            return Err(Error::InvalidSpec("h_s is not Hermitian"));
        }
        if self.nu.nrows() != n || self.nu.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.nu.nrows() });
        }
        for s in &self.sample_coupling {
            if s.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: s.len() });
            }
            if s.norm() == 0.0 {
                return Err(Error::InvalidSpec("sample coupling vectors must be nonzero"));
            }
        }
        if self.lead_coupling.iter().any(LeadVector::is_zero) {
            return Err(Error::InvalidSpec("lead coupling vectors must be nonzero"));
        }
        if !(self.t_c > 0.0) {
            return Err(Error::InvalidSpec("t_c must be positive"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidSpec("tau must be positive"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidSpec("lambda must be nonnegative"));
        }
        if !(self.n_particles > 0.0 && self.n_particles < n as f64) {
            return Err(Error::InvalidSpec("n_particles must lie in (0, N)"));
        }
        if !(self.beta_s > 0.0 && self.beta_s.is_finite()) {
            return Err(Error::InvalidSpec("beta_s must be positive and finite"));
        }
        if self.reservoirs.iter().any(|r| !(r.beta > 0.0) || !r.mu.is_finite()) {
            return Err(Error::InvalidSpec("reservoir beta must be positive and mu finite"));
        }
        Ok(())
    }

    /// `‖ν‖₁ = Σ_{jk} |ν_jk|`.
    pub fn nu_norm1(&self) -> f64 {
        self.nu.iter().map(|v| v.abs()).sum()
    }

    pub fn equal_reservoirs(&self) -> bool {
        let [a, b] = self.reservoirs;
        a.beta == b.beta && a.mu == b.mu
    }

    /// Copy with `h_s ← h_s + extra`.
    pub fn with_extra_potential(&self, extra: &SampleMatrix) -> Self {
        let mut out = self.clone();
        out.h_s += extra;
        out
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.lambda = lambda;
        out
    }

    pub fn with_reservoirs(&self, reservoirs: [Reservoir; 2]) -> Self {
        let mut out = self.clone();
        out.reservoirs = reservoirs;
        out
    }

    fn max_support(&self) -> usize {
        self.lead_coupling.iter().filter_map(LeadVector::max_site).max().unwrap_or(0)
    }
}

/// `V_λ{γ} = λ Σ_j (Σ_k ν_jk γ_kk) |ζ_j⟩⟨ζ_j|`.
pub fn hartree_potential(gamma: &SampleMatrix, spec: &SystemSpec) -> Result<SampleMatrix> {
    let n = spec.n();
    if gamma.nrows() != n || gamma.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: gamma.nrows() });
    }
    let residue = (0..n).map(|k| gamma[(k, k)].im.abs()).fold(0.0, f64::max);
    if residue > HERMITIAN_TOL {
        return Err(Error::NonHermitianDensity { residue });
    }
    let occ: Vec<f64> = (0..n).map(|k| gamma[(k, k)].re).collect();
    Ok(hartree_from_occupations(&occ, spec))
}

/// Hartree potential generated by the occupation vector `n_k`.
pub fn hartree_from_occupations(occupations: &[f64], spec: &SystemSpec) -> SampleMatrix {
    let n = spec.n();
    let diag: Vec<c64> = (0..n)
        .map(|j| c64::new(spec.lambda * (0..n).map(|k| spec.nu[(j, k)] * occupations[k]).sum::<f64>(), 0.0))
        .collect();
    SampleMatrix::from_diagonal(&DVector::from_vec(diag))
}

/// Fermi–Dirac occupation; `beta = ∞` gives the step with value ½ at `E = µ`.
pub fn fermi_dirac(energy: f64, beta: f64, mu: f64) -> f64 {
    let x = energy - mu;
    if beta.is_infinite() {
        return if x < 0.0 {
            1.0
        } else if x > 0.0 {
            0.0
        } else {
            0.5
        };
    }
    let y = beta * x;
    if y > 0.0 {
        let e = (-y).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + y.exp())
    }
}

/// Position of a lattice site in the truncated global ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    Lead(Lead, usize),
    Sample(usize),
}

/// Finite-volume Hamiltonian on `ℓ²({0..L}) ⊕ ℓ²({0..L}) ⊕ ℂ^N`, stored in
/// compressed rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    pub lead_length: usize,
    pub n_sample: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<c64>,
}

impl TruncatedOperator {
    pub fn dim(&self) -> usize {
        2 * self.lead_length + self.n_sample
    }

    pub fn index(&self, site: Site) -> usize {
        match site {
            Site::Lead(lead, n) => lead.index() * self.lead_length + n,
            Site::Sample(k) => 2 * self.lead_length + k,
        }
    }

    pub fn site(&self, index: usize) -> Site {
        let l = self.lead_length;
        if index < l {
            Site::Lead(Lead::One, index)
        } else if index < 2 * l {
            Site::Lead(Lead::Two, index - l)
        } else {
            Site::Sample(index - 2 * l)
        }
    }

    /// Nonzero entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, c64)> + '_ {
        let r = self.row_start[i]..self.row_start[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.row(i).find(|e| e.0 == j).map_or(ZERO, |e| e.1)
    }

    pub fn to_dense(&self) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// `y ← H x` for a single column.
    pub fn apply(&self, x: &[c64], y: &mut [c64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
}

/// Truncated matrix of `H` (or `H + V_λ{γ}` when `gamma` is given).
pub fn assemble_truncated(
    spec: &SystemSpec,
    lead_length: usize,
    gamma: Option<&SampleMatrix>,
) -> Result<TruncatedOperator> {
    let max_support = spec.max_support();
    if lead_length <= max_support {
        return Err(Error::TruncationTooShort { length: lead_length, max_support });
    }
    let n = spec.n();
    let mut h_s = spec.h_s.clone();
    if let Some(g) = gamma {
        h_s += hartree_potential(g, spec)?;
    }
    let l = lead_length;
    let dim = 2 * l + n;
    let mut rows: Vec<Vec<(usize, c64)>> = vec![Vec::new(); dim];
    let hop = c64::new(spec.t_c, 0.0);
    for lead in 0..2 {
        for site in 0..l.saturating_sub(1) {
            let (a, b) = (lead * l + site, lead * l + site + 1);
            rows[a].push((b, hop));
            rows[b].push((a, hop));
        }
    }
    for a in 0..n {
        for b in 0..n {
            let v = h_s[(a, b)];
            if v != ZERO {
                rows[2 * l + a].push((2 * l + b, v));
            }
        }
    }
    for lead in Lead::BOTH {
        let s = &spec.sample_coupling[lead.index()];
        for &(site, amp) in spec.lead_coupling[lead.index()].entries() {
            let li = lead.index() * l + site;
            for a in 0..n {
                // τ |S_j⟩⟨L_j| + τ |L_j⟩⟨S_j|
                let v = s[a] * amp.conj() * spec.tau;
                if v != ZERO {
                    rows[2 * l + a].push((li, v));
                    rows[li].push((2 * l + a, v.conj()));
                }
            }
        }
    }
    let mut row_start = Vec::with_capacity(dim + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_start.push(0);
    for mut row in rows {
        row.sort_by_key(|e| e.0);
        for (j, v) in row {
            match cols.last() {
                Some(&last) if last == j && vals.len() > *row_start.last().unwrap() => *vals.last_mut().unwrap() += v,
                _ => {
                    cols.push(j);
                    vals.push(v);
                }
            }
        }
        row_start.push(cols.len());
    }
    Ok(TruncatedOperator { lead_length, n_sample: n, row_start, cols, vals })
}
