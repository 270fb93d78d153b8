//! Lattice Green functions, the Feshbach matrix `S(E)`, resolvent boundary
//! values of `H` and the dispersive constants `M`, `λ₀`.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{inverse_and_condition, singular_values, CMatrix, CVector, I, ZERO};
use crate::model::{Lead, LeadVector, LocalizedVector, SampleMatrix, SystemSpec};
use crate::quadrature::{adaptive_simpson, EnergyGrid};
use crate::{c64, Error, Result};

/// Default threshold on `cond(S(E))` above which `S(E)` counts as singular.
pub const SINGULAR_CONDITION: f64 = 1e10;

/// Which boundary value of the resolvent: `(H − E − i0)⁻¹` or `(H − E + i0)⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    MinusI0,
    PlusI0,
}

impl Side {
    fn orient(self, z: c64) -> c64 {
        match self {
            Side::MinusI0 => z,
            Side::PlusI0 => z.conj(),
        }
    }
}

/// Root of `ζ² − 2wζ + 1` inside the closed unit disk, continuous from `Im w > 0`.
fn inner_root(w: c64) -> c64 {
    let s = (w * w - 1.0).sqrt();
    let (a, b) = (w + s, w - s);
    if a.norm() < b.norm() {
        a
    } else {
        b
    }
}

fn inner_root_real(x: f64) -> c64 {
    if x.abs() <= 1.0 {
        c64::new(x, -(1.0 - x * x).sqrt())
    } else {
        c64::new(x - x.signum() * (x * x - 1.0).sqrt(), 0.0)
    }
}

/// `⟨n|(Δ_D − z)⁻¹|m⟩` from the inner root `ζ` and `w = z / 2t_c`.
fn dirichlet_from_root(n: usize, m: usize, zeta: c64, w: c64, t_c: f64) -> c64 {
    let (lo, hi) = (n.min(m), n.max(m));
    let growth = (lo as f64) * -zeta.norm().ln();
    if growth < 30.0 {
        // −ζ^{max+1} U_min(w) / t_c, stable up to and at the thresholds.
        let (mut u0, mut u1) = (c64::new(1.0, 0.0), 2.0 * w);
        for _ in 0..lo {
            let u2 = 2.0 * w * u1 - u0;
            u0 = u1;
            u1 = u2;
        }
        -zeta.powu(hi as u32 + 1) * u0 / t_c
    } else {
        let d = (hi - lo) as u32;
        -(zeta.powu(d) - zeta.powu((n + m + 2) as u32)) / ((zeta.inv() - zeta) * t_c)
    }
}

/// Boundary value `⟨n|(Δ_D − E − i0)⁻¹|m⟩` of the Dirichlet chain with hopping
/// `t_c`, continuous across `±2t_c` and real outside the band.
pub fn dirichlet_green(n: usize, m: usize, energy: f64, t_c: f64) -> c64 {
    let x = energy / (2.0 * t_c);
    dirichlet_from_root(n, m, inner_root_real(x), c64::new(x, 0.0), t_c)
}

/// `⟨n|(Δ_D − z)⁻¹|m⟩` for `z` off the cut `[−2t_c, 2t_c]`.
pub fn dirichlet_green_complex(n: usize, m: usize, z: c64, t_c: f64) -> Result<c64> {
    if z.im == 0.0 && z.re.abs() <= 2.0 * t_c {
        return Err(Error::OnBranchCut { energy: z.re });
    }
    let w = z / (2.0 * t_c);
    Ok(dirichlet_from_root(n, m, inner_root(w), w, t_c))
}

/// Full-line Green function `g^Δ(d) = ⟨n|(Δ − z)⁻¹|n+d⟩ = ζ^{|d|} / (t_c (ζ − ζ⁻¹))`.
pub fn full_line_green(d: i64, z: c64, t_c: f64) -> Result<c64> {
    if z.im == 0.0 && z.re.abs() <= 2.0 * t_c {
        return Err(Error::OnBranchCut { energy: z.re });
    }
    let zeta = inner_root(z / (2.0 * t_c));
    Ok(zeta.powu(d.unsigned_abs() as u32) / (t_c * (zeta - zeta.inv())))
}

/// `⟨f|(Δ_D − E − i0)⁻¹|g⟩` for compactly supported `f`, `g`.
pub fn lead_green_element(f: &LeadVector, g: &LeadVector, energy: f64, t_c: f64) -> c64 {
    let mut acc = ZERO;
    for &(n, fv) in f.entries() {
        for &(m, gv) in g.entries() {
            acc += fv.conj() * dirichlet_green(n, m, energy, t_c) * gv;
        }
    }
    acc
}

/// `S(E)` together with the lead self-energies `Σ_j(E) = ⟨L_j|(h_j − E − i0)⁻¹|L_j⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct SEMatrix {
    pub energy: f64,
    pub matrix: SampleMatrix,
    pub lead_selfenergy: [c64; 2],
}

/// `S(E) = h_s (+ extra) − E − τ² Σ_j Σ_j(E) |S_j⟩⟨S_j|`.
pub fn s_matrix(energy: f64, spec: &SystemSpec, extra: Option<&SampleMatrix>) -> SEMatrix {
    s_matrix_side(energy, spec, extra, Side::MinusI0)
}

fn s_matrix_side(energy: f64, spec: &SystemSpec, extra: Option<&SampleMatrix>, side: Side) -> SEMatrix {
    let n = spec.n();
    let sigma = Lead::BOTH.map(|j| {
        let l = &spec.lead_coupling[j.index()];
        side.orient(lead_green_element(l, l, energy, spec.t_c))
    });
    let mut matrix = spec.h_s.clone();
    if let Some(v) = extra {
        matrix += v;
    }
    for k in 0..n {
        matrix[(k, k)] -= energy;
    }
    let tau2 = spec.tau * spec.tau;
    for j in Lead::BOTH {
        let s = &spec.sample_coupling[j.index()];
        matrix -= s * s.adjoint() * (sigma[j.index()] * tau2);
    }
    SEMatrix { energy, matrix, lead_selfenergy: sigma }
}

/// Resolvent boundary value of `H` at a fixed real energy, assembled from the
/// Feshbach blocks of `S(E)⁻¹` and the lead Green functions.
#[derive(Debug, Clone)]
pub struct Resolvent<'a> {
    spec: &'a SystemSpec,
    side: Side,
    s: SEMatrix,
    s_inv: SampleMatrix,
    condition: f64,
    /// `S⁻¹ S_j`.
    s_inv_s: [CVector; 2],
    /// `S_j† S⁻¹` stored as a column.
    s_adj_s_inv: [CVector; 2],
}

impl<'a> Resolvent<'a> {
    pub fn new(spec: &'a SystemSpec, energy: f64, extra: Option<&SampleMatrix>, side: Side) -> Result<Self> {
        Self::with_threshold(spec, energy, extra, side, SINGULAR_CONDITION)
    }

    pub fn with_threshold(
        spec: &'a SystemSpec,
        energy: f64,
        extra: Option<&SampleMatrix>,
        side: Side,
        threshold: f64,
    ) -> Result<Self> {
        let s = s_matrix_side(energy, spec, extra, side);
        let (s_inv, condition) = match inverse_and_condition(&s.matrix) {
            Some(v) if v.1 <= threshold => v,
            Some((_, condition)) => return Err(Error::SingularS { energy, condition }),
            None => return Err(Error::SingularS { energy, condition: f64::INFINITY }),
        };
        let s_inv_s = [0, 1].map(|j| &s_inv * &spec.sample_coupling[j]);
        let s_adj_s_inv = [0, 1].map(|j| (spec.sample_coupling[j].adjoint() * &s_inv).adjoint());
        Ok(Self { spec, side, s, s_inv, condition, s_inv_s, s_adj_s_inv })
    }

    pub fn energy(&self) -> f64 {
        self.s.energy
    }

    pub fn s(&self) -> &SEMatrix {
        &self.s
    }

    pub fn s_inverse(&self) -> &SampleMatrix {
        &self.s_inv
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// `S⁻¹ |S_j⟩`.
    pub fn s_inverse_coupling(&self, lead: Lead) -> &CVector {
        &self.s_inv_s[lead.index()]
    }

    fn lead_green(&self, f: &LeadVector, g: &LeadVector) -> c64 {
        match self.side {
            Side::MinusI0 => lead_green_element(f, g, self.s.energy, self.spec.t_c),
            // ⟨f|R(E + i0)|g⟩ = conj⟨g|R(E − i0)|f⟩
            Side::PlusI0 => lead_green_element(g, f, self.s.energy, self.spec.t_c).conj(),
        }
    }

    /// `⟨f|(H − E ∓ i0)⁻¹|g⟩`.
    pub fn element(&self, f: &LocalizedVector, g: &LocalizedVector) -> c64 {
        let spec = self.spec;
        let n = spec.n();
        let tau = spec.tau;
        let dot = |a: &[c64], b: &CVector| -> c64 { a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum() };
        let mut acc = ZERO;
        if !f.sample.is_empty() && !g.sample.is_empty() {
            for a in 0..n {
                let fa = f.sample[a].conj();
                if fa == ZERO {
                    continue;
                }
                for b in 0..n {
                    acc += fa * self.s_inv[(a, b)] * g.sample[b];
                }
            }
        }
        let mut r_f = [ZERO; 2];
        let mut r_g = [ZERO; 2];
        for j in Lead::BOTH {
            let lj = &spec.lead_coupling[j.index()];
            let (fj, gj) = (&f.leads[j.index()], &g.leads[j.index()]);
            if !gj.is_zero() {
                r_g[j.index()] = self.lead_green(lj, gj);
            }
            if !fj.is_zero() {
                r_f[j.index()] = self.lead_green(fj, lj);
                if !gj.is_zero() {
                    acc += self.lead_green(fj, gj);
                }
            }
        }
        for j in 0..2 {
            if r_g[j] != ZERO && !f.sample.is_empty() {
                acc -= tau * dot(&f.sample, &self.s_inv_s[j]) * r_g[j];
            }
            if r_f[j] != ZERO && !g.sample.is_empty() {
                let sg: c64 = self.s_adj_s_inv[j].iter().zip(&g.sample).map(|(x, y)| x.conj() * y).sum();
                acc -= tau * r_f[j] * sg;
            }
            if r_f[j] == ZERO {
                continue;
            }
            for k in 0..2 {
                if r_g[k] != ZERO {
                    let sjk = spec.sample_coupling[j].dotc(&self.s_inv_s[k]);
                    acc += tau * tau * r_f[j] * sjk * r_g[k];
                }
            }
        }
        acc
    }
}

/// `⟨f|(H − E − i0)⁻¹|g⟩` at a single energy.
pub fn resolvent_h(energy: f64, spec: &SystemSpec, f: &LocalizedVector, g: &LocalizedVector) -> Result<c64> {
    Ok(Resolvent::new(spec, energy, None, Side::MinusI0)?.element(f, g))
}

/// Smallest singular value of `S(E)` over a set of energies.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub min_singular_value: f64,
    pub argmin_energy: f64,
    pub samples: Vec<(f64, f64)>,
}

impl SpectralReport {
    pub fn certifies(&self, margin: f64) -> bool {
        self.min_singular_value > margin
    }
}

pub fn spectral_condition_check(spec: &SystemSpec, energies: &[f64]) -> SpectralReport {
    let mut report = SpectralReport { min_singular_value: f64::INFINITY, argmin_energy: f64::NAN, samples: Vec::new() };
    for &e in energies {
        let smin = singular_values(&s_matrix(e, spec, None).matrix).last().copied().unwrap_or(0.0);
        if smin < report.min_singular_value {
            report.min_singular_value = smin;
            report.argmin_energy = e;
        }
        report.samples.push((e, smin));
    }
    report
}

/// `count` equally spaced energies covering `[−2t_c − δ, 2t_c + δ]`.
pub fn scan_energies(t_c: f64, delta: f64, count: usize) -> Vec<f64> {
    let (a, b) = (-2.0 * t_c - delta, 2.0 * t_c + delta);
    (0..count).map(|k| a + (b - a) * k as f64 / (count.max(2) - 1) as f64).collect()
}

/// Spectral densities `F_jn(E) = ⟨ζ_j|δ(H − E)|ζ_n⟩` on a grid, so that
/// `⟨ζ_j, e^{isH} ζ_n⟩ = ∫ e^{isE} F_jn(E) dE`.
#[derive(Debug, Clone)]
pub struct SampleSpectralDensity {
    pub grid: EnergyGrid,
    /// `density[i]` is the `N×N` matrix `F(E_i)`.
    pub density: Vec<CMatrix>,
}

impl SampleSpectralDensity {
    pub fn new(spec: &SystemSpec, grid: &EnergyGrid) -> Result<Self> {
        let mut density = Vec::with_capacity(grid.len());
        for &e in &grid.energy {
            let r = Resolvent::new(spec, e, None, Side::MinusI0)?;
            let inv = r.s_inverse();
            density.push((inv - inv.adjoint()) / (2.0 * PI * I));
        }
        Ok(Self { grid: grid.clone(), density })
    }

    /// `⟨ζ_j, e^{isH} ζ_n⟩` (zero-based indices).
    pub fn amplitude(&self, j: usize, n: usize, s: f64) -> c64 {
        self.grid
            .energy
            .iter()
            .zip(&self.grid.weight)
            .zip(&self.density)
            .map(|((&e, &w), f)| c64::from_polar(w, s * e) * f[(j, n)])
            .sum()
    }

    /// `Σ_i w_i F_jj(E_i)`; equals 1 when the grid resolves the whole spectral measure.
    pub fn mass(&self, j: usize) -> f64 {
        self.grid.weight.iter().zip(&self.density).map(|(w, f)| w * f[(j, j)].re).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersiveConstants {
    pub m: f64,
    pub lambda0: f64,
    /// Fitted `C` in `|⟨ζ_j, e^{isH} ζ_n⟩| ≤ C s^{-3/2}` for the maximizing pair.
    pub tail_constant: f64,
    /// Ratio of `s^{3/2}|a(s)|` maxima over the upper and lower halves of the last decade.
    pub growth: f64,
    pub argmax: (usize, usize),
}

const GROWTH_LIMIT: f64 = 2.0;
const MASS_DEFECT_LIMIT: f64 = 1e-3;

/// `M = max_{jn} ∫₀^∞ |⟨ζ_j, e^{isH} ζ_n⟩| ds` (integral to `t_max` plus the
/// `2C/√t_max` tail) and `λ₀ = 1 / (12 ‖ν‖₁ M)`.
pub fn dispersive_constants(spec: &SystemSpec, t_max: f64, grid: &EnergyGrid) -> Result<DispersiveConstants> {
    let density = SampleSpectralDensity::new(spec, grid)?;
    let n = spec.n();
    for j in 0..n {
        let defect = (density.mass(j) - 1.0).abs();
        if defect > MASS_DEFECT_LIMIT {
            // Spectral weight outside the resolved continuum does not disperse.
            return Err(Error::NonDecayingPropagator { growth: f64::INFINITY });
        }
    }
    let mut best: Option<DispersiveConstants> = None;
    let mut worst_growth = 0.0f64;
    for j in 0..n {
        for k in 0..n {
            let (c, growth) = tail_fit(&density, j, k, t_max);
            worst_growth = worst_growth.max(growth);
            let tol = 1e-9 * t_max;
            let body = adaptive_simpson(&mut |s| density.amplitude(j, k, s).norm(), 0.0, t_max, tol, 24);
            let m = body + 2.0 * c / t_max.sqrt();
            if best.as_ref().is_none_or(|b| m > b.m) {
                best = Some(DispersiveConstants {
                    m,
                    lambda0: 1.0 / (12.0 * spec.nu_norm1() * m),
                    tail_constant: c,
                    growth,
                    argmax: (j, k),
                });
            }
        }
    }
    if worst_growth > GROWTH_LIMIT {
        return Err(Error::NonDecayingPropagator { growth: worst_growth });
    }
    Ok(best.expect("N ≥ 1"))
}

/// Fit of `C = max s^{3/2} |a(s)|` over the last decade `[t/10, t]`, and the
/// growth ratio between its upper and lower halves.
fn tail_fit(density: &SampleSpectralDensity, j: usize, k: usize, t_max: f64) -> (f64, f64) {
    let samples = 400;
    let (lo, hi) = ((t_max / 10.0).ln(), t_max.ln());
    let mut lower = 0.0f64;
    let mut upper = 0.0f64;
    for i in 0..=samples {
        let s = (lo + (hi - lo) * i as f64 / samples as f64).exp();
        let v = s.powf(1.5) * density.amplitude(j, k, s).norm();
        if 2 * i < samples {
            lower = lower.max(v);
        } else {
            upper = upper.max(v);
        }
    }
    let growth = if lower > 0.0 {
        upper / lower
    } else if upper > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    (lower.max(upper), growth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        assert!((dirichlet_green(0, 0, 0.0, 1.0) - I).norm() < 1e-15);
        assert!((dirichlet_green(0, 0, 2.0, 1.0) - c64::new(-1.0, 0.0)).norm() < 1e-15);
        assert!((dirichlet_green(0, 0, -2.0, 1.0) - c64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((dirichlet_green(0, 1, 0.0, 1.0) - c64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn remark_identity_for_site_zero() {
        let t = 1.4;
        for k in 0..20 {
            let e = -2.7 + 0.27 * k as f64;
            let expected = if e.abs() < 2.0 * t {
                c64::new(-e / (2.0 * t * t), (4.0 * t * t - e * e).sqrt() / (2.0 * t * t))
            } else {
                c64::new((-e + e.signum() * (e * e - 4.0 * t * t).sqrt()) / (2.0 * t * t), 0.0)
            };
            assert!((dirichlet_green(0, 0, e, t) - expected).norm() < 1e-13, "E = {e}");
        }
    }

    #[test]
    fn full_line_rejects_cut() {
        assert!(full_line_green(0, c64::new(0.5, 0.0), 1.0).is_err());
        let v = full_line_green(0, c64::new(3.0, 0.0), 1.0).unwrap();
        assert!((v - c64::new(-1.0 / 5f64.sqrt(), 0.0)).norm() < 1e-14);
    }
}
