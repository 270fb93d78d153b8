//! Stationary scattering: the sine transform of the leads, Lippmann–Schwinger
//! eigenfunctions, the outgoing spectral representation and the T-matrix.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;
use nalgebra::Matrix2;
#[allow(unused_imports)]
use num_traits::Float;

use crate::greens::{dirichlet_green, Resolvent, Side};
use crate::linalg::{CVector, ZERO};
use crate::model::{Lead, LeadVector, LocalizedVector, SampleMatrix, SystemSpec};
use crate::{c64, Error, Result};

fn band_angle(energy: f64, t_c: f64) -> Result<f64> {
    if energy.abs() >= 2.0 * t_c || energy.is_nan() {
        return Err(Error::OutsideBand { energy, half_width: 2.0 * t_c });
    }
    Ok((energy / (2.0 * t_c)).acos())
}

/// `Ψ⁰_E(n) = sin((n+1)θ) / √(π t_c sin θ)` with `E = 2t_c cos θ`.
pub fn lead_eigenfunction(n: usize, energy: f64, t_c: f64) -> Result<f64> {
    let theta = band_angle(energy, t_c)?;
    Ok(((n as f64 + 1.0) * theta).sin() / (PI * t_c * theta.sin()).sqrt())
}

/// `(𝔉f)(E) = ⟨Ψ⁰_E, f⟩ = Σ_n Ψ⁰_E(n) f(n)`.
pub fn fourier_lead(f: &LeadVector, energy: f64, t_c: f64) -> Result<c64> {
    let theta = band_angle(energy, t_c)?;
    let norm = (PI * t_c * theta.sin()).sqrt();
    Ok(f.entries().iter().map(|&(n, v)| v * (((n as f64 + 1.0) * theta).sin() / norm)).sum())
}

/// `+` selects `(H − E − i0)⁻¹` in the Lippmann–Schwinger equation, `−` the other side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn side(self) -> Side {
        match self {
            Sign::Plus => Side::MinusI0,
            Sign::Minus => Side::PlusI0,
        }
    }
}

/// `Ψ^±_{σ,E} = Ψ⁰_{σ,E} − (H − E ∓ i0)⁻¹ h_τ Ψ⁰_{σ,E}` on a finite window of lead sites.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedEigenfunction {
    pub energy: f64,
    pub lead: Lead,
    pub sign: Sign,
    pub window: Range<usize>,
    /// `leads[j][n - window.start]`.
    pub leads: [Vec<c64>; 2],
    pub sample: CVector,
}

impl GeneralizedEigenfunction {
    pub fn lead_value(&self, lead: Lead, site: usize) -> Option<c64> {
        site.checked_sub(self.window.start).and_then(|k| self.leads[lead.index()].get(k).copied())
    }
}

pub fn lippmann_schwinger(
    energy: f64,
    lead: Lead,
    sign: Sign,
    spec: &SystemSpec,
    window: Range<usize>,
) -> Result<GeneralizedEigenfunction> {
    let t_c = spec.t_c;
    let tau = spec.tau;
    let f_sigma = fourier_lead(&spec.lead_coupling[lead.index()], energy, t_c)?;
    let res = Resolvent::new(spec, energy, None, sign.side())?;
    // h_τ Ψ⁰_σ = κ |S_σ⟩ with κ = τ ⟨L_σ|Ψ⁰_σ⟩.
    let kappa = tau * f_sigma.conj();
    let s_inv_s = res.s_inverse_coupling(lead);
    let sample = s_inv_s * (-kappa);
    let leads = Lead::BOTH.map(|j| {
        let lj = &spec.lead_coupling[j.index()];
        let overlap = spec.sample_coupling[j.index()].dotc(s_inv_s);
        window
            .clone()
            .map(|n| {
                let free = if j == lead { lead_eigenfunction(n, energy, t_c).unwrap_or(0.0) } else { 0.0 };
                let g: c64 = lj
                    .entries()
                    .iter()
                    .map(|&(m, v)| {
                        let g = dirichlet_green(n, m, energy, t_c);
                        v * if sign == Sign::Plus { g } else { g.conj() }
                    })
                    .sum();
                c64::new(free, 0.0) + kappa * tau * g * overlap
            })
            .collect()
    });
    Ok(GeneralizedEigenfunction { energy, lead, sign, window, leads, sample })
}

/// Data shared by all wave transforms at one energy: `(𝔉L_σ)(E)` and the
/// `(H − E + i0)⁻¹` resolvent.
#[derive(Debug, Clone)]
pub struct WaveTransform<'a> {
    spec: &'a SystemSpec,
    energy: f64,
    fourier_coupling: [c64; 2],
    resolvent: Resolvent<'a>,
}

impl<'a> WaveTransform<'a> {
    pub fn new(spec: &'a SystemSpec, energy: f64) -> Result<Self> {
        Self::with_extra(spec, energy, None)
    }

    /// Transform for `H` with `h_s ← h_s + extra`.
    pub fn with_extra(spec: &'a SystemSpec, energy: f64, extra: Option<&SampleMatrix>) -> Result<Self> {
        let fourier_coupling = [
            fourier_lead(&spec.lead_coupling[0], energy, spec.t_c)?,
            fourier_lead(&spec.lead_coupling[1], energy, spec.t_c)?,
        ];
        let resolvent = Resolvent::new(spec, energy, extra, Side::PlusI0)?;
        Ok(Self { spec, energy, fourier_coupling, resolvent })
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// `(𝔉L_σ)(E)`.
    pub fn fourier_coupling(&self, lead: Lead) -> c64 {
        self.fourier_coupling[lead.index()]
    }

    /// The `(H − E + i0)⁻¹` resolvent used by the transform.
    pub fn resolvent(&self) -> &Resolvent<'a> {
        &self.resolvent
    }

    /// `⟨Ψ⁺_{σ,E}, ψ⟩ = 𝔉(Π_σ ψ)(E) − τ (𝔉L_σ)(E) ⟨S_σ|(H − E + i0)⁻¹|ψ⟩`.
    pub fn apply(&self, psi: &LocalizedVector, lead: Lead) -> c64 {
        let free = fourier_lead(&psi.leads[lead.index()], self.energy, self.spec.t_c).unwrap_or(ZERO);
        let s = LocalizedVector::on_sample(self.spec.sample_coupling[lead.index()].iter().copied());
        free - self.spec.tau * self.fourier_coupling[lead.index()] * self.resolvent.element(&s, psi)
    }

    /// Transform of the sample basis vector `ζ_n`: `−τ (𝔉L_σ) conj((S⁻¹S_σ)_n)`.
    pub fn apply_basis(&self, n: usize, lead: Lead) -> c64 {
        // The stored resolvent is the +i0 one, whose S⁻¹ is the adjoint of the −i0 S⁻¹.
        let s = &self.spec.sample_coupling[lead.index()];
        let row: c64 = (0..s.len()).map(|a| s[a].conj() * self.resolvent.s_inverse()[(a, n)]).sum();
        -self.spec.tau * self.fourier_coupling[lead.index()] * row
    }
}

/// `(𝔉_L W_− ψ)(E, σ)` for compactly supported `ψ`.
pub fn wave_transform(psi: &LocalizedVector, energy: f64, lead: Lead, spec: &SystemSpec) -> Result<c64> {
    Ok(WaveTransform::new(spec, energy)?.apply(psi, lead))
}

/// On-shell T-matrix `T_jk(E) = −τ² (𝔉L_j) conj(𝔉L_k) ⟨S_j|S(E)⁻¹|S_k⟩`.
pub fn t_matrix(energy: f64, spec: &SystemSpec, extra: Option<&SampleMatrix>) -> Result<Matrix2<c64>> {
    let f = [
        fourier_lead(&spec.lead_coupling[0], energy, spec.t_c)?,
        fourier_lead(&spec.lead_coupling[1], energy, spec.t_c)?,
    ];
    let res = Resolvent::new(spec, energy, extra, Side::MinusI0)?;
    let tau2 = spec.tau * spec.tau;
    Ok(Matrix2::from_fn(|j, k| {
        let sjk = spec.sample_coupling[j].dotc(res.s_inverse_coupling(Lead::BOTH[k]));
        -tau2 * f[j] * f[k].conj() * sjk
    }))
}

/// `𝒯₀(E) = |T₁₂(E)|²`, with `h_s ← h_s + extra` when given.
pub fn transmittance0(energy: f64, spec: &SystemSpec, extra: Option<&SampleMatrix>) -> Result<f64> {
    Ok(t_matrix(energy, spec, extra)?[(0, 1)].norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenfunction_examples() {
        assert!((lead_eigenfunction(0, 0.0, 1.0).unwrap() - 1.0 / PI.sqrt()).abs() < 1e-15);
        assert!(lead_eigenfunction(1, 0.0, 1.0).unwrap().abs() < 1e-15);
        assert!(matches!(lead_eigenfunction(0, 2.0, 1.0), Err(Error::OutsideBand { .. })));
        assert_eq!(fourier_lead(&LeadVector::default(), 0.3, 1.0).unwrap(), ZERO);
    }

    #[test]
    fn single_dot_transmittance() {
        let spec = SystemSpec::single_dot(0.5, 0.2, 1.0);
        let t0 = transmittance0(0.0, &spec, None).unwrap();
        assert!((t0 - 0.0016 / (PI * PI * 0.2564)).abs() < 1e-15);
        let mut decoupled = spec.clone();
        decoupled.tau = 1e-300;
        assert!(transmittance0(0.0, &decoupled, None).unwrap() < 1e-300);
    }
}
