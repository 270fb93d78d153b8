use nalgebra::DMatrix;
use nesslab_core::greens::{
    dirichlet_green, dirichlet_green_complex, dispersive_constants, full_line_green, lead_green_element, resolvent_h,
    s_matrix, scan_energies, spectral_condition_check, Resolvent, SampleSpectralDensity, Side,
};
use nesslab_core::linalg::{hermitian_eigen, BandedMatrix, CMatrix, CVector};
use nesslab_core::model::{assemble_truncated, Site};
use nesslab_core::{c64, EnergyGrid, Error, Lead, LeadVector, LocalizedVector, SystemSpec};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

/// Column `m` of `(Δ_D − z)⁻¹` on a chain of `sites` sites, by banded LU.
fn truncated_column(sites: usize, t_c: f64, z: c64, m: usize) -> Vec<c64> {
    let mut a = BandedMatrix::zeros(sites, 1, 1);
    for i in 0..sites {
        a.add(i, i, -z);
        if i + 1 < sites {
            a.add(i, i + 1, c(t_c, 0.0));
            a.add(i + 1, i, c(t_c, 0.0));
        }
    }
    let mut rhs = vec![c(0.0, 0.0); sites];
    rhs[m] = c(1.0, 0.0);
    a.solve(&rhs).expect("nonsingular off the real axis")
}

#[test]
fn damped_truncated_chain_matches_half_line() {
    // The far-end reflection is damped by exp(−2·L·Im k) ≤ e^{-40} at ε = 0.02.
    let (sites, t_c, eps) = (3000, 1.0, 0.02);
    let mut worst = 0.0f64;
    for &e in &[-1.9, -1.2, -0.3, 0.0, 0.7, 1.5, 1.95, 2.6] {
        let z = c(e, eps);
        for m in [0, 3, 11, 29] {
            let col = truncated_column(sites, t_c, z, m);
            for (n, &value) in col.iter().take(30).enumerate() {
                let exact = dirichlet_green_complex(n, m, z, t_c).unwrap();
                worst = worst.max((value - exact).norm());
            }
        }
    }
    assert!(worst < 1e-10, "max deviation {worst:e}");
}

#[test]
fn boundary_value_is_the_limit_from_the_upper_half_plane() {
    for &e in &[-1.7, -0.4, 0.0, 0.9, 1.99] {
        for (n, m) in [(0, 0), (2, 5), (7, 7)] {
            let limit = dirichlet_green(n, m, e, 1.0);
            let near = dirichlet_green_complex(n, m, c(e, 1e-10), 1.0).unwrap();
            assert!((limit - near).norm() < 1e-6, "E = {e}, ({n},{m})");
        }
    }
}

#[test]
fn spectral_density_sign_inside_and_reality_outside_band() {
    let t_c = 0.8;
    for k in 1..80 {
        let e = -2.0 * t_c + 4.0 * t_c * k as f64 / 80.0;
        for n in 0..6 {
            assert!(dirichlet_green(n, n, e, t_c).im >= 0.0);
        }
    }
    for &e in &[-3.0, -1.61, 1.61, 2.5] {
        for (n, m) in [(0, 0), (1, 4), (9, 2)] {
            assert_eq!(dirichlet_green(n, m, e, t_c).im, 0.0);
        }
    }
}

#[test]
fn thresholds_are_continuous() {
    let t_c = 1.0;
    for edge in [2.0, -2.0] {
        for (n, m) in [(0, 0), (1, 3), (5, 5)] {
            let at = dirichlet_green(n, m, edge, t_c);
            for delta in [1e-6, 1e-8, 1e-10] {
                let bound = 10.0 * ((n + m + 2) as f64).powi(2) * f64::sqrt(delta);
                let inside = dirichlet_green(n, m, edge * (1.0 - delta / 2.0), t_c);
                let outside = dirichlet_green(n, m, edge * (1.0 + delta / 2.0), t_c);
                assert!((inside - at).norm() <= bound, "inside {edge} ({n},{m}) δ={delta}");
                assert!((outside - at).norm() <= bound, "outside {edge} ({n},{m}) δ={delta}");
            }
        }
    }
}

#[test]
fn single_dot_resolvent_is_inverse_of_s() {
    let spec = SystemSpec::single_dot(0.5, 0.2, 1.0);
    for &e in &[-1.5, 0.0, 0.5, 1.2, 2.4] {
        let zeta = LocalizedVector::basis(1, 0);
        let r = resolvent_h(e, &spec, &zeta, &zeta).unwrap();
        let f = s_matrix(e, &spec, None).matrix[(0, 0)];
        assert!((r - f.inv()).norm() < 1e-14 * f.inv().norm());
    }
}

fn two_level() -> SystemSpec {
    let mut spec = SystemSpec::single_dot(0.0, 0.35, 1.0);
    spec.h_s = CMatrix::from_row_slice(2, 2, &[c(0.3, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(-0.4, 0.0)]);
    spec.nu = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    spec.sample_coupling =
        [CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]), CVector::from_vec(vec![c(0.3, 0.0), c(1.0, 0.0)])];
    spec.lead_coupling =
        [LeadVector::new([(0, c(1.0, 0.0)), (2, c(0.0, 0.4))]), LeadVector::new([(0, c(1.0, 0.0)), (1, c(0.5, 0.0))])];
    spec.n_particles = 1.0;
    spec
}

/// Dense inverse of `H_L − E` with the exact self-energy of the discarded
/// half-line attached to the last site of each lead.
fn closed_truncation(spec: &SystemSpec, l: usize, e: f64) -> (CMatrix, nesslab_core::model::TruncatedOperator) {
    let op = assemble_truncated(spec, l, None).unwrap();
    let mut m = op.to_dense();
    let sigma = spec.t_c * spec.t_c * dirichlet_green(0, 0, e, spec.t_c);
    for lead in Lead::BOTH {
        let i = op.index(Site::Lead(lead, l - 1));
        m[(i, i)] -= sigma;
    }
    for i in 0..op.dim() {
        m[(i, i)] -= c(e, 0.0);
    }
    (m.try_inverse().unwrap(), op)
}

fn embed(v: &LocalizedVector, op: &nesslab_core::model::TruncatedOperator) -> CVector {
    let mut out = CVector::zeros(op.dim());
    for lead in Lead::BOTH {
        for &(n, a) in v.leads[lead.index()].entries() {
            out[op.index(Site::Lead(lead, n))] = a;
        }
    }
    for (k, &a) in v.sample.iter().enumerate() {
        out[op.index(Site::Sample(k))] = a;
    }
    out
}

#[test]
fn resolvent_matches_closed_truncation() {
    let spec = two_level();
    let vectors = [
        LocalizedVector::basis(2, 0),
        LocalizedVector::basis(2, 1),
        LocalizedVector::on_lead(Lead::One, LeadVector::new([(0, c(0.5, 0.0)), (3, c(0.0, -1.0))])),
        LocalizedVector::on_lead(Lead::Two, LeadVector::new([(1, c(1.0, 0.2)), (4, c(0.3, 0.0))])),
        LocalizedVector {
            leads: [LeadVector::delta(2), LeadVector::new([(0, c(0.0, 1.0))])],
            sample: vec![c(0.1, 0.7), c(-0.4, 0.0)],
        },
    ];
    for &e in &[-2.6, -1.3, -0.2, 0.45, 1.8, 2.3] {
        let (inv, op) = closed_truncation(&spec, 9, e);
        let res = Resolvent::new(&spec, e, None, Side::MinusI0).unwrap();
        for f in &vectors {
            for g in &vectors {
                let oracle = embed(f, &op).dotc(&(&inv * embed(g, &op)));
                let got = res.element(f, g);
                assert!((got - oracle).norm() < 1e-10 * (1.0 + oracle.norm()), "E = {e}: {got} vs {oracle}");
            }
        }
    }
}

#[test]
fn the_two_boundary_values_are_adjoint() {
    let spec = two_level();
    let f = LocalizedVector {
        leads: [LeadVector::delta(1), LeadVector::default()],
        sample: vec![c(0.2, 0.3), c(1.0, 0.0)],
    };
    let g = LocalizedVector::on_lead(Lead::Two, LeadVector::new([(0, c(0.0, 1.0)), (2, c(1.0, 0.0))]));
    for &e in &[-1.0, 0.1, 1.6] {
        let minus = Resolvent::new(&spec, e, None, Side::MinusI0).unwrap();
        let plus = Resolvent::new(&spec, e, None, Side::PlusI0).unwrap();
        assert!((minus.element(&f, &g) - plus.element(&g, &f).conj()).norm() < 1e-13);
    }
}

#[test]
fn lead_element_is_bilinear_sum() {
    let f = LeadVector::new([(0, c(1.0, 0.5)), (3, c(-0.2, 0.0))]);
    let g = LeadVector::new([(1, c(0.0, 1.0)), (3, c(2.0, 0.0))]);
    let e = 0.37;
    let mut direct = c(0.0, 0.0);
    for &(n, a) in f.entries() {
        for &(m, b) in g.entries() {
            direct += a.conj() * dirichlet_green(n, m, e, 1.0) * b;
        }
    }
    assert!((lead_green_element(&f, &g, e, 1.0) - direct).norm() < 1e-15);
}

#[test]
fn spectral_check_separates_bound_states_from_resonances() {
    // In-band level: |f(E)| stays above τ²·Im g₀₀ > 0 everywhere.
    let inside = SystemSpec::single_dot(0.5, 0.2, 1.0);
    let energies = scan_energies(1.0, 1.0, 4001);
    let report = spectral_condition_check(&inside, &energies);
    assert!(report.certifies(1e-2), "smin {}", report.min_singular_value);
    // A level at α = 3 with weak coupling produces a bound state just outside the band.
    let outside = SystemSpec::single_dot(3.0, 0.05, 1.0);
    let report = spectral_condition_check(&outside, &energies);
    assert!(!report.certifies(1e-2), "smin {}", report.min_singular_value);
    assert!(report.argmin_energy > 2.0);
}

#[test]
fn dispersive_threshold_scales_inversely_with_nu() {
    let grid = EnergyGrid::new(1.0, 2048);
    let spec = SystemSpec::single_dot(0.5, 0.2, 1.0);
    let mut doubled = spec.clone();
    doubled.nu *= 2.0;
    let a = dispersive_constants(&spec, 200.0, &grid).unwrap();
    let b = dispersive_constants(&doubled, 200.0, &grid).unwrap();
    assert!((a.lambda0 / b.lambda0 - 2.0).abs() < 1e-12);
    assert!((a.m - b.m).abs() < 1e-12);
}

#[test]
fn vanishing_coupling_does_not_disperse() {
    let grid = EnergyGrid::new(1.0, 1024);
    let spec = SystemSpec::single_dot(0.5, 1e-4, 1.0);
    assert!(matches!(dispersive_constants(&spec, 100.0, &grid), Err(Error::NonDecayingPropagator { .. })));
}

#[test]
fn sample_amplitude_matches_truncated_eigenbasis() {
    // Reflections from the ends of a 300-site lead return after t ≈ 300.
    let spec = SystemSpec::single_dot(0.0, 0.5, 1.0);
    let l = 300;
    let op = assemble_truncated(&spec, l, None).unwrap();
    let (values, vectors) = hermitian_eigen(&op.to_dense());
    let s = op.index(Site::Sample(0));
    let density = SampleSpectralDensity::new(&spec, &EnergyGrid::new(1.0, 4096)).unwrap();
    for &t in &[0.0, 1.0, 5.0, 20.0, 60.0, 100.0] {
        let oracle: c64 =
            values.iter().enumerate().map(|(k, &e)| c64::from_polar(vectors[(s, k)].norm_sqr(), t * e)).sum();
        let got = density.amplitude(0, 0, t);
        assert!((got - oracle).norm() < 1e-8, "t = {t}: {got} vs {oracle}");
    }
}

#[test]
fn fitted_decay_constant_bounds_the_tail() {
    let spec = SystemSpec::single_dot(0.0, 0.5, 1.0);
    let grid = EnergyGrid::new(1.0, 4096);
    let constants = dispersive_constants(&spec, 100.0, &grid).unwrap();
    let density = SampleSpectralDensity::new(&spec, &grid).unwrap();
    for k in 0..=200 {
        let t = 10.0 * 10f64.powf(k as f64 / 200.0);
        let scaled = t.powf(1.5) * density.amplitude(0, 0, t).norm();
        assert!(scaled <= 1.2 * constants.tail_constant, "t = {t}: {scaled} vs C = {}", constants.tail_constant);
    }
}

fn off_cut() -> impl Strategy<Value = c64> {
    (-3.0f64..3.0, prop_oneof![-2.0f64..-1e-3, 1e-3f64..2.0]).prop_map(|(x, y)| c(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn defect_equation_holds(e in -2.6f64..2.6, t_c in 0.5f64..1.5, m in 0usize..45, n in 0usize..70) {
        let g = |k: usize| dirichlet_green(k, m, e * t_c, t_c);
        let left = if n == 0 { c(0.0, 0.0) } else { g(n - 1) };
        let lhs = t_c * (left + g(n + 1)) - e * t_c * g(n);
        let delta = if n == m { 1.0 } else { 0.0 };
        let scale = 1.0 + t_c * (left.norm() + g(n + 1).norm() + e.abs() * g(n).norm());
        prop_assert!((lhs - delta).norm() < 1e-11 * scale, "residual {}", (lhs - delta).norm());
    }

    #[test]
    fn image_formula_holds(z in off_cut(), n in 0usize..40, m in 0usize..40) {
        let lhs = dirichlet_green_complex(n, m, z, 1.0).unwrap();
        let d = n as i64 - m as i64;
        let rhs = full_line_green(d, z, 1.0).unwrap() - full_line_green((n + m + 2) as i64, z, 1.0).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
    }

    #[test]
    fn green_function_is_symmetric(e in -2.5f64..2.5, n in 0usize..60, m in 0usize..60) {
        prop_assert_eq!(dirichlet_green(n, m, e, 1.0), dirichlet_green(m, n, e, 1.0));
        let z = c(e, 0.3);
        prop_assert!((full_line_green(n as i64 - m as i64, z, 1.0).unwrap() - full_line_green(m as i64 - n as i64, z, 1.0).unwrap()).norm() == 0.0);
    }
}
