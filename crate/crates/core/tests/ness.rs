use core::f64::consts::PI;
use nalgebra::DMatrix;
use nesslab_core::greens::{dispersive_constants, resolvent_h};
use nesslab_core::linalg::{hermitian_eigen, CMatrix, CVector};
use nesslab_core::model::{fermi_dirac, Reservoir};
use nesslab_core::ness::{
    effective_hamiltonian, effective_transmittance, mn_fixed_point, mn_map, reservoir_grid, solve_steady_state,
    solve_w, steady_current, steady_occupations, MnOptions, NessOptions, SteadyTransform,
};
use nesslab_core::scattering::WaveTransform;
use nesslab_core::{c64, EnergyGrid, Error, Lead, LeadVector, LocalizedVector, SystemSpec};

fn c(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

fn two_level(lambda: f64, reservoirs: [Reservoir; 2]) -> SystemSpec {
    let mut spec = SystemSpec::single_dot(0.0, 0.4, 1.0);
    spec.h_s = CMatrix::from_row_slice(2, 2, &[c(0.3, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(-0.4, 0.0)]);
    spec.nu = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    spec.sample_coupling =
        [CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]), CVector::from_vec(vec![c(0.3, 0.0), c(1.0, 0.0)])];
    spec.lead_coupling = [LeadVector::delta(0), LeadVector::new([(0, c(1.0, 0.0)), (1, c(0.5, 0.0))])];
    spec.lambda = lambda;
    spec.reservoirs = reservoirs;
    spec.n_particles = 1.0;
    spec
}

fn biased(beta: f64) -> [Reservoir; 2] {
    [Reservoir { beta, mu: -0.3 }, Reservoir { beta, mu: 0.3 }]
}

fn equal(beta: f64, mu: f64) -> [Reservoir; 2] {
    [Reservoir { beta, mu }; 2]
}

fn coupling_vectors(spec: &SystemSpec) -> (LocalizedVector, LocalizedVector) {
    (
        LocalizedVector::on_sample(spec.sample_coupling[0].iter().copied()),
        LocalizedVector::on_lead(Lead::One, spec.lead_coupling[0].clone()),
    )
}

#[test]
fn noninteracting_amplitudes_are_the_free_term() {
    let spec = two_level(0.0, biased(8.0));
    let grid = reservoir_grid(&spec, 256);
    let sol = solve_w(&spec, &grid, NessOptions::default()).unwrap();
    assert_eq!(sol.iterations, 1);
    assert_eq!(sol.w, sol.free);
}

#[test]
fn amplitudes_are_free_terms_of_the_shifted_hamiltonian() {
    let spec = two_level(0.2, biased(8.0));
    let grid = reservoir_grid(&spec, 256);
    let sol = solve_w(&spec, &grid, NessOptions { tol: 1e-13, ..Default::default() }).unwrap();
    let v = sol.potential(&spec);
    for i in (0..grid.len()).step_by(7) {
        let wt = WaveTransform::with_extra(&spec, grid.energy[i], Some(&v)).unwrap();
        for lead in Lead::BOTH {
            for k in 0..2 {
                let expected = wt.apply_basis(k, lead);
                assert!((sol.w.get(k, lead, i) - expected).norm() < 1e-10 * (1.0 + expected.norm()));
            }
        }
    }
}

#[test]
fn current_agrees_with_the_expectation_route() {
    for lambda in [0.0, 0.05, 0.2] {
        let spec = two_level(lambda, biased(8.0));
        let grid = reservoir_grid(&spec, 384);
        let ness = solve_steady_state(&spec, &grid, NessOptions { tol: 1e-13, ..Default::default() }).unwrap();
        let (s1, l1) = coupling_vectors(&spec);
        let x = SteadyTransform::new(&spec, &ness.solution);
        let route = -2.0 * spec.tau * x.expectation(&s1, &l1).unwrap().im;
        assert!(
            (route - ness.current_1).abs() < 1e-9 * ness.current_1.abs().max(1e-3),
            "λ = {lambda}: {route} vs {}",
            ness.current_1
        );
        assert!(ness.transmittance.iter().all(|&t| t >= -1e-10));
    }
}

/// Composite Simpson on `[a, b]` with `2m` panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / (2 * m) as f64;
    let mut acc = f(a) + f(b);
    for k in 1..2 * m {
        acc += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn single_dot_current_matches_closed_form() {
    let (alpha, tau, t_c) = (0.0, 0.2, 1.0);
    let mut spec = SystemSpec::single_dot(alpha, tau, t_c);
    spec.reservoirs = [Reservoir { beta: f64::INFINITY, mu: -0.1 }, Reservoir { beta: f64::INFINITY, mu: 0.1 }];
    // 𝒯₀ = τ⁴ sin²θ / (π² t_c² |α − E + 2τ² e^{−iθ}/t_c|²)
    let t0 = |e: f64| {
        let theta = (e / (2.0 * t_c)).acos();
        let f = c(alpha - e, 0.0) + c64::from_polar(2.0 * tau * tau / t_c, -theta);
        tau.powi(4) * theta.sin().powi(2) / (PI * PI * t_c * t_c * f.norm_sqr())
    };
    let oracle = 2.0 * PI * simpson(t0, -0.1, 0.1, 2000);
    let grid = reservoir_grid(&spec, 512);
    let ness = solve_steady_state(&spec, &grid, NessOptions::default()).unwrap();
    assert!((ness.current_1 - oracle).abs() < 1e-8 * oracle.abs(), "{} vs {oracle}", ness.current_1);
    assert!(ness.current_1 > 0.0, "flow runs from the higher chemical potential into lead 1");
}

#[test]
fn equilibrium_occupations_are_resolvent_integrals() {
    let (beta, mu) = (5.0, 0.1);
    let spec = two_level(0.0, equal(beta, mu));
    let grid = reservoir_grid(&spec, 512);
    let sol = solve_w(&spec, &grid, NessOptions::default()).unwrap();
    let occ = steady_occupations(&sol, &spec).unwrap();
    for (k, &got) in occ.iter().enumerate() {
        let zeta = LocalizedVector::basis(2, k);
        // E = 2cos θ removes the edge singularities of the density.
        let density = |theta: f64| {
            let e = 2.0 * theta.cos();
            fermi_dirac(e, beta, mu) * resolvent_h(e, &spec, &zeta, &zeta).unwrap().im / PI * 2.0 * theta.sin()
        };
        let oracle = simpson(density, 1e-12, PI - 1e-12, 20000);
        assert!((got - oracle).abs() < 1e-6, "k = {k}: {got} vs {oracle}");
    }
}

#[test]
fn weak_coupling_occupations_follow_the_isolated_levels() {
    let (beta, mu) = (5.0, 0.1);
    let mut spec = two_level(0.0, equal(beta, mu));
    spec.tau = 0.02;
    let (levels, vectors) = hermitian_eigen(&spec.h_s);
    let grid = EnergyGrid::with_breakpoints(1.0, 4096, &[levels[0], levels[1], mu]);
    let sol = solve_w(&spec, &grid, NessOptions::default()).unwrap();
    let occ = steady_occupations(&sol, &spec).unwrap();
    for k in 0..2 {
        let expected: f64 = (0..2).map(|a| vectors[(k, a)].norm_sqr() * fermi_dirac(levels[a], beta, mu)).sum();
        assert!((occ[k] - expected).abs() < 5e-3, "k = {k}: {} vs {expected}", occ[k]);
    }
}

#[test]
fn occupations_are_probabilities() {
    for lambda in [0.0, 0.1, 0.3] {
        let spec = two_level(lambda, biased(3.0));
        let grid = reservoir_grid(&spec, 256);
        let sol = solve_w(&spec, &grid, NessOptions::default()).unwrap();
        for o in steady_occupations(&sol, &spec).unwrap() {
            assert!((-1e-12..=1.0 + 1e-12).contains(&o));
        }
    }
}

#[test]
fn mean_field_fixed_point_at_equal_reservoirs() {
    let spec = two_level(0.05, equal(8.0, 0.1));
    let grid = reservoir_grid(&spec, 512);
    let steady = solve_steady_state(&spec, &grid, NessOptions { tol: 1e-14, ..Default::default() }).unwrap();
    let mapped = mn_map(&spec, &grid, &steady.occupations).unwrap();
    for (a, b) in mapped.iter().zip(&steady.occupations) {
        assert!((a - b).abs() < 1e-6);
    }
    let mn = mn_fixed_point(&spec, &grid, MnOptions::default()).unwrap();
    for (a, b) in mn.n.iter().zip(&steady.occupations) {
        assert!((a - b).abs() < 1e-8);
    }
    assert!(matches!(
        mn_fixed_point(&two_level(0.05, biased(8.0)), &grid, MnOptions::default()),
        Err(Error::NotEquilibrium)
    ));
}

#[test]
fn mean_field_map_without_interaction_returns_s() {
    let spec = two_level(0.0, equal(8.0, 0.1));
    let grid = reservoir_grid(&spec, 512);
    let mn = mn_fixed_point(&spec, &grid, MnOptions::default()).unwrap();
    assert!(mn.iterations <= 2);
    assert!(mn.distance_to_s() < 1e-12);
}

#[test]
fn effective_description() {
    let grid_spec = two_level(0.0, biased(8.0));
    let grid = reservoir_grid(&grid_spec, 384);
    let eff = effective_hamiltonian(&grid_spec, &grid).unwrap();
    assert_eq!(eff.v_eff.norm(), 0.0);

    let spec = two_level(0.1, biased(8.0));
    let routes = effective_transmittance(&spec, &grid).unwrap();
    assert!(routes.max_route_gap() < 1e-8, "gap {}", routes.max_route_gap());
    let eff = effective_hamiltonian(&spec, &grid).unwrap();
    let free = solve_w(&spec.with_lambda(0.0), &grid, NessOptions::default()).unwrap();
    let s0 = steady_occupations(&free, &spec.with_lambda(0.0)).unwrap();
    for (a, b) in eff.s.iter().zip(&s0) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn transmittance_is_smooth_in_lambda() {
    let base = two_level(0.0, biased(8.0));
    let grid = reservoir_grid(&base, 256);
    let options = NessOptions { tol: 1e-14, ..Default::default() };
    let t = |lambda: f64| solve_steady_state(&base.with_lambda(lambda), &grid, options).unwrap().transmittance;
    let t0 = t(0.0);
    let h = 1e-3;
    let (th, t2h) = (t(h), t(2.0 * h));
    // Richardson-corrected forward difference for the first-order coefficient.
    let t1: Vec<f64> = (0..grid.len()).map(|i| 2.0 * (th[i] - t0[i]) / h - (t2h[i] - t0[i]) / (2.0 * h)).collect();
    let lambdas = [0.01, 0.02, 0.04];
    let remainders: Vec<f64> = lambdas
        .iter()
        .map(|&l| {
            let tl = t(l);
            grid.integrate((0..grid.len()).map(|i| (tl[i] - t0[i] - l * t1[i]).abs()))
        })
        .collect();
    let slope = (remainders[2] / remainders[0]).ln() / 4f64.ln();
    assert!((slope - 2.0).abs() < 0.3, "slope {slope}, remainders {remainders:?}");
}

#[test]
fn observed_contraction_respects_the_dispersive_bound() {
    let mut spec = SystemSpec::single_dot(0.5, 0.2, 1.0);
    spec.lambda = 0.05;
    spec.reservoirs = biased(8.0);
    let constants = dispersive_constants(&spec, 200.0, &EnergyGrid::new(1.0, 2048)).unwrap();
    let grid = reservoir_grid(&spec, 512);
    let options = NessOptions { tol: 1e-13, lambda0: Some(constants.lambda0), ..Default::default() };
    let sol = solve_w(&spec, &grid, options).unwrap();
    let bound = spec.lambda / constants.lambda0;
    assert!(sol.contraction_ratios(1e-12).iter().all(|&r| r <= bound));
    assert_eq!(sol.warnings.len(), 1, "λ above λ₀ is reported");
}

#[test]
fn zero_temperature_is_the_low_temperature_limit() {
    let spec_inf = two_level(0.1, biased(f64::INFINITY));
    let spec_cold = two_level(0.1, biased(1e4));
    let grid = reservoir_grid(&spec_inf, 512);
    let a = solve_steady_state(&spec_inf, &grid, NessOptions::default()).unwrap();
    let b = solve_steady_state(&spec_cold, &grid, NessOptions::default()).unwrap();
    for (x, y) in a.solution.c.iter().zip(&b.solution.c) {
        assert!((x - y).abs() < 1e-3);
    }
}

#[test]
fn equal_reservoirs_carry_no_current() {
    let spec = two_level(0.15, equal(4.0, -0.2));
    let grid = reservoir_grid(&spec, 256);
    let ness = solve_steady_state(&spec, &grid, NessOptions::default()).unwrap();
    assert_eq!(ness.current_1, 0.0);
    assert_eq!(steady_current(&spec, &grid, &ness.transmittance), 0.0);
    let (s1, l1) = coupling_vectors(&spec);
    let route = -2.0 * spec.tau * SteadyTransform::new(&spec, &ness.solution).expectation(&s1, &l1).unwrap().im;
    assert!(route.abs() < 1e-12, "{route}");
}
