use nalgebra::DMatrix;
use nesslab_core::linalg::{hermiticity_defect, CMatrix, CVector};
use nesslab_core::model::{assemble_truncated, hartree_potential, Reservoir, Site};
use nesslab_core::{c64, Error, Lead, LeadVector, SampleMatrix, SystemSpec};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

fn spec_from(h: &[f64], s: &[f64], l_amp: &[f64], tau: f64, lambda: f64) -> SystemSpec {
    let mut spec = SystemSpec::single_dot(0.0, tau, 1.0);
    spec.h_s = CMatrix::from_row_slice(2, 2, &[c(h[0], 0.0), c(h[1], h[2]), c(h[1], -h[2]), c(h[3], 0.0)]);
    spec.nu = DMatrix::from_row_slice(2, 2, &[1.0, 0.25, 0.25, 0.5]);
    spec.lambda = lambda;
    spec.sample_coupling =
        [CVector::from_vec(vec![c(s[0], s[1]), c(s[2], 0.0)]), CVector::from_vec(vec![c(s[3], 0.0), c(1.0, s[4])])];
    spec.lead_coupling = [
        LeadVector::new([(0, c(1.0, 0.0)), (2, c(l_amp[0], l_amp[1]))]),
        LeadVector::new([(1, c(l_amp[2], 0.0)), (3, c(0.0, 1.0))]),
    ];
    spec.n_particles = 1.0;
    spec
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncation_is_hermitian_and_matches_its_action(
        h in proptest::collection::vec(-1.0f64..1.0, 4),
        s in proptest::collection::vec(-1.0f64..1.0, 5),
        l_amp in proptest::collection::vec(-1.0f64..1.0, 3),
        tau in 0.05f64..1.0,
        l in 4usize..30,
    ) {
        let spec = spec_from(&h, &s, &l_amp, tau, 0.0);
        let op = assemble_truncated(&spec, l, None).unwrap();
        let dense = op.to_dense();
        prop_assert!(hermiticity_defect(&dense) == 0.0);
        let x: Vec<c64> = (0..op.dim()).map(|i| c((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let mut y = vec![c(0.0, 0.0); op.dim()];
        op.apply(&x, &mut y);
        let expected = &dense * CVector::from_vec(x);
        for (a, b) in y.iter().zip(expected.iter()) {
            prop_assert!((a - b).norm() < 1e-13);
        }
        // Coupling entry τ S_a conj(L_n).
        let i = op.index(Site::Sample(0));
        let j = op.index(Site::Lead(Lead::One, 2));
        prop_assert!((dense[(i, j)] - spec.sample_coupling[0][0] * c(l_amp[0], -l_amp[1]) * tau).norm() < 1e-15);
    }

    #[test]
    fn hartree_potential_is_linear(a in 0.0f64..1.0, b in 0.0f64..1.0, lambda in 0.0f64..2.0) {
        let spec = spec_from(&[0.1, 0.0, 0.0, 0.2], &[1.0, 0.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 1.0], 0.3, lambda);
        let g = |x: f64, y: f64| SampleMatrix::from_diagonal(&CVector::from_vec(vec![c(x, 0.0), c(y, 0.0)]));
        let v = hartree_potential(&g(a, b), &spec).unwrap();
        prop_assert!((v[(0, 0)].re - lambda * (a + 0.25 * b)).abs() < 1e-14);
        prop_assert!((v[(1, 1)].re - lambda * (0.25 * a + 0.5 * b)).abs() < 1e-14);
        prop_assert_eq!(v[(0, 1)], c(0.0, 0.0));
    }
}

#[test]
fn invalid_specifications_are_rejected() {
    let base = SystemSpec::single_dot(0.5, 0.2, 1.0);
    let mut s = base.clone();
    s.n_particles = 1.0;
    assert!(matches!(s.validate(), Err(Error::InvalidSpec(_))));
    let mut s = base.clone();
    s.tau = 0.0;
    assert!(s.validate().is_err());
    let mut s = base.clone();
    s.h_s = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)]);
    assert!(s.validate().is_err());
    let mut s = base.clone();
    s.reservoirs[1] = Reservoir { beta: -1.0, mu: 0.0 };
    assert!(s.validate().is_err());
    assert!(base.validate().is_ok());
    let complex_diag = SampleMatrix::from_element(1, 1, c(0.3, 0.1));
    assert!(matches!(hartree_potential(&complex_diag, &base), Err(Error::NonHermitianDensity { .. })));
    assert!(matches!(assemble_truncated(&base, 0, None), Err(Error::TruncationTooShort { .. })));
}
