//! Times one orbital evolution on the long-lead single-dot system.
use nesslab_core::dynamics::{evolve_orbitals, midgap_chemical_potential, EvolveOptions, OrbitalDensity};
use nesslab_core::model::Reservoir;
use nesslab_core::{c64, SampleMatrix, SystemSpec};

fn main() {
    let l: usize = std::env::args().nth(1).map_or(600, |a| a.parse().unwrap());
    let dt: f64 = std::env::args().nth(2).map_or(0.1, |a| a.parse().unwrap());
    let mut spec = SystemSpec::single_dot(0.0, 0.5, 1.0).with_lambda(0.05);
    spec.reservoirs = [
        Reservoir { beta: f64::INFINITY, mu: midgap_chemical_potential(0.1, l, 1.0) },
        Reservoir { beta: f64::INFINITY, mu: midgap_chemical_potential(-0.1, l, 1.0) },
    ];
    let rho_s = SampleMatrix::from_element(1, 1, c64::new(0.0, 0.0));
    let start = std::time::Instant::now();
    let initial = OrbitalDensity::initial(&spec, l, &rho_s, 1e-14).unwrap();
    let orbitals = initial.weights.len();
    let run = evolve_orbitals(&spec, l, initial, EvolveOptions { dt, t_end: 200.0, output_every: 0.5 }).unwrap();
    let last = run.trajectory.samples.last().unwrap();
    println!(
        "{orbitals} orbitals, {:.1} s, final current {:.6e}, n = {:.6}",
        start.elapsed().as_secs_f64(),
        last.current,
        last.occupations[0]
    );
}
