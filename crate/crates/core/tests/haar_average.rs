//! The Monte Carlo transfer fidelity against the exact Haar average
//! (d·F_e + 1)/(d + 1), where the entanglement fidelity F_e is read off the
//! receiver channel through polarization of its action on pure states.

use nalgebra::DMatrix;
use num_complex::Complex64;
use spinmesh::manybody::{average_transfer, gauge_correct, ExactTransfer, SectorSet};
use spinmesh::spectral::closed_form_time;
use spinmesh::{NetworkSpec, QuditState, Spin};

type C = Complex64;

fn unit(d: usize, k: usize) -> Vec<C> {
    (0..d).map(|i| C::new(if i == k { 1.0 } else { 0.0 }, 0.0)).collect()
}

/// Gauge-corrected channel output for the (unnormalized) pure input v v†.
fn output(t: &ExactTransfer, v: Vec<C>) -> DMatrix<C> {
    let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    let state = QuditState::normalized(v).unwrap();
    gauge_correct(&t.receiver_state(&state), t.gauge_phase) * C::new(norm, 0.0)
}

/// ⟨p|E(|p⟩⟨q|)|q⟩ from the outputs on |p⟩, |q⟩, |p⟩+|q⟩ and |p⟩+i|q⟩.
fn choi_element(t: &ExactTransfer, p: usize, q: usize) -> C {
    let d = t.d;
    if p == q {
        return output(t, unit(d, p))[(p, q)];
    }
    let with = |w: C| {
        let mut v = unit(d, p);
        v[q] = w;
        output(t, v)[(p, q)]
    };
    let diag = output(t, unit(d, p))[(p, q)] + output(t, unit(d, q))[(p, q)];
    let re = with(C::new(1.0, 0.0)) - diag;
    let im = with(C::new(0.0, 1.0)) - diag;
    (re + C::i() * im) / 2.0
}

fn haar_average(t: &ExactTransfer) -> f64 {
    let d = t.d;
    let fe: C = (0..d).flat_map(|p| (0..d).map(move |q| (p, q))).map(|(p, q)| choi_element(t, p, q)).sum();
    let fe = fe.re / (d * d) as f64;
    (d as f64 * fe + 1.0) / (d as f64 + 1.0)
}

#[test]
fn monte_carlo_matches_haar_average() {
    let s0 = Spin::from_twice(6).unwrap();
    for spec in [NetworkSpec::hypercube(1, 2, 1.0, s0).unwrap(), NetworkSpec::engineered_chain(5, 1.0, s0).unwrap()] {
        let t = closed_form_time(&spec).unwrap();
        let sectors = SectorSet::build(&spec.coupling_matrix().unwrap(), s0, 3).unwrap();
        for d in [3, 4] {
            let transfer = ExactTransfer::for_network(&spec, &sectors, d, t).unwrap();
            let exact = haar_average(&transfer);
            let mc = average_transfer(&transfer, 8000, 11).unwrap().corrected;
            assert!(exact < 1.0 - 1e-4, "{} d={d}: transfer unexpectedly perfect", spec.label());
            assert!(
                (mc.mean - exact).abs() < 5.0 * mc.std_error + 1e-9,
                "{} d={d}: mc {} ± {} vs haar {exact}",
                spec.label(),
                mc.mean,
                mc.std_error
            );
        }
    }
}

#[test]
fn haar_average_is_one_for_identity_transfer() {
    // reading the sender itself at t = 0 is the identity channel
    let s0 = Spin::from_twice(4).unwrap();
    let spec = NetworkSpec::engineered_chain(3, 1.0, s0).unwrap();
    let sectors = SectorSet::build(&spec.coupling_matrix().unwrap(), s0, 4).unwrap();
    let transfer = ExactTransfer::new(&sectors, 5, 0, 0, 0.0, 0.0).unwrap();
    assert!((haar_average(&transfer) - 1.0).abs() < 1e-12);
}
