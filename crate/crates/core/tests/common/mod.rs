//! Helpers shared by the oracle and acceptance targets.

use num_complex::Complex64;

use topamp::lattice::NambuMatrix;
use topamp::linalg::{max_abs, CMatrix};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `G(ω)·e_l = -i ∫_0^∞ e^{iωt} e^{-iHt} e_l dt` for a stable `H`.
///
/// Integrates the rotating-frame state `φ' = i(ω - H)φ` together with its
/// running integral using classical RK4.
pub fn impulse_response_column(h: &NambuMatrix, omega: f64, l: usize, decay: f64) -> Vec<Complex64> {
    let dim = h.dim();
    let a: CMatrix = (CMatrix::identity(dim, dim) * Complex64::from(omega) - &h.entries) * I;
    let norm = max_abs(&a) * dim as f64;
    let dt = 0.02 / norm.max(decay);
    let steps = (40.0 / decay / dt).ceil() as usize;
    let rhs = |phi: &[Complex64]| -> Vec<Complex64> { (0..dim).map(|r| (0..dim).map(|c| a[(r, c)] * phi[c]).sum()).collect() };
    let mut phi = vec![Complex64::new(0.0, 0.0); dim];
    phi[l] = Complex64::new(1.0, 0.0);
    let mut integral = vec![Complex64::new(0.0, 0.0); dim];
    let axpy = |x: &[Complex64], k: &[Complex64], s: f64| -> Vec<Complex64> { x.iter().zip(k).map(|(a, b)| a + b * s).collect() };
    for _ in 0..steps {
        let k1 = rhs(&phi);
        let p2 = axpy(&phi, &k1, dt / 2.0);
        let k2 = rhs(&p2);
        let p3 = axpy(&phi, &k2, dt / 2.0);
        let k3 = rhs(&p3);
        let p4 = axpy(&phi, &k3, dt);
        let k4 = rhs(&p4);
        for r in 0..dim {
            // The integral's derivative is φ itself, evaluated at the RK4 stages.
            integral[r] += (phi[r] + p2[r] * 2.0 + p3[r] * 2.0 + p4[r]) * (dt / 6.0);
            phi[r] += (k1[r] + k2[r] * 2.0 + k3[r] * 2.0 + k4[r]) * (dt / 6.0);
        }
    }
    integral.iter().map(|z| -I * z).collect()
}
