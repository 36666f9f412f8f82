//! The 2N x 2N non-Hermitian dynamical matrix of the linearized lattice and
//! its stability.
//!
//! Ordering is Nambu: indices `0..N` are the particle quadrature `δa_j`,
//! `N..2N` the hole quadrature `δa_j^†`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::meanfield::EffectiveParams;

/// Per-site and per-bond parameter values. Site arrays have length N, bond
/// arrays N - 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub delta: Vec<f64>,
    pub kappa: Vec<f64>,
    pub g_s: Vec<f64>,
    pub hopping: Vec<f64>,
    pub phase: Vec<f64>,
    pub g_c: Vec<f64>,
}

impl DisorderRealization {
    /// The clean lattice written out site by site.
    pub fn uniform(p: &EffectiveParams) -> Self {
        let n = p.n_sites;
        let bonds = n.saturating_sub(1);
        Self {
            delta: vec![p.delta; n],
            kappa: vec![p.kappa; n],
            g_s: vec![p.g_s; n],
            hopping: vec![p.j; bonds],
            phase: vec![p.phi; bonds],
            g_c: vec![p.g_c; bonds],
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        let bonds = n.saturating_sub(1);
        for (what, len, expected) in [
            ("delta", self.delta.len(), n),
            ("kappa", self.kappa.len(), n),
            ("g_s", self.g_s.len(), n),
            ("hopping", self.hopping.len(), bonds),
            ("phase", self.phase.len(), bonds),
            ("g_c", self.g_c.len(), bonds),
        ] {
            if len != expected {
                return Err(Error::DimensionMismatch { what, expected, got: len });
            }
        }
        if let Some(&k) = self.kappa.iter().find(|&&k| !(k > 0.0)) {
            return Err(Error::NonPositiveParameter { name: "kappa_j", value: k });
        }
        Ok(())
    }
}

/// Relative disorder strengths. Standard deviations are `sigma * J` for the
/// rates and `sigma * phi` for the phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DisorderSigmas {
    pub delta: f64,
    pub kappa: f64,
    pub j: f64,
    pub g_s: f64,
    pub g_c: f64,
    pub phi: f64,
}

impl DisorderSigmas {
    pub fn validate(&self) -> Result<()> {
        for (name, s) in [
            ("sigma_delta", self.delta),
            ("sigma_kappa", self.kappa),
            ("sigma_j", self.j),
            ("sigma_g_s", self.g_s),
            ("sigma_g_c", self.g_c),
            ("sigma_phi", self.phi),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter { name, reason: format!("must be >= 0, got {s}") });
            }
        }
        Ok(())
    }
}

/// Draw one Gaussian realization around `base`. Negative decay rates are
/// redrawn.
pub fn sample_disorder(base: &EffectiveParams, sigmas: &DisorderSigmas, seed: u64) -> DisorderRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DisorderRealization::uniform(base);
    let scale = base.j;
    let mut jitter = |values: &mut [f64], std: f64, positive: bool| {
        if std == 0.0 {
            return;
        }
        let normal = Normal::new(0.0, std).expect("finite standard deviation");
        for v in values.iter_mut() {
            let mean = *v;
            loop {
                let x = mean + normal.sample(&mut rng);
                if !positive || x > 0.0 {
                    *v = x;
                    break;
                }
            }
        }
    };
    jitter(&mut out.delta, sigmas.delta * scale, false);
    jitter(&mut out.kappa, sigmas.kappa * scale, true);
    jitter(&mut out.g_s, sigmas.g_s * scale, false);
    jitter(&mut out.hopping, sigmas.j * scale, false);
    jitter(&mut out.phase, sigmas.phi * base.phi.abs(), false);
    jitter(&mut out.g_c, sigmas.g_c * scale, false);
    out
}

/// The dynamical matrix `H_nh` together with the per-site decay rates needed
/// by input-output relations.
#[derive(Debug, Clone, PartialEq)]
pub struct NambuMatrix {
    pub n_sites: usize,
    pub entries: CMatrix,
    pub kappa: Vec<f64>,
    /// Mean hopping, the natural unit of frequency.
    pub j_scale: f64,
    /// Nominal pump phase per bond, used to reference output fields.
    pub phase: f64,
}

impl NambuMatrix {
    fn block(&self, row: usize, col: usize) -> CMatrix {
        let n = self.n_sites;
        self.entries.view((row * n, col * n), (n, n)).into_owned()
    }

    /// `M - i kappa/2`.
    pub fn particle_block(&self) -> CMatrix {
        self.block(0, 0)
    }

    /// `-K`.
    pub fn upper_pairing_block(&self) -> CMatrix {
        self.block(0, 1)
    }

    /// `K`.
    pub fn lower_pairing_block(&self) -> CMatrix {
        self.block(1, 0)
    }

    /// `-M^* - i kappa/2`.
    pub fn hole_block(&self) -> CMatrix {
        self.block(1, 1)
    }

    pub fn dim(&self) -> usize {
        2 * self.n_sites
    }

    pub fn mean_kappa(&self) -> f64 {
        self.kappa.iter().sum::<f64>() / self.kappa.len() as f64
    }
}

/// Exchange of particle and hole blocks.
pub fn swap_nambu(m: &CMatrix, n: usize) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[((r + n) % (2 * n), (c + n) % (2 * n))])
}

pub fn build_hnh(p: &EffectiveParams, disorder: Option<&DisorderRealization>) -> Result<NambuMatrix> {
    p.validate()?;
    let n = p.n_sites;
    let clean;
    let d = match disorder {
        Some(d) => {
            d.check(n)?;
            d
        }
        None => {
            clean = DisorderRealization::uniform(p);
            &clean
        }
    };

    let mut coherent = CMatrix::zeros(n, n);
    let mut pairing = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        coherent[(j, j)] = Complex64::from(-d.delta[j]);
        pairing[(j, j)] = d.g_s[j];
    }
    for b in 0..n.saturating_sub(1) {
        let hop = Complex64::from_polar(d.hopping[b], -d.phase[b]);
        coherent[(b, b + 1)] = hop;
        coherent[(b + 1, b)] = hop.conj();
        pairing[(b, b + 1)] = d.g_c[b];
        pairing[(b + 1, b)] = d.g_c[b];
    }

    let mut h = CMatrix::zeros(2 * n, 2 * n);
    for r in 0..n {
        for c in 0..n {
            let k = Complex64::from(pairing[(r, c)]);
            h[(r, c)] = coherent[(r, c)];
            h[(n + r, n + c)] = -coherent[(r, c)].conj();
            h[(r, n + c)] = -k;
            h[(n + r, c)] = k;
        }
        let loss = Complex64::new(0.0, -0.5 * d.kappa[r]);
        h[(r, r)] += loss;
        h[(n + r, n + r)] += loss;
    }

    Ok(NambuMatrix { n_sites: n, entries: h, kappa: d.kappa.clone(), j_scale: p.j, phase: p.phi })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub max_im_eigenvalue: f64,
    pub stable: bool,
    pub eigenvalues: Vec<Complex64>,
}

/// Relative margin below zero required of every eigenvalue's imaginary part.
pub const STABILITY_EPS: f64 = 1e-9;

pub fn stability(h: &NambuMatrix) -> Result<StabilityReport> {
    let eigenvalues = linalg::eigenvalues(&h.entries)?;
    let max_im = eigenvalues.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max);
    Ok(StabilityReport { max_im_eigenvalue: max_im, stable: max_im < -STABILITY_EPS * h.mean_kappa(), eigenvalues })
}
