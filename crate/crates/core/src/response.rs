//! Amplifier response from the Green's function `G(ω) = (ω - H_nh)^{-1}`:
//! gains, added noise, bandwidth, output fields and intracavity occupation.
//!
//! Site indices are 0-based. Gains for per-site decay use the prefactor
//! `κ_m κ_j`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::NambuMatrix;
use crate::linalg::{self, CMatrix};
use crate::topology::shifted;
use crate::units::to_db;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone)]
pub struct GreenFunction {
    pub omega: f64,
    pub matrix: CMatrix,
    pub n_sites: usize,
}

impl GreenFunction {
    /// `G_jl`.
    pub fn normal(&self, j: usize, l: usize) -> Complex64 {
        self.matrix[(j, l)]
    }

    /// `G_{j,N+l}`.
    pub fn anomalous(&self, j: usize, l: usize) -> Complex64 {
        self.matrix[(j, self.n_sites + l)]
    }
}

pub fn green(h: &NambuMatrix, omega: f64) -> Result<GreenFunction> {
    let matrix = linalg::inverse(&shifted(h, omega)).ok_or(Error::SingularMatrix { omega })?;
    if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularMatrix { omega });
    }
    Ok(GreenFunction { omega, matrix, n_sites: h.n_sites })
}

/// Power gains between an input site `m` and an output site `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub forward: f64,
    pub reverse: f64,
    pub idler: f64,
    pub idler_reverse: f64,
}

impl Gains {
    pub fn forward_db(&self) -> f64 {
        to_db(self.forward)
    }
    pub fn reverse_db(&self) -> f64 {
        to_db(self.reverse)
    }
    pub fn idler_db(&self) -> f64 {
        to_db(self.idler)
    }
    pub fn idler_reverse_db(&self) -> f64 {
        to_db(self.idler_reverse)
    }
}

/// Green's functions at `±ω`, the pair every measurable at one signal
/// frequency needs.
#[derive(Debug, Clone)]
pub struct Response {
    pub kappa: Vec<f64>,
    pub at: GreenFunction,
    pub mirrored: GreenFunction,
}

impl Response {
    pub fn new(h: &NambuMatrix, omega: f64) -> Result<Self> {
        Ok(Self { kappa: h.kappa.clone(), at: green(h, omega)?, mirrored: green(h, -omega)? })
    }

    pub fn n_sites(&self) -> usize {
        self.kappa.len()
    }

    pub fn gains(&self, m: usize, j: usize) -> Gains {
        let pref = self.kappa[m] * self.kappa[j];
        Gains {
            forward: pref * self.at.normal(j, m).norm_sqr(),
            reverse: pref * self.at.normal(m, j).norm_sqr(),
            idler: pref * self.mirrored.anomalous(j, m).norm_sqr(),
            idler_reverse: pref * self.mirrored.anomalous(m, j).norm_sqr(),
        }
    }

    /// Noise photons per unit bandwidth leaving site `j`.
    pub fn noise_density(&self, j: usize) -> f64 {
        noise_density_of(&self.at, &self.kappa, j)
    }

    /// Added noise referred to the input at `m`; infinite when there is no gain.
    pub fn added_noise(&self, m: usize, j: usize) -> f64 {
        let g = self.gains(m, j).forward;
        if g > 0.0 {
            self.noise_density(j) / g
        } else {
            f64::INFINITY
        }
    }
}

fn noise_density_of(g: &GreenFunction, kappa: &[f64], j: usize) -> f64 {
    (0..g.n_sites).map(|l| kappa[j] * kappa[l] * g.anomalous(j, l).norm_sqr()).sum()
}

pub fn gains(h: &NambuMatrix, omega_s: f64, m: usize, j: usize) -> Result<Gains> {
    check_site(h, m)?;
    check_site(h, j)?;
    Ok(Response::new(h, omega_s)?.gains(m, j))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    pub density: f64,
    /// Referred to the forward gain from the first site.
    pub added: f64,
}

pub fn noise(h: &NambuMatrix, omega: f64, j: usize) -> Result<NoisePoint> {
    check_site(h, j)?;
    let r = Response::new(h, omega)?;
    Ok(NoisePoint { density: r.noise_density(j), added: r.added_noise(0, j) })
}

/// Noise emitted at the input port relative to the output port, `n_1 / n_N`.
/// Both densities are referred to the same forward gain, so this is also the
/// ratio of input-referred added noise seen backwards and forwards.
pub fn noise_asymmetry(h: &NambuMatrix, omega: f64) -> Result<f64> {
    let g = green(h, omega)?;
    let last = h.n_sites - 1;
    Ok(noise_density_of(&g, &h.kappa, 0) / noise_density_of(&g, &h.kappa, last))
}

fn check_site(h: &NambuMatrix, j: usize) -> Result<()> {
    if j >= h.n_sites {
        return Err(Error::InvalidParameter { name: "site", reason: format!("site {j} outside 0..{}", h.n_sites) });
    }
    Ok(())
}

/// End-to-end figures of merit at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponsePoint {
    pub omega: f64,
    pub gain: f64,
    pub reverse_gain: f64,
    pub added_noise: f64,
    pub noise_asymmetry: f64,
}

pub fn response_sweep(h: &NambuMatrix, omega_grid: &[f64]) -> Result<Vec<ResponsePoint>> {
    let last = h.n_sites - 1;
    omega_grid
        .par_iter()
        .map(|&omega| {
            let g = green(h, omega)?;
            let pref = h.kappa[0] * h.kappa[last];
            let gain = pref * g.normal(last, 0).norm_sqr();
            let n_last = noise_density_of(&g, &h.kappa, last);
            Ok(ResponsePoint {
                omega,
                gain,
                reverse_gain: pref * g.normal(0, last).norm_sqr(),
                added_noise: if gain > 0.0 { n_last / gain } else { f64::INFINITY },
                noise_asymmetry: noise_density_of(&g, &h.kappa, 0) / n_last,
            })
        })
        .collect()
}

/// Total frequency measure where `10 log10(values) >= threshold_db`, with
/// linear interpolation of the dB curve across crossings.
pub fn measure_above(omega: &[f64], values: &[f64], threshold_db: f64) -> f64 {
    let db: Vec<f64> = values.iter().map(|&g| to_db(g) - threshold_db).collect();
    let mut total = 0.0;
    for k in 0..omega.len().saturating_sub(1) {
        let (a, b) = (db[k], db[k + 1]);
        let w = omega[k + 1] - omega[k];
        total += match (a >= 0.0, b >= 0.0) {
            (true, true) => w,
            (false, false) => 0.0,
            (true, false) => w * a / (a - b),
            (false, true) => w * b / (b - a),
        };
    }
    total
}

/// Bandwidth over which the end-to-end gain exceeds 20 dB.
pub fn bandwidth_20db(h: &NambuMatrix, omega_grid: &[f64]) -> Result<f64> {
    let pts = response_sweep(h, omega_grid)?;
    let gains: Vec<f64> = pts.iter().map(|p| p.gain).collect();
    Ok(measure_above(omega_grid, &gains, 20.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    /// Complex amplitude; `|alpha_s|^2` is a photon flux (1/s).
    pub alpha_s: Complex64,
    /// Signal frequency relative to the pump (rad/s).
    pub omega_s: f64,
    /// 0-based input site.
    pub input_site: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentOutput {
    pub signal: Complex64,
    pub idler: Complex64,
    pub pump: Complex64,
}

/// Coherent output field at site `j` for a signal injected at the input
/// site, given the intracavity pump displacement.
pub fn coherent_output(h: &NambuMatrix, s: &SignalSpec, alpha: Complex64, j: usize) -> Result<CoherentOutput> {
    check_site(h, j)?;
    check_site(h, s.input_site)?;
    let r = Response::new(h, s.omega_s)?;
    Ok(coherent_from(&r, h.phase, s, alpha, j))
}

fn coherent_from(r: &Response, phi: f64, s: &SignalSpec, alpha: Complex64, j: usize) -> CoherentOutput {
    let m = s.input_site;
    let (site_j, site_m) = ((j + 1) as f64, (m + 1) as f64);
    let coupling = (r.kappa[j] * r.kappa[m]).sqrt();
    let direct = if j == m { Complex64::from(1.0) } else { Complex64::from(0.0) };
    CoherentOutput {
        signal: (direct - I * coupling * r.at.normal(j, m)) * Complex64::from_polar(1.0, -phi * (site_j - site_m)) * s.alpha_s,
        idler: -I * coupling * r.mirrored.anomalous(j, m) * Complex64::from_polar(1.0, -phi * (site_j + site_m)) * s.alpha_s.conj(),
        pump: r.kappa[j].sqrt() * alpha * Complex64::from_polar(1.0, -phi * site_j),
    }
}

/// Quadrature settings for the noise contribution to the occupation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseIntegration {
    /// Half-width of the integration window in units of J.
    pub omega_max: f64,
    /// Initial trapezoid step in units of J.
    pub step: f64,
    pub rtol: f64,
    /// Allowed `|n(±Ω)| Ω` relative to the integral.
    pub tail_tol: f64,
    pub max_halvings: u32,
}

impl Default for NoiseIntegration {
    fn default() -> Self {
        Self { omega_max: 20.0, step: 1.0 / 50.0, rtol: 1e-3, tail_tol: 1e-3, max_halvings: 8 }
    }
}

fn densities(h: &NambuMatrix, omegas: &[f64]) -> Result<Vec<Vec<f64>>> {
    omegas
        .par_iter()
        .map(|&w| {
            let g = green(h, w)?;
            Ok((0..h.n_sites).map(|j| noise_density_of(&g, &h.kappa, j)).collect())
        })
        .collect()
}

/// `∫ n_j(ω) dω` for every site, by trapezoids refined until stable.
pub fn noise_integrals(h: &NambuMatrix, opts: &NoiseIntegration) -> Result<Vec<f64>> {
    let n = h.n_sites;
    let big = opts.omega_max * h.j_scale;
    let mut step = opts.step * h.j_scale;
    let intervals = (2.0 * big / step).round() as usize;
    step = 2.0 * big / intervals as f64;

    let grid: Vec<f64> = (0..=intervals).map(|k| -big + k as f64 * step).collect();
    let vals = densities(h, &grid)?;
    let mut estimate: Vec<f64> = (0..n)
        .map(|j| {
            let inner: f64 = vals[1..intervals].iter().map(|v| v[j]).sum();
            step * (inner + 0.5 * (vals[0][j] + vals[intervals][j]))
        })
        .collect();
    let edges = (vals[0].clone(), vals[intervals].clone());

    let mut converged = false;
    let mut count = intervals;
    for _ in 0..opts.max_halvings {
        let mids: Vec<f64> = (0..count).map(|k| -big + (k as f64 + 0.5) * step).collect();
        let mid_vals = densities(h, &mids)?;
        let refined: Vec<f64> = (0..n).map(|j| 0.5 * estimate[j] + 0.5 * step * mid_vals.iter().map(|v| v[j]).sum::<f64>()).collect();
        let change = (0..n).map(|j| if refined[j] > 0.0 { (refined[j] - estimate[j]).abs() / refined[j] } else { 0.0 }).fold(0.0, f64::max);
        estimate = refined;
        step *= 0.5;
        count *= 2;
        if change < opts.rtol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::IntegrationNotConverged(format!("trapezoid estimate still changing after {} halvings", opts.max_halvings)));
    }
    for j in 0..n {
        let tail = edges.0[j].max(edges.1[j]) * big;
        if estimate[j] > 0.0 && tail > opts.tail_tol * estimate[j] {
            return Err(Error::IntegrationNotConverged(format!(
                "site {j}: tail {tail:e} exceeds {} of the integral {:e}",
                opts.tail_tol, estimate[j]
            )));
        }
    }
    Ok(estimate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occupation {
    pub site: usize,
    pub coherent: f64,
    pub noise: f64,
    pub total: f64,
}

impl Occupation {
    /// Occupation relative to the pump photon number; values near 1 signal
    /// the onset of pump depletion.
    pub fn saturation_ratio(&self, pump_alpha_sq: f64) -> f64 {
        self.total / pump_alpha_sq
    }
}

/// Peak intracavity photon number at every site for a coherent signal plus
/// amplified vacuum noise.
pub fn occupation_profile(h: &NambuMatrix, s: &SignalSpec, opts: &NoiseIntegration) -> Result<Vec<Occupation>> {
    check_site(h, s.input_site)?;
    let m = s.input_site;
    let r = Response::new(h, s.omega_s)?;
    let integrals = noise_integrals(h, opts)?;
    let flux = s.alpha_s.norm_sqr();
    Ok((0..h.n_sites)
        .map(|j| {
            let amp = r.at.normal(j, m).norm() + r.mirrored.anomalous(j, m).norm();
            let coherent = h.kappa[m] * flux * amp * amp;
            let noise = integrals[j] / (std::f64::consts::TAU * h.kappa[j]);
            Occupation { site: j, coherent, noise, total: coherent + noise }
        })
        .collect())
}

pub fn max_occupation(h: &NambuMatrix, s: &SignalSpec, j: usize, opts: &NoiseIntegration) -> Result<Occupation> {
    check_site(h, j)?;
    Ok(occupation_profile(h, s, opts)?[j])
}
