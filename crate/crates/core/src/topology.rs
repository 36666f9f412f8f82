//! Topological classification from the singular values of `ω - H_nh`.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{build_hnh, stability, NambuMatrix};
use crate::linalg::{self, CMatrix};
use crate::meanfield::EffectiveParams;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub omega: f64,
    /// Ascending.
    pub singular_values: Vec<f64>,
    /// Column `n` is `u^(n)`.
    pub left_vectors: CMatrix,
    /// Column `n` is `v^(n)`.
    pub right_vectors: CMatrix,
}

impl SpectralDecomposition {
    /// `(ω - H)^{-1} = V S^{-1} U^†`.
    pub fn green(&self) -> CMatrix {
        let inv_s = DVector::from_iterator(self.singular_values.len(), self.singular_values.iter().map(|&e| Complex64::from(1.0 / e)));
        &self.right_vectors * CMatrix::from_diagonal(&inv_s) * self.left_vectors.adjoint()
    }
}

pub fn shifted(h: &NambuMatrix, omega: f64) -> CMatrix {
    let mut m = -h.entries.clone();
    for k in 0..m.nrows() {
        m[(k, k)] += Complex64::from(omega);
    }
    m
}

pub fn svd_spectrum(h: &NambuMatrix, omega: f64) -> Result<SpectralDecomposition> {
    let svd = linalg::sorted_svd(&shifted(h, omega))?;
    Ok(SpectralDecomposition { omega, singular_values: svd.values, left_vectors: svd.u, right_vectors: svd.v })
}

/// The Hermitian doubling `[[0, ω-H], [(ω-H)^†, 0]]`, whose eigenvalues are
/// plus and minus the singular values of `ω - H`.
pub fn extended_hamiltonian(h: &NambuMatrix, omega: f64) -> CMatrix {
    let m = shifted(h, omega);
    let d = m.nrows();
    let mut out = CMatrix::zeros(2 * d, 2 * d);
    out.view_mut((0, d), (d, d)).copy_from(&m);
    out.view_mut((d, 0), (d, d)).copy_from(&m.adjoint());
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Topological,
    Trivial,
    Unstable,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Topological => "topological",
            Phase::Trivial => "trivial",
            Phase::Unstable => "unstable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub classification: Phase,
    /// Smallest singular value in units of J.
    pub e0: f64,
    /// Topological gap in units of J.
    pub gap: f64,
    /// Width of the topological window (rad/s).
    pub w_top: f64,
    pub window: Option<(f64, f64)>,
    pub zeta: Option<Complex64>,
    pub max_im_eigenvalue: f64,
}

fn zero_mode_threshold(h: &NambuMatrix) -> f64 {
    h.j_scale / h.n_sites as f64
}

pub fn classify_point(p: &EffectiveParams, omega: f64) -> Result<TopologyReport> {
    let h = build_hnh(p, None)?;
    classify_matrix(&h, omega)
}

pub fn classify_matrix(h: &NambuMatrix, omega: f64) -> Result<TopologyReport> {
    let st = stability(h)?;
    let spec = svd_spectrum(h, omega)?;
    let j = h.j_scale;
    let e0 = spec.singular_values[0] / j;
    let gap = spec.singular_values.get(1).copied().unwrap_or(f64::NAN) / j;
    let classification = if !st.stable {
        Phase::Unstable
    } else if spec.singular_values[0] <= zero_mode_threshold(h) {
        Phase::Topological
    } else {
        Phase::Trivial
    };
    let zeta = match classification {
        Phase::Topological if h.n_sites >= 3 => Some(localization_length(h, omega, None)?.zeta),
        _ => None,
    };
    Ok(TopologyReport { classification, e0, gap, w_top: 0.0, window: None, zeta, max_im_eigenvalue: st.max_im_eigenvalue })
}

/// `n` evenly spaced points covering `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Default scan for the topological window: `[-3J, 3J]` in steps of `J/100`.
pub fn default_omega_grid(j: f64) -> Vec<f64> {
    linspace(-3.0 * j, 3.0 * j, 601)
}

/// Lowest two singular values (units of J) on a frequency grid.
pub fn low_singular_values(h: &NambuMatrix, omega_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    omega_grid
        .par_iter()
        .map(|&w| {
            let s = linalg::sorted_svd(&shifted(h, w))?.values;
            Ok((s[0] / h.j_scale, s.get(1).copied().unwrap_or(f64::NAN) / h.j_scale))
        })
        .collect()
}

pub fn topological_window(p: &EffectiveParams, omega_grid: &[f64]) -> Result<TopologyReport> {
    window_for_matrix(&build_hnh(p, None)?, omega_grid)
}

pub fn window_for_matrix(h: &NambuMatrix, omega_grid: &[f64]) -> Result<TopologyReport> {
    if omega_grid.len() < 3 {
        return Err(Error::InvalidParameter { name: "omega_grid", reason: "needs at least 3 points".into() });
    }
    if omega_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter { name: "omega_grid", reason: "must be strictly ascending".into() });
    }
    let st = stability(h)?;
    let centre = omega_grid[omega_grid.len() / 2];
    if !st.stable {
        let spec = svd_spectrum(h, centre)?;
        return Ok(TopologyReport {
            classification: Phase::Unstable,
            e0: spec.singular_values[0] / h.j_scale,
            gap: spec.singular_values[1] / h.j_scale,
            w_top: 0.0,
            window: None,
            zeta: None,
            max_im_eigenvalue: st.max_im_eigenvalue,
        });
    }

    let values = low_singular_values(h, omega_grid)?;
    let threshold = 1.0 / h.n_sites as f64;
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for k in 0..=values.len() {
        let inside = k < values.len() && values[k].0 <= threshold;
        match (inside, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                let better = match best {
                    None => true,
                    Some((bs, be)) => omega_grid[k - 1] - omega_grid[s] > omega_grid[be] - omega_grid[bs],
                };
                if better {
                    best = Some((s, k - 1));
                }
                start = None;
            }
            _ => {}
        }
    }

    match best {
        None => {
            let (e0, gap) = values[values.len() / 2];
            Ok(TopologyReport {
                classification: Phase::Trivial,
                e0,
                gap,
                w_top: 0.0,
                window: None,
                zeta: None,
                max_im_eigenvalue: st.max_im_eigenvalue,
            })
        }
        Some((s, e)) => {
            let mid = (s + e) / 2;
            let gap = values[s..=e].iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
            let zeta = if h.n_sites >= 3 { Some(localization_length(h, omega_grid[mid], None)?.zeta) } else { None };
            Ok(TopologyReport {
                classification: Phase::Topological,
                e0: values[mid].0,
                gap,
                w_top: omega_grid[e] - omega_grid[s],
                window: Some((omega_grid[s], omega_grid[e])),
                zeta,
                max_im_eigenvalue: st.max_im_eigenvalue,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationFit {
    /// Inverse localization length per site.
    pub zeta: Complex64,
    pub intercept: Complex64,
    pub r_squared: f64,
    /// Fit residuals of `log(G_j1/G_11)` per fitted site.
    pub residuals: Vec<Complex64>,
    /// Inclusive 1-based site range that was fitted.
    pub sites: (usize, usize),
}

/// Continue a sequence of phases onto the branch nearest its predecessor.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let tau = std::f64::consts::TAU;
    let mut out: Vec<f64> = Vec::with_capacity(phases.len());
    for &p in phases {
        let next = match out.last() {
            None => p,
            Some(&prev) => p + tau * ((prev - p) / tau).round(),
        };
        out.push(next);
    }
    out
}

/// Fit `log(G_j1 / G_11) ≈ c + ζ (j - 1)` over an inclusive 1-based site
/// range. Default range is the whole chain.
pub fn localization_length(h: &NambuMatrix, omega: f64, sites: Option<(usize, usize)>) -> Result<LocalizationFit> {
    let n = h.n_sites;
    let (lo, hi) = sites.unwrap_or((1, n));
    if lo < 1 || hi > n || hi < lo || hi - lo + 1 < 3 {
        return Err(Error::DegenerateFit(if hi >= lo { hi - lo + 1 } else { 0 }));
    }
    let g = crate::response::green(h, omega)?;
    let g11 = g.matrix[(0, 0)];
    let ratios: Vec<Complex64> = (0..n).map(|j| g.matrix[(j, 0)] / g11).collect();
    let phases = unwrap_phases(&ratios.iter().map(|z| z.arg()).collect::<Vec<_>>());

    let xs: Vec<f64> = (lo..=hi).map(|j| (j - 1) as f64).collect();
    let ys: Vec<Complex64> = (lo..=hi).map(|j| Complex64::new(ratios[j - 1].norm().ln(), phases[j - 1])).collect();
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<Complex64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: Complex64 = xs.iter().zip(&ys).map(|(x, y)| (y - ybar) * (x - xbar)).sum();
    let zeta = sxy / sxx;
    let intercept = ybar - zeta * xbar;
    let residuals: Vec<Complex64> = xs.iter().zip(&ys).map(|(x, y)| y - (intercept + zeta * x)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r.norm_sqr()).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - ybar).norm_sqr()).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(LocalizationFit { zeta, intercept, r_squared, residuals, sites: (lo, hi) })
}

/// Slope of `-ln E_0` against chain length; approximates `Re ζ` in the
/// topological phase.
pub fn zeta_from_zero_mode_scaling(p: &EffectiveParams, omega: f64, sizes: &[usize]) -> Result<f64> {
    if sizes.len() < 2 {
        return Err(Error::DegenerateFit(sizes.len()));
    }
    let pts = sizes
        .iter()
        .map(|&n| {
            let h = build_hnh(&p.with_sites(n), None)?;
            Ok((n as f64, svd_spectrum(&h, omega)?.singular_values[0].ln()))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = pts.len() as f64;
    let xbar = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - xbar).powi(2)).sum();
    Ok(-sxy / sxx)
}

#[derive(Debug, Clone)]
pub struct EdgeStates {
    /// Left singular vector of the smallest singular value.
    pub u: DVector<Complex64>,
    /// Right singular vector of the smallest singular value.
    pub v: DVector<Complex64>,
    pub e0: f64,
    /// Particle-sector weight in the first and last quarter of the chain.
    pub u_quartiles: (f64, f64),
    pub v_quartiles: (f64, f64),
}

fn quartile_weights(x: &DVector<Complex64>, n: usize) -> (f64, f64) {
    let q = (n / 4).max(1);
    let first = (0..q).map(|j| x[j].norm_sqr()).sum();
    let last = (n - q..n).map(|j| x[j].norm_sqr()).sum();
    (first, last)
}

pub fn edge_states(h: &NambuMatrix, omega: f64) -> Result<EdgeStates> {
    let st = stability(h)?;
    let spec = svd_spectrum(h, omega)?;
    let e0 = spec.singular_values[0];
    if !st.stable || e0 > zero_mode_threshold(h) {
        return Err(Error::NotTopological { omega, e0_over_j: e0 / h.j_scale });
    }
    let n = h.n_sites;
    let u = spec.left_vectors.column(0).into_owned();
    let v = spec.right_vectors.column(0).into_owned();
    Ok(EdgeStates { u_quartiles: quartile_weights(&u, n), v_quartiles: quartile_weights(&v, n), u, v, e0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub kappa_over_j: f64,
    pub gc_over_j: f64,
    pub classification: Option<Phase>,
    pub re_zeta: Option<f64>,
    pub e0: f64,
    pub gap: f64,
    pub error: Option<String>,
}

/// Classify every `(κ/J, g_c/J)` cell at one frequency. `g_s/g_c` is taken
/// from `base`. Cells are returned in row-major order (g_c outer, κ inner).
pub fn phase_map(kappa_over_j: &[f64], gc_over_j: &[f64], base: &EffectiveParams, omega: f64) -> Result<Vec<PhaseCell>> {
    if kappa_over_j.len() < 2 || gc_over_j.len() < 2 {
        return Err(Error::InvalidParameter { name: "grid", reason: "resolution must be at least 2x2".into() });
    }
    let cells: Vec<(f64, f64)> = gc_over_j.iter().flat_map(|&g| kappa_over_j.iter().map(move |&k| (k, g))).collect();
    Ok(cells.par_iter().map(|&(k, g)| phase_cell(base, k, g, omega)).collect())
}

/// Classification of one `(κ/J, g_c/J)` cell; solver failures are recorded
/// in the cell rather than returned.
pub fn phase_cell(base: &EffectiveParams, kappa_over_j: f64, gc_over_j: f64, omega: f64) -> PhaseCell {
    let gs_ratio = if base.g_c != 0.0 { base.g_s / base.g_c } else { 1.0 };
    let j = base.j;
    let p = EffectiveParams { kappa: kappa_over_j * j, g_c: gc_over_j * j, g_s: gs_ratio * gc_over_j * j, ..*base };
    match classify_point(&p, omega) {
        Ok(r) => PhaseCell {
            kappa_over_j,
            gc_over_j,
            classification: Some(r.classification),
            re_zeta: r.zeta.map(|z| z.re),
            e0: r.e0,
            gap: r.gap,
            error: None,
        },
        Err(e) => PhaseCell {
            kappa_over_j,
            gc_over_j,
            classification: None,
            re_zeta: None,
            e0: f64::NAN,
            gap: f64::NAN,
            error: Some(e.to_string()),
        },
    }
}

/// Bisect on `g_c/J` for the onset of dynamical instability at fixed `κ/J`,
/// given a stable lower and an unstable upper bracket.
pub fn instability_boundary_gc(base: &EffectiveParams, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let gs_ratio = if base.g_c != 0.0 { base.g_s / base.g_c } else { 1.0 };
    let stable_at = |g: f64| -> Result<bool> {
        let p = EffectiveParams { g_c: g * base.j, g_s: gs_ratio * g * base.j, ..*base };
        Ok(stability(&build_hnh(&p, None)?)?.stable)
    };
    if !stable_at(lo)? || stable_at(hi)? {
        return Err(Error::InvalidParameter { name: "bracket", reason: format!("[{lo}, {hi}] does not bracket the onset") });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if stable_at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn params(n: usize, kappa: f64, gc: f64) -> EffectiveParams {
        EffectiveParams::from_ratios(n, 1.0, kappa, gc, 1.0, 0.0, FRAC_PI_2)
    }

    #[test]
    fn decoupled_sites_have_flat_singular_values() {
        let p = EffectiveParams { n_sites: 5, delta: 0.0, j: 1e-300, phi: 0.0, kappa: 1.4, g_s: 0.0, g_c: 0.0 };
        let mut h = build_hnh(&p, None).unwrap();
        h.j_scale = 1.0;
        let w = 0.8;
        let s = svd_spectrum(&h, w).unwrap();
        let expected = (w * w + 0.49_f64).sqrt();
        assert!(s.singular_values.iter().all(|e| (e - expected).abs() < 1e-12));
    }

    #[test]
    fn svd_green_matches_inverse() {
        let h = build_hnh(&params(8, 2.0, 0.5), None).unwrap();
        let s = svd_spectrum(&h, 0.3).unwrap();
        let direct = linalg::inverse(&shifted(&h, 0.3)).unwrap();
        let diff = (s.green() - &direct).norm() / direct.norm();
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn extended_matrix_spectrum_mirrors_singular_values() {
        let h = build_hnh(&params(5, 1.7, 0.4), None).unwrap();
        let ev = linalg::hermitian_eigenvalues(&extended_hamiltonian(&h, -0.2)).unwrap();
        let sv = svd_spectrum(&h, -0.2).unwrap().singular_values;
        let d = sv.len();
        for k in 0..d {
            assert!((ev[d + k] - sv[k]).abs() < 1e-9);
            assert!((ev[d - 1 - k] + sv[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn unpumped_lattice_is_trivial() {
        let r = classify_point(&params(10, 1.0, 0.0), -0.5).unwrap();
        assert_eq!(r.classification, Phase::Trivial);
        let w = topological_window(&params(10, 1.0, 0.0), &default_omega_grid(1.0)).unwrap();
        assert_eq!(w.w_top, 0.0);
        assert!(w.window.is_none());
    }

    #[test]
    fn overdamped_lattice_is_trivial() {
        let r = classify_point(&params(20, 6.0, 0.1), -0.5).unwrap();
        assert_eq!(r.classification, Phase::Trivial);
        assert!(r.e0 > 0.05);
    }

    #[test]
    fn p1_point_is_topological() {
        let r = classify_point(&params(20, 2.6, 0.6), -0.5).unwrap();
        assert_eq!(r.classification, Phase::Topological);
        assert!(r.e0 < 0.05 && r.gap > 0.3);
        assert!(r.zeta.unwrap().re > 0.0);
    }

    #[test]
    fn strong_pump_is_unstable() {
        let r = classify_point(&params(20, 2.6, 2.0), -0.5).unwrap();
        assert_eq!(r.classification, Phase::Unstable);
        assert!(r.max_im_eigenvalue > 0.0);
    }

    #[test]
    fn unwrap_removes_jumps() {
        let raw = [3.0, -3.1, 2.9, -3.0];
        let u = unwrap_phases(&raw);
        assert!(u.windows(2).all(|w| (w[1] - w[0]).abs() < std::f64::consts::PI));
    }

    #[test]
    fn fit_needs_three_sites() {
        let h = build_hnh(&params(6, 2.6, 0.6), None).unwrap();
        assert!(matches!(localization_length(&h, 0.0, Some((2, 3))), Err(Error::DegenerateFit(2))));
    }

    #[test]
    fn edge_states_are_localized_on_opposite_ends() {
        let h = build_hnh(&params(20, 2.6, 0.6), None).unwrap();
        let e = edge_states(&h, -0.5).unwrap();
        assert!(e.u_quartiles.0 > e.u_quartiles.1);
        assert!(e.v_quartiles.1 > e.v_quartiles.0);
        let trivial = build_hnh(&params(20, 6.0, 0.1), None).unwrap();
        assert!(matches!(edge_states(&trivial, -0.5), Err(Error::NotTopological { .. })));
    }

    #[test]
    fn phase_map_zero_pump_row_is_trivial() {
        let cells = phase_map(&[1.0, 2.6], &[0.0, 0.6], &params(12, 2.6, 0.6), -0.5).unwrap();
        assert_eq!(cells.len(), 4);
        for c in cells.iter().filter(|c| c.gc_over_j == 0.0) {
            assert_eq!(c.classification, Some(Phase::Trivial));
        }
    }
}
