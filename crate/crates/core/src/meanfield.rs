//! Classical steady state of the pumped arrays: the running wave on the
//! auxiliary chain, the Duffing equation for the JJ-array displacement, and
//! the effective lattice parameters it induces.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::EffectiveCircuit;
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Effective parameters of the non-Hermitian lattice model. Rates in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub n_sites: usize,
    /// On-site detuning.
    pub delta: f64,
    /// Hopping magnitude.
    pub j: f64,
    /// Hopping phase imprinted by the pump.
    pub phi: f64,
    /// Local decay into the lines.
    pub kappa: f64,
    /// Local two-photon pump.
    pub g_s: f64,
    /// Nearest-neighbour two-photon pump.
    pub g_c: f64,
}

impl EffectiveParams {
    /// Build from dimensionless ratios, with `g_s = gs_over_gc * g_c`.
    pub fn from_ratios(n_sites: usize, j: f64, kappa_over_j: f64, gc_over_j: f64, gs_over_gc: f64, delta_over_j: f64, phi: f64) -> Self {
        let g_c = gc_over_j * j;
        Self { n_sites, delta: delta_over_j * j, j, phi, kappa: kappa_over_j * j, g_s: gs_over_gc * g_c, g_c }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::NonPositiveParameter { name: "n_sites", value: 0.0 });
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::NonPositiveParameter { name: "kappa", value: self.kappa });
        }
        if !(self.j > 0.0 && self.j.is_finite()) {
            return Err(Error::NonPositiveParameter { name: "j", value: self.j });
        }
        for (name, v) in [("delta", self.delta), ("phi", self.phi), ("g_s", self.g_s), ("g_c", self.g_c)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter { name, reason: format!("non-finite value {v}") });
            }
        }
        Ok(())
    }

    pub fn kappa_over_j(&self) -> f64 {
        self.kappa / self.j
    }

    pub fn gc_over_j(&self) -> f64 {
        self.g_c / self.j
    }

    pub fn with_sites(mut self, n_sites: usize) -> Self {
        self.n_sites = n_sites;
        self
    }
}

/// Steady-state displacement of the pumped arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSolution {
    pub alpha: Complex64,
    pub alpha_sq: f64,
    /// Dimensionless Duffing root, `|alpha|^2 (K_s + K_c) / kappa`.
    pub n: f64,
    /// Dimensionless drive `(Omega_a/kappa)^2 (K_s + K_c)/kappa`.
    pub xi: f64,
    /// Pump detuning `omega_b - omega_a` used for this solution.
    pub detuning_pump: f64,
    /// Auxiliary-chain displacement per site.
    pub beta: Vec<Complex64>,
}

/// Real root of `n^3 + n/4 = xi` in closed form, polished to machine precision.
pub fn duffing_analytic(xi: f64) -> Result<f64> {
    if !(xi >= 0.0) {
        return Err(Error::NegativeDrive(xi));
    }
    if xi == 0.0 {
        return Ok(0.0);
    }
    let s = 36.0 * xi + (3.0 + 1296.0 * xi * xi).sqrt();
    let c3 = 3f64.cbrt();
    let n = (c3 * s.powf(2.0 / 3.0) - c3 * c3) / (6.0 * s.cbrt());
    // The closed form cancels badly for small xi; the cubic is strictly
    // monotone (slope >= 1/4), so a couple of Newton steps settle the last bits.
    let mut n = n.max(0.0);
    for _ in 0..3 {
        let f = n * n * n + 0.25 * n - xi;
        n -= f / (3.0 * n * n + 0.25);
    }
    Ok(n)
}

/// One real non-negative solution of the intensity cubic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuffingRoot {
    /// Intracavity photon number `|alpha|^2`.
    pub alpha_sq: f64,
    pub alpha: Complex64,
    /// Linearly stable branch of the single-mode response curve.
    pub stable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BranchSelection {
    #[default]
    SmallestStable,
    Index(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuffingSolution {
    /// Ascending in `alpha_sq`.
    pub roots: Vec<DuffingRoot>,
}

impl DuffingSolution {
    pub fn select(&self, branch: BranchSelection) -> Option<DuffingRoot> {
        match branch {
            BranchSelection::SmallestStable => self.roots.iter().copied().find(|r| r.stable),
            BranchSelection::Index(i) => self.roots.get(i).copied(),
        }
    }

    pub fn is_bistable(&self) -> bool {
        self.roots.len() > 1
    }
}

/// Solve `(kappa/2 - i [delta + K |alpha|^2]) alpha = Omega_a` for all real
/// branches, via the cubic `x [(kappa/2)^2 + (delta + K x)^2] = Omega_a^2`.
pub fn duffing_numeric(omega_a_drive: f64, kappa: f64, delta_pump: f64, kerr_sum: f64) -> Result<DuffingSolution> {
    if !(kappa > 0.0) {
        return Err(Error::NonPositiveParameter { name: "kappa", value: kappa });
    }
    if !(kerr_sum >= 0.0) {
        return Err(Error::InvalidParameter { name: "kerr_sum", reason: format!("must be >= 0, got {kerr_sum}") });
    }
    if !(omega_a_drive >= 0.0) {
        return Err(Error::InvalidParameter { name: "omega_a_drive", reason: format!("must be >= 0, got {omega_a_drive}") });
    }
    let half_k = 0.5 * kappa;
    let target = omega_a_drive * omega_a_drive;
    let alpha_of = |x: f64| Complex64::from(omega_a_drive) / Complex64::new(half_k, -(delta_pump + kerr_sum * x));
    if target == 0.0 {
        return Ok(DuffingSolution { roots: vec![DuffingRoot { alpha_sq: 0.0, alpha: Complex64::new(0.0, 0.0), stable: true }] });
    }

    let (a, b, c) = (kerr_sum * kerr_sum, 2.0 * delta_pump * kerr_sum, half_k * half_k + delta_pump * delta_pump);
    let f = |x: f64| ((a * x + b) * x + c) * x - target;
    let df = |x: f64| (3.0 * a * x + 2.0 * b) * x + c;

    // Every root lies in [0, Omega^2 / (kappa/2)^2]; split at the turning points.
    let upper = target / (half_k * half_k);
    let mut breaks = vec![0.0];
    if a > 0.0 {
        let disc = 4.0 * b * b - 12.0 * a * c;
        if disc > 0.0 {
            let sq = disc.sqrt();
            let mut crit = [(-2.0 * b - sq) / (6.0 * a), (-2.0 * b + sq) / (6.0 * a)];
            crit.sort_by(f64::total_cmp);
            breaks.extend(crit.into_iter().filter(|&x| x > 0.0 && x < upper));
        }
    }
    breaks.push(upper);

    let tol = 1e-10 * target;
    let mut roots = Vec::new();
    for w in breaks.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (f(lo), f(hi));
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        let increasing = fhi > flo;
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let fx = f(x);
            if (fx > 0.0) == increasing {
                hi = x;
            } else {
                lo = x;
            }
            let d = df(x);
            let newton = x - fx / d;
            x = if d != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if (hi - lo) <= 4.0 * f64::EPSILON * hi.abs().max(1e-300) {
                break;
            }
        }
        let residual = f(x).abs();
        if residual > tol {
            return Err(Error::SolverTolerance { residual });
        }
        roots.push(x);
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|p, q| (*p - *q).abs() <= 1e-12 * q.abs().max(1.0));

    Ok(DuffingSolution { roots: roots.into_iter().map(|x| DuffingRoot { alpha_sq: x, alpha: alpha_of(x), stable: df(x) > 0.0 }).collect() })
}

/// Running-wave steady state of the impedance-matched auxiliary chain, sites
/// indexed `1..=n`.
pub fn aux_chain_steady_state(omega_b_drive: f64, j_b: f64, j_ab: f64, alpha: Complex64, n: usize) -> Vec<Complex64> {
    let phase = |x: f64| Complex64::from_polar(1.0, -x);
    (1..=n)
        .map(|j| {
            let running = I * omega_b_drive / (2.0 * j_b) * phase(FRAC_PI_2 * j as f64);
            let back: Complex64 = (1..=n).map(|l| phase(FRAC_PI_2 * l as f64 + FRAC_PI_2 * j.abs_diff(l) as f64)).sum();
            running - I * (j_ab / (2.0 * j_b)) * alpha * back
        })
        .collect()
}

/// Coupling matrix of the auxiliary chain with boundary decay `gamma`.
/// For `n = 1` the single site is both boundaries and carries `gamma`.
pub fn matched_chain_matrix(j_b: f64, gamma: f64, n: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        if j == 0 {
            m[(j, j)] += Complex64::from(gamma / 2.0);
        }
        if j + 1 == n {
            m[(j, j)] += Complex64::from(gamma / 2.0);
        }
        if j + 1 < n {
            m[(j, j + 1)] = I * j_b;
            m[(j + 1, j)] = I * j_b;
        }
    }
    m
}

/// Closed-form inverse of [`matched_chain_matrix`] at `gamma = 2 j_b`.
pub fn matched_chain_inverse(j_b: f64, n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |j, l| Complex64::from_polar(1.0 / (2.0 * j_b), -FRAC_PI_2 * j.abs_diff(l) as f64))
}

/// Map a detuning and photon number onto the lattice model.
///
/// A negative hopping is folded into the phase so that `j >= 0`.
pub fn effective_params(ec: &EffectiveCircuit, detuning_pump: f64, alpha_sq: f64) -> EffectiveParams {
    let kerr = ec.k_s + ec.k_c;
    let j = ec.j_a + 2.0 * ec.k_c * alpha_sq;
    let (j, phi) = if j < 0.0 { (-j, FRAC_PI_2 + std::f64::consts::PI) } else { (j, FRAC_PI_2) };
    EffectiveParams {
        n_sites: ec.n,
        delta: detuning_pump + 2.0 * kerr * alpha_sq,
        j,
        phi,
        kappa: ec.kappa,
        g_s: (ec.k_s - ec.k_c) * alpha_sq,
        g_c: ec.k_c * alpha_sq,
    }
}

pub fn effective_params_from_meanfield(ec: &EffectiveCircuit, mf: &MeanFieldSolution) -> EffectiveParams {
    effective_params(ec, mf.detuning_pump, mf.alpha_sq)
}

/// How the pump frequency is chosen when solving for the displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PumpDetuning {
    /// Pump detuned to `omega_b - omega_a = -2 kappa n`, which cancels the
    /// effective detuning exactly; uses the closed-form Duffing root.
    #[default]
    Matched,
    /// Pump at the circuit's `omega_b`; solves the full intensity cubic.
    Circuit(BranchSelection),
}

pub fn solve_mean_field(ec: &EffectiveCircuit, mode: PumpDetuning) -> Result<MeanFieldSolution> {
    let kerr = ec.k_s + ec.k_c;
    let kappa = ec.kappa;
    let xi = (ec.omega_a_drive / kappa).powi(2) * (kerr / kappa);
    let (alpha_sq, detuning_pump, alpha, n) = match mode {
        PumpDetuning::Matched => {
            if !(kerr > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "kerr_sum",
                    reason: "matched detuning needs a non-zero Kerr nonlinearity".into(),
                });
            }
            let n = duffing_analytic(xi)?;
            let alpha_sq = kappa * n / kerr;
            let detuning = -2.0 * kappa * n;
            let alpha = Complex64::from(ec.omega_a_drive) / Complex64::new(kappa / 2.0, -(detuning + kerr * alpha_sq));
            (alpha_sq, detuning, alpha, n)
        }
        PumpDetuning::Circuit(branch) => {
            let detuning = ec.omega_b - ec.omega_a;
            let sol = duffing_numeric(ec.omega_a_drive, kappa, detuning, kerr)?;
            let root = sol
                .select(branch)
                .ok_or(Error::InvalidParameter { name: "branch", reason: format!("no such branch among {} roots", sol.roots.len()) })?;
            (root.alpha_sq, detuning, root.alpha, root.alpha_sq * kerr / kappa)
        }
    };
    let beta = aux_chain_steady_state(ec.omega_b_drive, ec.j_b, ec.j_ab, alpha, ec.n);
    Ok(MeanFieldSolution { alpha, alpha_sq, n, xi, detuning_pump, beta })
}
