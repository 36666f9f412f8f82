//! Disorder Monte Carlo and parameter-grid sweeps.
//!
//! Every realization draws from its own seed derived from the master seed,
//! the disorder family, the sigma index and the realization index, and
//! results are reduced in realization order. Output is therefore identical
//! for any worker count.

use std::collections::HashMap;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{check_writable, emit_dataset, manifest_path, read_csv, read_manifest, Cell, Dataset, RunManifest};
use crate::error::{Error, Result};
use crate::lattice::{build_hnh, sample_disorder, stability, DisorderSigmas};
use crate::meanfield::EffectiveParams;
use crate::response::Response;
use crate::topology::{default_omega_grid, linspace, phase_cell, window_for_matrix, Phase, PhaseCell};
use crate::units::to_db;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisorderFamily {
    Delta,
    Kappa,
    J,
    Gs,
    Gc,
    Phi,
}

impl DisorderFamily {
    pub const ALL: [DisorderFamily; 6] =
        [DisorderFamily::Delta, DisorderFamily::Kappa, DisorderFamily::J, DisorderFamily::Gs, DisorderFamily::Gc, DisorderFamily::Phi];

    pub fn name(self) -> &'static str {
        match self {
            DisorderFamily::Delta => "delta",
            DisorderFamily::Kappa => "kappa",
            DisorderFamily::J => "J",
            DisorderFamily::Gs => "gs",
            DisorderFamily::Gc => "gc",
            DisorderFamily::Phi => "phi",
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }

    /// Disorder of strength `sigma` in this family only.
    pub fn sigmas(self, sigma: f64) -> DisorderSigmas {
        let mut s = DisorderSigmas::default();
        match self {
            DisorderFamily::Delta => s.delta = sigma,
            DisorderFamily::Kappa => s.kappa = sigma,
            DisorderFamily::J => s.j = sigma,
            DisorderFamily::Gs => s.g_s = sigma,
            DisorderFamily::Gc => s.g_c = sigma,
            DisorderFamily::Phi => s.phi = sigma,
        }
        s
    }
}

impl fmt::Display for DisorderFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DisorderFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "delta" => Ok(DisorderFamily::Delta),
            "kappa" => Ok(DisorderFamily::Kappa),
            "j" => Ok(DisorderFamily::J),
            "gs" | "g_s" => Ok(DisorderFamily::Gs),
            "gc" | "g_c" => Ok(DisorderFamily::Gc),
            "phi" => Ok(DisorderFamily::Phi),
            other => Err(format!("unknown disorder family `{other}` (expected delta, kappa, J, gs, gc, phi)")),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one realization.
pub fn realization_seed(master_seed: u64, family: DisorderFamily, sigma_index: usize, realization: usize) -> u64 {
    [family.tag(), sigma_index as u64, realization as u64]
        .into_iter()
        .fold(splitmix64(master_seed), |acc, x| splitmix64(acc ^ splitmix64(x)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderConfig {
    pub base: EffectiveParams,
    pub family: DisorderFamily,
    pub sigmas: Vec<f64>,
    pub n_realizations: usize,
    pub master_seed: u64,
    /// Signal frequency (rad/s).
    pub omega_s: f64,
    /// Also compute the topological bandwidth per realization.
    pub bandwidth: bool,
    pub keep_records: bool,
}

impl DisorderConfig {
    pub fn new(base: EffectiveParams, family: DisorderFamily, sigmas: Vec<f64>, n_realizations: usize, master_seed: u64) -> Self {
        Self { omega_s: -0.5 * base.j, base, family, sigmas, n_realizations, master_seed, bandwidth: true, keep_records: false }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.n_realizations == 0 {
            return Err(Error::InvalidParameter { name: "n_realizations", reason: "must be at least 1".into() });
        }
        for &s in &self.sigmas {
            self.family.sigmas(s).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub seed: u64,
    pub stable: bool,
    pub gain: f64,
    pub reverse_gain: f64,
    pub added_noise: f64,
    /// In units of J; NaN when not computed.
    pub w_top: f64,
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let stderr = if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt() } else { 0.0 };
        Self { mean, stderr }
    }

    /// The linear mean expressed in dB, with a first-order error.
    pub fn to_db(self) -> Self {
        Self { mean: to_db(self.mean), stderr: 10.0 / std::f64::consts::LN_10 * self.stderr / self.mean }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderMeans {
    /// Linear power averages.
    pub gain: Estimate,
    pub reverse_gain: Estimate,
    /// Averages of the per-realization dB values.
    pub gain_db_avg: Estimate,
    pub reverse_gain_db_avg: Estimate,
    pub added_noise: Estimate,
    /// In units of J; NaN when the bandwidth was not computed.
    pub w_top: Estimate,
}

impl DisorderMeans {
    pub fn gain_db(&self) -> Estimate {
        self.gain.to_db()
    }

    pub fn reverse_gain_db(&self) -> Estimate {
        self.reverse_gain.to_db()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisorderSummary {
    pub family: DisorderFamily,
    pub sigma: f64,
    pub n_realizations: usize,
    pub n_stable: usize,
    pub n_unstable: usize,
    pub p_unstable: f64,
    /// `None` when every realization was unstable.
    pub means: Option<DisorderMeans>,
    pub records: Option<Vec<RealizationRecord>>,
}

impl DisorderSummary {
    pub fn require_means(&self) -> Result<&DisorderMeans> {
        self.means.as_ref().ok_or(Error::AllUnstable)
    }
}

fn run_realization(cfg: &DisorderConfig, sigma_index: usize, r: usize, grid: &[f64]) -> Result<RealizationRecord> {
    let seed = realization_seed(cfg.master_seed, cfg.family, sigma_index, r);
    let d = sample_disorder(&cfg.base, &cfg.family.sigmas(cfg.sigmas[sigma_index]), seed);
    let h = build_hnh(&cfg.base, Some(&d))?;
    let st = stability(&h)?;
    if !st.stable {
        return Ok(RealizationRecord {
            seed,
            stable: false,
            gain: f64::NAN,
            reverse_gain: f64::NAN,
            added_noise: f64::NAN,
            w_top: f64::NAN,
        });
    }
    let resp = Response::new(&h, cfg.omega_s)?;
    let last = h.n_sites - 1;
    let g = resp.gains(0, last);
    let w_top = if cfg.bandwidth {
        let rep = window_for_matrix(&h, grid)?;
        if rep.classification == Phase::Topological {
            rep.w_top / cfg.base.j
        } else {
            0.0
        }
    } else {
        f64::NAN
    };
    Ok(RealizationRecord { seed, stable: true, gain: g.forward, reverse_gain: g.reverse, added_noise: resp.added_noise(0, last), w_top })
}

/// Averaged figures of merit at each sigma of the configured family.
pub fn disorder_sweep(cfg: &DisorderConfig) -> Result<Vec<DisorderSummary>> {
    cfg.validate()?;
    let grid = default_omega_grid(cfg.base.j);
    (0..cfg.sigmas.len())
        .map(|k| {
            let records = (0..cfg.n_realizations).into_par_iter().map(|r| run_realization(cfg, k, r, &grid)).collect::<Result<Vec<_>>>()?;
            Ok(summarize(cfg, k, records))
        })
        .collect()
}

fn summarize(cfg: &DisorderConfig, k: usize, records: Vec<RealizationRecord>) -> DisorderSummary {
    let stable: Vec<&RealizationRecord> = records.iter().filter(|r| r.stable).collect();
    let n_stable = stable.len();
    let collect = |f: fn(&RealizationRecord) -> f64| stable.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let means = (n_stable > 0).then(|| DisorderMeans {
        gain: Estimate::of(&collect(|r| r.gain)),
        reverse_gain: Estimate::of(&collect(|r| r.reverse_gain)),
        gain_db_avg: Estimate::of(&collect(|r| to_db(r.gain))),
        reverse_gain_db_avg: Estimate::of(&collect(|r| to_db(r.reverse_gain))),
        added_noise: Estimate::of(&collect(|r| r.added_noise)),
        w_top: Estimate::of(&collect(|r| r.w_top)),
    });
    DisorderSummary {
        family: cfg.family,
        sigma: cfg.sigmas[k],
        n_realizations: records.len(),
        n_stable,
        n_unstable: records.len() - n_stable,
        p_unstable: (records.len() - n_stable) as f64 / records.len() as f64,
        means,
        records: cfg.keep_records.then_some(records),
    }
}

/// Fraction of unstable draws at each sigma, stopping at the first sigma
/// whose fraction exceeds `threshold`. Returns that sigma.
pub fn instability_onset(
    base: &EffectiveParams,
    family: DisorderFamily,
    schedule: &[f64],
    n_realizations: usize,
    master_seed: u64,
    threshold: f64,
) -> Result<f64> {
    if schedule.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter { name: "schedule", reason: "sigma schedule must be ascending".into() });
    }
    for (k, &sigma) in schedule.iter().enumerate() {
        if sigma == 0.0 {
            continue;
        }
        let p = unstable_fraction(base, family, sigma, k, n_realizations, master_seed)?;
        if p > threshold {
            return Ok(sigma);
        }
    }
    Err(Error::NoOnset)
}

pub fn unstable_fraction(
    base: &EffectiveParams,
    family: DisorderFamily,
    sigma: f64,
    sigma_index: usize,
    n_realizations: usize,
    master_seed: u64,
) -> Result<f64> {
    let sigmas = family.sigmas(sigma);
    sigmas.validate()?;
    let unstable = (0..n_realizations)
        .into_par_iter()
        .map(|r| {
            let seed = realization_seed(master_seed, family, sigma_index, r);
            let h = build_hnh(base, Some(&sample_disorder(base, &sigmas, seed)))?;
            Ok(!stability(&h)?.stable)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(unstable.iter().filter(|&&u| u).count() as f64 / n_realizations as f64)
}

/// Run `f` on a dedicated pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidParameter { name: "workers", reason: "must be at least 1".into() }),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter { name: "workers", reason: e.to_string() })?;
            Ok(pool.install(f))
        }
    }
}

/// A `(κ/J, g_c/J)` grid at fixed frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagramConfig {
    pub base: EffectiveParams,
    pub kappa_range: (f64, f64),
    pub gc_range: (f64, f64),
    /// Points along κ and along g_c.
    pub resolution: (usize, usize),
    /// Rad/s.
    pub omega: f64,
}

pub const PHASE_COLUMNS: [&str; 6] = ["kappa_over_J", "gc_over_J", "class", "re_zeta", "e0", "gap"];

impl PhaseDiagramConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.resolution.0 < 2 || self.resolution.1 < 2 {
            return Err(Error::InvalidParameter { name: "resolution", reason: "must be at least 2x2".into() });
        }
        if !(self.kappa_range.0 > 0.0 && self.kappa_range.1 > self.kappa_range.0) {
            return Err(Error::InvalidParameter { name: "kappa_range", reason: "need 0 < lo < hi".into() });
        }
        if !(self.gc_range.0 >= 0.0 && self.gc_range.1 > self.gc_range.0) {
            return Err(Error::InvalidParameter { name: "gc_range", reason: "need 0 <= lo < hi".into() });
        }
        Ok(())
    }

    pub fn kappa_grid(&self) -> Vec<f64> {
        linspace(self.kappa_range.0, self.kappa_range.1, self.resolution.0)
    }

    pub fn gc_grid(&self) -> Vec<f64> {
        linspace(self.gc_range.0, self.gc_range.1, self.resolution.1)
    }

    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("plain data serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

fn phase_row(c: &PhaseCell) -> Vec<Cell> {
    vec![
        Cell::Num(c.kappa_over_j),
        Cell::Num(c.gc_over_j),
        Cell::Text(c.classification.map_or("error", Phase::as_str).to_string()),
        Cell::Num(c.re_zeta.unwrap_or(f64::NAN)),
        Cell::Num(c.e0),
        Cell::Num(c.gap),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiagramOutcome {
    pub files: Vec<PathBuf>,
    pub computed: usize,
    pub reused: usize,
    pub dataset: Dataset,
}

/// Compute a phase diagram into `<dir>/<stem>.csv`.
///
/// Rows are appended one g_c line at a time, so an interrupted run leaves
/// usable partial output. Re-running with the same configuration skips cells
/// already on disk and rewrites the file in canonical order.
pub fn run_phase_diagram(
    cfg: &PhaseDiagramConfig,
    dir: &Path,
    stem: &str,
    manifest: &RunManifest,
    force: bool,
) -> Result<PhaseDiagramOutcome> {
    cfg.validate()?;
    let hash = cfg.hash();
    let csv_path = dir.join(format!("{stem}.csv"));
    let man_path = manifest_path(dir, stem);

    let resumable = csv_path.exists() && read_manifest(&man_path).is_ok_and(|m| m.config_hash == hash);
    let mut done: HashMap<(u64, u64), Vec<Cell>> = HashMap::new();
    if resumable {
        let existing = read_csv(&csv_path)?;
        if existing.columns != PHASE_COLUMNS {
            return Err(Error::SchemaMismatch(format!("{} has columns {:?}", csv_path.display(), existing.columns)));
        }
        for row in existing.rows {
            if let (Some(k), Some(g)) = (row[0].as_f64(), row[1].as_f64()) {
                done.insert((k.to_bits(), g.to_bits()), row);
            }
        }
    } else {
        check_writable(&[csv_path.clone(), man_path.clone()], force)?;
    }

    std::fs::create_dir_all(dir)?;
    let mut m = manifest.clone();
    m.config_hash = hash;
    std::fs::write(&man_path, serde_json::to_string_pretty(&m)? + "\n")?;

    let (kg, gg) = (cfg.kappa_grid(), cfg.gc_grid());
    let header_only = Dataset::new(&PHASE_COLUMNS);
    if !resumable {
        std::fs::write(&csv_path, header_only.to_csv()?)?;
    }
    let mut computed = 0;
    for &g in &gg {
        let missing: Vec<f64> = kg.iter().copied().filter(|k| !done.contains_key(&(k.to_bits(), g.to_bits()))).collect();
        if missing.is_empty() {
            continue;
        }
        let cells: Vec<PhaseCell> = missing.par_iter().map(|&k| phase_cell(&cfg.base, k, g, cfg.omega)).collect();
        let mut chunk = Dataset::new(&PHASE_COLUMNS);
        for c in &cells {
            let row = phase_row(c);
            done.insert((c.kappa_over_j.to_bits(), c.gc_over_j.to_bits()), row.clone());
            chunk.push(row)?;
        }
        let bytes = chunk.to_csv()?;
        let body = &bytes[header_only.to_csv()?.len()..];
        let mut f = std::fs::OpenOptions::new().append(true).open(&csv_path)?;
        f.write_all(body)?;
        computed += cells.len();
    }

    let mut ds = Dataset::new(&PHASE_COLUMNS);
    for &g in &gg {
        for &k in &kg {
            ds.push(done[&(k.to_bits(), g.to_bits())].clone())?;
        }
    }
    let reused = ds.rows.len() - computed;
    let files = emit_dataset(&ds, dir, stem, &m, true)?;
    Ok(PhaseDiagramOutcome { files, computed, reused, dataset: ds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn base() -> EffectiveParams {
        EffectiveParams::from_ratios(10, 1.0, 2.6, 0.6, 1.0, 0.0, FRAC_PI_2)
    }

    #[test]
    fn seeds_differ_across_coordinates() {
        let a = realization_seed(1, DisorderFamily::J, 0, 0);
        assert_ne!(a, realization_seed(2, DisorderFamily::J, 0, 0));
        assert_ne!(a, realization_seed(1, DisorderFamily::Phi, 0, 0));
        assert_ne!(a, realization_seed(1, DisorderFamily::J, 1, 0));
        assert_ne!(a, realization_seed(1, DisorderFamily::J, 0, 1));
        assert_eq!(a, realization_seed(1, DisorderFamily::J, 0, 0));
    }

    #[test]
    fn zero_sigma_reproduces_clean_values() {
        let mut cfg = DisorderConfig::new(base(), DisorderFamily::Gc, vec![0.0], 4, 9);
        cfg.bandwidth = false;
        let s = &disorder_sweep(&cfg).unwrap()[0];
        assert_eq!(s.p_unstable, 0.0);
        let h = build_hnh(&base(), None).unwrap();
        let clean = Response::new(&h, -0.5).unwrap().gains(0, 9);
        let m = s.require_means().unwrap();
        assert_eq!(m.gain.mean, clean.forward);
        assert_eq!(m.reverse_gain.mean, clean.reverse);
        assert_eq!(m.gain.stderr, 0.0);
    }

    #[test]
    fn identical_across_worker_counts() {
        let mut cfg = DisorderConfig::new(base(), DisorderFamily::Kappa, vec![0.1, 0.2], 24, 77);
        cfg.bandwidth = false;
        cfg.keep_records = true;
        let one = with_workers(Some(1), || disorder_sweep(&cfg)).unwrap().unwrap();
        let four = with_workers(Some(4), || disorder_sweep(&cfg)).unwrap().unwrap();
        assert_eq!(format!("{one:?}"), format!("{four:?}"));
        for s in &one {
            assert_eq!(s.n_stable + s.n_unstable, s.n_realizations);
        }
    }

    #[test]
    fn all_unstable_reported() {
        let strong = EffectiveParams { g_c: 2.5, g_s: 2.5, ..base() };
        let mut cfg = DisorderConfig::new(strong, DisorderFamily::J, vec![0.01], 3, 1);
        cfg.bandwidth = false;
        let s = &disorder_sweep(&cfg).unwrap()[0];
        assert_eq!(s.p_unstable, 1.0);
        assert!(matches!(s.require_means(), Err(Error::AllUnstable)));
    }

    #[test]
    fn zero_schedule_has_no_onset() {
        let r = instability_onset(&base(), DisorderFamily::Gc, &[0.0, 0.0], 10, 3, 0.01);
        assert!(matches!(r, Err(Error::NoOnset)));
    }

    #[test]
    fn family_names_parse() {
        for f in DisorderFamily::ALL {
            assert_eq!(f.name().parse::<DisorderFamily>().unwrap(), f);
        }
        assert!("mass".parse::<DisorderFamily>().is_err());
    }

    #[test]
    fn standard_error_shrinks_with_sample_size() {
        let mk = |n| {
            let mut cfg = DisorderConfig::new(base(), DisorderFamily::Gc, vec![0.1], n, 5);
            cfg.bandwidth = false;
            disorder_sweep(&cfg).unwrap()[0].require_means().unwrap().gain_db_avg.stderr
        };
        let ratio = mk(100) / mk(400);
        assert!((ratio - 2.0).abs() < 0.6, "ratio {ratio}");
    }

    fn small_diagram() -> PhaseDiagramConfig {
        PhaseDiagramConfig {
            base: EffectiveParams::from_ratios(8, 1.0, 2.6, 0.6, 1.0, 0.0, FRAC_PI_2),
            kappa_range: (1.0, 3.0),
            gc_range: (0.0, 1.0),
            resolution: (3, 3),
            omega: -0.5,
        }
    }

    #[test]
    fn phase_diagram_resumes_byte_identically() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_diagram();
        let man = RunManifest::new("phase-diagram", "", 0);
        let first = run_phase_diagram(&cfg, dir.path(), "pd", &man, false).unwrap();
        assert_eq!((first.computed, first.reused), (9, 0));
        let bytes = std::fs::read(&first.files[0]).unwrap();

        // Drop the last line to mimic an interrupted run.
        let text = String::from_utf8(bytes.clone()).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.pop();
        std::fs::write(&first.files[0], lines.join("\n") + "\n").unwrap();

        let second = run_phase_diagram(&cfg, dir.path(), "pd", &man, false).unwrap();
        assert_eq!((second.computed, second.reused), (1, 8));
        assert_eq!(std::fs::read(&second.files[0]).unwrap(), bytes);
    }

    #[test]
    fn phase_diagram_refuses_foreign_output() {
        let dir = tempfile::tempdir().unwrap();
        let man = RunManifest::new("phase-diagram", "", 0);
        run_phase_diagram(&small_diagram(), dir.path(), "pd", &man, false).unwrap();
        let other = PhaseDiagramConfig { omega: 0.0, ..small_diagram() };
        assert!(matches!(run_phase_diagram(&other, dir.path(), "pd", &man, false), Err(Error::WouldOverwrite(_))));
        assert!(run_phase_diagram(&other, dir.path(), "pd", &man, true).is_ok());
    }
}
