//! Run configuration files.
//!
//! TOML with SI-suffixed quantities:
//!
//! ```toml
//! preset = "P1"
//! seed = 7
//!
//! [circuit]
//! c_a = "1790 fF"
//! p_b = "-74.8 dBm"
//! e_j = "1.00 THz"      # junction energy as E/h
//!
//! [circuit_options]
//! kerr_shift = true
//! include_c_ab_in_c_a_eq = false
//! pump_detuning = "matched"   # or "circuit"
//!
//! [model]
//! source = "nominal"          # or "circuit"
//! n_sites = 20
//! kappa_over_j = 2.6
//!
//! [signal]
//! omega_s_over_j = -0.5
//! flux = "5 MHz"              # |alpha_s|^2 / 2 pi
//! input_site = 1
//! ```
//!
//! Every key is optional when a preset is given; without one the whole
//! `[circuit]` table is required. Unknown keys are rejected.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::circuit::{derive_effective_circuit, CircuitOptions, CircuitParams, EffectiveCircuit};
use crate::error::{Error, Result};
use crate::meanfield::{
    effective_params_from_meanfield, solve_mean_field, BranchSelection, EffectiveParams, MeanFieldSolution, PumpDetuning,
};
use crate::preset::{self, PresetName};
use crate::units::{format_quantity, parse_quantity, Dimension, TWO_PI};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<Spanned<String>>,
    seed: Option<u64>,
    circuit: Option<RawCircuit>,
    circuit_options: Option<RawOptions>,
    model: Option<RawModel>,
    signal: Option<RawSignal>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCircuit {
    c_a: Option<Spanned<String>>,
    c_a_prime: Option<Spanned<String>>,
    c_ab: Option<Spanned<String>>,
    c_aw: Option<Spanned<String>>,
    c_b: Option<Spanned<String>>,
    c_b_prime: Option<Spanned<String>>,
    c_bw: Option<Spanned<String>>,
    l_b: Option<Spanned<String>>,
    e_j: Option<Spanned<String>>,
    e_j_prime: Option<Spanned<String>>,
    z0: Option<Spanned<String>>,
    p_b: Option<Spanned<String>>,
    m: Option<u32>,
    n: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptions {
    kerr_shift: Option<bool>,
    include_c_ab_in_c_a_eq: Option<bool>,
    pump_detuning: Option<Spanned<String>>,
    branch: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    source: Option<Spanned<String>>,
    n_sites: Option<usize>,
    kappa_over_j: Option<f64>,
    gc_over_j: Option<f64>,
    gs_over_gc: Option<f64>,
    delta_over_j: Option<f64>,
    phi: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSignal {
    omega_s_over_j: Option<f64>,
    flux: Option<Spanned<String>>,
    input_site: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSource {
    /// Lattice parameters computed from the circuit and mean field.
    Circuit,
    /// The quoted operating point on the circuit's hopping scale.
    Nominal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub source: ModelSource,
    pub n_sites: Option<usize>,
    pub kappa_over_j: Option<f64>,
    pub gc_over_j: Option<f64>,
    pub gs_over_gc: Option<f64>,
    pub delta_over_j: Option<f64>,
    pub phi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalConfig {
    pub omega_s_over_j: f64,
    /// `|alpha_s|^2` in 1/s.
    pub flux: f64,
    /// 1-based.
    pub input_site: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<PresetName>,
    pub seed: u64,
    pub circuit: CircuitParams,
    pub options: CircuitOptions,
    pub pump: PumpDetuning,
    pub model: ModelSpec,
    pub signal: SignalConfig,
}

pub const DEFAULT_SEED: u64 = 20_240_501;

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn parse_err(text: &str, span: std::ops::Range<usize>, message: impl Into<String>) -> Error {
    let (line, column) = line_col(text, span.start);
    Error::Parse { line, column, message: message.into() }
}

fn validation(field: &str, message: impl Into<String>) -> Error {
    Error::Validation { field: field.to_string(), message: message.into() }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let span = e.span().unwrap_or(0..0);
        parse_err(text, span, e.message().to_string())
    })?;

    let preset = match &raw.preset {
        None => None,
        Some(s) => Some(s.get_ref().parse::<PresetName>().map_err(|m| parse_err(text, s.span(), m))?),
    };

    let quantity = |v: &Option<Spanned<String>>, dim: Dimension| -> Result<Option<f64>> {
        v.as_ref().map(|s| parse_quantity(s.get_ref(), dim).map_err(|m| parse_err(text, s.span(), m))).transpose()
    };

    let rc = raw.circuit.unwrap_or_default();
    let base = preset.map(preset::circuit);
    let pick = |name: &str, v: Option<f64>, fallback: Option<f64>| -> Result<f64> {
        v.or(fallback).ok_or_else(|| validation(&format!("circuit.{name}"), "required when no preset is given"))
    };
    use Dimension::*;
    let circuit = CircuitParams {
        c_a: pick("c_a", quantity(&rc.c_a, Capacitance)?, base.map(|b| b.c_a))?,
        c_a_prime: pick("c_a_prime", quantity(&rc.c_a_prime, Capacitance)?, base.map(|b| b.c_a_prime))?,
        c_ab: pick("c_ab", quantity(&rc.c_ab, Capacitance)?, base.map(|b| b.c_ab))?,
        c_aw: pick("c_aw", quantity(&rc.c_aw, Capacitance)?, base.map(|b| b.c_aw))?,
        c_b: pick("c_b", quantity(&rc.c_b, Capacitance)?, base.map(|b| b.c_b))?,
        c_b_prime: pick("c_b_prime", quantity(&rc.c_b_prime, Capacitance)?, base.map(|b| b.c_b_prime))?,
        c_bw: pick("c_bw", quantity(&rc.c_bw, Capacitance)?, base.map(|b| b.c_bw))?,
        l_b: pick("l_b", quantity(&rc.l_b, Inductance)?, base.map(|b| b.l_b))?,
        e_j: pick("e_j", quantity(&rc.e_j, Energy)?, base.map(|b| b.e_j))?,
        e_j_prime: pick("e_j_prime", quantity(&rc.e_j_prime, Energy)?, base.map(|b| b.e_j_prime))?,
        z0: pick("z0", quantity(&rc.z0, Resistance)?, base.map(|b| b.z0))?,
        p_b: pick("p_b", quantity(&rc.p_b, Power)?, base.map(|b| b.p_b))?,
        m: rc.m.or(base.map(|b| b.m)).ok_or_else(|| validation("circuit.m", "required when no preset is given"))?,
        n: rc.n.or(base.map(|b| b.n)).ok_or_else(|| validation("circuit.n", "required when no preset is given"))?,
    };
    circuit.validate().map_err(|e| match e {
        Error::NonPositiveParameter { name, value } => {
            validation(&format!("circuit.{name}"), format!("must be strictly positive, got {value}"))
        }
        other => other,
    })?;

    let ro = raw.circuit_options.unwrap_or_default();
    let defaults = CircuitOptions::default();
    let options = CircuitOptions {
        kerr_shift: ro.kerr_shift.unwrap_or(defaults.kerr_shift),
        include_c_ab_in_c_a_eq: ro.include_c_ab_in_c_a_eq.unwrap_or(defaults.include_c_ab_in_c_a_eq),
    };
    let branch = ro.branch.map_or(BranchSelection::SmallestStable, BranchSelection::Index);
    let pump = match ro.pump_detuning.as_ref().map(|s| (s.get_ref().as_str(), s.span())) {
        None | Some(("matched", _)) => {
            if ro.branch.is_some() {
                return Err(validation("circuit_options.branch", "only meaningful with pump_detuning = \"circuit\""));
            }
            PumpDetuning::Matched
        }
        Some(("circuit", _)) => PumpDetuning::Circuit(branch),
        Some((other, span)) => return Err(parse_err(text, span, format!("unknown pump_detuning `{other}` (expected matched, circuit)"))),
    };

    let rm = raw.model.unwrap_or_default();
    let source = match rm.source.as_ref().map(|s| (s.get_ref().as_str(), s.span())) {
        None => {
            if preset.is_some() {
                ModelSource::Nominal
            } else {
                ModelSource::Circuit
            }
        }
        Some(("nominal", _)) => ModelSource::Nominal,
        Some(("circuit", _)) => ModelSource::Circuit,
        Some((other, span)) => return Err(parse_err(text, span, format!("unknown model source `{other}` (expected nominal, circuit)"))),
    };
    let model = ModelSpec {
        source,
        n_sites: rm.n_sites,
        kappa_over_j: rm.kappa_over_j,
        gc_over_j: rm.gc_over_j,
        gs_over_gc: rm.gs_over_gc,
        delta_over_j: rm.delta_over_j,
        phi: rm.phi,
    };
    if model.n_sites == Some(0) {
        return Err(validation("model.n_sites", "must be at least 1"));
    }
    for (field, v) in [
        ("model.kappa_over_j", model.kappa_over_j),
        ("model.gc_over_j", model.gc_over_j),
        ("model.gs_over_gc", model.gs_over_gc),
        ("model.delta_over_j", model.delta_over_j),
        ("model.phi", model.phi),
    ] {
        if v.is_some_and(|x| !x.is_finite()) {
            return Err(validation(field, "must be finite"));
        }
    }
    if model.kappa_over_j.is_some_and(|k| k <= 0.0) {
        return Err(validation("model.kappa_over_j", "must be strictly positive"));
    }
    if source == ModelSource::Nominal && preset.is_none() && (model.kappa_over_j.is_none() || model.gc_over_j.is_none()) {
        return Err(validation("model.source", "nominal model needs a preset or explicit kappa_over_j and gc_over_j"));
    }

    let rs = raw.signal.unwrap_or_default();
    let default_flux = preset.map_or(TWO_PI * 5e6, |p| if p == PresetName::P2 { TWO_PI * 19e6 } else { TWO_PI * 5e6 });
    let signal = SignalConfig {
        omega_s_over_j: rs.omega_s_over_j.unwrap_or(-0.5),
        flux: quantity(&rs.flux, AngularFrequency)?.unwrap_or(default_flux),
        input_site: rs.input_site.unwrap_or(1),
    };
    if !signal.omega_s_over_j.is_finite() {
        return Err(validation("signal.omega_s_over_j", "must be finite"));
    }
    if signal.flux < 0.0 {
        return Err(validation("signal.flux", "must be non-negative"));
    }
    let n_final = model.n_sites.unwrap_or(circuit.n);
    if signal.input_site == 0 || signal.input_site > n_final {
        return Err(validation("signal.input_site", format!("must lie in 1..={n_final}")));
    }

    Ok(RunConfig { preset, seed: raw.seed.unwrap_or(DEFAULT_SEED), circuit, options, pump, model, signal })
}

/// Everything downstream commands need, derived from a configuration.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub effective_circuit: EffectiveCircuit,
    pub mean_field: MeanFieldSolution,
    /// Lattice parameters straight from the circuit.
    pub derived: EffectiveParams,
    /// Lattice parameters used for simulation, after model overrides.
    pub params: EffectiveParams,
    pub omega_s: f64,
    pub flux: f64,
    /// 0-based.
    pub input_site: usize,
}

impl RunConfig {
    pub fn from_preset(name: PresetName) -> Self {
        parse_config(&format!("preset = \"{name}\"\n")).expect("bundled presets are valid")
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        let ec = derive_effective_circuit(&self.circuit, self.options)?;
        let mf = solve_mean_field(&ec, self.pump)?;
        let derived = effective_params_from_meanfield(&ec, &mf);
        let j = derived.j;
        let mut p = match self.model.source {
            ModelSource::Circuit => derived,
            ModelSource::Nominal => {
                let (k, g) = self.preset.map(preset::nominal_ratios).unwrap_or((f64::NAN, f64::NAN));
                EffectiveParams::from_ratios(self.circuit.n, j, k, g, 1.0, 0.0, FRAC_PI_2)
            }
        };
        let m = &self.model;
        if let Some(n) = m.n_sites {
            p.n_sites = n;
        }
        let gs_ratio = m.gs_over_gc.unwrap_or(if p.g_c != 0.0 { p.g_s / p.g_c } else { 1.0 });
        if let Some(k) = m.kappa_over_j {
            p.kappa = k * j;
        }
        if let Some(g) = m.gc_over_j {
            p.g_c = g * j;
        }
        if m.gc_over_j.is_some() || m.gs_over_gc.is_some() {
            p.g_s = gs_ratio * p.g_c;
        }
        if let Some(d) = m.delta_over_j {
            p.delta = d * j;
        }
        if let Some(phi) = m.phi {
            p.phi = phi;
        }
        p.validate()?;
        Ok(ResolvedRun {
            effective_circuit: ec,
            mean_field: mf,
            derived,
            params: p,
            omega_s: self.signal.omega_s_over_j * j,
            flux: self.signal.flux,
            input_site: self.signal.input_site - 1,
        })
    }

    /// Canonical text form; `parse_config(&c.to_toml())` reproduces `c`.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        let q = |v: f64, d: Dimension| format!("\"{}\"", format_quantity(v, d));
        if let Some(p) = self.preset {
            let _ = writeln!(s, "preset = \"{p}\"");
        }
        let _ = writeln!(s, "seed = {}", self.seed);
        let c = &self.circuit;
        let _ = writeln!(s, "\n[circuit]");
        for (k, v, d) in [
            ("c_a", c.c_a, Dimension::Capacitance),
            ("c_a_prime", c.c_a_prime, Dimension::Capacitance),
            ("c_ab", c.c_ab, Dimension::Capacitance),
            ("c_aw", c.c_aw, Dimension::Capacitance),
            ("c_b", c.c_b, Dimension::Capacitance),
            ("c_b_prime", c.c_b_prime, Dimension::Capacitance),
            ("c_bw", c.c_bw, Dimension::Capacitance),
            ("l_b", c.l_b, Dimension::Inductance),
            ("e_j", c.e_j, Dimension::Energy),
            ("e_j_prime", c.e_j_prime, Dimension::Energy),
            ("z0", c.z0, Dimension::Resistance),
            ("p_b", c.p_b, Dimension::Power),
        ] {
            let _ = writeln!(s, "{k} = {}", q(v, d));
        }
        let _ = writeln!(s, "m = {}\nn = {}", c.m, c.n);

        let _ = writeln!(s, "\n[circuit_options]");
        let _ = writeln!(s, "kerr_shift = {}", self.options.kerr_shift);
        let _ = writeln!(s, "include_c_ab_in_c_a_eq = {}", self.options.include_c_ab_in_c_a_eq);
        match self.pump {
            PumpDetuning::Matched => {
                let _ = writeln!(s, "pump_detuning = \"matched\"");
            }
            PumpDetuning::Circuit(b) => {
                let _ = writeln!(s, "pump_detuning = \"circuit\"");
                if let BranchSelection::Index(i) = b {
                    let _ = writeln!(s, "branch = {i}");
                }
            }
        }

        let m = &self.model;
        let _ = writeln!(s, "\n[model]");
        let source = match m.source {
            ModelSource::Circuit => "circuit",
            ModelSource::Nominal => "nominal",
        };
        let _ = writeln!(s, "source = \"{source}\"");
        if let Some(n) = m.n_sites {
            let _ = writeln!(s, "n_sites = {n}");
        }
        for (k, v) in [
            ("kappa_over_j", m.kappa_over_j),
            ("gc_over_j", m.gc_over_j),
            ("gs_over_gc", m.gs_over_gc),
            ("delta_over_j", m.delta_over_j),
            ("phi", m.phi),
        ] {
            if let Some(v) = v {
                let _ = writeln!(s, "{k} = {v:?}");
            }
        }

        let _ = writeln!(s, "\n[signal]");
        let _ = writeln!(s, "omega_s_over_j = {:?}", self.signal.omega_s_over_j);
        let _ = writeln!(s, "flux = {}", q(self.signal.flux, Dimension::AngularFrequency));
        let _ = writeln!(s, "input_site = {}", self.signal.input_site);
        s
    }

    /// SHA-256 of the canonical text form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_preset_gives_quoted_operating_point() {
        let cfg = parse_config("preset = \"P1\"\n").unwrap();
        let run = cfg.resolve().unwrap();
        assert!((run.params.kappa_over_j() - 2.6).abs() < 0.13);
        assert!((run.params.gc_over_j() - 0.6).abs() < 0.03);
        assert!((run.derived.kappa_over_j() - 2.6).abs() < 0.13);
        assert!((run.derived.gc_over_j() - 0.6).abs() < 0.03);
        assert_eq!(run.params.n_sites, 8);
    }

    #[test]
    fn site_override() {
        let cfg = parse_config("preset = \"P1\"\n[model]\nn_sites = 20\n").unwrap();
        let run = cfg.resolve().unwrap();
        assert_eq!(run.params.n_sites, 20);
        assert!((run.omega_s / run.params.j + 0.5).abs() < 1e-15);
    }

    #[test]
    fn malformed_unit_reports_position() {
        let text = "preset = \"P1\"\n[circuit]\nc_a = \"1790 fX\"\n";
        match parse_config(text) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, 7);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(parse_config("preset = \"P1\"\nbogus = 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_config("[circuit]\nc_x = \"1 fF\"\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn missing_circuit_field_names_it() {
        match parse_config("[circuit]\nc_a = \"1 fF\"\n") {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "circuit.c_a_prime"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_positive_capacitance_is_a_validation_error() {
        match parse_config("preset = \"P2\"\n[circuit]\nc_aw = \"-3 fF\"\n") {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "circuit.c_aw"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn emitted_config_round_trips() {
        let text = "preset = \"P1p\"\nseed = 11\n[circuit]\nc_a = \"80 fF\"\np_b = \"-70 dBm\"\n\
                    [circuit_options]\npump_detuning = \"circuit\"\nbranch = 0\n\
                    [model]\nn_sites = 12\nkappa_over_j = 2.5\nphi = 1.2\n[signal]\nflux = \"3 MHz\"\ninput_site = 2\n";
        let cfg = parse_config(text).unwrap();
        let again = parse_config(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        for p in PresetName::ALL {
            let c = RunConfig::from_preset(p);
            assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::from_preset(PresetName::P1);
        let mut b = a.clone();
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
