//! Bundled operating points of the device.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::{derive_effective_circuit, CircuitOptions, CircuitParams, EffectiveCircuit};
use crate::error::Result;
use crate::meanfield::{effective_params_from_meanfield, solve_mean_field, EffectiveParams, MeanFieldSolution, PumpDetuning};
use crate::units::{dbm_to_watts, energy_from_hz, TWO_PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PresetName {
    P1,
    P1p,
    P2,
    P3,
}

impl PresetName {
    pub const ALL: [PresetName; 4] = [PresetName::P1, PresetName::P1p, PresetName::P2, PresetName::P3];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::P1 => "P1",
            PresetName::P1p => "P1p",
            PresetName::P2 => "P2",
            PresetName::P3 => "P3",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "P1" | "p1" => Ok(PresetName::P1),
            "P1p" | "p1p" | "P1'" | "P1′" => Ok(PresetName::P1p),
            "P2" | "p2" => Ok(PresetName::P2),
            "P3" | "p3" => Ok(PresetName::P3),
            other => Err(format!("unknown preset `{other}` (expected P1, P1p, P2, P3)")),
        }
    }
}

/// Row of the operating-point table: capacitances in fF, junction energy as
/// a frequency in THz, pump power in dBm.
struct Row {
    n: usize,
    m: u32,
    c_a: f64,
    c_a_prime: f64,
    e_j_thz: f64,
    c_aw: f64,
    c_ab: f64,
    c_b: f64,
    p_b_dbm: f64,
    kappa_over_j: f64,
    gc_over_j: f64,
    signal_flux_mhz: f64,
}

fn row(name: PresetName) -> Row {
    match name {
        PresetName::P1 => Row {
            n: 8,
            m: 1,
            c_a: 1790.0,
            c_a_prime: 1020.0,
            e_j_thz: 1.00,
            c_aw: 386.0,
            c_ab: 6.26,
            c_b: 388.0,
            p_b_dbm: -74.8,
            kappa_over_j: 2.6,
            gc_over_j: 0.6,
            signal_flux_mhz: 5.0,
        },
        PresetName::P1p => Row {
            n: 10,
            m: 7,
            c_a: 76.2,
            c_a_prime: 89.3,
            e_j_thz: 0.623,
            c_aw: 113.0,
            c_ab: 1.85,
            c_b: 392.0,
            p_b_dbm: -68.5,
            kappa_over_j: 2.6,
            gc_over_j: 0.6,
            signal_flux_mhz: 5.0,
        },
        PresetName::P2 => Row {
            n: 27,
            m: 32,
            c_a: 48.6,
            c_a_prime: 108.0,
            e_j_thz: 2.85,
            c_aw: 103.0,
            c_ab: 1.85,
            c_b: 392.0,
            p_b_dbm: -55.8,
            kappa_over_j: 0.9,
            gc_over_j: 0.25,
            signal_flux_mhz: 19.0,
        },
        PresetName::P3 => Row {
            n: 4,
            m: 22,
            c_a: 106.0,
            c_a_prime: 84.4,
            e_j_thz: 1.96,
            c_aw: 93.5,
            c_ab: 1.85,
            c_b: 392.0,
            p_b_dbm: -59.5,
            kappa_over_j: 2.8,
            gc_over_j: 0.95,
            signal_flux_mhz: 5.0,
        },
    }
}

/// Auxiliary-array elements shared by all operating points.
pub const AUX_L_B: f64 = 0.995e-9;
pub const AUX_C_B_PRIME: f64 = 1.99e-15;
pub const AUX_C_BW: f64 = 39.8e-15;
pub const LINE_IMPEDANCE: f64 = 50.0;

pub fn circuit(name: PresetName) -> CircuitParams {
    let r = row(name);
    let e_j = energy_from_hz(r.e_j_thz * 1e12);
    CircuitParams {
        c_a: r.c_a * 1e-15,
        c_a_prime: r.c_a_prime * 1e-15,
        c_ab: r.c_ab * 1e-15,
        c_aw: r.c_aw * 1e-15,
        c_b: r.c_b * 1e-15,
        c_b_prime: AUX_C_B_PRIME,
        c_bw: AUX_C_BW,
        l_b: AUX_L_B,
        e_j,
        e_j_prime: e_j / 2.0,
        m: r.m,
        z0: LINE_IMPEDANCE,
        p_b: dbm_to_watts(r.p_b_dbm),
        n: r.n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalDefaults {
    /// Relative to the pump, rad/s.
    pub omega_s: f64,
    /// Photon flux `|alpha_s|^2`, 1/s.
    pub flux: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: PresetName,
    pub circuit: CircuitParams,
    pub effective_circuit: EffectiveCircuit,
    pub mean_field: MeanFieldSolution,
    /// Lattice parameters derived from the circuit.
    pub derived: EffectiveParams,
    /// The quoted operating point (`Δ = 0`, `φ = π/2`, `g_s = g_c`) on the
    /// derived hopping scale.
    pub nominal: EffectiveParams,
    pub signal: SignalDefaults,
}

impl Preset {
    pub fn load(name: PresetName) -> Result<Self> {
        Self::from_circuit(name, circuit(name), CircuitOptions::default(), PumpDetuning::Matched)
    }

    /// Re-derive the operating point for a modified circuit.
    pub fn from_circuit(name: PresetName, circuit: CircuitParams, opts: CircuitOptions, pump: PumpDetuning) -> Result<Self> {
        let r = row(name);
        let ec = derive_effective_circuit(&circuit, opts)?;
        let mf = solve_mean_field(&ec, pump)?;
        let derived = effective_params_from_meanfield(&ec, &mf);
        let nominal = EffectiveParams::from_ratios(circuit.n, derived.j, r.kappa_over_j, r.gc_over_j, 1.0, 0.0, FRAC_PI_2);
        Ok(Self {
            name,
            circuit,
            effective_circuit: ec,
            mean_field: mf,
            derived,
            signal: SignalDefaults { omega_s: -0.5 * derived.j, flux: TWO_PI * r.signal_flux_mhz * 1e6 },
            nominal,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.circuit.n
    }
}

/// Quoted `(κ/J, g_c/J)` of an operating point.
pub fn nominal_ratios(name: PresetName) -> (f64, f64) {
    let r = row(name);
    (r.kappa_over_j, r.gc_over_j)
}
