use topamp::lattice::build_hnh;
use topamp::preset::{Preset, PresetName};
use topamp::response::gains;
use topamp::sweep::{disorder_sweep, instability_onset, DisorderConfig, DisorderFamily};
use topamp::Error;

fn onset(name: PresetName, family: DisorderFamily) -> f64 {
    let base = Preset::load(name).unwrap().nominal;
    let schedule: Vec<f64> = (1..=20).map(|k| 0.05 * k as f64).collect();
    match instability_onset(&base, family, &schedule, 200, 11, 0.01) {
        Ok(s) => s,
        Err(Error::NoOnset) => f64::INFINITY,
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn phase_disorder_destabilizes_p3_long_before_p1_prime() {
    let p3 = onset(PresetName::P3, DisorderFamily::Phi);
    let p1p = onset(PresetName::P1p, DisorderFamily::Phi);
    assert!(p3 <= 0.5, "P3 onset {p3}");
    assert!(p1p > 2.0 * p3, "P1' onset {p1p} vs P3 {p3}");
}

#[test]
fn zero_disorder_reproduces_clean_values_for_every_family() {
    let base = Preset::load(PresetName::P1p).unwrap().nominal;
    let h = build_hnh(&base, None).unwrap();
    let clean = gains(&h, -0.5 * base.j, 0, base.n_sites - 1).unwrap();
    for family in DisorderFamily::ALL {
        let mut cfg = DisorderConfig::new(base, family, vec![0.0], 8, 3);
        cfg.bandwidth = false;
        let s = &disorder_sweep(&cfg).unwrap()[0];
        let m = s.require_means().unwrap();
        assert_eq!(s.p_unstable, 0.0);
        assert!((m.gain.mean - clean.forward).abs() <= 1e-12 * clean.forward);
        assert!((m.reverse_gain.mean - clean.reverse).abs() <= 1e-12 * clean.reverse);
        assert!(m.gain.stderr <= 1e-9 * clean.forward);
    }
}
