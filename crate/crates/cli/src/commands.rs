use std::path::Path;

use serde_json::json;

use topamp::config::{load_config, ResolvedRun, RunConfig};
use topamp::dataset::{check_writable, emit_dataset, write_file, Cell, Dataset, RunManifest};
use topamp::lattice::build_hnh;
use topamp::meanfield::EffectiveParams;
use topamp::plot::{render_plot, PlotKind};
use topamp::preset::PresetName;
use topamp::response::{occupation_profile, response_sweep, NoiseIntegration, SignalSpec};
use topamp::sweep::{disorder_sweep, instability_onset, run_phase_diagram, DisorderConfig, PhaseDiagramConfig};
use topamp::topology::{linspace, localization_length, svd_spectrum};
use topamp::units::{to_db, to_mhz, H_PLANCK};
use topamp::{Error, Result};

use crate::{Command, Global, Kind};

const SPECTRUM_BRANCHES: usize = 6;

struct Context<'a> {
    global: &'a Global,
    config: RunConfig,
    run: ResolvedRun,
}

impl Context<'_> {
    fn manifest(&self, command: &str) -> RunManifest {
        let mut m = RunManifest::new(command, &self.config.hash(), self.config.seed);
        m.j_over_2pi_mhz = Some(to_mhz(self.run.params.j));
        m
    }

    fn params(&self) -> &EffectiveParams {
        &self.run.params
    }

    fn emit(&self, ds: &Dataset, stem: &str, command: &str) -> Result<()> {
        let files = emit_dataset(ds, &self.global.out_dir, stem, &self.manifest(command), self.global.force)?;
        report(&files);
        Ok(())
    }

    fn svg(&self, ds: &Dataset, kind: &PlotKind, stem: &str, title: &str) -> Result<()> {
        let path = self.global.out_dir.join(format!("{stem}.svg"));
        write_file(&path, render_plot(ds, kind, title)?.as_bytes(), self.global.force)?;
        report(&[path]);
        Ok(())
    }
}

fn report(files: &[impl AsRef<Path>]) {
    for f in files {
        eprintln!("wrote {}", f.as_ref().display());
    }
}

fn load(global: &Global) -> Result<RunConfig> {
    let mut config = match &global.config {
        Some(path) => load_config(path)?,
        None => RunConfig::from_preset(global.preset.unwrap_or(PresetName::P1)),
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    Ok(config)
}

pub fn run(global: &Global, command: &Command) -> Result<()> {
    // Plotting works on files alone and needs no model.
    if let Command::Plot { input, kind, x, y, y2, value, output } = command {
        let ds = topamp::dataset::read_csv(input)?;
        let kind = match kind {
            Kind::Line => PlotKind::Line { x: x.clone(), y: y.clone(), y2: y2.clone() },
            Kind::Heatmap => PlotKind::Heatmap { x: x.clone(), y: y[0].clone(), value: value.clone() },
        };
        let title = input.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        write_file(output, render_plot(&ds, &kind, &title)?.as_bytes(), global.force)?;
        report(&[output]);
        return Ok(());
    }

    let config = load(global)?;
    let run = config.resolve()?;
    let ctx = Context { global, config, run };
    match command {
        Command::CircuitMap => circuit_map(&ctx),
        Command::Meanfield => meanfield(&ctx),
        Command::Spectrum { omega_range, points } => spectrum(&ctx, *omega_range, *points),
        Command::Response { omega_range, points, plot } => response(&ctx, *omega_range, *points, *plot),
        Command::Occupation { plot } => occupation(&ctx, *plot),
        Command::FitZeta { omega, sites } => fit_zeta(&ctx, *omega, sites.as_deref()),
        Command::PhaseDiagram { kappa_range, gc_range, resolution, omega, plot } => {
            phase_diagram(&ctx, *kappa_range, *gc_range, *resolution, *omega, *plot)
        }
        Command::Disorder { param, sigma_list, realizations, omega_s, no_bandwidth, onset, onset_threshold } => {
            let mut cfg = DisorderConfig::new(*ctx.params(), *param, sigma_list.clone(), *realizations, ctx.config.seed);
            cfg.omega_s = omega_s.map_or(ctx.run.omega_s, |w| w * ctx.params().j);
            cfg.bandwidth = !no_bandwidth;
            disorder(&ctx, &cfg, onset.then_some(*onset_threshold))
        }
        Command::Matrix => matrix(&ctx),
        Command::Plot { .. } => unreachable!("handled above"),
    }
}

fn grid(p: &EffectiveParams, (lo, hi): (f64, f64), points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::InvalidParameter { name: "points", reason: "need at least 2".into() });
    }
    Ok(linspace(lo * p.j, hi * p.j, points))
}

fn circuit_map(ctx: &Context) -> Result<()> {
    let ec = &ctx.run.effective_circuit;
    let mut ds = Dataset::new(&["quantity", "value", "unit", "over_2pi_mhz"]);
    let rates = [
        ("omega_a", ec.omega_a),
        ("omega_b", ec.omega_b),
        ("j_a", ec.j_a),
        ("j_b", ec.j_b),
        ("j_ab", ec.j_ab),
        ("k_s", ec.k_s),
        ("k_c", ec.k_c),
        ("kappa", ec.kappa),
        ("gamma", ec.gamma),
        ("kappa_nl", ec.kappa_nl),
        ("omega_a_drive", ec.omega_a_drive),
        ("omega_b_drive", ec.omega_b_drive),
    ];
    for (name, w) in rates {
        ds.push(vec![name.into(), w.into(), "rad/s".into(), to_mhz(w).into()])?;
    }
    ds.push(vec!["e_c".into(), ec.e_c.into(), "J".into(), (ec.e_c / H_PLANCK / 1e6).into()])?;
    let statics = [
        ("c_a_eq", ec.c_a_eq, "F"),
        ("c_b_eq", ec.c_b_eq, "F"),
        ("l_a_eq", ec.l_a_eq, "H"),
        ("l_j", ec.l_j, "H"),
        ("l_j_prime", ec.l_j_prime, "H"),
        ("z_a", ec.z_a, "ohm"),
        ("z_b", ec.z_b, "ohm"),
        ("phi_zpf", ec.phi_zpf, "Wb"),
        ("matching_ratio", ec.diagnostics.matching_ratio, ""),
    ];
    for (name, v, unit) in statics {
        ds.push(vec![name.into(), v.into(), unit.into(), f64::NAN.into()])?;
    }
    for row in &ds.rows {
        println!("{:<16} {:>24} {:<6} {}", row[0].render(), row[1].render(), row[2].render(), row[3].render());
    }
    ctx.emit(&ds, "circuit_map", "circuit-map")
}

fn meanfield(ctx: &Context) -> Result<()> {
    let mf = &ctx.run.mean_field;
    let p = &ctx.run.derived;
    let summary = json!({
        "xi": mf.xi,
        "n": mf.n,
        "alpha_sq": mf.alpha_sq,
        "delta_over_2pi_mhz": to_mhz(p.delta),
        "j_over_2pi_mhz": to_mhz(p.j),
        "gs_over_2pi_mhz": to_mhz(p.g_s),
        "gc_over_2pi_mhz": to_mhz(p.g_c),
        "kappa_over_j": p.kappa_over_j(),
        "gc_over_j": p.gc_over_j(),
    });
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    print!("{text}");
    println!();
    println!("{:<14} {:>14}", "quantity", "value");
    for (k, v) in summary.as_object().expect("object literal") {
        println!("{:<14} {:>14.6}", k, v.as_f64().unwrap_or(f64::NAN));
    }

    let dir = &ctx.global.out_dir;
    let path = dir.join("meanfield.json");
    let man_path = topamp::dataset::manifest_path(dir, "meanfield");
    check_writable(&[path.clone(), man_path.clone()], ctx.global.force)?;
    write_file(&path, text.as_bytes(), true)?;
    let mut m = ctx.manifest("meanfield");
    m.outputs = vec!["meanfield.json".into(), "meanfield.manifest.json".into()];
    write_file(&man_path, (serde_json::to_string_pretty(&m)? + "\n").as_bytes(), true)?;
    report(&[path, man_path]);
    Ok(())
}

fn spectrum(ctx: &Context, range: (f64, f64), points: usize) -> Result<()> {
    let p = ctx.params();
    let h = build_hnh(p, None)?;
    let mut cols = vec!["omega_over_J".to_string()];
    cols.extend((0..SPECTRUM_BRANCHES).map(|k| format!("E{k}")));
    let mut ds = Dataset { columns: cols, rows: Vec::new() };
    for w in grid(p, range, points)? {
        let svd = svd_spectrum(&h, w)?;
        let mut row = vec![Cell::Num(w / p.j)];
        row.extend((0..SPECTRUM_BRANCHES).map(|k| Cell::Num(svd.singular_values.get(k).map_or(f64::NAN, |s| s / p.j))));
        ds.push(row)?;
    }
    ctx.emit(&ds, "spectrum", "spectrum")
}

fn response(ctx: &Context, range: (f64, f64), points: usize, plot: bool) -> Result<()> {
    let p = ctx.params();
    let h = build_hnh(p, None)?;
    let sweep = response_sweep(&h, &grid(p, range, points)?)?;
    let mut ds = Dataset::new(&["omega_over_J", "gain_N_db", "rev_gain_N_db", "n_add_N", "asym_db"]);
    for r in &sweep {
        ds.push(vec![
            (r.omega / p.j).into(),
            to_db(r.gain).into(),
            to_db(r.reverse_gain).into(),
            r.added_noise.into(),
            to_db(r.noise_asymmetry).into(),
        ])?;
    }
    ctx.emit(&ds, "response", "response")?;
    if plot {
        let kind =
            PlotKind::Line { x: "omega_over_J".into(), y: vec!["gain_N_db".into(), "rev_gain_N_db".into()], y2: vec!["n_add_N".into()] };
        ctx.svg(&ds, &kind, "response", "gain and added noise")?;
    }
    Ok(())
}

fn occupation(ctx: &Context, plot: bool) -> Result<()> {
    let p = ctx.params();
    let h = build_hnh(p, None)?;
    let signal = SignalSpec { alpha_s: ctx.run.flux.sqrt().into(), omega_s: ctx.run.omega_s, input_site: ctx.run.input_site };
    let profile = occupation_profile(&h, &signal, &NoiseIntegration::default())?;
    let mut ds = Dataset::new(&["site", "max_occ", "coherent_part", "noise_part"]);
    for o in &profile {
        ds.push(vec![(o.site + 1).into(), o.total.into(), o.coherent.into(), o.noise.into()])?;
    }
    if let Some(last) = profile.last() {
        println!("saturation ratio at the last site: {:.6e}", last.saturation_ratio(ctx.run.mean_field.alpha_sq));
    }
    ctx.emit(&ds, "occupation", "occupation")?;
    if plot {
        let kind = PlotKind::Line { x: "site".into(), y: vec!["max_occ".into(), "coherent_part".into(), "noise_part".into()], y2: vec![] };
        ctx.svg(&ds, &kind, "occupation", "peak occupation")?;
    }
    Ok(())
}

fn parse_sites(text: &str) -> Result<(usize, usize)> {
    let bad = || Error::InvalidParameter { name: "sites", reason: format!("expected `first,last`, got {text:?}") };
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn fit_zeta(ctx: &Context, omega: Option<f64>, sites: Option<&str>) -> Result<()> {
    let p = ctx.params();
    let h = build_hnh(p, None)?;
    let w = omega.map_or(ctx.run.omega_s, |x| x * p.j);
    let fit = localization_length(&h, w, sites.map(parse_sites).transpose()?)?;
    println!("zeta = {:.6} {:+.6}i  (r^2 = {:.6})", fit.zeta.re, fit.zeta.im, fit.r_squared);
    let mut ds = Dataset::new(&["omega_over_J", "re_zeta", "im_zeta", "r_squared", "first_site", "last_site"]);
    ds.push(vec![(w / p.j).into(), fit.zeta.re.into(), fit.zeta.im.into(), fit.r_squared.into(), fit.sites.0.into(), fit.sites.1.into()])?;
    ctx.emit(&ds, "fit_zeta", "fit-zeta")
}

fn phase_diagram(
    ctx: &Context,
    kappa_range: (f64, f64),
    gc_range: (f64, f64),
    resolution: (usize, usize),
    omega: Option<f64>,
    plot: bool,
) -> Result<()> {
    let p = ctx.params();
    let cfg = PhaseDiagramConfig { base: *p, kappa_range, gc_range, resolution, omega: omega.map_or(ctx.run.omega_s, |x| x * p.j) };
    let out = run_phase_diagram(&cfg, &ctx.global.out_dir, "phase_diagram", &ctx.manifest("phase-diagram"), ctx.global.force)?;
    eprintln!("{} cells computed, {} reused", out.computed, out.reused);
    report(&out.files);
    if plot {
        let kind = PlotKind::Heatmap { x: "kappa_over_J".into(), y: "gc_over_J".into(), value: "re_zeta".into() };
        ctx.svg(&out.dataset, &kind, "phase_diagram", "Re zeta")?;
    }
    Ok(())
}

fn disorder(ctx: &Context, cfg: &DisorderConfig, onset_threshold: Option<f64>) -> Result<()> {
    let summaries = disorder_sweep(cfg)?;
    let mut ds = Dataset::new(&[
        "sigma",
        "mean_gain_db",
        "mean_rev_db",
        "mean_wtop",
        "mean_nadd",
        "p_unstable",
        "stderr_gain_db",
        "stderr_rev_db",
        "stderr_wtop",
        "stderr_nadd",
        "gain_db_avg",
        "rev_db_avg",
        "stderr_gain_db_avg",
        "stderr_rev_db_avg",
        "n_stable",
    ]);
    for s in &summaries {
        let mut row = vec![Cell::Num(s.sigma)];
        match &s.means {
            Some(m) => {
                let (g, r) = (m.gain_db(), m.reverse_gain_db());
                row.extend(
                    [
                        g.mean,
                        r.mean,
                        m.w_top.mean,
                        m.added_noise.mean,
                        s.p_unstable,
                        g.stderr,
                        r.stderr,
                        m.w_top.stderr,
                        m.added_noise.stderr,
                    ]
                    .map(Cell::Num),
                );
                row.extend(
                    [m.gain_db_avg.mean, m.reverse_gain_db_avg.mean, m.gain_db_avg.stderr, m.reverse_gain_db_avg.stderr].map(Cell::Num),
                );
            }
            None => {
                row.extend([f64::NAN; 4].map(Cell::Num));
                row.push(Cell::Num(s.p_unstable));
                row.extend([f64::NAN; 8].map(Cell::Num));
            }
        }
        row.push(s.n_stable.into());
        ds.push(row)?;
    }
    ctx.emit(&ds, &format!("disorder_{}", cfg.family), "disorder")?;

    if let Some(threshold) = onset_threshold {
        let mut schedule = cfg.sigmas.clone();
        schedule.sort_by(f64::total_cmp);
        match instability_onset(&cfg.base, cfg.family, &schedule, cfg.n_realizations, cfg.master_seed, threshold) {
            Ok(sigma) => println!("instability onset: sigma = {sigma}"),
            Err(Error::NoOnset) => println!("instability onset: none within the sigma list"),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

fn matrix(ctx: &Context) -> Result<()> {
    let h = build_hnh(ctx.params(), None)?;
    let mut ds = Dataset::new(&["row", "col", "re", "im"]);
    for r in 0..h.dim() {
        for c in 0..h.dim() {
            let z = h.entries[(r, c)];
            ds.push(vec![r.into(), c.into(), z.re.into(), z.im.into()])?;
        }
    }
    ctx.emit(&ds, "matrix", "matrix")
}
