use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn topamp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topamp"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env_remove("TOPAMP_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn response_schema_and_overwrite_protection() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--preset", "P1p", "response", "--omega-range=-1,1", "--points", "21"];
    ok(&topamp(dir.path(), &args));
    let csv = dir.path().join("response.csv");
    assert_eq!(header(&csv), "omega_over_J,gain_N_db,rev_gain_N_db,n_add_N,asym_db");
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 22);
    let first = fs::read(&csv).unwrap();

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("response.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["j_over_2pi_mhz"].as_f64().unwrap() > 100.0);

    let again = topamp(dir.path(), &args);
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));

    let mut forced = args.to_vec();
    forced.push("--force");
    ok(&topamp(dir.path(), &forced));
    assert_eq!(fs::read(&csv).unwrap(), first);
}

#[test]
fn meanfield_prints_json_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = topamp(dir.path(), &["--preset", "P1", "meanfield"]);
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    let json_end = text.find("\n}\n").unwrap() + 2;
    let v: serde_json::Value = serde_json::from_str(&text[..json_end]).unwrap();
    let alpha_sq = v["alpha_sq"].as_f64().unwrap();
    assert!((alpha_sq - 41.0).abs() / 41.0 < 0.05);
    assert!(text[json_end..].contains("quantity"));
    assert!(dir.path().join("meanfield.json").exists());
}

#[test]
fn malformed_config_fails_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "preset = \"P1\"\n[circuit]\nc_a = \"1790 fX\"\n").unwrap();
    let out = topamp(dir.path(), &["--config", cfg.to_str().unwrap(), "meanfield"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains('3'), "{err}");
    assert!(!dir.path().join("meanfield.json").exists());
}

#[test]
fn config_overrides_reach_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("p1.toml");
    fs::write(&cfg, "preset = \"P1\"\n[model]\nn_sites = 20\n").unwrap();
    ok(&topamp(dir.path(), &["--config", cfg.to_str().unwrap(), "fit-zeta", "--omega=-0.5"]));
    let text = fs::read_to_string(dir.path().join("fit_zeta.csv")).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|f| f.parse().unwrap()).collect();
    assert!((row[1] - 0.22).abs() < 0.05 && (row[2] + 0.29).abs() < 0.05, "{row:?}");
    assert_eq!((row[4], row[5]), (1.0, 20.0));
}

#[test]
fn spectrum_matrix_and_occupation_schemas() {
    let dir = tempfile::tempdir().unwrap();
    ok(&topamp(dir.path(), &["--preset", "P3", "spectrum", "--points", "11"]));
    assert_eq!(header(&dir.path().join("spectrum.csv")), "omega_over_J,E0,E1,E2,E3,E4,E5");

    ok(&topamp(dir.path(), &["--preset", "P3", "matrix"]));
    let m = fs::read_to_string(dir.path().join("matrix.csv")).unwrap();
    assert_eq!(m.lines().next().unwrap(), "row,col,re,im");
    assert_eq!(m.lines().count(), 1 + 8 * 8);

    ok(&topamp(dir.path(), &["--preset", "P3", "occupation", "--plot"]));
    assert_eq!(header(&dir.path().join("occupation.csv")), "site,max_occ,coherent_part,noise_part");
    assert!(fs::read_to_string(dir.path().join("occupation.svg")).unwrap().starts_with("<svg"));

    ok(&topamp(dir.path(), &["--preset", "P3", "circuit-map"]));
    assert!(fs::read_to_string(dir.path().join("circuit_map.csv")).unwrap().contains("\nk_c,"));
}

#[test]
fn phase_diagram_resumes_to_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--preset", "P1", "phase-diagram", "--kappa-range", "1,6", "--gc-range", "0.1,2", "--resolution", "4x3", "--plot"];
    ok(&topamp(dir.path(), &args));
    let csv = dir.path().join("phase_diagram.csv");
    assert_eq!(header(&csv), "kappa_over_J,gc_over_J,class,re_zeta,e0,gap");
    let first = fs::read(&csv).unwrap();

    let svg = dir.path().join("phase_diagram.svg");
    fs::remove_file(&svg).unwrap();
    let out = topamp(dir.path(), &args);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("0 cells computed, 12 reused"));
    assert_eq!(fs::read(&csv).unwrap(), first);
    assert!(svg.exists());

    // A different grid must not silently replace the file.
    let other = topamp(dir.path(), &["--preset", "P1", "phase-diagram", "--resolution", "2"]);
    assert!(!other.status.success());
}

#[test]
fn disorder_output_is_independent_of_worker_count() {
    let run = |workers: &str| {
        let dir = tempfile::tempdir().unwrap();
        let args = ["--preset", "P1p", "--workers", workers, "disorder", "--param", "gc", "--sigma-list", "0,0.1", "--realizations", "12"];
        ok(&topamp(dir.path(), &args));
        fs::read_to_string(dir.path().join("disorder_gc.csv")).unwrap()
    };
    let one = run("1");
    assert_eq!(one, run("3"));
    let head = one.lines().next().unwrap();
    for col in ["sigma", "mean_gain_db", "mean_rev_db", "mean_wtop", "mean_nadd", "p_unstable", "stderr_gain_db", "gain_db_avg"] {
        assert!(head.split(',').any(|c| c == col), "{col} missing from {head}");
    }
}

#[test]
fn plot_subcommand_renders_and_rejects_bad_schema() {
    let dir = tempfile::tempdir().unwrap();
    ok(&topamp(dir.path(), &["--preset", "P1p", "response", "--points", "11"]));
    let input = dir.path().join("response.csv");
    let svg = dir.path().join("r.svg");
    let args = ["plot", "--input", input.to_str().unwrap(), "--kind", "line", "--x", "omega_over_J", "--y", "gain_N_db", "--y2", "n_add_N"];
    let mut with_out = args.to_vec();
    with_out.extend(["--output", svg.to_str().unwrap()]);
    ok(&topamp(dir.path(), &with_out));
    assert!(fs::read_to_string(&svg).unwrap().contains("<polyline"));

    let bad = dir.path().join("bad.svg");
    let out = topamp(
        dir.path(),
        &[
            "plot",
            "--input",
            input.to_str().unwrap(),
            "--kind",
            "heatmap",
            "--x",
            "omega_over_J",
            "--y",
            "nope",
            "--output",
            bad.to_str().unwrap(),
        ],
    );
    assert!(!out.status.success());
    assert!(!bad.exists());
}

#[test]
fn bad_arguments_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!topamp(dir.path(), &["--preset", "P9", "meanfield"]).status.success());
    assert!(!topamp(dir.path(), &["disorder", "--param", "mass", "--sigma-list", "0.1"]).status.success());
    assert!(!topamp(dir.path(), &["--workers", "0", "meanfield"]).status.success());
}
