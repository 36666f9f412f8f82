use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use topamp::preset::PresetName;
use topamp::sweep::{with_workers, DisorderFamily};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "topamp", version, about = "Directional topological amplifier simulations")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Run configuration file (TOML with unit-suffixed quantities).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in operating point, used when no config is given.
    #[arg(long, global = true)]
    preset: Option<PresetName>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Replace existing output files.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads; defaults to all available cores.
    #[arg(long, global = true, env = "TOPAMP_WORKERS")]
    workers: Option<usize>,
}

/// `lo,hi` with either bound possibly negative.
fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{lo}: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{hi}: {e}"))?;
    if !(lo < hi) {
        return Err(format!("empty range {lo},{hi}"));
    }
    Ok((lo, hi))
}

/// `40` or `40x30` (kappa points x g_c points).
fn parse_resolution(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t}: {e}"));
    match s.split_once(['x', 'X']) {
        Some((a, b)) => Ok((parse(a)?, parse(b)?)),
        None => parse(s).map(|n| (n, n)),
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Line,
    Heatmap,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Circuit-to-mode mapping: frequencies, couplings, Kerr and decay rates.
    CircuitMap,
    /// Pump mean field and the resulting lattice parameters.
    Meanfield,
    /// Lowest singular values of omega - H versus frequency.
    Spectrum {
        /// Frequency window in units of J.
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true, default_value = "-3,3")]
        omega_range: (f64, f64),
        #[arg(long, default_value_t = 601)]
        points: usize,
    },
    /// Gain, reverse gain, added noise and noise asymmetry at the last site.
    Response {
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true, default_value = "-3,3")]
        omega_range: (f64, f64),
        #[arg(long, default_value_t = 241)]
        points: usize,
        /// Also write an SVG line plot.
        #[arg(long)]
        plot: bool,
    },
    /// Peak photon number per site for the configured signal.
    Occupation {
        #[arg(long)]
        plot: bool,
    },
    /// Inverse localization length from the growth of the Green function.
    FitZeta {
        /// Frequency in units of J; defaults to the configured signal.
        #[arg(long, allow_hyphen_values = true)]
        omega: Option<f64>,
        /// Inclusive 1-based site range, e.g. `2,15`.
        #[arg(long)]
        sites: Option<String>,
    },
    /// Classification over a (kappa/J, g_c/J) grid; resumable.
    PhaseDiagram {
        #[arg(long, value_parser = parse_range, default_value = "0.5,8")]
        kappa_range: (f64, f64),
        #[arg(long, value_parser = parse_range, default_value = "0,2.5")]
        gc_range: (f64, f64),
        #[arg(long, value_parser = parse_resolution, default_value = "40")]
        resolution: (usize, usize),
        #[arg(long, allow_hyphen_values = true)]
        omega: Option<f64>,
        /// Also write an SVG heat map of Re zeta.
        #[arg(long)]
        plot: bool,
    },
    /// Monte Carlo disorder averages.
    Disorder {
        #[arg(long)]
        param: DisorderFamily,
        /// Comma-separated relative disorder strengths.
        #[arg(long, value_delimiter = ',', required = true)]
        sigma_list: Vec<f64>,
        #[arg(long, default_value_t = 500)]
        realizations: usize,
        /// Signal frequency in units of J.
        #[arg(long, allow_hyphen_values = true)]
        omega_s: Option<f64>,
        /// Skip the topological-window estimate per realization.
        #[arg(long)]
        no_bandwidth: bool,
        /// Also report the first sigma whose unstable fraction exceeds the threshold.
        #[arg(long)]
        onset: bool,
        #[arg(long, default_value_t = 0.01)]
        onset_threshold: f64,
    },
    /// Render a CSV produced by another subcommand as SVG.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        x: String,
        /// Left-axis columns (line) or the vertical coordinate (heatmap).
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        y2: Vec<String>,
        /// Color column for heat maps.
        #[arg(long, default_value = "re_zeta")]
        value: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Dump the dynamical matrix as (row, col, re, im).
    Matrix,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = cli.global.workers;
    match with_workers(workers, || commands::run(&cli.global, &cli.command)).and_then(|r| r) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_accept_negative_bounds() {
        assert_eq!(parse_range("-3,3"), Ok((-3.0, 3.0)));
        assert_eq!(parse_range(" -1.5 , -0.5 "), Ok((-1.5, -0.5)));
        assert!(parse_range("3,-3").is_err());
        assert!(parse_range("3").is_err());
    }

    #[test]
    fn resolution_is_square_or_explicit() {
        assert_eq!(parse_resolution("40"), Ok((40, 40)));
        assert_eq!(parse_resolution("101x51"), Ok((101, 51)));
        assert!(parse_resolution("ax3").is_err());
    }

    #[test]
    fn command_line_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
