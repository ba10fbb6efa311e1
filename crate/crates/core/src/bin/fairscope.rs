use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fairscope::io::CohortManifest;
use fairscope::pipeline::{self, ImageInputs, RunConfig};
use fairscope::render::Colormap;
use fairscope::synthetic::{self, DemoSize};
use fairscope::{Demographics, Ethnicity, Gender, Result};

/// Activation-map statistics and verification fairness for face recognition.
#[derive(Parser)]
#[command(name = "fairscope", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute symmetrized Score-CAM maps for face images into an archive.
    Cam(CamArgs),
    /// Per-cohort MAM and AM-V, D-AM-V against the reference, and profiles.
    Stats(ManifestArgs),
    /// FMR/FNMR per group, calibrated thresholds, FDR curve and AUC.
    Fairness(ManifestArgs),
    /// Render heatmaps, overlays and plots from stats and fairness outputs.
    Report(ManifestArgs),
    /// Run the built-in oracle checks.
    Selftest,
    /// Write a synthetic two-cohort demo (model, faces, maps, scores, manifest).
    Fixture {
        dir: PathBuf,
        /// Fewer maps and scores, for quick runs.
        #[arg(long)]
        small: bool,
    },
}

#[derive(Args)]
struct CamArgs {
    /// Model file in the toy model format.
    #[arg(long)]
    model: PathBuf,
    /// Directory of 112x112 RGB PNGs, all tagged with --ethnicity/--gender.
    #[arg(long, conflicts_with = "list", required_unless_present = "list")]
    images: Option<PathBuf>,
    /// CSV with columns path,ethnicity,gender.
    #[arg(long)]
    list: Option<PathBuf>,
    #[arg(long, default_value = "unknown")]
    ethnicity: Ethnicity,
    #[arg(long, default_value = "unknown")]
    gender: Gender,
    /// Output archive.
    #[arg(long)]
    out: PathBuf,
    /// Skip unreadable or malformed images instead of failing.
    #[arg(long)]
    skip_bad: bool,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ManifestArgs {
    manifest: PathBuf,
    /// Overrides the manifest output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Weight of the FMR gap in FDR.
    #[arg(long, default_value_t = fairscope::fairness::DEFAULT_ALPHA)]
    alpha: f64,
    /// Comma-separated target FMRs.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<f64>>,
    /// Histogram bins.
    #[arg(long, default_value_t = fairscope::stats::DEFAULT_BINS)]
    bins: usize,
    #[arg(long, default_value = "viridis")]
    colormap: Colormap,
    #[arg(long)]
    threads: Option<usize>,
}

impl ManifestArgs {
    fn load(&self) -> Result<(CohortManifest, RunConfig)> {
        let cfg = RunConfig {
            alpha: self.alpha,
            targets: self.targets.clone().unwrap_or_else(|| fairscope::fairness::DEFAULT_TARGETS.to_vec()),
            bins: self.bins,
            colormap: self.colormap,
            threads: self.threads,
            output_dir: self.out_dir.clone(),
        };
        cfg.validate()?;
        Ok((CohortManifest::load(&self.manifest)?, cfg))
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Cam(a) => {
            let inputs = match (a.images, a.list) {
                (Some(path), _) => {
                    ImageInputs::Dir { path, demographics: Demographics { ethnicity: a.ethnicity, gender: a.gender } }
                }
                (None, Some(list)) => ImageInputs::List(list),
                (None, None) => unreachable!("clap requires one input"),
            };
            let cfg = RunConfig { threads: a.threads, ..RunConfig::default() };
            let progress = |done: usize, total: usize, path: &std::path::Path| {
                eprintln!("[{done}/{total}] {}", path.display());
            };
            let s = pipeline::run_cam(&a.model, &inputs, &a.out, a.skip_bad, &cfg, &progress)?;
            for (path, why) in &s.skipped {
                eprintln!("skipped {}: {why}", path.display());
            }
            println!("wrote {} maps ({} bytes) to {}", s.written, s.bytes, a.out.display());
        }
        Command::Stats(a) => {
            let (m, cfg) = a.load()?;
            let s = pipeline::run_stats(&m, &cfg)?;
            for c in &s.cohorts {
                println!("{}: N={} MAM [{:.4}, {:.4}] AM-V [{:.4}, {:.4}]", c.label, c.n, c.mam.min, c.mam.max, c.amv.min, c.amv.max);
            }
            for c in &s.comparisons {
                println!("D-AM-V {}: max {:.4} total {:.4}", c.groups, c.damv.max, c.damv_total);
            }
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::Fairness(a) => {
            let (m, cfg) = a.load()?;
            let r = pipeline::run_fairness(&m, &cfg)?;
            println!("{:>10} {:>10} {:>10} {:>8}", "target", "tau", "FMR", "FDR");
            for p in &r.points {
                let c = &p.calibration;
                println!("{:>10.0e} {:>10.6} {:>10.3e} {:>8.4}", c.target_fmr, c.tau, c.achieved_fmr, p.point.fdr);
            }
            println!("FDR AUC {:.4}", r.fdr_auc);
        }
        Command::Report(a) => {
            let (m, cfg) = a.load()?;
            let idx = pipeline::run_report(&m, &cfg)?;
            println!("wrote {} report files", idx.artifacts.len() + 1);
        }
        Command::Selftest => {
            let mut ok = true;
            for c in fairscope::selftest::run() {
                println!("{} {} ({} ms): {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.millis, c.detail);
                ok &= c.passed;
            }
            return Ok(ok);
        }
        Command::Fixture { dir, small } => {
            let size = if small {
                DemoSize { maps_per_cohort: 6, faces: 2, imposters_per_group: 2_000, genuine_per_group: 500 }
            } else {
                DemoSize::default()
            };
            println!("{}", synthetic::write_demo(&dir, size)?.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
