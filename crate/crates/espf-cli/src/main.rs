//! Command-line driver: scenario runs, the 52-step claims diagnostic,
//! validation suites, the Gaussian-limit checks, and static plots from the
//! EWM CSV.
//!
//! Exit codes: 0 ok, 1 config error, 2 runtime filter failure, 3 validation
//! or Gaussian-limit violation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use espf::harness::{self, ScenarioConfig};
use espf::validate;

mod plot;

#[derive(Parser)]
#[command(name = "espf", about = "Possibilistic evidence-only state estimation harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonRunArgs {
    /// Scenario config file; omitted = built-in nominal scenario.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override every RNG seed in the config with this base value.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Enable per-step admissibility assertions.
    #[arg(long)]
    debug_asserts: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario end to end and write ewm.csv / claims.csv / summary.txt.
    Run(CommonRunArgs),
    /// 52-step claims diagnostic (comparators evaluated at every step).
    Claims {
        #[command(flatten)]
        common: CommonRunArgs,
        /// Number of steps in the diagnostic.
        #[arg(long, default_value_t = 52)]
        steps: usize,
    },
    /// Property/oracle suites on synthetic instances.
    Validate {
        /// Base RNG seed for the suites.
        #[arg(long, default_value_t = 20_240_817)]
        seed: u64,
        /// Random MVEE certification clouds.
        #[arg(long, default_value_t = 1000)]
        mvee_clouds: usize,
        /// Enumeration-oracle instances.
        #[arg(long, default_value_t = 500)]
        lemma3_instances: usize,
        /// Randomized synthetic update steps for the entropy-floor check.
        #[arg(long, default_value_t = 200)]
        pcrb_steps: usize,
    },
    /// Gaussian-limit checks (quadrature constant, dense-cloud convergence,
    /// Kalman-oracle tracking).
    GaussianLimit {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Render static PNG plots of the EWM traces from a CSV.
    Plot {
        /// Path to an ewm.csv produced by `run` or `claims`.
        #[arg(long)]
        csv: PathBuf,
        /// Output directory for the images.
        #[arg(long, default_value = "out/plots")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(common) => run_verb(common, false, None),
        Command::Claims { common, steps } => run_verb(common, true, Some(steps)),
        Command::Validate { seed, mvee_clouds, lemma3_instances, pcrb_steps } => {
            validate_verb(seed, mvee_clouds, lemma3_instances, pcrb_steps)
        }
        Command::GaussianLimit { seed } => gaussian_limit_verb(seed),
        Command::Plot { csv, out } => plot_verb(&csv, &out),
    }
}

fn load_config(args: &CommonRunArgs) -> Result<ScenarioConfig, ExitCode> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = match fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", path.display());
                    return Err(ExitCode::from(1));
                }
            };
            match ScenarioConfig::parse(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return Err(ExitCode::from(1));
                }
            }
        }
        None => ScenarioConfig::nominal(),
    };
    if let Some(seed) = args.seed {
        cfg.seeds.truth = seed;
        cfg.seeds.measurement = seed.wrapping_add(1);
        cfg.seeds.comparator = seed.wrapping_add(2);
        cfg.seeds.init = seed.wrapping_add(3);
    }
    if args.debug_asserts {
        cfg.debug_asserts = true;
    }
    Ok(cfg)
}

fn run_verb(args: CommonRunArgs, claims_mode: bool, steps: Option<usize>) -> ExitCode {
    let cfg = match load_config(&args) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let output = match harness::run_scenario(&cfg, claims_mode, steps) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("filter failure: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = harness::emit_outputs(&output, &cfg.to_text(), &args.out) {
        eprintln!("output failure: {e}");
        return ExitCode::from(2);
    }
    let s = &output.summary;
    println!(
        "{}: {} steps ({} with measurements), regime C/D = {}/{}, prune median {}, pcrb violations {}",
        s.scenario,
        s.steps,
        s.measurement_steps,
        s.contraction_steps,
        s.diffusion_steps,
        s.prune_median,
        s.pcrb_violations
    );
    if s.claims_evaluated > 0 {
        println!(
            "claims: {} evaluated; A vs rand {}/{}, B vs rand {}/{}, max swap gaps A {:.3} B {:.3}",
            s.claims_evaluated,
            s.claim_a_rand_pass,
            s.claims_evaluated,
            s.claim_b_rand_pass,
            s.claims_evaluated,
            s.max_swap_gap_a,
            s.max_swap_gap_b
        );
    }
    println!("outputs written to {}", args.out.display());
    ExitCode::SUCCESS
}

fn validate_verb(seed: u64, mvee_clouds: usize, lemma3_instances: usize, pcrb_steps: usize) -> ExitCode {
    println!("running validation suites (seed {seed})...");
    let report = validate::validate_all(seed, mvee_clouds, lemma3_instances, pcrb_steps);

    let m = &report.mvee;
    println!(
        "[{}] mvee certification: {} clouds, max containment excess {:.3e}, min active {}, max affine err {:.3e}, {:.2}s",
        pass_str(m.pass),
        m.clouds,
        m.max_containment_excess,
        m.min_active_points,
        m.max_affine_error,
        m.runtime_s
    );
    let l = &report.lemma3;
    println!(
        "[{}] selection enumeration oracle: {}/{} optimal, {} within 2e-7, worst gap {:.4} nats (mean suboptimal gap {:.4}), {:.2}s",
        pass_str(l.pass),
        l.optimal,
        l.instances,
        l.within_tolerance,
        l.worst_gap,
        l.mean_gap_when_suboptimal,
        l.runtime_s
    );
    let p = &report.pcrb;
    println!(
        "[{}] entropy floor on {} synthetic update steps: {} violations, worst margin {:.4} nats",
        pass_str(p.pass),
        p.steps,
        p.violations,
        p.worst_margin
    );
    let i = &report.isotropy;
    println!(
        "[{}] isotropy on the tracking geometry: ratio {:.4}",
        pass_str(i.holds),
        i.ratio
    );
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}

fn gaussian_limit_verb(seed: u64) -> ExitCode {
    println!("running gaussian-limit checks (seed {seed})...");
    let r = validate::gaussian_limit(seed);
    println!(
        "[{}] quadrature of the cut-volume constant: |error| = {:.3e} (tolerance 1e-4)",
        pass_str(r.quadrature_error < 1e-4),
        r.quadrature_error
    );
    println!(
        "[{}] dense-cloud convergence (M = 4000, n = 2): error {:.4} nats (tolerance 0.05)",
        pass_str(r.dense_cloud_error.abs() < 0.05),
        r.dense_cloud_error
    );
    println!(
        "[{}] anchor tracks the Kalman oracle over {} steps: worst error = {:.3} of the 3-sigma budget",
        pass_str(r.kalman_worst_sigma_ratio <= 1.0),
        r.kalman_steps,
        r.kalman_worst_sigma_ratio
    );
    if r.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}

fn plot_verb(csv: &Path, out: &Path) -> ExitCode {
    let text = match fs::read_to_string(csv) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", csv.display());
            return ExitCode::from(1);
        }
    };
    let records = match harness::parse_ewm_csv(&text) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("csv error: {e}");
            return ExitCode::from(1);
        }
    };
    match plot::render_all(&records, out) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("plot failure: {e}");
            ExitCode::from(2)
        }
    }
}

fn pass_str(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}
