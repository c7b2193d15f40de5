use std::path::{Path, PathBuf};

use cyclid::io::{read_signal, write_json, write_model, LtiFile};
use cyclid::markov::IDENTIFIED_STRUCTURE_TOL;
use cyclid::transform::{Identification, NOISE_FREE_PROJECTION_TOL, NOISY_TOL};
use cyclid::{identify_lptv, IdentifyConfig, SignalSequence};

use crate::{ensure_dir, CliError, CliResult};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Input signal CSV (`t,u_1,...`).
    #[arg(long)]
    pub input: PathBuf,
    /// Output signal CSV (`t,y_1,...`).
    #[arg(long)]
    pub output: PathBuf,
    /// Period M of the plant.
    #[arg(long, short = 'M', value_parser = clap::value_parser!(u64).range(1..))]
    pub period: u64,
    /// State dimension n per phase.
    #[arg(long, short = 'n', value_parser = clap::value_parser!(u64).range(1..))]
    pub order: u64,
    /// Block rows of the data Hankel matrices [default: 2 ceil(M n / (M l)) + 2].
    #[arg(long)]
    pub hankel_rows: Option<usize>,
    /// Relative tolerance of both the structure check on the identified model and
    /// the off-pattern projection [default: 1e-4 / 1e-6, or 5e-2 with --noisy].
    #[arg(long)]
    pub tol_structure: Option<f64>,
    /// Use the tolerances meant for noisy data.
    #[arg(long)]
    pub noisy: bool,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
}

pub fn config(hankel_rows: Option<usize>, tol: Option<f64>, noisy: bool) -> CliResult<IdentifyConfig> {
    let mut cfg = if noisy { IdentifyConfig::noisy() } else { IdentifyConfig::noise_free() };
    if let Some(t) = tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Argument(format!("--tol-structure must be positive, got {t}")));
        }
        cfg.assumption_tol = t;
        cfg.projection_tol = t;
    }
    if let Some(rows) = hankel_rows {
        if rows < 2 {
            return Err(CliError::Argument("--hankel-rows must be at least 2".into()));
        }
        cfg.hankel.block_rows = Some(rows);
    }
    debug_assert!(IDENTIFIED_STRUCTURE_TOL < NOISY_TOL && NOISE_FREE_PROJECTION_TOL < NOISY_TOL);
    Ok(cfg)
}

/// identified_model.json, identified_lti.json and diagnostics.json.
pub fn write_results(dir: &Path, id: &Identification<f64>, m: usize, l: usize) -> CliResult<()> {
    let dir = ensure_dir(dir)?;
    write_model(&dir.join("identified_model.json"), &id.model)?;
    let lti = LtiFile::from_system(&id.identified, id.model.period(), m, l);
    write_json(&dir.join("identified_lti.json"), &lti)?;
    write_json(&dir.join("diagnostics.json"), &id.diagnostics)?;
    Ok(())
}

pub fn run(args: &Args) -> CliResult<()> {
    let u: SignalSequence<f64> = read_signal(&args.input)?;
    let y: SignalSequence<f64> = read_signal(&args.output)?;
    if u.start_time() != y.start_time() {
        return Err(CliError::Argument(format!(
            "input starts at t={} but output at t={}",
            u.start_time(),
            y.start_time()
        )));
    }
    let cfg = config(args.hankel_rows, args.tol_structure, args.noisy)?;
    let id = identify_lptv(&u, &y, args.period as usize, args.order as usize, None, &cfg)?;
    for w in &id.diagnostics.subspace.warnings {
        eprintln!("warning: {w}");
    }
    write_results(&args.output_dir, &id, u.dim(), y.dim())?;
    println!(
        "identified M={} n={} model; T condition {:.3e}, Markov deviation {:.3e}",
        args.period, args.order, id.diagnostics.transformation_condition, id.diagnostics.markov_deviation
    );
    Ok(())
}
