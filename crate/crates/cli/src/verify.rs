use std::path::{Path, PathBuf};

use cyclid::cyclic::STRUCTURE_TOL;
use cyclid::io::{read_model_document, write_json, ModelDocument};
use cyclid::markov::{default_structure_depth, StructureReport, IDENTIFIED_STRUCTURE_TOL};
use cyclid::{
    build_cyclic, check_structure, extract_periodic, markov_parameters, shift_matrix, validate_model,
    LptvModel, StateSpace, ValidationReport,
};
use serde::Serialize;

use crate::{CliError, CliResult};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// `pex`, a periodic model JSON file, or an identified LTI quadruple JSON file.
    #[arg(long, default_value = "pex")]
    pub model: String,
    /// Largest i and j of the shifted Markov products checked [default: M + n].
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Relative structure tolerance [default: 1e-8 for periodic models, 1e-4 for LTI quadruples].
    #[arg(long)]
    pub tol_structure: Option<f64>,
    /// Also write verify_report.json here.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub kind: &'static str,
    pub pass: bool,
    pub structure: StructureReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub round_trip: Option<bool>,
}

fn structure_of(
    sys: &impl StateSpace<f64>,
    period: usize,
    (m, l): (usize, usize),
    depth: usize,
    tol: f64,
) -> CliResult<StructureReport> {
    let markov = markov_parameters(sys, 2 * depth);
    let s_l = shift_matrix::<f64>(l, period)?;
    let s_m = shift_matrix::<f64>(m, period)?;
    Ok(check_structure(&markov, &s_l, &s_m, depth, depth, tol)?)
}

fn verify_periodic(model: &LptvModel<f64>, horizon: Option<usize>, tol: Option<f64>) -> CliResult<VerifyReport> {
    let (p, n) = (model.period(), model.state_dim());
    let depth = horizon.unwrap_or_else(|| default_structure_depth(p, n));
    let cm = build_cyclic(model);
    let structure = structure_of(&cm, p, (model.input_dim(), model.output_dim()), depth, tol.unwrap_or(STRUCTURE_TOL))?;
    let round_trip = extract_periodic(&cm, 0.0).map(|back| back == *model).unwrap_or(false);
    let validation = validate_model(model);
    Ok(VerifyReport {
        kind: "periodic",
        pass: structure.pass && round_trip && validation.observable && validation.controllable,
        structure,
        validation: Some(validation),
        round_trip: Some(round_trip),
    })
}

pub fn verify_document(doc: &ModelDocument, horizon: Option<usize>, tol: Option<f64>) -> CliResult<VerifyReport> {
    match doc {
        ModelDocument::Periodic(f) => verify_periodic(&f.to_model()?, horizon, tol),
        ModelDocument::Lti(f) => {
            let q = f.to_quadruple::<f64>()?;
            if f.order % f.period != 0 {
                return Err(CliError::Argument(format!(
                    "order {} is not a multiple of M = {}",
                    f.order, f.period
                )));
            }
            let depth = horizon.unwrap_or_else(|| default_structure_depth(f.period, f.order / f.period));
            let structure = structure_of(&q, f.period, (f.m, f.l), depth, tol.unwrap_or(IDENTIFIED_STRUCTURE_TOL))?;
            Ok(VerifyReport { kind: "lti", pass: structure.pass, structure, validation: None, round_trip: None })
        }
    }
}

pub fn run(args: &Args) -> CliResult<()> {
    if args.horizon == Some(0) {
        return Err(CliError::Argument("--horizon must be at least 1".into()));
    }
    if let Some(t) = args.tol_structure {
        if !(t > 0.0 && t.is_finite()) {
            return Err(CliError::Argument(format!("--tol-structure must be positive, got {t}")));
        }
    }
    let doc = if args.model == "pex" {
        ModelDocument::Periodic(cyclid::io::ModelFile::from_model(&LptvModel::<f64>::pex()))
    } else {
        read_model_document(Path::new(&args.model))?
    };
    let report = verify_document(&doc, args.horizon, args.tol_structure)?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(cyclid::Error::from)?);
    if let Some(dir) = &args.output_dir {
        write_json(&crate::ensure_dir(dir)?.join("verify_report.json"), &report)?;
    }
    if report.pass {
        return Ok(());
    }
    if let Some(v) = &report.validation {
        if !(v.observable && v.controllable) {
            v.require_minimal()?;
        }
    }
    if report.round_trip == Some(false) {
        return Err(CliError::Structure("cyclic reformulation does not round-trip".into()));
    }
    let worst = report.structure.worst.as_ref().map_or_else(
        || "no cell evaluated".to_string(),
        |w| format!("{:?} product at i={}, j={} has residual {:.3e}", w.kind, w.i, w.j, w.residual),
    );
    Err(CliError::Structure(format!(
        "structure check failed (tol {:.1e}): worst offender {worst}",
        report.structure.tol
    )))
}
