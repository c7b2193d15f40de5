use std::path::PathBuf;

use cyclid::io::{write_cycled, write_signal};
use cyclid::model::random_input;
use cyclid::{cycle_input, simulate_lptv, validate_model, NoiseSpec, SignalSequence};
use nalgebra::DVector;

use crate::{ensure_dir, load_model, CliError, CliResult};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// `pex` for the built-in example plant, or a model JSON file.
    #[arg(long, default_value = "pex")]
    pub model: String,
    /// `random` (standard normal), `impulse`, `zero`, or an input CSV file.
    #[arg(long, default_value = "random")]
    pub input: String,
    /// Number of samples for generated inputs.
    #[arg(long, default_value_t = 1000)]
    pub length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Variance of the process noise added to the input channel.
    #[arg(long, default_value_t = 0.0)]
    pub noise_var: f64,
    /// Variance of the measurement noise added to the output.
    #[arg(long, default_value_t = 0.0)]
    pub measurement_var: f64,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
    /// Also write the state trajectory to states.csv.
    #[arg(long)]
    pub states: bool,
    /// Also write the cycled signals (u_cycled.csv, y_cycled.csv and their .meta.json sidecars).
    #[arg(long)]
    pub cycled: bool,
    /// Simulate even if the model is not observable and controllable at every phase.
    #[arg(long)]
    pub allow_nonminimal: bool,
}

/// Noise uses a stream derived from the seed so it never repeats the input draw.
pub fn noise_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

pub fn run(args: &Args) -> CliResult<()> {
    let model = load_model(&args.model)?;
    if !args.allow_nonminimal {
        validate_model(&model).require_minimal()?;
    }
    let m = model.input_dim();
    let u = match args.input.as_str() {
        "random" => random_input(m, args.length, args.seed),
        "zero" => SignalSequence::zeros(m, args.length),
        "impulse" => {
            let mut values = SignalSequence::<f64>::zeros(m, args.length).values().clone();
            if args.length > 0 {
                values.column_mut(0).fill(1.0);
            }
            SignalSequence::new(values, 0)?
        }
        path => cyclid::io::read_signal(std::path::Path::new(path))?,
    };
    if u.dim() != m {
        return Err(CliError::Argument(format!(
            "input has {} channels, model expects {m}",
            u.dim()
        )));
    }
    let noise = if args.noise_var > 0.0 || args.measurement_var > 0.0 {
        Some(NoiseSpec::new(args.noise_var, args.measurement_var, noise_seed(args.seed))?)
    } else {
        NoiseSpec::new(args.noise_var, args.measurement_var, 0)?;
        None
    };
    let sim = simulate_lptv(&model, &u, &DVector::zeros(model.state_dim()), noise.as_ref())?;
    let dir = ensure_dir(&args.output_dir)?;
    write_signal(&dir.join("u.csv"), &u, "u")?;
    write_signal(&dir.join("y.csv"), &sim.output, "y")?;
    if args.states {
        write_signal(&dir.join("states.csv"), &sim.states, "x")?;
    }
    if args.cycled {
        let p = model.period();
        write_cycled(&dir.join("u_cycled.csv"), &cycle_input(&u, p)?, "u")?;
        write_cycled(&dir.join("y_cycled.csv"), &cycle_input(&sim.output, p)?, "y")?;
    }
    log::info!("wrote {} samples to {}", u.len(), dir.display());
    Ok(())
}
