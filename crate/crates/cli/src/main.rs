//! `beamtie` command-line driver: run models, run the verification suite,
//! audit a model, and write the built-in example models.

use beamtie::generators::builtin_examples;
use beamtie::model::{Model, Variant};
use beamtie::model_io::{export_vtu, load_model, save_model, RunReport};
use beamtie::problem::Problem;
use beamtie::solver::{init_threads, solve_with};
use beamtie::verify::{audit_model, run_criterion, CRITERIA};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "beamtie", version, about = "Beam-to-solid surface coupling with geometrically exact beams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a model; writes one VTU/VTP pair per load step and a report.
    Run {
        /// Model file (JSON).
        model: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the acceptance suite (all criteria, or a comma-separated subset).
    Verify {
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<usize>,
        /// Directory for the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Momentum balance and finite-difference tangent check on a model.
    Audit {
        /// Model file (JSON).
        model: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Maximum number of tangent columns checked.
        #[arg(long, default_value_t = 60)]
        columns: usize,
        /// Directory for the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the built-in example models as JSON.
    Generate {
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Only these examples (default: all).
        names: Vec<String>,
    },
}

/// Run-time overrides of the model's coupling and solve settings.
#[derive(Args, Clone, Debug, Default)]
struct Overrides {
    /// Positional coupling variant.
    #[arg(long, value_parser = ["cons", "ref", "disp"], ignore_case = true)]
    variant: Option<String>,
    /// Disable rotational coupling.
    #[arg(long)]
    no_rot: bool,
    /// Positional penalty parameter.
    #[arg(long)]
    eps_r: Option<f64>,
    /// Rotational penalty parameter.
    #[arg(long)]
    eps_theta: Option<f64>,
    /// Number of load steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Multiplies all external loads.
    #[arg(long)]
    load_scale: Option<f64>,
}

impl Overrides {
    fn apply(&self, m: &mut Model) -> Result<(), String> {
        if let Some(v) = &self.variant {
            m.coupling.variant = v.parse::<Variant>()?;
        }
        if self.no_rot {
            m.coupling.rotational = false;
        }
        if let Some(e) = self.eps_r {
            m.coupling.penalty_position = e;
        }
        if let Some(e) = self.eps_theta {
            m.coupling.penalty_rotation = e;
        }
        if let Some(s) = self.steps {
            m.solve.load_steps = s;
        }
        if let Some(s) = self.load_scale {
            m.solve.load_scale = s;
        }
        m.validate().map_err(|e| format!("after overrides: {e}"))
    }
}

fn load(path: &Path, o: &Overrides) -> Result<Model, String> {
    let mut m = load_model(path).map_err(|e| e.to_string())?;
    o.apply(&mut m)?;
    Ok(m)
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d).map_err(|e| format!("{}: {e}", d.display()))?;
    }
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(model: &Path, o: &Overrides, out: &Path) -> Result<bool, String> {
    let m = load(model, o)?;
    let problem = Problem::new(m).map_err(|e| e.to_string())?;
    let cfg = problem.model.solve.clone();
    let mut io_error = None;
    let solution = solve_with(&problem, &cfg, |rec, state, ev| {
        eprintln!("step {}/{}: {} iterations", rec.step, cfg.load_steps, rec.iterations());
        if io_error.is_none() {
            if let Err(e) = export_vtu(&problem, state, Some(ev), out, &format!("step_{:03}", rec.step)) {
                io_error = Some(e.to_string());
            }
        }
    })
    .map_err(|e| e.to_string())?;
    if let Some(e) = io_error {
        return Err(e);
    }
    let report = RunReport::new(&problem, &solution.state, &solution.evaluation, solution.history);
    let text = report.to_text();
    print!("{text}");
    write(&out.join("report.txt"), &text)?;
    write(&out.join("report.json"), &report.to_json())?;
    Ok(true)
}

fn verify(criteria: &[usize], out: Option<&Path>) -> Result<bool, String> {
    let ids: Vec<usize> = if criteria.is_empty() { (1..=CRITERIA).collect() } else { criteria.to_vec() };
    let mut results = Vec::new();
    for id in ids {
        let r = run_criterion(id);
        println!("{}", r.line());
        results.push(r);
    }
    let all = results.iter().all(|r| r.passed);
    println!("{}", if all { "all criteria passed" } else { "some criteria FAILED" });
    if let Some(dir) = out {
        let json = serde_json::to_string_pretty(&results).map_err(|e| e.to_string())?;
        write(&dir.join("verify.json"), &(json + "\n"))?;
    }
    Ok(all)
}

fn audit(model: &Path, o: &Overrides, columns: usize, out: Option<&Path>) -> Result<bool, String> {
    let m = load(model, o)?;
    let problem = Problem::new(m).map_err(|e| e.to_string())?;
    let a = audit_model(&problem, columns, 1)?;
    println!("net coupling force  {:?} (relative {:.3e})", a.net_force, a.relative_force);
    println!("net coupling moment {:?} (relative {:.3e})", a.net_moment, a.relative_moment);
    println!(
        "tangent vs finite differences: max relative deviation {:.3e} over {} columns (worst: {})",
        a.tangent.max_relative_error, a.tangent.columns, a.tangent.worst_column
    );
    println!("{}", if a.passed { "audit passed" } else { "audit FAILED" });
    if let Some(dir) = out {
        let json = serde_json::to_string_pretty(&a).map_err(|e| e.to_string())?;
        write(&dir.join("audit.json"), &(json + "\n"))?;
    }
    Ok(a.passed)
}

fn generate(out: &Path, names: &[String]) -> Result<bool, String> {
    let examples = builtin_examples();
    for n in names {
        if !examples.iter().any(|(k, _)| k == n) {
            let known: Vec<&str> = examples.iter().map(|(k, _)| *k).collect();
            return Err(format!("unknown example '{n}' (known: {})", known.join(", ")));
        }
    }
    std::fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
    for (name, model) in examples {
        if names.is_empty() || names.iter().any(|n| n == name) {
            let p = out.join(format!("{name}.json"));
            save_model(&model, &p).map_err(|e| e.to_string())?;
            println!("{}", p.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { model, overrides, out } => run(model, overrides, out),
        Command::Verify { criteria, out } => verify(criteria, out.as_deref()),
        Command::Audit { model, overrides, columns, out } => audit(model, overrides, *columns, out.as_deref()),
        Command::Generate { out, names } => generate(out, names),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
