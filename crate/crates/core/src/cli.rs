//! Command-line front end: `study` runs a refinement table, `check` runs the
//! property suites.

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::checks;
use crate::forms::{LOAD_DEGREE, MASS_DEGREE, STIFFNESS_DEGREE};
use crate::space::BcFlavor;
use crate::study::{run_convergence, Example, StudyConfig, StudyError, TableFormat};

#[derive(Debug, Parser)]
#[command(name = "quadcurl", version, about = "Grad-curl finite elements for the perturbed quad-curl problem")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a convergence study and write the error table.
    Study(StudyArgs),
    /// Run the mesh, quadrature, element, space and manufactured-field suites.
    Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Markdown,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// 1: smooth solution, 2: boundary-layer problem.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub example: u8,
    /// Perturbation parameter; repeat for several. Defaults depend on the example.
    #[arg(long = "eps")]
    pub eps: Vec<f64>,
    /// Subdivisions per axis; repeat for several.
    #[arg(long = "n")]
    pub n: Vec<usize>,
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub n_step: usize,
    #[arg(long, default_value = "weak")]
    pub bc: BcFlavor,
    /// Nitsche penalty. Defaults: 50 (example 1), 20 (example 2).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Also report errors on the inner subdomain (needs N divisible by 8).
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub subdomain: bool,
    #[arg(long, default_value_t = STIFFNESS_DEGREE)]
    pub quad_assembly: usize,
    #[arg(long, default_value_t = MASS_DEGREE)]
    pub quad_error: usize,
    #[arg(long, default_value_t = LOAD_DEGREE)]
    pub quad_load: usize,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("writing output: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl StudyArgs {
    fn resolution_list(&self) -> Result<Vec<usize>, CliError> {
        let range = match (self.n_min, self.n_max) {
            (None, None) => None,
            (Some(lo), Some(hi)) if lo <= hi && self.n_step > 0 => Some((lo..=hi).step_by(self.n_step).collect()),
            (Some(_), Some(_)) => return Err(CliError::Config("--n-min must not exceed --n-max and --n-step must be positive".into())),
            _ => return Err(CliError::Config("--n-min and --n-max go together".into())),
        };
        match (range, self.n.is_empty()) {
            (Some(_), false) => Err(CliError::Config("give either --n or --n-min/--n-max, not both".into())),
            (Some(r), true) => Ok(r),
            (None, false) => Ok(self.n.clone()),
            (None, true) => Ok(vec![8, 10, 12]),
        }
    }

    pub fn to_config(&self) -> Result<StudyConfig, CliError> {
        let example = Example::from_id(self.example).ok_or_else(|| CliError::Config(format!("unknown example {}", self.example)))?;
        let mut config = StudyConfig::new(example, self.bc, self.resolution_list()?);
        if !self.eps.is_empty() {
            config.epsilons = self.eps.clone();
        }
        if let Some(s) = self.sigma {
            config.sigma = s;
        }
        config.subdomain = self.subdomain;
        config.assembly_degree = self.quad_assembly;
        config.error_degree = self.quad_error;
        config.load_degree = self.quad_load;
        config.format = match self.format {
            FormatArg::Csv => TableFormat::Csv,
            FormatArg::Markdown => TableFormat::Markdown,
        };
        config.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(config)
    }
}

/// Executes a parsed command, writing tables and reports to `out` unless
/// `--out` redirects them.
pub fn run<W: Write>(cli: Cli, out: &mut W) -> Result<(), CliError> {
    match cli.command {
        Command::Study(args) => {
            let config = args.to_config()?;
            let table = run_convergence(&config).map_err(|e| match e {
                StudyError::Solver(_) => CliError::Numerical(e.to_string()),
                other => CliError::Config(other.to_string()),
            })?;
            let text = table.render();
            match &args.out {
                Some(path) => std::fs::write(path, &text)?,
                None => out.write_all(text.as_bytes())?,
            }
            if table.any_failed() {
                return Err(CliError::Numerical("at least one row failed; see the status column".into()));
            }
            Ok(())
        }
        Command::Check => {
            let report = checks::run_all();
            writeln!(out, "{report}")?;
            if report.all_passed() {
                Ok(())
            } else {
                Err(CliError::Numerical("property checks failed".into()))
            }
        }
    }
}

/// Parses `args`, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<StudyConfig, CliError> {
        let cli = Cli::try_parse_from(std::iter::once("quadcurl").chain(args.iter().copied()))
            .map_err(|e| CliError::Config(e.to_string()))?;
        match cli.command {
            Command::Study(a) => a.to_config(),
            Command::Check => Err(CliError::Config("not a study".into())),
        }
    }

    #[test]
    fn defaults_follow_example() {
        let c = parse(&["study", "--example", "2", "--bc", "strong", "--n", "8"]).unwrap();
        assert_eq!(c.sigma, 20.0);
        assert_eq!(c.epsilons, vec![1e-6]);
        let c = parse(&["study", "--example", "1", "--n", "8"]).unwrap();
        assert_eq!(c.sigma, 50.0);
        assert_eq!(c.epsilons, vec![1.0, 1e-2, 1e-5]);
        assert_eq!(c.flavor, BcFlavor::Weak);
    }

    #[test]
    fn resolution_range() {
        let c = parse(&["study", "--n-min", "8", "--n-max", "12"]).unwrap();
        assert_eq!(c.ns, vec![8, 10, 12]);
        assert!(parse(&["study", "--n-min", "8"]).is_err());
        assert!(parse(&["study", "--n-min", "8", "--n-max", "12", "--n", "4"]).is_err());
    }

    #[test]
    fn subdomain_flag_needs_multiples_of_eight() {
        let e = parse(&["study", "--example", "2", "--subdomain", "true", "--n", "8", "--n", "12"]).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(parse(&["study", "--example", "2", "--subdomain", "--n", "8", "--n", "16"]).unwrap().subdomain);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(parse(&["study", "--example", "3"]).is_err());
        assert!(parse(&["study", "--bc", "neither"]).is_err());
        assert!(parse(&["study", "--quad-error", "6", "--n", "4"]).is_err());
        assert!(parse(&["study", "--eps", "0", "--n", "4"]).is_err());
    }
}
