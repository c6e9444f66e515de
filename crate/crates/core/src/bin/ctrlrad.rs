use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ctrlrad::cli::{self, exit_code, SolverOverrides};
use ctrlrad::stln::PartitionChoice;

/// Structured real radius of controllability for descriptor and
/// higher-order LTI systems.
#[derive(Parser)]
#[command(name = "ctrlrad", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the structured radius of controllability for a problem file
    /// and print (or write) a JSON report.
    Radius {
        /// Problem file (JSON)
        file: PathBuf,
        /// Weight enforcing the rank constraint
        #[arg(long)]
        omega: Option<f64>,
        /// Convergence tolerance on the increments
        #[arg(long)]
        epsilon: Option<f64>,
        /// Iteration budget
        #[arg(long = "max-iter")]
        max_iter: Option<usize>,
        /// Partition column: an index or "last"; selecting a column turns
        /// a file-level multistart off unless --multistart is also given
        #[arg(long = "partition-col", value_parser = cli::parse_partition)]
        partition_col: Option<PartitionChoice>,
        /// Try every partition column and keep the minimum-norm result
        #[arg(long)]
        multistart: bool,
        /// Write the report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test controllability with both the pencil and Toeplitz criteria.
    Check {
        /// Problem file (JSON)
        file: PathBuf,
    },
    /// Compute the radius for a list of parameter values.
    Sweep {
        /// Problem file (JSON)
        file: PathBuf,
        /// Entry name like E[0][1], A[i][j], B[2][0], P0[0][1], b[1][0], or
        /// a parameter table key defined in the file
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Radius {
            file,
            omega,
            epsilon,
            max_iter,
            partition_col,
            multistart,
            out,
        } => {
            let overrides = SolverOverrides {
                omega,
                epsilon,
                max_iter,
                partition: partition_col,
                multistart: if multistart { Some(true) } else { None },
            };
            match cli::cmd_radius(&file, &overrides) {
                Ok((code, report)) => match out {
                    None => {
                        print!("{report}");
                        code
                    }
                    Some(path) => match std::fs::write(&path, report) {
                        Ok(()) => code,
                        Err(err) => {
                            eprintln!("error: cannot write {}: {err}", path.display());
                            exit_code::INPUT_ERROR
                        }
                    },
                },
                Err(err) => {
                    eprintln!("error: {err}");
                    exit_code::INPUT_ERROR
                }
            }
        }
        Command::Check { file } => match cli::cmd_check(&file) {
            Ok((code, text)) => {
                print!("{text}");
                code
            }
            Err(err) => {
                eprintln!("error: {err}");
                exit_code::INPUT_ERROR
            }
        },
        Command::Sweep {
            file,
            param,
            values,
        } => match cli::cmd_sweep(&file, &param, &values, &SolverOverrides::default()) {
            Ok((code, table)) => {
                print!("{table}");
                code
            }
            Err(err) => {
                eprintln!("error: {err}");
                exit_code::INPUT_ERROR
            }
        },
    };
    ExitCode::from(code as u8)
}
