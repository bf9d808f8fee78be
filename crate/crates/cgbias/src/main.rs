//! `cgbias`: solve, bound, sweep, certify, audit, and generate nonatomic
//! congestion games under behavioral biases.
//!
//! Exit codes: 0 success, 1 input error, 2 non-convergence, 3 audit or
//! verification failure.

use clap::{Args, Parser, Subcommand, ValueEnum};

use cgbias::commands::{
    self, class_cost, cmd_audit, cmd_bpoa, cmd_generate, cmd_opt, cmd_smooth_fit,
    cmd_smooth_verify, cmd_solve, cmd_sweep, CliError, GenerateSpec,
};
use cgbias_core::costfun::{BiasSpec, CostModel};
use cgbias_core::smoothbounds::{CostClass, DEFAULT_DOMAIN};

#[derive(Parser)]
#[command(name = "cgbias", version, about = "Congestion games under behavioral biases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ClassArg {
    Affine,
    Quadratic,
    Cubic,
}

impl ClassArg {
    fn to_class(self) -> CostClass {
        match self {
            ClassArg::Affine => CostClass::Affine,
            ClassArg::Quadratic => CostClass::Quadratic,
            ClassArg::Cubic => CostClass::Poly { d: 3 },
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    /// VI-residual convergence tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Iteration cap per solve.
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    /// Number of perturbed restarts (the worst converged equilibrium wins).
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    /// Seed for restart perturbations.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverArgs {
    fn config(&self) -> cgbias_core::flowsolve::SolverConfig {
        commands::solver_config(self.tol, self.max_iters, self.restarts, self.seed)
    }
}

#[derive(Args)]
struct OutArg {
    /// Write output to this file instead of stdout.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium of the biased (default) or unbiased game.
    Solve {
        file: String,
        /// Solve under perceived costs (the default).
        #[arg(long, conflicts_with = "true_costs")]
        biased: bool,
        /// Solve under true costs instead.
        #[arg(long = "true", conflicts_with = "biased")]
        true_costs: bool,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Social optimum under true costs.
    Opt {
        file: String,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Measured biased price of anarchy, with the analytic bound when known.
    Bpoa {
        file: String,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// CSV of analytic bound vs measured BPoA over a parameter range.
    Sweep {
        /// Cost class of the tight family.
        #[arg(long, value_enum)]
        class: ClassArg,
        /// Bias family: tax or pessimism.
        #[arg(long)]
        bias_family: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: f64,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Fit or verify biased-smoothness constants.
    Smooth {
        #[command(subcommand)]
        action: SmoothAction,
    },
    /// Check an instance against every applicable bound; exit 3 on failure.
    Audit {
        file: String,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        out: OutArg,
    },
    /// Emit a worst-case exhibit as an instance document.
    Generate {
        #[command(subcommand)]
        family: GenerateFamily,
    },
}

#[derive(Args)]
struct SmoothTarget {
    /// Cost class (representative monomial cost).
    #[arg(long, value_enum, conflicts_with = "cost")]
    class: Option<ClassArg>,
    /// Explicit cost descriptor, e.g. '{"poly":[0,1]}'.
    #[arg(long)]
    cost: Option<String>,
    /// Bias descriptor, e.g. '{"tax":{"beta":0.5}}'. Default identity.
    #[arg(long)]
    bias: Option<String>,
    /// Load domain as "lo,hi".
    #[arg(long, default_value = "0,10")]
    domain: String,
    /// Grid resolution per axis.
    #[arg(long, default_value_t = 201)]
    grid: usize,
}

impl SmoothTarget {
    fn resolve(&self) -> Result<(CostModel, BiasSpec, (f64, f64), usize), CliError> {
        let cost = match (&self.class, &self.cost) {
            (Some(c), None) => class_cost(&c.to_class())?,
            (None, Some(text)) => commands::parse_cost(text)?,
            _ => {
                return Err(CliError::Input(
                    "exactly one of --class and --cost is required".into(),
                ))
            }
        };
        let bias = match &self.bias {
            Some(text) => commands::parse_bias(text)?,
            None => BiasSpec::Identity,
        };
        let parts: Vec<&str> = self.domain.split(',').collect();
        let domain = match parts.as_slice() {
            [lo, hi] => match (lo.trim().parse::<f64>(), hi.trim().parse::<f64>()) {
                (Ok(lo), Ok(hi)) if lo < hi => (lo, hi),
                _ => return Err(CliError::Input("bad --domain (want \"lo,hi\")".into())),
            },
            _ => return Err(CliError::Input("bad --domain (want \"lo,hi\")".into())),
        };
        if self.grid < 2 {
            return Err(CliError::Input("--grid must be at least 2".into()));
        }
        Ok((cost, bias, domain, self.grid))
    }
}

#[derive(Subcommand)]
enum SmoothAction {
    /// Fit the smallest mu at fixed lambda on a grid.
    Fit {
        #[command(flatten)]
        target: SmoothTarget,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Verify a (lambda, mu) certificate on a grid.
    Verify {
        #[command(flatten)]
        target: SmoothTarget,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Subcommand)]
enum GenerateFamily {
    /// Pigou instance G_P(a, d).
    Pigou {
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        #[arg(long, default_value_t = 1)]
        d: u32,
        #[arg(long)]
        bias: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Quadratic Braess variation.
    Braess {
        #[arg(long)]
        bias: Option<String>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Braess topology with an adversarial cost-misreporting fraction.
    Adversarial {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        m_exp: u32,
        #[command(flatten)]
        out: OutArg,
    },
    /// Risk-aversion network with unbounded BPoA.
    Risk {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        m: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// The tight Pigou instance for a (class, bias) pair.
    Tightness {
        #[arg(long, value_enum)]
        class: ClassArg,
        #[arg(long)]
        bias: String,
        #[command(flatten)]
        out: OutArg,
    },
}

fn parse_opt_bias(text: &Option<String>) -> Result<BiasSpec, CliError> {
    match text {
        Some(t) => commands::parse_bias(t),
        None => Ok(BiasSpec::Identity),
    }
}

fn run(cli: Cli) -> Result<(String, Option<String>), CliError> {
    match cli.command {
        Command::Solve { file, true_costs, solver, out, .. } => {
            let inst = commands::load_instance(&file)?;
            Ok((cmd_solve(&inst, &solver.config(), true_costs)?, out.out))
        }
        Command::Opt { file, solver, out } => {
            let inst = commands::load_instance(&file)?;
            Ok((cmd_opt(&inst, &solver.config())?, out.out))
        }
        Command::Bpoa { file, solver, out } => {
            let inst = commands::load_instance(&file)?;
            Ok((cmd_bpoa(&inst, &solver.config())?, out.out))
        }
        Command::Sweep { class, bias_family, from, to, step, solver, out } => Ok((
            cmd_sweep(&class.to_class(), &bias_family, from, to, step, &solver.config())?,
            out.out,
        )),
        Command::Smooth { action } => match action {
            SmoothAction::Fit { target, lambda, out } => {
                let (cost, bias, domain, grid) = target.resolve()?;
                let _ = DEFAULT_DOMAIN;
                Ok((cmd_smooth_fit(&cost, &bias, lambda, domain, grid)?, out.out))
            }
            SmoothAction::Verify { target, lambda, mu, out } => {
                let (cost, bias, domain, grid) = target.resolve()?;
                Ok((cmd_smooth_verify(&cost, &bias, lambda, mu, domain, grid)?, out.out))
            }
        },
        Command::Audit { file, solver, out } => {
            let inst = commands::load_instance(&file)?;
            Ok((cmd_audit(&inst, &solver.config())?, out.out))
        }
        Command::Generate { family } => {
            let (spec, out) = match family {
                GenerateFamily::Pigou { a, d, bias, mass, out } => (
                    GenerateSpec::Pigou { a, d, bias: parse_opt_bias(&bias)?, mass },
                    out,
                ),
                GenerateFamily::Braess { bias, out } => {
                    (GenerateSpec::Braess { bias: parse_opt_bias(&bias)? }, out)
                }
                GenerateFamily::Adversarial { eps, m_exp, out } => {
                    (GenerateSpec::Adversarial { eps, m_exp }, out)
                }
                GenerateFamily::Risk { eps, m, out } => (GenerateSpec::Risk { eps, m }, out),
                GenerateFamily::Tightness { class, bias, out } => (
                    GenerateSpec::Tightness {
                        class: class.to_class(),
                        bias: commands::parse_bias(&bias)?,
                    },
                    out,
                ),
            };
            Ok((cmd_generate(&spec)?, out.out))
        }
    }
}

fn emit(text: &str, out: &Option<String>) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok((text, out)) => {
            if let Err(e) = emit(&text, &out) {
                eprintln!("cannot write output: {e}");
                std::process::exit(1);
            }
        }
        Err(e) => {
            // Partial reports (non-convergence, failed audits) still go to
            // the requested sink; the exit code carries the verdict.
            let code = e.exit_code();
            if code == 1 {
                eprintln!("error: {}", e.message());
            } else {
                print!("{}", e.message());
            }
            std::process::exit(code);
        }
    }
}
