use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gwot_cli::{cmd_generate, cmd_run, cmd_summarize, Method, RunConfig};

#[derive(Parser)]
#[command(name = "gwot", version, about = "Gromov-Wasserstein graph alignment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the benchmark instances to <out>/instances.
    Generate(InstanceArgs),
    /// Run every method on every instance and write <out>/results.csv.
    Run(RunArgs),
    /// Average a results file per (method, epsilon, n).
    Summarize {
        results: PathBuf,
        /// Directory for summary.csv and summary.txt (defaults to the results directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InstanceArgs {
    /// Graph sizes, comma separated.
    #[arg(long = "n", value_delimiter = ',', default_value = "100")]
    sizes: Vec<usize>,
    /// Instances per size.
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    #[arg(long, default_value_t = 0.2)]
    p_edge: f64,
    /// Probability of flipping each node pair of the second graph.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    instances: InstanceArgs,
    #[arg(long, value_delimiter = ',', default_value = "ipg,cg,epgd,ppa,bapg")]
    methods: Vec<String>,
    /// Regularisation grid for the entropic methods.
    #[arg(long, value_delimiter = ',', default_value = "1e-3,1e-2,1e-1,1")]
    epsilons: Vec<f64>,
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Step parameter as a multiple of the Lipschitz constant.
    #[arg(long, default_value_t = 1.01)]
    gamma_factor: f64,
    /// Decay exponent of the inexactness schedule.
    #[arg(long, default_value_t = 3.0)]
    alpha: f64,
    /// Worker threads; runs are parallel, solvers are not.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write time_s = 0 so repeated runs are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

impl InstanceArgs {
    fn config(self) -> RunConfig {
        RunConfig {
            sizes: self.sizes,
            seeds: self.seeds,
            p_edge: self.p_edge,
            eta: self.eta,
            base_seed: self.base_seed,
            output_dir: self.out,
            ..RunConfig::default()
        }
    }
}

impl RunArgs {
    fn config(self) -> anyhow::Result<RunConfig> {
        let methods = self.methods.iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>, _>>()?;
        Ok(RunConfig {
            methods,
            epsilons: self.epsilons,
            max_iter: self.max_iter,
            tol: self.tol,
            gamma_factor: self.gamma_factor,
            alpha: self.alpha,
            jobs: self.jobs,
            no_timing: self.no_timing,
            ..self.instances.config()
        })
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(args) => {
            let written = cmd_generate(&args.config())?;
            println!("wrote {} instance files", written.len());
        }
        Command::Run(args) => {
            let config = args.config()?;
            let path = cmd_run(&config)?;
            println!("wrote {} rows to {}", config.expected_rows(), path.display());
        }
        Command::Summarize { results, out } => {
            let dir = out.unwrap_or_else(|| results.parent().map(PathBuf::from).unwrap_or_default());
            let (_, text) = cmd_summarize(&results, &dir)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
