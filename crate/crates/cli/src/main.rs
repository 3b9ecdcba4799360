use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod io;
mod run;

/// Belief-propagation functional for q-spin systems and checks on its image.
#[derive(Debug, Parser)]
#[command(name = "spinimage", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
#[command(next_help_heading = "Global options")]
pub struct Global {
    /// Seed for every random stream
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Maximum number of states an enumeration may visit
    #[arg(long, global = true, default_value_t = 1 << 24, value_parser = clap::value_parser!(u64).range(1..))]
    pub budget: u64,

    /// Tolerance override for the command's main check
    #[arg(long, global = true, value_parser = positive_f64)]
    pub tol: Option<f64>,

    /// Write JSON here instead of standard output
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// More detail on standard error
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err("must be positive".into())
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the functional and exact Gibbs marginals
    #[command(subcommand)]
    Bp(BpCommand),
    /// Two-spin universal-field identity
    #[command(subcommand)]
    Weitz(WeitzCommand),
    /// Vertex images, hull membership and product-image extrema
    #[command(subcommand)]
    Image(ImageCommand),
    /// Nonconvexity certificates for the special-spin construction
    #[command(subcommand)]
    Counterexample(CounterexampleCommand),
    /// Eigen-signature constructions
    #[command(subcommand)]
    Signature(SignatureCommand),
    /// Product-measure solvability for antiferromagnetic interactions
    #[command(subcommand)]
    Potts(PottsCommand),
    /// Scalar inequality grids
    #[command(subcommand)]
    Inequalities(InequalitiesCommand),
    /// Influence matrices and contraction estimates
    #[command(subcommand)]
    Influence(InfluenceCommand),
}

#[derive(Debug, Subcommand)]
pub enum BpCommand {
    /// F_A(mu) for a joint distribution
    Eval {
        /// Interaction matrix JSON
        #[arg(long)]
        matrix: PathBuf,
        /// Joint distribution JSON
        #[arg(long)]
        dist: PathBuf,
    },
    /// Vertex marginals and log Z by enumeration
    Gibbs {
        /// Graph JSON
        #[arg(long)]
        graph: PathBuf,
        /// Interaction matrix JSON
        #[arg(long)]
        matrix: PathBuf,
        /// External field JSON
        #[arg(long)]
        fields: Option<PathBuf>,
    },
    /// Residual of the vertex recursion at one vertex
    CheckRecursion {
        /// Graph JSON
        #[arg(long)]
        graph: PathBuf,
        /// Interaction matrix JSON
        #[arg(long)]
        matrix: PathBuf,
        /// Vertex to check
        #[arg(long)]
        vertex: usize,
        /// External field JSON
        #[arg(long)]
        fields: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum WeitzCommand {
    /// Compare F(mu) with F of the tilted product measure
    Check {
        /// Interaction matrix JSON
        #[arg(long)]
        matrix: PathBuf,
        /// Joint distribution JSON
        #[arg(long)]
        dist: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum ImageCommand {
    /// F(delta_tau) for every configuration
    Vertices {
        /// Interaction matrix JSON
        #[arg(long)]
        matrix: PathBuf,
        /// Number of neighbour sites
        #[arg(long)]
        d: usize,
    },
    /// Convex-hull membership of a point (JSON array)
    Member {
        /// Interaction matrix JSON
        #[arg(long)]
        matrix: PathBuf,
        /// Number of neighbour sites
        #[arg(long)]
        d: usize,
        /// Point to test, a JSON array
        #[arg(long)]
        point: PathBuf,
    },
    /// Multistart search for the extremum of <o, F(nu)> over products
    Extremize {
        /// Interaction matrix JSON
        #[arg(long)]
        matrix: PathBuf,
        /// Number of neighbour sites
        #[arg(long)]
        d: usize,
        /// JSON array of length q
        #[arg(long)]
        objective: PathBuf,
        /// Multistart restarts
        #[arg(long, default_value_t = spinimage::image::DEFAULT_RESTARTS)]
        restarts: usize,
        /// Gradient iterations per restart
        #[arg(long, default_value_t = spinimage::image::DEFAULT_ITERATIONS)]
        iterations: usize,
        /// Minimize or maximize
        #[arg(long, value_enum, default_value_t = SenseArg::Min)]
        sense: SenseArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SenseArg {
    Min,
    Max,
}

#[derive(Debug, Subcommand)]
pub enum CounterexampleCommand {
    /// Build and check a nonconvexity witness
    Certify {
        /// Interaction strength
        #[arg(long)]
        beta: f64,
        /// Interaction matrix JSON
        #[arg(long)]
        matrix: PathBuf,
        /// Number of neighbour sites
        #[arg(long)]
        d: usize,
        /// Multistart restarts
        #[arg(long, default_value_t = spinimage::image::DEFAULT_RESTARTS)]
        restarts: usize,
        /// Gradient iterations per restart
        #[arg(long, default_value_t = spinimage::image::DEFAULT_ITERATIONS)]
        iterations: usize,
        /// Random product measures in the sweep
        #[arg(long, default_value_t = spinimage::counterexample::DEFAULT_SAMPLES)]
        samples: usize,
    },
    /// Recompute a witness from scratch and compare
    Verify {
        /// Witness JSON written by certify
        #[arg(long)]
        witness: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum SignatureCommand {
    /// Check every k in 0..q
    Scan {
        /// Number of spins
        #[arg(long)]
        q: usize,
        /// Number of neighbour sites
        #[arg(long)]
        d: usize,
        /// Interaction strength
        #[arg(long)]
        beta: f64,
        /// Requested diagonal ratio of the lower block
        #[arg(long, default_value_t = spinimage::signature::DEFAULT_GAMMA)]
        gamma: f64,
    },
    /// Emit the interaction matrix for one k
    Build {
        /// Number of spins
        #[arg(long)]
        q: usize,
        /// Number of neighbour sites
        #[arg(long)]
        d: usize,
        /// Interaction strength
        #[arg(long)]
        beta: f64,
        /// Size of the upper block
        #[arg(long)]
        k: usize,
        /// Requested diagonal ratio of the lower block
        #[arg(long, default_value_t = spinimage::signature::DEFAULT_GAMMA)]
        gamma: f64,
    },
}

#[derive(Debug, Subcommand)]
pub enum PottsCommand {
    /// Solve A x = G(mu)^{1/d} for an i.i.d. product measure
    SolveProduct {
        /// Interaction matrix JSON
        #[arg(long)]
        matrix: PathBuf,
        /// Joint distribution JSON
        #[arg(long)]
        dist: PathBuf,
    },
    /// Evaluate the i.i.d. solvability criterion
    Criterion {
        /// Interaction matrix JSON
        #[arg(long)]
        matrix: PathBuf,
        /// Joint distribution JSON
        #[arg(long)]
        dist: PathBuf,
        /// JSON {"v": [..], "D": [..]}; required for two spins
        #[arg(long)]
        decomposition: Option<PathBuf>,
    },
    /// Solve on sampled tail-passing neighbourhood laws
    Bulk {
        /// Number of spins
        #[arg(long)]
        q: usize,
        /// Number of neighbour sites
        #[arg(long)]
        d: usize,
        /// Interaction strength
        #[arg(long)]
        beta: f64,
        /// Tail parameter
        #[arg(long)]
        eps: f64,
        /// Number of samples
        #[arg(long)]
        n: usize,
        /// Allow parameters outside the proven range; results carry no guarantee
        #[arg(long)]
        unsupported_range: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum InequalitiesCommand {
    /// Check one inequality on its grid
    Check {
        /// Which inequality
        #[arg(long, value_enum)]
        claim: Claim,
        /// Number of neighbour sites
        #[arg(long, default_value_t = 6)]
        d: usize,
        /// Number of spins
        #[arg(long, default_value_t = 3)]
        q: usize,
        /// Tail parameter
        #[arg(long, default_value_t = 0.2)]
        eps: f64,
        /// Grid points
        #[arg(long, default_value_t = spinimage::antiferro::claims::INSANE_GRID)]
        points: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Claim {
    Weird,
    Insane,
}

#[derive(Debug, Subcommand)]
pub enum InfluenceCommand {
    /// Pinned influence matrix with spectrum and norms
    Compute {
        /// Graph JSON
        #[arg(long)]
        graph: PathBuf,
        /// Interaction matrix JSON
        #[arg(long)]
        matrix: PathBuf,
        /// JSON {"assignments": [[v, c], ..]}
        #[arg(long)]
        pinning: Option<PathBuf>,
    },
    /// Sampled Jacobian norm of the transformed recursion
    Contraction {
        /// Interaction matrix JSON
        #[arg(long)]
        matrix: PathBuf,
        /// Degree bound
        #[arg(long)]
        delta: usize,
        /// Potential applied to marginals
        #[arg(long, value_enum, default_value_t = PotentialArg::Log)]
        potential: PotentialArg,
        /// Lower end of the marginal range
        #[arg(long, default_value_t = spinimage::influence::DEFAULT_FLOOR)]
        floor: f64,
        /// Induced norm
        #[arg(long, value_enum, default_value_t = NormArg::L2)]
        norm: NormArg,
        /// Number of samples
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PotentialArg {
    Identity,
    Log,
    Sqrt,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NormArg {
    L1,
    L2,
    Linf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run::run(&cli) {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
