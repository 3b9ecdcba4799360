use serde::{Deserialize, Serialize};

use spinimage::antiferro::{
    self, claims, decompose_rank_one_minus_diag, iid_criterion, solve_product, BulkParams,
    RankOneMinusDiag, DECOMPOSITION_TOL,
};
use spinimage::bp::{self, Budget};
use spinimage::counterexample::{self, CertifyOptions, NonconvexityWitness};
use spinimage::image::{self, ExtremumOptions, Sense};
use spinimage::influence::{self, NormKind, Potential, PotentialKind};
use spinimage::signature;
use spinimage::weitz;
use spinimage::{ExternalField, Graph, InteractionMatrix, JointDistribution, Pinning};

use crate::io::{emit, read_json, CliError};
use crate::*;

pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    pub fn code(&self) -> u8 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
        }
    }

    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

type Res = Result<Outcome, CliError>;

const RECURSION_TOL: f64 = 1e-12;

pub fn run(cli: &Cli) -> Res {
    let g = &cli.global;
    let budget = Budget::new(g.budget);
    match &cli.command {
        Command::Bp(c) => run_bp(g, budget, c),
        Command::Weitz(WeitzCommand::Check { matrix, dist }) => {
            let a: InteractionMatrix = read_json(matrix)?;
            let mu: JointDistribution = read_json(dist)?;
            let report = weitz::weitz_check(&a, &mu, g.tol.unwrap_or(weitz::DEFAULT_TOL))?;
            eprintln!("weitz: residual {:.3e} (tol {:e}) {}", report.residual, report.tol, verdict(report.pass));
            emit(g, &report)?;
            Ok(Outcome::from_pass(report.pass))
        }
        Command::Image(c) => run_image(g, budget, c),
        Command::Counterexample(c) => run_counterexample(g, budget, c),
        Command::Signature(c) => run_signature(g, c),
        Command::Potts(c) => run_potts(g, budget, c),
        Command::Inequalities(InequalitiesCommand::Check { claim, d, q, eps, points }) => match claim {
            Claim::Weird => {
                let (qs, betas) = claims::default_weird_grid();
                let report = claims::check_claim_weird(&qs, &betas)?;
                eprintln!("weird: {} points, min slack {:.3e} {}", report.points.len(), report.min_slack, verdict(report.pass));
                emit(g, &report)?;
                Ok(Outcome::from_pass(report.pass))
            }
            Claim::Insane => {
                let report = claims::check_claim_insane(*d, *q, *eps, *points)?;
                eprintln!(
                    "insane: endpoint {:.6} vs eps {}, monotone {} {}",
                    report.endpoint, report.eps, report.monotone, verdict(report.pass)
                );
                emit(g, &report)?;
                Ok(Outcome::from_pass(report.pass))
            }
        },
        Command::Influence(c) => run_influence(g, budget, c),
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn read_fields(path: &Option<std::path::PathBuf>) -> Result<Option<ExternalField>, CliError> {
    path.as_deref().map(read_json).transpose()
}

#[derive(Serialize)]
struct EvalOutput {
    f: Vec<f64>,
    g: Vec<f64>,
}

#[derive(Serialize)]
struct GibbsOutput {
    partition_function: f64,
    log_partition_function: f64,
    marginals: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct RecursionOutput {
    vertex: usize,
    residual: f64,
    tol: f64,
    pass: bool,
}

fn run_bp(g: &Global, budget: Budget, c: &BpCommand) -> Res {
    match c {
        BpCommand::Eval { matrix, dist } => {
            let a: InteractionMatrix = read_json(matrix)?;
            let mu: JointDistribution = read_json(dist)?;
            let out = EvalOutput {
                f: bp::bp(&a, &mu)?,
                g: bp::unnormalized_message(&a, &mu)?,
            };
            eprintln!("bp eval: q = {}, d = {}", mu.q(), mu.d());
            emit(g, &out)?;
            Ok(Outcome::Pass)
        }
        BpCommand::Gibbs { graph, matrix, fields } => {
            let gr: Graph = read_json(graph)?;
            let a: InteractionMatrix = read_json(matrix)?;
            let f = read_fields(fields)?;
            let gb = bp::gibbs(&gr, &a, f.as_ref(), budget)?;
            let out = GibbsOutput {
                partition_function: gb.partition_function,
                log_partition_function: gb.log_partition_function(),
                marginals: (0..gr.n()).map(|v| gb.vertex_marginal(v)).collect(),
            };
            eprintln!("bp gibbs: n = {}, log Z = {:.12}", gr.n(), out.log_partition_function);
            emit(g, &out)?;
            Ok(Outcome::Pass)
        }
        BpCommand::CheckRecursion { graph, matrix, vertex, fields } => {
            let gr: Graph = read_json(graph)?;
            let a: InteractionMatrix = read_json(matrix)?;
            let f = read_fields(fields)?;
            let residual = bp::check_vertex_recursion(&gr, &a, *vertex, f.as_ref(), budget)?;
            let tol = g.tol.unwrap_or(RECURSION_TOL);
            let out = RecursionOutput {
                vertex: *vertex,
                residual,
                tol,
                pass: residual <= tol,
            };
            eprintln!("bp check-recursion: residual {residual:.3e} {}", verdict(out.pass));
            emit(g, &out)?;
            Ok(Outcome::from_pass(out.pass))
        }
    }
}

fn run_image(g: &Global, budget: Budget, c: &ImageCommand) -> Res {
    match c {
        ImageCommand::Vertices { matrix, d } => {
            let a: InteractionMatrix = read_json(matrix)?;
            let images = image::vertex_images(&a, *d, budget)?;
            eprintln!(
                "image vertices: {} configurations, {} infeasible",
                images.images.len(),
                images.infeasible.len()
            );
            emit(g, &images)?;
            Ok(Outcome::Pass)
        }
        ImageCommand::Member { matrix, d, point } => {
            let a: InteractionMatrix = read_json(matrix)?;
            let p: Vec<f64> = read_json(point)?;
            let tol = g.tol.unwrap_or(image::DEFAULT_HULL_TOL);
            let report = image::hull_membership(&p, &a, *d, tol, budget)?;
            eprintln!(
                "image member: {} (violation {:.3e})",
                if report.is_member { "member" } else { "not a member" },
                report.max_violation
            );
            emit(g, &report)?;
            Ok(Outcome::Pass)
        }
        ImageCommand::Extremize { matrix, d, objective, restarts, iterations, sense } => {
            let a: InteractionMatrix = read_json(matrix)?;
            let o: Vec<f64> = read_json(objective)?;
            let sense = match sense {
                SenseArg::Min => Sense::Minimize,
                SenseArg::Max => Sense::Maximize,
            };
            let opts = ExtremumOptions {
                restarts: *restarts,
                iterations: *iterations,
                seed: g.seed,
            };
            let report = image::product_image_extremum(&a, *d, &o, sense, opts)?;
            eprintln!("image extremize: best {:.12} over {} restarts (stochastic)", report.value, report.restarts);
            emit(g, &report)?;
            Ok(Outcome::Pass)
        }
    }
}

#[derive(Serialize)]
struct VerifyOutput {
    verified: bool,
    reason: Option<String>,
}

fn run_counterexample(g: &Global, budget: Budget, c: &CounterexampleCommand) -> Res {
    match c {
        CounterexampleCommand::Certify { beta, matrix, d, restarts, iterations, samples } => {
            let a: InteractionMatrix = read_json(matrix)?;
            let opts = CertifyOptions {
                seed: g.seed,
                restarts: *restarts,
                iterations: *iterations,
                samples: *samples,
            };
            let w = counterexample::certify_nonconvexity(*beta, &a, *d, opts, budget)?;
            eprintln!(
                "certify: extremal value {:.15}, maximizers {:?}, gap {:.3e}",
                w.extremal_value, w.maximizer_set, w.distinct_pair.gap
            );
            emit(g, &w)?;
            Ok(Outcome::Pass)
        }
        CounterexampleCommand::Verify { witness } => {
            let w: NonconvexityWitness = read_json(witness)?;
            let out = match counterexample::verify_witness(&w, budget) {
                Ok(()) => VerifyOutput { verified: true, reason: None },
                Err(spinimage::Error::CheckFailed(reason)) => VerifyOutput {
                    verified: false,
                    reason: Some(reason),
                },
                Err(e) => return Err(e.into()),
            };
            eprintln!("verify: {}", verdict(out.verified));
            if let Some(r) = &out.reason {
                eprintln!("  {r}");
            }
            emit(g, &out)?;
            Ok(Outcome::from_pass(out.verified))
        }
    }
}

fn run_signature(g: &Global, c: &SignatureCommand) -> Res {
    let tol = g.tol.unwrap_or(signature::DEFAULT_EIGEN_TOL);
    match c {
        SignatureCommand::Scan { q, d, beta, gamma } => {
            let reports = signature::scan(*q, *d, *beta, *gamma, tol)?;
            for r in &reports {
                eprintln!(
                    "k = {}: signature {:?}, expected {:?} {}",
                    r.instance.k,
                    r.signature.counts(),
                    r.expected,
                    verdict(r.pass)
                );
                if g.verbose > 0 {
                    for f in &r.failures {
                        eprintln!("  {f}");
                    }
                }
            }
            emit(g, &reports)?;
            Ok(Outcome::from_pass(reports.iter().all(|r| r.pass)))
        }
        SignatureCommand::Build { q, d, beta, k, gamma } => {
            let inst = signature::construct_signature_instance(*q, *d, *beta, *k, *gamma)?;
            eprintln!(
                "signature build: t = {:.15}, gamma = {} ({} pushes)",
                inst.t, inst.gamma, inst.gamma_pushes
            );
            emit(g, &inst.a)?;
            Ok(Outcome::Pass)
        }
    }
}

#[derive(Deserialize)]
struct Decomposition {
    v: Vec<f64>,
    #[serde(rename = "D")]
    d: Vec<f64>,
}

fn run_potts(g: &Global, budget: Budget, c: &PottsCommand) -> Res {
    match c {
        PottsCommand::SolveProduct { matrix, dist } => {
            let a: InteractionMatrix = read_json(matrix)?;
            let mu: JointDistribution = read_json(dist)?;
            let report = solve_product(&a, &mu)?;
            eprintln!(
                "solve-product: {} (rcond {:.3e})",
                if report.found { "product measure found" } else { "no nonnegative solution" },
                report.rcond
            );
            emit(g, &report)?;
            Ok(Outcome::Pass)
        }
        PottsCommand::Criterion { matrix, dist, decomposition } => {
            let a: InteractionMatrix = read_json(matrix)?;
            let mu: JointDistribution = read_json(dist)?;
            let tol = g.tol.unwrap_or(DECOMPOSITION_TOL);
            let dec = match decomposition {
                Some(p) => {
                    let raw: Decomposition = read_json(p)?;
                    RankOneMinusDiag::from_parts(raw.v, raw.d, &a, tol)?
                }
                None => decompose_rank_one_minus_diag(&a, tol)?,
            };
            let report = iid_criterion(&dec, &mu)?;
            eprintln!("criterion: slack {:.3e}, holds {}", report.slack, report.holds);
            emit(g, &report)?;
            Ok(Outcome::Pass)
        }
        PottsCommand::Bulk { q, d, beta, eps, n, unsupported_range } => {
            if *unsupported_range {
                eprintln!("warning: running outside the proven parameter range");
            }
            let params = BulkParams {
                q: *q,
                d: *d,
                beta: *beta,
                eps: *eps,
                samples: *n,
                seed: g.seed,
                unsupported_range: *unsupported_range,
            };
            let report = antiferro::bulk_experiment(params, budget)?;
            eprintln!(
                "bulk: {} solved, {} failed, max residual {:.3e}",
                report.successes, report.failures, report.max_f_residual
            );
            emit(g, &report)?;
            Ok(Outcome::from_pass(report.failures == 0))
        }
    }
}

fn run_influence(g: &Global, budget: Budget, c: &InfluenceCommand) -> Res {
    match c {
        InfluenceCommand::Compute { graph, matrix, pinning } => {
            let gr: Graph = read_json(graph)?;
            let a: InteractionMatrix = read_json(matrix)?;
            let pin: Pinning = match pinning {
                Some(p) => read_json(p)?,
                None => Pinning::empty(),
            };
            let report = influence::influence_matrix(&gr, &a, &pin, budget)?;
            eprintln!(
                "influence: lambda_max {:.12}, max |Im| {:.3e}, max row sum {:.3e}",
                report.lambda_max,
                report.max_imaginary,
                report.max_row_sum()
            );
            emit(g, &report)?;
            Ok(Outcome::Pass)
        }
        InfluenceCommand::Contraction { matrix, delta, potential, floor, norm, n } => {
            let a: InteractionMatrix = read_json(matrix)?;
            let kind = match potential {
                PotentialArg::Identity => PotentialKind::Identity,
                PotentialArg::Log => PotentialKind::Log,
                PotentialArg::Sqrt => PotentialKind::Sqrt,
            };
            let norm = match norm {
                NormArg::L1 => NormKind::L1,
                NormArg::L2 => NormKind::L2,
                NormArg::Linf => NormKind::Linf,
            };
            let phi = Potential::new(kind, *floor)?;
            let report = influence::contraction_estimate(&a, *delta, phi, norm, *n, g.seed)?;
            eprintln!("contraction: sampled max norm {:.6} (estimate, not a bound)", report.estimate);
            emit(g, &report)?;
            Ok(Outcome::Pass)
        }
    }
}
