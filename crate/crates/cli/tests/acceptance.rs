//! End-to-end acceptance run. One PASS/FAIL line per criterion; exits nonzero
//! if any criterion fails or overruns its time limit.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use spinimage::antiferro::{
    bulk_experiment, claims, decompose_rank_one_minus_diag, iid_criterion, solve_product,
    BulkParams, DECOMPOSITION_TOL,
};
use spinimage::bp::{bp, bp_product, check_vertex_recursion, Budget};
use spinimage::counterexample::{column_power_sums, NonconvexityWitness};
use spinimage::graphs::connected_graphs;
use spinimage::image::{hull_membership_in, reconstruction_residual, vertex_images};
use spinimage::influence::{
    contraction_estimate, fd_relative_discrepancy, influence_matrix, sample_messages,
    self_influence_spectrum_ok, NormKind, Potential, PotentialKind,
};
use spinimage::numeric::linf_distance;
use spinimage::rng::{dirichlet, stream, uniform, StreamRng};
use spinimage::signature::{construct_signature_instance, verify_prop_signature};
use spinimage::weitz::weitz_check;
use spinimage::{ExternalField, InteractionMatrix, JointDistribution, Pinning};

const BIN: &str = env!("CARGO_BIN_EXE_spinimage");
const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn families(q: usize) -> Vec<(&'static str, InteractionMatrix)> {
    vec![
        ("hardcore", InteractionMatrix::hardcore_padded(q).unwrap()),
        ("ferro", InteractionMatrix::potts(q, 2.0).unwrap()),
        ("antiferro", InteractionMatrix::potts(q, 0.5).unwrap()),
    ]
}

fn random_fields(rng: &mut StreamRng, n: usize, q: usize) -> ExternalField {
    ExternalField::new(
        (0..n)
            .map(|_| (0..q).map(|_| uniform(rng, 0.2, 3.0)).collect())
            .collect(),
    )
    .unwrap()
}

fn dirichlet_joint(rng: &mut StreamRng, q: usize, d: usize, alpha: f64) -> JointDistribution {
    let w = dirichlet(rng, q.pow(d as u32), alpha);
    JointDistribution::from_unnormalized(q, d, w).unwrap()
}

fn recursion_oracle() -> Outcome {
    let mut rng = stream(SEED, 1);
    let mut worst = 0.0f64;
    let mut checks = 0usize;
    for n in 2..=6 {
        for g in connected_graphs(n) {
            for q in [2, 3] {
                for (_, a) in families(q) {
                    let f = random_fields(&mut rng, n, q);
                    for fields in [None, Some(&f)] {
                        for v in 0..n {
                            let r = check_vertex_recursion(&g, &a, v, fields, Budget::default()).unwrap();
                            worst = worst.max(r);
                            checks += 1;
                        }
                    }
                }
            }
        }
    }
    outcome(worst <= 1e-12, format!("{checks} vertex checks, max residual {worst:.2e}"))
}

fn weitz_identity() -> Outcome {
    let mut rng = stream(SEED, 2);
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let d = 2 + k % 3;
        let e: Vec<f64> = (0..3).map(|_| uniform(&mut rng, 0.05, 3.0)).collect();
        let a = InteractionMatrix::new(vec![vec![e[0], e[1]], vec![e[1], e[2]]]).unwrap();
        // Dirichlet(1) weights are almost surely positive; floor them anyway
        let w: Vec<f64> = dirichlet(&mut rng, 1 << d, 1.0).into_iter().map(|x| x.max(1e-12)).collect();
        let mu = JointDistribution::from_unnormalized(2, d, w).unwrap();
        worst = worst.max(weitz_check(&a, &mu, 1e-10).unwrap().residual);
    }
    outcome(worst <= 1e-10, format!("1000 pairs, max residual {worst:.2e}"))
}

fn hull_reconstruction() -> Outcome {
    let mut rng = stream(SEED, 3);
    let mut shapes = Vec::new();
    for q in 2..=4 {
        for d in 1..=4 {
            for (_, a) in families(q) {
                let images = vertex_images(&a, d, Budget::default()).unwrap();
                shapes.push((a, d, images));
            }
        }
    }
    let mut worst_rec = 0.0f64;
    let mut worst_violation = 0.0f64;
    let mut non_members = 0;
    for k in 0..1000 {
        let (a, d, images) = &shapes[k % shapes.len()];
        let mu = dirichlet_joint(&mut rng, a.q(), *d, 1.0);
        worst_rec = worst_rec.max(reconstruction_residual(a, &mu).unwrap());
        let p = bp(a, &mu).unwrap();
        let m = hull_membership_in(&p, images, 1e-9).unwrap();
        worst_violation = worst_violation.max(m.max_violation);
        if !m.is_member {
            non_members += 1;
        }
    }
    outcome(
        worst_rec <= 1e-12 && non_members == 0,
        format!(
            "1000 draws over {} shapes, max reconstruction {worst_rec:.2e}, max hull violation {worst_violation:.2e}, non-members {non_members}",
            shapes.len()
        ),
    )
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> String {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string(value).unwrap()).unwrap();
    p.to_str().unwrap().to_owned()
}

fn cli(args: &[&str]) -> (Option<i32>, String) {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    (out.status.code(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn counterexample_certificates() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut instances = vec![("ferro".to_owned(), 2.0, InteractionMatrix::potts(3, 2.0).unwrap(), 2)];
    for q in [3, 4, 5] {
        for d in [2, 3] {
            for beta in [1.5, 2.0, 4.0] {
                for k in 0..q {
                    let inst = construct_signature_instance(q, d, beta, k, 0.999).unwrap();
                    instances.push((format!("q{q}d{d}b{beta}k{k}"), beta, inst.a, d));
                }
            }
        }
    }
    let mut problems = Vec::new();
    let mut worst_value = 0.0f64;
    let mut worst_sweep = 0.0f64;
    let mut worst_distance = 0.0f64;
    for (name, beta, a, d) in &instances {
        let matrix = write_json(dir.path(), &format!("{name}.json"), a);
        let witness = dir.path().join(format!("{name}.witness.json"));
        let witness = witness.to_str().unwrap();
        let (code, err) = cli(&[
            "counterexample", "certify", "--beta", &beta.to_string(), "--matrix", &matrix,
            "--d", &d.to_string(), "--seed", "7", "--restarts", "128", "--out", witness,
        ]);
        if code != Some(0) {
            problems.push(format!("{name}: certify exit {code:?}: {}", err.trim()));
            continue;
        }
        let (code, err) = cli(&["counterexample", "verify", "--witness", witness]);
        if code != Some(0) {
            problems.push(format!("{name}: verify exit {code:?}: {}", err.trim()));
        }
        let w: NonconvexityWitness = serde_json::from_str(&fs::read_to_string(witness).unwrap()).unwrap();
        let max = column_power_sums(a, *d).into_iter().fold(0.0, f64::max);
        let expect = 1.0 / (1.0 + max);
        worst_value = worst_value.max((w.extremal_value - expect).abs());
        worst_sweep = worst_sweep.max(expect - w.product_sweep.min_value);
        worst_distance = worst_distance.max(w.optimizer_report.max_optimizer_distance);
        if w.product_sweep.samples < 10_000 {
            problems.push(format!("{name}: sweep used {} samples", w.product_sweep.samples));
        }
    }
    let pass = problems.is_empty() && worst_value <= 1e-12 && worst_sweep <= 1e-12 && worst_distance <= 1e-4;
    let mut detail = format!(
        "{} instances, extremal error {worst_value:.2e}, sweep undershoot {worst_sweep:.2e}, optimizer distance {worst_distance:.2e}",
        instances.len()
    );
    for p in problems.iter().take(3) {
        detail.push_str(&format!("; {p}"));
    }
    outcome(pass, detail)
}

fn signature_sweep() -> Outcome {
    let mut failures = Vec::new();
    let mut count = 0;
    for q in [3, 4, 5] {
        for d in [2, 3] {
            for beta in [1.5, 2.0, 4.0] {
                for k in 0..q {
                    count += 1;
                    let r = verify_prop_signature(q, d, beta, k, 0.999, 1e-9).unwrap();
                    let ok = r.signature.counts() == (k + 2, 0, q - k - 1)
                        && r.two_positive.gram_positive_definite
                        && r.constant_term < 0.0
                        && r.pass;
                    if !ok {
                        failures.push(format!("q={q} d={d} beta={beta} k={k}: {:?}", r.failures));
                    }
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("{count} instances, {} failures {}", failures.len(), failures.first().cloned().unwrap_or_default()),
    )
}

/// A few point masses on configurations that avoid one colour, over a small
/// full-support background. The missing colour pushes the i.i.d. solve
/// negative often enough to exercise both verdicts.
fn colour_gap_mixture(rng: &mut StreamRng, q: usize, d: usize) -> JointDistribution {
    let n = q.pow(d as u32);
    let mut w: Vec<f64> = (0..n).map(|_| 1e-3 * uniform(rng, 0.1, 1.0)).collect();
    let missing = (uniform(rng, 0.0, q as f64) as usize).min(q - 1);
    let others: Vec<usize> = (0..q).filter(|&c| c != missing).collect();
    for _ in 0..3 {
        let idx = (0..d).fold((0, 1), |(acc, place), _| {
            let c = others[(uniform(rng, 0.0, others.len() as f64) as usize).min(others.len() - 1)];
            (acc + c * place, place * q)
        });
        w[idx.0] += uniform(rng, 0.0, 1.0);
    }
    JointDistribution::from_unnormalized(q, d, w).unwrap()
}

fn criterion_equivalence() -> Outcome {
    let mut rng = stream(SEED, 6);
    let mut disagreements = 0;
    let mut worst = 0.0f64;
    let (mut found, mut not_found) = (0, 0);
    for k in 0..1000 {
        let d = if k % 2 == 0 { 4 } else { 6 };
        let v: Vec<f64> = (0..3).map(|_| uniform(&mut rng, 0.5, 1.5)).collect();
        let frac: Vec<f64> = (0..3).map(|_| uniform(&mut rng, 0.05, 0.95)).collect();
        let a = InteractionMatrix::from_fn(3, |b, c| {
            v[b] * v[c] - if b == c { frac[b] * v[b] * v[b] } else { 0.0 }
        })
        .unwrap();
        let mu = match k % 4 {
            3 => colour_gap_mixture(&mut rng, 3, d),
            f => dirichlet_joint(&mut rng, 3, d, [1.0, 0.2, 5.0][f]),
        };
        let dec = decompose_rank_one_minus_diag(&a, DECOMPOSITION_TOL).unwrap();
        let crit = iid_criterion(&dec, &mu).unwrap();
        let solve = solve_product(&a, &mu).unwrap();
        if crit.holds != solve.found {
            disagreements += 1;
        }
        if let Some(nu) = solve.product(d) {
            found += 1;
            worst = worst.max(linf_distance(&bp(&a, &mu).unwrap(), &bp_product(&a, &nu).unwrap()));
        } else {
            not_found += 1;
        }
    }
    outcome(
        disagreements == 0 && worst <= 1e-9 && found > 0 && not_found > 0,
        format!("1000 draws ({found} solvable, {not_found} not), {disagreements} disagreements, max |F(mu)-F(nu)| {worst:.2e}"),
    )
}

fn bulk_confirmation() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (q, d, beta) in [(2, 4, 0.7), (3, 6, 0.6)] {
        let p = BulkParams { q, d, beta, eps: 0.2, samples: 200, seed: SEED, unsupported_range: false };
        let r = bulk_experiment(p, Budget::default()).unwrap();
        pass &= r.failures == 0 && r.successes == 200 && r.dirichlet_samples > 0 && r.gibbs_samples > 0;
        parts.push(format!(
            "(q={q},d={d}) {} solved, {} failed, {} dirichlet + {} gibbs",
            r.successes, r.failures, r.dirichlet_samples, r.gibbs_samples
        ));
    }
    outcome(pass, parts.join("; "))
}

fn inequalities() -> Outcome {
    let (qs, betas) = claims::default_weird_grid();
    let weird = claims::check_claim_weird(&qs, &betas).unwrap();
    let mut pass = weird.min_slack >= -1e-12 && weird.points.len() == 9 * 99;
    let mut detail = format!("weird min slack {:.3e}", weird.min_slack);
    for (d, q, eps) in [(6, 3, 0.2), (20, 4, 0.25), (8, 4, 0.1)] {
        let r = claims::check_claim_insane(d, q, eps, claims::INSANE_GRID).unwrap();
        pass &= r.monotone && r.endpoint <= eps + 1e-12;
        detail.push_str(&format!("; insane({d},{q},{eps}) endpoint {:.4}", r.endpoint));
    }
    outcome(pass, detail)
}

fn influence_checks() -> Outcome {
    let mut worst_row = 0.0f64;
    let mut worst_imag = 0.0f64;
    let mut bad_self = 0;
    let mut reports = 0;
    for n in 2..=5 {
        for g in connected_graphs(n) {
            for q in [2, 3] {
                for (_, a) in families(q) {
                    let mut pinnings = vec![Pinning::empty()];
                    pinnings.extend((0..q).map(|c| Pinning::new(vec![(n - 1, c)]).unwrap()));
                    for p in &pinnings {
                        let r = match influence_matrix(&g, &a, p, Budget::default()) {
                            Ok(r) => r,
                            // a pinning the hard constraint makes impossible
                            Err(spinimage::Error::Infeasible(_)) => continue,
                            Err(e) => panic!("{e}"),
                        };
                        reports += 1;
                        worst_row = worst_row.max(r.max_row_sum());
                        worst_imag = worst_imag.max(r.max_imaginary);
                        for i in 0..r.vertices.len() {
                            if !self_influence_spectrum_ok(&r.block(i, i), &r.marginals[i], 1e-8) {
                                bad_self += 1;
                            }
                        }
                    }
                }
            }
        }
    }

    let mut rng = stream(SEED, 9);
    let mut worst_fd = 0.0f64;
    let kinds = [PotentialKind::Identity, PotentialKind::Log, PotentialKind::Sqrt];
    for k in 0..100 {
        let q = 2 + k % 3;
        let d = 1 + k % 4;
        let e: Vec<f64> = (0..q * q).map(|_| uniform(&mut rng, 0.2, 3.0)).collect();
        let a = InteractionMatrix::from_fn(q, |b, c| e[b.min(c) * q + b.max(c)]).unwrap();
        let phi = Potential::new(kinds[k % 3], 0.01).unwrap();
        let m = sample_messages(&mut rng, q, d, &phi);
        worst_fd = worst_fd.max(fd_relative_discrepancy(&a, &phi, &m).unwrap());
    }

    let ones = InteractionMatrix::all_ones(3).unwrap();
    let mut zero = true;
    for (kind, norm) in [
        (PotentialKind::Log, NormKind::L2),
        (PotentialKind::Identity, NormKind::L1),
        (PotentialKind::Sqrt, NormKind::Linf),
    ] {
        let phi = Potential::new(kind, 1e-3).unwrap();
        let r = contraction_estimate(&ones, 4, phi, norm, 50, SEED).unwrap();
        zero &= r.estimate == 0.0;
    }

    outcome(
        worst_row <= 1e-12 && worst_imag <= 1e-8 && bad_self == 0 && worst_fd <= 1e-6 && zero,
        format!(
            "{reports} influence matrices, max row sum {worst_row:.2e}, max |Im| {worst_imag:.2e}, bad self blocks {bad_self}, FD discrepancy {worst_fd:.2e}, all-ones estimate zero {zero}"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Outcome); 9] = [
        ("1 recursion oracle", 120, recursion_oracle),
        ("2 weitz identity", 30, weitz_identity),
        ("3 hull reconstruction", 60, hull_reconstruction),
        ("4 counterexample certificates", 300, counterexample_certificates),
        ("5 signature sweep", 30, signature_sweep),
        ("6 criterion/solver equivalence", 120, criterion_equivalence),
        ("7 bulk confirmation", 300, bulk_confirmation),
        ("8 scalar inequalities", 10, inequalities),
        ("9 influence checks", 60, influence_checks),
    ];
    let mut all = true;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let r = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let pass = r.pass && in_time;
        all &= pass;
        println!(
            "{} criterion {name}: {} [{:.2}s of {limit}s]",
            if pass { "PASS" } else { "FAIL" },
            r.detail,
            elapsed.as_secs_f64()
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
