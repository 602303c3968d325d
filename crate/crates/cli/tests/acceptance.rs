//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::grid::{grid_posterior, Grid};
use common::{random_hmm, random_scalar_model, to_lgssm};
use statespace::estimation::{fit_mle, fit_mle_masked, pack, Block, MleSettings};
use statespace::forgetting::{
    dobrushin_coefficient, fit_decay_rate, forgetting_curve, forgetting_curve_with_window,
};
use statespace::hmm::{
    backward_smooth, exact_posterior_enumeration, fit_em, forward_filter, viterbi,
};
use statespace::kalman::{kalman_filter, rts_smoother};
use statespace::particle::{
    bootstrap_filter, fixed_lag_smoother, pf_loglik, GaussianStateSpace, ParticleFilterSettings,
    ResampleScheme,
};
use statespace::{
    simulate_hmm, simulate_lgssm, DiscreteHmm, LinearGaussianModel, Model, ObservationSeries,
    SeededGenerator, StatePath,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ok<T, E: std::fmt::Debug>(r: Result<T, E>, what: &str) -> Result<T, String> {
    r.map_err(|e| format!("{what}: {e:?}"))
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

fn benchmark_hmm() -> DiscreteHmm {
    DiscreteHmm::from_rows(
        &[0.5, 0.5],
        &[&[0.9, 0.1], &[0.2, 0.8]],
        &[&[0.95, 0.05], &[0.05, 0.95]],
    )
    .unwrap()
}

fn benchmark_start() -> DiscreteHmm {
    DiscreteHmm::from_rows(
        &[0.5, 0.5],
        &[&[0.8, 0.2], &[0.3, 0.7]],
        &[&[0.85, 0.15], &[0.15, 0.85]],
    )
    .unwrap()
}

fn benchmark_data() -> ObservationSeries {
    simulate_hmm(
        &benchmark_hmm(),
        5000,
        &mut SeededGenerator::new(20_241_015),
    )
    .unwrap()
    .1
}

fn scalar_benchmark() -> LinearGaussianModel {
    LinearGaussianModel::scalar(0.9, 1.0, 0.19, 0.5, 0.0, 1.0).unwrap()
}

fn enumeration_oracle() -> Outcome {
    const TOL: f64 = 1e-10;
    let mut rng = SeededGenerator::new(1_000_003);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let k = 1 + (rng.next_u64() % 4) as usize;
        let m = 1 + (rng.next_u64() % 3) as usize;
        let len = 1 + (rng.next_u64() % 8) as usize;
        let model = random_hmm(k, m, 1e-3, &mut rng);
        let (_, obs) = ok(simulate_hmm(&model, len, &mut rng), "simulate")?;

        let exact = ok(exact_posterior_enumeration(&model, &obs), "enumeration")?;
        let fwd = ok(forward_filter(&model, &obs, None), "forward_filter")?;
        let smooth = ok(backward_smooth(&model, &obs, &fwd), "backward_smooth")?;
        let (path, log_p) = ok(viterbi(&model, &obs), "viterbi")?;

        let errors = [
            max_abs_diff(&fwd.filtered, &exact.filtered),
            max_abs_diff(&smooth.smoothed, &exact.smoothed),
            (fwd.log_likelihood - exact.log_likelihood).abs(),
            (log_p - exact.map_log_probability).abs(),
        ];
        let err = errors.iter().copied().fold(0.0, f64::max);
        ensure!(
            err <= TOL,
            "case {case} (K={k}, M={m}, T={len}): deviation {err:e}"
        );
        ensure!(
            path == StatePath::Discrete(exact.map_path.clone()),
            "case {case}: Viterbi path {path:?} differs from {:?}",
            exact.map_path
        );
        worst = worst.max(err);
    }
    Ok(format!(
        "200 instances, max deviation {worst:.2e} <= {TOL:e}, all paths equal"
    ))
}

fn kalman_vs_grid() -> Outcome {
    const TOL: f64 = 1e-4;
    let grid = Grid::new(-10.0, 10.0, 1e-3);
    let mut rng = SeededGenerator::new(31_337);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let scalar = random_scalar_model(&mut rng);
        let model = to_lgssm(&scalar);
        let len = 1 + (rng.next_u64() % 10) as usize;
        let (_, obs) = ok(simulate_lgssm(&model, len, &mut rng), "simulate")?;
        let ys: Vec<f64> = obs.as_real().unwrap().iter().map(|y| y[0]).collect();

        let kf = ok(kalman_filter(&model, &obs), "kalman_filter")?;
        let rts = ok(rts_smoother(&model, &kf), "rts_smoother")?;
        let oracle = grid_posterior(&scalar, &ys, &grid);
        for t in 0..len {
            let pairs = [
                (kf.filtered_means[t][0], oracle.filtered[t].0),
                (kf.filtered_covs[t][(0, 0)], oracle.filtered[t].1),
                (rts.smoothed_means[t][0], oracle.smoothed[t].0),
                (rts.smoothed_covs[t][(0, 0)], oracle.smoothed[t].1),
            ];
            for (a, b) in pairs {
                let err = (a - b).abs();
                ensure!(err <= TOL, "case {case} t={t}: {a} vs grid {b}");
                worst = worst.max(err);
            }
        }
    }
    Ok(format!(
        "20 models, max moment deviation {worst:.2e} <= {TOL:e}"
    ))
}

fn particle_consistency() -> Outcome {
    const RMSE_TOL: f64 = 0.05;
    const SE_BAND: f64 = 4.0;
    let model = scalar_benchmark();
    let (_, obs) = ok(
        simulate_lgssm(&model, 50, &mut SeededGenerator::new(2_718)),
        "simulate",
    )?;
    let kf = ok(kalman_filter(&model, &obs), "kalman_filter")?;
    let exact: Vec<f64> = kf.filtered_means.iter().map(|m| m[0]).collect();
    let ss = ok(GaussianStateSpace::new(&model), "state space")?;

    let run = |n: usize, seed: u64| -> Result<f64, String> {
        let pf = ok(
            bootstrap_filter(
                &ss,
                &obs,
                &ParticleFilterSettings::new(n),
                &mut SeededGenerator::new(seed),
            ),
            "bootstrap_filter",
        )?;
        let approx: Vec<f64> = pf.filtered_means.iter().map(|m| m[0]).collect();
        Ok(rmse(&approx, &exact))
    };

    let big = run(100_000, 1)?;
    ensure!(big < RMSE_TOL, "N=1e5 RMSE {big} >= {RMSE_TOL}");

    let est = ok(
        pf_loglik(&ss, &obs, &ParticleFilterSettings::new(10_000), 20, 500),
        "pf_loglik",
    )?;
    let se = est.std_error.unwrap();
    let z = (est.mean - kf.log_likelihood) / se;
    ensure!(
        z.abs() <= SE_BAND,
        "pf_loglik {} vs Kalman {} is {z:.2} standard errors away",
        est.mean,
        kf.log_likelihood
    );

    let ladder = [run(100, 7)?, run(1_000, 7)?, run(10_000, 7)?];
    ensure!(
        ladder[0] > ladder[1] && ladder[1] > ladder[2],
        "RMSE ladder not decreasing: {ladder:?}"
    );

    Ok(format!(
        "RMSE(N=1e5) {big:.4}; loglik {:.4} vs {:.4} ({z:+.2} se); RMSE ladder {:.4} > {:.4} > {:.4}",
        est.mean, kf.log_likelihood, ladder[0], ladder[1], ladder[2]
    ))
}

/// States sorted by the first entry of their emission row.
fn canonical_transition(model: &DiscreteHmm) -> Vec<Vec<f64>> {
    let mut order: Vec<usize> = (0..model.states()).collect();
    order.sort_by(|&i, &j| model.emission[(i, 0)].total_cmp(&model.emission[(j, 0)]));
    order
        .iter()
        .map(|&i| order.iter().map(|&j| model.transition[(i, j)]).collect())
        .collect()
}

fn em_monotone_and_recovers() -> Outcome {
    const STEP_TOL: f64 = 1e-9;
    const RECOVERY_TOL: f64 = 0.05;
    let mut rng = SeededGenerator::new(4_242);
    let mut steps = 0;
    for case in 0..10 {
        let k = 2 + case % 3;
        let m = 2 + case % 2;
        let truth = random_hmm(k, m, 0.02, &mut rng);
        let start = random_hmm(k, m, 0.02, &mut rng);
        let (_, obs) = ok(simulate_hmm(&truth, 400, &mut rng), "simulate")?;
        let fit = ok(fit_em(&start, &obs, 1e-10, 300), "fit_em")?;
        for (i, w) in fit.trace.windows(2).enumerate() {
            ensure!(
                w[1] >= w[0] - STEP_TOL,
                "case {case} step {i}: {} -> {}",
                w[0],
                w[1]
            );
        }
        steps += fit.trace.len() - 1;
    }

    let obs = benchmark_data();
    let fit = ok(fit_em(&benchmark_start(), &obs, 1e-8, 1000), "fit_em")?;
    for (i, w) in fit.trace.windows(2).enumerate() {
        ensure!(
            w[1] >= w[0] - STEP_TOL,
            "benchmark step {i}: {} -> {}",
            w[0],
            w[1]
        );
    }
    let got = canonical_transition(&fit.model);
    let want = canonical_transition(&benchmark_hmm());
    let err = max_abs_diff(&got, &want);
    ensure!(err <= RECOVERY_TOL, "fitted transition {got:?} vs {want:?}");
    Ok(format!(
        "{steps} random-fit steps nondecreasing; benchmark transition error {err:.4} <= {RECOVERY_TOL}"
    ))
}

fn mle_cross_checks() -> Outcome {
    const VARIANCE_TOL: f64 = 0.05;
    const NATS: f64 = 0.5;
    let truth = LinearGaussianModel::scalar(1.0, 1.0, 0.0, 2.0, 3.0, 0.0).unwrap();
    let (_, obs) = ok(
        simulate_lgssm(&truth, 2000, &mut SeededGenerator::new(77)),
        "simulate",
    )?;
    let ys: Vec<f64> = obs.as_real().unwrap().iter().map(|y| y[0]).collect();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let closed = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / ys.len() as f64;
    let start = LinearGaussianModel::scalar(1.0, 1.0, 0.0, 1.0, 0.0, 1e6).unwrap();
    let fit = ok(
        fit_mle_masked(
            &start.into(),
            &[Block::R, Block::Mu0],
            &obs,
            &MleSettings::default(),
        ),
        "fit_mle_masked",
    )?;
    let Model::Gaussian(g) = &fit.model else {
        return Err("fit changed family".into());
    };
    let rel = (g.r[(0, 0)] / closed - 1.0).abs();
    ensure!(
        rel < VARIANCE_TOL,
        "variance {} vs closed form {closed}",
        g.r[(0, 0)]
    );

    let obs = benchmark_data();
    let em = ok(fit_em(&benchmark_start(), &obs, 1e-8, 1000), "fit_em")?;
    let theta0 = ok(pack(&benchmark_start().into()), "pack")?;
    let mle = ok(fit_mle(&theta0, &obs, &MleSettings::default()), "fit_mle")?;
    let em_ll = *em.trace.last().unwrap();
    let gap = em_ll - mle.log_likelihood;
    ensure!(
        gap <= NATS,
        "fit_mle {} trails fit_em {em_ll} by {gap}",
        mle.log_likelihood
    );
    Ok(format!(
        "variance relative error {rel:.4} < {VARIANCE_TOL}; EM - MLE log-likelihood {gap:.2e} <= {NATS} nats"
    ))
}

fn forgetting() -> Outcome {
    const SLACK: f64 = 1e-12;
    const TERMINAL: f64 = 1e-4;
    const RATE_TOL: f64 = 1e-10;

    let flat = DiscreteHmm::from_rows(
        &[0.5, 0.3, 0.2],
        &[&[0.6, 0.3, 0.1], &[0.2, 0.5, 0.3], &[0.1, 0.2, 0.7]],
        &[&[0.5, 0.5], &[0.5, 0.5], &[0.5, 0.5]],
    )
    .unwrap();
    let delta = dobrushin_coefficient(&flat.transition);
    let (_, obs) = ok(
        simulate_hmm(&flat, 100, &mut SeededGenerator::new(9)),
        "simulate",
    )?;
    let c = ok(
        forgetting_curve(&flat, &obs, &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]),
        "forgetting_curve",
    )?;
    for t in 0..c.tv.len() - 1 {
        ensure!(
            c.tv[t + 1] <= delta * c.tv[t] + SLACK,
            "contraction fails at t={t}"
        );
    }

    let len = 300;
    let mut rng = SeededGenerator::new(5_150);
    let mut worst_rho = 0.0f64;
    let mut worst_tv = 0.0f64;
    for case in 0..20 {
        let k = 2 + case % 3;
        let m = 2 + case % 2;
        let model = random_hmm(k, m, 0.05, &mut rng);
        let (_, obs) = ok(simulate_hmm(&model, len, &mut rng), "simulate")?;
        let mut a = vec![0.0; k];
        let mut b = vec![0.0; k];
        a[0] = 1.0;
        b[k - 1] = 1.0;
        let c = ok(
            forgetting_curve_with_window(&model, &obs, &a, &b, 0..len / 4),
            "forgetting_curve",
        )?;
        let rho = c.rho_hat.ok_or(format!("case {case}: no rate estimate"))?;
        let terminal = c.tv[len - 1];
        ensure!(rho < 1.0, "case {case}: rho_hat {rho}");
        ensure!(terminal < TERMINAL, "case {case}: terminal TV {terminal:e}");
        worst_rho = worst_rho.max(rho);
        worst_tv = worst_tv.max(terminal);
    }

    let curve: Vec<f64> = (0..80).map(|t| 0.7 * 0.85f64.powi(t)).collect();
    let rate = ok(fit_decay_rate(&curve, 0..80), "fit_decay_rate")?;
    ensure!(
        (rate - 0.85).abs() <= RATE_TOL,
        "geometric rate {rate} vs 0.85"
    );

    Ok(format!(
        "contraction holds (delta {delta:.3}); 20 models max rho_hat {worst_rho:.3}, max terminal TV {worst_tv:.1e}; \
         geometric rate error {:.1e}",
        (rate - 0.85).abs()
    ))
}

fn performance() -> Outcome {
    const HMM_BUDGET: Duration = Duration::from_secs(1);
    const PF_BUDGET: Duration = Duration::from_secs(10);
    let mut rng = SeededGenerator::new(10);
    let model = random_hmm(10, 5, 0.01, &mut rng);
    let (_, obs) = ok(simulate_hmm(&model, 10_000, &mut rng), "simulate")?;
    let start = Instant::now();
    ok(forward_filter(&model, &obs, None), "forward_filter")?;
    let hmm = start.elapsed();
    ensure!(hmm < HMM_BUDGET, "forward_filter took {hmm:?}");

    let lg = scalar_benchmark();
    let (_, obs) = ok(simulate_lgssm(&lg, 1_000, &mut rng), "simulate")?;
    let ss = ok(GaussianStateSpace::new(&lg), "state space")?;
    let start = Instant::now();
    ok(
        bootstrap_filter(
            &ss,
            &obs,
            &ParticleFilterSettings::new(10_000),
            &mut SeededGenerator::new(1),
        ),
        "bootstrap_filter",
    )?;
    let pf = start.elapsed();
    ensure!(pf < PF_BUDGET, "bootstrap_filter took {pf:?}");
    Ok(format!(
        "forward_filter K=10 T=1e4 in {hmm:.2?}; bootstrap_filter N=1e4 T=1e3 in {pf:.2?}"
    ))
}

fn library_fingerprint() -> Result<String, String> {
    let hmm = benchmark_hmm();
    let lg = scalar_benchmark();
    let ss = ok(GaussianStateSpace::new(&lg), "state space")?;
    let mut out = String::new();

    let mut rng = SeededGenerator::new(99);
    out += &format!("{:?}", (0..16).map(|_| rng.next_u64()).collect::<Vec<_>>());
    out += &format!(
        "{:?}",
        (0..16).map(|_| rng.standard_normal()).collect::<Vec<_>>()
    );
    let mut lane = SeededGenerator::stream(99, 3, 4);
    out += &format!("{:?}", (0..4).map(|_| lane.uniform()).collect::<Vec<_>>());

    let hmm_sim = ok(
        simulate_hmm(&hmm, 50, &mut SeededGenerator::new(5)),
        "simulate_hmm",
    )?;
    let lg_sim = ok(
        simulate_lgssm(&lg, 50, &mut SeededGenerator::new(5)),
        "simulate_lgssm",
    )?;
    out += &format!("{hmm_sim:?}{lg_sim:?}");
    for scheme in [ResampleScheme::Systematic, ResampleScheme::Multinomial] {
        let settings = ParticleFilterSettings {
            particles: 500,
            resample_threshold: 0.5,
            scheme,
        };
        let pf = ok(
            bootstrap_filter(&ss, &lg_sim.1, &settings, &mut SeededGenerator::new(3)),
            "bootstrap_filter",
        )?;
        let lag = ok(
            fixed_lag_smoother(&ss, &lg_sim.1, &settings, 3, &mut SeededGenerator::new(3)),
            "smoother",
        )?;
        out += &format!("{pf:?}{lag:?}");
    }
    let est = ok(
        pf_loglik(&ss, &lg_sim.1, &ParticleFilterSettings::new(300), 4, 11),
        "pf_loglik",
    )?;
    out += &format!("{est:?}");
    Ok(out)
}

struct CliCase {
    name: &'static str,
    args: &'static [&'static str],
}

const CLI_CASES: &[CliCase] = &[
    CliCase {
        name: "simulate",
        args: &[
            "simulate", "--model", "m.json", "--T", "40", "--seed", "3", "--out", "sim.csv",
        ],
    },
    CliCase {
        name: "filter",
        args: &[
            "filter", "--model", "m.json", "--data", "y.csv", "--out", "out.csv",
        ],
    },
    CliCase {
        name: "smooth",
        args: &[
            "smooth", "--model", "g.json", "--data", "gy.csv", "--out", "out.csv",
        ],
    },
    CliCase {
        name: "loglik",
        args: &["loglik", "--model", "g.json", "--data", "gy.csv"],
    },
    CliCase {
        name: "predict",
        args: &[
            "predict", "--model", "m.json", "--data", "y.csv", "--k", "4", "--out", "out.csv",
        ],
    },
    CliCase {
        name: "fit",
        args: &[
            "fit", "--model", "m.json", "--data", "y.csv", "--out", "fit.json",
        ],
    },
    CliCase {
        name: "pf",
        args: &[
            "pf",
            "--model",
            "g.json",
            "--data",
            "gy.csv",
            "--particles",
            "400",
            "--seed",
            "8",
            "--lag",
            "2",
            "--out",
            "out.csv",
        ],
    },
    CliCase {
        name: "forget",
        args: &[
            "forget",
            "--model",
            "m.json",
            "--data",
            "y.csv",
            "--prior-a",
            "1,0",
            "--prior-b",
            "0,1",
            "--out",
            "out.csv",
        ],
    },
];

fn prepare(dir: &Path) -> Result<(), String> {
    let bin = env!("CARGO_BIN_EXE_statespace");
    std::fs::write(
        dir.join("m.json"),
        ok(
            serde_json::to_string(&statespace_cli::model_to_json(&benchmark_hmm().into())),
            "json",
        )?,
    )
    .map_err(|e| e.to_string())?;
    std::fs::write(
        dir.join("g.json"),
        ok(
            serde_json::to_string(&statespace_cli::model_to_json(&scalar_benchmark().into())),
            "json",
        )?,
    )
    .map_err(|e| e.to_string())?;
    for (model, out) in [("m.json", "y.csv"), ("g.json", "gy.csv")] {
        let status = ok(
            Command::new(bin)
                .args([
                    "simulate", "--model", model, "--T", "120", "--seed", "1", "--out", out,
                ])
                .current_dir(dir)
                .output(),
            "spawn",
        )?;
        ensure!(
            status.status.success(),
            "setup simulate failed: {}",
            String::from_utf8_lossy(&status.stderr)
        );
    }
    Ok(())
}

/// Exit status, stdout, stderr and every file in the directory after one run.
fn cli_snapshot(case: &CliCase) -> Result<Vec<u8>, String> {
    let dir = ok(tempfile::tempdir(), "tempdir")?;
    prepare(dir.path())?;
    let out = ok(
        Command::new(env!("CARGO_BIN_EXE_statespace"))
            .args(case.args)
            .current_dir(dir.path())
            .output(),
        "spawn",
    )?;
    ensure!(
        out.status.success(),
        "{} failed: {}",
        case.name,
        String::from_utf8_lossy(&out.stderr)
    );
    let mut snap = format!("{:?}\n", out.status.code()).into_bytes();
    snap.extend(&out.stdout);
    snap.extend(&out.stderr);
    let mut names: Vec<_> = ok(std::fs::read_dir(dir.path()), "read_dir")?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    names.sort();
    for name in names {
        snap.extend(name.to_string_lossy().as_bytes());
        snap.extend(ok(std::fs::read(dir.path().join(&name)), "read")?);
    }
    Ok(snap)
}

fn determinism() -> Outcome {
    let first = library_fingerprint()?;
    let second = library_fingerprint()?;
    ensure!(first == second, "library outputs differ between runs");
    for case in CLI_CASES {
        let a = cli_snapshot(case)?;
        let b = cli_snapshot(case)?;
        ensure!(a == b, "subcommand {} is not byte-reproducible", case.name);
    }
    Ok(format!(
        "library fingerprint of {} bytes identical; {} subcommands byte-identical",
        first.len(),
        CLI_CASES.len()
    ))
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    check: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            name: "enumeration oracle",
            budget: Duration::from_secs(10),
            check: enumeration_oracle,
        },
        Criterion {
            name: "Kalman vs grid quadrature",
            budget: Duration::from_secs(60),
            check: kalman_vs_grid,
        },
        Criterion {
            name: "particle filter consistency",
            budget: Duration::from_secs(120),
            check: particle_consistency,
        },
        Criterion {
            name: "EM monotonicity and recovery",
            budget: Duration::from_secs(30),
            check: em_monotone_and_recovers,
        },
        Criterion {
            name: "MLE cross-checks",
            budget: Duration::from_secs(60),
            check: mle_cross_checks,
        },
        Criterion {
            name: "forgetting",
            budget: Duration::from_secs(30),
            check: forgetting,
        },
        Criterion {
            name: "performance floor",
            budget: Duration::from_secs(11),
            check: performance,
        },
        Criterion {
            name: "determinism",
            budget: Duration::from_secs(120),
            check: determinism,
        },
    ];

    let mut failures = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = (c.check)();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(detail) if elapsed < c.budget => (true, detail),
            Ok(detail) => (false, format!("{detail}; over the time budget")),
            Err(reason) => (false, reason),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {} [{}] {} ({:.2} s / {} s): {}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            c.name,
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
