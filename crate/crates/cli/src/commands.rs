use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};
use statespace::estimation::{fit_mle, pack, MleSettings};
use statespace::forgetting::{dobrushin_coefficient, forgetting_curve};
use statespace::hmm::{backward_smooth, fit_em, forward_filter, predict_states};
use statespace::kalman::{kalman_filter, kalman_predict, rts_smoother};
use statespace::particle::{
    bootstrap_filter, fixed_lag_smoother, GaussianStateSpace, ParticleFilterSettings,
    ResampleScheme,
};
use statespace::{
    simulate_hmm, simulate_lgssm, DiscreteHmm, LinearGaussianModel, Model, ObservationSeries,
    SeededGenerator,
};

use crate::document::{model_to_json, parse_model};
use crate::error::{CliError, CliResult};
use crate::output::{format_number, Staged, Table};
use crate::series::{path_table, read_series, series_table};

#[derive(Debug, Parser)]
#[command(
    name = "statespace",
    version,
    about = "Inference for hidden Markov and linear-Gaussian state-space models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a state path and observations from a model
    Simulate(SimulateArgs),
    /// Filtered state laws
    Filter(InferenceArgs),
    /// Smoothed state laws
    Smooth(InferenceArgs),
    /// Log-likelihood of the data
    Loglik(InferenceArgs),
    /// State laws k steps past the end of the data
    Predict(PredictArgs),
    /// Maximum-likelihood fit
    Fit(FitArgs),
    /// Bootstrap particle filter (linear_gaussian models)
    Pf(PfArgs),
    /// Total-variation distance between filters started from two priors
    Forget(ForgetArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Number of time steps
    #[arg(long = "T")]
    len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Observations; the state path goes to `<stem>.states.csv` beside it
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct InferenceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Prediction horizon, at least 1
    #[arg(long)]
    k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Em,
    Mle,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Starting model
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Defaults to em for discrete_hmm and mle for linear_gaussian
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long = "max-iter", default_value_t = 1000)]
    max_iter: usize,
    /// Fitted model document
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scheme {
    Systematic,
    Multinomial,
}

#[derive(Debug, Args)]
struct PfArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1000)]
    particles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Resample when ESS / N falls below this
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, value_enum, default_value_t = Scheme::Systematic)]
    scheme: Scheme,
    /// Also report fixed-lag smoothed means
    #[arg(long)]
    lag: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ForgetArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated probability vector
    #[arg(long = "prior-a")]
    prior_a: String,
    #[arg(long = "prior-b")]
    prior_b: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses arguments, runs one subcommand, prints its summary line and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> CliResult<Value> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Filter(a) => filter(a, false),
        Command::Smooth(a) => filter(a, true),
        Command::Loglik(a) => loglik(a),
        Command::Predict(a) => predict(a),
        Command::Fit(a) => fit(a),
        Command::Pf(a) => pf(a),
        Command::Forget(a) => forget(a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn commit_one(path: Option<&Path>, contents: impl FnOnce() -> String) -> CliResult<()> {
    if let Some(path) = path {
        let mut staged = Staged::default();
        staged.add(path, &contents())?;
        staged.commit()?;
    }
    Ok(())
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

fn probability_table(rows: &[Vec<f64>], first_t: usize) -> Table {
    let k = rows.first().map_or(0, Vec::len);
    let mut columns = vec!["t".to_string()];
    columns.extend(numbered("p", k));
    let mut table = Table::new(columns);
    for (i, row) in rows.iter().enumerate() {
        let mut cells = vec![(first_t + i).to_string()];
        cells.extend(row.iter().map(|v| format_number(*v)));
        table.push(cells);
    }
    table
}

fn gaussian_table(means: &[DVector<f64>], covs: &[DMatrix<f64>], first_t: usize) -> Table {
    let d = means.first().map_or(0, |m| m.len());
    let mut columns = vec!["t".to_string()];
    columns.extend(numbered("m", d));
    for i in 1..=d {
        columns.extend((1..=d).map(|j| format!("P{i}_{j}")));
    }
    let mut table = Table::new(columns);
    for (i, (m, p)) in means.iter().zip(covs).enumerate() {
        let mut cells = vec![(first_t + i).to_string()];
        cells.extend(m.iter().map(|v| format_number(*v)));
        for r in 0..d {
            cells.extend((0..d).map(|c| format_number(p[(r, c)])));
        }
        table.push(cells);
    }
    table
}

fn load(model: &Path, data: &Path) -> CliResult<(Model, ObservationSeries)> {
    Ok((parse_model(model)?, read_series(data)?))
}

fn simulate(a: SimulateArgs) -> CliResult<Value> {
    if a.len == 0 {
        return Err(usage("--T must be at least 1"));
    }
    let model = parse_model(&a.model)?;
    let mut rng = SeededGenerator::new(a.seed);
    let (path, obs) = match &model {
        Model::Discrete(m) => simulate_hmm(m, a.len, &mut rng)?,
        Model::Gaussian(m) => simulate_lgssm(m, a.len, &mut rng)?,
    };
    let states_path = states_path(&a.out);
    let mut staged = Staged::default();
    staged.add(&a.out, &series_table(&obs).to_csv())?;
    staged.add(&states_path, &path_table(&path).to_csv())?;
    staged.commit()?;
    Ok(json!({
        "command": "simulate",
        "T": a.len,
        "seed": a.seed,
        "observations": a.out.display().to_string(),
        "states": states_path.display().to_string(),
    }))
}

/// `dir/name.csv` becomes `dir/name.states.csv`.
fn states_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "simulation".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.states.csv"))
}

fn filter(a: InferenceArgs, smooth: bool) -> CliResult<Value> {
    let (model, obs) = load(&a.model, &a.data)?;
    let (table, log_likelihood) = match &model {
        Model::Discrete(m) => {
            let fwd = forward_filter(m, &obs, None)?;
            let rows = if smooth {
                backward_smooth(m, &obs, &fwd)?.smoothed
            } else {
                fwd.filtered.clone()
            };
            (probability_table(&rows, 1), fwd.log_likelihood)
        }
        Model::Gaussian(m) => {
            let kf = kalman_filter(m, &obs)?;
            let table = if smooth {
                let s = rts_smoother(m, &kf)?;
                gaussian_table(&s.smoothed_means, &s.smoothed_covs, 1)
            } else {
                gaussian_table(&kf.filtered_means, &kf.filtered_covs, 1)
            };
            (table, kf.log_likelihood)
        }
    };
    commit_one(a.out.as_deref(), || table.to_csv())?;
    Ok(json!({
        "command": if smooth { "smooth" } else { "filter" },
        "T": obs.len(),
        "log_likelihood": log_likelihood,
    }))
}

fn loglik(a: InferenceArgs) -> CliResult<Value> {
    let (model, obs) = load(&a.model, &a.data)?;
    let (terms, total) = match &model {
        Model::Discrete(m) => {
            let f = forward_filter(m, &obs, None)?;
            (
                f.normalizers.iter().map(|c| c.ln()).collect::<Vec<_>>(),
                f.log_likelihood,
            )
        }
        Model::Gaussian(m) => {
            let f = kalman_filter(m, &obs)?;
            (f.log_likelihood_terms, f.log_likelihood)
        }
    };
    commit_one(a.out.as_deref(), || {
        let mut table = Table::new(vec!["t".into(), "log_likelihood_term".into()]);
        for (t, v) in terms.iter().enumerate() {
            table.push(vec![(t + 1).to_string(), format_number(*v)]);
        }
        table.to_csv()
    })?;
    Ok(json!({ "command": "loglik", "T": obs.len(), "log_likelihood": total }))
}

fn predict(a: PredictArgs) -> CliResult<Value> {
    if a.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let (model, obs) = load(&a.model, &a.data)?;
    let first_t = obs.len() + 1;
    let (table, log_likelihood) = match &model {
        Model::Discrete(m) => {
            let f = forward_filter(m, &obs, None)?;
            let last = f.filtered.last().expect("series is nonempty");
            (
                probability_table(&predict_states(m, last, a.k)?, first_t),
                f.log_likelihood,
            )
        }
        Model::Gaussian(m) => {
            let f = kalman_filter(m, &obs)?;
            let mean = f.filtered_means.last().expect("series is nonempty");
            let cov = f.filtered_covs.last().expect("series is nonempty");
            let (means, covs): (Vec<_>, Vec<_>) =
                kalman_predict(m, mean, cov, a.k)?.into_iter().unzip();
            (gaussian_table(&means, &covs, first_t), f.log_likelihood)
        }
    };
    commit_one(a.out.as_deref(), || table.to_csv())?;
    Ok(json!({
        "command": "predict",
        "T": obs.len(),
        "k": a.k,
        "log_likelihood": log_likelihood,
    }))
}

fn fit(a: FitArgs) -> CliResult<Value> {
    if !(a.tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    let (model, obs) = load(&a.model, &a.data)?;
    let method = a.method.unwrap_or(match model {
        Model::Discrete(_) => Method::Em,
        Model::Gaussian(_) => Method::Mle,
    });
    let (fitted, log_likelihood, iterations, converged, name): (Model, f64, usize, bool, &str) =
        match (method, &model) {
            (Method::Em, Model::Discrete(m)) => {
                let r = fit_em(m, &obs, a.tol, a.max_iter)?;
                let ll = *r.trace.last().expect("trace holds the starting value");
                (r.model.into(), ll, r.iterations, r.converged, "em")
            }
            (Method::Em, Model::Gaussian(_)) => {
                return Err(usage(
                    "--method em applies to discrete_hmm models; use --method mle",
                ));
            }
            (Method::Mle, _) => {
                let theta0 = pack(&model)?;
                let settings = MleSettings {
                    tol: a.tol,
                    max_iter: a.max_iter,
                    ..MleSettings::default()
                };
                let r = fit_mle(&theta0, &obs, &settings)?;
                (
                    r.model,
                    r.log_likelihood,
                    r.report.iterations,
                    r.report.converged,
                    "mle",
                )
            }
        };
    commit_one(a.out.as_deref(), || {
        let mut text = serde_json::to_string_pretty(&model_to_json(&fitted))
            .expect("model documents serialize");
        text.push('\n');
        text
    })?;
    Ok(json!({
        "command": "fit",
        "method": name,
        "log_likelihood": log_likelihood,
        "iterations": iterations,
        "converged": converged,
    }))
}

fn pf(a: PfArgs) -> CliResult<Value> {
    let (model, obs) = load(&a.model, &a.data)?;
    let Model::Gaussian(m) = &model else {
        return Err(CliError::Data(
            "pf accepts only linear_gaussian model documents".into(),
        ));
    };
    let settings = ParticleFilterSettings {
        particles: a.particles,
        resample_threshold: a.threshold,
        scheme: match a.scheme {
            Scheme::Systematic => ResampleScheme::Systematic,
            Scheme::Multinomial => ResampleScheme::Multinomial,
        },
    };
    let ss = GaussianStateSpace::new(m)?;
    let result = bootstrap_filter(&ss, &obs, &settings, &mut SeededGenerator::new(a.seed))?;
    let smoothed = match a.lag {
        Some(lag) => Some(fixed_lag_smoother(
            &ss,
            &obs,
            &settings,
            lag,
            &mut SeededGenerator::new(a.seed),
        )?),
        None => None,
    };

    commit_one(a.out.as_deref(), || {
        particle_table(
            m,
            &result.filtered_means,
            &result.ess_trace,
            smoothed.as_deref(),
        )
        .to_csv()
    })?;
    Ok(json!({
        "command": "pf",
        "T": obs.len(),
        "particles": a.particles,
        "seed": a.seed,
        "log_likelihood_estimate": result.log_likelihood_estimate,
        "resample_events": result.resample_events.len(),
    }))
}

fn particle_table(
    m: &LinearGaussianModel,
    means: &[DVector<f64>],
    ess: &[f64],
    smoothed: Option<&[DVector<f64>]>,
) -> Table {
    let d = m.state_dim();
    let mut columns = vec!["t".to_string()];
    columns.extend(numbered("m", d));
    columns.push("ess".into());
    if smoothed.is_some() {
        columns.extend(numbered("s", d));
    }
    let mut table = Table::new(columns);
    for (t, mean) in means.iter().enumerate() {
        let mut cells = vec![(t + 1).to_string()];
        cells.extend(mean.iter().map(|v| format_number(*v)));
        cells.push(format_number(ess[t]));
        if let Some(s) = smoothed {
            cells.extend(s[t].iter().map(|v| format_number(*v)));
        }
        table.push(cells);
    }
    table
}

fn parse_prior(text: &str, flag: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("{flag}: \"{}\" is not a number", s.trim())))
        })
        .collect()
}

fn check_prior(p: &[f64], model: &DiscreteHmm, flag: &str) -> CliResult<()> {
    if p.len() != model.states() {
        return Err(usage(format!(
            "{flag} has {} entries, the model has {} states",
            p.len(),
            model.states()
        )));
    }
    let sum: f64 = p.iter().sum();
    if p.iter().any(|v| !(*v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(usage(format!("{flag} is not a probability vector")));
    }
    Ok(())
}

fn forget(a: ForgetArgs) -> CliResult<Value> {
    let prior_a = parse_prior(&a.prior_a, "--prior-a")?;
    let prior_b = parse_prior(&a.prior_b, "--prior-b")?;
    let (model, obs) = load(&a.model, &a.data)?;
    let Model::Discrete(m) = &model else {
        return Err(CliError::Data(
            "forget accepts only discrete_hmm model documents".into(),
        ));
    };
    check_prior(&prior_a, m, "--prior-a")?;
    check_prior(&prior_b, m, "--prior-b")?;
    let curve = forgetting_curve(m, &obs, &prior_a, &prior_b)?;
    commit_one(a.out.as_deref(), || {
        let mut table = Table::new(vec!["t".into(), "tv".into()]);
        for (t, v) in curve.tv.iter().enumerate() {
            table.push(vec![(t + 1).to_string(), format_number(*v)]);
        }
        table.to_csv()
    })?;
    Ok(json!({
        "command": "forget",
        "T": obs.len(),
        "rho_hat": curve.rho_hat,
        "fit_window": [curve.fit_window.start, curve.fit_window.end],
        "dobrushin": dobrushin_coefficient(&m.transition),
        "terminal_tv": curve.tv.last(),
    }))
}
