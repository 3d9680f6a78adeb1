use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use selfcheck_core::annotation::LabelCounts;
use selfcheck_core::consistency::{verify_generation, VerificationResult};
use selfcheck_core::eval::{load_dataset, score_dataset, score_with_sweep, EvalError, EvalReport};
use selfcheck_core::eval::{synthesize, SynthParams, SyntheticDataset};
use selfcheck_core::gateway::{
    load_fixture, Backend, BackendConfig, FixtureBackend, Gateway, GatewayError, LiveBackend,
};
use selfcheck_service::{
    BackendSpec, Backends, ServiceError, SessionManager, SessionState, SessionStore,
};
use thiserror::Error;

#[derive(Parser)]
#[command(
    name = "selfcheck",
    version,
    about = "Check long-form generations against their own samples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Live,
    Fixture,
}

impl BackendKind {
    fn name(self) -> &'static str {
        match self {
            BackendKind::Live => "live",
            BackendKind::Fixture => "fixture",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample, verify and print per-claim scores for one prompt.
    Verify {
        #[arg(long)]
        prompt: String,
        /// Additional samples to compare against.
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, value_enum, default_value = "live")]
        backend: BackendKind,
        /// Fixture table, required with `--backend fixture`.
        #[arg(long)]
        fixture: Option<PathBuf>,
        /// Write the session state as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the session API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = "sessions")]
        store: PathBuf,
        /// Backend used when a request names none.
        #[arg(long, value_enum, default_value = "live")]
        backend: BackendKind,
        /// Fixture table; enables the `fixture` backend selector.
        #[arg(long)]
        fixture: Option<PathBuf>,
    },
    /// Score a labeled dataset and report AUROC and score distributions.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// Additional samples per claim.
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// Also report AUROC for every sample count from 1 to `--samples`.
        #[arg(long)]
        sweep: bool,
        /// Write the full report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write per-claim scores as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// NLI fixture; defaults to `<dataset stem>.fixture.json` when present,
        /// otherwise the live NLI endpoint is used.
        #[arg(long)]
        fixture: Option<PathBuf>,
    },
    /// Write a synthetic labeled dataset and its NLI fixture.
    Synth {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        generations: usize,
        #[arg(long, default_value_t = 0.564)]
        s_rate: f64,
        #[arg(long, default_value_t = 0.156)]
        ns_rate: f64,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Backend(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Backend(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Backend(_) | ServiceError::Store(_) => CliError::Backend(e.to_string()),
            ServiceError::Internal(_) => CliError::Internal(e.to_string()),
            e => CliError::Validation(e.to_string()),
        }
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        ServiceError::from(e).into()
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn config() -> BackendConfig {
    BackendConfig::default().with_env_overrides()
}

fn fixture_backend(path: Option<&Path>) -> Result<Arc<dyn Backend>, CliError> {
    let path =
        path.ok_or_else(|| CliError::Validation("--backend fixture needs --fixture PATH".into()))?;
    Ok(Arc::new(FixtureBackend::new(load_fixture(path).map_err(
        |e| CliError::Validation(format!("{}: {e}", path.display())),
    )?)))
}

fn backend(
    kind: BackendKind,
    fixture: Option<&Path>,
    config: &BackendConfig,
) -> Result<Arc<dyn Backend>, CliError> {
    match kind {
        BackendKind::Fixture => fixture_backend(fixture),
        BackendKind::Live => Ok(Arc::new(LiveBackend::from_env(config)?)),
    }
}

fn print_result(result: &VerificationResult) {
    println!(
        "{:>4}  {:<18}  {:>5}  {:>9}  claim",
        "sent", "id", "score", "S/C/N"
    );
    for cv in &result.claim_verifications {
        let c = LabelCounts::of(&cv.per_sample_labels);
        println!(
            "{:>4}  {:<18}  {:>5.2}  {:>9}  {}",
            cv.claim.sentence_index,
            cv.claim.id,
            cv.consistency_score,
            format!("{}/{}/{}", c.support, c.contradict, c.neutral),
            cv.claim.text
        );
    }
    for u in &result.unverified {
        let text = u
            .claim
            .as_ref()
            .map(|c| c.text.as_str())
            .unwrap_or("(sentence)");
        println!(
            "{:>4}  {:<18}  {:>5}  {:>9}  {text} [{:?}]",
            u.sentence_index, "-", "-", "-", u.reason
        );
    }
}

fn verify(
    prompt: &str,
    samples: usize,
    kind: BackendKind,
    fixture: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if samples == 0 {
        return Err(CliError::Validation("--samples must be at least 1".into()));
    }
    let config = config();
    let gateway = Gateway::new(backend(kind, fixture, &config)?, config);
    let result = verify_generation(prompt, samples + 1, &gateway).map_err(ServiceError::from)?;
    print_result(&result);
    let state = SessionState::new(
        prompt.to_string(),
        samples + 1,
        kind.name().into(),
        result,
        gateway.stats(),
    );
    if let Some(out) = out {
        std::fs::write(out, state.to_json())
            .map_err(|e| CliError::Validation(format!("{}: {e}", out.display())))?;
        info!("wrote {}", out.display());
    }
    Ok(())
}

fn serve(
    port: u16,
    host: &str,
    store: &Path,
    kind: BackendKind,
    fixture: Option<&Path>,
) -> Result<(), CliError> {
    let config = config();
    let mut backends = Backends::new(config);
    if let Some(path) = fixture {
        let table = load_fixture(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        backends = backends.with("fixture", BackendSpec::Fixture(Arc::new(table)));
    } else if kind == BackendKind::Fixture {
        return Err(CliError::Validation(
            "--backend fixture needs --fixture PATH".into(),
        ));
    }
    backends = backends
        .with("live", BackendSpec::Live { api_key: None })
        .with_default(kind.name());
    let manager = Arc::new(SessionManager::new(SessionStore::open(store)?, backends));

    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Internal(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| CliError::Backend(format!("cannot bind {host}:{port}: {e}")))?;
        let addr = listener
            .local_addr()
            .map_err(|e| CliError::Internal(e.to_string()))?;
        eprintln!("listening on http://{addr}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            eprintln!("shutting down");
        };
        selfcheck_service::api::serve(listener, manager, shutdown)
            .await
            .map_err(|e| CliError::Internal(e.to_string()))
    })
}

fn print_report(report: &EvalReport) {
    let show = |x: Option<f64>| x.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into());
    println!("model                 {}", report.model);
    println!("samples               {}", report.samples);
    println!("generations           {}", report.n_generations);
    println!(
        "claims                {} ({:.1} per generation)",
        report.n_claims, report.mean_claims_per_generation
    );
    println!("errored claims        {}", report.errored_claims);
    println!("pooled AUROC          {}", show(report.auroc));
    if let Some(g) = report.generation_auroc {
        println!(
            "per-generation AUROC  {:.3} (var {:.4}, {} generations)",
            g.mean, g.variance, g.count
        );
    }
    if let Some(b) = report.bootstrap_auroc {
        println!(
            "bootstrap AUROC       {:.3} (var {:.5}, {} resamples)",
            b.mean, b.variance, b.count
        );
    }
    println!(
        "mean score S          {} (var {})",
        show(report.mean_score_supported),
        show(report.variance_score_supported)
    );
    println!(
        "mean score NS         {} (var {})",
        show(report.mean_score_not_supported),
        show(report.variance_score_not_supported)
    );
    println!(
        "histogram S           {:?}",
        report.histogram_supported.counts
    );
    println!(
        "histogram NS          {:?}",
        report.histogram_not_supported.counts
    );
    if let Some(sweep) = &report.sweep {
        println!("{:>4}  {:>12}  {:>10}", "n", "pooled AUROC", "mean AUROC");
        for p in sweep {
            println!(
                "{:>4}  {:>12}  {:>10}",
                p.n,
                show(p.pooled_auroc),
                show(p.mean_auroc)
            );
        }
    }
}

fn eval(
    dataset_path: &Path,
    samples: usize,
    sweep: bool,
    out: Option<&Path>,
    csv: Option<&Path>,
    fixture: Option<&Path>,
) -> Result<(), CliError> {
    let dataset = load_dataset(dataset_path)?;
    if dataset.dropped_irrelevant > 0 || dataset.excluded > 0 {
        eprintln!(
            "dropped {} irrelevant claim(s); excluded {} record(s) left without claims",
            dataset.dropped_irrelevant, dataset.excluded
        );
    }
    let detected = SyntheticDataset::fixture_path(dataset_path);
    let fixture = fixture
        .map(Path::to_path_buf)
        .or_else(|| detected.exists().then_some(detected));
    let config = config();
    let backend = match &fixture {
        Some(path) => {
            info!("using NLI fixture {}", path.display());
            fixture_backend(Some(path))?
        }
        None => backend(BackendKind::Live, None, &config)?,
    };
    let gateway = Gateway::new(backend, config);
    let report = if sweep {
        score_with_sweep(&dataset, samples, &gateway)?
    } else {
        score_dataset(&dataset, samples, &gateway)?
    };
    if report.errored_claims == report.n_claims && report.n_claims > 0 {
        let first = report
            .claims
            .iter()
            .find_map(|c| c.error.clone())
            .unwrap_or_default();
        return Err(CliError::Backend(format!(
            "every claim failed to score: {first}"
        )));
    }
    print_report(&report);
    if let Some(out) = out {
        report.write_json(out)?;
        info!("wrote {}", out.display());
    }
    if let Some(path) = csv {
        let file = std::fs::File::create(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        report
            .write_csv(file)
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    Ok(())
}

fn synth(params: SynthParams, out: &Path) -> Result<(), CliError> {
    let data = synthesize(&params)?;
    let fixture = data.write(out)?;
    let claims: usize = data.records.iter().map(|r| r.claims.len()).sum();
    println!(
        "wrote {} generations ({claims} claims) to {}",
        data.records.len(),
        out.display()
    );
    println!("wrote NLI fixture to {}", fixture.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Verify {
            prompt,
            samples,
            backend,
            fixture,
            out,
        } => verify(
            &prompt,
            samples,
            backend,
            fixture.as_deref(),
            out.as_deref(),
        ),
        Command::Serve {
            port,
            host,
            store,
            backend,
            fixture,
        } => serve(port, &host, &store, backend, fixture.as_deref()),
        Command::Eval {
            dataset,
            samples,
            sweep,
            out,
            csv,
            fixture,
        } => eval(
            &dataset,
            samples,
            sweep,
            out.as_deref(),
            csv.as_deref(),
            fixture.as_deref(),
        ),
        Command::Synth {
            seed,
            generations,
            s_rate,
            ns_rate,
            samples,
            out,
        } => synth(
            SynthParams {
                seed,
                generations,
                s_rate,
                ns_rate,
                samples,
                ..SynthParams::default()
            },
            &out,
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
