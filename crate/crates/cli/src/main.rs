//! `ada`: check contract models, derive identification stubs, simulate
//! transits, run test campaigns and render assurance reports.

mod output;

use std::io::IsTerminal;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use tracing::{debug, info};

use ada_core::assurance::{assurance_case, render_report, REPORT_SCHEMA_VERSION};
use ada_core::identification::{
    check_responsibility_structure, derive_all_stubs, risk_source_coverage, CausalFactorRecord, ClauseStub,
};
use ada_core::model::{ModelError, MODEL_SCHEMA_VERSION};
use ada_core::refinement::{build_discharge_map, check_refinement, Discharge, DischargeVia};
use ada_core::sbt::campaign::{CampaignReport, CAMPAIGN_SCHEMA_VERSION};
use ada_core::sbt::space::nominal_scenario;
use ada_core::sbt::{classify_verdict, derive_parameter_space, monitors_for, run_campaign, CampaignPlan};
use ada_core::sim::scenario::TRACE_SCHEMA_VERSION;
use ada_core::sim::{run_scenario, MpcsVariant, NoiseMode, ScenarioParams};
use ada_core::{Finding, SystemModel};

use output::OutDir;

fn version_text() -> String {
    format!(
        "{} (model schema {MODEL_SCHEMA_VERSION}, trace schema {TRACE_SCHEMA_VERSION}, campaign schema {CAMPAIGN_SCHEMA_VERSION}, report schema {REPORT_SCHEMA_VERSION})",
        env!("CARGO_PKG_VERSION")
    )
}

#[derive(Debug, Parser)]
#[command(name = "ada", about = "Assume-guarantee contracts and simulation-based testing for an autonomous ferry")]
struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a model: contracts, responsibility structure and refinement.
    Check {
        model: PathBuf,
    },
    /// Derive clause stubs and risk-source coverage from causal factors.
    Identify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        factors: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate one scenario and classify it against the component's contract.
    Simulate(SimulateArgs),
    /// Run a sampling campaign against one component.
    Campaign(CampaignArgs),
    /// Render the assurance report.
    Report {
        #[arg(long)]
        model: PathBuf,
        /// Campaign files (repeatable).
        #[arg(long)]
        campaign: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        threshold: f64,
    },
}

#[derive(Debug, Args)]
struct Variation {
    /// Use the planner variant that drops the accuracy margins.
    #[arg(long)]
    mutant: bool,
    /// Inflate SITAW errors to this multiple of the declared accuracy.
    #[arg(long, value_name = "SCALE")]
    noise: Option<f64>,
}

impl Variation {
    fn variant(&self) -> MpcsVariant {
        if self.mutant {
            MpcsVariant::DropAccuracyMargins
        } else {
            MpcsVariant::Nominal
        }
    }

    fn noise(&self) -> NoiseMode {
        match self.noise {
            Some(scale) => NoiseMode::Violating { scale },
            None => NoiseMode::Bounded,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "MPCS")]
    component: String,
    /// Scenario file to replay (e.g. a shrunk counterexample); defaults to
    /// the nominal scenario of the component's parameter space.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    variation: Variation,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CampaignArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "MPCS")]
    component: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    rounds: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    sigma0: f64,
    #[arg(long, default_value_t = 40)]
    shrink_budget: usize,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    jobs: Option<usize>,
    /// Write every trace to traces/NNNN.ndjson.
    #[arg(long)]
    keep_traces: bool,
    /// Add obstacle maneuver dimensions.
    #[arg(long)]
    maneuvers: bool,
    #[command(flatten)]
    variation: Variation,
    #[arg(long)]
    out: PathBuf,
}

/// Failures that map to exit code 2: unreadable or malformed input.
#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn color_enabled() -> bool {
    std::env::var_os("ADA_NO_COLOR").is_none() && std::io::stdout().is_terminal()
}

fn paint(text: &str, code: &str) -> String {
    if color_enabled() {
        format!("\x1b[{code}m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

fn load_model(path: &Path) -> Result<SystemModel> {
    SystemModel::load(path).map_err(|e| match e {
        ModelError::Io { .. } | ModelError::Parse { .. } | ModelError::Schema(_) => {
            InputError(format!("{}: {e}", path.display())).into()
        }
        other => anyhow::Error::new(other),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        InputError(format!(
            "{}: parse error at line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
        .into()
    })
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn main() -> ExitCode {
    let matches = Cli::command().version(version_text()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_env("ADA_LOG").unwrap_or_else(|_| level.into());
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_ansi(std::env::var_os("ADA_NO_COLOR").is_none() && std::io::stderr().is_terminal())
        .init();

    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{} {e:#}", paint("error:", "31"));
            if e.downcast_ref::<InputError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Check { model } => check(&model),
        Command::Identify { model, factors, out } => identify(&model, &factors, &out),
        Command::Simulate(args) => simulate(&args),
        Command::Campaign(args) => campaign(&args),
        Command::Report {
            model,
            campaign,
            out,
            threshold,
        } => report(&model, &campaign, &out, threshold),
    }
}

fn check(path: &Path) -> Result<ExitCode> {
    let model = load_model(path)?;
    let refinement = check_refinement(&model);
    let mut findings: Vec<Finding> = refinement.findings.clone();
    for f in check_responsibility_structure(&model) {
        if !findings.contains(&f) {
            findings.push(f);
        }
    }
    for f in &findings {
        println!("{f}");
    }
    for (a, d) in &refinement.discharge.entries {
        let via = |v: &DischargeVia| match v {
            DischargeVia::Link => "link",
            DischargeVia::Entailment => "entailment",
        };
        match d {
            Discharge::DischargedBy {
                provider,
                via: v,
                risk_source,
            } => {
                let rs = risk_source.map(|r| format!(", {r}")).unwrap_or_default();
                println!("discharge {a} -> {provider} ({}{rs})", via(v));
            }
            Discharge::Promoted { parent_clause, via: v } => {
                println!("promote {a} -> {parent_clause} ({})", via(v));
            }
            Discharge::Undischarged { reason } => println!("undischarged {a}: {reason:?}"),
        }
    }
    if findings.is_empty() {
        println!("{} {}", paint("PASS", "32"), path.display());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("{} {} ({} findings)", paint("FAIL", "31"), path.display(), findings.len());
        Ok(ExitCode::from(1))
    }
}

fn identify(model_path: &Path, factors_path: &Path, out: &Path) -> Result<ExitCode> {
    let model = load_model(model_path)?;
    let factors: Vec<CausalFactorRecord> = read_json(factors_path)?;
    let stubs = derive_all_stubs(&factors, &model)?;
    let coverage = risk_source_coverage(&model, &factors);
    #[derive(serde::Serialize)]
    struct StubPatch<'a> {
        schema_version: u32,
        model: &'a str,
        stubs: &'a [ClauseStub],
    }
    let patch = StubPatch {
        schema_version: MODEL_SCHEMA_VERSION,
        model: &model.name,
        stubs: &stubs,
    };
    let dir = OutDir::create(out)?;
    dir.write("stubs.json", &to_json(&patch))?;
    dir.write("coverage.csv", &coverage.to_csv())?;
    dir.commit()?;
    println!("{} stubs, {} coverage rows -> {}", stubs.len(), coverage.rows.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn simulate(args: &SimulateArgs) -> Result<ExitCode> {
    let model = load_model(&args.model)?;
    let mut params: ScenarioParams = match &args.scenario {
        Some(p) => read_json(p)?,
        None => {
            let space = derive_parameter_space(&model, &args.component)?;
            nominal_scenario(&space, args.seed)
        }
    };
    if args.scenario.is_none() || args.variation.mutant {
        params.controller.variant = args.variation.variant();
    }
    if args.variation.noise.is_some() {
        params.noise_mode = args.variation.noise();
    }
    let map = build_discharge_map(&model).map_err(|f| anyhow::anyhow!("{}", ada_core::sbt::SbtError::Structure(f)))?;
    let monitors = monitors_for(&model, &args.component, &map)?;
    let trace = run_scenario(&params)?;
    let verdict = classify_verdict(&trace, &monitors, &map)?;
    let dir = OutDir::create(&args.out)?;
    dir.write("trace.ndjson", &trace.to_ndjson())?;
    dir.write("trace.csv", &trace.to_csv())?;
    dir.write("verdict.json", &to_json(&verdict))?;
    dir.commit()?;
    println!(
        "{}: {} (min separation {}) -> {}",
        verdict.scenario_id,
        verdict.classification.label(),
        verdict
            .min_separation_m
            .map_or("n/a".to_string(), |s| format!("{s:.3} m")),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn campaign(args: &CampaignArgs) -> Result<ExitCode> {
    let model = load_model(&args.model)?;
    let space = derive_parameter_space(&model, &args.component)?;
    let plan = CampaignPlan {
        n: args.n,
        k: args.k,
        rounds: args.rounds,
        seed: args.seed,
        sigma0: args.sigma0,
        shrink_budget: args.shrink_budget,
        noise: args.variation.noise(),
        variant: args.variation.variant(),
        maneuvers: args.maneuvers,
        ..CampaignPlan::default()
    };
    let dir = OutDir::create(&args.out)?;
    if args.keep_traces {
        dir.mkdir("traces")?;
    }
    let traces_dir = dir.path().join("traces");
    let write_failures = std::sync::Mutex::new(Vec::new());
    let sink = |v: &ada_core::sbt::ScenarioVerdict, t: &ada_core::sim::Trace| {
        let p = traces_dir.join(format!("{:04}.ndjson", v.index));
        if let Err(e) = std::fs::write(&p, t.to_ndjson()) {
            write_failures.lock().expect("lock").push(format!("{}: {e}", p.display()));
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().context("building worker pool")?;
    info!(id = %plan.campaign_id(&args.component), dims = space.dim(), "campaign start");
    let result = pool.install(|| {
        run_campaign(
            &space,
            &plan,
            &model,
            if args.keep_traces { Some(&sink) } else { None },
        )
    });
    let failures = write_failures.into_inner().expect("lock");
    if let Some(f) = failures.first() {
        bail!("cannot write trace {f}");
    }
    let (report, error) = match result {
        Ok(r) => (r, None),
        Err(f) => (*f.partial, Some(f.error)),
    };
    write_campaign(&dir, &report)?;
    dir.commit()?;
    if let Some(e) = error {
        return Err(anyhow::Error::new(e).context(format!(
            "campaign aborted; partial results in {}",
            args.out.join("campaign.json").display()
        )));
    }
    println!(
        "{}: {} scenarios, {} pass, {} falsified, {} vacuous, coverage {:.3}, min separation {} -> {}",
        report.id,
        report.counts.total,
        report.counts.pass,
        report.counts.falsified,
        report.counts.vacuous,
        report.coverage,
        report
            .min_separation_m
            .map_or("n/a".to_string(), |s| format!("{s:.3} m")),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn write_campaign(dir: &OutDir, report: &CampaignReport) -> Result<()> {
    dir.write("campaign.json", &to_json(report))?;
    if !report.shrunk.is_empty() {
        dir.mkdir("falsified")?;
        for s in &report.shrunk {
            debug!(scenario = %s.scenario_id, sims = s.simulations, "shrunk counterexample");
            dir.write(&format!("falsified/{}.json", s.scenario_id), &to_json(&s.params))?;
        }
    }
    Ok(())
}

fn report(model_path: &Path, campaigns: &[PathBuf], out: &Path, threshold: f64) -> Result<ExitCode> {
    let model = load_model(model_path)?;
    let mut reports: Vec<CampaignReport> = Vec::new();
    for p in campaigns {
        reports.push(read_json(p)?);
    }
    let refinement = check_refinement(&model);
    let claims = assurance_case(&model, &refinement, &reports, threshold)?;
    let bundle = render_report(&model, &refinement, &reports, &claims)?;
    let dir = OutDir::create(out)?;
    dir.write("report.md", &bundle.markdown)?;
    dir.write("report.json", &bundle.json)?;
    dir.write("model.dot", &bundle.dot)?;
    dir.commit()?;
    for c in &claims {
        println!("{} {}", c.clause, c.status.label());
    }
    println!("report -> {}", out.display());
    Ok(ExitCode::SUCCESS)
}
