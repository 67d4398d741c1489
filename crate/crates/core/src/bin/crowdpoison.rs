//! Command-line front end over the `crowdpoison` library.
//!
//! Every subcommand reads an optional experiment configuration (TOML) and
//! lets flags override individual keys; the key each flag sets is shown in
//! `--help`. The effective configuration is written next to the outputs.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crowdpoison::attack::{build_attack_plan, AttackPlan};
use crowdpoison::data::{
    export_ground_truth, export_observations, export_poisoned, generate_synthetic, read_aggregate,
    write_aggregate, write_malicious_values, write_reliability, write_removed_workers, Schema,
};
use crowdpoison::experiment::{
    emit_report, execute_attack, execute_defense, load_report, run_experiment, AttackKind, DatasetSpec,
    DefenseKind, ExperimentConfig, ReportFormat, SweepResult,
};
use crowdpoison::{average_estimation_error, AggregationState, Error, ItemId, ModelKind, Result, RunDescriptor};

#[derive(Parser, Debug)]
#[command(name = "crowdpoison", version, about = "Poisoning attacks and defenses for crowdsourced truth discovery")]
#[command(after_help = "Exit status: 0 on success, 2 when some sweep trials failed, 1 on configuration or input errors.\n\
Log verbosity follows RUST_LOG (default: info).")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a synthetic dataset and its ground truth.
    ///
    /// Writes observations.csv, truth_items.csv and truth_workers.csv.
    Generate(Common),
    /// Run the server model (CRH or GTM) on a dataset.
    ///
    /// Writes aggregate.csv and reliability.csv.
    Aggregate(Common),
    /// Plan and run one attack on a dataset.
    ///
    /// Uses the first attack and knowledge fraction and `base_seed` as the
    /// trial seed. Writes malicious_values.csv, poisoned.csv (flagged),
    /// plan.json and before.csv, the clean aggregate.
    Attack(Common),
    /// Aggregate a (possibly poisoned) dataset under the configured defense.
    ///
    /// Writes aggregate.csv, reliability.csv and, for MIE,
    /// removed_workers.csv.
    Defend(Common),
    /// Score an attacked aggregate against the clean one on the targets.
    ///
    /// Writes result.csv and result.json.
    Evaluate(EvaluateArgs),
    /// Run a full seeded sweep over attack and knowledge fractions.
    ///
    /// Writes result.csv and result.json; the JSON carries the config.
    Sweep(SweepArgs),
    /// Print the per-point table of a sweep result, optionally converting it.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct Common {
    #[command(flatten)]
    overrides: Overrides,
    /// Directory for output files.
    #[arg(long, short, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Experiment configuration file (TOML). Flags override its keys.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Observation file to load instead of synthetic data [config: dataset.file.path]
    #[arg(long)]
    input: Option<PathBuf>,
    /// Layout of --input: generic, emotion or weather [config: dataset.file.schema]
    #[arg(long)]
    schema: Option<Schema>,
    /// Synthetic worker count [config: dataset.synthetic.num_workers]
    #[arg(long)]
    workers: Option<usize>,
    /// Synthetic item count [config: dataset.synthetic.num_items]
    #[arg(long)]
    items: Option<usize>,
    /// Synthetic observation count [config: dataset.synthetic.num_values]
    #[arg(long)]
    values: Option<usize>,
    /// Synthetic data seed [config: dataset.synthetic.seed]
    #[arg(long)]
    data_seed: Option<u64>,
    /// Server model: crh or gtm [config: model]
    #[arg(long)]
    model: Option<ModelKind>,
    /// none, random, maximum, full_knowledge or partial_knowledge [config: attack]
    #[arg(long)]
    attack: Option<AttackKind>,
    /// none, mwa or mie [config: defense]
    #[arg(long)]
    defense: Option<DefenseKind>,
    /// Comma-separated malicious shares in (0, 0.5) [config: attack_fractions]
    #[arg(long, alias = "attack-fraction", value_delimiter = ',')]
    attack_fractions: Option<Vec<f64>>,
    /// Comma-separated attacker knowledge shares in (0, 1] [config: knowledge_fractions]
    #[arg(long, alias = "knowledge-fraction", value_delimiter = ',')]
    knowledge_fractions: Option<Vec<f64>>,
    /// Targeted items per trial [config: num_targets]
    #[arg(long)]
    num_targets: Option<usize>,
    /// Trials per sweep point [config: trials]
    #[arg(long)]
    trials: Option<usize>,
    /// Seed of trial 0; trial k uses base_seed + k [config: base_seed]
    #[arg(long)]
    base_seed: Option<u64>,
    /// Worker threads [config: jobs]
    #[arg(long, short)]
    jobs: Option<usize>,
    /// Bootstrap replicates of the partial-knowledge attack [config: partial.bootstrap_rounds]
    #[arg(long)]
    bootstrap_rounds: Option<usize>,
    /// Use plain means instead of bootstrap estimates [config: partial.use_bootstrap = false]
    #[arg(long)]
    no_bootstrap: bool,
    /// MWA group count [config: mwa.num_groups]
    #[arg(long)]
    num_groups: Option<usize>,
    /// Share of workers MIE removes [config: mie.assumed_attack_fraction]
    #[arg(long)]
    assumed_attack_fraction: Option<f64>,
}

impl Overrides {
    fn resolve(&self, needs_targets: bool) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_path(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(path) = &self.input {
            cfg.dataset = DatasetSpec::File {
                path: path.clone(),
                schema: self.schema.unwrap_or_default(),
            };
        } else if let (Some(s), DatasetSpec::File { schema, .. }) = (self.schema, &mut cfg.dataset) {
            *schema = s;
        }
        let synthetic = [self.workers, self.items, self.values].iter().any(Option::is_some) || self.data_seed.is_some();
        if synthetic {
            let DatasetSpec::Synthetic(syn) = &mut cfg.dataset else {
                return Err(Error::InvalidConfig("synthetic flags given but the dataset is a file".into()));
            };
            if let Some(v) = self.workers {
                syn.num_workers = v;
            }
            if let Some(v) = self.items {
                syn.num_items = v;
            }
            if let Some(v) = self.values {
                syn.num_values = v;
            }
            if let Some(v) = self.data_seed {
                syn.seed = v;
            }
        }
        macro_rules! set {
            ($($flag:ident => $($key:ident).+),* $(,)?) => {
                $(if let Some(v) = &self.$flag { cfg.$($key).+ = v.clone().into(); })*
            };
        }
        set! {
            model => model,
            attack => attack,
            defense => defense,
            attack_fractions => attack_fractions,
            knowledge_fractions => knowledge_fractions,
            num_targets => num_targets,
            trials => trials,
            base_seed => base_seed,
            jobs => jobs,
            bootstrap_rounds => partial.bootstrap_rounds,
            num_groups => mwa.num_groups,
            assumed_attack_fraction => mie.assumed_attack_fraction,
        }
        if self.no_bootstrap {
            cfg.partial.use_bootstrap = false;
        }
        if needs_targets {
            cfg.validate()?;
        } else {
            cfg.validate_settings()?;
        }
        if let Some(n) = cfg.jobs {
            // Bounds MIE's per-worker reruns too, not only the trial pool.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Clean aggregate (item_id,value)
    #[arg(long)]
    before: PathBuf,
    /// Attacked aggregate (item_id,value)
    #[arg(long)]
    after: PathBuf,
    /// Attack plan whose targets are scored
    #[arg(long, required_unless_present = "targets")]
    plan: Option<PathBuf>,
    /// Comma-separated target item ids, instead of --plan
    #[arg(long, value_delimiter = ',', conflicts_with = "plan")]
    targets: Option<Vec<u32>>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, short, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Report formats to write
    #[arg(long, value_delimiter = ',', default_value = "csv,json")]
    format: Vec<ReportFormat>,
    #[arg(long, short, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// result.csv or result.json
    #[arg(long, short)]
    input: PathBuf,
    /// Also write the report in these formats
    #[arg(long, value_delimiter = ',')]
    format: Vec<ReportFormat>,
    /// Directory for converted files
    #[arg(long, short, default_value = "out")]
    out_dir: PathBuf,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_metadata(dir: &Path, command: &str, cfg: &ExperimentConfig, extra: serde_json::Value) -> Result<()> {
    let meta = json!({ "command": command, "config": cfg, "details": extra });
    fs::write(dir.join("run.json"), serde_json::to_string_pretty(&meta)?)?;
    fs::write(dir.join("config.toml"), cfg.to_toml_string()?)?;
    Ok(())
}

fn prepare(c: &Common, needs_targets: bool) -> Result<ExperimentConfig> {
    let cfg = c.overrides.resolve(needs_targets)?;
    fs::create_dir_all(&c.out_dir)?;
    Ok(cfg)
}

fn generate(c: &Common) -> Result<()> {
    let cfg = prepare(c, false)?;
    let DatasetSpec::Synthetic(syn) = &cfg.dataset else {
        return Err(Error::InvalidConfig("generate needs a synthetic dataset".into()));
    };
    let (obs, truth) = generate_synthetic(syn)?;
    export_observations(&obs, c.out_dir.join("observations.csv"))?;
    export_ground_truth(&truth, c.out_dir.join("truth_items.csv"), c.out_dir.join("truth_workers.csv"))?;
    log::info!("wrote {} observations to {}", obs.len(), c.out_dir.display());
    write_metadata(&c.out_dir, "generate", &cfg, json!({ "observations": obs.len() }))
}

fn write_state(dir: &Path, state: &AggregationState) -> Result<()> {
    write_aggregate(state, create(dir, "aggregate.csv")?)?;
    write_reliability(state, create(dir, "reliability.csv")?)
}

fn aggregate(c: &Common) -> Result<()> {
    let cfg = prepare(c, false)?;
    let obs = cfg.dataset.load()?;
    let state = cfg.server_model().run(&obs)?;
    write_state(&c.out_dir, &state)?;
    log::info!("{} after {} iterations (converged: {})", cfg.model, state.iterations, state.converged);
    write_metadata(
        &c.out_dir,
        "aggregate",
        &cfg,
        json!({ "iterations": state.iterations, "converged": state.converged }),
    )
}

fn attack(c: &Common) -> Result<()> {
    let cfg = prepare(c, true)?;
    if cfg.attack == AttackKind::None {
        log::warn!("attack is `none`; no malicious values will be produced");
    }
    let obs = cfg.dataset.load()?;
    let (alpha, knowledge, seed) = (cfg.attack_fractions[0], cfg.effective_knowledge_fractions()[0], cfg.base_seed);
    let plan = build_attack_plan(&obs, alpha, cfg.targets()?, seed)?;
    let before = cfg.server_model().run(&obs)?;
    let mal = execute_attack(&cfg, &obs, &plan, knowledge, seed)?;
    write_malicious_values(&mal, create(&c.out_dir, "malicious_values.csv")?)?;
    export_poisoned(&obs, &mal, c.out_dir.join("poisoned.csv"))?;
    write_aggregate(&before, create(&c.out_dir, "before.csv")?)?;
    fs::write(c.out_dir.join("plan.json"), serde_json::to_string_pretty(&plan)?)?;
    log::info!(
        "{} malicious workers, {} values on {} targets",
        plan.malicious_pool.len(),
        mal.len(),
        plan.targets.len()
    );
    write_metadata(
        &c.out_dir,
        "attack",
        &cfg,
        json!({ "attack_fraction": alpha, "knowledge_fraction": knowledge, "seed": seed }),
    )
}

fn defend(c: &Common) -> Result<()> {
    let cfg = prepare(c, false)?;
    let obs = cfg.dataset.load()?;
    let out = execute_defense(&cfg, &obs, cfg.attack_fractions[0])?;
    write_state(&c.out_dir, &out.state)?;
    if cfg.defense == DefenseKind::Mie {
        write_removed_workers(&out.removed, create(&c.out_dir, "removed_workers.csv")?)?;
        log::info!("MIE removed {} workers", out.removed.len());
    }
    write_metadata(&c.out_dir, "defend", &cfg, json!({ "removed": out.removed.len() }))
}

fn state_from_file(path: &Path, model: ModelKind) -> Result<AggregationState> {
    Ok(AggregationState {
        model,
        values: read_aggregate(File::open(path)?)?,
        reliability: Vec::new(),
        iterations: 0,
        converged: true,
    })
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let cfg = a.overrides.resolve(false)?;
    fs::create_dir_all(&a.out_dir)?;
    let targets: Vec<ItemId> = match (&a.plan, &a.targets) {
        (_, Some(ids)) => ids.iter().copied().map(ItemId).collect(),
        (Some(path), None) => {
            let plan: AttackPlan = serde_json::from_str(&fs::read_to_string(path)?)?;
            plan.targets
        }
        (None, None) => return Err(Error::EmptyTargets),
    };
    let before = state_from_file(&a.before, cfg.model)?;
    let after = state_from_file(&a.after, cfg.model)?;
    let report = average_estimation_error(&before, &after, targets)?.with_metadata(RunDescriptor {
        attack: cfg.attack.name().to_string(),
        defense: cfg.defense.name().to_string(),
        attack_fraction: cfg.attack_fractions[0],
        knowledge_fraction: cfg.effective_knowledge_fractions()[0],
        trial_seed: cfg.base_seed,
    });
    fs::write(a.out_dir.join("result.csv"), report.to_csv()?)?;
    fs::write(a.out_dir.join("result.json"), report.to_json()?)?;
    println!("average error over {} targets: {:.6}", report.per_item_error.len(), report.average_error);
    Ok(())
}

fn print_table(result: &SweepResult) {
    println!("attack_fraction\tknowledge_fraction\ttrials\tmean_error\tstd_error");
    for p in &result.aggregated {
        println!(
            "{}\t{}\t{}\t{:.6}\t{:.6}",
            p.attack_fraction, p.knowledge_fraction, p.trials, p.mean_error, p.std_error
        );
    }
}

/// Returns whether every trial succeeded.
fn sweep(a: &SweepArgs) -> Result<bool> {
    let cfg = a.overrides.resolve(true)?;
    log::info!(
        "{} attack, {} defense, {} model: {} points x {} trials",
        cfg.attack.name(),
        cfg.defense.name(),
        cfg.model,
        cfg.attack_fractions.len() * cfg.effective_knowledge_fractions().len(),
        cfg.trials
    );
    let result = run_experiment(&cfg)?;
    for path in emit_report(&result, &a.out_dir, &a.format)? {
        log::info!("wrote {}", path.display());
    }
    print_table(&result);
    if !result.is_complete() {
        log::warn!("{} trials failed", result.failures.len());
    }
    Ok(result.is_complete())
}

fn report(a: &ReportArgs) -> Result<()> {
    let result = load_report(&a.input)?;
    print_table(&result);
    if !a.format.is_empty() {
        for path in emit_report(&result, &a.out_dir, &a.format)? {
            log::info!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let outcome = match &cli.command {
        Command::Generate(c) => generate(c).map(|()| true),
        Command::Aggregate(c) => aggregate(c).map(|()| true),
        Command::Attack(c) => attack(c).map(|()| true),
        Command::Defend(c) => defend(c).map(|()| true),
        Command::Evaluate(a) => evaluate(a).map(|()| true),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(1)
        }
    }
}
