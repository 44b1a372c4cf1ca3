//! `tabshift` — command-line front end for the tabshift library.
//!
//! Every command reads CSV datasets, writes JSON + CSV artifacts into `--out`,
//! and is deterministic: a fixed `--seed` and fixed inputs reproduce the
//! artifacts byte for byte. Exit codes: 0 on success, 2 for usage errors
//! (bad flags, out-of-range parameters), 1 for data or numeric errors, always
//! with a single-line diagnostic on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use tabshift::attribution::{self, Ablations, Dependent, DesignKind};
use tabshift::diagnostics::{disde, relative_regret};
use tabshift::dro::{train_for_spec, AmbiguityKind, AmbiguitySpec};
use tabshift::harness::{
    self, run_grid, write_records_csv, GridOptions, GridPoint, MethodSpec, ValidationMode,
};
use tabshift::learners::{fit_linear, GbtConfig, LearnerSpec, LossKind, TrainConfig};
use tabshift::region::{Region, RegionBound};
use tabshift::regions::{identify_region, identify_region_light, simulate_collection, RegionConfig};
use tabshift::tabular::{load_csv, synth_shift};
use tabshift::worstcase::run_study;
use tabshift::{DomainPair, TabularDataset};

const AFTER_HELP: &str = "Every command also reads a plain key=value configuration file via \
--config; keys mirror the command's long flags (snake_case or kebab-case), `#` starts a \
comment, and boolean flags take true/false. Command-line flags win over the file on conflict. \
Set TABSHIFT_THREADS to cap the worker threads used by `grid`; the other commands run on one \
thread.";

#[derive(Parser)]
#[command(
    name = "tabshift",
    version,
    about = "Shift decomposition, robust training, and region diagnostics for tabular data",
    after_help = AFTER_HELP,
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic source/target pair with a planted conditional shift
    Synth(SynthArgs),
    /// Decompose a source-to-target performance gap into X and Y|X terms
    Decompose(DecomposeArgs),
    /// Relative regret of a learner class across a domain pair
    Regret(RegretArgs),
    /// Train a linear classifier, plain or distributionally robust
    Train(TrainArgs),
    /// Worst-case distribution study inside an f-divergence ball
    Worstcase(WorstcaseArgs),
    /// Identify covariate regions with strong conditional shift
    Regions(RegionsArgs),
    /// Simulate region-targeted data collection
    CollectSim(CollectSimArgs),
    /// Run a hyperparameter grid across target domains and select per method
    Grid(GridArgs),
    /// OLS attribution regression over a grid-run record table
    Attribute(AttributeArgs),
}

/// Flags shared by every command.
#[derive(Args)]
struct Common {
    /// Plain key=value configuration file mirroring this command's flags
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory the JSON/CSV artifacts are written into (created if missing)
    #[arg(long, value_name = "DIR", default_value = "tabshift-out")]
    out: PathBuf,
    /// Root RNG seed; fixed seed and inputs reproduce outputs byte for byte
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// Rows in the source sample
    #[arg(long, default_value_t = 2000)]
    n_source: usize,
    /// Rows in the target sample
    #[arg(long, default_value_t = 2000)]
    n_target: usize,
    /// Number of features (at least 2; the label rule uses x1 + x2)
    #[arg(long, default_value_t = 3)]
    d: usize,
    /// Planted shift region, `feature:low:high[,feature:low:high...]`; empty bound = open side
    #[arg(long, default_value = "x1:0.5:1.0", value_name = "SPEC")]
    region: String,
    /// Probability that a target label inside the region is flipped
    #[arg(long, default_value_t = 1.0)]
    flip: f64,
    /// Name of the label column in the emitted CSVs
    #[arg(long, default_value = "label")]
    label: String,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct DecomposeArgs {
    #[command(flatten)]
    common: Common,
    /// Source-domain CSV
    #[arg(long, value_name = "FILE")]
    source: PathBuf,
    /// Target-domain CSV
    #[arg(long, value_name = "FILE")]
    target: PathBuf,
    /// Label column name
    #[arg(long, default_value = "label")]
    label: String,
    /// Class of the source-trained model whose 0-1 loss gap is decomposed
    #[arg(long, default_value = "gbt", value_parser = ["gbt", "linear"])]
    model: String,
    /// Boosting rounds of the per-domain risk regressions
    #[arg(long, default_value_t = 100)]
    risk_rounds: usize,
    /// Learning rate of the risk regressions
    #[arg(long, default_value_t = 0.1)]
    risk_lr: f64,
    /// Tree depth of the risk regressions
    #[arg(long, default_value_t = 3)]
    risk_depth: usize,
    /// Minimum leaf size of the risk regressions
    #[arg(long, default_value_t = 25)]
    risk_min_leaf: usize,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct RegretArgs {
    #[command(flatten)]
    common: Common,
    /// Source-domain CSV
    #[arg(long, value_name = "FILE")]
    source: PathBuf,
    /// Target-domain CSV
    #[arg(long, value_name = "FILE")]
    target: PathBuf,
    /// Label column name
    #[arg(long, default_value = "label")]
    label: String,
    /// Learner class whose regret is measured
    #[arg(long, default_value = "gbt", value_parser = ["linear", "tree", "gbt"])]
    learner: String,
    /// Loss for the linear learner
    #[arg(long, default_value = "hinge", value_parser = ["hinge", "logistic"])]
    loss: String,
    /// Maximum depth of the tree learner
    #[arg(long, default_value_t = 3)]
    depth: usize,
    /// Minimum leaf size of the tree learner
    #[arg(long, default_value_t = 10)]
    min_leaf: usize,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Training CSV
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Label column name
    #[arg(long, default_value = "label")]
    label: String,
    /// Training method: plain ERM or an ambiguity-set family
    #[arg(long, default_value = "erm", value_parser = [
        "erm", "kl", "chi2", "tv", "cvar", "wasserstein", "aug_wasserstein",
        "satisficing_wasserstein", "marginal_cvar", "conditional_gamma",
    ])]
    method: String,
    /// Ambiguity radius (level for cvar kinds, Gamma for conditional_gamma); ignored for erm
    #[arg(long, default_value_t = 0.0)]
    radius: f64,
    /// Surrogate loss (the Wasserstein, satisficing, marginal, conditional kinds are hinge-only)
    #[arg(long, default_value = "hinge", value_parser = ["hinge", "logistic"])]
    loss: String,
    /// Subgradient steps
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    /// Base step size (decays as 1/sqrt(t))
    #[arg(long, default_value_t = 0.5)]
    step_size: f64,
    /// L2 penalty on the coefficients
    #[arg(long, default_value_t = 0.0)]
    l2: f64,
    /// Early-stopping improvement tolerance
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    /// Label-flip transport cost kappa (aug_wasserstein only)
    #[arg(long)]
    label_cost: Option<f64>,
    /// Target loss ratio tau > 1 (satisficing_wasserstein only)
    #[arg(long)]
    target_ratio: Option<f64>,
    /// Comma-separated feature names defining the group variable (marginal_cvar, conditional_gamma)
    #[arg(long, value_name = "NAMES")]
    z_features: Option<String>,
    /// Per-feature transport costs `name=v[,name=v...]`; `inf` freezes a feature (Wasserstein kinds)
    #[arg(long, value_name = "COSTS")]
    cost_scale: Option<String>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct WorstcaseArgs {
    #[command(flatten)]
    common: Common,
    /// Source (training) CSV
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Label column name
    #[arg(long, default_value = "label")]
    label: String,
    /// f-divergence ball defining the worst case
    #[arg(long, default_value = "kl", value_parser = ["kl", "chi2", "tv", "cvar"])]
    kind: String,
    /// Ball radius (level alpha for cvar)
    #[arg(long, default_value_t = 0.1)]
    radius: f64,
    /// Comma-separated target CSVs for transfer accuracy
    #[arg(long, value_delimiter = ',', value_name = "FILES")]
    targets: Vec<PathBuf>,
    /// Learner class refit on the worst-case distribution
    #[arg(long, default_value = "gbt", value_parser = ["linear", "tree", "gbt"])]
    learner: String,
    /// Loss for the linear learner
    #[arg(long, default_value = "hinge", value_parser = ["hinge", "logistic"])]
    loss: String,
    /// Maximum depth of the tree learner
    #[arg(long, default_value_t = 3)]
    depth: usize,
    /// Minimum leaf size of the tree learner
    #[arg(long, default_value_t = 10)]
    min_leaf: usize,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct RegionsArgs {
    #[command(flatten)]
    common: Common,
    /// Source-domain CSV
    #[arg(long, value_name = "FILE")]
    source: PathBuf,
    /// Target-domain CSV
    #[arg(long, value_name = "FILE")]
    target: PathBuf,
    /// Label column name
    #[arg(long, default_value = "label")]
    label: String,
    /// Discrepancy threshold b in (0, 1); leaves predicting at least b are reported
    #[arg(long, default_value_t = 0.4)]
    b: f64,
    /// Depth of the interpretable region tree
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// Label-efficient variant: target labels enter only a residual fit (needs 20+ rows)
    #[arg(long)]
    light: bool,
    /// Minimum rows per leaf of the region tree
    #[arg(long, default_value_t = 30)]
    h_min_leaf: usize,
    /// Split-gain floor of the region tree, as a fraction of root SSE
    #[arg(long, default_value_t = 0.02)]
    h_min_gain_frac: f64,
    /// Boosting rounds of the per-domain outcome models; the sharp default
    /// keeps smeared decision boundaries from fragmenting recovered regions
    #[arg(long, default_value_t = 400)]
    outcome_rounds: usize,
    /// Learning rate of the outcome models
    #[arg(long, default_value_t = 0.15)]
    outcome_lr: f64,
    /// Tree depth of the outcome models
    #[arg(long, default_value_t = 6)]
    outcome_depth: usize,
    /// Minimum leaf size of the outcome models
    #[arg(long, default_value_t = 5)]
    outcome_min_leaf: usize,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct CollectSimArgs {
    #[command(flatten)]
    common: Common,
    /// Source-domain CSV
    #[arg(long, value_name = "FILE")]
    source: PathBuf,
    /// Target-domain CSV (the pool extra labelled rows are drawn from)
    #[arg(long, value_name = "FILE")]
    target: PathBuf,
    /// Label column name
    #[arg(long, default_value = "label")]
    label: String,
    /// Collection region, `feature:low:high[,feature:low:high...]`
    #[arg(long, value_name = "SPEC")]
    region: String,
    /// Extra labelled target rows added per arm
    #[arg(long, default_value_t = 200)]
    n_extra: usize,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct GridArgs {
    #[command(flatten)]
    common: Common,
    /// Shared source CSV of the setting
    #[arg(long, value_name = "FILE")]
    source: PathBuf,
    /// Comma-separated target CSVs, one per domain
    #[arg(long, required = true, value_delimiter = ',', value_name = "FILES")]
    targets: Vec<PathBuf>,
    /// Label column name
    #[arg(long, default_value = "label")]
    label: String,
    /// How the best configuration of each method is selected
    #[arg(long, default_value = "in_dist", value_parser = [
        "in_dist", "target_probe", "worst_domain", "average_domain",
    ])]
    mode: String,
    /// JSON file holding the method grids; a built-in default grid is used when omitted
    #[arg(long, value_name = "FILE")]
    methods: Option<PathBuf>,
    /// Setting identifier stamped on every record
    #[arg(long, default_value = "s0")]
    setting_id: String,
    /// Comma-separated domain ids (defaults to d0, d1, ...)
    #[arg(long, value_delimiter = ',', value_name = "IDS")]
    domain_ids: Vec<String>,
    /// Labelled probe CSV for target-probe selection (single target only)
    #[arg(long, value_name = "FILE")]
    probe: Option<PathBuf>,
    /// Probe rows drawn from the target when no probe file is given
    #[arg(long, default_value_t = harness::DEFAULT_PROBE_SIZE)]
    probe_size: usize,
    /// Source fraction held out for in-distribution selection
    #[arg(long, default_value_t = harness::DEFAULT_HOLDOUT_FRAC)]
    holdout: f64,
    /// Comma-separated conditional-shift ratios, one per target (copied onto records)
    #[arg(long, value_delimiter = ',', value_name = "RATIOS")]
    yx_ratios: Vec<f64>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct AttributeArgs {
    #[command(flatten)]
    common: Common,
    /// Record table CSV, as written by `grid`
    #[arg(long, value_name = "FILE")]
    records: PathBuf,
    /// Aggregation of the record table before regressing
    #[arg(long, default_value = "best_config", value_parser = ["best_config", "worst_domain"])]
    design: String,
    /// Dependent variable
    #[arg(long, default_value = "target_accuracy", value_parser = ["target_accuracy", "performance_gap"])]
    dependent: String,
    /// Add the squared rescaled radius as a regressor
    #[arg(long)]
    radius_squared: bool,
    /// Add model-class x shift-ratio interactions (best_config design only)
    #[arg(long)]
    class_ratio: bool,
}

/// A dispatch failure: usage errors exit 2, data/numeric errors exit 1.
enum Failure {
    Usage(String),
    Data(String),
}

impl From<tabshift::Error> for Failure {
    fn from(e: tabshift::Error) -> Self {
        Failure::Data(e.to_string().replace('\n', "; "))
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    tabshift::exec::init_thread_pool();
    let argv = match preprocessed_args() {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Synth(a) => run_synth(a),
        Cmd::Decompose(a) => run_decompose(a),
        Cmd::Regret(a) => run_regret(a),
        Cmd::Train(a) => run_train(a),
        Cmd::Worstcase(a) => run_worstcase(a),
        Cmd::Regions(a) => run_regions(a),
        Cmd::CollectSim(a) => run_collect_sim(a),
        Cmd::Grid(a) => run_grid_cmd(a),
        Cmd::Attribute(a) => run_attribute(a),
    }
}

// ---------------------------------------------------------------------------
// Configuration-file preprocessing
// ---------------------------------------------------------------------------

const SUBCOMMANDS: [&str; 9] = [
    "synth",
    "decompose",
    "regret",
    "train",
    "worstcase",
    "regions",
    "collect-sim",
    "grid",
    "attribute",
];

/// Rewrite argv so config-file entries appear as flags right after the
/// subcommand, before any user flags. Combined with `args_override_self`,
/// flags typed on the command line win over the file.
fn preprocessed_args() -> Result<Vec<String>, String> {
    let argv: Vec<String> = std::env::args().collect();
    let Some(subpos) = argv
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, a)| SUBCOMMANDS.contains(&a.as_str()))
        .map(|(i, _)| i)
    else {
        return Ok(argv);
    };
    let mut config: Option<PathBuf> = None;
    let mut i = subpos + 1;
    while i < argv.len() {
        if argv[i] == "--config" {
            if i + 1 >= argv.len() {
                break; // let clap report the missing value
            }
            config = Some(PathBuf::from(&argv[i + 1]));
            i += 2;
            continue;
        }
        if let Some(rest) = argv[i].strip_prefix("--config=") {
            config = Some(PathBuf::from(rest));
        }
        i += 1;
    }
    let Some(path) = config else {
        return Ok(argv);
    };
    let injected = config_tokens(&path)?;
    let mut out = argv[..=subpos].to_vec();
    out.extend(injected);
    out.extend(argv[subpos + 1..].iter().cloned());
    Ok(out)
}

/// Parse a key=value configuration file into flag tokens. `#` starts a
/// comment, blank lines are skipped, keys may use snake_case or kebab-case,
/// and boolean flags are spelled `key=true` / `key=false`.
fn config_tokens(path: &Path) -> Result<Vec<String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
    let mut tokens = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!(
                "config line {}: {raw:?} is not key=value",
                idx + 1
            ));
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim();
        if key.is_empty() {
            return Err(format!("config line {}: empty key", idx + 1));
        }
        if key == "config" {
            continue; // no recursive includes
        }
        match value {
            "true" => tokens.push(format!("--{key}")),
            "false" => {}
            _ => {
                tokens.push(format!("--{key}"));
                tokens.push(value.to_string());
            }
        }
    }
    Ok(tokens)
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn ensure_out(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::Data(format!("cannot create output directory {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut body = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Data(format!("cannot serialize {}: {e}", path.display())))?;
    body.push('\n');
    write_text(path, &body)
}

fn load(path: &Path, label: &str) -> Result<TabularDataset, Failure> {
    Ok(load_csv(path, label)?)
}

fn parse_loss(s: &str) -> LossKind {
    match s {
        "logistic" => LossKind::Logistic,
        _ => LossKind::Hinge,
    }
}

fn learner_from(kind: &str, loss: LossKind, depth: usize, min_leaf: usize) -> LearnerSpec {
    match kind {
        "linear" => LearnerSpec::Linear {
            loss,
            cfg: TrainConfig::default(),
        },
        "tree" => LearnerSpec::Tree {
            max_depth: depth,
            min_leaf,
        },
        _ => LearnerSpec::Gbt(GbtConfig::default()),
    }
}

/// Parse `feature:low:high[,feature:low:high...]`; an empty or infinite bound
/// leaves that side open.
fn parse_region(spec: &str) -> Result<Region, Failure> {
    let mut constraints = Vec::new();
    for part in spec.split(',') {
        let fields: Vec<&str> = part.split(':').collect();
        if fields.len() != 3 {
            return Err(usage(format!(
                "region constraint {part:?} is not feature:low:high"
            )));
        }
        let feature = fields[0].trim();
        if feature.is_empty() {
            return Err(usage(format!("region constraint {part:?} has an empty feature name")));
        }
        let bound = |text: &str| -> Result<Option<f64>, Failure> {
            let text = text.trim();
            if text.is_empty() {
                return Ok(None);
            }
            match text.parse::<f64>() {
                Ok(v) if v.is_nan() => {
                    Err(usage(format!("region bound in {part:?} is NaN")))
                }
                Ok(v) if v.is_infinite() => Ok(None),
                Ok(v) => Ok(Some(v)),
                Err(_) => Err(usage(format!(
                    "region bound {text:?} in {part:?} is not a number"
                ))),
            }
        };
        constraints.push(RegionBound {
            feature: feature.to_string(),
            low: bound(fields[1])?,
            high: bound(fields[2])?,
        });
    }
    if constraints.is_empty() {
        return Err(usage("empty region specification"));
    }
    Ok(Region::from_constraints(constraints))
}

fn csv_quote(field: &str) -> String {
    format!("\"{}\"", field.replace('"', "\"\""))
}

/// Mirror of the library's radius-range rules, reported as usage errors
/// before any data is read.
fn check_radius_range(kind: AmbiguityKind, r: f64) -> Result<(), Failure> {
    let ok = match kind {
        AmbiguityKind::Kl
        | AmbiguityKind::Chi2
        | AmbiguityKind::Tv
        | AmbiguityKind::Wasserstein
        | AmbiguityKind::AugWasserstein
        | AmbiguityKind::SatisficingWasserstein => r.is_finite() && r >= 0.0,
        AmbiguityKind::Cvar => r.is_finite() && (0.0..=1.0).contains(&r),
        AmbiguityKind::MarginalCvar => r.is_finite() && r > 0.0 && r <= 1.0,
        AmbiguityKind::ConditionalGamma => r >= 1.0 && !r.is_nan(),
    };
    if ok {
        Ok(())
    } else {
        Err(usage(format!("--radius {r} is out of range for method {kind}")))
    }
}

fn check_train_cfg(cfg: &TrainConfig) -> Result<(), Failure> {
    if cfg.steps == 0 {
        return Err(usage("--steps must be at least 1"));
    }
    if !(cfg.step_size > 0.0 && cfg.step_size.is_finite()) {
        return Err(usage(format!("--step-size {} must be a finite number > 0", cfg.step_size)));
    }
    if !(cfg.l2 >= 0.0 && cfg.l2.is_finite()) {
        return Err(usage(format!("--l2 {} must be a finite number >= 0", cfg.l2)));
    }
    if !(cfg.tolerance > 0.0) {
        return Err(usage(format!("--tolerance {} must be > 0", cfg.tolerance)));
    }
    Ok(())
}

fn schema_check(reference: &TabularDataset, other: &TabularDataset, what: &str) -> Result<(), Failure> {
    if reference.feature_names() != other.feature_names() {
        return Err(Failure::Data(format!(
            "{what} does not share the training schema (features {:?} vs {:?})",
            other.feature_names(),
            reference.feature_names()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

fn run_synth(a: SynthArgs) -> Result<(), Failure> {
    if !(0.0..=1.0).contains(&a.flip) {
        return Err(usage(format!("--flip {} must lie in [0, 1]", a.flip)));
    }
    let region = parse_region(&a.region)?;
    let pair = synth_shift(a.n_source, a.n_target, a.d, &region, a.flip, a.common.seed)?;
    ensure_out(&a.common.out)?;
    let source_path = a.common.out.join("source.csv");
    let target_path = a.common.out.join("target.csv");
    pair.source.write_csv(&source_path, &a.label)?;
    pair.target.write_csv(&target_path, &a.label)?;
    write_json(
        &a.common.out.join("synth.json"),
        &json!({
            "n_source": a.n_source,
            "n_target": a.n_target,
            "d": a.d,
            "flip_prob": a.flip,
            "seed": a.common.seed,
            "region": { "rule": region.rule(), "constraints": region.constraints },
            "source": "source.csv",
            "target": "target.csv",
        }),
    )?;
    println!(
        "wrote {} ({} rows) and {} ({} rows)",
        source_path.display(),
        a.n_source,
        target_path.display(),
        a.n_target
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// decompose
// ---------------------------------------------------------------------------

fn run_decompose(a: DecomposeArgs) -> Result<(), Failure> {
    let source = load(&a.source, &a.label)?;
    let target = load(&a.target, &a.label)?;
    let pair = DomainPair::new(source, target, None)?;
    let model = match a.model.as_str() {
        "linear" => LearnerSpec::Linear {
            loss: LossKind::Hinge,
            cfg: TrainConfig::default(),
        },
        _ => LearnerSpec::Gbt(GbtConfig::default()),
    }
    .fit(&pair.source, a.common.seed)?;
    let risk_cfg = GbtConfig {
        rounds: a.risk_rounds,
        learning_rate: a.risk_lr,
        max_depth: a.risk_depth,
        min_leaf: a.risk_min_leaf,
    };
    let decomposition = disde(&pair, &model, &GbtConfig::default(), &risk_cfg)?;
    ensure_out(&a.common.out)?;
    write_json(&a.common.out.join("disde.json"), &decomposition)?;
    decomposition.write_csv(&a.common.out.join("disde.csv"))?;
    match decomposition.yx_ratio {
        Some(ratio) => println!(
            "total gap {:.6}; Y|X share {:.4}",
            decomposition.total_gap, ratio
        ),
        None => println!(
            "total gap {:.6}; Y|X share undefined (gap below tolerance)",
            decomposition.total_gap
        ),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// regret
// ---------------------------------------------------------------------------

fn run_regret(a: RegretArgs) -> Result<(), Failure> {
    let source = load(&a.source, &a.label)?;
    let target = load(&a.target, &a.label)?;
    let pair = DomainPair::new(source, target, None)?;
    let spec = learner_from(&a.learner, parse_loss(&a.loss), a.depth, a.min_leaf);
    let regret = relative_regret(&pair, &spec, a.common.seed)?;
    ensure_out(&a.common.out)?;
    write_json(
        &a.common.out.join("regret.json"),
        &json!({
            "learner": a.learner,
            "relative_regret": regret.is_finite().then_some(regret),
            "finite": regret.is_finite(),
        }),
    )?;
    write_text(
        &a.common.out.join("regret.csv"),
        &format!("learner,relative_regret\n{},{}\n", a.learner, regret),
    )?;
    println!("relative regret of {}: {}", a.learner, regret);
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

fn parse_cost_scale(spec: &str, data: &TabularDataset) -> Result<Vec<f64>, Failure> {
    let mut scale = vec![1.0; data.d()];
    for entry in spec.split(',') {
        let Some((name, value)) = entry.split_once('=') else {
            return Err(usage(format!("cost-scale entry {entry:?} is not name=value")));
        };
        let name = name.trim();
        let value = value.trim();
        let v = match value {
            "inf" | "+inf" | "infinity" => f64::INFINITY,
            _ => value.parse::<f64>().map_err(|_| {
                usage(format!("cost-scale value {value:?} for {name:?} is not a number"))
            })?,
        };
        if v.is_nan() || v < 0.0 {
            return Err(usage(format!("cost-scale value for {name:?} must be >= 0 or inf")));
        }
        let idx = data
            .feature_names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Failure::Data(format!("unknown feature {name:?} in --cost-scale")))?;
        scale[idx] = v;
    }
    Ok(scale)
}

fn parse_z_features(spec: &str, data: &TabularDataset) -> Result<Vec<usize>, Failure> {
    let mut indices = Vec::new();
    for name in spec.split(',') {
        let name = name.trim();
        if name.is_empty() {
            continue;
        }
        let idx = data
            .feature_names()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Failure::Data(format!("unknown feature {name:?} in --z-features")))?;
        indices.push(idx);
    }
    if indices.is_empty() {
        return Err(usage("--z-features named no features"));
    }
    Ok(indices)
}

fn write_model_csv(
    path: &Path,
    names: &[String],
    model: &tabshift::learners::LinearModel,
) -> Result<(), Failure> {
    let mut out = String::from("feature,coefficient\n");
    out.push_str(&format!("(intercept),{}\n", model.intercept));
    for (name, w) in names.iter().zip(&model.coefficients) {
        out.push_str(&format!("{name},{w}\n"));
    }
    write_text(path, &out)
}

fn run_train(a: TrainArgs) -> Result<(), Failure> {
    let loss = parse_loss(&a.loss);
    let cfg = TrainConfig {
        steps: a.steps,
        step_size: a.step_size,
        l2: a.l2,
        seed: a.common.seed,
        tolerance: a.tolerance,
    };
    check_train_cfg(&cfg)?;

    let wasserstein_family = matches!(
        a.method.as_str(),
        "wasserstein" | "aug_wasserstein" | "satisficing_wasserstein"
    );
    if a.label_cost.is_some() && a.method != "aug_wasserstein" {
        return Err(usage("--label-cost is only meaningful with --method aug_wasserstein"));
    }
    if a.target_ratio.is_some() && a.method != "satisficing_wasserstein" {
        return Err(usage(
            "--target-ratio is only meaningful with --method satisficing_wasserstein",
        ));
    }
    if a.cost_scale.is_some() && !wasserstein_family {
        return Err(usage("--cost-scale is only meaningful for the Wasserstein methods"));
    }
    if a.z_features.is_some()
        && !matches!(a.method.as_str(), "marginal_cvar" | "conditional_gamma")
    {
        return Err(usage(
            "--z-features is only meaningful with marginal_cvar or conditional_gamma",
        ));
    }

    if a.method == "erm" {
        let data = load(&a.data, &a.label)?;
        let model = fit_linear(&data, loss, &cfg)?;
        ensure_out(&a.common.out)?;
        write_json(
            &a.common.out.join("model.json"),
            &json!({
                "method": "erm",
                "loss": loss,
                "model": model,
                "degenerate": false,
                "achieved_radius": serde_json::Value::Null,
            }),
        )?;
        write_model_csv(&a.common.out.join("model.csv"), data.feature_names(), &model)?;
        println!("trained erm linear model on {} rows", data.n());
        return Ok(());
    }

    let kind = AmbiguityKind::from_str(&a.method)?;
    check_radius_range(kind, a.radius)?;
    match kind {
        AmbiguityKind::AugWasserstein => match a.label_cost {
            Some(k) if k > 0.0 && k.is_finite() => {}
            _ => return Err(usage("aug_wasserstein requires --label-cost with a finite value > 0")),
        },
        AmbiguityKind::SatisficingWasserstein => match a.target_ratio {
            Some(t) if t > 1.0 && t.is_finite() => {}
            _ => return Err(usage("satisficing_wasserstein requires --target-ratio > 1")),
        },
        AmbiguityKind::MarginalCvar | AmbiguityKind::ConditionalGamma => {
            if a.z_features.is_none() {
                return Err(usage(format!("{kind} requires --z-features")));
            }
        }
        _ => {}
    }

    let data = load(&a.data, &a.label)?;
    let mut spec = AmbiguitySpec::new(kind, a.radius);
    if let Some(kappa) = a.label_cost {
        spec = spec.with_label_cost(kappa);
    }
    if let Some(tau) = a.target_ratio {
        spec = spec.with_target_ratio(tau);
    }
    if let Some(ref costs) = a.cost_scale {
        spec = spec.with_cost_scale(parse_cost_scale(costs, &data)?);
    }
    if let Some(ref z) = a.z_features {
        spec = spec.with_z_features(parse_z_features(z, &data)?);
    }
    let fit = train_for_spec(&data, &spec, &cfg, loss)?;
    ensure_out(&a.common.out)?;
    write_json(
        &a.common.out.join("model.json"),
        &json!({
            "method": kind.as_str(),
            "radius": a.radius,
            "loss": loss,
            "model": fit.model,
            "degenerate": fit.degenerate,
            "achieved_radius": fit.achieved_radius,
        }),
    )?;
    write_model_csv(&a.common.out.join("model.csv"), data.feature_names(), &fit.model)?;
    println!(
        "trained {} model on {} rows (radius {})",
        kind.as_str(),
        data.n(),
        a.radius
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// worstcase
// ---------------------------------------------------------------------------

fn run_worstcase(a: WorstcaseArgs) -> Result<(), Failure> {
    let kind = AmbiguityKind::from_str(&a.kind)?;
    check_radius_range(kind, a.radius)?;
    let data = load(&a.data, &a.label)?;
    let mut targets = Vec::with_capacity(a.targets.len());
    for (i, path) in a.targets.iter().enumerate() {
        let t = load(path, &a.label)?;
        schema_check(&data, &t, &format!("target {i} ({})", path.display()))?;
        targets.push(t);
    }
    let spec = AmbiguitySpec::new(kind, a.radius);
    let learner = learner_from(&a.learner, parse_loss(&a.loss), a.depth, a.min_leaf);
    let study = run_study(
        &data,
        &spec,
        &TrainConfig::default(),
        &learner,
        &targets,
        a.common.seed,
    )?;
    ensure_out(&a.common.out)?;
    write_json(&a.common.out.join("worstcase.json"), &study)?;
    study.write_csv(&a.common.out.join("worstcase.csv"))?;
    println!(
        "optimal in-distribution accuracy {:.4} under {} radius {}",
        study.optimal_iid_acc,
        kind.as_str(),
        a.radius
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// regions
// ---------------------------------------------------------------------------

fn run_regions(a: RegionsArgs) -> Result<(), Failure> {
    if !(a.b > 0.0 && a.b < 1.0) {
        return Err(usage(format!("--b {} must lie strictly inside (0, 1)", a.b)));
    }
    if a.depth == 0 {
        return Err(usage("--depth must be at least 1"));
    }
    let source = load(&a.source, &a.label)?;
    let target = load(&a.target, &a.label)?;
    let pair = DomainPair::new(source, target, None)?;
    let cfg = RegionConfig {
        classifier: GbtConfig::default(),
        outcome: GbtConfig {
            rounds: a.outcome_rounds,
            learning_rate: a.outcome_lr,
            max_depth: a.outcome_depth,
            min_leaf: a.outcome_min_leaf,
        },
        h_min_leaf: a.h_min_leaf,
        h_min_gain_frac: a.h_min_gain_frac,
    };
    let found = if a.light {
        identify_region_light(&pair, a.b, a.depth, &cfg)?
    } else {
        identify_region(&pair, a.b, a.depth, &cfg)?
    };
    ensure_out(&a.common.out)?;
    let listed: Vec<serde_json::Value> = found
        .iter()
        .map(|r| {
            json!({
                "rule": r.rule(),
                "discrepancy": r.discrepancy,
                "support_share": r.support_share,
                "constraints": r.constraints,
            })
        })
        .collect();
    write_json(
        &a.common.out.join("regions.json"),
        &json!({ "b": a.b, "depth": a.depth, "light": a.light, "regions": listed }),
    )?;
    let mut csv = String::from("rule,discrepancy,support_share\n");
    for r in &found {
        csv.push_str(&format!(
            "{},{},{}\n",
            csv_quote(&r.rule()),
            r.discrepancy,
            r.support_share
        ));
    }
    write_text(&a.common.out.join("regions.csv"), &csv)?;
    match found.first() {
        Some(top) => println!(
            "{} region(s) above b = {}; top: {} (discrepancy {:.4}, support {:.4})",
            found.len(),
            a.b,
            top.rule(),
            top.discrepancy,
            top.support_share
        ),
        None => println!("no regions above b = {}", a.b),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// collect-sim
// ---------------------------------------------------------------------------

fn run_collect_sim(a: CollectSimArgs) -> Result<(), Failure> {
    if a.n_extra == 0 {
        return Err(usage("--n-extra must be at least 1"));
    }
    let region = parse_region(&a.region)?;
    let source = load(&a.source, &a.label)?;
    let target = load(&a.target, &a.label)?;
    let pair = DomainPair::new(source, target, None)?;
    let learners = [
        LearnerSpec::Linear {
            loss: LossKind::Hinge,
            cfg: TrainConfig::default(),
        },
        LearnerSpec::Gbt(GbtConfig::default()),
    ];
    let table = simulate_collection(&pair, &region, a.n_extra, &learners, a.common.seed)?;
    ensure_out(&a.common.out)?;
    write_json(&a.common.out.join("collect_sim.json"), &table)?;
    write_text(&a.common.out.join("collect_sim.csv"), &table.to_csv())?;
    println!(
        "collection simulation with {} extra rows in {}",
        table.n_extra, table.region_rule
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// grid
// ---------------------------------------------------------------------------

fn default_grid() -> Vec<MethodSpec> {
    let base = TrainConfig {
        steps: 600,
        step_size: 0.5,
        l2: 0.0,
        seed: 0,
        tolerance: 1e-9,
    };
    let lin = |l2: f64| GridPoint::ErmLinear {
        loss: LossKind::Hinge,
        cfg: TrainConfig { l2, ..base.clone() },
    };
    let tree = |rounds: usize| GridPoint::ErmTree {
        cfg: GbtConfig {
            rounds,
            learning_rate: 0.1,
            max_depth: 3,
            min_leaf: 10,
        },
    };
    let dro = |kind: AmbiguityKind, radius: f64| GridPoint::Dro {
        loss: LossKind::Hinge,
        spec: AmbiguitySpec::new(kind, radius),
        cfg: base.clone(),
    };
    let sweep = |kind: AmbiguityKind, radii: &[f64]| -> Vec<GridPoint> {
        radii.iter().map(|&r| dro(kind, r)).collect()
    };
    vec![
        MethodSpec::new("erm_linear", vec![lin(0.0), lin(1e-4), lin(1e-2)]),
        MethodSpec::new("erm_xgb", vec![tree(60), tree(150)]),
        MethodSpec::new("dro_kl", sweep(AmbiguityKind::Kl, &[0.01, 0.05, 0.2, 0.5])),
        MethodSpec::new("dro_chi2", sweep(AmbiguityKind::Chi2, &[0.01, 0.05, 0.2, 0.5])),
        MethodSpec::new("dro_cvar", sweep(AmbiguityKind::Cvar, &[0.9, 0.5, 0.25])),
        MethodSpec::new(
            "dro_wasserstein",
            sweep(AmbiguityKind::Wasserstein, &[0.01, 0.1, 0.5]),
        ),
    ]
    .into_iter()
    .map(|m| m.expect("built-in grid is valid"))
    .collect()
}

fn run_grid_cmd(a: GridArgs) -> Result<(), Failure> {
    if !(a.holdout > 0.0 && a.holdout < 1.0) {
        return Err(usage(format!("--holdout {} must lie strictly inside (0, 1)", a.holdout)));
    }
    if a.probe.is_some() && a.targets.len() != 1 {
        return Err(usage("--probe requires exactly one target domain"));
    }
    let mode = ValidationMode::from_str(&a.mode)?;
    let source = load(&a.source, &a.label)?;
    let mut pairs = Vec::with_capacity(a.targets.len());
    for path in &a.targets {
        let target = load(path, &a.label)?;
        pairs.push(DomainPair::new(source.clone(), target, None)?);
    }
    if let Some(ref probe_path) = a.probe {
        let probe = load(probe_path, &a.label)?;
        schema_check(&source, &probe, &format!("probe ({})", probe_path.display()))?;
        pairs[0].target_probe = Some(probe);
    }
    let methods = match a.methods {
        Some(ref path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::Data(format!("cannot read methods file {}: {e}", path.display()))
            })?;
            serde_json::from_str::<Vec<MethodSpec>>(&text).map_err(|e| {
                Failure::Data(format!("methods file {}: {e}", path.display()))
            })?
        }
        None => default_grid(),
    };
    let opts = GridOptions {
        setting_id: a.setting_id.clone(),
        domain_ids: a.domain_ids.clone(),
        probe_size: a.probe_size,
        holdout_frac: a.holdout,
        yx_ratios: a.yx_ratios.iter().copied().map(Some).collect(),
    };
    let outcome = run_grid(&pairs, &methods, mode, &opts, a.common.seed)?;
    ensure_out(&a.common.out)?;
    write_records_csv(&outcome.records, &a.common.out.join("grid_records.csv"))?;
    write_json(
        &a.common.out.join("selections.json"),
        &json!({ "mode": mode, "selections": outcome.selections }),
    )?;
    for sel in &outcome.selections {
        match (&sel.config_id, sel.score) {
            (Some(cfg), Some(score)) => {
                println!("{}: selected {} (score {:.4})", sel.method_id, cfg, score)
            }
            _ => println!("{}: every configuration failed", sel.method_id),
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// attribute
// ---------------------------------------------------------------------------

fn run_attribute(a: AttributeArgs) -> Result<(), Failure> {
    let kind = match a.design.as_str() {
        "worst_domain" => DesignKind::WorstDomain,
        _ => DesignKind::BestConfig,
    };
    let dependent = match a.dependent.as_str() {
        "performance_gap" => Dependent::PerformanceGap,
        _ => Dependent::TargetAccuracy,
    };
    if a.class_ratio && kind == DesignKind::WorstDomain {
        return Err(usage("--class-ratio applies to the best_config design only"));
    }
    let records = attribution::read_records_csv(&a.records)?;
    let ablations = Ablations {
        radius_squared: a.radius_squared,
        class_ratio: a.class_ratio,
    };
    let design = attribution::build_design(&records, kind, dependent, &ablations)?;
    let ols = attribution::fit_ols(&design)?;
    ensure_out(&a.common.out)?;
    write_json(&a.common.out.join("attribution.json"), &ols)?;
    let table = ols.significance_table();
    write_text(&a.common.out.join("attribution.txt"), &table)?;
    let mut csv = String::from("term,coefficient,std_error,t_stat,p_value,stars\n");
    for (i, name) in ols.names.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            name,
            ols.coefficients[i],
            ols.standard_errors[i],
            ols.t_stats[i],
            ols.p_values[i],
            attribution::significance_stars(ols.p_values[i])
        ));
    }
    write_text(&a.common.out.join("attribution.csv"), &csv)?;
    print!("{table}");
    Ok(())
}
