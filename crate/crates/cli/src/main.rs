//! `trdim`: batch front end. One pipeline per invocation, JSON report out.
//!
//! Exit codes: 0 success, 1 operational error, 2 infeasible or failed
//! verification, 3 unknown (search budget exhausted).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use trdim::covers::{
    topological_dim_family, truncated_dim_family, CoverDecomposition, CoverError, SearchOptions,
    SearchOrder, Separation, Strategy,
};
use trdim::metric::{parse_rational, FiniteMetricSpace, Generator, Norm, Rational, SpaceFile, SubsetFamily};
use trdim::partition::{block_for_gap, striped_decomposition, PartitionOfUnity, ScaleSchedule};
use trdim::roe::{
    build_commutative_witness, build_cpc_witness, verify_mfq, verify_nfq, CpcOutcome, NormOptions,
    OperatorFile, RoeError, RoeOperator, SpaceRef,
};
use trdim::selftest;
use trdim::setfamily::{FamilyFile, SetFamily};

const EXIT_NEGATIVE: u8 = 2;
const EXIT_UNKNOWN: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "trdim", version, about = "Transfinite dimension laboratory")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Serialize)]
struct Global {
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Write plot data as CSV.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Node cap of the exact cover search.
    #[arg(long, global = true, default_value_t = trdim::covers::DEFAULT_BUDGET)]
    budget: u64,
    /// Relative accuracy of iterative norm estimates.
    #[arg(long, global = true, default_value_t = trdim::roe::norm::DEFAULT_TOL)]
    tol: f64,
    /// Iteration cap of the power method.
    #[arg(long, global = true, default_value_t = trdim::roe::norm::DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, global = true, default_value_t = selftest::DEFAULT_SEED)]
    seed: u64,
    /// Add wall-clock timings to the report (breaks byte-for-byte reproducibility).
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ord of a family of finite sets.
    Ord(OrdArgs),
    /// Scale sets with no decomposition of bounded diameter.
    Dim(DimArgs),
    /// Scale sets with no cover by separated sets of diameter at most 1/t on a net.
    Topdim(TopdimArgs),
    /// Partition of unity built from a decomposition.
    Partition(PartitionArgs),
    /// Block compression witness for finite-propagation operators.
    Cpc(CpcArgs),
    /// Commutative witness for functions on a net.
    Comm(CommArgs),
    /// Generate spaces, operators and decompositions.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Run the acceptance suite.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Serialize)]
struct OrdArgs {
    #[arg(long)]
    family: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum StrategyArg {
    Exact,
    Greedy,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum OrderArg {
    Degree,
    Index,
}

#[derive(Args, Debug, Serialize)]
struct SearchArgs {
    #[arg(long, value_enum, default_value_t = StrategyArg::Exact)]
    strategy: StrategyArg,
    /// Point order of the search.
    #[arg(long, value_enum, default_value_t = OrderArg::Degree)]
    order: OrderArg,
    /// Skip sub-box refutation on lattice boxes.
    #[arg(long)]
    no_localize: bool,
}

#[derive(Args, Debug, Serialize)]
struct DimArgs {
    #[arg(long)]
    space: PathBuf,
    /// Comma-separated positive integer scales.
    #[arg(long, value_delimiter = ',', required = true)]
    scales: Vec<u64>,
    /// Diameter bound, an integer or a fraction like `3/2`.
    #[arg(long)]
    bound: String,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum SeparationArg {
    Resolution,
    MinDistance,
}

#[derive(Args, Debug, Serialize)]
struct TopdimArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    scales: Vec<u64>,
    /// Net resolution; defaults to the smallest positive distance.
    #[arg(long)]
    resolution: Option<String>,
    #[arg(long, value_enum, default_value_t = SeparationArg::Resolution)]
    separation: SeparationArg,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args, Debug, Serialize)]
struct PartitionArgs {
    #[arg(long)]
    space: PathBuf,
    /// Decomposition file; without it an interval is cut into stripes.
    #[arg(long)]
    decomposition: Option<PathBuf>,
    #[arg(long)]
    q: u64,
    /// Number of families when striping an interval.
    #[arg(long, default_value_t = 1)]
    families: usize,
    /// Explicit admissible scales; the smallest admissible ones otherwise.
    #[arg(long, value_delimiter = ',')]
    scales: Vec<u64>,
}

#[derive(Args, Debug, Serialize)]
struct CpcArgs {
    /// Space file; taken from the first operator file when omitted.
    #[arg(long)]
    space: Option<PathBuf>,
    /// Operator files, repeated or comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    ops: Vec<PathBuf>,
    #[arg(long)]
    q: u64,
    #[arg(long, value_delimiter = ',', required = true)]
    scales: Vec<u64>,
    #[arg(long)]
    bound: String,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args, Debug, Serialize)]
struct CommArgs {
    #[arg(long)]
    space: PathBuf,
    /// JSON list of families, each a list of point sets.
    #[arg(long)]
    cover: PathBuf,
    /// JSON list of real functions, one value per point.
    #[arg(long)]
    funcs: PathBuf,
    #[arg(long)]
    q: u64,
    #[arg(long, value_delimiter = ',', required = true)]
    scales: Vec<u64>,
}

#[derive(Args, Debug, Serialize)]
struct SelftestArgs {
    /// Criterion ids; all when omitted.
    #[arg(long, value_delimiter = ',')]
    criteria: Vec<u32>,
}

#[derive(Subcommand, Debug)]
enum GenCommand {
    /// Write a space file.
    #[command(subcommand)]
    Space(GenSpace),
    /// Write an operator file.
    Op(GenOp),
    /// Write a striped decomposition of an interval.
    Striped(GenStriped),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NormArg {
    L1,
    Linf,
}

impl From<NormArg> for Norm {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::L1 => Norm::L1,
            NormArg::Linf => Norm::Linf,
        }
    }
}

#[derive(Subcommand, Debug)]
enum GenSpace {
    /// Points `0..=n` of the line, distances divided by `scale`.
    Interval {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        scale: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// `side^dim` lattice points.
    Grid {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        side: usize,
        #[arg(long, value_enum, default_value_t = NormArg::Linf)]
        norm: NormArg,
        #[arg(long, default_value_t = 1)]
        scale: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lattice box with the given side lengths.
    Box {
        #[arg(long, value_delimiter = ',', required = true)]
        sides: Vec<usize>,
        #[arg(long, value_enum, default_value_t = NormArg::Linf)]
        norm: NormArg,
        #[arg(long, default_value_t = 1)]
        scale: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OpKind {
    Identity,
    /// `T_{x+1,x} = 1`.
    Shift,
    /// Shift plus its adjoint.
    ShiftSym,
    /// Ones on all pairs within `--radius`.
    Adjacency,
    /// Random entries within `--radius`, kept with probability `--density`.
    Band,
    /// Random diagonal.
    Diagonal,
}

#[derive(Args, Debug)]
struct GenOp {
    #[arg(value_enum)]
    kind: OpKind,
    #[arg(long)]
    space: PathBuf,
    #[arg(long, default_value = "1")]
    radius: String,
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    /// Embed the space instead of referring to its path.
    #[arg(long)]
    inline: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenStriped {
    /// Number of points.
    #[arg(long)]
    len: usize,
    #[arg(long)]
    families: usize,
    #[arg(long)]
    block: usize,
    /// Spacing between blocks of a single family.
    #[arg(long, default_value_t = 1)]
    gap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// What a pipeline hands back to `main`.
struct Outcome {
    result: Map<String, Value>,
    csv: Option<Vec<Vec<String>>>,
    exit: u8,
}

impl Outcome {
    fn new(result: Value, exit: u8) -> Self {
        let result = match result {
            Value::Object(m) => m,
            other => {
                let mut m = Map::new();
                m.insert("result".into(), other);
                m
            }
        };
        Outcome { result, csv: None, exit }
    }

    fn with_csv(mut self, rows: Vec<Vec<String>>) -> Self {
        self.csv = Some(rows);
        self
    }
}

fn main() -> ExitCode {
    // Usage errors exit with 1 so that 2 stays reserved for mathematical negatives.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(jobs) = cli.global.jobs {
        if jobs == 0 {
            bail!("--jobs must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    if !(cli.global.tol > 0.0) {
        bail!("--tol must be positive, got {}", cli.global.tol);
    }
    let g = &cli.global;
    if g.csv.is_some() && matches!(cli.command, Command::Ord(_) | Command::Gen(_)) {
        bail!("--csv is not available for this subcommand");
    }
    let start = Instant::now();
    let (pipeline, config, outcome) = match &cli.command {
        Command::Gen(cmd) => return gen(cmd, g).map(|_| 0),
        Command::Ord(a) => ("ord", to_value(a)?, ord(a)?),
        Command::Dim(a) => ("dim", to_value(a)?, dim(a, g)?),
        Command::Topdim(a) => ("topdim", to_value(a)?, topdim(a, g)?),
        Command::Partition(a) => ("partition", to_value(a)?, partition(a)?),
        Command::Cpc(a) => ("cpc", to_value(a)?, cpc(a, g)?),
        Command::Comm(a) => ("comm", to_value(a)?, comm(a)?),
        Command::Selftest(a) => ("selftest", to_value(a)?, run_selftest(a, g)),
    };
    let mut report = Map::new();
    report.insert("pipeline".into(), json!(pipeline));
    report.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    let mut full_config = match to_value(g)? {
        Value::Object(m) => m,
        _ => unreachable!("struct serializes to an object"),
    };
    if let Value::Object(m) = config {
        full_config.extend(m);
    }
    report.insert("config".into(), Value::Object(full_config));
    report.extend(outcome.result);
    report.insert("exit_code".into(), json!(outcome.exit));
    if g.timings {
        report.insert("timings".into(), json!({ "total_secs": start.elapsed().as_secs_f64() }));
    }
    let text = serde_json::to_string_pretty(&Value::Object(report))? + "\n";
    match &g.report {
        Some(path) => fs::write(path, text).with_context(|| format!("writing report {}", path.display()))?,
        None => print!("{text}"),
    }
    if let Some(path) = &g.csv {
        let rows = outcome
            .csv
            .expect("every pipeline accepting --csv produces rows");
        write_csv(path, &rows)?;
    }
    Ok(outcome.exit)
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn write_csv(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {what} file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {what} file {}", path.display()))
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_space(path: &Path) -> Result<FiniteMetricSpace> {
    let file: SpaceFile = read_json(path, "space")?;
    FiniteMetricSpace::from_file(&file).with_context(|| format!("loading space {}", path.display()))
}

fn rational(s: &str, flag: &str) -> Result<Rational> {
    let r = parse_rational(s).with_context(|| format!("--{flag} {s:?}"))?;
    if r <= Rational::from_integer(0) {
        bail!("--{flag} must be positive, got {s}");
    }
    Ok(r)
}

fn check_scales(scales: &[u64]) -> Result<()> {
    if scales.is_empty() {
        bail!("--scales must not be empty");
    }
    if scales.contains(&0) {
        bail!("--scales must be positive integers");
    }
    Ok(())
}

fn search_options(a: &SearchArgs, g: &Global) -> SearchOptions {
    SearchOptions {
        strategy: match a.strategy {
            StrategyArg::Exact => Strategy::Exact,
            StrategyArg::Greedy => Strategy::Greedy,
        },
        order: match a.order {
            OrderArg::Degree => SearchOrder::Degree,
            OrderArg::Index => SearchOrder::Index,
        },
        budget: g.budget,
        localize: !a.no_localize,
        ..SearchOptions::default()
    }
}

fn norm_options(g: &Global) -> NormOptions {
    NormOptions {
        tol: g.tol,
        max_iter: g.max_iter,
        ..NormOptions::default()
    }
}

fn ord(a: &OrdArgs) -> Result<Outcome> {
    let file: FamilyFile = read_json(&a.family, "family")?;
    let family = file.to_family().context("building the family")?;
    let value = family.ord().context("computing Ord")?;
    Ok(Outcome::new(
        json!({ "ord": value.to_string(), "inclusive": family.is_explicit().then(|| family.is_inclusive()) }),
        0,
    ))
}

fn profile_header() -> Vec<String> {
    vec!["scales".to_string(), "size".to_string(), "decomposable".to_string()]
}

/// Report and CSV rows for a family of undecomposable scale sets.
fn profile_outcome(scales: &[u64], family: Result<SetFamily, CoverError>) -> Result<Outcome> {
    let family = match family {
        Ok(f) => f,
        Err(CoverError::Unknown(sigma)) => {
            return Ok(Outcome::new(
                json!({ "status": "unknown", "undecided": sigma, "reason": "search budget exhausted" }),
                EXIT_UNKNOWN,
            )
            .with_csv(vec![profile_header()]))
        }
        Err(e) => return Err(e.into()),
    };
    let members = family.members().expect("profile families are explicit").to_vec();
    let value = family.ord()?;
    let mut sorted: Vec<u64> = scales.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut rows = vec![profile_header()];
    for mask in 1u64..(1 << sorted.len().min(20)) {
        let sigma: Vec<u64> = (0..sorted.len()).filter(|&b| mask & (1 << b) != 0).map(|b| sorted[b]).collect();
        let in_family = members
            .iter()
            .any(|m| m.len() == sigma.len() && m.iter().zip(&sigma).all(|(&l, &t)| l as u64 == t));
        rows.push(vec![
            sigma.iter().map(u64::to_string).collect::<Vec<_>>().join(" "),
            sigma.len().to_string(),
            (!in_family).to_string(),
        ]);
    }
    Ok(Outcome::new(json!({ "family": members, "ord": value.to_string() }), 0).with_csv(rows))
}

fn dim(a: &DimArgs, g: &Global) -> Result<Outcome> {
    check_scales(&a.scales)?;
    let space = load_space(&a.space)?;
    let bound = rational(&a.bound, "bound")?;
    let family = truncated_dim_family(&space, &a.scales, bound, &search_options(&a.search, g));
    profile_outcome(&a.scales, family)
}

fn topdim(a: &TopdimArgs, g: &Global) -> Result<Outcome> {
    check_scales(&a.scales)?;
    let space = load_space(&a.space)?;
    let resolution = match &a.resolution {
        Some(s) => rational(s, "resolution")?,
        None => {
            let units = trdim::covers::min_positive_units(&space)
                .ok_or_else(|| anyhow!("a single-point net has no resolution; pass --resolution"))?;
            space.to_rational(units)
        }
    };
    let separation = match a.separation {
        SeparationArg::Resolution => Separation::Resolution,
        SeparationArg::MinDistance => Separation::MinDistance,
    };
    let family = topological_dim_family(&space, resolution, separation, &a.scales, &search_options(&a.search, g));
    let mut out = profile_outcome(&a.scales, family)?;
    out.result.insert("resolution".into(), json!(resolution.to_string()));
    Ok(out)
}

fn partition(a: &PartitionArgs) -> Result<Outcome> {
    let space = load_space(&a.space)?;
    let given = match &a.decomposition {
        Some(path) => Some(read_json::<CoverDecomposition>(path, "decomposition")?),
        None => None,
    };
    let n_families = given.as_ref().map_or(a.families, |d| d.families.len());
    if n_families == 0 {
        bail!("a partition needs at least one family");
    }
    let schedule = if a.scales.is_empty() {
        ScaleSchedule::standard(a.q, n_families - 1)?
    } else {
        ScaleSchedule::new(a.q, a.q, a.scales.clone())?
    };
    let decomposition = match given {
        Some(d) => d,
        None => {
            if !matches!(space.generator(), Generator::Interval { .. }) {
                bail!("striping needs an interval space; pass --decomposition");
            }
            let t_max = *schedule.values.last().expect("nonempty schedule");
            let gap = space.units_ceil(Rational::from_integer(t_max as i64));
            striped_decomposition(space.len(), n_families, block_for_gap(n_families, gap), gap as usize)
        }
    };
    let pou = PartitionOfUnity::build(&space, &decomposition, &schedule)?;
    let report = pou.verify(&space);
    let passed = report.passed();
    let mut rows = vec![std::iter::once("point".to_string())
        .chain((0..pou.len()).map(|i| format!("f_{i}")))
        .collect::<Vec<_>>()];
    for x in 0..space.len() {
        let mut row = vec![space.labels()[x].clone()];
        row.extend(pou.f.iter().map(|f| f[x].to_string()));
        rows.push(row);
    }
    let covered = pou.covered.iter().filter(|&&c| c).count();
    Ok(Outcome::new(
        json!({
            "schedule": schedule,
            "families": decomposition.families.len(),
            "covered_points": covered,
            "points": space.len(),
            "verification": report,
            "passed": passed,
        }),
        if passed { 0 } else { EXIT_NEGATIVE },
    )
    .with_csv(rows))
}

fn margin_header() -> Vec<String> {
    ["condition", "index", "left", "right", "measured", "target", "margin", "ok"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// Resolves the space of an operator file: `--space`, else the file's own reference.
fn cpc_space(a: &CpcArgs, first: &OperatorFile) -> Result<FiniteMetricSpace> {
    if let Some(path) = &a.space {
        return load_space(path);
    }
    match &first.space {
        Some(SpaceRef::Path(p)) => {
            let base = a.ops[0].parent().unwrap_or(Path::new("."));
            let path = Path::new(p);
            let path = if path.is_relative() && !path.exists() {
                base.join(path)
            } else {
                path.to_path_buf()
            };
            load_space(&path)
        }
        Some(SpaceRef::Inline(file)) => Ok(FiniteMetricSpace::from_file(file)?),
        None => bail!("no --space given and {} names no space", a.ops[0].display()),
    }
}

fn cpc(a: &CpcArgs, g: &Global) -> Result<Outcome> {
    check_scales(&a.scales)?;
    if a.q == 0 {
        bail!("--q must be positive");
    }
    let files: Vec<OperatorFile> = a
        .ops
        .iter()
        .map(|p| read_json(p, "operator"))
        .collect::<Result<_>>()?;
    let space = cpc_space(a, &files[0])?;
    let ops: Vec<RoeOperator> = files
        .iter()
        .zip(&a.ops)
        .map(|(f, p)| RoeOperator::from_file(f, space.len()).with_context(|| format!("loading {}", p.display())))
        .collect::<Result<_>>()?;
    let bound = rational(&a.bound, "bound")?;
    let opts = norm_options(g);
    let outcome = match build_cpc_witness(&space, &ops, a.q, &a.scales, bound, &search_options(&a.search, g), &opts) {
        Err(RoeError::NoConvergence { estimate, iterations }) => {
            return Ok(Outcome::new(
                json!({ "status": "unknown", "reason": format!("norm did not converge in {iterations} iterations"), "estimate": estimate }),
                EXIT_UNKNOWN,
            )
            .with_csv(vec![margin_header()]))
        }
        other => other?,
    };
    match outcome {
        CpcOutcome::Witness { witness } => {
            let report = verify_nfq(&space, &witness, &ops, a.q, &a.scales, &opts)?;
            let mut rows = vec![margin_header()];
            for p in &report.pairs {
                rows.push(vec![
                    "product".into(),
                    p.index.to_string(),
                    p.left.to_string(),
                    p.right.to_string(),
                    p.product_norm.to_string(),
                    p.target.to_string(),
                    p.margin.to_string(),
                    p.ok.to_string(),
                ]);
            }
            for e in &report.approximation {
                rows.push(vec![
                    "approximation".into(),
                    String::new(),
                    e.op.to_string(),
                    String::new(),
                    e.error.to_string(),
                    e.target.to_string(),
                    e.margin.to_string(),
                    e.ok.to_string(),
                ]);
            }
            let passed = report.passed;
            Ok(Outcome::new(
                json!({
                    "status": "witness",
                    "constants": witness.constants,
                    "blocks": witness.blocks.iter().map(Vec::len).collect::<Vec<_>>(),
                    "verification": report,
                    "passed": passed,
                }),
                if passed { 0 } else { EXIT_NEGATIVE },
            )
            .with_csv(rows))
        }
        CpcOutcome::Infeasible { .. } => Ok(Outcome::new(to_value(&outcome)?, EXIT_NEGATIVE).with_csv(vec![margin_header()])),
        CpcOutcome::Unknown { .. } => Ok(Outcome::new(to_value(&outcome)?, EXIT_UNKNOWN).with_csv(vec![margin_header()])),
    }
}

fn comm(a: &CommArgs) -> Result<Outcome> {
    check_scales(&a.scales)?;
    let space = load_space(&a.space)?;
    let cover: Vec<SubsetFamily> = read_json(&a.cover, "cover")?;
    let funcs: Vec<Vec<f64>> = read_json(&a.funcs, "function")?;
    let witness = match build_commutative_witness(&space, &cover, &funcs, a.q) {
        Err(e @ (RoeError::Oscillation { .. } | RoeError::Uncovered(_))) => {
            return Ok(Outcome::new(
                json!({ "status": "rejected", "reason": e.to_string(), "passed": false }),
                EXIT_NEGATIVE,
            )
            .with_csv(vec![comm_header()]))
        }
        other => other?,
    };
    let report = verify_mfq(&space, &witness, &funcs, a.q, &a.scales)?;
    let mut rows = vec![comm_header()];
    for p in &report.products {
        rows.push(vec![
            "product".into(),
            p.index.to_string(),
            p.left.to_string(),
            p.right.to_string(),
            p.product_norm.to_string(),
            p.target.to_string(),
            p.ok.to_string(),
        ]);
    }
    for e in &report.approximation {
        rows.push(vec![
            "approximation".into(),
            String::new(),
            e.function.to_string(),
            String::new(),
            e.error.to_string(),
            e.target.to_string(),
            e.ok.to_string(),
        ]);
    }
    let passed = report.passed;
    Ok(Outcome::new(
        json!({
            "status": "witness",
            "pruned": witness.pruned,
            "marked": witness.marked,
            "verification": report,
            "passed": passed,
        }),
        if passed { 0 } else { EXIT_NEGATIVE },
    )
    .with_csv(rows))
}

fn comm_header() -> Vec<String> {
    ["condition", "index", "left", "right", "measured", "target", "ok"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn run_selftest(a: &SelftestArgs, g: &Global) -> Outcome {
    let ids = if a.criteria.is_empty() {
        selftest::all_ids()
    } else {
        a.criteria.clone()
    };
    let report = selftest::run(g.seed, &ids);
    for c in &report.criteria {
        eprintln!(
            "criterion {} {}: {}",
            c.id,
            c.name,
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    let mut rows = vec![vec!["id".to_string(), "name".to_string(), "checks".to_string(), "passed".to_string()]];
    for c in &report.criteria {
        rows.push(vec![c.id.to_string(), c.name.clone(), c.checks.to_string(), c.passed.to_string()]);
    }
    let exit = if report.passed { 0 } else { EXIT_NEGATIVE };
    Outcome::new(json!({ "selftest": report }), exit).with_csv(rows)
}

fn gen(cmd: &GenCommand, g: &Global) -> Result<()> {
    match cmd {
        GenCommand::Space(s) => {
            let (space, out) = match s {
                GenSpace::Interval { n, scale, out } => (FiniteMetricSpace::scaled_interval(*n, (*scale).max(1)), out),
                GenSpace::Grid {
                    dim,
                    side,
                    norm,
                    scale,
                    out,
                } => (FiniteMetricSpace::scaled_grid(*dim, *side, (*norm).into(), (*scale).max(1)), out),
                GenSpace::Box { sides, norm, scale, out } => {
                    (FiniteMetricSpace::scaled_box(sides, (*norm).into(), (*scale).max(1)), out)
                }
            };
            write_json(&space.to_file(), out.as_deref())
        }
        GenCommand::Op(o) => {
            let space = load_space(&o.space)?;
            let radius = rational(&o.radius, "radius")?;
            let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
            let op = match o.kind {
                OpKind::Identity => RoeOperator::identity(space.len()),
                OpKind::Shift => RoeOperator::shift(space.len()),
                OpKind::ShiftSym => {
                    let s = RoeOperator::shift(space.len());
                    s.add(&s.adjoint())
                }
                OpKind::Adjacency => RoeOperator::adjacency(&space, radius),
                OpKind::Band => {
                    if !(0.0..=1.0).contains(&o.density) {
                        bail!("--density must lie in [0, 1]");
                    }
                    RoeOperator::random_band(&space, radius, o.density, &mut rng)
                }
                OpKind::Diagonal => RoeOperator::random_diagonal(space.len(), &mut rng),
            };
            let space_ref = if o.inline {
                SpaceRef::Inline(Box::new(space.to_file()))
            } else {
                SpaceRef::Path(o.space.display().to_string())
            };
            write_json(&op.to_file(Some(space_ref)), o.out.as_deref())
        }
        GenCommand::Striped(s) => {
            if s.families == 0 || s.block == 0 || s.len == 0 {
                bail!("--len, --families and --block must be positive");
            }
            write_json(
                &striped_decomposition(s.len, s.families, s.block, s.gap),
                s.out.as_deref(),
            )
        }
    }
}
