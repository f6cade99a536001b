mod doc;

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use coklab::arith::{format_rational, parse_rational, serde_biguint, serde_rational};
use coklab::hl::{self, HLValue, Kind, Spec};
use coklab::limits::{self, CellKey, Mode, TheoryTable};
use coklab::montecarlo::{
    self, CompareReport, EmpiricalJointDistribution, EntryLaw, ExactDistribution, MomentEstimate, SimConfig,
    SimMode, Thresholds, DEFAULT_EXHAUSTIVE_BOUND,
};
use coklab::pgroup::{self, ConcreteGroup, GroupType};
use coklab::seq::{self, SeqClass, DEFAULT_CHAIN_BOUND};
use coklab::{Error, Partition};

use doc::{csv_rows, load, Failure, Format, Outcome, Provenance, Sink};

/// Environment variable overriding the default enumeration bounds.
const MAX_ENUM_VAR: &str = "COKLAB_MAX_ENUM";

#[derive(Parser, Debug)]
#[command(name = "coklab", version, about = "Cokernels and coranks of random matrix products: limit laws, oracles and simulation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Output format; CSV is available for tables, runs, exhaustive laws and comparisons.
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Write the result here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Limiting probabilities.
    #[command(subcommand)]
    Theory(TheoryCmd),
    /// Sample matrix products and record cokernel chains or corank patterns.
    Simulate(SimulateArgs),
    /// Exact enumeration oracles.
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Compare an empirical or exact law with a theory table.
    Compare(CompareArgs),
    /// Hall-Littlewood evaluations and measures.
    #[command(subcommand)]
    Hl(HlCmd),
    /// Sequences of surjections between p-groups.
    #[command(subcommand)]
    Seq(SeqCmd),
    /// Estimate joint moments from a simulation and set them against their limits.
    Moments(MomentsArgs),
}

#[derive(Subcommand, Debug)]
enum TheoryCmd {
    /// Limit of P(corank pattern of the partial products = r_1, …, r_k).
    Corank {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        k: u32,
        /// Comma-separated corank steps r_1,…,r_k.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        pattern: Vec<u32>,
    },
    /// Limit of P(cok(M_1⋯M_k) ⊗ Z_P ≅ B).
    Cok {
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        primes: Vec<u64>,
        #[arg(long)]
        k: u32,
        /// Group such as "2:2,1 3:1" or "0".
        #[arg(long)]
        group: String,
    },
    /// Limit of P(cok(M_1⋯M_i) ≅ B_i for all i).
    CokJoint {
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        primes: Vec<u64>,
        /// Semicolon-separated groups B_1;…;B_k.
        #[arg(long)]
        groups: String,
    },
    /// Tabulated limit law with an overflow bucket.
    Table {
        #[arg(long)]
        p: u64,
        /// Truncation level L.
        #[arg(long)]
        level: u32,
        #[arg(long)]
        k: u32,
        /// corank, cok_joint or cok_single.
        #[arg(long)]
        mode: String,
    },
    /// Exact P(rank(BA) = n - k0 - d) for rank(B) = n - k0 and uniform A over F_p.
    RankStep {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        k0: u32,
        #[arg(long)]
        d: u32,
    },
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Run configuration (JSON); its seed may be omitted.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; required so that every run can be replayed.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    /// Only these chunk indices (for split runs that are merged later).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    chunks: Option<Vec<u64>>,
}

#[derive(Subcommand, Debug)]
enum OracleCmd {
    /// Exact law of the keys over every k-tuple of n×n matrices over Z/p^L.
    Exhaustive {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: u64,
        #[arg(long)]
        k: u32,
        #[arg(long, default_value_t = 1)]
        level: u32,
        /// corank or cok_joint.
        #[arg(long, default_value = "corank")]
        mode: String,
        /// Entry law as JSON, e.g. '{"kind":"bernoulli01","q":"1/10"}'.
        #[arg(long)]
        entry: Option<String>,
        #[arg(long)]
        bound: Option<u64>,
    },
    /// Subgroups, automorphisms and surjections of G_λ by enumeration, against the closed forms.
    Census {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        group: String,
        /// Surjection targets; defaults to every type of size at most 2.
        #[arg(long, value_delimiter = ';', num_args = 1..)]
        targets: Option<Vec<String>>,
        #[arg(long)]
        bound: Option<u64>,
    },
    /// n_k(G_λ) by walking the subgroup lattice, against the recursion.
    Chains {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        group: String,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        bound: Option<u64>,
    },
    /// m_k(G_1, …, G_k) by enumeration, with n_k(G_1 ⊕ … ⊕ G_k) for reference.
    Joint {
        /// Semicolon-separated groups G_1;…;G_k.
        #[arg(long)]
        groups: String,
        #[arg(long)]
        bound: Option<u64>,
    },
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Output of `simulate`.
    #[arg(long, required_unless_present = "exact", conflicts_with = "exact")]
    emp: Option<PathBuf>,
    /// Output of `oracle exhaustive`.
    #[arg(long)]
    exact: Option<PathBuf>,
    /// Output of `theory table`.
    #[arg(long)]
    theory: PathBuf,
    /// A second simulation; adds the total variation between the two bucketed laws.
    #[arg(long, requires = "emp")]
    against: Option<PathBuf>,
    #[arg(long, default_value_t = Thresholds::default().tv)]
    tv: f64,
    #[arg(long, default_value_t = Thresholds::default().z)]
    z: f64,
}

#[derive(Subcommand, Debug)]
enum HlCmd {
    /// Skew P or Q at a specialization.
    Eval {
        /// P or Q.
        #[arg(long, default_value = "P")]
        kind: String,
        #[arg(long)]
        lambda: String,
        #[arg(long, default_value = "")]
        mu: String,
        /// "finite:x1,x2,…" or "geometric:START:MULT" (t^START, … each repeated MULT times).
        #[arg(long)]
        spec: String,
        #[arg(long)]
        t: String,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// The Cauchy kernel Π_t(A; B).
    Cauchy {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        t: String,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Probability of λ under the product measure with k factors.
    MeasureProd {
        #[arg(long)]
        lambda: String,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        t: String,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Probability of λ^{(1)} ⊆ … ⊆ λ^{(k)} under the joint measure.
    MeasureJoint {
        /// Semicolon-separated partitions.
        #[arg(long)]
        lambdas: String,
        #[arg(long)]
        t: String,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
}

#[derive(Subcommand, Debug)]
enum SeqCmd {
    /// Isomorphism classes of G_k ↠ … ↠ G_1 with their automorphism counts and measures.
    Classify {
        #[arg(long)]
        p: u64,
        /// Semicolon-separated types λ^{(k)};…;λ^{(1)}.
        #[arg(long)]
        types: String,
        #[arg(long)]
        bound: Option<u64>,
    },
    /// Σ over classes of 1/#Aut against ∏ #Sur / ∏ #Aut.
    Marginal {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        types: String,
        #[arg(long)]
        bound: Option<u64>,
    },
}

#[derive(Args, Debug)]
struct MomentsArgs {
    /// Run configuration in cok_joint mode.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
    /// Semicolon-separated groups G_1;…;G_k; repeat for several targets.
    #[arg(long, required = true)]
    target: Vec<String>,
    /// Bound on |G_1 ⊕ … ⊕ G_k| for the limiting joint moment.
    #[arg(long)]
    bound: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct CorankResult {
    p: u64,
    pattern: Vec<u32>,
    prob: f64,
    error_bound: f64,
    #[serde(with = "serde_rational")]
    rational_part: BigRational,
}

#[derive(Serialize, Deserialize)]
struct GroupLimit {
    primes: Vec<u64>,
    groups: Vec<GroupType>,
    prob: f64,
    error_bound: f64,
}

#[derive(Serialize, Deserialize)]
struct RankStepResult {
    p: u64,
    n: u32,
    k0: u32,
    d: u32,
    #[serde(with = "serde_rational")]
    prob: BigRational,
}

#[derive(Serialize, Deserialize)]
struct CensusReport {
    census: pgroup::Census,
    #[serde(with = "serde_biguint")]
    aut_formula: BigUint,
    subgroup_formula: BTreeMap<Partition, String>,
    sur_formula: BTreeMap<Partition, String>,
    agrees: bool,
}

#[derive(Serialize, Deserialize)]
struct ChainsReport {
    p: u64,
    group: Partition,
    k: u32,
    #[serde(with = "serde_biguint")]
    lattice: BigUint,
    #[serde(with = "serde_biguint")]
    recursion: BigUint,
    agrees: bool,
}

#[derive(Serialize, Deserialize)]
struct JointReport {
    groups: Vec<GroupType>,
    #[serde(with = "serde_biguint")]
    m_k: BigUint,
    #[serde(with = "serde_biguint")]
    n_k_of_sum: BigUint,
}

#[derive(Serialize, Deserialize)]
struct CompareOutput {
    #[serde(flatten)]
    report: CompareReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    empirical_tv: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct ClassOutput {
    size: u64,
    #[serde(with = "serde_biguint")]
    aut_count: BigUint,
    measure: HLValue,
    representative: seq::SurjectionChain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stabilizer_count: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct MomentRow {
    #[serde(flatten)]
    estimate: MomentEstimate,
    #[serde(with = "serde_biguint")]
    limit: BigUint,
    /// (mean - limit) / stderr.
    z: Option<f64>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                std::process::exit(if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 1 } else { 0 });
            }
            Failure::invalid("usage", e.render().to_string().trim().to_string()).report();
            std::process::exit(1);
        }
    };
    let sink = Sink { format: cli.format, output: cli.output };
    if let Err(f) = run(cli.cmd, &sink) {
        f.report();
        std::process::exit(f.code);
    }
}

fn run(cmd: Cmd, sink: &Sink) -> Outcome<()> {
    match cmd {
        Cmd::Theory(t) => theory(t, sink),
        Cmd::Simulate(a) => simulate(a, sink),
        Cmd::Oracle(o) => oracle(o, sink),
        Cmd::Compare(a) => compare(a, sink),
        Cmd::Hl(h) => hl_cmd(h, sink),
        Cmd::Seq(s) => seq_cmd(s, sink),
        Cmd::Moments(a) => moments(a, sink),
    }
}

fn enum_bound(flag: Option<u64>, default: u64) -> Outcome<u64> {
    if let Some(b) = flag {
        return Ok(b);
    }
    match std::env::var(MAX_ENUM_VAR) {
        Ok(v) => v.trim().parse().map_err(|_| Failure::invalid("invalid_input", format!("{MAX_ENUM_VAR}={v:?} is not an integer"))),
        Err(_) => Ok(default),
    }
}

fn parse_group(s: &str) -> Outcome<GroupType> {
    Ok(s.parse::<GroupType>()?)
}

fn parse_groups(s: &str) -> Outcome<Vec<GroupType>> {
    s.split(';').map(parse_group).collect()
}

fn parse_partition(s: &str) -> Outcome<Partition> {
    Ok(s.parse::<Partition>()?)
}

fn parse_spec(s: &str) -> Outcome<Spec> {
    let bad = || Failure::invalid("invalid_input", format!("specialization {s:?}: expected finite:x1,x2,… or geometric:START:MULT"));
    let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
    match kind {
        "finite" => {
            let xs = if rest.trim().is_empty() {
                Vec::new()
            } else {
                rest.split(',').map(parse_rational).collect::<Result<Vec<_>, _>>()?
            };
            Ok(Spec::Finite(xs))
        }
        "geometric" => {
            let (a, m) = rest.split_once(':').ok_or_else(bad)?;
            let start = a.trim().parse().map_err(|_| bad())?;
            let mult = m.trim().parse().map_err(|_| bad())?;
            Ok(Spec::geometric(start, mult))
        }
        _ => Err(bad()),
    }
}

fn key_string(k: &CellKey) -> String {
    k.to_string()
}

fn theory(cmd: TheoryCmd, sink: &Sink) -> Outcome<()> {
    let prov = Provenance::new();
    match cmd {
        TheoryCmd::Corank { p, k, pattern } => {
            if pattern.len() != k as usize {
                return Err(Failure::invalid("invalid_input", format!("pattern has {} entries but k = {k}", pattern.len())));
            }
            let v = limits::corank_joint_limit(p, &pattern)?;
            let result = CorankResult {
                p,
                rational_part: limits::corank_rational_part(p, &pattern),
                pattern,
                prob: v.value,
                error_bound: v.error_bound,
            };
            sink.json(prov, &result)
        }
        TheoryCmd::Cok { primes, k, group } => {
            let g = parse_group(&group)?;
            let v = limits::cok_prod_limit(&primes, k, &g)?;
            sink.json(prov, &GroupLimit { primes, groups: vec![g], prob: v.value, error_bound: v.error_bound })
        }
        TheoryCmd::CokJoint { primes, groups } => {
            let gs = parse_groups(&groups)?;
            let v = limits::cok_joint_limit(&primes, &gs)?;
            sink.json(prov, &GroupLimit { primes, groups: gs, prob: v.value, error_bound: v.error_bound })
        }
        TheoryCmd::Table { p, level, k, mode } => {
            let mode: Mode = mode.parse()?;
            let table = limits::theory_table(p, level, k, mode)?;
            sink.table(prov, &table, || {
                let mut rows: Vec<Vec<String>> = table
                    .cells
                    .iter()
                    .map(|c| vec![key_string(&c.key), c.prob.to_string(), c.error_bound.to_string()])
                    .collect();
                rows.push(vec!["overflow".into(), table.overflow.to_string(), table.deficit_bound.to_string()]);
                csv_rows(&["key", "prob", "error_bound"], rows)
            })
        }
        TheoryCmd::RankStep { p, n, k0, d } => {
            let prob = limits::rank_step(p, n, k0, d)?;
            sink.json(prov, &RankStepResult { p, n, k0, d, prob })
        }
    }
}

/// Reads a run configuration, taking the seed from the command line.
fn load_config(path: &std::path::Path, seed: u64) -> Outcome<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::invalid("io", format!("{}: {e}", path.display())))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::invalid("parse", format!("{}: {e}", path.display())))?;
    let obj = value.as_object_mut().ok_or_else(|| Failure::invalid("schema", "configuration must be a JSON object"))?;
    if let Some(s) = obj.get("seed") {
        if s.as_u64() != Some(seed) {
            return Err(Failure::invalid("invalid_input", format!("configuration seed {s} differs from --seed {seed}")));
        }
    }
    obj.insert("seed".into(), seed.into());
    let cfg: SimConfig = serde_json::from_value(value).map_err(|e| Failure::invalid("schema", format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn workers(flag: Option<usize>) -> Outcome<usize> {
    match flag {
        Some(0) => Err(Failure::invalid("invalid_input", "--workers must be at least 1")),
        Some(w) => Ok(w),
        None => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn simulate(a: SimulateArgs, sink: &Sink) -> Outcome<()> {
    let cfg = load_config(&a.config, a.seed)?;
    let w = workers(a.workers)?;
    let emp = match &a.chunks {
        Some(c) => montecarlo::simulate_chunks(&cfg, c, w)?,
        None => montecarlo::simulate_joint(&cfg, w)?,
    };
    let mut prov = Provenance::new();
    prov.config_hash = Some(cfg.hash());
    prov.seed = Some(cfg.seed);
    sink.table(prov, &emp, || {
        csv_rows(&["key", "count"], emp.counts.iter().map(|(k, c)| vec![key_string(k), c.to_string()]))
    })
}

fn oracle(cmd: OracleCmd, sink: &Sink) -> Outcome<()> {
    let prov = Provenance::new();
    match cmd {
        OracleCmd::Exhaustive { n, p, k, level, mode, entry, bound } => {
            let mode: SimMode = mode.parse()?;
            let law: EntryLaw = match entry {
                Some(s) => serde_json::from_str(&s).map_err(|e| Failure::invalid("schema", format!("entry law: {e}")))?,
                None => EntryLaw::Uniform,
            };
            let bound = enum_bound(bound, DEFAULT_EXHAUSTIVE_BOUND)?;
            let dist = montecarlo::exhaustive_joint(n, p, level, k, &law, mode, bound)?;
            sink.table(prov, &dist, || {
                csv_rows(&["key", "prob"], dist.cells.iter().map(|(k, pr)| vec![key_string(k), format_rational(pr)]))
            })
        }
        OracleCmd::Census { p, group, targets, bound } => {
            let lam = parse_partition(&group)?;
            let targets: Vec<Partition> = match targets {
                Some(ts) => ts.iter().map(|t| parse_partition(t)).collect::<Outcome<_>>()?,
                None => coklab::partition::partitions_bounded(2, 2, 2).collect(),
            };
            let g = ConcreteGroup::new(p, &lam, enum_bound(bound, 1 << 12)?)?;
            let census = pgroup::brute_census(&g, &targets)?;
            let aut_formula = pgroup::aut_count(p, &lam);
            let subgroup_formula: BTreeMap<Partition, String> = lam
                .sub_diagrams()
                .into_iter()
                .map(|mu| {
                    let c = pgroup::subgroup_type_count(p, &mu, &lam).to_string();
                    (mu, c)
                })
                .collect();
            let sur_formula: BTreeMap<Partition, String> =
                targets.iter().map(|mu| (mu.clone(), pgroup::sur_count(p, &lam, mu).to_string())).collect();
            let agrees = census.aut_count == aut_formula
                && subgroup_formula.iter().all(|(mu, c)| census.subgroup_types.get(mu).copied().unwrap_or(0).to_string() == *c)
                && census.subgroup_types.keys().all(|mu| subgroup_formula.contains_key(mu))
                && sur_formula.iter().all(|(mu, c)| census.sur_counts[mu].to_string() == *c);
            sink.json(prov, &CensusReport { census, aut_formula, subgroup_formula, sur_formula, agrees })
        }
        OracleCmd::Chains { p, group, k, bound } => {
            let lam = parse_partition(&group)?;
            let g = ConcreteGroup::new(p, &lam, enum_bound(bound, 1 << 10)?)?;
            let lattice = pgroup::brute_chain_count(&g, k);
            let recursion = pgroup::chain_count_prime(p, &lam, k);
            let agrees = lattice == recursion;
            sink.json(prov, &ChainsReport { p, group: lam, k, lattice, recursion, agrees })
        }
        OracleCmd::Joint { groups, bound } => {
            let gs = parse_groups(&groups)?;
            let m_k = pgroup::joint_chain_count_mk(&gs, enum_bound(bound, 256)?)?;
            let sum = gs.iter().fold(GroupType::trivial(), |acc, g| acc.direct_sum(g));
            let n_k_of_sum = pgroup::chain_count_nk(&sum, gs.len() as u32);
            sink.json(prov, &JointReport { groups: gs, m_k, n_k_of_sum })
        }
    }
}

fn compare(a: CompareArgs, sink: &Sink) -> Outcome<()> {
    let table: TheoryTable = load(&a.theory)?;
    let thr = Thresholds { tv: a.tv, z: a.z };
    let mut prov = Provenance::new();
    let out = match (&a.emp, &a.exact) {
        (Some(path), _) => {
            let emp: EmpiricalJointDistribution = load(path)?;
            prov.config_hash = Some(emp.provenance.config_hash.clone());
            prov.seed = Some(emp.provenance.seed);
            let report = montecarlo::compare(&emp, &table, thr)?;
            let empirical_tv = match &a.against {
                Some(b) => {
                    let other: EmpiricalJointDistribution = load(b)?;
                    Some(montecarlo::empirical_tv(&emp, &other, &table)?)
                }
                None => None,
            };
            CompareOutput { report, empirical_tv }
        }
        (None, Some(path)) => {
            let dist: ExactDistribution = load(path)?;
            CompareOutput { report: montecarlo::compare_exact(&dist, &table, thr)?, empirical_tv: None }
        }
        (None, None) => return Err(Failure::invalid("usage", "one of --emp or --exact is required")),
    };
    sink.table(prov, &out, || Ok(out.report.to_csv()?))
}

fn hl_cmd(cmd: HlCmd, sink: &Sink) -> Outcome<()> {
    let prov = Provenance::new();
    let value = match cmd {
        HlCmd::Eval { kind, lambda, mu, spec, t, tol } => {
            let kind: Kind = kind.parse()?;
            hl::principal(kind, &parse_partition(&lambda)?, &parse_partition(&mu)?, &parse_spec(&spec)?, &parse_rational(&t)?, tol)?
        }
        HlCmd::Cauchy { a, b, t, tol } => hl::cauchy_kernel(&parse_spec(&a)?, &parse_spec(&b)?, &parse_rational(&t)?, tol)?,
        HlCmd::MeasureProd { lambda, k, t, tol } => hl::measure_prod(&parse_partition(&lambda)?, k, &parse_rational(&t)?, tol)?,
        HlCmd::MeasureJoint { lambdas, t, tol } => {
            let ls: Vec<Partition> = lambdas.split(';').map(parse_partition).collect::<Outcome<_>>()?;
            hl::measure_joint(&ls, &parse_rational(&t)?, tol)?
        }
    };
    sink.json(prov, &value)
}

fn seq_cmd(cmd: SeqCmd, sink: &Sink) -> Outcome<()> {
    let prov = Provenance::new();
    match cmd {
        SeqCmd::Classify { p, types, bound } => {
            let ts = seq::parse_types(&types)?;
            let classes = seq::classify(p, &ts, enum_bound(bound, DEFAULT_CHAIN_BOUND)?)?;
            let out: Vec<ClassOutput> = classes
                .into_iter()
                .map(|c: SeqClass| {
                    Ok(ClassOutput {
                        measure: seq::seq_measure(&c)?,
                        size: c.size,
                        aut_count: c.aut_count,
                        representative: c.representative,
                        stabilizer_count: c.stabilizer_count,
                    })
                })
                .collect::<Result<_, Error>>()?;
            sink.json(prov, &out)
        }
        SeqCmd::Marginal { p, types, bound } => {
            let ts = seq::parse_types(&types)?;
            sink.json(prov, &seq::marginal_check(p, &ts, enum_bound(bound, DEFAULT_CHAIN_BOUND)?)?)
        }
    }
}

fn moments(a: MomentsArgs, sink: &Sink) -> Outcome<()> {
    let cfg = load_config(&a.config, a.seed)?;
    let targets: Vec<Vec<GroupType>> = a.target.iter().map(|t| parse_groups(t)).collect::<Outcome<_>>()?;
    let bound = enum_bound(a.bound, 256)?;
    let limits_: Vec<_> = targets.iter().map(|t| pgroup::joint_chain_count_mk(t, bound)).collect::<Result<_, _>>()?;
    let est = montecarlo::estimate_moments(&cfg, &targets, workers(a.workers)?)?;
    let rows: Vec<MomentRow> = est
        .into_iter()
        .zip(limits_)
        .map(|(e, limit)| {
            let lf = coklab::arith::big_to_f64(&limit);
            let z = (e.stderr > 0.0).then(|| (e.mean - lf) / e.stderr);
            MomentRow { estimate: e, limit, z }
        })
        .collect();
    let mut prov = Provenance::new();
    prov.config_hash = Some(cfg.hash());
    prov.seed = Some(cfg.seed);
    sink.json(prov, &rows)
}
