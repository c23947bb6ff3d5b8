use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use treelocc::network::{allocate_layout, export_dot, parse_tree, Numbering, RootedTree};
use treelocc::oracle::{oracle_ch, oracle_cu, verify_branch};
use treelocc::protocol::{
    build_schedule, enumerate_branches, execute, fixture_tables, regenerate_tables, OutcomePolicy,
    ProtocolKind, ProtocolSchedule, RowStatus,
};
use treelocc::qsim::{Amplitude, Gate1Q, StateVector};
use treelocc::resources::{cbits, comparison_report, steps};

#[derive(Parser)]
#[command(
    version,
    about = "Simulate and verify rooted-tree LOCC protocols for non-local controlled gates"
)]
struct Cli {
    /// Worker threads for branch enumeration.
    #[arg(long, global = true, env = "TREELOCC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one run and write its transcript.
    Run(RunArgs),
    /// Check protocol output against the direct gate on every branch.
    Verify(VerifyArgs),
    /// Rebuild the five-party correction tables and diff them against the reference.
    Tables(TablesArgs),
    /// Resource comparison against the parallel and linear networks.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long, value_parser = parse_kind)]
    kind: ProtocolKind,
    /// identity | x | z | hadamard | random:SEED | eight comma-separated
    /// floats (re,im of m00 m01 m10 m11).
    #[arg(long, default_value = "hadamard")]
    gate: String,
    /// basis:INDEX | zero | uniform | random:SEED
    #[arg(long, default_value = "random:7")]
    state: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the tree as Graphviz DOT.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// sampled:SEED | forced:BITS (one bit per measurement, schedule order)
    #[arg(long, default_value = "sampled:42")]
    policy: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Corrections {
    /// Solver-resolved tables.
    Solved,
    /// The literal five-party reference tables for the downward stages.
    Reference,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// enumerate | sampled:SEED | forced:BITS
    #[arg(long, default_value = "enumerate")]
    policy: String,
    #[arg(long, value_enum, default_value = "solved")]
    corrections: Corrections,
}

#[derive(Args)]
struct TablesArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long, value_parser = parse_kind)]
    kind: ProtocolKind,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dot: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<ProtocolKind, String> {
    s.parse()
}

/// Errors that end a command. Anything not a verification failure is a
/// configuration problem.
enum Failure {
    Config(anyhow::Error),
    Verification(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

fn parse_gate(spec: &str, kind: ProtocolKind) -> Result<Gate1Q> {
    let named = match spec {
        "identity" => Some(Gate1Q::identity()),
        "x" => Some(Gate1Q::pauli_x()),
        "z" => Some(Gate1Q::pauli_z()),
        "hadamard" => Some(Gate1Q::hadamard()),
        _ => None,
    };
    if let Some(g) = named {
        return Ok(g);
    }
    if let Some(seed) = spec.strip_prefix("random:") {
        let seed: u64 = seed
            .parse()
            .with_context(|| format!("bad gate seed `{seed}`"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return Ok(match kind {
            ProtocolKind::Ch => Gate1Q::random_hermitian_involutory(&mut rng),
            ProtocolKind::Cu => Gate1Q::random_unitary(&mut rng),
        });
    }
    let xs: Vec<f64> = spec
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| anyhow!("unknown gate `{spec}`"))?;
    if xs.len() != 8 {
        bail!("a gate matrix needs 8 numbers, got {}", xs.len());
    }
    let e = |i: usize| Amplitude::new(xs[2 * i], xs[2 * i + 1]);
    let m = [[e(0), e(1)], [e(2), e(3)]];
    Gate1Q::hermitian_involutory(m)
        .or_else(|_| Gate1Q::unitary(m))
        .map_err(|e| anyhow!("gate matrix rejected: {e}"))
}

fn parse_state(spec: &str, schedule: &ProtocolSchedule) -> Result<StateVector> {
    let labels = schedule.layout().input_labels();
    let state = match spec {
        "zero" => StateVector::basis(&labels, 0),
        "uniform" => StateVector::uniform(&labels),
        _ => {
            if let Some(i) = spec.strip_prefix("basis:") {
                let i: usize = i
                    .parse()
                    .with_context(|| format!("bad basis index `{i}`"))?;
                StateVector::basis(&labels, i)
            } else if let Some(seed) = spec.strip_prefix("random:") {
                let seed: u64 = seed
                    .parse()
                    .with_context(|| format!("bad state seed `{seed}`"))?;
                StateVector::random(&labels, &mut ChaCha8Rng::seed_from_u64(seed))
            } else {
                bail!("unknown state `{spec}`")
            }
        }
    };
    state.map_err(|e| anyhow!("state `{spec}`: {e}"))
}

enum Policy {
    Enumerate,
    Single(OutcomePolicy),
}

fn parse_policy(spec: &str, schedule: &ProtocolSchedule) -> Result<Policy> {
    if spec == "enumerate" {
        return Ok(Policy::Enumerate);
    }
    if let Some(seed) = spec.strip_prefix("sampled:") {
        let seed = seed
            .parse()
            .with_context(|| format!("bad sampling seed `{seed}`"))?;
        return Ok(Policy::Single(OutcomePolicy::Sampled(seed)));
    }
    if let Some(bits) = spec.strip_prefix("forced:") {
        let measured = schedule.measured_qubits();
        if bits.len() != measured.len() || !bits.chars().all(|c| c == '0' || c == '1') {
            bail!(
                "forced pattern needs {} bits (one per measurement), got `{bits}`",
                measured.len()
            );
        }
        let a: BTreeMap<_, _> = measured
            .into_iter()
            .zip(bits.bytes().map(|b| b - b'0'))
            .collect();
        return Ok(Policy::Single(OutcomePolicy::Forced(a)));
    }
    bail!("unknown policy `{spec}`")
}

fn load_tree(path: &Path) -> Result<RootedTree> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_tree(&text).with_context(|| format!("in {}", path.display()))
}

fn load_schedule(path: &Path, kind: ProtocolKind) -> Result<ProtocolSchedule> {
    let tree = load_tree(path)?;
    let layout = allocate_layout(&tree, Numbering::Canonical)?;
    Ok(build_schedule(kind, &tree, &layout)?)
}

fn write_out(dir: Option<&Path>, name: &str, text: &str) -> Result<()> {
    if let Some(dir) = dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn write_dot(path: Option<&Path>, tree: &RootedTree) -> Result<()> {
    if let Some(path) = path {
        fs::write(path, export_dot(tree, &tree.profile()))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn oracle(s: &ProtocolSchedule, psi: &StateVector, gate: &Gate1Q) -> Result<StateVector> {
    let out = match s.kind() {
        ProtocolKind::Ch => oracle_ch(psi, s.layout(), gate),
        ProtocolKind::Cu => oracle_cu(psi, s.layout(), gate),
    };
    Ok(out?)
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let c = &args.common;
    let schedule = load_schedule(&c.tree, c.kind)?;
    write_dot(c.dot.as_deref(), schedule.tree())?;
    let gate = parse_gate(&c.gate, c.kind)?;
    let psi = parse_state(&c.state, &schedule)?;
    let Policy::Single(policy) = parse_policy(&args.policy, &schedule)? else {
        return Err(anyhow!("run executes a single branch; use `verify` to enumerate").into());
    };
    let (out, transcript) =
        execute(&schedule, &psi, &gate, &policy).map_err(anyhow::Error::from)?;
    write_out(c.out.as_deref(), "transcript.txt", &transcript.to_text())?;
    let p = schedule.tree().profile();
    println!("ebits {} (predicted {})", transcript.ebits, p.n() - 1);
    println!(
        "cbits {} (predicted {})",
        transcript.cbits,
        cbits(c.kind, &p)
    );
    println!(
        "steps {} (predicted {})",
        transcript.step_count,
        steps(c.kind, &p)
    );
    let v = verify_branch(&out, &oracle(&schedule, &psi, &gate)?).map_err(anyhow::Error::from)?;
    println!("fidelity {:.12}", v.fidelity());
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let c = &args.common;
    let mut schedule = load_schedule(&c.tree, c.kind)?;
    write_dot(c.dot.as_deref(), schedule.tree())?;
    if args.corrections == Corrections::Reference {
        let five = allocate_layout(&RootedTree::five_party(), Numbering::FiveParty)
            .map_err(anyhow::Error::from)?;
        if c.kind != ProtocolKind::Cu || *schedule.layout() != five {
            return Err(
                anyhow!("reference corrections exist only for the five-party cu protocol").into(),
            );
        }
        let downward: Vec<_> = fixture_tables()
            .into_iter()
            .filter(|t| {
                t.context.kind == ProtocolKind::Cu && schedule.stage_table(t.context.step).is_some()
            })
            .collect();
        for t in downward {
            schedule = schedule.with_joint_table(t).map_err(anyhow::Error::from)?;
        }
    }
    let gate = parse_gate(&c.gate, c.kind)?;
    let psi = parse_state(&c.state, &schedule)?;
    let expected = oracle(&schedule, &psi, &gate)?;
    let runs = match parse_policy(&args.policy, &schedule)? {
        Policy::Enumerate => enumerate_branches(&schedule, &psi, &gate)
            .map_err(anyhow::Error::from)?
            .into_iter()
            .map(|b| (b.assignment, b.state, b.probability))
            .collect::<Vec<_>>(),
        Policy::Single(policy) => {
            let (state, t) =
                execute(&schedule, &psi, &gate, &policy).map_err(anyhow::Error::from)?;
            let a = t.measurements().map(|r| (r.qubit, r.outcome)).collect();
            let p = t.measurements().map(|r| r.probability).product();
            vec![(a, state, p)]
        }
    };
    let mut report = String::new();
    let mut failures = 0;
    let mut min_fidelity = f64::INFINITY;
    let mut total = 0.0;
    for (assignment, state, p) in &runs {
        let v = verify_branch(state, &expected).map_err(anyhow::Error::from)?;
        min_fidelity = min_fidelity.min(v.fidelity());
        total += p;
        if !v.is_pass() {
            failures += 1;
            let bits: String = assignment.values().map(|b| char::from(b'0' + b)).collect();
            let _ = writeln!(report, "FAIL branch {bits} fidelity {:.12}", v.fidelity());
        }
    }
    let summary = format!(
        "branches {}\nmin_fidelity {:.12}\nprobability_sum {:.12}\nfailures {failures}\n",
        runs.len(),
        min_fidelity,
        total
    );
    report.insert_str(0, &summary);
    write_out(c.out.as_deref(), "verify.txt", &report)?;
    print!("{report}");
    if failures > 0 {
        return Err(Failure::Verification(format!(
            "{failures} of {} branches failed",
            runs.len()
        )));
    }
    Ok(())
}

fn cmd_tables(args: TablesArgs) -> Result<(), Failure> {
    let report = regenerate_tables().map_err(anyhow::Error::from)?;
    let text = report.render();
    write_out(args.out.as_deref(), "tables.txt", &text)?;
    print!("{text}");
    let diffs: usize = report
        .tables
        .iter()
        .map(|t| {
            t.rows
                .iter()
                .filter(|r| r.status == RowStatus::Diff)
                .count()
        })
        .sum();
    println!("{diffs} rows differ from the reference");
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), Failure> {
    let tree = load_tree(&args.tree)?;
    write_dot(args.dot.as_deref(), &tree)?;
    let report = comparison_report(args.kind, &tree).map_err(anyhow::Error::from)?;
    write_out(args.out.as_deref(), "report.txt", &report.to_text())?;
    write_out(args.out.as_deref(), "report.csv", &report.to_csv())?;
    print!("{}", report.to_text());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Tables(a) => cmd_tables(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
