use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gsrc::bench::{emit_csv, sweep_alpha, write_csv, SweepRow};
use gsrc::codec::{encode, GeneralizedCode, Stripe, VerifyLevel};
use gsrc::galois::Elem;
use gsrc::layout::{build_layout, CodeParams};
use gsrc::repair::{
    average_repair_bandwidth, bandwidth, execute_repair, lower_bound, plan_repair, upper_bound, SymbolRef,
};

use crate::metadata::CodeMetadata;
use crate::shard::{pack, parse_node, shard_name, symbols_for_bytes, unpack, Shard};
use crate::{CliError, EXIT_OK, EXIT_USAGE};

/// Metadata file written next to the shards by `encode`.
pub const METADATA_FILE: &str = "metadata.json";

#[derive(Debug, Parser)]
#[command(name = "gsrc", version, about = "Access-optimal regenerating codes with arbitrary sub-packetization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a code and write its metadata.
    Construct(ConstructArgs),
    /// Split a file into n shards.
    Encode(EncodeArgs),
    /// Regenerate one systematic shard from the other n-1.
    Repair(RepairArgs),
    /// Rebuild the original file from any k shards.
    Reconstruct(ReconstructArgs),
    /// Average repair bandwidth over a list of alpha values, as CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub alpha: usize,
    /// Field width: 4, 8 or 16.
    #[arg(long, default_value_t = 8)]
    pub w: u8,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// auto, exhaustive, or sampled:N
    #[arg(long, default_value = "auto", value_parser = parse_level)]
    pub verify: VerifyLevel,
    #[arg(long, short, default_value = "code.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub meta: PathBuf,
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RepairArgs {
    /// Defaults to metadata.json in the shard directory.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long)]
    pub shards: PathBuf,
    /// Failed node: d1..dk or 1..k.
    #[arg(long)]
    pub node: String,
    /// Defaults to the node's file in the shard directory.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Defaults to metadata.json in the shard directory.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long)]
    pub shards: PathBuf,
    /// Comma-separated nodes to use; defaults to the first k shards present.
    #[arg(long, value_delimiter = ',')]
    pub nodes: Vec<String>,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', required = true)]
    pub alphas: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    pub w: u8,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "auto", value_parser = parse_level)]
    pub verify: VerifyLevel,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn parse_level(s: &str) -> Result<VerifyLevel, String> {
    let normalized = match s.split_once(':') {
        Some((head, n)) => format!("{head}({n})"),
        None => s.to_string(),
    };
    normalized.parse().map_err(|e: gsrc::Error| e.to_string())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(cli.command, &mut stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Construct(a) => construct(&a, out),
        Command::Encode(a) => encode_file(&a, out),
        Command::Repair(a) => repair(&a, out),
        Command::Reconstruct(a) => reconstruct(&a, out),
        Command::Bench(a) => bench(&a, out),
    }
}

fn say(out: &mut dyn Write, line: impl AsRef<str>) -> Result<(), CliError> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

pub fn construct(a: &ConstructArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let params = CodeParams::new(a.n, a.k, a.alpha, a.w, a.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let layout = build_layout(&params).map_err(|source| CliError::Construction { stage: "partitioning", source })?;
    let gamma =
        average_repair_bandwidth(&layout).map_err(|source| CliError::Construction { stage: "scheduling", source })?;
    let (code, report) = GeneralizedCode::construct(&params, a.verify)
        .map_err(|source| CliError::Construction { stage: "MDS search", source })?;
    CodeMetadata::from_code(&code, &report, None).write(&a.out)?;
    say(
        out,
        format!(
            "constructed ({}, {}) code, alpha={}, GF(2^{}); MDS {} over {} subsets; average repair bandwidth {} -> {}",
            params.n,
            params.k,
            params.alpha,
            params.w,
            report.level,
            report.checked,
            gamma,
            a.out.display()
        ),
    )
}

/// File bytes to a zero-padded symbol stream of whole stripes.
fn ingest(w: u8, bytes: &[u8], stripe_symbols: usize) -> Vec<Elem> {
    let count = symbols_for_bytes(w, bytes.len());
    let mut symbols = unpack(w, bytes, count);
    symbols.resize(count.div_ceil(stripe_symbols) * stripe_symbols, 0);
    symbols
}

pub fn encode_file(a: &EncodeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut meta = CodeMetadata::read(&a.meta)?;
    let code = meta.to_code()?;
    let p = *code.params();
    let data = fs::read(&a.input).map_err(|e| CliError::io(&a.input, e))?;
    let stripe_symbols = p.k * p.alpha;
    let symbols = ingest(p.w, &data, stripe_symbols);
    let stripes = symbols.len() / stripe_symbols;

    let mut nodes: Vec<Vec<Elem>> = vec![Vec::with_capacity(stripes * p.alpha); p.n];
    for chunk in symbols.chunks(stripe_symbols) {
        let coded = encode(&code, &Stripe::new(p.k, p.alpha, chunk.to_vec())?)?;
        for (j, node) in nodes.iter_mut().enumerate() {
            node.extend_from_slice(coded.node(j));
        }
    }
    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    for (j, symbols) in nodes.into_iter().enumerate() {
        Shard::new(&p, j, symbols).write(&a.out_dir.join(shard_name(p.k, j)))?;
    }
    meta.original_length = Some(data.len() as u64);
    meta.write(&a.out_dir.join(METADATA_FILE))?;
    say(
        out,
        format!("encoded {} bytes into {} stripes x {} shards in {}", data.len(), stripes, p.n, a.out_dir.display()),
    )
}

fn metadata_path(meta: &Option<PathBuf>, shards: &Path) -> PathBuf {
    meta.clone().unwrap_or_else(|| shards.join(METADATA_FILE))
}

/// Loads and cross-checks shards for `nodes`; all must agree on the stripe count.
fn load_shards(dir: &Path, p: &CodeParams, nodes: &[usize]) -> Result<Vec<Shard>, CliError> {
    let missing: Vec<String> = nodes
        .iter()
        .map(|&j| dir.join(shard_name(p.k, j)))
        .filter(|path| !path.is_file())
        .map(|path| path.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(CliError::MissingShards(missing));
    }
    let mut shards = Vec::with_capacity(nodes.len());
    for &j in nodes {
        let path = dir.join(shard_name(p.k, j));
        let shard = Shard::read(&path)?;
        shard.header.check(p, j).map_err(|m| CliError::Mismatch(format!("{}: {m}", path.display())))?;
        shards.push(shard);
    }
    if let Some(first) = shards.first() {
        if shards.iter().any(|s| s.header.stripe_count != first.header.stripe_count) {
            return Err(CliError::Mismatch("shards disagree on the stripe count".into()));
        }
    }
    Ok(shards)
}

pub fn repair(a: &RepairArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let meta = CodeMetadata::read(&metadata_path(&a.meta, &a.shards))?;
    let code = meta.to_code()?;
    let p = *code.params();
    let failed = parse_node(p.k, p.n, &a.node).map_err(CliError::Usage)?;
    if failed >= p.k {
        return Err(gsrc::Error::Unsupported(format!(
            "{} is a parity node; only systematic nodes are repaired",
            a.node
        ))
        .into());
    }
    let survivors: Vec<usize> = (0..p.n).filter(|&j| j != failed).collect();
    let shards = load_shards(&a.shards, &p, &survivors)?;
    let stripes = shards.first().map_or(0, |s| s.header.stripe_count as usize);
    let by_node = |j: usize| &shards[if j < failed { j } else { j - 1 }];

    let plan = plan_repair(code.layout(), failed)?;
    let trace = bandwidth(&plan)?;
    let mut rebuilt = Vec::with_capacity(stripes * p.alpha);
    for s in 0..stripes {
        let symbols = execute_repair(&code, &plan, |r| {
            let (node, row) = match r {
                SymbolRef::Data(id) => (id.node, id.row),
                SymbolRef::Parity { row, parity } => (p.k + parity, row),
            };
            by_node(node).stripe(s).get(row).copied()
        })?;
        rebuilt.extend(symbols);
    }
    let target = a.out.clone().unwrap_or_else(|| a.shards.join(shard_name(p.k, failed)));
    Shard::new(&p, failed, rebuilt).write(&target)?;

    let (lo, hi) = (lower_bound(&p), upper_bound(&p));
    let contacted = plan.reads_per_node().iter().filter(|&&c| c > 0).count();
    let relation = if trace.gamma == lo { " = lower bound".to_string() } else { String::new() };
    say(out, format!("repaired {} over {} stripes -> {}", a.node, stripes, target.display()))?;
    say(
        out,
        format!(
            "{} symbols/stripe accessed and transferred from {} nodes, gamma {}{} (bounds [{}, {}])",
            trace.accessed, contacted, trace.gamma, relation, lo, hi
        ),
    )
}

pub fn reconstruct(a: &ReconstructArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let meta = CodeMetadata::read(&metadata_path(&a.meta, &a.shards))?;
    let code = meta.to_code()?;
    let p = *code.params();
    let length = meta
        .original_length
        .ok_or_else(|| CliError::Mismatch("metadata has no original_length; use the copy written by encode".into()))?;

    let nodes: Vec<usize> = if a.nodes.is_empty() {
        let present: Vec<usize> = (0..p.n).filter(|&j| a.shards.join(shard_name(p.k, j)).is_file()).collect();
        if present.len() < p.k {
            return Err(CliError::TooFewShards { need: p.k, found: present.len() });
        }
        present[..p.k].to_vec()
    } else {
        let nodes =
            a.nodes.iter().map(|s| parse_node(p.k, p.n, s)).collect::<Result<Vec<_>, _>>().map_err(CliError::Usage)?;
        let mut distinct = nodes.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < p.k {
            return Err(CliError::TooFewShards { need: p.k, found: distinct.len() });
        }
        if nodes.len() != p.k || distinct.len() != p.k {
            return Err(CliError::Usage(format!("give exactly {} distinct nodes", p.k)));
        }
        nodes
    };
    let shards = load_shards(&a.shards, &p, &nodes)?;
    let stripes = shards[0].header.stripe_count as usize;
    let decoder = code.decoder(&nodes)?;

    let mut bytes = Vec::with_capacity(stripes * p.k * p.alpha * 2);
    let mut symbols = Vec::with_capacity(stripes * p.k * p.alpha);
    for s in 0..stripes {
        let parts: Vec<&[Elem]> = shards.iter().map(|sh| sh.stripe(s)).collect();
        symbols.extend(decoder.decode(&parts)?.data);
    }
    pack(p.w, &symbols, &mut bytes);
    if (bytes.len() as u64) < length {
        return Err(CliError::Mismatch(format!("shards hold {} bytes, metadata expects {length}", bytes.len())));
    }
    bytes.truncate(length as usize);
    fs::write(&a.output, &bytes).map_err(|e| CliError::io(&a.output, e))?;
    let names: Vec<String> = nodes.iter().map(|&j| crate::shard::node_label(p.k, j)).collect();
    say(out, format!("reconstructed {} bytes from {} -> {}", bytes.len(), names.join(","), a.output.display()))
}

pub fn bench(a: &BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let results = sweep_alpha(a.n, a.k, &a.alphas, a.w, a.seed, a.verify);
    let mut rows: Vec<SweepRow> = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(f) => eprintln!("alpha={}: skipped: {}", f.alpha, f.error),
        }
    }
    if rows.is_empty() {
        return Err(CliError::Usage("no alpha value could be served".into()));
    }
    match &a.csv {
        Some(path) => {
            emit_csv(&rows, path)?;
            say(out, format!("wrote {} rows to {}", rows.len(), path.display()))
        }
        None => write_csv(&rows, out).map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}
