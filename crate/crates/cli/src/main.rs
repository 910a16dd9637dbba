//! Command-line driver: corpus generation, index building, descriptor
//! publishing, ad-hoc queries, parameter sweeps, and the update
//! simulation. Every command echoes its fully resolved configuration
//! before doing anything, exits 0 on success, and on failure prints one
//! `error[category]: message` line and exits nonzero.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use cdlsi::baselines::{GglossDescriptor, IsClusterDescriptor};
use cdlsi::corpus::{
    generate_synthetic, load_corpus, load_qrels, load_queries, log_entropy_weights,
    vectorize_query, write_corpus, write_qrels, write_queries, RawDoc, SyntheticParams,
    TermDictionary, WeightedDoc,
};
use cdlsi::error::{Error, Result};
use cdlsi::eval::{
    aggregates, aggregates_json, assign_round_robin, comp_table, mix_seed, peer_name,
    run_sweep, run_update_study, write_csv, SweepCell, SweepConfig, SweepCorpus,
    SweepData, SweepMethod, UpdateConfig, UpdateStep,
};
use cdlsi::federation::{AnyDescriptor, Federation, SimulatedPeer};
use cdlsi::peer::{PeerIndex, PeerIndexBuilder};

use config::{Assignment, Config};

#[derive(Parser)]
#[command(
    name = "cdlsi",
    version,
    about = "Federated text retrieval over per-cluster concept spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted-topic corpus with queries and judgments.
    Generate(CommonArgs),
    /// Weight a corpus, deal documents to peers, and build their indexes.
    Index(CommonArgs),
    /// Regenerate descriptor files from the built indexes.
    Publish(CommonArgs),
    /// Run one query against the built indexes and print merged results.
    Query(QueryArgs),
    /// Run a parameter sweep and write CSV/JSON reports.
    Bench(CommonArgs),
    /// Run the incremental-update study with and without rebuilds.
    UpdateSim(CommonArgs),
}

/// Flags shared by every command; each overrides the matching config key.
#[derive(Args)]
struct CommonArgs {
    /// key=value configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus file(s), comma separated; with by-file assignment each file
    /// becomes one peer.
    #[arg(long)]
    corpus: Option<String>,
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    qrels: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    peers: Option<usize>,
    /// Document assignment policy: uniform or by-file.
    #[arg(long)]
    assignment: Option<String>,
    /// Cluster count per peer; comma separated values sweep it.
    #[arg(long)]
    clusters: Option<String>,
    /// Concept-space cutoff; singular values below it are dropped.
    #[arg(long)]
    epsilon: Option<String>,
    /// Fixed-dimension cut per cluster (overrides epsilon when set).
    #[arg(long)]
    rank: Option<String>,
    /// Clusters summed per peer when ranking peers.
    #[arg(long)]
    h: Option<String>,
    /// Cluster-relatedness threshold.
    #[arg(long)]
    delta: Option<f64>,
    /// Peers selected per query; comma separated values sweep it.
    #[arg(long)]
    cast: Option<String>,
    /// Results returned per peer and per merged list.
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long)]
    rebuild_fraction: Option<f64>,
    #[arg(long)]
    seeds: Option<String>,
    /// Methods to run: cdlsi, cdlsi_nr, ggloss, is_cluster, cm1, cm2.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    topics: Option<usize>,
    #[arg(long)]
    docs_per_topic: Option<usize>,
    #[arg(long)]
    vocab_per_topic: Option<usize>,
    #[arg(long)]
    overlap: Option<f64>,
    #[arg(long)]
    polysemy: Option<usize>,
    #[arg(long)]
    initial_fraction: Option<f64>,
    #[arg(long)]
    step_fraction: Option<f64>,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Query text.
    #[arg(long)]
    text: String,
    /// Method to answer with.
    #[arg(long, default_value = "cdlsi")]
    method: String,
    /// Identifier echoed with the results.
    #[arg(long, default_value = "adhoc")]
    query_id: String,
}

fn main() {
    // Die quietly when a downstream pipe closes (e.g. `cdlsi bench | head`)
    // instead of panicking on the failed write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let line = e.to_string();
                let line = line.lines().next().unwrap_or("invalid arguments");
                let line = line.strip_prefix("error: ").unwrap_or(line);
                eprintln!("error[usage]: {line}");
                std::process::exit(2);
            }
            // --help and --version print on stdout and exit 0.
            print!("{e}");
            std::process::exit(0);
        }
    };
    if let Err(e) = run(cli) {
        // The category already names the failure class, so print only the
        // variant's own message after it.
        let message = match &e {
            Error::Dimension(m)
            | Error::Parameter(m)
            | Error::Config(m)
            | Error::Descriptor(m) => m.clone(),
            Error::Parse { line, message } => format!("line {line}: {message}"),
            Error::Io(io) => io.to_string(),
        };
        eprintln!("error[{}]: {message}", e.category());
        std::process::exit(1);
    }
}

/// Prefixes io failures with the file they came from.
fn with_path<T>(result: Result<T>, path: &Path) -> Result<T> {
    result.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(resolve(&args, "generate")?),
        Command::Index(args) => cmd_index(resolve(&args, "index")?),
        Command::Publish(args) => cmd_publish(resolve(&args, "publish")?),
        Command::Query(args) => {
            let config = resolve(&args.common, "query")?;
            cmd_query(config, &args.text, &args.method, &args.query_id)
        }
        Command::Bench(args) => cmd_bench(resolve(&args, "bench")?),
        Command::UpdateSim(args) => cmd_update_sim(resolve(&args, "update-sim")?),
    }
}

/// Defaults, then the config file, then flags; echoes the result.
fn resolve(args: &CommonArgs, command: &str) -> Result<Config> {
    let mut config = Config::default();
    if let Some(path) = &args.config {
        config.apply_file(path)?;
    }
    let mut flag = |key: &str, value: Option<String>| -> Result<()> {
        if let Some(v) = value {
            config.set(key, &v, &format!("--{}", key.replace('_', "-")))?;
        }
        Ok(())
    };
    flag("corpus", args.corpus.clone())?;
    flag("queries", args.queries.as_ref().map(|p| p.display().to_string()))?;
    flag("qrels", args.qrels.as_ref().map(|p| p.display().to_string()))?;
    flag("out_dir", args.out_dir.as_ref().map(|p| p.display().to_string()))?;
    flag("peers", args.peers.map(|v| v.to_string()))?;
    flag("assignment", args.assignment.clone())?;
    flag("clusters", args.clusters.clone())?;
    flag("epsilon", args.epsilon.clone())?;
    flag("rank", args.rank.clone())?;
    flag("h", args.h.clone())?;
    flag("delta", args.delta.map(|v| v.to_string()))?;
    flag("cast", args.cast.clone())?;
    flag("top_n", args.top_n.map(|v| v.to_string()))?;
    flag("rebuild_fraction", args.rebuild_fraction.map(|v| v.to_string()))?;
    flag("seeds", args.seeds.clone())?;
    flag("methods", args.methods.clone())?;
    flag("topics", args.topics.map(|v| v.to_string()))?;
    flag("docs_per_topic", args.docs_per_topic.map(|v| v.to_string()))?;
    flag("vocab_per_topic", args.vocab_per_topic.map(|v| v.to_string()))?;
    flag("overlap", args.overlap.map(|v| v.to_string()))?;
    flag("polysemy", args.polysemy.map(|v| v.to_string()))?;
    flag("initial_fraction", args.initial_fraction.map(|v| v.to_string()))?;
    flag("step_fraction", args.step_fraction.map(|v| v.to_string()))?;

    println!("# effective config ({command})");
    print!("{}", config.echo());
    println!("# end config");
    Ok(config)
}

fn synthetic_params(config: &Config) -> SyntheticParams {
    SyntheticParams {
        topics: config.topics,
        docs_per_topic: config.docs_per_topic,
        vocab_per_topic: config.vocab_per_topic,
        overlap_fraction: config.overlap,
        polysemy_terms: config.polysemy,
        seed: config.seeds[0],
    }
}

fn cmd_generate(config: Config) -> Result<()> {
    config.validate()?;
    let (docs, queries, qrels) = generate_synthetic(&synthetic_params(&config))?;
    fs::create_dir_all(&config.out_dir)?;
    write_corpus(&config.corpus_path(), &docs)?;
    write_queries(&config.queries_path(), &queries)?;
    write_qrels(&config.qrels_path(), &qrels)?;
    println!(
        "wrote {} documents, {} queries, {} judged pairs under {}",
        docs.len(),
        queries.len(),
        qrels.iter().count(),
        config.out_dir.display()
    );
    Ok(())
}

/// Everything the broker side needs that is not per-peer: the shared
/// dictionary and weighting, plus who hosts which document.
#[derive(Debug, Serialize, Deserialize)]
struct GlobalArtifact {
    peers: Vec<String>,
    doc_peer: BTreeMap<String, String>,
    dictionary: TermDictionary,
    global_factors: Vec<f64>,
}

fn global_path(config: &Config) -> PathBuf {
    config.out_dir.join("global.json")
}

fn peer_dir(config: &Config, peer: &str) -> PathBuf {
    config.out_dir.join("peers").join(peer)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string(value)
        .map_err(|e| Error::Config(format!("artifact serialization failed: {e}")))?;
    fs::write(path, json)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let content = fs::read_to_string(path).map_err(|e| {
        Error::Config(format!(
            "cannot read {} ({e}); run `cdlsi index` first",
            path.display()
        ))
    })?;
    serde_json::from_str(&content)
        .map_err(|e| Error::Config(format!("malformed artifact {}: {e}", path.display())))
}

/// The three descriptor flavors a peer publishes, regenerated together.
fn descriptors_of(index: &mut PeerIndex) -> Vec<AnyDescriptor> {
    vec![
        AnyDescriptor::Cdlsi(index.make_descriptor()),
        AnyDescriptor::Ggloss(GglossDescriptor::from_index(index)),
        AnyDescriptor::IsCluster(IsClusterDescriptor::from_index(index)),
    ]
}

fn cmd_index(mut config: Config) -> Result<()> {
    // Load per source file so by-file assignment can keep the grouping.
    let paths = if config.corpus.is_empty() {
        vec![config.corpus_path()]
    } else {
        config.corpus.clone()
    };
    let mut groups: Vec<Vec<RawDoc>> = Vec::new();
    for path in &paths {
        groups.push(with_path(load_corpus(path), path)?);
    }
    if config.assignment == Assignment::ByFile {
        config.peers = groups.len();
    }
    config.validate()?;

    let union: Vec<RawDoc> = groups.iter().flatten().cloned().collect();
    let weighted = log_entropy_weights(&union)?;

    let shares: Vec<Vec<WeightedDoc>> = match config.assignment {
        Assignment::Uniform => assign_round_robin(&weighted.docs, config.peers)?,
        Assignment::ByFile => {
            let mut shares = Vec::with_capacity(groups.len());
            let mut docs = weighted.docs.iter();
            for group in &groups {
                shares.push(docs.by_ref().take(group.len()).cloned().collect());
            }
            shares
        }
    };
    if shares.iter().any(|s| s.is_empty()) {
        return Err(Error::Config(
            "every peer needs at least one document".into(),
        ));
    }

    // Registering through a federation enforces globally unique doc ids.
    let mut federation = Federation::new();
    let mut peers = Vec::new();
    let truncation = config.primary_truncation();
    for (i, share) in shares.iter().enumerate() {
        let name = peer_name(i);
        let index = PeerIndexBuilder::new(
            &name,
            share,
            config.clusters[0],
            mix_seed(config.seeds[0], i as u64),
        )?
        .build(truncation.clone(), config.delta, true)?;
        federation.add_peer(SimulatedPeer::from_index(index))?;
        peers.push(name);
    }

    let doc_peer: BTreeMap<String, String> = shares
        .iter()
        .enumerate()
        .flat_map(|(i, share)| {
            share.iter().map(move |d| (d.id.clone(), peer_name(i)))
        })
        .collect();

    fs::create_dir_all(&config.out_dir)?;
    write_json(
        &global_path(&config),
        &GlobalArtifact {
            peers: peers.clone(),
            doc_peer,
            dictionary: weighted.dictionary,
            global_factors: weighted.global_factors,
        },
    )?;
    for name in &peers {
        let dir = peer_dir(&config, name);
        fs::create_dir_all(&dir)?;
        let mut index = federation
            .peer(name)
            .expect("peer was just registered")
            .index()
            .clone();
        let descriptors = descriptors_of(&mut index);
        write_json(&dir.join("index.json"), &index)?;
        write_json(&dir.join("descriptors.json"), &descriptors)?;
    }
    println!(
        "indexed {} documents across {} peers under {}",
        weighted.docs.len(),
        peers.len(),
        config.out_dir.display()
    );
    Ok(())
}

fn cmd_publish(config: Config) -> Result<()> {
    let global: GlobalArtifact = read_json(&global_path(&config))?;
    let mut count = 0;
    for name in &global.peers {
        let dir = peer_dir(&config, name);
        let mut index: PeerIndex = read_json(&dir.join("index.json"))?;
        let descriptors = descriptors_of(&mut index);
        count += descriptors.len();
        write_json(&dir.join("descriptors.json"), &descriptors)?;
        write_json(&dir.join("index.json"), &index)?;
    }
    println!("published {count} descriptors for {} peers", global.peers.len());
    Ok(())
}

fn cmd_query(config: Config, text: &str, method: &str, query_id: &str) -> Result<()> {
    config.validate()?;
    let method: SweepMethod = method.parse()?;
    let global: GlobalArtifact = read_json(&global_path(&config))?;
    if config.cast[0] > global.peers.len() {
        return Err(Error::Parameter(format!(
            "cast {} exceeds the {} indexed peers",
            config.cast[0],
            global.peers.len()
        )));
    }

    let mut federation = Federation::new();
    for name in &global.peers {
        let dir = peer_dir(&config, name);
        let index: PeerIndex = read_json(&dir.join("index.json"))?;
        federation.add_peer(SimulatedPeer::from_index(index))?;
        let descriptors: Vec<AnyDescriptor> = read_json(&dir.join("descriptors.json"))?;
        for descriptor in descriptors {
            federation.publish_descriptor(descriptor)?;
        }
    }

    let q = vectorize_query(query_id, text, &global.dictionary, &global.global_factors);
    if q.weights.is_empty() {
        println!("note: no query term appears in the indexed vocabulary");
    }
    let outcome = federation.query(
        method.query_method(),
        &q,
        config.cast[0],
        config.h[0],
        config.top_n,
    )?;

    println!("selected peers:");
    for (rank, peer) in outcome.selection.peers.iter().enumerate() {
        let clusters: Vec<String> =
            peer.cluster_ids.iter().map(|c| c.to_string()).collect();
        println!(
            "  {:>2} {} score={:.6} clusters={}",
            rank + 1,
            peer.peer_id,
            peer.score,
            clusters.join(",")
        );
    }
    println!("results:");
    for (rank, r) in outcome.results.iter().enumerate() {
        println!("  {:>2} {} {} {:.6}", rank + 1, r.doc_id, r.peer_id, r.score);
    }
    Ok(())
}

/// Fixed data when corpus paths are configured, else synthetic data
/// regenerated per sweep seed.
fn sweep_corpus(config: &Config) -> Result<SweepCorpus> {
    if config.corpus.is_empty() && config.queries.is_none() && config.qrels.is_none() {
        return Ok(SweepCorpus::Synthetic(synthetic_params(config)));
    }
    let mut docs = Vec::new();
    let paths = if config.corpus.is_empty() {
        vec![config.corpus_path()]
    } else {
        config.corpus.clone()
    };
    for path in &paths {
        docs.extend(with_path(load_corpus(path), path)?);
    }
    let queries_path = config.queries_path();
    let qrels_path = config.qrels_path();
    Ok(SweepCorpus::Fixed(SweepData {
        docs,
        queries: with_path(load_queries(&queries_path), &queries_path)?,
        qrels: with_path(load_qrels(&qrels_path), &qrels_path)?,
    }))
}

fn sweep_data(config: &Config) -> Result<SweepData> {
    match sweep_corpus(config)? {
        SweepCorpus::Fixed(data) => Ok(data),
        SweepCorpus::Synthetic(params) => {
            let (docs, queries, qrels) = generate_synthetic(&params)?;
            Ok(SweepData { docs, queries, qrels })
        }
    }
}

fn cmd_bench(config: Config) -> Result<()> {
    config.validate()?;
    config.validate_cast()?;
    let corpus = sweep_corpus(&config)?;
    let sweep = SweepConfig {
        methods: config.methods.clone(),
        cluster_counts: config.clusters.clone(),
        truncations: config.truncations(),
        h_values: config.h.clone(),
        casts: config.cast.clone(),
        delta: config.delta,
        top_n: config.top_n,
        seeds: config.seeds.clone(),
        peers: config.peers,
    };
    let cells = run_sweep(&corpus, &sweep)?;

    fs::create_dir_all(&config.out_dir)?;
    let csv_path = config.out_dir.join("sweep.csv");
    write_csv(&cells, fs::File::create(&csv_path)?)?;
    fs::write(config.out_dir.join("sweep.json"), aggregates_json(&cells)?)?;

    let mut tables = Vec::new();
    for (i, &a) in sweep.methods.iter().enumerate() {
        for &b in &sweep.methods[i + 1..] {
            tables.push(comp_table(&cells, a, b));
        }
    }
    let comp_json = serde_json::to_string_pretty(&tables)
        .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
    fs::write(config.out_dir.join("comp.json"), comp_json)?;

    print_sweep_table(&cells);
    for table in &tables {
        for row in &table.rows {
            println!(
                "comp {} vs {} at G={}: wins={:.3} losses={:.3} ties={:.3} over {} query pairs",
                table.method_a,
                table.method_b,
                row.cast,
                row.wins,
                row.losses,
                row.ties,
                row.pairs
            );
        }
    }
    println!(
        "wrote sweep.csv, sweep.json, comp.json under {}",
        config.out_dir.display()
    );
    Ok(())
}

/// Prints per-setting means averaged across seeds.
fn print_sweep_table(cells: &[SweepCell]) {
    #[derive(Default)]
    struct Acc {
        p: f64,
        ap: f64,
        recall: f64,
        recall_n: usize,
        ran: usize,
        skipped: usize,
    }
    let mut rows: BTreeMap<(String, usize, String, usize, usize), Acc> = BTreeMap::new();
    for agg in aggregates(cells).into_values() {
        let trunc = agg
            .epsilon
            .map(|e| format!("eps={e}"))
            .or_else(|| agg.rank.map(|k| format!("k={k}")))
            .unwrap_or_default();
        let acc = rows
            .entry((agg.method.clone(), agg.clusters, trunc, agg.h, agg.cast))
            .or_default();
        if agg.skipped.is_some() {
            acc.skipped += 1;
        } else {
            acc.ran += 1;
            acc.p += agg.mean_p_at_n.unwrap_or(0.0);
            acc.ap += agg.mean_ap_at_n.unwrap_or(0.0);
            if let Some(r) = agg.mean_recall {
                acc.recall += r;
                acc.recall_n += 1;
            }
        }
    }
    println!(
        "{:<10} {:>3} {:>9} {:>3} {:>3} {:>8} {:>8} {:>8} {:>6}",
        "method", "K", "trunc", "h", "G", "P@N", "AP@N", "recall", "seeds"
    );
    for ((method, clusters, trunc, h, cast), acc) in rows {
        if acc.ran == 0 {
            println!(
                "{method:<10} {clusters:>3} {trunc:>9} {h:>3} {cast:>3} {:>8} {:>8} {:>8} {:>6}",
                "-", "-", "-",
                format!("skip:{}", acc.skipped)
            );
            continue;
        }
        let n = acc.ran as f64;
        let recall = if acc.recall_n > 0 {
            format!("{:.4}", acc.recall / acc.recall_n as f64)
        } else {
            "-".into()
        };
        println!(
            "{method:<10} {clusters:>3} {trunc:>9} {h:>3} {cast:>3} {:>8.4} {:>8.4} {recall:>8} {:>6}",
            acc.p / n,
            acc.ap / n,
            acc.ran
        );
    }
}

fn cmd_update_sim(config: Config) -> Result<()> {
    config.validate()?;
    config.validate_cast()?;
    let data = sweep_data(&config)?;
    let update = UpdateConfig {
        peers: config.peers,
        clusters: config.clusters[0],
        epsilon: config.epsilon.first().copied().ok_or_else(|| {
            Error::Parameter("the update study needs an epsilon value".into())
        })?,
        delta: config.delta,
        h: config.h[0],
        cast: config.cast[0],
        top_n: config.top_n,
        seed: config.seeds[0],
        rebuild_fraction: config.rebuild_fraction,
        initial_fraction: config.initial_fraction,
        step_fraction: config.step_fraction,
    };
    let study = run_update_study(&data, &update)?;

    fs::create_dir_all(&config.out_dir)?;
    let json = serde_json::to_string_pretty(&study)
        .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
    fs::write(config.out_dir.join("update.json"), json)?;

    let print_arm = |label: &str, steps: &[UpdateStep]| {
        println!("{label}:");
        println!(
            "  {:>4} {:>7} {:>8} {:>8} {:>8} {:>8}",
            "step", "indexed", "rebuilt", "P@N", "AP@N", "recall"
        );
        for s in steps {
            println!(
                "  {:>4} {:>7} {:>8} {:>8} {:>8} {:>8}",
                s.step,
                s.indexed_docs,
                s.rebuilt_clusters,
                s.mean_p_at_n.map(|v| format!("{v:.4}")).unwrap_or_default(),
                s.mean_ap_at_n.map(|v| format!("{v:.4}")).unwrap_or_default(),
                s.mean_recall.map(|v| format!("{v:.4}")).unwrap_or_default(),
            );
        }
    };
    print_arm("without rebuild", &study.without_rebuild);
    print_arm("with rebuild", &study.with_rebuild);
    println!(
        "ran {} update steps; wrote update.json under {}",
        study.steps,
        config.out_dir.display()
    );
    Ok(())
}
