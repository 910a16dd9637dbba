//! Run configuration: defaults, key=value config files, and flag
//! overrides, merged in that order so flags always win. Every command
//! echoes the fully resolved configuration in the same key=value format,
//! so a printed block can be saved and replayed via --config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cdlsi::error::{Error, Result};
use cdlsi::eval::SweepMethod;
use cdlsi::peer::TruncationMode;

/// How documents are dealt to peers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    /// Document i goes to peer i mod peers.
    Uniform,
    /// Each corpus file becomes one peer.
    ByFile,
}

impl Assignment {
    fn label(self) -> &'static str {
        match self {
            Assignment::Uniform => "uniform",
            Assignment::ByFile => "by-file",
        }
    }
}

impl FromStr for Assignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Assignment::Uniform),
            "by-file" => Ok(Assignment::ByFile),
            other => Err(Error::Parameter(format!(
                "unknown assignment policy {other:?}; expected uniform or by-file"
            ))),
        }
    }
}

/// Every knob any subcommand reads, fully resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Corpus files; with by-file assignment, one peer per file.
    pub corpus: Vec<PathBuf>,
    pub queries: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub peers: usize,
    pub assignment: Assignment,
    pub clusters: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub rank: Vec<usize>,
    pub h: Vec<usize>,
    pub delta: f64,
    pub cast: Vec<usize>,
    pub top_n: usize,
    pub rebuild_fraction: f64,
    pub seeds: Vec<u64>,
    pub methods: Vec<SweepMethod>,
    pub topics: usize,
    pub docs_per_topic: usize,
    pub vocab_per_topic: usize,
    pub overlap: f64,
    pub polysemy: usize,
    pub initial_fraction: f64,
    pub step_fraction: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            corpus: Vec::new(),
            queries: None,
            qrels: None,
            out_dir: PathBuf::from("out"),
            peers: 10,
            assignment: Assignment::Uniform,
            clusters: vec![20],
            epsilon: vec![5.0],
            rank: Vec::new(),
            h: vec![10],
            delta: 0.05,
            cast: vec![5],
            top_n: 10,
            rebuild_fraction: 0.2,
            seeds: vec![7],
            methods: vec![SweepMethod::Cdlsi, SweepMethod::Ggloss],
            topics: 10,
            docs_per_topic: 20,
            vocab_per_topic: 30,
            overlap: 0.2,
            polysemy: 5,
            initial_fraction: 0.70,
            step_fraction: 0.05,
        }
    }
}

impl Config {
    /// Applies one key=value pair. `where_` names the source for errors.
    pub fn set(&mut self, key: &str, value: &str, where_: &str) -> Result<()> {
        let bad = |e: Error| {
            Error::Parameter(format!("{where_}: bad value for {key}: {e}"))
        };
        match key {
            "corpus" => self.corpus = split_list(value).iter().map(PathBuf::from).collect(),
            "queries" => self.queries = Some(PathBuf::from(value)),
            "qrels" => self.qrels = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "peers" => self.peers = parse_one(value).map_err(bad)?,
            "assignment" => self.assignment = value.parse().map_err(bad)?,
            "clusters" => self.clusters = parse_list(value).map_err(bad)?,
            "epsilon" => self.epsilon = parse_list(value).map_err(bad)?,
            "rank" => self.rank = parse_list(value).map_err(bad)?,
            "h" => self.h = parse_list(value).map_err(bad)?,
            "delta" => self.delta = parse_one(value).map_err(bad)?,
            "cast" => self.cast = parse_list(value).map_err(bad)?,
            "top_n" => self.top_n = parse_one(value).map_err(bad)?,
            "rebuild_fraction" => self.rebuild_fraction = parse_one(value).map_err(bad)?,
            "seeds" => self.seeds = parse_list(value).map_err(bad)?,
            "methods" => {
                self.methods = split_list(value)
                    .iter()
                    .map(|m| m.parse())
                    .collect::<Result<_>>()
                    .map_err(bad)?;
            }
            "topics" => self.topics = parse_one(value).map_err(bad)?,
            "docs_per_topic" => self.docs_per_topic = parse_one(value).map_err(bad)?,
            "vocab_per_topic" => self.vocab_per_topic = parse_one(value).map_err(bad)?,
            "overlap" => self.overlap = parse_one(value).map_err(bad)?,
            "polysemy" => self.polysemy = parse_one(value).map_err(bad)?,
            "initial_fraction" => self.initial_fraction = parse_one(value).map_err(bad)?,
            "step_fraction" => self.step_fraction = parse_one(value).map_err(bad)?,
            other => {
                return Err(Error::Parameter(format!(
                    "{where_}: unknown configuration key {other:?}"
                )));
            }
        }
        Ok(())
    }

    /// Reads a key=value file: one pair per line, # comments and blank
    /// lines ignored.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let content = std::fs::read_to_string(path)?;
        for (lineno, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected key=value, got {line:?}"),
                });
            };
            self.set(
                key.trim(),
                value.trim(),
                &format!("{} line {}", path.display(), lineno + 1),
            )?;
        }
        Ok(())
    }

    /// The resolved configuration in config-file form.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "corpus={}", join_paths(&self.corpus));
        let _ = writeln!(s, "queries={}", opt_path(&self.queries));
        let _ = writeln!(s, "qrels={}", opt_path(&self.qrels));
        let _ = writeln!(s, "out_dir={}", self.out_dir.display());
        let _ = writeln!(s, "peers={}", self.peers);
        let _ = writeln!(s, "assignment={}", self.assignment.label());
        let _ = writeln!(s, "clusters={}", join_list(&self.clusters));
        let _ = writeln!(s, "epsilon={}", join_list(&self.epsilon));
        let _ = writeln!(s, "rank={}", join_list(&self.rank));
        let _ = writeln!(s, "h={}", join_list(&self.h));
        let _ = writeln!(s, "delta={}", self.delta);
        let _ = writeln!(s, "cast={}", join_list(&self.cast));
        let _ = writeln!(s, "top_n={}", self.top_n);
        let _ = writeln!(s, "rebuild_fraction={}", self.rebuild_fraction);
        let _ = writeln!(s, "seeds={}", join_list(&self.seeds));
        let methods: Vec<&str> = self.methods.iter().map(|m| m.label()).collect();
        let _ = writeln!(s, "methods={}", methods.join(","));
        let _ = writeln!(s, "topics={}", self.topics);
        let _ = writeln!(s, "docs_per_topic={}", self.docs_per_topic);
        let _ = writeln!(s, "vocab_per_topic={}", self.vocab_per_topic);
        let _ = writeln!(s, "overlap={}", self.overlap);
        let _ = writeln!(s, "polysemy={}", self.polysemy);
        let _ = writeln!(s, "initial_fraction={}", self.initial_fraction);
        let _ = writeln!(s, "step_fraction={}", self.step_fraction);
        s
    }

    /// Range checks shared by every command.
    pub fn validate(&self) -> Result<()> {
        if self.peers == 0 {
            return Err(Error::Parameter("peers must be >= 1".into()));
        }
        if self.clusters.is_empty() || self.clusters.iter().any(|&k| k == 0) {
            return Err(Error::Parameter("clusters must list values >= 1".into()));
        }
        if self.epsilon.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::Parameter("epsilon values must be >= 0".into()));
        }
        if self.rank.iter().any(|&k| k == 0) {
            return Err(Error::Parameter("rank values must be >= 1".into()));
        }
        if self.epsilon.is_empty() && self.rank.is_empty() {
            return Err(Error::Parameter(
                "at least one epsilon or rank value is required".into(),
            ));
        }
        if self.h.is_empty() || self.h.iter().any(|&h| h == 0) {
            return Err(Error::Parameter("h must list values >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::Parameter(format!(
                "delta must be in [0, 1), got {}",
                self.delta
            )));
        }
        if self.cast.is_empty() || self.cast.contains(&0) {
            return Err(Error::Parameter("cast sizes must be >= 1".into()));
        }
        if self.top_n == 0 {
            return Err(Error::Parameter("top_n must be >= 1".into()));
        }
        if !(self.rebuild_fraction > 0.0 && self.rebuild_fraction.is_finite()) {
            return Err(Error::Parameter(format!(
                "rebuild_fraction must be positive, got {}",
                self.rebuild_fraction
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Parameter("at least one seed is required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Parameter("at least one method is required".into()));
        }
        if !(0.0 < self.initial_fraction && self.initial_fraction <= 1.0) {
            return Err(Error::Parameter(format!(
                "initial_fraction must be in (0, 1], got {}",
                self.initial_fraction
            )));
        }
        if !(0.0 < self.step_fraction && self.step_fraction <= 1.0) {
            return Err(Error::Parameter(format!(
                "step_fraction must be in (0, 1], got {}",
                self.step_fraction
            )));
        }
        Ok(())
    }

    /// Extra check for commands that select peers: a cast can never ask
    /// for more peers than exist.
    pub fn validate_cast(&self) -> Result<()> {
        if let Some(&g) = self.cast.iter().find(|&&g| g > self.peers) {
            return Err(Error::Parameter(format!(
                "cast {g} exceeds the peer count ({})",
                self.peers
            )));
        }
        Ok(())
    }

    /// The swept truncation modes: every epsilon, then every rank cut.
    pub fn truncations(&self) -> Vec<TruncationMode> {
        self.epsilon
            .iter()
            .map(|&e| TruncationMode::Threshold(e))
            .chain(self.rank.iter().map(|&k| TruncationMode::Rank(k)))
            .collect()
    }

    /// The single truncation used by non-sweep commands: the first rank
    /// cut if any is configured, else the first epsilon.
    pub fn primary_truncation(&self) -> TruncationMode {
        if let Some(&k) = self.rank.first() {
            TruncationMode::Rank(k)
        } else {
            TruncationMode::Threshold(self.epsilon[0])
        }
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.corpus
            .first()
            .cloned()
            .unwrap_or_else(|| self.out_dir.join("corpus.jsonl"))
    }

    pub fn queries_path(&self) -> PathBuf {
        self.queries
            .clone()
            .unwrap_or_else(|| self.out_dir.join("queries.jsonl"))
    }

    pub fn qrels_path(&self) -> PathBuf {
        self.qrels
            .clone()
            .unwrap_or_else(|| self.out_dir.join("qrels.txt"))
    }
}

fn split_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn parse_one<T>(value: &str) -> Result<T>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Parameter(format!("{e}")))
}

fn parse_list<T>(value: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    split_list(value).iter().map(|s| parse_one(s)).collect()
}

fn join_list<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn join_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}
