//! Flat `key=value` experiment configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::CliError;

pub const KEYS: [&str; 11] = ["n", "pattern", "T", "trials", "seed", "c", "chat", "i_max", "n_grid", "nodes", "out"];

/// Every field is optional in the file; each subcommand decides what it
/// requires and which defaults apply.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    pub n: Option<usize>,
    pub pattern: Option<String>,
    pub t: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub c: Option<f64>,
    pub chat: Option<f64>,
    pub i_max: Option<usize>,
    pub n_grid: Option<Vec<usize>>,
    pub nodes: Option<usize>,
    pub out: Option<PathBuf>,
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Validation(format!("{key}: cannot parse {value:?}: {e}")))
}

impl ExperimentConfig {
    /// Set one key; the same key twice in one source is rejected by [`FromStr`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        match key {
            "n" => self.n = Some(parse_num(key, value)?),
            "pattern" => self.pattern = Some(value.to_string()),
            "T" => self.t = Some(parse_num(key, value)?),
            "trials" => self.trials = Some(parse_num(key, value)?),
            "seed" => self.seed = Some(parse_num(key, value)?),
            "c" => self.c = Some(parse_num(key, value)?),
            "chat" => self.chat = Some(parse_num(key, value)?),
            "i_max" => self.i_max = Some(parse_num(key, value)?),
            "n_grid" => {
                let grid = value
                    .split(',')
                    .map(|v| parse_num(key, v.trim()))
                    .collect::<Result<Vec<usize>, _>>()?;
                self.n_grid = Some(grid);
            }
            "nodes" => self.nodes = Some(parse_num(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            other => {
                return Err(CliError::Validation(format!(
                    "unknown key {other:?} (expected one of {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Apply a `key=value` assignment.
    pub fn assign(&mut self, assignment: &str) -> Result<(), CliError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("expected key=value, found {assignment:?}")))?;
        self.set(key.trim(), value)
    }

    /// SHA-256 of the canonical text, framed like a git blob.
    pub fn content_hash(&self) -> String {
        let text = self.to_string();
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", text.len()).as_bytes());
        h.update(text.as_bytes());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl FromStr for ExperimentConfig {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, CliError> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("line {}: expected key=value", lineno + 1)))?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(CliError::Validation(format!("line {}: duplicate key {key:?}", lineno + 1)));
            }
            seen.push(key);
            cfg.set(key, value)
                .map_err(|e| CliError::Validation(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }
}

/// Canonical form: one line per present key, in [`KEYS`] order.
impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(v) = self.n {
            writeln!(f, "n={v}")?;
        }
        if let Some(v) = &self.pattern {
            writeln!(f, "pattern={v}")?;
        }
        if let Some(v) = self.t {
            writeln!(f, "T={v}")?;
        }
        if let Some(v) = self.trials {
            writeln!(f, "trials={v}")?;
        }
        if let Some(v) = self.seed {
            writeln!(f, "seed={v}")?;
        }
        if let Some(v) = self.c {
            writeln!(f, "c={v:?}")?;
        }
        if let Some(v) = self.chat {
            writeln!(f, "chat={v:?}")?;
        }
        if let Some(v) = self.i_max {
            writeln!(f, "i_max={v}")?;
        }
        if let Some(v) = &self.n_grid {
            let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            writeln!(f, "n_grid={}", parts.join(","))?;
        }
        if let Some(v) = self.nodes {
            writeln!(f, "nodes={v}")?;
        }
        if let Some(v) = &self.out {
            writeln!(f, "out={}", v.display())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_comments_and_rejects_junk() {
        let cfg: ExperimentConfig = "# demo\nn = 3\npattern=inf,5\nc=0.25\n\nn_grid=100,1000\n".parse().unwrap();
        assert_eq!(cfg.n, Some(3));
        assert_eq!(cfg.pattern.as_deref(), Some("inf,5"));
        assert_eq!(cfg.c, Some(0.25));
        assert_eq!(cfg.n_grid, Some(vec![100, 1000]));
        assert!("n=3\nn=4".parse::<ExperimentConfig>().is_err());
        assert!("colour=red".parse::<ExperimentConfig>().is_err());
        assert!("n=-1".parse::<ExperimentConfig>().is_err());
        assert!("n".parse::<ExperimentConfig>().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a: ExperimentConfig = "n=3\nseed=1".parse().unwrap();
        let b: ExperimentConfig = "seed=1\nn=3".parse().unwrap();
        let c: ExperimentConfig = "n=3\nseed=2".parse().unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), c.content_hash());
        assert_eq!(a.content_hash().len(), 64);
    }

    #[test]
    fn empty_config_hashes_like_git() {
        // `git hash-object` framing, SHA-256 variant of the empty blob.
        assert_eq!(
            ExperimentConfig::default().content_hash(),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }

    fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
        (
            (
                proptest::option::of(1usize..1000),
                proptest::option::of("(inf|[1-9][0-9]{0,2}|\\+[1-9])(,(inf|[1-9][0-9]{0,2}|\\+[1-9])){0,3}"),
                proptest::option::of(1usize..100_000),
                proptest::option::of(0usize..1_000_000),
                proptest::option::of(any::<u64>()),
                proptest::option::of(1e-9f64..1e3),
            ),
            (
                proptest::option::of(1e-9f64..1e3),
                proptest::option::of(1usize..50),
                proptest::option::of(proptest::collection::vec(1usize..100_000, 1..5)),
                proptest::option::of(1usize..20_000),
                proptest::option::of("[a-z][a-z0-9_/.]{0,20}"),
            ),
        )
            .prop_map(|((n, pattern, t, trials, seed, c), (chat, i_max, n_grid, nodes, out))| ExperimentConfig {
                n,
                pattern,
                t,
                trials,
                seed,
                c,
                chat,
                i_max,
                n_grid,
                nodes,
                out: out.map(PathBuf::from),
            })
    }

    proptest! {
        #[test]
        fn round_trip(cfg in arb_config()) {
            let text = cfg.to_string();
            let back: ExperimentConfig = text.parse().unwrap();
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(back.to_string(), text);
        }
    }
}
