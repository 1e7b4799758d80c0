//! Declarative run configuration: a TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use activenet::heavytail::Family;
use activenet::ingest::{EdgeFormat, FilterSpec, TweetFormat};
use activenet::metrics::BetweennessMode;
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::manifest::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub tweets: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    /// Precomputed `user_id,af` table; replaces `tweets` when set.
    pub activity: Option<PathBuf>,
    /// Node metrics (or any id-plus-numeric) CSV read by `fit-dist` and `regress`.
    pub metrics: Option<PathBuf>,
    pub tweet_format: String,
    pub edge_format: String,
    pub keyword: String,
    pub lang: String,
    pub strict_lang: bool,
    pub thresholds: Vec<u64>,
    pub threshold: u64,
    /// `exact`, `sampled:K` or `none`.
    pub betweenness: String,
    pub normalized: bool,
    /// Radius and diameter in sweep rows.
    pub distances: bool,
    pub seed: u64,
    pub families: Vec<String>,
    /// Column fitted by `fit-dist`.
    pub column: String,
    pub dependent: String,
    pub regressors: Vec<String>,
    /// Defaults to the analysis threshold.
    pub censor: Option<f64>,
    /// Bootstrap resamples for the power-law exponent; 0 disables.
    pub bootstrap: usize,
    pub band_points: usize,
    pub out: PathBuf,
    /// Worker cap; 0 uses every core. Outputs do not depend on it.
    pub threads: usize,
    pub cache: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            tweets: None,
            edges: None,
            activity: None,
            metrics: None,
            tweet_format: "json".into(),
            edge_format: "csv".into(),
            keyword: "sandy".into(),
            lang: "en".into(),
            strict_lang: false,
            thresholds: vec![1, 2, 5, 10, 20, 50],
            threshold: 10,
            betweenness: "exact".into(),
            normalized: true,
            distances: true,
            seed: 42,
            families: Family::ALL.iter().map(|f| f.name().to_string()).collect(),
            column: "deg".into(),
            dependent: "af".into(),
            regressors: ["in_deg", "out_deg", "ecc", "cc_close"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            censor: None,
            bootstrap: 0,
            band_points: 101,
            out: PathBuf::from("out"),
            threads: 0,
            cache: true,
        }
    }
}

/// Flags shared by every subcommand; each one set overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML file with any of the keys below (snake_case).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub tweets: Option<PathBuf>,
    #[arg(long, global = true)]
    pub edges: Option<PathBuf>,
    /// Activity CSV (`user_id,af`) used instead of re-ingesting tweets.
    #[arg(long, global = true)]
    pub activity: Option<PathBuf>,
    /// Metrics CSV read by fit-dist and regress.
    #[arg(long, global = true)]
    pub metrics: Option<PathBuf>,
    /// json or tsv.
    #[arg(long, global = true)]
    pub tweet_format: Option<String>,
    /// csv or adjacency.
    #[arg(long, global = true)]
    pub edge_format: Option<String>,
    #[arg(long, global = true)]
    pub keyword: Option<String>,
    #[arg(long, global = true)]
    pub lang: Option<String>,
    /// Drop tweets that carry no language tag.
    #[arg(long, global = true)]
    pub strict_lang: bool,
    /// Comma-separated ascending AF thresholds for sweep.
    #[arg(long, global = true, value_delimiter = ',')]
    pub thresholds: Option<Vec<u64>>,
    /// AF threshold for analyze and export-edges.
    #[arg(long, global = true)]
    pub threshold: Option<u64>,
    /// exact, sampled:K or none.
    #[arg(long, global = true)]
    pub betweenness: Option<String>,
    /// Report raw betweenness pair counts.
    #[arg(long, global = true)]
    pub unnormalized: bool,
    /// Skip radius and diameter in sweep rows.
    #[arg(long, global = true)]
    pub no_distances: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated tail families.
    #[arg(long, global = true, value_delimiter = ',')]
    pub families: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub column: Option<String>,
    #[arg(long, global = true)]
    pub dependent: Option<String>,
    /// Comma-separated metric columns for the tobit model.
    #[arg(long, global = true, value_delimiter = ',')]
    pub regressors: Option<Vec<String>>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub censor: Option<f64>,
    #[arg(long, global = true)]
    pub bootstrap: Option<usize>,
    #[arg(long, global = true)]
    pub band_points: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Rebuild the graph even when a cached copy matches the inputs.
    #[arg(long, global = true)]
    pub no_cache: bool,
}

impl PipelineConfig {
    pub fn load(flags: &Flags) -> Result<Self> {
        let mut cfg = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::at(path, e))?;
                toml::from_str(&text).map_err(|e| CliError::at(path, e))?
            }
            None => PipelineConfig::default(),
        };
        cfg.overlay(flags);
        cfg.validate()?;
        Ok(cfg)
    }

    fn overlay(&mut self, f: &Flags) {
        fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        fn set_opt<T: Clone>(dst: &mut Option<T>, src: &Option<T>) {
            if src.is_some() {
                *dst = src.clone();
            }
        }
        set_opt(&mut self.tweets, &f.tweets);
        set_opt(&mut self.edges, &f.edges);
        set_opt(&mut self.activity, &f.activity);
        set_opt(&mut self.metrics, &f.metrics);
        set(&mut self.tweet_format, &f.tweet_format);
        set(&mut self.edge_format, &f.edge_format);
        set(&mut self.keyword, &f.keyword);
        set(&mut self.lang, &f.lang);
        self.strict_lang |= f.strict_lang;
        set(&mut self.thresholds, &f.thresholds);
        set(&mut self.threshold, &f.threshold);
        set(&mut self.betweenness, &f.betweenness);
        self.normalized &= !f.unnormalized;
        self.distances &= !f.no_distances;
        set(&mut self.seed, &f.seed);
        set(&mut self.families, &f.families);
        set(&mut self.column, &f.column);
        set(&mut self.dependent, &f.dependent);
        set(&mut self.regressors, &f.regressors);
        set_opt(&mut self.censor, &f.censor);
        set(&mut self.bootstrap, &f.bootstrap);
        set(&mut self.band_points, &f.band_points);
        set(&mut self.out, &f.out);
        set(&mut self.threads, &f.threads);
        self.cache &= !f.no_cache;
    }

    fn validate(&self) -> Result<()> {
        self.tweet_format()?;
        self.edge_format()?;
        self.filter()?;
        self.betweenness_mode()?;
        self.family_list()?;
        if self.thresholds.is_empty()
            || self.thresholds[0] == 0
            || self.thresholds.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(CliError::input(
                "thresholds must be positive and strictly ascending",
            ));
        }
        if self.threshold == 0 {
            return Err(CliError::input("threshold must be at least 1"));
        }
        if self.censor.is_some_and(|c| !c.is_finite()) {
            return Err(CliError::input("censor point must be finite"));
        }
        Ok(())
    }

    pub fn tweet_format(&self) -> Result<TweetFormat> {
        self.tweet_format.parse().map_err(CliError::Input)
    }

    pub fn edge_format(&self) -> Result<EdgeFormat> {
        self.edge_format.parse().map_err(CliError::Input)
    }

    pub fn filter(&self) -> Result<FilterSpec> {
        FilterSpec::new(&self.keyword, &self.lang, self.strict_lang)
            .map_err(|e| CliError::input(e.to_string()))
    }

    /// `None` skips betweenness entirely.
    pub fn betweenness_mode(&self) -> Result<Option<BetweennessMode>> {
        let s = self.betweenness.trim().to_ascii_lowercase();
        match s.as_str() {
            "exact" => Ok(Some(BetweennessMode::Exact)),
            "none" | "off" => Ok(None),
            _ => {
                let k = s
                    .strip_prefix("sampled:")
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|&k| k > 0)
                    .ok_or_else(|| {
                        CliError::input(format!(
                            "bad --betweenness `{}` (expected exact, sampled:K or none)",
                            self.betweenness
                        ))
                    })?;
                Ok(Some(BetweennessMode::Sampled {
                    pivots: k,
                    seed: self.seed,
                }))
            }
        }
    }

    pub fn family_list(&self) -> Result<Vec<Family>> {
        self.families
            .iter()
            .map(|f| f.parse::<Family>().map_err(|e| CliError::input(e.to_string())))
            .collect()
    }

    pub fn censor_point(&self) -> f64 {
        self.censor.unwrap_or(self.threshold as f64)
    }

    /// Hash over every field that can change an output. `out`, `threads` and
    /// `cache` are excluded: outputs do not depend on them.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.threads = 0;
        c.cache = true;
        let json = serde_json::to_vec(&c).expect("config serialises");
        sha256_hex(&json)
    }

    pub fn required<'a>(&self, path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| CliError::input(format!("missing required input --{flag}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file: PipelineConfig =
            toml::from_str("keyword = \"storm\"\nthresholds = [1, 3]\nseed = 9\n").unwrap();
        let mut cfg = file;
        cfg.overlay(&Flags {
            seed: Some(5),
            unnormalized: true,
            ..Flags::default()
        });
        assert_eq!(cfg.keyword, "storm");
        assert_eq!(cfg.thresholds, vec![1, 3]);
        assert_eq!(cfg.seed, 5);
        assert!(!cfg.normalized);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<PipelineConfig>("keywrd = \"x\"").is_err());
    }

    #[test]
    fn hash_ignores_out_and_threads() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.out = "elsewhere".into();
        b.threads = 3;
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn betweenness_modes_parse() {
        let mut c = PipelineConfig::default();
        c.betweenness = "sampled:64".into();
        assert_eq!(
            c.betweenness_mode().unwrap(),
            Some(BetweennessMode::Sampled {
                pivots: 64,
                seed: 42
            })
        );
        c.betweenness = "sampled:0".into();
        assert!(c.betweenness_mode().is_err());
        c.betweenness = "none".into();
        assert_eq!(c.betweenness_mode().unwrap(), None);
    }
}
