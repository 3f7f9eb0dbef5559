//! End-to-end runs driven by a TOML config.
//!
//! Stages run in order: `load` (parse logs or simulate), `filter`, `encode`,
//! `embed`, `plot`. Each artifact is written under a `.partial` name and
//! renamed once its stage succeeds, so a failed run leaves only suffixed
//! files behind for the failing stage.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encode::{encode_corpus, Scheme};
use crate::error::{Error, Result};
use crate::log_io::{filter_traces, parse_log_stream, turn_length_histogram, write_log_stream, write_traces, CorpusFilter, GameLog};
use crate::seed::sub_seed;
use crate::synth::{generate_corpus, parse_archetypes};
use crate::tsne::{embed, TsneParams};
use crate::viz::{channel_values, render_histogram, render_scatter, ColorChannel, PlotSpec};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    /// `name:count` pairs, e.g. `bigmoney:100,mine:100`.
    pub archetypes: String,
    #[serde(default = "two")]
    pub players: usize,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotConfig {
    pub color: ColorChannel,
    /// Output file name inside the run directory; derived from the channel
    /// when absent.
    #[serde(default)]
    pub file: Option<String>,
    #[serde(default)]
    pub title: Option<String>,
}

impl PlotConfig {
    pub fn file_name(&self, index: usize) -> String {
        self.file.clone().unwrap_or_else(|| {
            let slug: String = self
                .color
                .to_string()
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
                .collect();
            format!("scatter-{index:02}-{slug}.svg")
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Game log streams (JSONL); mutually exclusive with `synth`.
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    #[serde(default)]
    pub filter: CorpusFilter,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// The seed field is ignored; the init seed derives from `seed`.
    #[serde(default)]
    pub tsne: TsneParams,
    #[serde(default)]
    pub plots: Vec<PlotConfig>,
    #[serde(default = "yes")]
    pub histogram: bool,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; all cores when absent.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_scheme() -> Scheme {
    Scheme::Normalized
}

fn yes() -> bool {
    true
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Param(format!("config: {e}")))
    }

    /// Reads a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Param(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in &mut cfg.inputs {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks everything that can be checked before any artifact is written.
    pub fn validate(&self) -> Result<()> {
        match (&self.synth, self.inputs.is_empty()) {
            (Some(_), false) => return Err(Error::Param("config sets both `inputs` and `synth`".into())),
            (None, true) => return Err(Error::Param("config needs `inputs` or a `synth` section".into())),
            (Some(s), true) => {
                parse_archetypes(&s.archetypes, s.epsilon)?;
                if !(2..=4).contains(&s.players) {
                    return Err(Error::Param(format!("synth.players must be 2..=4, got {}", s.players)));
                }
            }
            (None, false) => {
                for p in &self.inputs {
                    if !p.is_file() {
                        return Err(Error::Param(format!("input {} does not exist", p.display())));
                    }
                }
            }
        }
        self.filter.validate()?;
        if self.threads == Some(0) {
            return Err(Error::Param("threads must be at least 1".into()));
        }
        for p in &self.plots {
            p.color.validate()?;
        }
        let mut names: Vec<String> = self.plots.iter().enumerate().map(|(i, p)| p.file_name(i)).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Param("two plots share an output file".into()));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Seeds {
        Seeds {
            global: self.seed,
            synth: sub_seed(self.seed, "synth"),
            tsne_init: sub_seed(self.seed, "tsne-init"),
        }
    }

    /// t-SNE parameters with the derived init seed.
    pub fn tsne_params(&self) -> TsneParams {
        TsneParams {
            seed: self.seeds().tsne_init,
            ..self.tsne.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub global: u64,
    pub synth: u64,
    #[serde(rename = "tsne-init")]
    pub tsne_init: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Digest256 {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: RunConfig,
    pub seeds: Seeds,
    pub inputs: Vec<Digest256>,
    pub artifacts: Vec<Digest256>,
    pub stages: Vec<StageTiming>,
    pub n_games: usize,
    pub n_traces: usize,
    pub rejected_records: usize,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    let mut f = BufReader::new(File::open(path)?);
    loop {
        let buf = f.fill_buf()?;
        if buf.is_empty() {
            break;
        }
        h.update(buf);
        let n = buf.len();
        f.consume(n);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn partial(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Tracks per-stage artifacts so they are only promoted on success.
struct Run {
    dir: PathBuf,
    artifacts: Vec<Digest256>,
    stages: Vec<StageTiming>,
}

impl Run {
    fn stage<T>(&mut self, name: &'static str, files: &[&str], body: impl FnOnce(&[PathBuf]) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let targets: Vec<PathBuf> = files.iter().map(|f| partial(&self.dir.join(f))).collect();
        let out = body(&targets).map_err(|e| Error::Stage {
            stage: name,
            source: Box::new(e),
        })?;
        for (f, tmp) in files.iter().zip(&targets) {
            let dest = self.dir.join(f);
            fs::rename(tmp, &dest)?;
            self.artifacts.push(Digest256 {
                path: (*f).to_string(),
                sha256: sha256_file(&dest)?,
            });
        }
        self.stages.push(StageTiming {
            stage: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        log::info!("stage {name} done in {:.2}s", start.elapsed().as_secs_f64());
        Ok(out)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Runs every stage of `config`, returning the manifest also written to
/// `out_dir/manifest.json`.
pub fn run_pipeline(config: &RunConfig) -> Result<Manifest> {
    config.validate()?;
    crate::par::with_threads(config.threads, || run_stages(config))
}

fn run_stages(config: &RunConfig) -> Result<Manifest> {
    let seeds = config.seeds();
    let inputs = config
        .inputs
        .iter()
        .map(|p| {
            Ok(Digest256 {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(&config.out_dir)?;
    let mut run = Run {
        dir: config.out_dir.clone(),
        artifacts: Vec::new(),
        stages: Vec::new(),
    };

    let (games, rejected): (Vec<GameLog>, usize) = run.stage("load", &["games.jsonl"], |out| {
        let (games, rejected) = match &config.synth {
            Some(s) => (generate_corpus(&parse_archetypes(&s.archetypes, s.epsilon)?, s.players, seeds.synth)?, 0),
            None => {
                let mut games = Vec::new();
                let mut rejected = 0;
                for p in &config.inputs {
                    let parsed = parse_log_stream(BufReader::new(File::open(p)?))?;
                    for e in &parsed.errors {
                        log::warn!("{}: {e}", p.display());
                    }
                    rejected += parsed.errors.len();
                    games.extend(parsed.games);
                }
                (games, rejected)
            }
        };
        let mut w = create(&out[0])?;
        write_log_stream(&games, &mut w)?;
        w.flush()?;
        Ok((games, rejected))
    })?;

    let traces = run.stage("filter", &["traces.jsonl", "histogram.csv"], |out| {
        let traces = filter_traces(&games, &config.filter);
        if traces.is_empty() {
            return Err(Error::format("corpus", "no trace passes the filter"));
        }
        let mut w = create(&out[0])?;
        write_traces(&traces, &mut w)?;
        w.flush()?;
        turn_length_histogram(&traces).write_csv(create(&out[1])?)?;
        Ok(traces)
    })?;

    let corpus = run.stage("encode", &["corpus.csv"], |out| {
        let corpus = encode_corpus(&traces, config.scheme)?;
        corpus.write_csv(create(&out[0])?)?;
        Ok(corpus)
    })?;

    let embedding = run.stage("embed", &["embedding.csv", "embedding.kl.csv"], |out| {
        let e = embed(&corpus, &config.tsne_params())?;
        e.write_csv(create(&out[0])?)?;
        e.write_kl_csv(create(&out[1])?)?;
        Ok(e)
    })?;

    let mut figures: Vec<String> = config.plots.iter().enumerate().map(|(i, p)| p.file_name(i)).collect();
    if config.histogram {
        figures.push("histogram.svg".into());
    }
    let names: Vec<&str> = figures.iter().map(String::as_str).collect();
    run.stage("plot", &names, |out| {
        for (i, p) in config.plots.iter().enumerate() {
            let values = channel_values(&embedding, &traces, &p.color)?;
            let spec = PlotSpec {
                title: p.title.clone().unwrap_or_default(),
                legend: p.color.describe(),
                ..PlotSpec::default()
            };
            fs::write(&out[i], render_scatter(&embedding, &values, &spec)?)?;
        }
        if config.histogram {
            let spec = PlotSpec {
                legend: "turns per trace".into(),
                ..PlotSpec::default()
            };
            fs::write(&out[config.plots.len()], render_histogram(&turn_length_histogram(&traces), &spec)?)?;
        }
        Ok(())
    })?;

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        seeds,
        inputs,
        artifacts: run.artifacts,
        stages: run.stages,
        n_games: games.len(),
        n_traces: traces.len(),
        rejected_records: rejected,
    };
    let mut w = create(&config.out_dir.join(MANIFEST))?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth_config(dir: &Path) -> RunConfig {
        RunConfig::from_toml(&format!(
            r#"
            out_dir = "{}"
            seed = 3
            threads = 1
            [synth]
            archetypes = "bigmoney:12,village:12"
            [tsne]
            perplexity = 5.0
            n_iter = 300
            [[plots]]
            color = "length"
            [[plots]]
            color = "card:Silver+Gold@final"
            file = "money.svg"
            "#,
            dir.display()
        ))
        .unwrap()
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = synth_config(Path::new("out"));
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(cfg.scheme, Scheme::Normalized);
        assert!(cfg.histogram);
        assert!(RunConfig::from_toml("out_dir = \"x\"\nbogus = 1").unwrap_err().is_config());
    }

    #[test]
    fn pipeline_writes_all_artifacts_deterministically() {
        let tmp = tempfile::tempdir().unwrap();
        let a = run_pipeline(&synth_config(&tmp.path().join("a"))).unwrap();
        let b = run_pipeline(&synth_config(&tmp.path().join("b"))).unwrap();
        assert_eq!(a.artifacts, b.artifacts);
        let names: Vec<&str> = a.artifacts.iter().map(|d| d.path.as_str()).collect();
        assert_eq!(
            names,
            [
                "games.jsonl",
                "traces.jsonl",
                "histogram.csv",
                "corpus.csv",
                "embedding.csv",
                "embedding.kl.csv",
                "scatter-00-length.svg",
                "money.svg",
                "histogram.svg"
            ]
        );
        assert!(tmp.path().join("a").join(MANIFEST).is_file());
        let corpus = fs::read_to_string(tmp.path().join("a/corpus.csv")).unwrap();
        assert_eq!(corpus.lines().next().unwrap().split(',').count(), 3 + 510);
        assert_eq!(a.stages.len(), 5);
        assert_eq!(a.seeds.synth, sub_seed(3, "synth"));
    }

    #[test]
    fn missing_input_fails_before_writing() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("run");
        let cfg = RunConfig {
            inputs: vec![tmp.path().join("nope.jsonl")],
            synth: None,
            ..synth_config(&out)
        };
        let err = run_pipeline(&cfg).unwrap_err();
        assert!(err.is_config(), "{err}");
        assert!(!out.exists());
    }

    #[test]
    fn failing_stage_leaves_partial_files() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("run");
        let mut cfg = synth_config(&out);
        cfg.tsne.perplexity = 1000.0;
        let err = run_pipeline(&cfg).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "embed", .. }), "{err}");
        assert!(out.join("corpus.csv").is_file());
        assert!(out.join("embedding.csv.partial").exists() || !out.join("embedding.csv").exists());
        assert!(!out.join("embedding.csv").exists());
        assert!(!out.join(MANIFEST).exists());
    }
}
