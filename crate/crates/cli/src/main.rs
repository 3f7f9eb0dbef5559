use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use domtrace::cards::Card;
use domtrace::encode::{encode_corpus, EncodedCorpus, Scheme};
use domtrace::log_io::{filter_traces, parse_log_stream, read_traces, turn_length_histogram, write_log_stream, write_traces, CorpusFilter, Histogram};
use domtrace::pipeline::{run_pipeline, RunConfig};
use domtrace::replay::replay_trace;
use domtrace::synth::{generate_corpus, parse_archetypes};
use domtrace::tsne::{embed, Embedding, TsneParams};
use domtrace::viz::{channel_values, render_histogram, render_scatter, ColorChannel, PlotSpec};
use domtrace::{Error, Result};

#[derive(Parser)]
#[command(name = "domtrace", version, about = "Embed and plot Dominion play traces")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the card set in canonical order.
    Cards,
    /// Simulate labeled games and write a game log stream.
    Synth(SynthArgs),
    /// Keep traces from games that pass player-count and length limits.
    Filter(FilterArgs),
    /// Summary statistics over a trace file.
    Stats(StatsArgs),
    /// Print a trace's deck composition after every turn.
    Replay(ReplayArgs),
    /// Encode traces as feature vectors.
    Encode(EncodeArgs),
    /// Embed an encoded corpus in two dimensions.
    Embed(EmbedArgs),
    /// Render a scatter plot or a length histogram as SVG.
    Plot(PlotArgs),
    /// Run the whole pipeline from a TOML config.
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Comma-separated `name:count` seats, e.g. `bigmoney:100,mine:100`.
    #[arg(long)]
    archetypes: String,
    #[arg(long, default_value_t = 2)]
    players: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random-buy rate for every non-idle policy.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    min_players: usize,
    #[arg(long, default_value_t = 10)]
    min_turns: usize,
    #[arg(long, default_value_t = 30)]
    max_turns: usize,
}

#[derive(Args)]
struct StatsArgs {
    /// Write the turn-length histogram as CSV.
    #[arg(long)]
    histogram: bool,
    #[arg(long = "in")]
    input: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Trace id, `game_id/player_id`.
    #[arg(long)]
    trace: String,
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    scheme: Scheme,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30.0)]
    perplexity: f64,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Dense affinities and the exact O(N^2) gradient.
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long, requires_all = ["traces", "color"], conflicts_with = "histogram")]
    embedding: Option<PathBuf>,
    #[arg(long)]
    traces: Option<PathBuf>,
    /// `length` or `card:<Name>[+<Name>...]@<turn|final>`.
    #[arg(long)]
    color: Option<ColorChannel>,
    /// Histogram CSV from `stats --histogram`.
    #[arg(long, required_unless_present = "embedding")]
    histogram: Option<PathBuf>,
    #[arg(long)]
    title: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Overrides `out_dir` from the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    if !path.is_file() {
        return Err(Error::Param(format!("input {} does not exist", path.display())));
    }
    Ok(BufReader::new(File::open(path)?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// `embedding.csv` -> `embedding.kl.csv`.
fn kl_sidecar(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.kl.csv"))
}

fn cards() -> Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "index,name,cost,class")?;
    for card in Card::ALL {
        writeln!(out, "{},{},{},{:?}", card.canonical_index(), card.name(), card.cost(), card.class())?;
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let archetypes = parse_archetypes(&a.archetypes, a.epsilon)?;
    let games = generate_corpus(&archetypes, a.players, a.seed)?;
    let mut w = create(&a.out)?;
    write_log_stream(&games, &mut w)?;
    w.flush()?;
    eprintln!("wrote {} games to {}", games.len(), a.out.display());
    Ok(())
}

fn filter(a: FilterArgs) -> Result<()> {
    let f = CorpusFilter {
        min_players: a.min_players,
        min_turns: a.min_turns,
        max_turns: a.max_turns,
    };
    f.validate()?;
    let parsed = parse_log_stream(open(&a.input)?)?;
    for e in &parsed.errors {
        log::warn!("{e}");
    }
    let traces = filter_traces(&parsed.games, &f);
    let mut w = create(&a.out)?;
    write_traces(&traces, &mut w)?;
    w.flush()?;
    eprintln!(
        "kept {} traces from {} games ({} records rejected)",
        traces.len(),
        parsed.games.len(),
        parsed.errors.len()
    );
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    let traces = read_traces(open(&a.input)?)?;
    let hist = turn_length_histogram(&traces);
    if a.histogram {
        match &a.out {
            Some(p) => hist.write_csv(create(p)?)?,
            None => hist.write_csv(io::stdout().lock())?,
        }
    } else {
        let mut out = io::stdout().lock();
        let n = hist.total();
        let mean = if n == 0 { 0.0 } else { hist.bins.iter().map(|(k, v)| (k * v) as f64).sum::<f64>() / n as f64 };
        writeln!(out, "traces {n}")?;
        if let (Some(lo), Some(hi)) = (hist.bins.keys().next(), hist.bins.keys().last()) {
            writeln!(out, "turns min {lo} max {hi} mean {mean:.2}")?;
        }
    }
    Ok(())
}

fn replay(a: ReplayArgs) -> Result<()> {
    let traces = read_traces(open(&a.input)?)?;
    let trace = traces.iter().find(|t| t.id() == a.trace).ok_or_else(|| Error::MissingTrace(a.trace.clone()))?;
    let timeline = replay_trace(trace)?;
    let mut out = io::stdout().lock();
    let names: Vec<&str> = Card::ALL.iter().map(|c| c.name()).collect();
    writeln!(out, "turn,{}", names.join(","))?;
    for t in 0..=timeline.n_turns() {
        let counts: Vec<String> = timeline.at_turn(t).counts().iter().map(u32::to_string).collect();
        writeln!(out, "{t},{}", counts.join(","))?;
    }
    Ok(())
}

fn encode(a: EncodeArgs) -> Result<()> {
    let traces = read_traces(open(&a.input)?)?;
    let corpus = encode_corpus(&traces, a.scheme)?;
    corpus.write_csv(create(&a.out)?)?;
    eprintln!("encoded {} traces ({} columns)", corpus.len(), corpus.dim);
    Ok(())
}

fn embed_cmd(a: EmbedArgs) -> Result<()> {
    let params = TsneParams {
        perplexity: a.perplexity,
        theta: a.theta,
        n_iter: a.iters,
        seed: a.seed,
        exact: a.exact,
        ..TsneParams::default()
    };
    let corpus = EncodedCorpus::read_csv(open(&a.input)?)?;
    params.validate(corpus.len())?;
    let e = embed(&corpus, &params)?;
    e.write_csv(create(&a.out)?)?;
    e.write_kl_csv(create(&kl_sidecar(&a.out))?)?;
    if let Some(kl) = e.final_kl() {
        eprintln!("embedded {} points, final KL {kl:.4}", e.len());
    }
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    let mut spec = PlotSpec {
        title: a.title.unwrap_or_default(),
        ..PlotSpec::default()
    };
    let svg = if let Some(h) = &a.histogram {
        spec.legend = "turns per trace".into();
        render_histogram(&Histogram::read_csv(open(h)?)?, &spec)?
    } else {
        let (Some(e), Some(t), Some(color)) = (&a.embedding, &a.traces, &a.color) else {
            return Err(Error::Param("scatter plots need --embedding, --traces and --color".into()));
        };
        let embedding = Embedding::read_csv(open(e)?)?;
        let traces = read_traces(open(t)?)?;
        let values = channel_values(&embedding, &traces, color)?;
        spec.legend = color.describe();
        render_scatter(&embedding, &values, &spec)?
    };
    let mut w = create(&a.out)?;
    w.write_all(svg.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn run(a: RunArgs, threads: Option<usize>) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(d) = a.out_dir {
        cfg.out_dir = d;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if threads.is_some() {
        cfg.threads = threads;
    }
    let m = run_pipeline(&cfg)?;
    eprintln!(
        "{} traces from {} games; artifacts in {}",
        m.n_traces,
        m.n_games,
        cfg.out_dir.display()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    if cli.threads == Some(0) {
        return Err(Error::Param("--threads must be at least 1".into()));
    }
    let threads = cli.threads;
    match cli.command {
        Command::Run(a) => run(a, threads),
        other => domtrace::par::with_threads(threads, move || match other {
            Command::Cards => cards(),
            Command::Synth(a) => synth(a),
            Command::Filter(a) => filter(a),
            Command::Stats(a) => stats(a),
            Command::Replay(a) => replay(a),
            Command::Encode(a) => encode(a),
            Command::Embed(a) => embed_cmd(a),
            Command::Plot(a) => plot(a),
            Command::Run(_) => unreachable!(),
        }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
