//! Batch command-line front end for terminology-aware corpus processing:
//! annotation, selection, statistics, BPE segmentation, evaluation and tag
//! stripping. Outputs are deterministic for fixed inputs, flags and seed,
//! regardless of worker count; files are written atomically (temp + rename).

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use termtag_core::augment::{self, AnnotateOptions};
use termtag_core::corpus::{self, SentencePair, Terminology};
use termtag_core::matcher::{CasingPolicy, Matcher, ResolutionPolicy};
use termtag_core::metrics::{self, EvalOptions};
use termtag_core::select;
use termtag_core::tokenize::{self, bpe, MergeTable, TokenizerKind, TokenizerScheme};

/// Default seed for every random decision (sampling and test-time variant
/// choice); override with --seed.
const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "termtag", version, about = "Terminology-aware corpus annotation and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Annotate source sentences with terminology constraints (TADA or MASK)
    Annotate(AnnotateArgs),
    /// Keep term-grounded sentences, optionally up-sampling them
    Select(SelectArgs),
    /// Sentence and term-grounded counts for one or more corpora
    Stats(StatsArgs),
    /// Learn a BPE merge table from tokenized text
    BpeLearn(BpeLearnArgs),
    /// Apply (or undo) BPE segmentation on tokenized text
    BpeApply(BpeApplyArgs),
    /// Score hypotheses against references and a constraints sidecar
    Evaluate(EvaluateArgs),
    /// Remove annotation tags, recovering the source and constraints
    Strip(StripArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Tada,
    Mask,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    /// Choose the variant found in the reference translation
    Train,
    /// Choose a variant uniformly at random (seeded)
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum CasingArg {
    /// Match tokens byte-exactly
    Exact,
    /// Case-insensitive matching (targets are inserted verbatim)
    Fold,
}

impl From<CasingArg> for CasingPolicy {
    fn from(value: CasingArg) -> Self {
        match value {
            CasingArg::Exact => CasingPolicy::Exact,
            CasingArg::Fold => CasingPolicy::CaseInsensitive,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TokenizerArg {
    /// Split on whitespace (input is already tokenized)
    Whitespace,
    /// Rule-based tokenization: split punctuation, keep compounds
    Rule,
    /// One token per character
    Char,
}

impl From<TokenizerArg> for TokenizerScheme {
    fn from(value: TokenizerArg) -> Self {
        TokenizerScheme::new(match value {
            TokenizerArg::Whitespace => TokenizerKind::Whitespace,
            TokenizerArg::Rule => TokenizerKind::Rule,
            TokenizerArg::Char => TokenizerKind::Char,
        })
    }
}

#[derive(Args)]
struct AnnotateArgs {
    /// Source corpus, one sentence per line ("-" for stdin)
    #[arg(long)]
    source: String,
    /// Reference corpus, line-aligned with the source (required with train)
    #[arg(long)]
    target: Option<String>,
    /// Terminology TSV: source<TAB>target, one pair per line
    #[arg(long)]
    terminology: String,
    /// Annotation form: tags only, or tags with masked source terms
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// How target variants are chosen
    #[arg(long, value_enum, default_value = "test")]
    policy: PolicyArg,
    /// Fraction of the corpus to annotate
    #[arg(long, default_value_t = 0.1)]
    rate: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value = "fold")]
    casing: CasingArg,
    /// Tokenization applied to corpus and terminology before matching
    #[arg(long, value_enum, default_value = "whitespace")]
    tokenizer: TokenizerArg,
    /// Segment corpus and terminology with this merge table before matching
    #[arg(long)]
    bpe_table: Option<String>,
    /// Annotated source text output ("-" for stdout)
    #[arg(long)]
    out_text: String,
    /// JSON-lines sidecar output with ids, modes and constraints
    #[arg(long)]
    out_sidecar: String,
    /// Worker threads (0 = one per core)
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    source: String,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    terminology: String,
    #[arg(long, value_enum, default_value = "fold")]
    casing: CasingArg,
    #[arg(long, value_enum, default_value = "whitespace")]
    tokenizer: TokenizerArg,
    /// Repeat every kept sentence this many times
    #[arg(long, default_value_t = 1)]
    upsample: usize,
    /// Corpus name used in the logged statistics row
    #[arg(long, default_value = "corpus")]
    name: String,
    #[arg(long)]
    out_source: String,
    /// Required when --target is given
    #[arg(long)]
    out_target: Option<String>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    terminology: String,
    #[arg(long, value_enum, default_value = "fold")]
    casing: CasingArg,
    #[arg(long, value_enum, default_value = "whitespace")]
    tokenizer: TokenizerArg,
    /// Corpus as NAME=SOURCE_PATH; repeat for several corpora (row order
    /// follows the command line)
    #[arg(long = "corpus", required = true)]
    corpora: Vec<String>,
    /// Emit the statistics as JSON instead of an aligned table
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BpeLearnArgs {
    /// Tokenized input text; repeat to pool several files
    #[arg(long, required = true)]
    input: Vec<String>,
    /// Number of merge operations to learn
    #[arg(long)]
    merges: usize,
    /// Extra reserved symbols, added to the built-in tags
    /// (<S>, <C>, </C>, MASK)
    #[arg(long)]
    reserved: Vec<String>,
    #[arg(long, value_enum, default_value = "whitespace")]
    tokenizer: TokenizerArg,
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct BpeApplyArgs {
    #[arg(long)]
    table: String,
    #[arg(long, default_value = "-")]
    input: String,
    #[arg(long, default_value = "-")]
    output: String,
    /// Reverse segmentation instead of applying it
    #[arg(long)]
    undo: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Tokenized hypothesis file, one sentence per line
    #[arg(long)]
    hypothesis: String,
    /// Tokenized reference file, line-aligned with the hypotheses
    #[arg(long)]
    reference: String,
    /// Constraints sidecar produced by annotate (JSON lines)
    #[arg(long)]
    constraints: String,
    /// Cost multiplier for edits touching reference term tokens
    #[arg(long, default_value_t = 2.0)]
    term_weight: f64,
    #[arg(long, value_enum, default_value = "fold")]
    casing: CasingArg,
    /// Emit the report as JSON instead of an aligned table
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct StripArgs {
    /// Annotated text ("-" for stdin)
    #[arg(long, default_value = "-")]
    input: String,
    /// Recovered source text output
    #[arg(long)]
    out_text: String,
    /// JSON-lines output with the recovered constraints
    #[arg(long)]
    out_sidecar: String,
}

fn open_input(path: &str) -> Result<Box<dyn BufRead>> {
    if path == "-" {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        let file = File::open(path).with_context(|| format!("cannot open {path}"))?;
        Ok(Box::new(BufReader::new(file)))
    }
}

/// A sink that either streams to stdout or stages into a temporary file that
/// is renamed into place on success, so failures leave no partial output.
enum OutputSink {
    Stdout(BufWriter<io::Stdout>),
    Staged { temp: tempfile::NamedTempFile, dest: PathBuf },
}

impl OutputSink {
    fn create(path: &str) -> Result<OutputSink> {
        if path == "-" {
            return Ok(OutputSink::Stdout(BufWriter::new(io::stdout())));
        }
        let dest = PathBuf::from(path);
        let dir = dest.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let temp = tempfile::NamedTempFile::new_in(dir)
            .with_context(|| format!("cannot stage output next to {path}"))?;
        Ok(OutputSink::Staged { temp, dest })
    }

    fn writer(&mut self) -> &mut dyn Write {
        match self {
            OutputSink::Stdout(w) => w,
            OutputSink::Staged { temp, .. } => temp.as_file_mut(),
        }
    }

    fn commit(self) -> Result<()> {
        match self {
            OutputSink::Stdout(mut w) => Ok(w.flush()?),
            OutputSink::Staged { temp, dest } => {
                temp.persist(&dest)
                    .with_context(|| format!("cannot write {}", dest.display()))?;
                Ok(())
            }
        }
    }
}

fn read_token_lines(path: &str) -> Result<Vec<Vec<String>>> {
    let reader = open_input(path)?;
    let mut out = Vec::new();
    for line in reader.lines() {
        out.push(line?.split_whitespace().map(str::to_string).collect());
    }
    Ok(out)
}

fn load_merge_table(path: &str) -> Result<MergeTable> {
    let reader = open_input(path)?;
    bpe::read_merge_table(reader).with_context(|| format!("merge table {path}"))
}

/// Re-tokenize loaded pairs with the scheme and optionally segment them.
fn transform_pairs(
    pairs: &mut [SentencePair],
    scheme: &TokenizerScheme,
    table: Option<&MergeTable>,
) {
    let needs_scheme = scheme.kind != TokenizerKind::Whitespace || scheme.lowercase;
    if !needs_scheme && table.is_none() {
        return;
    }
    for pair in pairs.iter_mut() {
        if needs_scheme {
            pair.source = tokenize::tokenize(&pair.source.join(" "), scheme);
            if let Some(target) = &mut pair.target {
                *target = tokenize::tokenize(&target.join(" "), scheme);
            }
        }
        if let Some(table) = table {
            pair.source = table.apply(&pair.source);
            if let Some(target) = &mut pair.target {
                *target = table.apply(target);
            }
        }
    }
}

fn transform_terminology(
    terminology: &Terminology,
    scheme: &TokenizerScheme,
    table: Option<&MergeTable>,
) -> Terminology {
    let needs_scheme = scheme.kind != TokenizerKind::Whitespace || scheme.lowercase;
    if !needs_scheme && table.is_none() {
        return terminology.clone();
    }
    let scheme = *scheme;
    terminology.retokenize(move |text| {
        let tokens = if needs_scheme {
            tokenize::tokenize(text, &scheme)
        } else {
            text.split_whitespace().map(str::to_string).collect()
        };
        match table {
            Some(table) => table.apply(&tokens),
            None => tokens,
        }
    })
}

fn load_pairs(source: &str, target: Option<&str>) -> Result<Vec<SentencePair>> {
    let src = open_input(source)?;
    Ok(match target {
        Some(path) => corpus::load_parallel(src, open_input(path)?)?,
        None => corpus::load_source(src)?,
    })
}

fn install_pool(workers: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers).build()?)
}

fn cmd_annotate(args: AnnotateArgs) -> Result<()> {
    if matches!(args.policy, PolicyArg::Train) && args.target.is_none() {
        bail!("--policy train needs --target (the reference translations)");
    }
    let scheme: TokenizerScheme = args.tokenizer.into();
    let table = args.bpe_table.as_deref().map(load_merge_table).transpose()?;

    let terminology_raw = corpus::load_terminology(open_input(&args.terminology)?, "cli")?;
    let terminology = transform_terminology(&terminology_raw, &scheme, table.as_ref());

    let mut pairs = load_pairs(&args.source, args.target.as_deref())?;
    transform_pairs(&mut pairs, &scheme, table.as_ref());
    let total = pairs.len();

    let options = AnnotateOptions {
        mode: match args.mode {
            ModeArg::Tada => corpus::AnnotationMode::Tada,
            ModeArg::Mask => corpus::AnnotationMode::Mask,
        },
        policy: match args.policy {
            PolicyArg::Train => ResolutionPolicy::TrainReferenceMatch,
            PolicyArg::Test => ResolutionPolicy::TestRandom { seed: args.seed },
        },
        casing: args.casing.into(),
        rate: args.rate,
        seed: args.seed,
        scheme: augment::AnnotationScheme::default(),
    };

    let pool = install_pool(args.workers)?;
    let records = pool.install(|| augment::annotate_corpus(pairs, &terminology, &options))?;

    let annotated = records
        .iter()
        .filter(|r| r.mode != corpus::AnnotationMode::Plain)
        .count();
    let mut text = OutputSink::create(&args.out_text)?;
    let mut sidecar = OutputSink::create(&args.out_sidecar)?;
    corpus::write_records(&records, text.writer(), sidecar.writer())?;
    text.commit()?;
    sidecar.commit()?;
    eprintln!(
        "[annotate] sentences={total} annotated={annotated} mode={} rate={} seed={}",
        options.mode, args.rate, args.seed
    );
    Ok(())
}

fn write_pairs(pairs: &[SentencePair], out_source: &str, out_target: Option<&str>) -> Result<()> {
    let mut source_sink = OutputSink::create(out_source)?;
    {
        let w = source_sink.writer();
        for pair in pairs {
            writeln!(w, "{}", pair.source.join(" "))?;
        }
    }
    source_sink.commit()?;
    if let Some(path) = out_target {
        let mut target_sink = OutputSink::create(path)?;
        {
            let w = target_sink.writer();
            for pair in pairs {
                let line = pair.target.as_ref().map(|t| t.join(" ")).unwrap_or_default();
                writeln!(w, "{line}")?;
            }
        }
        target_sink.commit()?;
    }
    Ok(())
}

fn cmd_select(args: SelectArgs) -> Result<()> {
    if args.target.is_some() && args.out_target.is_none() {
        bail!("--target needs --out-target");
    }
    let scheme: TokenizerScheme = args.tokenizer.into();
    let terminology_raw = corpus::load_terminology(open_input(&args.terminology)?, "cli")?;
    let terminology = transform_terminology(&terminology_raw, &scheme, None);
    let matcher = Matcher::build(&terminology, args.casing.into())?;

    let mut pairs = load_pairs(&args.source, args.target.as_deref())?;
    transform_pairs(&mut pairs, &scheme, None);

    let pool = install_pool(args.workers)?;
    let (grounded, row) =
        pool.install(|| select::term_grounded_filter(&pairs, &matcher, &args.name));
    let kept = select::upsample(&grounded, args.upsample)?;
    write_pairs(&kept, &args.out_source, args.out_target.as_deref())?;
    eprintln!(
        "[select] name={} sentences={} grounded={} upsample={} written={}",
        row.name,
        row.sentences,
        row.term_grounded,
        args.upsample,
        kept.len()
    );
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let scheme: TokenizerScheme = args.tokenizer.into();
    let terminology_raw = corpus::load_terminology(open_input(&args.terminology)?, "cli")?;
    let terminology = transform_terminology(&terminology_raw, &scheme, None);
    let matcher = Matcher::build(&terminology, args.casing.into())?;

    let mut corpora = Vec::new();
    for spec in &args.corpora {
        let Some((name, path)) = spec.split_once('=') else {
            bail!("--corpus expects NAME=PATH, got {spec:?}");
        };
        let mut pairs = corpus::load_source(open_input(path)?)?;
        transform_pairs(&mut pairs, &scheme, None);
        corpora.push((name.to_string(), pairs));
    }
    let stats = select::corpus_stats(&corpora, &matcher);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&stats)?);
    } else {
        print!("{}", stats.render_table());
    }
    Ok(())
}

fn cmd_bpe_learn(args: BpeLearnArgs) -> Result<()> {
    let scheme: TokenizerScheme = args.tokenizer.into();
    let mut sentences: Vec<Vec<String>> = Vec::new();
    for path in &args.input {
        for line in open_input(path)?.lines() {
            sentences.push(tokenize::tokenize(&line?, &scheme));
        }
    }
    let freqs = bpe::word_frequencies(sentences.iter().map(Vec::as_slice));
    let mut reserved: BTreeSet<String> = bpe::default_reserved();
    reserved.extend(args.reserved.iter().cloned());
    let table = bpe::bpe_learn(&freqs, args.merges, &reserved)?;
    let mut sink = OutputSink::create(&args.out)?;
    bpe::write_merge_table(&table, sink.writer())?;
    sink.commit()?;
    eprintln!(
        "[bpe-learn] word_types={} merges={} reserved={}",
        freqs.len(),
        table.merges().len(),
        reserved.len()
    );
    Ok(())
}

fn cmd_bpe_apply(args: BpeApplyArgs) -> Result<()> {
    let table = load_merge_table(&args.table)?;
    let input = open_input(&args.input)?;
    let mut sink = OutputSink::create(&args.output)?;
    {
        let w = sink.writer();
        for line in input.lines() {
            let tokens: Vec<String> = line?.split_whitespace().map(str::to_string).collect();
            let transformed = if args.undo { table.undo(&tokens)? } else { table.apply(&tokens) };
            writeln!(w, "{}", transformed.join(" "))?;
        }
    }
    sink.commit()?;
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let hypotheses = read_token_lines(&args.hypothesis)?;
    let references = read_token_lines(&args.reference)?;
    let constraints = corpus::read_sidecar_constraints(open_input(&args.constraints)?)?;
    let options = EvalOptions { term_weight: args.term_weight, casing: args.casing.into() };
    let report = metrics::evaluate(&hypotheses, &references, &constraints, &options)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.render_table());
    }
    eprintln!(
        "[evaluate] sentences={} instances={} matched={} window_skipped={}",
        report.sentences,
        report.constraint_instances,
        report.matched_instances,
        report.skipped_window_instances
    );
    Ok(())
}

fn cmd_strip(args: StripArgs) -> Result<()> {
    let scheme = augment::AnnotationScheme::default();
    let input = open_input(&args.input)?;
    let mut text = OutputSink::create(&args.out_text)?;
    let mut sidecar = OutputSink::create(&args.out_sidecar)?;
    {
        let tw = text.writer();
        let sw = sidecar.writer();
        for (id, line) in input.lines().enumerate() {
            let tokens: Vec<String> = line?.split_whitespace().map(str::to_string).collect();
            let stripped = augment::strip_annotation(&tokens, &scheme)
                .with_context(|| format!("line {}", id + 1))?;
            writeln!(tw, "{}", stripped.source.join(" "))?;
            let record = serde_json::json!({
                "id": id,
                "mode": stripped.mode,
                "constraints": stripped.constraints,
            });
            writeln!(sw, "{record}")?;
        }
    }
    text.commit()?;
    sidecar.commit()?;
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Annotate(args) => cmd_annotate(args),
        Command::Select(args) => cmd_select(args),
        Command::Stats(args) => cmd_stats(args),
        Command::BpeLearn(args) => cmd_bpe_learn(args),
        Command::BpeApply(args) => cmd_bpe_apply(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Strip(args) => cmd_strip(args),
    };
    if let Err(error) = result {
        eprintln!("termtag: {error:#}");
        std::process::exit(1);
    }
}
