//! `pg-forge`: canonicalization, cleanup, evaluation and corpus building for
//! OCR output of polytonic Greek.

mod config;
mod error;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pg_forge_core::corpus_vert::{corpus_stats, parse_vert, to_vert_string, Lexicon};
use pg_forge_core::greek_text::{default_table, CanonicalizationTable};
use pg_forge_core::layout_eval::{evaluate_layout, DEFAULT_IOU_THRESHOLD};
use pg_forge_core::layout_model::load_page;
use pg_forge_core::ocr_eval::{evaluate_corpus_with, read_manifest, read_paired_dirs, EvalOptions};
use pg_forge_core::par::{try_map_ordered, Execution};
use pg_forge_core::pipeline::{build_vert, load_pages, page_files, BuildOptions};
use pg_forge_core::text_pipeline::{clean, CleanOptions, Line, ProvenanceLog, DEFAULT_LATIN_THRESHOLD};

use config::Config;
use error::{fail, io_at, validation, CliError, CliResult, Failure};

const TABLE_ENV: &str = "PG_FORGE_TABLE";

#[derive(Parser)]
#[command(name = "pg-forge", version, about = "Post-OCR tooling for polytonic Greek corpora")]
struct Cli {
    /// Worker threads for page- and file-level parallelism (1 = sequential).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// TOML file setting any of the flags; flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct TableArg {
    /// Canonicalization table (TSV of code points); defaults to $PG_FORGE_TABLE,
    /// then the built-in table.
    #[arg(long, value_name = "FILE")]
    table: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Canonicalize a text file, or every file of a directory.
    Normalize {
        /// Text file or directory of text files.
        input: PathBuf,
        /// Output file, directory, or `-` for stdout.
        output: PathBuf,
        #[command(flatten)]
        table: TableArg,
    },
    /// Remove hyphenation, empty lines and Latin text from a text file or directory.
    Clean {
        /// Text file (one OCR line per line) or directory of them.
        input: PathBuf,
        /// Output file, directory, or `-` for stdout.
        output: PathBuf,
        /// Latin share above which a line without Greek letters is dropped [default: 0.5]
        #[arg(long, value_name = "R")]
        latin_threshold: Option<f64>,
        /// Provenance JSON [default: OUTPUT with extension .provenance.json]
        #[arg(long, value_name = "FILE")]
        provenance: Option<PathBuf>,
    },
    /// Character and word error rates with a confusion matrix.
    EvalText {
        /// Reference transcriptions, paired with --hyp by file name.
        #[arg(long = "ref", value_name = "DIR", requires = "hyp", conflicts_with = "manifest")]
        reference: Option<PathBuf>,
        /// OCR output, one file per reference file.
        #[arg(long, value_name = "DIR", requires = "reference")]
        hyp: Option<PathBuf>,
        /// TSV of `ref_path<TAB>hyp_path` lines.
        #[arg(long, value_name = "FILE", required_unless_present = "reference")]
        manifest: Option<PathBuf>,
        /// Canonicalize both sides and report the normalized figures.
        #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
        normalize: Option<bool>,
        /// JSON report, or `-` for stdout.
        #[arg(long, value_name = "OUT")]
        report: PathBuf,
        /// Confusion CSV [default: REPORT with extension .confusion.csv]
        #[arg(long, value_name = "FILE")]
        confusion: Option<PathBuf>,
        #[command(flatten)]
        table: TableArg,
    },
    /// Detection and reading-order metrics for predicted page layouts.
    EvalLayout {
        /// Ground-truth pages (PAGE XML or JSON).
        #[arg(long, value_name = "DIR")]
        gt: PathBuf,
        /// Predicted pages, paired with ground truth by file stem.
        #[arg(long, value_name = "DIR")]
        pred: PathBuf,
        /// Minimum IoU for a match [default: 0.5]
        #[arg(long, value_name = "R")]
        iou: Option<f64>,
        /// JSON report, or `-` for stdout.
        #[arg(long, value_name = "OUT")]
        report: PathBuf,
        /// Per-class table as CSV.
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },
    /// Build an annotated vertical corpus file from page layouts.
    BuildVert {
        /// Page files (PAGE XML or JSON), read in file-name order.
        #[arg(long, value_name = "DIR")]
        pages: PathBuf,
        /// TSV of `wordform<TAB>lemma<TAB>pos` (required here or in the config).
        #[arg(long, value_name = "FILE")]
        lexicon: Option<PathBuf>,
        #[arg(long, value_name = "ID")]
        doc_id: String,
        /// Vert output, or `-` for stdout.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Date label stored on the document.
        #[arg(long)]
        date: Option<String>,
        /// JSON of all lexicon candidates for ambiguous tokens.
        #[arg(long, value_name = "FILE")]
        candidates: Option<PathBuf>,
        /// JSON of cleanup edits and review flags per page.
        #[arg(long, value_name = "FILE")]
        provenance: Option<PathBuf>,
        /// Latin share above which a line without Greek letters is dropped [default: 0.5]
        #[arg(long, value_name = "R")]
        latin_threshold: Option<f64>,
        #[command(flatten)]
        table: TableArg,
    },
    /// Word counts per document with a total.
    Stats {
        /// Vert files, one document each.
        #[arg(required = true)]
        verts: Vec<PathBuf>,
        /// CSV output, or `-` for stdout.
        #[arg(long, value_name = "OUT")]
        csv: PathBuf,
    },
}

struct Ctx {
    config: Config,
    execution: Execution,
}

impl Ctx {
    fn table(&self, arg: &TableArg) -> CliResult<CanonicalizationTable> {
        let path = arg
            .table
            .clone()
            .or_else(|| self.config.table.clone())
            .or_else(|| std::env::var_os(TABLE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
        match path {
            Some(p) => Ok(CanonicalizationTable::load(&p).map_err(|e| {
                let c: CliError = e.into();
                CliError {
                    kind: c.kind,
                    error: c.error.context(p.display().to_string()),
                }
            })?),
            None => Ok(default_table().clone()),
        }
    }

    fn clean_options(&self, latin_threshold: Option<f64>) -> CliResult<CleanOptions> {
        let opts = CleanOptions {
            latin_threshold: latin_threshold
                .or(self.config.latin_threshold)
                .unwrap_or(DEFAULT_LATIN_THRESHOLD),
            extra_hyphens: self.config.extra_hyphens.clone().unwrap_or_default(),
        };
        opts.validate()?;
        Ok(opts)
    }
}

fn is_stdout(p: &Path) -> bool {
    p.as_os_str() == "-"
}

fn write_output(path: &Path, content: &str) -> CliResult<()> {
    if is_stdout(path) {
        let mut out = std::io::stdout().lock();
        out.write_all(content.as_bytes())
            .and_then(|_| out.flush())
            .map_err(io_at(path))
    } else {
        std::fs::write(path, content).map_err(io_at(path))
    }
}

fn read_input(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(io_at(path))
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// `out.ext` -> `out.<suffix>`; `None` for stdout.
fn sibling(path: &Path, suffix: &str) -> Option<PathBuf> {
    (!is_stdout(path)).then(|| path.with_extension(suffix))
}

/// Regular files of `dir`, sorted by name.
fn dir_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_at(dir))? {
        let path = entry.map_err(io_at(dir))?.path();
        if path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Applies `f` to a single file or to each file of a directory, writing
/// results to `output` (a file, or a directory created as needed).
fn map_text_files<R: Send>(
    ctx: &Ctx,
    input: &Path,
    output: &Path,
    f: impl Fn(&str) -> (String, R) + Sync,
) -> CliResult<Vec<(String, R)>> {
    if input.is_dir() {
        if is_stdout(output) {
            return Err(validation("a directory input needs a directory output"));
        }
        let files = dir_files(input)?;
        let results = try_map_ordered(ctx.execution, &files, |p| read_input(p).map(|t| f(&t)))?;
        std::fs::create_dir_all(output).map_err(io_at(output))?;
        let mut extras = Vec::with_capacity(files.len());
        for (p, (text, extra)) in files.iter().zip(results) {
            let name = p.file_name().expect("file has a name");
            write_output(&output.join(name), &text)?;
            extras.push((name.to_string_lossy().into_owned(), extra));
        }
        Ok(extras)
    } else {
        let (text, extra) = f(&read_input(input)?);
        write_output(output, &text)?;
        let name = input
            .file_name()
            .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        Ok(vec![(name, extra)])
    }
}

fn cmd_normalize(ctx: &Ctx, input: &Path, output: &Path, table: &TableArg) -> CliResult<()> {
    let table = ctx.table(table)?;
    map_text_files(ctx, input, output, |t| (table.canonicalize(t), ()))?;
    Ok(())
}

fn cmd_clean(
    ctx: &Ctx,
    input: &Path,
    output: &Path,
    threshold: Option<f64>,
    provenance: Option<&Path>,
) -> CliResult<()> {
    let opts = ctx.clean_options(threshold)?;
    let logs = map_text_files(ctx, input, output, |text| {
        let lines: Vec<&str> = text.lines().collect();
        let (cleaned, log) = clean(&Line::numbered(&lines), &opts);
        let mut out = String::new();
        for l in cleaned {
            out.push_str(&l.text);
            out.push('\n');
        }
        (out, log)
    })?;
    let target = provenance
        .map(Path::to_path_buf)
        .or_else(|| sibling(output, "provenance.json"));
    if let Some(target) = target {
        let json = if input.is_dir() {
            to_json(&logs.into_iter().collect::<BTreeMap<String, ProvenanceLog>>())
        } else {
            to_json(&logs.into_iter().next().map(|(_, l)| l).unwrap_or_default())
        };
        write_output(&target, &json)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval_text(
    ctx: &Ctx,
    reference: Option<&Path>,
    hyp: Option<&Path>,
    manifest: Option<&Path>,
    normalize: Option<bool>,
    report: &Path,
    confusion: Option<&Path>,
    table: &TableArg,
) -> CliResult<()> {
    let table = ctx.table(table)?;
    let pairs = match (reference, hyp, manifest) {
        (Some(r), Some(h), None) => read_paired_dirs(r, h)?,
        (None, None, Some(m)) => read_manifest(m)?,
        _ => {
            return Err(fail(
                Failure::Parse,
                anyhow::anyhow!("give either --ref and --hyp, or --manifest"),
            ))
        }
    };
    let opts = EvalOptions {
        normalize_first: normalize.or(ctx.config.normalize).unwrap_or(false),
        execution: ctx.execution,
    };
    let r = evaluate_corpus_with(&table, &pairs, opts)?;
    write_output(report, &to_json(&r))?;
    if let Some(target) = confusion
        .map(Path::to_path_buf)
        .or_else(|| sibling(report, "confusion.csv"))
    {
        write_output(&target, &r.confusion.to_csv())?;
    }
    eprintln!(
        "{} documents, {} reference characters: CER {:.4}, WER {:.4} ({:?})",
        pairs.len(),
        r.n_ref_chars,
        r.cer,
        r.wer,
        r.mode
    );
    Ok(())
}

fn cmd_eval_layout(
    ctx: &Ctx,
    gt: &Path,
    pred: &Path,
    iou: Option<f64>,
    report: &Path,
    csv: Option<&Path>,
) -> CliResult<()> {
    let iou = iou.or(ctx.config.iou).unwrap_or(DEFAULT_IOU_THRESHOLD);
    let gt_files = page_files(gt).map_err(io_at(gt))?;
    let pred_files = page_files(pred).map_err(io_at(pred))?;
    let stem = |p: &PathBuf| {
        p.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    let by_stem: BTreeMap<String, &PathBuf> = pred_files.iter().map(|p| (stem(p), p)).collect();
    let mut pairs = Vec::with_capacity(gt_files.len());
    for g in &gt_files {
        let p = by_stem
            .get(&stem(g))
            .ok_or_else(|| validation(format!("no prediction for {}", g.display())))?;
        pairs.push((g.clone(), (*p).clone()));
    }
    if pairs.is_empty() {
        return Err(validation(format!("no page files in {}", gt.display())));
    }
    let pages = try_map_ordered(ctx.execution, &pairs, |(g, p)| -> CliResult<_> {
        let g = load_page(g).map_err(|e| with_path(e, g))?.page;
        let p = load_page(p).map_err(|e| with_path(e, p))?.page;
        Ok((g, p))
    })?;
    let r = evaluate_layout(&pages, iou, ctx.execution)?;
    write_output(report, &to_json(&r))?;
    if let Some(csv) = csv {
        write_output(csv, &r.to_csv())?;
    }
    Ok(())
}

fn with_path<E: Into<CliError>>(e: E, path: &Path) -> CliError {
    let c: CliError = e.into();
    CliError {
        kind: c.kind,
        error: c.error.context(path.display().to_string()),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_build_vert(
    ctx: &Ctx,
    pages_dir: &Path,
    lexicon: Option<&Path>,
    doc_id: &str,
    out: &Path,
    date: Option<&str>,
    candidates: Option<&Path>,
    provenance: Option<&Path>,
    threshold: Option<f64>,
    table: &TableArg,
) -> CliResult<()> {
    let table = ctx.table(table)?;
    let clean = ctx.clean_options(threshold)?;
    let lexicon = match lexicon.map(Path::to_path_buf).or_else(|| ctx.config.lexicon.clone()) {
        Some(p) => Lexicon::load(&p, table.clone()).map_err(|e| with_path(e, &p))?,
        None => return Err(fail(Failure::Parse, anyhow::anyhow!("--lexicon is required"))),
    };
    let files = page_files(pages_dir).map_err(io_at(pages_dir))?;
    if files.is_empty() {
        return Err(validation(format!("no page files in {}", pages_dir.display())));
    }
    let pages = load_pages(&files, ctx.execution)?;
    let date = date.map(str::to_owned).or_else(|| ctx.config.date.clone());
    let built = build_vert(
        &pages,
        doc_id,
        date.as_deref(),
        &BuildOptions {
            table: &table,
            lexicon: &lexicon,
            clean,
            execution: ctx.execution,
        },
    );
    write_output(out, &to_vert_string(&built.document)?)?;
    if let Some(p) = candidates {
        write_output(p, &to_json(&built.ambiguities))?;
    }
    if let Some(p) = provenance {
        write_output(p, &to_json(&built.provenance))?;
    }
    let flags: usize = built.provenance.iter().map(|p| p.log.flags.len()).sum();
    eprintln!(
        "{} pages, {} tokens ({} unknown), {} ambiguous, {} review flags",
        pages.len(),
        built.document.words().count(),
        built.unknown_words,
        built.ambiguities.len(),
        flags
    );
    Ok(())
}

fn cmd_stats(ctx: &Ctx, verts: &[PathBuf], csv: &Path) -> CliResult<()> {
    let docs = try_map_ordered(ctx.execution, verts, |p| {
        let text = read_input(p)?;
        parse_vert(&text).map_err(|e| with_path(e, p))
    })?;
    let stats = corpus_stats(&docs)?;
    write_output(csv, &stats.to_csv())
}

fn configure_jobs(jobs: Option<usize>) -> CliResult<Execution> {
    match jobs {
        Some(0) => Err(validation("--jobs must be at least 1")),
        Some(1) => Ok(Execution::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| fail(Failure::Validation, e))?;
            Ok(Execution::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => {
            eprintln!("warning: built without parallel support; --jobs ignored");
            Ok(Execution::Sequential)
        }
        None => Ok(Execution::default()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let execution = configure_jobs(cli.jobs.or(config.jobs))?;
    let ctx = Ctx { config, execution };
    match cli.command {
        Command::Normalize { input, output, table } => cmd_normalize(&ctx, &input, &output, &table),
        Command::Clean {
            input,
            output,
            latin_threshold,
            provenance,
        } => cmd_clean(&ctx, &input, &output, latin_threshold, provenance.as_deref()),
        Command::EvalText {
            reference,
            hyp,
            manifest,
            normalize,
            report,
            confusion,
            table,
        } => cmd_eval_text(
            &ctx,
            reference.as_deref(),
            hyp.as_deref(),
            manifest.as_deref(),
            normalize,
            &report,
            confusion.as_deref(),
            &table,
        ),
        Command::EvalLayout {
            gt,
            pred,
            iou,
            report,
            csv,
        } => cmd_eval_layout(&ctx, &gt, &pred, iou, &report, csv.as_deref()),
        Command::BuildVert {
            pages,
            lexicon,
            doc_id,
            out,
            date,
            candidates,
            provenance,
            latin_threshold,
            table,
        } => cmd_build_vert(
            &ctx,
            &pages,
            lexicon.as_deref(),
            &doc_id,
            &out,
            date.as_deref(),
            candidates.as_deref(),
            provenance.as_deref(),
            latin_threshold,
            &table,
        ),
        Command::Stats { verts, csv } => cmd_stats(&ctx, &verts, &csv),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { Failure::Parse as u8 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind as u8)
        }
    }
}
