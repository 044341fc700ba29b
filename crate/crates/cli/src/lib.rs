//! Command-line front end. `run` parses arguments, dispatches to the
//! pipeline stages and maps outcomes to exit codes: 0 on success, 1 on
//! domain errors, 2 on usage errors.

use std::fmt;
use std::fs;
use std::io::Write;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand};
use url::Url;

use webadapt::blockmodel::{parse_html, parse_xml, DomTree};
use webadapt::corpus::{
    build_manifest, fetch_page, load_local, load_manifest, scan_domain, PageRecord,
    PageTechnology,
};
use webadapt::evaluator::{
    coverage_score, feasibility_report, load_ratings, measure_response, write_feasibility_csv,
    write_kappa_csv, write_timing_csv, Variant, HUMAN_VIEW, SYSTEM_VIEW,
};
use webadapt::noisefilter::{label_leaves, BlockLabel, RuleSet};
use webadapt::proxy::{load_routes, serve_with, ServeOptions};
use webadapt::segmenter::{segment_page, PDoC};
use webadapt::translator::translate_site;

#[derive(Parser, Debug)]
#[command(
    name = "webadapt",
    version,
    about = "Classify, segment, filter, translate and serve web pages for small screens"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the technology (html, xml, flash, unknown) of pages.
    Classify {
        /// Local files or http(s) URLs.
        #[arg(required = true)]
        inputs: Vec<String>,
        /// Request timeout in seconds for URLs.
        #[arg(long, default_value_t = 30)]
        timeout: u64,
    },
    /// Crawl a site breadth-first and optionally store a dataset manifest.
    Scan {
        seed: Url,
        #[arg(long, default_value_t = 50)]
        max_pages: usize,
        /// Follow links to other hosts too.
        #[arg(long)]
        all_hosts: bool,
        /// Directory for the manifest and page bodies.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Segment a page into visual blocks.
    Segment {
        input: PathBuf,
        /// Permitted degree of coherence, 1 to 10.
        #[arg(long, default_value_t = PDoC::DEFAULT.value(), value_parser = parse_pdoc)]
        pdoc: u8,
        /// Write the block tree as JSON to this file, or `-` for stdout.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Label blocks as content or boilerplate and print the content.
    StripNoise {
        input: PathBuf,
        /// TOML rule file; defaults apply when absent.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, default_value_t = PDoC::DEFAULT.value(), value_parser = parse_pdoc)]
        pdoc: u8,
        /// Print every block with its label instead of the content only.
        #[arg(long)]
        labels: bool,
    },
    /// Translate a Flash site capture into static HTML pages.
    Translate {
        #[arg(long)]
        mhtml: PathBuf,
        #[arg(long)]
        segments: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve translated sites and forward other routes until interrupted.
    Serve {
        #[arg(long)]
        routes: PathBuf,
        /// Listen address; overrides WEBADAPT_BIND_ADDR.
        #[arg(long)]
        bind: Option<IpAddr>,
        #[arg(long)]
        access_log: Option<PathBuf>,
    },
    /// Measure response times and, given ratings, content coverage.
    Evaluate {
        /// Route file; its sites are served while measuring.
        #[arg(long)]
        routes: Option<PathBuf>,
        /// Lines of `VARIANT URL [PROFILE]`, VARIANT being C or T.
        #[arg(long)]
        pages: PathBuf,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
        repeats: u32,
        /// Timing table destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Human-view ratings file.
        #[arg(long, requires = "sv")]
        hv: Option<PathBuf>,
        /// System-view ratings file.
        #[arg(long, requires = "hv")]
        sv: Option<PathBuf>,
        /// Kappa table destination; stdout when absent.
        #[arg(long)]
        kappa_out: Option<PathBuf>,
    },
    /// Build the feasibility matrix for a dataset manifest.
    Report {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = PDoC::DEFAULT.value(), value_parser = parse_pdoc)]
        pdoc: u8,
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Report destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_pdoc(s: &str) -> Result<u8, String> {
    let v: u8 = s.parse().map_err(|_| format!("{s:?} is not an integer"))?;
    PDoC::new(v).map(PDoC::value).map_err(|e| e.to_string())
}

/// A failure reported as a single `stage: message` line.
#[derive(Debug)]
pub struct Failure {
    stage: &'static str,
    message: String,
}

impl Failure {
    fn new(stage: &'static str, message: impl fmt::Display) -> Self {
        Failure {
            stage,
            message: message.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // module errors already carry their own stage prefix
        let one_line = self.message.replace('\n', " ");
        write!(f, "{}: {one_line}", self.stage)
    }
}

type Outcome = Result<(), Failure>;

/// Runs the command line and returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("{f}");
            1
        }
    }
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Classify { inputs, timeout } => classify(&inputs, timeout),
        Command::Scan {
            seed,
            max_pages,
            all_hosts,
            out,
        } => scan(&seed, max_pages, !all_hosts, out.as_deref()),
        Command::Segment { input, pdoc, dump } => segment(&input, pdoc, dump.as_deref()),
        Command::StripNoise {
            input,
            rules,
            pdoc,
            labels,
        } => strip_noise(&input, rules.as_deref(), pdoc, labels),
        Command::Translate {
            mhtml,
            segments,
            out,
        } => translate(&mhtml, &segments, &out),
        Command::Serve {
            routes,
            bind,
            access_log,
        } => serve(&routes, bind, access_log),
        Command::Evaluate {
            routes,
            pages,
            repeats,
            out,
            hv,
            sv,
            kappa_out,
        } => evaluate(EvaluateArgs {
            routes,
            pages,
            repeats: repeats as usize,
            out,
            ratings: hv.zip(sv),
            kappa_out,
        }),
        Command::Report {
            manifest,
            pdoc,
            rules,
            out,
        } => report(&manifest, pdoc, rules.as_deref(), out.as_deref()),
    }
}

fn pdoc_of(v: u8) -> PDoC {
    PDoC::new(v).expect("validated by the argument parser")
}

fn load_rules(path: Option<&Path>) -> Result<RuleSet, Failure> {
    match path {
        Some(p) => RuleSet::load(p).map_err(|e| Failure::new("rules", e)),
        None => Ok(RuleSet::default()),
    }
}

fn read_page(stage: &'static str, path: &Path) -> Result<PageRecord, Failure> {
    load_local(path).map_err(|e| Failure::new(stage, format!("{}: {e}", path.display())))
}

/// Writes to the file, or to stdout when no path (or `-`) is given.
fn with_output<F>(stage: &'static str, path: Option<&Path>, write: F) -> Outcome
where
    F: FnOnce(&mut dyn Write) -> Result<(), String>,
{
    match path {
        Some(p) if p != Path::new("-") => {
            let mut file = fs::File::create(p)
                .map_err(|e| Failure::new(stage, format!("{}: {e}", p.display())))?;
            write(&mut file).map_err(|e| Failure::new(stage, e))
        }
        _ => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).map_err(|e| Failure::new(stage, e))
        }
    }
}

fn classify(inputs: &[String], timeout: u64) -> Outcome {
    for input in inputs {
        let record = match Url::parse(input) {
            Ok(url) if matches!(url.scheme(), "http" | "https") => {
                fetch_page(&url, Duration::from_secs(timeout))
                    .map_err(|e| Failure::new("classify", e))?
                    .classified()
            }
            _ => read_page("classify", Path::new(input))?,
        };
        println!("{}\t{input}", record.technology);
    }
    Ok(())
}

fn scan(seed: &Url, max_pages: usize, same_host: bool, out: Option<&Path>) -> Outcome {
    let outcome = scan_domain(seed, max_pages, same_host);
    for f in &outcome.failures {
        eprintln!("scan: {}: {}", f.url, f.error);
    }
    for r in &outcome.records {
        println!("{}\t{}", r.technology, r.url);
    }
    if let Some(dir) = out {
        let manifest = build_manifest(&outcome.records, dir).map_err(|e| Failure::new("scan", e))?;
        eprintln!(
            "scan: {} pages recorded in {}",
            manifest.entries.len(),
            manifest.manifest_path().display()
        );
    }
    if outcome.records.is_empty() {
        return Err(Failure::new("scan", format!("no page of {seed} could be fetched")));
    }
    Ok(())
}

fn page_dom(page: &PageRecord) -> Option<DomTree> {
    match page.technology {
        PageTechnology::Xml => parse_xml(&page.body).ok().map(|d| d.tree),
        _ => parse_html(&page.body, None).ok(),
    }
}

fn segment(input: &Path, pdoc: u8, dump: Option<&Path>) -> Outcome {
    let page = read_page("segment", input)?;
    let outcome = segment_page(&page, pdoc_of(pdoc));
    println!(
        "{}\t{}\t{}\t{}",
        outcome.status,
        outcome.leaf_count(),
        page.technology,
        outcome.reason
    );
    if let (Some(path), Some(tree)) = (dump, &outcome.tree) {
        let json = serde_json::to_string_pretty(&tree.to_dump()).expect("dump serializes");
        with_output("segment", Some(path), |w| {
            writeln!(w, "{json}").map_err(|e| e.to_string())
        })?;
    }
    Ok(())
}

fn strip_noise(input: &Path, rules: Option<&Path>, pdoc: u8, labels: bool) -> Outcome {
    let rules = load_rules(rules)?;
    let page = read_page("strip-noise", input)?;
    let outcome = segment_page(&page, pdoc_of(pdoc));
    let (Some(tree), Some(dom)) = (&outcome.tree, page_dom(&page)) else {
        return Err(Failure::new("strip-noise", format!("{}: {}", input.display(), outcome.reason)));
    };
    let labelled = label_leaves(tree, &dom, &rules);
    if labels {
        for (block, label) in &labelled {
            let tag = match label {
                BlockLabel::Content => "content",
                BlockLabel::Boilerplate => "boilerplate",
            };
            println!("{}\t{tag}\t{}", block.id, block.text);
        }
        return Ok(());
    }
    let content: Vec<_> = labelled
        .iter()
        .filter(|(_, l)| *l == BlockLabel::Content)
        .collect();
    if content.is_empty() {
        return Err(Failure::new(
            "strip-noise",
            format!("{}: every block was classified as boilerplate", input.display()),
        ));
    }
    for (block, _) in content {
        println!("{}", block.text);
    }
    Ok(())
}

fn translate(mhtml: &Path, segments: &Path, out: &Path) -> Outcome {
    let site = translate_site(mhtml, segments, out).map_err(|e| Failure::new("translate", e))?;
    println!(
        "translated {} into {} pages and {} assets under {}",
        site.site,
        site.pages.len(),
        site.assets.len(),
        out.display()
    );
    Ok(())
}

fn serve(routes: &Path, bind: Option<IpAddr>, access_log: Option<PathBuf>) -> Outcome {
    let table = load_routes(routes).map_err(|e| Failure::new("serve", e))?;
    let handle = serve_with(
        table,
        &ServeOptions {
            bind_addr: bind,
            access_log,
        },
    )
    .map_err(|e| Failure::new("serve", e))?;
    for addr in handle.local_addrs() {
        eprintln!("serve: listening on http://{addr}/");
    }
    loop {
        std::thread::park();
    }
}

struct EvaluateArgs {
    routes: Option<PathBuf>,
    pages: PathBuf,
    repeats: usize,
    out: Option<PathBuf>,
    ratings: Option<(PathBuf, PathBuf)>,
    kappa_out: Option<PathBuf>,
}

fn parse_page_list(text: &str) -> Result<Vec<(Variant, Url, String)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(variant), Some(url)) = (fields.next(), fields.next()) else {
            return Err(format!("line {}: expected `VARIANT URL [PROFILE]`", i + 1));
        };
        let variant = variant.parse().map_err(|e| format!("line {}: {e}", i + 1))?;
        let url = Url::parse(url).map_err(|e| format!("line {}: {url:?}: {e}", i + 1))?;
        let profile = fields.next().unwrap_or("desktop").to_string();
        out.push((variant, url, profile));
    }
    Ok(out)
}

fn evaluate(args: EvaluateArgs) -> Outcome {
    let text = fs::read_to_string(&args.pages)
        .map_err(|e| Failure::new("evaluate", format!("{}: {e}", args.pages.display())))?;
    let pages = parse_page_list(&text)
        .map_err(|e| Failure::new("evaluate", format!("{}: {e}", args.pages.display())))?;
    let _server = match &args.routes {
        Some(path) => {
            let table = load_routes(path).map_err(|e| Failure::new("evaluate", e))?;
            Some(serve_with(table, &ServeOptions::default()).map_err(|e| Failure::new("evaluate", e))?)
        }
        None => None,
    };
    let mut records = Vec::new();
    for (variant, url, profile) in &pages {
        match measure_response(url, args.repeats, *variant, profile) {
            Ok(r) => records.push(r),
            Err(e) => eprintln!("evaluate: {e}"),
        }
    }
    with_output("evaluate", args.out.as_deref(), |w| {
        write_timing_csv(w, &records).map_err(|e| e.to_string())
    })?;

    if let Some((hv, sv)) = &args.ratings {
        let hv_ratings = load_ratings(hv).map_err(|e| Failure::new("evaluate", e))?;
        let sv_ratings = load_ratings(sv).map_err(|e| Failure::new("evaluate", e))?;
        let hv_values: Vec<_> = hv_ratings.iter().map(|(_, r)| *r).collect();
        let sv_values: Vec<_> = sv_ratings.iter().map(|(_, r)| *r).collect();
        let report =
            coverage_score(&hv_values, &sv_values).map_err(|e| Failure::new("evaluate", e))?;
        let label = format!("{HUMAN_VIEW}-vs-{SYSTEM_VIEW}");
        with_output("evaluate", args.kappa_out.as_deref(), |w| {
            write_kappa_csv(w, &[(label, report.result)]).map_err(|e| e.to_string())
        })?;
    }
    if records.is_empty() && !pages.is_empty() {
        return Err(Failure::new("evaluate", "every measurement failed"));
    }
    Ok(())
}

fn report(manifest: &Path, pdoc: u8, rules: Option<&Path>, out: Option<&Path>) -> Outcome {
    let rules = load_rules(rules)?;
    let manifest = load_manifest(manifest).map_err(|e| Failure::new("report", e))?;
    if manifest.entries.is_empty() {
        return Err(Failure::new("report", "manifest has no entries"));
    }
    let cells =
        feasibility_report(&manifest, pdoc_of(pdoc), &rules).map_err(|e| Failure::new("report", e))?;
    with_output("report", out, |w| {
        write_feasibility_csv(w, &cells).map_err(|e| e.to_string())
    })
}
