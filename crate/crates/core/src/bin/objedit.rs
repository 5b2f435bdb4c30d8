use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use objedit::backends::stub::{CannedReplies, StubServer};
use objedit::backends::BackendsConfig;
use objedit::dataset::synth::{crowded_fixture, mini_fixture, random_scenes, write_voc};
use objedit::dataset::{filter_instances, generate, ingest_voc, load_manifest, write_manifest, GenerationConfig};
use objedit::evalreport::{
    aggregate_rows, read_raw_csv, render_csv, render_markdown, verify_report, write_raw_csv, RawRow, RunInfo,
};
use objedit::pipeline::{PipelineRun, StopAfter};

#[derive(Parser)]
#[command(name = "objedit", version, about = "Object-level image edit benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    Mini,
    Crowded,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Build an edit dataset from a VOC-layout directory.
    GenDataset {
        #[arg(long)]
        voc_dir: PathBuf,
        /// TOML generation config; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the editing pipeline over a manifest.
    RunPipeline {
        #[arg(long)]
        manifest: PathBuf,
        /// TOML backend config; all-oracle when omitted.
        #[arg(long)]
        backends: Option<PathBuf>,
        /// Last stage to run: all, ground, refine, reason or draw.
        #[arg(long, default_value = "all")]
        stage: StopAfter,
        /// Only the first N samples, in sample-id order.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a pipeline run into a raw per-sample CSV.
    Eval {
        /// Run directory written by run-pipeline.
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate raw CSVs into a table.
    Report {
        #[arg(long, required = true, num_args = 1..)]
        results: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute a rendered report from raw CSVs and compare every cell.
    Verify {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        results: Vec<PathBuf>,
    },
    /// Serve canned backend replies over HTTP until killed.
    StubServe {
        #[arg(long)]
        replies: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8600")]
        addr: String,
    },
    /// Turn a pipeline run into canned replies for stub-serve.
    StubReplies {
        /// Run directory written by run-pipeline.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic VOC-layout dataset.
    SynthVoc {
        #[arg(long, value_enum, default_value = "mini")]
        fixture: Fixture,
        /// Image count for the random fixture.
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn read_raw(paths: &[PathBuf]) -> Result<Vec<RawRow>> {
    let mut rows = Vec::new();
    for p in paths {
        let f = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
        rows.extend(read_raw_csv(f).with_context(|| format!("reading {}", p.display()))?);
    }
    Ok(rows)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenDataset {
            voc_dir,
            config,
            seed,
            out,
        } => {
            let mut cfg: GenerationConfig = match config {
                Some(p) => toml::from_str(&fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => GenerationConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let instances = ingest_voc(&voc_dir)?;
            let filtered = filter_instances(&instances, &cfg);
            let samples = generate(&filtered.kept, &cfg)?;
            let path = write_manifest(&out, &samples, &cfg, Some(&filtered))?;
            println!(
                "{} instances read, {} kept from {} images, {} samples written to {}",
                instances.len(),
                filtered.kept.len(),
                filtered.images_kept(),
                samples.len(),
                path.display()
            );
            for (reason, n) in &filtered.dropped {
                println!("  dropped {n} ({reason})");
            }
        }
        Command::RunPipeline {
            manifest,
            backends,
            stage,
            limit,
            out,
        } => {
            let (_, mut samples) = load_manifest(&manifest)?;
            if let Some(n) = limit {
                samples.truncate(n);
            }
            let mut cfg = match backends {
                Some(p) => BackendsConfig::load(&p)?,
                None => BackendsConfig::default(),
            };
            cfg.apply_env()?;
            let set = cfg.build()?;
            let info = RunInfo {
                label: set.label(),
                config_hash: set.config_hash.clone(),
                template_version: cfg.template_version().to_string(),
                seed: cfg.seed,
            };
            let run = objedit::pipeline::run_pipeline(&samples, &set, info, stage)?;
            let path = run.write(&out)?;
            let failed = run
                .score(&samples)?
                .iter()
                .filter(|r| r.error.is_some())
                .count();
            println!(
                "{} samples through {:?} with {}; {failed} stage failures; wrote {}",
                samples.len(),
                stage,
                set.label(),
                path.display()
            );
        }
        Command::Eval { results, manifest, out } => {
            let (_, samples) = load_manifest(&manifest)?;
            let run = PipelineRun::load(&results)?;
            let in_run: Vec<_> = samples
                .into_iter()
                .filter(|s| run.record(&s.sample_id).is_some())
                .collect();
            let rows = run.raw_rows(&in_run)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            let f = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_raw_csv(&rows, f)?;
            let errors = rows.iter().filter(|r| r.error.is_some()).count();
            println!("{} results ({errors} errors) written to {}", rows.len(), out.display());
        }
        Command::Report { results, format, out } => {
            let report = aggregate_rows(&read_raw(&results)?);
            let text = match format {
                Format::Md => render_markdown(&report),
                Format::Csv => render_csv(&report),
            };
            match out {
                Some(p) => write_text(&p, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Verify { report, results } => {
            let text = fs::read_to_string(&report).with_context(|| format!("reading {}", report.display()))?;
            let outcome = verify_report(&text, &read_raw(&results)?)?;
            println!("{} report verified: {} cells match", outcome.format, outcome.cells_checked);
        }
        Command::StubServe { replies, addr } => {
            let canned = CannedReplies::load(&replies).with_context(|| format!("reading {}", replies.display()))?;
            let server = StubServer::bind(&addr, canned.into_handler()).with_context(|| format!("binding {addr}"))?;
            println!("listening on {}", server.url());
            std::io::stdout().flush()?;
            server.wait();
        }
        Command::StubReplies { run, out } => {
            let run = PipelineRun::load(&run)?;
            let canned = run.canned_replies()?;
            canned.save(&out).with_context(|| format!("writing {}", out.display()))?;
            println!("replies for {} samples written to {}", run.records.len(), out.display());
        }
        Command::SynthVoc {
            fixture,
            count,
            seed,
            out,
        } => {
            let images = match fixture {
                Fixture::Mini => mini_fixture(),
                Fixture::Crowded => crowded_fixture(),
                Fixture::Random => {
                    if count == 0 {
                        bail!("--count must be positive");
                    }
                    random_scenes(count, 320, 240, 4, seed)
                }
            };
            write_voc(&out, &images)?;
            println!("{} images written to {}", images.len(), out.display());
        }
    }
    Ok(())
}
