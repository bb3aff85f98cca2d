//! Command-line front end: analyze images, emit reports, generate the
//! fixture corpus, and run the latency benchmark.

use std::io::{IsTerminal, Read};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};

use origin_lens_core::container::{scan_jpeg_segments, ImageBytes, ImageFormat, APP1};
use origin_lens_core::metadata::{load_rules, parse_exif};
use origin_lens_core::net::HttpTransport;
use origin_lens_core::pipeline::{analyze, EngineConfig};
use origin_lens_core::signer::{
    base_jpeg, capture_actions_assertion, make_test_ca, sign_and_embed, write_corpus,
    CorpusOptions, JpegOptions,
};
use origin_lens_core::verdict::{render_report, RenderMode, Status};

const EXIT_OPERATIONAL_ERROR: u8 = 1;

fn exit_code_for(status: Status) -> u8 {
    match status {
        Status::Verified => 0,
        Status::AiGenerated => 2,
        Status::Warning => 3,
        Status::Invalid => 4,
        Status::NoData => 5,
    }
}

#[derive(Parser)]
#[command(
    name = "origin-lens",
    about = "Local-first image provenance verification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze an image and print a graded trust report.
    Analyze(AnalyzeArgs),
    /// Generate a signed fixture corpus with companion trust material.
    Fixture(FixtureArgs),
    /// Measure per-layer latency against the interactive budgets.
    Bench(BenchArgs),
}

#[derive(Args)]
struct TrustArgs {
    /// PEM bundle(s) of trusted root certificates.
    #[arg(
        long = "trust-store",
        env = "ORIGINLENS_TRUST_STORE",
        value_delimiter = ','
    )]
    trust_store: Vec<PathBuf>,

    /// Pin list: one hex SPKI SHA-256 per line.
    #[arg(long = "pins", env = "ORIGINLENS_PINS")]
    pins: Option<PathBuf>,

    /// Revocation list: issuerhash:serial hex pairs, one per line.
    #[arg(long = "crl", env = "ORIGINLENS_CRL")]
    crl: Option<PathBuf>,

    /// AI-signature rule table (JSON array); replaces the embedded table.
    #[arg(long = "rules", env = "ORIGINLENS_RULES")]
    rules: Option<PathBuf>,
}

impl TrustArgs {
    fn build_config(&self) -> Result<EngineConfig> {
        let mut config = EngineConfig::default();
        for path in &self.trust_store {
            let pem = std::fs::read_to_string(path)
                .with_context(|| format!("reading trust store {}", path.display()))?;
            config
                .trust_store
                .add_roots_pem(&pem)
                .with_context(|| format!("trust store {}", path.display()))?;
        }
        if let Some(path) = &self.pins {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading pin list {}", path.display()))?;
            config
                .trust_store
                .add_pins_text(&text)
                .with_context(|| format!("pin list {}", path.display()))?;
        }
        if let Some(path) = &self.crl {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading revocation list {}", path.display()))?;
            config
                .trust_store
                .add_revocations_text(&text)
                .with_context(|| format!("revocation list {}", path.display()))?;
        }
        if let Some(path) = &self.rules {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading rule table {}", path.display()))?;
            config.rules =
                load_rules(&text).with_context(|| format!("rule table {}", path.display()))?;
        }
        Ok(config)
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Image path, or `-` for standard input.
    input: String,

    /// Emit the machine-readable JSON report.
    #[arg(long)]
    json: bool,

    #[command(flatten)]
    trust: TrustArgs,

    /// Enable the opt-in watermark layer (transmits image bytes).
    #[arg(long = "enable-watermark", env = "ORIGINLENS_ENABLE_WATERMARK")]
    enable_watermark: bool,

    /// Enable the opt-in reverse image search layer (transmits image bytes).
    #[arg(
        long = "enable-reverse-search",
        env = "ORIGINLENS_ENABLE_REVERSE_SEARCH"
    )]
    enable_reverse_search: bool,

    #[arg(long = "watermark-endpoint", env = "ORIGINLENS_WATERMARK_ENDPOINT")]
    watermark_endpoint: Option<String>,

    #[arg(long = "search-endpoint", env = "ORIGINLENS_SEARCH_ENDPOINT")]
    search_endpoint: Option<String>,

    /// Bearer token for provider authentication.
    #[arg(long = "bearer-token", env = "ORIGINLENS_BEARER_TOKEN")]
    bearer_token: Option<String>,

    /// Network timeout per provider call, in milliseconds.
    #[arg(
        long = "timeout-ms",
        env = "ORIGINLENS_TIMEOUT_MS",
        default_value_t = 10_000
    )]
    timeout_ms: u64,

    /// Verification clock (RFC 3339); defaults to the system UTC clock.
    #[arg(long = "now", env = "ORIGINLENS_NOW")]
    now: Option<String>,
}

#[derive(Args)]
struct FixtureArgs {
    /// Output directory for the corpus.
    #[arg(long)]
    out: PathBuf,

    /// Seed for deterministic key and filler generation.
    #[arg(long, env = "ORIGINLENS_SEED", default_value_t = 1)]
    seed: u64,

    /// Corpus clock (RFC 3339); defaults to the current hour.
    #[arg(long = "now", env = "ORIGINLENS_NOW")]
    now: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Analyze an existing signed image instead of a generated fixture.
    #[arg(long)]
    input: Option<PathBuf>,

    #[command(flatten)]
    trust: TrustArgs,

    #[arg(long, default_value_t = 10)]
    iterations: usize,

    /// Provenance-layer budget in milliseconds.
    #[arg(long = "budget-l1", default_value_t = 500.0)]
    budget_l1: f64,

    /// EXIF-parse budget in milliseconds.
    #[arg(long = "budget-exif", default_value_t = 50.0)]
    budget_exif: f64,

    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Fixture(args) => cmd_fixture(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_OPERATIONAL_ERROR)
        }
    }
}

fn parse_clock(value: &Option<String>) -> Result<Option<DateTime<Utc>>> {
    match value {
        None => Ok(None),
        Some(text) => {
            let parsed = DateTime::parse_from_rfc3339(text)
                .with_context(|| format!("--now {text:?} is not RFC 3339"))?;
            Ok(Some(parsed.with_timezone(&Utc)))
        }
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<u8> {
    let bytes = if args.input == "-" {
        let mut buf = Vec::new();
        std::io::stdin()
            .read_to_end(&mut buf)
            .context("reading standard input")?;
        buf
    } else {
        std::fs::read(&args.input).with_context(|| format!("reading {}", args.input))?
    };

    let mut config = args.trust.build_config()?;
    config.clock_override = parse_clock(&args.now)?;
    config.net.watermark_enabled = args.enable_watermark;
    config.net.reverse_search_enabled = args.enable_reverse_search;
    config.net.watermark_endpoint = args.watermark_endpoint.clone();
    config.net.search_endpoint = args.search_endpoint.clone();
    config.net.bearer_token = args.bearer_token.clone();
    config.net.timeout = std::time::Duration::from_millis(args.timeout_ms);
    config.transport = Arc::new(HttpTransport);

    for warning in config.startup_warnings() {
        eprintln!("warning: {warning}");
    }

    let report = analyze(&ImageBytes::new(bytes), &config).context("analysis failed")?;

    let mode = if args.json {
        RenderMode::Json
    } else {
        RenderMode::Human {
            ansi: std::io::stdout().is_terminal(),
        }
    };
    print!("{}", render_report(&report, mode));
    Ok(exit_code_for(report.verdict.status))
}

fn default_fixture_clock() -> DateTime<Utc> {
    // Truncated to the hour so near-simultaneous runs agree byte-for-byte.
    let now = Utc::now();
    DateTime::from_timestamp(now.timestamp() - now.timestamp() % 3600, 0)
        .expect("in range")
}

fn cmd_fixture(args: FixtureArgs) -> Result<u8> {
    let now = parse_clock(&args.now)?.unwrap_or_else(default_fixture_clock);
    let options = CorpusOptions {
        seed: args.seed,
        now,
    };
    let written = write_corpus(&args.out, &options)
        .with_context(|| format!("writing corpus to {}", args.out.display()))?;
    println!("wrote {} files to {}", written.len(), args.out.display());
    for name in &written {
        println!("  {name}");
    }
    println!(
        "analyze with: origin-lens analyze {dir}/clean.jpg --trust-store {dir}/roots.pem",
        dir = args.out.display()
    );
    Ok(0)
}

fn median(samples: &mut [f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.sort_by(|a, b| a.partial_cmp(b).expect("timings are finite"));
    let mid = samples.len() / 2;
    if samples.len() % 2 == 0 {
        (samples[mid - 1] + samples[mid]) / 2.0
    } else {
        samples[mid]
    }
}

fn cmd_bench(args: BenchArgs) -> Result<u8> {
    let iterations = args.iterations.max(1);

    // Either the provided image and trust material, or a self-signed
    // 12-megapixel fixture with an in-memory trust store.
    let (image, config) = match &args.input {
        Some(path) => {
            let bytes =
                std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            (ImageBytes::new(bytes), args.trust.build_config()?)
        }
        None => {
            use rand_chacha::rand_core::SeedableRng;
            let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(args.seed);
            let now = Utc::now();
            let mut ca = make_test_ca("Bench Root", now, 30, &mut rng).context("bench CA")?;
            let id = ca
                .issue_es256(
                    "bench signer",
                    now - chrono::Duration::hours(1),
                    now + chrono::Duration::days(29),
                    &mut rng,
                )
                .context("bench leaf")?;
            // 4000x3000 with a JPEG-typical compressed size for 12 MP.
            let base = base_jpeg(&JpegOptions {
                width: 4000,
                height: 3000,
                entropy_len: 4_500_000,
                exif_tags: vec![
                    (0x010F, "Acme".into()),
                    (0x0110, "Shooter 9000".into()),
                    (0x0131, "Acme Camera Firmware 1.0".into()),
                    (0x010E, "bench scene".into()),
                    (0x0132, "2026:01:15 09:30:00".into()),
                ],
                iptc_datasets: vec![(110, "Bench".into())],
                seed: args.seed,
            });
            let signed = sign_and_embed(
                &base,
                &id,
                &[capture_actions_assertion()],
                "Acme Camera Firmware 1.0",
                now,
            )
            .context("bench signing")?;
            let mut config = EngineConfig::default();
            config
                .trust_store
                .add_root_der(ca.root_der())
                .context("bench trust store")?;
            (signed, config)
        }
    };

    println!(
        "benchmarking {} iteration(s) over a {:.1} MiB image",
        iterations,
        image.len() as f64 / (1024.0 * 1024.0)
    );

    let exif_payload = match image.format() {
        ImageFormat::Jpeg => scan_jpeg_segments(&image).ok().and_then(|segments| {
            segments
                .into_iter()
                .find(|s| s.marker == APP1 && s.payload.starts_with(b"Exif\0\0"))
                .map(|s| s.payload)
        }),
        _ => None,
    };

    let mut layer_samples: [Vec<f64>; 4] = Default::default();
    let mut exif_samples: Vec<f64> = Vec::new();
    let mut last_status = None;
    for _ in 0..iterations {
        let report = analyze(&image, &config).context("analysis failed")?;
        for (slot, layer) in layer_samples.iter_mut().zip(&report.layers) {
            if let Some(ms) = layer.timing_ms {
                slot.push(ms);
            }
        }
        last_status = Some(report.verdict.status);
        if let Some(payload) = &exif_payload {
            let started = Instant::now();
            let parsed = parse_exif(payload);
            exif_samples.push(started.elapsed().as_secs_f64() * 1000.0);
            parsed.context("exif parse failed")?;
        }
    }

    if let Some(status) = last_status {
        println!("status under bench config: {}", status.word());
    }
    let names = ["provenance", "metadata", "watermark", "context"];
    let mut provenance_median = 0.0;
    for (name, samples) in names.iter().zip(layer_samples.iter_mut()) {
        if samples.is_empty() {
            println!("  {name:<11} skipped");
            continue;
        }
        let med = median(samples);
        if *name == "provenance" {
            provenance_median = med;
        }
        println!(
            "  {name:<11} median {med:>9.3} ms over {} run(s)",
            samples.len()
        );
    }
    let exif_median = if exif_samples.is_empty() {
        None
    } else {
        Some(median(&mut exif_samples))
    };
    match exif_median {
        Some(med) => println!("  {:<11} median {med:>9.3} ms", "exif-parse"),
        None => println!("  {:<11} no EXIF payload found", "exif-parse"),
    }

    // Budgets are reported, never gated: hardware varies.
    if provenance_median > args.budget_l1 {
        println!(
            "WARN: provenance median {provenance_median:.3} ms exceeds the {:.0} ms budget",
            args.budget_l1
        );
    } else {
        println!(
            "provenance median within the {:.0} ms budget",
            args.budget_l1
        );
    }
    if let Some(med) = exif_median {
        if med > args.budget_exif {
            println!(
                "WARN: exif-parse median {med:.3} ms exceeds the {:.0} ms budget",
                args.budget_exif
            );
        } else {
            println!(
                "exif-parse median within the {:.0} ms budget",
                args.budget_exif
            );
        }
    }
    Ok(0)
}
