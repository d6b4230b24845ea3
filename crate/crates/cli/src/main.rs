mod exit;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use qers_core::config::{Config, ProbeSpec, VerifyMode, CONFIG_ENV};
use qers_core::report::{
    emit_report, ingest_csv, render_table, write_log, ReportFormat, RunHeader, ScoreReport,
};
use qers_core::{evaluate_run, generate_scenario, MetricSeries, ProtocolId, ScenarioLabel};
use qers_probe::mqtt::{start_broker, BrokerConfig};
use qers_probe::targets::{start_http_target, start_https_target, TargetConfig};
use qers_probe::{provider_from_config, run_probe, sample_until, ProbeContext, RunClock};
use serde_json::json;

use exit::{Failure, CONFIG, DATA, PROBE, USAGE, WRITE};

#[derive(Parser, Debug)]
#[command(
    name = "qers",
    version,
    about = "Quantum-safe readiness scoring for IoT protocols"
)]
struct Cli {
    /// Config file, or `default` for the built-in configuration.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every configured probe plus telemetry and write a run log.
    Probe {
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
        /// Label recorded on every sample.
        #[arg(long, default_value = "desk")]
        scenario: String,
        #[arg(long)]
        run_id: Option<String>,
    },
    /// Generate synthetic run logs, one file per scenario.
    Simulate {
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
        /// Scenario labels; defaults to the built-in `close` and `far`.
        #[arg(long, value_delimiter = ',')]
        scenario: Vec<String>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Ingest run logs, compute scores and write report files.
    Score {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
        /// Keep only these scenarios.
        #[arg(long, value_delimiter = ',')]
        scenario: Vec<String>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![Format::Csv, Format::Json], value_enum)]
        format: Vec<Format>,
    },
    /// Start loopback MQTT, HTTP and HTTPS servers until interrupted.
    ServeTestTargets {
        /// Where `cert.pem` and a matching `targets.toml` are written.
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1:1883")]
        mqtt_addr: String,
        #[arg(long, default_value = "127.0.0.1:8080")]
        http_addr: String,
        #[arg(long, default_value = "127.0.0.1:8443")]
        https_addr: String,
        /// Fraction of MQTT publications the broker discards.
        #[arg(long, default_value_t = 0.0)]
        drop_ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        response_delay_ms: u64,
        #[arg(long, default_value_t = 0)]
        handshake_delay_ms: u64,
    },
    /// Parse and validate the config, then print its hash.
    ValidateConfig,
}

fn load_config(arg: Option<&str>) -> Result<Config, Failure> {
    Config::resolve(arg).map_err(|e| Failure::new(CONFIG, e.to_string()))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::new(WRITE, format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .map_err(|e| Failure::new(WRITE, format!("cannot write {}: {e}", path.display())))
}

fn simulate(
    cfg: &Config,
    output_dir: &Path,
    labels: &[String],
    seed: Option<u64>,
) -> Result<(), Failure> {
    let labels: Vec<String> = if labels.is_empty() {
        vec!["close".into(), "far".into()]
    } else {
        labels.to_vec()
    };
    let catalog = cfg.catalog()?;
    create_dir(output_dir)?;
    for label in &labels {
        let mut spec = cfg
            .scenario(label)
            .ok_or_else(|| Failure::new(CONFIG, format!("unknown scenario `{label}`")))?;
        if let Some(seed) = seed {
            spec.seed = seed;
        }
        let series = generate_scenario(&spec, &catalog, &cfg.overhead, &cfg.energy)?;
        let header = RunHeader::new(
            format!("sim-{label}-{}", spec.seed),
            label.as_str(),
            cfg.hash(),
        );
        let path = output_dir.join(format!("{label}.csv"));
        write_log(&path, &header, &series)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn score(
    cfg: &Config,
    inputs: &[PathBuf],
    output_dir: &Path,
    scenarios: &[String],
    formats: &[Format],
) -> Result<(), Failure> {
    let mut data: Vec<MetricSeries> = Vec::new();
    let mut run_ids = Vec::new();
    for input in inputs {
        let log = ingest_csv(input)?;
        for v in &log.violations {
            eprintln!("warning: {}:{}: {}", input.display(), v.line, v.message);
        }
        if log.header.config_hash != cfg.hash() {
            eprintln!(
                "warning: {} was recorded with config {}, scoring with {}",
                input.display(),
                log.header.config_hash,
                cfg.hash()
            );
        }
        run_ids.push(log.header.run_id);
        data.extend(log.series);
    }
    if !scenarios.is_empty() {
        let keep: BTreeSet<&str> = scenarios.iter().map(String::as_str).collect();
        data.retain(|s| keep.contains(s.scenario.as_str()));
        if data.is_empty() {
            return Err(Failure::new(
                DATA,
                "no samples left after the scenario filter",
            ));
        }
    }
    let results = evaluate_run(&data, &cfg.weights, &cfg.bounds)?;
    let report = ScoreReport::new(run_ids.join("+"), cfg.hash(), results);
    let formats: Vec<ReportFormat> = formats
        .iter()
        .map(|f| match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        })
        .collect();
    create_dir(output_dir)?;
    let files = emit_report(&report, output_dir, &formats)?;
    print!("{}", render_table(&report));
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

async fn probe(
    cfg: &Config,
    output_dir: &Path,
    scenario: &str,
    run_id: Option<String>,
) -> Result<(), Failure> {
    if cfg.probe.is_empty() {
        return Err(Failure::new(CONFIG, "config has no [[probe]] blocks"));
    }
    let clock = RunClock::start();
    let ctx = ProbeContext {
        scenario: ScenarioLabel::new(scenario),
        catalog: cfg.catalog()?,
        overhead: cfg.overhead,
        clock,
    };
    let mut provider = provider_from_config(&cfg.telemetry, cfg.energy)?;
    let interval = Duration::from_millis(cfg.telemetry.interval_ms);
    let (stop_tx, stop_rx) = tokio::sync::oneshot::channel();
    let telemetry =
        tokio::spawn(
            async move { sample_until(provider.as_mut(), interval, &clock, stop_rx).await },
        );

    let handles: Vec<_> = cfg
        .probe
        .iter()
        .cloned()
        .map(|spec| {
            let ctx = ctx.clone();
            tokio::spawn(async move {
                let outcome = run_probe(&spec, &ctx).await;
                (spec, outcome)
            })
        })
        .collect();
    let mut outcomes = Vec::new();
    let mut first_error = None;
    for h in handles {
        let (spec, outcome) = h.await.map_err(|e| Failure::new(PROBE, e.to_string()))?;
        match outcome {
            Ok(o) => outcomes.push((spec, o)),
            Err(e) => {
                eprintln!("error: {} probe of {}: {e}", spec.protocol, spec.target);
                first_error.get_or_insert(e);
            }
        }
    }
    let _ = stop_tx.send(());
    let trace = telemetry
        .await
        .map_err(|e| Failure::new(PROBE, e.to_string()))??;
    if let Some(e) = first_error {
        return Err(e.into());
    }

    let protocols: BTreeSet<ProtocolId> = outcomes.iter().map(|(_, o)| o.protocol).collect();
    let mut series: Vec<MetricSeries> = Vec::new();
    for (_, o) in &outcomes {
        series.extend(o.series.iter().cloned());
    }
    for p in &protocols {
        series.extend(trace.to_series(*p, &ctx.scenario));
    }

    let run_id = run_id.unwrap_or_else(|| format!("{scenario}-{}", clock.wall_origin_ms()));
    let mut header = RunHeader::new(run_id.clone(), scenario, cfg.hash());
    header.clock_resolution_us = RunClock::RESOLUTION_US;
    create_dir(output_dir)?;
    let log_path = output_dir.join("run.csv");
    write_log(&log_path, &header, &series)?;

    let probes: Vec<_> = outcomes
        .iter()
        .map(|(spec, o)| {
            json!({
                "protocol": o.protocol.as_str(),
                "target": spec.target,
                "attempted": o.attempted,
                "completed": o.completed,
                "loss": o.loss(),
                "connections": o.connections,
                "handshakes": o.handshakes,
            })
        })
        .collect();
    let meta = json!({
        "run_id": run_id,
        "scenario": scenario,
        "config_hash": cfg.hash(),
        "clock": "monotonic",
        "clock_resolution_us": RunClock::RESOLUTION_US,
        "started_unix_ms": clock.wall_origin_ms() as u64,
        "duration_ms": clock.now_ms(),
        "telemetry_samples": trace.samples.len(),
        "probes": probes,
    });
    let meta_path = output_dir.join("run-meta.json");
    write_text(
        &meta_path,
        &(serde_json::to_string_pretty(&meta).expect("json") + "\n"),
    )?;
    for (_, o) in &outcomes {
        println!(
            "{:<5} completed {}/{} loss {:.3}",
            o.protocol.as_str(),
            o.completed,
            o.attempted,
            o.loss()
        );
    }
    println!("{}", log_path.display());
    Ok(())
}

fn targets_toml(mqtt: &str, http: &str, https: &str, ca: &Path) -> String {
    let mut blocks = Vec::new();
    let mut m = ProbeSpec::new(ProtocolId::Mqtt, mqtt);
    m.scheme = Some("kem-l1".into());
    blocks.push(m);
    let mut h = ProbeSpec::new(ProtocolId::Http, http);
    h.scheme = Some("kem-l3".into());
    blocks.push(h);
    let mut s = ProbeSpec::new(ProtocolId::Https, https);
    s.scheme = Some("kem-l5".into());
    s.verify = VerifyMode::TrustPinned;
    s.ca_file = Some(ca.to_path_buf());
    s.server_name = Some("localhost".into());
    blocks.push(s);
    let cfg = Config {
        probe: blocks,
        ..Config::default()
    };
    let mut out = String::new();
    let _ = writeln!(out, "# probe config for the loopback test targets");
    out.push_str(&cfg.to_toml());
    out
}

#[allow(clippy::too_many_arguments)]
async fn serve(
    output_dir: &Path,
    mqtt_addr: &str,
    http_addr: &str,
    https_addr: &str,
    drop_ratio: f64,
    seed: u64,
    target: TargetConfig,
) -> Result<(), Failure> {
    if !(0.0..=1.0).contains(&drop_ratio) {
        return Err(Failure::new(USAGE, "--drop-ratio must be in [0, 1]"));
    }
    create_dir(output_dir)?;
    let cert = qers_probe::tls::self_signed()?;
    let ca = std::path::absolute(output_dir.join("cert.pem"))
        .map_err(|e| Failure::new(WRITE, e.to_string()))?;
    write_text(&ca, &cert.cert_pem)?;
    let bind =
        |what: &str, e: std::io::Error| Failure::new(PROBE, format!("cannot bind {what}: {e}"));
    let broker = start_broker(mqtt_addr, BrokerConfig { drop_ratio, seed })
        .await
        .map_err(|e| bind(mqtt_addr, e))?;
    let http = start_http_target(http_addr, target).await?;
    let https = start_https_target(https_addr, target, &cert).await?;
    let (m, h, s) = (
        broker.local_addr().to_string(),
        http.local_addr().to_string(),
        https.local_addr().to_string(),
    );
    write_text(
        &output_dir.join("targets.toml"),
        &targets_toml(&m, &h, &s, &ca),
    )?;
    println!("mqtt  {m}");
    println!("http  {h}");
    println!("https {s}");
    println!("certificate {}", ca.display());
    tokio::signal::ctrl_c()
        .await
        .map_err(|e| Failure::new(PROBE, e.to_string()))?;
    Ok(())
}

async fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::ValidateConfig => {
            println!("config OK (hash {})", cfg.hash());
            Ok(())
        }
        Command::Simulate {
            output_dir,
            scenario,
            seed,
        } => simulate(&cfg, &output_dir, &scenario, seed),
        Command::Score {
            input,
            output_dir,
            scenario,
            format,
        } => score(&cfg, &input, &output_dir, &scenario, &format),
        Command::Probe {
            output_dir,
            scenario,
            run_id,
        } => probe(&cfg, &output_dir, &scenario, run_id).await,
        Command::ServeTestTargets {
            output_dir,
            mqtt_addr,
            http_addr,
            https_addr,
            drop_ratio,
            seed,
            response_delay_ms,
            handshake_delay_ms,
        } => {
            let target = TargetConfig {
                response_delay_ms,
                handshake_delay_ms,
            };
            serve(
                &output_dir,
                &mqtt_addr,
                &http_addr,
                &https_addr,
                drop_ratio,
                seed,
                target,
            )
            .await
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .init();
    let cli = Cli::parse();
    match run(cli).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
