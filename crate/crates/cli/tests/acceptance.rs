//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use qers_core::config::{Config, ProbeSpec, VerifyMode};
use qers_core::engine::{
    score_basic, score_fusion, score_tuned, FusionMix, NormalizedMetrics, PerformanceWeights,
    SecurityWeights, WeightConfig,
};
use qers_core::normalize::{derive_bounds, normalize, NormalizationBounds};
use qers_core::report::{emit_report, ingest_csv, write_log, ReportFormat, RunHeader, ScoreReport};
use qers_core::{
    classify, evaluate_run, generate_scenario, validate_sample, validate_weights, Error,
    MetricKind, MetricSeries, ProtocolId, QersResult, ReadinessBand,
};
use qers_probe::mqtt::{start_broker, BrokerConfig};
use qers_probe::targets::{start_http_target, start_https_target, TargetConfig};
use qers_probe::tls::self_signed;
use qers_probe::{run_probe, ProbeContext, ProbeError, ProbeOutcome, RunClock};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

// ---- 1: formula oracle ----------------------------------------------------

fn simplex<const N: usize>(rng: &mut ChaCha8Rng) -> [f64; N] {
    let mut w = [0.0; N];
    for v in w.iter_mut() {
        *v = rng.random::<f64>();
    }
    let total: f64 = w.iter().sum();
    w.map(|v| v / total)
}

fn clamp100(v: f64) -> f64 {
    v.max(0.0).min(100.0)
}

fn formula_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_251_016);
    let n = 10_000;
    let mut worst = 0.0f64;
    for _ in 0..n {
        // tuned: alpha..eta; perf: L J Ploss E C; sec: K R Pr Co; mix: af bf
        let t: [f64; 7] = simplex(&mut rng);
        let p: [f64; 5] = simplex(&mut rng);
        let s: [f64; 4] = simplex(&mut rng);
        let m: [f64; 2] = simplex(&mut rng);
        let x: [f64; 9] = std::array::from_fn(|_| rng.random_range(0.0..=100.0));
        let [l, j, ploss, c, e, r, k, co, pr] = x;
        let basic = clamp100(100.0 - (t[0] * l + t[1] * co + t[2] * ploss));
        let tuned = clamp100(
            100.0 - (t[0] * l + t[1] * co + t[2] * ploss + t[3] * c + t[5] * e + t[6] * k)
                + t[4] * r,
        );
        let perf = p[0] * l + p[1] * j + p[2] * ploss + p[3] * e + p[4] * c;
        let sec = s[0] * k + s[1] * r + s[2] * pr + s[3] * co;
        let fusion = clamp100(m[0] * (100.0 - perf) + m[1] * sec);

        let w = WeightConfig {
            alpha: t[0],
            beta: t[1],
            gamma: t[2],
            delta: t[3],
            epsilon: t[4],
            zeta: t[5],
            eta: t[6],
            fusion_perf: PerformanceWeights {
                latency: p[0],
                jitter: p[1],
                packet_loss: p[2],
                energy: p[3],
                cpu_utilization: p[4],
            },
            fusion_sec: SecurityWeights {
                key_size: s[0],
                rssi: s[1],
                proven_resistance: s[2],
                crypto_overhead: s[3],
            },
            fusion_mix: FusionMix {
                alpha_f: m[0],
                beta_f: m[1],
            },
        };
        validate_weights(&w).map_err(|e| e.to_string())?;
        let x = NormalizedMetrics::new()
            .with(MetricKind::Latency, l)
            .with(MetricKind::Jitter, j)
            .with(MetricKind::PacketLoss, ploss)
            .with(MetricKind::CpuUtilization, c)
            .with(MetricKind::Energy, e)
            .with(MetricKind::Rssi, r)
            .with(MetricKind::KeySize, k)
            .with(MetricKind::CryptoOverhead, co)
            .with(MetricKind::ProvenResistance, pr);
        for (got, want) in [
            (score_basic(&x, &w).map_err(|e| e.to_string())?, basic),
            (score_tuned(&x, &w).map_err(|e| e.to_string())?, tuned),
            (score_fusion(&x, &w).map_err(|e| e.to_string())?, fusion),
        ] {
            worst = worst.max((got - want).abs());
        }
    }
    let elapsed = start.elapsed();
    ensure!(worst <= 1e-9, "max deviation {worst:e}");
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!(
        "{n} cases, max deviation {worst:.1e}, {:.2} s",
        elapsed.as_secs_f64()
    ))
}

// ---- 2: baseline weights ------------------------------------------------

fn baseline_weights() -> Check {
    let base = WeightConfig::default();
    let table = [0.25, 0.15, 0.15, 0.15, 0.10, 0.10, 0.10];
    let got = [
        base.alpha,
        base.beta,
        base.gamma,
        base.delta,
        base.epsilon,
        base.zeta,
        base.eta,
    ];
    ensure!(got == table, "default weights {got:?}");
    validate_weights(&base).map_err(|e| format!("baseline rejected: {e}"))?;
    let mut rejected = 0;
    for i in 0..7 {
        for delta in [0.05, -0.05] {
            let mut w = base;
            let slot = match i {
                0 => &mut w.alpha,
                1 => &mut w.beta,
                2 => &mut w.gamma,
                3 => &mut w.delta,
                4 => &mut w.epsilon,
                5 => &mut w.zeta,
                _ => &mut w.eta,
            };
            *slot += delta;
            match validate_weights(&w) {
                Err(Error::WeightSumViolation { constraint, .. })
                    if constraint.contains("alpha..eta") =>
                {
                    rejected += 1
                }
                other => return Err(format!("weight {i} {delta:+}: {other:?}")),
            }
        }
    }
    Ok(format!(
        "baseline accepted, {rejected}/14 perturbations rejected by name"
    ))
}

// ---- 3: band classification ---------------------------------------------

fn band_classification() -> Check {
    use ReadinessBand::*;
    let cases = [
        (61.39, Moderate),
        (25.44, Unusable),
        (11.06, Unusable),
        (54.65, Moderate),
        (50.87, Moderate),
        (24.22, Unusable),
        (10.75, Unusable),
        (54.69, Moderate),
    ];
    for (v, want) in cases {
        let got = classify(v).map_err(|e| e.to_string())?;
        ensure!(got == want, "{v} -> {got:?}, expected {want:?}");
    }
    Ok("8/8 values in the expected band".into())
}

// ---- 4, 5: simulated orderings -------------------------------------------

fn score_preset(label: &str) -> Result<BTreeMap<ProtocolId, QersResult>, String> {
    let cfg = Config::default();
    let spec = cfg.scenario(label).ok_or("missing preset")?;
    let catalog = cfg.catalog().map_err(|e| e.to_string())?;
    let data = generate_scenario(&spec, &catalog, &cfg.overhead, &cfg.energy)
        .map_err(|e| e.to_string())?;
    let results = evaluate_run(&data, &cfg.weights, &cfg.bounds).map_err(|e| e.to_string())?;
    Ok(results.into_iter().map(|r| (r.protocol, r)).collect())
}

fn ordering() -> Check {
    use ProtocolId::*;
    let mut notes = Vec::new();
    for label in ["close", "far"] {
        let start = Instant::now();
        let r = score_preset(label)?;
        let elapsed = start.elapsed();
        ensure!(
            elapsed < Duration::from_secs(30),
            "{label} took {elapsed:?}"
        );
        ensure!(
            r[&Mqtt].basic > r[&Http].basic && r[&Http].basic > r[&Https].basic,
            "{label} basic {:.2}/{:.2}/{:.2}",
            r[&Mqtt].basic,
            r[&Http].basic,
            r[&Https].basic
        );
        ensure!(
            r[&Mqtt].tuned > r[&Http].tuned && r[&Http].tuned > r[&Https].tuned,
            "{label} tuned {:.2}/{:.2}/{:.2}",
            r[&Mqtt].tuned,
            r[&Http].tuned,
            r[&Https].tuned
        );
        ensure!(
            r[&Https].fusion > r[&Http].fusion && r[&Https].fusion > r[&Mqtt].fusion,
            "{label} fusion {:.2}/{:.2}/{:.2}",
            r[&Mqtt].fusion,
            r[&Http].fusion,
            r[&Https].fusion
        );
        notes.push(format!("{label} {:.2} s", elapsed.as_secs_f64()));
    }
    Ok(notes.join(", "))
}

fn distance_degradation() -> Check {
    let close = score_preset("close")?;
    let far = score_preset("far")?;
    let mut notes = Vec::new();
    for p in ProtocolId::ALL {
        let (c, f) = (close[&p].basic, far[&p].basic);
        ensure!(f < c, "{p}: far {f:.2} is not below close {c:.2}");
        notes.push(format!("{p} {c:.2}->{f:.2}"));
    }
    Ok(notes.join(", "))
}

// ---- 6: normalization properties -----------------------------------------

fn normalization_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 10_000;
    let kind = MetricKind::Latency;
    let series = |vals: &[f64]| {
        MetricSeries::from_points(
            ProtocolId::Http,
            "fuzz".into(),
            kind,
            vals.iter().enumerate().map(|(i, v)| (i as f64, *v)),
        )
    };
    for i in 0..n {
        let lo: f64 = rng.random_range(-1e6..1e6);
        let hi = lo + rng.random_range(0.0..1e6);
        let b = NormalizationBounds::new(kind, lo, hi).map_err(|e| e.to_string())?;
        let x: f64 = rng.random_range(-2e6..2e6);
        let y = x + rng.random_range(0.0..1e5);
        let (nx, ny) = (normalize(x, &b), normalize(y, &b));
        ensure!((0.0..=100.0).contains(&nx), "case {i}: range {nx}");
        ensure!(nx <= ny, "case {i}: monotonicity {x}->{nx}, {y}->{ny}");

        let len = rng.random_range(1..40);
        let vals: Vec<f64> = (0..len).map(|_| rng.random_range(-1e3..1e3)).collect();
        let a: f64 = rng.random_range(0.01..100.0);
        let c: f64 = rng.random_range(-1e3..1e3);
        let moved: Vec<f64> = vals.iter().map(|v| a * v + c).collect();
        let (b1, b2) = (
            derive_bounds(&series(&vals)).map_err(|e| e.to_string())?,
            derive_bounds(&series(&moved)).map_err(|e| e.to_string())?,
        );
        for (v, m) in vals.iter().zip(&moved) {
            let (u, w) = (normalize(*v, &b1), normalize(*m, &b2));
            ensure!((u - w).abs() <= 1e-9, "case {i}: affine {u} vs {w}");
        }

        let d: f64 = rng.random_range(-1e6..1e6);
        let flat = NormalizationBounds::new(kind, d, d).map_err(|e| e.to_string())?;
        ensure!(
            normalize(x, &flat) == 0.0,
            "case {i}: degenerate bounds gave non-zero"
        );
    }
    Ok(format!("{n} fuzz cases per property"))
}

// ---- 7: probes against loopback servers ---------------------------------

fn check_outcome(o: &ProbeOutcome, n: u32) -> Result<(), String> {
    ensure!(
        o.completed == n && o.loss() == 0.0,
        "{}: {}/{} completed",
        o.protocol,
        o.completed,
        n
    );
    ensure!(
        o.series(MetricKind::Latency).map(|s| s.len()) == Some(n as usize),
        "{}: latency sample count",
        o.protocol
    );
    for s in &o.series {
        for sample in &s.samples {
            let v = validate_sample(sample);
            ensure!(
                v.is_empty(),
                "{}: invalid sample {sample:?}: {v:?}",
                o.protocol
            );
        }
    }
    Ok(())
}

async fn probe_integration() -> Check {
    let start = Instant::now();
    let n = 50;
    let cfg = Config::default();
    let ctx = ProbeContext {
        scenario: "desk".into(),
        catalog: cfg.catalog().map_err(|e| e.to_string())?,
        overhead: cfg.overhead,
        clock: RunClock::start(),
    };
    let cert = self_signed().map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ca = dir.path().join("cert.pem");
    std::fs::write(&ca, &cert.cert_pem).map_err(|e| e.to_string())?;
    let broker = start_broker("127.0.0.1:0", BrokerConfig::default())
        .await
        .map_err(|e| e.to_string())?;
    let http = start_http_target("127.0.0.1:0", TargetConfig::default())
        .await
        .map_err(|e| e.to_string())?;
    let handshake_delay = 25;
    let https = start_https_target(
        "127.0.0.1:0",
        TargetConfig {
            handshake_delay_ms: handshake_delay,
            ..Default::default()
        },
        &cert,
    )
    .await
    .map_err(|e| e.to_string())?;

    let mk = |protocol, addr: std::net::SocketAddr| {
        let mut s = ProbeSpec::new(protocol, addr.to_string());
        s.count = n;
        s.interval_ms = 10;
        s
    };
    let mqtt = mk(ProtocolId::Mqtt, broker.local_addr());
    let plain = mk(ProtocolId::Http, http.local_addr());
    let mut tls = mk(ProtocolId::Https, https.local_addr());
    tls.target = format!("localhost:{}", https.local_addr().port());
    tls.scheme = Some("kem-l5".into());
    tls.verify = VerifyMode::TrustPinned;
    tls.ca_file = Some(ca);

    let (a, b, c) = tokio::join!(
        run_probe(&mqtt, &ctx),
        run_probe(&plain, &ctx),
        run_probe(&tls, &ctx)
    );
    let (a, b, c) = (
        a.map_err(|e| e.to_string())?,
        b.map_err(|e| e.to_string())?,
        c.map_err(|e| e.to_string())?,
    );
    for o in [&a, &b, &c] {
        check_outcome(o, n)?;
    }
    ensure!(
        c.handshakes.len() == n as usize,
        "HTTPS recorded {} handshakes",
        c.handshakes.len()
    );
    ensure!(
        https.handshakes() == n as u64,
        "server counted {} handshakes",
        https.handshakes()
    );
    ensure!(
        c.handshakes
            .iter()
            .all(|h| h.duration_ms >= handshake_delay as f64),
        "handshake shorter than injected delay"
    );
    let lat = c.series(MetricKind::Latency).unwrap();
    let max_lat = lat.values().fold(0.0, f64::max);
    ensure!(
        max_lat < handshake_delay as f64,
        "request latency {max_lat} ms includes handshake time"
    );

    let mut strict = tls.clone();
    strict.verify = VerifyMode::Strict;
    strict.ca_file = None;
    strict.count = 1;
    match run_probe(&strict, &ctx).await {
        Err(ProbeError::CertificateRejected { .. }) => {}
        other => return Err(format!("strict mode: {:?}", other.map(|o| o.completed))),
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "3 x {n} requests, loss 0, strict rejected, {:.2} s",
        elapsed.as_secs_f64()
    ))
}

// ---- 8: pipeline determinism ---------------------------------------------

fn pipeline_once(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let cfg = Config::default();
    let catalog = cfg.catalog().map_err(|e| e.to_string())?;
    let mut data = Vec::new();
    for label in ["close", "far"] {
        let spec = cfg.scenario(label).ok_or("missing preset")?;
        let series = generate_scenario(&spec, &catalog, &cfg.overhead, &cfg.energy)
            .map_err(|e| e.to_string())?;
        let path = dir.join(format!("{label}.csv"));
        let header = RunHeader::new(format!("sim-{label}"), label, cfg.hash());
        write_log(&path, &header, &series).map_err(|e| e.to_string())?;
        let log = ingest_csv(&path).map_err(|e| e.to_string())?;
        ensure!(
            log.violations.is_empty(),
            "ingest violations {:?}",
            log.violations
        );
        data.extend(log.series);
    }
    let results = evaluate_run(&data, &cfg.weights, &cfg.bounds).map_err(|e| e.to_string())?;
    let report = ScoreReport::new("golden", cfg.hash(), results);
    let files = emit_report(&report, dir, &[ReportFormat::Csv, ReportFormat::Json])
        .map_err(|e| e.to_string())?;
    files
        .iter()
        .map(|f| {
            let name = f.file_name().unwrap().to_string_lossy().into_owned();
            std::fs::read(f)
                .map(|b| (name, b))
                .map_err(|e| e.to_string())
        })
        .collect()
}

fn pipeline_determinism() -> Check {
    let (d1, d2) = (
        tempfile::tempdir().map_err(|e| e.to_string())?,
        tempfile::tempdir().map_err(|e| e.to_string())?,
    );
    let first = pipeline_once(d1.path())?;
    let second = pipeline_once(d2.path())?;
    ensure!(first.len() == 6, "{} report files", first.len());
    for ((n1, b1), (n2, b2)) in first.iter().zip(&second) {
        ensure!(n1 == n2 && b1 == b2, "{n1} differs between runs");
    }
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/scores.csv");
    let golden =
        std::fs::read(&golden_path).map_err(|e| format!("{}: {e}", golden_path.display()))?;
    let scores = &first
        .iter()
        .find(|(n, _)| n == "scores.csv")
        .ok_or("no scores.csv")?
        .1;
    ensure!(*scores == golden, "scores.csv differs from the golden file");
    Ok("6 report files byte-identical across runs, scores.csv matches golden".into())
}

fn main() {
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    let criteria: Vec<Criterion> = vec![
        ("formula oracle equivalence", Box::new(formula_oracle)),
        ("baseline weight acceptance", Box::new(baseline_weights)),
        (
            "band classification of reference values",
            Box::new(band_classification),
        ),
        (
            "protocol ordering on close and far presets",
            Box::new(ordering),
        ),
        ("distance degradation", Box::new(distance_degradation)),
        (
            "normalization properties",
            Box::new(normalization_properties),
        ),
        (
            "probe integration at desk scale",
            Box::new(|| runtime.block_on(probe_integration())),
        ),
        ("pipeline determinism", Box::new(pipeline_determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
