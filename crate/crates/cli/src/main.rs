mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ecseq::adversary::{self, positional_family_search, truncated_search, PositionalDoc, PositionalFamily};
use ecseq::avoider::{build_avoiding_string, scan_violations, AvoidError, AvoidanceInstance};
use ecseq::bits::{encode_bit_file, read_bit_file};
use ecseq::dist::DistributionDoc;
use ecseq::forbidden::{
    self, interval_schedule, multi_level_family, schedule_union, two_level_family, FamilyCertificate, FamilyDoc,
    LayeredParams, LevelFamily,
};
use ecseq::proxy::window_profile;
use ecseq::spreader::{choose_m0, m0_certificate, recover_prefix, spread, Allocation, AllocationExport, Tau, WeightSeries};
use ecseq::{BitFileFormat, BitString, ExactProb, FiniteDistribution, RandomSource, Ratio};
use num_bigint::BigUint;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use report::{bad, failed, Failure, RunReport};

/// Work (windows times window length) below which a level is checked exhaustively.
const EXHAUSTIVE_WORK: u64 = 1 << 25;
/// Violations listed in a report before truncating.
const MAX_LISTED: usize = 50;

#[derive(Parser)]
#[command(name = "ecseq", version, about = "Spread bits, build forbidden-substring families, and check them")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Artifact path (bits, family or allocation, depending on the command).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Encoding for bit artifacts.
    #[arg(long, global = true, value_enum, default_value_t = Format::Ascii)]
    format: Format,
    /// Target probability as `num/den`.
    #[arg(long, global = true, default_value = "1/4")]
    epsilon: String,
    /// Density exponent as `num/den`.
    #[arg(long, global = true, default_value = "3/5")]
    alpha: String,
    /// Output length in bits.
    #[arg(long, global = true)]
    length: Option<u64>,
    /// Resample budget for randomized searches.
    #[arg(long, global = true, default_value_t = 100_000)]
    budget: u64,
    /// Also write the run report to this path.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Ascii,
    Packed,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Spread random source bits over `--length` positions and export the allocation.
    Spread {
        #[arg(long, default_value = "inverse-triangular")]
        preset: String,
        /// Override the certified m0; rejected when the budget certificate fails there.
        #[arg(long)]
        m0: Option<u32>,
        #[arg(long)]
        max_level: Option<u32>,
        /// Allocation export path; defaults to `<out>.alloc.json`.
        #[arg(long)]
        alloc: Option<PathBuf>,
    },
    /// Check window coverage and prefix recovery for a spread output.
    CheckWindows {
        #[arg(long)]
        bits: PathBuf,
        #[arg(long)]
        alloc: PathBuf,
        #[arg(long)]
        m_max: u32,
        /// Windows sampled per level when exhaustive checking is too costly.
        #[arg(long, default_value_t = 1000)]
        samples: u64,
    },
    /// Build a two-level family, or a layered one with `--lengths`.
    Family {
        /// Comma-separated lengths, each dividing the next.
        #[arg(long, value_delimiter = ',')]
        lengths: Vec<usize>,
        /// Comma-separated block thresholds, one fewer than the lengths.
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<u64>,
        /// Smallest low length the two-level search may pick.
        #[arg(long, default_value_t = 1)]
        n_min: usize,
    },
    /// Search a positional family against a finite distribution.
    Adversary {
        /// Distribution JSON: `{"length", "masses": {"<bits>": "num/den"}, "deficit"}`.
        #[arg(long, conflicts_with = "uniform", required_unless_present = "uniform")]
        dist: Option<PathBuf>,
        /// Use the uniform distribution on strings of this length.
        #[arg(long)]
        uniform: Option<usize>,
        #[arg(long)]
        n: usize,
        /// Require the deficit to be at most epsilon/2 and report the enumerated part.
        #[arg(long)]
        truncated: bool,
    },
    /// Build a string of `--length` bits avoiding an explicit family.
    Avoid {
        /// A family document, or a report whose results carry one.
        #[arg(long)]
        family: PathBuf,
    },
    /// Proxy complexity of sliding windows.
    Profile {
        #[arg(long)]
        bits: PathBuf,
        #[arg(long)]
        window: usize,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Re-derive every certificate in a report.
    Verify { report_path: PathBuf },
    /// Disjoint length intervals with targets 2^-i against uniform distributions.
    Schedule {
        #[arg(long, default_value_t = 3)]
        count: u32,
        #[arg(long, default_value_t = 2)]
        first_length: usize,
        #[arg(long, default_value_t = 20)]
        max_length: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let outcome = run(&cli, started);
    let report_path = cli.global.report.as_deref();
    match outcome {
        Ok(report) => match emit(&report, report_path) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("ecseq: {e}");
                ExitCode::from(e.code())
            }
        },
        Err(e) => {
            if let Some(report) = e.report() {
                let _ = emit(report, report_path);
            }
            eprintln!("ecseq: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn emit(report: &RunReport, path: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(report).map_err(bad)?;
    println!("{text}");
    if let Some(path) = path {
        write_file(path, text.as_bytes())?;
    }
    Ok(())
}

fn run(cli: &Cli, started: Instant) -> Result<RunReport, Failure> {
    let g = &cli.global;
    let (name, outcome) = match &cli.command {
        Command::Spread {
            preset,
            m0,
            max_level,
            alloc,
        } => ("spread", cmd_spread(g, preset, *m0, *max_level, alloc.as_deref())),
        Command::CheckWindows {
            bits,
            alloc,
            m_max,
            samples,
        } => ("check-windows", cmd_check_windows(g, bits, alloc, *m_max, *samples)),
        Command::Family {
            lengths,
            thresholds,
            n_min,
        } => ("family", cmd_family(g, lengths, thresholds, *n_min)),
        Command::Adversary {
            dist,
            uniform,
            n,
            truncated,
        } => ("adversary", cmd_adversary(g, dist.as_deref(), *uniform, *n, *truncated)),
        Command::Avoid { family } => ("avoid", cmd_avoid(g, family)),
        Command::Profile {
            bits,
            window,
            stride,
            csv,
        } => ("profile", cmd_profile(bits, *window, *stride, csv.as_deref())),
        Command::Verify { report_path } => ("verify", cmd_verify(report_path)),
        Command::Schedule {
            count,
            first_length,
            max_length,
        } => ("schedule", cmd_schedule(g, *count, *first_length, *max_length)),
    };
    let stamp = |r: &mut RunReport| {
        r.command = name.into();
        r.seed = g.seed;
        r.wall_time_ms = started.elapsed().as_millis();
    };
    match outcome {
        Ok(mut report) => {
            stamp(&mut report);
            Ok(report)
        }
        Err(Failure::Verification(msg, Some(mut report))) => {
            stamp(&mut report);
            Err(Failure::Verification(msg, Some(report)))
        }
        Err(Failure::Budget(msg, Some(mut report))) => {
            stamp(&mut report);
            Err(Failure::Budget(msg, Some(report)))
        }
        Err(e) => Err(e),
    }
}

/// Fields filled by a command; `run` stamps name, seed and time.
fn partial(params: Value, results: Value, certificates: Value) -> RunReport {
    RunReport {
        command: String::new(),
        seed: 0,
        params,
        results,
        certificates,
        warnings: Vec::new(),
        wall_time_ms: 0,
    }
}

fn ratio(text: &str, what: &str) -> Result<Ratio, Failure> {
    text.parse().map_err(|e| bad(format!("{what} {text:?}: {e}")))
}

fn prob(text: &str, what: &str) -> Result<ExactProb, Failure> {
    text.parse().map_err(|e| bad(format!("{what} {text:?}: {e}")))
}

fn read_file(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| bad(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, data: &[u8]) -> Result<(), Failure> {
    fs::write(path, data).map_err(|e| bad(format!("{}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_slice(&read_file(path)?).map_err(|e| bad(format!("{}: {e}", path.display())))
}

fn from_value<T: DeserializeOwned>(v: &Value, what: &str) -> Result<T, Failure> {
    T::deserialize(v).map_err(|e| failed(format!("{what}: {e}")))
}

#[derive(Serialize, Deserialize)]
struct JsonBits {
    length: usize,
    hex: String,
}

fn encode_bits(bits: &BitString, format: Format) -> Vec<u8> {
    match format {
        Format::Ascii => encode_bit_file(bits, BitFileFormat::Ascii),
        Format::Packed => encode_bit_file(bits, BitFileFormat::Packed),
        Format::Json => {
            let doc = JsonBits {
                length: bits.len(),
                hex: bits.to_hex(),
            };
            serde_json::to_vec(&doc).expect("plain struct")
        }
    }
}

/// Reads any of the three bit encodings.
fn read_bits(path: &Path) -> Result<BitString, Failure> {
    let data = read_file(path)?;
    if data.iter().find(|c| !c.is_ascii_whitespace()) == Some(&b'{') {
        let doc: JsonBits = serde_json::from_slice(&data).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        return BitString::from_hex(&doc.hex, doc.length).map_err(|e| bad(format!("{}: {e}", path.display())));
    }
    read_bit_file(&data).map_err(|e| bad(format!("{}: {e}", path.display())))
}

fn cmd_spread(
    g: &Global,
    preset: &str,
    m0: Option<u32>,
    max_level: Option<u32>,
    alloc_path: Option<&Path>,
) -> Result<RunReport, Failure> {
    let length = g.length.ok_or_else(|| bad("spread needs --length"))?;
    let out = g.out.as_deref().ok_or_else(|| bad("spread needs --out"))?;
    let weights: WeightSeries = preset.parse().map_err(bad)?;
    let certified = choose_m0(&weights);
    let m0 = m0.unwrap_or(certified);
    let max_level = max_level.unwrap_or(m0.max(12));
    let alloc = Allocation::plan(&weights, m0, max_level, length).map_err(bad)?;
    let (omega, source) = spread(&alloc, Tau::Random(RandomSource::new(g.seed)), length).map_err(bad)?;

    let alloc_path = alloc_path.map_or_else(|| out.with_extension("alloc.json"), Path::to_path_buf);
    let export = alloc.to_export();
    write_file(out, &encode_bits(&omega, g.format))?;
    write_file(&alloc_path, &serde_json::to_vec_pretty(&export).map_err(bad)?)?;

    let params = json!({
        "preset": weights.to_string(),
        "m0": m0,
        "certified_m0": certified,
        "max_level": max_level,
        "length": length,
        "format": format_name(g.format),
    });
    let results = json!({
        "out": out.display().to_string(),
        "alloc": alloc_path.display().to_string(),
        "source_bits": source.len(),
        "top_level": alloc.top_level(),
        "prefix_lengths": (m0..=max_level).map(|m| json!({"m": m, "prefix": alloc.prefix_len(m)})).collect::<Vec<_>>(),
        "allocation": export,
    });
    let certificates = json!({
        "m0_certificate": m0_certificate(&weights, m0).to_string(),
        "budget": alloc.budget().to_string(),
    });
    Ok(partial(params, results, certificates))
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Ascii => "ascii",
        Format::Packed => "packed",
        Format::Json => "json",
    }
}

fn cmd_check_windows(g: &Global, bits_path: &Path, alloc_path: &Path, m_max: u32, samples: u64) -> Result<RunReport, Failure> {
    let bits = read_bits(bits_path)?;
    let export: AllocationExport = read_json(alloc_path)?;
    let alloc = Allocation::from_export(&export).map_err(bad)?;
    let len = bits.len() as u64;
    let table = alloc.index_table(len).map_err(bad)?;
    let mut warnings = Vec::new();
    if m_max < alloc.m0() {
        warnings.push(format!("m-max {m_max} is below m0 = {}; nothing to check", alloc.m0()));
    }
    let top = m_max.min(alloc.max_level());
    if m_max > top && m_max >= alloc.m0() {
        warnings.push(format!("levels above {top} are not fully materialized; checking up to {top}"));
    }

    let mut stream = RandomSource::new(g.seed).stream(2);
    let mut levels = Vec::new();
    let mut violations = Vec::new();
    let mut violation_count = 0u64;
    for m in alloc.m0()..=top {
        let width = 1u64 << m;
        if width > len {
            warnings.push(format!("level {m}: windows of {width} bits exceed the {len}-bit input"));
            continue;
        }
        let windows = len - width + 1;
        let exhaustive = m == alloc.m0() || windows.saturating_mul(width) <= EXHAUSTIVE_WORK;
        let ks: Vec<u64> = if exhaustive {
            (0..windows).collect()
        } else {
            (0..samples).map(|_| stream.below(windows)).collect()
        };
        // Windows are compared against the prefix most of them recover.
        let mut recovered: Vec<(u64, Result<BitString, String>)> = Vec::with_capacity(ks.len());
        let mut tally: BTreeMap<BitString, u64> = BTreeMap::new();
        for &k in &ks {
            let got = alloc.check_window(&table, k, m).map_err(|e| e.to_string()).and_then(|()| {
                let w = bits.window(k as usize, width as usize).expect("window inside input");
                recover_prefix(&alloc, &w, k, m).map_err(|e| e.to_string())
            });
            if let Ok(prefix) = &got {
                *tally.entry(prefix.clone()).or_default() += 1;
            }
            recovered.push((k, got));
        }
        let majority = tally.into_iter().max_by_key(|(_, c)| *c).map(|(p, _)| p);
        let mut level_bad = 0u64;
        for (k, got) in recovered {
            let problem = match got {
                Err(reason) => Some(reason),
                Ok(prefix) => (Some(&prefix) != majority.as_ref()).then(|| "recovered prefix differs from the majority".to_string()),
            };
            if let Some(reason) = problem {
                level_bad += 1;
                if violations.len() < MAX_LISTED {
                    violations.push(json!({"k": k, "m": m, "reason": reason}));
                }
            }
        }
        violation_count += level_bad;
        levels.push(json!({
            "m": m,
            "mode": if exhaustive { "exhaustive" } else { "sampled" },
            "windows_checked": ks.len(),
            "violations": level_bad,
            "prefix_len": alloc.prefix_len(m),
        }));
    }

    let params = json!({
        "bits": bits_path.display().to_string(),
        "alloc": alloc_path.display().to_string(),
        "m_max": m_max,
        "samples": samples,
    });
    let results = json!({"length": len, "levels": levels, "violation_count": violation_count, "violations": violations});
    let mut report = partial(params, results, Value::Null);
    report.warnings = warnings;
    if violation_count > 0 {
        let msg = format!("{violation_count} windows failed; first at (k, m) = ({}, {})", violations[0]["k"], violations[0]["m"]);
        return Err(Failure::Verification(msg, Some(Box::new(report))));
    }
    Ok(report)
}

fn cmd_family(g: &Global, lengths: &[usize], thresholds: &[u64], n_min: usize) -> Result<RunReport, Failure> {
    let alpha = ratio(&g.alpha, "alpha")?;
    let epsilon = prob(&g.epsilon, "epsilon")?;
    let rs = RandomSource::new(g.seed);
    let built = if lengths.is_empty() {
        if !thresholds.is_empty() {
            return Err(bad("--thresholds needs --lengths"));
        }
        two_level_family(&alpha, &epsilon, n_min, &rs).map_err(bad)?
    } else {
        let params = if thresholds.is_empty() {
            LayeredParams::with_default_thresholds(alpha.clone(), epsilon.clone(), lengths.to_vec())
        } else {
            LayeredParams::new(
                alpha.clone(),
                epsilon.clone(),
                lengths.to_vec(),
                thresholds.iter().map(|&t| BigUint::from(t)).collect(),
            )
        }
        .map_err(bad)?;
        multi_level_family(&params, &rs).map_err(bad)?
    };
    let doc = built.family.to_doc();
    if let Some(out) = &g.out {
        write_file(out, &serde_json::to_vec_pretty(&doc).map_err(bad)?)?;
    }
    let params = json!({
        "alpha": alpha.to_string(),
        "epsilon": epsilon.to_string(),
        "lengths": lengths,
        "thresholds": thresholds,
        "n_min": n_min,
    });
    let results = json!({
        "lengths": built.certificate.lengths,
        "meets_epsilon": built.certificate.meets_epsilon,
        "family": doc,
    });
    let certificates = json!({"family": built.certificate});
    let mut report = partial(params, results, certificates);
    if !built.certificate.meets_epsilon {
        report
            .warnings
            .push(format!("worst-case miss {} is not below epsilon", built.certificate.worst_case_miss));
    }
    Ok(report)
}

fn cmd_adversary(
    g: &Global,
    dist: Option<&Path>,
    uniform: Option<usize>,
    n: usize,
    truncated: bool,
) -> Result<RunReport, Failure> {
    let epsilon = prob(&g.epsilon, "epsilon")?;
    let p = match (dist, uniform) {
        (Some(path), None) => FiniteDistribution::from_json(&read_json::<DistributionDoc>(path)?).map_err(bad)?,
        (None, Some(len)) => FiniteDistribution::uniform(len).map_err(bad)?,
        _ => return Err(bad("give exactly one of --dist and --uniform")),
    };
    let (family, enumerated) = if truncated {
        let t = truncated_search(&p, n, &epsilon).map_err(bad)?;
        (t.family, Some(t.enumerated))
    } else {
        (positional_family_search(&p, n, &epsilon).map_err(bad)?, None)
    };
    let doc = family.to_doc();
    if let Some(out) = &g.out {
        write_file(out, &serde_json::to_vec_pretty(&doc).map_err(bad)?)?;
    }
    let params = json!({
        "n": n,
        "epsilon": epsilon.to_string(),
        "truncated": truncated,
        "distribution": p.to_json(),
    });
    let results = json!({
        "N": family.positions(),
        "strings": family.strings(),
        "family": doc,
    });
    let mut certificates = json!({"avoid_probability": family.certificate().to_string()});
    if let Some(e) = enumerated {
        certificates["enumerated"] = json!(e.to_string());
        certificates["deficit"] = json!(p.deficit().to_string());
    }
    Ok(partial(params, results, certificates))
}

/// A family document, or the `results.family` of a report.
fn load_family(path: &Path) -> Result<LevelFamily, Failure> {
    let v: Value = read_json(path)?;
    let doc_value = match v.get("results").and_then(|r| r.get("family")) {
        Some(inner) => inner.clone(),
        None => v,
    };
    let doc: FamilyDoc = FamilyDoc::deserialize(&doc_value).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    LevelFamily::from_doc(&doc).map_err(bad)
}

fn cmd_avoid(g: &Global, family_path: &Path) -> Result<RunReport, Failure> {
    let length = g.length.ok_or_else(|| bad("avoid needs --length"))?;
    let family = load_family(family_path)?;
    let doc = family.to_doc();
    let inst = AvoidanceInstance::new(family, length as usize, g.budget, RandomSource::new(g.seed)).map_err(bad)?;
    let params = json!({
        "family_path": family_path.display().to_string(),
        "length": length,
        "budget": g.budget,
        "format": format_name(g.format),
        "family": doc,
    });
    match build_avoiding_string(&inst) {
        Ok(outcome) => {
            if let Some(out) = &g.out {
                write_file(out, &encode_bits(&outcome.bits, g.format))?;
            }
            let results = json!({
                "bits": outcome.bits,
                "resamples": outcome.resamples,
                "initial_violations": outcome.initial_violations,
            });
            let violations = scan_violations(&outcome.bits, inst.family()).len();
            Ok(partial(params, results, json!({"violations": violations})))
        }
        Err(AvoidError::BudgetExhausted { resamples, residual }) => {
            let report = partial(params, json!({"resamples": resamples, "residual_violations": residual}), Value::Null);
            let msg = format!("{resamples} resamples left {residual} violations");
            Err(Failure::Budget(msg, Some(Box::new(report))))
        }
        Err(e) => Err(bad(e)),
    }
}

fn cmd_profile(bits_path: &Path, window: usize, stride: usize, csv: Option<&Path>) -> Result<RunReport, Failure> {
    let bits = read_bits(bits_path)?;
    let profile = window_profile(&bits, window, stride).map_err(bad)?;
    let params = json!({
        "bits": bits_path.display().to_string(),
        "window": window,
        "stride": stride,
        "csv": csv.map(|p| p.display().to_string()),
    });
    let mut results = json!({
        "proxy": profile.proxy,
        "windows": profile.rows.len(),
        "min": profile.min,
        "mean": profile.mean,
        "max": profile.max,
        "argmin": profile.argmin(),
    });
    match csv {
        Some(path) => write_file(path, profile.to_csv().as_bytes())?,
        None => results["rows"] = json!(profile.rows),
    }
    Ok(partial(params, results, Value::Null))
}

fn cmd_schedule(g: &Global, count: u32, first_length: usize, max_length: usize) -> Result<RunReport, Failure> {
    let alpha = ratio(&g.alpha, "alpha")?;
    let schedule = interval_schedule(&alpha, count, first_length, max_length, FiniteDistribution::uniform).map_err(bad)?;
    let union = schedule_union(&schedule, &alpha).map_err(bad)?;
    let union_doc = union.to_doc();
    if let Some(out) = &g.out {
        write_file(out, &serde_json::to_vec_pretty(&union_doc).map_err(bad)?)?;
    }
    let intervals: Vec<Value> = schedule
        .iter()
        .map(|s| {
            json!({
                "index": s.index,
                "start": s.start,
                "end": s.end,
                "epsilon": s.epsilon.to_string(),
                "seed": s.result.seed,
                "averaged": s.result.averaged.to_string(),
                "avoid_probability": s.result.avoid_probability.to_string(),
                "family": s.result.family.to_doc(),
            })
        })
        .collect();
    let params = json!({
        "alpha": alpha.to_string(),
        "count": count,
        "first_length": first_length,
        "max_length": max_length,
        "distribution": "uniform at each interval end",
    });
    let certificates = json!({
        "avoid_probabilities": schedule.iter().map(|s| s.result.avoid_probability.to_string()).collect::<Vec<_>>(),
    });
    Ok(partial(params, json!({"intervals": intervals, "family": union_doc}), certificates))
}

fn cmd_verify(path: &Path) -> Result<RunReport, Failure> {
    let target: RunReport = read_json(path)?;
    let checked = match target.command.as_str() {
        "spread" => verify_spread(&target)?,
        "family" => verify_family(&target)?,
        "adversary" => verify_adversary(&target)?,
        "avoid" => verify_avoid(&target)?,
        "schedule" => verify_schedule(&target)?,
        "check-windows" | "profile" | "verify" => Vec::new(),
        other => return Err(bad(format!("unknown report command {other:?}"))),
    };
    let params = json!({"report": path.display().to_string(), "command": target.command});
    let results = json!({"verified": true, "checked": checked});
    Ok(partial(params, results, Value::Null))
}

fn expect_str<'a>(v: &'a Value, key: &str) -> Result<&'a str, Failure> {
    v.get(key).and_then(Value::as_str).ok_or_else(|| failed(format!("missing {key}")))
}

fn verify_spread(r: &RunReport) -> Result<Vec<String>, Failure> {
    let export: AllocationExport = from_value(&r.results["allocation"], "allocation")?;
    let alloc = Allocation::from_export(&export).map_err(failed)?;
    let weights: WeightSeries = export
        .weights
        .as_deref()
        .ok_or_else(|| failed("allocation has no weight series"))?
        .parse()
        .map_err(failed)?;
    let cert = m0_certificate(&weights, alloc.m0());
    if cert > Ratio::one() || cert.to_string() != expect_str(&r.certificates, "m0_certificate")? {
        return Err(failed(format!("m0 certificate recomputes to {cert}")));
    }
    let budget = alloc.budget();
    if budget > Ratio::one() || budget.to_string() != expect_str(&r.certificates, "budget")? {
        return Err(failed(format!("budget recomputes to {budget}")));
    }
    Ok(vec![format!("m0 certificate {cert} <= 1"), format!("budget {budget} <= 1")])
}

fn verify_family(r: &RunReport) -> Result<Vec<String>, Failure> {
    let cert: FamilyCertificate = from_value(&r.certificates["family"], "family certificate")?;
    cert.verify().map_err(failed)?;
    let doc: FamilyDoc = from_value(&r.results["family"], "family")?;
    let family = LevelFamily::from_doc(&doc).map_err(failed)?;
    if family.alpha() != &cert.alpha {
        return Err(failed("family and certificate disagree on alpha"));
    }
    let lengths: Vec<usize> = family.levels().keys().copied().collect();
    if lengths != cert.lengths {
        return Err(failed("family levels differ from the certified lengths"));
    }
    for level in &cert.levels {
        let held = family.level(level.length).expect("lengths match").cardinality();
        if held != level.cardinality {
            return Err(failed(format!("level {} holds {held}, certificate says {}", level.length, level.cardinality)));
        }
    }
    Ok(vec![
        format!("worst-case miss {}", cert.worst_case_miss),
        format!("meets epsilon: {}", cert.meets_epsilon),
    ])
}

fn verify_adversary(r: &RunReport) -> Result<Vec<String>, Failure> {
    let dist: DistributionDoc = from_value(&r.params["distribution"], "distribution")?;
    let p = FiniteDistribution::from_json(&dist).map_err(failed)?;
    let doc: PositionalDoc = from_value(&r.results["family"], "family")?;
    let family = PositionalFamily::from_doc(&doc).map_err(failed)?;
    let avoid = adversary::avoid_probability(&p, &family).map_err(failed)?;
    if &avoid != family.certificate() || avoid.to_string() != expect_str(&r.certificates, "avoid_probability")? {
        return Err(failed(format!("avoid probability recomputes to {avoid}")));
    }
    if avoid >= *family.epsilon() {
        return Err(failed(format!("avoid probability {avoid} is not below {}", family.epsilon())));
    }
    Ok(vec![format!("avoid probability {avoid} < {}", family.epsilon())])
}

fn verify_avoid(r: &RunReport) -> Result<Vec<String>, Failure> {
    let doc: FamilyDoc = from_value(&r.params["family"], "family")?;
    let family = LevelFamily::from_doc(&doc).map_err(failed)?;
    if r.results.get("bits").is_none() {
        return Err(failed("report records no output string"));
    }
    let bits: BitString = from_value(&r.results["bits"], "bits")?;
    let length = r.params["length"].as_u64().ok_or_else(|| failed("missing length"))?;
    if bits.len() as u64 != length {
        return Err(failed(format!("output has {} bits, expected {length}", bits.len())));
    }
    let violations = scan_violations(&bits, &family);
    if let Some((k, n)) = violations.first() {
        return Err(failed(format!("forbidden string of length {n} at {k}")));
    }
    Ok(vec![format!("{length} bits, no forbidden substring")])
}

fn verify_schedule(r: &RunReport) -> Result<Vec<String>, Failure> {
    let intervals = r.results["intervals"].as_array().ok_or_else(|| failed("missing intervals"))?;
    let mut out = Vec::new();
    let mut last_end = 0usize;
    for iv in intervals {
        let start = iv["start"].as_u64().ok_or_else(|| failed("missing start"))? as usize;
        let end = iv["end"].as_u64().ok_or_else(|| failed("missing end"))? as usize;
        if start > end || (last_end > 0 && start <= last_end) {
            return Err(failed(format!("interval [{start}, {end}] overlaps or is out of order")));
        }
        last_end = end;
        let epsilon: ExactProb = expect_str(iv, "epsilon")?.parse().map_err(failed)?;
        let doc: FamilyDoc = from_value(&iv["family"], "interval family")?;
        let family = LevelFamily::from_doc(&doc).map_err(failed)?;
        if family.levels().keys().any(|&n| n < start || n > end) {
            return Err(failed(format!("interval [{start}, {end}] family has a level outside it")));
        }
        let p = FiniteDistribution::uniform(end).map_err(failed)?;
        let avoid = forbidden::avoid_probability(&p, &family);
        if avoid.to_string() != expect_str(iv, "avoid_probability")? || avoid >= epsilon {
            return Err(failed(format!("interval [{start}, {end}]: avoid probability recomputes to {avoid}")));
        }
        out.push(format!("[{start}, {end}]: {avoid} < {epsilon}"));
    }
    Ok(out)
}
