//! Report emission: results CSV, plot-ready series files, and the
//! qualitative-ordering summary.
//!
//! All output is byte-stable: emitting the same results twice produces
//! identical files. Infinite metric values serialize as the literal `inf`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::agent::Protocol;
use crate::scenario::{seed_averages, sort_results, RunResult};

/// Fixed column order of `results.csv`.
pub const CSV_HEADER: &str =
    "protocol,sim_time,seed,packets_sent,packets_received,paper_pdr,packets_forwarded,pdr,throughput_Bps,avg_delay_s,nrl";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no results to report")]
    Empty,
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Paths written by [`emit_report`].
#[derive(Debug, Clone)]
pub struct EmittedFiles {
    pub results_csv: PathBuf,
    pub series: Vec<PathBuf>,
    pub summary: PathBuf,
}

fn fmt_metric(v: f64, decimals: usize) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v:.decimals$}")
    }
}

fn csv_row(r: &RunResult, seed_label: &str) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.protocol,
        r.sim_time,
        seed_label,
        r.sent,
        r.received,
        fmt_metric(r.paper_pdr, 2),
        r.forwarded,
        fmt_metric(r.pdr, 4),
        fmt_metric(r.throughput_bps, 2),
        fmt_metric(r.avg_delay_s, 6),
        fmt_metric(r.nrl, 4),
    )
}

/// Renders the results CSV: one row per run plus one seed-averaged row per
/// (protocol, time) when several seeds are present.
pub fn render_csv(results: &[RunResult]) -> String {
    let mut rows = results.to_vec();
    sort_results(&mut rows);
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &rows {
        let seed = r.seed.to_string();
        out.push_str(&csv_row(r, &seed));
        out.push('\n');
    }
    let multi_seed = {
        let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        seeds.len() > 1
    };
    if multi_seed {
        for avg in seed_averages(&rows) {
            out.push_str(&csv_row(&avg, "avg"));
            out.push('\n');
        }
    }
    out
}

/// (name, extractor, printed decimals) of one plot-ready series.
type SeriesSpec = (&'static str, fn(&RunResult) -> f64, usize);

/// The metrics that get a plot-ready series file.
const SERIES: [SeriesSpec; 5] = [
    ("pdr", |r| r.pdr, 4),
    ("paper_pdr", |r| r.paper_pdr, 2),
    ("throughput", |r| r.throughput_bps, 2),
    ("avg_delay", |r| r.avg_delay_s, 6),
    ("nrl", |r| r.nrl, 4),
];

/// Renders one whitespace-separated series file (gnuplot convention):
/// a row per simulated time, a column per protocol, seed-averaged values.
pub fn render_series(results: &[RunResult], metric: &str) -> Option<String> {
    let (_, extract, decimals) = SERIES.iter().find(|(name, _, _)| *name == metric)?;
    let averages = seed_averages(results);
    let mut protocols: Vec<Protocol> = averages.iter().map(|r| r.protocol).collect();
    protocols.sort_unstable();
    protocols.dedup();
    let mut times: Vec<u64> = averages.iter().map(|r| r.sim_time.to_bits()).collect();
    times.sort_unstable();
    times.dedup();

    let by_key: BTreeMap<(Protocol, u64), f64> = averages
        .iter()
        .map(|r| ((r.protocol, r.sim_time.to_bits()), extract(r)))
        .collect();

    let mut out = String::new();
    out.push_str("# time");
    for p in &protocols {
        let _ = write!(out, " {p}");
    }
    out.push('\n');
    for t_bits in times {
        let _ = write!(out, "{}", f64::from_bits(t_bits));
        for p in &protocols {
            match by_key.get(&(*p, t_bits)) {
                Some(v) => {
                    let _ = write!(out, " {}", fmt_metric(*v, *decimals));
                }
                None => out.push_str(" -"),
            }
        }
        out.push('\n');
    }
    Some(out)
}

fn ordering_line(name: &str, mut ranked: Vec<(Protocol, f64)>, ascending: bool) -> String {
    ranked.sort_by(|a, b| {
        let ord = a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal);
        let ord = if ascending { ord } else { ord.reverse() };
        // protocol name as the deterministic tiebreak
        ord.then_with(|| a.0.cmp(&b.0))
    });
    let sep = if ascending { " < " } else { " > " };
    let chain: Vec<String> =
        ranked.iter().map(|(p, _)| p.name().to_ascii_uppercase()).collect();
    format!("{name}: {}", chain.join(sep))
}

/// Renders the text summary: the observed protocol orderings for
/// throughput, pdr and nrl at the largest simulated time (seed-averaged).
pub fn render_summary(results: &[RunResult]) -> String {
    let averages = seed_averages(results);
    let max_time = averages
        .iter()
        .map(|r| r.sim_time.to_bits())
        .max()
        .expect("nonempty results");
    let at_max: Vec<&RunResult> =
        averages.iter().filter(|r| r.sim_time.to_bits() == max_time).collect();

    let mut out = String::new();
    let _ = writeln!(
        out,
        "observed orderings at t={}s (seed-averaged):",
        f64::from_bits(max_time)
    );
    let pick = |f: &dyn Fn(&RunResult) -> f64| -> Vec<(Protocol, f64)> {
        at_max.iter().map(|r| (r.protocol, f(r))).collect()
    };
    out.push_str(&ordering_line("throughput", pick(&|r| r.throughput_bps), false));
    out.push('\n');
    out.push_str(&ordering_line("pdr", pick(&|r| r.pdr), false));
    out.push('\n');
    out.push_str(&ordering_line("nrl", pick(&|r| r.nrl), true));
    out.push('\n');
    out
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    fs::write(path, contents)
        .map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

/// Writes `results.csv`, `series_<metric>.dat` for each metric, and
/// `summary.txt` into `dir`. Re-running on the same results rewrites
/// identical bytes.
pub fn emit_report(results: &[RunResult], dir: &Path) -> Result<EmittedFiles, ReportError> {
    if results.is_empty() {
        return Err(ReportError::Empty);
    }
    fs::create_dir_all(dir)
        .map_err(|source| ReportError::Io { path: dir.to_path_buf(), source })?;

    let results_csv = dir.join("results.csv");
    write_file(&results_csv, &render_csv(results))?;

    let mut series = Vec::new();
    for (name, _, _) in SERIES {
        let rendered = render_series(results, name).expect("known metric");
        let path = dir.join(format!("series_{name}.dat"));
        write_file(&path, &rendered)?;
        series.push(path);
    }

    let summary = dir.join("summary.txt");
    write_file(&summary, &render_summary(results))?;

    Ok(EmittedFiles { results_csv, series, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(protocol: Protocol, time: f64, seed: u64, received: u64) -> RunResult {
        RunResult {
            protocol,
            sim_time: time,
            seed,
            sent: 1000,
            received,
            forwarded: 50,
            control_tx: 200,
            paper_pdr: crate::metrics::paper_pdr(1000, received),
            pdr: crate::metrics::pdr(1000, received),
            throughput_bps: received as f64 * 64.0 / time,
            avg_delay_s: 0.010,
            nrl: crate::metrics::nrl(200, received),
            drops: Default::default(),
            outstanding: 0,
            wall_ms: 1,
        }
    }

    #[test]
    fn csv_header_is_pinned() {
        let rows = vec![result(Protocol::Aodv, 25.0, 1, 500)];
        let csv = render_csv(&rows);
        assert!(csv.starts_with(
            "protocol,sim_time,seed,packets_sent,packets_received,paper_pdr,packets_forwarded,pdr,throughput_Bps,avg_delay_s,nrl\n"
        ));
        assert_eq!(csv.lines().count(), 2, "one data row, no avg row for a single seed");
        assert!(csv.contains("aodv,25,1,1000,500,200.00,50,0.5000,1280.00,0.010000,0.4000"));
    }

    #[test]
    fn infinite_markers_serialize_as_inf() {
        let rows = vec![result(Protocol::Dsdv, 25.0, 1, 0)];
        let csv = render_csv(&rows);
        assert!(csv.contains(",inf,"), "paper_pdr is inf when nothing was received: {csv}");
        assert!(csv.trim_end().ends_with("inf"), "nrl column: {csv}");
    }

    #[test]
    fn emit_is_idempotent() {
        let rows = vec![
            result(Protocol::Aodv, 25.0, 1, 600),
            result(Protocol::Aodv, 25.0, 2, 620),
            result(Protocol::Dsdv, 25.0, 1, 300),
            result(Protocol::Dsdv, 25.0, 2, 320),
            result(Protocol::Dsr, 25.0, 1, 500),
            result(Protocol::Dsr, 25.0, 2, 520),
        ];
        let dir = std::env::temp_dir().join(format!("manet-report-{}", std::process::id()));
        let first = emit_report(&rows, &dir).unwrap();
        let bytes1 = fs::read(&first.results_csv).unwrap();
        let second = emit_report(&rows, &dir).unwrap();
        let bytes2 = fs::read(&second.results_csv).unwrap();
        assert_eq!(bytes1, bytes2);
        for s in &second.series {
            assert!(s.exists());
        }
        let summary = fs::read_to_string(&second.summary).unwrap();
        let ordering_lines: Vec<&str> = summary
            .lines()
            .filter(|l| {
                l.starts_with("throughput:") || l.starts_with("pdr:") || l.starts_with("nrl:")
            })
            .collect();
        assert_eq!(ordering_lines.len(), 3);
        assert!(ordering_lines[0].contains(" > "));
        assert!(ordering_lines[2].contains(" < "));
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn series_has_one_row_per_time() {
        let rows = vec![
            result(Protocol::Aodv, 25.0, 1, 600),
            result(Protocol::Aodv, 50.0, 1, 700),
            result(Protocol::Aodv, 75.0, 1, 800),
        ];
        let series = render_series(&rows, "throughput").unwrap();
        let data_rows = series.lines().filter(|l| !l.starts_with('#')).count();
        assert_eq!(data_rows, 3);
        assert!(series.starts_with("# time aodv\n"));
    }
}
