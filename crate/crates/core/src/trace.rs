//! Connection-log ingestion: parses Zeek-style logs, reconstructs the
//! cumulative epidemic curve (first malicious attempt per source marks
//! infection), and computes the inter-attempt gap diagnostics.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::net::Ipv4Addr;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quantile::quantile_sorted;

/// Destination port labeled malicious by default (SMB).
pub const DEFAULT_MALICIOUS_PORT: u16 = 445;

/// One parsed connection attempt. Columns beyond these are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnRecord {
    pub ts: f64,
    pub src_ip: String,
    pub dst_ip: String,
    pub dst_port: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogFormat {
    /// Zeek conn.log TSV with a `#fields` header.
    TsvZeek,
    /// `ts,src_ip,dst_ip,dst_port` CSV (header row optional).
    CsvMinimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseMode {
    /// Any unparsable row aborts with its line number.
    Strict,
    /// Unparsable rows are skipped and counted.
    Lenient,
}

/// Records sorted by timestamp plus the number of skipped rows (lenient
/// mode only).
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLog {
    pub records: Vec<ConnRecord>,
    pub skipped: usize,
}

/// Parses a connection log file. See [`parse_reader`].
pub fn parse_log(path: impl AsRef<Path>, format: LogFormat, mode: ParseMode) -> Result<ParsedLog> {
    let file = std::fs::File::open(path)?;
    parse_reader(std::io::BufReader::new(file), format, mode)
}

/// Parses a connection log from any reader; records come back sorted by
/// timestamp.
pub fn parse_reader<R: BufRead>(reader: R, format: LogFormat, mode: ParseMode) -> Result<ParsedLog> {
    let mut parsed = match format {
        LogFormat::TsvZeek => parse_zeek(reader, mode)?,
        LogFormat::CsvMinimal => parse_csv_minimal(reader, mode)?,
    };
    parsed
        .records
        .sort_by(|a, b| a.ts.partial_cmp(&b.ts).expect("timestamps are finite"));
    Ok(parsed)
}

fn parse_field<T: FromStr>(token: &str, line: usize, what: &str) -> Result<T> {
    token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {what} from '{token}'"),
    })
}

fn finite_ts(token: &str, line: usize) -> Result<f64> {
    let ts: f64 = parse_field(token, line, "timestamp")?;
    if !ts.is_finite() {
        return Err(Error::Parse { line, message: format!("timestamp '{token}' is not finite") });
    }
    Ok(ts)
}

fn parse_zeek<R: BufRead>(reader: R, mode: ParseMode) -> Result<ParsedLog> {
    const REQUIRED: [&str; 4] = ["ts", "id.orig_h", "id.resp_h", "id.resp_p"];
    let mut separator = '\t';
    let mut columns: Option<[usize; 4]> = None;
    let mut ncols = 0usize;
    let mut records = Vec::new();
    let mut skipped = 0usize;

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if let Some(rest) = line.strip_prefix('#') {
            let mut parts = rest.splitn(2, separator);
            let key = parts.next().unwrap_or_default();
            let value = parts.next().unwrap_or_default();
            match key {
                "separator" => {
                    // Zeek writes the separator itself space-separated,
                    // usually as a \xNN escape.
                    let value = rest.trim_start_matches("separator").trim();
                    separator = parse_separator(value).ok_or_else(|| Error::Parse {
                        line: lineno,
                        message: format!("unsupported separator '{value}'"),
                    })?;
                }
                "fields" => {
                    let names: Vec<&str> = value.split(separator).collect();
                    ncols = names.len();
                    let mut found = [usize::MAX; 4];
                    for (i, req) in REQUIRED.iter().enumerate() {
                        match names.iter().position(|n| n == req) {
                            Some(pos) => found[i] = pos,
                            None => {
                                return Err(Error::Schema(format!(
                                    "#fields header is missing required column '{req}'"
                                )))
                            }
                        }
                    }
                    columns = Some(found);
                }
                _ => {}
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let Some(cols) = columns else {
            return Err(Error::Schema("data row before the #fields header".into()));
        };
        let fields: Vec<&str> = line.split(separator).collect();
        let row = (|| -> Result<ConnRecord> {
            if fields.len() < ncols {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {ncols} columns, got {}", fields.len()),
                });
            }
            let get = |i: usize| -> Result<&str> {
                let token = fields[i];
                if token == "-" || token == "(empty)" {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "required field is unset".into(),
                    });
                }
                Ok(token)
            };
            Ok(ConnRecord {
                ts: finite_ts(get(cols[0])?, lineno)?,
                src_ip: get(cols[1])?.to_string(),
                dst_ip: get(cols[2])?.to_string(),
                dst_port: parse_field(get(cols[3])?, lineno, "destination port")?,
            })
        })();
        match (row, mode) {
            (Ok(rec), _) => records.push(rec),
            (Err(_), ParseMode::Lenient) => skipped += 1,
            (Err(e), ParseMode::Strict) => return Err(e),
        }
    }
    if columns.is_none() && !records.is_empty() {
        return Err(Error::Schema("no #fields header found".into()));
    }
    Ok(ParsedLog { records, skipped })
}

fn parse_separator(value: &str) -> Option<char> {
    if let Some(hex) = value.strip_prefix("\\x") {
        return u8::from_str_radix(hex, 16).ok().map(char::from);
    }
    value.chars().next()
}

fn parse_csv_minimal<R: BufRead>(reader: R, mode: ParseMode) -> Result<ParsedLog> {
    let mut records = Vec::new();
    let mut skipped = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if lineno == 1 && trimmed.eq_ignore_ascii_case("ts,src_ip,dst_ip,dst_port") {
            continue;
        }
        let row = (|| -> Result<ConnRecord> {
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields.len() < 4 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected ts,src_ip,dst_ip,dst_port, got '{trimmed}'"),
                });
            }
            Ok(ConnRecord {
                ts: finite_ts(fields[0], lineno)?,
                src_ip: fields[1].to_string(),
                dst_ip: fields[2].to_string(),
                dst_port: parse_field(fields[3], lineno, "destination port")?,
            })
        })();
        match (row, mode) {
            (Ok(rec), _) => records.push(rec),
            (Err(_), ParseMode::Lenient) => skipped += 1,
            (Err(e), ParseMode::Strict) => return Err(e),
        }
    }
    Ok(ParsedLog { records, skipped })
}

/// An IPv4 prefix like `10.0.0.0/8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cidr {
    base: u32,
    prefix_len: u8,
}

impl Cidr {
    pub fn contains(&self, ip: Ipv4Addr) -> bool {
        let mask = if self.prefix_len == 0 { 0 } else { u32::MAX << (32 - self.prefix_len) };
        (u32::from(ip) & mask) == (self.base & mask)
    }
}

impl FromStr for Cidr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (addr, len) = s
            .split_once('/')
            .ok_or_else(|| Error::invalid(format!("CIDR '{s}' is missing '/len'")))?;
        let ip: Ipv4Addr =
            addr.parse().map_err(|_| Error::invalid(format!("bad IPv4 address in '{s}'")))?;
        let prefix_len: u8 =
            len.parse().map_err(|_| Error::invalid(format!("bad prefix length in '{s}'")))?;
        if prefix_len > 32 {
            return Err(Error::invalid(format!("prefix length {prefix_len} > 32")));
        }
        Ok(Cidr { base: u32::from(ip), prefix_len })
    }
}

/// Which hosts count as internal when filtering the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InternalFilter {
    /// Every host is internal (isolated-testbed logs).
    All,
    /// Hosts inside any of the prefixes.
    Cidrs(Vec<Cidr>),
}

impl InternalFilter {
    /// The RFC1918 private ranges, the default notion of "internal".
    pub fn rfc1918() -> Self {
        InternalFilter::Cidrs(vec![
            "10.0.0.0/8".parse().expect("static CIDR"),
            "172.16.0.0/12".parse().expect("static CIDR"),
            "192.168.0.0/16".parse().expect("static CIDR"),
        ])
    }

    pub fn is_internal(&self, host: &str) -> bool {
        match self {
            InternalFilter::All => true,
            InternalFilter::Cidrs(list) => host
                .parse::<Ipv4Addr>()
                .map(|ip| list.iter().any(|c| c.contains(ip)))
                .unwrap_or(false),
        }
    }
}

/// One host's first malicious attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfectionEvent {
    pub t: f64,
    pub ip: String,
}

/// The reconstructed epidemic: infection events, the cumulative curve, and
/// the endpoints of the observation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpidemicTrace {
    pub events: Vec<InfectionEvent>,
    /// (t, cumulative infected) at every infection event.
    pub curve: Vec<(f64, u64)>,
    /// First malicious attempt: the epidemic start.
    pub t0: f64,
    /// Last communication event in the window.
    pub t_end: f64,
    pub contacted_ips: usize,
    pub infected_ips: usize,
    pub malicious_port: u16,
    pub internal: InternalFilter,
}

impl EpidemicTrace {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t0
    }

    /// Time of the last new infection.
    pub fn last_infection_time(&self) -> f64 {
        self.events.last().map(|e| e.t).unwrap_or(self.t0)
    }

    /// Cumulative count in force at time `t` (0 before the first event).
    pub fn count_at(&self, t: f64) -> u64 {
        match self.curve.partition_point(|(et, _)| *et <= t) {
            0 => 0,
            idx => self.curve[idx - 1].1,
        }
    }

    /// CSV with header `t,cumulative_infected`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,cumulative_infected")?;
        for (t, count) in &self.curve {
            writeln!(w, "{t},{count}")?;
        }
        Ok(())
    }

    /// Builds a trace from a simulated cumulative-infected series sampled at
    /// a fixed step, e.g. for synthetic-recovery experiments. Step `i` maps
    /// to time `i·dt`; `contacted` plays the role of the population size.
    pub fn from_simulated_curve(cumulative: &[u64], dt: f64, contacted: usize) -> Result<Self> {
        if cumulative.is_empty() {
            return Err(Error::invalid("empty cumulative series"));
        }
        if cumulative.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("cumulative series must be nondecreasing"));
        }
        let mut curve = Vec::new();
        let mut last = 0u64;
        for (i, &c) in cumulative.iter().enumerate() {
            if c > last {
                curve.push((i as f64 * dt, c));
                last = c;
            }
        }
        if curve.is_empty() {
            return Err(Error::invalid("cumulative series never becomes positive"));
        }
        let events = curve
            .iter()
            .map(|(t, _)| InfectionEvent { t: *t, ip: String::new() })
            .collect();
        Ok(EpidemicTrace {
            t0: curve[0].0,
            t_end: (cumulative.len() - 1) as f64 * dt,
            infected_ips: last as usize,
            contacted_ips: contacted,
            events,
            curve,
            malicious_port: DEFAULT_MALICIOUS_PORT,
            internal: InternalFilter::All,
        })
    }

    /// Reads a curve CSV back into a bare trace (no record-level metadata).
    pub fn from_curve_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut curve: Vec<(f64, u64)> = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || (idx == 0 && trimmed.starts_with("t,")) {
                continue;
            }
            let (t, c) = trimmed.split_once(',').ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: format!("expected 't,count', got '{trimmed}'"),
            })?;
            curve.push((finite_ts(t.trim(), idx + 1)?, parse_field(c.trim(), idx + 1, "count")?));
        }
        if curve.is_empty() {
            return Err(Error::Schema("curve CSV has no data rows".into()));
        }
        let events = curve
            .iter()
            .map(|(t, _)| InfectionEvent { t: *t, ip: String::new() })
            .collect();
        let infected = curve.last().expect("non-empty").1 as usize;
        Ok(EpidemicTrace {
            t0: curve[0].0,
            t_end: curve.last().expect("non-empty").0,
            infected_ips: infected,
            contacted_ips: infected,
            events,
            curve,
            malicious_port: DEFAULT_MALICIOUS_PORT,
            internal: InternalFilter::All,
        })
    }
}

/// Reconstructs the epidemic from connection records.
///
/// Only internal↔internal records count. A record is malicious when its
/// destination port equals `malicious_port`; the first malicious attempt
/// overall starts the epidemic, each source's first malicious attempt is its
/// infection time, and the window closes at the last communication event.
pub fn reconstruct(
    records: &[ConnRecord],
    malicious_port: u16,
    internal: &InternalFilter,
) -> Result<EpidemicTrace> {
    if records.is_empty() {
        return Err(Error::invalid("no records"));
    }
    let mut contacted: BTreeSet<&str> = BTreeSet::new();
    let mut first_attempt: BTreeMap<&str, f64> = BTreeMap::new();
    let mut t_end = f64::NEG_INFINITY;
    let mut t0 = f64::INFINITY;
    for rec in records {
        if !internal.is_internal(&rec.src_ip) || !internal.is_internal(&rec.dst_ip) {
            continue;
        }
        contacted.insert(&rec.src_ip);
        contacted.insert(&rec.dst_ip);
        t_end = t_end.max(rec.ts);
        if rec.dst_port == malicious_port {
            t0 = t0.min(rec.ts);
            first_attempt
                .entry(&rec.src_ip)
                .and_modify(|t| *t = t.min(rec.ts))
                .or_insert(rec.ts);
        }
    }
    if first_attempt.is_empty() {
        return Err(Error::EmptyEpidemic { port: malicious_port });
    }

    let mut events: Vec<InfectionEvent> = first_attempt
        .into_iter()
        .map(|(ip, t)| InfectionEvent { t, ip: ip.to_string() })
        .collect();
    events.sort_by(|a, b| {
        a.t.partial_cmp(&b.t).expect("timestamps are finite").then_with(|| a.ip.cmp(&b.ip))
    });
    let curve: Vec<(f64, u64)> =
        events.iter().enumerate().map(|(i, e)| (e.t, i as u64 + 1)).collect();

    Ok(EpidemicTrace {
        t0,
        t_end,
        contacted_ips: contacted.len(),
        infected_ips: events.len(),
        events,
        curve,
        malicious_port,
        internal: internal.clone(),
    })
}

/// Cuts the window at the last new infection, dropping the flat tail.
pub fn truncate_plateau(trace: &EpidemicTrace) -> EpidemicTrace {
    let mut out = trace.clone();
    out.t_end = trace.last_infection_time();
    out
}

/// Inter-attempt gap statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaStats {
    /// Per source: gaps between its successive malicious attempts.
    pub consecutive_gaps: Vec<(String, Vec<f64>)>,
    /// Per source: gap from its last attempt to the end of the window.
    pub tail_gaps: Vec<(String, f64)>,
    /// QCoD of all consecutive gaps pooled across sources.
    pub qcod: f64,
    /// QCoD an exponential distribution with the same mean would have.
    pub qcod_exponential_ref: f64,
    pub mean_consecutive_gap: f64,
    pub mean_tail_gap: f64,
}

/// Quartile coefficient of dispersion (Q3−Q1)/(Q3+Q1) with
/// linear-interpolation quartiles. Needs at least 4 values.
pub fn qcod(gaps: &[f64]) -> Result<f64> {
    if gaps.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "QCoD needs at least 4 gaps, got {}",
            gaps.len()
        )));
    }
    if gaps.iter().any(|g| *g < 0.0 || !g.is_finite()) {
        return Err(Error::invalid("gaps must be finite and >= 0"));
    }
    let mut sorted = gaps.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite gaps"));
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    if q1 + q3 == 0.0 {
        return Ok(0.0);
    }
    Ok((q3 - q1) / (q3 + q1))
}

/// QCoD of an exponential distribution: Q1 = m·ln(4/3), Q3 = m·ln4, so the
/// ratio is mean-free, ≈ 0.6563.
pub fn exponential_qcod_reference() -> f64 {
    let q1 = (4.0f64 / 3.0).ln();
    let q3 = 4.0f64.ln();
    (q3 - q1) / (q3 + q1)
}

/// Gap diagnostics for the records behind `trace` (same malicious-port and
/// internal-filter rules).
pub fn delta_stats(records: &[ConnRecord], trace: &EpidemicTrace) -> Result<DeltaStats> {
    let mut attempts: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for rec in records {
        if rec.dst_port != trace.malicious_port
            || !trace.internal.is_internal(&rec.src_ip)
            || !trace.internal.is_internal(&rec.dst_ip)
        {
            continue;
        }
        attempts.entry(&rec.src_ip).or_default().push(rec.ts);
    }

    let mut consecutive_gaps = Vec::new();
    let mut tail_gaps = Vec::new();
    let mut pooled = Vec::new();
    for (ip, mut times) in attempts {
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite timestamps"));
        let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        pooled.extend_from_slice(&gaps);
        if !gaps.is_empty() {
            consecutive_gaps.push((ip.to_string(), gaps));
        }
        let last = *times.last().expect("source has at least one attempt");
        tail_gaps.push((ip.to_string(), trace.t_end - last));
    }

    let qcod_value = qcod(&pooled)?;
    let mean = |xs: &[f64]| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    let tails: Vec<f64> = tail_gaps.iter().map(|(_, g)| *g).collect();
    Ok(DeltaStats {
        consecutive_gaps,
        tail_gaps,
        qcod: qcod_value,
        qcod_exponential_ref: exponential_qcod_reference(),
        mean_consecutive_gap: mean(&pooled),
        mean_tail_gap: mean(&tails),
    })
}

/// Integration step for model fitting: (t_end − t0)/T.
pub fn compute_dt(trace: &EpidemicTrace, t_points: usize) -> Result<f64> {
    if t_points == 0 {
        return Err(Error::invalid("T must be >= 1"));
    }
    Ok(trace.duration() / t_points as f64)
}

/// Average number of new infections per 100 seconds, over the span from the
/// epidemic start to the last infection.
pub fn propagation_speed(trace: &EpidemicTrace) -> Result<f64> {
    let span = trace.last_infection_time() - trace.t0;
    if span <= 0.0 {
        return Err(Error::invalid("propagation speed needs a positive infection span"));
    }
    Ok(trace.infected_ips as f64 * 100.0 / span)
}

/// JSON-ready summary of a reconstructed trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub t0: f64,
    pub t_end: f64,
    pub duration: f64,
    pub contacted_ips: usize,
    pub infected_ips: usize,
    pub infected_fraction: f64,
    pub t_points: Option<usize>,
    pub dt: Option<f64>,
    pub speed: Option<f64>,
    pub qcod: Option<f64>,
    pub qcod_exponential_ref: Option<f64>,
}

/// Builds the summary; gap statistics come from `records` when given, and
/// fields that need unavailable inputs stay `null`.
pub fn summarize(
    trace: &EpidemicTrace,
    records: Option<&[ConnRecord]>,
    t_points: Option<usize>,
) -> TraceSummary {
    let delta = records.and_then(|r| delta_stats(r, trace).ok());
    TraceSummary {
        t0: trace.t0,
        t_end: trace.t_end,
        duration: trace.duration(),
        contacted_ips: trace.contacted_ips,
        infected_ips: trace.infected_ips,
        infected_fraction: trace.infected_ips as f64 / trace.contacted_ips.max(1) as f64,
        t_points,
        dt: t_points.and_then(|t| compute_dt(trace, t).ok()),
        speed: propagation_speed(trace).ok(),
        qcod: delta.as_ref().map(|d| d.qcod),
        qcod_exponential_ref: delta.as_ref().map(|d| d.qcod_exponential_ref),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(ts: f64, src: &str, dst: &str, port: u16) -> ConnRecord {
        ConnRecord { ts, src_ip: src.into(), dst_ip: dst.into(), dst_port: port }
    }

    fn toy_records() -> Vec<ConnRecord> {
        vec![
            rec(0.0, "10.0.0.1", "10.0.0.2", 445),
            rec(5.0, "10.0.0.2", "10.0.0.3", 445),
            rec(7.0, "10.0.0.3", "10.0.0.4", 80),
        ]
    }

    #[test]
    fn minimal_csv_parses_and_sorts() {
        let input = "ts,src_ip,dst_ip,dst_port\n5.0,10.0.0.2,10.0.0.3,445\n0.5,10.0.0.1,10.0.0.2,445\n7.25,10.0.0.3,10.0.0.4,80\n";
        let parsed = parse_reader(input.as_bytes(), LogFormat::CsvMinimal, ParseMode::Strict).unwrap();
        assert_eq!(parsed.records.len(), 3);
        assert_eq!(parsed.skipped, 0);
        assert!(parsed.records.windows(2).all(|w| w[0].ts <= w[1].ts));
        assert_eq!(parsed.records[0].src_ip, "10.0.0.1");
    }

    #[test]
    fn zeek_header_controls_column_order() {
        let a = "#separator \\x09\n#fields\tts\tuid\tid.orig_h\tid.orig_p\tid.resp_h\tid.resp_p\n1.0\tC1\t10.0.0.1\t5555\t10.0.0.2\t445\n";
        let b = "#fields\tid.resp_p\tid.resp_h\tid.orig_h\tuid\tts\n445\t10.0.0.2\t10.0.0.1\tC1\t1.0\n";
        let pa = parse_reader(a.as_bytes(), LogFormat::TsvZeek, ParseMode::Strict).unwrap();
        let pb = parse_reader(b.as_bytes(), LogFormat::TsvZeek, ParseMode::Strict).unwrap();
        assert_eq!(pa.records, pb.records);
        assert_eq!(pa.records[0].dst_port, 445);
    }

    #[test]
    fn zeek_missing_required_column_is_schema_error() {
        let input = "#fields\tts\tid.orig_h\tid.resp_h\n1.0\ta\tb\n";
        assert!(matches!(
            parse_reader(input.as_bytes(), LogFormat::TsvZeek, ParseMode::Strict),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn zeek_unset_port_skipped_in_lenient_mode() {
        let input = "#fields\tts\tid.orig_h\tid.resp_h\tid.resp_p\n1.0\t10.0.0.1\t10.0.0.2\t-\n2.0\t10.0.0.1\t10.0.0.2\t445\n";
        let lenient = parse_reader(input.as_bytes(), LogFormat::TsvZeek, ParseMode::Lenient).unwrap();
        assert_eq!(lenient.records.len(), 1);
        assert_eq!(lenient.skipped, 1);
        match parse_reader(input.as_bytes(), LogFormat::TsvZeek, ParseMode::Strict) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn toy_reconstruction() {
        let trace = reconstruct(&toy_records(), 445, &InternalFilter::rfc1918()).unwrap();
        assert_eq!(trace.t0, 0.0);
        assert_eq!(trace.t_end, 7.0);
        assert_eq!(trace.curve, vec![(0.0, 1), (5.0, 2)]);
        assert_eq!(trace.infected_ips, 2);
        assert_eq!(trace.contacted_ips, 4);
        assert_eq!(trace.events[0].ip, "10.0.0.1");
        assert_eq!(trace.events[1].ip, "10.0.0.2");
    }

    #[test]
    fn single_record_epidemic() {
        let records = vec![rec(3.0, "10.0.0.9", "10.0.0.2", 445)];
        let trace = reconstruct(&records, 445, &InternalFilter::rfc1918()).unwrap();
        assert_eq!(trace.t0, 3.0);
        assert_eq!(trace.infected_ips, 1);
        assert_eq!(trace.curve, vec![(3.0, 1)]);
    }

    #[test]
    fn wrong_port_is_empty_epidemic() {
        assert!(matches!(
            reconstruct(&toy_records(), 446, &InternalFilter::rfc1918()),
            Err(Error::EmptyEpidemic { port: 446 })
        ));
    }

    #[test]
    fn external_hosts_are_filtered_out() {
        let records = vec![
            rec(0.0, "8.8.8.8", "10.0.0.2", 445),  // external source
            rec(1.0, "10.0.0.2", "9.9.9.9", 445),  // external destination
            rec(2.0, "10.0.0.2", "10.0.0.3", 445), // internal
        ];
        let trace = reconstruct(&records, 445, &InternalFilter::rfc1918()).unwrap();
        assert_eq!(trace.t0, 2.0);
        assert_eq!(trace.infected_ips, 1);
        assert_eq!(trace.contacted_ips, 2);
    }

    #[test]
    fn reconstruction_is_order_insensitive() {
        let mut shuffled = toy_records();
        shuffled.reverse();
        let a = reconstruct(&toy_records(), 445, &InternalFilter::rfc1918()).unwrap();
        let b = reconstruct(&shuffled, 445, &InternalFilter::rfc1918()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn destination_only_hosts_never_infect() {
        // .4 only ever receives; it is contacted but not infected.
        let trace = reconstruct(&toy_records(), 445, &InternalFilter::rfc1918()).unwrap();
        assert!(trace.events.iter().all(|e| e.ip != "10.0.0.4"));
        assert!(trace.infected_ips <= trace.contacted_ips);
    }

    #[test]
    fn plateau_truncation() {
        let trace = reconstruct(&toy_records(), 445, &InternalFilter::rfc1918()).unwrap();
        let cut = truncate_plateau(&trace);
        assert_eq!(cut.t_end, 5.0);
        assert_eq!(cut.curve, trace.curve);
        // Already-tight traces stay unchanged.
        let again = truncate_plateau(&cut);
        assert_eq!(again, cut);
    }

    /// Synthetic variant shaped like the logged testbed run: 34 contacted
    /// hosts of which 10 attempt port 445 (fraction 0.29).
    #[test]
    fn testbed_sized_reconstruction() {
        let mut records = Vec::new();
        for i in 0..10u32 {
            records.push(rec(
                10.0 * i as f64,
                &format!("10.0.1.{}", i + 1),
                &format!("10.0.1.{}", i + 2),
                445,
            ));
        }
        // Benign chatter brings the contacted set to 34 hosts.
        for i in 10..33u32 {
            records.push(rec(200.0 + i as f64, &format!("10.0.1.{}", i + 2), "10.0.1.1", 80));
        }
        let trace = reconstruct(&records, 445, &InternalFilter::rfc1918()).unwrap();
        assert_eq!(trace.contacted_ips, 34);
        assert_eq!(trace.infected_ips, 10);
        let fraction = trace.infected_ips as f64 / trace.contacted_ips as f64;
        assert!((fraction - 0.29).abs() < 0.005);
    }

    #[test]
    fn qcod_of_equal_gaps_is_zero() {
        assert_eq!(qcod(&[2.0, 2.0, 2.0, 2.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn qcod_linear_interpolation_quartiles() {
        // Q1 = 1.75, Q3 = 3.25 → (3.25−1.75)/(3.25+1.75) = 0.3.
        let value = qcod(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((value - 0.3).abs() < 1e-12);
    }

    #[test]
    fn qcod_needs_four_gaps() {
        assert!(matches!(qcod(&[1.0, 2.0, 3.0]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn exponential_reference_constant() {
        let r = exponential_qcod_reference();
        assert!((r - 0.6563).abs() < 1e-4);
        let explicit = (4.0f64.ln() - (4.0f64 / 3.0).ln()) / (4.0f64.ln() + (4.0f64 / 3.0).ln());
        assert_eq!(r, explicit);
    }

    #[test]
    fn delta_stats_pools_gaps_across_sources() {
        let records = vec![
            rec(0.0, "10.0.0.1", "10.0.0.9", 445),
            rec(1.0, "10.0.0.1", "10.0.0.9", 445),
            rec(3.0, "10.0.0.1", "10.0.0.9", 445),
            rec(10.0, "10.0.0.2", "10.0.0.9", 445),
            rec(16.0, "10.0.0.2", "10.0.0.9", 445),
            rec(26.0, "10.0.0.2", "10.0.0.9", 445),
            rec(40.0, "10.0.0.1", "10.0.0.9", 80),
        ];
        let trace = reconstruct(&records, 445, &InternalFilter::rfc1918()).unwrap();
        let stats = delta_stats(&records, &trace).unwrap();
        // Gaps: source .1 → [1, 2]; source .2 → [6, 10].
        assert_eq!(stats.consecutive_gaps.len(), 2);
        let pooled: Vec<f64> = stats
            .consecutive_gaps
            .iter()
            .flat_map(|(_, g)| g.iter().copied())
            .collect();
        assert_eq!(pooled, vec![1.0, 2.0, 6.0, 10.0]);
        // Tail gaps run to t_end = 40.
        assert_eq!(stats.tail_gaps[0], ("10.0.0.1".to_string(), 37.0));
        assert_eq!(stats.tail_gaps[1], ("10.0.0.2".to_string(), 14.0));
        assert!(stats.qcod > 0.0);
    }

    #[test]
    fn dt_examples() {
        let trace = EpidemicTrace {
            events: vec![InfectionEvent { t: 0.0, ip: "a".into() }],
            curve: vec![(0.0, 1)],
            t0: 0.0,
            t_end: 10.0,
            contacted_ips: 2,
            infected_ips: 1,
            malicious_port: 445,
            internal: InternalFilter::All,
        };
        assert_eq!(compute_dt(&trace, 10).unwrap(), 1.0);
        let trace2 = EpidemicTrace { t0: 2.0, t_end: 12.0, ..trace.clone() };
        assert!((compute_dt(&trace2, 100).unwrap() - 0.1).abs() < 1e-15);
        assert!(compute_dt(&trace, 0).is_err());
    }

    #[test]
    fn propagation_speed_examples() {
        let mk = |n: usize, span: f64| EpidemicTrace {
            events: vec![
                InfectionEvent { t: 0.0, ip: "a".into() },
                InfectionEvent { t: span, ip: "b".into() },
            ],
            curve: vec![(0.0, 1), (span, n as u64)],
            t0: 0.0,
            t_end: span + 5.0,
            contacted_ips: n + 1,
            infected_ips: n,
            malicious_port: 445,
            internal: InternalFilter::All,
        };
        assert!((propagation_speed(&mk(10, 1000.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((propagation_speed(&mk(2, 50.0)).unwrap() - 4.0).abs() < 1e-12);
        // Zero span errors.
        let single = EpidemicTrace {
            events: vec![InfectionEvent { t: 0.0, ip: "a".into() }],
            curve: vec![(0.0, 1)],
            t0: 0.0,
            t_end: 9.0,
            contacted_ips: 1,
            infected_ips: 1,
            malicious_port: 445,
            internal: InternalFilter::All,
        };
        assert!(propagation_speed(&single).is_err());
    }

    #[test]
    fn curve_csv_roundtrip() {
        let trace = reconstruct(&toy_records(), 445, &InternalFilter::rfc1918()).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,cumulative_infected\n"));
        let back = EpidemicTrace::from_curve_csv(buf.as_slice()).unwrap();
        assert_eq!(back.curve, trace.curve);
        assert_eq!(back.t0, 0.0);
        assert_eq!(back.t_end, 5.0);
    }

    #[test]
    fn count_at_is_right_continuous_step_function() {
        let trace = reconstruct(&toy_records(), 445, &InternalFilter::rfc1918()).unwrap();
        assert_eq!(trace.count_at(-1.0), 0);
        assert_eq!(trace.count_at(0.0), 1);
        assert_eq!(trace.count_at(4.9), 1);
        assert_eq!(trace.count_at(5.0), 2);
        assert_eq!(trace.count_at(100.0), 2);
    }

    #[test]
    fn summary_fields() {
        let records = toy_records();
        let trace = reconstruct(&records, 445, &InternalFilter::rfc1918()).unwrap();
        let summary = summarize(&trace, Some(&records), Some(100));
        assert_eq!(summary.contacted_ips, 4);
        assert_eq!(summary.infected_ips, 2);
        assert!((summary.dt.unwrap() - 0.07).abs() < 1e-12);
        // Only one attempt per source → no gaps → QCoD unavailable.
        assert!(summary.qcod.is_none());
        assert!((summary.speed.unwrap() - 2.0 * 100.0 / 5.0).abs() < 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn qcod_is_scale_invariant(
                gaps in proptest::collection::vec(0.001f64..1e6, 4..40),
                scale in 0.001f64..1e4,
            ) {
                let base = qcod(&gaps).unwrap();
                let scaled: Vec<f64> = gaps.iter().map(|g| g * scale).collect();
                let after = qcod(&scaled).unwrap();
                prop_assert!((base - after).abs() < 1e-9, "{base} vs {after}");
            }

            #[test]
            fn curve_strictly_increasing(
                seed_times in proptest::collection::vec(0.0f64..1e4, 1..30),
            ) {
                let records: Vec<ConnRecord> = seed_times
                    .iter()
                    .enumerate()
                    .map(|(i, t)| rec(*t, &format!("10.0.0.{}", i % 20), "10.0.9.9", 445))
                    .collect();
                let trace = reconstruct(&records, 445, &InternalFilter::rfc1918()).unwrap();
                for pair in trace.curve.windows(2) {
                    prop_assert!(pair[1].1 == pair[0].1 + 1);
                    prop_assert!(pair[1].0 >= pair[0].0);
                }
                prop_assert!(trace.infected_ips <= trace.contacted_ips);
            }
        }
    }
}
