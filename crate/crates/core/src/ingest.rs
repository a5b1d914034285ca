//! Parsing of trade-flow, GDP and recession-window tables, and assembly of
//! per-year trade networks.
//!
//! All tables are comma separated UTF-8 with a mandatory header row:
//!
//! | table      | header                           |
//! |------------|----------------------------------|
//! | trade      | `year,reporter,partner,value_usd` |
//! | GDP        | `year,country,gdp_usd`           |
//! | recessions | `label,start,end` (`YYYY-MM`)    |

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use thiserror::Error;

pub const TRADE_HEADER: [&str; 4] = ["year", "reporter", "partner", "value_usd"];
pub const GDP_HEADER: [&str; 3] = ["year", "country", "gdp_usd"];
pub const RECESSION_HEADER: [&str; 3] = ["label", "start", "end"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: negative trade value {value}")]
    NegativeValue { line: u64, value: f64 },
    #[error("line {line}: bad country code {code:?} (expected 3 alphabetic characters)")]
    BadCountryCode { line: u64, code: String },
    #[error("line {line}: GDP must be positive, got {value}")]
    NonPositiveGdp { line: u64, value: f64 },
    #[error("line {line}: duplicate GDP entry for {country} in {year}")]
    DuplicateKey {
        line: u64,
        year: i32,
        country: CountryCode,
    },
    #[error("line {line}: malformed date {value:?} (expected YYYY-MM)")]
    MalformedDate { line: u64, value: String },
    #[error("line {line}: recession {label:?} starts after it ends")]
    StartAfterEnd { line: u64, label: String },
    #[error("bad header: expected `{expected}`, found `{found}`")]
    BadHeader { expected: String, found: String },
    #[error("no trade records for year {0}")]
    EmptyYear(i32),
    #[error("invalid trade network: {0}")]
    InvalidNetwork(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A syntactically valid three-letter country code.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryCode(String);

impl CountryCode {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for CountryCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() == 3 && s.bytes().all(|b| b.is_ascii_alphabetic()) {
            Ok(CountryCode(s.to_owned()))
        } else {
            Err(s.to_owned())
        }
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for CountryCode {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// One directed export flow: `reporter` exported `export_value` USD to `partner`.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeFlowRecord {
    pub year: i32,
    pub reporter: CountryCode,
    pub partner: CountryCode,
    pub export_value: f64,
}

/// Result of parsing a trade table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TradeTable {
    pub records: Vec<TradeFlowRecord>,
    /// Rows with `reporter == partner`, dropped during parsing.
    pub self_loops: usize,
}

impl TradeTable {
    /// Sorted, deduplicated list of years that carry at least one record.
    pub fn years(&self) -> Vec<i32> {
        let mut years: Vec<i32> = self.records.iter().map(|r| r.year).collect();
        years.sort_unstable();
        years.dedup();
        years
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdpRecord {
    pub year: i32,
    pub country: CountryCode,
    pub gdp: f64,
}

/// GDP lookup keyed by `(year, country)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GdpTable {
    entries: BTreeMap<(i32, CountryCode), f64>,
}

impl GdpTable {
    pub fn get(&self, year: i32, country: &CountryCode) -> Option<f64> {
        self.entries.get(&(year, country.clone())).copied()
    }

    /// Inserts a value, returning the previous one if the key was present.
    pub fn insert(&mut self, year: i32, country: CountryCode, gdp: f64) -> Option<f64> {
        self.entries.insert((year, country), gdp)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = GdpRecord> + '_ {
        self.entries.iter().map(|((year, country), gdp)| GdpRecord {
            year: *year,
            country: country.clone(),
            gdp: *gdp,
        })
    }
}

impl FromIterator<GdpRecord> for GdpTable {
    fn from_iter<I: IntoIterator<Item = GdpRecord>>(iter: I) -> Self {
        let mut table = GdpTable::default();
        for r in iter {
            table.insert(r.year, r.country, r.gdp);
        }
        table
    }
}

/// Calendar month, ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u8,
}

impl YearMonth {
    pub fn new(year: i32, month: u8) -> Option<Self> {
        (1..=12)
            .contains(&month)
            .then_some(YearMonth { year, month })
    }
}

impl FromStr for YearMonth {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, m) = s.split_once('-').ok_or(())?;
        if y.len() != 4 || m.len() != 2 || !y.bytes().chain(m.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(());
        }
        let year = y.parse().map_err(|_| ())?;
        let month = m.parse().map_err(|_| ())?;
        YearMonth::new(year, month).ok_or(())
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecessionWindow {
    pub label: String,
    pub start: YearMonth,
    pub end: YearMonth,
}

/// How directed flows `X_ij`, `X_ji` are combined into the undirected weight `M_ij`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Symmetrization {
    #[default]
    Sum,
    Max,
    Mean,
}

impl Symmetrization {
    fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            Symmetrization::Sum => a + b,
            Symmetrization::Max => a.max(b),
            Symmetrization::Mean => 0.5 * (a + b),
        }
    }
}

impl FromStr for Symmetrization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sum" => Ok(Symmetrization::Sum),
            "max" => Ok(Symmetrization::Max),
            "mean" => Ok(Symmetrization::Mean),
            other => Err(format!("unknown symmetrization mode {other:?}")),
        }
    }
}

/// Dense square matrix indexed by an ordered country list.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CountryMatrix {
    pub(crate) countries: Vec<CountryCode>,
    pub(crate) values: Vec<f64>,
}

impl CountryMatrix {
    #[inline]
    pub(crate) fn n(&self) -> usize {
        self.countries.len()
    }

    #[inline]
    pub(crate) fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }
}

/// Directed export matrix for one year; duplicate rows summed.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedFlows {
    pub year: i32,
    matrix: CountryMatrix,
}

impl DirectedFlows {
    pub fn from_records(records: &[TradeFlowRecord], year: i32) -> Result<Self, IngestError> {
        let in_year: Vec<&TradeFlowRecord> = records
            .iter()
            .filter(|r| r.year == year && r.reporter != r.partner)
            .collect();
        if in_year.is_empty() {
            return Err(IngestError::EmptyYear(year));
        }
        let mut countries: Vec<CountryCode> = in_year
            .iter()
            .flat_map(|r| [r.reporter.clone(), r.partner.clone()])
            .collect();
        countries.sort();
        countries.dedup();
        let n = countries.len();
        let index = |c: &CountryCode| countries.binary_search(c).expect("country collected above");
        let mut values = vec![0.0; n * n];
        for r in in_year {
            values[index(&r.reporter) * n + index(&r.partner)] += r.export_value;
        }
        Ok(DirectedFlows {
            year,
            matrix: CountryMatrix { countries, values },
        })
    }

    pub fn countries(&self) -> &[CountryCode] {
        &self.matrix.countries
    }

    /// Exports from country `i` to country `j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    /// Row-major `n × n` export values.
    pub fn values(&self) -> &[f64] {
        &self.matrix.values
    }
}

/// Undirected weighted trade network for one year.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeNetwork {
    year: i32,
    matrix: CountryMatrix,
}

impl TradeNetwork {
    /// Builds a network from a dense row-major weight matrix, checking every
    /// structural invariant.
    pub fn from_dense(
        year: i32,
        countries: Vec<CountryCode>,
        weights: Vec<f64>,
    ) -> Result<Self, IngestError> {
        let n = countries.len();
        if weights.len() != n * n {
            return Err(IngestError::InvalidNetwork(format!(
                "{} weights for {n} countries",
                weights.len()
            )));
        }
        if countries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(IngestError::InvalidNetwork(
                "countries must be sorted and unique".into(),
            ));
        }
        for i in 0..n {
            if weights[i * n + i] != 0.0 {
                return Err(IngestError::InvalidNetwork(format!(
                    "nonzero diagonal at {i}"
                )));
            }
            for j in 0..n {
                let w = weights[i * n + j];
                if !w.is_finite() || w < 0.0 {
                    return Err(IngestError::InvalidNetwork(format!(
                        "bad weight {w} at ({i},{j})"
                    )));
                }
                if w != weights[j * n + i] {
                    return Err(IngestError::InvalidNetwork(format!(
                        "asymmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(TradeNetwork {
            year,
            matrix: CountryMatrix {
                countries,
                values: weights,
            },
        })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn countries(&self) -> &[CountryCode] {
        &self.matrix.countries
    }

    pub fn len(&self) -> usize {
        self.matrix.n()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.n() == 0
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    /// Row-major `n × n` weights.
    pub fn weights(&self) -> &[f64] {
        &self.matrix.values
    }

    pub fn index_of(&self, country: &CountryCode) -> Option<usize> {
        self.matrix.countries.binary_search(country).ok()
    }

    /// Copy with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        TradeNetwork {
            year: self.year,
            matrix: CountryMatrix {
                countries: self.matrix.countries.clone(),
                values: self.matrix.values.iter().map(|w| w * factor).collect(),
            },
        }
    }
}

/// Combines one year's directed flows into an undirected network.
pub fn build_network(
    records: &[TradeFlowRecord],
    year: i32,
    mode: Symmetrization,
) -> Result<TradeNetwork, IngestError> {
    Ok(symmetrize(
        &DirectedFlows::from_records(records, year)?,
        mode,
    ))
}

pub fn symmetrize(flows: &DirectedFlows, mode: Symmetrization) -> TradeNetwork {
    let n = flows.countries().len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let w = mode.combine(flows.get(i, j), flows.get(j, i));
            values[i * n + j] = w;
            values[j * n + i] = w;
        }
    }
    TradeNetwork {
        year: flows.year,
        matrix: CountryMatrix {
            countries: flows.countries().to_vec(),
            values,
        },
    }
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(source)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), IngestError> {
    let found = rdr.headers()?;
    if found.iter().ne(expected.iter().copied()) {
        return Err(IngestError::BadHeader {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn expect_columns(rec: &csv::StringRecord, n: usize) -> Result<(), IngestError> {
    if rec.len() != n {
        return Err(IngestError::MalformedRow {
            line: line_of(rec),
            reason: format!("expected {n} columns, found {}", rec.len()),
        });
    }
    Ok(())
}

fn parse_field<T: FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    what: &str,
) -> Result<T, IngestError> {
    rec[idx].parse().map_err(|_| IngestError::MalformedRow {
        line: line_of(rec),
        reason: format!("unparsable {what} {:?}", &rec[idx]),
    })
}

fn parse_finite(rec: &csv::StringRecord, idx: usize, what: &str) -> Result<f64, IngestError> {
    let v: f64 = parse_field(rec, idx, what)?;
    if !v.is_finite() {
        return Err(IngestError::MalformedRow {
            line: line_of(rec),
            reason: format!("non-finite {what} {:?}", &rec[idx]),
        });
    }
    Ok(v)
}

fn parse_country(rec: &csv::StringRecord, idx: usize) -> Result<CountryCode, IngestError> {
    rec[idx]
        .parse()
        .map_err(|code| IngestError::BadCountryCode {
            line: line_of(rec),
            code,
        })
}

/// Parses a trade table. Self-loops are dropped and counted.
pub fn parse_trade_csv<R: Read>(source: R) -> Result<TradeTable, IngestError> {
    let mut rdr = reader(source);
    check_header(&mut rdr, &TRADE_HEADER)?;
    let mut table = TradeTable::default();
    for row in rdr.records() {
        let rec = row?;
        expect_columns(&rec, 4)?;
        let year = parse_field(&rec, 0, "year")?;
        let reporter = parse_country(&rec, 1)?;
        let partner = parse_country(&rec, 2)?;
        let export_value = parse_finite(&rec, 3, "value")?;
        if export_value < 0.0 {
            return Err(IngestError::NegativeValue {
                line: line_of(&rec),
                value: export_value,
            });
        }
        if reporter == partner {
            table.self_loops += 1;
            continue;
        }
        table.records.push(TradeFlowRecord {
            year,
            reporter,
            partner,
            export_value,
        });
    }
    if table.self_loops > 0 {
        log::warn!("dropped {} self-loop trade rows", table.self_loops);
    }
    Ok(table)
}

/// Writes records in the trade table format; parsing the output reproduces
/// the records exactly.
pub fn write_trade_csv<W: Write>(records: &[TradeFlowRecord], sink: W) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(sink);
    wtr.write_record(TRADE_HEADER)?;
    for r in records {
        wtr.write_record([
            r.year.to_string(),
            r.reporter.to_string(),
            r.partner.to_string(),
            r.export_value.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn parse_gdp_csv<R: Read>(source: R) -> Result<GdpTable, IngestError> {
    let mut rdr = reader(source);
    check_header(&mut rdr, &GDP_HEADER)?;
    let mut table = GdpTable::default();
    for row in rdr.records() {
        let rec = row?;
        expect_columns(&rec, 3)?;
        let year = parse_field(&rec, 0, "year")?;
        let country = parse_country(&rec, 1)?;
        let gdp = parse_finite(&rec, 2, "gdp")?;
        if gdp <= 0.0 {
            return Err(IngestError::NonPositiveGdp {
                line: line_of(&rec),
                value: gdp,
            });
        }
        if table.get(year, &country).is_some() {
            return Err(IngestError::DuplicateKey {
                line: line_of(&rec),
                year,
                country,
            });
        }
        table.insert(year, country, gdp);
    }
    Ok(table)
}

/// Parses recession windows, returned ordered by start date. Overlapping
/// windows are accepted with a warning.
pub fn parse_recessions<R: Read>(source: R) -> Result<Vec<RecessionWindow>, IngestError> {
    let mut rdr = reader(source);
    check_header(&mut rdr, &RECESSION_HEADER)?;
    let mut windows = Vec::new();
    for row in rdr.records() {
        let rec = row?;
        expect_columns(&rec, 3)?;
        let date = |idx: usize| {
            rec[idx]
                .parse::<YearMonth>()
                .map_err(|_| IngestError::MalformedDate {
                    line: line_of(&rec),
                    value: rec[idx].to_owned(),
                })
        };
        let (start, end) = (date(1)?, date(2)?);
        if start > end {
            return Err(IngestError::StartAfterEnd {
                line: line_of(&rec),
                label: rec[0].to_owned(),
            });
        }
        windows.push(RecessionWindow {
            label: rec[0].to_owned(),
            start,
            end,
        });
    }
    windows.sort_by_key(|w| (w.start, w.end));
    for pair in windows.windows(2) {
        if pair[1].start <= pair[0].end {
            log::warn!(
                "recession windows {:?} and {:?} overlap",
                pair[0].label,
                pair[1].label
            );
        }
    }
    Ok(windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cc(s: &str) -> CountryCode {
        s.parse().unwrap()
    }

    fn rec(year: i32, r: &str, p: &str, v: f64) -> TradeFlowRecord {
        TradeFlowRecord {
            year,
            reporter: cc(r),
            partner: cc(p),
            export_value: v,
        }
    }

    const TRADE_HDR: &str = "year,reporter,partner,value_usd\n";

    #[test]
    fn parses_single_flow() {
        let t =
            parse_trade_csv(format!("{TRADE_HDR}1969,USA,CAN,8100000000\n").as_bytes()).unwrap();
        assert_eq!(t.records, vec![rec(1969, "USA", "CAN", 8.1e9)]);
        assert_eq!(t.self_loops, 0);
    }

    #[test]
    fn header_only_is_empty() {
        let t = parse_trade_csv(TRADE_HDR.as_bytes()).unwrap();
        assert!(t.records.is_empty());
    }

    #[test]
    fn self_loop_dropped_and_counted() {
        let t = parse_trade_csv(format!("{TRADE_HDR}1969,USA,USA,5\n").as_bytes()).unwrap();
        assert!(t.records.is_empty());
        assert_eq!(t.self_loops, 1);
    }

    #[test]
    fn trade_errors_carry_line_numbers() {
        let bad =
            |body: &str| parse_trade_csv(format!("{TRADE_HDR}1969,USA,CAN,1\n{body}\n").as_bytes());
        assert!(matches!(
            bad("1969,USA,CAN"),
            Err(IngestError::MalformedRow { line: 3, .. })
        ));
        assert!(matches!(
            bad("1969,USA,CAN,abc"),
            Err(IngestError::MalformedRow { line: 3, .. })
        ));
        assert!(matches!(
            bad("1969,USA,CAN,-1"),
            Err(IngestError::NegativeValue { line: 3, .. })
        ));
        assert!(matches!(
            bad("1969,US1,CAN,1"),
            Err(IngestError::BadCountryCode { line: 3, .. })
        ));
        assert!(matches!(
            bad("1969,USAX,CAN,1"),
            Err(IngestError::BadCountryCode { line: 3, .. })
        ));
        assert!(matches!(
            parse_trade_csv("year,from,to,value\n".as_bytes()),
            Err(IngestError::BadHeader { .. })
        ));
    }

    #[test]
    fn symmetrization_modes() {
        let flows = [rec(2000, "AAA", "BBB", 3.0), rec(2000, "BBB", "AAA", 2.0)];
        let w = |mode| build_network(&flows, 2000, mode).unwrap().weight(0, 1);
        assert_eq!(w(Symmetrization::Sum), 5.0);
        assert_eq!(w(Symmetrization::Max), 3.0);
        assert_eq!(w(Symmetrization::Mean), 2.5);
        let one_way = build_network(&flows[..1], 2000, Symmetrization::Sum).unwrap();
        assert_eq!(one_way.weight(0, 1), 3.0);
        assert_eq!(one_way.weight(1, 0), 3.0);
    }

    #[test]
    fn duplicates_summed_and_other_years_excluded() {
        let flows = [
            rec(2000, "AAA", "BBB", 1.0),
            rec(2000, "AAA", "BBB", 2.0),
            rec(2001, "AAA", "CCC", 7.0),
        ];
        let net = build_network(&flows, 2000, Symmetrization::Sum).unwrap();
        assert_eq!(net.countries(), &[cc("AAA"), cc("BBB")]);
        assert_eq!(net.weight(0, 1), 3.0);
        assert!(matches!(
            build_network(&flows, 1999, Symmetrization::Sum),
            Err(IngestError::EmptyYear(1999))
        ));
    }

    #[test]
    fn gdp_table() {
        let hdr = "year,country,gdp_usd\n";
        let t = parse_gdp_csv(format!("{hdr}2007,USA,14480000000000\n").as_bytes()).unwrap();
        assert_eq!(t.get(2007, &cc("USA")), Some(1.448e13));
        assert!(matches!(
            parse_gdp_csv(format!("{hdr}2007,USA,1\n2007,USA,2\n").as_bytes()),
            Err(IngestError::DuplicateKey { line: 3, .. })
        ));
        assert!(matches!(
            parse_gdp_csv(format!("{hdr}2007,USA,0\n").as_bytes()),
            Err(IngestError::NonPositiveGdp { line: 2, .. })
        ));
        assert!(matches!(
            parse_gdp_csv(format!("{hdr}2007,USA\n").as_bytes()),
            Err(IngestError::MalformedRow { .. })
        ));
    }

    #[test]
    fn recessions() {
        let hdr = "label,start,end\n";
        let w = parse_recessions(
            format!("{hdr}dotcom,2001-03,2001-11\ngreat-recession,2007-12,2009-06\n").as_bytes(),
        )
        .unwrap();
        assert_eq!(w[1].label, "great-recession");
        assert_eq!(w[1].start, YearMonth::new(2007, 12).unwrap());
        assert_eq!(w[1].end, YearMonth::new(2009, 6).unwrap());
        assert_eq!(w[0].label, "dotcom");
        assert!(matches!(
            parse_recessions(format!("{hdr}x,2009-06,2007-12\n").as_bytes()),
            Err(IngestError::StartAfterEnd { .. })
        ));
        assert!(matches!(
            parse_recessions(format!("{hdr}x,2009-13,2010-01\n").as_bytes()),
            Err(IngestError::MalformedDate { .. })
        ));
        assert!(matches!(
            parse_recessions(format!("{hdr}x,2009/01,2010-01\n").as_bytes()),
            Err(IngestError::MalformedDate { .. })
        ));
        assert!(parse_recessions(hdr.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn recessions_sorted_by_start() {
        let w =
            parse_recessions("label,start,end\nb,1990-07,1991-03\na,1973-11,1975-03\n".as_bytes())
                .unwrap();
        assert_eq!(w[0].label, "a");
    }

    #[test]
    fn from_dense_rejects_asymmetry() {
        let c = vec![cc("AAA"), cc("BBB")];
        assert!(TradeNetwork::from_dense(0, c.clone(), vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(TradeNetwork::from_dense(0, c.clone(), vec![1.0, 1.0, 1.0, 0.0]).is_err());
        assert!(TradeNetwork::from_dense(0, vec![cc("BBB"), cc("AAA")], vec![0.0; 4]).is_err());
        assert!(TradeNetwork::from_dense(0, c, vec![0.0, 1.0, 1.0, 0.0]).is_ok());
    }

    fn arb_code() -> impl Strategy<Value = CountryCode> {
        "[A-E]{3}".prop_map(|s| s.parse().unwrap())
    }

    fn arb_records() -> impl Strategy<Value = Vec<TradeFlowRecord>> {
        prop::collection::vec(
            (1990..1993i32, arb_code(), arb_code(), 0.0..1e12f64).prop_filter_map(
                "self-loop",
                |(year, reporter, partner, export_value)| {
                    (reporter != partner).then_some(TradeFlowRecord {
                        year,
                        reporter,
                        partner,
                        export_value,
                    })
                },
            ),
            1..40,
        )
    }

    proptest! {
        #[test]
        fn network_symmetric_zero_diagonal(records in arb_records(), mode in prop_oneof![
            Just(Symmetrization::Sum), Just(Symmetrization::Max), Just(Symmetrization::Mean)
        ]) {
            let year = records[0].year;
            let net = build_network(&records, year, mode).unwrap();
            let n = net.len();
            for i in 0..n {
                prop_assert_eq!(net.weight(i, i), 0.0);
                for j in 0..n {
                    prop_assert_eq!(net.weight(i, j), net.weight(j, i));
                }
            }
        }

        #[test]
        fn sum_mode_preserves_total(records in arb_records()) {
            let year = records[0].year;
            let net = build_network(&records, year, Symmetrization::Sum).unwrap();
            let n = net.len();
            let upper: f64 = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .map(|(i, j)| net.weight(i, j)).sum();
            let direct: f64 = records.iter().filter(|r| r.year == year).map(|r| r.export_value).sum();
            prop_assert!((upper - direct).abs() <= 1e-9 * direct.max(1.0));
        }

        #[test]
        fn trade_csv_round_trip(records in arb_records()) {
            let mut buf = Vec::new();
            write_trade_csv(&records, &mut buf).unwrap();
            let parsed = parse_trade_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(parsed.records.len(), records.len());
            for (a, b) in parsed.records.iter().zip(&records) {
                prop_assert_eq!(a.export_value.to_bits(), b.export_value.to_bits());
                prop_assert_eq!(a, b);
            }
            let mut again = Vec::new();
            write_trade_csv(&parsed.records, &mut again).unwrap();
            prop_assert_eq!(buf, again);
        }
    }
}
