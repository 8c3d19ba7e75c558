//! Default-probability panels: loading, period splitting and descriptive statistics.
//!
//! A panel is a dated matrix of one-year default probabilities, one row per
//! trading day and one column per institution. The wide CSV layout is
//! `date,TICKER1,TICKER2,...` with ISO dates and PDs as decimal fractions.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PD floor applied before taking logs when zeros are present.
pub const DEFAULT_PD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Institution {
    pub ticker: String,
    pub name: String,
    pub country: Option<String>,
}

impl Institution {
    pub fn new(ticker: impl Into<String>) -> Self {
        let ticker = ticker.into();
        Institution {
            name: ticker.clone(),
            ticker,
            country: None,
        }
    }
}

/// Dated PD matrix: rows aligned to `dates`, columns to `institutions`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSeries {
    pub dates: Vec<NaiveDate>,
    pub institutions: Vec<Institution>,
    pub values: DMatrix<f64>,
}

impl PanelSeries {
    pub fn new(
        dates: Vec<NaiveDate>,
        institutions: Vec<Institution>,
        values: DMatrix<f64>,
    ) -> Result<Self> {
        if values.nrows() != dates.len() || values.ncols() != institutions.len() {
            return Err(Error::Dimension(format!(
                "values are {}x{}, expected {}x{}",
                values.nrows(),
                values.ncols(),
                dates.len(),
                institutions.len()
            )));
        }
        if dates.len() < 2 {
            return Err(Error::TooSmall {
                what: "rows",
                needed: 2,
                found: dates.len(),
            });
        }
        if institutions.len() < 2 {
            return Err(Error::TooSmall {
                what: "columns",
                needed: 2,
                found: institutions.len(),
            });
        }
        for w in dates.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::UnorderedDates {
                    line: 0,
                    date: w[1].to_string(),
                });
            }
        }
        let mut seen = BTreeSet::new();
        for inst in &institutions {
            if !seen.insert(inst.ticker.as_str()) {
                return Err(Error::DuplicateTicker(inst.ticker.clone()));
            }
        }
        for (c, col) in values.column_iter().enumerate() {
            for &v in col.iter() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::ValueOutOfRange {
                        line: 0,
                        column: institutions[c].ticker.clone(),
                        value: v,
                    });
                }
            }
        }
        Ok(PanelSeries {
            dates,
            institutions,
            values,
        })
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_institutions(&self) -> usize {
        self.institutions.len()
    }

    pub fn tickers(&self) -> Vec<String> {
        self.institutions.iter().map(|i| i.ticker.clone()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.values.row(r).iter().copied().collect()
    }

    /// Attach countries (and names, when given) from a ticker map.
    pub fn with_countries(mut self, map: &CountryMap) -> Result<Self> {
        for inst in &mut self.institutions {
            let entry = map
                .get(&inst.ticker)
                .ok_or_else(|| Error::UnmappedTicker(inst.ticker.clone()))?;
            inst.country = Some(entry.country.clone());
            if let Some(name) = &entry.name {
                inst.name = name.clone();
            }
        }
        Ok(self)
    }
}

/// Column mapping for the wide CSV layout.
#[derive(Debug, Clone)]
pub struct PanelSchema {
    pub date_column: String,
}

impl Default for PanelSchema {
    fn default() -> Self {
        PanelSchema {
            date_column: "date".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedPanel {
    pub panel: PanelSeries,
    /// Rows discarded because at least one cell was blank.
    pub dropped_rows: usize,
}

/// Read a wide-format PD panel. Rows with any blank cell are dropped and counted.
pub fn load_panel<R: Read>(source: R, schema: &PanelSchema) -> Result<LoadedPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = rdr.headers()?.clone();
    let date_idx = headers
        .iter()
        .position(|h| h == schema.date_column)
        .ok_or_else(|| {
            Error::InvalidInput(format!("missing date column {:?}", schema.date_column))
        })?;

    let mut tickers = Vec::new();
    let mut seen = BTreeSet::new();
    let mut value_cols = Vec::new();
    for (k, h) in headers.iter().enumerate() {
        if k == date_idx {
            continue;
        }
        if !seen.insert(h.to_string()) {
            return Err(Error::DuplicateTicker(h.to_string()));
        }
        tickers.push(h.to_string());
        value_cols.push(k);
    }

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut flat: Vec<f64> = Vec::new();
    let mut dropped = 0;
    for (rec_no, rec) in rdr.records().enumerate() {
        let rec = rec?;
        // header is line 1
        let line = rec_no + 2;
        let raw_date = rec.get(date_idx).unwrap_or("");
        let date =
            NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| Error::MalformedDate {
                line,
                value: raw_date.to_string(),
            })?;
        if let Some(prev) = dates.last() {
            if *prev >= date {
                return Err(Error::UnorderedDates {
                    line,
                    date: raw_date.to_string(),
                });
            }
        }
        let cells: Vec<&str> = value_cols
            .iter()
            .map(|&k| rec.get(k).unwrap_or(""))
            .collect();
        if cells.iter().any(|c| c.is_empty()) {
            dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::MalformedValue {
                line,
                column: tickers[c].clone(),
                value: cell.to_string(),
            })?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ValueOutOfRange {
                    line,
                    column: tickers[c].clone(),
                    value: v,
                });
            }
            row.push(v);
        }
        dates.push(date);
        flat.extend(row);
    }

    if dates.len() < 2 {
        return Err(Error::TooSmall {
            what: "rows",
            needed: 2,
            found: dates.len(),
        });
    }
    let values = DMatrix::from_row_slice(dates.len(), tickers.len(), &flat);
    let institutions = tickers.into_iter().map(Institution::new).collect();
    Ok(LoadedPanel {
        panel: PanelSeries::new(dates, institutions, values)?,
        dropped_rows: dropped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountryEntry {
    pub country: String,
    pub name: Option<String>,
}

pub type CountryMap = BTreeMap<String, CountryEntry>;

/// Read a `ticker,country[,name]` CSV.
pub fn load_country_map<R: Read>(source: R) -> Result<CountryMap> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut map = CountryMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let ticker = rec.get(0).unwrap_or("").to_string();
        let country = rec.get(1).unwrap_or("").to_string();
        if ticker.is_empty() || country.is_empty() {
            return Err(Error::InvalidInput(format!(
                "country map row {:?} needs ticker and country",
                rec
            )));
        }
        let name = rec.get(2).filter(|s| !s.is_empty()).map(str::to_string);
        if map
            .insert(ticker.clone(), CountryEntry { country, name })
            .is_some()
        {
            return Err(Error::DuplicateTicker(ticker));
        }
    }
    Ok(map)
}

/// Write a panel in the wide layout read by [`load_panel`].
pub fn write_panel<W: std::io::Write>(panel: &PanelSeries, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["date".to_string()];
    header.extend(panel.tickers());
    wtr.write_record(&header)?;
    for (r, d) in panel.dates.iter().enumerate() {
        let mut rec = vec![d.format("%Y-%m-%d").to_string()];
        rec.extend(panel.values.row(r).iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Write `ticker,country,name` rows in ticker order.
pub fn write_country_map<W: std::io::Write>(map: &CountryMap, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["ticker", "country", "name"])?;
    for (ticker, e) in map {
        wtr.write_record([
            ticker.as_str(),
            e.country.as_str(),
            e.name.as_deref().unwrap_or(""),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// A named, date-inclusive analysis window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodSpec {
    pub name: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl PeriodSpec {
    pub fn new(name: impl Into<String>, start: NaiveDate, end: NaiveDate) -> Self {
        PeriodSpec {
            name: name.into(),
            start,
            end,
        }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

/// The four windows used for the European bank study.
pub fn default_periods() -> Vec<PeriodSpec> {
    let d = |y, m, dd| NaiveDate::from_ymd_opt(y, m, dd).expect("valid literal date");
    vec![
        PeriodSpec::new("Pre-crises", d(2005, 1, 3), d(2008, 1, 2)),
        PeriodSpec::new("Financial Crisis", d(2008, 1, 3), d(2010, 6, 2)),
        PeriodSpec::new("Sovereign Crisis", d(2010, 6, 3), d(2013, 1, 2)),
        PeriodSpec::new("Post-crises", d(2013, 1, 3), d(2016, 11, 17)),
    ]
}

pub fn validate_periods(periods: &[PeriodSpec]) -> Result<()> {
    if periods.is_empty() {
        return Err(Error::InvalidPeriods("no periods given".into()));
    }
    for p in periods {
        if p.start > p.end {
            return Err(Error::InvalidPeriods(format!(
                "{:?} starts after it ends",
                p.name
            )));
        }
    }
    for w in periods.windows(2) {
        if w[1].start <= w[0].end {
            return Err(Error::InvalidPeriods(format!(
                "{:?} overlaps or precedes {:?}",
                w[1].name, w[0].name
            )));
        }
    }
    let mut names = BTreeSet::new();
    for p in periods {
        if !names.insert(&p.name) {
            return Err(Error::InvalidPeriods(format!(
                "duplicate name {:?}",
                p.name
            )));
        }
    }
    Ok(())
}

/// One sub-panel per period, rows selected by inclusive date membership.
pub fn split_periods(panel: &PanelSeries, periods: &[PeriodSpec]) -> Result<Vec<PanelSeries>> {
    validate_periods(periods)?;
    periods
        .iter()
        .map(|p| {
            let rows: Vec<usize> = panel
                .dates
                .iter()
                .enumerate()
                .filter(|(_, d)| p.contains(**d))
                .map(|(r, _)| r)
                .collect();
            if rows.is_empty() {
                return Err(Error::EmptyPeriod(p.name.clone()));
            }
            select_rows(panel, &rows).map_err(|e| match e {
                Error::TooSmall { .. } => Error::EmptyPeriod(p.name.clone()),
                other => other,
            })
        })
        .collect()
}

fn select_rows(panel: &PanelSeries, rows: &[usize]) -> Result<PanelSeries> {
    let values = panel.values.select_rows(rows.iter());
    let dates = rows.iter().map(|&r| panel.dates[r]).collect();
    PanelSeries::new(dates, panel.institutions.clone(), values)
}

/// Country-level panel: each country's series is the cross-bank mean per date.
/// Countries are ordered alphabetically.
pub fn country_panel(panel: &PanelSeries) -> Result<PanelSeries> {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (j, inst) in panel.institutions.iter().enumerate() {
        let c = inst
            .country
            .as_ref()
            .ok_or_else(|| Error::UnmappedTicker(inst.ticker.clone()))?;
        groups.entry(c.clone()).or_default().push(j);
    }
    let mut values = DMatrix::zeros(panel.n_dates(), groups.len());
    let mut institutions = Vec::with_capacity(groups.len());
    for (k, (country, cols)) in groups.iter().enumerate() {
        for r in 0..panel.n_dates() {
            let s: f64 = cols.iter().map(|&j| panel.values[(r, j)]).sum();
            values[(r, k)] = s / cols.len() as f64;
        }
        institutions.push(Institution {
            ticker: country.clone(),
            name: country.clone(),
            country: Some(country.clone()),
        });
    }
    PanelSeries::new(panel.dates.clone(), institutions, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Bank,
    Country,
}

/// Descriptive statistics of one PD series. Skewness and kurtosis are `None`
/// for constant series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub entity: String,
    pub mean: f64,
    pub sd: f64,
    pub max: f64,
    pub min: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

pub fn summarize(panel: &PanelSeries, level: Level) -> Result<Vec<SummaryRow>> {
    let p = match level {
        Level::Bank => panel.clone(),
        Level::Country => country_panel(panel)?,
    };
    Ok((0..p.n_institutions())
        .map(|j| summary_row(&p.institutions[j].ticker, &p.column(j)))
        .collect())
}

pub fn summary_row(entity: &str, xs: &[f64]) -> SummaryRow {
    let m = Moments::of(xs);
    SummaryRow {
        entity: entity.to_string(),
        mean: m.mean,
        sd: m.sd(),
        max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min: xs.iter().copied().fold(f64::INFINITY, f64::min),
        skewness: m.skewness(),
        kurtosis: m.excess_kurtosis(),
    }
}

/// Central moments (biased, divide by n).
#[derive(Debug, Clone, Copy)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &x in xs {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        Moments {
            n,
            mean,
            m2: m2 / nf,
            m3: m3 / nf,
            m4: m4 / nf,
        }
    }

    /// Sample standard deviation (n - 1 denominator).
    pub fn sd(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 * self.n as f64 / (self.n as f64 - 1.0)).sqrt()
    }

    fn degenerate(&self) -> bool {
        self.m2 <= f64::EPSILON * f64::EPSILON * self.mean.abs().max(1.0)
    }

    pub fn skewness(&self) -> Option<f64> {
        (!self.degenerate()).then(|| self.m3 / self.m2.powf(1.5))
    }

    pub fn excess_kurtosis(&self) -> Option<f64> {
        (!self.degenerate()).then(|| self.m4 / (self.m2 * self.m2) - 3.0)
    }
}

/// Elementwise natural log of the PD matrix. With `floor`, values below it
/// are raised to it first; without, any zero is an error.
pub fn log_transform(panel: &PanelSeries, floor: Option<f64>) -> Result<DMatrix<f64>> {
    let mut out = panel.values.clone();
    for c in 0..out.ncols() {
        for r in 0..out.nrows() {
            let v = out[(r, c)];
            let v = match floor {
                Some(f) => v.max(f),
                None => v,
            };
            if v <= 0.0 {
                return Err(Error::NonPositivePd {
                    row: r,
                    column: panel.institutions[c].ticker.clone(),
                });
            }
            out[(r, c)] = v.ln();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, LogNormal};

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn loads_three_rows() {
        let csv = "date,A,B\n2005-01-03,0.01,0.01\n2005-01-04,0.01,0.01\n2005-01-05,0.01,0.01\n";
        let lp = load_panel(csv.as_bytes(), &PanelSchema::default()).unwrap();
        assert_eq!(lp.panel.values.shape(), (3, 2));
        assert_eq!(lp.dropped_rows, 0);
        assert!(lp.panel.values.iter().all(|&v| v == 0.01));
        assert_eq!(lp.panel.tickers(), vec!["A", "B"]);
    }

    #[test]
    fn write_read_round_trip() {
        let mut panel = business_panel("2005-01-03", 4);
        panel.values[(1, 1)] = 0.000123456;
        let mut buf = Vec::new();
        write_panel(&panel, &mut buf).unwrap();
        let back = load_panel(buf.as_slice(), &PanelSchema::default())
            .unwrap()
            .panel;
        assert_eq!(back.values, panel.values);
        assert_eq!(back.dates, panel.dates);

        let mut map = CountryMap::new();
        map.insert(
            "A".into(),
            CountryEntry {
                country: "IT".into(),
                name: Some("Bank, A".into()),
            },
        );
        map.insert(
            "B".into(),
            CountryEntry {
                country: "ES".into(),
                name: None,
            },
        );
        let mut buf = Vec::new();
        write_country_map(&map, &mut buf).unwrap();
        assert_eq!(load_country_map(buf.as_slice()).unwrap(), map);
    }

    #[test]
    fn rejects_out_of_range() {
        let csv = "date,A,B\n2005-01-03,0.01,1.5\n2005-01-04,0.01,0.01\n";
        let err = load_panel(csv.as_bytes(), &PanelSchema::default()).unwrap_err();
        assert!(err.to_string().contains("value outside [0,1]"), "{err}");
    }

    #[test]
    fn drops_blank_rows() {
        let csv = "date,A,B\n2005-01-03,0.01,0.02\n2005-01-04,,0.02\n2005-01-05,0.01,0.02\n\
                   2005-01-06,0.01,0.02\n2005-01-07,0.01,0.02\n";
        let lp = load_panel(csv.as_bytes(), &PanelSchema::default()).unwrap();
        assert_eq!(lp.panel.n_dates(), 4);
        assert_eq!(lp.dropped_rows, 1);
        assert!(!lp.panel.dates.contains(&d("2005-01-04")));
    }

    #[test]
    fn load_errors() {
        let s = PanelSchema::default();
        let bad_date = "date,A,B\n2005-13-03,0.01,0.02\n2005-01-04,0.01,0.02\n";
        assert!(matches!(
            load_panel(bad_date.as_bytes(), &s),
            Err(Error::MalformedDate { line: 2, .. })
        ));
        let dup = "date,A,A\n2005-01-03,0.01,0.02\n2005-01-04,0.01,0.02\n";
        assert!(matches!(
            load_panel(dup.as_bytes(), &s),
            Err(Error::DuplicateTicker(_))
        ));
        let short = "date,A,B\n2005-01-03,0.01,0.02\n2005-01-04,,0.02\n";
        assert!(matches!(
            load_panel(short.as_bytes(), &s),
            Err(Error::TooSmall { .. })
        ));
        let unordered = "date,A,B\n2005-01-04,0.01,0.02\n2005-01-03,0.01,0.02\n";
        assert!(matches!(
            load_panel(unordered.as_bytes(), &s),
            Err(Error::UnorderedDates { .. })
        ));
    }

    fn business_panel(start: &str, n: usize) -> PanelSeries {
        let mut dates = Vec::new();
        let mut day = d(start);
        while dates.len() < n {
            use chrono::Datelike;
            if day.weekday().num_days_from_monday() < 5 {
                dates.push(day);
            }
            day = day.succ_opt().unwrap();
        }
        let values = DMatrix::from_fn(n, 2, |r, c| 0.001 + 1e-6 * (r + c) as f64);
        PanelSeries::new(
            dates,
            vec![Institution::new("A"), Institution::new("B")],
            values,
        )
        .unwrap()
    }

    #[test]
    fn splits_default_periods() {
        let panel = business_panel("2005-01-03", 3100);
        let parts = split_periods(&panel, &default_periods()).unwrap();
        assert_eq!(parts.len(), 4);
        assert_eq!(parts[0].dates[0], d("2005-01-03"));
        assert_eq!(*parts[0].dates.last().unwrap(), d("2008-01-02"));
        assert_eq!(parts[1].dates[0], d("2008-01-03"));
        assert_eq!(parts[3].dates[0], d("2013-01-03"));
        assert!(*parts[3].dates.last().unwrap() <= d("2016-11-17"));
        // every row inside some period appears exactly once
        let total: usize = parts.iter().map(|p| p.n_dates()).sum();
        let inside = panel
            .dates
            .iter()
            .filter(|x| default_periods().iter().any(|p| p.contains(**x)))
            .count();
        assert_eq!(total, inside);
    }

    #[test]
    fn single_period_is_identity() {
        let panel = business_panel("2005-01-03", 10);
        let p = PeriodSpec::new("all", panel.dates[0], *panel.dates.last().unwrap());
        let parts = split_periods(&panel, &[p]).unwrap();
        assert_eq!(parts[0], panel);
    }

    #[test]
    fn empty_period_errors() {
        let panel = business_panel("2005-01-03", 10);
        let p = PeriodSpec::new("early", d("2000-01-01"), d("2000-12-31"));
        let err = split_periods(&panel, &[p]).unwrap_err();
        assert!(err.to_string().contains("empty period"));
    }

    #[test]
    fn overlapping_periods_rejected() {
        let a = PeriodSpec::new("a", d("2005-01-01"), d("2005-06-01"));
        let b = PeriodSpec::new("b", d("2005-05-01"), d("2005-12-01"));
        assert!(validate_periods(&[a, b]).is_err());
    }

    #[test]
    fn summary_basic() {
        let r = summary_row("X", &[0.01, 0.02, 0.03]);
        assert!((r.mean - 0.02).abs() < 1e-15);
        assert_eq!(r.min, 0.01);
        assert_eq!(r.max, 0.03);
        let s = summary_row("X", &[0.01, 0.02, 0.02, 0.03, 0.01, 0.03]);
        assert!(s.skewness.unwrap().abs() < 1e-12);
        // [0.01, 0.02, 0.03, 0.02, 0.01] has mean 0.018 and is right-skewed
        let (sk, _) = oracle_skew_kurt(&[0.01, 0.02, 0.03, 0.02, 0.01]);
        let r5 = summary_row("X", &[0.01, 0.02, 0.03, 0.02, 0.01]);
        assert!(sk > 0.0 && (r5.skewness.unwrap() - sk).abs() < 1e-10);
        let c = summary_row("X", &[0.05; 4]);
        assert_eq!(c.skewness, None);
        assert_eq!(c.kurtosis, None);
        assert_eq!(c.sd, 0.0);
    }

    // Raw power-sum expansion of the central moments, independent of `Moments`.
    fn oracle_skew_kurt(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let s1: f64 = xs.iter().sum::<f64>() / n;
        let s2: f64 = xs.iter().map(|x| x * x).sum::<f64>() / n;
        let s3: f64 = xs.iter().map(|x| x * x * x).sum::<f64>() / n;
        let s4: f64 = xs.iter().map(|x| x * x * x * x).sum::<f64>() / n;
        let m2 = s2 - s1 * s1;
        let m3 = s3 - 3.0 * s1 * s2 + 2.0 * s1.powi(3);
        let m4 = s4 - 4.0 * s1 * s3 + 6.0 * s1 * s1 * s2 - 3.0 * s1.powi(4);
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    }

    #[test]
    fn lognormal_moments_match_oracle() {
        let mut rng = crate::seed::rng(11);
        let dist = LogNormal::new(0.0, 0.5).unwrap();
        let xs: Vec<f64> = (0..500).map(|_| dist.sample(&mut rng)).collect();
        let (sk, ku) = oracle_skew_kurt(&xs);
        let r = summary_row("L", &xs);
        assert!((r.skewness.unwrap() - sk).abs() < 1e-10);
        assert!((r.kurtosis.unwrap() - ku).abs() < 1e-10);
    }

    #[test]
    fn country_of_single_bank_equals_bank() {
        let mut panel = business_panel("2005-01-03", 20);
        panel.institutions[0].country = Some("Italy".into());
        panel.institutions[1].country = Some("Spain".into());
        let banks = summarize(&panel, Level::Bank).unwrap();
        let countries = summarize(&panel, Level::Country).unwrap();
        assert_eq!(countries[0].mean, banks[0].mean);
        assert_eq!(countries[0].sd, banks[0].sd);
        assert_eq!(countries[1].skewness, banks[1].skewness);
        assert_eq!(countries[0].entity, "Italy");
    }

    #[test]
    fn country_mean_averages_banks() {
        let base = business_panel("2005-01-03", 5);
        let mut institutions = base.institutions.clone();
        institutions.push(Institution::new("C"));
        let values = DMatrix::from_fn(5, 3, |r, c| 0.001 * (1 + r + 3 * c) as f64);
        let mut panel = PanelSeries::new(base.dates.clone(), institutions, values).unwrap();
        for (inst, c) in panel
            .institutions
            .iter_mut()
            .zip(["Norway", "Austria", "Norway"])
        {
            inst.country = Some(c.into());
        }
        let cp = country_panel(&panel).unwrap();
        assert_eq!(cp.tickers(), vec!["Austria", "Norway"]);
        let want = (panel.values[(2, 0)] + panel.values[(2, 2)]) / 2.0;
        assert_eq!(cp.values[(2, 1)], want);
        assert_eq!(cp.values[(2, 0)], panel.values[(2, 1)]);
    }

    #[test]
    fn log_transform_values() {
        let mut panel = business_panel("2005-01-03", 3);
        panel.values[(0, 0)] = 0.01;
        panel.values[(1, 0)] = 1.0;
        panel.values[(2, 0)] = 0.0;
        assert!(matches!(
            log_transform(&panel, None),
            Err(Error::NonPositivePd { row: 2, .. })
        ));
        let y = log_transform(&panel, Some(DEFAULT_PD_FLOOR)).unwrap();
        assert!((y[(0, 0)] - (-4.605170185988091)).abs() < 1e-12);
        assert_eq!(y[(1, 0)], 0.0);
        assert!((y[(2, 0)] - (-13.815510557964274)).abs() < 1e-12);
    }
}
