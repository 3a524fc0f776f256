//! Survey ingestion and the summary tables built from it.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::threat::RecoveryMechanism;

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("malformed csv: {0}")]
    MalformedCsv(String),
    #[error("line {line}: unknown mechanism {value:?}")]
    UnknownMechanism { line: u64, value: String },
    #[error("line {line}: invalid robustness entry: {reason}")]
    InvalidEntry { line: u64, reason: String },
    #[error("empty dataset")]
    EmptyDataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Observed {
    Mechanism(RecoveryMechanism),
    /// No authentication, unproducible information or a broken recovery page.
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SurveyRow {
    pub country: String,
    pub site: String,
    pub mechanism: Observed,
}

pub fn parse_mechanism(raw: &str) -> Option<Observed> {
    let key: String = raw
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect();
    let mech = match key.as_str() {
        "old" | "oldpw" | "oldpassword" => RecoveryMechanism::OldPw,
        "new" | "newpw" | "newpassword" => RecoveryMechanism::NewPw,
        "temp" | "temppw" | "temporary" | "temppassword" => RecoveryMechanism::TempPw,
        "http" | "httplink" => RecoveryMechanism::HttpLink,
        "https" | "httpslink" => RecoveryMechanism::HttpsLink,
        "excluded" | "noauth" | "unproducible" | "notworking" => return Some(Observed::Excluded),
        _ => return None,
    };
    Some(Observed::Mechanism(mech))
}

pub fn load_survey(path: impl AsRef<Path>) -> Result<Vec<SurveyRow>, SurveyError> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| SurveyError::MalformedCsv(format!("{}: {e}", path.as_ref().display())))?;
    read_survey(file)
}

pub fn read_survey<R: Read>(input: R) -> Result<Vec<SurveyRow>, SurveyError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| SurveyError::MalformedCsv(e.to_string()))?
        .clone();
    let expected = ["country", "site", "mechanism"];
    if headers.len() != 3
        || !headers
            .iter()
            .zip(expected)
            .all(|(h, e)| h.eq_ignore_ascii_case(e))
    {
        return Err(SurveyError::MalformedCsv(format!(
            "header must be country,site,mechanism, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| SurveyError::MalformedCsv(e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 3 {
            return Err(SurveyError::MalformedCsv(format!(
                "line {line}: expected 3 fields, found {}",
                record.len()
            )));
        }
        let mechanism = parse_mechanism(&record[2]).ok_or_else(|| SurveyError::UnknownMechanism {
            line,
            value: record[2].to_string(),
        })?;
        rows.push(SurveyRow {
            country: record[0].to_string(),
            site: record[1].to_string(),
            mechanism,
        });
    }
    Ok(rows)
}

/// A percentage held as integer hundredths, rounded half-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent(pub u32);

impl Percent {
    pub fn ratio(part: usize, whole: usize) -> Self {
        assert!(whole > 0 && part <= whole);
        let (part, whole) = (part as u64, whole as u64);
        Percent(((part * 20_000 + whole) / (2 * whole)) as u32)
    }

    pub fn hundredths(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 100.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(&format!("{}.{:02}", self.0 / 100, self.0 % 100))
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountrySummary {
    pub analyzed: usize,
    pub old: usize,
    pub new: usize,
    pub temp: usize,
    pub http: usize,
    pub https: usize,
    pub vulnerable_pct: Percent,
}

impl CountrySummary {
    pub fn count(&self, mech: RecoveryMechanism) -> usize {
        match mech {
            RecoveryMechanism::OldPw => self.old,
            RecoveryMechanism::NewPw => self.new,
            RecoveryMechanism::TempPw => self.temp,
            RecoveryMechanism::HttpLink => self.http,
            RecoveryMechanism::HttpsLink => self.https,
        }
    }

    pub fn vulnerable(&self) -> usize {
        self.old + self.new + self.temp + self.http
    }
}

#[derive(Default)]
struct Tally([usize; 5]);

impl Tally {
    fn add(&mut self, observed: Observed) {
        if let Observed::Mechanism(m) = observed {
            self.0[m as usize] += 1;
        }
    }

    fn finish(self) -> Option<CountrySummary> {
        let [old, new, temp, http, https] = self.0;
        let analyzed = old + new + temp + http + https;
        if analyzed == 0 {
            return None;
        }
        Some(CountrySummary {
            analyzed,
            old,
            new,
            temp,
            http,
            https,
            vulnerable_pct: Percent::ratio(analyzed - https, analyzed),
        })
    }
}

/// Per-country summaries. Countries whose rows are all excluded are omitted.
pub fn country_summary(rows: &[SurveyRow]) -> BTreeMap<String, CountrySummary> {
    let mut tallies: BTreeMap<String, Tally> = BTreeMap::new();
    for row in rows {
        tallies.entry(row.country.clone()).or_default().add(row.mechanism);
    }
    tallies
        .into_iter()
        .filter_map(|(country, t)| t.finish().map(|s| (country, s)))
        .collect()
}

pub fn overall_summary(rows: &[SurveyRow]) -> Result<CountrySummary, SurveyError> {
    let mut tally = Tally::default();
    for row in rows {
        tally.add(row.mechanism);
    }
    tally.finish().ok_or(SurveyError::EmptyDataset)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RobustnessEntry {
    pub charset_size: u32,
    pub length: u32,
}

impl RobustnessEntry {
    /// Whether charset_size^length exceeds 2^exponent. Exponents above 126
    /// are not supported.
    pub fn exceeds_pow2(&self, exponent: u32) -> bool {
        assert!(exponent < 127, "exponent {exponent} out of range");
        let limit = 1u128 << exponent;
        let mut acc: u128 = 1;
        for _ in 0..self.length {
            acc = acc.saturating_mul(u128::from(self.charset_size));
            if acc > limit {
                return true;
            }
        }
        false
    }
}

pub const ROBUSTNESS_EXPONENTS: [u32; 7] = [10, 20, 30, 40, 50, 60, 70];

/// Reads `charset_size,length` pairs, with or without a header row.
pub fn read_robustness<R: Read>(input: R) -> Result<Vec<RobustnessEntry>, SurveyError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| SurveyError::MalformedCsv(e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(SurveyError::MalformedCsv(format!(
                "line {line}: expected 2 fields, found {}",
                record.len()
            )));
        }
        if i == 0 && record[0].eq_ignore_ascii_case("charset_size") {
            continue;
        }
        let parse = |field: &str| -> Result<u32, SurveyError> {
            match field.parse::<u32>() {
                Ok(v) if v > 0 => Ok(v),
                _ => Err(SurveyError::InvalidEntry {
                    line,
                    reason: format!("{field:?} is not a positive integer"),
                }),
            }
        };
        entries.push(RobustnessEntry {
            charset_size: parse(&record[0])?,
            length: parse(&record[1])?,
        });
    }
    Ok(entries)
}

pub fn load_robustness(path: impl AsRef<Path>) -> Result<Vec<RobustnessEntry>, SurveyError> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| SurveyError::MalformedCsv(format!("{}: {e}", path.as_ref().display())))?;
    read_robustness(file)
}

/// Percentage of entries above each 2^exponent, in the order given.
pub fn robustness_distribution(
    entries: &[RobustnessEntry],
    exponents: &[u32],
) -> Result<Vec<f64>, SurveyError> {
    if entries.is_empty() {
        return Err(SurveyError::EmptyDataset);
    }
    Ok(exponents
        .iter()
        .map(|&e| {
            let above = entries.iter().filter(|x| x.exceeds_pow2(e)).count();
            100.0 * above as f64 / entries.len() as f64
        })
        .collect())
}
