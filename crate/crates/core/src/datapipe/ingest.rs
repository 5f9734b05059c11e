use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::{kv, Error, Result};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// One day of observations: predictors (precipitation, temperature, ...)
/// and the gauged flow.
#[derive(Clone, Debug, PartialEq)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub features: Vec<f64>,
    pub flow: f64,
}

/// Which CSV columns hold the date, the predictors (in order) and the target.
///
/// On disk this is a `key = value` file:
///
/// ```text
/// date = date
/// feature = precip_1
/// feature = temp_1
/// target = flow
/// ```
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    pub date: String,
    pub features: Vec<String>,
    pub target: String,
}

impl Schema {
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = kv::parse(text).map_err(|e| Error::Schema(e.to_string()))?;
        let mut date = None;
        let mut target = None;
        let mut features = Vec::new();
        for (key, value) in pairs {
            match key.as_str() {
                "date" => date = Some(value),
                "target" => target = Some(value),
                "feature" => features.push(value),
                other => return Err(Error::Schema(format!("unknown schema role `{other}`"))),
            }
        }
        let date = date.ok_or_else(|| Error::Schema("schema declares no `date` column".into()))?;
        let target = target.ok_or_else(|| Error::Schema("schema declares no `target` column".into()))?;
        if features.is_empty() {
            return Err(Error::Schema("schema declares no `feature` columns".into()));
        }
        Ok(Self { date, features, target })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Schema(format!("cannot read schema {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("date = {}\n", self.date);
        for f in &self.features {
            out.push_str(&format!("feature = {f}\n"));
        }
        out.push_str(&format!("target = {}\n", self.target));
        out
    }
}

/// Run of missing calendar days between two consecutive records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Gap {
    pub after: NaiveDate,
    pub before: NaiveDate,
    pub missing_days: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedSeries {
    pub schema: Schema,
    pub records: Vec<DailyRecord>,
    pub gaps: Vec<Gap>,
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<LoadedSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    parse_csv(file, schema)
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan") || c.eq_ignore_ascii_case("null")
}

/// Parses CSV text with a header row. Rows come back sorted by date; missing
/// values and duplicate dates are errors, calendar gaps are reported.
pub fn parse_csv<R: Read>(reader: R, schema: &Schema) -> Result<LoadedSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in header")))
    };
    let date_col = column(&schema.date)?;
    let feature_cols = schema.features.iter().map(|f| column(f)).collect::<Result<Vec<_>>>()?;
    let target_col = column(&schema.target)?;

    let mut records = Vec::new();
    let mut missing: Vec<String> = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let cell = |col: usize| row.get(col).unwrap_or("");
        let raw_date = cell(date_col);
        let date = NaiveDate::parse_from_str(raw_date, DATE_FORMAT).map_err(|_| {
            Error::Parse(format!("line {line}, column `{}`: `{raw_date}` is not a YYYY-MM-DD date", schema.date))
        })?;
        let value = |col: usize, name: &str| -> Result<Option<f64>> {
            let raw = cell(col);
            if is_missing(raw) {
                return Ok(None);
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(Error::Parse(format!("line {line}, column `{name}`: cannot parse `{raw}`"))),
            }
        };
        let mut features = Vec::with_capacity(feature_cols.len());
        let mut complete = true;
        for (&col, name) in feature_cols.iter().zip(&schema.features) {
            match value(col, name)? {
                Some(v) => features.push(v),
                None => complete = false,
            }
        }
        let flow = value(target_col, &schema.target)?;
        match (complete, flow) {
            (true, Some(flow)) => records.push(DailyRecord { date, features, flow }),
            _ => missing.push(date.format(DATE_FORMAT).to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Data(format!("missing values on {} day(s): {}", missing.len(), missing.join(", "))));
    }
    if records.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }

    records.sort_by_key(|r| r.date);
    let mut gaps = Vec::new();
    for pair in records.windows(2) {
        let days = (pair[1].date - pair[0].date).num_days();
        if days == 0 {
            return Err(Error::Data(format!("duplicate date {}", pair[0].date.format(DATE_FORMAT))));
        }
        if days > 1 {
            gaps.push(Gap { after: pair[0].date, before: pair[1].date, missing_days: days - 1 });
        }
    }
    Ok(LoadedSeries { schema: schema.clone(), records, gaps })
}

/// Writes records in the same layout [`parse_csv`] reads: `date`, one column
/// per feature, then the target column.
pub fn write_csv<W: Write>(records: &[DailyRecord], schema: &Schema, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![schema.date.clone()];
    header.extend(schema.features.iter().cloned());
    header.push(schema.target.clone());
    w.write_record(&header)?;
    for r in records {
        if r.features.len() != schema.features.len() {
            return Err(Error::shape(format!(
                "record {} has {} features, schema names {}",
                r.date,
                r.features.len(),
                schema.features.len()
            )));
        }
        let mut row = vec![r.date.format(DATE_FORMAT).to_string()];
        row.extend(r.features.iter().map(|v| v.to_string()));
        row.push(r.flow.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema { date: "date".into(), features: vec!["p".into(), "t".into()], target: "q".into() }
    }

    #[test]
    fn parses_and_sorts() {
        let text = "date,p,t,q\n2000-01-03,0,5,2.5\n2000-01-01,1.5,4,2\n2000-01-02,0,3,2.1\n";
        let s = parse_csv(text.as_bytes(), &schema()).unwrap();
        assert_eq!(s.records.len(), 3);
        let days: Vec<_> = s.records.iter().map(|r| r.date.to_string()).collect();
        assert_eq!(days, ["2000-01-01", "2000-01-02", "2000-01-03"]);
        assert_eq!(s.records[0].features, vec![1.5, 4.0]);
        assert_eq!(s.records[0].flow, 2.0);
        assert!(s.gaps.is_empty());
    }

    #[test]
    fn shuffled_rows_give_the_same_series() {
        let a = "date,p,t,q\n2000-01-01,1,4,2\n2000-01-02,0,3,2.1\n2000-01-03,0,5,2.5\n";
        let b = "date,p,t,q\n2000-01-02,0,3,2.1\n2000-01-03,0,5,2.5\n2000-01-01,1,4,2\n";
        assert_eq!(parse_csv(a.as_bytes(), &schema()).unwrap(), parse_csv(b.as_bytes(), &schema()).unwrap());
    }

    #[test]
    fn duplicate_date_is_named() {
        let text = "date,p,t,q\n2000-01-01,1,4,2\n2000-01-02,0,3,2.1\n2000-01-02,0,5,2.5\n";
        let err = parse_csv(text.as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
        assert!(err.to_string().contains("2000-01-02"), "{err}");
    }

    #[test]
    fn missing_column_is_named() {
        let text = "date,p,q\n2000-01-01,1,2\n";
        let err = parse_csv(text.as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
        assert!(err.to_string().contains("`t`"), "{err}");
    }

    #[test]
    fn bad_cell_reports_line_and_column() {
        let text = "date,p,t,q\n2000-01-01,1,4,2\n2000-01-02,x,3,2.1\n";
        let err = parse_csv(text.as_bytes(), &schema()).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("`p`"), "{err}");
        let text = "date,p,t,q\n01/02/2000,1,4,2\n";
        assert!(matches!(parse_csv(text.as_bytes(), &schema()), Err(Error::Parse(_))));
    }

    #[test]
    fn missing_values_list_dates() {
        let text = "date,p,t,q\n2000-01-01,,4,2\n2000-01-02,0,3,NA\n2000-01-03,0,3,1\n";
        let err = parse_csv(text.as_bytes(), &schema()).unwrap_err().to_string();
        assert!(err.contains("2000-01-01") && err.contains("2000-01-02") && !err.contains("2000-01-03"), "{err}");
    }

    #[test]
    fn gaps_are_reported() {
        let text = "date,p,t,q\n2000-01-01,1,4,2\n2000-01-05,0,3,2.1\n";
        let s = parse_csv(text.as_bytes(), &schema()).unwrap();
        assert_eq!(s.gaps.len(), 1);
        assert_eq!(s.gaps[0].missing_days, 3);
    }

    #[test]
    fn schema_text_round_trip_and_errors() {
        let s = schema();
        assert_eq!(Schema::parse(&s.to_text()).unwrap(), s);
        assert!(matches!(Schema::parse("date = d\nfeature = a\n"), Err(Error::Schema(_))));
        assert!(matches!(Schema::parse("date = d\ntarget = q\ncolour = red\n"), Err(Error::Schema(_))));
    }

    #[test]
    fn written_csv_reads_back() {
        let text = "date,p,t,q\n2000-01-01,1.25,4,2\n2000-01-02,0,-3.5,2.1\n";
        let s = parse_csv(text.as_bytes(), &schema()).unwrap();
        let mut buf = Vec::new();
        write_csv(&s.records, &schema(), &mut buf).unwrap();
        assert_eq!(parse_csv(buf.as_slice(), &schema()).unwrap(), s);
    }
}
