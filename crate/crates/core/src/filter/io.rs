use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::simulate::fmt;

use super::IntensityTrajectory;

/// How the first CSV column becomes a time axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TimeAxis {
    /// Numeric times, used as given.
    Numeric,
    /// ISO-8601 dates; observation `i` sits at `i / periods_per_year`.
    Dates { periods_per_year: f64 },
}

/// Per-asset simple returns on a common time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    /// Observation times in year fractions.
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// One vector per column.
    pub returns: Vec<Vec<f64>>,
}

fn parse_field(s: &str, row: usize, col: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Data(format!("row {row}, column {col}: cannot parse {s:?} as a number")))
}

/// Reads a header row followed by `time, r_1, .., r_n` rows. Dates must be
/// strictly increasing; numeric times likewise.
pub fn read_returns_csv<R: Read>(reader: R, periods_per_year: f64) -> Result<(ReturnSeries, TimeAxis)> {
    if !(periods_per_year.is_finite() && periods_per_year > 0.0) {
        return Err(Error::param("periods_per_year", "must be finite and > 0"));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
    if headers.len() < 2 {
        return Err(Error::Data("need a time column and at least one return column".into()));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut stamps = Vec::new();
    let mut returns = vec![Vec::new(); names.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
        let row = i + 2;
        if rec.len() != headers.len() {
            return Err(Error::Data(format!("row {row}: expected {} fields, got {}", headers.len(), rec.len())));
        }
        stamps.push(rec[0].to_string());
        for (c, name) in names.iter().enumerate() {
            returns[c].push(parse_field(&rec[c + 1], row, name)?);
        }
    }
    if stamps.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    let (times, axis) = match stamps[0].parse::<f64>() {
        Ok(_) => {
            let t = stamps.iter().enumerate().map(|(i, s)| parse_field(s, i + 2, &headers[0])).collect::<Result<Vec<_>>>()?;
            (t, TimeAxis::Numeric)
        }
        Err(_) => {
            let dates = stamps
                .iter()
                .enumerate()
                .map(|(i, s)| NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| Error::Data(format!("row {}: {s:?} is not an ISO-8601 date", i + 2))))
                .collect::<Result<Vec<_>>>()?;
            if dates.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Data("dates must be strictly increasing".into()));
            }
            ((0..dates.len()).map(|i| i as f64 / periods_per_year).collect(), TimeAxis::Dates { periods_per_year })
        }
    };
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Data("times must be strictly increasing".into()));
    }
    Ok((ReturnSeries { times, names, returns }, axis))
}

/// `time, lambda_1..m, event_1..m`.
pub fn write_trajectory_csv<W: Write>(tr: &IntensityTrajectory, mut w: W) -> Result<()> {
    let m = tr.lambda.first().map_or(0, Vec::len);
    let mut header = vec!["time".to_string()];
    header.extend((1..=m).map(|l| format!("lambda_{l}")));
    header.extend((1..=m).map(|l| format!("event_{l}")));
    writeln!(w, "{}", header.join(","))?;
    for i in 0..tr.times.len() {
        let mut row = vec![fmt(tr.times[i])];
        row.extend(tr.lambda[i].iter().map(|v| fmt(*v)));
        row.extend(tr.events[i].iter().map(|v| v.to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dates_become_trading_year_fractions() {
        let data = "date,us,eu\n2008-01-02,0.01,-0.02\n2008-01-03,0.0,0.01\n2008-01-04,-0.03,0.02\n";
        let (s, axis) = read_returns_csv(data.as_bytes(), 252.0).unwrap();
        assert_eq!(axis, TimeAxis::Dates { periods_per_year: 252.0 });
        assert_eq!(s.times, vec![0.0, 1.0 / 252.0, 2.0 / 252.0]);
        assert_eq!(s.names, vec!["us", "eu"]);
        assert_eq!(s.returns[1], vec![-0.02, 0.01, 0.02]);
    }

    #[test]
    fn numeric_times_pass_through() {
        let (s, axis) = read_returns_csv("t,r\n0.5,0.1\n1.5,0.2\n".as_bytes(), 252.0).unwrap();
        assert_eq!(axis, TimeAxis::Numeric);
        assert_eq!(s.times, vec![0.5, 1.5]);
    }

    #[test]
    fn bad_rows_are_reported() {
        let err = read_returns_csv("t,r\n0,0.1\n1,abc\n".as_bytes(), 252.0).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
        assert!(read_returns_csv("t,r\n1,0.1\n0,0.1\n".as_bytes(), 252.0).is_err());
    }
}
