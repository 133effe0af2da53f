//! CSV exchange of data windows: header row, a leading `time` column in
//! seconds, then one column per channel. Values are written in shortest
//! round-trip form, so export followed by import is lossless.

use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::DataWindow;

/// Time grid jitter tolerated on import, relative to the sample time.
const JITTER_TOL: f64 = 1e-6;

pub fn csv_export(window: &DataWindow, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    write_window(window, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Same format as [`csv_export`] into a string.
pub fn csv_to_string(window: &DataWindow) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write_window(window, &mut w)?;
    let bytes = w.into_inner().map_err(|e| invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| invalid(e.to_string()))
}

fn write_window<W: std::io::Write>(window: &DataWindow, w: &mut csv::Writer<W>) -> Result<()> {
    let mut header = vec!["time".to_string()];
    header.extend(window.names().iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    let mut row = Vec::with_capacity(header.len());
    for k in 0..window.len() {
        row.clear();
        row.push(window.time(k).to_string());
        for ch in window.channels() {
            row.push(ch[k].to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    Ok(())
}

pub fn csv_import(path: &Path) -> Result<DataWindow> {
    let file = std::fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    csv_from_reader(file)
}

pub fn csv_from_str(text: &str) -> Result<DataWindow> {
    csv_from_reader(text.as_bytes())
}

fn csv_from_reader<R: std::io::Read>(reader: R) -> Result<DataWindow> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.get(0).map(str::trim) != Some("time") {
        return Err(Error::Parse("first CSV column must be `time`".into()));
    }
    if header.len() < 2 {
        return Err(Error::Parse("CSV has no data channels".into()));
    }
    let names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut times = Vec::new();
    let mut channels = vec![Vec::new(); names.len()];
    for (i, rec) in r.records().enumerate() {
        // data row i sits on file line i + 2
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse(format!("row {line}: {e}")))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("row {line}: cannot parse '{s}' as a number")))
        };
        times.push(parse(&rec[0])?);
        for (c, field) in rec.iter().skip(1).enumerate() {
            channels[c].push(parse(field)?);
        }
    }
    if times.len() < 2 {
        return Err(Error::Parse(
            "CSV needs at least two rows to fix the sample time".into(),
        ));
    }
    let n = times.len();
    let raw = (times[n - 1] - times[0]) / (n - 1) as f64;
    let ts = exact_step(&times, raw);
    if !(ts > 0.0) {
        return Err(Error::Parse("time column must increase".into()));
    }
    for (k, t) in times.iter().enumerate() {
        let expected = times[0] + k as f64 * ts;
        if (t - expected).abs() > JITTER_TOL * ts {
            return Err(Error::Parse(format!(
                "row {}: time {t} is off the uniform grid (expected {expected})",
                k + 2
            )));
        }
    }
    DataWindow::new(ts, times[0], names, channels)
}

/// Step that regenerates every time stamp bit for bit, preferring the
/// shortest decimal; `raw` when the grid admits none.
fn exact_step(times: &[f64], raw: f64) -> f64 {
    if !(raw > 0.0) || !raw.is_finite() {
        return raw;
    }
    let t0 = times[0];
    let (mut lo, mut hi) = (0.5 * raw, 2.0 * raw);
    for (k, t) in times.iter().enumerate().skip(1) {
        let at = |c: f64| t0 + c * k as f64;
        lo = lo.max(first_bits(lo, hi, |c| at(c) >= *t));
        hi = hi.min(last_bits(lo, hi, |c| at(c) <= *t));
        if lo > hi {
            return raw;
        }
    }
    (0..17)
        .filter_map(|d| format!("{raw:.d$e}").parse::<f64>().ok())
        .find(|c| (lo..=hi).contains(c))
        .unwrap_or(if (lo..=hi).contains(&raw) { raw } else { lo })
}

/// Smallest positive `c` in `[lo, hi]` with `pred(c)`, for a monotone
/// predicate; `hi` when none holds.
fn first_bits(lo: f64, hi: f64, pred: impl Fn(f64) -> bool) -> f64 {
    let (mut a, mut b) = (lo.to_bits(), hi.to_bits());
    while a < b {
        let m = a + (b - a) / 2;
        if pred(f64::from_bits(m)) {
            b = m;
        } else {
            a = m + 1;
        }
    }
    f64::from_bits(a)
}

/// Largest positive `c` in `[lo, hi]` with `pred(c)`, for a predicate that
/// holds below some point; `lo` when none holds.
fn last_bits(lo: f64, hi: f64, pred: impl Fn(f64) -> bool) -> f64 {
    let (mut a, mut b) = (lo.to_bits(), hi.to_bits());
    while a < b {
        let m = a + (b - a).div_ceil(2);
        if pred(f64::from_bits(m)) {
            a = m;
        } else {
            b = m - 1;
        }
    }
    f64::from_bits(a)
}

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse(format!("{other:?}")),
        }
    } else {
        Error::Parse(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows_two_channels() {
        let w = csv_from_str("time,u_1,dP_1\n0,1,2\n0.1,3,4\n0.2,5,6\n").unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w.channel_count(), 2);
        assert_eq!(w.channel("dP_1").unwrap(), &[2.0, 4.0, 6.0]);
        assert_eq!(w.sample_time(), 0.1);
    }

    #[test]
    fn jitter_reported_with_row() {
        let e = csv_from_str("time,a\n0,1\n0.1,1\n0.2003,1\n0.3,1\n").unwrap_err();
        assert!(e.to_string().contains("row 4"), "{e}");
    }

    #[test]
    fn malformed_inputs() {
        assert!(csv_from_str("t,a\n0,1\n1,2\n").is_err());
        assert!(csv_from_str("time,a\n0,1\n1\n").is_err());
        assert!(csv_from_str("time,a\n0,1\n1,x\n").is_err());
        assert!(csv_from_str("time,a\n1,1\n0,2\n").is_err());
    }

    #[test]
    fn string_round_trip() {
        let w = DataWindow::new(
            0.032,
            1.5,
            vec!["a".into(), "b".into()],
            vec![vec![0.1, -1e-300, 3.0], vec![f64::MAX, 1.0 / 3.0, 0.0]],
        )
        .unwrap();
        let back = csv_from_str(&csv_to_string(&w).unwrap()).unwrap();
        assert_eq!(back, w);
    }
}
