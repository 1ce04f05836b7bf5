//! Series input and atomic file output.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{CliError, CliResult};

/// Reads one numeric column from a CSV file (`-` for stdin).
///
/// A first row that does not parse as numbers is treated as a header. Files
/// with several columns need `col`, given as a header name or a zero-based
/// index. Empty fields are rejected.
pub fn read_series(path: &str, col: Option<&str>) -> CliResult<Vec<f64>> {
    let mut text = String::new();
    if path == "-" {
        std::io::stdin().read_to_string(&mut text).map_err(|e| CliError::io("<stdin>", e))?;
    } else {
        text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    }
    parse_series(&text, col).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{path}: {m}")),
        other => other,
    })
}

pub fn parse_series(text: &str, col: Option<&str>) -> CliResult<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for r in rdr.records() {
        rows.push(r.map_err(|e| CliError::Data(e.to_string()))?);
    }
    rows.retain(|r| !(r.len() == 1 && r[0].is_empty()));
    let Some(first) = rows.first() else {
        return Err(CliError::Data("no data rows".into()));
    };
    let is_header = first.iter().any(|f| f.parse::<f64>().is_err());
    let width = first.len();
    let index = match col {
        None if width == 1 => 0,
        None => return Err(CliError::Usage(format!("input has {width} columns; select one with --col"))),
        Some(c) => {
            let by_name = if is_header { first.iter().position(|h| h == c) } else { None };
            match by_name {
                Some(i) => i,
                None => c
                    .parse::<usize>()
                    .ok()
                    .filter(|&i| i < width)
                    .ok_or_else(|| CliError::Usage(format!("no column `{c}`")))?,
            }
        }
    };
    let skip = usize::from(is_header);
    rows.iter()
        .enumerate()
        .skip(skip)
        .map(|(i, r)| {
            let field = r.get(index).unwrap_or("");
            if field.is_empty() {
                return Err(CliError::Data(format!("row {}: missing value", i + 1)));
            }
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Data(format!("row {}: cannot parse `{field}` as a number", i + 1)))
        })
        .collect()
}

/// Formats a series as a one-column CSV with header `x`.
pub fn series_csv(data: &[f64]) -> String {
    let mut out = String::with_capacity(data.len() * 20 + 2);
    out.push_str("x\n");
    for v in data {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}

/// Writes `contents` to `path` through a temporary file in the same directory
/// and an atomic rename, so a failed run never leaves a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let shown = path.display().to_string();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(&shown, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| CliError::io(&shown, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(&shown, e))?;
    tmp.persist(path).map_err(|e| CliError::io(&shown, e.error))?;
    Ok(())
}

/// Writes to `out` if given, else to stdout.
pub fn emit(out: Option<&Path>, contents: &str) -> CliResult<()> {
    match out {
        Some(p) => write_atomic(p, contents),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(contents.as_bytes()).map_err(|e| CliError::io("<stdout>", e))?;
            stdout.flush().map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_column_with_and_without_header() {
        assert_eq!(parse_series("1\n2.5\n-3e-2\n", None).unwrap(), vec![1.0, 2.5, -0.03]);
        assert_eq!(parse_series("x\n1\n2\n", None).unwrap(), vec![1.0, 2.0]);
        assert_eq!(parse_series("1\n\n2\n", None).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn column_selection() {
        let text = "t,temp\n1,0.5\n2,0.7\n";
        assert_eq!(parse_series(text, Some("temp")).unwrap(), vec![0.5, 0.7]);
        assert_eq!(parse_series(text, Some("0")).unwrap(), vec![1.0, 2.0]);
        assert!(matches!(parse_series(text, None), Err(CliError::Usage(_))));
        assert!(matches!(parse_series(text, Some("nope")), Err(CliError::Usage(_))));
    }

    #[test]
    fn bad_values() {
        assert!(matches!(parse_series("1\nabc\n", None), Err(CliError::Data(_))));
        assert!(matches!(parse_series("a,b\n1,\n", Some("b")), Err(CliError::Data(_))));
        assert!(matches!(parse_series("1,5\n1,5\n", Some("1")).map(|v| v.len()), Ok(2)));
        assert!(matches!(parse_series("", None), Err(CliError::Data(_))));
        assert!(parse_series("1\n1,0\n", None).is_ok());
    }
}
