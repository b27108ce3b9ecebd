//! Readers for vector and matrix files.

use std::fs::File;
use std::path::Path;

use nalgebra::DMatrix;

use crate::CliError;

fn open(path: &Path) -> Result<csv::Reader<File>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(format!("cannot open {}: {e}", path.display())))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file))
}

fn parse_number(field: &str, path: &Path, line: u64) -> Result<f64, CliError> {
    let v: f64 = field
        .parse()
        .map_err(|_| CliError::parse(format!("{}:{line}: '{field}' is not a number", path.display())))?;
    if !v.is_finite() {
        return Err(CliError::parse(format!("{}:{line}: value must be finite", path.display())));
    }
    Ok(v)
}

/// One number per line, or a single-column CSV whose first row may be a
/// header. Blank lines and `#` comments are skipped.
pub fn read_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut reader = open(path)?;
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(row as u64 + 1, |p| p.line());
        let fields: Vec<&str> = record.iter().collect();
        if fields.iter().all(|f| f.is_empty()) {
            continue;
        }
        if fields.len() != 1 {
            return Err(CliError::parse(format!(
                "{}:{line}: expected a single column, found {}",
                path.display(),
                fields.len()
            )));
        }
        match parse_number(fields[0], path, line) {
            Ok(v) => out.push(v),
            Err(_) if out.is_empty() && row == 0 && fields[0].parse::<f64>().is_err() => continue,
            Err(e) => return Err(e),
        }
    }
    if out.len() < 2 {
        return Err(CliError::parse(format!("{}: need at least two values, found {}", path.display(), out.len())));
    }
    Ok(out)
}

/// A square matrix as comma-separated rows without a header.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let mut reader = open(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(row as u64 + 1, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        rows.push(record.iter().map(|f| parse_number(f, path, line)).collect::<Result<_, _>>()?);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::parse(format!("{}: matrix must be square and nonempty", path.display())));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn plain_lines_and_header() {
        assert_eq!(read_vector(file("1\n2.5\n\n-3\n").path()).unwrap(), vec![1.0, 2.5, -3.0]);
        assert_eq!(read_vector(file("value\n1\n2\n").path()).unwrap(), vec![1.0, 2.0]);
        assert_eq!(read_vector(file("\"x\"\r\n1\r\n2\r\n").path()).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn rejects_bad_vectors() {
        assert!(read_vector(file("1\nfoo\n").path()).is_err());
        assert!(read_vector(file("1,2\n3,4\n").path()).is_err());
        assert!(read_vector(file("1\n").path()).is_err());
        assert!(read_vector(file("1\ninf\n").path()).is_err());
        assert!(read_vector(Path::new("/nonexistent/vector.csv")).is_err());
    }

    #[test]
    fn matrices() {
        let m = read_matrix(file("1,0.5\n0.5,2\n").path()).unwrap();
        assert_eq!(m[(0, 1)], 0.5);
        assert_eq!(m[(1, 1)], 2.0);
        assert!(read_matrix(file("1,2,3\n4,5,6\n").path()).is_err());
    }
}
