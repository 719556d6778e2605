//! Headerless CSV matrices: one line per time slot, one column per location.

use std::path::Path;

use crate::error::{HarnessError, Result};

pub fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let parse_err = |message: String| HarnessError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => HarnessError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => parse_err(format!("{other:?}")),
        })?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field
                    .parse::<f64>()
                    .map_err(|_| parse_err(format!("row {}, column {}: {field:?} is not a number", i + 1, j + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_matrix_csv(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let io_err = |e: csv::Error| HarnessError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(io_err)?;
    for row in rows {
        writer.write_record(row.iter().map(|v| v.to_string())).map_err(io_err)?;
    }
    writer.flush().map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_matrix_csv(&path, &[vec![1.0, 0.25], vec![-3.5, 1e-9]]).unwrap();
        assert_eq!(read_matrix_csv(&path).unwrap(), vec![vec![1.0, 0.25], vec![-3.5, 1e-9]]);
        std::fs::write(&path, "# slots x locations\n1, 2\n 3 ,4\n").unwrap();
        assert_eq!(read_matrix_csv(&path).unwrap(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn reports_bad_cells_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "1,x\n").unwrap();
        let err = read_matrix_csv(&path).unwrap_err();
        assert!(err.to_string().contains("row 1, column 2"), "{err}");
        assert_eq!(read_matrix_csv(&dir.path().join("none.csv")).unwrap_err().exit_code(), 1);
    }
}
