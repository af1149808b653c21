//! Landmark sequence files: one CSV row of 136 values (x0, y0, x1, y1, ...)
//! per frame. The mean face uses the same layout with a single row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::landmarks::{LandmarkSet, NUM_LANDMARKS};

const ROW_WIDTH: usize = 2 * NUM_LANDMARKS;

pub fn load_landmarks(path: impl AsRef<Path>) -> Result<Vec<LandmarkSet>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != ROW_WIDTH {
            return Err(Error::RowWidth {
                path: path.into(),
                row,
                width: record.len(),
            });
        }
        let values = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::malformed(path, format!("row {row}: {e}")))?;
        out.push(LandmarkSet::from_flat(&values).map_err(|e| Error::malformed(path, format!("row {row}: {e}")))?);
    }
    Ok(out)
}

pub fn save_landmarks(path: impl AsRef<Path>, frames: &[LandmarkSet]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for lm in frames {
        // `{:?}` prints the shortest representation that parses back exactly.
        let line: Vec<String> = lm.to_flat().iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_mean_face(path: impl AsRef<Path>) -> Result<LandmarkSet> {
    let path = path.as_ref();
    let mut frames = load_landmarks(path)?;
    if frames.len() != 1 {
        return Err(Error::malformed(path, format!("mean face needs 1 row, found {}", frames.len())));
    }
    Ok(frames.remove(0))
}

pub fn save_mean_face(path: impl AsRef<Path>, face: &LandmarkSet) -> Result<()> {
    save_landmarks(path, std::slice::from_ref(face))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{mean_face, mouth_motion};

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lm.csv");
        let seq: Vec<_> = (0..5)
            .map(|k| mean_face().displaced(&mouth_motion(k as f64 * 0.37, 0.1)))
            .collect();
        save_landmarks(&p, &seq).unwrap();
        assert_eq!(load_landmarks(&p).unwrap(), seq);
    }

    #[test]
    fn short_rows_and_multi_row_mean_faces_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "1,2,3\n").unwrap();
        assert!(matches!(load_landmarks(&p), Err(Error::RowWidth { width: 3, .. })));
        save_landmarks(&p, &[mean_face(), mean_face()]).unwrap();
        assert!(load_mean_face(&p).is_err());
    }
}
