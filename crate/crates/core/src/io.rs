//! File formats: point-cloud CSV, dense rasters, traces, labels and
//! distance matrices.
//!
//! Point clouds are CSV with header `x1,...,xd,w` and one atom per row.
//! Rasters are `USOTGRID v1\n<rows> <cols>\n` followed by `rows·cols`
//! little-endian `f64` values in row-major order. Numbers are written with
//! Rust's shortest round-trip formatting, so outputs are byte-stable.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

const RASTER_MAGIC: &str = "USOTGRID v1";

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("{what}: cannot parse {s:?} as a number")))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Reads a point cloud; zero-weight rows are kept.
pub fn read_point_cloud<R: Read>(reader: R) -> Result<DiscreteMeasure> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let d = header.len().saturating_sub(1);
    let expected: Vec<String> = (1..=d).map(|k| format!("x{k}")).chain(["w".to_string()]).collect();
    if d == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse(format!(
            "point-cloud header must be x1,...,xd,w, got {:?}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let what = format!("row {}", line + 2);
        for field in record.iter().take(d) {
            coords.push(parse_f64(field, &what)?);
        }
        weights.push(parse_f64(&record[d], &what)?);
    }
    let points = Array2::from_shape_vec((weights.len(), d), coords).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    DiscreteMeasure::new(points, weights)
}

pub fn read_point_cloud_file(path: &Path) -> Result<DiscreteMeasure> {
    read_point_cloud(BufReader::new(File::open(path)?))
}

/// Writes `points` and `weights` in point-cloud format.
pub fn write_point_cloud<W: Write>(writer: W, points: ndarray::ArrayView2<'_, f64>, weights: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let d = points.ncols();
    let header: Vec<String> = (1..=d).map(|k| format!("x{k}")).chain(["w".to_string()]).collect();
    w.write_record(&header).map_err(csv_err)?;
    for (row, wt) in points.rows().into_iter().zip(weights) {
        let fields: Vec<String> = row.iter().chain([wt]).map(|x| x.to_string()).collect();
        w.write_record(&fields).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_point_cloud_file(path: &Path, m: &DiscreteMeasure) -> Result<()> {
    write_point_cloud(BufWriter::new(File::create(path)?), m.points(), m.weights())
}

/// A dense `rows × cols` array of values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

pub fn read_raster<R: Read>(mut reader: R) -> Result<Raster> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let mut lines = bytes.splitn(3, |&b| b == b'\n');
    let magic = lines.next().unwrap_or_default();
    if magic != RASTER_MAGIC.as_bytes() {
        return Err(Error::Parse("raster does not start with USOTGRID v1".into()));
    }
    let dims = std::str::from_utf8(lines.next().unwrap_or_default())
        .map_err(|_| Error::Parse("raster dimensions are not text".into()))?;
    let dims: Vec<usize> = dims
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad raster dimension {s:?}"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse("raster header needs `rows cols`".into()));
    };
    let body = lines.next().unwrap_or_default();
    if body.len() != rows * cols * 8 {
        return Err(Error::Parse(format!(
            "raster body has {} bytes, expected {} for {rows}x{cols}",
            body.len(),
            rows * cols * 8
        )));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    Ok(Raster { rows, cols, values })
}

pub fn read_raster_file(path: &Path) -> Result<Raster> {
    read_raster(BufReader::new(File::open(path)?))
}

pub fn write_raster<W: Write>(mut writer: W, raster: &Raster) -> Result<()> {
    if raster.values.len() != raster.rows * raster.cols {
        return Err(Error::ShapeMismatch(format!(
            "{} values for a {}x{} raster",
            raster.values.len(),
            raster.rows,
            raster.cols
        )));
    }
    write!(writer, "{RASTER_MAGIC}\n{} {}\n", raster.rows, raster.cols)?;
    for v in &raster.values {
        writer.write_all(&v.to_le_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_raster_file(path: &Path, raster: &Raster) -> Result<()> {
    write_raster(BufWriter::new(File::create(path)?), raster)
}

/// `iter,dual_value` rows, with `iter` counting steps from 1.
pub fn write_trace<W: Write>(writer: W, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iter", "dual_value"]).map_err(csv_err)?;
    for (k, v) in trace.iter().enumerate() {
        w.write_record([(k + 1).to_string(), v.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, trace: &[f64]) -> Result<()> {
    write_trace(BufWriter::new(File::create(path)?), trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRow {
    pub doc_id: String,
    pub label: String,
    pub split: Split,
}

/// Reads `doc_id,label,split` rows; `split` is `train` or `test`.
pub fn read_labels<R: Read>(reader: R) -> Result<Vec<LabelRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(["doc_id", "label", "split"]) {
        return Err(Error::Parse("labels header must be doc_id,label,split".into()));
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let split = match &record[2] {
            "train" => Split::Train,
            "test" => Split::Test,
            other => return Err(Error::Parse(format!("split must be train or test, got {other:?}"))),
        };
        rows.push(LabelRow { doc_id: record[0].to_string(), label: record[1].to_string(), split });
    }
    Ok(rows)
}

pub fn read_labels_file(path: &Path) -> Result<Vec<LabelRow>> {
    read_labels(BufReader::new(File::open(path)?))
}

/// Square matrix with a `doc_id,<id_1>,...` header and one row per document.
pub fn write_matrix<W: Write>(writer: W, ids: &[String], matrix: &Array2<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(std::iter::once("doc_id").chain(ids.iter().map(String::as_str))).map_err(csv_err)?;
    for (id, row) in ids.iter().zip(matrix.rows()) {
        let fields = std::iter::once(id.clone()).chain(row.iter().map(|v| v.to_string()));
        w.write_record(fields).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_file(path: &Path, ids: &[String], matrix: &Array2<f64>) -> Result<()> {
    write_matrix(BufWriter::new(File::create(path)?), ids, matrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_cloud_round_trip() {
        let text = "x1,x2,w\n0.5,1,0.25\n-3e-2,2.0,0\n";
        let m = read_point_cloud(text.as_bytes()).unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.weights(), &[0.25, 0.0]);
        assert_eq!(m.point(1).to_vec(), vec![-0.03, 2.0]);
        let mut out = Vec::new();
        write_point_cloud(&mut out, m.points(), m.weights()).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), "x1,x2,w\n0.5,1,0.25\n-0.03,2,0\n");
        assert_eq!(read_point_cloud(&out[..]).unwrap(), m);
    }

    #[test]
    fn point_cloud_rejects_bad_input() {
        assert!(matches!(read_point_cloud("a,b\n1,2\n".as_bytes()), Err(Error::Parse(_))));
        assert!(matches!(read_point_cloud("x1,w\n1,abc\n".as_bytes()), Err(Error::Parse(_))));
        assert!(read_point_cloud("x1,w\n1,2,3\n".as_bytes()).is_err());
        assert!(read_point_cloud("x1,w\n1,-2\n".as_bytes()).is_err());
        assert!(read_point_cloud("x1,w\n".as_bytes()).is_err());
        assert!(read_point_cloud("x1,w\n1,1e999\n".as_bytes()).is_err());
    }

    #[test]
    fn raster_round_trip() {
        let r = Raster { rows: 2, cols: 3, values: vec![0.0, 1.5, -2.0, 1e-300, 4.0, 10.0] };
        let mut out = Vec::new();
        write_raster(&mut out, &r).unwrap();
        assert!(out.starts_with(b"USOTGRID v1\n2 3\n"));
        assert_eq!(out.len(), "USOTGRID v1\n2 3\n".len() + 48);
        assert_eq!(read_raster(&out[..]).unwrap(), r);
        out.pop();
        assert!(read_raster(&out[..]).is_err());
        assert!(read_raster(&b"GRID\n1 1\n"[..]).is_err());
    }

    #[test]
    fn trace_and_labels() {
        let mut out = Vec::new();
        write_trace(&mut out, &[0.5, 0.75]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "iter,dual_value\n1,0.5\n2,0.75\n");
        let rows = read_labels("doc_id,label,split\nd1,sports,train\nd2,news,test\n".as_bytes()).unwrap();
        assert_eq!(rows[1].split, Split::Test);
        assert!(read_labels("doc_id,label,split\nd1,x,dev\n".as_bytes()).is_err());
        assert!(read_labels("id,label\n".as_bytes()).is_err());
    }
}
