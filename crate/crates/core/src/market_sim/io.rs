//! CSV (`t,X1..Xn`) and compact binary round-trip formats for market paths.

use std::io::{Read, Write};

use super::{MarketPath, PathSeed};
use crate::error::{Result, SptError};
use crate::matrix::SeriesMatrix;

const MAGIC: &[u8; 4] = b"SPTP";
const VERSION: u32 = 1;

/// Writes `t,<prefix>1..<prefix>k` rows, one per grid point.
pub(crate) fn write_series_csv<W: Write>(writer: W, times: &[f64], values: &SeriesMatrix, prefix: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=values.rows()).map(|i| format!("{prefix}{i}")));
    w.write_record(&header)?;
    for (t, col) in times.iter().zip(values.columns()) {
        let mut rec = Vec::with_capacity(col.len() + 1);
        rec.push(t.to_string());
        rec.extend(col.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| SptError::io("csv writer", e))?;
    Ok(())
}

pub(crate) fn read_series_csv<R: Read>(reader: R) -> Result<(Vec<f64>, SeriesMatrix)> {
    let mut r = csv::Reader::from_reader(reader);
    let k = r.headers()?.len().saturating_sub(1);
    if k == 0 {
        return Err(SptError::Data("series csv needs a t column and at least one value column".into()));
    }
    let mut times = Vec::new();
    let mut values = SeriesMatrix::with_capacity(k, 0);
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| SptError::Data(format!("row {}: cannot parse `{s}`", line + 2)))
        };
        times.push(parse(&rec[0])?);
        let col = (1..=k).map(|i| parse(&rec[i])).collect::<Result<Vec<_>>>()?;
        values.push_column(&col)?;
    }
    Ok((times, values))
}

/// Exports a path as CSV. Floats use the shortest exact representation, so
/// reading the file back reproduces the path bit for bit.
pub fn write_path_csv<W: Write>(path: &MarketPath, writer: W) -> Result<()> {
    write_series_csv(writer, path.times(), path.prices(), "X")
}

pub fn read_path_csv<R: Read>(reader: R) -> Result<MarketPath> {
    let (times, prices) = read_series_csv(reader)?;
    MarketPath::new(times, prices)
}

/// Little-endian binary encoding carrying the seed metadata.
pub fn encode_binary(path: &MarketPath) -> Vec<u8> {
    let n = path.n();
    let len = path.len();
    let mut out = Vec::with_capacity(4 + 4 + 4 + 8 + 1 + 16 + 8 * len * (n + 1));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(len as u64).to_le_bytes());
    match path.seed() {
        Some(s) => {
            out.push(1);
            out.extend_from_slice(&s.master_seed.to_le_bytes());
            out.extend_from_slice(&s.path_index.to_le_bytes());
        }
        None => {
            out.push(0);
            out.extend_from_slice(&[0u8; 16]);
        }
    }
    for t in path.times() {
        out.extend_from_slice(&t.to_le_bytes());
    }
    for v in path.prices().as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(k).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| SptError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_binary(bytes: &[u8]) -> Result<MarketPath> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(SptError::Format("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(SptError::Format(format!("unsupported version {version}")));
    }
    let n = c.u32()? as usize;
    let len = c.u64()? as usize;
    let has_seed = c.take(1)?[0] == 1;
    let master_seed = c.u64()?;
    let path_index = c.u64()?;
    let expected = len
        .checked_mul(n + 1)
        .and_then(|v| v.checked_mul(8))
        .ok_or_else(|| SptError::Format("size overflow".into()))?;
    if bytes.len() - c.pos != expected {
        return Err(SptError::Format(format!(
            "payload has {} bytes, header implies {expected}",
            bytes.len() - c.pos
        )));
    }
    let times = (0..len).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    let data = (0..n * len).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
    let path = MarketPath::new(times, SeriesMatrix::from_raw(n, len, data)?)?;
    Ok(if has_seed {
        path.with_seed(PathSeed { master_seed, path_index })
    } else {
        path
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_sim::{simulate_path, MarketSpec, SimGrid};

    fn sample() -> MarketPath {
        let spec = MarketSpec::volatility_stabilized(3, 1.0);
        let grid = SimGrid::new(0.05, 1e-3, 17).unwrap();
        simulate_path(&spec, &grid, 4, false).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let p = sample();
        let mut buf = Vec::new();
        write_path_csv(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,X1,X2,X3\n"));
        let q = read_path_csv(buf.as_slice()).unwrap();
        assert_eq!(p.times(), q.times());
        assert_eq!(p.prices(), q.prices());
    }

    #[test]
    fn binary_round_trip_keeps_seed() {
        let p = sample();
        let bytes = encode_binary(&p);
        let q = decode_binary(&bytes).unwrap();
        assert_eq!(q.seed(), Some(PathSeed { master_seed: 17, path_index: 4 }));
        assert_eq!(p.prices(), q.prices());
        assert_eq!(p.times(), q.times());
        assert!(decode_binary(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_binary(&bad).is_err());
    }
}
