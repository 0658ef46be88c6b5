//! Latency vectors and the symmetric latency matrix built from them.

use std::io::{Read, Write};

use crate::canonical::Canonical;
use crate::model::{Error, ReplicaId, Result};
use crate::scalar::{format_latency, parse_latency, LatencyScalar};

/// One replica's measured latency to every replica, indexed by replica id.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyVector<T: LatencyScalar = u64> {
    pub author: ReplicaId,
    pub entries: Vec<T>,
}

impl<T: LatencyScalar> LatencyVector<T> {
    pub fn new(author: ReplicaId, entries: Vec<T>) -> Self {
        LatencyVector { author, entries }
    }
}

/// Packages round-trip measurements. Replicas without a measurement get INF;
/// the author's own entry is 0.
pub fn build_latency_vector<T: LatencyScalar>(
    author: ReplicaId,
    n: usize,
    round_trips: &std::collections::BTreeMap<ReplicaId, Option<T>>,
) -> LatencyVector<T> {
    let entries = (0..n as u32)
        .map(ReplicaId)
        .map(|b| {
            if b == author {
                T::zero()
            } else {
                round_trips.get(&b).copied().flatten().unwrap_or_else(T::infinity)
            }
        })
        .collect();
    LatencyVector { author, entries }
}

/// Symmetric matrix derived from the latest directed report of each side.
/// An entry is the larger of the two reports; a side that never reported
/// counts as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyMatrix<T: LatencyScalar = u64> {
    n: usize,
    reports: Vec<Option<T>>,
    sym: Vec<T>,
    generation: u64,
}

impl<T: LatencyScalar> LatencyMatrix<T> {
    pub fn new(n: usize) -> Self {
        LatencyMatrix {
            n,
            reports: vec![None; n * n],
            sym: vec![T::zero(); n * n],
            generation: 0,
        }
    }

    /// Builds a matrix where replica `a` reported `rows[a]`.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::new(n);
        for (a, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Malformed(format!(
                    "row {a} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (b, &v) in row.iter().enumerate() {
                if a != b {
                    m.reports[a * n + b] = Some(v);
                }
            }
        }
        for a in 0..n {
            m.refresh_row(a);
        }
        m.generation = 1;
        Ok(m)
    }

    /// Same value on every off-diagonal entry.
    pub fn uniform(n: usize, value: T) -> Self {
        let rows: Vec<Vec<T>> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| if a == b { T::zero() } else { value })
                    .collect()
            })
            .collect();
        Self::from_rows(&rows).expect("square by construction")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn get(&self, a: ReplicaId, b: ReplicaId) -> T {
        self.sym[a.index() * self.n + b.index()]
    }

    pub fn at(&self, a: usize, b: usize) -> T {
        self.sym[a * self.n + b]
    }

    pub fn reported(&self, from: ReplicaId, to: ReplicaId) -> Option<T> {
        self.reports[from.index() * self.n + to.index()]
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        (0..self.n)
            .map(|a| self.sym[a * self.n..(a + 1) * self.n].to_vec())
            .collect()
    }

    /// Applies a vector; the author's row and column are recomputed.
    pub fn apply(&mut self, v: &LatencyVector<T>) -> Result<()> {
        let a = v.author.index();
        if a >= self.n {
            return Err(Error::UnknownReplica(v.author));
        }
        if v.entries.len() != self.n {
            return Err(Error::Malformed(format!(
                "latency vector from {} has {} entries, expected {}",
                v.author,
                v.entries.len(),
                self.n
            )));
        }
        for (b, &lat) in v.entries.iter().enumerate() {
            if b != a {
                self.reports[a * self.n + b] = Some(lat);
            }
        }
        self.refresh_row(a);
        self.generation += 1;
        Ok(())
    }

    fn refresh_row(&mut self, a: usize) {
        let n = self.n;
        for b in 0..n {
            let v = if a == b {
                T::zero()
            } else {
                let x = self.reports[a * n + b].unwrap_or_else(T::zero);
                let y = self.reports[b * n + a].unwrap_or_else(T::zero);
                x.max_of(y)
            };
            self.sym[a * n + b] = v;
            self.sym[b * n + a] = v;
        }
    }

    /// Converts every entry through `f`, keeping INF as INF.
    pub fn map<U: LatencyScalar>(&self, f: impl Fn(T) -> U) -> LatencyMatrix<U> {
        let conv = |v: T| if v.is_infinite() { U::infinity() } else { f(v) };
        LatencyMatrix {
            n: self.n,
            reports: self.reports.iter().map(|r| r.map(conv)).collect(),
            sym: self.sym.iter().map(|&v| conv(v)).collect(),
            generation: self.generation,
        }
    }

    /// Copy where every link touching a replica in `silent` is INF.
    pub fn silenced(&self, silent: &std::collections::BTreeSet<ReplicaId>) -> Self {
        let mut m = self.clone();
        for s in silent {
            let a = s.index();
            if a >= self.n {
                continue;
            }
            for b in 0..self.n {
                if a != b {
                    m.sym[a * self.n + b] = T::infinity();
                    m.sym[b * self.n + a] = T::infinity();
                }
            }
        }
        m
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["replica".to_string()];
        header.extend((0..self.n).map(|i| i.to_string()));
        wr.write_record(&header).map_err(csv_err)?;
        for a in 0..self.n {
            let mut rec = vec![a.to_string()];
            rec.extend((0..self.n).map(|b| format_latency(self.at(a, b))));
            wr.write_record(&rec).map_err(csv_err)?;
        }
        wr.flush().map_err(|e| Error::Malformed(e.to_string()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rd.headers().map_err(csv_err)?.clone();
        let n = header.len().saturating_sub(1);
        for (i, h) in header.iter().skip(1).enumerate() {
            if h.trim() != i.to_string() {
                return Err(Error::Malformed(format!(
                    "header column {} should be {i}, found {h:?}",
                    i + 1
                )));
            }
        }
        let mut rows = Vec::with_capacity(n);
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() != n + 1 {
                return Err(Error::Malformed(format!(
                    "row {} has {} cells, expected {}",
                    line + 1,
                    rec.len(),
                    n + 1
                )));
            }
            let row: Vec<T> = rec
                .iter()
                .skip(1)
                .enumerate()
                .map(|(c, cell)| {
                    parse_latency(cell).ok_or_else(|| {
                        Error::Malformed(format!("row {} column {c}: bad latency {cell:?}", line + 1))
                    })
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        if rows.len() != n {
            return Err(Error::Malformed(format!(
                "expected {n} rows, found {}",
                rows.len()
            )));
        }
        Self::from_rows(&rows)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Malformed(e.to_string())
}

impl<T: LatencyScalar> Canonical for LatencyMatrix<T> {
    fn encode(&self, out: &mut Vec<u8>) {
        self.n.encode(out);
        self.generation.encode(out);
        for r in &self.reports {
            match r {
                None => out.push(0),
                Some(v) => {
                    out.push(1);
                    v.write_le(out);
                }
            }
        }
    }
}
