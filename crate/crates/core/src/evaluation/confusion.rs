use std::io::{Read, Write};

use crate::error::{Error, Result};

/// `counts[i][j]`: samples of true family `i` predicted as family `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    family_names: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(family_names: Vec<String>) -> Self {
        let n = family_names.len();
        Self {
            family_names,
            counts: vec![vec![0; n]; n],
        }
    }

    /// Families named `0..n`.
    pub fn unnamed(n: usize) -> Self {
        Self::new((0..n).map(|i| i.to_string()).collect())
    }

    pub fn from_counts(family_names: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = family_names.len();
        if counts.len() != n || counts.iter().any(|r| r.len() != n) {
            return Err(Error::Shape {
                expected: format!("{n}x{n} matrix"),
                actual: format!("{} rows", counts.len()),
            });
        }
        Ok(Self { family_names, counts })
    }

    pub fn n(&self) -> usize {
        self.family_names.len()
    }

    pub fn family_names(&self) -> &[String] {
        &self.family_names
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let n = self.n();
        for label in [truth, predicted] {
            if label >= n {
                return Err(Error::Label { label, classes: n });
            }
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    /// Adds another matrix over the same families.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.n() != self.n() {
            return Err(Error::Shape {
                expected: format!("{} families", self.n()),
                actual: format!("{} families", other.n()),
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    /// Samples whose true family is `i` (the support).
    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    /// Samples predicted as family `j`.
    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n()).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Header `family,<names...>`, then one row of counts per true family.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Format(format!("csv write: {e}"));
        let mut header = vec!["family".to_string()];
        header.extend(self.family_names.iter().cloned());
        out.write_record(&header).map_err(csv_err)?;
        for (name, row) in self.family_names.iter().zip(&self.counts) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|c| c.to_string()));
            out.write_record(&rec).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::Format(format!("csv write: {e}")))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr
            .headers()
            .map_err(|e| Error::Format(format!("confusion csv: {e}")))?
            .clone();
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut counts = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Format(format!("confusion csv: {e}")))?;
            if rec.get(0) != names.get(i).map(String::as_str) {
                return Err(Error::Format(format!("confusion csv row {i} does not match header order")));
            }
            let row = rec
                .iter()
                .skip(1)
                .map(|v| v.trim().parse::<u64>().map_err(|_| Error::Format(format!("bad count {v:?}"))))
                .collect::<Result<Vec<_>>>()?;
            counts.push(row);
        }
        Self::from_counts(names, counts).map_err(|e| Error::Format(format!("confusion csv: {e}")))
    }
}

/// Tallies `(truth, predicted)` pairs into an `n`-family matrix.
pub fn confusion(truth: &[usize], predicted: &[usize], n: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::Shape {
            expected: format!("{} predictions", truth.len()),
            actual: format!("{} predictions", predicted.len()),
        });
    }
    let mut cm = ConfusionMatrix::unnamed(n);
    for (&t, &p) in truth.iter().zip(predicted) {
        cm.record(t, p)?;
    }
    Ok(cm)
}
