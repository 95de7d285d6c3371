//! Word-order frequency tables: CSV and JSON loading, validation, export, and
//! conversion of order labels to permutohedron vertices.
//!
//! The CSV layout is flat, one line per (row, order):
//!
//! ```text
//! database,kind,n,structure,unit,order,frequency
//! WALS,dominant order,3,SOV,langs,SOV,565
//! ```
//!
//! `structure` lists the elements, one character each; the `k`-th character
//! is element `k`. Every order label must be a rearrangement of the
//! structure. Orders that are not listed have frequency zero.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::OrderDistribution;
use crate::permutohedron::{factorial, Permutation, Permutohedron, MAX_ORDER};

/// One CSV line, also the element type of the JSON mirror.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderRecord {
    pub database: String,
    pub kind: String,
    pub n: usize,
    pub structure: String,
    pub unit: String,
    pub order: String,
    pub frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderFrequency {
    pub order: String,
    pub frequency: f64,
}

/// A validated frequency table for one (database, kind, structure, unit).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub database: String,
    pub kind: String,
    pub n: usize,
    pub structure: String,
    pub unit: String,
    pub orders: Vec<OrderFrequency>,
}

impl DatasetRow {
    pub fn elements(&self) -> Vec<char> {
        self.structure.chars().collect()
    }

    /// Total frequency `F`, recomputed from the listed orders.
    pub fn total(&self) -> f64 {
        self.orders.iter().map(|o| o.frequency).sum()
    }

    pub fn title(&self) -> String {
        format!("{} / {} / {} / {}", self.database, self.kind, self.structure, self.unit)
    }

    /// Permutation of `1..=n` named by `label`.
    pub fn permutation_of(&self, label: &str) -> Result<Permutation> {
        label_to_permutation(&self.elements(), label)
    }
}

fn label_to_permutation(elements: &[char], label: &str) -> Result<Permutation> {
    let chars: Vec<char> = label.chars().collect();
    if chars.len() != elements.len() {
        return Err(Error::Argument(format!(
            "order {label:?} has {} elements, structure has {}",
            chars.len(),
            elements.len()
        )));
    }
    let perm = chars
        .iter()
        .map(|c| {
            elements
                .iter()
                .position(|e| e == c)
                .map(|k| k as u8 + 1)
                .ok_or_else(|| Error::Argument(format!("order {label:?} uses unknown element {c:?}")))
        })
        .collect::<Result<Vec<u8>>>()?;
    Permutation::new(perm)
        .map_err(|_| Error::Argument(format!("order {label:?} is not a rearrangement of the structure")))
}

fn dataset_error(location: impl Into<String>, err: Error) -> Error {
    match err {
        Error::Argument(message) => Error::Dataset { location: location.into(), message },
        other => Error::Dataset { location: location.into(), message: other.to_string() },
    }
}

fn validate_structure(structure: &str, n: usize) -> Result<()> {
    let elements: Vec<char> = structure.chars().collect();
    if n == 0 || n > MAX_ORDER {
        return Err(Error::Argument(format!("n = {n} outside 1..={MAX_ORDER}")));
    }
    if elements.len() != n {
        return Err(Error::Argument(format!("structure {structure:?} does not have n = {n} elements")));
    }
    for (i, c) in elements.iter().enumerate() {
        if elements[..i].contains(c) {
            return Err(Error::Argument(format!("structure {structure:?} repeats element {c:?}")));
        }
    }
    Ok(())
}

/// Groups records into rows (first-appearance order) and validates them.
/// `locations[i]` names record `i` in error messages.
pub fn rows_from_records(records: Vec<OrderRecord>, locations: &[String]) -> Result<Vec<DatasetRow>> {
    type Key = (String, String, usize, String, String);
    let mut index: HashMap<Key, usize> = HashMap::new();
    let mut rows: Vec<DatasetRow> = Vec::new();
    let mut first_location: Vec<String> = Vec::new();
    for (rec, loc) in records.into_iter().zip(locations) {
        validate_structure(&rec.structure, rec.n).map_err(|e| dataset_error(loc, e))?;
        if !rec.frequency.is_finite() || rec.frequency < 0.0 {
            return Err(Error::Dataset {
                location: loc.clone(),
                message: format!("frequency {} is not a finite nonnegative number", rec.frequency),
            });
        }
        let elements: Vec<char> = rec.structure.chars().collect();
        label_to_permutation(&elements, &rec.order).map_err(|e| dataset_error(loc, e))?;

        let key = (rec.database.clone(), rec.kind.clone(), rec.n, rec.structure.clone(), rec.unit.clone());
        let slot = *index.entry(key).or_insert_with(|| {
            rows.push(DatasetRow {
                database: rec.database,
                kind: rec.kind,
                n: rec.n,
                structure: rec.structure,
                unit: rec.unit,
                orders: Vec::new(),
            });
            first_location.push(loc.clone());
            rows.len() - 1
        });
        let row = &mut rows[slot];
        if row.orders.iter().any(|o| o.order == rec.order) {
            return Err(Error::Dataset {
                location: loc.clone(),
                message: format!("order {:?} listed twice for {}", rec.order, row.title()),
            });
        }
        row.orders.push(OrderFrequency { order: rec.order, frequency: rec.frequency });
    }
    for (row, loc) in rows.iter().zip(&first_location) {
        if !row.orders.iter().any(|o| o.frequency > 0.0) {
            return Err(Error::Dataset {
                location: loc.clone(),
                message: format!("{} has no positive frequency", row.title()),
            });
        }
    }
    Ok(rows)
}

pub fn read_csv<R: Read>(reader: R, source: &str) -> Result<Vec<DatasetRow>> {
    let mut csv_reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut records = Vec::new();
    let mut locations = Vec::new();
    let headers = csv_reader.headers()?.clone();
    for result in csv_reader.records() {
        let raw = result.map_err(|e| Error::Dataset { location: source.to_string(), message: e.to_string() })?;
        let location = format!("{source}:{}", raw.position().map_or(0, |p| p.line()));
        let rec: OrderRecord = raw
            .deserialize(Some(&headers))
            .map_err(|e| Error::Dataset { location: location.clone(), message: e.to_string() })?;
        records.push(rec);
        locations.push(location);
    }
    rows_from_records(records, &locations)
}

pub fn load_csv(path: &Path) -> Result<Vec<DatasetRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Dataset {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    read_csv(file, &path.display().to_string())
}

pub fn read_json<R: Read>(reader: R, source: &str) -> Result<Vec<DatasetRow>> {
    let records: Vec<OrderRecord> = serde_json::from_reader(reader)
        .map_err(|e| Error::Dataset { location: source.to_string(), message: e.to_string() })?;
    let locations: Vec<String> = (0..records.len()).map(|i| format!("{source}[{i}]")).collect();
    rows_from_records(records, &locations)
}

pub fn load_json(path: &Path) -> Result<Vec<DatasetRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Dataset {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    read_json(file, &path.display().to_string())
}

/// Loads CSV, or JSON when the extension is `.json`.
pub fn load(path: &Path) -> Result<Vec<DatasetRow>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => load_json(path),
        _ => load_csv(path),
    }
}

pub fn to_records(rows: &[DatasetRow]) -> Vec<OrderRecord> {
    rows.iter()
        .flat_map(|row| {
            row.orders.iter().map(move |o| OrderRecord {
                database: row.database.clone(),
                kind: row.kind.clone(),
                n: row.n,
                structure: row.structure.clone(),
                unit: row.unit.clone(),
                order: o.order.clone(),
                frequency: o.frequency,
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[DatasetRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for rec in to_records(rows) {
        w.serialize(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(rows: &[DatasetRow], writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, &to_records(rows))?;
    Ok(())
}

/// Places the row's frequencies on the vertices of `g`.
pub fn to_distribution(row: &DatasetRow, g: &Permutohedron) -> Result<OrderDistribution> {
    if row.n != g.order() {
        return Err(Error::Dimension { expected: g.order(), got: row.n });
    }
    let mut freqs = vec![0.0; factorial(row.n) as usize];
    for o in &row.orders {
        let v = g.vertex_of(&row.permutation_of(&o.order)?)?;
        freqs[v] = o.frequency;
    }
    OrderDistribution::with_labels(row.elements(), freqs)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "database,kind,n,structure,unit,order,frequency\n";

    fn parse(body: &str) -> Result<Vec<DatasetRow>> {
        read_csv(format!("{HEADER}{body}").as_bytes(), "test.csv")
    }

    #[test]
    fn two_orders() {
        let rows = parse("A,dominant order,3,SOV,langs,SOV,2\nA,dominant order,3,SOV,langs,SVO,1\n").unwrap();
        assert_eq!(rows.len(), 1);
        let g = Permutohedron::build(3).unwrap();
        let d = to_distribution(&rows[0], &g).unwrap();
        assert_eq!((d.support_size(), d.total()), (2, 3.0));
        let sov = g.vertex_of(&Permutation::identity(3)).unwrap();
        assert_eq!(d.freqs()[sov], 2.0);
        let svo = g.vertex_of(&Permutation::new(vec![1, 3, 2]).unwrap()).unwrap();
        assert_eq!(d.freqs()[svo], 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        let bad = [
            "A,k,3,SOV,langs,SSV,1\n",
            "A,k,3,SOV,langs,SOX,1\n",
            "A,k,3,SOV,langs,SO,1\n",
            "A,k,3,SOV,langs,SOV,-1\n",
            "A,k,3,SOV,langs,SOV,1\nA,k,3,SOV,langs,SOV,2\n",
            "A,k,3,SOV,langs,SOV,0\n",
            "A,k,3,SOVI,langs,SOV,1\n",
            "A,k,3,SOS,langs,SOS,1\n",
            "A,k,3,SOV,langs,SOV,abc\n",
        ];
        for body in bad {
            let err = parse(body).unwrap_err();
            assert!(matches!(err, Error::Dataset { .. }), "{body}: {err}");
            assert!(err.is_input_error());
        }
    }

    #[test]
    fn fractional_frequencies_accepted() {
        let rows = parse("D,dominant order,4,nAND,adj. langs.,DNAn,12.3\nD,dominant order,4,nAND,adj. langs.,nAND,7.45\n")
            .unwrap();
        assert!((rows[0].total() - 19.75).abs() < 1e-12);
    }

    #[test]
    fn line_order_does_not_matter() {
        let g = Permutohedron::build(3).unwrap();
        let a = parse("A,k,3,SOV,u,SOV,5\nA,k,3,SOV,u,VSO,2\nA,k,3,SOV,u,OVS,1\n").unwrap();
        let b = parse("A,k,3,SOV,u,OVS,1\nA,k,3,SOV,u,SOV,5\nA,k,3,SOV,u,VSO,2\n").unwrap();
        assert_eq!(to_distribution(&a[0], &g).unwrap(), to_distribution(&b[0], &g).unwrap());
    }

    #[test]
    fn rows_keep_first_appearance_order() {
        let rows = parse("B,k,3,SOV,u,SOV,1\nA,k,3,SOV,u,SOV,1\nB,k,3,SOV,u,OSV,1\n").unwrap();
        assert_eq!(rows.iter().map(|r| r.database.as_str()).collect::<Vec<_>>(), vec!["B", "A"]);
        assert_eq!(rows[0].orders.len(), 2);
    }

    #[test]
    fn round_trips_are_exact() {
        let rows = parse("A,k,3,SOV,u,SOV,0.1\nA,k,3,SOV,u,VOS,1e-300\nA,k,3,SOV,u,OVS,123456.789012345\n").unwrap();
        let mut csv_out = Vec::new();
        write_csv(&rows, &mut csv_out).unwrap();
        assert_eq!(read_csv(csv_out.as_slice(), "x").unwrap(), rows);
        let mut json_out = Vec::new();
        write_json(&rows, &mut json_out).unwrap();
        assert_eq!(read_json(json_out.as_slice(), "x").unwrap(), rows);
    }

    #[test]
    fn n_mismatch() {
        let rows = parse("A,k,3,SOV,u,SOV,1\n").unwrap();
        let g4 = Permutohedron::build(4).unwrap();
        assert!(matches!(to_distribution(&rows[0], &g4), Err(Error::Dimension { .. })));
    }
}
