//! Per-category object size ratios and depth regularization intervals.
//!
//! The bundled table covers the 80 COCO categories. Each row gives the ratio
//! between the object sphere radius and the human shoulder width, plus the
//! `[gamma_min, gamma_max]` factors applied to the body's depth extremes.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED_CSV: &str = include_str!("../data/object_priors.csv");

pub const CSV_HEADER: [&str; 5] = ["category", "ratio", "gamma_min", "gamma_max", "box_ratio_mode"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPrior {
    pub category: String,
    /// Sphere radius divided by shoulder width.
    pub ratio: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Scale the radius by the object/human box diagonal ratio.
    #[serde(default)]
    pub box_ratio_mode: bool,
}

impl ObjectPrior {
    fn validate(&self, row: usize) -> Result<()> {
        let bad = |message: String| Error::InvalidPrior {
            row,
            category: self.category.clone(),
            message,
        };
        if self.category.trim().is_empty() {
            return Err(bad("empty category".into()));
        }
        if !(self.ratio.is_finite() && self.ratio > 0.0) {
            return Err(bad(format!("ratio must be positive, got {}", self.ratio)));
        }
        if !(self.gamma_min.is_finite() && self.gamma_min > 0.0) {
            return Err(bad(format!("gamma_min must be positive, got {}", self.gamma_min)));
        }
        if !self.gamma_max.is_finite() {
            return Err(bad(format!("gamma_max must be finite, got {}", self.gamma_max)));
        }
        if self.gamma_min > self.gamma_max {
            return Err(bad(format!(
                "gamma_min {} exceeds gamma_max {}",
                self.gamma_min, self.gamma_max
            )));
        }
        Ok(())
    }
}

/// Lower-case, trimmed, with spaces and hyphens folded to underscores.
pub fn normalize_name(name: &str) -> String {
    name.trim()
        .chars()
        .map(|c| match c {
            ' ' | '-' => '_',
            c => c.to_ascii_lowercase(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PriorTable {
    entries: BTreeMap<String, ObjectPrior>,
}

impl PriorTable {
    /// The 80-category table shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_reader(BUNDLED_CSV.as_bytes()).expect("bundled prior table is valid")
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
        let found: Vec<&str> = headers.iter().collect();
        if found != CSV_HEADER {
            return Err(Error::Parse {
                row: 1,
                message: format!("expected header {:?}, got {:?}", CSV_HEADER.join(","), found.join(",")),
            });
        }

        let mut entries = BTreeMap::new();
        for (i, rec) in rdr.deserialize::<ObjectPrior>().enumerate() {
            // header is row 1
            let row = i + 2;
            let prior = rec.map_err(|e| csv_error(e, row))?;
            prior.validate(row)?;
            let key = normalize_name(&prior.category);
            if entries.contains_key(&key) {
                return Err(Error::InvalidPrior {
                    row,
                    category: prior.category,
                    message: "duplicate category".into(),
                });
            }
            entries.insert(key, prior);
        }
        Ok(Self { entries })
    }

    pub fn from_entries(entries: impl IntoIterator<Item = ObjectPrior>) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (i, prior) in entries.into_iter().enumerate() {
            prior.validate(i + 1)?;
            let key = normalize_name(&prior.category);
            if table.contains_key(&key) {
                return Err(Error::InvalidPrior {
                    row: i + 1,
                    category: prior.category,
                    message: "duplicate category".into(),
                });
            }
            table.insert(key, prior);
        }
        Ok(Self { entries: table })
    }

    pub fn lookup(&self, category: &str) -> Result<&ObjectPrior> {
        self.entries
            .get(&normalize_name(category))
            .ok_or_else(|| Error::UnknownCategory(category.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ObjectPrior> {
        self.entries.values()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Parse {
            row: 0,
            message: e.to_string(),
        };
        wtr.write_record(CSV_HEADER).map_err(io)?;
        for p in self.entries.values() {
            wtr.write_record([
                p.category.clone(),
                p.ratio.to_string(),
                p.gamma_min.to_string(),
                p.gamma_max.to_string(),
                p.box_ratio_mode.to_string(),
            ])
            .map_err(io)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

pub fn load_priors(path: impl AsRef<Path>) -> Result<PriorTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    PriorTable::from_reader(file)
}

fn csv_error(e: csv::Error, row: usize) -> Error {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(row);
    Error::Parse {
        row,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_spot_values() {
        let t = PriorTable::bundled();
        assert_eq!(t.len(), 80);
        let apple = t.lookup("apple").unwrap();
        assert_eq!((apple.ratio, apple.gamma_min, apple.gamma_max), (0.205, 1.0, 1.0));
        let horse = t.lookup("horse").unwrap();
        assert_eq!((horse.ratio, horse.gamma_min, horse.gamma_max), (5.385, 0.8, 1.2));
        assert_eq!(t.lookup("train").unwrap().ratio, 512.82);
        assert!(t.iter().all(|p| p.gamma_min <= p.gamma_max && !p.box_ratio_mode));
    }

    #[test]
    fn lookup_normalizes_case_and_separators() {
        let t = PriorTable::bundled();
        assert_eq!(t.lookup("Baseball Bat").unwrap(), t.lookup("baseball_bat").unwrap());
        assert_eq!(t.lookup(" TEDDY-bear ").unwrap().ratio, 2.462);
        assert!(matches!(t.lookup("unicorn"), Err(Error::UnknownCategory(c)) if c == "unicorn"));
    }

    #[test]
    fn inverted_gamma_names_row() {
        let csv = "category,ratio,gamma_min,gamma_max,box_ratio_mode\n\
                   cup,0.5,1.0,1.0,false\n\
                   kite,2.0,1.3,0.7,false\n";
        match PriorTable::from_reader(csv.as_bytes()) {
            Err(Error::InvalidPrior { row, category, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(category, "kite");
            }
            other => panic!("expected invalid prior, got {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicates_and_bad_ratio() {
        let dup = "category,ratio,gamma_min,gamma_max,box_ratio_mode\ncup,1,1,1,false\nCup,2,1,1,false\n";
        assert!(matches!(
            PriorTable::from_reader(dup.as_bytes()),
            Err(Error::InvalidPrior { row: 3, .. })
        ));
        let neg = "category,ratio,gamma_min,gamma_max,box_ratio_mode\ncup,-1,1,1,false\n";
        assert!(matches!(
            PriorTable::from_reader(neg.as_bytes()),
            Err(Error::InvalidPrior { row: 2, .. })
        ));
        let junk = "category,ratio,gamma_min,gamma_max,box_ratio_mode\ncup,abc,1,1,false\n";
        assert!(matches!(
            PriorTable::from_reader(junk.as_bytes()),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn bad_header() {
        let csv = "name,ratio\ncup,1\n";
        assert!(matches!(
            PriorTable::from_reader(csv.as_bytes()),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let t = PriorTable::bundled();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(PriorTable::from_reader(buf.as_slice()).unwrap(), t);
    }
}
