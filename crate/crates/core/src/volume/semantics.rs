use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use nalgebra::DMatrix;

use super::{ConfigurationVolume, Pca, NUM_SETS};
use crate::error::{Error, Result};
use crate::priors::normalize_name;
use crate::skeleton;

/// Word vectors read from `name v1 ... vD` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    names: Vec<String>,
    index: HashMap<String, usize>,
    vectors: DMatrix<f64>,
}

impl EmbeddingTable {
    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut names = Vec::new();
        let mut flat = Vec::new();
        let mut dim = None;
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let row = i + 1;
            let line = line.map_err(|e| Error::Parse {
                row,
                message: e.to_string(),
            })?;
            let mut fields = line.split_whitespace();
            let Some(name) = fields.next() else { continue };
            let values = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|e| Error::Parse {
                        row,
                        message: format!("`{f}`: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            match dim {
                None if values.is_empty() => {
                    return Err(Error::Parse {
                        row,
                        message: "embedding has no values".into(),
                    })
                }
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(Error::Parse {
                        row,
                        message: format!("expected {d} values, got {}", values.len()),
                    })
                }
                _ => {}
            }
            names.push(name.to_string());
            flat.extend(values);
        }
        let dim = dim.ok_or_else(|| Error::Parse {
            row: 0,
            message: "embedding table is empty".into(),
        })?;
        Self::new(names, DMatrix::from_row_slice(flat.len() / dim, dim, &flat))
    }

    pub fn new(names: Vec<String>, vectors: DMatrix<f64>) -> Result<Self> {
        if names.len() != vectors.nrows() {
            return Err(Error::dim("embedding rows", names.len(), vectors.nrows()));
        }
        let mut index = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if index.insert(normalize_name(n), i).is_some() {
                return Err(Error::Parse {
                    row: i + 1,
                    message: format!("duplicate embedding `{n}`"),
                });
            }
        }
        Ok(Self { names, index, vectors })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(f)
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<Vec<f64>> {
        self.index
            .get(&normalize_name(name))
            .map(|&i| self.vectors.row(i).iter().copied().collect())
    }

    pub fn reduce(&self, k: usize) -> Result<ReducedEmbeddings> {
        ReducedEmbeddings::fit(self, k)
    }
}

/// The table projected onto its top-k principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedEmbeddings {
    index: HashMap<String, usize>,
    reduced: DMatrix<f64>,
}

impl ReducedEmbeddings {
    pub fn fit(table: &EmbeddingTable, k: usize) -> Result<Self> {
        let pca = Pca::fit(&table.vectors, k)?;
        Ok(Self {
            index: table.index.clone(),
            reduced: pca.transform(&table.vectors),
        })
    }

    pub fn get(&self, name: &str) -> Option<Vec<f64>> {
        self.index
            .get(&normalize_name(name))
            .map(|&i| self.reduced.row(i).iter().copied().collect())
    }

    pub fn k(&self) -> usize {
        self.reduced.ncols()
    }
}

/// Attach the reduced embedding of each part word and of the object category.
pub fn pair_semantics_with(volume: &ConfigurationVolume, reduced: &ReducedEmbeddings) -> Result<ConfigurationVolume> {
    let mut sem = Vec::with_capacity(NUM_SETS);
    for word in skeleton::PART_WORDS {
        sem.push(reduced.get(word).ok_or_else(|| Error::MissingEmbedding(word.into()))?);
    }
    sem.push(
        reduced
            .get(&volume.object_category)
            .ok_or_else(|| Error::MissingEmbedding(volume.object_category.clone()))?,
    );
    let mut out = volume.clone();
    out.semantics = Some(sem);
    Ok(out)
}

pub fn pair_semantics(volume: &ConfigurationVolume, table: &EmbeddingTable, k: usize) -> Result<ConfigurationVolume> {
    pair_semantics_with(volume, &table.reduce(k)?)
}
