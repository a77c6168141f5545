//! Categorical tables, one-hot encoding and transaction databases.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};

pub const LOW: &str = "low";
pub const MEDIUM: &str = "medium";
pub const HIGH: &str = "high";

/// Index of a one-hot feature, which doubles as the item id in a [`TransactionDb`].
pub type ItemId = usize;

/// A complete categorical table.
///
/// Rows hold category codes; `categories[c][rows[r][c]]` is the label of
/// cell `(r, c)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    columns: Vec<String>,
    categories: Vec<Vec<String>>,
    rows: Vec<Vec<usize>>,
}

impl Dataset {
    /// Builds a dataset from string cells, inferring categories in order of
    /// first appearance.
    pub fn from_labels<S: AsRef<str>>(columns: Vec<String>, rows: &[Vec<S>]) -> Result<Self> {
        let width = columns.len();
        let mut categories: Vec<Vec<String>> = vec![Vec::new(); width];
        let mut lookup: Vec<HashMap<String, usize>> = vec![HashMap::new(); width];
        let mut coded = Vec::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Parse {
                    row: r + 1,
                    message: format!("expected {width} fields, found {}", row.len()),
                });
            }
            let mut codes = Vec::with_capacity(width);
            for (c, cell) in row.iter().enumerate() {
                let label = cell.as_ref();
                let code = match lookup[c].get(label) {
                    Some(&code) => code,
                    None => {
                        let code = categories[c].len();
                        categories[c].push(label.to_owned());
                        lookup[c].insert(label.to_owned(), code);
                        code
                    }
                };
                codes.push(code);
            }
            coded.push(codes);
        }
        Ok(Dataset {
            columns,
            categories,
            rows: coded,
        })
    }

    /// Builds a dataset from explicit category lists and coded rows.
    pub fn from_codes(
        columns: Vec<String>,
        categories: Vec<Vec<String>>,
        rows: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if categories.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                found: categories.len(),
                context: "category lists per column",
            });
        }
        for (c, cats) in categories.iter().enumerate() {
            let mut seen = std::collections::HashSet::new();
            if let Some(dup) = cats.iter().find(|cat| !seen.insert(cat.as_str())) {
                return Err(Error::Format(format!(
                    "duplicate category {dup:?} in column {:?}",
                    columns[c]
                )));
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::Parse {
                    row: r + 1,
                    message: format!("expected {} fields, found {}", columns.len(), row.len()),
                });
            }
            for (c, &code) in row.iter().enumerate() {
                if code >= categories[c].len() {
                    return Err(Error::Parse {
                        row: r + 1,
                        message: format!("category code {code} out of range in column {c}"),
                    });
                }
            }
        }
        Ok(Dataset {
            columns,
            categories,
            rows,
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn categories(&self) -> &[Vec<String>] {
        &self.categories
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn label(&self, row: usize, column: usize) -> &str {
        &self.categories[column][self.rows[row][column]]
    }

    /// Keeps the given columns, in the given order. Category lists are
    /// carried over unchanged.
    pub fn select_columns(&self, keep: &[usize]) -> Dataset {
        Dataset {
            columns: keep.iter().map(|&c| self.columns[c].clone()).collect(),
            categories: keep.iter().map(|&c| self.categories[c].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|row| keep.iter().map(|&c| row[c]).collect())
                .collect(),
        }
    }

    /// The first `n` columns.
    pub fn prefix_columns(&self, n: usize) -> Dataset {
        let keep: Vec<usize> = (0..n.min(self.n_columns())).collect();
        self.select_columns(&keep)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(&self.columns)?;
        for r in 0..self.n_rows() {
            writer.write_record((0..self.n_columns()).map(|c| self.label(r, c)))?;
        }
        writer.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn read_records<R: Read>(input: R) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let mut records = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row: i + 1,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok((header, records))
}

/// Parses a categorical CSV table with a header row.
pub fn read_csv<R: Read>(input: R) -> Result<Dataset> {
    let (header, records) = read_records(input)?;
    let rows: Vec<Vec<&str>> = records.iter().map(|r| r.iter().collect()).collect();
    Dataset::from_labels(header, &rows)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file))
}

/// A dense real-valued table, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_numeric_csv<R: Read>(input: R) -> Result<NumericTable> {
    let (columns, records) = read_records(input)?;
    let mut rows = Vec::with_capacity(records.len());
    for (i, record) in records.iter().enumerate() {
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.trim().parse::<f64>().map_err(|_| Error::Parse {
                    row: i + 1,
                    message: format!("column {:?}: {field:?} is not a number", columns[c]),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(NumericTable { columns, rows })
}

pub fn load_numeric_csv(path: impl AsRef<Path>) -> Result<NumericTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_numeric_csv(std::io::BufReader::new(file))
}

/// Bins every column into `low` / `medium` / `high` by z-score.
///
/// Uses the population standard deviation; `|z| == cutoff` falls into the
/// outer bins. Zero-variance columns are entirely `medium`.
pub fn zscore_discretize(table: &NumericTable, cutoff: f64) -> Result<Dataset> {
    let n = table.rows.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let width = table.columns.len();
    for (r, row) in table.rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Parse {
                row: r + 1,
                message: format!("expected {width} fields, found {}", row.len()),
            });
        }
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                column: table.columns[c].clone(),
                row: r + 1,
            });
        }
    }

    let mut labels = vec![vec![MEDIUM; width]; n];
    for c in 0..width {
        let mean = table.rows.iter().map(|row| row[c]).sum::<f64>() / n as f64;
        let var = table
            .rows
            .iter()
            .map(|row| (row[c] - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        let sd = var.sqrt();
        if sd == 0.0 {
            continue;
        }
        for (r, row) in table.rows.iter().enumerate() {
            let z = (row[c] - mean) / sd;
            labels[r][c] = if z >= cutoff {
                HIGH
            } else if z <= -cutoff {
                LOW
            } else {
                MEDIUM
            };
        }
    }
    Dataset::from_labels(table.columns.clone(), &labels)
}

/// Layout of one-hot features: column `c` owns the half-open range `spans[c]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneHotSchema {
    columns: Vec<String>,
    categories: Vec<Vec<String>>,
    spans: Vec<Range<usize>>,
    feature_column: Vec<usize>,
}

impl OneHotSchema {
    pub fn new(columns: Vec<String>, categories: Vec<Vec<String>>) -> Result<Self> {
        if columns.len() != categories.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                found: categories.len(),
                context: "category lists per column",
            });
        }
        let mut spans = Vec::with_capacity(columns.len());
        let mut feature_column = Vec::new();
        let mut start = 0;
        for (c, cats) in categories.iter().enumerate() {
            if cats.is_empty() {
                return Err(Error::Format(format!("column {:?} has no categories", columns[c])));
            }
            spans.push(start..start + cats.len());
            feature_column.extend(std::iter::repeat_n(c, cats.len()));
            start += cats.len();
        }
        Ok(OneHotSchema {
            columns,
            categories,
            spans,
            feature_column,
        })
    }

    /// Schema over columns that each have a single category; handy for
    /// plain market-basket style item sets.
    pub fn single_items<S: AsRef<str>>(names: &[S]) -> Self {
        let columns: Vec<String> = names.iter().map(|s| s.as_ref().to_owned()).collect();
        let categories = vec![vec!["1".to_owned()]; columns.len()];
        OneHotSchema::new(columns, categories).expect("non-empty category lists")
    }

    pub fn from_dataset(ds: &Dataset) -> Self {
        OneHotSchema::new(ds.columns.clone(), ds.categories.clone())
            .expect("dataset categories are non-empty")
    }

    pub fn total_features(&self) -> usize {
        self.feature_column.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn categories(&self) -> &[Vec<String>] {
        &self.categories
    }

    pub fn spans(&self) -> &[Range<usize>] {
        &self.spans
    }

    pub fn span(&self, column: usize) -> Range<usize> {
        self.spans[column].clone()
    }

    pub fn column_of(&self, feature: ItemId) -> usize {
        self.feature_column[feature]
    }

    pub fn feature_index(&self, column: usize, category: usize) -> Option<ItemId> {
        let span = self.spans.get(column)?;
        (category < span.len()).then(|| span.start + category)
    }

    /// Looks a feature up by column name and category label.
    pub fn find(&self, column: &str, value: &str) -> Option<ItemId> {
        let c = self.columns.iter().position(|name| name == column)?;
        let k = self.categories[c].iter().position(|cat| cat == value)?;
        self.feature_index(c, k)
    }

    /// `(column name, category label)` of a feature.
    pub fn describe(&self, feature: ItemId) -> (&str, &str) {
        let c = self.feature_column[feature];
        let k = feature - self.spans[c].start;
        (&self.columns[c], &self.categories[c][k])
    }
}

/// Dense `n x d'` one-hot matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotMatrix {
    schema: OneHotSchema,
    n_rows: usize,
    values: Vec<f64>,
}

impl OneHotMatrix {
    /// Wraps raw values after checking the one-per-span invariant.
    pub fn new(schema: OneHotSchema, values: Vec<f64>) -> Result<Self> {
        let width = schema.total_features();
        if width == 0 || !values.len().is_multiple_of(width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                found: values.len(),
                context: "one-hot row width",
            });
        }
        let n_rows = values.len() / width;
        for (r, row) in values.chunks(width).enumerate() {
            for span in schema.spans() {
                let cells = &row[span.clone()];
                let ones = cells.iter().filter(|&&v| v == 1.0).count();
                let zeros = cells.iter().filter(|&&v| v == 0.0).count();
                if ones != 1 || ones + zeros != cells.len() {
                    return Err(Error::Parse {
                        row: r + 1,
                        message: "column span is not one-hot".into(),
                    });
                }
            }
        }
        Ok(OneHotMatrix {
            schema,
            n_rows,
            values,
        })
    }

    pub fn schema(&self) -> &OneHotSchema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn width(&self) -> usize {
        self.schema.total_features()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.width();
        &self.values[r * w..(r + 1) * w]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// One-hot encodes every row: column order first, then category order.
pub fn one_hot_encode(ds: &Dataset) -> Result<(OneHotSchema, OneHotMatrix)> {
    if ds.n_rows() == 0 || ds.n_columns() == 0 {
        return Err(Error::EmptyDataset);
    }
    let schema = OneHotSchema::from_dataset(ds);
    let width = schema.total_features();
    let mut values = vec![0.0; ds.n_rows() * width];
    for (r, row) in ds.rows().iter().enumerate() {
        for (c, &code) in row.iter().enumerate() {
            values[r * width + schema.spans[c].start + code] = 1.0;
        }
    }
    let matrix = OneHotMatrix {
        schema: schema.clone(),
        n_rows: ds.n_rows(),
        values,
    };
    Ok((schema, matrix))
}

/// Transactions over the feature universe of a schema.
///
/// Each transaction is a sorted list of item ids with at most one item per
/// column. Absent columns are allowed, which lets plain item-set databases
/// be expressed with [`OneHotSchema::single_items`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionDb {
    schema: OneHotSchema,
    transactions: Vec<Vec<ItemId>>,
}

impl TransactionDb {
    pub fn new(schema: OneHotSchema, mut transactions: Vec<Vec<ItemId>>) -> Result<Self> {
        let universe = schema.total_features();
        for t in transactions.iter_mut() {
            t.sort_unstable();
            t.dedup();
            if let Some(&bad) = t.iter().find(|&&i| i >= universe) {
                return Err(Error::DimensionMismatch {
                    expected: universe,
                    found: bad,
                    context: "item id outside the universe",
                });
            }
            for pair in t.windows(2) {
                if schema.column_of(pair[0]) == schema.column_of(pair[1]) {
                    return Err(Error::ColumnConflict {
                        column: schema.columns[schema.column_of(pair[0])].clone(),
                        first: pair[0],
                        second: pair[1],
                    });
                }
            }
        }
        Ok(TransactionDb {
            schema,
            transactions,
        })
    }

    pub fn schema(&self) -> &OneHotSchema {
        &self.schema
    }

    pub fn n_items(&self) -> usize {
        self.schema.total_features()
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn transactions(&self) -> &[Vec<ItemId>] {
        &self.transactions
    }

    /// Number of transactions containing every item of `items`.
    pub fn count(&self, items: &[ItemId]) -> usize {
        self.transactions
            .iter()
            .filter(|t| items.iter().all(|i| t.binary_search(i).is_ok()))
            .count()
    }
}

/// Reads off, per row, the items whose feature is set.
pub fn to_transactions(m: &OneHotMatrix) -> TransactionDb {
    let transactions = (0..m.n_rows())
        .map(|r| {
            m.row(r)
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == 1.0)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    TransactionDb {
        schema: m.schema.clone(),
        transactions,
    }
}

/// Shorthand for `to_transactions(one_hot_encode(ds))`.
pub fn dataset_transactions(ds: &Dataset) -> Result<TransactionDb> {
    let (_, m) = one_hot_encode(ds)?;
    Ok(to_transactions(&m))
}
