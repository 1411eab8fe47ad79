use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::nn::{Matrix, RandomSource};

use super::schema::{ColumnKind, FeatureSchema};

/// One typed value of a raw record.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Binary(bool),
    Categorical(String),
    Continuous(f64),
}

/// Encoded records: an `N x C` matrix with every entry in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordMatrix {
    data: Matrix<f64>,
    schema: Arc<FeatureSchema>,
}

impl RecordMatrix {
    pub fn new(data: Matrix<f64>, schema: Arc<FeatureSchema>) -> Result<Self> {
        if data.cols() != schema.width() {
            return Err(Error::shape(format!(
                "matrix has {} columns, schema encodes {}",
                data.cols(),
                schema.width()
            )));
        }
        if let Some(pos) = data.as_slice().iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(format!(
                "entry ({}, {}) = {} outside [0, 1]",
                pos / data.cols().max(1),
                pos % data.cols().max(1),
                data.as_slice()[pos]
            )));
        }
        Ok(Self { data, schema })
    }

    pub fn empty(schema: Arc<FeatureSchema>) -> Self {
        Self {
            data: Matrix::zeros(0, schema.width()),
            schema,
        }
    }

    pub fn data(&self) -> &Matrix<f64> {
        &self.data
    }

    pub fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn row_count(&self) -> usize {
        self.data.rows()
    }

    pub fn col_count(&self) -> usize {
        self.data.cols()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            data: self.data.select_rows(indices),
            schema: Arc::clone(&self.schema),
        }
    }

    /// True when every binary entry is 0/1 and every categorical group is one-hot.
    pub fn is_decoded_valid(&self) -> bool {
        self.data.row_iter().all(|row| row_is_valid(row, &self.schema))
    }
}

fn row_is_valid(row: &[f64], schema: &FeatureSchema) -> bool {
    schema.columns().iter().enumerate().all(|(i, col)| {
        let o = schema.offset(i);
        match &col.kind {
            ColumnKind::Binary => row[o] == 0.0 || row[o] == 1.0,
            ColumnKind::Categorical { levels } => {
                let group = &row[o..o + levels.len()];
                group.iter().all(|&v| v == 0.0 || v == 1.0) && group.iter().filter(|&&v| v == 1.0).count() == 1
            }
            ColumnKind::Continuous { .. } => (0.0..=1.0).contains(&row[o]),
        }
    })
}

/// Encodes typed rows: binary passes through, categoricals one-hot,
/// continuous values mapped affinely onto `[0, 1]`.
pub fn encode_records(raw: &[Vec<Cell>], schema: &Arc<FeatureSchema>) -> Result<RecordMatrix> {
    let width = schema.width();
    let mut data = Vec::with_capacity(raw.len() * width);
    for (r, row) in raw.iter().enumerate() {
        if row.len() != schema.columns().len() {
            return Err(Error::Schema(format!(
                "row {r} has {} cells, schema has {} columns",
                row.len(),
                schema.columns().len()
            )));
        }
        for (col, cell) in schema.columns().iter().zip(row) {
            match (&col.kind, cell) {
                (ColumnKind::Binary, Cell::Binary(b)) => data.push(if *b { 1.0 } else { 0.0 }),
                (ColumnKind::Categorical { levels }, Cell::Categorical(value)) => {
                    let hit = levels.iter().position(|l| l == value).ok_or_else(|| Error::Domain {
                        row: r,
                        column: col.name.clone(),
                        value: value.clone(),
                    })?;
                    data.extend((0..levels.len()).map(|i| if i == hit { 1.0 } else { 0.0 }));
                }
                (&ColumnKind::Continuous { min, max }, &Cell::Continuous(value)) => {
                    if !(min..=max).contains(&value) {
                        return Err(Error::Range {
                            row: r,
                            column: col.name.clone(),
                            value,
                            min,
                            max,
                        });
                    }
                    data.push((value - min) / (max - min));
                }
                (kind, cell) => {
                    return Err(Error::Schema(format!(
                        "row {r}, column `{}`: cell {cell:?} does not fit kind {kind:?}",
                        col.name
                    )))
                }
            }
        }
    }
    let matrix = Matrix::from_vec(raw.len(), width, data)?;
    RecordMatrix::new(matrix, Arc::clone(schema))
}

/// Inverse of [`encode_records`]; total on `[0, 1]`-valued input.
///
/// Binary entries are read with a 0.5 threshold and categorical groups by
/// argmax, so post-processed sampler output decodes without surprises.
pub fn decode_records(encoded: &RecordMatrix) -> Vec<Vec<Cell>> {
    let schema = encoded.schema();
    encoded
        .data()
        .row_iter()
        .map(|row| decode_row(row, schema))
        .collect()
}

fn decode_row(row: &[f64], schema: &FeatureSchema) -> Vec<Cell> {
    schema
        .columns()
        .iter()
        .enumerate()
        .map(|(i, col)| {
            let o = schema.offset(i);
            match &col.kind {
                ColumnKind::Binary => Cell::Binary(row[o] >= 0.5),
                ColumnKind::Categorical { levels } => {
                    Cell::Categorical(levels[argmax(&row[o..o + levels.len()])].clone())
                }
                &ColumnKind::Continuous { min, max } => {
                    let u = row[o].clamp(0.0, 1.0);
                    // exact endpoints survive the round trip
                    Cell::Continuous(if u == 1.0 { max } else { min + u * (max - min) })
                }
            }
        })
        .collect()
}

/// Index of the largest entry; first wins ties, NaN never wins.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Maps a raw sampler vector onto a valid encoded record: continuous entries
/// clipped to `[0, 1]`, binary entries thresholded at 0.5, categorical groups
/// one-hot at their argmax.
pub fn postprocess_sample(raw: &[f64], schema: &FeatureSchema) -> Result<Vec<f64>> {
    if raw.len() != schema.width() {
        return Err(Error::shape(format!(
            "sample has {} entries, schema encodes {}",
            raw.len(),
            schema.width()
        )));
    }
    let mut out = vec![0.0; raw.len()];
    for (i, col) in schema.columns().iter().enumerate() {
        let o = schema.offset(i);
        match &col.kind {
            ColumnKind::Binary => out[o] = if raw[o] >= 0.5 { 1.0 } else { 0.0 },
            ColumnKind::Categorical { levels } => out[o + argmax(&raw[o..o + levels.len()])] = 1.0,
            ColumnKind::Continuous { .. } => {
                out[o] = if raw[o].is_nan() { 0.0 } else { raw[o].clamp(0.0, 1.0) }
            }
        }
    }
    Ok(out)
}

/// Row-wise [`postprocess_sample`] over a batch of raw samples.
pub fn postprocess_batch(raw: &Matrix<f64>, schema: &Arc<FeatureSchema>) -> Result<RecordMatrix> {
    let mut data = Vec::with_capacity(raw.rows() * raw.cols());
    for row in raw.row_iter() {
        data.extend(postprocess_sample(row, schema)?);
    }
    RecordMatrix::new(Matrix::from_vec(raw.rows(), schema.width(), data)?, Arc::clone(schema))
}

fn parse_cell(text: &str, kind: &ColumnKind, row: usize, column: &str) -> Result<Cell> {
    let text = text.trim();
    let parse_err = |message: String| Error::Parse {
        row,
        column: column.to_string(),
        message,
    };
    match kind {
        ColumnKind::Binary => match text {
            "1" | "1.0" => Ok(Cell::Binary(true)),
            "0" | "0.0" => Ok(Cell::Binary(false)),
            _ => Err(parse_err(format!("expected 0 or 1, found `{text}`"))),
        },
        ColumnKind::Categorical { levels } => {
            if levels.iter().any(|l| l == text) {
                Ok(Cell::Categorical(text.to_string()))
            } else {
                Err(Error::Domain {
                    row,
                    column: column.to_string(),
                    value: text.to_string(),
                })
            }
        }
        &ColumnKind::Continuous { min, max } => {
            let value: f64 = text
                .parse()
                .map_err(|_| parse_err(format!("expected a number, found `{text}`")))?;
            if !(min..=max).contains(&value) {
                return Err(Error::Range {
                    row,
                    column: column.to_string(),
                    value,
                    min,
                    max,
                });
            }
            Ok(Cell::Continuous(value))
        }
    }
}

/// Reads typed rows from headed CSV. Columns are matched by header name;
/// columns absent from the schema are ignored. Data rows are numbered from 1.
pub fn read_table<R: Read>(reader: R, schema: &FeatureSchema) -> Result<Vec<Vec<Cell>>> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = csv.headers()?.clone();
    let mut positions = Vec::with_capacity(schema.columns().len());
    for col in schema.columns() {
        let pos = header
            .iter()
            .position(|h| h.trim() == col.name)
            .ok_or_else(|| Error::Schema(format!("CSV header lacks column `{}`", col.name)))?;
        positions.push(pos);
    }
    let mut table = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let cells = schema
            .columns()
            .iter()
            .zip(&positions)
            .map(|(col, &p)| {
                let text = record.get(p).ok_or_else(|| Error::Parse {
                    row,
                    column: col.name.clone(),
                    message: "missing cell".into(),
                })?;
                parse_cell(text, &col.kind, row, &col.name)
            })
            .collect::<Result<Vec<_>>>()?;
        table.push(cells);
    }
    Ok(table)
}

/// Loads and encodes a headed CSV file; row order is preserved.
pub fn load_csv(path: impl AsRef<Path>, schema: &Arc<FeatureSchema>) -> Result<RecordMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let table = read_table(std::io::BufReader::new(file), schema)?;
    encode_records(&table, schema)
}

fn format_cell(cell: &Cell) -> String {
    match cell {
        Cell::Binary(b) => if *b { "1" } else { "0" }.to_string(),
        Cell::Categorical(s) => s.clone(),
        Cell::Continuous(v) => v.to_string(),
    }
}

/// Writes typed rows as CSV with the schema's column names as header.
pub fn write_table<W: Write>(writer: W, table: &[Vec<Cell>], schema: &FeatureSchema) -> Result<()> {
    let mut csv = csv::WriterBuilder::new().from_writer(writer);
    csv.write_record(schema.columns().iter().map(|c| c.name.as_str()))?;
    for row in table {
        csv.write_record(row.iter().map(format_cell))?;
    }
    csv.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

/// Seeded random partition into `round(N * train_fraction)` training rows and the rest.
pub fn split(matrix: &RecordMatrix, spec: SplitSpec) -> Result<(RecordMatrix, RecordMatrix)> {
    let n = matrix.row_count();
    if n < 2 {
        return Err(Error::Config(format!("cannot split {n} rows")));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    let n_train = (n as f64 * spec.train_fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Config(format!(
            "train fraction {} leaves an empty side for {n} rows",
            spec.train_fraction
        )));
    }
    let perm = RandomSource::new(spec.seed).permutation(n);
    let mut train_idx = perm[..n_train].to_vec();
    let mut test_idx = perm[n_train..].to_vec();
    // keep original relative order inside each side
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((matrix.select_rows(&train_idx), matrix.select_rows(&test_idx)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixed_schema() -> Arc<FeatureSchema> {
        Arc::new("b:bin\nc:cat:A|B|C\nx:cont:0|200\n".parse().unwrap())
    }

    #[test]
    fn csv_encoding_examples() {
        let schema: Arc<FeatureSchema> = Arc::new("flag:bin".parse().unwrap());
        let table = read_table("flag\n1\n0\n".as_bytes(), &schema).unwrap();
        let m = encode_records(&table, &schema).unwrap();
        assert_eq!(m.data().as_slice(), &[1.0, 0.0]);

        let schema = mixed_schema();
        let table = read_table("x,c,b\n50,B,0\n".as_bytes(), &schema).unwrap();
        let m = encode_records(&table, &schema).unwrap();
        assert_eq!(m.data().row(0), &[0.0, 0.0, 1.0, 0.0, 0.25]);
    }

    #[test]
    fn mixed_row_encoding() {
        let schema: Arc<FeatureSchema> = Arc::new("b:bin\nc:cat:A|B|C\nx:cont:10|30\n".parse().unwrap());
        let rows = vec![vec![
            Cell::Binary(true),
            Cell::Categorical("C".into()),
            Cell::Continuous(20.0),
        ]];
        let m = encode_records(&rows, &schema).unwrap();
        assert_eq!(m.data().row(0), &[1.0, 0.0, 0.0, 1.0, 0.5]);
        let endpoints = vec![
            vec![Cell::Binary(false), Cell::Categorical("A".into()), Cell::Continuous(10.0)],
            vec![Cell::Binary(false), Cell::Categorical("A".into()), Cell::Continuous(30.0)],
        ];
        let m = encode_records(&endpoints, &schema).unwrap();
        assert_eq!(m.data().get(0, 4), 0.0);
        assert_eq!(m.data().get(1, 4), 1.0);
    }

    #[test]
    fn ingestion_errors() {
        let schema = mixed_schema();
        assert!(matches!(
            read_table("b,c\n1,A\n".as_bytes(), &schema),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            read_table("b,c,x\n1,A,abc\n".as_bytes(), &schema),
            Err(Error::Parse { row: 1, .. })
        ));
        assert!(matches!(
            read_table("b,c,x\n1,A,1\n2,A,1\n".as_bytes(), &schema),
            Err(Error::Parse { row: 2, .. })
        ));
        assert!(matches!(
            read_table("b,c,x\n1,D,1\n".as_bytes(), &schema),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            read_table("b,c,x\n1,A,250\n".as_bytes(), &schema),
            Err(Error::Range { .. })
        ));
        let rows = vec![vec![Cell::Binary(true), Cell::Categorical("A".into()), Cell::Continuous(-1.0)]];
        assert!(matches!(encode_records(&rows, &schema), Err(Error::Range { .. })));
    }

    #[test]
    fn decoding_examples() {
        let schema = mixed_schema();
        let m = RecordMatrix::new(
            Matrix::from_rows(&[[1.0, 0.0, 1.0, 0.0, 0.25]]).unwrap(),
            Arc::clone(&schema),
        )
        .unwrap();
        let rows = decode_records(&m);
        assert_eq!(
            rows[0],
            vec![Cell::Binary(true), Cell::Categorical("B".into()), Cell::Continuous(50.0)]
        );
    }

    #[test]
    fn postprocess_examples() {
        let schema = mixed_schema();
        let out = postprocess_sample(&[0.73, 0.2, 0.9, 0.4, -0.2], &schema).unwrap();
        assert_eq!(out, vec![1.0, 0.0, 1.0, 0.0, 0.0]);
        let out = postprocess_sample(&[0.49, f64::NAN, -3.0, -3.0, 1.7], &schema).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 1.0, 0.0, 1.0]);
        assert!(postprocess_sample(&[0.0; 4], &schema).is_err());
    }

    #[test]
    fn record_matrix_rejects_out_of_range() {
        let schema = mixed_schema();
        assert!(RecordMatrix::new(Matrix::filled(1, 5, 1.5), Arc::clone(&schema)).is_err());
        assert!(RecordMatrix::new(Matrix::filled(1, 4, 0.5), schema).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let schema = Arc::new(FeatureSchema::all_binary(1));
        let data = Matrix::from_vec(10, 1, (0..10).map(|i| (i % 2) as f64).collect()).unwrap();
        let m = RecordMatrix::new(data, schema).unwrap();
        let spec = SplitSpec {
            train_fraction: 0.8,
            seed: 4,
        };
        let (train, test) = split(&m, spec).unwrap();
        assert_eq!((train.row_count(), test.row_count()), (8, 2));
        assert_eq!(split(&m, spec).unwrap(), (train, test));
        for f in [0.01, 0.99, 0.0, 1.0] {
            assert!(matches!(
                split(&m, SplitSpec { train_fraction: f, seed: 1 }),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn header_only_csv_round_trip() {
        let schema = mixed_schema();
        let mut buf = Vec::new();
        write_table(&mut buf, &[], &schema).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "b,c,x\n");
        assert!(read_table(buf.as_slice(), &schema).unwrap().is_empty());
    }
}
