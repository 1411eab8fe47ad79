use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnKind {
    Binary,
    Categorical { levels: Vec<String> },
    Continuous { min: f64, max: f64 },
}

impl ColumnKind {
    /// Number of encoded coordinates this column occupies.
    pub fn width(&self) -> usize {
        match self {
            ColumnKind::Binary | ColumnKind::Continuous { .. } => 1,
            ColumnKind::Categorical { levels } => levels.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

/// Ordered column typing that fixes the encoded layout.
///
/// Schema files hold one `name:kind[:args]` entry per line, with kinds `bin`,
/// `cat:A|B|C` and `cont:min|max`; `#` starts a comment line.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSchema {
    columns: Vec<Column>,
    offsets: Vec<usize>,
    width: usize,
}

impl FeatureSchema {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let mut names = HashSet::new();
        for col in &columns {
            if col.name.is_empty() {
                return Err(Error::Schema("empty column name".into()));
            }
            if !names.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", col.name)));
            }
            match &col.kind {
                ColumnKind::Binary => {}
                ColumnKind::Categorical { levels } => {
                    if levels.is_empty() {
                        return Err(Error::Schema(format!("categorical `{}` has no levels", col.name)));
                    }
                    let mut seen = HashSet::new();
                    for level in levels {
                        if level.is_empty() {
                            return Err(Error::Schema(format!("categorical `{}` has an empty level", col.name)));
                        }
                        if !seen.insert(level.as_str()) {
                            return Err(Error::Schema(format!(
                                "categorical `{}` repeats level `{level}`",
                                col.name
                            )));
                        }
                    }
                }
                ColumnKind::Continuous { min, max } => {
                    if !(min.is_finite() && max.is_finite() && min < max) {
                        return Err(Error::Schema(format!(
                            "continuous `{}` needs finite min < max, got [{min}, {max}]",
                            col.name
                        )));
                    }
                }
            }
        }
        let mut offsets = Vec::with_capacity(columns.len());
        let mut width = 0;
        for col in &columns {
            offsets.push(width);
            width += col.kind.width();
        }
        Ok(Self {
            columns,
            offsets,
            width,
        })
    }

    /// Schema of `n` binary columns named `c0..c{n-1}`.
    pub fn all_binary(n: usize) -> Self {
        Self::new(
            (0..n)
                .map(|i| Column {
                    name: format!("c{i}"),
                    kind: ColumnKind::Binary,
                })
                .collect(),
        )
        .expect("generated names are unique")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    /// Encoded width `C`.
    pub fn width(&self) -> usize {
        self.width
    }

    /// First encoded coordinate of column `i`.
    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Encoded coordinates of binary columns, in schema order.
    pub fn binary_coordinates(&self) -> Vec<usize> {
        self.columns
            .iter()
            .zip(&self.offsets)
            .filter(|(c, _)| c.kind == ColumnKind::Binary)
            .map(|(_, &o)| o)
            .collect()
    }

    pub fn binary_count(&self) -> usize {
        self.columns.iter().filter(|c| c.kind == ColumnKind::Binary).count()
    }
}

impl FromStr for FeatureSchema {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut columns = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::Schema(format!("line {}: {msg}: `{line}`", lineno + 1));
            let mut parts = line.splitn(3, ':');
            let name = parts.next().unwrap_or("").trim().to_string();
            let kind = parts.next().ok_or_else(|| bad("missing kind"))?.trim();
            let args = parts.next().map(str::trim);
            let kind = match (kind, args) {
                ("bin", None) => ColumnKind::Binary,
                ("bin", Some(_)) => return Err(bad("bin takes no arguments")),
                ("cat", Some(args)) => ColumnKind::Categorical {
                    levels: args.split('|').map(|l| l.trim().to_string()).collect(),
                },
                ("cont", Some(args)) => {
                    let (lo, hi) = args.split_once('|').ok_or_else(|| bad("cont needs min|max"))?;
                    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("bad number"));
                    ColumnKind::Continuous {
                        min: parse(lo)?,
                        max: parse(hi)?,
                    }
                }
                ("cat" | "cont", None) => return Err(bad("missing arguments")),
                _ => return Err(bad("unknown kind")),
            };
            columns.push(Column { name, kind });
        }
        FeatureSchema::new(columns)
    }
}

impl fmt::Display for FeatureSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for col in &self.columns {
            match &col.kind {
                ColumnKind::Binary => writeln!(f, "{}:bin", col.name)?,
                ColumnKind::Categorical { levels } => writeln!(f, "{}:cat:{}", col.name, levels.join("|"))?,
                ColumnKind::Continuous { min, max } => writeln!(f, "{}:cont:{min:?}|{max:?}", col.name)?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_kinds_and_comments() {
        let s: FeatureSchema = "# demo\n\nicd_401:bin\nsex:cat:F|M\nage:cont:0|120\n".parse().unwrap();
        assert_eq!(s.columns().len(), 3);
        assert_eq!(s.width(), 4);
        assert_eq!(s.offset(2), 3);
        assert_eq!(s.binary_coordinates(), vec![0]);
        assert_eq!(
            s.columns()[2].kind,
            ColumnKind::Continuous { min: 0.0, max: 120.0 }
        );
    }

    #[test]
    fn display_round_trips() {
        let s: FeatureSchema = "a:bin\nb:cat:x|y|z\nc:cont:-1.5|2\n".parse().unwrap();
        let again: FeatureSchema = s.to_string().parse().unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn rejects_invalid_schemas() {
        for bad in [
            "a:bin\na:bin",
            "a:cat:",
            "a:cat:x|x",
            "a:cont:2|1",
            "a:cont:1",
            "a:real",
            "a",
            "a:bin:1",
            ":bin",
        ] {
            assert!(bad.parse::<FeatureSchema>().is_err(), "{bad}");
        }
    }
}
