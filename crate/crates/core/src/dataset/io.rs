//! Table serialization: a plain delimited layout and the `@relation` /
//! `@attribute` / `@data` text layout read by desktop mining tools.

use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use super::{AggregationMode, Class, DatasetError, FeatureTable, Row};

pub const KEY_COLUMN: &str = "P_ID";
pub const CLASS_COLUMN: &str = "CLASS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Delimited,
    Arff,
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" | "delimited" => Ok(TableFormat::Delimited),
            "arff" => Ok(TableFormat::Arff),
            other => Err(format!("unknown table format {other:?} (expected csv or arff)")),
        }
    }
}

pub fn write_table<W: Write>(table: &FeatureTable, out: W, format: TableFormat) -> Result<(), DatasetError> {
    let mut out = std::io::BufWriter::new(out);
    match format {
        TableFormat::Delimited => {
            write!(out, "{KEY_COLUMN}")?;
            for name in table.attribute_names() {
                write!(out, ",{name}")?;
            }
            writeln!(out, ",{CLASS_COLUMN}")?;
        }
        TableFormat::Arff => {
            writeln!(out, "@relation labmine-{}", table.mode())?;
            writeln!(out)?;
            writeln!(out, "@attribute {KEY_COLUMN} numeric")?;
            for name in table.attribute_names() {
                writeln!(out, "@attribute '{}' numeric", name.replace('\'', "\\'"))?;
            }
            writeln!(out, "@attribute {CLASS_COLUMN} {{0,1}}")?;
            writeln!(out)?;
            writeln!(out, "@data")?;
        }
    }
    for row in table.rows() {
        write!(out, "{}", row.key)?;
        for v in &row.features {
            // Display for f64 is the shortest string that parses back exactly.
            write!(out, ",{v}")?;
        }
        writeln!(out, ",{}", row.class)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a table. For the delimited layout `mode` is recorded as the table's
/// aggregation mode; the attribute-relation layout carries its own mode in
/// the relation name and a disagreement with `mode` is a schema error.
pub fn read_table<R: Read>(input: R, format: TableFormat, mode: AggregationMode) -> Result<FeatureTable, DatasetError> {
    let reader = BufReader::new(input);
    match format {
        TableFormat::Delimited => read_delimited(reader, mode),
        TableFormat::Arff => read_arff(reader, mode),
    }
}

fn schema(line: usize, message: impl Into<String>) -> DatasetError {
    DatasetError::Schema { line, message: message.into() }
}

fn read_delimited<R: BufRead>(reader: R, mode: AggregationMode) -> Result<FeatureTable, DatasetError> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => return Err(schema(1, "missing header")),
        }
    };
    let cols: Vec<&str> = header.trim_end_matches('\r').split(',').map(str::trim).collect();
    if cols.first() != Some(&KEY_COLUMN) {
        return Err(schema(1, format!("first column must be {KEY_COLUMN}")));
    }
    if cols.len() < 2 || cols.last() != Some(&CLASS_COLUMN) {
        return Err(schema(1, format!("missing {CLASS_COLUMN} column")));
    }
    let names: Vec<String> = cols[1..cols.len() - 1].iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(parse_data_line(&line, names.len(), i + 1)?);
    }
    FeatureTable::new(names, rows, mode)
}

fn parse_data_line(line: &str, width: usize, line_no: usize) -> Result<Row, DatasetError> {
    let fields: Vec<&str> = line.trim_end_matches('\r').split(',').map(str::trim).collect();
    if fields.len() != width + 2 {
        return Err(schema(
            line_no,
            format!("expected {} fields, found {}", width + 2, fields.len()),
        ));
    }
    let key = fields[0]
        .parse::<u64>()
        .map_err(|_| schema(line_no, format!("bad patient key {:?}", fields[0])))?;
    let features = fields[1..=width]
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| schema(line_no, format!("bad numeric value {f:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let class = match fields[width + 1] {
        "0" => Class::Alive,
        "1" => Class::Dead,
        other => return Err(schema(line_no, format!("bad class label {other:?}"))),
    };
    Ok(Row { key, features, class })
}

fn unquote(s: &str) -> String {
    let s = s.trim();
    if s.len() >= 2 && ((s.starts_with('\'') && s.ends_with('\'')) || (s.starts_with('"') && s.ends_with('"'))) {
        s[1..s.len() - 1].replace("\\'", "'")
    } else {
        s.to_string()
    }
}

/// Splits `@attribute <name> <type>` into (name, type), honouring quotes.
fn split_attribute(rest: &str) -> Option<(String, String)> {
    let rest = rest.trim();
    let (name, ty) = if let Some(q) = rest.chars().next().filter(|c| *c == '\'' || *c == '"') {
        let mut end = None;
        let bytes = rest.as_bytes();
        let mut i = 1;
        while i < bytes.len() {
            if bytes[i] == b'\\' {
                i += 2;
                continue;
            }
            if bytes[i] as char == q {
                end = Some(i);
                break;
            }
            i += 1;
        }
        let end = end?;
        (unquote(&rest[..=end]), rest[end + 1..].trim().to_string())
    } else {
        let mut it = rest.splitn(2, char::is_whitespace);
        (it.next()?.to_string(), it.next().unwrap_or("").trim().to_string())
    };
    Some((name, ty))
}

fn read_arff<R: BufRead>(reader: R, mode: AggregationMode) -> Result<FeatureTable, DatasetError> {
    let mut attributes: Vec<(String, String)> = Vec::new();
    let mut in_data = false;
    let mut names: Vec<String> = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        if in_data {
            rows.push(parse_data_line(trimmed, names.len(), line_no)?);
            continue;
        }
        let lower = trimmed.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            let relation = unquote(&trimmed["@relation".len()..]);
            if let Some(tag) = relation.strip_prefix("labmine-") {
                let declared: AggregationMode = tag.parse().map_err(|e: String| schema(line_no, e))?;
                if declared != mode {
                    return Err(schema(
                        line_no,
                        format!("relation declares mode {declared}, expected {mode}"),
                    ));
                }
            }
        } else if lower.starts_with("@attribute") {
            let (name, ty) = split_attribute(&trimmed["@attribute".len()..])
                .ok_or_else(|| schema(line_no, "malformed @attribute"))?;
            attributes.push((name, ty));
        } else if lower.starts_with("@data") {
            if attributes.first().map(|a| a.0.as_str()) != Some(KEY_COLUMN) {
                return Err(schema(line_no, format!("first attribute must be {KEY_COLUMN}")));
            }
            if attributes.len() < 2 || attributes.last().map(|a| a.0.as_str()) != Some(CLASS_COLUMN) {
                return Err(schema(line_no, format!("missing {CLASS_COLUMN} attribute")));
            }
            for (name, ty) in &attributes[1..attributes.len() - 1] {
                let t = ty.to_ascii_lowercase();
                if t != "numeric" && t != "real" && t != "integer" {
                    return Err(schema(line_no, format!("attribute {name:?} is not numeric")));
                }
            }
            names = attributes[1..attributes.len() - 1].iter().map(|a| a.0.clone()).collect();
            in_data = true;
        } else {
            return Err(schema(line_no, format!("unexpected line {trimmed:?}")));
        }
    }
    if !in_data {
        return Err(schema(0, "missing @data section"));
    }
    FeatureTable::new(names, rows, mode)
}
