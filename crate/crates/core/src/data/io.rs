use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::text::{format_value, lookup, quantize};
use super::{CondensedItem, CondensedSet, Dataset, TimeSeries};
use crate::error::{Error, Result};

const CONDENSED_MAGIC: &str = "#shapecond-condensed v1";
const LABELS_PREFIX: &str = "#labels\t";

/// Reads a labelled TSV dataset.
///
/// The first line is `#channels=<c> length=<L>`; every other non-comment line is
/// `label<TAB>values...` with the channels flattened channel-major. A file
/// without the header is read as univariate with the length of its first row.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}

pub(crate) fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());

    let Some((first_no, first)) = lines.next() else {
        return Err(Error::Empty("dataset file has no content".into()));
    };

    let mut pending = None;
    let (channels, length) = if first.starts_with('#') {
        let channels = header_usize(first, "#channels")?;
        let length = header_usize(first, "length")?;
        if channels == 0 || length == 0 {
            return Err(Error::Format("header declares an empty series shape".into()));
        }
        (channels, Some(length))
    } else {
        pending = Some((first_no, first));
        (1, None)
    };

    let mut names: Vec<String> = Vec::new();
    let mut series = Vec::new();
    let mut labels = Vec::new();
    let mut length = length;

    for (line_no, line) in pending.into_iter().chain(lines) {
        if line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let label = fields.next().unwrap_or_default().trim();
        let values = fields
            .map(|f| parse_finite(f, line_no))
            .collect::<Result<Vec<f64>>>()?;
        let expected = channels * *length.get_or_insert(values.len() / channels.max(1));
        if values.len() != expected || values.is_empty() {
            return Err(Error::Format(format!(
                "line {line_no}: {} values, expected {expected}",
                values.len()
            )));
        }
        let id = match names.iter().position(|n| n == label) {
            Some(id) => id,
            None => {
                names.push(label.to_string());
                names.len() - 1
            }
        };
        series.push(TimeSeries::new(values, channels)?);
        labels.push(id);
    }

    if series.is_empty() {
        return Err(Error::Empty("dataset file has no rows".into()));
    }
    Dataset::new(series, labels, names.len(), names)
}

fn header_usize(line: &str, key: &str) -> Result<usize> {
    lookup(line, key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format(format!("header {line:?} lacks a valid `{key}=` entry")))
}

fn parse_finite(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("{field:?} is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("{field:?} is not a finite value"),
        });
    }
    Ok(quantize(v))
}

fn write_comments(out: &mut String, comments: &[String]) {
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
}

fn push_values(out: &mut String, values: &[f64]) {
    for v in values {
        out.push('\t');
        out.push_str(&format_value(*v));
    }
}

/// Renders a dataset in the TSV format read by [`load_dataset`].
pub fn write_dataset(d: &Dataset, comments: &[String]) -> String {
    let mut out = format!("#channels={} length={}\n", d.channels(), d.length());
    write_comments(&mut out, comments);
    for (s, y) in d.iter() {
        out.push_str(&d.label_names()[y]);
        push_values(&mut out, s.values());
        out.push('\n');
    }
    out
}

pub fn save_dataset(d: &Dataset, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_dataset(d, comments)).map_err(|e| Error::io(path, e))
}

/// Renders a condensed set; fails if any soft label is not a probability vector.
pub fn write_condensed(c: &CondensedSet, comments: &[String]) -> Result<String> {
    c.validate()?;
    let mut out = format!(
        "{CONDENSED_MAGIC} channels={} length={} classes={}\n",
        c.channels, c.length, c.num_classes
    );
    out.push_str(LABELS_PREFIX);
    out.push_str(&c.label_names.join("\t"));
    out.push('\n');
    write_comments(&mut out, comments);
    for item in &c.items {
        let mut row = String::new();
        push_values(&mut row, item.series.values());
        push_values(&mut row, &item.soft_label);
        out.push_str(&row[1..]);
        out.push('\n');
    }
    Ok(out)
}

pub fn save_condensed(c: &CondensedSet, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
    let text = write_condensed(c, comments)?;
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_condensed(path: impl AsRef<Path>) -> Result<CondensedSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_condensed(&text)
}

pub(crate) fn parse_condensed(text: &str) -> Result<CondensedSet> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let header = lines
        .next()
        .map(|(_, l)| l)
        .filter(|l| l.starts_with(CONDENSED_MAGIC))
        .ok_or_else(|| Error::Format("missing condensed-set header".into()))?;
    let channels = header_usize(header, "channels")?;
    let length = header_usize(header, "length")?;
    let classes = header_usize(header, "classes")?;
    if channels == 0 || length == 0 || classes == 0 {
        return Err(Error::Format("condensed header declares an empty shape".into()));
    }

    let mut set = CondensedSet::empty(classes, channels, length);
    let width = channels * length;
    for (line_no, line) in lines {
        if let Some(names) = line.strip_prefix(LABELS_PREFIX) {
            set.label_names = names.split('\t').map(str::to_string).collect();
            if set.label_names.len() != classes {
                return Err(Error::Format(format!(
                    "{} label names for {classes} classes",
                    set.label_names.len()
                )));
            }
            continue;
        }
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let values = line
            .split('\t')
            .map(|f| parse_finite(f, line_no))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != width + classes {
            return Err(Error::Format(format!(
                "line {line_no}: {} fields, expected {}",
                values.len(),
                width + classes
            )));
        }
        let soft_label = values[width..].to_vec();
        let mut series = values;
        series.truncate(width);
        set.items.push(CondensedItem {
            series: TimeSeries::new(series, channels)?,
            soft_label,
        });
    }
    set.spc = set.items.len() / classes;
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOUR_ROWS: &str = "#channels=1 length=8\n\
        a\t1\t2\t3\t4\t5\t6\t7\t8\n\
        b\t0\t0\t0\t0\t0\t0\t0\t0\n\
        a\t1\t1\t1\t1\t1\t1\t1\t1\n\
        b\t2\t2\t2\t2\t2\t2\t2\t2\n";

    #[test]
    fn loads_shape_and_dense_labels() {
        let d = parse_dataset(FOUR_ROWS).unwrap();
        assert_eq!((d.len(), d.num_classes(), d.length()), (4, 2, 8));
        assert_eq!(d.labels(), &[0, 1, 0, 1]);
        assert_eq!(d.label_names(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn single_row_is_a_valid_dataset() {
        let d = parse_dataset("#channels=1 length=5\nx\t1\t2\t3\t4\t5\n").unwrap();
        assert_eq!((d.len(), d.num_classes(), d.length()), (1, 1, 5));
    }

    #[test]
    fn short_row_is_a_format_error() {
        let text = "#channels=1 length=8\na\t1\t2\t3\t4\t5\t6\t7\n";
        assert!(matches!(parse_dataset(text), Err(Error::Format(_))));
    }

    #[test]
    fn ragged_rows_without_header_are_rejected() {
        let text = "a\t1\t2\t3\nb\t1\t2\n";
        assert!(matches!(parse_dataset(text), Err(Error::Format(_))));
    }

    #[test]
    fn non_numeric_and_missing_values_are_parse_errors() {
        let text = "#channels=1 length=2\na\t1\tfoo\n";
        assert!(matches!(parse_dataset(text), Err(Error::Parse { line: 2, .. })));
        let text = "#channels=1 length=2\na\t1\tNaN\n";
        assert!(matches!(parse_dataset(text), Err(Error::Parse { .. })));
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(parse_dataset(""), Err(Error::Empty(_))));
        assert!(matches!(parse_dataset("#channels=1 length=3\n"), Err(Error::Empty(_))));
    }

    #[test]
    fn multichannel_rows_are_channel_major() {
        let d = parse_dataset("#channels=2 length=3\nz\t1\t2\t3\t4\t5\t6\n").unwrap();
        assert_eq!(d.series()[0].channel(1), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn dataset_round_trip_with_comments() {
        let d = parse_dataset(FOUR_ROWS).unwrap();
        let text = write_dataset(&d, &["seed=3".into()]);
        assert!(text.lines().nth(1).unwrap().starts_with("# seed=3"));
        assert_eq!(parse_dataset(&text).unwrap(), d);
    }

    fn sample_condensed() -> CondensedSet {
        let mut c = CondensedSet::empty(2, 1, 3);
        c.spc = 1;
        c.items.push(CondensedItem {
            series: TimeSeries::univariate(vec![0.125, -1.5, 2.0]).unwrap(),
            soft_label: vec![0.75, 0.25],
        });
        c.items.push(CondensedItem {
            series: TimeSeries::univariate(vec![1.0, 0.0, -0.333333333]).unwrap(),
            soft_label: vec![0.1, 0.9],
        });
        c
    }

    #[test]
    fn condensed_round_trip() {
        let c = sample_condensed();
        let text = write_condensed(&c, &[]).unwrap();
        assert_eq!(parse_condensed(&text).unwrap(), c);
    }

    #[test]
    fn invalid_soft_label_is_refused_on_save() {
        let mut c = sample_condensed();
        c.items[0].soft_label = vec![0.6, 0.5];
        assert!(matches!(write_condensed(&c, &[]), Err(Error::Invariant(_))));
    }

    #[test]
    fn empty_condensed_set_round_trips() {
        let c = CondensedSet::empty(3, 1, 4);
        let text = write_condensed(&c, &[]).unwrap();
        let back = parse_condensed(&text).unwrap();
        assert!(back.is_empty());
        assert_eq!(back, c);
    }

    #[test]
    fn corrupt_condensed_header() {
        assert!(matches!(parse_condensed("#shapecond-pool v1\n"), Err(Error::Format(_))));
        assert!(matches!(
            parse_condensed("#shapecond-condensed v1 channels=1 classes=2\n"),
            Err(Error::Format(_))
        ));
    }
}
