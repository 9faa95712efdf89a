//! CSV dataset files: header `split,x0,…,x{d−1},y[,y_hidden]`, one row per
//! sample, `split` is `source` or `target`, `y` is empty on target rows.

use std::path::Path;

use crate::error::{Error, Result};
use crate::measures::{LabeledSample, PdaDataset};

fn parse_f64(field: &str, line: u64, column: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Dataset(format!("line {line}: column `{column}` is not a number: `{field}`")))
}

pub fn read_dataset(path: &Path) -> Result<PdaDataset> {
    read_dataset_from(csv::Reader::from_path(path)?)
}

pub fn read_dataset_from<R: std::io::Read>(mut reader: csv::Reader<R>) -> Result<PdaDataset> {
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let split = col("split").ok_or_else(|| Error::Dataset("missing `split` column".into()))?;
    let y = col("y").ok_or_else(|| Error::Dataset("missing `y` column".into()))?;
    let hidden = col("y_hidden");
    let mut xs = Vec::new();
    while let Some(i) = col(&format!("x{}", xs.len())) {
        xs.push(i);
    }
    if xs.is_empty() {
        return Err(Error::Dataset("no `x0` column".into()));
    }

    let mut source = Vec::new();
    let mut target = Vec::new();
    let mut target_hidden = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let x = xs
            .iter()
            .enumerate()
            .map(|(k, &i)| parse_f64(field(i), line, &format!("x{k}")))
            .collect::<Result<Vec<_>>>()?;
        match field(split) {
            "source" => source.push(LabeledSample::new(x, parse_f64(field(y), line, "y")?)),
            "target" => {
                target.push(x);
                if let Some(h) = hidden {
                    let v = field(h);
                    target_hidden.push(if v.is_empty() { None } else { Some(parse_f64(v, line, "y_hidden")?) });
                }
            }
            other => return Err(Error::Dataset(format!("line {line}: unknown split `{other}`"))),
        }
    }
    let hidden = if hidden.is_some() && !target_hidden.is_empty() && target_hidden.iter().all(Option::is_some) {
        Some(target_hidden.into_iter().flatten().collect())
    } else {
        None
    };
    PdaDataset::new(source, target, hidden)
}

pub fn write_dataset(path: &Path, data: &PdaDataset) -> Result<()> {
    write_dataset_to(csv::Writer::from_path(path)?, data)
}

pub fn write_dataset_to<W: std::io::Write>(mut w: csv::Writer<W>, data: &PdaDataset) -> Result<()> {
    let d = data.input_dim();
    let with_hidden = data.target_labels_hidden.is_some();
    let mut header = vec!["split".to_string()];
    header.extend((0..d).map(|k| format!("x{k}")));
    header.push("y".into());
    if with_hidden {
        header.push("y_hidden".into());
    }
    w.write_record(&header)?;
    for s in &data.source {
        let mut row = vec!["source".to_string()];
        row.extend(s.x.iter().map(f64::to_string));
        row.push(s.y.to_string());
        if with_hidden {
            row.push(String::new());
        }
        w.write_record(&row)?;
    }
    for (j, x) in data.target_inputs.iter().enumerate() {
        let mut row = vec!["target".to_string()];
        row.extend(x.iter().map(f64::to_string));
        row.push(String::new());
        if let Some(h) = &data.target_labels_hidden {
            row.push(h[j].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
