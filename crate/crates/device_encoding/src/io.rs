//! JSON-lines dataset files: a layout header record followed by one graph
//! per line.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encode::{DeviceGraph, FeatureLayout};
use crate::{EncodingError, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record")]
enum DatasetRecord {
    #[serde(rename = "layout")]
    Layout { layout: FeatureLayout },
    #[serde(rename = "graph")]
    Graph { graph: DeviceGraph },
}

pub fn write_jsonl_dataset(
    path: &Path,
    layout: &FeatureLayout,
    graphs: &[DeviceGraph],
) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(
        &mut w,
        &DatasetRecord::Layout {
            layout: layout.clone(),
        },
    )?;
    w.write_all(b"\n")?;
    for g in graphs {
        serde_json::to_writer(&mut w, &DatasetRecord::Graph { graph: g.clone() })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl_dataset(path: &Path) -> Result<(FeatureLayout, Vec<DeviceGraph>)> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut layout = None;
    let mut graphs = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<DatasetRecord>(&line)? {
            DatasetRecord::Layout { layout: l } => {
                if layout.is_some() {
                    return Err(EncodingError::InvalidArgument(
                        "duplicate layout record".into(),
                    ));
                }
                layout = Some(l);
            }
            DatasetRecord::Graph { graph } => graphs.push(graph),
        }
    }
    let layout = layout.ok_or_else(|| {
        EncodingError::InvalidArgument("dataset missing layout header record".into())
    })?;
    for g in &graphs {
        if g.feature_width != layout.width() {
            return Err(EncodingError::InvalidArgument(
                "graph width inconsistent with layout header".into(),
            ));
        }
    }
    Ok((layout, graphs))
}
