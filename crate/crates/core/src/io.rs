//! CSV and JSON file formats.

use std::io::{BufRead, Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{CountVector, DetectorBin, DetectorKind, DetectorLayout, SourceGrid};

/// One region code per line; blank lines and `#` comments are skipped.
pub fn read_region_list<R: BufRead>(reader: R) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let code = line.split('#').next().unwrap_or("").trim();
        if !code.is_empty() {
            out.push(code.to_string());
        }
    }
    Ok(out)
}

/// Writes every detector bin as `kind,region,slot,count`, in layout order.
pub fn write_counts_csv<W: Write>(
    writer: W,
    grid: &SourceGrid,
    layout: &DetectorLayout,
    counts: &CountVector,
) -> Result<()> {
    Error::check_len("counts", layout.len(), counts.len())?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["kind", "region", "slot", "count"])?;
    for (bin, c) in layout.bins().iter().zip(counts.as_slice()) {
        let region = bin.region.map(|r| grid.regions()[r].as_str()).unwrap_or("");
        w.write_record([
            bin.kind.number().to_string(),
            region.to_string(),
            bin.slot.to_string(),
            c.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(serde::Deserialize)]
struct CountRow {
    kind: u8,
    region: Option<String>,
    slot: usize,
    count: u64,
}

/// Reads `kind,region,slot,count`. Bins absent from the file are zero and
/// repeated bins are summed, so sharded outputs can be concatenated.
pub fn read_counts_csv<R: Read>(reader: R, grid: &SourceGrid, layout: &DetectorLayout) -> Result<CountVector> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut counts = vec![0u64; layout.len()];
    for (line, row) in rdr.deserialize::<CountRow>().enumerate() {
        let row = row?;
        let at = || format!("line {}", line + 2);
        let kind = DetectorKind::from_number(row.kind)
            .ok_or_else(|| Error::validation("kind", format!("{}: {} is not 1, 2 or 3", at(), row.kind)))?;
        let region = match row.region.as_deref().filter(|r| !r.is_empty()) {
            Some(code) => Some(
                grid.region_index(code)
                    .ok_or_else(|| Error::validation("region", format!("{}: unknown region {code}", at())))?,
            ),
            None => None,
        };
        let bin = DetectorBin {
            kind,
            region,
            slot: row.slot,
        };
        let i = layout
            .index_of(&bin)
            .ok_or_else(|| Error::validation("slot", format!("{}: no detector bin {bin:?}", at())))?;
        counts[i] += row.count;
    }
    Ok(CountVector::new(counts))
}

/// Writes `region,slot,count` for every source bin.
pub fn write_population_csv<W: Write>(writer: W, grid: &SourceGrid, z: &[u64]) -> Result<()> {
    Error::check_len("population", grid.len(), z.len())?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["region", "slot", "count"])?;
    for (j, c) in z.iter().enumerate() {
        let (r, t) = grid.coords(j);
        w.write_record([grid.regions()[r].as_str(), &t.to_string(), &c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `region,slot,count` into source-bin order; missing bins are zero.
pub fn read_population_csv<R: Read>(reader: R, grid: &SourceGrid) -> Result<Vec<u64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut z = vec![0u64; grid.len()];
    for (line, row) in rdr.deserialize::<(String, usize, u64)>().enumerate() {
        let (region, slot, count) = row?;
        let r = grid.region_index(&region).ok_or_else(|| {
            Error::validation(
                "population region",
                format!("line {}: unknown region {region}", line + 2),
            )
        })?;
        if slot >= grid.time_slots() {
            return Err(Error::validation(
                "population slot",
                format!("line {}: slot {slot} >= {}", line + 2, grid.time_slots()),
            ));
        }
        z[grid.index(r, slot)] += count;
    }
    Ok(z)
}

/// `region,slot,intensity` for every source bin.
pub fn write_intensity_csv<W: Write>(writer: W, grid: &SourceGrid, f: &[f64]) -> Result<()> {
    Error::check_len("intensity", grid.len(), f.len())?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["region", "slot", "intensity"])?;
    for (j, v) in f.iter().enumerate() {
        let (r, t) = grid.coords(j);
        w.write_record([grid.regions()[r].as_str(), &t.to_string(), &v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `region,intensity` with time summed out.
pub fn write_spatial_csv<W: Write>(writer: W, grid: &SourceGrid, f: &[f64]) -> Result<()> {
    Error::check_len("intensity", grid.len(), f.len())?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["region", "intensity"])?;
    for (region, v) in grid.regions().iter().zip(grid.spatial_aggregate(f)) {
        w.write_record([region.as_str(), &v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `slot,intensity` with regions summed out.
pub fn write_temporal_csv<W: Write>(writer: W, grid: &SourceGrid, f: &[f64]) -> Result<()> {
    Error::check_len("intensity", grid.len(), f.len())?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["slot", "intensity"])?;
    for (t, v) in grid.temporal_aggregate(f).into_iter().enumerate() {
        w.write_record([t.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize>(mut writer: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer.write_all(b"\n")?;
    Ok(())
}
