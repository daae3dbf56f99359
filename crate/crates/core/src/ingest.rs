//! Streaming reduction of labeled event records into detector-bin counts.

use std::io::Read;

use chrono::{DateTime, FixedOffset, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CountVector, DetectorBin, DetectorKind, DetectorLayout, SourceGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationKind {
    Precise,
    SelfDeclared,
    None,
}

impl LocationKind {
    pub fn detector_kind(self) -> DetectorKind {
        match self {
            LocationKind::Precise => DetectorKind::Precise,
            LocationKind::SelfDeclared => DetectorKind::SelfDeclared,
            LocationKind::None => DetectorKind::NoLocation,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "precise" => Some(LocationKind::Precise),
            "self_declared" => Some(LocationKind::SelfDeclared),
            "none" => Some(LocationKind::None),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventRecord {
    pub timestamp: DateTime<Utc>,
    pub location_kind: LocationKind,
    /// Present exactly when `location_kind` is not `None`.
    pub region: Option<String>,
    pub is_target: bool,
}

/// Which records to count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventFilter {
    /// Target records into all three kinds (`x`).
    Target,
    /// All records, precise only (`z⁽¹⁾`).
    All,
}

/// Maps timestamps to hour-of-day slots in a fixed UTC offset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotMapping {
    pub time_slots: usize,
    pub offset: FixedOffset,
}

impl SlotMapping {
    pub fn new(time_slots: usize, utc_offset_minutes: i32) -> Result<Self> {
        if time_slots == 0 || 86_400 % time_slots != 0 {
            return Err(Error::validation(
                "time_slots",
                format!("{time_slots} must divide 86400"),
            ));
        }
        let offset = FixedOffset::east_opt(utc_offset_minutes * 60)
            .ok_or_else(|| Error::validation("utc_offset_minutes", format!("{utc_offset_minutes} is out of range")))?;
        Ok(SlotMapping { time_slots, offset })
    }

    pub fn slot(&self, timestamp: &DateTime<Utc>) -> usize {
        let local = timestamp.with_timezone(&self.offset);
        let second = local.num_seconds_from_midnight() as usize;
        second * self.time_slots / 86_400
    }
}

/// A record that could not be binned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    /// 1-based line number in the input, header included.
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub records: usize,
    /// Records counted into a bin.
    pub binned: usize,
    /// Valid records excluded by the filter.
    pub filtered: usize,
    pub rejected: Vec<Rejection>,
}

impl IngestReport {
    pub fn accepted(&self) -> usize {
        self.binned + self.filtered
    }
}

#[derive(Deserialize)]
struct RawRecord {
    timestamp: String,
    location_kind: String,
    region: Option<String>,
    is_target: String,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

fn parse_record(raw: RawRecord) -> std::result::Result<EventRecord, String> {
    let timestamp = DateTime::parse_from_rfc3339(raw.timestamp.trim())
        .map_err(|e| format!("timestamp {:?}: {e}", raw.timestamp))?
        .with_timezone(&Utc);
    let location_kind = LocationKind::parse(raw.location_kind.trim()).ok_or_else(|| {
        format!(
            "location_kind {:?} is not precise, self_declared or none",
            raw.location_kind
        )
    })?;
    let region = raw.region.map(|r| r.trim().to_string()).filter(|r| !r.is_empty());
    match (location_kind, &region) {
        (LocationKind::None, Some(r)) => return Err(format!("region {r:?} given for a record without location")),
        (LocationKind::Precise | LocationKind::SelfDeclared, None) => {
            return Err("region missing for a located record".to_string())
        }
        _ => {}
    }
    let is_target =
        parse_bool(raw.is_target.trim()).ok_or_else(|| format!("is_target {:?} is not a boolean", raw.is_target))?;
    Ok(EventRecord {
        timestamp,
        location_kind,
        region,
        is_target,
    })
}

/// Reads `timestamp,location_kind,region,is_target` rows. Each row yields
/// either a record or a rejection carrying its line number.
pub fn read_events<R: Read>(reader: R) -> impl Iterator<Item = (usize, std::result::Result<EventRecord, String>)> {
    let rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    rdr.into_deserialize::<RawRecord>().enumerate().map(|(k, row)| {
        let line = k + 2;
        (line, row.map_err(|e| e.to_string()).and_then(parse_record))
    })
}

/// Counts records into the layout. With [`EventFilter::All`] only precise
/// records are kept, other kinds count as filtered.
pub fn bin_events<I>(
    records: I,
    grid: &SourceGrid,
    layout: &DetectorLayout,
    mapping: &SlotMapping,
    filter: EventFilter,
) -> Result<(CountVector, IngestReport)>
where
    I: IntoIterator<Item = (usize, std::result::Result<EventRecord, String>)>,
{
    if mapping.time_slots != grid.time_slots() {
        return Err(Error::validation(
            "time_slots",
            format!(
                "slot mapping has {}, grid has {}",
                mapping.time_slots,
                grid.time_slots()
            ),
        ));
    }
    let mut counts = vec![0u64; layout.len()];
    let mut report = IngestReport {
        records: 0,
        binned: 0,
        filtered: 0,
        rejected: Vec::new(),
    };
    for (line, record) in records {
        report.records += 1;
        let record = match record {
            Ok(r) => r,
            Err(reason) => {
                report.rejected.push(Rejection { line, reason });
                continue;
            }
        };
        let region = match &record.region {
            Some(code) => match grid.region_index(code) {
                Some(r) => Some(r),
                None => {
                    report.rejected.push(Rejection {
                        line,
                        reason: format!("unknown region {code}"),
                    });
                    continue;
                }
            },
            None => None,
        };
        let keep = match filter {
            EventFilter::Target => record.is_target,
            EventFilter::All => record.location_kind == LocationKind::Precise,
        };
        if !keep {
            report.filtered += 1;
            continue;
        }
        let bin = DetectorBin {
            kind: record.location_kind.detector_kind(),
            region,
            slot: mapping.slot(&record.timestamp),
        };
        match layout.index_of(&bin) {
            Some(i) => {
                counts[i] += 1;
                report.binned += 1;
            }
            None => report.rejected.push(Rejection {
                line,
                reason: format!("no detector bin for {bin:?}"),
            }),
        }
    }
    Ok((CountVector::new(counts), report))
}

/// Multiplies the no-location counts by `factor`, rounding to the nearest
/// integer.
pub fn scale_no_location(counts: &mut CountVector, layout: &DetectorLayout, factor: f64) -> Result<()> {
    if !(factor.is_finite() && factor >= 0.0) {
        return Err(Error::validation(
            "no_location_multiplier",
            format!("{factor} must be >= 0"),
        ));
    }
    Error::check_len("counts", layout.len(), counts.len())?;
    for i in layout.indices_of_kind(DetectorKind::NoLocation) {
        let c = &mut counts.as_mut_slice()[i];
        *c = (*c as f64 * factor).round() as u64;
    }
    Ok(())
}

/// Kind-1 counts of a layout-aligned vector, re-indexed by source bin.
pub fn precise_by_source(counts: &CountVector, grid: &SourceGrid, layout: &DetectorLayout) -> Vec<u64> {
    let mut z = vec![0u64; grid.len()];
    for i in layout.indices_of_kind(DetectorKind::Precise) {
        let bin = layout.bin(i);
        if let Some(r) = bin.region {
            z[grid.index(r, bin.slot)] += counts.as_slice()[i];
        }
    }
    z
}
