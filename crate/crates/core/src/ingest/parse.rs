use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use crate::domain::ChannelId;
use crate::error::{Error, Result};

use super::{LithoInterval, RawRecord, WellBounds};

/// Column of the MWD CSV and its factor to SI units.
#[derive(Debug, Clone, Copy)]
pub struct MwdColumn {
    pub name: &'static str,
    pub channel: ChannelId,
    pub to_si: f64,
}

pub const MWD_COLUMNS: [MwdColumn; 8] = [
    MwdColumn { name: "wob_kn", channel: ChannelId::Wob, to_si: 1e3 },
    MwdColumn { name: "trq_knm", channel: ChannelId::Trq, to_si: 1e3 },
    MwdColumn { name: "rop_mh", channel: ChannelId::Rop, to_si: 1.0 / 3600.0 },
    MwdColumn { name: "rpm", channel: ChannelId::Rpm, to_si: 1.0 / 60.0 },
    MwdColumn { name: "q_in_lmin", channel: ChannelId::Qin, to_si: 1.0 / 60000.0 },
    MwdColumn { name: "q_out_lmin", channel: ChannelId::Qout, to_si: 1.0 / 60000.0 },
    MwdColumn { name: "spp_bar", channel: ChannelId::Spp, to_si: 1e5 },
    MwdColumn { name: "hl_kn", channel: ChannelId::Hl, to_si: 1e3 },
];

/// How many malformed rows a file may contain before parsing fails.
///
/// The allowance is `max(min_allowed, ceil(max_fraction * data_rows))`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BadRowPolicy {
    pub max_fraction: f64,
    pub min_allowed: usize,
}

impl Default for BadRowPolicy {
    fn default() -> Self {
        Self {
            max_fraction: 0.01,
            min_allowed: 1,
        }
    }
}

impl BadRowPolicy {
    fn allowance(&self, rows: usize) -> usize {
        ((self.max_fraction * rows as f64).ceil() as usize).max(self.min_allowed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BadRow {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct MwdFile {
    pub records: Vec<RawRecord>,
    pub bad_rows: Vec<BadRow>,
    pub rows: usize,
}

pub fn parse_mwd(path: &Path, policy: BadRowPolicy) -> Result<MwdFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mwd_str(&path.display().to_string(), &text, policy)
}

/// Parse MWD CSV text. `name` is only used in error messages.
pub fn parse_mwd_str(name: &str, text: &str, policy: BadRowPolicy) -> Result<MwdFile> {
    if text.trim().is_empty() {
        return Ok(MwdFile::default());
    }
    let mut rdr = reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| parse_err(name, 1, e.to_string()))?
        .clone();

    let mut well_col = None;
    let mut hole_col = None;
    let mut depth_col = None;
    let mut value_cols = Vec::new();
    for (i, h) in header.iter().enumerate() {
        match h.trim() {
            "well_id" => well_col = Some(i),
            "hole_id" => hole_col = Some(i),
            "depth_m" => depth_col = Some(i),
            other => match MWD_COLUMNS.iter().find(|c| c.name == other) {
                Some(c) => value_cols.push((i, *c)),
                None => return Err(parse_err(name, 1, format!("unknown channel column `{other}`"))),
            },
        }
    }
    let (Some(well_col), Some(hole_col), Some(depth_col)) = (well_col, hole_col, depth_col) else {
        return Err(parse_err(name, 1, "header must contain well_id, hole_id and depth_m".into()));
    };

    let mut out = MwdFile::default();
    for row in rdr.records() {
        out.rows += 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                out.bad_rows.push(BadRow { line, message: e.to_string() });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line() as usize);
        match parse_row(&row, well_col, hole_col, depth_col, &value_cols, header.len()) {
            Ok(mut recs) => out.records.append(&mut recs),
            Err(message) => out.bad_rows.push(BadRow { line, message }),
        }
    }

    let allowed = policy.allowance(out.rows);
    if out.bad_rows.len() > allowed {
        return Err(Error::TooManyBadRows {
            file: name.to_owned(),
            bad: out.bad_rows.len(),
            allowed,
            first_line: out.bad_rows[0].line,
        });
    }
    for b in &out.bad_rows {
        log::warn!("{name}:{}: skipped malformed row: {}", b.line, b.message);
    }
    Ok(out)
}

fn parse_row(
    row: &csv::StringRecord,
    well_col: usize,
    hole_col: usize,
    depth_col: usize,
    value_cols: &[(usize, MwdColumn)],
    width: usize,
) -> std::result::Result<Vec<RawRecord>, String> {
    if row.len() != width {
        return Err(format!("expected {width} fields, found {}", row.len()));
    }
    let well = row[well_col].trim();
    let hole = row[hole_col].trim();
    if well.is_empty() || hole.is_empty() {
        return Err("empty well_id or hole_id".into());
    }
    let depth = parse_number(&row[depth_col]).ok_or_else(|| format!("bad depth `{}`", &row[depth_col]))?;
    if depth < 0.0 {
        return Err(format!("negative depth {depth}"));
    }
    let mut recs = Vec::with_capacity(value_cols.len());
    for (i, col) in value_cols {
        let cell = row[*i].trim();
        if cell.is_empty() {
            continue;
        }
        let v = parse_number(cell).ok_or_else(|| format!("bad {} value `{cell}`", col.name))?;
        recs.push(RawRecord {
            well_id: well.to_owned(),
            hole_id: hole.to_owned(),
            depth,
            channel: col.channel,
            value: v * col.to_si,
        });
    }
    Ok(recs)
}

fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(r)
}

fn parse_err(file: &str, line: usize, message: String) -> Error {
    Error::Parse {
        file: file.to_owned(),
        line,
        message,
    }
}

/// Strict parse of a small metadata CSV into rows keyed by header name.
fn strict_rows(
    name: &str,
    text: &str,
    columns: &[&str],
) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rdr = reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| parse_err(name, 1, e.to_string()))?.clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h.trim() == *c)
                .ok_or_else(|| parse_err(name, 1, format!("missing column `{c}`")))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| parse_err(name, e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.len() != header.len() {
            return Err(parse_err(name, line, format!("expected {} fields", header.len())));
        }
        out.push((line, idx.iter().map(|&i| row[i].trim().to_owned()).collect()));
    }
    Ok(out)
}

pub fn parse_lithology(path: &Path) -> Result<Vec<LithoInterval>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lithology_str(&path.display().to_string(), &text)
}

pub fn parse_lithology_str(name: &str, text: &str) -> Result<Vec<LithoInterval>> {
    let rows = strict_rows(name, text, &["well_id", "top_m", "bottom_m", "litho_class"])?;
    rows.into_iter()
        .map(|(line, f)| {
            let num = |s: &str| parse_number(s).ok_or_else(|| parse_err(name, line, format!("bad number `{s}`")));
            let top = num(&f[1])?;
            let bottom = num(&f[2])?;
            if !(top < bottom) {
                return Err(parse_err(name, line, format!("top {top} must be above bottom {bottom}")));
            }
            let class = match f[3].as_str() {
                "0" => 0,
                "1" => 1,
                other => return Err(parse_err(name, line, format!("litho_class must be 0 or 1, got `{other}`"))),
            };
            Ok(LithoInterval {
                well_id: f[0].clone(),
                top,
                bottom,
                class,
            })
        })
        .collect()
}

pub fn parse_bounds(path: &Path) -> Result<BTreeMap<String, WellBounds>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_bounds_str(&path.display().to_string(), &text)
}

pub fn parse_bounds_str(name: &str, text: &str) -> Result<BTreeMap<String, WellBounds>> {
    let rows = strict_rows(name, text, &["well_id", "horiz_start_m", "horiz_end_m", "bit_area_m2"])?;
    let mut out = BTreeMap::new();
    for (line, f) in rows {
        let num = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| !v.is_nan())
                .ok_or_else(|| parse_err(name, line, format!("bad number `{s}`")))
        };
        let b = WellBounds {
            start: num(&f[1])?,
            end: num(&f[2])?,
            bit_area: num(&f[3])?,
        };
        if !(b.start <= b.end) || !(b.bit_area > 0.0) || !b.bit_area.is_finite() {
            return Err(parse_err(name, line, "need start <= end and a positive bit area".into()));
        }
        if out.insert(f[0].clone(), b).is_some() {
            return Err(parse_err(name, line, format!("duplicate bounds for well {}", f[0])));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "well_id,hole_id,depth_m,wob_kn,trq_knm,rop_mh,rpm,q_in_lmin,q_out_lmin,spp_bar,hl_kn\n";

    #[test]
    fn empty_file_yields_nothing() {
        let f = parse_mwd_str("empty.csv", "", BadRowPolicy::default()).unwrap();
        assert!(f.records.is_empty());
        assert!(f.bad_rows.is_empty());
    }

    #[test]
    fn converts_units_to_si() {
        let text = format!("{HEADER}W1,H1,1000.05,12.5,,,,,,,\n");
        let f = parse_mwd_str("a.csv", &text, BadRowPolicy::default()).unwrap();
        assert_eq!(
            f.records,
            vec![RawRecord {
                well_id: "W1".into(),
                hole_id: "H1".into(),
                depth: 1000.05,
                channel: ChannelId::Wob,
                value: 12500.0,
            }]
        );
    }

    #[test]
    fn other_unit_conversions() {
        let text = format!("{HEADER}W,H,1,1,2,36,120,600,600,10,100\n");
        let f = parse_mwd_str("a.csv", &text, BadRowPolicy::default()).unwrap();
        let get = |c| f.records.iter().find(|r| r.channel == c).unwrap().value;
        assert_eq!(get(ChannelId::Trq), 2000.0);
        assert!((get(ChannelId::Rop) - 0.01).abs() < 1e-15);
        assert_eq!(get(ChannelId::Rpm), 2.0);
        assert!((get(ChannelId::Qin) - 0.01).abs() < 1e-15);
        assert_eq!(get(ChannelId::Spp), 1e6);
        assert_eq!(get(ChannelId::Hl), 1e5);
    }

    #[test]
    fn malformed_row_is_reported_not_fatal() {
        let text = "well_id,hole_id,depth_m,wob_kn\nW,H,1.0,10\nW,H,1.1,abc\nW,H,1.2,11\n";
        let f = parse_mwd_str("b.csv", text, BadRowPolicy::default()).unwrap();
        assert_eq!(f.records.len(), 2);
        assert_eq!(f.bad_rows.len(), 1);
        assert_eq!(f.bad_rows[0].line, 3);
    }

    #[test]
    fn too_many_bad_rows_is_an_error_naming_file_and_line() {
        let text = "well_id,hole_id,depth_m,wob_kn\nW,H,x,10\nW,H,1.1,abc\nW,H,1.2,11\n";
        let err = parse_mwd_str("c.csv", text, BadRowPolicy::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("c.csv") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn unknown_channel_is_an_error() {
        let err = parse_mwd_str("d.csv", "well_id,hole_id,depth_m,gamma\nW,H,1,2\n", BadRowPolicy::default())
            .unwrap_err();
        assert!(err.to_string().contains("gamma"));
    }

    #[test]
    fn lithology_and_bounds() {
        let l = parse_lithology_str("l.csv", "well_id,top_m,bottom_m,litho_class\nW,10,20,1\n").unwrap();
        assert_eq!(l[0].class, 1);
        assert!(parse_lithology_str("l.csv", "well_id,top_m,bottom_m,litho_class\nW,20,10,1\n").is_err());
        assert!(parse_lithology_str("l.csv", "well_id,top_m,bottom_m,litho_class\nW,10,20,2\n").is_err());
        let b = parse_bounds_str("b.csv", "well_id,horiz_start_m,horiz_end_m,bit_area_m2\nW,0,inf,0.03\n").unwrap();
        assert_eq!(b["W"].end, f64::INFINITY);
    }
}
