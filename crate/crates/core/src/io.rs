//! Plain-text interchange files: event lists, field dumps, g2 curves,
//! counting statistics and prediction tables. Floats are written in Rust's
//! shortest round-trip exponent form so files are byte-reproducible and
//! parse back exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rustfft::num_complex::Complex64;

use crate::config::format_subvolume;
use crate::error::{Error, Result};
use crate::estimators::{CorrelationResult, CountingStats};
use crate::field::FieldRealization;
use crate::physics::Grid;
use crate::sampling::{EventList, EventRecord};

pub const EVENT_FORMAT: &str = "hbt-events 1";

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Header metadata of an event file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventHeader {
    pub seed: Option<u64>,
    /// `key = value` config lines embedded for provenance
    pub config: String,
}

/// `shot_id t x y [z]` per line, after a `#` header carrying dims, shot
/// count, seed, the quantization flag and the run configuration.
pub fn format_events(list: &EventList, seed: u64, config_header: &str) -> String {
    let mut out = String::with_capacity(64 * (list.len() + 8));
    let _ = writeln!(out, "# {EVENT_FORMAT}");
    let _ = writeln!(out, "# dims = {}", list.dims);
    let _ = writeln!(out, "# shots = {}", list.shots);
    let _ = writeln!(out, "# seed = {seed}");
    let _ = writeln!(out, "# quantized = {}", list.quantized);
    out.push_str(config_header);
    out.push_str("# columns: shot_id t x y [z]\n");
    for e in &list.events {
        let _ = write!(out, "{} {:e} {:e} {:e}", e.shot_id, e.t, e.x, e.y);
        if let Some(z) = e.z {
            let _ = write!(out, " {z:e}");
        }
        out.push('\n');
    }
    out
}

pub fn write_events(path: &Path, list: &EventList, seed: u64, config_header: &str) -> Result<()> {
    write_text(path, &format_events(list, seed, config_header))
}

pub fn parse_events(text: &str, path: &Path) -> Result<(EventList, EventHeader)> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut dims = None;
    let mut shots = None;
    let mut quantized = false;
    let mut header = EventHeader::default();
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let meta = meta.trim();
            if let Some(entry) = meta.strip_prefix("config ") {
                header.config.push_str(entry);
                header.config.push('\n');
            } else if let Some((k, v)) = meta.split_once('=') {
                let v = v.trim();
                match k.trim() {
                    "dims" => dims = Some(v.parse::<usize>().map_err(|_| err(n, format!("bad dims '{v}'")))?),
                    "shots" => shots = Some(v.parse::<u64>().map_err(|_| err(n, format!("bad shot count '{v}'")))?),
                    "seed" => header.seed = Some(v.parse().map_err(|_| err(n, format!("bad seed '{v}'")))?),
                    "quantized" => quantized = v == "true",
                    _ => {}
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 && fields.len() != 5 {
            return Err(err(n, format!("expected 4 or 5 fields, found {}", fields.len())));
        }
        let shot_id = fields[0]
            .parse::<u64>()
            .map_err(|_| err(n, format!("bad shot id '{}'", fields[0])))?;
        let mut nums = [0.0_f64; 4];
        for (slot, f) in nums.iter_mut().zip(&fields[1..]) {
            *slot = f.parse().map_err(|_| err(n, format!("bad number '{f}'")))?;
            if !slot.is_finite() {
                return Err(err(n, format!("non-finite value '{f}'")));
            }
        }
        events.push((
            n,
            EventRecord {
                shot_id,
                t: nums[0],
                x: nums[1],
                y: nums[2],
                z: (fields.len() == 5).then_some(nums[3]),
            },
        ));
    }
    let dims = dims.ok_or_else(|| err(1, "missing '# dims = ' header".into()))?;
    if !(1..=3).contains(&dims) {
        return Err(err(1, format!("dims must be 1, 2 or 3, got {dims}")));
    }
    let shots = shots.unwrap_or_else(|| events.iter().map(|(_, e)| e.shot_id + 1).max().unwrap_or(0));
    if let Some((n, e)) = events.iter().find(|(_, e)| e.shot_id >= shots) {
        return Err(err(
            *n,
            format!("shot id {} is not below the shot count {shots}", e.shot_id),
        ));
    }
    let mut list = EventList::new(dims, shots);
    list.quantized = quantized;
    list.events = events.into_iter().map(|(_, e)| e).collect();
    list.events.sort_by_key(|e| e.shot_id);
    Ok((list, header))
}

pub fn read_events(path: &Path) -> Result<(EventList, EventHeader)> {
    parse_events(&read_text(path)?, path)
}

pub fn format_field(field: &FieldRealization) -> String {
    let join = |v: Vec<String>| v.join(",");
    let mut out = String::new();
    let _ = writeln!(out, "# dims = {}", field.grid.dims());
    let _ = writeln!(
        out,
        "# extent = {}",
        join(field.grid.extent.iter().map(|e| format!("{e:e}")).collect())
    );
    let _ = writeln!(
        out,
        "# points = {}",
        join(field.grid.points.iter().map(|p| p.to_string()).collect())
    );
    let _ = writeln!(out, "# shot_id = {}", field.shot_id);
    out.push_str("# columns: index re im\n");
    for (i, v) in field.values.iter().enumerate() {
        let _ = writeln!(out, "{i} {:e} {:e}", v.re, v.im);
    }
    out
}

pub fn parse_field(text: &str, path: &Path) -> Result<FieldRealization> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut extent = None;
    let mut points = None;
    let mut shot_id = 0;
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, v)) = meta.split_once('=') {
                let v = v.trim();
                match k.trim() {
                    "extent" => {
                        extent = Some(
                            v.split(',')
                                .map(|s| s.parse::<f64>().map_err(|_| err(n, format!("bad extent '{s}'"))))
                                .collect::<Result<Vec<_>>>()?,
                        )
                    }
                    "points" => {
                        points = Some(
                            v.split(',')
                                .map(|s| s.parse::<usize>().map_err(|_| err(n, format!("bad point count '{s}'"))))
                                .collect::<Result<Vec<_>>>()?,
                        )
                    }
                    "shot_id" => shot_id = v.parse().map_err(|_| err(n, format!("bad shot id '{v}'")))?,
                    _ => {}
                }
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(err(n, format!("expected 3 fields, found {}", f.len())));
        }
        let re = f[1].parse().map_err(|_| err(n, format!("bad number '{}'", f[1])))?;
        let im = f[2].parse().map_err(|_| err(n, format!("bad number '{}'", f[2])))?;
        values.push(Complex64::new(re, im));
    }
    let grid = Grid::new(
        extent.ok_or_else(|| err(1, "missing extent header".into()))?,
        points.ok_or_else(|| err(1, "missing points header".into()))?,
    )?;
    if values.len() != grid.len() {
        return Err(err(
            text.lines().count(),
            format!("{} values for {} grid points", values.len(), grid.len()),
        ));
    }
    Ok(FieldRealization { grid, values, shot_id })
}

/// `bin_center g2 sigma valid` rows; the provenance header precedes them.
pub fn format_g2(result: &CorrelationResult, header: &str) -> String {
    let mut out = String::from(header);
    if let Some(fit) = &result.fit {
        let _ = writeln!(out, "# fit = 1 + c exp(-d^2/l^2)");
        let _ = writeln!(out, "# fit.contrast = {:e} +- {:e}", fit.contrast, fit.contrast_sigma);
        let _ = writeln!(out, "# fit.length = {:e} +- {:e}", fit.length, fit.length_sigma);
        let _ = writeln!(out, "# fit.reduced_chi2 = {:e}", fit.reduced_chi2);
    }
    out.push_str("# columns: bin_center g2 sigma valid\n");
    let c = &result.curve;
    for (i, center) in c.bin_centers().iter().enumerate() {
        let _ = writeln!(
            out,
            "{center:e} {:e} {:e} {}",
            c.g2[i],
            c.sigma[i],
            u8::from(c.valid[i])
        );
    }
    out
}

/// Parses the rows of a g2 table back into `(center, g2, sigma, valid)`.
pub fn parse_g2_rows(text: &str) -> Result<Vec<(f64, f64, f64, bool)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            let f: Vec<&str> = l.split_whitespace().collect();
            let bad = || Error::Parse {
                path: "g2 table".into(),
                line: i + 1,
                message: format!("malformed row '{l}'"),
            };
            if f.len() != 4 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok((num(f[0])?, num(f[1])?, num(f[2])?, f[3] == "1"))
        })
        .collect()
}

/// `subvolume mean variance g_inferred flag`.
pub fn format_counting(stats: &CountingStats, header: &str) -> String {
    let mut out = String::from(header);
    out.push_str("# columns: subvolume mean variance g_inferred flag\n");
    let g = stats.g_inferred.unwrap_or(f64::NAN);
    let _ = writeln!(
        out,
        "{} {:e} {:e} {:e} {}",
        format_subvolume(&stats.subvolume),
        stats.mean,
        stats.variance,
        g,
        stats.sign.name()
    );
    out
}
