//! Text point-cloud formats: `.xyz` sidecar files and the ASCII `.pcd` subset.
//!
//! The canonical sidecar layout is whitespace-separated
//! `x y z [intensity] [class_id instance_id]` with `#` comments and fixed
//! 6-decimal coordinate formatting, so write -> read -> write is
//! byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use crate::labels::{ClassLabel, Labeling};

/// On-disk layouts for [`write_labeled`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Xyz,
    PcdAscii,
}

fn parse_f64(tok: &str, path: &Path, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("invalid number {tok:?}"),
    })
}

/// Reads a `.xyz` file. Data line `k` (0-based, comments skipped) becomes
/// global index `k`. With `has_labels`, lines carry trailing
/// `class_id instance_id` columns; a 4th/6th-column layout adds intensity.
pub fn read_xyz(path: &Path, has_labels: bool) -> Result<(PointCloud, Option<Labeling>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    let mut intensity: Vec<f64> = Vec::new();
    let mut has_intensity = None;
    let mut classes = Vec::new();
    let mut instances = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let expected: &[usize] = if has_labels { &[5, 6] } else { &[3, 4] };
        if !expected.contains(&toks.len()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!(
                    "expected {expected:?} fields, got {}",
                    toks.len()
                ),
            });
        }
        let with_intensity = toks.len() == expected[1];
        match has_intensity {
            None => has_intensity = Some(with_intensity),
            Some(prev) if prev != with_intensity => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    msg: "inconsistent field count".into(),
                })
            }
            _ => {}
        }
        let p = Point3::new(
            parse_f64(toks[0], path, lineno + 1)?,
            parse_f64(toks[1], path, lineno + 1)?,
            parse_f64(toks[2], path, lineno + 1)?,
        );
        if !p.is_finite() {
            return Err(Error::InvalidCoordinate {
                path: path.to_path_buf(),
                line: lineno + 1,
            });
        }
        let mut next = 3;
        if with_intensity {
            intensity.push(parse_f64(toks[next], path, lineno + 1)?);
            next += 1;
        }
        if has_labels {
            let code: u8 = toks[next].parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("invalid class id {:?}", toks[next]),
            })?;
            let class = ClassLabel::from_code(code).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("class id {code} out of range 0-7"),
            })?;
            let inst: u32 = toks[next + 1].parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("invalid instance id {:?}", toks[next + 1]),
            })?;
            classes.push(class);
            instances.push(inst);
        }
        points.push(p);
    }
    let n = points.len();
    let mut cloud = PointCloud::new(points);
    if has_intensity == Some(true) {
        cloud.intensity = Some(intensity);
    }
    let labeling = if has_labels {
        let mut lab = Labeling::empty(n);
        lab.class = classes;
        lab.instance = instances;
        Some(lab)
    } else {
        None
    };
    Ok((cloud, labeling))
}

/// Result of an ASCII PCD parse; extra fields beyond x/y/z are counted, not
/// preserved.
pub struct PcdCloud {
    pub cloud: PointCloud,
    pub ignored_fields: usize,
}

/// Reads the ASCII subset of the PCD format (header + `DATA ascii`).
pub fn read_pcd_ascii(path: &Path) -> Result<PcdCloud> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut fields: Vec<String> = Vec::new();
    let mut declared_points: Option<usize> = None;
    let mut data_start = None;
    let mut lines = text.lines().enumerate();
    for (lineno, raw) in &mut lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap_or("");
        match key {
            "FIELDS" => fields = toks.map(str::to_string).collect(),
            "POINTS" => {
                declared_points = Some(toks.next().and_then(|t| t.parse().ok()).ok_or_else(
                    || Error::Parse {
                        path: path.to_path_buf(),
                        line: lineno + 1,
                        msg: "invalid POINTS value".into(),
                    },
                )?)
            }
            "DATA" => {
                let enc = toks.next().unwrap_or("");
                if enc != "ascii" {
                    return Err(Error::UnsupportedEncoding {
                        path: path.to_path_buf(),
                        msg: format!("DATA {enc}"),
                    });
                }
                data_start = Some(lineno + 1);
                break;
            }
            // VERSION/SIZE/TYPE/COUNT/WIDTH/HEIGHT/VIEWPOINT are accepted
            // but only FIELDS/POINTS/DATA are interpreted.
            _ => {}
        }
    }
    let data_start = data_start.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: "missing DATA line".into(),
    })?;
    let (xi, yi, zi) = match (
        fields.iter().position(|f| f == "x"),
        fields.iter().position(|f| f == "y"),
        fields.iter().position(|f| f == "z"),
    ) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: "FIELDS must contain x y z".into(),
            })
        }
    };
    let ignored_fields = fields.len() - 3;
    let mut points = Vec::new();
    for (lineno, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != fields.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("expected {} fields, got {}", fields.len(), toks.len()),
            });
        }
        let p = Point3::new(
            parse_f64(toks[xi], path, lineno + 1)?,
            parse_f64(toks[yi], path, lineno + 1)?,
            parse_f64(toks[zi], path, lineno + 1)?,
        );
        if !p.is_finite() {
            return Err(Error::InvalidCoordinate {
                path: path.to_path_buf(),
                line: lineno + 1,
            });
        }
        points.push(p);
    }
    if let Some(n) = declared_points {
        if n != points.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: data_start,
                msg: format!("header declares {n} points, file has {}", points.len()),
            });
        }
    }
    Ok(PcdCloud {
        cloud: PointCloud::new(points),
        ignored_fields,
    })
}

fn fmt_coord(buf: &mut String, v: f64) {
    let _ = write!(buf, "{v:.6}");
}

/// Serializes a labeled cloud to a string in the given format. Byte output is
/// deterministic for identical inputs.
pub fn format_labeled(cloud: &PointCloud, labeling: &Labeling, format: Format) -> String {
    let n = cloud.len();
    debug_assert_eq!(labeling.len(), n);
    let mut out = String::new();
    let with_intensity = cloud.intensity.is_some();
    match format {
        Format::Xyz => {
            if with_intensity {
                out.push_str("# fields: x y z intensity class_id instance_id\n");
            } else {
                out.push_str("# fields: x y z class_id instance_id\n");
            }
            for i in 0..n {
                let p = &cloud.points[i];
                fmt_coord(&mut out, p.x);
                out.push(' ');
                fmt_coord(&mut out, p.y);
                out.push(' ');
                fmt_coord(&mut out, p.z);
                if let Some(intens) = &cloud.intensity {
                    out.push(' ');
                    fmt_coord(&mut out, intens[i]);
                }
                let _ = write!(
                    out,
                    " {} {}\n",
                    labeling.class[i].code(),
                    labeling.instance[i]
                );
            }
        }
        Format::PcdAscii => {
            let fields = "x y z class_id instance_id";
            let _ = write!(
                out,
                "VERSION .7\nFIELDS {fields}\nSIZE 4 4 4 4 4\nTYPE F F F U U\n\
                 COUNT 1 1 1 1 1\nWIDTH {n}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\n\
                 POINTS {n}\nDATA ascii\n"
            );
            for i in 0..n {
                let p = &cloud.points[i];
                fmt_coord(&mut out, p.x);
                out.push(' ');
                fmt_coord(&mut out, p.y);
                out.push(' ');
                fmt_coord(&mut out, p.z);
                let _ = write!(
                    out,
                    " {} {}\n",
                    labeling.class[i].code(),
                    labeling.instance[i]
                );
            }
        }
    }
    out
}

/// Writes a labeled cloud; see [`format_labeled`].
pub fn write_labeled(
    path: &Path,
    cloud: &PointCloud,
    labeling: &Labeling,
    format: Format,
) -> Result<()> {
    fs::write(path, format_labeled(cloud, labeling, format)).map_err(|e| Error::io(path, e))
}
