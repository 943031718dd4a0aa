//! Cloud ingestion and artifact exporters. Every writer goes through a
//! temp-file-then-rename so a failure never leaves a partial artifact.

use std::io::Write;
use std::path::Path;

use lasernav_core::costmap::CostField;
use lasernav_core::planner::{GridPath, GridVertex};
use lasernav_core::{Mat3, Point3, PointCloud, RigidTransform, Vec3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("file contains no points")]
    EmptyFile,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        message: message.into(),
    }
}

const PCD_KEYWORDS: [&str; 10] = [
    "VERSION",
    "FIELDS",
    "SIZE",
    "TYPE",
    "COUNT",
    "WIDTH",
    "HEIGHT",
    "VIEWPOINT",
    "POINTS",
    "DATA",
];

/// Loads either plain "x y z" text (one point per line, `#` comments) or an
/// ASCII PCD-style file whose header declares FIELDS including x, y, z.
pub fn load_cloud(path: &Path) -> Result<PointCloud, IoError> {
    let text = std::fs::read_to_string(path)?;
    let is_pcd = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .find(|l| !l.is_empty())
        .and_then(|l| l.split_whitespace().next())
        .is_some_and(|tok| PCD_KEYWORDS.contains(&tok));
    let points = if is_pcd {
        parse_pcd(&text)?
    } else {
        parse_plain(&text)?
    };
    if points.is_empty() {
        return Err(IoError::EmptyFile);
    }
    Ok(PointCloud::new(points).expect("nonempty"))
}

fn parse_plain(text: &str) -> Result<Vec<Point3>, IoError> {
    let mut points = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(
                line,
                format!("expected 3 coordinates, got {}", fields.len()),
            ));
        }
        let mut coords = [0.0; 3];
        for (slot, field) in coords.iter_mut().zip(&fields) {
            *slot = field
                .parse()
                .map_err(|_| parse_err(line, format!("bad coordinate {field:?}")))?;
        }
        points.push(Point3::new(coords[0], coords[1], coords[2]));
    }
    Ok(points)
}

fn parse_pcd(text: &str) -> Result<Vec<Point3>, IoError> {
    let mut columns: Option<[usize; 3]> = None;
    let mut declared: Option<usize> = None;
    let mut in_data = false;
    let mut points = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if !in_data {
            let mut tokens = content.split_whitespace();
            let keyword = tokens.next().expect("nonempty");
            match keyword {
                "FIELDS" => {
                    let names: Vec<&str> = tokens.collect();
                    let find = |want: &str| {
                        names
                            .iter()
                            .position(|n| n.eq_ignore_ascii_case(want))
                            .ok_or_else(|| parse_err(line, format!("FIELDS lacks {want}")))
                    };
                    columns = Some([find("x")?, find("y")?, find("z")?]);
                }
                "POINTS" => {
                    let count = tokens
                        .next()
                        .ok_or_else(|| parse_err(line, "POINTS needs a count"))?;
                    declared = Some(
                        count
                            .parse()
                            .map_err(|_| parse_err(line, format!("bad count {count:?}")))?,
                    );
                }
                "DATA" => {
                    if tokens.next() != Some("ascii") {
                        return Err(parse_err(line, "only DATA ascii is supported"));
                    }
                    if columns.is_none() {
                        return Err(parse_err(line, "DATA before FIELDS x y z"));
                    }
                    in_data = true;
                }
                other if PCD_KEYWORDS.contains(&other) => {}
                other => return Err(parse_err(line, format!("unknown header {other:?}"))),
            }
            continue;
        }
        let cols = columns.expect("set before DATA");
        let fields: Vec<&str> = content.split_whitespace().collect();
        let needed = cols.iter().max().expect("3 entries") + 1;
        if fields.len() < needed {
            return Err(parse_err(
                line,
                format!("expected at least {needed} fields, got {}", fields.len()),
            ));
        }
        let mut coords = [0.0; 3];
        for (slot, &col) in coords.iter_mut().zip(&cols) {
            *slot = fields[col]
                .parse()
                .map_err(|_| parse_err(line, format!("bad coordinate {:?}", fields[col])))?;
        }
        points.push(Point3::new(coords[0], coords[1], coords[2]));
    }
    if !in_data {
        return Err(parse_err(
            text.lines().count(),
            "header has no DATA section",
        ));
    }
    if let Some(count) = declared {
        if count != points.len() {
            return Err(parse_err(
                text.lines().count(),
                format!("POINTS declares {count} but DATA holds {}", points.len()),
            ));
        }
    }
    Ok(points)
}

/// Writes a plain "x y z" cloud (full round-trip precision).
pub fn save_cloud_txt(cloud: &PointCloud, path: &Path) -> Result<(), IoError> {
    let mut text = String::new();
    for p in cloud.points() {
        text.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    write_atomic(path, text.as_bytes())
}

fn pixel(field: &CostField, row: usize, col: usize) -> u8 {
    if field.is_lethal(row, col) {
        0
    } else {
        (255.0 * (1.0 - field.penalty(row, col).min(1.0))).round() as u8
    }
}

/// Binary PGM (P5, maxval 255), row-major from cell (0,0); lethal cells are
/// black, free cells fade from white by penalty.
pub fn save_costfield_pgm(field: &CostField, path: &Path) -> Result<(), IoError> {
    let mut bytes = format!("P5\n{} {}\n255\n", field.width(), field.height()).into_bytes();
    for row in 0..field.height() {
        for col in 0..field.width() {
            bytes.push(pixel(field, row, col));
        }
    }
    write_atomic(path, &bytes)
}

/// Binary PPM (P6) of the costfield grayscale with the path drawn in pure
/// red, the start repainted green, and the goal repainted blue.
pub fn save_overlay_ppm(field: &CostField, path: &GridPath, file: &Path) -> Result<(), IoError> {
    let (w, h) = (field.width(), field.height());
    let mut rgb = vec![0u8; w * h * 3];
    for row in 0..h {
        for col in 0..w {
            let gray = pixel(field, row, col);
            let at = (row * w + col) * 3;
            rgb[at..at + 3].copy_from_slice(&[gray, gray, gray]);
        }
    }
    let mut paint = |v: &GridVertex, color: [u8; 3]| {
        let at = (v.row * w + v.col) * 3;
        rgb[at..at + 3].copy_from_slice(&color);
    };
    for v in &path.vertices {
        paint(v, [255, 0, 0]);
    }
    paint(
        path.vertices.first().expect("paths are nonempty"),
        [0, 255, 0],
    );
    paint(
        path.vertices.last().expect("paths are nonempty"),
        [0, 0, 255],
    );
    let mut bytes = format!("P6\n{w} {h}\n255\n").into_bytes();
    bytes.extend_from_slice(&rgb);
    write_atomic(file, &bytes)
}

/// CSV lines "row,col", start first.
pub fn save_path_csv(path: &GridPath, file: &Path) -> Result<(), IoError> {
    let mut text = String::new();
    for v in &path.vertices {
        text.push_str(&format!("{},{}\n", v.row, v.col));
    }
    write_atomic(file, text.as_bytes())
}

pub fn load_path_csv(file: &Path) -> Result<Vec<GridVertex>, IoError> {
    let text = std::fs::read_to_string(file)?;
    let mut vertices = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.trim();
        if content.is_empty() {
            continue;
        }
        let bad = || parse_err(line, format!("expected ROW,COL, got {content:?}"));
        let (r, c) = content.split_once(',').ok_or_else(bad)?;
        vertices.push(GridVertex::new(
            r.trim().parse().map_err(|_| bad())?,
            c.trim().parse().map_err(|_| bad())?,
        ));
    }
    if vertices.is_empty() {
        return Err(IoError::EmptyFile);
    }
    Ok(vertices)
}

/// Native costfield text: a header plus one line per row, each cell either
/// `L` (lethal) or its penalty. Floats print shortest-round-trip, so a
/// load reproduces the field bit for bit.
pub fn save_costfield_txt(field: &CostField, path: &Path) -> Result<(), IoError> {
    let mut text = format!(
        "origin {} {}\nresolution {}\nsize {} {}\n",
        field.origin()[0],
        field.origin()[1],
        field.resolution(),
        field.width(),
        field.height()
    );
    for row in 0..field.height() {
        for col in 0..field.width() {
            if col > 0 {
                text.push(' ');
            }
            if field.is_lethal(row, col) {
                text.push('L');
            } else {
                text.push_str(&format!("{}", field.penalty(row, col)));
            }
        }
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

pub fn load_costfield_txt(path: &Path) -> Result<CostField, IoError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().filter_map(|(index, raw)| {
        let content = raw.split('#').next().unwrap_or("").trim();
        (!content.is_empty()).then_some((index + 1, content))
    });
    let mut header = |name: &str, arity: usize| -> Result<(usize, Vec<f64>), IoError> {
        let (line, content) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("missing {name} header")))?;
        let mut tokens = content.split_whitespace();
        if tokens.next() != Some(name) {
            return Err(parse_err(
                line,
                format!("expected {name} header, got {content:?}"),
            ));
        }
        let values: Result<Vec<f64>, _> = tokens.map(|t| t.parse()).collect();
        let values = values.map_err(|_| parse_err(line, format!("bad {name} values")))?;
        if values.len() != arity {
            return Err(parse_err(line, format!("{name} needs {arity} values")));
        }
        Ok((line, values))
    };
    let (_, origin) = header("origin", 2)?;
    let (line, resolution) = header("resolution", 1)?;
    if resolution[0].is_nan() || resolution[0] <= 0.0 {
        return Err(parse_err(line, "resolution must be positive"));
    }
    let (line, size) = header("size", 2)?;
    let (width, height) = (size[0] as usize, size[1] as usize);
    if width == 0 || height == 0 {
        return Err(parse_err(line, "size must be positive"));
    }
    let mut field = CostField::new_empty([origin[0], origin[1]], resolution[0], width, height);
    let mut rows = 0;
    for (line, content) in lines {
        if rows == height {
            return Err(parse_err(line, format!("more than {height} rows")));
        }
        let cells: Vec<&str> = content.split_whitespace().collect();
        if cells.len() != width {
            return Err(parse_err(
                line,
                format!("expected {width} cells, got {}", cells.len()),
            ));
        }
        for (col, cell) in cells.iter().enumerate() {
            if *cell == "L" {
                field.set_lethal(rows, col, true);
            } else {
                let penalty: f64 = cell
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad cell {cell:?}")))?;
                if penalty < 0.0 {
                    return Err(parse_err(line, format!("negative penalty {penalty}")));
                }
                field.set_penalty(rows, col, penalty);
            }
        }
        rows += 1;
    }
    if rows != height {
        return Err(parse_err(
            text.lines().count(),
            format!("expected {height} rows, got {rows}"),
        ));
    }
    Ok(field)
}

/// Rigid transform as three rows of "r r r t".
pub fn save_transform_txt(transform: &RigidTransform, path: &Path) -> Result<(), IoError> {
    let (r, t) = (transform.rotation(), transform.translation());
    let mut text = String::new();
    for row in 0..3 {
        text.push_str(&format!(
            "{} {} {} {}\n",
            r[(row, 0)],
            r[(row, 1)],
            r[(row, 2)],
            t[row]
        ));
    }
    write_atomic(path, text.as_bytes())
}

pub fn load_transform_txt(path: &Path) -> Result<RigidTransform, IoError> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let values: Result<Vec<f64>, _> = content.split_whitespace().map(|t| t.parse()).collect();
        let values = values.map_err(|_| parse_err(line, "bad transform entry"))?;
        if values.len() != 4 {
            return Err(parse_err(
                line,
                format!("expected 4 entries, got {}", values.len()),
            ));
        }
        rows.push(values);
    }
    if rows.len() != 3 {
        return Err(parse_err(
            text.lines().count(),
            format!("expected 3 rows, got {}", rows.len()),
        ));
    }
    #[rustfmt::skip]
    let rotation = Mat3::new(
        rows[0][0], rows[0][1], rows[0][2],
        rows[1][0], rows[1][1], rows[1][2],
        rows[2][0], rows[2][1], rows[2][2],
    );
    let translation = Vec3::new(rows[0][3], rows[1][3], rows[2][3]);
    RigidTransform::new(rotation, translation)
        .map_err(|e| parse_err(1, format!("not a rigid transform: {e}")))
}

/// Atomic plain-text export (reports, tables).
pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    write_atomic(path, text.as_bytes())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| IoError::Io(e.error))?;
    Ok(())
}
