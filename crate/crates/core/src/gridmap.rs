//! Binary occupancy grids: loading, point/disc queries and exact ray traversal.
//!
//! Cell `(col, row)` covers `[ox + col*res, ox + (col+1)*res) x [oy + row*res, oy + (row+1)*res)`.
//! Row 0 is the row with the smallest `y`. Everything outside the grid is occupied.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum MapError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed map: {0}")]
    Malformed(String),
    #[error("invalid resolution: {0}")]
    InvalidResolution(f64),
    #[error("dimension mismatch: header says {expected}, payload has {found}")]
    DimensionMismatch { expected: String, found: String },
}

/// A point in world coordinates (meters).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: WorldPoint) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: WorldPoint) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product `self x other`.
    pub fn cross(self, other: WorldPoint) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn from_polar(r: f64, angle: f64) -> Self {
        Self::new(r * angle.cos(), r * angle.sin())
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for WorldPoint {
    type Output = WorldPoint;
    fn add(self, rhs: WorldPoint) -> WorldPoint {
        WorldPoint::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for WorldPoint {
    type Output = WorldPoint;
    fn sub(self, rhs: WorldPoint) -> WorldPoint {
        WorldPoint::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for WorldPoint {
    type Output = WorldPoint;
    fn mul(self, rhs: f64) -> WorldPoint {
        WorldPoint::new(self.x * rhs, self.y * rhs)
    }
}

impl fmt::Display for WorldPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.x, self.y)
    }
}

/// Immutable binary occupancy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: WorldPoint,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: WorldPoint,
        cells: Vec<bool>,
    ) -> Result<Self, MapError> {
        if width == 0 || height == 0 {
            return Err(MapError::Malformed(format!(
                "grid must be non-empty, got {width}x{height}"
            )));
        }
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(MapError::InvalidResolution(resolution));
        }
        if !origin.is_finite() {
            return Err(MapError::Malformed("non-finite origin".into()));
        }
        if cells.len() != width * height {
            return Err(MapError::DimensionMismatch {
                expected: format!("{} cells", width * height),
                found: format!("{} cells", cells.len()),
            });
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            cells,
        })
    }

    /// All-free grid.
    pub fn empty(width: usize, height: usize, resolution: f64, origin: WorldPoint) -> Result<Self, MapError> {
        Self::new(width, height, resolution, origin, vec![false; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> WorldPoint {
        self.origin
    }

    /// World extent in meters `(width, height)`.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn set_occupied(&mut self, col: usize, row: usize, occupied: bool) {
        assert!(col < self.width && row < self.height, "cell out of range");
        self.cells[row * self.width + col] = occupied;
    }

    /// Marks every cell whose center lies inside the axis-aligned world rectangle.
    pub fn fill_rect(&mut self, min: WorldPoint, max: WorldPoint, occupied: bool) {
        for row in 0..self.height {
            for col in 0..self.width {
                let c = self.cell_center(col as i64, row as i64);
                if c.x >= min.x && c.x <= max.x && c.y >= min.y && c.y <= max.y {
                    self.cells[row * self.width + col] = occupied;
                }
            }
        }
    }

    /// Integer cell coordinates (possibly out of range) containing `p`.
    pub fn world_to_cell(&self, p: WorldPoint) -> (i64, i64) {
        (
            ((p.x - self.origin.x) / self.resolution).floor() as i64,
            ((p.y - self.origin.y) / self.resolution).floor() as i64,
        )
    }

    pub fn cell_center(&self, col: i64, row: i64) -> WorldPoint {
        WorldPoint::new(
            self.origin.x + (col as f64 + 0.5) * self.resolution,
            self.origin.y + (row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn in_bounds(&self, col: i64, row: i64) -> bool {
        col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height
    }

    /// Occupancy of a cell; out-of-range cells count as occupied.
    pub fn cell_occupied(&self, col: i64, row: i64) -> bool {
        if !self.in_bounds(col, row) {
            return true;
        }
        self.cells[row as usize * self.width + col as usize]
    }

    pub fn is_occupied(&self, p: WorldPoint) -> bool {
        if !p.is_finite() {
            return true;
        }
        let (c, r) = self.world_to_cell(p);
        self.cell_occupied(c, r)
    }

    /// True iff some occupied (or off-map) cell's closed square meets the closed disc.
    pub fn circle_overlaps(&self, center: WorldPoint, radius: f64) -> bool {
        let radius = radius.max(0.0);
        let (c0, r0) = self.world_to_cell(WorldPoint::new(center.x - radius, center.y - radius));
        let (c1, r1) = self.world_to_cell(WorldPoint::new(center.x + radius, center.y + radius));
        // Squares touching the disc boundary exactly also count, so widen by one
        // cell and let the distance test decide.
        for row in (r0 - 1)..=(r1 + 1) {
            for col in (c0 - 1)..=(c1 + 1) {
                if !self.cell_occupied(col, row) {
                    continue;
                }
                if self.square_distance(center, col, row) <= radius {
                    return true;
                }
            }
        }
        false
    }

    /// Euclidean distance from `p` to the closed square of cell `(col, row)`.
    pub fn square_distance(&self, p: WorldPoint, col: i64, row: i64) -> f64 {
        let min_x = self.origin.x + col as f64 * self.resolution;
        let min_y = self.origin.y + row as f64 * self.resolution;
        let dx = (min_x - p.x).max(0.0).max(p.x - (min_x + self.resolution));
        let dy = (min_y - p.y).max(0.0).max(p.y - (min_y + self.resolution));
        dx.hypot(dy)
    }

    /// Distance along the ray to the boundary of the first occupied cell, saturating at
    /// `max_range`. Returns 0 when the origin itself is occupied.
    pub fn raycast(&self, origin: WorldPoint, angle: f64, max_range: f64) -> f64 {
        let (mut col, mut row) = self.world_to_cell(origin);
        if self.cell_occupied(col, row) {
            return 0.0;
        }
        let dir = WorldPoint::new(angle.cos(), angle.sin());
        let res = self.resolution;
        let step_c: i64 = if dir.x > 0.0 { 1 } else { -1 };
        let step_r: i64 = if dir.y > 0.0 { 1 } else { -1 };
        let boundary = |cell: i64, step: i64, o: f64, org: f64| -> f64 {
            let edge = if step > 0 { cell + 1 } else { cell };
            org + edge as f64 * res - o
        };
        let mut t_max_x = if dir.x != 0.0 {
            boundary(col, step_c, origin.x, self.origin.x) / dir.x
        } else {
            f64::INFINITY
        };
        let mut t_max_y = if dir.y != 0.0 {
            boundary(row, step_r, origin.y, self.origin.y) / dir.y
        } else {
            f64::INFINITY
        };
        let t_delta_x = if dir.x != 0.0 { res / dir.x.abs() } else { f64::INFINITY };
        let t_delta_y = if dir.y != 0.0 { res / dir.y.abs() } else { f64::INFINITY };

        loop {
            let t_enter;
            if t_max_x <= t_max_y {
                t_enter = t_max_x;
                t_max_x += t_delta_x;
                col += step_c;
            } else {
                t_enter = t_max_y;
                t_max_y += t_delta_y;
                row += step_r;
            }
            let t_enter = t_enter.max(0.0);
            if t_enter >= max_range {
                return max_range;
            }
            if self.cell_occupied(col, row) {
                return t_enter;
            }
        }
    }
}

/// Map file formats accepted by [`load_map`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    Ascii,
    Pgm,
}

impl MapFormat {
    pub fn from_path(path: &Path) -> MapFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("pgm") => MapFormat::Pgm,
            _ => MapFormat::Ascii,
        }
    }
}

/// Loads a map, choosing the format from the extension (`.pgm` is a raster, anything
/// else is the ASCII grid format).
pub fn load_map(path: impl AsRef<Path>) -> Result<OccupancyGrid, MapError> {
    let path = path.as_ref();
    let io_err = |source| MapError::Io {
        path: path.to_path_buf(),
        source,
    };
    match MapFormat::from_path(path) {
        MapFormat::Ascii => {
            let text = std::fs::read_to_string(path).map_err(io_err)?;
            parse_ascii(&text)
        }
        MapFormat::Pgm => {
            let bytes = std::fs::read(path).map_err(io_err)?;
            let meta_path = sidecar_path(path);
            let meta = std::fs::read_to_string(&meta_path).map_err(|source| MapError::Io {
                path: meta_path.clone(),
                source,
            })?;
            let meta = parse_raster_meta(&meta)?;
            parse_pgm(&bytes, &meta)
        }
    }
}

/// Metadata sidecar for a raster map: `map.pgm` -> `map.meta`.
pub fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("meta")
}

/// Parses the ASCII format: a `W H RES OX OY` header followed by `H` lines of `W`
/// characters. The first grid line is row 0 (smallest y).
pub fn parse_ascii(text: &str) -> Result<OccupancyGrid, MapError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| MapError::Malformed("missing header line".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(MapError::Malformed(format!(
            "header needs 5 fields `W H RES OX OY`, got {}",
            fields.len()
        )));
    }
    let parse_usize = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| MapError::Malformed(format!("bad integer `{s}` in header")))
    };
    let parse_f64 = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| MapError::Malformed(format!("bad number `{s}` in header")))
    };
    let width = parse_usize(fields[0])?;
    let height = parse_usize(fields[1])?;
    let resolution = parse_f64(fields[2])?;
    let origin = WorldPoint::new(parse_f64(fields[3])?, parse_f64(fields[4])?);
    if !(resolution > 0.0) {
        return Err(MapError::InvalidResolution(resolution));
    }

    let rows: Vec<&str> = lines.map(|l| l.trim_end()).collect();
    if rows.len() != height {
        return Err(MapError::DimensionMismatch {
            expected: format!("{height} rows"),
            found: format!("{} rows", rows.len()),
        });
    }
    let mut cells = Vec::with_capacity(width * height);
    for (i, line) in rows.iter().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        if chars.len() != width {
            return Err(MapError::DimensionMismatch {
                expected: format!("{width} columns"),
                found: format!("{} columns on grid line {}", chars.len(), i + 1),
            });
        }
        for ch in chars {
            cells.push(match ch {
                '#' => true,
                '.' => false,
                other => {
                    return Err(MapError::Malformed(format!(
                        "unexpected character `{other}` on grid line {}",
                        i + 1
                    )))
                }
            });
        }
    }
    OccupancyGrid::new(width, height, resolution, origin, cells)
}

/// Inverse of [`parse_ascii`].
pub fn to_ascii(grid: &OccupancyGrid) -> String {
    let mut out = format!(
        "{} {} {} {} {}\n",
        grid.width, grid.height, grid.resolution, grid.origin.x, grid.origin.y
    );
    for row in 0..grid.height {
        for col in 0..grid.width {
            out.push(if grid.cells[row * grid.width + col] { '#' } else { '.' });
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterMeta {
    pub resolution: f64,
    pub origin: WorldPoint,
}

/// Parses `key: value` (or `key = value`) lines; `#` starts a comment.
pub fn parse_raster_meta(text: &str) -> Result<RasterMeta, MapError> {
    let mut resolution = None;
    let mut ox = None;
    let mut oy = None;
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .or_else(|| line.split_once('='))
            .ok_or_else(|| MapError::Malformed(format!("metadata line without separator: `{line}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| MapError::Malformed(format!("bad metadata value in `{line}`")))?;
        match key.trim() {
            "resolution" => resolution = Some(value),
            "origin_x" => ox = Some(value),
            "origin_y" => oy = Some(value),
            _ => {}
        }
    }
    let missing = |k: &str| MapError::Malformed(format!("metadata missing `{k}`"));
    let resolution = resolution.ok_or_else(|| missing("resolution"))?;
    if !(resolution > 0.0) {
        return Err(MapError::InvalidResolution(resolution));
    }
    Ok(RasterMeta {
        resolution,
        origin: WorldPoint::new(ox.ok_or_else(|| missing("origin_x"))?, oy.ok_or_else(|| missing("origin_y"))?),
    })
}

/// Parses a binary (P5) 8-bit graymap. Pixels darker than half of `maxval` are occupied.
/// The first image row is the top of the map (largest y).
pub fn parse_pgm(bytes: &[u8], meta: &RasterMeta) -> Result<OccupancyGrid, MapError> {
    let mut pos = 0usize;
    let mut next_token = || -> Result<String, MapError> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(MapError::Malformed("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if next_token()? != "P5" {
        return Err(MapError::Malformed("not a binary PGM (expected P5)".into()));
    }
    let mut num = |what: &str| -> Result<usize, MapError> {
        next_token()?
            .parse::<usize>()
            .map_err(|_| MapError::Malformed(format!("bad PGM {what}")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(MapError::Malformed(format!("unsupported PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    let data_start = pos + 1;
    let payload = bytes.get(data_start..).unwrap_or(&[]);
    if payload.len() != width * height {
        return Err(MapError::DimensionMismatch {
            expected: format!("{} bytes", width * height),
            found: format!("{} bytes", payload.len()),
        });
    }
    let mut cells = vec![false; width * height];
    for img_row in 0..height {
        let row = height - 1 - img_row;
        for col in 0..width {
            let v = payload[img_row * width + col] as usize;
            cells[row * width + col] = v * 2 < maxval;
        }
    }
    OccupancyGrid::new(width, height, meta.resolution, meta.origin, cells)
}

/// Encodes a grid as P5 (occupied = 0, free = 255) plus its metadata text.
pub fn to_pgm(grid: &OccupancyGrid) -> (Vec<u8>, String) {
    let mut bytes = format!("P5\n{} {}\n255\n", grid.width, grid.height).into_bytes();
    for img_row in 0..grid.height {
        let row = grid.height - 1 - img_row;
        for col in 0..grid.width {
            bytes.push(if grid.cells[row * grid.width + col] { 0 } else { 255 });
        }
    }
    let meta = format!(
        "resolution: {}\norigin_x: {}\norigin_y: {}\n",
        grid.resolution, grid.origin.x, grid.origin.y
    );
    (bytes, meta)
}
