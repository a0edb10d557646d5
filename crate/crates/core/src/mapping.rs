//! Rasterized slab maps and their PGM/CSV exports.
//!
//! Cell `(i, j)` covers position `origin + spacing * (i, j)`; `i` runs along
//! x, `j` along y. Storage and both exports are row-major with `j` as the
//! row, so y increases downward in the image.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal_io::{lattice_index, Dataset, Position, DEFAULT_SPACING_CM};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub nx: usize,
    pub ny: usize,
    pub spacing_cm: f64,
    pub origin: Position,
}

impl GridGeometry {
    pub fn from_dataset<T: Scalar>(dataset: &Dataset<T>) -> Self {
        let (nx, ny) = dataset.grid_dims();
        GridGeometry {
            nx,
            ny,
            spacing_cm: dataset.spacing_cm(),
            origin: dataset.origin(),
        }
    }

    /// Bounding lattice of `positions`. Spacing is inferred the same way as
    /// for datasets when not given.
    pub fn from_positions(positions: &[Position], spacing_cm: Option<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let min_gap = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v.windows(2)
                .map(|w| w[1] - w[0])
                .filter(|&d| d > 1e-9)
                .min_by(f64::total_cmp)
        };
        let xs: Vec<f64> = positions.iter().map(|p| p.x_cm).collect();
        let ys: Vec<f64> = positions.iter().map(|p| p.y_cm).collect();
        let spacing = spacing_cm.unwrap_or_else(|| match (min_gap(xs.clone()), min_gap(ys.clone())) {
            (Some(a), Some(b)) => a.min(b),
            (a, b) => a.or(b).unwrap_or(DEFAULT_SPACING_CM),
        });
        let lo = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let origin = Position::new(lo(&xs), lo(&ys));
        Ok(GridGeometry {
            nx: ((hi(&xs) - origin.x_cm) / spacing).round() as usize + 1,
            ny: ((hi(&ys) - origin.y_cm) / spacing).round() as usize + 1,
            spacing_cm: spacing,
            origin,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn x_cm(&self, i: usize) -> f64 {
        self.origin.x_cm + i as f64 * self.spacing_cm
    }

    pub fn y_cm(&self, j: usize) -> f64 {
        self.origin.y_cm + j as f64 * self.spacing_cm
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cells<T> {
    Scalar(Vec<T>),
    Labels(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap<T> {
    pub geometry: GridGeometry,
    pub cells: Cells<T>,
    /// `true` where a point was sampled.
    pub mask: Vec<bool>,
}

/// Per-point values to rasterize.
#[derive(Debug, Clone, Copy)]
pub enum PointValues<'a, T> {
    Scalar(&'a [T]),
    Labels(&'a [usize]),
}

impl<T> PointValues<'_, T> {
    fn len(&self) -> usize {
        match self {
            PointValues::Scalar(v) => v.len(),
            PointValues::Labels(v) => v.len(),
        }
    }
}

impl<T: Scalar> GridMap<T> {
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.geometry.nx + i
    }

    pub fn scalar(&self, i: usize, j: usize) -> Option<T> {
        let idx = self.index(i, j);
        match &self.cells {
            Cells::Scalar(v) if self.mask[idx] => Some(v[idx]),
            _ => None,
        }
    }

    pub fn label(&self, i: usize, j: usize) -> Option<usize> {
        let idx = self.index(i, j);
        match &self.cells {
            Cells::Labels(v) if self.mask[idx] => Some(v[idx]),
            _ => None,
        }
    }

    pub fn sampled_cells(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Places each point's value in its lattice cell.
pub fn rasterize_points<T: Scalar>(
    ids: &[String],
    positions: &[Position],
    geometry: GridGeometry,
    values: PointValues<'_, T>,
) -> Result<GridMap<T>> {
    if ids.len() != positions.len() || values.len() != positions.len() {
        return Err(Error::DimensionMismatch {
            expected: positions.len(),
            found: values.len().min(ids.len()),
        });
    }
    let cells = geometry.cell_count();
    let mut owner: HashMap<usize, usize> = HashMap::with_capacity(positions.len());
    let mut mask = vec![false; cells];
    let mut scalar = vec![T::zero(); cells];
    let mut labels = vec![0usize; cells];
    for (p, (&pos, id)) in positions.iter().zip(ids).enumerate() {
        let (i, j) = lattice_index(pos, geometry.origin, geometry.spacing_cm)
            .filter(|&(i, j)| i < geometry.nx && j < geometry.ny)
            .ok_or_else(|| Error::OffLattice {
                id: id.clone(),
                x_cm: pos.x_cm,
                y_cm: pos.y_cm,
                spacing_cm: geometry.spacing_cm,
            })?;
        let idx = j * geometry.nx + i;
        if let Some(&prev) = owner.get(&idx) {
            return Err(Error::CellCollision {
                first: ids[prev].clone(),
                second: id.clone(),
            });
        }
        owner.insert(idx, p);
        mask[idx] = true;
        match values {
            PointValues::Scalar(v) => scalar[idx] = v[p],
            PointValues::Labels(v) => labels[idx] = v[p],
        }
    }
    let cells = match values {
        PointValues::Scalar(_) => Cells::Scalar(scalar),
        PointValues::Labels(_) => Cells::Labels(labels),
    };
    Ok(GridMap { geometry, cells, mask })
}

/// Rasterizes row-aligned values over the dataset's grid.
pub fn rasterize<T: Scalar>(dataset: &Dataset<T>, values: PointValues<'_, T>) -> Result<GridMap<T>> {
    rasterize_points(
        &dataset.ids(),
        &dataset.positions(),
        GridGeometry::from_dataset(dataset),
        values,
    )
}

/// Min-max scales sampled cells to [0, 1] and applies `v^gamma`. A constant
/// map becomes 0.5 everywhere it is sampled.
pub fn normalize_map<T: Scalar>(map: &GridMap<T>, gamma: T) -> Result<GridMap<T>> {
    let Cells::Scalar(values) = &map.cells else {
        return Err(Error::InvalidArgument("cannot normalize a label map".into()));
    };
    let sampled = || values.iter().zip(&map.mask).filter(|(_, &m)| m).map(|(&v, _)| v);
    if sampled().next().is_none() {
        return Err(Error::InvalidArgument("map has no sampled cells".into()));
    }
    let lo = sampled().fold(T::infinity(), T::min);
    let hi = sampled().fold(T::neg_infinity(), T::max);
    let range = hi - lo;
    let out = values
        .iter()
        .zip(&map.mask)
        .map(|(&v, &m)| {
            if !m {
                T::zero()
            } else if range > T::zero() {
                ((v - lo) / range).powf(gamma)
            } else {
                T::lit(0.5)
            }
        })
        .collect();
    Ok(GridMap {
        geometry: map.geometry,
        cells: Cells::Scalar(out),
        mask: map.mask.clone(),
    })
}

/// Binary PGM (P5, maxval 255). Scalar cells map `v -> round(v * 255)` after
/// clamping to [0, 1]; labels spread evenly from 0 to 255; masked cells are 0.
pub fn write_pgm<T: Scalar>(map: &GridMap<T>) -> Vec<u8> {
    let g = map.geometry;
    let mut out = format!("P5\n{} {}\n255\n", g.nx, g.ny).into_bytes();
    let level = |idx: usize| -> u8 {
        if !map.mask[idx] {
            return 0;
        }
        match &map.cells {
            Cells::Scalar(v) => (v[idx].as_f64().clamp(0.0, 1.0) * 255.0).round() as u8,
            Cells::Labels(v) => {
                let top = v
                    .iter()
                    .zip(&map.mask)
                    .filter(|(_, &m)| m)
                    .map(|(&l, _)| l)
                    .max()
                    .unwrap_or(0);
                if top == 0 {
                    255
                } else {
                    ((v[idx] as f64 / top as f64) * 255.0).round() as u8
                }
            }
        }
    };
    out.extend((0..g.cell_count()).map(level));
    out
}

/// Decoded PGM: width, height, maxval and the raw payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u8>,
}

/// Reads an 8-bit binary PGM, including `#` comments in the header.
pub fn parse_pgm(bytes: &[u8]) -> Result<Pgm> {
    let bad = |reason: &str| Error::InvalidArgument(format!("malformed PGM: {reason}"));
    let mut pos = 0;
    let mut token = || -> Result<String> {
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
            return Err(bad("truncated header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(bad("magic is not P5"));
    }
    let width: usize = token()?.parse().map_err(|_| bad("width"))?;
    let height: usize = token()?.parse().map_err(|_| bad("height"))?;
    let maxval: u16 = token()?.parse().map_err(|_| bad("maxval"))?;
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit maxval supported"));
    }
    // Exactly one whitespace byte separates header and payload.
    let payload = &bytes[pos + 1..];
    if payload.len() < width * height {
        return Err(bad("payload shorter than width * height"));
    }
    Ok(Pgm {
        width,
        height,
        maxval,
        pixels: payload[..width * height].to_vec(),
    })
}

/// CSV with a header of x coordinates and one row per y; masked cells empty.
pub fn write_map_csv<T: Scalar>(map: &GridMap<T>) -> String {
    let g = map.geometry;
    let mut s = String::from("y_cm\\x_cm");
    for i in 0..g.nx {
        s.push_str(&format!(",{:?}", g.x_cm(i)));
    }
    s.push('\n');
    for j in 0..g.ny {
        s.push_str(&format!("{:?}", g.y_cm(j)));
        for i in 0..g.nx {
            let idx = map.index(i, j);
            s.push(',');
            if map.mask[idx] {
                match &map.cells {
                    Cells::Scalar(v) => s.push_str(&format!("{:?}", v[idx])),
                    Cells::Labels(v) => s.push_str(&v[idx].to_string()),
                }
            }
        }
        s.push('\n');
    }
    s
}

/// Reads a scalar map written by [`write_map_csv`].
pub fn read_map_csv<T: Scalar>(text: &str) -> Result<GridMap<T>> {
    let bad = |reason: String| Error::InvalidArgument(format!("malformed map CSV: {reason}"));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty".into()))?;
    let xs: Vec<f64> = header
        .split(',')
        .skip(1)
        .map(|f| f.parse().map_err(|_| bad(format!("x coordinate `{f}`"))))
        .collect::<Result<_>>()?;
    let mut ys = Vec::new();
    let mut values = Vec::new();
    let mut mask = Vec::new();
    for line in lines {
        let mut fields = line.split(',');
        let y = fields.next().unwrap_or("");
        ys.push(y.parse::<f64>().map_err(|_| bad(format!("y coordinate `{y}`")))?);
        let row: Vec<&str> = fields.collect();
        if row.len() != xs.len() {
            return Err(bad(format!("row has {} cells, header {}", row.len(), xs.len())));
        }
        for f in row {
            if f.is_empty() {
                values.push(T::zero());
                mask.push(false);
            } else {
                values.push(T::lit(f.parse().map_err(|_| bad(format!("value `{f}`")))?));
                mask.push(true);
            }
        }
    }
    let spacing = if xs.len() > 1 {
        xs[1] - xs[0]
    } else if ys.len() > 1 {
        ys[1] - ys[0]
    } else {
        DEFAULT_SPACING_CM
    };
    Ok(GridMap {
        geometry: GridGeometry {
            nx: xs.len(),
            ny: ys.len(),
            spacing_cm: spacing,
            origin: Position::new(xs.first().copied().unwrap_or(0.0), ys.first().copied().unwrap_or(0.0)),
        },
        cells: Cells::Scalar(values),
        mask,
    })
}
