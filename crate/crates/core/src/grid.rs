//! Rectangular sampling grids and multi-channel rasters over real space.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes `x_min + i dx` (`i < nx`) by `y_min + j dy` (`j < ny`), inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// Square grid `[-half, half]^2` with `n x n` nodes.
    pub fn square(half: f64, n: usize) -> Self {
        Self { x_min: -half, x_max: half, y_min: -half, y_max: half, nx: n, ny: n }
    }

    pub fn validate(&self) -> Result<()> {
        let bounds = [self.x_min, self.x_max, self.y_min, self.y_max];
        if bounds.iter().any(|v| !v.is_finite()) || self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(Error::InvalidConfig("grid bounds must be finite with min < max".into()));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidConfig(format!("grid needs nx, ny >= 2, got {} x {}", self.nx, self.ny)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / (self.ny - 1) as f64
    }

    /// Coordinates of node `(ix, iy)`.
    pub fn point(&self, ix: usize, iy: usize) -> (f64, f64) {
        (self.x_min + ix as f64 * self.dx(), self.y_min + iy as f64 * self.dy())
    }

    /// Row-major index (`y` slowest).
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// Node whose cell (half a spacing either side) contains `(x, y)`.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = ((x - self.x_min) / self.dx() + 0.5).floor();
        let fy = ((y - self.y_min) / self.dy() + 0.5).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return None;
        }
        Some((fx as usize, fy as usize))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub data: Vec<f64>,
}

/// Named real-valued channels sampled on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub spec: GridSpec,
    pub channels: Vec<Channel>,
}

#[derive(Serialize)]
struct GridSidecar<'a> {
    grid: &'a GridSpec,
    channels: Vec<ChannelEntry<'a>>,
    layout: &'static str,
    #[serde(flatten)]
    extra: &'a serde_json::Map<String, serde_json::Value>,
}

#[derive(Serialize)]
struct ChannelEntry<'a> {
    name: &'a str,
    file: String,
}

impl FieldGrid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, channels: Vec::new() })
    }

    pub fn push(&mut self, name: &str, data: Vec<f64>) -> Result<()> {
        if data.len() != self.spec.len() {
            return Err(Error::Shape(format!(
                "channel {name} has {} values, grid has {} nodes",
                data.len(),
                self.spec.len()
            )));
        }
        self.channels.push(Channel { name: name.to_string(), data });
        Ok(())
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.iter().find(|c| c.name == name).map(|c| c.data.as_slice())
    }

    /// Writes `<stem>.<channel>.f64` (little-endian, row-major) for every
    /// channel plus `<stem>.json` describing them.
    pub fn write_raw(&self, dir: &Path, stem: &str, extra: &serde_json::Map<String, serde_json::Value>) -> Result<()> {
        let mut entries = Vec::new();
        for ch in &self.channels {
            let file = format!("{stem}.{}.f64", ch.name);
            let mut bytes = Vec::with_capacity(ch.data.len() * 8);
            for v in &ch.data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            std::fs::write(dir.join(&file), bytes)?;
            entries.push(ChannelEntry { name: &ch.name, file });
        }
        let sidecar = GridSidecar { grid: &self.spec, channels: entries, layout: "row-major, y slowest, little-endian f64", extra };
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&sidecar)? + "\n")?;
        Ok(())
    }

    /// `x,y,<channel>...` with one row per node.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let mut header = String::from("x,y");
        for ch in &self.channels {
            header.push(',');
            header.push_str(&ch.name);
        }
        writeln!(out, "{header}")?;
        for iy in 0..self.spec.ny {
            for ix in 0..self.spec.nx {
                let (x, y) = self.spec.point(ix, iy);
                let mut line = format!("{x},{y}");
                let i = self.spec.index(ix, iy);
                for ch in &self.channels {
                    line.push_str(&format!(",{}", ch.data[i]));
                }
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }
}
