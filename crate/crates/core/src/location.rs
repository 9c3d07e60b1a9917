use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in R^1 or R^2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Location {
    coords: [f64; 2],
    dim: usize,
}

impl Location {
    pub fn new(coords: &[f64]) -> Result<Self> {
        match coords {
            [x] => Ok(Self::x(*x)),
            [x, y] => Ok(Self::xy(*x, *y)),
            _ => Err(Error::Shape(format!(
                "locations must have 1 or 2 coordinates, got {}",
                coords.len()
            ))),
        }
    }

    pub fn x(x: f64) -> Self {
        Self {
            coords: [x, 0.0],
            dim: 1,
        }
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Self {
            coords: [x, y],
            dim: 2,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|c| c.is_finite())
    }

    /// Lag vector `self - other`; the unused second slot is zero in one dimension.
    pub fn lag(&self, other: &Location) -> [f64; 2] {
        [
            self.coords[0] - other.coords[0],
            self.coords[1] - other.coords[1],
        ]
    }

    pub fn distance_squared(&self, other: &Location) -> f64 {
        let h = self.lag(other);
        h[0] * h[0] + h[1] * h[1]
    }

    pub fn distance(&self, other: &Location) -> f64 {
        self.distance_squared(other).sqrt()
    }
}

impl TryFrom<Vec<f64>> for Location {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Location::new(&v)
    }
}

impl From<Location> for Vec<f64> {
    fn from(l: Location) -> Self {
        l.coords().to_vec()
    }
}

/// Axis-aligned bounding box `(min, max)` per coordinate.
pub fn bounding_box(locs: &[Location]) -> Option<([f64; 2], [f64; 2])> {
    let first = locs.first()?;
    let mut lo = first.coords;
    let mut hi = first.coords;
    for l in locs {
        for k in 0..2 {
            lo[k] = lo[k].min(l.coords[k]);
            hi[k] = hi[k].max(l.coords[k]);
        }
    }
    Some((lo, hi))
}

/// Diagonal length of the bounding box.
pub fn diameter(locs: &[Location]) -> f64 {
    match bounding_box(locs) {
        Some((lo, hi)) => ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt(),
        None => 0.0,
    }
}

/// Regular lattice over `[xmin, xmax] x [ymin, ymax]`, row-major with x fastest.
pub fn regular_grid(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize, ny: usize) -> Vec<Location> {
    let step = |lo: f64, hi: f64, n: usize, i: usize| {
        if n <= 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            out.push(Location::xy(step(xmin, xmax, nx, i), step(ymin, ymax, ny, j)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimension() {
        assert!(Location::new(&[]).is_err());
        assert!(Location::new(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn serde_as_array() {
        let l = Location::xy(1.5, -2.0);
        let s = serde_json::to_string(&l).unwrap();
        assert_eq!(s, "[1.5,-2.0]");
        let back: Location = serde_json::from_str(&s).unwrap();
        assert_eq!(back, l);
    }

    #[test]
    fn grid_is_x_fastest() {
        let g = regular_grid(0.0, 1.0, 0.0, 2.0, 3, 2);
        assert_eq!(g.len(), 6);
        assert_eq!(g[1].coords(), &[0.5, 0.0]);
        assert_eq!(g[3].coords(), &[0.0, 2.0]);
    }
}
