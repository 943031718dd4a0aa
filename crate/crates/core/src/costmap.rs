//! Embodiment-aware cost field: occupied cells become lethal and spread
//! truncated, accumulated 2D Gaussian penalties into their neighborhood.

use thiserror::Error;

use crate::mapping::OccupancyGrid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostmapError {
    #[error("embodiment dimensions must be positive, got {length} x {width}")]
    NonPositiveEmbodiment { length: f64, width: f64 },
    #[error("gaussian sigmas must be positive, got {sigma_x} x {sigma_y}")]
    NonPositiveSigma { sigma_x: f64, sigma_y: f64 },
}

/// Footprint of the platform, used to derive the inflation radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbodimentSpec {
    length: f64,
    width: f64,
}

impl EmbodimentSpec {
    pub fn new(length: f64, width: f64) -> Result<Self, CostmapError> {
        if length > 0.0 && width > 0.0 {
            Ok(Self { length, width })
        } else {
            Err(CostmapError::NonPositiveEmbodiment { length, width })
        }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn width(&self) -> f64 {
        self.width
    }
}

/// Shape of the penalty bump each lethal cell spreads, in cell units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    sigma_x: f64,
    sigma_y: f64,
}

impl GaussianParams {
    pub fn new(sigma_x: f64, sigma_y: f64) -> Result<Self, CostmapError> {
        if sigma_x > 0.0 && sigma_y > 0.0 {
            Ok(Self { sigma_x, sigma_y })
        } else {
            Err(CostmapError::NonPositiveSigma { sigma_x, sigma_y })
        }
    }

    pub fn sigma_x(&self) -> f64 {
        self.sigma_x
    }

    pub fn sigma_y(&self) -> f64 {
        self.sigma_y
    }
}

impl Default for GaussianParams {
    fn default() -> Self {
        Self {
            sigma_x: 1.0,
            sigma_y: 1.0,
        }
    }
}

/// Occupancy grid enriched with per-cell traversal penalties. Lethal cells
/// mirror the occupied cells and are never assigned a finite penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct CostField {
    origin: [f64; 2],
    resolution: f64,
    width: usize,
    height: usize,
    lethal: Vec<bool>,
    penalty: Vec<f64>,
}

impl CostField {
    /// All-traversable field with zero penalties, mostly for tests and
    /// hand-crafted planning scenarios.
    pub fn new_empty(origin: [f64; 2], resolution: f64, width: usize, height: usize) -> Self {
        assert!(resolution > 0.0, "resolution must be positive");
        Self {
            origin,
            resolution,
            width,
            height,
            lethal: vec![false; width * height],
            penalty: vec![0.0; width * height],
        }
    }

    fn idx(&self, row: usize, col: usize) -> usize {
        assert!(row < self.height && col < self.width, "cell out of bounds");
        row * self.width + col
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_lethal(&self, row: usize, col: usize) -> bool {
        self.lethal[self.idx(row, col)]
    }

    /// Accumulated penalty; zero on lethal cells — lethality is tracked
    /// separately and outranks any finite value.
    pub fn penalty(&self, row: usize, col: usize) -> f64 {
        self.penalty[self.idx(row, col)]
    }

    pub fn set_lethal(&mut self, row: usize, col: usize, value: bool) {
        let i = self.idx(row, col);
        self.lethal[i] = value;
        if value {
            self.penalty[i] = 0.0;
        }
    }

    pub fn set_penalty(&mut self, row: usize, col: usize, value: f64) {
        assert!(value >= 0.0, "penalty must be nonnegative");
        let i = self.idx(row, col);
        assert!(!self.lethal[i], "lethal cells carry no finite penalty");
        self.penalty[i] = value;
    }

    pub fn lethal_count(&self) -> usize {
        self.lethal.iter().filter(|&&l| l).count()
    }
}

/// Half-diagonal of the footprint expressed in cells, rounded half-up.
pub fn embodiment_radius_cells(spec: &EmbodimentSpec, resolution: f64) -> usize {
    assert!(resolution > 0.0, "resolution must be positive");
    let half_diagonal = ((spec.length / 2.0).powi(2) + (spec.width / 2.0).powi(2)).sqrt();
    (half_diagonal / resolution + 0.5).floor() as usize
}

/// Spreads a truncated Gaussian penalty bump from every occupied cell and
/// sums overlapping contributions. Cells farther than `radius` (Chebyshev,
/// in cells) from every obstacle keep penalty zero; occupied cells become
/// lethal instead of receiving a finite penalty.
pub fn inflate(grid: &OccupancyGrid, radius: usize, params: &GaussianParams) -> CostField {
    let mut field = CostField::new_empty(
        grid.origin(),
        grid.resolution(),
        grid.width(),
        grid.height(),
    );
    for (row, col) in grid.occupied_cells() {
        field.lethal[row * grid.width() + col] = true;
    }
    let r = radius as isize;
    let two_sx2 = 2.0 * params.sigma_x * params.sigma_x;
    let two_sy2 = 2.0 * params.sigma_y * params.sigma_y;
    for (row, col) in grid.occupied_cells() {
        for dr in -r..=r {
            let Some(cr) = row.checked_add_signed(dr).filter(|&v| v < grid.height()) else {
                continue;
            };
            for dc in -r..=r {
                let Some(cc) = col.checked_add_signed(dc).filter(|&v| v < grid.width()) else {
                    continue;
                };
                let i = cr * grid.width() + cc;
                if field.lethal[i] {
                    continue;
                }
                let (dx, dy) = (dc as f64, dr as f64);
                field.penalty[i] += (-(dx * dx / two_sx2 + dy * dy / two_sy2)).exp();
            }
        }
    }
    field
}
