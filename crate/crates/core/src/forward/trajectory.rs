//! Solution states, stored histories and time windows around a level.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid::{self, window_derivative, Field, Grid, ScalarField, SpaceTimeField, VectorField};

/// Half width of the default derivative window (9 levels).
pub const WINDOW_HALF_WIDTH: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub u: VectorField,
    pub u_t: VectorField,
    pub theta: ScalarField,
    pub t: f64,
}

impl FieldState {
    pub fn zeros(grid: &Grid) -> FieldState {
        FieldState {
            u: VectorField::zeros(grid),
            u_t: VectorField::zeros(grid),
            theta: ScalarField::zeros(grid),
            t: 0.0,
        }
    }
}

/// Stored history of the coupled system at every time level.
#[derive(Debug)]
pub struct Trajectory {
    grid: Grid,
    states: Vec<FieldState>,
    div_cache: OnceLock<SpaceTimeField>,
}

impl Clone for Trajectory {
    fn clone(&self) -> Self {
        Trajectory::new(self.grid.clone(), self.states.clone())
    }
}

impl PartialEq for Trajectory {
    fn eq(&self, other: &Self) -> bool {
        self.states == other.states
    }
}

impl Trajectory {
    pub fn new(grid: Grid, states: Vec<FieldState>) -> Trajectory {
        Trajectory {
            grid,
            states,
            div_cache: OnceLock::new(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_levels(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, level: usize) -> &FieldState {
        &self.states[level]
    }

    pub fn states(&self) -> &[FieldState] {
        &self.states
    }

    /// Displacement component `c` as a space-time field.
    pub fn u_component(&self, c: usize) -> SpaceTimeField {
        let levels: Vec<ScalarField> = self.states.iter().map(|s| s.u.component(c).clone()).collect();
        SpaceTimeField::from_levels(&self.grid, &levels)
    }

    pub fn theta(&self) -> SpaceTimeField {
        let levels: Vec<ScalarField> = self.states.iter().map(|s| s.theta.clone()).collect();
        SpaceTimeField::from_levels(&self.grid, &levels)
    }

    fn compute_div(&self) -> SpaceTimeField {
        let levels: Vec<ScalarField> = self
            .states
            .iter()
            .map(|s| grid::divergence(&self.grid, &s.u))
            .collect();
        SpaceTimeField::from_levels(&self.grid, &levels)
    }

    /// `div u` at every level (cached).
    pub fn div_u(&self) -> &SpaceTimeField {
        self.div_cache.get_or_init(|| self.compute_div())
    }

    /// Recomputes `div u` bypassing the cache.
    pub fn div_u_uncached(&self) -> SpaceTimeField {
        self.compute_div()
    }

    /// Scalar curl per level in 2D.
    pub fn rot_u_2d(&self) -> Result<SpaceTimeField> {
        let levels = self
            .states
            .iter()
            .map(|s| grid::rot(&self.grid, &s.u).and_then(into_scalar))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpaceTimeField::from_levels(&self.grid, &levels))
    }

    /// Window of `2 * half_width + 1` levels centred on `center`.
    pub fn window(&self, center: usize, half_width: usize) -> Result<TimeWindow> {
        if center < half_width || center + half_width >= self.n_levels() {
            return Err(Error::validation(
                "time window",
                format!(
                    "level {center} lacks {half_width} levels on each side (trajectory has {} levels)",
                    self.n_levels()
                ),
            ));
        }
        let range = center - half_width..=center + half_width;
        Ok(TimeWindow {
            grid: self.grid.clone(),
            center,
            dt: self.grid.dt(),
            u: self.states[range.clone()].iter().map(|s| s.u.clone()).collect(),
            theta: self.states[range].iter().map(|s| s.theta.clone()).collect(),
        })
    }

    /// The default 9-level window around `t0`.
    pub fn t0_window(&self) -> Result<TimeWindow> {
        self.window(self.grid.t0_index(), WINDOW_HALF_WIDTH)
    }
}

fn into_scalar(f: Field) -> Result<ScalarField> {
    f.into_scalar()
        .ok_or_else(|| Error::Unsupported("expected a scalar curl (2D grid)".into()))
}

/// Displacement and temperature on an odd number of consecutive levels.
#[derive(Clone, Debug)]
pub struct TimeWindow {
    grid: Grid,
    /// Level index of the centre in the parent trajectory.
    pub center: usize,
    pub dt: f64,
    pub u: Vec<VectorField>,
    pub theta: Vec<ScalarField>,
}

impl TimeWindow {
    pub fn new(grid: &Grid, center: usize, u: Vec<VectorField>, theta: Vec<ScalarField>) -> Result<TimeWindow> {
        if u.len() != theta.len() || u.len().is_multiple_of(2) {
            return Err(Error::Shape(format!(
                "window needs the same odd number of levels for u and theta, got {} and {}",
                u.len(),
                theta.len()
            )));
        }
        Ok(TimeWindow {
            grid: grid.clone(),
            center,
            dt: grid.dt(),
            u,
            theta,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn half_width(&self) -> usize {
        self.u.len() / 2
    }

    pub fn u_center(&self) -> &VectorField {
        &self.u[self.half_width()]
    }

    pub fn theta_center(&self) -> &ScalarField {
        &self.theta[self.half_width()]
    }

    fn scalar_derivative(&self, levels: &[&ScalarField], order: usize) -> Result<ScalarField> {
        if order == 0 {
            return Ok(levels[levels.len() / 2].clone());
        }
        let slices: Vec<&[f64]> = levels.iter().map(|f| f.values()).collect();
        Ok(ScalarField::from_values(&self.grid, window_derivative(&slices, order, self.dt)?))
    }

    /// `∂ₜ^order u` at the centre.
    pub fn u_derivative(&self, order: usize) -> Result<VectorField> {
        let comps = (0..self.grid.dim())
            .map(|c| {
                let levels: Vec<&ScalarField> = self.u.iter().map(|u| u.component(c)).collect();
                self.scalar_derivative(&levels, order)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorField::from_components(comps))
    }

    /// `∂ₜ^order θ` at the centre.
    pub fn theta_derivative(&self, order: usize) -> Result<ScalarField> {
        let levels: Vec<&ScalarField> = self.theta.iter().collect();
        self.scalar_derivative(&levels, order)
    }

    /// `∂ₜ^order div u` at the centre.
    pub fn div_derivative(&self, order: usize) -> Result<ScalarField> {
        Ok(grid::divergence(&self.grid, &self.u_derivative(order)?))
    }

    /// Level-wise difference `self - other`.
    pub fn sub(&self, other: &TimeWindow) -> Result<TimeWindow> {
        if self.u.len() != other.u.len() || self.center != other.center {
            return Err(Error::Shape("windows cover different levels".into()));
        }
        Ok(TimeWindow {
            grid: self.grid.clone(),
            center: self.center,
            dt: self.dt,
            u: self.u.iter().zip(&other.u).map(|(a, b)| a.sub(b)).collect(),
            theta: self.theta.iter().zip(&other.theta).map(|(a, b)| a.sub(b)).collect(),
        })
    }
}
