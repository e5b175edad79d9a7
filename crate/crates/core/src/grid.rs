use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary condition attached to a spatial grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Values repeat with period `len * step`.
    Periodic,
    /// Hard walls one step outside the first and last point; fields vanish there.
    Box,
}

/// Uniform one-dimensional grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1 {
    start: f64,
    step: f64,
    len: usize,
    boundary: Boundary,
}

impl Grid1 {
    /// Periodic grid on `[lo, hi)` with `n` points.
    pub fn periodic(lo: f64, hi: f64, n: usize) -> Result<Self> {
        check(lo, hi, n)?;
        Ok(Self { start: lo, step: (hi - lo) / n as f64, len: n, boundary: Boundary::Periodic })
    }

    /// `n` interior points of a box with walls at `lo` and `hi`.
    pub fn box_interior(lo: f64, hi: f64, n: usize) -> Result<Self> {
        check(lo, hi, n)?;
        let step = (hi - lo) / (n + 1) as f64;
        Ok(Self { start: lo + step, step, len: n, boundary: Boundary::Box })
    }

    /// `n` points from `lo` to `hi` inclusive.
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Self> {
        check(lo, hi, n)?;
        Ok(Self { start: lo, step: (hi - lo) / (n - 1) as f64, len: n, boundary: Boundary::Box })
    }

    /// Symmetric grid `-half..=half` with `2k+1` points, used for conjugate variables.
    pub fn symmetric(half: f64, k: usize) -> Result<Self> {
        Self::linspace(-half, half, 2 * k + 1)
    }

    pub fn start(&self) -> f64 {
        self.start
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn len(&self) -> usize {
        self.len
    }
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
    pub fn end(&self) -> f64 {
        self.x(self.len - 1)
    }

    /// Distance between the two walls (box) or the period (periodic).
    pub fn extent(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.step * self.len as f64,
            Boundary::Box => self.step * (self.len + 1) as f64,
        }
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.x(i)).collect()
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    /// Index of the point nearest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.start) / self.step).round();
        i.clamp(0.0, (self.len - 1) as f64) as usize
    }

    pub fn center_index(&self) -> usize {
        self.len / 2
    }

    /// Quadrature weights: trapezoid for box grids, rectangle for periodic.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len);
        let s = crate::sum::kahan(values.iter().copied());
        match self.boundary {
            Boundary::Periodic => s * self.step,
            Boundary::Box => (s - 0.5 * (values[0] + values[self.len - 1])) * self.step,
        }
    }

    pub fn same_as(&self, other: &Grid1) -> bool {
        self.len == other.len
            && self.boundary == other.boundary
            && (self.start - other.start).abs() <= 1e-12 * (1.0 + self.start.abs())
            && (self.step - other.step).abs() <= 1e-12 * self.step.abs()
    }

    pub fn require_same(&self, other: &Grid1, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(what.to_string()))
        }
    }
}

fn check(lo: f64, hi: f64, n: usize) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::Invalid(format!("grid bounds [{lo}, {hi}] are not increasing")));
    }
    if n < 2 {
        return Err(Error::Invalid(format!("grid needs at least 2 points, got {n}")));
    }
    Ok(())
}
