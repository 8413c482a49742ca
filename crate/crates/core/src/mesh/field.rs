use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value type carried at each vertex (or triangle).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Scalar,
    Vector(usize),
    /// Square `n x n` matrices stored row-major.
    Matrix(usize),
}

impl Shape {
    pub fn width(self) -> usize {
        match self {
            Shape::Scalar => 1,
            Shape::Vector(n) => n,
            Shape::Matrix(n) => n * n,
        }
    }
}

/// Piecewise-linear field given by its vertex values, stored vertex-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    shape: Shape,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(shape: Shape, num_vertices: usize) -> Self {
        Field { shape, values: vec![0.0; shape.width() * num_vertices] }
    }

    pub fn from_values(shape: Shape, values: Vec<f64>) -> Result<Self> {
        let w = shape.width();
        if w == 0 || !values.len().is_multiple_of(w) {
            return Err(Error::Usage(format!("{} values do not fit shape {shape:?}", values.len())));
        }
        Ok(Field { shape, values })
    }

    pub fn scalar(values: Vec<f64>) -> Self {
        Field { shape: Shape::Scalar, values }
    }

    /// Builds a field from per-component vertex arrays.
    pub fn from_components(shape: Shape, comps: &[Vec<f64>]) -> Result<Self> {
        let w = shape.width();
        if comps.len() != w {
            return Err(Error::Usage(format!("expected {w} components, got {}", comps.len())));
        }
        let nv = comps[0].len();
        if comps.iter().any(|c| c.len() != nv) {
            return Err(Error::Usage("components have different lengths".into()));
        }
        let mut values = vec![0.0; w * nv];
        for (c, comp) in comps.iter().enumerate() {
            for (v, x) in comp.iter().enumerate() {
                values[v * w + c] = *x;
            }
        }
        Ok(Field { shape, values })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }
    pub fn width(&self) -> usize {
        self.shape.width()
    }
    pub fn num_vertices(&self) -> usize {
        self.values.len() / self.width()
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn at(&self, v: usize) -> &[f64] {
        let w = self.width();
        &self.values[v * w..(v + 1) * w]
    }
    pub fn at_mut(&mut self, v: usize) -> &mut [f64] {
        let w = self.width();
        &mut self.values[v * w..(v + 1) * w]
    }
    pub fn component(&self, c: usize) -> Vec<f64> {
        let w = self.width();
        self.values.iter().skip(c).step_by(w).copied().collect()
    }
    pub fn components(&self) -> Vec<Vec<f64>> {
        (0..self.width()).map(|c| self.component(c)).collect()
    }
    pub fn set_component(&mut self, c: usize, data: &[f64]) {
        let w = self.width();
        for (v, x) in data.iter().enumerate() {
            self.values[v * w + c] = *x;
        }
    }

    /// `self - other`, entrywise.
    pub fn sub(&self, other: &Field) -> Result<Field> {
        if self.shape != other.shape || self.values.len() != other.values.len() {
            return Err(Error::Usage("fields have different shapes".into()));
        }
        Ok(Field { shape: self.shape, values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() })
    }

    pub fn check_vertices(&self, nv: usize) -> Result<()> {
        if self.num_vertices() != nv {
            return Err(Error::Usage(format!("field has {} vertices, mesh has {nv}", self.num_vertices())));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Piecewise-constant field, one value per triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct CellField {
    pub shape: Shape,
    pub values: Vec<f64>,
}

impl CellField {
    pub fn scalar(values: Vec<f64>) -> Self {
        CellField { shape: Shape::Scalar, values }
    }
    pub fn width(&self) -> usize {
        self.shape.width()
    }
    pub fn num_triangles(&self) -> usize {
        self.values.len() / self.width()
    }
    pub fn at(&self, t: usize) -> &[f64] {
        let w = self.width();
        &self.values[t * w..(t + 1) * w]
    }
}

/// Piecewise-constant planar vector field per component, e.g. a gradient.
/// Entry `t * width + c` holds the `(x, y)` pair of component `c` on
/// triangle `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellVectorField {
    pub shape: Shape,
    pub values: Vec<[f64; 2]>,
}

impl CellVectorField {
    pub fn zeros(shape: Shape, nt: usize) -> Self {
        CellVectorField { shape, values: vec![[0.0; 2]; shape.width() * nt] }
    }
    pub fn width(&self) -> usize {
        self.shape.width()
    }
    pub fn num_triangles(&self) -> usize {
        self.values.len() / self.width()
    }
    pub fn at(&self, t: usize) -> &[[f64; 2]] {
        let w = self.width();
        &self.values[t * w..(t + 1) * w]
    }
    pub fn at_mut(&mut self, t: usize) -> &mut [[f64; 2]] {
        let w = self.width();
        &mut self.values[t * w..(t + 1) * w]
    }
    /// The `d`-th directional derivative (0 = x, 1 = y) on triangle `t`.
    pub fn direction(&self, t: usize, d: usize) -> Vec<f64> {
        self.at(t).iter().map(|v| v[d]).collect()
    }
    pub fn sub(&self, other: &CellVectorField) -> Result<CellVectorField> {
        if self.values.len() != other.values.len() {
            return Err(Error::Usage("cell fields have different sizes".into()));
        }
        Ok(CellVectorField {
            shape: self.shape,
            values: self.values.iter().zip(&other.values).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect(),
        })
    }
    pub fn check_triangles(&self, nt: usize) -> Result<()> {
        if self.num_triangles() != nt {
            return Err(Error::Usage(format!("cell field has {} triangles, mesh has {nt}", self.num_triangles())));
        }
        Ok(())
    }
}
