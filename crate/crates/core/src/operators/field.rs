//! Grid-shaped arrays and their ghost-padded counterparts.

use crate::error::{Error, Result};

/// Scalar on the 3D grid interior, x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field3 {
    nx: usize,
    ny: usize,
    nz: usize,
    data: Vec<f64>,
}

/// Scalar on the horizontal cross-section `M`, x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2 {
    nx: usize,
    ny: usize,
    data: Vec<f64>,
}

/// Two horizontal components on the 3D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VecField3 {
    pub x: Field3,
    pub y: Field3,
}

/// Two horizontal components on `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct VecField2 {
    pub x: Field2,
    pub y: Field2,
}

impl Field3 {
    pub fn zeros(nx: usize, ny: usize, nz: usize) -> Self {
        Field3 { nx, ny, nz, data: vec![0.0; nx * ny * nz] }
    }

    pub fn from_vec(nx: usize, ny: usize, nz: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), nx * ny * nz, "field data does not match shape");
        Field3 { nx, ny, nz, data }
    }

    pub fn try_from_vec(nx: usize, ny: usize, nz: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nx * ny * nz {
            return Err(Error::Format(format!(
                "field has {} values, expected {nx}x{ny}x{nz}",
                data.len()
            )));
        }
        Ok(Field3 { nx, ny, nz, data })
    }

    /// Samples `f(i, j, k)` at every cell.
    pub fn from_fn(nx: usize, ny: usize, nz: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    data.push(f(i, j, k));
                }
            }
        }
        Field3 { nx, ny, nz, data }
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nz)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[i + self.nx * (j + self.ny * k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[i + self.nx * (j + self.ny * k)] = v;
    }

    /// The `k`-th horizontal layer as a slice.
    pub fn layer(&self, k: usize) -> &[f64] {
        let n = self.nx * self.ny;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Field3 { nx: self.nx, ny: self.ny, nz: self.nz, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Field3, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.shape(), other.shape());
        Field3 {
            nx: self.nx,
            ny: self.ny,
            nz: self.nz,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Field3) {
        assert_eq!(self.shape(), other.shape());
        for (s, o) in self.data.iter_mut().zip(&other.data) {
            *s += a * o;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Field2 {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        Field2 { nx, ny, data: vec![0.0; nx * ny] }
    }

    pub fn from_vec(nx: usize, ny: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), nx * ny, "field data does not match shape");
        Field2 { nx, ny, data }
    }

    pub fn from_fn(nx: usize, ny: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                data.push(f(i, j));
            }
        }
        Field2 { nx, ny, data }
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i + self.nx * j]
    }

    /// One-layer 3D view of the same values.
    pub fn as_layer(&self) -> Field3 {
        Field3::from_vec(self.nx, self.ny, 1, self.data.clone())
    }

    pub fn from_layer(f: Field3) -> Self {
        let (nx, ny, nz) = f.shape();
        assert_eq!(nz, 1, "expected a single-layer field");
        Field2 { nx, ny, data: f.into_vec() }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn axpy(&mut self, a: f64, other: &Field2) {
        assert_eq!(self.shape(), other.shape());
        for (s, o) in self.data.iter_mut().zip(&other.data) {
            *s += a * o;
        }
    }
}

impl VecField3 {
    pub fn zeros(nx: usize, ny: usize, nz: usize) -> Self {
        VecField3 { x: Field3::zeros(nx, ny, nz), y: Field3::zeros(nx, ny, nz) }
    }

    pub fn axpy(&mut self, a: f64, other: &VecField3) {
        self.x.axpy(a, &other.x);
        self.y.axpy(a, &other.y);
    }

    pub fn max_abs(&self) -> f64 {
        self.x.max_abs().max(self.y.max_abs())
    }
}

/// Per-face ghost multipliers: the ghost value beyond a face is `s * (adjacent
/// interior value)`. `+1` mirrors evenly (zero normal derivative), `-1` mirrors
/// oddly (zero value on the face); other values encode Robin conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcProfile {
    pub x: [f64; 2],
    pub y: [f64; 2],
    /// `[bottom (z = -h), top (z = 0)]`.
    pub z: [f64; 2],
}

impl BcProfile {
    /// Zero normal derivative on every face.
    pub const NEUMANN: BcProfile = BcProfile { x: [1.0, 1.0], y: [1.0, 1.0], z: [1.0, 1.0] };
    /// First velocity component: vanishes on x-walls, free-slip on y-walls, `v_z = 0` top and bottom.
    pub const VELOCITY_X: BcProfile = BcProfile { x: [-1.0, -1.0], y: [1.0, 1.0], z: [1.0, 1.0] };
    /// Second velocity component: vanishes on y-walls, free-slip on x-walls.
    pub const VELOCITY_Y: BcProfile = BcProfile { x: [1.0, 1.0], y: [-1.0, -1.0], z: [1.0, 1.0] };
    /// Diagnosed vertical velocity: vanishes at top and bottom.
    pub const VERTICAL_VELOCITY: BcProfile = BcProfile { x: [1.0, 1.0], y: [1.0, 1.0], z: [-1.0, -1.0] };

    /// Insulated sides and bottom, `T_z + alpha T = 0` at the surface.
    pub fn temperature(alpha: f64, dz: f64) -> BcProfile {
        BcProfile { x: [1.0, 1.0], y: [1.0, 1.0], z: [1.0, robin_multiplier(alpha, dz)] }
    }
}

/// Ghost multiplier making the face average and face difference satisfy
/// `dT/dz + alpha T = 0` at the top face.
#[inline]
pub fn robin_multiplier(alpha: f64, dz: f64) -> f64 {
    (1.0 - 0.5 * alpha * dz) / (1.0 + 0.5 * alpha * dz)
}

/// A field padded with one ghost layer on every face, filled from a [`BcProfile`].
#[derive(Debug, Clone, PartialEq)]
pub struct Ghosted {
    nx: usize,
    ny: usize,
    nz: usize,
    data: Vec<f64>,
    bc: BcProfile,
}

impl Ghosted {
    pub fn fill(field: &Field3, bc: BcProfile) -> Self {
        let (nx, ny, nz) = field.shape();
        let (px, py) = (nx + 2, ny + 2);
        let sy = px;
        let sz = px * py;
        let mut data = vec![0.0; px * py * (nz + 2)];
        for k in 0..nz {
            for j in 0..ny {
                let src = &field.data[nx * (j + ny * k)..nx * (j + ny * k) + nx];
                let base = 1 + sy * (j + 1) + sz * (k + 1);
                data[base..base + nx].copy_from_slice(src);
                data[base - 1] = bc.x[0] * src[0];
                data[base + nx] = bc.x[1] * src[nx - 1];
            }
            let plane = sz * (k + 1);
            for i in 0..px {
                data[plane + i] = bc.y[0] * data[plane + sy + i];
                data[plane + sy * (ny + 1) + i] = bc.y[1] * data[plane + sy * ny + i];
            }
        }
        for c in 0..sz {
            data[c] = bc.z[0] * data[sz + c];
            data[sz * (nz + 1) + c] = bc.z[1] * data[sz * nz + c];
        }
        Ghosted { nx, ny, nz, data, bc }
    }

    pub fn fill_layer(field: &Field2, bc: BcProfile) -> Self {
        Ghosted::fill(&field.as_layer(), bc)
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nz)
    }

    #[inline]
    pub fn bc(&self) -> BcProfile {
        self.bc
    }

    /// Padded values; see [`Ghosted::offset`].
    #[inline]
    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    /// Stride between neighbouring padded entries in y.
    #[inline]
    pub fn stride_y(&self) -> usize {
        self.nx + 2
    }

    /// Stride between neighbouring padded entries in z.
    #[inline]
    pub fn stride_z(&self) -> usize {
        (self.nx + 2) * (self.ny + 2)
    }

    /// Padded offset of interior cell `(i, j, k)`; ghosts sit at offsets
    /// `+- 1`, `+- stride_y`, `+- stride_z` from boundary cells.
    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i + 1) + self.stride_y() * (j + 1) + self.stride_z() * (k + 1)
    }

    /// Padded offset of the first cell of interior row `r = j + ny k`.
    #[inline]
    pub fn row_offset(&self, r: usize) -> usize {
        self.offset(0, r % self.ny, r / self.ny)
    }

    /// Value at signed coordinates; `-1` and `n` address ghosts.
    #[inline]
    pub fn get(&self, i: isize, j: isize, k: isize) -> f64 {
        let o = (i + 1) as usize + self.stride_y() * (j + 1) as usize + self.stride_z() * (k + 1) as usize;
        self.data[o]
    }

    pub fn interior(&self) -> Field3 {
        Field3::from_fn(self.nx, self.ny, self.nz, |i, j, k| self.data[self.offset(i, j, k)])
    }

    /// Pointwise product, ghosts included: the ghost of a product is the product of ghosts.
    pub fn product(&self, other: &Ghosted) -> Ghosted {
        assert_eq!(self.shape(), other.shape());
        Ghosted {
            nx: self.nx,
            ny: self.ny,
            nz: self.nz,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
            bc: BcProfile {
                x: [self.bc.x[0] * other.bc.x[0], self.bc.x[1] * other.bc.x[1]],
                y: [self.bc.y[0] * other.bc.y[0], self.bc.y[1] * other.bc.y[1]],
                z: [self.bc.z[0] * other.bc.z[0], self.bc.z[1] * other.bc.z[1]],
            },
        }
    }
}
