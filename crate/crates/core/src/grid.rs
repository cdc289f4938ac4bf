//! Axis-aligned structured grids in 2D and 3D.
//!
//! Cells are numbered lexicographically with `i` fastest, then `j`, then `k`.
//! Faces are grouped by the axis of their normal; within one axis they are
//! numbered lexicographically over the face lattice, which has one extra
//! layer along that axis. Every face carries a fixed global normal pointing
//! in the positive axis direction, so a cell sees sign `+1` on its upper face
//! and `-1` on its lower face along each axis.

use crate::error::{Error, Result};

/// A point in space. The third coordinate is zero for 2D grids.
pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Lo,
    Hi,
}

/// One of the `2 * dim` planar pieces of the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundarySide {
    pub axis: usize,
    pub side: Side,
}

impl BoundarySide {
    pub fn new(axis: usize, side: Side) -> Self {
        Self { axis, side }
    }

    /// Sign of the outward normal relative to the global face normal.
    pub fn outward_sign(self) -> f64 {
        match self.side {
            Side::Lo => -1.0,
            Side::Hi => 1.0,
        }
    }

    /// Position in the canonical ordering x-lo, x-hi, y-lo, y-hi, z-lo, z-hi.
    pub fn index(self) -> usize {
        2 * self.axis + matches!(self.side, Side::Hi) as usize
    }

    pub fn all(dim: usize) -> impl Iterator<Item = BoundarySide> {
        (0..dim).flat_map(|axis| [Side::Lo, Side::Hi].map(|side| BoundarySide { axis, side }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGrid {
    dim: usize,
    lo: [f64; 3],
    hi: [f64; 3],
    counts: [usize; 3],
    h: [f64; 3],
    face_offsets: [usize; 4],
}

impl StructuredGrid {
    /// Builds a grid over the box `extents[axis] = (lo, hi)` with `counts[axis]` cells per axis.
    pub fn new(dim: usize, extents: &[(f64, f64)], counts: &[usize]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidDimension(dim));
        }
        if extents.len() != dim {
            return Err(Error::LengthMismatch {
                what: "extents",
                expected: dim,
                got: extents.len(),
            });
        }
        if counts.len() != dim {
            return Err(Error::LengthMismatch {
                what: "counts",
                expected: dim,
                got: counts.len(),
            });
        }
        let mut lo = [0.0; 3];
        let mut hi = [1.0; 3];
        let mut n = [1usize; 3];
        let mut h = [1.0; 3];
        for axis in 0..dim {
            let (a, b) = extents[axis];
            if !(a.is_finite() && b.is_finite()) || b <= a {
                return Err(Error::DegenerateExtent {
                    axis,
                    reason: format!("interval [{a}, {b}] is empty or not finite"),
                });
            }
            if counts[axis] == 0 {
                return Err(Error::DegenerateExtent {
                    axis,
                    reason: "zero cells".into(),
                });
            }
            lo[axis] = a;
            hi[axis] = b;
            n[axis] = counts[axis];
            h[axis] = (b - a) / counts[axis] as f64;
        }
        let mut face_offsets = [0usize; 4];
        for axis in 0..3 {
            let per_axis = if axis < dim {
                face_lattice(n, axis).iter().product()
            } else {
                0
            };
            face_offsets[axis + 1] = face_offsets[axis] + per_axis;
        }
        Ok(Self {
            dim,
            lo,
            hi,
            counts: n,
            h,
            face_offsets,
        })
    }

    /// Unit square or unit cube with `n` cells per axis.
    pub fn unit(dim: usize, n: usize) -> Result<Self> {
        Self::new(dim, &vec![(0.0, 1.0); dim], &vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }

    pub fn extent(&self, axis: usize) -> (f64, f64) {
        (self.lo[axis], self.hi[axis])
    }

    /// Cell widths per axis.
    pub fn h(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    /// Largest cell width; the mesh size used in convergence tables.
    pub fn h_max(&self) -> f64 {
        self.h().iter().cloned().fold(0.0, f64::max)
    }

    pub fn num_cells(&self) -> usize {
        self.counts().iter().product()
    }

    pub fn num_faces(&self) -> usize {
        self.face_offsets[self.dim]
    }

    /// Range of face indices whose normal is along `axis`.
    pub fn faces_of_axis(&self, axis: usize) -> std::ops::Range<usize> {
        self.face_offsets[axis]..self.face_offsets[axis + 1]
    }

    pub fn cell_measure(&self) -> f64 {
        self.h().iter().product()
    }

    /// Length (2D) or area (3D) of a face normal to `axis`.
    pub fn face_measure_of_axis(&self, axis: usize) -> f64 {
        self.cell_measure() / self.h[axis]
    }

    pub fn checked_cell_measure(&self, cell: usize) -> Result<f64> {
        self.check_cell(cell)?;
        Ok(self.cell_measure())
    }

    pub fn face_measure(&self, face: usize) -> Result<f64> {
        let (axis, _) = self.face_coords(face)?;
        Ok(self.face_measure_of_axis(axis))
    }

    pub fn check_cell(&self, cell: usize) -> Result<()> {
        if cell >= self.num_cells() {
            return Err(Error::IndexOutOfRange {
                what: "cell",
                index: cell,
                len: self.num_cells(),
            });
        }
        Ok(())
    }

    pub fn cell_index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.counts[0] * (ijk[1] + self.counts[1] * ijk[2])
    }

    pub fn cell_coords(&self, cell: usize) -> [usize; 3] {
        let nx = self.counts[0];
        let ny = self.counts[1];
        [cell % nx, (cell / nx) % ny, cell / (nx * ny)]
    }

    pub fn cell_center(&self, cell: usize) -> Point {
        let ijk = self.cell_coords(cell);
        let mut c = [0.0; 3];
        for axis in 0..self.dim {
            c[axis] = self.lo[axis] + (ijk[axis] as f64 + 0.5) * self.h[axis];
        }
        c
    }

    /// Lower corner of a cell.
    pub fn cell_origin(&self, cell: usize) -> Point {
        let ijk = self.cell_coords(cell);
        let mut c = [0.0; 3];
        for axis in 0..self.dim {
            c[axis] = self.lo[axis] + ijk[axis] as f64 * self.h[axis];
        }
        c
    }

    /// Cell containing `p`; points on an interior face go to the upper cell.
    pub fn locate(&self, p: &Point) -> Option<usize> {
        let mut ijk = [0usize; 3];
        for axis in 0..self.dim {
            if p[axis] < self.lo[axis] || p[axis] > self.hi[axis] {
                return None;
            }
            let k = ((p[axis] - self.lo[axis]) / self.h[axis]).floor() as usize;
            ijk[axis] = k.min(self.counts[axis] - 1);
        }
        Some(self.cell_index(ijk))
    }

    fn face_index(&self, axis: usize, ijk: [usize; 3]) -> usize {
        let lat = face_lattice(self.counts, axis);
        self.face_offsets[axis] + ijk[0] + lat[0] * (ijk[1] + lat[1] * ijk[2])
    }

    /// Axis of the face normal and lattice coordinates of the face.
    pub fn face_coords(&self, face: usize) -> Result<(usize, [usize; 3])> {
        if face >= self.num_faces() {
            return Err(Error::IndexOutOfRange {
                what: "face",
                index: face,
                len: self.num_faces(),
            });
        }
        let axis = (0..self.dim)
            .find(|&a| face < self.face_offsets[a + 1])
            .unwrap();
        let local = face - self.face_offsets[axis];
        let lat = face_lattice(self.counts, axis);
        Ok((
            axis,
            [
                local % lat[0],
                (local / lat[0]) % lat[1],
                local / (lat[0] * lat[1]),
            ],
        ))
    }

    pub fn face_center(&self, face: usize) -> Result<Point> {
        let (axis, ijk) = self.face_coords(face)?;
        let mut c = [0.0; 3];
        for a in 0..self.dim {
            let offset = if a == axis { 0.0 } else { 0.5 };
            c[a] = self.lo[a] + (ijk[a] as f64 + offset) * self.h[a];
        }
        Ok(c)
    }

    /// Lower and upper face of `cell` along `axis`.
    pub fn cell_faces_on_axis(&self, cell: usize, axis: usize) -> (usize, usize) {
        let ijk = self.cell_coords(cell);
        let mut up = ijk;
        up[axis] += 1;
        (self.face_index(axis, ijk), self.face_index(axis, up))
    }

    /// The `2 * dim` faces of a cell with incidence signs, ordered (axis, lo/hi).
    pub fn faces_of_cell(&self, cell: usize) -> Result<Vec<(usize, f64)>> {
        self.check_cell(cell)?;
        Ok((0..self.dim)
            .flat_map(|axis| {
                let (lo, hi) = self.cell_faces_on_axis(cell, axis);
                [(lo, -1.0), (hi, 1.0)]
            })
            .collect())
    }

    /// Adjacent cells of a face as `(lower cell, upper cell)` along the face normal.
    /// The lower cell sees sign `+1`, the upper cell sign `-1`.
    pub fn cells_of_face(&self, face: usize) -> Result<(Option<usize>, Option<usize>)> {
        let (axis, ijk) = self.face_coords(face)?;
        let lower = if ijk[axis] > 0 {
            let mut c = ijk;
            c[axis] -= 1;
            Some(self.cell_index(c))
        } else {
            None
        };
        let upper = if ijk[axis] < self.counts[axis] {
            Some(self.cell_index(ijk))
        } else {
            None
        };
        Ok((lower, upper))
    }

    /// Boundary side a face lies on, if any.
    pub fn boundary_side_of_face(&self, face: usize) -> Result<Option<BoundarySide>> {
        let (axis, ijk) = self.face_coords(face)?;
        Ok(if ijk[axis] == 0 {
            Some(BoundarySide::new(axis, Side::Lo))
        } else if ijk[axis] == self.counts[axis] {
            Some(BoundarySide::new(axis, Side::Hi))
        } else {
            None
        })
    }

    /// All faces lying on a boundary side, in increasing index order.
    pub fn boundary_faces(&self, side: BoundarySide) -> Vec<usize> {
        let axis = side.axis;
        let layer = match side.side {
            Side::Lo => 0,
            Side::Hi => self.counts[axis],
        };
        let lat = face_lattice(self.counts, axis);
        let mut out = Vec::new();
        for k in 0..lat[2] {
            for j in 0..lat[1] {
                for i in 0..lat[0] {
                    let ijk = [i, j, k];
                    if ijk[axis] == layer {
                        out.push(self.face_index(axis, ijk));
                    }
                }
            }
        }
        out
    }
}

fn face_lattice(counts: [usize; 3], axis: usize) -> [usize; 3] {
    let mut lat = counts;
    lat[axis] += 1;
    lat
}
