//! Three-dimensional Hilbert curve over a `2^order` cube.
//!
//! The mapping uses Skilling's transpose formulation ("Programming the Hilbert
//! curve", AIP Conf. Proc. 707, 2004). Orientation is fixed: index 0 sits at
//! the `(0, 0, 0)` corner, and the first axis of the transposed representation
//! is `x`. Mappings are computed on the fly in `O(order)` per query.

use crate::error::{Error, Result};

pub const MAX_ORDER: u32 = 10;

/// Integer voxel coordinate inside the curve cube.
pub type Coord = [usize; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HilbertCurve {
    order: u32,
}

impl HilbertCurve {
    pub fn new(order: u32) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(Error::Config(format!(
                "curve order must be in 1..={MAX_ORDER}, got {order}"
            )));
        }
        Ok(HilbertCurve { order })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Edge length of the cube in voxels.
    pub fn side(&self) -> usize {
        1 << self.order
    }

    pub fn total_cells(&self) -> usize {
        1 << (3 * self.order)
    }

    pub fn index_to_coord(&self, h: usize) -> Result<Coord> {
        if h >= self.total_cells() {
            return Err(Error::Bounds(format!(
                "curve index {h} outside [0, {})",
                self.total_cells()
            )));
        }
        Ok(self.index_to_coord_unchecked(h))
    }

    pub fn coord_to_index(&self, c: Coord) -> Result<usize> {
        let side = self.side();
        if c.iter().any(|&v| v >= side) {
            return Err(Error::Bounds(format!(
                "coordinate ({}, {}, {}) outside cube of side {side}",
                c[0], c[1], c[2]
            )));
        }
        Ok(self.coord_to_index_unchecked(c))
    }

    pub(crate) fn index_to_coord_unchecked(&self, h: usize) -> Coord {
        let bits = self.order;
        // De-interleave: the index's bits, most significant first, cycle x, y, z.
        let mut x = [0u32; 3];
        for j in 0..bits {
            for (i, xi) in x.iter_mut().enumerate() {
                let pos = 3 * j + (2 - i as u32);
                *xi |= (((h >> pos) & 1) as u32) << j;
            }
        }
        transpose_to_axes(&mut x, bits);
        [x[0] as usize, x[1] as usize, x[2] as usize]
    }

    pub(crate) fn coord_to_index_unchecked(&self, c: Coord) -> usize {
        let bits = self.order;
        let mut x = [c[0] as u32, c[1] as u32, c[2] as u32];
        axes_to_transpose(&mut x, bits);
        let mut h = 0usize;
        for j in (0..bits).rev() {
            for xi in &x {
                h = (h << 1) | ((xi >> j) & 1) as usize;
            }
        }
        h
    }

    /// Iterator over coordinates in curve order.
    pub fn iter(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.total_cells()).map(move |h| self.index_to_coord_unchecked(h))
    }
}

fn transpose_to_axes(x: &mut [u32; 3], bits: u32) {
    let n = x.len();
    let top: u32 = 2 << (bits - 1);

    // Gray decode.
    let t = x[n - 1] >> 1;
    for i in (1..n).rev() {
        x[i] ^= x[i - 1];
    }
    x[0] ^= t;

    // Undo excess work.
    let mut q = 2;
    while q != top {
        let p = q - 1;
        for i in (0..n).rev() {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q <<= 1;
    }
}

fn axes_to_transpose(x: &mut [u32; 3], bits: u32) {
    let n = x.len();
    let m: u32 = 1 << (bits - 1);

    // Inverse undo.
    let mut q = m;
    while q > 1 {
        let p = q - 1;
        for i in 0..n {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q >>= 1;
    }

    // Gray encode.
    for i in 1..n {
        x[i] ^= x[i - 1];
    }
    let mut t = 0;
    let mut q = m;
    while q > 1 {
        if x[n - 1] & q != 0 {
            t ^= q - 1;
        }
        q >>= 1;
    }
    for xi in x.iter_mut() {
        *xi ^= t;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l1(a: Coord, b: Coord) -> usize {
        (0..3).map(|i| a[i].abs_diff(b[i])).sum()
    }

    #[test]
    fn sizes() {
        let c = HilbertCurve::new(6).unwrap();
        assert_eq!(c.side(), 64);
        assert_eq!(c.total_cells(), 262_144);
        let c = HilbertCurve::new(1).unwrap();
        assert_eq!(c.side(), 2);
        assert_eq!(c.total_cells(), 8);
    }

    #[test]
    fn rejects_bad_order() {
        assert!(matches!(HilbertCurve::new(0), Err(Error::Config(_))));
        assert!(matches!(HilbertCurve::new(11), Err(Error::Config(_))));
    }

    #[test]
    fn origin_and_first_step() {
        let c = HilbertCurve::new(6).unwrap();
        assert_eq!(c.index_to_coord(0).unwrap(), [0, 0, 0]);
        assert_eq!(c.coord_to_index([0, 0, 0]).unwrap(), 0);
        assert_eq!(l1(c.index_to_coord(1).unwrap(), [0, 0, 0]), 1);
    }

    #[test]
    fn order2_visits_every_cell_once_with_unit_steps() {
        let c = HilbertCurve::new(2).unwrap();
        let mut seen = [false; 64];
        let mut prev: Option<Coord> = None;
        for p in c.iter() {
            let flat = p[0] + 4 * (p[1] + 4 * p[2]);
            assert!(!seen[flat], "visited {p:?} twice");
            seen[flat] = true;
            if let Some(q) = prev {
                assert_eq!(l1(p, q), 1);
            }
            prev = Some(p);
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn exhaustive_round_trip_low_orders() {
        for order in 1..=4 {
            let c = HilbertCurve::new(order).unwrap();
            for h in 0..c.total_cells() {
                let p = c.index_to_coord(h).unwrap();
                assert_eq!(c.coord_to_index(p).unwrap(), h);
            }
        }
    }

    #[test]
    fn bounds_errors() {
        let c = HilbertCurve::new(3).unwrap();
        assert!(matches!(c.index_to_coord(512), Err(Error::Bounds(_))));
        assert!(matches!(c.coord_to_index([8, 0, 0]), Err(Error::Bounds(_))));
    }

    #[test]
    fn deterministic() {
        let a = HilbertCurve::new(5).unwrap();
        let b = HilbertCurve::new(5).unwrap();
        assert!(a.iter().eq(b.iter()));
    }
}
