//! Variable partitions, boxes and points of the (x, y, z) space.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::ScnError;

/// Which block a flat coordinate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    X,
    Y,
    Z,
}

/// Block sizes `(n, m1, m2)`; coordinates are laid out as x, then y, then z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarPartition {
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
}

impl VarPartition {
    pub fn new(n: usize, m1: usize, m2: usize) -> Result<Self, ScnError> {
        if n == 0 {
            return Err(ScnError::InvalidParam("partition needs n >= 1".into()));
        }
        Ok(Self { n, m1, m2 })
    }

    pub fn total(&self) -> usize {
        self.n + self.m1 + self.m2
    }

    pub fn x_range(&self) -> Range<usize> {
        0..self.n
    }

    pub fn y_range(&self) -> Range<usize> {
        self.n..self.n + self.m1
    }

    pub fn z_range(&self) -> Range<usize> {
        self.n + self.m1..self.total()
    }

    /// The joint (x, y) block.
    pub fn xy_range(&self) -> Range<usize> {
        0..self.n + self.m1
    }

    pub fn block_of(&self, index: usize) -> Option<(Block, usize)> {
        if index < self.n {
            Some((Block::X, index))
        } else if index < self.n + self.m1 {
            Some((Block::Y, index - self.n))
        } else if index < self.total() {
            Some((Block::Z, index - self.n - self.m1))
        } else {
            None
        }
    }

    /// Flat index of a block-local coordinate.
    pub fn index(&self, block: Block, local: usize) -> usize {
        match block {
            Block::X => local,
            Block::Y => self.n + local,
            Block::Z => self.n + self.m1 + local,
        }
    }

    /// Partition-aware name such as `x0`, `y2` or `z1`.
    pub fn name(&self, index: usize) -> String {
        match self.block_of(index) {
            Some((Block::X, k)) => format!("x{k}"),
            Some((Block::Y, k)) => format!("y{k}"),
            Some((Block::Z, k)) => format!("z{k}"),
            None => format!("v{index}"),
        }
    }
}

/// Axis-aligned box with possibly infinite bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ScnError> {
        if lower.len() != upper.len() {
            return Err(ScnError::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan()
                || hi.is_nan()
                || lo > hi
                || *lo == f64::INFINITY
                || *hi == f64::NEG_INFINITY
            {
                return Err(ScnError::InvalidParam(format!(
                    "empty or invalid interval [{lo}, {hi}] on axis {i}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn set(&mut self, axis: usize, lo: f64, hi: f64) {
        self.lower[axis] = lo;
        self.upper[axis] = hi;
    }

    /// Sub-box on a contiguous range of axes.
    pub fn restrict(&self, range: Range<usize>) -> BoxDomain {
        BoxDomain {
            lower: self.lower[range.clone()].to_vec(),
            upper: self.upper[range].to_vec(),
        }
    }

    pub fn concat(&self, other: &BoxDomain) -> BoxDomain {
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        lower.extend_from_slice(&other.lower);
        upper.extend_from_slice(&other.upper);
        BoxDomain { lower, upper }
    }

    pub fn project(&self, p: &mut [f64]) {
        for ((v, lo), hi) in p.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Largest amount by which `p` leaves the box (0 inside).
    pub fn excess(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .map(|((v, lo), hi)| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        p.len() == self.dim() && self.excess(p) <= tol
    }

    /// Finite box used for sampling: infinite sides are clipped to `[-half, half]`,
    /// and an interval that clipping would empty becomes `[lo, lo + 2 half]`.
    pub fn clipped(&self, half: f64) -> BoxDomain {
        let mut lower = Vec::with_capacity(self.dim());
        let mut upper = Vec::with_capacity(self.dim());
        for (&lo, &hi) in self.lower.iter().zip(&self.upper) {
            let (a, b) = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => (lo, hi),
                (true, false) => (lo, if lo < half { half } else { lo + 2.0 * half }),
                (false, true) => (if hi > -half { -half } else { hi - 2.0 * half }, hi),
                (false, false) => (-half, half),
            };
            lower.push(a);
            upper.push(b);
        }
        BoxDomain { lower, upper }
    }

    /// Intersection of two boxes of equal dimension.
    pub fn intersect(&self, other: &BoxDomain) -> Result<BoxDomain, ScnError> {
        if other.dim() != self.dim() {
            return Err(ScnError::Dimension {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let lower = self
            .lower
            .iter()
            .zip(&other.lower)
            .map(|(a, b)| a.max(*b))
            .collect();
        let upper = self
            .upper
            .iter()
            .zip(&other.upper)
            .map(|(a, b)| a.min(*b))
            .collect();
        BoxDomain::new(lower, upper)
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }
}

/// A point of the joint space, tied to the partition it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddlePoint {
    partition: VarPartition,
    values: Vec<f64>,
}

impl SaddlePoint {
    pub fn new(partition: VarPartition, values: Vec<f64>) -> Result<Self, ScnError> {
        if values.len() != partition.total() {
            return Err(ScnError::Dimension {
                expected: partition.total(),
                got: values.len(),
            });
        }
        Ok(Self { partition, values })
    }

    pub fn from_blocks(
        partition: VarPartition,
        x: &[f64],
        y: &[f64],
        z: &[f64],
    ) -> Result<Self, ScnError> {
        for (got, expected) in [
            (x.len(), partition.n),
            (y.len(), partition.m1),
            (z.len(), partition.m2),
        ] {
            if got != expected {
                return Err(ScnError::Dimension { expected, got });
            }
        }
        let mut values = Vec::with_capacity(partition.total());
        values.extend_from_slice(x);
        values.extend_from_slice(y);
        values.extend_from_slice(z);
        Ok(Self { partition, values })
    }

    pub fn partition(&self) -> VarPartition {
        self.partition
    }

    pub fn x(&self) -> &[f64] {
        &self.values[self.partition.x_range()]
    }

    pub fn y(&self) -> &[f64] {
        &self.values[self.partition.y_range()]
    }

    pub fn z(&self) -> &[f64] {
        &self.values[self.partition.z_range()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }
}

impl Serialize for SaddlePoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("SaddlePoint", 3)?;
        st.serialize_field("x", self.x())?;
        st.serialize_field("y", self.y())?;
        st.serialize_field("z", self.z())?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_tile_the_space() {
        let p = VarPartition::new(2, 3, 1).unwrap();
        assert_eq!(p.x_range(), 0..2);
        assert_eq!(p.y_range(), 2..5);
        assert_eq!(p.z_range(), 5..6);
        assert_eq!(p.name(4), "y2");
        assert_eq!(p.name(5), "z0");
        assert_eq!(p.index(Block::Z, 0), 5);
    }

    #[test]
    fn zero_n_is_rejected() {
        assert!(VarPartition::new(0, 1, 1).is_err());
    }

    #[test]
    fn clipping_keeps_nonempty_intervals() {
        let b = BoxDomain::new(
            vec![0.0, f64::NEG_INFINITY, 50.0, f64::NEG_INFINITY],
            vec![f64::INFINITY, f64::INFINITY, f64::INFINITY, -40.0],
        )
        .unwrap();
        let c = b.clipped(10.0);
        assert_eq!(c.lower(), &[0.0, -10.0, 50.0, -60.0]);
        assert_eq!(c.upper(), &[10.0, 10.0, 70.0, -40.0]);
    }

    #[test]
    fn excess_and_projection() {
        let b = BoxDomain::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(b.excess(&[0.5, 0.0]), 0.0);
        assert_eq!(b.excess(&[1.5, -3.0]), 2.0);
        let mut p = [2.0, -2.0];
        b.project(&mut p);
        assert_eq!(p, [1.0, -1.0]);
    }

    #[test]
    fn saddle_point_blocks() {
        let part = VarPartition::new(1, 2, 1).unwrap();
        let p = SaddlePoint::from_blocks(part, &[1.0], &[2.0, 3.0], &[4.0]).unwrap();
        assert_eq!(p.y(), &[2.0, 3.0]);
        assert_eq!(p.z(), &[4.0]);
        assert!(SaddlePoint::new(part, vec![0.0; 3]).is_err());
    }
}
