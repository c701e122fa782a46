use std::fmt;

use smallvec::{smallvec, SmallVec};

use super::TopoError;
use crate::gridmap::GridMap;
use crate::Point;

/// Parity of ray crossings, one bit per obstacle component.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct H2Signature {
    len: usize,
    words: SmallVec<[u64; 2]>,
}

impl H2Signature {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: smallvec![0; len.div_ceil(64)] }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                s.flip(i);
            }
        }
        s
    }

    /// Unit vector with bit `i` set.
    pub fn unit(len: usize, i: usize) -> Self {
        let mut s = Self::zeros(len);
        s.flip(i);
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    /// Bitwise XOR of two signatures of equal length.
    pub fn compose(&self, other: &Self) -> Result<Self, TopoError> {
        if self.len != other.len {
            return Err(TopoError::LengthMismatch { left: self.len, right: other.len });
        }
        let mut out = self.clone();
        out.xor_assign(other);
        Ok(out)
    }

    /// In-place XOR. Panics on length mismatch.
    pub fn xor_assign(&mut self, other: &Self) {
        assert_eq!(self.len, other.len, "signature length mismatch");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }
}

impl fmt::Display for H2Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for H2Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H2[{self}]")
    }
}

/// Signature of the directed segment `p0 → p1`.
///
/// A point counts as right of a ray's line only when strictly right of it,
/// so a polyline vertex lying on the line is attributed to its outgoing
/// segment and parity does not depend on where vertices land.
pub fn segment_signature(p0: &Point, p1: &Point, map: &GridMap) -> H2Signature {
    let mut sig = H2Signature::zeros(map.component_count());
    accumulate_segment(&mut sig, p0, p1, map);
    sig
}

/// XORs the signature of `p0 → p1` into `sig`.
pub fn accumulate_segment(sig: &mut H2Signature, p0: &Point, p1: &Point, map: &GridMap) {
    let res = map.resolution();
    for (i, ray) in map.rays().iter().enumerate() {
        let x = ray.line_x(res);
        if (p0.x > x) == (p1.x > x) {
            continue;
        }
        let t = (x - p0.x) / (p1.x - p0.x);
        let y = p0.y + t * (p1.y - p0.y);
        if ray.covers_y(y, res) {
            sig.flip(i);
        }
    }
}

/// Signature of an open polyline.
pub fn polyline_signature(points: &[Point], map: &GridMap) -> H2Signature {
    let mut sig = H2Signature::zeros(map.component_count());
    for w in points.windows(2) {
        accumulate_segment(&mut sig, &w[0], &w[1], map);
    }
    sig
}
