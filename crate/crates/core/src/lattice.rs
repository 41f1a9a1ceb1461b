//! Lattice geometry: directions, sites, and the finite walk domains.
//!
//! Domains come in three shapes. `Box` is the centred box (-M, M) x
//! (-M^3/4, M^3/4)^(d-1) whose distinguished front face is {x . e1 >= M}.
//! `Slab` is {-L <= x . e1 < L} with periodic transverse identification of
//! width W. `Rect` is an arbitrary product of inclusive integer intervals
//! (used for displacement stopping boxes).

use serde::{Deserialize, Serialize};

/// Compile-time ceiling on the ambient dimension; runtime `d` is <= MAX_D.
pub const MAX_D: usize = 8;

/// A lattice point. Coordinates beyond the ambient dimension stay zero.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Site(pub [i64; MAX_D]);

impl Site {
    pub fn origin() -> Self {
        Site([0; MAX_D])
    }

    pub fn from_coords(c: &[i64]) -> Self {
        let mut s = [0i64; MAX_D];
        s[..c.len()].copy_from_slice(c);
        Site(s)
    }

    #[inline]
    pub fn step(&self, dir: Direction) -> Site {
        let mut c = self.0;
        c[dir.axis] += if dir.positive { 1 } else { -1 };
        Site(c)
    }
}

/// One of the 2d unit directions, in canonical order: axis ascending,
/// positive before negative. Axis 0 is the distinguished e1 axis.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Direction {
    pub axis: usize,
    pub positive: bool,
}

impl Direction {
    #[inline]
    pub fn index(&self) -> usize {
        2 * self.axis + usize::from(!self.positive)
    }

    #[inline]
    pub fn from_index(i: usize) -> Direction {
        Direction { axis: i / 2, positive: i % 2 == 0 }
    }

    pub fn all(d: usize) -> impl Iterator<Item = Direction> {
        (0..2 * d).map(Direction::from_index)
    }

    /// Signed unit component along this direction's axis.
    #[inline]
    pub fn sign(&self) -> i64 {
        if self.positive {
            1
        } else {
            -1
        }
    }
}

/// Slab {-L <= x . e1 < L} with periodic transverse width W (W even, >= 2).
/// Interior states: 2L * W^(d-1); absorbed at x . e1 = L and x . e1 = -L - 1.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SlabSpec {
    pub d: usize,
    pub l: i64,
    pub w: i64,
}

impl SlabSpec {
    pub fn new(d: usize, l: i64, w: i64) -> Result<Self, DomainError> {
        if d < 2 || d > MAX_D {
            return Err(DomainError::Dimension(d));
        }
        if l < 1 {
            return Err(DomainError::BadExtent("slab half-width must be >= 1"));
        }
        if w < 2 || w % 2 != 0 {
            return Err(DomainError::BadExtent("transverse width must be even and >= 2"));
        }
        Ok(SlabSpec { d, l, w })
    }

    pub fn states(&self) -> u64 {
        2 * self.l as u64 * (self.w as u64).pow(self.d as u32 - 1)
    }
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
pub enum DomainError {
    #[error("dimension {0} unsupported (need 2 <= d <= 8)")]
    Dimension(usize),
    #[error("bad extent: {0}")]
    BadExtent(&'static str),
}

/// Exit-face labels. For boxes, Front is the distinguished face
/// {x . e1 >= M}; slabs only expose Front/Back; rectangles map their
/// e1 faces to Front/Back and everything else to Side.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitFace {
    Front,
    Back,
    Side,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum LatticeDomain {
    Box { d: usize, m: i64 },
    Slab(SlabSpec),
    Rect { lo: Vec<i64>, hi: Vec<i64> },
}

/// Largest |t| admitted transversally in a Box: the integer part of
/// (M^3 - 1)/4, i.e. |t| < M^3/4 over the integers.
pub fn box_transverse_max(m: i64) -> i64 {
    (m * m * m - 1).div_euclid(4)
}

impl LatticeDomain {
    pub fn boxed(d: usize, m: i64) -> Result<Self, DomainError> {
        if d < 2 || d > MAX_D {
            return Err(DomainError::Dimension(d));
        }
        if m < 1 {
            return Err(DomainError::BadExtent("box half-width must be >= 1"));
        }
        Ok(LatticeDomain::Box { d, m })
    }

    pub fn rect(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self, DomainError> {
        if lo.len() != hi.len() || lo.len() < 2 || lo.len() > MAX_D {
            return Err(DomainError::Dimension(lo.len()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(DomainError::BadExtent("rect needs lo <= hi on every axis"));
        }
        Ok(LatticeDomain::Rect { lo, hi })
    }

    pub fn d(&self) -> usize {
        match self {
            LatticeDomain::Box { d, .. } => *d,
            LatticeDomain::Slab(s) => s.d,
            LatticeDomain::Rect { lo, .. } => lo.len(),
        }
    }

    /// Interior membership (after folding, for slabs).
    pub fn contains(&self, s: &Site) -> bool {
        match self {
            LatticeDomain::Box { d, m } => {
                let t = box_transverse_max(*m);
                s.0[0].abs() <= m - 1 && (1..*d).all(|j| s.0[j].abs() <= t)
            }
            LatticeDomain::Slab(sp) => -sp.l <= s.0[0] && s.0[0] < sp.l,
            LatticeDomain::Rect { lo, hi } => {
                (0..lo.len()).all(|j| lo[j] <= s.0[j] && s.0[j] <= hi[j])
            }
        }
    }

    /// Canonical representative: slabs fold transverse coordinates into
    /// [0, W); other domains are unchanged.
    pub fn fold(&self, s: &Site) -> Site {
        match self {
            LatticeDomain::Slab(sp) => {
                let mut c = s.0;
                for j in 1..sp.d {
                    c[j] = c[j].rem_euclid(sp.w);
                }
                Site(c)
            }
            _ => *s,
        }
    }

    /// Number of interior states, if it fits in u64.
    pub fn states(&self) -> Option<u64> {
        match self {
            LatticeDomain::Box { d, m } => {
                let e1 = 2 * *m as u64 - 1;
                let tr = 2 * box_transverse_max(*m) as u64 + 1;
                let mut n = e1;
                for _ in 1..*d {
                    n = n.checked_mul(tr)?;
                }
                Some(n)
            }
            LatticeDomain::Slab(sp) => Some(sp.states()),
            LatticeDomain::Rect { lo, hi } => {
                let mut n: u64 = 1;
                for j in 0..lo.len() {
                    n = n.checked_mul((hi[j] - lo[j] + 1) as u64)?;
                }
                Some(n)
            }
        }
    }

    /// Canonical state index of an interior site (axis 0 slowest).
    pub fn index_of(&self, s: &Site) -> Option<usize> {
        let s = self.fold(s);
        if !self.contains(&s) {
            return None;
        }
        match self {
            LatticeDomain::Box { d, m } => {
                let t = box_transverse_max(*m);
                let width = (2 * t + 1) as usize;
                let mut idx = (s.0[0] + m - 1) as usize;
                for j in 1..*d {
                    idx = idx * width + (s.0[j] + t) as usize;
                }
                Some(idx)
            }
            LatticeDomain::Slab(sp) => {
                let mut idx = (s.0[0] + sp.l) as usize;
                for j in 1..sp.d {
                    idx = idx * sp.w as usize + s.0[j] as usize;
                }
                Some(idx)
            }
            LatticeDomain::Rect { lo, hi } => {
                let mut idx = 0usize;
                for j in 0..lo.len() {
                    idx = idx * (hi[j] - lo[j] + 1) as usize + (s.0[j] - lo[j]) as usize;
                }
                Some(idx)
            }
        }
    }

    /// Inverse of `index_of` on interior states.
    pub fn site_at(&self, mut idx: usize) -> Site {
        let mut c = [0i64; MAX_D];
        match self {
            LatticeDomain::Box { d, m } => {
                let t = box_transverse_max(*m);
                let width = (2 * t + 1) as usize;
                for j in (1..*d).rev() {
                    c[j] = (idx % width) as i64 - t;
                    idx /= width;
                }
                c[0] = idx as i64 - (m - 1);
            }
            LatticeDomain::Slab(sp) => {
                for j in (1..sp.d).rev() {
                    c[j] = (idx % sp.w as usize) as i64;
                    idx /= sp.w as usize;
                }
                c[0] = idx as i64 - sp.l;
            }
            LatticeDomain::Rect { lo, hi } => {
                for j in (0..lo.len()).rev() {
                    let w = (hi[j] - lo[j] + 1) as usize;
                    c[j] = (idx % w) as i64 + lo[j];
                    idx /= w;
                }
            }
        }
        Site(c)
    }

    /// Face label for a site just outside the interior.
    pub fn classify_exit(&self, s: &Site) -> ExitFace {
        match self {
            LatticeDomain::Box { m, .. } => {
                if s.0[0] >= *m {
                    ExitFace::Front
                } else if s.0[0] <= -m {
                    ExitFace::Back
                } else {
                    ExitFace::Side
                }
            }
            LatticeDomain::Slab(sp) => {
                if s.0[0] >= sp.l {
                    ExitFace::Front
                } else {
                    ExitFace::Back
                }
            }
            LatticeDomain::Rect { lo, hi } => {
                if s.0[0] > hi[0] {
                    ExitFace::Front
                } else if s.0[0] < lo[0] {
                    ExitFace::Back
                } else {
                    ExitFace::Side
                }
            }
        }
    }

    /// Exact expected exit time of the lazy symmetric e1-marginal from the
    /// e1-interval enclosing this domain, started at `x1`: the tight
    /// per-axis bound d * (x - a)(b - x) with absorbing points a, b.
    pub fn ssrw_e1_exit_time(&self, x1: i64) -> f64 {
        let d = self.d() as f64;
        let (a, b) = match self {
            LatticeDomain::Box { m, .. } => (-m, *m),
            LatticeDomain::Slab(sp) => (-sp.l - 1, sp.l),
            LatticeDomain::Rect { lo, hi } => (lo[0] - 1, hi[0] + 1),
        };
        d * (x1 - a) as f64 * (b - x1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_order_is_axis_major_positive_first() {
        let dirs: Vec<_> = Direction::all(2).collect();
        assert_eq!(dirs.len(), 4);
        assert_eq!((dirs[0].axis, dirs[0].positive), (0, true));
        assert_eq!((dirs[1].axis, dirs[1].positive), (0, false));
        assert_eq!((dirs[2].axis, dirs[2].positive), (1, true));
        assert_eq!((dirs[3].axis, dirs[3].positive), (1, false));
        for (i, dir) in dirs.iter().enumerate() {
            assert_eq!(dir.index(), i);
        }
    }

    #[test]
    fn box_extents_follow_cubic_rule() {
        // (-M, M) x (-M^3/4, M^3/4): integer interiors
        assert_eq!(box_transverse_max(2), 1);
        assert_eq!(box_transverse_max(3), 6); // 27/4 = 6.75
        assert_eq!(box_transverse_max(5), 31); // 125/4 = 31.25
        let b = LatticeDomain::boxed(2, 3).unwrap();
        assert_eq!(b.states(), Some(5 * 13));
        assert!(b.contains(&Site::from_coords(&[2, 6])));
        assert!(!b.contains(&Site::from_coords(&[3, 0])));
        assert!(!b.contains(&Site::from_coords(&[0, 7])));
    }

    #[test]
    fn box_exit_faces() {
        let b = LatticeDomain::boxed(2, 3).unwrap();
        assert_eq!(b.classify_exit(&Site::from_coords(&[3, 0])), ExitFace::Front);
        assert_eq!(b.classify_exit(&Site::from_coords(&[-3, 0])), ExitFace::Back);
        assert_eq!(b.classify_exit(&Site::from_coords(&[1, 7])), ExitFace::Side);
    }

    #[test]
    fn slab_fold_and_index_roundtrip() {
        let sp = SlabSpec::new(3, 2, 4).unwrap();
        let dom = LatticeDomain::Slab(sp);
        assert_eq!(dom.states(), Some(4 * 16));
        let s = Site::from_coords(&[1, -1, 9]);
        let f = dom.fold(&s);
        assert_eq!(&f.0[..3], &[1, 3, 1]);
        for idx in 0..64usize {
            let s = dom.site_at(idx);
            assert_eq!(dom.index_of(&s), Some(idx));
        }
    }

    #[test]
    fn slab_rejects_odd_or_thin_width() {
        assert!(SlabSpec::new(3, 2, 3).is_err());
        assert!(SlabSpec::new(3, 2, 0).is_err());
        assert!(SlabSpec::new(3, 0, 4).is_err());
    }

    #[test]
    fn rect_roundtrip_and_faces() {
        let dom = LatticeDomain::rect(vec![-2, -3], vec![2, 3]).unwrap();
        assert_eq!(dom.states(), Some(5 * 7));
        for idx in 0..35usize {
            let s = dom.site_at(idx);
            assert_eq!(dom.index_of(&s), Some(idx));
        }
        assert_eq!(dom.classify_exit(&Site::from_coords(&[3, 0])), ExitFace::Front);
        assert_eq!(dom.classify_exit(&Site::from_coords(&[0, 4])), ExitFace::Side);
    }

    #[test]
    fn e1_interval_time_matches_slab_identity() {
        // started at 0, slab: d * L(L+1)
        let dom = LatticeDomain::Slab(SlabSpec::new(4, 5, 4).unwrap());
        assert_eq!(dom.ssrw_e1_exit_time(0), 4.0 * 5.0 * 6.0);
    }
}
