//! Periodic square lattices in one or two dimensions.
//!
//! Sites are stored as canonical coordinates in `[0, m)` on every axis. The
//! global total order on sites is lexicographic (row-major) on those
//! coordinates; it fixes the tensor-leg order of every dense matrix in the
//! crate.

use std::collections::BTreeSet;
use std::fmt;

use crate::{Error, Result};

/// A lattice site. One-dimensional lattices keep the second coordinate at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Site(pub [usize; 2]);

impl Site {
    pub const ORIGIN: Site = Site([0, 0]);

    pub fn new_1d(x: usize) -> Self {
        Site([x, 0])
    }

    pub fn new_2d(x: usize, y: usize) -> Self {
        Site([x, y])
    }

    pub fn x(&self) -> usize {
        self.0[0]
    }

    pub fn y(&self) -> usize {
        self.0[1]
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.0[0], self.0[1])
    }
}

/// An ordered, duplicate-free set of sites. Iteration follows the global site
/// order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteSet(BTreeSet<Site>);

impl SiteSet {
    pub fn new() -> Self {
        Self(BTreeSet::new())
    }

    pub fn singleton(site: Site) -> Self {
        Self(BTreeSet::from([site]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.0.contains(site)
    }

    pub fn insert(&mut self, site: Site) -> bool {
        self.0.insert(site)
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &Site> + ExactSizeIterator + Clone {
        self.0.iter()
    }

    pub fn is_subset(&self, other: &SiteSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn union(&self, other: &SiteSet) -> SiteSet {
        SiteSet(self.0.union(&other.0).copied().collect())
    }

    pub fn difference(&self, other: &SiteSet) -> SiteSet {
        SiteSet(self.0.difference(&other.0).copied().collect())
    }

    pub fn is_disjoint(&self, other: &SiteSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    /// Position of `site` in the set order, i.e. its tensor leg.
    pub fn position(&self, site: &Site) -> Option<usize> {
        if !self.0.contains(site) {
            return None;
        }
        Some(self.0.range(..site).count())
    }
}

impl FromIterator<Site> for SiteSet {
    fn from_iter<I: IntoIterator<Item = Site>>(iter: I) -> Self {
        SiteSet(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a SiteSet {
    type Item = &'a Site;
    type IntoIter = std::collections::btree_set::Iter<'a, Site>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for SiteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "}}")
    }
}

/// Periodic lattice with `m` sites per axis and `n = m^dim` sites in total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lattice {
    dim: usize,
    extent: usize,
}

impl Lattice {
    pub fn new(dim: usize, extent: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidInput(format!("lattice dimension must be 1 or 2, got {dim}")));
        }
        if extent == 0 {
            return Err(Error::InvalidInput("lattice extent must be positive".into()));
        }
        Ok(Self { dim, extent })
    }

    pub fn chain(extent: usize) -> Result<Self> {
        Self::new(1, extent)
    }

    pub fn square(extent: usize) -> Result<Self> {
        Self::new(2, extent)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> usize {
        self.extent
    }

    pub fn num_sites(&self) -> usize {
        self.extent.pow(self.dim as u32)
    }

    /// Reduces arbitrary integer coordinates to the canonical site.
    pub fn site(&self, coords: &[i64]) -> Result<Site> {
        if coords.len() != self.dim {
            return Err(Error::LatticeMismatch(format!("expected {} coordinates, got {}", self.dim, coords.len())));
        }
        let m = self.extent as i64;
        let mut c = [0usize; 2];
        for (slot, &v) in c.iter_mut().zip(coords) {
            *slot = v.rem_euclid(m) as usize;
        }
        Ok(Site(c))
    }

    /// Checks that `site` is a canonical site of this lattice.
    pub fn check(&self, site: &Site) -> Result<()> {
        let ok = site.0[0] < self.extent && if self.dim == 1 { site.0[1] == 0 } else { site.0[1] < self.extent };
        if ok {
            Ok(())
        } else {
            Err(Error::LatticeMismatch(format!(
                "site {site} does not belong to a {}-dimensional lattice of extent {}",
                self.dim, self.extent
            )))
        }
    }

    pub fn check_set(&self, set: &SiteSet) -> Result<()> {
        set.iter().try_for_each(|s| self.check(s))
    }

    /// All sites in the global order.
    pub fn sites(&self) -> SiteSet {
        let m = self.extent;
        match self.dim {
            1 => (0..m).map(Site::new_1d).collect(),
            _ => (0..m).flat_map(|x| (0..m).map(move |y| Site::new_2d(x, y))).collect(),
        }
    }

    /// Unit vector along `axis`.
    pub fn unit(&self, axis: usize) -> Site {
        let mut c = [0usize; 2];
        c[axis] = 1 % self.extent;
        Site(c)
    }

    pub fn add(&self, a: &Site, b: &Site) -> Site {
        let m = self.extent;
        let mut c = [(a.0[0] + b.0[0]) % m, 0];
        if self.dim == 2 {
            c[1] = (a.0[1] + b.0[1]) % m;
        }
        Site(c)
    }

    pub fn neg(&self, a: &Site) -> Site {
        let m = self.extent;
        let mut c = [(m - a.0[0] % m) % m, 0];
        if self.dim == 2 {
            c[1] = (m - a.0[1] % m) % m;
        }
        Site(c)
    }

    /// Wrap-around ℓ₁ graph distance.
    pub fn distance(&self, a: &Site, b: &Site) -> Result<usize> {
        self.check(a)?;
        self.check(b)?;
        let m = self.extent;
        Ok((0..self.dim)
            .map(|k| {
                let d = a.0[k].abs_diff(b.0[k]);
                d.min(m - d)
            })
            .sum())
    }

    /// Sites within graph distance `radius` of `center`.
    pub fn ball(&self, center: &Site, radius: usize) -> Result<SiteSet> {
        self.check(center)?;
        if radius >= self.extent {
            return Err(Error::InvalidInput(format!(
                "ball radius {radius} must be below the lattice extent {}",
                self.extent
            )));
        }
        let mut out = SiteSet::new();
        for s in self.sites().iter() {
            if self.distance(center, s)? <= radius {
                out.insert(*s);
            }
        }
        Ok(out)
    }

    /// Componentwise mod-m sums `{x + y}`.
    pub fn sumset(&self, a: &SiteSet, b: &SiteSet) -> Result<SiteSet> {
        self.check_set(a)?;
        self.check_set(b)?;
        Ok(a.iter().flat_map(|x| b.iter().map(move |y| self.add(x, y))).collect())
    }

    pub fn translate(&self, set: &SiteSet, shift: &Site) -> Result<SiteSet> {
        self.check_set(set)?;
        self.check(shift)?;
        Ok(set.iter().map(|x| self.add(x, shift)).collect())
    }

    /// Row-major linear index of a site.
    pub fn index(&self, site: &Site) -> usize {
        site.0[0] * if self.dim == 2 { self.extent } else { 1 } + site.0[1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        let l = Lattice::chain(8).unwrap();
        assert_eq!(l.distance(&Site::new_1d(0), &Site::new_1d(7)).unwrap(), 1);
        let l2 = Lattice::square(5).unwrap();
        assert_eq!(l2.distance(&Site::new_2d(0, 0), &Site::new_2d(2, 3)).unwrap(), 4);
        for s in l2.sites().iter() {
            assert_eq!(l2.distance(s, s).unwrap(), 0);
        }
    }

    #[test]
    fn distance_rejects_foreign_sites() {
        let l = Lattice::chain(4).unwrap();
        assert!(l.distance(&Site::new_1d(0), &Site::new_1d(4)).is_err());
        assert!(l.distance(&Site::new_1d(0), &Site::new_2d(1, 1)).is_err());
    }

    #[test]
    fn ball_sizes() {
        let l2 = Lattice::square(9).unwrap();
        assert_eq!(l2.ball(&Site::ORIGIN, 2).unwrap().len(), 13);
        let l1 = Lattice::chain(9).unwrap();
        assert_eq!(l1.ball(&Site::ORIGIN, 2).unwrap().len(), 5);
        assert_eq!(l1.ball(&Site::new_1d(4), 0).unwrap(), SiteSet::singleton(Site::new_1d(4)));
        assert!(l1.ball(&Site::ORIGIN, 9).is_err());
    }

    #[test]
    fn ball_closed_form_in_2d() {
        for m in [5, 7, 9] {
            let l = Lattice::square(m).unwrap();
            for a in 0..m {
                if 2 * a < m {
                    assert_eq!(l.ball(&Site::ORIGIN, a).unwrap().len(), 1 + 2 * a * (a + 1));
                }
            }
            assert_eq!(l.ball(&Site::ORIGIN, m - 1).unwrap(), l.sites());
        }
    }

    #[test]
    fn sumset_examples() {
        let l = Lattice::chain(4).unwrap();
        let s3 = SiteSet::singleton(Site::new_1d(3));
        let s1 = SiteSet::singleton(Site::new_1d(1));
        assert_eq!(l.sumset(&s3, &s1).unwrap(), SiteSet::singleton(Site::ORIGIN));

        let l8 = Lattice::chain(8).unwrap();
        let pair: SiteSet = [Site::new_1d(0), Site::new_1d(1)].into_iter().collect();
        let want: SiteSet = (0..3).map(Site::new_1d).collect();
        assert_eq!(l8.sumset(&pair, &pair).unwrap(), want);
        let origin = SiteSet::singleton(Site::ORIGIN);
        assert_eq!(l8.sumset(&origin, &pair).unwrap(), pair);
    }

    #[test]
    fn translate_examples() {
        let l = Lattice::square(3).unwrap();
        let x = SiteSet::singleton(Site::new_2d(2, 2));
        assert_eq!(l.translate(&x, &Site::new_2d(1, 1)).unwrap(), SiteSet::singleton(Site::ORIGIN));
        assert_eq!(l.translate(&x, &Site::ORIGIN).unwrap(), x);

        let l5 = Lattice::square(5).unwrap();
        let j = Site::new_2d(3, 1);
        let b0 = l5.ball(&Site::ORIGIN, 2).unwrap();
        assert_eq!(l5.translate(&b0, &j).unwrap(), l5.ball(&j, 2).unwrap());
    }

    #[test]
    fn triangle_inequality_exhaustive() {
        for dim in 1..=2 {
            for m in 1..=6 {
                let l = Lattice::new(dim, m).unwrap();
                let sites: Vec<Site> = l.sites().iter().copied().collect();
                for a in &sites {
                    for b in &sites {
                        let ab = l.distance(a, b).unwrap();
                        assert_eq!(ab, l.distance(b, a).unwrap());
                        assert_eq!(ab == 0, a == b);
                        for c in &sites {
                            assert!(l.distance(a, c).unwrap() <= ab + l.distance(b, c).unwrap());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn balls_nest_and_are_translation_invariant() {
        for dim in 1..=2 {
            for m in 2..=6 {
                let l = Lattice::new(dim, m).unwrap();
                for a in 0..m - 1 {
                    let b = l.ball(&Site::ORIGIN, a).unwrap();
                    assert!(b.is_subset(&l.ball(&Site::ORIGIN, a + 1).unwrap()));
                    for c in l.sites().iter() {
                        assert_eq!(l.ball(c, a).unwrap().len(), b.len());
                    }
                }
            }
        }
    }

    #[test]
    fn sumset_of_balls() {
        for dim in 1..=2 {
            for m in 4..=9 {
                let l = Lattice::new(dim, m).unwrap();
                for a in 0..m {
                    for b in 0..m {
                        if a + b < m / 2 {
                            let sum = l
                                .sumset(&l.ball(&Site::ORIGIN, a).unwrap(), &l.ball(&Site::ORIGIN, b).unwrap())
                                .unwrap();
                            assert_eq!(sum, l.ball(&Site::ORIGIN, a + b).unwrap());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn position_follows_row_major_order() {
        let l = Lattice::square(3).unwrap();
        let all = l.sites();
        for (k, s) in all.iter().enumerate() {
            assert_eq!(all.position(s), Some(k));
            assert_eq!(l.index(s), k);
        }
    }
}
