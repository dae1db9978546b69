//! Pauli-string operators with tracked support, and their dense realization on
//! finite site windows.
//!
//! Dense matrices use the window's site order for tensor legs: the first site
//! of the window is the most significant bit of the basis index. Basis state
//! `0` on a leg is spin up (`σ^z = +1`).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use faer::Mat;

use crate::lattice::{Lattice, Site, SiteSet};
use crate::linalg::{self, CMat, ONE, ZERO};
use crate::{c64, Error, Result};

/// Coefficients at or below this magnitude are dropped when supports are
/// recomputed.
pub const CANCEL_THRESHOLD: f64 = 1e-14;

/// Largest window that may be realized densely.
pub const MAX_DENSE_SITES: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(k: usize) -> Option<Pauli> {
        [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z].get(k).copied()
    }

    pub fn from_char(c: char) -> Option<Pauli> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        ['I', 'X', 'Y', 'Z'][self.index()]
    }

    /// `self · other = phase · result`.
    pub fn product(self, other: Pauli) -> (c64, Pauli) {
        use Pauli::*;
        let i = linalg::I;
        match (self, other) {
            (I, p) | (p, I) => (ONE, p),
            (a, b) if a == b => (ONE, I),
            (X, Y) => (i, Z),
            (Y, X) => (-i, Z),
            (Y, Z) => (i, X),
            (Z, Y) => (-i, X),
            (Z, X) => (i, Y),
            (X, Z) => (-i, Y),
            _ => unreachable!(),
        }
    }
}

/// A weighted tensor product of single-site Paulis. Identity factors are
/// never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliString {
    ops: BTreeMap<Site, Pauli>,
    coeff: c64,
}

impl PauliString {
    /// Builds a string, multiplying factors that land on the same site.
    pub fn new(coeff: c64, factors: impl IntoIterator<Item = (Site, Pauli)>) -> Self {
        let mut ops = BTreeMap::new();
        let mut coeff = coeff;
        for (site, p) in factors {
            let cur = ops.remove(&site).unwrap_or(Pauli::I);
            let (phase, q) = cur.product(p);
            coeff *= phase;
            if q != Pauli::I {
                ops.insert(site, q);
            }
        }
        Self { ops, coeff }
    }

    pub fn identity(coeff: c64) -> Self {
        Self { ops: BTreeMap::new(), coeff }
    }

    pub fn single(site: Site, p: Pauli) -> Self {
        Self::new(ONE, [(site, p)])
    }

    pub fn coeff(&self) -> c64 {
        self.coeff
    }

    pub fn ops(&self) -> impl Iterator<Item = (&Site, &Pauli)> {
        self.ops.iter()
    }

    pub fn support(&self) -> SiteSet {
        self.ops.keys().copied().collect()
    }

    pub fn scaled(&self, c: c64) -> Self {
        Self { ops: self.ops.clone(), coeff: self.coeff * c }
    }

    pub fn mul(&self, other: &PauliString) -> PauliString {
        let factors = self.ops.iter().chain(other.ops.iter()).map(|(s, p)| (*s, *p));
        PauliString::new(self.coeff * other.coeff, factors)
    }

    fn word(&self) -> Vec<(Site, Pauli)> {
        self.ops.iter().map(|(s, p)| (*s, *p)).collect()
    }

    /// Bit masks of this string on `window`: `(flip, phase_mask, y_count)`.
    fn masks(&self, window: &SiteSet) -> Result<(usize, usize, usize)> {
        let k = window.len();
        let (mut x, mut z, mut ny) = (0usize, 0usize, 0usize);
        for (site, p) in &self.ops {
            let pos = window.position(site).ok_or_else(|| Error::SupportNotContained {
                support: self.support().to_string(),
                window: window.to_string(),
            })?;
            let bit = 1usize << (k - 1 - pos);
            match p {
                Pauli::X => x |= bit,
                Pauli::Y => {
                    x |= bit;
                    z |= bit;
                    ny += 1;
                }
                Pauli::Z => z |= bit,
                Pauli::I => {}
            }
        }
        Ok((x, z, ny))
    }
}

fn i_pow(k: usize) -> c64 {
    [ONE, linalg::I, -ONE, -linalg::I][k % 4]
}

/// A finite sum of Pauli strings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LocalOperator {
    terms: BTreeMap<Vec<(Site, Pauli)>, c64>,
}

impl LocalOperator {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::from_strings([PauliString::identity(ONE)])
    }

    pub fn single(site: Site, p: Pauli) -> Self {
        Self::from_strings([PauliString::single(site, p)])
    }

    pub fn from_strings(strings: impl IntoIterator<Item = PauliString>) -> Self {
        let mut op = Self::zero();
        for s in strings {
            op.push(s);
        }
        op
    }

    pub fn push(&mut self, s: PauliString) {
        let entry = self.terms.entry(s.word()).or_insert(ZERO);
        *entry += s.coeff;
    }

    pub fn strings(&self) -> impl Iterator<Item = PauliString> + '_ {
        self.terms
            .iter()
            .filter(|(_, c)| c.norm() > CANCEL_THRESHOLD)
            .map(|(w, c)| PauliString { ops: w.iter().copied().collect(), coeff: *c })
    }

    pub fn num_strings(&self) -> usize {
        self.strings().count()
    }

    pub fn is_zero(&self) -> bool {
        self.num_strings() == 0
    }

    /// Union of the supports of all strings with non-negligible weight.
    pub fn support(&self) -> SiteSet {
        self.terms
            .iter()
            .filter(|(_, c)| c.norm() > CANCEL_THRESHOLD)
            .flat_map(|(w, _)| w.iter().map(|(s, _)| *s))
            .collect()
    }

    pub fn add(&self, other: &LocalOperator) -> LocalOperator {
        let mut out = self.clone();
        for s in other.strings() {
            out.push(s);
        }
        out.pruned()
    }

    pub fn sub(&self, other: &LocalOperator) -> LocalOperator {
        self.add(&other.scale(-ONE))
    }

    pub fn scale(&self, c: c64) -> LocalOperator {
        Self::from_strings(self.strings().map(|s| s.scaled(c))).pruned()
    }

    pub fn mul(&self, other: &LocalOperator) -> LocalOperator {
        let mut out = Self::zero();
        for a in self.strings() {
            for b in other.strings() {
                out.push(a.mul(&b));
            }
        }
        out.pruned()
    }

    fn pruned(mut self) -> Self {
        self.terms.retain(|_, c| c.norm() > CANCEL_THRESHOLD);
        self
    }

    /// Pauli strings are Hermitian, so the sum is Hermitian iff every weight
    /// is real.
    pub fn ensure_hermitian(&self) -> Result<()> {
        let worst = self.strings().map(|s| s.coeff.im.abs()).fold(0.0, f64::max);
        if worst > CANCEL_THRESHOLD {
            Err(Error::NotHermitian(worst))
        } else {
            Ok(())
        }
    }

    /// Sum of absolute weights, an upper bound on the operator norm.
    pub fn weight_norm(&self) -> f64 {
        self.strings().map(|s| s.coeff.norm()).sum()
    }

    /// Shifts every site by `shift` (mod the lattice extent).
    pub fn translate(&self, lattice: &Lattice, shift: &Site) -> Result<LocalOperator> {
        lattice.check(shift)?;
        let mut out = Self::zero();
        for s in self.strings() {
            for site in s.ops.keys() {
                lattice.check(site)?;
            }
            out.push(PauliString {
                ops: s.ops.iter().map(|(site, p)| (lattice.add(site, shift), *p)).collect(),
                coeff: s.coeff,
            });
        }
        Ok(out)
    }

    /// Dense matrix on `window`, identity on the legs outside the support.
    pub fn embed(&self, window: &SiteSet) -> Result<DenseOperator> {
        check_cap(window.len())?;
        let dim = 1usize << window.len();
        let mut m = Mat::<c64>::zeros(dim, dim);
        for s in self.strings() {
            let (x, z, ny) = s.masks(window)?;
            let c = s.coeff * i_pow(ny);
            for b in 0..dim {
                let sign = if (b & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                m[(b ^ x, b)] += c * sign;
            }
        }
        DenseOperator::new(window.clone(), m)
    }

    /// One string per line: `re im site:axis ...`. Sites are written as `x` on
    /// chains and `x,y` on square lattices.
    pub fn to_text(&self, lattice: &Lattice) -> String {
        let mut out = String::new();
        for s in self.strings() {
            write!(out, "{:?} {:?}", s.coeff.re, s.coeff.im).unwrap();
            for (site, p) in &s.ops {
                if lattice.dim() == 1 {
                    write!(out, " {}:{}", site.x(), p.as_char()).unwrap();
                } else {
                    write!(out, " {},{}:{}", site.x(), site.y(), p.as_char()).unwrap();
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parses the format written by [`LocalOperator::to_text`]. Blank lines and
    /// `#` comments are ignored; coordinates are reduced mod the extent.
    pub fn parse_text(text: &str, lattice: &Lattice) -> Result<LocalOperator> {
        let mut op = Self::zero();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Config(format!("operator line {}: {what}: `{raw}`", lineno + 1));
            let mut tok = line.split_whitespace();
            let re: f64 = tok.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad real part"))?;
            let im: f64 = tok.next().and_then(|t| t.parse().ok()).ok_or_else(|| bad("bad imaginary part"))?;
            let mut factors = Vec::new();
            for t in tok {
                let (site, axis) = t.split_once(':').ok_or_else(|| bad("expected site:axis"))?;
                let coords: Vec<i64> = site
                    .split(',')
                    .map(|c| c.trim().parse::<i64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("bad site coordinates"))?;
                let site = lattice.site(&coords).map_err(|_| bad("wrong number of coordinates"))?;
                let mut chars = axis.chars();
                let p = match (chars.next().and_then(Pauli::from_char), chars.next()) {
                    (Some(p), None) => p,
                    _ => return Err(bad("axis must be one of I, X, Y, Z")),
                };
                factors.push((site, p));
            }
            op.push(PauliString::new(c64::new(re, im), factors));
        }
        Ok(op.pruned())
    }
}

fn check_cap(sites: usize) -> Result<()> {
    if sites > MAX_DENSE_SITES {
        Err(Error::WindowCap { sites, cap: MAX_DENSE_SITES })
    } else {
        Ok(())
    }
}

/// A dense square matrix acting on the window `W`, dimension `2^|W|`.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    window: SiteSet,
    matrix: CMat,
}

impl DenseOperator {
    pub fn new(window: SiteSet, matrix: CMat) -> Result<Self> {
        check_cap(window.len())?;
        let dim = 1usize << window.len();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::InvalidInput(format!(
                "matrix of shape {}x{} does not match window of {} sites",
                matrix.nrows(),
                matrix.ncols(),
                window.len()
            )));
        }
        Ok(Self { window, matrix })
    }

    pub fn zeros(window: &SiteSet) -> Result<Self> {
        check_cap(window.len())?;
        let dim = 1usize << window.len();
        Self::new(window.clone(), Mat::zeros(dim, dim))
    }

    pub fn identity(window: &SiteSet) -> Result<Self> {
        check_cap(window.len())?;
        Self::new(window.clone(), linalg::identity(1usize << window.len()))
    }

    pub fn window(&self) -> &SiteSet {
        &self.window
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Tensors with the identity on `target ∖ window`.
    pub fn embed_into(&self, target: &SiteSet) -> Result<DenseOperator> {
        if !self.window.is_subset(target) {
            return Err(Error::SupportNotContained { support: self.window.to_string(), window: target.to_string() });
        }
        if &self.window == target {
            return Ok(self.clone());
        }
        check_cap(target.len())?;
        let kd = target.len();
        let place = |sites: &SiteSet| -> Vec<usize> {
            let k = sites.len();
            let bits: Vec<usize> = sites.iter().map(|s| 1usize << (kd - 1 - target.position(s).unwrap())).collect();
            (0..1usize << k).map(|x| (0..k).filter(|&i| x & (1 << (k - 1 - i)) != 0).map(|i| bits[i]).sum()).collect()
        };
        let inner = place(&self.window);
        let outer = place(&target.difference(&self.window));
        let dim = 1usize << kd;
        let mut m = Mat::<c64>::zeros(dim, dim);
        let src = &self.matrix;
        for &r in &outer {
            for (b, &cb) in inner.iter().enumerate() {
                for (a, &ca) in inner.iter().enumerate() {
                    m[(r | ca, r | cb)] = src[(a, b)];
                }
            }
        }
        DenseOperator::new(target.clone(), m)
    }

    fn aligned(&self, rhs: &DenseOperator) -> Result<(DenseOperator, DenseOperator)> {
        if self.window == rhs.window {
            return Ok((self.clone(), rhs.clone()));
        }
        let w = self.window.union(&rhs.window);
        Ok((self.embed_into(&w)?, rhs.embed_into(&w)?))
    }

    fn same_window(&self, rhs: &DenseOperator) -> Result<()> {
        if self.window == rhs.window {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("window mismatch: {} vs {}", self.window, rhs.window)))
        }
    }

    /// Product, embedding both factors into the union window if needed.
    pub fn multiply(&self, rhs: &DenseOperator) -> Result<DenseOperator> {
        let (a, b) = self.aligned(rhs)?;
        a.multiply_strict(&b)
    }

    pub fn multiply_strict(&self, rhs: &DenseOperator) -> Result<DenseOperator> {
        self.same_window(rhs)?;
        Ok(Self { window: self.window.clone(), matrix: &self.matrix * &rhs.matrix })
    }

    /// `AB − BA`, auto-embedding as in [`DenseOperator::multiply`].
    pub fn commutator(&self, rhs: &DenseOperator) -> Result<DenseOperator> {
        let (a, b) = self.aligned(rhs)?;
        a.commutator_strict(&b)
    }

    pub fn commutator_strict(&self, rhs: &DenseOperator) -> Result<DenseOperator> {
        self.same_window(rhs)?;
        let m = &self.matrix * &rhs.matrix - &rhs.matrix * &self.matrix;
        Ok(Self { window: self.window.clone(), matrix: m })
    }

    pub fn dagger(&self) -> DenseOperator {
        Self { window: self.window.clone(), matrix: self.matrix.adjoint().to_owned() }
    }

    pub fn add(&self, rhs: &DenseOperator) -> Result<DenseOperator> {
        let (a, b) = self.aligned(rhs)?;
        Ok(Self { window: a.window, matrix: a.matrix + b.matrix })
    }

    pub fn sub(&self, rhs: &DenseOperator) -> Result<DenseOperator> {
        let (a, b) = self.aligned(rhs)?;
        Ok(Self { window: a.window, matrix: a.matrix - b.matrix })
    }

    pub fn scale(&self, c: c64) -> DenseOperator {
        let n = self.dim();
        Self { window: self.window.clone(), matrix: Mat::from_fn(n, n, |i, j| self.matrix[(i, j)] * c) }
    }

    /// Largest singular value.
    pub fn op_norm(&self) -> Result<f64> {
        linalg::op_norm(self.matrix.as_ref())
    }

    /// `max |λ|`; only meaningful for Hermitian operators.
    pub fn hermitian_norm(&self) -> Result<f64> {
        linalg::hermitian_norm(self.matrix.as_ref())
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(self.matrix.as_ref())
    }

    /// Largest absolute entry difference after aligning windows.
    pub fn max_abs_diff(&self, rhs: &DenseOperator) -> Result<f64> {
        let (a, b) = self.aligned(rhs)?;
        Ok(linalg::max_abs_diff(a.matrix.as_ref(), b.matrix.as_ref()))
    }

    /// `‖A − B‖` in operator norm after aligning windows.
    pub fn distance(&self, rhs: &DenseOperator) -> Result<f64> {
        self.sub(rhs)?.op_norm()
    }

    /// `⟨ψ|A|ψ⟩`.
    pub fn expectation(&self, psi: &[c64]) -> c64 {
        let n = self.dim();
        let mut acc = ZERO;
        for j in 0..n {
            if psi[j] == ZERO {
                continue;
            }
            let col: c64 = psi.iter().enumerate().map(|(i, p)| p.conj() * self.matrix[(i, j)]).sum();
            acc += col * psi[j];
        }
        acc
    }

    /// `P · A` for a Pauli string supported inside the window, in `O(dim²)`.
    pub fn pauli_left(&self, p: &PauliString) -> Result<DenseOperator> {
        let (x, z, ny) = p.masks(&self.window)?;
        let c = p.coeff * i_pow(ny);
        let n = self.dim();
        let mut m = Mat::<c64>::zeros(n, n);
        for col in 0..n {
            for b in 0..n {
                let sign = if (b & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                m[(b ^ x, col)] = self.matrix[(b, col)] * c * sign;
            }
        }
        DenseOperator::new(self.window.clone(), m)
    }

    /// `A · P` for a Pauli string supported inside the window.
    pub fn pauli_right(&self, p: &PauliString) -> Result<DenseOperator> {
        let (x, z, ny) = p.masks(&self.window)?;
        let c = p.coeff * i_pow(ny);
        let n = self.dim();
        let mut m = Mat::<c64>::zeros(n, n);
        for b in 0..n {
            let sign = if (b & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            for row in 0..n {
                m[(row, b)] = self.matrix[(row, b ^ x)] * c * sign;
            }
        }
        DenseOperator::new(self.window.clone(), m)
    }

    /// The same operator moved by `shift`: the leg of site `x` becomes the leg
    /// of `x + shift`, reordered to the global site order.
    pub fn translate(&self, lattice: &Lattice, shift: &Site) -> Result<DenseOperator> {
        let target = lattice.translate(&self.window, shift)?;
        let k = self.window.len();
        let new_bits: Vec<usize> =
            self.window.iter().map(|s| 1usize << (k - 1 - target.position(&lattice.add(s, shift)).unwrap())).collect();
        let perm: Vec<usize> = (0..1usize << k)
            .map(|x| (0..k).filter(|&i| x & (1 << (k - 1 - i)) != 0).map(|i| new_bits[i]).sum())
            .collect();
        let n = self.dim();
        let mut m = Mat::<c64>::zeros(n, n);
        for b in 0..n {
            for a in 0..n {
                m[(perm[a], perm[b])] = self.matrix[(a, b)];
            }
        }
        DenseOperator::new(target, m)
    }
}
