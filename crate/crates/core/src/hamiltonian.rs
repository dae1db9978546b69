//! Parametrised Hamiltonians `H(s) = Σ_j (h0_j + s h'_j)`, their restrictions
//! to regions, and ground-state spectra.

use std::collections::BTreeMap;

use crate::lattice::{Lattice, Site, SiteSet};
use crate::linalg;
use crate::operators::{DenseOperator, LocalOperator, Pauli, PauliString};
use crate::{c64, Error, Result};

/// Ground states with a gap below this are treated as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

/// The interaction at the origin, `h(s) = h0 + s h'`.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    h0: LocalOperator,
    hprime: LocalOperator,
}

impl Interaction {
    /// Both parts must be Hermitian. Unless both vanish, the origin must lie in
    /// the joint support.
    pub fn new(h0: LocalOperator, hprime: LocalOperator) -> Result<Self> {
        h0.ensure_hermitian()?;
        hprime.ensure_hermitian()?;
        let support = h0.support().union(&hprime.support());
        if !support.is_empty() && !support.contains(&Site::ORIGIN) {
            return Err(Error::InvalidInput(format!("interaction support {support} does not contain the origin")));
        }
        Ok(Self { h0, hprime })
    }

    /// `h0 = -σ^z_0`, `h' = λ Σ_axes σ^x_0 σ^x_{ê}`.
    pub fn perturbed_classical(lattice: &Lattice, lambda: f64) -> Self {
        let o = Site::ORIGIN;
        let h0 = LocalOperator::from_strings([PauliString::new(c64::new(-1.0, 0.0), [(o, Pauli::Z)])]);
        let hprime = LocalOperator::from_strings(
            (0..lattice.dim())
                .map(|axis| PauliString::new(c64::new(lambda, 0.0), [(o, Pauli::X), (lattice.unit(axis), Pauli::X)])),
        );
        Self { h0, hprime }
    }

    pub fn h0(&self) -> &LocalOperator {
        &self.h0
    }

    pub fn hprime(&self) -> &LocalOperator {
        &self.hprime
    }

    pub fn at(&self, s: f64) -> LocalOperator {
        self.h0.add(&self.hprime.scale(c64::new(s, 0.0)))
    }

    pub fn support(&self) -> SiteSet {
        self.h0.support().union(&self.hprime.support())
    }

    /// Sum of absolute Pauli weights of `h0` and `h'`.
    pub fn weight_norms(&self) -> (f64, f64) {
        (self.h0.weight_norm(), self.hprime.weight_norm())
    }
}

/// `H(s)` on a periodic lattice, generated by translating an interaction with
/// optional per-site replacements.
#[derive(Debug, Clone)]
pub struct ParamHamiltonian {
    lattice: Lattice,
    interaction: Interaction,
    overrides: BTreeMap<Site, Interaction>,
}

impl ParamHamiltonian {
    pub fn new(lattice: Lattice, interaction: Interaction) -> Result<Self> {
        lattice.check_set(&interaction.support())?;
        Ok(Self { lattice, interaction, overrides: BTreeMap::new() })
    }

    pub fn perturbed_classical(lattice: Lattice, lambda: f64) -> Self {
        Self { lattice, interaction: Interaction::perturbed_classical(&lattice, lambda), overrides: BTreeMap::new() }
    }

    /// Replaces the term at `site` by `interaction` translated to `site`.
    pub fn with_override(mut self, site: Site, interaction: Interaction) -> Result<Self> {
        self.lattice.check(&site)?;
        self.lattice.check_set(&interaction.support())?;
        self.overrides.insert(site, interaction);
        Ok(self)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn interaction(&self) -> &Interaction {
        &self.interaction
    }

    /// `2 Σ_j (‖h0_j‖ + ‖h'_j‖)` in Pauli weights, bounding the spectral
    /// spread of `H(s)` for `s ∈ [0, 1]`.
    pub fn spread_bound(&self) -> f64 {
        let per_site = |i: &Interaction| {
            let (a, b) = i.weight_norms();
            a + b
        };
        let base = (self.lattice.num_sites() - self.overrides.len()) as f64 * per_site(&self.interaction);
        2.0 * (base + self.overrides.values().map(per_site).sum::<f64>())
    }

    pub fn is_translation_invariant(&self) -> bool {
        self.overrides.is_empty()
    }

    fn interaction_at(&self, j: &Site) -> &Interaction {
        self.overrides.get(j).unwrap_or(&self.interaction)
    }

    pub fn h0_term(&self, j: &Site) -> Result<LocalOperator> {
        self.interaction_at(j).h0.translate(&self.lattice, j)
    }

    pub fn hprime_term(&self, j: &Site) -> Result<LocalOperator> {
        self.interaction_at(j).hprime.translate(&self.lattice, j)
    }

    pub fn term(&self, j: &Site, s: f64) -> Result<LocalOperator> {
        self.interaction_at(j).at(s).translate(&self.lattice, j)
    }

    /// Support of `h_j(s)` for generic `s`.
    pub fn term_support(&self, j: &Site) -> Result<SiteSet> {
        self.lattice.translate(&self.interaction_at(j).support(), j)
    }

    /// Window on which `H_region` acts: the union of its term supports. For a
    /// translation-invariant model this is `region + supp(h)`.
    pub fn window(&self, region: &SiteSet) -> Result<SiteSet> {
        let mut w = SiteSet::new();
        for j in region {
            w = w.union(&self.term_support(j)?);
        }
        Ok(w)
    }

    /// `(Σ h0_j, Σ h'_j)` over `region` as Pauli sums.
    pub fn region_parts(&self, region: &SiteSet) -> Result<(LocalOperator, LocalOperator)> {
        self.lattice.check_set(region)?;
        let mut h0 = LocalOperator::zero();
        let mut hp = LocalOperator::zero();
        for j in region {
            h0 = h0.add(&self.h0_term(j)?);
            hp = hp.add(&self.hprime_term(j)?);
        }
        Ok((h0, hp))
    }

    /// `H_region(s)` realized on its own window.
    pub fn assemble(&self, s: f64, region: &SiteSet) -> Result<DenseOperator> {
        let window = self.window(region)?;
        self.assemble_on(s, region, &window)
    }

    /// `H_region(s)` realized on a window containing its support.
    pub fn assemble_on(&self, s: f64, region: &SiteSet, window: &SiteSet) -> Result<DenseOperator> {
        let (h0, hp) = self.region_parts(region)?;
        h0.add(&hp.scale(c64::new(s, 0.0))).embed(window)
    }

    /// Dense `(H0_region, H'_region)` on `window`, for repeated assembly at
    /// many `s`.
    pub fn dense_parts(&self, region: &SiteSet, window: &SiteSet) -> Result<(DenseOperator, DenseOperator)> {
        let (h0, hp) = self.region_parts(region)?;
        Ok((h0.embed(window)?, hp.embed(window)?))
    }

    pub fn restrict(&self, s: f64, region: &SiteSet) -> Result<RestrictedHamiltonian> {
        let dense = self.assemble(s, region)?;
        Ok(RestrictedHamiltonian { region: region.clone(), s, dense })
    }

    /// `H(s)` on the whole lattice.
    pub fn full(&self, s: f64) -> Result<DenseOperator> {
        let all = self.lattice.sites();
        self.assemble_on(s, &all, &all)
    }

    /// Parses a model file: `key=value` header lines (`dim`, `m`, `lambda`)
    /// followed by `[h0]` and `[hprime]` sections in the operator text format.
    /// `h'` is scaled by `lambda`. Returns the Hamiltonian and `lambda`.
    pub fn parse_model(text: &str) -> Result<(Self, f64)> {
        let mut header: BTreeMap<String, String> = BTreeMap::new();
        let mut sections: BTreeMap<String, String> = BTreeMap::new();
        let mut current: Option<String> = None;
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim().to_string();
                if name != "h0" && name != "hprime" {
                    return Err(Error::Config(format!("unknown model section [{name}]")));
                }
                sections.entry(name.clone()).or_default();
                current = Some(name);
                continue;
            }
            match &current {
                Some(name) => {
                    let body = sections.get_mut(name).unwrap();
                    body.push_str(line);
                    body.push('\n');
                }
                None => {
                    for part in line.split(',') {
                        let (k, v) = part
                            .split_once('=')
                            .ok_or_else(|| Error::Config(format!("bad model header entry `{}`", part.trim())))?;
                        header.insert(k.trim().to_string(), v.trim().to_string());
                    }
                }
            }
        }
        let get = |k: &str| header.get(k).ok_or_else(|| Error::Config(format!("model header is missing `{k}`")));
        if let Some(k) = header.keys().find(|k| !["dim", "m", "lambda"].contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown model header key `{k}`")));
        }
        let dim: usize = get("dim")?.parse().map_err(|_| Error::Config("model `dim` must be an integer".into()))?;
        let m: usize = get("m")?.parse().map_err(|_| Error::Config("model `m` must be an integer".into()))?;
        let lambda: f64 =
            get("lambda")?.parse().map_err(|_| Error::Config("model `lambda` must be a number".into()))?;
        let lattice = Lattice::new(dim, m).map_err(|e| Error::Config(e.to_string()))?;
        let h0 = LocalOperator::parse_text(sections.get("h0").map(String::as_str).unwrap_or(""), &lattice)?;
        let hp = LocalOperator::parse_text(sections.get("hprime").map(String::as_str).unwrap_or(""), &lattice)?;
        let interaction = Interaction::new(h0, hp.scale(c64::new(lambda, 0.0)))
            .map_err(|e| Error::Config(format!("model interaction: {e}")))?;
        Ok((Self::new(lattice, interaction)?, lambda))
    }
}

/// `H_region(s)` with its dense realization.
#[derive(Debug, Clone)]
pub struct RestrictedHamiltonian {
    pub region: SiteSet,
    pub s: f64,
    pub dense: DenseOperator,
}

/// Sorted spectrum with ground energy and gap.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub s: f64,
    pub eigenvalues: Vec<f64>,
    pub ground_energy: f64,
    pub gap: f64,
    pub degenerate: bool,
    pub ground_vector: Option<Vec<c64>>,
}

fn ensure_hermitian(d: &DenseOperator) -> Result<()> {
    let defect = d.hermiticity_defect();
    if defect > 1e-10 {
        Err(Error::NotHermitian(defect))
    } else {
        Ok(())
    }
}

/// Full spectrum of a Hermitian operator. The gap of a one-dimensional
/// space is reported as infinite.
pub fn spectrum(d: &DenseOperator, s: f64, with_vector: bool) -> Result<SpectrumReport> {
    ensure_hermitian(d)?;
    let (eigenvalues, vector) = if with_vector {
        let (vals, vecs) = linalg::hermitian_eigen(d.matrix().as_ref())?;
        let v: Vec<c64> = (0..vecs.nrows()).map(|i| vecs[(i, 0)]).collect();
        (vals, Some(v))
    } else {
        (linalg::hermitian_eigenvalues(d.matrix().as_ref())?, None)
    };
    let ground_energy = eigenvalues[0];
    let gap = eigenvalues.get(1).map_or(f64::INFINITY, |e1| e1 - ground_energy);
    Ok(SpectrumReport {
        s,
        eigenvalues,
        ground_energy,
        gap,
        degenerate: gap < DEGENERACY_THRESHOLD,
        ground_vector: vector,
    })
}

/// Ground state with vector; errors on a degenerate ground space.
pub fn ground_state(d: &DenseOperator, s: f64) -> Result<SpectrumReport> {
    let r = spectrum(d, s, true)?;
    if r.degenerate {
        return Err(Error::DegenerateGround { gap: r.gap, threshold: DEGENERACY_THRESHOLD });
    }
    Ok(r)
}

/// Gap along an `s` grid on the full lattice.
#[derive(Debug, Clone)]
pub struct GapCurve {
    pub points: Vec<(f64, f64)>,
    pub min_gap: f64,
    pub argmin: f64,
}

/// Full-lattice gap scan. Errors if the minimum falls below `bound`.
pub fn gap_scan(h: &ParamHamiltonian, s_grid: &[f64], bound: Option<f64>) -> Result<GapCurve> {
    let all = h.lattice().sites();
    let (h0, hp) = h.dense_parts(&all, &all)?;
    let mut points = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let d = h0.add(&hp.scale(c64::new(s, 0.0)))?;
        points.push((s, spectrum(&d, s, false)?.gap));
    }
    let (argmin, min_gap) =
        points.iter().copied().fold((f64::NAN, f64::INFINITY), |acc, p| if p.1 < acc.1 { p } else { acc });
    if let Some(b) = bound {
        if min_gap < b {
            return Err(Error::GapViolated { min_gap, s: argmin, bound: b });
        }
    }
    Ok(GapCurve { points, min_gap, argmin })
}
