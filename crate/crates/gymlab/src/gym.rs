//! Discrete generalized Young measures in homogeneous coordinates.
//!
//! A measure is a finite list of atoms `(cell, xi, eta, w)` acting on
//! homogeneous test functions by `<f, mu> = sum w f(cell, xi, eta)`. Atoms are
//! kept in canonical form `|(xi, eta)| = 1` with all mass in the weight, the
//! support condition `eta >= 0` holds, and the projection property — the
//! eta-weighted mass of every cell equals its reference measure — is enforced
//! at construction and repaired when floating-point drift stays below
//! `1e-12 * lambda(X)`.

use crate::homfn::{HomFn, HomMap};
use crate::numeric::{self, distance, joint_norm, norm, pairwise_sum, scale};
use crate::space::SpaceModel;
use crate::{GymError, Result};
use rand::Rng;

/// Relative tolerance (times `lambda(X)`) for the projection property.
pub const PROJECTION_TOL: f64 = 1e-12;
/// Angular tolerance below which two atom directions in a cell merge.
pub const MERGE_TOL: f64 = 1e-10;

/// One atom of a discrete generalized Young measure. Canonical form keeps
/// `|(xi, eta)| = 1`, `eta >= 0`, `w > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub cell: usize,
    pub xi: Vec<f64>,
    pub eta: f64,
    pub w: f64,
}

impl Atom {
    pub fn new(cell: usize, xi: Vec<f64>, eta: f64, w: f64) -> Self {
        Atom { cell, xi, eta, w }
    }

    fn joint(&self) -> Vec<f64> {
        let mut v = self.xi.clone();
        v.push(self.eta);
        v
    }
}

/// An atomic generalized Young measure on a [`SpaceModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteGym {
    space: SpaceModel,
    dim_xi: usize,
    atoms: Vec<Atom>,
}

impl DiscreteGym {
    /// Canonicalize, merge, check the support condition, and enforce the
    /// projection property (repairing sub-tolerance drift by rescaling the
    /// Young mass of the affected cell).
    pub fn new(space: SpaceModel, dim_xi: usize, atoms: Vec<Atom>) -> Result<Self> {
        let mut gym = Self::from_atoms_unchecked(space, dim_xi, atoms)?;
        gym.canonicalize()?;
        gym.repair_projection()?;
        Ok(gym)
    }

    /// Store atoms as given (structural checks only). The result may violate
    /// canonical form or the projection property; [`DiscreteGym::validate`]
    /// reports on exactly that.
    pub fn from_atoms_unchecked(
        space: SpaceModel,
        dim_xi: usize,
        atoms: Vec<Atom>,
    ) -> Result<Self> {
        space.validate()?;
        for atom in &atoms {
            space.check_cell(atom.cell)?;
            if atom.xi.len() != dim_xi {
                return Err(GymError::DimensionMismatch {
                    expected: dim_xi,
                    got: atom.xi.len(),
                });
            }
            if !atom.w.is_finite()
                || !atom.eta.is_finite()
                || atom.xi.iter().any(|v| !v.is_finite())
            {
                return Err(GymError::NonFinite {
                    context: "atom data".into(),
                });
            }
        }
        Ok(DiscreteGym {
            space,
            dim_xi,
            atoms,
        })
    }

    fn canonicalize(&mut self) -> Result<()> {
        let mut canonical: Vec<Atom> = Vec::with_capacity(self.atoms.len());
        for atom in self.atoms.drain(..) {
            if atom.w == 0.0 {
                continue;
            }
            if atom.w < 0.0 {
                return Err(GymError::Precondition(format!(
                    "atom weight must be positive, got {}",
                    atom.w
                )));
            }
            if atom.eta < 0.0 {
                return Err(GymError::NegativeEta { eta: atom.eta });
            }
            let n = joint_norm(&atom.xi, atom.eta);
            if n == 0.0 {
                return Err(GymError::ZeroAtom);
            }
            // Idempotence: a canonical atom (unit within a few ulps) passes
            // through bit-exactly, so save/load round-trips are identities.
            if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
                canonical.push(atom);
            } else {
                canonical.push(Atom {
                    cell: atom.cell,
                    xi: scale(&atom.xi, 1.0 / n),
                    eta: atom.eta / n,
                    w: atom.w * n,
                });
            }
        }
        // Deterministic order, then greedy in-cell merging: mass-weighted
        // direction sums preserve the eta-weighted cell mass exactly. A
        // group of one atom passes through untouched (idempotence).
        sort_atoms(&mut canonical);
        struct Group {
            cell: usize,
            acc: Vec<f64>,
            first: Atom,
            count: usize,
        }
        let mut groups: Vec<Group> = Vec::with_capacity(canonical.len());
        for atom in &canonical {
            let joint = atom.joint();
            let mut absorbed = false;
            for group in groups.iter_mut() {
                if group.cell != atom.cell {
                    continue;
                }
                let acc_norm = norm(&group.acc);
                if acc_norm == 0.0 {
                    continue;
                }
                let acc_dir = scale(&group.acc, 1.0 / acc_norm);
                if distance(&acc_dir, &joint) <= MERGE_TOL {
                    for (a, j) in group.acc.iter_mut().zip(&joint) {
                        *a += atom.w * j;
                    }
                    group.count += 1;
                    absorbed = true;
                    break;
                }
            }
            if !absorbed {
                groups.push(Group {
                    cell: atom.cell,
                    acc: scale(&joint, atom.w),
                    first: atom.clone(),
                    count: 1,
                });
            }
        }
        let mut out = Vec::with_capacity(groups.len());
        for group in groups {
            if group.count == 1 {
                out.push(group.first);
                continue;
            }
            let w = norm(&group.acc);
            if w == 0.0 {
                continue;
            }
            let dir = scale(&group.acc, 1.0 / w);
            let (xi, eta) = dir.split_at(self.dim_xi);
            out.push(Atom {
                cell: group.cell,
                xi: xi.to_vec(),
                eta: eta[0].max(0.0),
                w,
            });
        }
        sort_atoms(&mut out);
        self.atoms = out;
        Ok(())
    }

    fn repair_projection(&mut self) -> Result<()> {
        let tol = PROJECTION_TOL * self.space.total_mass();
        for cell in 0..self.space.num_cells() {
            let lambda = self.space.cell_measure(cell);
            let s = self.cell_eta_mass(cell);
            let defect = s - lambda;
            // Sub-ulp drift is indistinguishable from exactness; rescaling
            // would only churn last bits and break round-trip identity.
            if defect.abs() <= 8.0 * f64::EPSILON * lambda {
                continue;
            }
            if defect.abs() > tol || s <= 0.0 {
                return Err(GymError::ProjectionViolation { cell, defect, tol });
            }
            let factor = lambda / s;
            for atom in self.atoms.iter_mut() {
                if atom.cell == cell && atom.eta > 0.0 {
                    atom.w *= factor;
                }
            }
        }
        Ok(())
    }

    fn cell_eta_mass(&self, cell: usize) -> f64 {
        let terms: Vec<f64> = self
            .atoms
            .iter()
            .filter(|a| a.cell == cell)
            .map(|a| a.w * a.eta)
            .collect();
        pairwise_sum(&terms)
    }

    pub fn space(&self) -> &SpaceModel {
        &self.space
    }

    pub fn dim_xi(&self) -> usize {
        self.dim_xi
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Duality pairing `<f, mu> = sum_atoms w f(cell, xi, eta)`, with `+inf`
    /// absorbing (lower-semicontinuous moments are first-class citizens).
    pub fn pair(&self, f: &HomFn) -> Result<f64> {
        if let Some(d) = f.dim_xi() {
            if d != self.dim_xi {
                return Err(GymError::DimensionMismatch {
                    expected: self.dim_xi,
                    got: d,
                });
            }
        }
        let mut terms = Vec::with_capacity(self.atoms.len());
        let mut infinite = false;
        for atom in &self.atoms {
            let v = f.eval(atom.cell, &atom.xi, atom.eta)?;
            if v == f64::INFINITY {
                infinite = true;
            } else {
                terms.push(atom.w * v);
            }
        }
        if infinite {
            return Ok(f64::INFINITY);
        }
        Ok(pairwise_sum(&terms))
    }

    /// Dual norm: for a nonnegative functional this is the pairing against
    /// the joint Euclidean norm, which on canonical atoms is the plain sum of
    /// weights.
    pub fn norm_star(&self) -> f64 {
        let ws: Vec<f64> = self.atoms.iter().map(|a| a.w).collect();
        pairwise_sum(&ws)
    }

    /// Diagnostic report on support, canonical form, and the projection
    /// property. Never fails.
    pub fn validate(&self) -> ValidationReport {
        let tol = PROJECTION_TOL * self.space.total_mass();
        let cells = self.space.num_cells();
        let mut per_cell = Vec::with_capacity(cells);
        let mut max_defect = 0.0f64;
        let mut worst_cell = 0;
        for cell in 0..cells {
            let defect = (self.cell_eta_mass(cell) - self.space.cell_measure(cell)).abs();
            if defect > max_defect {
                max_defect = defect;
                worst_cell = cell;
            }
            per_cell.push(defect);
        }
        let negative_eta = self.atoms.iter().filter(|a| a.eta < 0.0).count();
        let noncanonical = self
            .atoms
            .iter()
            .filter(|a| (joint_norm(&a.xi, a.eta) - 1.0).abs() > 1e-12 || a.w <= 0.0)
            .count();
        ValidationReport {
            max_projection_defect: max_defect,
            worst_cell,
            per_cell_defects: per_cell,
            negative_eta_atoms: negative_eta,
            noncanonical_atoms: noncanonical,
            tolerance: tol,
        }
    }

    /// Pushforward under a homogeneous state map: atoms map through `phi`,
    /// the `x` and `eta` slots pass through, and the result is canonicalized
    /// back into a valid measure. Rays sent to the origin annihilate.
    pub fn image(&self, psi: &HomMap) -> Result<DiscreteGym> {
        if psi.dim_in != self.dim_xi {
            return Err(GymError::DimensionMismatch {
                expected: self.dim_xi,
                got: psi.dim_in,
            });
        }
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for atom in &self.atoms {
            let phi = psi.apply(atom.cell, &atom.xi, atom.eta)?;
            if atom.eta == 0.0 && norm(&phi) == 0.0 {
                // The whole ray collapses to the apex and carries no pairing.
                continue;
            }
            atoms.push(Atom {
                cell: atom.cell,
                xi: phi,
                eta: atom.eta,
                w: atom.w,
            });
        }
        DiscreteGym::new(self.space.clone(), psi.dim_out, atoms)
    }

    /// Split into the oscillation (Young) and concentration (varifold)
    /// parts: `eta > 0` atoms carry values `xi/eta` with mass `w eta`,
    /// `eta = 0` atoms carry unit directions with mass `w |xi|`.
    pub fn decompose(&self) -> Result<(YoungPart, VarifoldPart)> {
        let mut young = Vec::new();
        let mut varifold = Vec::new();
        for atom in &self.atoms {
            if atom.eta > 0.0 {
                let value = scale(&atom.xi, 1.0 / atom.eta);
                if value.iter().any(|v| !v.is_finite()) {
                    return Err(GymError::NonFinite {
                        context: "young value xi/eta".into(),
                    });
                }
                young.push(YoungAtom {
                    cell: atom.cell,
                    xi: value,
                    mass: atom.w * atom.eta,
                });
            } else {
                let n = norm(&atom.xi);
                if n == 0.0 {
                    return Err(GymError::ZeroAtom);
                }
                varifold.push(VarifoldAtom {
                    cell: atom.cell,
                    direction: scale(&atom.xi, 1.0 / n),
                    mass: atom.w * n,
                });
            }
        }
        Ok((
            YoungPart::new(self.space.clone(), self.dim_xi, young)?,
            VarifoldPart::new(self.space.clone(), self.dim_xi, varifold)?,
        ))
    }

    /// The `Xi`-valued measure `pi_X(xi mu)`: per cell, the mean-field value
    /// density from the Young atoms plus a singular vector from the rays.
    pub fn barycentre(&self) -> DiscreteMeasure {
        let cells = self.space.num_cells();
        let mut ac = vec![vec![0.0; self.dim_xi]; cells];
        let mut singular = vec![vec![0.0; self.dim_xi]; cells];
        for atom in &self.atoms {
            let target = if atom.eta > 0.0 {
                &mut ac[atom.cell]
            } else {
                &mut singular[atom.cell]
            };
            for (t, x) in target.iter_mut().zip(&atom.xi) {
                *t += atom.w * x;
            }
        }
        for (cell, row) in ac.iter_mut().enumerate() {
            let lambda = self.space.cell_measure(cell);
            for v in row.iter_mut() {
                *v /= lambda;
            }
        }
        let singular: Vec<(usize, Vec<f64>)> = singular
            .into_iter()
            .enumerate()
            .filter(|(_, v)| v.iter().any(|x| *x != 0.0))
            .collect();
        DiscreteMeasure {
            space: self.space.clone(),
            dim_xi: self.dim_xi,
            ac,
            singular,
        }
    }

    /// `pi_X(h mu)` for a vector-valued homogeneous `h`: the barycentre is
    /// the special case `h = xi`. Young-type atoms land in the absolutely
    /// continuous part, rays in the singular part.
    pub fn project_x(&self, h: &HomMap) -> Result<DiscreteMeasure> {
        if h.dim_in != self.dim_xi {
            return Err(GymError::DimensionMismatch {
                expected: self.dim_xi,
                got: h.dim_in,
            });
        }
        let cells = self.space.num_cells();
        let mut ac = vec![vec![0.0; h.dim_out]; cells];
        let mut singular = vec![vec![0.0; h.dim_out]; cells];
        for atom in &self.atoms {
            let value = h.apply(atom.cell, &atom.xi, atom.eta)?;
            let target = if atom.eta > 0.0 {
                &mut ac[atom.cell]
            } else {
                &mut singular[atom.cell]
            };
            for (t, v) in target.iter_mut().zip(&value) {
                *t += atom.w * v;
            }
        }
        for (cell, row) in ac.iter_mut().enumerate() {
            let lambda = self.space.cell_measure(cell);
            for v in row.iter_mut() {
                *v /= lambda;
            }
        }
        let singular: Vec<(usize, Vec<f64>)> = singular
            .into_iter()
            .enumerate()
            .filter(|(_, v)| v.iter().any(|x| *x != 0.0))
            .collect();
        Ok(DiscreteMeasure {
            space: self.space.clone(),
            dim_xi: h.dim_out,
            ac,
            singular,
        })
    }

    /// Jensen gap `<f, mu> - <f, lift(bar(mu))>` for a convex homogeneous
    /// test function. Convexity is enforced by sampled classification
    /// (subadditivity defect and homogeneity defect at most 1e-10).
    pub fn jensen_gap(&self, f: &HomFn) -> Result<f64> {
        let report = f.classify(&self.space, 4000, 0x6a5);
        if !report.is_homogeneous(1e-10) || !report.is_subadditive(1e-10) {
            return Err(GymError::Precondition(format!(
                "jensen_gap needs a convex homogeneous f; sampled homogeneity defect {:e}, \
                 triangle defect {:e}",
                report.homogeneity_defect, report.triangle_defect
            )));
        }
        let at_mu = self.pair(f)?;
        let at_bar = lift_measure(&self.barycentre())?.pair(f)?;
        if at_mu == f64::INFINITY && at_bar == f64::INFINITY {
            return Err(GymError::Precondition(
                "jensen gap is indeterminate: both pairings are +inf".into(),
            ));
        }
        Ok(at_mu - at_bar)
    }

    /// Finite contact-set check: given `cof <= f` (a declared convex
    /// envelope) with `<f, mu> <= <cof, lift(bar mu)> + tol`, every atom must
    /// sit where `f` and `cof` touch, up to a `tol/w` slack per atom.
    pub fn contact_support_check(&self, f: &HomFn, cof: &HomFn, tol: f64) -> Result<bool> {
        // Sampled minorant check.
        let mut rng = numeric::seeded_rng(0xc0f);
        for _ in 0..2000 {
            let cell = rng.random_range(0..self.space.num_cells());
            let xi: Vec<f64> = (0..self.dim_xi)
                .map(|_| rng.random_range(-3.0..3.0))
                .collect();
            let eta: f64 = rng.random_range(0.0..2.0);
            let fv = f.eval(cell, &xi, eta)?;
            let cv = cof.eval(cell, &xi, eta)?;
            if cv > fv + 1e-10 {
                return Err(GymError::Precondition(format!(
                    "declared envelope exceeds f by {:e} on a sample",
                    cv - fv
                )));
            }
        }
        let at_mu = self.pair(f)?;
        let at_bar = lift_measure(&self.barycentre())?.pair(cof)?;
        if !(at_mu <= at_bar + tol) {
            return Err(GymError::Precondition(format!(
                "<f, mu> = {at_mu} exceeds <cof, bar lift> = {at_bar} beyond tol {tol}"
            )));
        }
        for atom in &self.atoms {
            let gap = f.eval(atom.cell, &atom.xi, atom.eta)?
                - cof.eval(atom.cell, &atom.xi, atom.eta)?;
            if atom.w * gap > tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Weighted battery distance `sum_i 2^-(i+1) |<f_i, mu1> - <f_i, mu2>|`:
    /// the finite surrogate for the weak* topology. Symmetric, zero exactly
    /// when every battery pairing agrees.
    pub fn wstar_gap(&self, other: &DiscreteGym, battery: &Battery) -> Result<f64> {
        if battery.members.is_empty() {
            return Err(GymError::Empty("battery"));
        }
        let mut acc = Vec::with_capacity(battery.members.len());
        for (i, member) in battery.members.iter().enumerate() {
            let a = self.pair(&member.f)?;
            let b = other.pair(&member.f)?;
            acc.push(battery.weight(i) * (a - b).abs());
        }
        Ok(pairwise_sum(&acc))
    }
}

fn sort_atoms(atoms: &mut [Atom]) {
    atoms.sort_by(|a, b| {
        a.cell.cmp(&b.cell).then_with(|| {
            for (x, y) in a.xi.iter().zip(&b.xi) {
                let c = x.total_cmp(y);
                if c != std::cmp::Ordering::Equal {
                    return c;
                }
            }
            a.eta.total_cmp(&b.eta).then(a.w.total_cmp(&b.w))
        })
    });
}

/// Outcome of [`DiscreteGym::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub max_projection_defect: f64,
    pub worst_cell: usize,
    pub per_cell_defects: Vec<f64>,
    pub negative_eta_atoms: usize,
    pub noncanonical_atoms: usize,
    pub tolerance: f64,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.max_projection_defect <= self.tolerance
            && self.negative_eta_atoms == 0
            && self.noncanonical_atoms == 0
    }
}

/// A `Xi`-valued measure on `X`: per-cell absolutely continuous densities
/// plus at most one singular vector mass per cell (a cell is the finest
/// addressable location, so singular masses attach to cells).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    space: SpaceModel,
    dim_xi: usize,
    ac: Vec<Vec<f64>>,
    singular: Vec<(usize, Vec<f64>)>,
}

impl DiscreteMeasure {
    pub fn new(
        space: SpaceModel,
        dim_xi: usize,
        ac: Vec<Vec<f64>>,
        singular: Vec<(usize, Vec<f64>)>,
    ) -> Result<Self> {
        space.validate()?;
        if ac.len() != space.num_cells() {
            return Err(GymError::Precondition(format!(
                "ac density needs one row per cell ({} != {})",
                ac.len(),
                space.num_cells()
            )));
        }
        for row in &ac {
            if row.len() != dim_xi {
                return Err(GymError::DimensionMismatch {
                    expected: dim_xi,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(GymError::NonFinite {
                    context: "ac density".into(),
                });
            }
        }
        let mut merged: Vec<(usize, Vec<f64>)> = Vec::new();
        for (cell, mass) in singular {
            space.check_cell(cell)?;
            if mass.len() != dim_xi {
                return Err(GymError::DimensionMismatch {
                    expected: dim_xi,
                    got: mass.len(),
                });
            }
            if mass.iter().any(|v| !v.is_finite()) {
                return Err(GymError::NonFinite {
                    context: "singular mass".into(),
                });
            }
            if norm(&mass) == 0.0 {
                return Err(GymError::ZeroSingularMass { cell });
            }
            match merged.iter_mut().find(|(c, _)| *c == cell) {
                Some((_, acc)) => {
                    for (a, m) in acc.iter_mut().zip(&mass) {
                        *a += m;
                    }
                }
                None => merged.push((cell, mass)),
            }
        }
        merged.retain(|(_, m)| norm(m) > 0.0);
        merged.sort_by_key(|(c, _)| *c);
        Ok(DiscreteMeasure {
            space,
            dim_xi,
            ac,
            singular: merged,
        })
    }

    pub fn zero(space: SpaceModel, dim_xi: usize) -> Result<Self> {
        let cells = space.num_cells();
        Self::new(space, dim_xi, vec![vec![0.0; dim_xi]; cells], vec![])
    }

    /// Purely absolutely continuous measure with the given per-cell density.
    pub fn from_density(space: SpaceModel, dim_xi: usize, ac: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(space, dim_xi, ac, vec![])
    }

    pub fn space(&self) -> &SpaceModel {
        &self.space
    }

    pub fn dim_xi(&self) -> usize {
        self.dim_xi
    }

    pub fn ac(&self) -> &[Vec<f64>] {
        &self.ac
    }

    pub fn singular(&self) -> &[(usize, Vec<f64>)] {
        &self.singular
    }

    /// Total variation `sum lambda(c) |ac(c)| + sum |singular|`.
    pub fn total_variation(&self) -> f64 {
        let mut terms: Vec<f64> = self
            .ac
            .iter()
            .enumerate()
            .map(|(c, row)| self.space.cell_measure(c) * norm(row))
            .collect();
        terms.extend(self.singular.iter().map(|(_, m)| norm(m)));
        pairwise_sum(&terms)
    }

    /// Total-variation distance to another measure on the same space.
    pub fn tv_distance(&self, other: &DiscreteMeasure) -> Result<f64> {
        if self.space != other.space || self.dim_xi != other.dim_xi {
            return Err(GymError::Precondition(
                "tv_distance needs measures on the same space".into(),
            ));
        }
        let mut terms: Vec<f64> = self
            .ac
            .iter()
            .zip(&other.ac)
            .enumerate()
            .map(|(c, (a, b))| self.space.cell_measure(c) * distance(a, b))
            .collect();
        let cells = self.space.num_cells();
        for cell in 0..cells {
            let a = self.singular_at(cell);
            let b = other.singular_at(cell);
            match (a, b) {
                (None, None) => {}
                (Some(m), None) | (None, Some(m)) => terms.push(norm(m)),
                (Some(m1), Some(m2)) => terms.push(distance(m1, m2)),
            }
        }
        Ok(pairwise_sum(&terms))
    }

    fn singular_at(&self, cell: usize) -> Option<&Vec<f64>> {
        self.singular
            .iter()
            .find(|(c, _)| *c == cell)
            .map(|(_, m)| m)
    }

    /// Linear combination `alpha self + beta other` (same space).
    pub fn linear_combination(
        &self,
        alpha: f64,
        other: &DiscreteMeasure,
        beta: f64,
    ) -> Result<Self> {
        if self.space != other.space || self.dim_xi != other.dim_xi {
            return Err(GymError::Precondition(
                "linear combination needs measures on the same space".into(),
            ));
        }
        let ac = self
            .ac
            .iter()
            .zip(&other.ac)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| alpha * x + beta * y).collect())
            .collect();
        let mut singular: Vec<(usize, Vec<f64>)> = Vec::new();
        for (cell, m) in &self.singular {
            singular.push((*cell, scale(m, alpha)));
        }
        for (cell, m) in &other.singular {
            singular.push((*cell, scale(m, beta)));
        }
        let singular = singular
            .into_iter()
            .filter(|(_, m)| norm(m) > 0.0)
            .collect();
        Self::new(self.space.clone(), self.dim_xi, ac, singular)
    }
}

/// Oscillation component: per-cell value atoms whose masses disintegrate the
/// reference measure (`sum of masses in a cell = lambda(cell)`).
#[derive(Debug, Clone, PartialEq)]
pub struct YoungAtom {
    pub cell: usize,
    pub xi: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct YoungPart {
    space: SpaceModel,
    dim_xi: usize,
    atoms: Vec<YoungAtom>,
}

impl YoungPart {
    pub fn new(space: SpaceModel, dim_xi: usize, atoms: Vec<YoungAtom>) -> Result<Self> {
        space.validate()?;
        let tol = PROJECTION_TOL * space.total_mass();
        for atom in &atoms {
            space.check_cell(atom.cell)?;
            if atom.xi.len() != dim_xi {
                return Err(GymError::DimensionMismatch {
                    expected: dim_xi,
                    got: atom.xi.len(),
                });
            }
            if !(atom.mass > 0.0) || atom.xi.iter().any(|v| !v.is_finite()) {
                return Err(GymError::Precondition(
                    "young atoms need positive mass and finite values".into(),
                ));
            }
        }
        for cell in 0..space.num_cells() {
            let terms: Vec<f64> = atoms
                .iter()
                .filter(|a| a.cell == cell)
                .map(|a| a.mass)
                .collect();
            let defect = pairwise_sum(&terms) - space.cell_measure(cell);
            if defect.abs() > tol {
                return Err(GymError::ProjectionViolation { cell, defect, tol });
            }
        }
        Ok(YoungPart {
            space,
            dim_xi,
            atoms,
        })
    }

    pub fn space(&self) -> &SpaceModel {
        &self.space
    }

    pub fn dim_xi(&self) -> usize {
        self.dim_xi
    }

    pub fn atoms(&self) -> &[YoungAtom] {
        &self.atoms
    }

    /// `sum m f(c, xi, 1)` — the pairing of the lifted Young part.
    pub fn pair_at_one(&self, f: &HomFn) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.atoms.len());
        let mut infinite = false;
        for a in &self.atoms {
            let v = f.eval(a.cell, &a.xi, 1.0)?;
            if v == f64::INFINITY {
                infinite = true;
            } else {
                terms.push(a.mass * v);
            }
        }
        if infinite {
            return Ok(f64::INFINITY);
        }
        Ok(pairwise_sum(&terms))
    }

    /// First moment `sum m |xi|`.
    pub fn first_moment(&self) -> f64 {
        let terms: Vec<f64> = self.atoms.iter().map(|a| a.mass * norm(&a.xi)).collect();
        pairwise_sum(&terms)
    }

    /// Per-cell probability lists: masses renormalized by `lambda(cell)`.
    pub fn disintegrate(&self) -> Vec<Vec<(Vec<f64>, f64)>> {
        let cells = self.space.num_cells();
        let mut out = vec![Vec::new(); cells];
        for a in &self.atoms {
            out[a.cell].push((a.xi.clone(), a.mass / self.space.cell_measure(a.cell)));
        }
        out
    }
}

/// Concentration component: unit directions with positive masses.
#[derive(Debug, Clone, PartialEq)]
pub struct VarifoldAtom {
    pub cell: usize,
    pub direction: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarifoldPart {
    space: SpaceModel,
    dim_xi: usize,
    atoms: Vec<VarifoldAtom>,
}

impl VarifoldPart {
    pub fn new(space: SpaceModel, dim_xi: usize, atoms: Vec<VarifoldAtom>) -> Result<Self> {
        space.validate()?;
        for atom in &atoms {
            space.check_cell(atom.cell)?;
            if atom.direction.len() != dim_xi {
                return Err(GymError::DimensionMismatch {
                    expected: dim_xi,
                    got: atom.direction.len(),
                });
            }
            if (norm(&atom.direction) - 1.0).abs() > 1e-12 {
                return Err(GymError::Precondition(
                    "varifold directions must be unit vectors".into(),
                ));
            }
            if !(atom.mass > 0.0) {
                return Err(GymError::Precondition(
                    "varifold masses must be positive".into(),
                ));
            }
        }
        Ok(VarifoldPart {
            space,
            dim_xi,
            atoms,
        })
    }

    pub fn empty(space: SpaceModel, dim_xi: usize) -> Result<Self> {
        Self::new(space, dim_xi, vec![])
    }

    pub fn space(&self) -> &SpaceModel {
        &self.space
    }

    pub fn dim_xi(&self) -> usize {
        self.dim_xi
    }

    pub fn atoms(&self) -> &[VarifoldAtom] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `sum m f(c, dir, 0)` — the recession pairing.
    pub fn pair_at_zero(&self, f: &HomFn) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.atoms.len());
        let mut infinite = false;
        for a in &self.atoms {
            let v = f.eval(a.cell, &a.direction, 0.0)?;
            if v == f64::INFINITY {
                infinite = true;
            } else {
                terms.push(a.mass * v);
            }
        }
        if infinite {
            return Ok(f64::INFINITY);
        }
        Ok(pairwise_sum(&terms))
    }

    pub fn total_mass(&self) -> f64 {
        let terms: Vec<f64> = self.atoms.iter().map(|a| a.mass).collect();
        pairwise_sum(&terms)
    }
}

/// Lift a `Xi`-valued measure into a generalized Young measure: the density
/// slice lands at `(ac, 1)` directions, singular masses on `eta = 0` rays.
/// The dual norm of the lift is exactly
/// `sum lambda(c) sqrt(1 + |ac(c)|^2) + sum |singular|`.
pub fn lift_measure(p: &DiscreteMeasure) -> Result<DiscreteGym> {
    let mut atoms = Vec::with_capacity(p.ac.len() + p.singular.len());
    for (cell, density) in p.ac.iter().enumerate() {
        let lambda = p.space.cell_measure(cell);
        let n = joint_norm(density, 1.0);
        atoms.push(Atom {
            cell,
            xi: scale(density, 1.0 / n),
            eta: 1.0 / n,
            w: lambda * n,
        });
    }
    for (cell, mass) in &p.singular {
        let m = norm(mass);
        atoms.push(Atom {
            cell: *cell,
            xi: scale(mass, 1.0 / m),
            eta: 0.0,
            w: m,
        });
    }
    DiscreteGym::new(p.space.clone(), p.dim_xi, atoms)
}

/// Lift a function given by per-cell values (a pure density, no singular
/// part).
pub fn lift_function(
    space: &SpaceModel,
    dim_xi: usize,
    values: Vec<Vec<f64>>,
) -> Result<DiscreteGym> {
    lift_measure(&DiscreteMeasure::from_density(space.clone(), dim_xi, values)?)
}

/// Lift a Young part: value atoms land at `(xi, 1)` directions with their
/// masses as eta-weighted weights. The dual norm is `sum m sqrt(1 + |xi|^2)`.
pub fn lift_young(nu: &YoungPart) -> Result<DiscreteGym> {
    let atoms = nu
        .atoms
        .iter()
        .map(|a| {
            let n = joint_norm(&a.xi, 1.0);
            Atom {
                cell: a.cell,
                xi: scale(&a.xi, 1.0 / n),
                eta: 1.0 / n,
                w: a.mass * n,
            }
        })
        .collect();
    DiscreteGym::new(nu.space.clone(), nu.dim_xi, atoms)
}

/// Rebuild a measure from its decomposition; inverse of
/// [`DiscreteGym::decompose`] on every battery pairing.
pub fn recompose(young: &YoungPart, varifold: &VarifoldPart) -> Result<DiscreteGym> {
    if young.space != varifold.space || young.dim_xi != varifold.dim_xi {
        return Err(GymError::Precondition(
            "young and varifold parts live on different spaces".into(),
        ));
    }
    let mut atoms: Vec<Atom> = young
        .atoms
        .iter()
        .map(|a| {
            let n = joint_norm(&a.xi, 1.0);
            Atom {
                cell: a.cell,
                xi: scale(&a.xi, 1.0 / n),
                eta: 1.0 / n,
                w: a.mass * n,
            }
        })
        .collect();
    atoms.extend(varifold.atoms.iter().map(|a| Atom {
        cell: a.cell,
        xi: a.direction.clone(),
        eta: 0.0,
        w: a.mass,
    }));
    DiscreteGym::new(young.space.clone(), young.dim_xi, atoms)
}

/// One battery member: a normalized test function with a stable name.
#[derive(Debug, Clone)]
pub struct BatteryMember {
    pub name: String,
    pub f: HomFn,
}

/// An ordered list of test functions with `hom_norm <= 1` and dyadic decay
/// weights `2^-(i+1)`: the computable surrogate for a separating family of
/// the weak* topology. Every member must classify as exactly homogeneous.
#[derive(Debug, Clone)]
pub struct Battery {
    members: Vec<BatteryMember>,
}

impl Battery {
    pub fn new(space: &SpaceModel, members: Vec<(String, HomFn)>) -> Result<Self> {
        if members.is_empty() {
            return Err(GymError::Empty("battery"));
        }
        let mut out = Vec::with_capacity(members.len());
        for (name, f) in members {
            let bound = f.hom_norm_bound().ok_or_else(|| {
                GymError::Precondition(format!("battery member '{name}' is unbounded"))
            })?;
            if bound > 1.0 + 1e-9 {
                return Err(GymError::Precondition(format!(
                    "battery member '{name}' has hom norm bound {bound} > 1"
                )));
            }
            let report = f.classify(space, 1000, 0xba77);
            if !report.is_homogeneous(1e-10) {
                return Err(GymError::Precondition(format!(
                    "battery member '{name}' fails homogeneity sampling ({:e})",
                    report.homogeneity_defect
                )));
            }
            out.push(BatteryMember { name, f });
        }
        Ok(Battery { members: out })
    }

    /// The standard seeded battery: the three canonical norms followed by
    /// smooth-field linear forms and their kinks (positive parts, minima,
    /// maxima). Fields vary slowly across cells so that battery pairings of
    /// rapidly oscillating lifts converge at the oscillation rate.
    pub fn standard(space: &SpaceModel, dim_xi: usize, len: usize, seed: u64) -> Result<Self> {
        let mut rng = numeric::seeded_rng(seed ^ 0xbead);
        let mut members: Vec<(String, HomFn)> = vec![
            ("euclid".into(), HomFn::EuclidNorm),
            ("xi-norm".into(), HomFn::XiNorm),
            ("eta-part".into(), HomFn::EtaPart),
        ];
        let mut idx = 0usize;
        while members.len() < len {
            let kind = idx % 4;
            let f = match kind {
                0 => smooth_linear(space, dim_xi, &mut rng),
                1 => HomFn::positive_part(smooth_linear(space, dim_xi, &mut rng)),
                2 => HomFn::max(
                    smooth_linear(space, dim_xi, &mut rng),
                    smooth_linear(space, dim_xi, &mut rng),
                )?,
                _ => HomFn::min(
                    smooth_linear(space, dim_xi, &mut rng),
                    smooth_linear(space, dim_xi, &mut rng),
                )?,
            };
            members.push((format!("m{:02}", members.len()), f));
            idx += 1;
        }
        members.truncate(len);
        Battery::new(space, members)
    }

    pub fn members(&self) -> &[BatteryMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Decay weight of member `i`.
    pub fn weight(&self, i: usize) -> f64 {
        0.5f64.powi(i as i32 + 1)
    }

    /// All pairings against one measure, in member order.
    pub fn pairings(&self, mu: &DiscreteGym) -> Result<Vec<f64>> {
        self.members.iter().map(|m| mu.pair(&m.f)).collect()
    }

    /// Functionals for joint marginals over `blocks` stacked state copies:
    /// every member read through each block projection, every member read on
    /// the last-minus-first increment (the correlation-sensitive part), and
    /// the joint Euclidean norm. For `blocks = 1` this is the battery itself.
    pub fn joint_functionals(
        &self,
        dim_xi: usize,
        blocks: usize,
    ) -> Result<Vec<(String, HomFn)>> {
        if blocks == 0 {
            return Err(GymError::Empty("block count"));
        }
        if blocks == 1 {
            return Ok(self
                .members
                .iter()
                .map(|m| (m.name.clone(), m.f.clone()))
                .collect());
        }
        let mut out = Vec::new();
        for member in &self.members {
            for b in 0..blocks {
                let pi = HomMap::block_projection(dim_xi, blocks, &[b])?;
                out.push((
                    format!("{}[b{}]", member.name, b),
                    HomFn::compose(member.f.clone(), pi)?,
                ));
            }
            let joint_dim = dim_xi * blocks;
            let increment = HomMap::components(
                joint_dim,
                (0..dim_xi)
                    .map(|i| {
                        let mut a = vec![0.0; joint_dim];
                        a[i] = -1.0;
                        a[(blocks - 1) * dim_xi + i] = 1.0;
                        HomFn::linear_const(a, 0.0)
                    })
                    .collect(),
            )?;
            out.push((
                format!("{}[inc]", member.name),
                HomFn::compose(member.f.clone(), increment)?,
            ));
        }
        out.push(("joint-euclid".into(), HomFn::EuclidNorm));
        Ok(out)
    }
}

/// A linear form with smooth per-cell fields, normalized so the exact sup of
/// `|a(x) . xi + b(x) eta|` over the joint unit sphere is 1.
fn smooth_linear(space: &SpaceModel, dim_xi: usize, rng: &mut impl Rng) -> HomFn {
    let cells = space.num_cells();
    let (lo, hi) = space.bounds().unwrap_or((0.0, 1.0));
    let span = hi - lo;
    let mut a_rows = vec![vec![0.0; dim_xi]; cells];
    let mut b_row = vec![0.0; cells];
    for d in 0..=dim_xi {
        let amp: f64 = rng.random_range(0.2..1.0);
        let freq: f64 = rng.random_range(1.0..3.5);
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let sign: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
        for cell in 0..cells {
            let xc = if span > 0.0 {
                (space.cell_center(cell) - lo) / span
            } else {
                0.0
            };
            let v = sign * amp * (freq * std::f64::consts::PI * xc + phase).cos();
            if d < dim_xi {
                a_rows[cell][d] = v;
            } else {
                b_row[cell] = v;
            }
        }
    }
    let worst = a_rows
        .iter()
        .zip(&b_row)
        .map(|(a, b)| joint_norm(a, *b))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let factor = 1.0 / (worst * (1.0 + 1e-12));
    for row in &mut a_rows {
        for v in row.iter_mut() {
            *v *= factor;
        }
    }
    for v in &mut b_row {
        *v *= factor;
    }
    HomFn::linear(
        crate::homfn::Field::PerCell(a_rows),
        crate::homfn::ScalarField::PerCell(b_row),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interval(lo: f64, hi: f64, cells: usize) -> SpaceModel {
        SpaceModel::interval(lo, hi, cells).unwrap()
    }

    fn density(space: &SpaceModel, value: f64) -> DiscreteMeasure {
        DiscreteMeasure::from_density(space.clone(), 1, vec![vec![value]; space.num_cells()])
            .unwrap()
    }

    #[test]
    fn lift_of_zero_measure() {
        let space = interval(0.0, 1.0, 4);
        let mu = lift_measure(&density(&space, 0.0)).unwrap();
        assert_eq!(mu.atoms().len(), 4);
        for atom in mu.atoms() {
            assert_eq!(atom.xi, vec![0.0]);
            assert_eq!(atom.eta, 1.0);
            assert!((atom.w - 0.25).abs() < 1e-15);
        }
        assert!((mu.norm_star() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn mass_formula_constant_density() {
        // ||delta_p||_* = integral sqrt(1 + 9) for ac = 3, any cell count.
        for cells in [1, 2, 5, 16] {
            let space = interval(0.0, 1.0, cells);
            let mu = lift_measure(&density(&space, 3.0)).unwrap();
            assert!((mu.norm_star() - 10f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn mass_formula_singular_part() {
        let space = interval(0.0, 1.0, 8);
        let cell = space.cell_containing(0.5).unwrap();
        let p = DiscreteMeasure::new(
            space.clone(),
            1,
            vec![vec![0.0]; 8],
            vec![(cell, vec![2.0])],
        )
        .unwrap();
        let mu = lift_measure(&p).unwrap();
        assert!((mu.norm_star() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_singular_entry_rejected() {
        let space = interval(0.0, 1.0, 2);
        let err = DiscreteMeasure::new(space, 1, vec![vec![0.0]; 2], vec![(0, vec![0.0])]);
        assert!(matches!(err, Err(GymError::ZeroSingularMass { .. })));
    }

    #[test]
    fn eta_pairing_is_total_mass() {
        let space = interval(-1.0, 1.0, 6);
        let mu = lift_measure(&density(&space, 2.5)).unwrap();
        assert!((mu.pair(&HomFn::EtaPart).unwrap() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn positive_part_pairing_of_square_wave() {
        // w = +1 on [0, 1), -1 on [-1, 0): integral of w^+ is 1.
        let space = interval(-1.0, 1.0, 2000);
        let values: Vec<Vec<f64>> = (0..2000)
            .map(|c| vec![if space.cell_center(c) >= 0.0 { 1.0 } else { -1.0 }])
            .collect();
        let mu = lift_function(&space, 1, values).unwrap();
        let f = HomFn::positive_part(HomFn::linear_const(vec![1.0], 0.0));
        assert!((mu.pair(&f).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moment_pairing_detects_concentration() {
        let space = interval(0.0, 1.0, 2);
        let p = DiscreteMeasure::new(space.clone(), 1, vec![vec![0.0]; 2], vec![(1, vec![0.5])])
            .unwrap();
        let mu = lift_measure(&p).unwrap();
        let p2 = HomFn::pr_moment(2.0).unwrap();
        assert_eq!(mu.pair(&p2).unwrap(), f64::INFINITY);
        // Without concentration the moment is finite.
        let nu = lift_measure(&density(&space, 2.0)).unwrap();
        assert!((nu.pair(&p2).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn norm_star_matches_euclid_pairing() {
        let space = interval(0.0, 2.0, 5);
        let mu = sample_random_gym(&space, 2, 40, 17);
        let by_pairing = mu.pair(&HomFn::EuclidNorm).unwrap();
        assert!((mu.norm_star() - by_pairing).abs() <= 1e-12 * (1.0 + by_pairing));
    }

    #[test]
    fn validate_passes_for_lifts_and_flags_defects() {
        let space = interval(0.0, 1.0, 3);
        let mu = lift_measure(&density(&space, 1.5)).unwrap();
        assert!(mu.validate().passes());

        // All-concentration "measure": no Young mass anywhere.
        let bad = DiscreteGym::from_atoms_unchecked(
            space.clone(),
            1,
            vec![Atom::new(0, vec![1.0], 0.0, 1.0)],
        )
        .unwrap();
        assert!(!bad.validate().passes());

        // One cell carrying (1 + 1e-6) times its measure.
        let lambda = space.cell_measure(0);
        let mut atoms: Vec<Atom> = (0..3)
            .map(|c| Atom::new(c, vec![0.0], 1.0, space.cell_measure(c)))
            .collect();
        atoms[0].w = lambda * (1.0 + 1e-6);
        let skewed = DiscreteGym::from_atoms_unchecked(space.clone(), 1, atoms).unwrap();
        let report = skewed.validate();
        assert!(!report.passes());
        assert!((report.max_projection_defect - 1e-6 * lambda).abs() < 1e-9 * lambda);
    }

    #[test]
    fn construction_rejects_above_tolerance_defects() {
        let space = interval(0.0, 1.0, 2);
        let atoms = vec![
            Atom::new(0, vec![0.0], 1.0, 0.5 * (1.0 + 1e-6)),
            Atom::new(1, vec![0.0], 1.0, 0.5),
        ];
        assert!(matches!(
            DiscreteGym::new(space, 1, atoms),
            Err(GymError::ProjectionViolation { .. })
        ));
    }

    #[test]
    fn construction_repairs_tiny_drift() {
        let space = interval(0.0, 1.0, 1);
        let atoms = vec![Atom::new(0, vec![0.0], 1.0, 1.0 + 1e-13)];
        let mu = DiscreteGym::new(space, 1, atoms).unwrap();
        assert!(mu.validate().passes());
        assert!((mu.pair(&HomFn::EtaPart).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn negative_eta_rejected() {
        let space = interval(0.0, 1.0, 1);
        let atoms = vec![Atom::new(0, vec![0.5], -0.1, 1.0)];
        assert!(matches!(
            DiscreteGym::new(space, 1, atoms),
            Err(GymError::NegativeEta { .. })
        ));
    }

    #[test]
    fn merge_combines_identical_directions() {
        let space = interval(0.0, 1.0, 1);
        let atoms = vec![
            Atom::new(0, vec![0.0], 1.0, 0.5),
            Atom::new(0, vec![0.0], 1.0, 0.5),
        ];
        let mu = DiscreteGym::new(space, 1, atoms).unwrap();
        assert_eq!(mu.atoms().len(), 1);
        assert!((mu.atoms()[0].w - 1.0).abs() < 1e-15);
    }

    fn two_point_oscillation(space: &SpaceModel) -> DiscreteGym {
        // Per cell: half mass at +1, half at -1.
        let mut atoms = Vec::new();
        for cell in 0..space.num_cells() {
            let lambda = space.cell_measure(cell);
            for v in [1.0, -1.0] {
                atoms.push(Atom::new(cell, vec![v], 1.0, lambda / 2.0));
            }
        }
        DiscreteGym::new(space.clone(), 1, atoms).unwrap()
    }

    #[test]
    fn lift_young_pairings_and_norm() {
        let space = interval(-1.0, 1.0, 4);
        let mu = two_point_oscillation(&space);
        assert!((mu.pair(&HomFn::XiNorm).unwrap() - 2.0).abs() < 1e-12);
        // Young lift norm identity: sum m sqrt(1 + xi^2).
        let (young, varifold) = mu.decompose().unwrap();
        assert!(varifold.is_empty());
        let relift = lift_young(&young).unwrap();
        let expected: f64 = 2.0 * 2f64.sqrt();
        assert!((relift.norm_star() - expected).abs() < 1e-12);

        // Unit mass at 0 equals the lift of the zero function.
        let space2 = interval(0.0, 1.0, 3);
        let atoms = (0..3)
            .map(|c| YoungAtom {
                cell: c,
                xi: vec![0.0],
                mass: space2.cell_measure(c),
            })
            .collect();
        let nu = YoungPart::new(space2.clone(), 1, atoms).unwrap();
        let a = lift_young(&nu).unwrap();
        let b = lift_measure(&density(&space2, 0.0)).unwrap();
        let battery = Battery::standard(&space2, 1, 8, 0).unwrap();
        assert_eq!(a.wstar_gap(&b, &battery).unwrap(), 0.0);
    }

    #[test]
    fn decompose_rescales_homogeneously() {
        let space = interval(0.0, 1.0, 1);
        let lambda = space.cell_measure(0);
        let atoms = vec![Atom::new(0, vec![0.8, 0.0], 0.6, lambda / 0.6)];
        let mu = DiscreteGym::new(space, 2, atoms).unwrap();
        let (young, varifold) = mu.decompose().unwrap();
        assert!(varifold.is_empty());
        assert_eq!(young.atoms().len(), 1);
        let atom = &young.atoms()[0];
        assert!((atom.xi[0] - 4.0 / 3.0).abs() < 1e-12);
        assert!(atom.xi[1].abs() < 1e-15);
        assert!((atom.mass - lambda).abs() < 1e-14);
    }

    #[test]
    fn decompose_recompose_battery_identity() {
        let space = interval(0.0, 1.0, 5);
        let mu = sample_random_gym(&space, 2, 50, 23);
        let (young, varifold) = mu.decompose().unwrap();
        let back = recompose(&young, &varifold).unwrap();
        let battery = Battery::standard(&space, 2, 12, 1).unwrap();
        for member in battery.members() {
            let a = mu.pair(&member.f).unwrap();
            let b = back.pair(&member.f).unwrap();
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{}", member.name);
        }
        // Splitting the recombined measure again gives the same parts.
        let (young2, varifold2) = back.decompose().unwrap();
        assert_eq!(young.atoms().len(), young2.atoms().len());
        assert_eq!(varifold.atoms().len(), varifold2.atoms().len());
    }

    #[test]
    fn image_identity_and_scaling() {
        let space = interval(0.0, 1.0, 3);
        let mu = sample_random_gym(&space, 2, 20, 31);
        let id = HomMap::identity(2);
        let same = mu.image(&id).unwrap();
        assert_eq!(mu.atoms().len(), same.atoms().len());
        for (a, b) in mu.atoms().iter().zip(same.atoms()) {
            assert!(distance(&a.xi, &b.xi) < 1e-14);
            assert!((a.w - b.w).abs() < 1e-12 * (1.0 + a.w));
        }

        let doubling = HomMap::scaling(2, 2.0);
        let doubled = mu.image(&doubling).unwrap();
        let a = mu.pair(&HomFn::XiNorm).unwrap();
        let b = doubled.pair(&HomFn::XiNorm).unwrap();
        assert!((b - 2.0 * a).abs() <= 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn image_pairing_identity_and_validity() {
        let space = interval(0.0, 1.0, 4);
        let mu = sample_random_gym(&space, 2, 30, 37);
        let psi = HomMap::components(
            2,
            vec![HomFn::linear_const(vec![1.0, 1.0], 0.5), HomFn::XiNorm],
        )
        .unwrap();
        let mapped = mu.image(&psi).unwrap();
        assert!(mapped.validate().passes());
        let battery = Battery::standard(&space, 2, 10, 5).unwrap();
        for member in battery.members() {
            let lhs = mapped.pair(&member.f).unwrap();
            let composed = HomFn::compose(member.f.clone(), psi.clone()).unwrap();
            let rhs = mu.pair(&composed).unwrap();
            assert!(
                (lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()),
                "{}: {lhs} vs {rhs}",
                member.name
            );
        }
    }

    #[test]
    fn psi_zero_image_is_young_lift() {
        let space = interval(0.0, 1.0, 3);
        let mu = sample_random_gym(&space, 1, 25, 41);
        let projected = mu.image(&HomMap::psi_zero(1)).unwrap();
        let young_lift = lift_young(&mu.decompose().unwrap().0).unwrap();
        let battery = Battery::standard(&space, 1, 10, 2).unwrap();
        assert!(projected.wstar_gap(&young_lift, &battery).unwrap() <= 1e-13);
    }

    #[test]
    fn image_functoriality_on_parts() {
        // The decomposition of an image is the image of the decomposition.
        let space = interval(0.0, 1.0, 3);
        let mu = sample_random_gym(&space, 2, 25, 43);
        let psi = HomMap::components(
            2,
            vec![
                HomFn::linear_const(vec![0.5, -1.0], 0.0),
                HomFn::linear_const(vec![1.0, 0.25], 0.0),
            ],
        )
        .unwrap();
        let mapped = mu.image(&psi).unwrap();
        let (young_of_image, varifold_of_image) = mapped.decompose().unwrap();
        let (young, varifold) = mu.decompose().unwrap();
        let image_of_young = lift_young(&young).unwrap().image(&psi).unwrap();
        let battery = Battery::standard(&space, 2, 10, 3).unwrap();
        let lifted = lift_young(&young_of_image).unwrap();
        assert!(lifted.wstar_gap(&image_of_young, &battery).unwrap() <= 1e-12);
        for member in battery.members() {
            // Varifold side: recession pairings of the mapped part match the
            // mapped recession pairings.
            let lhs = varifold_of_image.pair_at_zero(&member.f).unwrap();
            let composed = HomFn::compose(member.f.clone(), psi.clone()).unwrap();
            let rhs = varifold.pair_at_zero(&composed).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn barycentre_inverts_lift() {
        let space = interval(0.0, 1.0, 6);
        let mut rng = numeric::seeded_rng(57);
        for _ in 0..20 {
            let p = crate::sample::random_measure_with(&space, 2, &mut rng).unwrap();
            let bar = lift_measure(&p).unwrap().barycentre();
            assert!(bar.tv_distance(&p).unwrap() <= 1e-12 * (1.0 + p.total_variation()));
        }
    }

    #[test]
    fn barycentre_of_symmetric_oscillation_vanishes() {
        let space = interval(-1.0, 1.0, 4);
        let bar = two_point_oscillation(&space).barycentre();
        assert!(bar.total_variation() < 1e-14);
    }

    #[test]
    fn barycentre_norm_bound() {
        let space = interval(0.0, 1.0, 4);
        for seed in 0..100 {
            let mu = sample_random_gym(&space, 2, 12, seed);
            assert!(mu.barycentre().total_variation() <= mu.norm_star() + 1e-12);
        }
    }

    #[test]
    fn project_x_special_cases() {
        let space = interval(0.0, 1.0, 4);
        let mu = sample_random_gym(&space, 2, 20, 61);

        // h = eta recovers the reference measure.
        let h_eta = HomMap::components(2, vec![HomFn::EtaPart]).unwrap();
        let lambda = mu.project_x(&h_eta).unwrap();
        for row in lambda.ac() {
            assert!((row[0] - 1.0).abs() < 1e-12);
        }
        assert!(lambda.singular().is_empty());

        // h = xi is the barycentre.
        let h_xi = HomMap::identity(2);
        let bar1 = mu.project_x(&h_xi).unwrap();
        let bar2 = mu.barycentre();
        assert!(bar1.tv_distance(&bar2).unwrap() < 1e-13);

        // Norm bound with a generic h.
        let h = HomMap::components(
            2,
            vec![HomFn::max(
                HomFn::linear_const(vec![0.6, -0.3], 0.1),
                HomFn::linear_const(vec![-0.2, 0.5], 0.0),
            )
            .unwrap()],
        )
        .unwrap();
        let proj = mu.project_x(&h).unwrap();
        let h_bound = h
            .components_ref()
            .unwrap()
            .iter()
            .map(|c| c.hom_norm_bound().unwrap())
            .fold(0.0f64, f64::max);
        assert!(proj.total_variation() <= h_bound * mu.norm_star() + 1e-12);
    }

    #[test]
    fn jensen_gap_examples() {
        let space = interval(-1.0, 1.0, 4);
        let osc = two_point_oscillation(&space);
        // XiNorm: <f, mu> = lambda(X), barycentre is 0, so the gap is 2.
        let gap = osc.jensen_gap(&HomFn::XiNorm).unwrap();
        assert!((gap - 2.0).abs() < 1e-12);

        // Linear forms give equality.
        let f = HomFn::linear_const(vec![0.7], -0.2);
        let mu = sample_random_gym(&space, 1, 15, 71);
        assert!(mu.jensen_gap(&f).unwrap().abs() <= 1e-12);

        // Min of linear forms is not convex: rejected.
        let bad = HomFn::min(
            HomFn::linear_const(vec![1.0], 0.0),
            HomFn::linear_const(vec![-1.0], 0.0),
        )
        .unwrap();
        assert!(osc.jensen_gap(&bad).is_err());
    }

    /// Perspective double well `min(|xi - eta|, |xi + eta|)` and its convex
    /// envelope `(|xi| - eta)^+` (for eta >= 0).
    fn double_well() -> (HomFn, HomFn) {
        let l1 = HomFn::linear_const(vec![1.0], -1.0);
        let l2 = HomFn::linear_const(vec![1.0], 1.0);
        let abs = |l: HomFn| {
            HomFn::max(
                l.clone(),
                HomFn::diff(HomFn::linear_const(vec![0.0], 0.0), l).unwrap(),
            )
            .unwrap()
        };
        let f = HomFn::min(abs(l1), abs(l2)).unwrap();
        let cof = HomFn::positive_part(HomFn::diff(HomFn::XiNorm, HomFn::EtaPart).unwrap());
        (f, cof)
    }

    #[test]
    fn contact_support_check_on_wells() {
        let space = interval(-1.0, 1.0, 2);
        let (f, cof) = double_well();
        // Measure supported exactly on the wells xi/eta = +-1.
        let wells = two_point_oscillation(&space);
        assert!(wells.contact_support_check(&f, &cof, 1e-10).unwrap());

        // Trivial case f = cof convex, measure without oscillation: the
        // hypothesis <f, mu> <= <cof, bar lift> holds with equality and
        // every atom is in contact.
        let p = crate::sample::random_measure(&space, 1, 83).unwrap();
        let mu = lift_measure(&p).unwrap();
        assert!(mu
            .contact_support_check(&HomFn::EuclidNorm, &HomFn::EuclidNorm, 1e-9)
            .unwrap());

        // An atom strictly inside the non-contact region. With the true
        // convex envelope the lemma's hypothesis cannot hold for such a
        // measure (Jensen forces contact), so the precondition fails: that
        // must be an error, not `false`.
        let mut atoms: Vec<Atom> = Vec::new();
        for cell in 0..space.num_cells() {
            let lambda = space.cell_measure(cell);
            atoms.push(Atom::new(cell, vec![1.0], 1.0, 0.25 * lambda));
            atoms.push(Atom::new(cell, vec![-1.0], 1.0, 0.25 * lambda));
            atoms.push(Atom::new(cell, vec![0.0], 1.0, 0.5 * lambda));
        }
        let inside = DiscreteGym::new(space.clone(), 1, atoms).unwrap();
        assert!(inside.contact_support_check(&f, &cof, 1e-10).is_err());

        // The false branch: a declared minorant that is not convex admits
        // measures with off-contact atoms. (eta - |xi|)^+ <= ||xi| - eta| = f
        // everywhere on eta >= 0, peaks where the barycentre lift sits, and
        // the atom at xi/eta = 3 is strictly off contact.
        let shallow = HomFn::positive_part(HomFn::diff(HomFn::EtaPart, HomFn::XiNorm).unwrap());
        let mut atoms: Vec<Atom> = Vec::new();
        for cell in 0..space.num_cells() {
            let lambda = space.cell_measure(cell);
            atoms.push(Atom::new(cell, vec![3.0], 1.0, 0.1 * lambda));
            atoms.push(Atom::new(cell, vec![1.0], 1.0, 0.1 * lambda));
            atoms.push(Atom::new(cell, vec![-1.0], 1.0, 0.4 * lambda));
            atoms.push(Atom::new(cell, vec![0.0], 1.0, 0.4 * lambda));
        }
        let witness = DiscreteGym::new(space.clone(), 1, atoms).unwrap();
        assert!(!witness.contact_support_check(&f, &shallow, 0.01).unwrap());
    }

    #[test]
    fn declared_envelope_jensen_chain() {
        // <cof, lift(bar mu)> <= <f, mu> for any declared convex minorant:
        // Jensen for cof followed by the minorant property.
        let space = interval(-1.0, 1.0, 3);
        let (f, cof) = double_well();
        for seed in 0..20 {
            let mu = sample_random_gym(&space, 1, 12, seed);
            let lhs = lift_measure(&mu.barycentre()).unwrap().pair(&cof).unwrap();
            let rhs = mu.pair(&f).unwrap();
            assert!(lhs <= rhs + 1e-12, "seed {seed}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn wstar_gap_separates_and_vanishes() {
        let space = interval(0.0, 1.0, 5);
        let battery = Battery::standard(&space, 1, 12, 4).unwrap();
        let mu = sample_random_gym(&space, 1, 20, 91);
        assert_eq!(mu.wstar_gap(&mu, &battery).unwrap(), 0.0);
        let nu = sample_random_gym(&space, 1, 20, 92);
        let gap = mu.wstar_gap(&nu, &battery).unwrap();
        assert!(gap > 0.0);
        let back = nu.wstar_gap(&mu, &battery).unwrap();
        assert!((gap - back).abs() < 1e-15);
    }

    #[test]
    fn wstar_gap_oscillation_refinement_rate() {
        // Lifts of w(n x) approach the two-point Young measure at rate 1/n.
        let space = interval(-1.0, 1.0, 10);
        let battery = Battery::standard(&space, 1, 12, 6).unwrap();
        let target = two_point_oscillation(&space);
        let mut previous = f64::INFINITY;
        for k in 0..4 {
            let n = 3.0 * (1u32 << k) as f64; // off-grid frequencies
            let mu = crate::approx::dilated_profile_lift(
                &crate::approx::StepProfile::square_wave(),
                1.0 / n,
                &space,
            )
            .unwrap();
            let gap = mu.wstar_gap(&target, &battery).unwrap();
            assert!(gap <= 4.0 / n, "n = {n}: gap {gap}");
            assert!(gap <= previous + 1e-12);
            previous = gap;
        }
        // Norm convergence along the family (EuclidNorm is in the battery).
        let n = 48.0;
        let mu = crate::approx::dilated_profile_lift(
            &crate::approx::StepProfile::square_wave(),
            1.0 / n,
            &space,
        )
        .unwrap();
        assert!((mu.norm_star() - target.norm_star()).abs() <= 4.0 / n);
    }

    #[test]
    fn disintegration_is_probability() {
        let space = interval(0.0, 1.0, 3);
        // Constant function: one atom per cell with probability 1.
        let (young, _) = lift_measure(&density(&space, 2.0))
            .unwrap()
            .decompose()
            .unwrap();
        for cell in young.disintegrate() {
            assert_eq!(cell.len(), 1);
            assert!((cell[0].1 - 1.0).abs() < 1e-12);
        }
        // Two-point oscillation: probabilities one half each.
        let osc = two_point_oscillation(&space);
        let (young, _) = osc.decompose().unwrap();
        for cell in young.disintegrate() {
            assert_eq!(cell.len(), 2);
            for (_, p) in cell {
                assert!((p - 0.5).abs() < 1e-12);
            }
        }
        // Random young parts: probabilities sum to one per cell.
        let mu = sample_random_gym(&space, 2, 30, 97);
        let (young, _) = mu.decompose().unwrap();
        for cell in young.disintegrate() {
            let total: f64 = cell.iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn lower_semicontinuity_surrogate_for_moments() {
        // <P_2, weak* limit> <= liminf <P_2, mu_n> along the oscillation
        // family (here the pairings are equal: no concentration develops).
        let space = interval(-1.0, 1.0, 10);
        let target = two_point_oscillation(&space);
        let p2 = HomFn::pr_moment(2.0).unwrap();
        let limit_pairing = target.pair(&p2).unwrap();
        for k in 1..5 {
            let n = 3.0 * (1u32 << k) as f64;
            let mu = crate::approx::dilated_profile_lift(
                &crate::approx::StepProfile::square_wave(),
                1.0 / n,
                &space,
            )
            .unwrap();
            assert!(limit_pairing <= mu.pair(&p2).unwrap() + 1e-9);
        }
    }

    #[test]
    fn battery_rejects_unbounded_and_oversized_members() {
        let space = interval(0.0, 1.0, 2);
        assert!(
            Battery::new(&space, vec![("p2".into(), HomFn::pr_moment(2.0).unwrap())]).is_err()
        );
        let too_big = HomFn::linear_const(vec![3.0], 0.0);
        assert!(Battery::new(&space, vec![("big".into(), too_big)]).is_err());
    }

    #[test]
    fn standard_battery_members_are_normalized() {
        let space = interval(0.0, 1.0, 7);
        let battery = Battery::standard(&space, 2, 20, 9).unwrap();
        assert_eq!(battery.len(), 20);
        for member in battery.members() {
            assert!(member.f.hom_norm_bound().unwrap() <= 1.0 + 1e-9);
        }
        // Deterministic for a fixed seed.
        let again = Battery::standard(&space, 2, 20, 9).unwrap();
        let mu = sample_random_gym(&space, 2, 15, 3);
        assert_eq!(battery.pairings(&mu).unwrap(), again.pairings(&mu).unwrap());
    }

    fn sample_random_gym(space: &SpaceModel, dim: usize, atoms: usize, seed: u64) -> DiscreteGym {
        crate::sample::random_gym(space, dim, atoms, seed).unwrap()
    }

    #[test]
    fn linear_combination_of_measures() {
        let space = interval(0.0, 1.0, 3);
        let p = density(&space, 1.0);
        let q = density(&space, 2.0);
        let combo = p.linear_combination(2.0, &q, -1.0).unwrap();
        assert!(
            combo
                .tv_distance(&DiscreteMeasure::zero(space, 1).unwrap())
                .unwrap()
                < 1e-15
        );
    }
}
