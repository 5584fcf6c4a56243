//! Positively one-homogeneous test functions on `X x Xi x R`.
//!
//! Test functions are built from a closed combinator algebra, so homogeneity
//! `f(x, t xi, t eta) = t f(x, xi, eta)` (t >= 0) is a construction guarantee
//! rather than a runtime hope. [`HomFn::raw`] is the one escape hatch; it is
//! flagged unverified and [`classify`](HomFn::classify) is mandatory before a
//! raw callback participates in any verification battery.
//!
//! The point `(xi, eta)` lives in homogeneous coordinates: `eta = 1` slices
//! are ordinary state values, `eta = 0` rays are directions at infinity.

use crate::numeric::{self, distance, dot, joint_norm, norm, pairwise_sum, scale};
use crate::space::SpaceModel;
use crate::{GymError, Result};
use rand::Rng;
use std::fmt;
use std::sync::Arc;

/// A `Xi`-vector field on the cells of `X`: either one constant vector or one
/// vector per cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Const(Vec<f64>),
    PerCell(Vec<Vec<f64>>),
}

impl Field {
    pub fn dim(&self) -> usize {
        match self {
            Field::Const(v) => v.len(),
            Field::PerCell(rows) => rows.first().map_or(0, Vec::len),
        }
    }

    fn at(&self, cell: usize) -> Result<&[f64]> {
        match self {
            Field::Const(v) => Ok(v),
            Field::PerCell(rows) => rows.get(cell).map(Vec::as_slice).ok_or(
                GymError::CellOutOfRange {
                    cell,
                    cells: rows.len(),
                },
            ),
        }
    }

    fn max_norm(&self) -> f64 {
        match self {
            Field::Const(v) => norm(v),
            Field::PerCell(rows) => rows.iter().map(|r| norm(r)).fold(0.0, f64::max),
        }
    }
}

/// A scalar field on the cells of `X`.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarField {
    Const(f64),
    PerCell(Vec<f64>),
}

impl ScalarField {
    fn at(&self, cell: usize) -> Result<f64> {
        match self {
            ScalarField::Const(v) => Ok(*v),
            ScalarField::PerCell(vals) => {
                vals.get(cell).copied().ok_or(GymError::CellOutOfRange {
                    cell,
                    cells: vals.len(),
                })
            }
        }
    }

    fn max_abs(&self) -> f64 {
        match self {
            ScalarField::Const(v) => v.abs(),
            ScalarField::PerCell(vals) => vals.iter().map(|v| v.abs()).fold(0.0, f64::max),
        }
    }
}

/// An unverified user-supplied evaluator with declared growth bounds
/// `|f(x, xi, eta)| <= a |xi| + b(x) |eta|`.
#[derive(Clone)]
pub struct RawCallback {
    pub label: String,
    pub bound_a: f64,
    pub bound_b: ScalarField,
    pub dim_xi: Option<usize>,
    func: Arc<dyn Fn(usize, &[f64], f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for RawCallback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RawCallback")
            .field("label", &self.label)
            .field("bound_a", &self.bound_a)
            .finish_non_exhaustive()
    }
}

/// A positively one-homogeneous test function `f(x, xi, eta)`.
#[derive(Debug, Clone)]
pub enum HomFn {
    /// `a(x) . xi + b(x) eta`.
    Linear { a: Field, b: ScalarField },
    /// `sqrt(|xi|^2 + eta^2)`.
    EuclidNorm,
    /// `|xi|`.
    XiNorm,
    /// `eta`.
    EtaPart,
    /// `max(f, 0)`.
    PositivePart(Box<HomFn>),
    Min(Box<HomFn>, Box<HomFn>),
    Max(Box<HomFn>, Box<HomFn>),
    /// `sum_i c_i f_i` with `c_i >= 0`.
    Combine(Vec<(f64, HomFn)>),
    /// `f - g`; the algebra of differences of subadditive functions is dense
    /// among homogeneous functions, so this is where convex splits live.
    Diff(Box<HomFn>, Box<HomFn>),
    /// `f(x, phi(x, xi, eta), eta)` for a homogeneous map `phi`.
    Compose(Box<HomFn>, HomMap),
    /// `|xi|^r / eta^(r-1)` for `eta > 0`, `+inf` for `eta <= 0`. Finite
    /// pairings against this moment detect the absence of concentration.
    PrMoment { r: f64 },
    /// Discrete Moreau-Yosida envelope of `inner` (see [`HomFn::moreau_yosida`]).
    MoreauYosida {
        inner: Box<HomFn>,
        k: f64,
        search: MoreauSearch,
        joint: bool,
    },
    /// Escape hatch; unverified, run [`HomFn::classify`] before trusting it.
    Raw(RawCallback),
}

impl HomFn {
    pub fn linear(a: Field, b: ScalarField) -> Self {
        HomFn::Linear { a, b }
    }

    /// Constant-coefficient linear form `a . xi + b eta`.
    pub fn linear_const(a: Vec<f64>, b: f64) -> Self {
        HomFn::Linear {
            a: Field::Const(a),
            b: ScalarField::Const(b),
        }
    }

    pub fn positive_part(f: HomFn) -> Self {
        HomFn::PositivePart(Box::new(f))
    }

    pub fn min(f: HomFn, g: HomFn) -> Result<Self> {
        check_dims_merge(&f, &g)?;
        Ok(HomFn::Min(Box::new(f), Box::new(g)))
    }

    pub fn max(f: HomFn, g: HomFn) -> Result<Self> {
        check_dims_merge(&f, &g)?;
        Ok(HomFn::Max(Box::new(f), Box::new(g)))
    }

    pub fn scale(c: f64, f: HomFn) -> Result<Self> {
        HomFn::combine(vec![(c, f)])
    }

    /// Nonnegative combination `sum c_i f_i`.
    pub fn combine(terms: Vec<(f64, HomFn)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(GymError::Empty("combination"));
        }
        if terms.iter().any(|(c, _)| !c.is_finite() || *c < 0.0) {
            return Err(GymError::Precondition(
                "combination coefficients must be finite and nonnegative".into(),
            ));
        }
        let mut dim = None;
        for (_, f) in &terms {
            dim = merge_dims(dim, f.dim_xi())?;
        }
        Ok(HomFn::Combine(terms))
    }

    pub fn diff(f: HomFn, g: HomFn) -> Result<Self> {
        check_dims_merge(&f, &g)?;
        Ok(HomFn::Diff(Box::new(f), Box::new(g)))
    }

    pub fn compose(f: HomFn, map: HomMap) -> Result<Self> {
        if let Some(d) = f.dim_xi() {
            if d != map.dim_out {
                return Err(GymError::DimensionMismatch {
                    expected: map.dim_out,
                    got: d,
                });
            }
        }
        Ok(HomFn::Compose(Box::new(f), map))
    }

    pub fn pr_moment(r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 1.0) {
            return Err(GymError::Precondition(format!(
                "moment exponent must satisfy r > 1, got {r}"
            )));
        }
        Ok(HomFn::PrMoment { r })
    }

    pub fn raw(
        label: impl Into<String>,
        bound_a: f64,
        bound_b: ScalarField,
        dim_xi: Option<usize>,
        func: impl Fn(usize, &[f64], f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        HomFn::Raw(RawCallback {
            label: label.into(),
            bound_a,
            bound_b,
            dim_xi,
            func: Arc::new(func),
        })
    }

    /// The `Xi`-dimension the tree commits to, if any. `None` means the
    /// function is dimension-generic (norms, moments).
    pub fn dim_xi(&self) -> Option<usize> {
        match self {
            HomFn::Linear { a, .. } => match a {
                Field::Const(v) => Some(v.len()),
                Field::PerCell(rows) => rows.first().map(Vec::len),
            },
            HomFn::EuclidNorm | HomFn::XiNorm | HomFn::EtaPart | HomFn::PrMoment { .. } => None,
            HomFn::PositivePart(f) => f.dim_xi(),
            HomFn::Min(f, g) | HomFn::Max(f, g) | HomFn::Diff(f, g) => {
                f.dim_xi().or(g.dim_xi())
            }
            HomFn::Combine(terms) => terms.iter().find_map(|(_, f)| f.dim_xi()),
            HomFn::Compose(_, map) => Some(map.dim_in),
            HomFn::MoreauYosida { inner, search, joint, .. } => inner.dim_xi().or(Some(
                if *joint {
                    search.directions.dim() - 1
                } else {
                    search.directions.dim()
                },
            )),
            HomFn::Raw(raw) => raw.dim_xi,
        }
    }

    /// Whether the tree contains a lower-semicontinuous moment and may
    /// legally evaluate to `+inf`.
    pub fn may_reach_infinity(&self) -> bool {
        match self {
            HomFn::PrMoment { .. } => true,
            HomFn::PositivePart(f) => f.may_reach_infinity(),
            HomFn::Min(f, g) | HomFn::Max(f, g) | HomFn::Diff(f, g) => {
                f.may_reach_infinity() || g.may_reach_infinity()
            }
            HomFn::Combine(terms) => terms.iter().any(|(_, f)| f.may_reach_infinity()),
            HomFn::Compose(f, _) => f.may_reach_infinity(),
            HomFn::MoreauYosida { inner, .. } => inner.may_reach_infinity(),
            _ => false,
        }
    }

    /// Whether the tree contains an unverified raw callback.
    pub fn contains_raw(&self) -> bool {
        match self {
            HomFn::Raw(_) => true,
            HomFn::PositivePart(f) => f.contains_raw(),
            HomFn::Min(f, g) | HomFn::Max(f, g) | HomFn::Diff(f, g) => {
                f.contains_raw() || g.contains_raw()
            }
            HomFn::Combine(terms) => terms.iter().any(|(_, f)| f.contains_raw()),
            HomFn::Compose(f, map) => f.contains_raw() || map.contains_raw(),
            HomFn::MoreauYosida { inner, .. } => inner.contains_raw(),
            _ => false,
        }
    }

    /// Evaluate `f(x, xi, eta)`. `+inf` is a legal result only for trees
    /// containing [`HomFn::PrMoment`]; `NaN` and `-inf` are always errors,
    /// as is any non-finite value coming out of a raw callback.
    pub fn eval(&self, cell: usize, xi: &[f64], eta: f64) -> Result<f64> {
        if let Some(d) = self.dim_xi() {
            if d != xi.len() {
                return Err(GymError::DimensionMismatch {
                    expected: d,
                    got: xi.len(),
                });
            }
        }
        let v = self.eval_unchecked(cell, xi, eta)?;
        if v.is_nan() || v == f64::NEG_INFINITY {
            return Err(GymError::NonFinite {
                context: "homogeneous function evaluation".into(),
            });
        }
        if v == f64::INFINITY && !self.may_reach_infinity() {
            return Err(GymError::NonFinite {
                context: "bounded homogeneous function returned +inf".into(),
            });
        }
        Ok(v)
    }

    fn eval_unchecked(&self, cell: usize, xi: &[f64], eta: f64) -> Result<f64> {
        match self {
            HomFn::Linear { a, b } => {
                let av = a.at(cell)?;
                if av.len() != xi.len() {
                    return Err(GymError::DimensionMismatch {
                        expected: av.len(),
                        got: xi.len(),
                    });
                }
                Ok(dot(av, xi) + b.at(cell)? * eta)
            }
            HomFn::EuclidNorm => Ok(joint_norm(xi, eta)),
            HomFn::XiNorm => Ok(norm(xi)),
            HomFn::EtaPart => Ok(eta),
            HomFn::PositivePart(f) => Ok(f.eval_unchecked(cell, xi, eta)?.max(0.0)),
            HomFn::Min(f, g) => Ok(f
                .eval_unchecked(cell, xi, eta)?
                .min(g.eval_unchecked(cell, xi, eta)?)),
            HomFn::Max(f, g) => Ok(f
                .eval_unchecked(cell, xi, eta)?
                .max(g.eval_unchecked(cell, xi, eta)?)),
            HomFn::Combine(terms) => {
                let mut acc = 0.0;
                for (c, f) in terms {
                    let v = f.eval_unchecked(cell, xi, eta)?;
                    // Measure-theoretic convention: 0 * inf = 0.
                    if *c != 0.0 {
                        acc += c * v;
                    }
                }
                Ok(acc)
            }
            HomFn::Diff(f, g) => {
                Ok(f.eval_unchecked(cell, xi, eta)? - g.eval_unchecked(cell, xi, eta)?)
            }
            HomFn::Compose(f, map) => {
                let image = map.apply(cell, xi, eta)?;
                f.eval_unchecked(cell, &image, eta)
            }
            HomFn::PrMoment { r } => {
                if eta > 0.0 {
                    Ok(norm(xi).powf(*r) / eta.powf(r - 1.0))
                } else if norm(xi) == 0.0 && eta == 0.0 {
                    // Apex of the cone; canonical atoms never sit here.
                    Ok(f64::INFINITY)
                } else {
                    Ok(f64::INFINITY)
                }
            }
            HomFn::MoreauYosida {
                inner,
                k,
                search,
                joint,
            } => moreau_eval(inner, *k, search, *joint, cell, xi, eta),
            HomFn::Raw(raw) => {
                let v = (raw.func)(cell, xi, eta);
                if !v.is_finite() {
                    return Err(GymError::NonFinite {
                        context: format!("raw callback '{}'", raw.label),
                    });
                }
                Ok(v)
            }
        }
    }

    /// Analytic upper bound for `sup |f|` over `X x Sigma_(Xi x R)`, when the
    /// tree shape admits one. `None` means unbounded (moments).
    pub fn hom_norm_bound(&self) -> Option<f64> {
        match self {
            HomFn::Linear { a, b } => {
                // sup over the joint unit sphere of a.xi + b eta is |(a, b)|.
                let bound = match (a, b) {
                    (Field::PerCell(rows), ScalarField::PerCell(bs)) => rows
                        .iter()
                        .zip(bs)
                        .map(|(r, bb)| (dot(r, r) + bb * bb).sqrt())
                        .fold(0.0, f64::max),
                    _ => {
                        let an = a.max_norm();
                        let bn = b.max_abs();
                        (an * an + bn * bn).sqrt()
                    }
                };
                Some(bound)
            }
            HomFn::EuclidNorm | HomFn::XiNorm | HomFn::EtaPart => Some(1.0),
            HomFn::PositivePart(f) => f.hom_norm_bound(),
            HomFn::Min(f, g) | HomFn::Max(f, g) => {
                Some(f.hom_norm_bound()?.max(g.hom_norm_bound()?))
            }
            HomFn::Combine(terms) => {
                let mut acc = 0.0;
                for (c, f) in terms {
                    acc += c * f.hom_norm_bound()?;
                }
                Some(acc)
            }
            HomFn::Diff(f, g) => Some(f.hom_norm_bound()? + g.hom_norm_bound()?),
            HomFn::Compose(f, map) => {
                let mut phi_sq = 1.0; // the eta slot passes through
                for comp in map.component_bounds()? {
                    phi_sq += comp * comp;
                }
                Some(f.hom_norm_bound()? * phi_sq.sqrt())
            }
            HomFn::PrMoment { .. } => None,
            HomFn::MoreauYosida { k, .. } => Some(*k),
            HomFn::Raw(raw) => {
                let a = raw.bound_a;
                let b = raw.bound_b.max_abs();
                Some((a * a + b * b).sqrt())
            }
        }
    }

    /// Grid maximum of `|f|` over cells x directions of the joint unit
    /// sphere. This is a lower bound of the true sup norm; its defect is
    /// controlled by the grid's covering radius times a Lipschitz estimate.
    pub fn hom_norm(&self, space: &SpaceModel, grid: &DirectionGrid) -> Result<f64> {
        if grid.directions.is_empty() {
            return Err(GymError::Empty("direction grid"));
        }
        let mut best = 0.0f64;
        for cell in 0..space.num_cells() {
            for dir in &grid.directions {
                let (xi, eta) = split_joint(dir);
                let v = self.eval(cell, xi, eta)?;
                if !v.is_finite() {
                    return Err(GymError::NonFinite {
                        context: "hom_norm evaluation on the sphere grid".into(),
                    });
                }
                best = best.max(v.abs());
            }
        }
        Ok(best)
    }

    /// Discrete Moreau-Yosida envelope `f_k(x, z) = min { f(x, z') + k |z' - z| }`
    /// with the minimisation restricted to rays through the search directions
    /// (plus the query's own ray and the origin). Queries are normalised to
    /// the unit sphere first, so positive one-homogeneity holds exactly.
    ///
    /// `joint = true` minimises over `(xi, eta)` jointly; `joint = false`
    /// minimises in `xi` at the query's (normalised) `eta`. The envelope is
    /// `k`-Lipschitz along the search set, monotone nondecreasing in `k`, and
    /// never exceeds `f`.
    pub fn moreau_yosida(self, k: f64, search: MoreauSearch, joint: bool) -> Result<HomFn> {
        if search.directions.directions.is_empty() || search.radii.is_empty() {
            return Err(GymError::Empty("Moreau-Yosida search grid"));
        }
        if let Some(bound) = self.hom_norm_bound() {
            if k <= bound {
                return Err(GymError::Precondition(format!(
                    "Moreau-Yosida slope k = {k} must exceed the norm bound {bound} \
                     (the ray minimum is unbounded below otherwise)"
                )));
            }
        }
        let expected_dim = if joint {
            self.dim_xi().map(|d| d + 1)
        } else {
            self.dim_xi()
        };
        if let Some(d) = expected_dim {
            if d != search.directions.dim() {
                return Err(GymError::DimensionMismatch {
                    expected: d,
                    got: search.directions.dim(),
                });
            }
        }
        Ok(HomFn::MoreauYosida {
            inner: Box::new(self),
            k,
            search,
            joint,
        })
    }

    /// Sampled diagnostic report: homogeneity defect, empirical Lipschitz
    /// constant in `xi`, and subadditivity (triangle inequality) defect, all
    /// maxima over seeded random draws. Never fails; the caller decides what
    /// the numbers mean.
    pub fn classify(&self, space: &SpaceModel, samples: usize, seed: u64) -> ClassReport {
        let dim = self.dim_xi().unwrap_or(1);
        let mut rng = numeric::seeded_rng(seed);
        let mut hom_defect = 0.0f64;
        let mut lipschitz = 0.0f64;
        let mut triangle = 0.0f64;
        let cells = space.num_cells();
        for _ in 0..samples {
            let cell = rng.random_range(0..cells);
            let xi1: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let xi2: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let eta1: f64 = rng.random_range(0.0..2.0);
            let eta2: f64 = rng.random_range(0.0..2.0);
            let t: f64 = rng.random_range(0.0..2.0);

            let f1 = self.eval_unchecked(cell, &xi1, eta1).unwrap_or(f64::NAN);
            let f2 = self.eval_unchecked(cell, &xi2, eta2).unwrap_or(f64::NAN);
            let f2_at_eta1 = self.eval_unchecked(cell, &xi2, eta1).unwrap_or(f64::NAN);

            let scaled: Vec<f64> = xi1.iter().map(|v| v * t).collect();
            let f_scaled = self
                .eval_unchecked(cell, &scaled, t * eta1)
                .unwrap_or(f64::NAN);
            hom_defect = hom_defect.max(abs_diff_ext(f_scaled, t * f1));

            let dxi = distance(&xi1, &xi2);
            if dxi > 1e-9 && f1.is_finite() && f2_at_eta1.is_finite() {
                lipschitz = lipschitz.max((f1 - f2_at_eta1).abs() / dxi);
            }

            let sum_xi: Vec<f64> = xi1.iter().zip(&xi2).map(|(a, b)| a + b).collect();
            let f_sum = self
                .eval_unchecked(cell, &sum_xi, eta1 + eta2)
                .unwrap_or(f64::NAN);
            if f_sum.is_finite() || f1.is_finite() || f2.is_finite() {
                let defect = f_sum - f1 - f2;
                if defect.is_finite() {
                    triangle = triangle.max(defect.max(0.0));
                } else if defect == f64::INFINITY {
                    triangle = f64::INFINITY;
                }
            }
        }
        ClassReport {
            homogeneity_defect: hom_defect,
            lipschitz_xi: lipschitz,
            triangle_defect: triangle,
            samples,
            seed,
        }
    }

    /// Convex splitting `f = f1 - f2` with `f1 = c |xi|` and `f2 = c |xi| - f`,
    /// where `c` makes the tangential second differences of `f2` positive
    /// semidefinite at every sampled sphere point (so `f2` is convex in `xi`
    /// along the sampled sphere, hence subadditive). The returned `c` is the
    /// grid maximum of the tangential Hessian bound inflated by 5%.
    ///
    /// `f` is probed at `eta = 0`; the certificate is about the `xi`-slice.
    pub fn convex_split(
        &self,
        space: &SpaceModel,
        sphere: &DirectionGrid,
    ) -> Result<(f64, HomFn, HomFn)> {
        if sphere.directions.is_empty() {
            return Err(GymError::Empty("sphere grid"));
        }
        let dim = sphere.dim();
        if let Some(d) = self.dim_xi() {
            if d != dim {
                return Err(GymError::DimensionMismatch {
                    expected: d,
                    got: dim,
                });
            }
        }
        let mut c_needed = 0.0f64;
        if dim == 1 {
            // One-homogeneous g on R is convex iff g(1) + g(-1) >= 0, so the
            // smallest admissible c is max over cells of (f(1) + f(-1)) / 2.
            for cell in 0..space.num_cells() {
                let fp = self.eval(cell, &[1.0], 0.0)?;
                let fm = self.eval(cell, &[-1.0], 0.0)?;
                c_needed = c_needed.max((fp + fm) / 2.0);
            }
        } else {
            let h = 1e-4;
            for cell in 0..space.num_cells() {
                for e in &sphere.directions {
                    let (hess, scale) = tangential_hessian(self, cell, e, h)?;
                    let (hess_half, _) = tangential_hessian(self, cell, e, h / 2.0)?;
                    let m = dim - 1;
                    let max_entry = hess.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                    // Rounding alone produces entries of order eps*|f|/h^2;
                    // curvature below that floor is indistinguishable from 0.
                    let noise_floor = 64.0 * f64::EPSILON * scale.max(1.0) / (h * h);
                    let disagreement: f64 = hess
                        .iter()
                        .zip(&hess_half)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    if disagreement > 0.25 * (1.0 + max_entry) + 8.0 * noise_floor {
                        return Err(GymError::NotTwiceDifferentiable(format!(
                            "second differences at cell {cell} disagree across steps \
                             ({disagreement:e} vs entry scale {max_entry:e})"
                        )));
                    }
                    let top = numeric::max_symmetric_eigenvalue(&hess, m);
                    if top > noise_floor {
                        c_needed = c_needed.max(top);
                    }
                }
            }
        }
        let c = if c_needed <= 1e-8 {
            // Within the PSD tolerance on the minimum eigenvalue.
            0.0
        } else {
            1.05 * c_needed
        };
        let f1 = HomFn::scale(c, HomFn::XiNorm)?;
        let f2 = HomFn::diff(f1.clone(), self.clone())?;
        Ok((c, f1, f2))
    }
}

fn abs_diff_ext(a: f64, b: f64) -> f64 {
    if a == b {
        // Covers the two-infinities case: agreeing values have zero defect.
        0.0
    } else {
        (a - b).abs()
    }
}

fn check_dims_merge(f: &HomFn, g: &HomFn) -> Result<()> {
    merge_dims(f.dim_xi(), g.dim_xi()).map(|_| ())
}

fn merge_dims(a: Option<usize>, b: Option<usize>) -> Result<Option<usize>> {
    match (a, b) {
        (Some(x), Some(y)) if x != y => Err(GymError::DimensionMismatch {
            expected: x,
            got: y,
        }),
        (Some(x), _) => Ok(Some(x)),
        (_, y) => Ok(y),
    }
}

fn split_joint(dir: &[f64]) -> (&[f64], f64) {
    let (xi, eta) = dir.split_at(dir.len() - 1);
    (xi, eta[0])
}

/// Tangential Hessian of `xi -> f(x, xi, 0)` at the sphere point `e` by
/// central second differences of step `h` in an orthonormal tangent basis.
/// Also returns the largest `|f|` seen among the probes, the scale of the
/// rounding noise in the estimate.
fn tangential_hessian(f: &HomFn, cell: usize, e: &[f64], h: f64) -> Result<(Vec<f64>, f64)> {
    let basis = numeric::tangent_basis(e);
    let m = basis.len();
    let mut hess = vec![0.0; m * m];
    let fe = f.eval(cell, e, 0.0)?;
    let scale = std::cell::Cell::new(fe.abs());
    let at = |p: &[f64]| -> Result<f64> {
        let v = f.eval(cell, p, 0.0)?;
        scale.set(scale.get().max(v.abs()));
        Ok(v)
    };
    for i in 0..m {
        let plus: Vec<f64> = e.iter().zip(&basis[i]).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = e.iter().zip(&basis[i]).map(|(a, b)| a - h * b).collect();
        hess[i * m + i] = (at(&plus)? - 2.0 * fe + at(&minus)?) / (h * h);
        for j in (i + 1)..m {
            let pp: Vec<f64> = e
                .iter()
                .enumerate()
                .map(|(k, a)| a + h * (basis[i][k] + basis[j][k]))
                .collect();
            let pm: Vec<f64> = e
                .iter()
                .enumerate()
                .map(|(k, a)| a + h * (basis[i][k] - basis[j][k]))
                .collect();
            let mp: Vec<f64> = e
                .iter()
                .enumerate()
                .map(|(k, a)| a + h * (-basis[i][k] + basis[j][k]))
                .collect();
            let mm: Vec<f64> = e
                .iter()
                .enumerate()
                .map(|(k, a)| a - h * (basis[i][k] + basis[j][k]))
                .collect();
            let v = (at(&pp)? - at(&pm)? - at(&mp)? + at(&mm)?) / (4.0 * h * h);
            hess[i * m + j] = v;
            hess[j * m + i] = v;
        }
    }
    Ok((hess, scale.get()))
}

fn moreau_eval(
    inner: &HomFn,
    k: f64,
    search: &MoreauSearch,
    joint: bool,
    cell: usize,
    xi: &[f64],
    eta: f64,
) -> Result<f64> {
    let s = joint_norm(xi, eta);
    if s == 0.0 {
        return Ok(0.0);
    }
    let xi_hat = scale(xi, 1.0 / s);
    let eta_hat = eta / s;

    let mut best = f64::INFINITY;
    if joint {
        let query: Vec<f64> = xi_hat.iter().copied().chain([eta_hat]).collect();
        // xi' = 0 candidate: f(x, 0) = 0 by homogeneity.
        best = best.min(k);
        let mut consider = |dir: &[f64]| -> Result<()> {
            for &r in &search.radii {
                let cand = scale(dir, r);
                let (cx, ce) = split_joint(&cand);
                let v = inner.eval(cell, cx, ce)? + k * distance(&cand, &query);
                best = best.min(v);
            }
            Ok(())
        };
        for dir in &search.directions.directions {
            consider(dir)?;
        }
        // The query's own ray, so the envelope never exceeds f.
        consider(&query)?;
    } else {
        // f(x, 0, eta_hat) + k |xi_hat|.
        let zero = vec![0.0; xi.len()];
        best = best.min(inner.eval(cell, &zero, eta_hat)? + k * norm(&xi_hat));
        let mut consider = |dir: &[f64]| -> Result<()> {
            for &r in &search.radii {
                let cand = scale(dir, r);
                let v =
                    inner.eval(cell, &cand, eta_hat)? + k * distance(&cand, &xi_hat);
                best = best.min(v);
            }
            Ok(())
        };
        for dir in &search.directions.directions {
            consider(dir)?;
        }
        let xn = norm(&xi_hat);
        if xn > 0.0 {
            consider(&scale(&xi_hat, 1.0 / xn))?;
        }
    }
    Ok(s * best)
}

/// Report produced by [`HomFn::classify`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub homogeneity_defect: f64,
    pub lipschitz_xi: f64,
    pub triangle_defect: f64,
    pub samples: usize,
    pub seed: u64,
}

impl ClassReport {
    pub fn is_homogeneous(&self, tol: f64) -> bool {
        self.homogeneity_defect <= tol
    }

    pub fn is_subadditive(&self, tol: f64) -> bool {
        self.triangle_defect <= tol
    }
}

/// A finite list of unit directions with a declared covering radius (the
/// maximum angular gap to the nearest grid direction).
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionGrid {
    dim: usize,
    directions: Vec<Vec<f64>>,
    covering_radius: f64,
}

impl DirectionGrid {
    /// `{+1, -1}` on the 0-sphere.
    pub fn signs() -> Self {
        DirectionGrid {
            dim: 1,
            directions: vec![vec![1.0], vec![-1.0]],
            covering_radius: 0.0,
        }
    }

    /// `m` equally spaced directions on the circle.
    pub fn circle(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(GymError::Empty("direction grid"));
        }
        let directions = (0..m)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                vec![th.cos(), th.sin()]
            })
            .collect();
        Ok(DirectionGrid {
            dim: 2,
            directions,
            covering_radius: std::f64::consts::PI / m as f64,
        })
    }

    /// A product grid on the unit sphere of `R^dim` with `res` subdivisions
    /// per polar angle. For `dim <= 2` this falls back to the exact grids.
    /// The covering radius is the declared bound `pi/res * sqrt(dim - 1)`.
    pub fn sphere(dim: usize, res: usize) -> Result<Self> {
        match dim {
            0 => Err(GymError::Empty("direction grid")),
            1 => Ok(Self::signs()),
            2 => Self::circle(2 * res.max(1)),
            _ => {
                if res == 0 {
                    return Err(GymError::Empty("direction grid"));
                }
                let mut directions: Vec<Vec<f64>> = Vec::new();
                // Hyperspherical product: dim-2 polar angles in [0, pi],
                // one azimuthal angle in [0, 2 pi).
                let polar_steps = res + 1;
                let azimuth_steps = 2 * res;
                let mut angles = vec![0usize; dim - 1];
                loop {
                    let mut v = Vec::with_capacity(dim);
                    let mut sin_prod = 1.0;
                    for (axis, &step) in angles.iter().enumerate() {
                        let theta = if axis < dim - 2 {
                            std::f64::consts::PI * step as f64 / (polar_steps - 1).max(1) as f64
                        } else {
                            2.0 * std::f64::consts::PI * step as f64 / azimuth_steps as f64
                        };
                        v.push(sin_prod * theta.cos());
                        sin_prod *= theta.sin();
                    }
                    v.push(sin_prod);
                    let n = norm(&v);
                    if n > 1e-9 {
                        directions.push(scale(&v, 1.0 / n));
                    }
                    // Odometer increment.
                    let mut axis = 0;
                    loop {
                        angles[axis] += 1;
                        let limit = if axis < dim - 2 {
                            polar_steps
                        } else {
                            azimuth_steps
                        };
                        if angles[axis] < limit {
                            break;
                        }
                        angles[axis] = 0;
                        axis += 1;
                        if axis == dim - 1 {
                            let covering = std::f64::consts::PI / res as f64
                                * ((dim - 1) as f64).sqrt();
                            return Ok(DirectionGrid {
                                dim,
                                directions,
                                covering_radius: covering,
                            });
                        }
                    }
                }
            }
        }
    }

    /// Wrap caller-provided directions; every vector must be unit to 1e-12.
    pub fn from_directions(directions: Vec<Vec<f64>>, covering_radius: f64) -> Result<Self> {
        if directions.is_empty() {
            return Err(GymError::Empty("direction grid"));
        }
        let dim = directions[0].len();
        for d in &directions {
            if d.len() != dim {
                return Err(GymError::DimensionMismatch {
                    expected: dim,
                    got: d.len(),
                });
            }
            if (norm(d) - 1.0).abs() > 1e-12 {
                return Err(GymError::Precondition(format!(
                    "direction {d:?} is not unit (norm {})",
                    norm(d)
                )));
            }
        }
        Ok(DirectionGrid {
            dim,
            directions,
            covering_radius,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn covering_radius(&self) -> f64 {
        self.covering_radius
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }
}

/// Search set for the discrete Moreau-Yosida envelope: rays through grid
/// directions sampled at logarithmically spaced radii.
#[derive(Debug, Clone, PartialEq)]
pub struct MoreauSearch {
    pub directions: DirectionGrid,
    pub radii: Vec<f64>,
}

impl MoreauSearch {
    /// Log-spaced radii in `[1e-3, 1e3]` (8 per decade, including 1 exactly).
    pub fn standard(directions: DirectionGrid) -> Self {
        let radii = (0..=48)
            .map(|i| 10f64.powf(-3.0 + i as f64 * 6.0 / 48.0))
            .collect();
        MoreauSearch { directions, radii }
    }
}

/// A homogeneous state map `psi(x, xi, eta) = (x, phi(x, xi, eta), eta)`:
/// the `x` and `eta` slots pass through, `phi` is positively one-homogeneous
/// componentwise. Images of measures under such maps stay measures.
#[derive(Debug, Clone)]
pub struct HomMap {
    pub dim_in: usize,
    pub dim_out: usize,
    kind: HomMapKind,
}

#[derive(Debug, Clone)]
enum HomMapKind {
    Components(Vec<HomFn>),
    /// Sends `eta = 0` rays to the origin and fixes everything else; the
    /// image keeps exactly the oscillation content of a measure.
    PsiZero,
}

impl HomMap {
    pub fn components(dim_in: usize, comps: Vec<HomFn>) -> Result<Self> {
        if comps.is_empty() {
            return Err(GymError::Empty("map components"));
        }
        for c in &comps {
            if let Some(d) = c.dim_xi() {
                if d != dim_in {
                    return Err(GymError::DimensionMismatch {
                        expected: dim_in,
                        got: d,
                    });
                }
            }
        }
        Ok(HomMap {
            dim_in,
            dim_out: comps.len(),
            kind: HomMapKind::Components(comps),
        })
    }

    pub fn identity(dim: usize) -> Self {
        let comps = (0..dim)
            .map(|i| {
                let mut a = vec![0.0; dim];
                a[i] = 1.0;
                HomFn::linear_const(a, 0.0)
            })
            .collect();
        HomMap {
            dim_in: dim,
            dim_out: dim,
            kind: HomMapKind::Components(comps),
        }
    }

    /// `(x, xi, eta) -> (x, xi, eta)` for `eta != 0`, `(x, 0, 0)` on rays.
    pub fn psi_zero(dim: usize) -> Self {
        HomMap {
            dim_in: dim,
            dim_out: dim,
            kind: HomMapKind::PsiZero,
        }
    }

    /// Linear map picking coordinate blocks of size `block_dim` at the given
    /// block indices out of `num_blocks` stacked blocks.
    pub fn block_projection(
        block_dim: usize,
        num_blocks: usize,
        selected: &[usize],
    ) -> Result<Self> {
        let dim_in = block_dim * num_blocks;
        if selected.iter().any(|&b| b >= num_blocks) {
            return Err(GymError::Precondition("selected block out of range".into()));
        }
        let mut comps = Vec::with_capacity(block_dim * selected.len());
        for &b in selected {
            for i in 0..block_dim {
                let mut a = vec![0.0; dim_in];
                a[b * block_dim + i] = 1.0;
                comps.push(HomFn::linear_const(a, 0.0));
            }
        }
        HomMap::components(dim_in, comps)
    }

    /// `xi -> factor * xi`.
    pub fn scaling(dim: usize, factor: f64) -> Self {
        let comps = (0..dim)
            .map(|i| {
                let mut a = vec![0.0; dim];
                a[i] = factor;
                HomFn::linear_const(a, 0.0)
            })
            .collect();
        HomMap {
            dim_in: dim,
            dim_out: dim,
            kind: HomMapKind::Components(comps),
        }
    }

    /// `(xi_1, xi_2) -> (xi_2 - xi_1) / dt` on stacked pairs.
    pub fn difference_quotient(block_dim: usize, dt: f64) -> Result<Self> {
        if dt <= 0.0 {
            return Err(GymError::Precondition(
                "difference quotient needs dt > 0".into(),
            ));
        }
        let dim_in = 2 * block_dim;
        let comps = (0..block_dim)
            .map(|i| {
                let mut a = vec![0.0; dim_in];
                a[i] = -1.0 / dt;
                a[block_dim + i] = 1.0 / dt;
                HomFn::linear_const(a, 0.0)
            })
            .collect();
        HomMap::components(dim_in, comps)
    }

    pub fn apply(&self, cell: usize, xi: &[f64], eta: f64) -> Result<Vec<f64>> {
        if xi.len() != self.dim_in {
            return Err(GymError::DimensionMismatch {
                expected: self.dim_in,
                got: xi.len(),
            });
        }
        match &self.kind {
            HomMapKind::Components(comps) => {
                let mut out = Vec::with_capacity(comps.len());
                for c in comps {
                    let v = c.eval(cell, xi, eta)?;
                    if !v.is_finite() {
                        return Err(GymError::NonFinite {
                            context: "homogeneous map component".into(),
                        });
                    }
                    out.push(v);
                }
                Ok(out)
            }
            HomMapKind::PsiZero => {
                if eta != 0.0 {
                    Ok(xi.to_vec())
                } else {
                    Ok(vec![0.0; self.dim_in])
                }
            }
        }
    }

    pub fn is_psi_zero(&self) -> bool {
        matches!(self.kind, HomMapKind::PsiZero)
    }

    pub fn components_ref(&self) -> Option<&[HomFn]> {
        match &self.kind {
            HomMapKind::Components(c) => Some(c),
            HomMapKind::PsiZero => None,
        }
    }

    fn contains_raw(&self) -> bool {
        match &self.kind {
            HomMapKind::Components(c) => c.iter().any(HomFn::contains_raw),
            HomMapKind::PsiZero => false,
        }
    }

    fn component_bounds(&self) -> Option<Vec<f64>> {
        match &self.kind {
            HomMapKind::Components(c) => c.iter().map(HomFn::hom_norm_bound).collect(),
            HomMapKind::PsiZero => Some(vec![1.0; self.dim_out]),
        }
    }
}

/// Remark-2.2-style modulus profile: for every pair of cells, the maximal
/// spread of `f` across the joint sphere grid, keyed by cell distance.
/// An upper step envelope of these pairs is an empirical modulus of
/// continuity of the sphere restriction of `f`.
pub fn sphere_modulus_profile(
    f: &HomFn,
    space: &SpaceModel,
    grid: &DirectionGrid,
) -> Result<Vec<(f64, f64)>> {
    let n = space.num_cells();
    let mut pairs = Vec::new();
    for c1 in 0..n {
        for c2 in (c1 + 1)..n {
            let mut spread = 0.0f64;
            for dir in grid.directions() {
                let (xi, eta) = split_joint(dir);
                let v1 = f.eval(c1, xi, eta)?;
                let v2 = f.eval(c2, xi, eta)?;
                spread = spread.max((v1 - v2).abs());
            }
            pairs.push((space.distance(c1, c2), spread));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs)
}

/// Mean of per-cell field values weighted by cell measure, i.e. the integral
/// of a per-cell scalar field against the reference measure.
pub fn integrate_scalar_field(space: &SpaceModel, values: &[f64]) -> f64 {
    let terms: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(c, v)| space.cell_measure(c) * v)
        .collect();
    pairwise_sum(&terms)
}
