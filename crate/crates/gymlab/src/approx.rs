//! Constructive approximation and sequence experiments.
//!
//! The centrepiece turns a measure with oscillation *and* concentration
//! content into honest functions: level-`n` step functions whose lifts
//! converge to the target in every battery pairing, with the concentration
//! mass realised by values of magnitude at least `1/sigma_n` on subcells of
//! measure at most `sigma_n` times the concentrated mass. Around it live the
//! canonical oscillation family (the square-wave path whose difference
//! quotients develop a two-point oscillation limit), shrinking-carrier
//! concentration sequences, a Helly-style subsequence extraction harness,
//! and the semicontinuity margin of the h-variation.

use crate::gym::{Atom, Battery, DiscreteGym};
use crate::homfn::HomFn;
use crate::numeric::{distance, joint_norm, norm, pairwise_sum, scale};
use crate::space::SpaceModel;
use crate::systems::{SystemGym, SystemOracle};
use crate::{GymError, Result};

/// A periodic piecewise-constant profile on the line: pieces
/// `[start, end) -> value` covering `[0, period)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepProfile {
    period: f64,
    pieces: Vec<(f64, f64, Vec<f64>)>,
}

impl StepProfile {
    pub fn new(period: f64, pieces: Vec<(f64, f64, Vec<f64>)>) -> Result<Self> {
        if !(period > 0.0) || pieces.is_empty() {
            return Err(GymError::Precondition(
                "a step profile needs a positive period and at least one piece".into(),
            ));
        }
        let mut expected = 0.0;
        let dim = pieces[0].2.len();
        for (lo, hi, v) in &pieces {
            if (*lo - expected).abs() > 1e-12 || hi <= lo || v.len() != dim {
                return Err(GymError::Precondition(
                    "profile pieces must tile [0, period) in order".into(),
                ));
            }
            expected = *hi;
        }
        if (expected - period).abs() > 1e-12 {
            return Err(GymError::Precondition(
                "profile pieces must end at the period".into(),
            ));
        }
        Ok(StepProfile { period, pieces })
    }

    /// The 2-periodic square wave: `+1` on `[0, 1)`, `-1` on `[1, 2)`.
    pub fn square_wave() -> Self {
        StepProfile {
            period: 2.0,
            pieces: vec![(0.0, 1.0, vec![1.0]), (1.0, 2.0, vec![-1.0])],
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].2.len()
    }

    pub fn value_at(&self, y: f64) -> &[f64] {
        let mut frac = y % self.period;
        if frac < 0.0 {
            frac += self.period;
        }
        for (lo, hi, v) in &self.pieces {
            if frac >= *lo && frac < *hi {
                return v;
            }
        }
        &self.pieces.last().unwrap().2
    }

    /// Positions of discontinuities of `x -> profile(x / s)` inside
    /// `[lo, hi]`, for a nonzero dilation `s`.
    fn breakpoints_dilated(&self, s: f64, lo: f64, hi: f64) -> Vec<f64> {
        let mut edges: Vec<f64> = self.pieces.iter().map(|(l, _, _)| *l).collect();
        edges.push(self.period);
        let mut out = Vec::new();
        // x = s * (k * period + edge) must fall in [lo, hi].
        let y1 = lo / s;
        let y2 = hi / s;
        let (ylo, yhi) = if y1 <= y2 { (y1, y2) } else { (y2, y1) };
        let k_lo = (ylo / self.period).floor() as i64 - 1;
        let k_hi = (yhi / self.period).ceil() as i64 + 1;
        for k in k_lo..=k_hi {
            for &e in &edges {
                let x = s * (k as f64 * self.period + e);
                if x > lo && x < hi {
                    out.push(x);
                }
            }
        }
        out
    }
}

/// One constant piece of a refined step function, contained in one cell of
/// the base space. The measure is stored explicitly so that prescribed
/// subdivision masses survive exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub parent: usize,
    pub lo: f64,
    pub hi: f64,
    pub measure: f64,
    pub value: Vec<f64>,
}

/// A `Xi`-valued step function on a refined interval grid. Segment edges
/// include every base cell edge, so each segment has a unique parent cell.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    space: SpaceModel,
    dim_xi: usize,
    segments: Vec<Segment>,
}

impl StepFunction {
    pub fn new(space: SpaceModel, dim_xi: usize, segments: Vec<Segment>) -> Result<Self> {
        if !space.is_interval() {
            return Err(GymError::NonAtomicRequired(
                "step functions live on interval spaces".into(),
            ));
        }
        let tol = 1e-9 * space.total_mass();
        let mut per_cell = vec![0.0; space.num_cells()];
        for seg in &segments {
            space.check_cell(seg.parent)?;
            if seg.value.len() != dim_xi {
                return Err(GymError::DimensionMismatch {
                    expected: dim_xi,
                    got: seg.value.len(),
                });
            }
            if !(seg.measure >= 0.0) || seg.value.iter().any(|v| !v.is_finite()) {
                return Err(GymError::NonFinite {
                    context: "step function segment".into(),
                });
            }
            per_cell[seg.parent] += seg.measure;
        }
        for (cell, total) in per_cell.iter().enumerate() {
            if (total - space.cell_measure(cell)).abs() > tol {
                return Err(GymError::Precondition(format!(
                    "segment measures in cell {cell} sum to {total}, expected {}",
                    space.cell_measure(cell)
                )));
            }
        }
        Ok(StepFunction {
            space,
            dim_xi,
            segments,
        })
    }

    /// One segment per base cell.
    pub fn from_cell_values(space: SpaceModel, dim_xi: usize, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != space.num_cells() {
            return Err(GymError::Precondition(
                "one value per cell required".into(),
            ));
        }
        let (lo, hi) = space
            .bounds()
            .ok_or_else(|| GymError::NonAtomicRequired("interval space required".into()))?;
        let n = space.num_cells() as f64;
        let segments = values
            .into_iter()
            .enumerate()
            .map(|(cell, value)| Segment {
                parent: cell,
                lo: lo + (hi - lo) * cell as f64 / n,
                hi: lo + (hi - lo) * (cell as f64 + 1.0) / n,
                measure: space.cell_measure(cell),
                value,
            })
            .collect();
        StepFunction::new(space, dim_xi, segments)
    }

    pub fn space(&self) -> &SpaceModel {
        &self.space
    }

    pub fn dim_xi(&self) -> usize {
        self.dim_xi
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Lift to a generalized Young measure on the *base* grid: each segment
    /// contributes a value atom of eta-mass equal to its measure.
    pub fn lift(&self) -> Result<DiscreteGym> {
        let atoms = self
            .segments
            .iter()
            .filter(|seg| seg.measure > 0.0)
            .map(|seg| {
                let n = joint_norm(&seg.value, 1.0);
                Atom {
                    cell: seg.parent,
                    xi: scale(&seg.value, 1.0 / n),
                    eta: 1.0 / n,
                    w: seg.measure * n,
                }
            })
            .collect();
        DiscreteGym::new(self.space.clone(), self.dim_xi, atoms)
    }

    /// `integral sqrt(1 + |u|^2) d lambda` — the dual norm of the lift.
    pub fn area_integral(&self) -> f64 {
        let terms: Vec<f64> = self
            .segments
            .iter()
            .map(|seg| seg.measure * joint_norm(&seg.value, 1.0))
            .collect();
        pairwise_sum(&terms)
    }

    pub fn max_abs(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| norm(&s.value))
            .fold(0.0, f64::max)
    }

    /// Pointwise sum with another step function on the same base space,
    /// via the common position refinement.
    pub fn add(&self, other: &StepFunction) -> Result<StepFunction> {
        if self.space != other.space || self.dim_xi != other.dim_xi {
            return Err(GymError::Precondition(
                "step functions on different spaces cannot be added".into(),
            ));
        }
        let mut cuts: Vec<f64> = Vec::new();
        for seg in self.segments.iter().chain(&other.segments) {
            cuts.push(seg.lo);
            cuts.push(seg.hi);
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut segments = Vec::new();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a <= 0.0 {
                continue;
            }
            let mid = 0.5 * (a + b);
            let va = self.value_at(mid);
            let vb = other.value_at(mid);
            let value: Vec<f64> = va.iter().zip(vb).map(|(x, y)| x + y).collect();
            segments.push(Segment {
                parent: self.space.cell_containing(mid)?,
                lo: a,
                hi: b,
                measure: b - a,
                value,
            });
        }
        StepFunction::new(self.space.clone(), self.dim_xi, segments)
    }

    fn value_at(&self, x: f64) -> Vec<f64> {
        for seg in &self.segments {
            if x >= seg.lo && x < seg.hi {
                return seg.value.clone();
            }
        }
        self.segments
            .last()
            .map(|s| s.value.clone())
            .unwrap_or_else(|| vec![0.0; self.dim_xi])
    }
}

/// Step function `x -> profile(x / s)` (unit amplitude) on the base grid,
/// with exact sub-cell level sets.
pub fn dilated_profile_step(
    profile: &StepProfile,
    s: f64,
    space: &SpaceModel,
) -> Result<StepFunction> {
    scaled_profile_step(profile, s, 1.0, space)
}

/// Exact lift of `x -> profile(x / s)`.
pub fn dilated_profile_lift(
    profile: &StepProfile,
    s: f64,
    space: &SpaceModel,
) -> Result<DiscreteGym> {
    dilated_profile_step(profile, s, space)?.lift()
}

/// Step function `x -> amplitude * profile(x / s)`; `s = 0` gives the zero
/// function.
pub fn scaled_profile_step(
    profile: &StepProfile,
    s: f64,
    amplitude: f64,
    space: &SpaceModel,
) -> Result<StepFunction> {
    let (lo, hi) = space
        .bounds()
        .ok_or_else(|| GymError::NonAtomicRequired("interval space required".into()))?;
    let dim = profile.dim();
    if s == 0.0 {
        return StepFunction::from_cell_values(
            space.clone(),
            dim,
            vec![vec![0.0; dim]; space.num_cells()],
        );
    }
    let cells = space.num_cells() as f64;
    let mut cuts: Vec<f64> = (0..=space.num_cells())
        .map(|i| lo + (hi - lo) * i as f64 / cells)
        .collect();
    cuts.extend(profile.breakpoints_dilated(s, lo, hi));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut segments = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 0.0 {
            continue;
        }
        let mid = 0.5 * (a + b);
        let value = scale(profile.value_at(mid / s), amplitude);
        segments.push(Segment {
            parent: space.cell_containing(mid)?,
            lo: a,
            hi: b,
            measure: b - a,
            value,
        });
    }
    StepFunction::new(space.clone(), dim, segments)
}

/// The oscillation path `u(t, x) = s(t) * profile(x / s(t))` exposed as a
/// joint-measure oracle with exact cellwise quadrature of the step profile.
/// `res` declares the quadrature resolution: a query whose finest spatial
/// period falls below four quadrature cells is refused.
pub struct OscillationOracle {
    profile: StepProfile,
    space: SpaceModel,
    res: usize,
    horizon: (f64, f64),
    scale_fn: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl OscillationOracle {
    pub fn new(
        profile: StepProfile,
        space: SpaceModel,
        res: usize,
        horizon: (f64, f64),
        scale_fn: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !space.is_interval() {
            return Err(GymError::NonAtomicRequired(
                "oscillation paths live on interval spaces".into(),
            ));
        }
        if res == 0 {
            return Err(GymError::Empty("quadrature resolution"));
        }
        Ok(OscillationOracle {
            profile,
            space,
            res,
            horizon,
            scale_fn: Box::new(scale_fn),
        })
    }

    /// The square-wave path `u(t, x) = (t - 1) w(x / (t - 1))` on `[0, 2]`
    /// (zero at `t = 1`), whose difference quotients at `t = 1` develop the
    /// two-point oscillation limit.
    pub fn square_wave_path(space: SpaceModel, res: usize) -> Result<Self> {
        OscillationOracle::new(
            StepProfile::square_wave(),
            space,
            res,
            (0.0, 2.0),
            |t| t - 1.0,
        )
    }

    fn guard(&self, s: f64) -> Result<()> {
        if s == 0.0 {
            return Ok(());
        }
        let (lo, hi) = self.space.bounds().unwrap();
        let quantum = (hi - lo) / self.res as f64;
        let period = self.profile.period() * s.abs();
        if period < 4.0 * quantum {
            return Err(GymError::ResolutionGuard { period, quantum });
        }
        Ok(())
    }

    /// The path value at one time, as a step function.
    pub fn snapshot(&self, t: f64) -> Result<StepFunction> {
        let s = (self.scale_fn)(t);
        self.guard(s)?;
        scaled_profile_step(&self.profile, s, s, &self.space)
    }
}

impl SystemOracle for OscillationOracle {
    fn space(&self) -> &SpaceModel {
        &self.space
    }

    fn dim_xi(&self) -> usize {
        self.profile.dim()
    }

    fn horizon(&self) -> (f64, f64) {
        self.horizon
    }

    fn resolution(&self) -> f64 {
        let (lo, hi) = self.space.bounds().unwrap();
        (hi - lo) / self.res as f64
    }

    fn joint(&self, times: &[f64]) -> Result<DiscreteGym> {
        if times.is_empty() {
            return Err(GymError::Empty("time tuple"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GymError::TimesNotIncreasing);
        }
        let (tlo, thi) = self.horizon;
        for &t in times {
            if t < tlo || t > thi {
                return Err(GymError::TimeOutOfRange { t, lo: tlo, hi: thi });
            }
        }
        let snapshots: Vec<StepFunction> = times
            .iter()
            .map(|&t| self.snapshot(t))
            .collect::<Result<_>>()?;
        joint_step_lift(&snapshots)
    }
}

/// Exact joint lift of several step functions on one base space: refine to
/// the common position grid, then one atom per refined piece carrying the
/// stacked values.
pub fn joint_step_lift(functions: &[StepFunction]) -> Result<DiscreteGym> {
    let first = functions
        .first()
        .ok_or(GymError::Empty("step function list"))?;
    let space = first.space.clone();
    let d = first.dim_xi;
    for f in functions {
        if f.space != space || f.dim_xi != d {
            return Err(GymError::Precondition(
                "joint lift needs step functions on one space".into(),
            ));
        }
    }
    let mut cuts: Vec<f64> = Vec::new();
    for f in functions {
        for seg in &f.segments {
            cuts.push(seg.lo);
            cuts.push(seg.hi);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut atoms = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 0.0 {
            continue;
        }
        let mid = 0.5 * (a + b);
        let mut joint = Vec::with_capacity(d * functions.len());
        for f in functions {
            joint.extend(f.value_at(mid));
        }
        let n = joint_norm(&joint, 1.0);
        atoms.push(Atom {
            cell: space.cell_containing(mid)?,
            xi: scale(&joint, 1.0 / n),
            eta: 1.0 / n,
            w: (b - a) * n,
        });
    }
    DiscreteGym::new(space, d * functions.len(), atoms)
}

/// `u_k = (mass / width_k) * direction` on the carrier `[lo, lo + width_k]`
/// with `width_k = width_0 / k`, zero elsewhere: the canonical concentration
/// family. Its lifts keep `<|xi|, mu_k> = mass` for every `k` while the mass
/// escapes to the `eta = 0` ray over the carrier cell.
pub fn concentration_step(
    space: &SpaceModel,
    direction: &[f64],
    mass: f64,
    carrier_lo: f64,
    width0: f64,
    k: usize,
) -> Result<StepFunction> {
    if (norm(direction) - 1.0).abs() > 1e-12 {
        return Err(GymError::Precondition(
            "concentration direction must be a unit vector".into(),
        ));
    }
    if !(mass > 0.0) || !(width0 > 0.0) || k == 0 {
        return Err(GymError::Precondition(
            "concentration needs positive mass, width, and level".into(),
        ));
    }
    let (lo, hi) = space
        .bounds()
        .ok_or_else(|| GymError::NonAtomicRequired("interval space required".into()))?;
    let width = width0 / k as f64;
    let carrier_hi = carrier_lo + width;
    if carrier_lo < lo || carrier_hi > hi {
        return Err(GymError::Precondition(
            "carrier outside the space".into(),
        ));
    }
    let d = direction.len();
    let cells = space.num_cells() as f64;
    let mut cuts: Vec<f64> = (0..=space.num_cells())
        .map(|i| lo + (hi - lo) * i as f64 / cells)
        .collect();
    cuts.push(carrier_lo);
    cuts.push(carrier_hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let value = scale(direction, mass / width);
    let mut segments = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 0.0 {
            continue;
        }
        let mid = 0.5 * (a + b);
        let v = if mid >= carrier_lo && mid < carrier_hi {
            value.clone()
        } else {
            vec![0.0; d]
        };
        segments.push(Segment {
            parent: space.cell_containing(mid)?,
            lo: a,
            hi: b,
            measure: b - a,
            value: v,
        });
    }
    StepFunction::new(space.clone(), d, segments)
}

/// Lift of the level-`k` concentration function.
pub fn concentration_sequence(
    space: &SpaceModel,
    direction: &[f64],
    mass: f64,
    carrier_lo: f64,
    width0: f64,
    k: usize,
) -> Result<DiscreteGym> {
    concentration_step(space, direction, mass, carrier_lo, width0, k)?.lift()
}

/// Level schedule for the density construction: `sigma_n` strictly
/// decreasing with `0 < sigma_n < min(1, lambda(X))`; the value-space
/// partition diameters at level `n` are implicitly `sigma_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySchedule {
    sigmas: Vec<f64>,
}

impl DensitySchedule {
    pub fn new(sigmas: Vec<f64>, space: &SpaceModel) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(GymError::Empty("density schedule"));
        }
        let cap = 1.0f64.min(space.total_mass());
        if sigmas.iter().any(|s| !(*s > 0.0 && *s < cap)) {
            return Err(GymError::Precondition(format!(
                "sigma levels must lie in (0, {cap})"
            )));
        }
        if sigmas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(GymError::Precondition(
                "sigma levels must be strictly decreasing".into(),
            ));
        }
        Ok(DensitySchedule { sigmas })
    }

    /// Dyadic schedule `2^-n` for `n = first..=last`.
    pub fn dyadic(first: u32, last: u32, space: &SpaceModel) -> Result<Self> {
        let sigmas = (first..=last).map(|n| 0.5f64.powi(n as i32)).collect();
        DensitySchedule::new(sigmas, space)
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn level(&self, n: usize) -> Result<f64> {
        self.sigmas.get(n).copied().ok_or_else(|| {
            GymError::Precondition(format!("schedule has no level {n}"))
        })
    }
}

/// The level-`n` approximating step function for a target measure on an
/// interval space.
///
/// Per cell, each concentration atom `(direction d, mass m)` receives a
/// subcell of measure `eps_c * m` carrying the value `d / eps_c`, where
/// `eps_c = sigma_n * min(1, lambda(cell)/concentrated mass)`; so every
/// concentration value has magnitude at least `1 / sigma_n` and the
/// area integral of the carrier is exactly `m * sqrt(1 + eps_c^2)`. The
/// remaining room realises the cell's oscillation statistics: each Young
/// atom `(value, mass)` gets the proportional share of what is left. Since
/// the target has exact atoms, the value-space partitions collapse to
/// singletons and no snapping error appears; the whole level-`n` error comes
/// from the `eps_c` concentration carving.
///
/// Fails on point-cloud spaces when concentration is present: realising a
/// ray by tall values on small sets needs subdividable cells (a nonatomic
/// reference measure).
pub fn density_approximate(
    mu: &DiscreteGym,
    level: usize,
    schedule: &DensitySchedule,
) -> Result<StepFunction> {
    let sigma = schedule.level(level)?;
    let (young, varifold) = mu.decompose()?;
    let space = mu.space().clone();
    if !space.is_interval() {
        if varifold.is_empty() {
            // Pure oscillation needs no subdivision; still reject for
            // uniformity? No: only concentration requires nonatomicity.
        } else {
            return Err(GymError::NonAtomicRequired(
                "the target has concentration mass but the space has atomic cells \
                 (point cloud); the construction needs subdividable cells"
                    .into(),
            ));
        }
    }
    let (lo, hi) = space
        .bounds()
        .ok_or_else(|| GymError::NonAtomicRequired("interval space required".into()))?;
    let cells = space.num_cells();
    let span = hi - lo;
    let d = mu.dim_xi();
    let mut segments = Vec::new();
    for cell in 0..cells {
        let cell_lo = lo + span * cell as f64 / cells as f64;
        let lambda = space.cell_measure(cell);
        let rays: Vec<_> = varifold.atoms().iter().filter(|a| a.cell == cell).collect();
        let concentrated: f64 = rays.iter().map(|a| a.mass).sum();
        let eps_c = if concentrated > 0.0 {
            sigma * 1.0f64.min(lambda / concentrated)
        } else {
            0.0
        };
        let room = lambda - eps_c * concentrated;
        let mut cursor = cell_lo;
        // Oscillation share first.
        let values: Vec<_> = young.atoms().iter().filter(|a| a.cell == cell).collect();
        for atom in &values {
            let measure = room * atom.mass / lambda;
            segments.push(Segment {
                parent: cell,
                lo: cursor,
                hi: cursor + measure,
                measure,
                value: atom.xi.clone(),
            });
            cursor += measure;
        }
        // Concentration carriers at the top end of the cell.
        for ray in &rays {
            let measure = eps_c * ray.mass;
            segments.push(Segment {
                parent: cell,
                lo: cursor,
                hi: cursor + measure,
                measure,
                value: scale(&ray.direction, 1.0 / eps_c),
            });
            cursor += measure;
        }
    }
    StepFunction::new(space, d, segments)
}

/// Per-functional residual of a Helly extraction.
#[derive(Debug, Clone)]
pub struct FunctionalResidual {
    /// The time tuple the functional observes.
    pub tuple: Vec<f64>,
    /// Battery member name.
    pub member: String,
    /// Spread of the functional over the selected subsequence.
    pub residual: f64,
    /// Value at the last selected element.
    pub limit_value: f64,
}

/// Outcome of [`helly_extract`].
#[derive(Debug, Clone)]
pub struct LimitReport {
    /// Indices (into the input sequence) of the selected subsequence.
    pub selected: Vec<usize>,
    pub residuals: Vec<FunctionalResidual>,
    /// The assembled limit system, when the selected masters' atoms
    /// converge under matching.
    pub limit: Option<SystemGym>,
    /// Times in the monitored set where every functional converged.
    pub theta: Vec<f64>,
    /// Whether the assembled limit satisfies the variation bound `C`.
    pub var_bound_ok: Option<bool>,
    /// Whether the assembled limit satisfies the marginal norm bound
    /// `C_* + C` at all probed times.
    pub norm_bound_ok: Option<bool>,
}

impl LimitReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals
            .iter()
            .map(|r| r.residual)
            .fold(0.0, f64::max)
    }
}

/// Helly-style subsequence extraction at finite scale.
///
/// Every input must satisfy the declared bounds: variation over the full
/// grid at most `c_var`, and the first-time marginal norm at most `c_norm`
/// (the marginal bound `c_norm + c_var` at every other time is re-derived
/// numerically and checked too). The monitored functionals are the battery
/// pairings of the marginals at singletons and adjacent pairs from
/// `d_times`. Extraction narrows the index set one functional at a time by
/// value-range bisection, keeping the half with more members (ties keep the
/// upper half, so the selection steers towards the limsup).
pub fn helly_extract(
    seq: &[SystemGym],
    battery: &Battery,
    d_times: &[f64],
    tol: f64,
    bounds: (f64, f64),
) -> Result<LimitReport> {
    let (c_var, c_norm) = bounds;
    if seq.is_empty() {
        return Err(GymError::Empty("system sequence"));
    }
    if d_times.is_empty() {
        return Err(GymError::Empty("monitored time set"));
    }
    if battery.is_empty() {
        return Err(GymError::Empty("battery"));
    }
    let grid = seq[0].grid().clone();
    let t0 = grid.start();
    for (k, sys) in seq.iter().enumerate() {
        if sys.grid() != &grid {
            return Err(GymError::Precondition(
                "all systems must share one grid".into(),
            ));
        }
        let var = sys.variation(None, grid.start(), grid.end())?.value;
        if var > c_var + 1e-9 {
            return Err(GymError::Precondition(format!(
                "element {k} violates the variation bound: {var} > {c_var}"
            )));
        }
        let n0 = sys.marginal_at(t0)?.norm_star();
        if n0 > c_norm + 1e-9 {
            return Err(GymError::Precondition(format!(
                "element {k} violates the norm bound at t0: {n0} > {c_norm}"
            )));
        }
        // Re-derived marginal bound at every monitored time.
        for &t in d_times.iter().chain(grid.times()) {
            let n = sys.marginal_at(t)?.norm_star();
            if n > c_norm + c_var + 1e-9 {
                return Err(GymError::Precondition(format!(
                    "element {k} violates the derived marginal bound at t = {t}"
                )));
            }
        }
    }

    // Monitored tuples: singletons and adjacent pairs of the sorted d_times.
    let mut times = d_times.to_vec();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut tuples: Vec<Vec<f64>> = times.iter().map(|&t| vec![t]).collect();
    for w in times.windows(2) {
        tuples.push(vec![w[0], w[1]]);
    }

    // values[tuple][functional][k]; pair tuples are monitored through the
    // battery's joint functionals (blockwise reads plus increments).
    let d = seq[0].dim_xi();
    let mut functional_names: Vec<Vec<String>> = Vec::with_capacity(tuples.len());
    let mut values: Vec<Vec<Vec<f64>>> = Vec::with_capacity(tuples.len());
    for tuple in &tuples {
        let functionals = battery.joint_functionals(d, tuple.len())?;
        let marginals: Vec<DiscreteGym> = seq
            .iter()
            .map(|sys| sys.marginal(tuple))
            .collect::<Result<_>>()?;
        let mut per_member = vec![Vec::with_capacity(seq.len()); functionals.len()];
        for marg in &marginals {
            for (i, (_, f)) in functionals.iter().enumerate() {
                per_member[i].push(marg.pair(f)?);
            }
        }
        functional_names.push(functionals.into_iter().map(|(n, _)| n).collect());
        values.push(per_member);
    }

    // Iterated bounded-sequence selection.
    let mut selected: Vec<usize> = (0..seq.len()).collect();
    for per_member in &values {
        for vals in per_member {
            loop {
                let vs: Vec<f64> = selected.iter().map(|&k| vals[k]).collect();
                let max = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = vs.iter().copied().fold(f64::INFINITY, f64::min);
                if max - min <= tol || selected.len() < 2 {
                    break;
                }
                let midpoint = 0.5 * (max + min);
                let upper: Vec<usize> = selected
                    .iter()
                    .copied()
                    .filter(|&k| vals[k] >= midpoint)
                    .collect();
                let lower: Vec<usize> = selected
                    .iter()
                    .copied()
                    .filter(|&k| vals[k] < midpoint)
                    .collect();
                let next = if upper.len() >= lower.len() { upper } else { lower };
                if next.len() == selected.len() || next.len() < 2 {
                    break;
                }
                selected = next;
            }
        }
    }

    // Residuals over the selected subsequence.
    let mut residuals = Vec::new();
    let mut theta_ok = vec![true; times.len()];
    for (ti, tuple) in tuples.iter().enumerate() {
        for (mi, name) in functional_names[ti].iter().enumerate() {
            let vs: Vec<f64> = selected.iter().map(|&k| values[ti][mi][k]).collect();
            let max = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = vs.iter().copied().fold(f64::INFINITY, f64::min);
            let residual = max - min;
            if residual > tol {
                for (pos, &t) in times.iter().enumerate() {
                    if tuple.contains(&t) {
                        theta_ok[pos] = false;
                    }
                }
            }
            residuals.push(FunctionalResidual {
                tuple: tuple.clone(),
                member: name.clone(),
                residual,
                limit_value: *vs.last().unwrap(),
            });
        }
    }
    let theta: Vec<f64> = times
        .iter()
        .zip(&theta_ok)
        .filter(|(_, ok)| **ok)
        .map(|(t, _)| *t)
        .collect();

    // Assemble the limit when the selected masters' atom sets converge.
    let last = &seq[*selected.last().unwrap()];
    let prev = &seq[selected[selected.len().saturating_sub(2)]];
    let limit = if masters_match(prev.master(), last.master(), tol) {
        Some(last.clone())
    } else {
        None
    };
    let (var_bound_ok, norm_bound_ok) = match &limit {
        Some(sys) => {
            let var = sys.variation(None, grid.start(), grid.end())?.value;
            let mut norm_ok = true;
            for &t in times.iter().chain(grid.times()) {
                if sys.marginal_at(t)?.norm_star() > c_norm + c_var + 1e-9 {
                    norm_ok = false;
                }
            }
            (Some(var <= c_var + 1e-9), Some(norm_ok))
        }
        None => (None, None),
    };
    Ok(LimitReport {
        selected,
        residuals,
        limit,
        theta,
        var_bound_ok,
        norm_bound_ok,
    })
}

/// Atom-by-atom comparison under the canonical order: equal cells, nearby
/// directions, nearby weights.
fn masters_match(a: &DiscreteGym, b: &DiscreteGym, tol: f64) -> bool {
    if a.atoms().len() != b.atoms().len() {
        return false;
    }
    a.atoms().iter().zip(b.atoms()).all(|(x, y)| {
        x.cell == y.cell
            && distance(&x.xi, &y.xi) + (x.eta - y.eta).abs() <= tol
            && (x.w - y.w).abs() <= tol * (1.0 + x.w.abs())
    })
}

/// `min_k Var_h(seq[k]) - Var_h(limit)` after checking that the sequence
/// pairings have actually converged to the limit's on the monitored tuples.
/// Lower semicontinuity of the h-variation makes this nonnegative (up to
/// tolerance) for any genuinely convergent family.
pub fn semicontinuity_margin(
    seq: &[SystemGym],
    limit: &SystemGym,
    h: &HomFn,
    d_times: &[f64],
    battery: &Battery,
    pre_tol: f64,
) -> Result<f64> {
    if seq.is_empty() {
        return Err(GymError::Empty("system sequence"));
    }
    let grid = limit.grid();
    let mut times = d_times.to_vec();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut tuples: Vec<Vec<f64>> = times.iter().map(|&t| vec![t]).collect();
    for w in times.windows(2) {
        tuples.push(vec![w[0], w[1]]);
    }
    let last = seq.last().unwrap();
    let d = limit.dim_xi();
    for tuple in &tuples {
        let a = last.marginal(tuple)?;
        let b = limit.marginal(tuple)?;
        for (_, f) in battery.joint_functionals(d, tuple.len())? {
            let defect = (a.pair(&f)? - b.pair(&f)?).abs();
            if defect > pre_tol {
                return Err(GymError::Precondition(format!(
                    "sequence has not converged to the limit on the monitored \
                     functionals (defect {defect:e} > {pre_tol:e})"
                )));
            }
        }
    }
    let limit_var = limit.variation(Some(h), grid.start(), grid.end())?.value;
    let mut min_var = f64::INFINITY;
    for sys in seq {
        min_var = min_var.min(sys.variation(Some(h), grid.start(), grid.end())?.value);
    }
    Ok(min_var - limit_var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gym::{recompose, DiscreteMeasure, VarifoldAtom, VarifoldPart, YoungAtom, YoungPart};
    use crate::systems::{derivative_estimate, TimeGrid};

    fn interval(lo: f64, hi: f64, cells: usize) -> SpaceModel {
        SpaceModel::interval(lo, hi, cells).unwrap()
    }

    #[test]
    fn square_wave_path_snapshots() {
        let space = interval(-1.0, 1.0, 8);
        let oracle = OscillationOracle::square_wave_path(space.clone(), 1 << 20).unwrap();
        // u(1, .) = 0.
        let at_one = oracle.snapshot(1.0).unwrap();
        assert_eq!(at_one.max_abs(), 0.0);
        // |u(t, .)| = |t - 1| everywhere else: <|xi|, mu_t> = |t-1| * 2.
        let marg = oracle.joint(&[1.25]).unwrap();
        assert!((marg.pair(&HomFn::XiNorm).unwrap() - 0.5).abs() < 1e-12);
        // The unscaled profile has |w| = 1: mass lambda(X) = 2.
        let lift = dilated_profile_lift(&StepProfile::square_wave(), 0.25, &space).unwrap();
        assert!((lift.pair(&HomFn::XiNorm).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn resolution_guard_refuses_unresolved_queries() {
        let space = interval(-1.0, 1.0, 8);
        // res = 4 quadrature cells of width 0.5: a period-2 profile at scale
        // 0.１ has spatial period 0.2 < 4 * 0.5.
        let oracle = OscillationOracle::square_wave_path(space, 4).unwrap();
        assert!(matches!(
            oracle.joint(&[1.1]),
            Err(GymError::ResolutionGuard { .. })
        ));
    }

    #[test]
    fn quotients_of_square_wave_path_develop_oscillation() {
        let space = interval(-1.0, 1.0, 200);
        let oracle = OscillationOracle::square_wave_path(space.clone(), 1 << 22).unwrap();
        let battery = Battery::standard(&space, 1, 12, 0).unwrap();
        // Two-point Young target: half mass at +1 and -1 per cell.
        let mut young_atoms = Vec::new();
        for cell in 0..space.num_cells() {
            let lambda = space.cell_measure(cell);
            young_atoms.push(YoungAtom { cell, xi: vec![1.0], mass: lambda / 2.0 });
            young_atoms.push(YoungAtom { cell, xi: vec![-1.0], mass: lambda / 2.0 });
        }
        let target =
            crate::gym::lift_young(&YoungPart::new(space.clone(), 1, young_atoms).unwrap())
                .unwrap();
        let schedule: Vec<f64> = (3..=7).map(|j| 0.5f64.powi(j)).collect();
        let report = derivative_estimate(&oracle, 1.0, &schedule, &battery, 0.05).unwrap();
        assert_eq!(report.verdict, crate::systems::DerivativeVerdict::Converged);
        let estimate = report.estimate.unwrap();
        let gap = estimate.wstar_gap(&target, &battery).unwrap();
        assert!(gap <= 0.05, "gap {gap}");
        // The barycentre of the estimate is weakly small.
        let bar_total: f64 = estimate
            .barycentre()
            .ac()
            .iter()
            .enumerate()
            .map(|(c, row)| space.cell_measure(c) * row[0])
            .sum();
        assert!(bar_total.abs() <= 1e-12);
    }

    #[test]
    fn quotient_of_square_wave_path_is_dilated_profile() {
        // (u(t) - u(1)) / (t - 1) = w(x / (t - 1)) pointwise, so the
        // difference-quotient measure is exactly the dilated profile lift.
        let space = interval(-1.0, 1.0, 50);
        let oracle = OscillationOracle::square_wave_path(space.clone(), 1 << 22).unwrap();
        let battery = Battery::standard(&space, 1, 10, 9).unwrap();
        for t in [1.25, 1.0625] {
            let joint = oracle.joint(&[1.0, t]).unwrap();
            let q = joint
                .image(&crate::homfn::HomMap::difference_quotient(1, t - 1.0).unwrap())
                .unwrap();
            let direct =
                dilated_profile_lift(&StepProfile::square_wave(), t - 1.0, &space).unwrap();
            assert!(q.wstar_gap(&direct, &battery).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn concentration_family_keeps_mass() {
        let space = interval(-1.0, 1.0, 8);
        for k in [1, 4, 16, 64] {
            let mu = concentration_sequence(&space, &[1.0], 1.0, 0.0, 1.0, k).unwrap();
            assert!((mu.pair(&HomFn::XiNorm).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn concentration_family_limit_pairings() {
        let space = interval(-1.0, 1.0, 8);
        let battery = Battery::standard(&space, 1, 10, 1).unwrap();
        // Limit object: zero Young part plus a ray atom of mass 1 at the
        // carrier cell.
        let mut young = Vec::new();
        for cell in 0..space.num_cells() {
            young.push(YoungAtom {
                cell,
                xi: vec![0.0],
                mass: space.cell_measure(cell),
            });
        }
        let carrier_cell = space.cell_containing(1e-9).unwrap();
        let limit = recompose(
            &YoungPart::new(space.clone(), 1, young).unwrap(),
            &VarifoldPart::new(
                space.clone(),
                1,
                vec![VarifoldAtom {
                    cell: carrier_cell,
                    direction: vec![1.0],
                    mass: 1.0,
                }],
            )
            .unwrap(),
        )
        .unwrap();
        let mut previous = f64::INFINITY;
        for k in [4, 16, 64, 256] {
            let mu = concentration_sequence(&space, &[1.0], 1.0, 0.0, 1.0, k).unwrap();
            let gap = mu.wstar_gap(&limit, &battery).unwrap();
            assert!(gap <= previous + 1e-12);
            previous = gap;
        }
        assert!(previous <= 2.5 / 256.0, "final gap {previous}");
    }

    #[test]
    fn superposition_is_additive_across_disjoint_carriers() {
        // w(k x) plus a concentration spike: battery pairings of the sum
        // converge to young part + ray, additively.
        let space = interval(-1.0, 1.0, 8);
        let k = 64;
        let osc = dilated_profile_step(&StepProfile::square_wave(), 1.0 / k as f64, &space)
            .unwrap();
        let spike = concentration_step(&space, &[1.0], 1.0, 0.0, 1.0, k).unwrap();
        let sum = osc.add(&spike).unwrap();
        let mu = sum.lift().unwrap();
        // <|xi|, mu_k> = int |w| (2) - carrier part (1/k) + (k + w)(1/k)
        //             = 2 + 1 exactly for the square wave.
        assert!((mu.pair(&HomFn::XiNorm).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn density_of_step_function_is_identity() {
        let space = interval(0.0, 1.0, 4);
        let values: Vec<Vec<f64>> = (0..4).map(|c| vec![c as f64 - 1.5]).collect();
        let mu = crate::gym::lift_function(&space, 1, values.clone()).unwrap();
        let schedule = DensitySchedule::dyadic(2, 8, &space).unwrap();
        let u = density_approximate(&mu, 0, &schedule).unwrap();
        // Every cell keeps its single value on the full cell.
        for (cell, seg) in u.segments().iter().enumerate() {
            assert_eq!(seg.parent, cell);
            assert!((seg.value[0] - values[cell][0]).abs() < 1e-15);
            assert!((seg.measure - space.cell_measure(cell)).abs() < 1e-15);
        }
        let battery = Battery::standard(&space, 1, 10, 2).unwrap();
        assert!(u.lift().unwrap().wstar_gap(&mu, &battery).unwrap() <= 1e-13);
    }

    /// The canonical mixed target: per-cell two-point oscillation plus one
    /// ray of mass 1 in direction +1 at the cell containing x0.
    fn mixed_target(space: &SpaceModel, x0: f64) -> DiscreteGym {
        let mut young = Vec::new();
        for cell in 0..space.num_cells() {
            let lambda = space.cell_measure(cell);
            young.push(YoungAtom { cell, xi: vec![1.0], mass: lambda / 2.0 });
            young.push(YoungAtom { cell, xi: vec![-1.0], mass: lambda / 2.0 });
        }
        let carrier = space.cell_containing(x0).unwrap();
        recompose(
            &YoungPart::new(space.clone(), 1, young).unwrap(),
            &VarifoldPart::new(
                space.clone(),
                1,
                vec![VarifoldAtom {
                    cell: carrier,
                    direction: vec![1.0],
                    mass: 1.0,
                }],
            )
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn density_realises_oscillation_and_concentration() {
        let space = interval(0.0, 1.0, 8);
        let mu = mixed_target(&space, 0.05);
        let schedule = DensitySchedule::dyadic(2, 8, &space).unwrap();
        let battery = Battery::standard(&space, 1, 20, 3).unwrap();
        let mut last_gap = f64::INFINITY;
        for (level, &sigma) in schedule.sigmas().iter().enumerate() {
            let u = density_approximate(&mu, level, &schedule).unwrap();
            // Concentration values reach 1/sigma on the carrier.
            assert!(u.max_abs() >= 1.0 / sigma - 1e-9);
            // Level sets of the oscillation values are near-half fractions.
            let lift = u.lift().unwrap();
            let gap = lift.wstar_gap(&mu, &battery).unwrap();
            assert!(gap <= 8.0 * sigma, "sigma {sigma}: gap {gap}");
            assert!(gap <= last_gap + 1e-12);
            last_gap = gap;
            // Norm convergence with the proof's explicit remainder.
            let area = u.area_integral();
            assert!(
                (area - mu.norm_star()).abs() <= 5.0 * sigma,
                "sigma {sigma}: area {area} vs {}",
                mu.norm_star()
            );
        }
    }

    #[test]
    fn density_two_point_target_splits_cells_in_half() {
        let space = interval(0.0, 1.0, 4);
        let mut young = Vec::new();
        for cell in 0..4 {
            let lambda = space.cell_measure(cell);
            young.push(YoungAtom { cell, xi: vec![1.0], mass: lambda / 2.0 });
            young.push(YoungAtom { cell, xi: vec![-1.0], mass: lambda / 2.0 });
        }
        let mu = crate::gym::lift_young(&YoungPart::new(space.clone(), 1, young).unwrap())
            .unwrap();
        let schedule = DensitySchedule::dyadic(3, 6, &space).unwrap();
        let u = density_approximate(&mu, 1, &schedule).unwrap();
        // Two segments per cell, each carrying half the cell measure, with
        // values +-1.
        assert_eq!(u.segments().len(), 8);
        for pair in u.segments().chunks(2) {
            assert!((pair[0].measure - pair[1].measure).abs() < 1e-15);
            let vals = [pair[0].value[0], pair[1].value[0]];
            assert!(vals.contains(&1.0) && vals.contains(&-1.0));
        }
    }

    #[test]
    fn density_rejects_point_clouds_with_concentration() {
        let space = SpaceModel::point_cloud(
            vec!["a".into(), "b".into()],
            vec![1.0, 1.0],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let mut young = Vec::new();
        for cell in 0..2 {
            young.push(YoungAtom { cell, xi: vec![0.0], mass: 1.0 });
        }
        let mu = recompose(
            &YoungPart::new(space.clone(), 1, young).unwrap(),
            &VarifoldPart::new(
                space.clone(),
                1,
                vec![VarifoldAtom {
                    cell: 0,
                    direction: vec![1.0],
                    mass: 1.0,
                }],
            )
            .unwrap(),
        )
        .unwrap();
        let interval_space = interval(0.0, 2.0, 2);
        let schedule = DensitySchedule::dyadic(2, 4, &interval_space).unwrap();
        assert!(matches!(
            density_approximate(&mu, 0, &schedule),
            Err(GymError::NonAtomicRequired(_))
        ));
    }

    fn linear_system(space: &SpaceModel, grid: &[f64], slope: f64) -> SystemGym {
        let samples: Vec<(f64, DiscreteMeasure)> = grid
            .iter()
            .map(|&t| {
                (
                    t,
                    DiscreteMeasure::from_density(
                        space.clone(),
                        1,
                        vec![vec![slope * t]; space.num_cells()],
                    )
                    .unwrap(),
                )
            })
            .collect();
        SystemGym::from_path(&samples).unwrap()
    }

    #[test]
    fn helly_on_alternating_sequence() {
        let space = interval(0.0, 1.0, 3);
        let grid = [0.0, 0.5, 1.0];
        let a = linear_system(&space, &grid, 1.0);
        let b = linear_system(&space, &grid, -2.0);
        let seq: Vec<SystemGym> = (0..8)
            .map(|k| if k % 2 == 0 { a.clone() } else { b.clone() })
            .collect();
        let battery = Battery::standard(&space, 1, 8, 4).unwrap();
        let report = helly_extract(&seq, &battery, &[0.0, 0.5, 1.0], 1e-9, (3.0, 4.0)).unwrap();
        // Constant subsequence: all selected indices share a parity.
        let parity = report.selected[0] % 2;
        assert!(report.selected.iter().all(|k| k % 2 == parity));
        assert!(report.selected.len() >= 2);
        assert!(report.max_residual() <= 1e-12);
        assert!(report.limit.is_some());
        assert_eq!(report.var_bound_ok, Some(true));
        assert_eq!(report.norm_bound_ok, Some(true));
        assert_eq!(report.theta.len(), 3);
    }

    #[test]
    fn helly_on_repeated_element_is_identity() {
        let space = interval(0.0, 1.0, 2);
        let sys = linear_system(&space, &[0.0, 1.0], 0.5);
        let seq = vec![sys.clone(), sys.clone(), sys.clone()];
        let battery = Battery::standard(&space, 1, 6, 5).unwrap();
        let report = helly_extract(&seq, &battery, &[0.0, 1.0], 1e-12, (1.0, 2.0)).unwrap();
        assert_eq!(report.selected, vec![0, 1, 2]);
        assert_eq!(report.max_residual(), 0.0);
        assert!(report.limit.is_some());
    }

    #[test]
    fn helly_checks_declared_bounds() {
        let space = interval(0.0, 1.0, 2);
        let sys = linear_system(&space, &[0.0, 1.0], 5.0);
        let battery = Battery::standard(&space, 1, 6, 6).unwrap();
        // Variation of the slope-5 path is 5 > declared 1.
        assert!(helly_extract(
            &[sys],
            &battery,
            &[0.0, 1.0],
            1e-9,
            (1.0, 10.0)
        )
        .is_err());
    }

    /// Joint master of the path t -> t * w(2^k x) on a fixed coarse grid:
    /// fully correlated oscillation across times.
    fn oscillation_refinement_system(space: &SpaceModel, grid: &[f64], k: u32) -> SystemGym {
        let profile = StepProfile::square_wave();
        let snapshots: Vec<StepFunction> = grid
            .iter()
            .map(|&t| {
                let s = 0.5f64.powi(k as i32);
                let base = dilated_profile_step(&profile, s, space).unwrap();
                // amplitude t
                let scaled_segments = base
                    .segments()
                    .iter()
                    .map(|seg| Segment {
                        parent: seg.parent,
                        lo: seg.lo,
                        hi: seg.hi,
                        measure: seg.measure,
                        value: scale(&seg.value, t),
                    })
                    .collect();
                StepFunction::new(space.clone(), 1, scaled_segments).unwrap()
            })
            .collect();
        let master = joint_step_lift(&snapshots).unwrap();
        SystemGym::from_master(TimeGrid::new(grid.to_vec()).unwrap(), 1, master).unwrap()
    }

    #[test]
    fn helly_on_oscillation_refinement() {
        let space = interval(0.0, 1.0, 16);
        let grid = [0.0, 0.5, 1.0];
        let seq: Vec<SystemGym> = (5..=10)
            .map(|k| oscillation_refinement_system(&space, &grid, k))
            .collect();
        let battery = Battery::standard(&space, 1, 10, 7).unwrap();
        let report =
            helly_extract(&seq, &battery, &[0.0, 0.5, 1.0], 1e-6, (2.0, 3.0)).unwrap();
        assert!(report.max_residual() <= 1e-6);
        assert!(report.limit.is_some());
        assert_eq!(report.var_bound_ok, Some(true));
        assert_eq!(report.norm_bound_ok, Some(true));
        // The limit's variation matches the correlated oscillation: steps of
        // size |dt| * 1 in every branch.
        let limit = report.limit.unwrap();
        let var = limit.variation(None, 0.0, 1.0).unwrap().value;
        assert!((var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn semicontinuity_margins() {
        let space = interval(0.0, 1.0, 16);
        let grid = [0.0, 0.5, 1.0];
        let battery = Battery::standard(&space, 1, 8, 8).unwrap();
        let d_times = [0.0, 0.5, 1.0];

        // Constant sequence: margin 0.
        let sys = oscillation_refinement_system(&space, &grid, 6);
        let margin = semicontinuity_margin(
            &[sys.clone(), sys.clone()],
            &sys,
            &HomFn::XiNorm,
            &d_times,
            &battery,
            1e-9,
        )
        .unwrap();
        assert_eq!(margin, 0.0);

        // Correlated oscillation: per-step variation equals the limit's.
        let seq: Vec<SystemGym> = (5..=9)
            .map(|k| oscillation_refinement_system(&space, &grid, k))
            .collect();
        let limit = seq.last().unwrap().clone();
        let margin = semicontinuity_margin(
            &seq,
            &limit,
            &HomFn::XiNorm,
            &d_times,
            &battery,
            1e-6,
        )
        .unwrap();
        assert!(margin.abs() <= 1e-9, "margin {margin}");
        assert!(margin >= -1e-9);

        // A transient wiggle at an unmonitored time adds strict variation.
        let wiggle_grid = [0.0, 0.25, 0.5, 1.0];
        let base: Vec<SystemGym> = (5..=9)
            .map(|k| oscillation_refinement_system(&space, &wiggle_grid, k))
            .collect();
        let limit = base.last().unwrap().clone();
        let wiggled: Vec<SystemGym> = base
            .iter()
            .map(|sys| {
                // Double the state at t = 0.25 only: an extra round trip.
                let d = sys.dim_xi();
                let atoms = sys
                    .master()
                    .atoms()
                    .iter()
                    .map(|a| {
                        let mut xi = a.xi.clone();
                        for i in d..2 * d {
                            xi[i] *= 3.0;
                        }
                        Atom::new(a.cell, xi, a.eta, a.w)
                    })
                    .collect();
                let master = DiscreteGym::new(space.clone(), 4 * d, atoms).unwrap();
                SystemGym::from_master(
                    TimeGrid::new(wiggle_grid.to_vec()).unwrap(),
                    d,
                    master,
                )
                .unwrap()
            })
            .collect();
        let margin = semicontinuity_margin(
            &wiggled,
            &limit,
            &HomFn::XiNorm,
            &[0.0, 0.5, 1.0],
            &battery,
            1e-6,
        )
        .unwrap();
        assert!(margin > 0.1, "wiggle margin {margin}");
    }
}
