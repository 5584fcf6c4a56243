//! Compatible systems of generalized Young measures over a time grid.
//!
//! A system is stored as one *master* joint measure whose state dimension is
//! `dim_xi * (k + 1)` for a grid of `k + 1` times: every atom carries the
//! joint tuple `(xi_{a_0}, ..., xi_{a_k})`. All finite-tuple marginals are
//! coordinate projections of the master, so the compatibility condition —
//! nested tuples agree under projection — holds by construction instead of
//! being a runtime check. Off-grid times use piecewise constant
//! interpolation: a query `t` reads the block of the largest grid time
//! `a_j <= t`.

use crate::gym::{Atom, Battery, DiscreteGym, DiscreteMeasure};
use crate::homfn::{HomFn, HomMap};
use crate::numeric::{joint_norm, norm, pairwise_sum, scale};
use crate::space::SpaceModel;
use crate::{GymError, Result};

/// Strictly increasing times `a_0 < a_1 < ... < a_k`, `k >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(GymError::Precondition(
                "a time grid needs at least two points".into(),
            ));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(GymError::NonFinite {
                context: "time grid".into(),
            });
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GymError::TimesNotIncreasing);
        }
        Ok(TimeGrid { times })
    }

    pub fn uniform(a: f64, b: f64, steps: usize) -> Result<Self> {
        if steps == 0 || b <= a {
            return Err(GymError::Precondition("degenerate uniform grid".into()));
        }
        let times = (0..=steps)
            .map(|i| a + (b - a) * i as f64 / steps as f64)
            .collect();
        TimeGrid::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Largest index `j` with `a_j <= t` (the piecewise-constant
    /// interpolation map). Errors outside `[a_0, a_k]`.
    pub fn rho_index(&self, t: f64) -> Result<usize> {
        if t < self.start() || t > self.end() {
            return Err(GymError::TimeOutOfRange {
                t,
                lo: self.start(),
                hi: self.end(),
            });
        }
        let mut j = 0;
        for (i, &a) in self.times.iter().enumerate() {
            if a <= t {
                j = i;
            } else {
                break;
            }
        }
        Ok(j)
    }
}

/// A compatible system of generalized Young measures: time grid plus a joint
/// master measure with state dimension `dim_xi * (k + 1)`.
#[derive(Debug, Clone)]
pub struct SystemGym {
    grid: TimeGrid,
    dim_xi: usize,
    master: DiscreteGym,
}

impl SystemGym {
    pub fn from_master(grid: TimeGrid, dim_xi: usize, master: DiscreteGym) -> Result<Self> {
        let expected = dim_xi * grid.len();
        if master.dim_xi() != expected {
            return Err(GymError::DimensionMismatch {
                expected,
                got: master.dim_xi(),
            });
        }
        if !master.validate().passes() {
            return Err(GymError::Precondition(
                "master measure fails validation".into(),
            ));
        }
        Ok(SystemGym {
            grid,
            dim_xi,
            master,
        })
    }

    /// The system generated by a sampled path `t -> p(t)`: the master is the
    /// lift of the stacked measure `(p(a_0), ..., p(a_k))`, built cellwise
    /// against the common dominating measure `lambda + |joint singular|`
    /// (singular masses in one cell are co-located: a cell is the finest
    /// addressable point).
    pub fn from_path(samples: &[(f64, DiscreteMeasure)]) -> Result<Self> {
        let times: Vec<f64> = samples.iter().map(|(t, _)| *t).collect();
        let grid = TimeGrid::new(times)?;
        let measures: Vec<&DiscreteMeasure> = samples.iter().map(|(_, p)| p).collect();
        let master = joint_lift(&measures)?;
        let dim_xi = measures[0].dim_xi();
        SystemGym::from_master(grid, dim_xi, master)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim_xi(&self) -> usize {
        self.dim_xi
    }

    pub fn master(&self) -> &DiscreteGym {
        &self.master
    }

    pub fn space(&self) -> &SpaceModel {
        self.master.space()
    }

    /// Marginal at a strictly increasing tuple of times in `[a_0, a_k]`:
    /// coordinate projection of the master onto the interpolated blocks.
    pub fn marginal(&self, times: &[f64]) -> Result<DiscreteGym> {
        if times.is_empty() {
            return Err(GymError::Empty("marginal time tuple"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GymError::TimesNotIncreasing);
        }
        let blocks: Vec<usize> = times
            .iter()
            .map(|&t| self.grid.rho_index(t))
            .collect::<Result<_>>()?;
        self.project_blocks(&blocks)
    }

    /// Single-time marginal.
    pub fn marginal_at(&self, t: f64) -> Result<DiscreteGym> {
        self.marginal(&[t])
    }

    fn project_blocks(&self, blocks: &[usize]) -> Result<DiscreteGym> {
        let d = self.dim_xi;
        let mut atoms = Vec::with_capacity(self.master.atoms().len());
        for atom in self.master.atoms() {
            let mut xi = Vec::with_capacity(d * blocks.len());
            for &b in blocks {
                xi.extend_from_slice(&atom.xi[b * d..(b + 1) * d]);
            }
            if atom.eta == 0.0 && norm(&xi) == 0.0 {
                continue;
            }
            atoms.push(Atom {
                cell: atom.cell,
                xi,
                eta: atom.eta,
                w: atom.w,
            });
        }
        DiscreteGym::new(self.space().clone(), d * blocks.len(), atoms)
    }

    /// Barycentres of the single-time marginals at the grid times. The
    /// blocks of the master's joint barycentre must agree componentwise;
    /// that identity is asserted here.
    pub fn bar_path(&self) -> Result<Vec<DiscreteMeasure>> {
        let joint_bar = self.master.barycentre();
        let mut out = Vec::with_capacity(self.grid.len());
        for (i, &t) in self.grid.times().iter().enumerate() {
            let bar = self.marginal_at(t)?.barycentre();
            // Componentwise consistency with the joint barycentre.
            let d = self.dim_xi;
            for (cell, row) in bar.ac().iter().enumerate() {
                let joint_row = &joint_bar.ac()[cell][i * d..(i + 1) * d];
                for (a, b) in row.iter().zip(joint_row) {
                    if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                        return Err(GymError::Precondition(format!(
                            "joint barycentre block mismatch at time {t}, cell {cell}"
                        )));
                    }
                }
            }
            out.push(bar);
        }
        Ok(out)
    }

    /// Variation of the system on `[a, b]` for a subadditive one-homogeneous
    /// increment function `h` (default `|.|`). For a grid system the
    /// supremum over partitions is attained on the grid: the value is the
    /// sum over grid steps of `<h(xi_i - xi_{i-1}), master>`, computed
    /// atomwise.
    pub fn variation(&self, h: Option<&HomFn>, a: f64, b: f64) -> Result<VariationReport> {
        let default = HomFn::XiNorm;
        let h = match h {
            // Caller-supplied increment functions must pass the sampled
            // subadditivity/homogeneity check; the default norm is
            // subadditive by construction.
            Some(h) => {
                check_increment_fn(h, self.space(), self.dim_xi)?;
                h
            }
            None => &default,
        };
        if a > b {
            return Err(GymError::Precondition("variation needs a <= b".into()));
        }
        let ja = self.grid.rho_index(a)?;
        let jb = self.grid.rho_index(b)?;
        let d = self.dim_xi;
        let mut contributions = Vec::new();
        let mut partition = vec![self.grid.times()[ja]];
        for i in (ja + 1)..=jb {
            let terms: Vec<f64> = self
                .master
                .atoms()
                .iter()
                .map(|atom| {
                    let prev = &atom.xi[(i - 1) * d..i * d];
                    let next = &atom.xi[i * d..(i + 1) * d];
                    let delta: Vec<f64> = next.iter().zip(prev).map(|(x, y)| x - y).collect();
                    h.eval(atom.cell, &delta, 0.0).map(|v| atom.w * v)
                })
                .collect::<Result<_>>()?;
            contributions.push(pairwise_sum(&terms));
            partition.push(self.grid.times()[i]);
        }
        let value = pairwise_sum(&contributions);
        Ok(VariationReport {
            value,
            partition,
            contributions,
        })
    }

    /// Attained absolute-continuity modulus: the exact maximum, over
    /// families of nonoverlapping grid-aligned intervals of total length at
    /// most `delta`, of the summed end-to-end increments. Merging adjacent
    /// steps into one interval never helps (the end-to-end increment is at
    /// most the sum of the step increments, at equal length), so the optimum
    /// is a knapsack over single grid steps, solved exactly by a Pareto
    /// frontier sweep.
    pub fn ac_modulus(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(GymError::Precondition("ac_modulus needs delta > 0".into()));
        }
        let d = self.dim_xi;
        let times = self.grid.times();
        let mut items = Vec::with_capacity(times.len() - 1);
        for i in 1..times.len() {
            let terms: Vec<f64> = self
                .master
                .atoms()
                .iter()
                .map(|atom| {
                    let prev = &atom.xi[(i - 1) * d..i * d];
                    let next = &atom.xi[i * d..(i + 1) * d];
                    let delta_xi: Vec<f64> =
                        next.iter().zip(prev).map(|(x, y)| x - y).collect();
                    atom.w * norm(&delta_xi)
                })
                .collect();
            items.push((times[i] - times[i - 1], pairwise_sum(&terms)));
        }
        // Pareto states (total length, best weight), kept minimal.
        let mut states: Vec<(f64, f64)> = vec![(0.0, 0.0)];
        for &(len, weight) in &items {
            let mut extended: Vec<(f64, f64)> = states
                .iter()
                .filter(|(l, _)| l + len <= delta + 1e-15)
                .map(|(l, w)| (l + len, w + weight))
                .collect();
            states.append(&mut extended);
            states.sort_by(|x, y| x.0.total_cmp(&y.0).then(y.1.total_cmp(&x.1)));
            let mut pruned: Vec<(f64, f64)> = Vec::with_capacity(states.len());
            let mut best = f64::NEG_INFINITY;
            for (l, w) in states.drain(..) {
                if w > best {
                    best = w;
                    pruned.push((l, w));
                }
            }
            states = pruned;
        }
        Ok(states
            .iter()
            .map(|(_, w)| *w)
            .fold(0.0f64, f64::max))
    }

    /// Difference quotient between two times: the pair marginal pushed
    /// forward under `(xi_1, xi_2) -> (xi_2 - xi_1)/(t_2 - t_1)`.
    pub fn diff_quotient(&self, t1: f64, t2: f64) -> Result<DiscreteGym> {
        if t1 >= t2 {
            return Err(GymError::Precondition(
                "difference quotient needs t1 < t2".into(),
            ));
        }
        let pair = self.marginal(&[t1, t2])?;
        let q = HomMap::difference_quotient(self.dim_xi, t2 - t1)?;
        pair.image(&q)
    }
}

/// Build the lift of a stacked measure `(p_1, ..., p_m)` on the common
/// space: per cell one density atom stacking the ac rows, plus one ray atom
/// stacking the per-cell singular masses.
pub fn joint_lift(measures: &[&DiscreteMeasure]) -> Result<DiscreteGym> {
    let first = measures
        .first()
        .ok_or(GymError::Empty("measure list for a joint lift"))?;
    let space = first.space().clone();
    let d = first.dim_xi();
    for p in measures {
        if *p.space() != space || p.dim_xi() != d {
            return Err(GymError::Precondition(
                "joint lift needs measures on one common space".into(),
            ));
        }
    }
    let m = measures.len();
    let cells = space.num_cells();
    let mut atoms = Vec::with_capacity(2 * cells);
    for cell in 0..cells {
        let mut density = Vec::with_capacity(d * m);
        for p in measures {
            density.extend_from_slice(&p.ac()[cell]);
        }
        let lambda = space.cell_measure(cell);
        let n = joint_norm(&density, 1.0);
        atoms.push(Atom {
            cell,
            xi: scale(&density, 1.0 / n),
            eta: 1.0 / n,
            w: lambda * n,
        });
        let mut stacked = vec![0.0; d * m];
        let mut any = false;
        for (slot, p) in measures.iter().enumerate() {
            if let Some((_, mass)) = p.singular().iter().find(|(c, _)| *c == cell) {
                stacked[slot * d..(slot + 1) * d].copy_from_slice(mass);
                any = true;
            }
        }
        if any {
            let nn = norm(&stacked);
            atoms.push(Atom {
                cell,
                xi: scale(&stacked, 1.0 / nn),
                eta: 0.0,
                w: nn,
            });
        }
    }
    DiscreteGym::new(space, d * m, atoms)
}

/// Increment functions for variations must be nonnegative, subadditive, and
/// exactly one-homogeneous on sampled data (probed in the `eta = 0` slice,
/// where increments live).
fn check_increment_fn(h: &HomFn, space: &SpaceModel, dim_xi: usize) -> Result<()> {
    if let Some(dh) = h.dim_xi() {
        if dh != dim_xi {
            return Err(GymError::DimensionMismatch {
                expected: dim_xi,
                got: dh,
            });
        }
    }
    let mut rng = crate::numeric::seeded_rng(0x1a4);
    use rand::Rng;
    let cells = space.num_cells();
    for _ in 0..2000 {
        let cell = rng.random_range(0..cells);
        let xi1: Vec<f64> = (0..dim_xi).map(|_| rng.random_range(-2.0..2.0)).collect();
        let xi2: Vec<f64> = (0..dim_xi).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t: f64 = rng.random_range(0.0..2.0);
        let f1 = h.eval(cell, &xi1, 0.0)?;
        let f2 = h.eval(cell, &xi2, 0.0)?;
        if f1 < -1e-12 || f2 < -1e-12 {
            return Err(GymError::Precondition(
                "increment function must be nonnegative".into(),
            ));
        }
        let sum: Vec<f64> = xi1.iter().zip(&xi2).map(|(a, b)| a + b).collect();
        let fs = h.eval(cell, &sum, 0.0)?;
        if fs - f1 - f2 > 1e-10 {
            return Err(GymError::Precondition(format!(
                "increment function fails subadditivity sampling by {:e}",
                fs - f1 - f2
            )));
        }
        let scaled: Vec<f64> = xi1.iter().map(|v| v * t).collect();
        let fsc = h.eval(cell, &scaled, 0.0)?;
        if (fsc - t * f1).abs() > 1e-10 * (1.0 + t) * (1.0 + norm(&xi1)) {
            return Err(GymError::Precondition(
                "increment function fails homogeneity sampling".into(),
            ));
        }
    }
    Ok(())
}

/// Per-step breakdown of a variation computation.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationReport {
    /// Total variation over the requested window.
    pub value: f64,
    /// Grid times bounding the steps that contributed.
    pub partition: Vec<f64>,
    /// `<h(xi_i - xi_{i-1}), master>` per step; all nonnegative.
    pub contributions: Vec<f64>,
}

/// Anything that can produce joint measures for arbitrary finite time
/// tuples: grid systems, sampled paths, closed-form oscillation families.
pub trait SystemOracle {
    fn space(&self) -> &SpaceModel;
    fn dim_xi(&self) -> usize;
    /// Closed time horizon `[lo, hi]` the oracle answers on.
    fn horizon(&self) -> (f64, f64);
    /// Declared resolution (finest time or space scale the oracle resolves).
    fn resolution(&self) -> f64;
    /// Joint measure for a strictly increasing tuple of times.
    fn joint(&self, times: &[f64]) -> Result<DiscreteGym>;
}

/// Oracle backed by a stored grid system (off-grid queries interpolate).
#[derive(Debug, Clone)]
pub struct GridOracle {
    system: SystemGym,
}

impl GridOracle {
    pub fn new(system: SystemGym) -> Self {
        GridOracle { system }
    }

    pub fn system(&self) -> &SystemGym {
        &self.system
    }
}

impl SystemOracle for GridOracle {
    fn space(&self) -> &SpaceModel {
        self.system.space()
    }

    fn dim_xi(&self) -> usize {
        self.system.dim_xi()
    }

    fn horizon(&self) -> (f64, f64) {
        (self.system.grid().start(), self.system.grid().end())
    }

    fn resolution(&self) -> f64 {
        self.system
            .grid()
            .times()
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    fn joint(&self, times: &[f64]) -> Result<DiscreteGym> {
        self.system.marginal(times)
    }
}

/// Oracle backed by a measure-valued path `t -> p(t)`.
pub struct PathOracle {
    space: SpaceModel,
    dim_xi: usize,
    horizon: (f64, f64),
    resolution: f64,
    path: Box<dyn Fn(f64) -> Result<DiscreteMeasure> + Send + Sync>,
}

impl PathOracle {
    pub fn new(
        space: SpaceModel,
        dim_xi: usize,
        horizon: (f64, f64),
        resolution: f64,
        path: impl Fn(f64) -> Result<DiscreteMeasure> + Send + Sync + 'static,
    ) -> Self {
        PathOracle {
            space,
            dim_xi,
            horizon,
            resolution,
            path: Box::new(path),
        }
    }

    pub fn sample(&self, t: f64) -> Result<DiscreteMeasure> {
        (self.path)(t)
    }
}

impl SystemOracle for PathOracle {
    fn space(&self) -> &SpaceModel {
        &self.space
    }

    fn dim_xi(&self) -> usize {
        self.dim_xi
    }

    fn horizon(&self) -> (f64, f64) {
        self.horizon
    }

    fn resolution(&self) -> f64 {
        self.resolution
    }

    fn joint(&self, times: &[f64]) -> Result<DiscreteGym> {
        if times.is_empty() {
            return Err(GymError::Empty("time tuple"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GymError::TimesNotIncreasing);
        }
        let (lo, hi) = self.horizon;
        for &t in times {
            if t < lo || t > hi {
                return Err(GymError::TimeOutOfRange { t, lo, hi });
            }
        }
        let measures: Vec<DiscreteMeasure> =
            times.iter().map(|&t| self.sample(t)).collect::<Result<_>>()?;
        let refs: Vec<&DiscreteMeasure> = measures.iter().collect();
        joint_lift(&refs)
    }
}

/// Check the projection compatibility of an oracle on nested tuples:
/// `<f, joint(s)> = <f o pi, joint(t)>` whenever `s` is a subtuple of `t`.
/// Returns the worst defect over the probe battery.
pub fn probe_compatibility(
    oracle: &dyn SystemOracle,
    tuples: &[Vec<f64>],
    battery: &Battery,
) -> Result<f64> {
    let d = oracle.dim_xi();
    let mut worst = 0.0f64;
    for tuple in tuples {
        let full = oracle.joint(tuple)?;
        for drop in 0..tuple.len() {
            if tuple.len() < 2 {
                continue;
            }
            let sub: Vec<f64> = tuple
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != drop)
                .map(|(_, t)| *t)
                .collect();
            let selected: Vec<usize> = (0..tuple.len()).filter(|i| *i != drop).collect();
            let projected = oracle.joint(&sub)?;
            let pi = HomMap::block_projection(d, tuple.len(), &selected)?;
            for (_, f) in battery.joint_functionals(d, sub.len())? {
                let lhs = projected.pair(&f)?;
                let composed = HomFn::compose(f, pi.clone())?;
                let rhs = full.pair(&composed)?;
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    if worst > 1e-10 {
        return Err(GymError::OracleInconsistency(format!(
            "projection compatibility defect {worst:e} exceeds 1e-10"
        )));
    }
    Ok(worst)
}

/// Verdict of a weak*-derivative estimation.
#[derive(Debug, Clone, PartialEq)]
pub enum DerivativeVerdict {
    /// Both one-sided quotient families are Cauchy and agree.
    Converged,
    /// Exactly one side is Cauchy.
    OneSided { left: bool },
    /// No limit: carries a human-readable witness.
    NoLimit { witness: String },
}

/// Report of [`derivative_estimate`].
#[derive(Debug, Clone)]
pub struct DerivativeReport {
    pub verdict: DerivativeVerdict,
    /// The final right quotient measure when converged.
    pub estimate: Option<DiscreteGym>,
    pub schedule: Vec<f64>,
    /// Battery pairings of the left/right quotients, one row per schedule
    /// entry.
    pub left_pairings: Vec<Vec<f64>>,
    pub right_pairings: Vec<Vec<f64>>,
    /// Weighted battery distance between consecutive schedule entries.
    pub left_residuals: Vec<f64>,
    pub right_residuals: Vec<f64>,
    /// Weighted battery distance between the final left and right quotients.
    pub two_sided_gap: f64,
}

/// Estimate the weak* derivative at `t0` by driving the two one-sided
/// difference quotients through a decreasing offset schedule and testing
/// both for a Cauchy tail and mutual agreement on the battery.
pub fn derivative_estimate(
    oracle: &dyn SystemOracle,
    t0: f64,
    schedule: &[f64],
    battery: &Battery,
    tol: f64,
) -> Result<DerivativeReport> {
    if schedule.len() < 2 {
        return Err(GymError::Precondition(
            "derivative estimation needs a schedule of at least two offsets".into(),
        ));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) || schedule.iter().any(|e| *e <= 0.0) {
        return Err(GymError::Precondition(
            "offset schedule must be positive and strictly decreasing".into(),
        ));
    }
    let (lo, hi) = oracle.horizon();
    let eps_max = schedule[0];
    if t0 - eps_max < lo || t0 + eps_max > hi {
        return Err(GymError::TimeOutOfRange { t: t0, lo, hi });
    }
    let d = oracle.dim_xi();
    let mut left_pairings = Vec::new();
    let mut right_pairings = Vec::new();
    let mut last_left = None;
    let mut last_right = None;
    for &eps in schedule {
        let left_joint = oracle.joint(&[t0 - eps, t0])?;
        let right_joint = oracle.joint(&[t0, t0 + eps])?;
        let q = HomMap::difference_quotient(d, eps)?;
        let left = left_joint.image(&q)?;
        let right = right_joint.image(&q)?;
        left_pairings.push(battery.pairings(&left)?);
        right_pairings.push(battery.pairings(&right)?);
        last_left = Some(left);
        last_right = Some(right);
    }
    let weighted = |a: &[f64], b: &[f64]| -> f64 {
        let terms: Vec<f64> = a
            .iter()
            .zip(b)
            .enumerate()
            .map(|(i, (x, y))| battery.weight(i) * (x - y).abs())
            .collect();
        pairwise_sum(&terms)
    };
    let left_residuals: Vec<f64> = left_pairings
        .windows(2)
        .map(|w| weighted(&w[0], &w[1]))
        .collect();
    let right_residuals: Vec<f64> = right_pairings
        .windows(2)
        .map(|w| weighted(&w[0], &w[1]))
        .collect();
    let two_sided_gap = weighted(
        left_pairings.last().unwrap(),
        right_pairings.last().unwrap(),
    );
    let left_cauchy = *left_residuals.last().unwrap() <= tol;
    let right_cauchy = *right_residuals.last().unwrap() <= tol;
    let agree = two_sided_gap <= tol;
    let verdict = if left_cauchy && right_cauchy && agree {
        DerivativeVerdict::Converged
    } else if left_cauchy && right_cauchy {
        DerivativeVerdict::NoLimit {
            witness: format!(
                "one-sided limits disagree: weighted battery gap {two_sided_gap:e} > {tol:e}"
            ),
        }
    } else if left_cauchy != right_cauchy {
        DerivativeVerdict::OneSided { left: left_cauchy }
    } else {
        DerivativeVerdict::NoLimit {
            witness: format!(
                "neither side is Cauchy: residuals {:e} / {:e}",
                left_residuals.last().unwrap(),
                right_residuals.last().unwrap()
            ),
        }
    };
    let estimate = if verdict == DerivativeVerdict::Converged {
        last_right
    } else {
        let _ = last_left;
        None
    };
    Ok(DerivativeReport {
        verdict,
        estimate,
        schedule: schedule.to_vec(),
        left_pairings,
        right_pairings,
        left_residuals,
        right_residuals,
        two_sided_gap,
    })
}

/// Report of [`variation_integral_gap`].
#[derive(Debug, Clone)]
pub struct IntegralGapReport {
    /// Grid variation at step `dt`.
    pub lhs: f64,
    /// Midpoint-rule integral of `<h(xi), d/dt mu_t>`.
    pub rhs: f64,
    /// `lhs - rhs` (signed).
    pub gap: f64,
    pub nodes: usize,
    pub failed_nodes: usize,
    pub dt: f64,
}

/// Compare the grid variation of an oracle-backed system against the
/// midpoint-rule time integral of the derivative pairings `<h(xi), mu'_t>`.
/// For a system of bounded variation the integral never exceeds the
/// variation (up to `tol`); for an absolutely continuous one the two sides
/// agree to first order in `dt`. Both error budgets are O(dt): derivative
/// estimates themselves carry O(dt) error, so higher-order quadrature would
/// buy nothing.
pub fn variation_integral_gap(
    oracle: &dyn SystemOracle,
    h: &HomFn,
    a: f64,
    b: f64,
    dt: f64,
    tol: f64,
    battery: &Battery,
) -> Result<IntegralGapReport> {
    if !(dt > 0.0) || b <= a {
        return Err(GymError::Precondition(
            "variation_integral_gap needs a < b and dt > 0".into(),
        ));
    }
    let steps = ((b - a) / dt).round() as usize;
    if steps == 0 || ((b - a) - steps as f64 * dt).abs() > 1e-9 * (b - a) {
        return Err(GymError::Precondition(
            "dt must divide the window [a, b]".into(),
        ));
    }
    let times: Vec<f64> = (0..=steps).map(|i| a + dt * i as f64).collect();
    let master = oracle.joint(&times)?;
    let system = SystemGym::from_master(TimeGrid::new(times)?, oracle.dim_xi(), master)?;
    let lhs = system.variation(Some(h), a, b)?.value;

    let schedule = [dt / 2.0, dt / 4.0, dt / 8.0];
    let mut integrand = Vec::with_capacity(steps);
    let mut failed = 0usize;
    for i in 0..steps {
        let midpoint = a + dt * (i as f64 + 0.5);
        let report = derivative_estimate(oracle, midpoint, &schedule, battery, tol)?;
        match report.verdict {
            DerivativeVerdict::Converged => {
                let estimate = report.estimate.as_ref().unwrap();
                let terms: Vec<f64> = estimate
                    .atoms()
                    .iter()
                    .map(|atom| h.eval(atom.cell, &atom.xi, 0.0).map(|v| atom.w * v))
                    .collect::<Result<_>>()?;
                integrand.push(pairwise_sum(&terms));
            }
            _ => {
                failed += 1;
                integrand.push(0.0);
            }
        }
    }
    if failed * 20 > steps {
        return Err(GymError::Precondition(format!(
            "derivative estimation failed at {failed} of {steps} quadrature nodes (> 5%)"
        )));
    }
    let rhs = dt * pairwise_sum(&integrand);
    Ok(IntegralGapReport {
        lhs,
        rhs,
        gap: lhs - rhs,
        nodes: steps,
        failed_nodes: failed,
        dt,
    })
}
