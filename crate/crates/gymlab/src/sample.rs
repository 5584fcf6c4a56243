//! Seeded random objects for tests, property checks, and the verification
//! suite. Everything here is deterministic given the seed and platform-stable
//! (ChaCha8 underneath).

use crate::gym::{recompose, DiscreteGym, DiscreteMeasure, VarifoldAtom, VarifoldPart, YoungAtom, YoungPart};
use crate::homfn::HomFn;
use crate::numeric::{norm, scale, seeded_rng};
use crate::space::SpaceModel;
use crate::systems::SystemGym;
use crate::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A random `Xi`-valued measure: bounded densities everywhere, singular
/// vector masses on a few cells.
pub fn random_measure(space: &SpaceModel, dim_xi: usize, seed: u64) -> Result<DiscreteMeasure> {
    let mut rng = seeded_rng(seed);
    random_measure_with(space, dim_xi, &mut rng)
}

pub fn random_measure_with(
    space: &SpaceModel,
    dim_xi: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DiscreteMeasure> {
    let cells = space.num_cells();
    let ac = (0..cells)
        .map(|_| (0..dim_xi).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let mut singular = Vec::new();
    let n_sing = rng.random_range(0..=5.min(cells));
    for _ in 0..n_sing {
        let cell = rng.random_range(0..cells);
        let mass: Vec<f64> = (0..dim_xi).map(|_| rng.random_range(-2.0..2.0)).collect();
        if norm(&mass) > 1e-6 {
            singular.push((cell, mass));
        }
    }
    DiscreteMeasure::new(space.clone(), dim_xi, ac, singular)
}

/// A random valid measure: per-cell Young mixtures (so the projection
/// property holds by construction) plus occasional concentration rays.
pub fn random_gym(
    space: &SpaceModel,
    dim_xi: usize,
    max_atoms: usize,
    seed: u64,
) -> Result<DiscreteGym> {
    let mut rng = seeded_rng(seed ^ 0x9e3779b97f4a7c15);
    random_gym_with(space, dim_xi, max_atoms, &mut rng)
}

pub fn random_gym_with(
    space: &SpaceModel,
    dim_xi: usize,
    max_atoms: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DiscreteGym> {
    let cells = space.num_cells();
    let per_cell = (max_atoms / cells).clamp(1, 4);
    let mut young = Vec::new();
    let mut varifold = Vec::new();
    for cell in 0..cells {
        let lambda = space.cell_measure(cell);
        let k = rng.random_range(1..=per_cell);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        for mass_frac in raw {
            let xi: Vec<f64> = (0..dim_xi).map(|_| rng.random_range(-3.0..3.0)).collect();
            young.push(YoungAtom {
                cell,
                xi,
                mass: lambda * mass_frac / total,
            });
        }
        if rng.random::<f64>() < 0.4 {
            let dir: Vec<f64> = (0..dim_xi).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = norm(&dir);
            if n > 1e-6 {
                varifold.push(VarifoldAtom {
                    cell,
                    direction: scale(&dir, 1.0 / n),
                    mass: rng.random_range(0.1..2.0),
                });
            }
        }
    }
    let young = YoungPart::new(space.clone(), dim_xi, young)?;
    let varifold = VarifoldPart::new(space.clone(), dim_xi, varifold)?;
    recompose(&young, &varifold)
}

/// A random convex positively one-homogeneous test function built from
/// convexity-preserving combinators only.
pub fn random_convex_fn(dim_xi: usize, rng: &mut ChaCha8Rng) -> Result<HomFn> {
    let linear = |rng: &mut ChaCha8Rng| {
        let a: Vec<f64> = (0..dim_xi).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: f64 = rng.random_range(-1.0..1.0);
        HomFn::linear_const(a, b)
    };
    let base = match rng.random_range(0..5u32) {
        0 => HomFn::EuclidNorm,
        1 => HomFn::XiNorm,
        2 => HomFn::positive_part(linear(rng)),
        3 => HomFn::max(linear(rng), linear(rng))?,
        _ => linear(rng),
    };
    if rng.random::<f64>() < 0.5 {
        let other = match rng.random_range(0..3u32) {
            0 => HomFn::EuclidNorm,
            1 => HomFn::positive_part(linear(rng)),
            _ => HomFn::max(linear(rng), linear(rng))?,
        };
        HomFn::combine(vec![
            (rng.random_range(0.1..2.0), base),
            (rng.random_range(0.1..2.0), other),
        ])
    } else {
        Ok(base)
    }
}

/// A random compatible system: a joint master measure over the grid whose
/// per-cell Young mixtures carry correlated joint coordinates, plus optional
/// joint concentration rays.
pub fn random_system(
    space: &SpaceModel,
    dim_xi: usize,
    grid: &[f64],
    max_atoms: usize,
    seed: u64,
) -> Result<SystemGym> {
    let mut rng = seeded_rng(seed ^ 0x5ca1ab1e);
    let steps = grid.len();
    let joint_dim = dim_xi * steps;
    let cells = space.num_cells();
    let per_cell = (max_atoms / cells).clamp(1, 3);
    let mut young = Vec::new();
    let mut varifold = Vec::new();
    for cell in 0..cells {
        let lambda = space.cell_measure(cell);
        let k = rng.random_range(1..=per_cell);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        for mass_frac in raw {
            // A rough random walk across the grid makes neighbouring times
            // correlated, which is what systems are for.
            let mut joint = Vec::with_capacity(joint_dim);
            let mut state: Vec<f64> = (0..dim_xi).map(|_| rng.random_range(-2.0..2.0)).collect();
            for _ in 0..steps {
                joint.extend(state.iter().copied());
                for v in state.iter_mut() {
                    *v += rng.random_range(-1.0..1.0);
                }
            }
            young.push(YoungAtom {
                cell,
                xi: joint,
                mass: lambda * mass_frac / total,
            });
        }
        if rng.random::<f64>() < 0.3 {
            let dir: Vec<f64> = (0..joint_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = norm(&dir);
            if n > 1e-6 {
                varifold.push(VarifoldAtom {
                    cell,
                    direction: scale(&dir, 1.0 / n),
                    mass: rng.random_range(0.1..1.0),
                });
            }
        }
    }
    let young = YoungPart::new(space.clone(), joint_dim, young)?;
    let varifold = VarifoldPart::new(space.clone(), joint_dim, varifold)?;
    let master = recompose(&young, &varifold)?;
    SystemGym::from_master(crate::systems::TimeGrid::new(grid.to_vec())?, dim_xi, master)
}
