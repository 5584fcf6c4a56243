//! Versioned JSON file formats and CSV report writers.
//!
//! Every numeric payload is a decimal string produced by the shortest
//! round-trip formatter, so a value survives save/load bit-exactly and the
//! files stay diffable. Schemas: `gym.v1` (measures), `measure.v1`
//! (`Xi`-valued measures), `sgy.v1` (systems), `step.v1` (refined step
//! functions), `homfn.v1` (test-function trees).

use crate::approx::{Segment, StepFunction};
use crate::gym::{Atom, DiscreteGym, DiscreteMeasure};
use crate::homfn::{Field, HomFn, HomMap, ScalarField};
use crate::space::SpaceModel;
use crate::systems::{SystemGym, TimeGrid};
use crate::{GymError, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Shortest decimal representation that parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn parse_f64(s: &str, context: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| GymError::Serialization(format!("bad decimal '{s}' in {context}")))
}

fn parse_finite(s: &str, context: &str) -> Result<f64> {
    let v = parse_f64(s, context)?;
    if !v.is_finite() {
        return Err(GymError::Serialization(format!(
            "non-finite value '{s}' in {context}"
        )));
    }
    Ok(v)
}

fn fmt_vec(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| fmt_f64(*x)).collect()
}

fn parse_vec(v: &[String], context: &str) -> Result<Vec<f64>> {
    v.iter().map(|s| parse_finite(s, context)).collect()
}

// ---------------------------------------------------------------------------
// Space
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceDoc {
    Interval {
        lo: String,
        hi: String,
        cells: usize,
    },
    PointCloud {
        labels: Vec<String>,
        weights: Vec<String>,
        distances: Vec<Vec<String>>,
    },
}

impl SpaceDoc {
    pub fn from_space(space: &SpaceModel) -> Self {
        match space {
            SpaceModel::Interval { lo, hi, cells } => SpaceDoc::Interval {
                lo: fmt_f64(*lo),
                hi: fmt_f64(*hi),
                cells: *cells,
            },
            SpaceModel::PointCloud {
                labels,
                weights,
                distances,
            } => SpaceDoc::PointCloud {
                labels: labels.clone(),
                weights: fmt_vec(weights),
                distances: distances.iter().map(|row| fmt_vec(row)).collect(),
            },
        }
    }

    pub fn to_space(&self) -> Result<SpaceModel> {
        match self {
            SpaceDoc::Interval { lo, hi, cells } => SpaceModel::interval(
                parse_finite(lo, "space.lo")?,
                parse_finite(hi, "space.hi")?,
                *cells,
            ),
            SpaceDoc::PointCloud {
                labels,
                weights,
                distances,
            } => SpaceModel::point_cloud(
                labels.clone(),
                parse_vec(weights, "space.weights")?,
                distances
                    .iter()
                    .map(|row| parse_vec(row, "space.distances"))
                    .collect::<Result<_>>()?,
            ),
        }
    }
}

// ---------------------------------------------------------------------------
// gym.v1
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomDoc {
    pub cell: usize,
    pub xi: Vec<String>,
    pub eta: String,
    pub w: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GymDoc {
    pub schema: String,
    pub space: SpaceDoc,
    pub dim_xi: usize,
    pub atoms: Vec<AtomDoc>,
}

impl GymDoc {
    pub fn from_gym(mu: &DiscreteGym) -> Self {
        GymDoc {
            schema: "gym.v1".into(),
            space: SpaceDoc::from_space(mu.space()),
            dim_xi: mu.dim_xi(),
            atoms: mu
                .atoms()
                .iter()
                .map(|a| AtomDoc {
                    cell: a.cell,
                    xi: fmt_vec(&a.xi),
                    eta: fmt_f64(a.eta),
                    w: fmt_f64(a.w),
                })
                .collect(),
        }
    }

    pub fn to_gym(&self) -> Result<DiscreteGym> {
        expect_schema(&self.schema, "gym.v1")?;
        let space = self.space.to_space()?;
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                Ok(Atom::new(
                    a.cell,
                    parse_vec(&a.xi, "atom.xi")?,
                    parse_finite(&a.eta, "atom.eta")?,
                    parse_finite(&a.w, "atom.w")?,
                ))
            })
            .collect::<Result<_>>()?;
        DiscreteGym::new(space, self.dim_xi, atoms)
    }
}

// ---------------------------------------------------------------------------
// measure.v1
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularDoc {
    pub cell: usize,
    pub mass: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureDoc {
    pub schema: String,
    pub space: SpaceDoc,
    pub dim_xi: usize,
    pub ac: Vec<Vec<String>>,
    pub singular: Vec<SingularDoc>,
}

impl MeasureDoc {
    pub fn from_measure(p: &DiscreteMeasure) -> Self {
        MeasureDoc {
            schema: "measure.v1".into(),
            space: SpaceDoc::from_space(p.space()),
            dim_xi: p.dim_xi(),
            ac: p.ac().iter().map(|row| fmt_vec(row)).collect(),
            singular: p
                .singular()
                .iter()
                .map(|(cell, mass)| SingularDoc {
                    cell: *cell,
                    mass: fmt_vec(mass),
                })
                .collect(),
        }
    }

    pub fn to_measure(&self) -> Result<DiscreteMeasure> {
        expect_schema(&self.schema, "measure.v1")?;
        DiscreteMeasure::new(
            self.space.to_space()?,
            self.dim_xi,
            self.ac
                .iter()
                .map(|row| parse_vec(row, "measure.ac"))
                .collect::<Result<_>>()?,
            self.singular
                .iter()
                .map(|s| Ok((s.cell, parse_vec(&s.mass, "measure.singular")?)))
                .collect::<Result<_>>()?,
        )
    }
}

// ---------------------------------------------------------------------------
// sgy.v1
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemDoc {
    pub schema: String,
    pub grid: Vec<String>,
    pub dim_xi: usize,
    pub master: GymDoc,
}

impl SystemDoc {
    pub fn from_system(sys: &SystemGym) -> Self {
        SystemDoc {
            schema: "sgy.v1".into(),
            grid: fmt_vec(sys.grid().times()),
            dim_xi: sys.dim_xi(),
            master: GymDoc::from_gym(sys.master()),
        }
    }

    pub fn to_system(&self) -> Result<SystemGym> {
        expect_schema(&self.schema, "sgy.v1")?;
        let grid = TimeGrid::new(parse_vec(&self.grid, "system.grid")?)?;
        SystemGym::from_master(grid, self.dim_xi, self.master.to_gym()?)
    }
}

// ---------------------------------------------------------------------------
// step.v1
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentDoc {
    pub parent: usize,
    pub lo: String,
    pub hi: String,
    pub measure: String,
    pub value: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepDoc {
    pub schema: String,
    pub space: SpaceDoc,
    pub dim_xi: usize,
    pub segments: Vec<SegmentDoc>,
}

impl StepDoc {
    pub fn from_step(u: &StepFunction) -> Self {
        StepDoc {
            schema: "step.v1".into(),
            space: SpaceDoc::from_space(u.space()),
            dim_xi: u.dim_xi(),
            segments: u
                .segments()
                .iter()
                .map(|s| SegmentDoc {
                    parent: s.parent,
                    lo: fmt_f64(s.lo),
                    hi: fmt_f64(s.hi),
                    measure: fmt_f64(s.measure),
                    value: fmt_vec(&s.value),
                })
                .collect(),
        }
    }

    pub fn to_step(&self) -> Result<StepFunction> {
        expect_schema(&self.schema, "step.v1")?;
        let segments = self
            .segments
            .iter()
            .map(|s| {
                Ok(Segment {
                    parent: s.parent,
                    lo: parse_finite(&s.lo, "segment.lo")?,
                    hi: parse_finite(&s.hi, "segment.hi")?,
                    measure: parse_finite(&s.measure, "segment.measure")?,
                    value: parse_vec(&s.value, "segment.value")?,
                })
            })
            .collect::<Result<_>>()?;
        StepFunction::new(self.space.to_space()?, self.dim_xi, segments)
    }
}

// ---------------------------------------------------------------------------
// homfn.v1
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeDoc {
    Linear {
        a: FieldDoc,
        b: ScalarFieldDoc,
    },
    EuclidNorm,
    XiNorm,
    EtaPart,
    PositivePart {
        f: Box<NodeDoc>,
    },
    Min {
        f: Box<NodeDoc>,
        g: Box<NodeDoc>,
    },
    Max {
        f: Box<NodeDoc>,
        g: Box<NodeDoc>,
    },
    Combine {
        terms: Vec<CombineTermDoc>,
    },
    Diff {
        f: Box<NodeDoc>,
        g: Box<NodeDoc>,
    },
    Compose {
        f: Box<NodeDoc>,
        map: MapDoc,
    },
    PrMoment {
        r: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CombineTermDoc {
    pub coeff: String,
    pub f: NodeDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldDoc {
    Const { values: Vec<String> },
    PerCell { rows: Vec<Vec<String>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFieldDoc {
    Const { value: String },
    PerCell { values: Vec<String> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapDoc {
    Components {
        dim_in: usize,
        components: Vec<NodeDoc>,
    },
    PsiZero {
        dim: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomFnDoc {
    pub schema: String,
    pub root: NodeDoc,
}

impl HomFnDoc {
    pub fn from_homfn(f: &HomFn) -> Result<Self> {
        Ok(HomFnDoc {
            schema: "homfn.v1".into(),
            root: node_from(f)?,
        })
    }

    pub fn to_homfn(&self) -> Result<HomFn> {
        expect_schema(&self.schema, "homfn.v1")?;
        node_to(&self.root)
    }
}

fn node_from(f: &HomFn) -> Result<NodeDoc> {
    Ok(match f {
        HomFn::Linear { a, b } => NodeDoc::Linear {
            a: match a {
                Field::Const(v) => FieldDoc::Const { values: fmt_vec(v) },
                Field::PerCell(rows) => FieldDoc::PerCell {
                    rows: rows.iter().map(|r| fmt_vec(r)).collect(),
                },
            },
            b: match b {
                ScalarField::Const(v) => ScalarFieldDoc::Const { value: fmt_f64(*v) },
                ScalarField::PerCell(vs) => ScalarFieldDoc::PerCell { values: fmt_vec(vs) },
            },
        },
        HomFn::EuclidNorm => NodeDoc::EuclidNorm,
        HomFn::XiNorm => NodeDoc::XiNorm,
        HomFn::EtaPart => NodeDoc::EtaPart,
        HomFn::PositivePart(g) => NodeDoc::PositivePart {
            f: Box::new(node_from(g)?),
        },
        HomFn::Min(g, h) => NodeDoc::Min {
            f: Box::new(node_from(g)?),
            g: Box::new(node_from(h)?),
        },
        HomFn::Max(g, h) => NodeDoc::Max {
            f: Box::new(node_from(g)?),
            g: Box::new(node_from(h)?),
        },
        HomFn::Combine(terms) => NodeDoc::Combine {
            terms: terms
                .iter()
                .map(|(c, g)| {
                    Ok(CombineTermDoc {
                        coeff: fmt_f64(*c),
                        f: node_from(g)?,
                    })
                })
                .collect::<Result<_>>()?,
        },
        HomFn::Diff(g, h) => NodeDoc::Diff {
            f: Box::new(node_from(g)?),
            g: Box::new(node_from(h)?),
        },
        HomFn::Compose(g, map) => NodeDoc::Compose {
            f: Box::new(node_from(g)?),
            map: map_from(map)?,
        },
        HomFn::PrMoment { r } => NodeDoc::PrMoment { r: fmt_f64(*r) },
        HomFn::MoreauYosida { .. } => {
            return Err(GymError::Serialization(
                "Moreau-Yosida envelopes are runtime-only and do not serialize".into(),
            ))
        }
        HomFn::Raw(raw) => {
            return Err(GymError::Serialization(format!(
                "raw callback '{}' does not serialize",
                raw.label
            )))
        }
    })
}

fn node_to(doc: &NodeDoc) -> Result<HomFn> {
    Ok(match doc {
        NodeDoc::Linear { a, b } => HomFn::Linear {
            a: match a {
                FieldDoc::Const { values } => Field::Const(parse_vec(values, "linear.a")?),
                FieldDoc::PerCell { rows } => Field::PerCell(
                    rows.iter()
                        .map(|r| parse_vec(r, "linear.a"))
                        .collect::<Result<_>>()?,
                ),
            },
            b: match b {
                ScalarFieldDoc::Const { value } => {
                    ScalarField::Const(parse_finite(value, "linear.b")?)
                }
                ScalarFieldDoc::PerCell { values } => {
                    ScalarField::PerCell(parse_vec(values, "linear.b")?)
                }
            },
        },
        NodeDoc::EuclidNorm => HomFn::EuclidNorm,
        NodeDoc::XiNorm => HomFn::XiNorm,
        NodeDoc::EtaPart => HomFn::EtaPart,
        NodeDoc::PositivePart { f } => HomFn::positive_part(node_to(f)?),
        NodeDoc::Min { f, g } => HomFn::min(node_to(f)?, node_to(g)?)?,
        NodeDoc::Max { f, g } => HomFn::max(node_to(f)?, node_to(g)?)?,
        NodeDoc::Combine { terms } => HomFn::combine(
            terms
                .iter()
                .map(|t| Ok((parse_finite(&t.coeff, "combine.coeff")?, node_to(&t.f)?)))
                .collect::<Result<Vec<_>>>()?,
        )?,
        NodeDoc::Diff { f, g } => HomFn::diff(node_to(f)?, node_to(g)?)?,
        NodeDoc::Compose { f, map } => HomFn::compose(node_to(f)?, map_to(map)?)?,
        NodeDoc::PrMoment { r } => HomFn::pr_moment(parse_finite(r, "pr_moment.r")?)?,
    })
}

fn map_from(map: &HomMap) -> Result<MapDoc> {
    if map.is_psi_zero() {
        return Ok(MapDoc::PsiZero { dim: map.dim_in });
    }
    Ok(MapDoc::Components {
        dim_in: map.dim_in,
        components: map
            .components_ref()
            .unwrap()
            .iter()
            .map(node_from)
            .collect::<Result<_>>()?,
    })
}

fn map_to(doc: &MapDoc) -> Result<HomMap> {
    match doc {
        MapDoc::Components { dim_in, components } => HomMap::components(
            *dim_in,
            components.iter().map(node_to).collect::<Result<_>>()?,
        ),
        MapDoc::PsiZero { dim } => Ok(HomMap::psi_zero(*dim)),
    }
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

fn expect_schema(got: &str, want: &str) -> Result<()> {
    if got != want {
        return Err(GymError::Serialization(format!(
            "schema mismatch: expected '{want}', found '{got}'"
        )));
    }
    Ok(())
}

fn to_json<T: Serialize>(doc: &T) -> Result<String> {
    serde_json::to_string_pretty(doc).map_err(|e| GymError::Serialization(e.to_string()))
}

fn from_json<'a, T: Deserialize<'a>>(text: &'a str, what: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| GymError::Serialization(format!("parsing {what}: {e}")))
}

pub fn gym_to_json(mu: &DiscreteGym) -> Result<String> {
    to_json(&GymDoc::from_gym(mu))
}

pub fn gym_from_json(text: &str) -> Result<DiscreteGym> {
    from_json::<GymDoc>(text, "gym.v1")?.to_gym()
}

pub fn measure_to_json(p: &DiscreteMeasure) -> Result<String> {
    to_json(&MeasureDoc::from_measure(p))
}

pub fn measure_from_json(text: &str) -> Result<DiscreteMeasure> {
    from_json::<MeasureDoc>(text, "measure.v1")?.to_measure()
}

pub fn system_to_json(sys: &SystemGym) -> Result<String> {
    to_json(&SystemDoc::from_system(sys))
}

pub fn system_from_json(text: &str) -> Result<SystemGym> {
    from_json::<SystemDoc>(text, "sgy.v1")?.to_system()
}

pub fn step_to_json(u: &StepFunction) -> Result<String> {
    to_json(&StepDoc::from_step(u))
}

pub fn step_from_json(text: &str) -> Result<StepFunction> {
    from_json::<StepDoc>(text, "step.v1")?.to_step()
}

pub fn homfn_to_json(f: &HomFn) -> Result<String> {
    to_json(&HomFnDoc::from_homfn(f)?)
}

pub fn homfn_from_json(text: &str) -> Result<HomFn> {
    from_json::<HomFnDoc>(text, "homfn.v1")?.to_homfn()
}

pub fn save(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

/// Write a CSV file with a fixed header; every cell is pre-rendered.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    save(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gym::Battery;

    #[test]
    fn gym_round_trip_has_zero_battery_gap() {
        let space = SpaceModel::interval(0.0, 1.0, 5).unwrap();
        let mu = crate::sample::random_gym(&space, 2, 30, 11).unwrap();
        let text = gym_to_json(&mu).unwrap();
        let back = gym_from_json(&text).unwrap();
        let battery = Battery::standard(&space, 2, 12, 0).unwrap();
        assert_eq!(mu.wstar_gap(&back, &battery).unwrap(), 0.0);
        assert_eq!(mu.atoms().len(), back.atoms().len());
    }

    #[test]
    fn measure_round_trip_is_bit_exact() {
        let space = SpaceModel::interval(-1.0, 1.0, 7).unwrap();
        let p = crate::sample::random_measure(&space, 3, 5).unwrap();
        let text = measure_to_json(&p).unwrap();
        let back = measure_from_json(&text).unwrap();
        assert_eq!(p.ac(), back.ac());
        assert_eq!(p.singular(), back.singular());
    }

    #[test]
    fn system_round_trip() {
        let space = SpaceModel::interval(0.0, 1.0, 3).unwrap();
        let sys = crate::sample::random_system(&space, 1, &[0.0, 0.5, 1.0], 12, 3).unwrap();
        let text = system_to_json(&sys).unwrap();
        let back = system_from_json(&text).unwrap();
        assert_eq!(sys.grid().times(), back.grid().times());
        let battery = Battery::standard(&space, 3, 8, 1).unwrap();
        assert_eq!(
            sys.master().wstar_gap(back.master(), &battery).unwrap(),
            0.0
        );
    }

    #[test]
    fn homfn_round_trip_evaluates_identically() {
        let f = HomFn::combine(vec![
            (0.5, HomFn::EuclidNorm),
            (
                1.25,
                HomFn::positive_part(HomFn::linear_const(vec![1.0, -0.3], 0.7)),
            ),
        ])
        .unwrap();
        let f = HomFn::max(f, HomFn::pr_moment(1.5).unwrap()).unwrap();
        let text = homfn_to_json(&f).unwrap();
        let back = homfn_from_json(&text).unwrap();
        for (xi, eta) in [
            (vec![0.3, -0.4], 0.5),
            (vec![1.0, 2.0], 0.0),
            (vec![-0.1, 0.9], 1.5),
        ] {
            let a = f.eval(0, &xi, eta).unwrap();
            let b = back.eval(0, &xi, eta).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn raw_and_envelope_nodes_refuse_serialization() {
        let raw = HomFn::raw("x", 1.0, ScalarField::Const(0.0), Some(1), |_, xi, _| xi[0]);
        assert!(matches!(
            homfn_to_json(&raw),
            Err(GymError::Serialization(_))
        ));
    }

    #[test]
    fn schema_mismatch_is_detected() {
        let space = SpaceModel::interval(0.0, 1.0, 2).unwrap();
        let p = DiscreteMeasure::zero(space, 1).unwrap();
        let text = measure_to_json(&p).unwrap();
        assert!(gym_from_json(&text).is_err());
    }

    #[test]
    fn step_round_trip_preserves_measures() {
        let space = SpaceModel::interval(0.0, 1.0, 4).unwrap();
        let mu = crate::sample::random_gym(&space, 1, 12, 9).unwrap();
        let schedule = crate::approx::DensitySchedule::dyadic(2, 5, &space).unwrap();
        let u = crate::approx::density_approximate(&mu, 1, &schedule).unwrap();
        let text = step_to_json(&u).unwrap();
        let back = step_from_json(&text).unwrap();
        assert_eq!(u.segments().len(), back.segments().len());
        for (a, b) in u.segments().iter().zip(back.segments()) {
            assert_eq!(a.measure, b.measure);
            assert_eq!(a.value, b.value);
        }
    }
}
