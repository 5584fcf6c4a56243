//! Scenario files (`scenario.v1`) and the command handlers behind them.
//!
//! A scenario names one command, its input files, a battery, and numeric
//! parameters (decimal strings, like every other file format). Each handler
//! writes a CSV report plus a `verdict.json` into the output directory and
//! returns the verdict. Runs are deterministic given the seed; the `SEED`
//! environment variable overrides the scenario seed.

use gymlab::acceptance::{self, Status};
use gymlab::approx::{helly_extract, semicontinuity_margin, DensitySchedule, OscillationOracle};
use gymlab::gym::{lift_measure, Battery, DiscreteGym};
use gymlab::homfn::HomFn;
use gymlab::io::{self, NodeDoc, SpaceDoc};
use gymlab::systems::{
    derivative_estimate, DerivativeVerdict, GridOracle, SystemGym, SystemOracle,
};
use gymlab::{GymError, SpaceModel};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub type Result<T> = std::result::Result<T, GymError>;

#[derive(Debug, Clone, Deserialize)]
pub struct Scenario {
    pub schema: String,
    pub command: String,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default)]
    pub battery: Option<BatterySpec>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct Inputs {
    pub measure: Option<PathBuf>,
    pub gym: Option<PathBuf>,
    pub system: Option<PathBuf>,
    #[serde(default)]
    pub systems: Vec<PathBuf>,
    pub limit: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct BatterySpec {
    /// Number of members of the standard battery to build.
    pub builtin: Option<usize>,
    /// Xi-dimension of the standard battery members.
    pub dim_xi: Option<usize>,
    /// Explicit member trees (homfn.v1 nodes).
    #[serde(default)]
    pub members: Vec<NodeDoc>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct Params {
    pub seed: Option<String>,
    pub tol: Option<String>,
    pub a: Option<String>,
    pub b: Option<String>,
    pub delta: Option<String>,
    pub t0: Option<String>,
    #[serde(default)]
    pub schedule: Vec<String>,
    #[serde(default)]
    pub sigmas: Vec<String>,
    pub h: Option<NodeDoc>,
    pub var_bound: Option<String>,
    pub norm_bound: Option<String>,
    #[serde(default)]
    pub d_times: Vec<String>,
    pub tolerance_scale: Option<String>,
    /// Builtin oracle for derivative scenarios: the square-wave path.
    pub oracle: Option<OracleSpec>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct OracleSpec {
    /// Only `square_wave_path` is builtin; grid oracles come from `system`.
    pub builtin: String,
    pub space: SpaceDoc,
    pub res: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub schema: String,
    pub command: String,
    pub status: String,
    pub values: BTreeMap<String, String>,
    pub residuals: BTreeMap<String, String>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub schemas: Vec<String>,
    pub seed: String,
    pub resolutions: BTreeMap<String, String>,
}

/// Exit code semantics: 0 pass, 1 fail / no-limit, 2 error.
pub fn exit_code(status: &str) -> i32 {
    match status {
        "pass" => 0,
        "fail" | "no-limit" => 1,
        _ => 2,
    }
}

fn parse_decimal(s: &str, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| GymError::Serialization(format!("parameter '{what}': bad decimal '{s}'")))
}

fn parse_decimals(v: &[String], what: &str) -> Result<Vec<f64>> {
    v.iter().map(|s| parse_decimal(s, what)).collect()
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario> {
        let text = io::load(path)?;
        let scenario: Scenario = serde_json::from_str(&text)
            .map_err(|e| GymError::Serialization(format!("scenario: {e}")))?;
        if scenario.schema != "scenario.v1" {
            return Err(GymError::Serialization(format!(
                "scenario schema must be scenario.v1, found '{}'",
                scenario.schema
            )));
        }
        Ok(scenario)
    }

    pub fn seed(&self) -> Result<u64> {
        if let Ok(env_seed) = std::env::var("SEED") {
            return env_seed
                .parse::<u64>()
                .map_err(|_| GymError::Serialization(format!("SEED env: bad integer '{env_seed}'")));
        }
        match &self.params.seed {
            Some(s) => s
                .parse::<u64>()
                .map_err(|_| GymError::Serialization(format!("parameter 'seed': bad integer '{s}'"))),
            None => Ok(0),
        }
    }

    fn tol(&self, default: f64) -> Result<f64> {
        match &self.params.tol {
            Some(s) => {
                let t = parse_decimal(s, "tol")?;
                if !(t >= 0.0) {
                    return Err(GymError::Precondition("tol must be nonnegative".into()));
                }
                Ok(t)
            }
            None => Ok(default),
        }
    }

    fn load_gym(&self, base: &Path) -> Result<DiscreteGym> {
        let rel = self
            .inputs
            .gym
            .as_ref()
            .or(self.inputs.measure.as_ref())
            .ok_or_else(|| GymError::Precondition("scenario needs inputs.gym".into()))?;
        let path = resolve(base, rel);
        let text = io::load(&path)?;
        // Accept either a gym.v1 file or a measure.v1 file (lifted).
        if text.contains("\"gym.v1\"") {
            io::gym_from_json(&text)
        } else {
            lift_measure(&io::measure_from_json(&text)?)
        }
    }

    fn load_system(&self, base: &Path, rel: &Path) -> Result<SystemGym> {
        io::system_from_json(&io::load(&resolve(base, rel))?)
    }

    fn battery_for(&self, space: &SpaceModel, dim_xi: usize, seed: u64) -> Result<Battery> {
        match &self.battery {
            None => Battery::standard(space, dim_xi, 12, seed),
            Some(spec) if !spec.members.is_empty() => {
                let members = spec
                    .members
                    .iter()
                    .enumerate()
                    .map(|(i, node)| {
                        let doc = io::HomFnDoc {
                            schema: "homfn.v1".into(),
                            root: node.clone(),
                        };
                        Ok((format!("m{i:02}"), doc.to_homfn()?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Battery::new(space, members)
            }
            Some(spec) => Battery::standard(
                space,
                spec.dim_xi.unwrap_or(dim_xi),
                spec.builtin.unwrap_or(12),
                seed,
            ),
        }
    }

    fn increment_fn(&self) -> Result<Option<HomFn>> {
        match &self.params.h {
            None => Ok(None),
            Some(node) => {
                let doc = io::HomFnDoc {
                    schema: "homfn.v1".into(),
                    root: node.clone(),
                };
                Ok(Some(doc.to_homfn()?))
            }
        }
    }
}

fn resolve(base: &Path, rel: &Path) -> PathBuf {
    if rel.is_absolute() {
        rel.to_path_buf()
    } else {
        base.join(rel)
    }
}

fn fmt(v: f64) -> String {
    io::fmt_f64(v)
}

struct Report {
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
    values: BTreeMap<String, String>,
    residuals: BTreeMap<String, String>,
    status: &'static str,
    resolutions: BTreeMap<String, String>,
    extra_files: Vec<(String, String)>,
}

impl Report {
    fn new(header: &'static [&'static str]) -> Self {
        Report {
            header,
            rows: Vec::new(),
            values: BTreeMap::new(),
            residuals: BTreeMap::new(),
            status: "pass",
            resolutions: BTreeMap::new(),
            extra_files: Vec::new(),
        }
    }
}

/// Run a scenario; write `report.csv` and `verdict.json` under the output
/// directory; return the verdict.
pub fn run_scenario(scenario: &Scenario, base: &Path, out_dir: &Path) -> Result<Verdict> {
    let seed = scenario.seed()?;
    let report = match scenario.command.as_str() {
        "validate" => cmd_validate(scenario, base)?,
        "pair" => cmd_pair(scenario, base, seed)?,
        "norm" => cmd_norm(scenario, base)?,
        "decompose" => cmd_decompose(scenario, base, seed)?,
        "bary" => cmd_bary(scenario, base)?,
        "variation" => cmd_variation(scenario, base)?,
        "acmod" => cmd_acmod(scenario, base)?,
        "derivative" => cmd_derivative(scenario, base, seed)?,
        "density" => cmd_density(scenario, base, seed)?,
        "helly" => cmd_helly(scenario, base, seed)?,
        "semicont" => cmd_semicont(scenario, base, seed)?,
        "suite" => cmd_suite(scenario, seed)?,
        other => {
            return Err(GymError::Precondition(format!(
                "unknown command '{other}'"
            )))
        }
    };
    std::fs::create_dir_all(out_dir)?;
    io::write_csv(&out_dir.join("report.csv"), report.header, &report.rows)?;
    for (name, text) in &report.extra_files {
        io::save(&out_dir.join(name), text)?;
    }
    let verdict = Verdict {
        schema: "verdict.v1".into(),
        command: scenario.command.clone(),
        status: report.status.to_string(),
        values: report.values,
        residuals: report.residuals,
        provenance: Provenance {
            schemas: vec![
                "scenario.v1".into(),
                "gym.v1".into(),
                "measure.v1".into(),
                "sgy.v1".into(),
                "step.v1".into(),
                "homfn.v1".into(),
            ],
            seed: seed.to_string(),
            resolutions: report.resolutions,
        },
    };
    let verdict_text = serde_json::to_string_pretty(&verdict)
        .map_err(|e| GymError::Serialization(e.to_string()))?;
    io::save(&out_dir.join("verdict.json"), &verdict_text)?;
    Ok(verdict)
}

fn cmd_validate(scenario: &Scenario, base: &Path) -> Result<Report> {
    let mu = scenario.load_gym(base)?;
    let validation = mu.validate();
    let mut report = Report::new(&["cell", "lambda", "defect"]);
    for (cell, defect) in validation.per_cell_defects.iter().enumerate() {
        report.rows.push(vec![
            cell.to_string(),
            fmt(mu.space().cell_measure(cell)),
            fmt(*defect),
        ]);
    }
    report
        .values
        .insert("max_defect".into(), fmt(validation.max_projection_defect));
    report
        .values
        .insert("tolerance".into(), fmt(validation.tolerance));
    report.values.insert(
        "negative_eta_atoms".into(),
        validation.negative_eta_atoms.to_string(),
    );
    report.status = if validation.passes() { "pass" } else { "fail" };
    Ok(report)
}

fn cmd_pair(scenario: &Scenario, base: &Path, seed: u64) -> Result<Report> {
    let mu = scenario.load_gym(base)?;
    let battery = scenario.battery_for(mu.space(), mu.dim_xi(), seed)?;
    let mut report = Report::new(&["index", "member", "value"]);
    for (i, member) in battery.members().iter().enumerate() {
        let value = mu.pair(&member.f)?;
        report
            .rows
            .push(vec![i.to_string(), member.name.clone(), fmt(value)]);
    }
    report
        .values
        .insert("members".into(), battery.len().to_string());
    Ok(report)
}

fn cmd_norm(scenario: &Scenario, base: &Path) -> Result<Report> {
    let mu = scenario.load_gym(base)?;
    let mut report = Report::new(&["quantity", "value"]);
    let norm = mu.norm_star();
    let euclid = mu.pair(&HomFn::EuclidNorm)?;
    report.rows.push(vec!["norm_star".into(), fmt(norm)]);
    report.rows.push(vec!["euclid_pairing".into(), fmt(euclid)]);
    report.values.insert("norm_star".into(), fmt(norm));
    report
        .residuals
        .insert("norm_vs_pairing".into(), fmt((norm - euclid).abs()));
    Ok(report)
}

fn cmd_decompose(scenario: &Scenario, base: &Path, seed: u64) -> Result<Report> {
    let mu = scenario.load_gym(base)?;
    let tol = scenario.tol(1e-12)?;
    let (young, varifold) = mu.decompose()?;
    let back = gymlab::gym::recompose(&young, &varifold)?;
    let battery = scenario.battery_for(mu.space(), mu.dim_xi(), seed)?;
    let mut worst = 0.0f64;
    for member in battery.members() {
        worst = worst.max((mu.pair(&member.f)? - back.pair(&member.f)?).abs());
    }
    let mut report = Report::new(&["kind", "cell", "state", "mass"]);
    for atom in young.atoms() {
        report.rows.push(vec![
            "young".into(),
            atom.cell.to_string(),
            atom.xi.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(";"),
            fmt(atom.mass),
        ]);
    }
    for atom in varifold.atoms() {
        report.rows.push(vec![
            "varifold".into(),
            atom.cell.to_string(),
            atom.direction
                .iter()
                .map(|v| fmt(*v))
                .collect::<Vec<_>>()
                .join(";"),
            fmt(atom.mass),
        ]);
    }
    report
        .residuals
        .insert("reconstruction".into(), fmt(worst));
    report
        .values
        .insert("young_atoms".into(), young.atoms().len().to_string());
    report
        .values
        .insert("varifold_atoms".into(), varifold.atoms().len().to_string());
    report.status = if worst <= tol { "pass" } else { "fail" };
    Ok(report)
}

fn cmd_bary(scenario: &Scenario, base: &Path) -> Result<Report> {
    let mu = scenario.load_gym(base)?;
    let bar = mu.barycentre();
    let mut report = Report::new(&["quantity", "value"]);
    report
        .rows
        .push(vec!["bar_norm".into(), fmt(bar.total_variation())]);
    report
        .rows
        .push(vec!["measure_norm".into(), fmt(mu.norm_star())]);
    report
        .values
        .insert("bar_norm".into(), fmt(bar.total_variation()));
    report
        .extra_files
        .push(("barycentre.measure.json".into(), io::measure_to_json(&bar)?));
    report.status = if bar.total_variation() <= mu.norm_star() + 1e-12 {
        "pass"
    } else {
        "fail"
    };
    Ok(report)
}

fn cmd_variation(scenario: &Scenario, base: &Path) -> Result<Report> {
    let rel = scenario
        .inputs
        .system
        .clone()
        .ok_or_else(|| GymError::Precondition("variation needs inputs.system".into()))?;
    let sys = scenario.load_system(base, &rel)?;
    let h = scenario.increment_fn()?;
    let a = match &scenario.params.a {
        Some(s) => parse_decimal(s, "a")?,
        None => sys.grid().start(),
    };
    let b = match &scenario.params.b {
        Some(s) => parse_decimal(s, "b")?,
        None => sys.grid().end(),
    };
    let result = sys.variation(h.as_ref(), a, b)?;
    let mut report = Report::new(&["step", "t_prev", "t_next", "contribution"]);
    for (i, c) in result.contributions.iter().enumerate() {
        report.rows.push(vec![
            i.to_string(),
            fmt(result.partition[i]),
            fmt(result.partition[i + 1]),
            fmt(*c),
        ]);
    }
    report.values.insert("variation".into(), fmt(result.value));
    Ok(report)
}

fn cmd_acmod(scenario: &Scenario, base: &Path) -> Result<Report> {
    let rel = scenario
        .inputs
        .system
        .clone()
        .ok_or_else(|| GymError::Precondition("acmod needs inputs.system".into()))?;
    let sys = scenario.load_system(base, &rel)?;
    let delta = parse_decimal(
        scenario
            .params
            .delta
            .as_ref()
            .ok_or_else(|| GymError::Precondition("acmod needs params.delta".into()))?,
        "delta",
    )?;
    let eps = sys.ac_modulus(delta)?;
    let mut report = Report::new(&["delta", "epsilon"]);
    report.rows.push(vec![fmt(delta), fmt(eps)]);
    report.values.insert("epsilon".into(), fmt(eps));
    Ok(report)
}

fn cmd_derivative(scenario: &Scenario, base: &Path, seed: u64) -> Result<Report> {
    let t0 = parse_decimal(
        scenario
            .params
            .t0
            .as_ref()
            .ok_or_else(|| GymError::Precondition("derivative needs params.t0".into()))?,
        "t0",
    )?;
    let schedule = parse_decimals(&scenario.params.schedule, "schedule")?;
    let tol = scenario.tol(1e-2)?;

    let oracle: Box<dyn SystemOracle> = match (&scenario.params.oracle, &scenario.inputs.system) {
        (Some(spec), _) => {
            if spec.builtin != "square_wave_path" {
                return Err(GymError::Precondition(format!(
                    "unknown builtin oracle '{}'",
                    spec.builtin
                )));
            }
            Box::new(OscillationOracle::square_wave_path(
                spec.space.to_space()?,
                spec.res,
            )?)
        }
        (None, Some(rel)) => Box::new(GridOracle::new(scenario.load_system(base, rel)?)),
        (None, None) => {
            return Err(GymError::Precondition(
                "derivative needs params.oracle or inputs.system".into(),
            ))
        }
    };
    let battery = scenario.battery_for(oracle.space(), oracle.dim_xi(), seed)?;
    let result = derivative_estimate(oracle.as_ref(), t0, &schedule, &battery, tol)?;
    let mut report = Report::new(&["eps", "side", "member", "value"]);
    for (j, &eps) in result.schedule.iter().enumerate() {
        for (i, member) in battery.members().iter().enumerate() {
            report.rows.push(vec![
                fmt(eps),
                "left".into(),
                member.name.clone(),
                fmt(result.left_pairings[j][i]),
            ]);
            report.rows.push(vec![
                fmt(eps),
                "right".into(),
                member.name.clone(),
                fmt(result.right_pairings[j][i]),
            ]);
        }
    }
    report
        .residuals
        .insert("two_sided_gap".into(), fmt(result.two_sided_gap));
    report.residuals.insert(
        "left_tail".into(),
        fmt(*result.left_residuals.last().unwrap()),
    );
    report.residuals.insert(
        "right_tail".into(),
        fmt(*result.right_residuals.last().unwrap()),
    );
    report
        .resolutions
        .insert("oracle".into(), fmt(oracle.resolution()));
    report.status = match result.verdict {
        DerivativeVerdict::Converged => "pass",
        _ => "no-limit",
    };
    if let Some(estimate) = &result.estimate {
        report
            .extra_files
            .push(("derivative.gym.json".into(), io::gym_to_json(estimate)?));
    }
    Ok(report)
}

fn cmd_density(scenario: &Scenario, base: &Path, seed: u64) -> Result<Report> {
    let mu = scenario.load_gym(base)?;
    let sigmas = parse_decimals(&scenario.params.sigmas, "sigmas")?;
    let schedule = DensitySchedule::new(sigmas, mu.space())?;
    let battery = scenario.battery_for(mu.space(), mu.dim_xi(), seed)?;
    let mut report = Report::new(&["level", "sigma", "battery_residual", "area_defect", "peak"]);
    let mut status = "pass";
    for (level, &sigma) in schedule.sigmas().iter().enumerate() {
        let u = gymlab::approx::density_approximate(&mu, level, &schedule)?;
        let lift = u.lift()?;
        let mut residual = 0.0f64;
        for member in battery.members() {
            residual = residual.max((lift.pair(&member.f)? - mu.pair(&member.f)?).abs());
        }
        let area_defect = (u.area_integral() - mu.norm_star()).abs();
        if residual > 8.0 * sigma || area_defect > 5.0 * sigma {
            status = "fail";
        }
        report.rows.push(vec![
            level.to_string(),
            fmt(sigma),
            fmt(residual),
            fmt(area_defect),
            fmt(u.max_abs()),
        ]);
        report
            .extra_files
            .push((format!("level{level}.step.json"), io::step_to_json(&u)?));
    }
    report.status = status;
    Ok(report)
}

fn cmd_helly(scenario: &Scenario, base: &Path, seed: u64) -> Result<Report> {
    if scenario.inputs.systems.is_empty() {
        return Err(GymError::Precondition("helly needs inputs.systems".into()));
    }
    let seq: Vec<SystemGym> = scenario
        .inputs
        .systems
        .iter()
        .map(|rel| scenario.load_system(base, rel))
        .collect::<Result<_>>()?;
    let d_times = parse_decimals(&scenario.params.d_times, "d_times")?;
    let tol = scenario.tol(1e-6)?;
    let c_var = parse_decimal(
        scenario
            .params
            .var_bound
            .as_ref()
            .ok_or_else(|| GymError::Precondition("helly needs params.var_bound".into()))?,
        "var_bound",
    )?;
    let c_norm = parse_decimal(
        scenario
            .params
            .norm_bound
            .as_ref()
            .ok_or_else(|| GymError::Precondition("helly needs params.norm_bound".into()))?,
        "norm_bound",
    )?;
    let battery = scenario.battery_for(seq[0].space(), seq[0].dim_xi(), seed)?;
    let result = helly_extract(&seq, &battery, &d_times, tol, (c_var, c_norm))?;
    let mut report = Report::new(&["tuple", "member", "residual", "limit_value"]);
    for r in &result.residuals {
        report.rows.push(vec![
            r.tuple
                .iter()
                .map(|t| fmt(*t))
                .collect::<Vec<_>>()
                .join(";"),
            r.member.clone(),
            fmt(r.residual),
            fmt(r.limit_value),
        ]);
    }
    report.values.insert(
        "selected".into(),
        result
            .selected
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(";"),
    );
    report.values.insert(
        "theta".into(),
        result
            .theta
            .iter()
            .map(|t| fmt(*t))
            .collect::<Vec<_>>()
            .join(";"),
    );
    report
        .residuals
        .insert("max_residual".into(), fmt(result.max_residual()));
    let converged = result.max_residual() <= tol;
    let bounds_ok =
        result.var_bound_ok.unwrap_or(false) && result.norm_bound_ok.unwrap_or(false);
    report.status = if converged && result.limit.is_some() && bounds_ok {
        "pass"
    } else if result.limit.is_none() {
        "no-limit"
    } else {
        "fail"
    };
    if let Some(limit) = &result.limit {
        report
            .extra_files
            .push(("limit.sgy.json".into(), io::system_to_json(limit)?));
    }
    Ok(report)
}

fn cmd_semicont(scenario: &Scenario, base: &Path, seed: u64) -> Result<Report> {
    if scenario.inputs.systems.is_empty() {
        return Err(GymError::Precondition(
            "semicont needs inputs.systems".into(),
        ));
    }
    let rel_limit = scenario
        .inputs
        .limit
        .clone()
        .ok_or_else(|| GymError::Precondition("semicont needs inputs.limit".into()))?;
    let seq: Vec<SystemGym> = scenario
        .inputs
        .systems
        .iter()
        .map(|rel| scenario.load_system(base, rel))
        .collect::<Result<_>>()?;
    let limit = scenario.load_system(base, &rel_limit)?;
    let d_times = parse_decimals(&scenario.params.d_times, "d_times")?;
    let pre_tol = scenario.tol(1e-6)?;
    let h = scenario.increment_fn()?.unwrap_or(HomFn::XiNorm);
    let battery = scenario.battery_for(limit.space(), limit.dim_xi(), seed)?;
    let margin = semicontinuity_margin(&seq, &limit, &h, &d_times, &battery, pre_tol)?;
    let mut report = Report::new(&["quantity", "value"]);
    report.rows.push(vec!["margin".into(), fmt(margin)]);
    report.values.insert("margin".into(), fmt(margin));
    report.status = if margin >= -1e-9 { "pass" } else { "fail" };
    Ok(report)
}

fn cmd_suite(scenario: &Scenario, seed: u64) -> Result<Report> {
    let tol_scale = match &scenario.params.tolerance_scale {
        Some(s) => parse_decimal(s, "tolerance_scale")?,
        None => 1.0,
    };
    let results = acceptance::run_all(seed, tol_scale);
    let mut report = Report::new(&["criterion", "status", "observed", "threshold", "detail"]);
    let mut any_fail = false;
    let mut any_error = false;
    for r in &results {
        report.rows.push(vec![
            r.id.to_string(),
            r.status.as_str().to_string(),
            fmt(r.observed),
            fmt(r.threshold),
            r.detail.replace(',', ";"),
        ]);
        match r.status {
            Status::Pass => {}
            Status::Fail => any_fail = true,
            Status::Error => any_error = true,
        }
    }
    report.status = if any_error {
        "error"
    } else if any_fail {
        "fail"
    } else {
        "pass"
    };
    report
        .values
        .insert("criteria".into(), results.len().to_string());
    Ok(report)
}
