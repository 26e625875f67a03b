//! Fully parameterized scenario definitions: domain geometry, speed and cost
//! fields, the uncertain-target (or uncertain-cost) ensemble and the
//! certainty-time model, plus the built-in catalog and the JSON config
//! format they round-trip through.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::eikonal::{solve_stationary, ValueSolution};
use crate::error::{Error, Result};
use crate::grid::{DomainMask, GridSpec, Point, ScalarField};
use crate::marching::{CertaintyTimeModel, Stage};
use crate::robust::TargetEnsemble;

/// Default node count per axis for the built-in scenarios (`h = 0.005` on the
/// unit square, fine enough for two-digit agreement with the reference
/// waypoint values).
pub const DEFAULT_GRID_N: usize = 201;

/// Axis-aligned rectangle, inclusive bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }
}

/// Closed-form field recipes used by the scenario configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Constant { value: f64 },
    /// `offset + amplitude * cos(2 pi x) * sin(2 pi y)`.
    CosSinProduct { offset: f64, amplitude: f64 },
}

impl FieldSpec {
    pub fn eval(&self, p: Point) -> f64 {
        match *self {
            FieldSpec::Constant { value } => value,
            FieldSpec::CosSinProduct { offset, amplitude } => {
                let tau = 2.0 * std::f64::consts::PI;
                offset + amplitude * (tau * p.x).cos() * (tau * p.y).sin()
            }
        }
    }

    pub fn build(&self, spec: GridSpec) -> Result<ScalarField> {
        ScalarField::from_fn(spec, |p| self.eval(p))
    }
}

/// An elliptic high-cost region: running cost
/// `1 + alpha * (1 - (x-c)^T A (x-c))^gamma` inside the ellipse
/// `(x-c)^T A (x-c) <= 1` and exactly 1 on and outside its boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StormSpec {
    pub center: Point,
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl StormSpec {
    /// Build the shape matrix from semi-axes and a rotation angle.
    pub fn from_axes(center: Point, semi_major: f64, semi_minor: f64, angle: f64, alpha: f64, gamma: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let inv_a2 = 1.0 / (semi_major * semi_major);
        let inv_b2 = 1.0 / (semi_minor * semi_minor);
        StormSpec {
            center,
            a11: c * c * inv_a2 + s * s * inv_b2,
            a12: s * c * (inv_a2 - inv_b2),
            a22: s * s * inv_a2 + c * c * inv_b2,
            alpha,
            gamma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a11 > 0.0 && self.a11 * self.a22 - self.a12 * self.a12 > 0.0) {
            return Err(Error::invalid("storm", "shape matrix must be positive-definite"));
        }
        if !(self.alpha > 0.0 && self.gamma > 0.0) {
            return Err(Error::invalid("storm", "alpha and gamma must be positive"));
        }
        Ok(())
    }

    /// Quadratic form `(p - center)^T A (p - center)`.
    pub fn quadratic(&self, p: Point) -> f64 {
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        self.a11 * dx * dx + 2.0 * self.a12 * dx * dy + self.a22 * dy * dy
    }

    pub fn cost(&self, p: Point) -> f64 {
        let v = self.quadratic(p);
        if v < 1.0 {
            1.0 + self.alpha * (1.0 - v).powf(self.gamma)
        } else {
            1.0
        }
    }
}

/// What is uncertain until the certainty time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Uncertainty {
    /// Unknown target among `targets` with probabilities `probs`.
    Targets { targets: Vec<Point>, probs: Vec<f64> },
    /// Known target but unknown running cost, one storm hypothesis each.
    CostHypotheses {
        target: Point,
        storms: Vec<StormSpec>,
        probs: Vec<f64>,
    },
}

/// Criterion parameters carried by a scenario (overridable per run).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Extras {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_values: Option<Vec<f64>>,
}

/// A complete scenario description; everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDef {
    pub name: String,
    /// Nodes per axis on the unit square.
    pub grid_n: usize,
    pub obstacles: Vec<Rect>,
    pub speed: FieldSpec,
    pub start: Point,
    pub uncertainty: Uncertainty,
    pub time_model: CertaintyTimeModel,
    /// Which targets are revealed at each discrete stage; `None` means the
    /// target distribution is independent of the certainty time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage_reveals: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub extras: Extras,
}

/// A scenario instantiated on a grid: mask and fields realized, ready to solve.
#[derive(Debug, Clone)]
pub struct BuiltScenario {
    pub def: ScenarioDef,
    pub spec: GridSpec,
    pub mask: DomainMask,
    pub speed: ScalarField,
    /// Unit cost for target scenarios; per-hypothesis costs live in
    /// `cost_hypotheses`.
    pub cost: ScalarField,
    pub cost_hypotheses: Option<Vec<ScalarField>>,
    pub start: Point,
    pub targets: Vec<Point>,
    pub probs: Vec<f64>,
}

impl ScenarioDef {
    pub fn validate(&self) -> Result<()> {
        if self.grid_n < 2 {
            return Err(Error::Config("grid_n must be at least 2".into()));
        }
        self.time_model.validate()?;
        match &self.uncertainty {
            Uncertainty::Targets { targets, probs } => {
                if targets.is_empty() || targets.len() != probs.len() {
                    return Err(Error::Config("targets and probs must match".into()));
                }
                crate::robust::validate_distribution(probs)?;
            }
            Uncertainty::CostHypotheses { storms, probs, .. } => {
                if storms.is_empty() || storms.len() != probs.len() {
                    return Err(Error::Config("storms and probs must match".into()));
                }
                crate::robust::validate_distribution(probs)?;
                for s in storms {
                    s.validate()?;
                }
            }
        }
        if let Some(reveals) = &self.stage_reveals {
            let (times, stage_probs) = match &self.time_model {
                CertaintyTimeModel::Discrete { times, probs } => (times, probs),
                _ => {
                    return Err(Error::Config(
                        "stage_reveals requires a discrete certainty-time model".into(),
                    ))
                }
            };
            if reveals.len() != times.len() {
                return Err(Error::Config("one reveal group per stage required".into()));
            }
            let target_probs = match &self.uncertainty {
                Uncertainty::Targets { probs, .. } => probs,
                _ => return Err(Error::Config("stage_reveals requires target uncertainty".into())),
            };
            let mut seen = vec![false; target_probs.len()];
            for (stage, group) in reveals.iter().enumerate() {
                let mut mass = 0.0;
                for &i in group {
                    if i >= target_probs.len() || seen[i] {
                        return Err(Error::Config(format!(
                            "stage {stage} reveals an invalid or repeated target {i}"
                        )));
                    }
                    seen[i] = true;
                    mass += target_probs[i];
                }
                if (mass - stage_probs[stage]).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "stage {stage} reveal mass {mass} does not match its time probability"
                    )));
                }
            }
            if !seen.iter().all(|&s| s) {
                return Err(Error::Config("every target must be revealed by some stage".into()));
            }
        }
        Ok(())
    }

    /// Realize the scenario on its grid, optionally overriding the node count.
    pub fn build(&self, grid_n: Option<usize>) -> Result<BuiltScenario> {
        self.validate()?;
        let n = grid_n.unwrap_or(self.grid_n);
        let spec = GridSpec::unit_square(n)?;
        let obstacles = self.obstacles.clone();
        let mask = DomainMask::from_fn(spec, |p| !obstacles.iter().any(|r| r.contains(p)))?;
        let speed = self.speed.build(spec)?;
        let cost = ScalarField::constant(spec, 1.0);
        let (targets, probs, cost_hypotheses) = match &self.uncertainty {
            Uncertainty::Targets { targets, probs } => (targets.clone(), probs.clone(), None),
            Uncertainty::CostHypotheses { target, storms, probs } => {
                let fields: Vec<ScalarField> = storms
                    .iter()
                    .map(|s| ScalarField::from_fn(spec, |p| s.cost(p)))
                    .collect::<Result<_>>()?;
                (vec![*target; storms.len()], probs.clone(), Some(fields))
            }
        };
        let built = BuiltScenario {
            def: self.clone(),
            spec,
            mask,
            speed,
            cost,
            cost_hypotheses,
            start: self.start,
            targets,
            probs,
        };
        built.check_nodes_inside()?;
        Ok(built)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<ScenarioDef> {
        let def: ScenarioDef =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad scenario config: {e}")))?;
        def.validate()?;
        Ok(def)
    }

    pub fn load(path: &Path) -> Result<ScenarioDef> {
        let text = fs::read_to_string(path)?;
        ScenarioDef::from_json(&text)
    }
}

impl BuiltScenario {
    fn check_nodes_inside(&self) -> Result<()> {
        let check = |p: Point, what: &str| -> Result<()> {
            let (i, j) = self.spec.nearest_node(p);
            if !self.mask.is_inside(i, j) {
                return Err(Error::Config(format!(
                    "{what} ({}, {}) snaps to an obstacle node",
                    p.x, p.y
                )));
            }
            Ok(())
        };
        check(self.start, "start")?;
        for (n, t) in self.targets.iter().enumerate() {
            check(*t, &format!("target {n}"))?;
        }
        Ok(())
    }

    /// Solve every per-hypothesis value field (per-target sources, or the
    /// shared target under each cost hypothesis).
    pub fn solve_ensemble(&self) -> Result<(TargetEnsemble, Vec<ValueSolution>)> {
        match &self.cost_hypotheses {
            None => TargetEnsemble::solve_with_residuals(
                &self.speed,
                &self.cost,
                &self.targets,
                &self.probs,
                &self.mask,
            ),
            Some(costs) => {
                let sols: Vec<ValueSolution> = costs
                    .iter()
                    .map(|k| solve_stationary(&self.speed, k, &[self.targets[0]], &self.mask))
                    .collect::<Result<_>>()?;
                let fields = sols.iter().map(|s| s.u.clone()).collect();
                let ens = TargetEnsemble::new(self.targets.clone(), self.probs.clone(), fields)?;
                Ok((ens, sols))
            }
        }
    }

    /// Unit-cost solve from the starting position (the time metric used for
    /// reachable sets).
    pub fn solve_from_start(&self) -> Result<ValueSolution> {
        solve_stationary(&self.speed, &self.cost, &[self.start], &self.mask)
    }

    /// Stage chain for the discrete certainty-time model, honoring per-stage
    /// reveal groups when present.
    pub fn stage_chain(&self, ensemble: &TargetEnsemble) -> Result<Vec<Stage>> {
        let (times, probs) = match &self.def.time_model {
            CertaintyTimeModel::Discrete { times, probs } => (times.clone(), probs.clone()),
            _ => {
                return Err(Error::invalid(
                    "time_model",
                    "stage chain requires a discrete certainty-time model",
                ))
            }
        };
        let q = crate::robust::expected_field(ensemble);
        let mut stages = Vec::with_capacity(times.len());
        for (j, &t) in times.iter().enumerate() {
            let tail: f64 = probs[j..].iter().sum();
            let reveal_field = match &self.def.stage_reveals {
                None => q.clone(),
                Some(groups) => {
                    // conditional target distribution given revelation now
                    let group = &groups[j];
                    let mass: f64 = group.iter().map(|&i| ensemble.probs[i]).sum();
                    let mut acc = ScalarField::constant(self.spec, 0.0);
                    for &i in group {
                        let w = ensemble.probs[i] / mass;
                        acc = acc.zip_with(&ensemble.value_fields[i], |s, u| {
                            if s.is_infinite() || u.is_infinite() {
                                f64::INFINITY
                            } else {
                                s + w * u
                            }
                        });
                    }
                    acc
                }
            };
            stages.push(Stage {
                end_time: t,
                reveal_weight: probs[j] / tail,
                reveal_field,
            });
        }
        Ok(stages)
    }
}

const MAIN_TARGETS: [Point; 4] = [
    Point { x: 0.5, y: 0.95 },
    Point { x: 0.9, y: 0.5 },
    Point { x: 0.5, y: 0.05 },
    Point { x: 0.1, y: 0.5 },
];
const MAIN_OBSTACLE: Rect = Rect {
    x0: 0.45,
    y0: 0.15,
    x1: 0.55,
    y1: 0.85,
};
const MAIN_START: Point = Point { x: 0.3, y: 0.2 };

/// Four uncertain targets around a rectangular obstacle, trigonometric speed.
pub fn four_targets() -> ScenarioDef {
    ScenarioDef {
        name: "four_targets".into(),
        grid_n: DEFAULT_GRID_N,
        obstacles: vec![MAIN_OBSTACLE],
        speed: FieldSpec::CosSinProduct {
            offset: 1.4,
            amplitude: 0.6,
        },
        start: MAIN_START,
        uncertainty: Uncertainty::Targets {
            targets: MAIN_TARGETS.to_vec(),
            probs: vec![0.2, 0.3, 0.2, 0.3],
        },
        time_model: CertaintyTimeModel::Fixed { t: 0.4 },
        stage_reveals: None,
        extras: Extras {
            t: Some(0.4),
            c: Some(0.56),
            epsilon: Some(0.25),
            beta: Some(10.0),
            delta: Some(0.1),
            lambda: Some(2.5),
            c_values: Some(linspace(0.66, 0.81, 16)),
            delta_values: Some(linspace(0.0, 0.8, 40)),
            lambda_values: Some(vec![2.5, 20.0, 30.0]),
        },
    }
}

/// The four-targets domain with a two-point certainty-time distribution.
pub fn four_targets_two_stage(p1: f64, p2: f64) -> ScenarioDef {
    let mut def = four_targets();
    def.name = "four_targets_two_stage".into();
    def.time_model = CertaintyTimeModel::Discrete {
        times: vec![0.08, 0.4],
        probs: vec![p1, p2],
    };
    def
}

/// Skewed variant: top target shifted left, speed bumps flipped. Stresses
/// how poorly a distributionally-robust sweep can cover the trade-off front.
pub fn four_targets_skewed() -> ScenarioDef {
    let mut targets = MAIN_TARGETS.to_vec();
    targets[0] = Point::new(0.45, 0.95);
    ScenarioDef {
        name: "four_targets_skewed".into(),
        grid_n: DEFAULT_GRID_N,
        obstacles: vec![MAIN_OBSTACLE],
        speed: FieldSpec::CosSinProduct {
            offset: 1.4,
            amplitude: -0.6,
        },
        start: MAIN_START,
        uncertainty: Uncertainty::Targets {
            targets,
            probs: vec![0.17, 0.35, 0.3, 0.18],
        },
        time_model: CertaintyTimeModel::Fixed { t: 0.4 },
        stage_reveals: None,
        extras: Extras {
            t: Some(0.4),
            c: Some(0.53),
            delta_values: Some(linspace(0.0, 1.0, 100)),
            ..Extras::default()
        },
    }
}

/// Fixed target, uncertain elliptic storm region raising the running cost;
/// three disjoint hypotheses placed across the diagonal route.
pub fn storms(probs: [f64; 3]) -> ScenarioDef {
    let diag = std::f64::consts::FRAC_PI_4;
    let storm = |cx: f64, cy: f64| {
        StormSpec::from_axes(Point::new(cx, cy), 0.15, 0.09, diag, 2.0, 2.5)
    };
    ScenarioDef {
        name: "storms".into(),
        grid_n: DEFAULT_GRID_N,
        obstacles: vec![],
        speed: FieldSpec::Constant { value: 1.0 },
        start: Point::new(0.1, 0.1),
        uncertainty: Uncertainty::CostHypotheses {
            target: Point::new(0.9, 0.9),
            storms: vec![storm(0.6, 0.4), storm(0.5, 0.5), storm(0.4, 0.6)],
            probs: probs.to_vec(),
        },
        time_model: CertaintyTimeModel::Fixed { t: 0.4 },
        stage_reveals: None,
        extras: Extras {
            t: Some(0.4),
            ..Extras::default()
        },
    }
}

/// Rescue vehicle with scout drones: the three closest sites are checked by
/// drones arriving at straight-line flight times, so targets are ruled out
/// in stages and the certainty time depends on where the subject is.
pub fn drone_rescue() -> ScenarioDef {
    let drone_speed = 5.0 / 3.0;
    let probs = [0.2, 0.3, 0.2, 0.3];
    // drones fly to the bottom, left and right sites in order of distance
    let visit = [2usize, 3, 1];
    let times: Vec<f64> = visit
        .iter()
        .map(|&i| MAIN_TARGETS[i].dist(MAIN_START) / drone_speed)
        .collect();
    let stage_probs = vec![probs[2], probs[3], probs[0] + probs[1]];
    ScenarioDef {
        name: "drone_rescue".into(),
        grid_n: DEFAULT_GRID_N,
        obstacles: vec![MAIN_OBSTACLE],
        speed: FieldSpec::CosSinProduct {
            offset: 1.4,
            amplitude: 0.6,
        },
        start: MAIN_START,
        uncertainty: Uncertainty::Targets {
            targets: MAIN_TARGETS.to_vec(),
            probs: probs.to_vec(),
        },
        time_model: CertaintyTimeModel::Discrete {
            times,
            probs: stage_probs,
        },
        stage_reveals: Some(vec![vec![2], vec![3], vec![0, 1]]),
        extras: Extras::default(),
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n as f64 - 1.0))
        .collect()
}

pub const BUILTIN_NAMES: [&str; 5] = [
    "four_targets",
    "four_targets_two_stage",
    "four_targets_skewed",
    "storms",
    "drone_rescue",
];

/// Look up a built-in scenario by name.
pub fn builtin(name: &str) -> Option<ScenarioDef> {
    match name {
        "four_targets" => Some(four_targets()),
        "four_targets_two_stage" => Some(four_targets_two_stage(0.9, 0.1)),
        "four_targets_skewed" => Some(four_targets_skewed()),
        "storms" => Some(storms([0.8, 0.1, 0.1])),
        "drone_rescue" => Some(drone_rescue()),
        _ => None,
    }
}

/// A built-in name or a path to a JSON config.
pub fn resolve(name_or_path: &str) -> Result<ScenarioDef> {
    if let Some(def) = builtin(name_or_path) {
        return Ok(def);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return ScenarioDef::load(path);
    }
    Err(Error::Config(format!(
        "unknown scenario `{name_or_path}` (built-ins: {})",
        BUILTIN_NAMES.join(", ")
    )))
}
