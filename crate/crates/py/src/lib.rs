//! Python bindings: load a scenario, solve it once, and query the planners.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use waypath_core::eikonal::{reachable_set, trace_trajectory, ValueSolution};
use waypath_core::grid::{DomainMask, Point, ScalarField};
use waypath_core::marching::{plan_fixed_horizon, plan_stage_chain};
use waypath_core::robust::{
    chance_constrained_policy, dr_field, expected_field, hard_constrained_waypoint, pareto_front,
    risk_sensitive_field, waypoint_argmin, worst_field, TargetEnsemble,
};
use waypath_core::scenario::{self, BuiltScenario};
use waypath_core::termination::{solve_random_termination, trace_to_motionless};

fn err(e: waypath_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A scenario built on its grid with every per-target field solved.
#[pyclass]
struct Planner {
    built: BuiltScenario,
    ensemble: TargetEnsemble,
    q: ScalarField,
    qbar: ScalarField,
    u_start: ValueSolution,
}

impl Planner {
    fn reachable(&self, t: f64) -> PyResult<DomainMask> {
        reachable_set(&self.u_start, t).map_err(err)
    }
}

fn field_rows(field: &ScalarField) -> Vec<Vec<f64>> {
    let spec = field.spec();
    (0..spec.ny)
        .map(|j| (0..spec.nx).map(|i| field.get(i, j)).collect())
        .collect()
}

#[pymethods]
impl Planner {
    #[getter]
    fn name(&self) -> String {
        self.built.def.name.clone()
    }

    #[getter]
    fn grid_shape(&self) -> (usize, usize) {
        (self.built.spec.nx, self.built.spec.ny)
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.built.spec.h
    }

    #[getter]
    fn start(&self) -> (f64, f64) {
        (self.built.start.x, self.built.start.y)
    }

    #[getter]
    fn targets(&self) -> Vec<(f64, f64)> {
        self.built.targets.iter().map(|t| (t.x, t.y)).collect()
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.built.probs.clone()
    }

    /// Expected cost-to-target field, rows indexed by the y node index.
    fn expected_field(&self) -> Vec<Vec<f64>> {
        field_rows(&self.q)
    }

    fn worst_field(&self) -> Vec<Vec<f64>> {
        field_rows(&self.qbar)
    }

    fn value_field(&self, i: usize) -> PyResult<Vec<Vec<f64>>> {
        self.ensemble
            .value_fields
            .get(i)
            .map(field_rows)
            .ok_or_else(|| PyValueError::new_err(format!("no target {i}")))
    }

    fn dr_field(&self, delta: f64) -> PyResult<Vec<Vec<f64>>> {
        Ok(field_rows(&dr_field(&self.ensemble, delta).map_err(err)?))
    }

    /// Waypoint and expected total cost for a fixed certainty time.
    fn plan_fixed<'py>(&self, py: Python<'py>, t: f64) -> PyResult<Bound<'py, PyDict>> {
        let plan = plan_fixed_horizon(&self.q, &self.u_start, t).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item("waypoint", (plan.waypoint.x, plan.waypoint.y))?;
        out.set_item("expected_total", plan.expected_total)?;
        Ok(out)
    }

    /// Stage waypoints for a discretely distributed certainty time.
    fn plan_discrete<'py>(
        &self,
        py: Python<'py>,
        times: Vec<f64>,
        probs: Vec<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let plan = {
            let q = &self.q;
            let stages: Vec<waypath_core::marching::Stage> = times
                .iter()
                .enumerate()
                .map(|(j, &t)| {
                    let tail: f64 = probs[j..].iter().sum();
                    waypath_core::marching::Stage {
                        end_time: t,
                        reveal_weight: probs[j] / tail,
                        reveal_field: q.clone(),
                    }
                })
                .collect();
            waypath_core::marching::validate_discrete(&times, &probs).map_err(err)?;
            plan_stage_chain(&stages, &self.built.speed, &self.built.mask, self.built.start)
                .map_err(err)?
        };
        let out = PyDict::new(py);
        out.set_item(
            "waypoints",
            plan.waypoints.iter().map(|w| (w.x, w.y)).collect::<Vec<_>>(),
        )?;
        out.set_item("value_at_start", plan.value_at_start)?;
        Ok(out)
    }

    /// Waypoint and value for an exponentially distributed certainty time.
    fn plan_exponential<'py>(&self, py: Python<'py>, lambda: f64) -> PyResult<Bound<'py, PyDict>> {
        let k0 = ScalarField::constant(self.built.spec, 0.0);
        let sol = solve_random_termination(&self.q, &self.built.speed, lambda, &self.built.mask, &k0)
            .map_err(err)?;
        let traj = trace_to_motionless(
            &sol,
            &self.built.speed,
            &k0,
            self.built.start,
            self.built.spec.h / 2.0,
        )
        .map_err(err)?;
        let (si, sj) = self.built.spec.nearest_node(self.built.start);
        let out = PyDict::new(py);
        out.set_item("waypoint", (traj.end().x, traj.end().y))?;
        out.set_item("value_at_start", sol.u_lambda.get(si, sj))?;
        out.set_item("motionless_count", sol.motionless.count_inside())?;
        Ok(out)
    }

    fn worst_waypoint(&self, t: f64) -> PyResult<(f64, f64)> {
        let reach = self.reachable(t)?;
        let (_, p) = waypoint_argmin(&self.qbar, &reach).map_err(err)?;
        Ok((p.x, p.y))
    }

    fn risk_waypoint(&self, t: f64, beta: f64) -> PyResult<(f64, f64)> {
        let reach = self.reachable(t)?;
        let ce = risk_sensitive_field(&self.ensemble, beta).map_err(err)?;
        let (_, p) = waypoint_argmin(&ce, &reach).map_err(err)?;
        Ok((p.x, p.y))
    }

    fn hard_waypoint(&self, t: f64, c: f64) -> PyResult<(f64, f64)> {
        let reach = self.reachable(t)?;
        let (_, p) = hard_constrained_waypoint(&self.q, &self.qbar, &reach, c).map_err(err)?;
        Ok((p.x, p.y))
    }

    fn dr_waypoint(&self, t: f64, delta: f64) -> PyResult<(f64, f64)> {
        let reach = self.reachable(t)?;
        let dr = dr_field(&self.ensemble, delta).map_err(err)?;
        let (_, p) = waypoint_argmin(&dr, &reach).map_err(err)?;
        Ok((p.x, p.y))
    }

    /// Mixed strategy under a chance constraint:
    /// `{"atoms": [(x, y, probability)], "objective": .., "risk": ..}`.
    fn chance_policy<'py>(
        &self,
        py: Python<'py>,
        t: f64,
        c: f64,
        epsilon: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let reach = self.reachable(t)?;
        let policy = chance_constrained_policy(&self.ensemble, &self.q, c, epsilon, &reach).map_err(err)?;
        let out = PyDict::new(py);
        out.set_item(
            "atoms",
            policy
                .atoms
                .iter()
                .map(|a| (a.x, a.y, a.probability))
                .collect::<Vec<_>>(),
        )?;
        out.set_item("objective", policy.objective)?;
        out.set_item("risk", policy.risk)?;
        Ok(out)
    }

    /// Non-dominated `(worst, avg)` pairs over the reachable set.
    fn pareto(&self, t: f64) -> PyResult<Vec<(f64, f64)>> {
        let reach = self.reachable(t)?;
        let front = pareto_front(&self.q, &self.qbar, &reach);
        Ok(front.entries.iter().map(|e| (e.worst, e.avg)).collect())
    }

    /// Time-optimal path from the start to an arbitrary point, as a list of
    /// `(x, y)` pairs.
    fn trace<'py>(&self, py: Python<'py>, x: f64, y: f64) -> PyResult<Bound<'py, PyList>> {
        let traj = trace_trajectory(
            &self.u_start,
            &self.built.speed,
            &self.built.cost,
            Point::new(x, y),
            self.built.spec.h / 2.0,
        )
        .map_err(err)?;
        let pts: Vec<(f64, f64)> = traj.points.iter().rev().map(|p| (p.x, p.y)).collect();
        PyList::new(py, pts)
    }
}

/// Names of the built-in scenarios.
#[pyfunction]
fn scenario_names() -> Vec<String> {
    scenario::BUILTIN_NAMES.iter().map(|s| s.to_string()).collect()
}

/// Load a built-in scenario (or a JSON config path) and solve its ensemble.
#[pyfunction]
#[pyo3(signature = (name_or_path, grid_n=None))]
fn load(name_or_path: &str, grid_n: Option<usize>) -> PyResult<Planner> {
    let def = scenario::resolve(name_or_path).map_err(err)?;
    let built = def.build(grid_n).map_err(err)?;
    let (ensemble, _) = built.solve_ensemble().map_err(err)?;
    let q = expected_field(&ensemble);
    let qbar = worst_field(&ensemble);
    let u_start = built.solve_from_start().map_err(err)?;
    Ok(Planner {
        built,
        ensemble,
        q,
        qbar,
        u_start,
    })
}

#[pymodule]
fn waypath(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Planner>()?;
    m.add_function(wrap_pyfunction!(load, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_names, m)?)?;
    Ok(())
}
