//! Named, reproducible runs of the checkers and harnesses with a uniform
//! report format.
//!
//! A report carries the scenario name, its anchor, the resolved
//! configuration, a table of rows and a list of named checks. Reports are
//! deterministic functions of the configuration, so two runs with the same
//! settings serialize to identical bytes.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::algebra::{BanachAlgebra, R2Elem, UT2Elem};
use crate::applications::{
    coupled_iterate, coupled_sequence_harness, coupled_solve, ode_certify, ode_sequence_harness,
    ode_solve, CoupledSystem, OdeProblem, TauPolicy, DEFAULT_DELTA_SAMPLES,
};
use crate::fixed_point::{
    check_pointwise_convergence, check_uniform_convergence, fixed_point_existence_check,
    h_limit_harness, pointwise_limit_harness, uniform_limit_harness, varying_domain_harness,
    ConvergenceReport, ExistenceConfig, HarnessConfig, MapFamily, Mapping, PicardConfig,
};
use crate::metric::{CSeqProbeConfig, ConeMetricSpace, IntervalUT2Space, PlaneR2Space, SpaceRng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    Unknown(String),
    #[error("scenario `{0}` is already registered")]
    Duplicate(String),
    #[error("invalid setting: {0}")]
    Invalid(String),
    #[error("scenario failed to run: {0}")]
    Run(String),
}

impl ScenarioError {
    /// True for errors detected before any computation.
    pub fn is_invalid_spec(&self) -> bool {
        matches!(
            self,
            ScenarioError::Unknown(_) | ScenarioError::Invalid(_) | ScenarioError::Duplicate(_)
        )
    }
}

fn run_err(e: impl fmt::Display) -> ScenarioError {
    ScenarioError::Run(e.to_string())
}

/// Overrides; `None` falls back to the scenario's defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub horizon: Option<usize>,
    pub grid_pts: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub tol: f64,
    pub horizon: usize,
    pub grid_pts: usize,
    pub seed: u64,
}

/// Smallest horizon accepted: the probe needs a tail of this length.
pub const MIN_HORIZON: usize = 17;

impl ScenarioConfig {
    pub fn with(self, o: &Overrides) -> Result<Self, ScenarioError> {
        let cfg = ScenarioConfig {
            tol: o.tol.unwrap_or(self.tol),
            horizon: o.horizon.unwrap_or(self.horizon),
            grid_pts: o.grid_pts.unwrap_or(self.grid_pts),
            seed: o.seed.unwrap_or(self.seed),
        };
        if !(cfg.tol > 0.0 && cfg.tol.is_finite()) {
            return Err(ScenarioError::Invalid(format!(
                "tol must be positive and finite, got {}",
                cfg.tol
            )));
        }
        if cfg.horizon < MIN_HORIZON {
            return Err(ScenarioError::Invalid(format!(
                "horizon must be at least {MIN_HORIZON}, got {}",
                cfg.horizon
            )));
        }
        if cfg.grid_pts < 3 || cfg.grid_pts.is_multiple_of(2) {
            return Err(ScenarioError::Invalid(format!(
                "grid-pts must be odd and at least 3, got {}",
                cfg.grid_pts
            )));
        }
        Ok(cfg)
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            tol: 1e-13,
            horizon: 1000,
            grid_pts: 1001,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

/// An extra output written next to the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub suffix: String,
    pub contents: String,
}

/// What a scenario body returns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    fn with_columns(columns: &[&str]) -> Self {
        Outcome {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Outcome::default()
        }
    }

    fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, pass, detail));
    }

    fn convergence_rows(report: &ConvergenceReport<R2Elem>) -> Self {
        Self::from_convergence(report, |a| a.coords())
    }

    fn from_convergence<A: BanachAlgebra>(
        report: &ConvergenceReport<A>,
        coords: impl Fn(A) -> [f64; 2],
    ) -> Self {
        let mut out = Outcome::with_columns(&[
            "n",
            "dist_c1",
            "dist_c2",
            "bound_c1",
            "bound_c2",
            "bound_respected",
        ]);
        for i in 0..report.indices.len() {
            let [d1, d2] = coords(report.distances[i]);
            let [b1, b2] = coords(report.bounds[i]);
            out.rows.push(vec![
                json!(report.indices[i]),
                json!(d1),
                json!(d2),
                json!(b1),
                json!(b2),
                json!(report.bound_respected[i]),
            ]);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub anchor: String,
    pub config: ScenarioConfig,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub checks: Vec<Check>,
    pub verdict: bool,
    #[serde(skip)]
    pub artifacts: Vec<Artifact>,
}

impl ScenarioReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|v| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            }))
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    /// One line per check: `PASS|FAIL <scenario> <check>: <detail>`.
    pub fn summary_lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                let tag = if c.pass { "PASS" } else { "FAIL" };
                format!("{tag} {} {}: {}", self.scenario, c.name, c.detail)
            })
            .collect()
    }
}

pub type ScenarioFn = Arc<dyn Fn(&ScenarioConfig) -> Result<Outcome, ScenarioError> + Send + Sync>;

#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub anchor: String,
    pub defaults: ScenarioConfig,
    pub body: ScenarioFn,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("anchor", &self.anchor)
            .field("defaults", &self.defaults)
            .finish()
    }
}

impl Scenario {
    pub fn new(
        name: &str,
        description: &str,
        anchor: &str,
        defaults: ScenarioConfig,
        body: impl Fn(&ScenarioConfig) -> Result<Outcome, ScenarioError> + Send + Sync + 'static,
    ) -> Self {
        Scenario {
            name: name.into(),
            description: description.into(),
            anchor: anchor.into(),
            defaults,
            body: Arc::new(body),
        }
    }

    pub fn resolve(&self, o: &Overrides) -> Result<ScenarioConfig, ScenarioError> {
        self.defaults.with(o)
    }

    /// Run with an already resolved configuration.
    pub fn run_with(&self, cfg: ScenarioConfig) -> Result<ScenarioReport, ScenarioError> {
        let out = (self.body)(&cfg)?;
        Ok(ScenarioReport {
            scenario: self.name.clone(),
            anchor: self.anchor.clone(),
            config: cfg,
            columns: out.columns,
            rows: out.rows,
            verdict: out.checks.iter().all(|c| c.pass),
            checks: out.checks,
            artifacts: out.artifacts,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    scenarios: Vec<Scenario>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry::default()
    }

    /// Every shipped scenario.
    pub fn builtin() -> Self {
        let mut r = Registry::empty();
        for s in builtin_scenarios() {
            r.register(s).expect("builtin names are distinct");
        }
        r
    }

    pub fn register(&mut self, s: Scenario) -> Result<(), ScenarioError> {
        if self.get(&s.name).is_some() {
            return Err(ScenarioError::Duplicate(s.name));
        }
        self.scenarios.push(s);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    pub fn list(&self) -> &[Scenario] {
        &self.scenarios
    }

    /// Resolve name and overrides without running anything.
    pub fn prepare(
        &self,
        name: &str,
        o: &Overrides,
    ) -> Result<(&Scenario, ScenarioConfig), ScenarioError> {
        let s = self
            .get(name)
            .ok_or_else(|| ScenarioError::Unknown(name.into()))?;
        Ok((s, s.resolve(o)?))
    }

    pub fn run(&self, name: &str, o: &Overrides) -> Result<ScenarioReport, ScenarioError> {
        let (s, cfg) = self.prepare(name, o)?;
        s.run_with(cfg)
    }

    /// Every scenario, concurrently, in registry order. All configurations
    /// are validated first.
    pub fn run_all(
        &self,
        o: &Overrides,
    ) -> Result<Vec<Result<ScenarioReport, ScenarioError>>, ScenarioError> {
        let prepared = self
            .scenarios
            .iter()
            .map(|s| Ok((s, s.resolve(o)?)))
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        Ok(prepared
            .into_par_iter()
            .map(|(s, cfg)| s.run_with(cfg))
            .collect())
    }
}

fn cfg(tol: f64, horizon: usize, grid_pts: usize) -> ScenarioConfig {
    ScenarioConfig {
        tol,
        horizon,
        grid_pts,
        seed: 0,
    }
}

fn harness_cfg<A: BanachAlgebra>(c: &ScenarioConfig) -> HarnessConfig<A> {
    HarnessConfig {
        probe: CSeqProbeConfig::default().with_horizon(c.horizon),
        picard: PicardConfig {
            tol: c.tol,
            max_iter: 100_000,
        },
    }
}

fn builtin_scenarios() -> Vec<Scenario> {
    vec![
        Scenario::new(
            "example_2_6",
            "x/n on [0,1] with the upper-triangular metric: uniform convergence to 0 and probe thresholds",
            "Example 2.6",
            cfg(1e-13, 6000, 1001),
            example_2_6,
        ),
        Scenario::new(
            "example_2_8",
            "(x^(n²), y^n) on [0,1)² in the plane algebra: pointwise but not uniform convergence",
            "Example 2.8",
            cfg(1e-13, 100, 1001),
            example_2_8,
        ),
        Scenario::new(
            "thm_2_9",
            "x/2 + 1/(n+2): fixed points under a uniform limit against (e - α)⁻¹ d(T_n x_n, T x_n)",
            "Theorem 2.9",
            cfg(1e-14, 10_000, 1001),
            thm_2_9,
        ),
        Scenario::new(
            "thm_2_10",
            "x/2 + 1/(n+2): fixed points under a pointwise limit against (e - α)⁻¹ d(T_n x*, T x*)",
            "Theorem 2.10",
            cfg(1e-14, 10_000, 1001),
            thm_2_10,
        ),
        Scenario::new(
            "thm_3_6",
            "x/2 + 1/(2n) on X_n = [1/n, 1]: fixed points on shrinking domains, witness and responder bounds",
            "Theorem 3.6",
            cfg(1e-14, 2000, 1001),
            thm_3_6,
        ),
        Scenario::new(
            "thm_3_10",
            "x/2 + 1/(2n) on X_n = [1/n, 1]: the fixed points cluster at a fixed point of the limit",
            "Theorem 3.10",
            cfg(1e-13, 10_000, 1001),
            thm_3_10,
        ),
        Scenario::new(
            "thm_4_1",
            "coupled equations F_n = -x/2 + 1/4 + 1/n, G_n = -y/2 + 1/8: roots and their convergence",
            "Theorem 4.1",
            cfg(1e-13, 3000, 1001),
            thm_4_1,
        ),
        Scenario::new(
            "ode_linear",
            "y' = -y, z' = -2z, y(0) = z(0) = 1: certificate and Picard solution under a Bielecki norm",
            "Theorem 4.2",
            cfg(1e-13, 1000, 1001),
            ode_linear,
        ),
        Scenario::new(
            "ode_sequence",
            "y' = -(1 + 1/n) y, z' = -2z: solutions converge to the solution of y' = -y",
            "Theorem 4.3",
            cfg(1e-13, 1000, 1001),
            ode_sequence,
        ),
    ]
}

fn example_2_6(c: &ScenarioConfig) -> Result<Outcome, ScenarioError> {
    let family = MapFamily::new(
        |n| {
            Mapping::new(move |x: &f64| x / n as f64)
                .with_coefficient(UT2Elem::new(1.0 / n as f64, 0.0))
        },
        Mapping::new(|_: &f64| 0.0),
    );
    let mut out = Outcome::with_columns(&["k", "alpha", "beta", "n_found", "expected"]);
    let levels = [1.0, 0.1, 0.01];
    for k in [1.0, 2.0, 5.0] {
        let space = IntervalUT2Space::new(k).map_err(run_err)?;
        let lattice = space.lattice(101);
        let probe = CSeqProbeConfig::default().with_horizon(c.horizon);
        let r =
            check_uniform_convergence(&family, &space, &lattice, None, &probe).map_err(run_err)?;
        out.check(
            &format!("uniform_k{k}"),
            r.verdict,
            format!("default probes, horizon {}", c.horizon),
        );

        let probes: Vec<UT2Elem> = levels
            .iter()
            .flat_map(|&a| levels.iter().map(move |&b| UT2Elem::new(a, b)))
            .collect();
        let r =
            check_uniform_convergence(&family, &space, &lattice, None, &probe.with_probes(probes))
                .map_err(run_err)?;
        let mut mismatches = 0;
        for p in &r.report.probes {
            let (a, b) = (p.probe.alpha, p.probe.beta);
            let expected = ((1.0 / a).floor() as usize + 1).max((k / b).floor() as usize + 1);
            if p.n_found != Some(expected) {
                mismatches += 1;
            }
            out.rows.push(vec![
                json!(k),
                json!(a),
                json!(b),
                json!(p.n_found),
                json!(expected),
            ]);
        }
        out.check(
            &format!("threshold_formula_k{k}"),
            mismatches == 0,
            format!(
                "{mismatches} of {} thresholds differ from max(floor(1/a)+1, floor(k/b)+1)",
                levels.len().pow(2)
            ),
        );
    }
    Ok(out)
}

/// Witness rows are compared with `(1/5, 1/3)` up to this index; beyond it
/// the rounding of `5^(-1/n²)` is amplified by `n²` past the tolerance.
const WITNESS_EXACT_UP_TO: usize = 100;

fn example_2_8(c: &ScenarioConfig) -> Result<Outcome, ScenarioError> {
    let family = MapFamily::new(
        |n| Mapping::new(move |p: &[f64; 2]| [p[0].powi((n * n) as i32), p[1].powi(n as i32)]),
        Mapping::new(|_: &[f64; 2]| [0.0, 0.0]),
    );
    let square = PlaneR2Space::half_open_unit_square();
    let mut rng = SpaceRng::seed_from_u64(c.seed);
    let points: Vec<[f64; 2]> = (0..10)
        .map(|_| [rng.gen_range(0.0..0.9), rng.gen_range(0.0..0.9)])
        .collect();
    let probe = CSeqProbeConfig::default().with_horizon(c.horizon);
    let pw = check_pointwise_convergence(&family, &square, &points, &probe).map_err(run_err)?;
    let mut out = Outcome::with_columns(&["n", "witness_c1", "witness_c2"]);
    out.check(
        "pointwise",
        pw.verdict,
        format!("{} sampled points in [0, 0.9)²", points.len()),
    );

    let witness = |n: usize| -> [f64; 2] {
        let n = n as f64;
        [5f64.powf(-1.0 / (n * n)), 3f64.powf(-1.0 / n)]
    };
    let adversary = move |n: usize| vec![witness(n)];
    let probe = probe.with_probes(vec![R2Elem::new(1.0 / 11.0, 1.0 / 8.0)]);
    let un = check_uniform_convergence(
        &family,
        &square,
        &square.lattice(8),
        Some(&adversary),
        &probe,
    )
    .map_err(run_err)?;
    out.check(
        "uniform_fails",
        !un.verdict,
        "probe (1/11, 1/8) with the witness family",
    );

    let mut worst = 0.0_f64;
    for n in 1..=c.horizon {
        let x = witness(n);
        let d = square.metric(&family.member(n).apply(&x), &family.limit.apply(&x));
        if n <= WITNESS_EXACT_UP_TO {
            worst = worst.max((d.u1 - 0.2).abs()).max((d.u2 - 1.0 / 3.0).abs());
        }
        out.rows.push(vec![json!(n), json!(d.u1), json!(d.u2)]);
    }
    out.check(
        "witness_distance",
        worst <= 1e-12,
        format!("max deviation from (1/5, 1/3) for n <= {WITNESS_EXACT_UP_TO}: {worst:e}"),
    );
    Ok(out)
}

fn shifted_halves() -> MapFamily<f64, UT2Elem> {
    let half = UT2Elem::new(0.5, 0.0);
    MapFamily::new(
        move |n| {
            Mapping::new(move |x: &f64| x / 2.0 + 1.0 / (n as f64 + 2.0)).with_coefficient(half)
        },
        Mapping::new(|x: &f64| x / 2.0).with_coefficient(half),
    )
}

/// Number of leading rows where distance and bound must agree.
const EQUALITY_ROWS: usize = 1000;

fn shifted_halves_checks(out: &mut Outcome, r: &ConvergenceReport<UT2Elem>) {
    let worst = r
        .distances
        .iter()
        .zip(&r.bounds)
        .take(EQUALITY_ROWS)
        .fold(0.0_f64, |m, (d, b)| m.max((d.alpha - b.alpha).abs()));
    out.check(
        "bound_equality",
        worst <= 1e-12,
        format!("max |dist_c1 - bound_c1| over n <= {EQUALITY_ROWS}: {worst:e}"),
    );
    out.check("bound_respected", r.all_bounds_respected(), "every n");
    out.check(
        "c_sequence",
        r.c_sequence_verdict.verdict,
        format!("horizon {}", r.c_sequence_verdict.horizon),
    );
}

fn thm_2_9(c: &ScenarioConfig) -> Result<Outcome, ScenarioError> {
    let space = IntervalUT2Space::new(1.0).map_err(run_err)?;
    let r =
        uniform_limit_harness(&shifted_halves(), &space, &0.0, &harness_cfg(c)).map_err(run_err)?;
    let mut out = Outcome::from_convergence(&r, |a| a.coords());
    shifted_halves_checks(&mut out, &r);
    Ok(out)
}

fn thm_2_10(c: &ScenarioConfig) -> Result<Outcome, ScenarioError> {
    let space = IntervalUT2Space::new(1.0).map_err(run_err)?;
    let r = pointwise_limit_harness(&shifted_halves(), &space, &0.0, &harness_cfg(c))
        .map_err(run_err)?;
    let mut out = Outcome::from_convergence(&r, |a| a.coords());
    shifted_halves_checks(&mut out, &r);
    Ok(out)
}

fn subdomain_family() -> MapFamily<f64, UT2Elem> {
    let half = UT2Elem::new(0.5, 0.0);
    MapFamily::new(
        move |n| {
            let inv = 1.0 / n as f64;
            Mapping::new(move |x: &f64| x / 2.0 + inv / 2.0)
                .with_coefficient(half)
                .with_domain(move |x| *x >= inv)
        },
        Mapping::new(|x: &f64| x / 2.0).with_coefficient(half),
    )
}

fn thm_3_6(c: &ScenarioConfig) -> Result<Outcome, ScenarioError> {
    let space = IntervalUT2Space::new(1.0).map_err(run_err)?;
    let fam = subdomain_family();
    let hc = harness_cfg(c);
    let g =
        varying_domain_harness(&fam, &space, &1.0, &|n| 1.0 / n as f64, &hc).map_err(run_err)?;
    let h = h_limit_harness(&fam, &space, &1.0, &|_, x| *x, &hc).map_err(run_err)?;
    let mut out = Outcome::from_convergence(&g, |a| a.coords());
    out.check(
        "witness_bound_respected",
        g.all_bounds_respected(),
        "witness y_n = 1/n",
    );
    out.check(
        "responder_bound_respected",
        h.all_bounds_respected(),
        "responder y_n = x_n",
    );
    out.check(
        "c_sequence",
        g.c_sequence_verdict.verdict,
        format!("horizon {}", c.horizon),
    );
    Ok(out)
}

fn thm_3_10(c: &ScenarioConfig) -> Result<Outcome, ScenarioError> {
    let space = IntervalUT2Space::new(1.0).map_err(run_err)?;
    let ecfg = ExistenceConfig {
        probe: CSeqProbeConfig::default().with_horizon(c.horizon),
        picard: PicardConfig {
            tol: c.tol,
            max_iter: 100_000,
        },
        ..ExistenceConfig::default()
    };
    let r =
        fixed_point_existence_check(&subdomain_family(), &space, &1.0, &ecfg).map_err(run_err)?;
    let mut out = Outcome::with_columns(&["quantity", "value"]);
    out.rows
        .push(vec![json!("members_solved"), json!(r.members_solved)]);
    out.rows
        .push(vec![json!("cluster_center"), json!(r.cluster_center)]);
    out.rows
        .push(vec![json!("limit_fixed_point"), json!(r.limit_fixed_point)]);
    out.rows
        .push(vec![json!("conclusion"), json!(r.conclusion)]);
    out.check(
        "clustered",
        r.clustered,
        format!("last quarter of {} fixed points", r.members_solved),
    );
    out.check(
        "cluster_point_zero",
        r.limit_fixed_point == Some(0.0),
        format!("limit fixed point {:?}", r.limit_fixed_point),
    );
    out.check(
        "limit_residual_zero",
        r.limit_residual.is_some_and(|d| d.is_zero()),
        format!("d(x, T_inf x) = {:?}", r.limit_residual.map(|d| d.coords())),
    );
    out.check("consistent", r.verdict, r.conclusion.clone());
    Ok(out)
}

fn linear_coupled(shift: f64) -> CoupledSystem {
    CoupledSystem::new(
        move |x, _| -x / 2.0 + 0.25 + shift,
        |_, y| -y / 2.0 + 0.125,
        0.5,
    )
    .expect("constant in range")
}

fn thm_4_1(c: &ScenarioConfig) -> Result<Outcome, ScenarioError> {
    let mut worst = 0.0_f64;
    for n in 1..=c.horizon.min(1000) {
        let s =
            coupled_solve(&linear_coupled(1.0 / n as f64), [0.0, 0.0], c.tol).map_err(run_err)?;
        let exact = [0.5 + 2.0 / n as f64, 0.25];
        worst = worst
            .max((s.root[0] - exact[0]).abs())
            .max((s.root[1] - exact[1]).abs());
    }
    let r = coupled_sequence_harness(
        |n| linear_coupled(1.0 / n as f64),
        &linear_coupled(0.0),
        0.5,
        [0.0, 0.0],
        &harness_cfg(c),
    )
    .map_err(run_err)?;
    let mut out = Outcome::convergence_rows(&r);
    out.check(
        "roots_closed_form",
        worst <= 1e-8,
        format!("max |root - (1/2 + 2/n, 1/4)| = {worst:e}"),
    );
    out.check(
        "bound_respected",
        r.all_bounds_respected(),
        "bound (2, 0)·d(T_n x, T x)",
    );
    out.check(
        "c_sequence",
        r.c_sequence_verdict.verdict,
        format!("horizon {}", c.horizon),
    );

    let f = |x: f64, y: f64| -x / 2.0 + y / 8.0 + 1.0;
    let g = |x: f64, y: f64| x / 8.0 - y / 2.0 + 1.0;
    let cross = CoupledSystem::new(f, g, 0.5).expect("constant in range");
    let flagged = coupled_solve(&cross, [0.0, 0.0], c.tol).is_err();
    out.check(
        "cross_coupled_flagged",
        flagged,
        "cross terms violate the one-variable condition",
    );
    let s = coupled_iterate(f, g, [0.0, 0.0], c.tol, 100_000).map_err(run_err)?;
    let err = (s.root[0] - 8.0 / 3.0)
        .abs()
        .max((s.root[1] - 8.0 / 3.0).abs());
    out.check(
        "cross_coupled_root",
        err <= 1e-10,
        format!("uncertified root {:?}", s.root),
    );
    Ok(out)
}

fn linear_ode() -> OdeProblem {
    OdeProblem::new(|_, y, _| -y, |_, _, z| -2.0 * z, 0.0, 1.0, 1.0)
        .with_box(0.5, 1.0, 1.0)
        .with_lipschitz(1.0, 2.0)
}

fn ode_linear(c: &ScenarioConfig) -> Result<Outcome, ScenarioError> {
    let p = linear_ode();
    let cert = ode_certify(&p, DEFAULT_DELTA_SAMPLES, TauPolicy::Doubled).map_err(run_err)?;
    let coarse = ode_solve(&p, &cert, c.grid_pts, c.tol).map_err(run_err)?;
    let fine = ode_solve(&p, &cert, 2 * c.grid_pts - 1, c.tol).map_err(run_err)?;
    let error = |y: &crate::grid::GridFunction, rate: f64| {
        y.nodes()
            .fold(0.0_f64, |m, (x, v)| m.max((v - (-rate * x).exp()).abs()))
    };
    let (e_coarse, e_fine) = (
        error(&coarse.y, 1.0).max(error(&coarse.z, 2.0)),
        error(&fine.y, 1.0).max(error(&fine.z, 2.0)),
    );
    let mut out = Outcome::with_columns(&["x", "y", "z", "y_exact", "z_exact"]);
    for ((x, y), z) in coarse.y.nodes().zip(&coarse.z.values) {
        out.rows.push(vec![
            json!(x),
            json!(y),
            json!(z),
            json!((-x).exp()),
            json!((-2.0 * x).exp()),
        ]);
    }
    let expected = [
        2.0 * 1.05,
        4.0 * 1.05,
        0.5_f64.min(1.0 / 2.1),
        0.5_f64.min(1.0 / 4.2),
    ];
    let got = [cert.m_f, cert.m_g, cert.h1, cert.h2];
    let cert_ok = got
        .iter()
        .zip(&expected)
        .all(|(a, b)| (a - b).abs() <= 1e-12)
        && cert.h == cert.h1.min(cert.h2);
    out.check(
        "certificate",
        cert_ok,
        format!(
            "M_f {}, M_g {}, h1 {}, h2 {}, h {}",
            cert.m_f, cert.m_g, cert.h1, cert.h2, cert.h
        ),
    );
    out.check(
        "max_error",
        e_coarse <= 1e-4,
        format!("max error {e_coarse:e} on {} nodes", c.grid_pts),
    );
    let ratio = e_coarse / e_fine;
    out.check(
        "second_order",
        (3.5..=4.5).contains(&ratio),
        format!("error ratio under halving {ratio:.4}"),
    );
    let worst_step = coarse.step_ratios().into_iter().fold(0.0, f64::max);
    out.check(
        "step_contraction",
        worst_step <= cert.alpha1 + 0.05,
        format!(
            "largest successive step ratio {worst_step:.4}, alpha1 {}",
            cert.alpha1
        ),
    );
    out.artifacts.push(Artifact {
        suffix: "y.csv".into(),
        contents: coarse.y.to_csv(),
    });
    out.artifacts.push(Artifact {
        suffix: "z.csv".into(),
        contents: coarse.z.to_csv(),
    });
    let mut cert_json = serde_json::to_string_pretty(&cert).map_err(run_err)?;
    cert_json.push('\n');
    out.artifacts.push(Artifact {
        suffix: "certificate.json".into(),
        contents: cert_json,
    });
    Ok(out)
}

fn exponent_member(n: usize) -> OdeProblem {
    let k = 1.0 + 1.0 / n as f64;
    OdeProblem::new(move |_, y, _| -k * y, |_, _, z| -2.0 * z, 0.0, 1.0, 1.0)
        .with_box(0.5, 1.0, 1.0)
        .with_lipschitz(k, 2.0)
}

/// Monotonicity of the distances is checked from this index on.
const MONOTONE_FROM: usize = 10;

fn ode_sequence(c: &ScenarioConfig) -> Result<Outcome, ScenarioError> {
    let r = ode_sequence_harness(
        exponent_member,
        &linear_ode(),
        0.5,
        c.grid_pts,
        &harness_cfg(c),
    )
    .map_err(run_err)?;
    let d: Vec<f64> = r.report.distances.iter().map(|d| d.norm()).collect();
    let mut out = Outcome::convergence_rows(&r.report);
    let monotone = d
        .get(MONOTONE_FROM - 1..)
        .is_some_and(|t| t.windows(2).all(|w| w[1] <= w[0]));
    out.check(
        "monotone",
        monotone,
        format!("distances nonincreasing for n >= {MONOTONE_FROM}"),
    );
    let last = *d.last().expect("horizon is positive");
    out.check(
        "final_distance",
        last < 1e-3,
        format!("distance {last:e} at n = {}", c.horizon),
    );
    out.check(
        "c_sequence",
        r.report.c_sequence_verdict.verdict,
        format!("horizon {}", c.horizon),
    );
    out.check(
        "bound_respected",
        r.report.all_bounds_respected(),
        "two-sided coefficient bound",
    );
    Ok(out)
}
