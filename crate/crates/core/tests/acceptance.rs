//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Expected values are computed here from closed forms, independently of
//! the library code under test.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use conefix::algebra::{
    cone_compare, le, neumann_inverse_e_minus, neumann_residual, spectral_radius, way_below,
    BanachAlgebra, R2Elem, UT2Elem,
};
use conefix::applications::{
    coupled_sequence_harness, coupled_solve, ode_certify, ode_sequence_harness, ode_solve,
    CoupledSystem, OdeProblem, TauPolicy, DEFAULT_DELTA_SAMPLES,
};
use conefix::fixed_point::{
    check_pointwise_convergence, check_uniform_convergence, fixed_point_existence_check,
    h_limit_harness, pointwise_limit_harness, uniform_limit_harness, varying_domain_harness,
    ExistenceConfig, HarnessConfig, MapFamily, Mapping,
};
use conefix::grid::GridFunction;
use conefix::metric::{CSeqProbeConfig, ConeMetricSpace, IntervalUT2Space, PlaneR2Space, SpaceRng};
use conefix::scenarios::{Overrides, Registry};
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(limit_secs: u64, elapsed: Duration) -> Result<(), String> {
    ensure(
        elapsed <= Duration::from_secs(limit_secs),
        format!("took {:.2}s, limit {limit_secs}s", elapsed.as_secs_f64()),
    )
}

/// Multiples of 2⁻¹⁰ in [-lim, lim]: products of two such values are exact.
fn dyadic(rng: &mut SpaceRng, lim: f64) -> f64 {
    let steps = (lim * 1024.0) as i64;
    rng.gen_range(-steps..=steps) as f64 / 1024.0
}

fn in_p<A: BanachAlgebra>(rng: &mut SpaceRng) -> A {
    A::from_coords([dyadic(rng, 8.0).abs(), dyadic(rng, 8.0).abs()])
}

fn algebra_laws<A: BanachAlgebra>(seed: u64) -> Result<usize, String> {
    const N: usize = 10_000;
    let mut rng = SpaceRng::seed_from_u64(seed);
    let mut violations = 0;
    ensure(
        A::zero().in_cone() && A::unit().in_cone(),
        "theta or e outside P",
    )?;
    for _ in 0..N {
        let x = A::from_coords([dyadic(&mut rng, 8.0), dyadic(&mut rng, 8.0)]);
        let y = A::from_coords([dyadic(&mut rng, 8.0), dyadic(&mut rng, 8.0)]);
        violations += usize::from((x * y).norm() > x.norm() * y.norm());

        let (u, v) = (in_p::<A>(&mut rng), in_p::<A>(&mut rng));
        let (s, t) = (dyadic(&mut rng, 8.0).abs(), dyadic(&mut rng, 8.0).abs());
        violations += usize::from(!(u.scale(s) + v.scale(t)).in_cone());
        violations += usize::from(!(u * v).in_cone());
        let both = x.in_cone() && (-x).in_cone();
        violations += usize::from(both != x.is_zero());

        // u ⪯ v ≪ w and u ≪ v ⪯ w, built by adding cone and interior steps
        let step = in_p::<A>(&mut rng);
        let inner = A::from_coords([
            rng.gen_range(1..=8192) as f64 / 1024.0,
            rng.gen_range(1..=8192) as f64 / 1024.0,
        ]);
        let (a, b) = (x, x + step);
        let c = b + inner;
        violations += usize::from(!(le(a, b) && way_below(b, c) && way_below(a, c)));
        let (b2, c2) = (x + inner, x + inner + step);
        violations += usize::from(!(way_below(a, b2) && le(b2, c2) && way_below(a, c2)));
        violations += usize::from(!cone_compare(a, c).way_below);
    }
    Ok(violations)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let r2 = algebra_laws::<R2Elem>(1)?;
    let ut2 = algebra_laws::<UT2Elem>(2)?;
    within(1, start.elapsed())?;
    ensure(
        r2 == 0 && ut2 == 0,
        format!("violations: R2 {r2}, UT2 {ut2}"),
    )?;
    Ok("10^4 samples per algebra, 0 violations".into())
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = SpaceRng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let exact = f64::abs(a);
        worst = worst.max(
            (spectral_radius(R2Elem::new(a, b), 128).map_err(|e| e.to_string())? - exact).abs(),
        );
        worst = worst.max(
            (spectral_radius(UT2Elem::new(a, b), 128).map_err(|e| e.to_string())? - exact).abs(),
        );
    }
    within(1, start.elapsed())?;
    ensure(worst <= 1e-3, format!("max deviation {worst:e}"))?;
    Ok(format!(
        "max |estimate - |u1|| = {worst:.2e} over 10^3 elements"
    ))
}

fn criterion_3() -> Outcome {
    const TAIL: f64 = 1e-12;
    let mut rng = SpaceRng::seed_from_u64(4);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let k = R2Elem::new(rng.gen_range(0.0..=0.9), rng.gen_range(0.0..=1.0));
        let s = neumann_inverse_e_minus(k, TAIL).map_err(|e| e.to_string())?;
        ensure(s.in_cone(), "inverse outside P")?;
        worst = worst.max(neumann_residual(k, s));
    }
    ensure(worst < 10.0 * TAIL, format!("max residual {worst:e}"))?;
    let s = neumann_inverse_e_minus(R2Elem::new(0.5, 1.0), TAIL).map_err(|e| e.to_string())?;
    ensure(
        (s.u1 - 2.0).abs() <= 1e-10 && (s.u2 - 4.0).abs() <= 1e-10,
        format!("(e - (0.5, 1))^-1 = {s:?}"),
    )?;
    ensure(
        R2Elem::new(0.5, -1.0) * R2Elem::new(2.0, 4.0) == R2Elem::unit(),
        "(0.5, -1)(2, 4) != e",
    )?;
    Ok(format!(
        "max residual {worst:.2e} < 1e-11; (e - (0.5, 1))^-1 = ({}, {})",
        s.u1, s.u2
    ))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let family = MapFamily::new(
        |n| Mapping::new(move |x: &f64| x / n as f64),
        Mapping::new(|_: &f64| 0.0),
    );
    let levels = [1.0, 0.1, 0.01];
    let mut checked = 0;
    for k in [1.0, 2.0, 5.0] {
        let space = IntervalUT2Space::new(k).map_err(|e| e.to_string())?;
        let lattice = space.lattice(101);
        let cfg = CSeqProbeConfig::default().with_horizon(6000);
        let r = check_uniform_convergence(&family, &space, &lattice, None, &cfg)
            .map_err(|e| e.to_string())?;
        ensure(r.verdict, format!("uniform probe failed at k = {k}"))?;
        for &a in &levels {
            for &b in &levels {
                let cfg = cfg.clone().with_probes(vec![UT2Elem::new(a, b)]);
                let r = check_uniform_convergence(&family, &space, &lattice, None, &cfg)
                    .map_err(|e| e.to_string())?;
                // smallest N with 1/n < a and k/n < b for all n >= N
                let expected = (1..)
                    .find(|&n: &usize| 1.0 / (n as f64) < a && k / (n as f64) < b)
                    .unwrap();
                let formula = ((1.0 / a).floor() as usize + 1).max((k / b).floor() as usize + 1);
                ensure(
                    expected == formula,
                    "oracle disagrees with the floor formula",
                )?;
                let got = r.report.probes[0].n_found;
                ensure(
                    got == Some(expected),
                    format!("k={k} c=({a},{b}): N {got:?}, expected {expected}"),
                )?;
                checked += 1;
            }
        }
    }
    within(1, start.elapsed())?;
    Ok(format!(
        "uniform probe passes for k in {{1,2,5}}; {checked} thresholds match"
    ))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let family = MapFamily::new(
        |n| Mapping::new(move |p: &[f64; 2]| [p[0].powi((n * n) as i32), p[1].powi(n as i32)]),
        Mapping::new(|_: &[f64; 2]| [0.0, 0.0]),
    );
    let square = PlaneR2Space::half_open_unit_square();
    let mut rng = SpaceRng::seed_from_u64(5);
    let points: Vec<[f64; 2]> = (0..10)
        .map(|_| [rng.gen_range(0.0..0.9), rng.gen_range(0.0..0.9)])
        .collect();
    let cfg = CSeqProbeConfig::default().with_horizon(100);
    let pw =
        check_pointwise_convergence(&family, &square, &points, &cfg).map_err(|e| e.to_string())?;
    ensure(pw.verdict, "pointwise check failed")?;

    let witness = |n: usize| {
        let n = n as f64;
        [5f64.powf(-1.0 / (n * n)), 3f64.powf(-1.0 / n)]
    };
    let adversary = move |n: usize| vec![witness(n)];
    let probe = cfg.with_probes(vec![R2Elem::new(1.0 / 11.0, 1.0 / 8.0)]);
    let un = check_uniform_convergence(
        &family,
        &square,
        &square.lattice(8),
        Some(&adversary),
        &probe,
    )
    .map_err(|e| e.to_string())?;
    ensure(!un.verdict, "uniform check passed")?;
    let mut worst = 0.0_f64;
    for n in 1..=100 {
        let x = witness(n);
        let d = square.metric(&family.member(n).apply(&x), &[0.0, 0.0]);
        worst = worst.max((d.u1 - 0.2).abs()).max((d.u2 - 1.0 / 3.0).abs());
    }
    ensure(worst <= 1e-12, format!("witness distance off by {worst:e}"))?;
    within(1, start.elapsed())?;
    Ok(format!(
        "pointwise passes at 10 points; uniform fails; witness within {worst:.1e} of (1/5, 1/3)"
    ))
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

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let space = IntervalUT2Space::new(1.0).map_err(|e| e.to_string())?;
    let cfg = HarnessConfig::default().with_horizon(10_000);
    let fam = shifted_halves();
    for (name, r) in [
        ("uniform", uniform_limit_harness(&fam, &space, &0.0, &cfg)),
        (
            "pointwise",
            pointwise_limit_harness(&fam, &space, &0.0, &cfg),
        ),
    ] {
        let r = r.map_err(|e| e.to_string())?;
        for i in 0..1000 {
            let (d, b) = (r.distances[i].alpha, r.bounds[i].alpha);
            let exact = 2.0 / (i as f64 + 3.0);
            ensure(
                (d - b).abs() <= 1e-12 && (d - exact).abs() <= 1e-12,
                format!("{name}: n={} dist {d} bound {b} exact {exact}", i + 1),
            )?;
        }
        ensure(r.all_bounds_respected(), format!("{name}: bound violated"))?;
        ensure(
            r.c_sequence_verdict.verdict,
            format!("{name}: probe failed"),
        )?;
    }
    within(5, start.elapsed())?;
    Ok("distance = bound = 2/(n+2) for n <= 1000 in both harnesses; probe passes at 10^4".into())
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

fn criterion_7() -> Outcome {
    let space = IntervalUT2Space::new(1.0).map_err(|e| e.to_string())?;
    let fam = subdomain_family();
    let cfg = HarnessConfig::default().with_horizon(2000);
    let g = varying_domain_harness(&fam, &space, &1.0, &|n| 1.0 / n as f64, &cfg)
        .map_err(|e| e.to_string())?;
    let h = h_limit_harness(&fam, &space, &1.0, &|_, x| *x, &cfg).map_err(|e| e.to_string())?;
    ensure(
        g.all_bounds_respected() && h.all_bounds_respected(),
        "bound violated",
    )?;
    ensure(
        g.c_sequence_verdict.verdict,
        "probe on d(x_n, x_inf) failed",
    )?;
    // fixed point of x/2 + 1/(2n) is 1/n
    for (i, d) in g.distances.iter().enumerate() {
        let exact = 1.0 / (i + 1) as f64;
        ensure(
            (d.alpha - exact).abs() <= 1e-12,
            format!("n={}: distance {}", i + 1, d.alpha),
        )?;
    }
    let ecfg = ExistenceConfig {
        probe: CSeqProbeConfig::default().with_horizon(10_000),
        ..ExistenceConfig::default()
    };
    let r = fixed_point_existence_check(&fam, &space, &1.0, &ecfg).map_err(|e| e.to_string())?;
    ensure(r.clustered, "no cluster")?;
    ensure(
        r.limit_fixed_point == Some(0.0),
        format!("cluster point {:?}", r.limit_fixed_point),
    )?;
    ensure(
        r.limit_residual == Some(UT2Elem::zero()),
        "d(0, T_inf 0) is not theta",
    )?;
    Ok("bounds respected, probe passes, cluster point 0 with d(0, T_inf 0) = theta".into())
}

fn linear_coupled(shift: f64) -> CoupledSystem {
    CoupledSystem::new(
        move |x, _| -x / 2.0 + 0.25 + shift,
        |_, y| -y / 2.0 + 0.125,
        0.5,
    )
    .unwrap()
}

fn criterion_8() -> Outcome {
    let mut worst = 0.0_f64;
    for n in 1..=1000 {
        let s = coupled_solve(&linear_coupled(1.0 / n as f64), [0.0, 0.0], 1e-13)
            .map_err(|e| e.to_string())?;
        // -x/2 + 1/4 + 1/n = 0
        let exact = [2.0 * (0.25 + 1.0 / n as f64), 0.25];
        worst = worst
            .max((s.root[0] - exact[0]).abs())
            .max((s.root[1] - exact[1]).abs());
    }
    ensure(worst <= 1e-8, format!("root error {worst:e}"))?;
    let cfg = HarnessConfig::default().with_horizon(3000);
    let r = coupled_sequence_harness(
        |n| linear_coupled(1.0 / n as f64),
        &linear_coupled(0.0),
        0.5,
        [0.0, 0.0],
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    ensure(r.c_sequence_verdict.verdict, "probe failed")?;
    for i in 0..1000 {
        let n = (i + 1) as f64;
        ensure(r.bound_respected[i], format!("bound violated at n = {n}"))?;
        // (2, 0)·(1/n, 0)
        ensure(
            (r.bounds[i].u1 - 2.0 / n).abs() <= 1e-12 && r.bounds[i].u2 == 0.0,
            "bound differs from (2/n, 0)",
        )?;
    }
    Ok(format!(
        "roots within {worst:.1e}; probe passes; bound (2/n, 0) respected for n <= 1000"
    ))
}

fn linear_ode() -> OdeProblem {
    OdeProblem::new(|_, y, _| -y, |_, _, z| -2.0 * z, 0.0, 1.0, 1.0)
        .with_box(0.5, 1.0, 1.0)
        .with_lipschitz(1.0, 2.0)
}

fn exp_error(y: &GridFunction, z: &GridFunction) -> f64 {
    let ey = y.nodes().map(|(x, v)| (v - (-x).exp()).abs());
    let ez = z.nodes().map(|(x, v)| (v - (-2.0 * x).exp()).abs());
    ey.chain(ez).fold(0.0, f64::max)
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let p = linear_ode();
    let c =
        ode_certify(&p, DEFAULT_DELTA_SAMPLES, TauPolicy::Doubled).map_err(|e| e.to_string())?;
    let (m_f, m_g) = (2.0 * 1.05, 4.0 * 1.05);
    let (h1, h2) = (0.5_f64.min(1.0 / m_f), 0.5_f64.min(1.0 / m_g));
    ensure(
        [c.m_f, c.m_g, c.h1, c.h2, c.h] == [m_f, m_g, h1, h2, h1.min(h2)],
        format!("certificate {c:?}"),
    )?;
    let coarse = ode_solve(&p, &c, 1001, 1e-13).map_err(|e| e.to_string())?;
    let fine = ode_solve(&p, &c, 2001, 1e-13).map_err(|e| e.to_string())?;
    let (e1, e2) = (exp_error(&coarse.y, &coarse.z), exp_error(&fine.y, &fine.z));
    ensure(e1 <= 1e-4, format!("max error {e1:e}"))?;
    let ratio = e1 / e2;
    ensure(
        (3.5..=4.5).contains(&ratio),
        format!("halving ratio {ratio}"),
    )?;
    within(5, start.elapsed())?;
    Ok(format!(
        "certificate exact; max error {e1:.2e}; halving ratio {ratio:.3}"
    ))
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let family = |n: usize| {
        let k = 1.0 + 1.0 / n as f64;
        OdeProblem::new(move |_, y, _| -k * y, |_, _, z| -2.0 * z, 0.0, 1.0, 1.0)
            .with_box(0.5, 1.0, 1.0)
            .with_lipschitz(k, 2.0)
    };
    let cfg = HarnessConfig::default().with_horizon(1000);
    let r =
        ode_sequence_harness(family, &linear_ode(), 0.5, 1001, &cfg).map_err(|e| e.to_string())?;
    let d = &r.report.distances;
    for n in 10..1000 {
        ensure(
            le(d[n], d[n - 1]),
            format!("distance increases at n = {}", n + 1),
        )?;
    }
    ensure(
        d[999].norm() < 1e-3,
        format!("distance {:e} at n = 1000", d[999].norm()),
    )?;
    ensure(r.report.c_sequence_verdict.verdict, "probe failed")?;
    within(30, start.elapsed())?;
    Ok(format!(
        "monotone on [10, 1000]; distance {:.3e} at n = 1000; probe passes",
        d[999].norm()
    ))
}

fn criterion_11() -> Outcome {
    let registry = Registry::builtin();
    let o = Overrides {
        seed: Some(11),
        ..Overrides::default()
    };
    let first = registry.run_all(&o).map_err(|e| e.to_string())?;
    let second = registry.run_all(&o).map_err(|e| e.to_string())?;
    for (a, b) in first.into_iter().zip(second) {
        let (a, b) = (a.map_err(|e| e.to_string())?, b.map_err(|e| e.to_string())?);
        ensure(
            a.to_json() == b.to_json() && a.to_csv() == b.to_csv() && a.artifacts == b.artifacts,
            format!("{} differs between runs", a.scenario),
        )?;
    }
    Ok(format!(
        "{} scenarios byte-identical across two runs",
        registry.list().len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("algebra laws", criterion_1),
        ("spectral radius", criterion_2),
        ("Neumann inverse", criterion_3),
        ("uniform convergence of x/n", criterion_4),
        ("pointwise but not uniform", criterion_5),
        ("uniform and pointwise limit harnesses", criterion_6),
        ("shrinking domains", criterion_7),
        ("coupled equations", criterion_8),
        ("ODE solve", criterion_9),
        ("ODE solution sequence", criterion_10),
        ("determinism", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome =
            panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name} ({secs:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} ({secs:.2}s): {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
