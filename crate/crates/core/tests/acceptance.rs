//! Acceptance criteria. Each check prints one `PASS`/`FAIL` line with the
//! measured quantity and its wall time; the test fails if any check does.

use std::time::{Duration, Instant};

use confgap::convexity::{a_of, build_phi, da_of, db_of, default_s_max, verify_hessian_factorization, DEFAULT_GRID};
use confgap::curvature::conformal_curvatures;
use confgap::gap::{gap_second_derivative_at_waist, gaussian_gap_functional, hessian_eigen_factors, waist_threshold};
use confgap::metric::ConformalFactor;
use confgap::profile::{integrate, GraphState, ProfileCurve};
use confgap::shooting::{angenent_waist, combined_example, free_boundary_param, TORUS_BRACKET};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let in_time = took < limit;
    let pass = out.pass && in_time;
    println!(
        "[{}] {id:>2} {name}: {} ({:.3} s, limit {} s)",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn builtins() -> [ConformalFactor; 4] {
    [
        ConformalFactor::euclidean(),
        ConformalFactor::hyperbolic(),
        ConformalFactor::spherical(),
        ConformalFactor::gaussian(),
    ]
}

fn graph(curve: &ProfileCurve, t: f64) -> GraphState {
    *curve.eval(t).unwrap().as_graph().unwrap()
}

fn closed_form_distances() -> Outcome {
    let h = ConformalFactor::hyperbolic();
    let s = ConformalFactor::spherical();
    let mut worst: f64 = 0.0;
    for k in 1..=9 {
        let r = k as f64 / 10.0;
        worst = worst.max((h.conformal_distance(r).unwrap() - 2.0 * r.atanh()).abs());
        worst = worst.max((s.conformal_distance(r).unwrap() - 2.0 * r.atan()).abs());
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!("max error {worst:.3e} (<= 1e-9)"),
    }
}

fn catenoid_oracle() -> Outcome {
    let e = ConformalFactor::euclidean();
    let curve = integrate(&e, 0.0, 1.0, 0.0, 2.0, 1e-10).unwrap();
    let reached = curve.param_range().1 == 2.0;
    let worst = curve
        .samples(8)
        .iter()
        .map(|st| (st.x() - st.param().cosh()).abs())
        .fold(0.0, f64::max);
    Outcome {
        pass: reached && worst <= 1e-8,
        detail: format!("max |x - cosh t| {worst:.3e} on [0, 2] (<= 1e-8)"),
    }
}

// F on a shrinker at t, for the curve running in the sign of t.
fn shrinker_f(x0: f64, ts: &[f64]) -> Vec<f64> {
    let g = ConformalFactor::gaussian();
    let reach = ts.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let up = integrate(&g, 0.0, x0, 0.0, reach, 1e-12).unwrap();
    let down = integrate(&g, 0.0, x0, 0.0, -reach, 1e-12).unwrap();
    ts.iter()
        .map(|&t| {
            let c = if t >= 0.0 { &up } else { &down };
            gaussian_gap_functional(&graph(c, t)).unwrap()
        })
        .collect()
}

fn shrinker_identities() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let h = 0.02;
    let mut worst_f0: f64 = 0.0;
    let mut worst_d1: f64 = 0.0;
    let mut worst_d2: f64 = 0.0;
    for x0 in [0.3, 0.5, 0.9, 1.05] {
        let f = shrinker_f(x0, &[-2.0 * h, -h, 0.0, h, 2.0 * h]);
        worst_f0 = worst_f0.max((f[2] - 1.0).abs());
        let d1 = (f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * h);
        let d2 = (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h);
        let exact = gap_second_derivative_at_waist(x0);
        worst_d1 = worst_d1.max(d1.abs());
        worst_d2 = worst_d2.max((d2 - exact).abs() / exact.abs());
    }
    ok &= worst_f0 <= 4.0 * f64::EPSILON && worst_d1 <= 1e-6 && worst_d2 <= 1e-4;
    notes.push(format!(
        "|F(0)-1| {worst_f0:.1e}, |F'(0)| {worst_d1:.1e}, F''(0) rel err {worst_d2:.1e}"
    ));
    let th = waist_threshold();
    let below = gap_second_derivative_at_waist(1.0);
    let above = gap_second_derivative_at_waist(1.2);
    let f = shrinker_f(th, &[-h, 0.0, h]);
    let at = (f[0] - 2.0 * f[1] + f[2]) / (h * h);
    let flips = below < 0.0 && above > 0.0 && at.abs() < 1e-3 && (th - 1.08239).abs() < 5e-6;
    ok &= flips;
    notes.push(format!(
        "threshold {th:.5}, F''(0) at 1.0 / threshold / 1.2: {below:.3} / {at:.1e} / {above:.3}"
    ));
    Outcome {
        pass: ok,
        detail: notes.join("; "),
    }
}

fn hessian_factorization() -> Outcome {
    let e = ConformalFactor::euclidean();
    let catenoid = integrate(&e, 0.0, 1.0, 0.0, 1.0, 1e-12)
        .unwrap()
        .mirrored_even()
        .unwrap();
    let rc = verify_hessian_factorization(&build_phi(&e, 4.0, DEFAULT_GRID).unwrap(), &catenoid).unwrap();
    let g = ConformalFactor::gaussian();
    let shrinker = integrate(&g, 0.0, 0.45, 0.0, 0.3, 1e-12)
        .unwrap()
        .mirrored_even()
        .unwrap();
    let rs = verify_hessian_factorization(&build_phi(&g, default_s_max(&g), DEFAULT_GRID).unwrap(), &shrinker).unwrap();
    Outcome {
        pass: rc <= 1e-5 && rs <= 1e-5,
        detail: format!("catenoid {rc:.2e}, shrinker {rs:.2e} (<= 1e-5)"),
    }
}

fn lambda_identities() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let cfs = builtins();
    let (mut worst_prod, mut worst_sum): (f64, f64) = (0.0, 0.0);
    let mut n = 0;
    while n < 1000 {
        let cf = &cfs[rng.random_range(0..4)];
        let reach = cf.sigma_positivity_radius().min(3.0);
        let t = rng.random_range(-reach..reach);
        let x = rng.random_range(0.05..reach);
        if t * t + x * x >= 0.98 * reach * reach {
            continue;
        }
        let xp = rng.random_range(-5.0..5.0);
        let xpp = rng.random_range(-20.0..20.0);
        let pg = conformal_curvatures(cf, &GraphState::new(t, x, xp), xpp).unwrap();
        let (l1, l2) = hessian_eigen_factors(&pg).unwrap();
        let (s, sig) = (pg.support_conf, pg.sigma);
        let half = 2.0 + pg.hbar * s / sig;
        let square = 0.25 * half * half;
        let shear = pg.traceless_sq * s * s / (2.0 * sig * sig);
        let scale = square.abs().max(shear.abs()).max(f64::MIN_POSITIVE);
        worst_prod = worst_prod.max((l1 * l2 - (square - shear)).abs() / scale);
        worst_sum = worst_sum.max((l1 + l2 - half).abs() / half.abs().max(1.0));
        n += 1;
    }
    Outcome {
        pass: worst_prod <= 1e-10 && worst_sum <= 1e-10,
        detail: format!("1000 points, product {worst_prod:.1e}, sum {worst_sum:.1e} (<= 1e-10)"),
    }
}

fn phi_solver() -> Outcome {
    let mut ok = true;
    let mut worst_res: f64 = 0.0;
    for cf in builtins() {
        let s_max = default_s_max(&cf);
        let table = build_phi(&cf, s_max, DEFAULT_GRID).unwrap();
        ok &= table.phi[0] == 0.0 && table.dphi.iter().all(|&d| d > 0.0);
        let t_max = *table.t_grid.last().unwrap();
        for k in 1..=100 {
            let t = t_max * k as f64 / 101.0;
            let s = a_of(&cf, t);
            let h = f64::EPSILON.powf(0.2) * s.min(s_max - s);
            let d = |v: f64| table.dphi_at(v).unwrap();
            let dd = (d(s - 2.0 * h) - 8.0 * d(s - h) + 8.0 * d(s + h) - d(s + 2.0 * h)) / (12.0 * h);
            let b = cf.sigma(t).unwrap();
            worst_res = worst_res.max((dd * da_of(&cf, t) * b + d(s) * db_of(&cf, t)).abs());
        }
    }
    let e = ConformalFactor::euclidean();
    let table = build_phi(&e, 4.0, DEFAULT_GRID).unwrap();
    let identity = (0..=1000)
        .map(|k| {
            let s = 4.0 * k as f64 / 1000.0;
            (table.phi_at(s).unwrap() - s).abs()
        })
        .fold(0.0, f64::max);
    ok &= worst_res <= 1e-6 && identity <= 1e-10;
    Outcome {
        pass: ok,
        detail: format!("ODE residual {worst_res:.2e} (<= 1e-6), euclidean |Phi(s) - s| {identity:.1e} (<= 1e-10)"),
    }
}

fn newton_coth_root() -> f64 {
    let mut d: f64 = 1.2;
    for _ in 0..60 {
        let f = d * d.tanh() - 1.0;
        let df = d.tanh() + d / d.cosh().powi(2);
        d -= f / df;
    }
    d
}

fn critical_catenoid() -> (Outcome, String) {
    let e = ConformalFactor::euclidean();
    let res = free_boundary_param(&e, 0.0, 1.0, (0.5, 2.0), 1e-12).unwrap();
    let err = (res.parameter - newton_coth_root()).abs();
    let json = res.to_json().unwrap();
    (
        Outcome {
            pass: err <= 1e-10,
            detail: format!("delta* = {:.10}, |delta* - Newton| {err:.1e} (<= 1e-10)", res.parameter),
        },
        json,
    )
}

fn torus() -> (Outcome, String) {
    let res = angenent_waist(TORUS_BRACKET, 1e-11).unwrap();
    let (lo, hi) = (7.0 / 16.0 - 3.0 / 98.0, 7.0 / 16.0 + 3.0 / 98.0);
    let x1 = res.parameter;
    let json = res.to_json().unwrap();
    (
        Outcome {
            pass: lo < x1 && x1 < hi && res.residual <= 1e-8,
            detail: format!(
                "x1 = {x1:.8} in ({lo:.7}, {hi:.7}), x2 = {:.6}, closure residual {:.1e} (<= 1e-8)",
                res.far_intercept.unwrap(),
                res.residual
            ),
        },
        json,
    )
}

fn certified_example() -> (Outcome, String) {
    let ex = combined_example(0.45).unwrap();
    let label = ex.report.verdict.label();
    let json = serde_json::to_string(&(ex.summary(), &ex.report, ex.curve.record())).unwrap();
    (
        Outcome {
            pass: ex.xi > 0.0 && ex.r < 2.0 && label == "holds" && ex.boundary_curvature > 0.0,
            detail: format!(
                "xi = {:.3e}, r = {:.6}, verdict {label}, boundary curvature {:.3e}",
                ex.xi, ex.r, ex.boundary_curvature
            ),
        },
        json,
    )
}

fn shooting_json() -> Vec<String> {
    vec![critical_catenoid().1, torus().1, certified_example().1]
}

fn determinism() -> Outcome {
    let first = shooting_json();
    let second = shooting_json();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(shooting_json);
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get()).max(4);
    let many = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(shooting_json);
    let same = first == second && first == single && first == many;
    Outcome {
        pass: same,
        detail: format!("criteria 7-9 JSON identical across two runs and 1 vs {threads} threads: {same}"),
    }
}

fn main() {
    let results = [
        check(
            1,
            "closed-form distances",
            Duration::from_secs(1),
            closed_form_distances,
        ),
        check(2, "catenoid oracle", Duration::from_secs(1), catenoid_oracle),
        check(3, "shrinker identities", Duration::from_secs(5), shrinker_identities),
        check(
            4,
            "Hessian factorization",
            Duration::from_secs(10),
            hessian_factorization,
        ),
        check(5, "lambda identities", Duration::from_secs(1), lambda_identities),
        check(6, "potential solver", Duration::from_secs(5), phi_solver),
        check(7, "critical catenoid", Duration::from_secs(1), || critical_catenoid().0),
        check(8, "shrinker torus waist", Duration::from_secs(60), || torus().0),
        check(9, "existence pipeline", Duration::from_secs(30), || {
            certified_example().0
        }),
        check(10, "determinism", Duration::from_secs(120), determinism),
    ];
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, &p)| !p)
        .map(|(i, _)| i + 1)
        .collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
