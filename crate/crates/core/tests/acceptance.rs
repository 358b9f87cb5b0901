//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! The heavy convergence study (six schemes, M = 64..1024, shared reference)
//! is computed once and shared across criteria.

use parabound::elliptic::estimate_elliptic;
use parabound::fem1d::{supnorm_sampled, MassMode, NodalVector, SpatialMesh, TriDiagMatrix};
use parabound::integrators::{
    bdf2_coefficients, run_scheme, sdirk_gamma, step_backward_euler, step_bdf2,
    step_crank_nicolson, step_extrapolated_euler, step_lobatto_iiic, step_sdirk2, DiscreteSystem,
    SchemeId, SchemeOptions,
};
use parabound::problem::{builtin_test_problem, GreenBounds, Problem, TimeMesh};
use parabound::reconstruction::{psi_closed_form, psi_general};
use parabound::solve_elliptic;
use parabound::study::{
    convergence_study_against, reference_solution, ConvergenceRow, Reference, StudyConfig,
};
use parabound::weights;
use std::sync::OnceLock;

const STUDY_M: [usize; 5] = [64, 128, 256, 512, 1024];

struct Fixture {
    rows: Vec<(SchemeId, Vec<ConvergenceRow<f64>>)>,
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let (p, gb) = builtin_test_problem::<f64>();
        let reference: Reference<f64> =
            reference_solution(&p, *STUDY_M.last().unwrap(), 8, MassMode::Consistent)
                .expect("reference");
        let rows = SchemeId::ALL
            .iter()
            .map(|&scheme| {
                let cfg = StudyConfig::new(scheme, STUDY_M.to_vec());
                let rows = convergence_study_against(&p, &gb, &cfg, &reference)
                    .unwrap_or_else(|e| panic!("study for {}: {e}", scheme.cli_name()));
                (scheme, rows)
            })
            .collect();
        Fixture { rows }
    })
}

fn report(name: &str, violations: &[String]) {
    if violations.is_empty() {
        println!("ACCEPTANCE {name}: PASS");
    } else {
        println!("ACCEPTANCE {name}: FAIL");
        for v in violations {
            println!("  - {v}");
        }
    }
    assert!(
        violations.is_empty(),
        "{name}: {} violation(s): {violations:?}",
        violations.len()
    );
}

#[test]
fn criterion_01_guaranteed_bound() {
    let mut violations = Vec::new();
    for (scheme, rows) in &fixture().rows {
        for row in rows {
            if row.e_m > row.eta {
                violations.push(format!(
                    "{} M={}: e_M = {:.3e} exceeds eta = {:.3e}",
                    scheme.cli_name(),
                    row.m,
                    row.e_m,
                    row.eta
                ));
            }
        }
    }
    report(
        "1 (guaranteed bound e_M <= eta^{M,0}, 6 schemes x M in 64..1024)",
        &violations,
    );
}

#[test]
fn criterion_02_convergence_orders() {
    let mut violations = Vec::new();
    for (scheme, rows) in &fixture().rows {
        let p_m = rows
            .last()
            .and_then(|r| r.p_m)
            .expect("order at the finest level");
        let target = if *scheme == SchemeId::BackwardEuler {
            1.0
        } else {
            2.0
        };
        if (p_m - target).abs() > 0.10 {
            violations.push(format!(
                "{}: p_M = {p_m:.3} at M = 1024, expected {target} +- 0.10",
                scheme.cli_name()
            ));
        }
    }
    report("2 (orders at M = 1024: 1.00/2.00 +- 0.10)", &violations);
}

#[test]
fn criterion_03_error_magnitudes() {
    // Tabulated final-time errors of the benchmark problem at M = 64, 256,
    // 1024; measured values must lie within a factor of two (initial datum
    // and quadrature choices are implementation details).
    let tabulated: [(SchemeId, [f64; 3]); 6] = [
        (SchemeId::BackwardEuler, [5.977e-4, 1.137e-4, 2.619e-5]),
        (SchemeId::CrankNicolson, [2.006e-4, 1.269e-5, 7.935e-7]),
        (SchemeId::ExtrapolatedEuler, [1.986e-4, 1.259e-5, 7.871e-7]),
        (SchemeId::Bdf2, [2.092e-4, 1.314e-5, 8.209e-7]),
        (SchemeId::LobattoIiic, [2.426e-4, 1.649e-5, 1.061e-6]),
        (SchemeId::Sdirk2, [2.112e-4, 1.344e-5, 8.412e-7]),
    ];
    let mut violations = Vec::new();
    for (scheme, expected) in &tabulated {
        let rows = &fixture()
            .rows
            .iter()
            .find(|(s, _)| s == scheme)
            .unwrap()
            .1;
        for (m, exp) in [64usize, 256, 1024].iter().zip(expected) {
            let row = rows.iter().find(|r| r.m == *m).unwrap();
            let ratio = row.e_m / exp;
            if !(0.5..=2.0).contains(&ratio) {
                violations.push(format!(
                    "{} M={m}: e_M = {:.3e} is {ratio:.2}x the tabulated {exp:.3e}",
                    scheme.cli_name(),
                    row.e_m
                ));
            }
        }
    }
    report(
        "3 (e_M within 2x of tabulated values at M = 64, 256, 1024)",
        &violations,
    );
}

#[test]
fn criterion_04_efficiency_band() {
    let mut violations = Vec::new();
    for (scheme, rows) in &fixture().rows {
        for row in rows {
            if !(1.0 / 500.0..=1.0 / 10.0).contains(&row.chi) {
                violations.push(format!(
                    "{} M={}: chi = 1/{:.0} outside [1/500, 1/10]",
                    scheme.cli_name(),
                    row.m,
                    1.0 / row.chi
                ));
            }
        }
        for pair in rows.windows(2) {
            let ratio = pair[1].chi / pair[0].chi;
            if !(0.5..=2.0).contains(&ratio) {
                violations.push(format!(
                    "{} M={}->{}: chi jumps by {ratio:.2}x",
                    scheme.cli_name(),
                    pair[0].m,
                    pair[1].m
                ));
            }
        }
    }
    report(
        "4 (efficiency chi in [1/500, 1/10], consecutive variation < 2x)",
        &violations,
    );
}

#[test]
fn criterion_05_crank_nicolson_step_residual_vanishes() {
    let mut violations = Vec::new();
    let rows = &fixture()
        .rows
        .iter()
        .find(|(s, _)| *s == SchemeId::CrankNicolson)
        .unwrap()
        .1;
    for row in rows {
        if row.eta_big_psi != 0.0 {
            violations.push(format!(
                "M={}: eta_Psi = {:.3e}, expected exact zero",
                row.m, row.eta_big_psi
            ));
        }
    }
    report("5 (Crank-Nicolson: eta_Psi = 0 to machine zero)", &violations);
}

#[test]
fn criterion_06_defect_dual_formula() {
    let (p, _) = builtin_test_problem::<f64>();
    let mesh = SpatialMesh::uniform(-1.0, 1.0, 32);
    let sys = DiscreteSystem::new(&p, mesh, MassMode::Consistent);
    let tm = TimeMesh::uniform(1.0, 32);
    let mut violations = Vec::new();
    for scheme in SchemeId::ALL {
        let traj = run_scheme(scheme, &p, &sys, &tm, &SchemeOptions::default()).unwrap();
        let mut psi_prev = psi_general(&p, &sys, &traj.states[0], 0.0).unwrap();
        let mut worst = 0.0f64;
        for j in 1..=32 {
            let closed = psi_closed_form(&traj, j, &psi_prev).unwrap();
            let variational = psi_general(&p, &sys, &traj.states[j], tm.node(j)).unwrap();
            worst = worst.max(closed.scaled_add(-1.0, &variational).nodal_max_abs());
            psi_prev = closed;
        }
        if worst > 1e-9 {
            violations.push(format!(
                "{}: max |psi_closed - psi_variational| = {worst:.3e} > 1e-9",
                scheme.cli_name()
            ));
        }
    }
    report(
        "6 (psi closed form vs mass-solve defect <= 1e-9 at M = 32)",
        &violations,
    );
}

// Adaptive Simpson quadrature with a relative tolerance, the independent
// oracle for the weights.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth > 32 || (left + right - whole).abs() < 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, left, tol / 2.0, depth + 1) + rec(f, m, b, right, tol / 2.0, depth + 1)
        }
    }
    let whole = simpson(f, a, b);
    rec(f, a, b, whole, rel_tol * whole.abs() + f64::MIN_POSITIVE, 0)
}

#[test]
fn criterion_07_weight_oracle() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x0007_eed5);
    let mut violations = Vec::new();
    for mesh_id in 0..20 {
        let m = rng.gen_range(3usize..30);
        let t_end: f64 = rng.gen_range(0.5..2.0);
        let mut nodes: Vec<f64> = (1..m).map(|_| rng.gen_range(0.0..1.0) * t_end).collect();
        nodes.push(0.0);
        nodes.push(t_end);
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup();
        if nodes.len() < 3 {
            continue;
        }
        let tm = TimeMesh::from_nodes(nodes).unwrap();
        let gb = GreenBounds::new(
            rng.gen_range(0.1..3.0),
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..2.0f64),
        )
        .unwrap();
        let w = weights(&gb, &tm);
        let m = tm.steps();
        for j in 1..=m {
            let (t0, t1) = (tm.node(j - 1), tm.node(j));
            let tau = t1 - t0;
            if j < m {
                let mu_oracle = adaptive_simpson(
                    &|s| gb.kappa1 / (t_end - s) + gb.kappa1_prime,
                    t0,
                    t1,
                    1e-13,
                );
                let rel = (w.mu(j) - mu_oracle).abs() / mu_oracle.max(1e-300);
                if rel > 1e-10 {
                    violations.push(format!(
                        "mesh {mesh_id} step {j}: mu relative error {rel:.2e}"
                    ));
                }
            }
            let last = j == m;
            let chi_integral = adaptive_simpson(
                &|s| {
                    // At the final step (t_M - s)/(T - s) = 1; written in the
                    // cancelled form to avoid 0/0 at s = T.
                    if last {
                        gb.kappa1 * (s - t0) / 2.0
                            + (t1 - s) * (s - t0) / 2.0 * gb.kappa1_prime
                    } else {
                        (t1 - s) * (s - t0) / 2.0
                            * (gb.kappa1 / (t_end - s) + gb.kappa1_prime)
                    }
                },
                t0,
                t1,
                1e-13,
            );
            let chi_oracle = chi_integral.min(gb.kappa0 * tau * tau / 4.0);
            let rel = (w.chi(j) - chi_oracle).abs() / chi_oracle.max(1e-300);
            if rel > 1e-10 {
                violations.push(format!(
                    "mesh {mesh_id} step {j}{}: chi relative error {rel:.2e}",
                    if last { " (final)" } else { "" }
                ));
            }
            // sigma has no integral; cross-check the exponential directly.
            let sigma_oracle = (-(gb.gamma) * (t_end - t1)).exp();
            if (w.sigma(j) - sigma_oracle).abs() > 1e-14 * sigma_oracle {
                violations.push(format!("mesh {mesh_id} step {j}: sigma mismatch"));
            }
        }
    }
    report(
        "7 (closed-form weights vs adaptive quadrature, 1e-10 relative, 20 random meshes)",
        &violations,
    );
}

struct ManufacturedElliptic {
    name: &'static str,
    domain: (f64, f64),
    diffusion: fn(f64) -> f64,
    reaction: fn(f64) -> f64,
    solution: fn(f64) -> f64,
    load: fn(f64) -> f64,
}

fn manufactured_set() -> [ManufacturedElliptic; 5] {
    use std::f64::consts::PI;
    [
        ManufacturedElliptic {
            name: "sine/poisson",
            domain: (0.0, 1.0),
            diffusion: |_| 1.0,
            reaction: |_| 0.0,
            solution: |x| (PI * x).sin(),
            load: |x| PI * PI * (PI * x).sin(),
        },
        ManufacturedElliptic {
            name: "parabola/unit reaction",
            domain: (0.0, 1.0),
            diffusion: |_| 1.0,
            reaction: |_| 1.0,
            solution: |x| x * (1.0 - x),
            load: |x| 2.0 + x * (1.0 - x),
        },
        ManufacturedElliptic {
            name: "benchmark reaction",
            domain: (-1.0, 1.0),
            diffusion: |_| 1.0,
            reaction: |x| 5.0 * x + 6.0,
            solution: |x| (PI * (1.0 + x) / 2.0).sin(),
            load: |x| (PI * PI / 4.0 + 5.0 * x + 6.0) * (PI * (1.0 + x) / 2.0).sin(),
        },
        ManufacturedElliptic {
            name: "variable diffusion",
            domain: (0.0, 2.0),
            diffusion: |x| 2.0 + x,
            reaction: |x| 1.0 + x * x,
            solution: |x| (PI * x / 2.0).sin(),
            load: |x| {
                -(PI / 2.0) * (PI * x / 2.0).cos()
                    + (2.0 + x) * (PI / 2.0) * (PI / 2.0) * (PI * x / 2.0).sin()
                    + (1.0 + x * x) * (PI * x / 2.0).sin()
            },
        },
        ManufacturedElliptic {
            name: "small diffusion/strong reaction",
            domain: (0.0, 1.0),
            diffusion: |_| 0.5,
            reaction: |_| 10.0,
            solution: |x| x * x * (1.0 - x),
            load: |x| -1.0 + 3.0 * x + 10.0 * x * x * (1.0 - x),
        },
    ]
}

#[test]
fn criterion_08_elliptic_upper_bound_and_order() {
    let mut violations = Vec::new();
    for case in manufactured_set() {
        let p = Problem::new(
            case.domain.0,
            case.domain.1,
            Box::new(case.diffusion),
            Box::new(case.reaction),
            Box::new(|_, _| 0.0),
            Box::new(|_| 0.0),
            1.0,
        )
        .unwrap();
        let mut etas = Vec::new();
        for n in [16usize, 32, 64, 128] {
            let mesh = SpatialMesh::uniform(case.domain.0, case.domain.1, n);
            let y_h = solve_elliptic(&p, &mesh, case.load).unwrap();
            let est = estimate_elliptic(&p, &mesh, &y_h, case.load).unwrap();
            let mesh2 = mesh.clone();
            let sol = case.solution;
            let true_err = supnorm_sampled(&mesh, 16, |x| sol(x) - y_h.eval(&mesh2, x));
            if true_err > est.eta {
                violations.push(format!(
                    "{} N={n}: true error {true_err:.3e} exceeds eta {:.3e}",
                    case.name, est.eta
                ));
            }
            etas.push(est.eta);
        }
        let order = (etas[0] / etas[3]).log2() / 3.0;
        if !(1.8..=2.2).contains(&order) {
            violations.push(format!(
                "{}: eta order {order:.3} outside [1.8, 2.2] (etas {etas:?})",
                case.name
            ));
        }
    }
    report(
        "8 (elliptic estimator: upper bound on 5 manufactured problems x 4 levels, order 2)",
        &violations,
    );
}

#[test]
fn criterion_09_component_orders_bdf2() {
    let rows = &fixture()
        .rows
        .iter()
        .find(|(s, _)| *s == SchemeId::Bdf2)
        .unwrap()
        .1;
    let first = rows.first().unwrap();
    let last = rows.last().unwrap();
    let halvings = ((last.m / first.m) as f64).log2();
    let order = |a: f64, b: f64| (a / b).log2() / halvings;
    let mut violations = Vec::new();
    for (name, v0, v1, lo, hi) in [
        ("eta_init", first.eta_init, last.eta_init, 1.85, 2.15),
        ("eta_f", first.eta_f, last.eta_f, 1.85, 2.15),
        ("eta_ell", first.eta_ell_mk, last.eta_ell_mk, 1.85, 2.15),
        ("eta_Psi", first.eta_big_psi, last.eta_big_psi, 1.6, 2.1),
        ("eta_dpsi", first.eta_delta_psi, last.eta_delta_psi, 1.6, 2.1),
    ] {
        let p = order(v0, v1);
        if !(lo..=hi).contains(&p) {
            violations.push(format!(
                "{name}: mean order {p:.3} over M = 64 -> 1024 outside [{lo}, {hi}]"
            ));
        }
    }
    report(
        "9 (BDF-2 component decay orders over M = 64 -> 1024)",
        &violations,
    );
}

// Independent stage-system oracle: solves the 2x2 Butcher system of
// u' = -lambda u by Cramer's rule and combines with the weights.
fn butcher_two_stage(a: [[f64; 2]; 2], b: [f64; 2], z: f64) -> f64 {
    let m = [
        [1.0 + z * a[0][0], z * a[0][1]],
        [z * a[1][0], 1.0 + z * a[1][1]],
    ];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let rhs = [-z, -z];
    let k1 = (rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det;
    let k2 = (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det;
    1.0 + b[0] * k1 + b[1] * k2
}

#[test]
fn criterion_10_scalar_stability_functions() {
    let mut violations = Vec::new();
    let mut check = |name: &str, z: f64, got: f64, expected: f64| {
        if (got - expected).abs() > 1e-12 {
            violations.push(format!(
                "{name} z={z}: step gives {got:.15e}, oracle {expected:.15e}"
            ));
        }
    };
    for z in [0.1, 1.0, 10.0] {
        let mut mass = TriDiagMatrix::zeros(1);
        mass.diag[0] = 1.0;
        let mut stiff = TriDiagMatrix::zeros(1);
        stiff.diag[0] = z;
        let one = NodalVector::from_values(vec![1.0]);
        let zero = NodalVector::from_values(vec![0.0]);

        let u = step_backward_euler(&mass, &stiff, 1.0, &one, &zero).unwrap();
        check("euler", z, u.as_slice()[0], 1.0 / (1.0 + z));

        let u = step_crank_nicolson(&mass, &stiff, 1.0, &one, &zero, &zero).unwrap();
        check("cn", z, u.as_slice()[0], (1.0 - z / 2.0) / (1.0 + z / 2.0));

        let st = step_extrapolated_euler(&mass, &stiff, 1.0, &one, &one, &zero, &zero).unwrap();
        check(
            "exeuler",
            z,
            st.u.as_slice()[0],
            2.0 / ((1.0 + z / 2.0) * (1.0 + z / 2.0)) - 1.0 / (1.0 + z),
        );

        // Two-step difference formula with arbitrary history:
        // alpha (u - u1) + beta (u1 - u2) + z u = 0.
        let (u1, u2) = (0.8, 1.0);
        let (alpha, beta) = bdf2_coefficients(1.0, 1.0);
        let u = step_bdf2(
            &mass,
            &stiff,
            1.0,
            1.0,
            &NodalVector::from_values(vec![u1]),
            &NodalVector::from_values(vec![u2]),
            &zero,
        )
        .unwrap();
        let expected = (alpha * u1 - beta * (u1 - u2)) / (alpha + z);
        check("bdf2", z, u.as_slice()[0], expected);

        let (u, _) = step_lobatto_iiic(&mass, &stiff, 1.0, &one, &zero, &zero).unwrap();
        check(
            "lobatto3c",
            z,
            u.as_slice()[0],
            butcher_two_stage([[0.5, -0.5], [0.5, 0.5]], [0.5, 0.5], z),
        );

        let g: f64 = sdirk_gamma();
        let st = step_sdirk2(&mass, &stiff, 1.0, &one, &zero, &zero).unwrap();
        check(
            "sdirk2",
            z,
            st.u.as_slice()[0],
            butcher_two_stage([[g, 0.0], [1.0 - 2.0 * g, g]], [0.5, 0.5], z),
        );
    }
    report(
        "10 (scalar stability functions vs Butcher/difference oracles, 1e-12)",
        &violations,
    );
}
