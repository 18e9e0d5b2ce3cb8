//! Acceptance run: one PASS/FAIL line per criterion, then a single assertion
//! over all of them. Expensive; run with `--release` when iterating.

mod common;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use wbweno::experiments::{
    run_convergence, run_example, run_wb_check, Check, ExampleArtifacts, ExampleOptions,
};
use wbweno::kernels::{aiwenoz_left, aiwenoz_right, cell_integral_fifth, fd_kxx, fd_kxxxx};
use wbweno::{ssp_rk3_step, Nozzle, Profile, SystemModel, TwoLayer};

struct Line {
    name: &'static str,
    passed: bool,
    detail: String,
}

impl Line {
    fn from_checks<'a>(name: &'static str, checks: impl IntoIterator<Item = &'a Check>) -> Self {
        let checks: Vec<&Check> = checks.into_iter().collect();
        let failed: Vec<String> = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} = {:.3e} vs {:.3e}", c.name, c.value, c.threshold))
            .collect();
        Line {
            name,
            passed: !checks.is_empty() && failed.is_empty(),
            detail: if checks.is_empty() {
                "no checks produced".into()
            } else if failed.is_empty() {
                format!("{} checks", checks.len())
            } else {
                failed.join("; ")
            },
        }
    }

    fn error(name: &'static str, e: impl std::fmt::Display) -> Self {
        Line {
            name,
            passed: false,
            detail: format!("error: {e}"),
        }
    }
}

fn wb_checks(art: &ExampleArtifacts) -> impl Iterator<Item = &Check> {
    art.report.checks.iter().filter(|c| c.name.contains("_wb_"))
}

fn dominance_checks(art: &ExampleArtifacts) -> impl Iterator<Item = &Check> {
    art.report
        .checks
        .iter()
        .filter(|c| c.name.contains("_dominance_"))
}

fn example4_wb() -> Line {
    let name = "well-balance two-layer (Example 4, t = 20)";
    let listed = match run_wb_check(4, None, &ExampleOptions::default()) {
        Ok(a) => a,
        Err(e) => return Line::error(name, e),
    };
    // the listed states are an equilibrium pair only at g = 10; at g = 1 the
    // steady state is re-solved from the left state and the listed-pair
    // consistency check does not apply
    let opts = ExampleOptions {
        gravity: Some(1.0),
        ..Default::default()
    };
    let resolved = match run_wb_check(4, None, &opts) {
        Ok(a) => a,
        Err(e) => return Line::error(name, e),
    };
    let mut checks: Vec<Check> = listed.report.checks.clone();
    checks.extend(wb_checks(&resolved).map(|c| Check {
        name: format!("g1_{}", c.name),
        ..c.clone()
    }));
    let mut line = Line::from_checks(name, &checks);
    let worst = listed
        .report
        .wb
        .iter()
        .chain(&resolved.report.wb)
        .flat_map(|r| r.norms.l1.iter().copied())
        .fold(0.0, f64::max);
    line.detail = format!("{}, worst L1 {worst:.2e}", line.detail);
    line
}

fn main_examples() -> (Line, Line) {
    let wb_name = "well-balance nozzle (Examples 1-2)";
    let dom_name = "resolution dominance (Examples 1, 2, 4, 5)";
    let opts = ExampleOptions::default();
    let mut wb = Vec::new();
    let mut dom = Vec::new();
    for n in [1, 2, 4, 5] {
        match run_example(n, None, &opts) {
            Ok(art) => {
                if n <= 2 {
                    wb.extend(wb_checks(&art).cloned());
                }
                let found: Vec<Check> = dominance_checks(&art).cloned().collect();
                if found.len() != 3 * if n == 1 { 2 } else { 1 } {
                    dom.push(Check::at_least(
                        format!("example{n}_snapshot_count"),
                        found.len() as f64,
                        f64::INFINITY,
                    ));
                }
                dom.extend(found);
            }
            Err(e) => {
                let msg = format!("example {n}: {e}");
                let line = Line::error(if n <= 2 { wb_name } else { dom_name }, &msg);
                if n <= 2 {
                    return (line, Line::error(dom_name, &msg));
                }
                return (Line::from_checks(wb_name, &wb), line);
            }
        }
    }
    (
        Line::from_checks(wb_name, &wb),
        Line::from_checks(dom_name, &dom),
    )
}

fn convergence() -> Line {
    let name = "convergence (Example 3)";
    match run_convergence(None, &ExampleOptions::default()) {
        Ok(art) => {
            let mut checks = art.report.checks.clone();
            for r in &art.report.runge {
                checks.push(Check::at_least(
                    format!("runge_rows_order{}", r.order),
                    r.rows.len() as f64,
                    4.0,
                ));
            }
            let mut line = Line::from_checks(name, &checks);
            let rates: Vec<String> = art
                .report
                .runge
                .iter()
                .filter(|r| r.quantity == "h1")
                .map(|r| {
                    let rs: Vec<String> = r
                        .rows
                        .iter()
                        .filter_map(|row| row.rate.map(|x| format!("{x:.2}")))
                        .collect();
                    format!("order {}: {}", r.order, rs.join("/"))
                })
                .collect();
            line.detail = format!("{}, rates {}", line.detail, rates.join(", "));
            line
        }
        Err(e) => Line::error(name, e),
    }
}

fn riemann() -> Line {
    let name = "Riemann stability (Example 6)";
    match run_example(6, None, &ExampleOptions::default()) {
        Ok(art) => {
            let mut checks = art.report.checks.clone();
            let finite = art.report.mass.iter().all(|m| m.finite)
                && art.series.iter().all(|s| {
                    s.columns
                        .iter()
                        .all(|c| c.values.iter().all(|v| v.is_finite()))
                });
            checks.push(Check::at_least(
                "finite_fields",
                if finite { 1.0 } else { 0.0 },
                1.0,
            ));
            Line::from_checks(name, &checks)
        }
        Err(e) => Line::error(name, e),
    }
}

fn polynomial(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn stencil(c: &[f64], x0: f64, h: f64) -> [f64; 5] {
    std::array::from_fn(|i| polynomial(c, x0 + (i as f64 - 2.0) * h))
}

fn kernel_suite() -> Line {
    let mut rng = StdRng::seed_from_u64(0x2545_F491_4F6C_DD1D);
    let mut checks = Vec::new();

    // reconstruction of a polynomial is its value at the interface
    let mut worst_low = 0.0f64;
    let mut worst_high = 0.0f64;
    for trial in 0..400 {
        let degree = trial % 5;
        let c: Vec<f64> = (0..=degree).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x0 = rng.gen_range(-3.0..3.0);
        let h = if degree <= 2 {
            10f64.powf(rng.gen_range(-4.0..1.0))
        } else {
            1e-3
        };
        let s = stencil(&c, x0, h);
        let scale = s.iter().fold(1e-300, |m: f64, v| m.max(v.abs()));
        let err = (aiwenoz_left(&s) - polynomial(&c, x0 + 0.5 * h)).abs()
            + (aiwenoz_right(&s) - polynomial(&c, x0 - 0.5 * h)).abs();
        if degree <= 2 {
            worst_low = worst_low.max(err / scale);
        } else {
            worst_high = worst_high.max(err / scale);
        }
    }
    checks.push(Check::at_most("aiwenoz_degree_le2_any_h", worst_low, 1e-12));
    checks.push(Check::at_most(
        "aiwenoz_degree_3_4_h1e-3",
        worst_high,
        1e-12,
    ));

    let mut worst = 0.0f64;
    for _ in 0..400 {
        let s: [f64; 5] = std::array::from_fn(|_| rng.gen_range(-5.0..5.0));
        let a = rng.gen_range(-10.0..10.0);
        let b = rng.gen_range(-10.0..10.0);
        let t: [f64; 5] = std::array::from_fn(|i| a * s[i] + b);
        let scale = a.abs() * s.iter().fold(0.0, |m: f64, v| m.max(v.abs())) + b.abs();
        for (f, g) in [
            (aiwenoz_left(&s), aiwenoz_left(&t)),
            (aiwenoz_right(&s), aiwenoz_right(&t)),
        ] {
            worst = worst.max((g - (a * f + b)).abs() / scale);
        }
    }
    checks.push(Check::at_most("aiwenoz_affine_equivariance", worst, 1e-13));

    let sq: [f64; 5] = std::array::from_fn(|i| (i as f64 - 2.0).powi(2));
    let qu: [f64; 5] = std::array::from_fn(|i| (i as f64 - 2.0).powi(4));
    checks.push(Check::at_most(
        "fd_kxx_x2",
        (fd_kxx(&sq, 1.0) - 2.0).abs(),
        0.0,
    ));
    checks.push(Check::at_most(
        "fd_kxxxx_x4",
        (fd_kxxxx(&qu, 1.0) - 24.0).abs(),
        0.0,
    ));
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let h = 10f64.powf(rng.gen_range(-3.0..0.0));
        let x0 = rng.gen_range(-1.0..1.0);
        let k2 = stencil(&[0.0, 0.0, 1.0], x0, h);
        let k4 = stencil(&[0.0, 0.0, 0.0, 0.0, 1.0], x0, 1.0);
        worst = worst
            .max((fd_kxx(&k2, h) - 2.0).abs() / 2.0)
            .max((fd_kxxxx(&k4, 1.0) - 24.0).abs() / 24.0);
    }
    checks.push(Check::at_most("fd_stencils_shifted", worst, 1e-9));

    let mut worst = 0.0f64;
    for _ in 0..200 {
        let a: [f64; 5] = std::array::from_fn(|_| rng.gen_range(-1e3..1e3));
        let b = [rng.gen_range(-1e3..1e3); 5];
        worst = worst.max(cell_integral_fifth(&a, &b).abs());
    }
    checks.push(Check::at_most(
        "cell_integral_constant_argument",
        worst,
        0.0,
    ));

    checks.push(Check::at_most(
        "equilibrium_inverse_round_trip",
        inverse_round_trip(&mut rng),
        1e-12,
    ));

    // u' = -u from u(0) = 1 to t = 1
    let rk_error = |steps: usize| {
        let dt = 1.0 / steps as f64;
        let mut u = vec![1.0];
        for _ in 0..steps {
            ssp_rk3_step(&mut u, dt, |s, out| {
                out[0] = -s[0];
                Ok(())
            })
            .unwrap();
        }
        (u[0] - (-1.0f64).exp()).abs()
    };
    let rate = (rk_error(40) / rk_error(80)).log2();
    checks.push(Check::at_least("ssp_rk3_rate_min", rate, 2.9));
    checks.push(Check::at_most("ssp_rk3_rate_max", rate, 3.1));

    Line::from_checks("kernel property suite", &checks)
}

/// Worst relative state error after `state -> E -> state` on random
/// admissible states of both systems, away from the sonic and resonant
/// points where the inverse is singular.
fn inverse_round_trip(rng: &mut StdRng) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let gamma = rng.gen_range(1.1..1.6);
        let m = Nozzle::new(1.0, gamma, Profile::constant(1.0)).unwrap();
        let sigma = rng.gen_range(0.2..3.0);
        let rho = rng.gen_range(0.1..5.0);
        let mach = if rng.gen::<bool>() {
            rng.gen_range(0.0..0.8)
        } else {
            rng.gen_range(1.25..4.0)
        };
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let u = [sigma * rho, sign * sigma * rho * mach * m.sound_speed(rho)];
        let back = m
            .state_from_equilibrium(&m.equilibrium(&u, sigma).unwrap(), sigma, &u)
            .unwrap();
        for k in 0..2 {
            worst = worst.max((back[k] - u[k]).abs() / u[k].abs().max(u[0]));
        }
    }
    for _ in 0..300 {
        let g = if rng.gen::<bool>() { 1.0 } else { 10.0 };
        let m = TwoLayer::new(g, rng.gen_range(0.5..0.985), Profile::constant(0.0)).unwrap();
        let z = rng.gen_range(-5.0..0.5);
        let (h1, h2) = (rng.gen_range(0.3..3.0), rng.gen_range(0.3..3.0));
        let c = (g * (h1 + h2)).sqrt();
        let (u1, u2) = if rng.gen::<bool>() {
            (rng.gen_range(-0.3..0.3) * c, rng.gen_range(-0.3..0.3) * c)
        } else {
            let v = rng.gen_range(1.6..3.0) * c;
            (v, v * rng.gen_range(0.9..1.0))
        };
        let u = [h1, h1 * u1, h2, h2 * u2];
        let back = m
            .state_from_equilibrium(&m.equilibrium(&u, z).unwrap(), z, &u)
            .unwrap();
        for k in 0..4 {
            worst = worst.max((back[k] - u[k]).abs() / u[k].abs().max(1.0));
        }
    }
    worst
}

fn wb_chain() -> Line {
    let (nozzle, n_tested) = common::nozzle_wb_chain(200);
    let (two_layer, t_tested) = common::two_layer_wb_chain(200);
    let mut line = Line::from_checks(
        "WB chain (constant equilibrium, both systems and orders)",
        &[
            Check::at_most("nozzle_rhs_over_scale", nozzle, 1e-13),
            Check::at_most("two_layer_rhs_over_scale", two_layer, 1e-13),
            Check::at_least("nozzle_samples", n_tested as f64, 150.0),
            Check::at_least("two_layer_samples", t_tested as f64, 150.0),
        ],
    );
    line.detail = format!(
        "{}, worst {nozzle:.2e} / {two_layer:.2e} over {n_tested} + {t_tested} states",
        line.detail
    );
    line
}

#[test]
fn acceptance() {
    // start below the test harness line
    println!();
    let mut lines = Vec::new();
    // printed as they complete, cheapest first
    let mut report = |l: Line| {
        let tag = if l.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: {}", l.name, l.detail);
        lines.push(l);
    };
    report(kernel_suite());
    report(wb_chain());
    report(example4_wb());
    report(riemann());
    report(convergence());
    let (nozzle_wb, dominance) = main_examples();
    report(nozzle_wb);
    report(dominance);
    let failed: Vec<&str> = lines.iter().filter(|l| !l.passed).map(|l| l.name).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}
