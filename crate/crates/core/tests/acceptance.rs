//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N ... PASS|FAIL` line with its measurements and runtime.
//!
//! Run with `cargo test -p delayrate --test acceptance -- --nocapture` to see
//! the lines; runtimes are measured inside each test and compared with the
//! budgets.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use delayrate::bound::{
    build_youla_program, closed_loop_maps, design_for, lower_bound_curve, phi_at_order, snr_and_variance,
    snr_and_variance_shifted, LoopDesign, YoulaOptions, YoulaProgram,
};
use delayrate::info::{directed_info_spectral, gaussian_directed_info_auto};
use delayrate::lqg::{closed_loop, d_inf, solve_dare};
use delayrate::lti::{realize, FrequencyGrid, RationalFilter, TwoByTwoPlant};
use delayrate::sim::{empirical_output_power, operational_run, UniformQuantizer, DEFAULT_MARKOV_ORDER};
use delayrate::sweep::{csv_string, run_sweep, SweepConfig};

const DELAYS: [usize; 5] = [0, 1, 2, 3, 4];

fn report(id: u32, title: &str, passed: bool, detail: &str, elapsed: Duration) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    println!("criterion {id} [{title}]: {verdict} ({:.1} s) {detail}", elapsed.as_secs_f64());
}

fn program(plant: &TwoByTwoPlant, h: usize, n_q: usize) -> (f64, YoulaProgram) {
    let floor = d_inf(plant, h).unwrap();
    let opts = YoulaOptions { grid_size: 1 << 14, n_q, n_q_max: n_q };
    (floor.value, build_youla_program(plant, h, &floor.observer, opts).unwrap())
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

/// Impulse response of `G` by long division of `0.165 z^-2 / (1 - 2.5789 z^-1 + 1.15780 z^-2)`.
fn example_taps(n: usize) -> Vec<f64> {
    let (a1, a2) = (2.0 + 0.5789, -2.0 * 0.5789);
    let mut g = vec![0.0; n];
    for k in 0..n {
        let input = if k == 2 { 0.165 } else { 0.0 };
        let prev1 = if k >= 1 { g[k - 1] } else { 0.0 };
        let prev2 = if k >= 2 { g[k - 2] } else { 0.0 };
        g[k] = input + a1 * prev1 + a2 * prev2;
    }
    g
}

#[test]
fn criterion_1_plant_fidelity() {
    let start = Instant::now();
    let json = r#"{"G11": {"num": [0.165], "den": [1.0, -2.5789, 1.15780]},
                   "G12": {"num": [0.165], "den": [1.0, -2.5789, 1.15780]},
                   "G21": {"num": [0.165], "den": [1.0, -2.5789, 1.15780]},
                   "G22": {"num": [0.165], "den": [1.0, -2.5789, 1.15780]}}"#;
    let parsed: TwoByTwoPlant = serde_json::from_str(json).unwrap();
    let built = TwoByTwoPlant::unstable_example();
    let g = built.g22();
    let den_ok = g.den().len() == 3
        && (g.den()[1] + 2.5789).abs() < 1e-15
        && (g.den()[2] - 2.0 * 0.5789).abs() < 1e-15
        && g.num() == [0.165];
    let mut poles: Vec<f64> = delayrate::lti::linalg::eigenvalues(&realize(g).a).iter().map(|l| l.re).collect();
    poles.sort_by(f64::total_cmp);
    let poles_ok = (poles[0] - 0.5789).abs() < 1e-12 && (poles[1] - 2.0).abs() < 1e-12;
    let same = (0..8).all(|i| {
        let w = i as f64 * 0.4;
        (parsed.g22().response(w) - g.response(w)).norm() < 1e-12
    });
    let unstable = !built.is_open_loop_stable() && !parsed.is_open_loop_stable();
    let elapsed = start.elapsed();
    let passed = den_ok && poles_ok && same && unstable && elapsed < Duration::from_secs(1);
    report(1, "plant fidelity", passed, &format!("poles {poles:?}, open-loop unstable {unstable}"), elapsed);
    assert!(passed);
}

#[test]
fn criterion_2_floor_monotonicity() {
    let start = Instant::now();
    let plant = TwoByTwoPlant::unstable_example();
    let taps = example_taps(16);
    let mut details = Vec::new();
    let mut passed = true;
    let mut last = 0.0;
    for h in DELAYS {
        let floor = d_inf(&plant, h).unwrap();
        let oracle: f64 = taps[2..=3 + h].iter().map(|g| g * g).sum();
        let cl = closed_loop(&plant, h, &floor.controller).unwrap();
        let mc = empirical_output_power(&cl, &[1.0], 1_000_000, 100 + h as u64).unwrap()[0];
        let ok = floor.value > last
            && (floor.value - oracle).abs() < 1e-9 * oracle
            && (mc - floor.value).abs() < 0.01 * floor.value;
        passed &= ok;
        last = floor.value;
        details.push(format!("h={h}: {:.5} (taps {:.5}, MC {:.5})", floor.value, oracle, mc));
    }
    let elapsed = start.elapsed();
    passed &= elapsed < Duration::from_secs(60);
    report(2, "floor monotonicity", passed, &details.join("; "), elapsed);
    assert!(passed);
}

#[test]
fn criterion_3_curve_shape() {
    let start = Instant::now();
    let plant = TwoByTwoPlant::unstable_example();
    let programs: Vec<(f64, YoulaProgram)> = DELAYS.iter().map(|&h| program(&plant, h, 32)).collect();
    let grids: Vec<Vec<f64>> = programs.iter().map(|(floor, _)| log_grid(1.05 * floor, 100.0 * floor, 25)).collect();
    let rates = |prog: &YoulaProgram, ds: &[f64]| -> Vec<f64> {
        lower_bound_curve(prog, ds).into_iter().map(|p| p.unwrap().rate_lower_bits).collect()
    };
    let curves: Vec<Vec<f64>> = programs.iter().zip(&grids).map(|((_, prog), ds)| rates(prog, ds)).collect();
    let monotone = curves.iter().all(|c| c.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    // larger delay needs more rate at the same absolute D (grid of the larger delay)
    let mut dominance = true;
    let mut worst_margin = f64::INFINITY;
    for h in 0..DELAYS.len() - 1 {
        let lower = rates(&programs[h].1, &grids[h + 1]);
        for (a, b) in lower.iter().zip(&curves[h + 1]) {
            worst_margin = worst_margin.min(b - a);
            dominance &= *a <= b + 1e-9;
        }
    }
    let elapsed = start.elapsed();
    let passed = monotone && dominance && elapsed < Duration::from_secs(300);
    let ends: Vec<String> = curves.iter().map(|c| format!("[{:.3}..{:.4}]", c[0], c[24])).collect();
    report(
        3,
        "curve shape",
        passed,
        &format!("monotone {monotone}, ordered in h {dominance} (min margin {worst_margin:.2e} bits), ranges {}", ends.join(" ")),
        elapsed,
    );
    assert!(passed);
}

#[test]
fn criterion_4_stabilization_limit() {
    let start = Instant::now();
    let plant = TwoByTwoPlant::unstable_example();
    let mut rates = Vec::new();
    for h in DELAYS {
        let (floor, prog) = program(&plant, h, 32);
        rates.push(phi_at_order(&prog, 1e6 * floor, 32).unwrap().rate_lower_bits);
    }
    let passed = rates.iter().all(|r| (r - 1.0).abs() <= 0.05);
    report(4, "stabilization limit", passed, &format!("rates at 1e6 x floor: {rates:.6?}"), start.elapsed());
    assert!(passed);
}

/// Operational runs of criterion 5, shared with the bound check of criterion 6.
struct OperationalSummary {
    runs: Vec<(usize, f64, f64, f64, f64)>,
    elapsed: Duration,
}

fn operational_summary() -> &'static OperationalSummary {
    static CELL: OnceLock<OperationalSummary> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let plant = TwoByTwoPlant::unstable_example();
        let mut runs = Vec::new();
        for h in [0usize, 4] {
            let (floor, prog) = program(&plant, h, 32);
            let ds: Vec<f64> = log_grid(1.5, 20.0, 10).iter().map(|m| m * floor).collect();
            for (i, point) in lower_bound_curve(&prog, &ds).into_iter().enumerate() {
                let point = point.unwrap();
                let run = operational_run(&prog, &point, 1_000_000, 1000 + i as u64, DEFAULT_MARKOV_ORDER).unwrap();
                let di = gaussian_directed_info_auto(&run.trace.y, &run.trace.u, h).unwrap();
                runs.push((h, point.d / floor, point.rate_lower_bits, run.point.rate_bits, di.bits()));
            }
        }
        OperationalSummary { runs, elapsed: start.elapsed() }
    })
}

#[test]
fn criterion_5_operational_gap() {
    let summary = operational_summary();
    let gaps: Vec<f64> = summary.runs.iter().map(|r| r.3 - r.2).collect();
    let in_range = gaps.iter().all(|g| (-0.05..=0.6).contains(g));
    let passed = in_range && summary.elapsed < Duration::from_secs(600);
    let (lo, hi) = gaps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), g| (a.min(*g), b.max(*g)));
    report(
        5,
        "operational gap",
        passed,
        &format!("{} runs, gap in [{lo:.3}, {hi:.3}] bits", gaps.len()),
        summary.elapsed,
    );
    assert!(passed);
}

fn random_stable_filter(rng: &mut ChaCha8Rng, order: usize) -> RationalFilter {
    let poles: Vec<f64> = (0..order).map(|_| rng.random_range(-0.85..0.85)).collect();
    let den = RationalFilter::from_roots(1.0, &[], &poles).unwrap().den().to_vec();
    let num: Vec<f64> = (0..=rng.random_range(0..=order)).map(|_| rng.random_range(-2.0..2.0)).collect();
    RationalFilter::new(num, den).unwrap()
}

fn random_design(rng: &mut ChaCha8Rng, plant: &TwoByTwoPlant) -> LoopDesign {
    loop {
        let mut first_order = |offset: f64| {
            let b0 = rng.random_range(-0.5..0.5) + offset;
            let b1 = rng.random_range(-0.5..0.5);
            let a1 = rng.random_range(-0.6..0.6);
            RationalFilter::new(vec![b0, b1], vec![1.0, -a1]).unwrap()
        };
        let (b_r, b_y, j) = (first_order(0.0), first_order(0.0), first_order(1.0));
        let design = LoopDesign::from_filters(b_r, b_y, j, rng.random_range(0.05..5.0), rng.random_range(0..4)).unwrap();
        if closed_loop_maps(plant, &design).unwrap().sys.spectral_radius() < 0.9 {
            return design;
        }
    }
}

fn stable_test_plant() -> TwoByTwoPlant {
    let g = RationalFilter::new(vec![0.5], vec![1.0, -0.7]).unwrap();
    let g11 = RationalFilter::new(vec![1.0, 0.1], vec![1.0, -0.4]).unwrap();
    let g21 = RationalFilter::new(vec![0.3, 0.2], vec![1.0, 0.2]).unwrap();
    TwoByTwoPlant::new(vec![vec![g11]], vec![g.clone()], vec![g21], g).unwrap()
}

/// `½ mean log(S_u / σ_ψ²)` against the Gaussian estimator on two synthetic loops.
fn di_consistency(rng_seed: u64) -> Vec<(f64, f64)> {
    let n = 1_000_000;
    let grid = FrequencyGrid::new(1 << 14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = Vec::new();

    // open: u(k) = 0.6 u(k-1) + 0.8 y(k-2) + ψ(k), y white
    let (var_psi, h) = (0.5, 2);
    let s_u: Vec<f64> = grid
        .omegas()
        .iter()
        .map(|&w| (0.64 + var_psi) / (Complex64::new(1.0, 0.0) - 0.6 * Complex64::from_polar(1.0, -w)).norm_sqr())
        .collect();
    let spectral = directed_info_spectral(&s_u, var_psi, h).unwrap().bits();
    let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut u = vec![0.0; n];
    for k in 0..n {
        let e: f64 = rng.sample::<f64, _>(StandardNormal) * var_psi.sqrt();
        u[k] = e + if k >= 1 { 0.6 * u[k - 1] } else { 0.0 } + if k >= h { 0.8 * y[k - h] } else { 0.0 };
    }
    out.push((spectral, gaussian_directed_info_auto(&y, &u, h).unwrap().bits()));

    // feedback: y(k) = 0.5 y(k-1) + 0.7 u(k-1) + v(k), u(k) = 0.5 y(k-1) + ψ(k)
    let var_psi = 0.3;
    let s_u: Vec<f64> = grid
        .omegas()
        .iter()
        .map(|&w| {
            let z1 = Complex64::from_polar(1.0, -w);
            let num = 0.25 + (Complex64::new(1.0, 0.0) - 0.5 * z1).norm_sqr() * var_psi;
            num / (Complex64::new(1.0, 0.0) - 0.5 * z1 - 0.35 * z1 * z1).norm_sqr()
        })
        .collect();
    let spectral = directed_info_spectral(&s_u, var_psi, 1).unwrap().bits();
    let (mut y, mut u) = (vec![0.0; n], vec![0.0; n]);
    for k in 1..n {
        let v: f64 = rng.sample(StandardNormal);
        let e: f64 = rng.sample::<f64, _>(StandardNormal) * var_psi.sqrt();
        y[k] = 0.5 * y[k - 1] + 0.7 * u[k - 1] + v;
        u[k] = 0.5 * y[k - 1] + e;
    }
    out.push((spectral, gaussian_directed_info_auto(&y, &u, 1).unwrap().bits()));
    out
}

#[test]
fn criterion_6_oracle_suites() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut lines = Vec::new();

    let h2_worst = (0..100)
        .map(|_| {
            let order = rng.random_range(1..=4);
            let sys = realize(&random_stable_filter(&mut rng, order));
            let taps: f64 = sys.impulse_response(3000).iter().map(|g| g[(0, 0)].powi(2)).sum();
            (sys.h2_norm_sq().unwrap() - taps).abs() / (1.0 + taps)
        })
        .fold(0.0, f64::max);
    let h2_ok = h2_worst <= 1e-9;
    lines.push(format!("H2 {h2_worst:.1e}"));

    let plant = stable_test_plant();
    let grid = FrequencyGrid::new(1 << 14).unwrap();
    let mut eq_worst: f64 = 0.0;
    let mut scale_worst: f64 = 0.0;
    for _ in 0..50 {
        let design = random_design(&mut rng, &plant);
        let a = snr_and_variance(&plant, &design).unwrap();
        let b = snr_and_variance_shifted(&plant, &design, &grid).unwrap();
        eq_worst = eq_worst
            .max((a.snr - b.snr).abs() / (1.0 + a.snr))
            .max((a.sigma_z_sq - b.sigma_z_sq).abs() / (1.0 + a.sigma_z_sq));
        for alpha in [0.1, 1.0, 3.7, 10.0] {
            let s = snr_and_variance(&plant, &design.scaled(alpha).unwrap()).unwrap();
            scale_worst = scale_worst
                .max((a.snr - s.snr).abs() / (1.0 + a.snr))
                .max((a.sigma_z_sq - s.sigma_z_sq).abs() / (1.0 + a.sigma_z_sq));
        }
    }
    let example = TwoByTwoPlant::unstable_example();
    let (floor, prog) = program(&example, 2, 32);
    let point = phi_at_order(&prog, 3.0 * floor, 32).unwrap();
    let design = design_for(&prog, &point).unwrap();
    let base = snr_and_variance(&example, &design).unwrap();
    let mut example_worst: f64 = 0.0;
    for alpha in [0.1, 10.0] {
        let s = snr_and_variance(&example, &design.scaled(alpha).unwrap()).unwrap();
        example_worst = example_worst
            .max((base.snr - s.snr).abs() / (1.0 + base.snr))
            .max((base.sigma_z_sq - s.sigma_z_sq).abs() / (1.0 + base.sigma_z_sq));
    }
    let eq_ok = eq_worst <= 1e-8;
    // the gate is on filter designs; the whitened state-space design is
    // reported only, its realization carries copies of the unstable mode
    let scale_ok = scale_worst <= 1e-10;
    lines.push(format!(
        "closed-form vs state-space {eq_worst:.1e}, scaling {scale_worst:.1e} (whitened example design {example_worst:.1e}, not gated)"
    ));

    let mut dare_worst: f64 = 0.0;
    let mut solved = 0;
    while solved < 100 {
        let a = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.5..1.5));
        let b = DMatrix::from_fn(3, 1, |_, _| rng.random_range(-1.0..1.0));
        let q = DMatrix::identity(3, 3) * rng.random_range(0.1..10.0);
        let r = DMatrix::from_element(1, 1, rng.random_range(0.01..10.0));
        if let Ok(sol) = solve_dare(&a, &b, &q, &r) {
            dare_worst = dare_worst.max(sol.residual);
            solved += 1;
        }
    }
    let dare_ok = dare_worst <= 1e-9;
    lines.push(format!("DARE {dare_worst:.1e}"));

    let step = 0.5;
    let quantizer = UniformQuantizer::new(step, true, 61).unwrap();
    let mut dither_rng = ChaCha8Rng::seed_from_u64(61);
    let n = 1_000_000;
    let err_var = (0..n)
        .map(|_| {
            let t: f64 = rng.sample(StandardNormal);
            let d = quantizer.draw_dither(&mut dither_rng);
            let (_, recon) = quantizer.quantize(t, d);
            (recon - t).powi(2)
        })
        .sum::<f64>()
        / n as f64;
    let q_ok = (err_var / (step * step / 12.0) - 1.0).abs() < 0.02;
    lines.push(format!("quantizer error variance {err_var:.6} vs {:.6}", step * step / 12.0));

    let di = di_consistency(66);
    let di_ok = di.iter().all(|(s, e)| (s - e).abs() < 0.05);
    lines.push(format!("DI spectral vs empirical {di:.4?}"));

    let summary = operational_summary();
    let bound_ok = summary.runs.iter().all(|r| r.3 >= r.4 - 0.05);
    let worst = summary.runs.iter().map(|r| r.3 - r.4).fold(f64::INFINITY, f64::min);
    lines.push(format!("entropy minus DI over {} runs >= {worst:.3}", summary.runs.len()));

    let passed = h2_ok && eq_ok && scale_ok && dare_ok && q_ok && di_ok && bound_ok;
    report(6, "oracle suites", passed, &lines.join("; "), start.elapsed());
    assert!(passed, "H2 {h2_ok} eq {eq_ok} scale {scale_ok} dare {dare_ok} quantizer {q_ok} di {di_ok} bound {bound_ok}");
}

#[test]
fn criterion_7_determinism() {
    let start = Instant::now();
    let cfg = SweepConfig::from_json(
        r#"{"delays": [0, 3], "d_grid": {"min_multiplier": 1.5, "max_multiplier": 30.0, "count": 4},
            "solver": {"grid_size": 8192, "n_q": 32, "n_q_max": 32},
            "simulation": {"enabled": true, "steps": 50000, "seed": 77, "markov_order": 1}}"#,
    )
    .unwrap();
    let first = csv_string(&run_sweep(&cfg).unwrap()).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let second = pool.install(|| csv_string(&run_sweep(&cfg).unwrap()).unwrap());
    let passed = first == second && first.lines().count() == 9;
    report(7, "determinism", passed, &format!("{} CSV bytes identical: {}", first.len(), first == second), start.elapsed());
    assert!(passed);
}
