//! Acceptance suite. Runs as a plain binary so that every criterion prints one
//! PASS/FAIL line; the process exits non-zero if any criterion fails.
//!
//! Run alone with `cargo test --release --test acceptance`.

use std::path::{Path as FsPath, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use magnav::entropy::{entropy_map, select_low_entropy_points, EntropyConfig, WeightGuard};
use magnav::grid::{load_grid, save_grid, synth_map, GridError, GridField, Unit};
use magnav::harness::{
    follow_path, plan_for, reference_spec, run_with_maps, summarize, ExperimentConfig, HarnessError, Maps, Mode,
    Termination, TrajectoryLog,
};
use magnav::localization::{MotionNoise, ParticleSet, SensorNoise};
use magnav::planner::{descent_direction, entropy_potential, goal_weight, plan_with_points, PlannerConfig};
use magnav::vehicle::{measure, step_truth};
use magnav::{Control, EntropyPoint, Path, Pose, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;
type TransformCase<'a> = (&'a str, &'a GridField<f64>, &'a [(f64, f64)]);
type ErrorCase = (&'static str, fn(&GridError) -> bool);

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "entropy oracle equivalence",
            limit: Some(Duration::from_secs(5)),
            run: oracle_equivalence,
        },
        Criterion { id: 2, name: "entropy bounds and extremes", limit: None, run: bounds_and_extremes },
        Criterion {
            id: 3,
            name: "gradient-information correlation",
            limit: Some(Duration::from_secs(5)),
            run: gradient_correlation,
        },
        Criterion { id: 4, name: "affine invariance", limit: None, run: affine_invariance },
        Criterion { id: 5, name: "planner sanity", limit: None, run: planner_sanity },
        Criterion { id: 6, name: "yaw invariance", limit: None, run: yaw_invariance },
        Criterion {
            id: 7,
            name: "covariance contrast",
            limit: Some(Duration::from_secs(60)),
            run: covariance_contrast,
        },
        Criterion {
            id: 8,
            name: "end-to-end ordering",
            limit: Some(Duration::from_secs(120)),
            run: end_to_end_ordering,
        },
        Criterion { id: 9, name: "filter consistency", limit: None, run: filter_consistency },
        Criterion { id: 10, name: "CLI determinism", limit: None, run: cli_determinism },
        Criterion { id: 11, name: "format fidelity", limit: None, run: format_fidelity },
    ];
    let mut failed = 0;
    for c in &criteria {
        let t0 = Instant::now();
        let mut outcome = std::panic::catch_unwind(c.run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = t0.elapsed();
        if let (Ok(detail), Some(limit)) = (&outcome, c.limit) {
            if elapsed > limit {
                outcome = Err(format!("{detail}; runtime exceeds {} s", limit.as_secs()));
            }
        }
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {}: {detail} [{:.2} s]", c.id, c.name, elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn reference_config() -> ExperimentConfig {
    ExperimentConfig::default()
}

// ---------------------------------------------------------------- 1

/// Bins by explicit coordinate ranges, min-max normalizes, floors and sums
/// `-p log2 p` per window.
fn brute_force_entropy(f: &GridField<f64>, bin: f64, r: usize, floor: f64) -> Vec<f64> {
    let centers = |n: usize, d: f64| (0..n).map(|i| (i as f64 + 0.5) * d).collect::<Vec<_>>();
    let (cx, cy) = (centers(f.nx(), f.dx()), centers(f.ny(), f.dy()));
    let count = |c: &[f64]| c.iter().map(|v| (v / bin).floor() as usize).max().unwrap() + 1;
    let (nbx, nby) = (count(&cx), count(&cy));
    let mut bins = vec![0.0; nbx * nby];
    for by in 0..nby {
        for bx in 0..nbx {
            let (lx, hx) = (bx as f64 * bin, (bx + 1) as f64 * bin);
            let (ly, hy) = (by as f64 * bin, (by + 1) as f64 * bin);
            let mut cells = Vec::new();
            for (iy, &y) in cy.iter().enumerate() {
                for (ix, &x) in cx.iter().enumerate() {
                    if x >= lx && x < hx && y >= ly && y < hy {
                        cells.push(f.value(ix, iy));
                    }
                }
            }
            bins[by * nbx + bx] = cells.iter().sum::<f64>() / cells.len() as f64;
        }
    }
    let lo = bins.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = bins.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    for j in 0..=nby - r {
        for i in 0..=nbx - r {
            let mut m = Vec::new();
            for b in j..j + r {
                for a in i..i + r {
                    m.push(((bins[b * nbx + a] - lo) / (hi - lo)).max(floor));
                }
            }
            let total: f64 = m.iter().sum();
            out.push(m.iter().map(|v| v / total).map(|p| -p * p.ln() / std::f64::consts::LN_2).sum());
        }
    }
    out
}

fn random_map(rng: &mut ChaCha8Rng, n: usize, dx: f64) -> GridField<f64> {
    let (x0, y0) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
    if rng.random_bool(0.5) {
        let (a, b) = (rng.random_range(0.5..4.0), rng.random_range(0.5..4.0));
        GridField::<f64>::from_fn(x0, y0, dx, dx, n, n, Unit::Nanotesla, |x, y| {
            45_000.0 + 2_000.0 * (a * x).sin() * (b * y).cos()
        })
        .unwrap()
    } else {
        let values = (0..n * n).map(|_| rng.random_range(40_000.0..60_000.0)).collect();
        GridField::<f64>::new(x0, y0, dx, dx, n, n, values, Unit::Nanotesla).unwrap()
    }
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let f = random_map(&mut rng, 20, 0.1);
        let (bin, r) = [(0.2, 2), (0.1, 2), (0.2, 3), (0.3, 2), (0.1, 4)][k % 5];
        let cfg = EntropyConfig::new(bin, r);
        let e = entropy_map(&f, &cfg).map_err(|e| e.to_string())?;
        let o = brute_force_entropy(&f, bin, r, cfg.probability_floor);
        if o.len() != e.values().len() {
            return Err(format!("grid {k}: {} windows vs oracle {}", e.values().len(), o.len()));
        }
        worst = e.values().iter().zip(&o).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    ensure(worst < 1e-9, format!("50 grids, max abs error {worst:.3e} (limit 1e-9)"))
}

// ---------------------------------------------------------------- 2

fn bounds_and_extremes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut windows = 0;
    for k in 0..60 {
        let r = 2 + k % 3;
        let f = random_map(&mut rng, 16, 0.1);
        let e = entropy_map(&f, &EntropyConfig::new(0.1, r)).map_err(|e| e.to_string())?;
        let hmax = ((r * r) as f64).log2();
        if let Some(h) = e.values().iter().find(|h| !(**h >= 0.0 && **h <= hmax)) {
            return Err(format!("window value {h} outside [0, {hmax}]"));
        }
        windows += e.values().len();
    }

    // 8x8 bins of 0.1 m: a flat plateau in the west, a ramp in the east.
    let plateau = GridField::<f64>::from_fn(0.0, 0.0, 0.1, 0.1, 8, 8, Unit::Nanotesla, |x, _| {
        if x < 0.35 {
            48_000.0
        } else {
            48_000.0 + 1_000.0 * x
        }
    })
    .unwrap();
    let mut uniform_err = 0.0f64;
    for r in 2..=3 {
        let e = entropy_map(&plateau, &EntropyConfig::new(0.1, r)).unwrap();
        let hmax = ((r * r) as f64).log2();
        for j in 0..e.ny() {
            for i in 0..=4 - r {
                uniform_err = uniform_err.max((e.value(i, j) - hmax).abs());
            }
        }
    }

    // One bin at the maximum, all others at the minimum.
    let spike = GridField::<f64>::from_fn(0.0, 0.0, 0.1, 0.1, 6, 6, Unit::Nanotesla, |x, y| {
        if (x - 0.2).abs() < 1e-9 && (y - 0.3).abs() < 1e-9 {
            50_000.0
        } else {
            45_000.0
        }
    })
    .unwrap();
    let e = entropy_map(&spike, &EntropyConfig::new(0.1, 2)).unwrap();
    let delta: Vec<f64> = [(1, 2), (2, 2), (1, 3), (2, 3)].iter().map(|&(i, j)| e.value(i, j)).collect();
    let delta_max = delta.iter().cloned().fold(0.0, f64::max);

    ensure(
        uniform_err < 1e-12 && delta_max < 1e-6,
        format!(
            "{windows} random windows in bounds; uniform windows off the maximum by {uniform_err:.1e} (limit 1e-12); \
             near-delta windows at most {delta_max:.2e} bits (limit 1e-6)"
        ),
    )
}

// ---------------------------------------------------------------- 3

fn gradient_correlation() -> Outcome {
    let maps = Maps::build(&reference_config()).map_err(|e| e.to_string())?;
    let pts = select_low_entropy_points(&maps.entropy, 5.0, 64, &WeightGuard::default());
    if pts.is_empty() {
        return Err("no 5-sigma points selected".into());
    }
    let g = maps.magnetic.gradient_magnitudes();
    let map_mean = g.iter().sum::<f64>() / g.len() as f64;
    let at_points =
        pts.iter().map(|p| maps.magnetic.gradient_at(p.x, p.y).unwrap().norm()).sum::<f64>() / pts.len() as f64;
    let ratio = at_points / map_mean;
    ensure(
        ratio >= 2.0,
        format!(
            "{} points, mean |grad| {at_points:.0} vs map {map_mean:.0} nT/m, ratio {ratio:.2} (need >= 2)",
            pts.len()
        ),
    )
}

// ---------------------------------------------------------------- 4

fn affine_invariance() -> Outcome {
    let cfg = EntropyConfig::new(0.2, 2);
    let guard = WeightGuard::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // Values on a 1/64 nT lattice, so every transform below is exact.
    let lattice = GridField::<f64>::from_fn(0.0, 0.0, 0.05, 0.05, 60, 44, Unit::Nanotesla, |_, _| {
        (rng.random_range(40_000.0..60_000.0f64) * 64.0).round() / 64.0
    })
    .unwrap();
    let reference = synth_map(&reference_spec()).unwrap();
    let cases: [TransformCase; 2] = [
        ("lattice map", &lattice, &[(3.0, 0.0), (0.75, -45_000.0), (1000.0, 12_345.5), (0.125, 1e6), (5.0, -2.5e5)]),
        ("reference map", &reference, &[(2.0, 0.0), (0.5, 1024.0), (1.0, -16_384.0), (0.25, 1024.0)]),
    ];
    let mut exact = 0;
    for (label, f, transforms) in cases {
        let e0 = entropy_map(f, &cfg).unwrap();
        let p0 = select_low_entropy_points(&e0, 5.0, 64, &guard);
        for &(a, b) in transforms {
            let g = f.map_values(|v| a * v + b, Unit::Nanotesla).unwrap();
            if !f.values().iter().zip(g.values()).all(|(v, w)| (w - b) / a == *v) {
                return Err(format!("{label}: transform ({a}, {b}) is not exact on the input"));
            }
            let e = entropy_map(&g, &cfg).unwrap();
            if e != e0 {
                return Err(format!("{label}: entropy map changed under z -> {a} z + {b}"));
            }
            if select_low_entropy_points(&e, 5.0, 64, &guard) != p0 {
                return Err(format!("{label}: point set changed under z -> {a} z + {b}"));
            }
            exact += 1;
        }
    }
    // Transforms that round the input itself cannot be bit-exact; the selected
    // locations must still agree.
    let e0 = entropy_map(&reference, &cfg).unwrap();
    let p0 = select_low_entropy_points(&e0, 5.0, 64, &guard);
    let mut worst = 0.0f64;
    for (a, b) in [(1.7, -123.4), (1e-9, 0.0), (3.3, 7.1)] {
        let e = entropy_map(&reference.map_values(|v| a * v + b, Unit::Nanotesla).unwrap(), &cfg).unwrap();
        worst = e.values().iter().zip(e0.values()).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
        let p = select_low_entropy_points(&e, 5.0, 64, &guard);
        if p.len() != p0.len() || p.iter().zip(&p0).any(|(u, v)| (u.x, u.y) != (v.x, v.y)) {
            return Err(format!("point locations changed under rounded transform ({a}, {b})"));
        }
    }
    Ok(format!(
        "{exact} exact transforms bit-identical with identical point sets; rounded transforms keep point locations, \
         max |dH| {worst:.1e}"
    ))
}

// ---------------------------------------------------------------- 5

fn planner_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = PlannerConfig::default();
    let mut worst_len = 0.0f64;
    for _ in 0..100 {
        let s = Vec2::<f64>::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let g = Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let d = s.distance(g);
        if d < 0.5 {
            continue;
        }
        let r = plan_with_points(s, g, &[], &cfg).map_err(|e| e.to_string())?;
        worst_len = worst_len.max((r.path.length() - d).abs() / d);
    }
    let mut worst_angle = 0.0f64;
    for _ in 0..100 {
        let q = Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let goal = Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let pts: Vec<EntropyPoint<f64>> = (0..rng.random_range(0..8))
            .map(|_| EntropyPoint {
                x: rng.random_range(-3.0..3.0),
                y: rng.random_range(-3.0..3.0),
                entropy: 0.5,
                weight: rng.random_range(0.1..100.0),
            })
            .collect();
        let w = goal_weight(q.distance(goal), cfg.rho_floor);
        let u = |p: Vec2<f64>| 0.5 * w * p.distance(goal) + entropy_potential(p, &pts);
        let h = 1e-6;
        let fd = Vec2::new(
            -(u(Vec2::new(q.x + h, q.y)) - u(Vec2::new(q.x - h, q.y))) / (2.0 * h),
            -(u(Vec2::new(q.x, q.y + h)) - u(Vec2::new(q.x, q.y - h))) / (2.0 * h),
        );
        let d = descent_direction(q, goal, &pts, cfg.rho_floor);
        worst_angle = worst_angle.max(d.cross(fd).atan2(d.dot(fd)).abs());
    }
    ensure(
        worst_len < 0.01 && worst_angle < 1e-6,
        format!(
            "worst length excess {:.3}% (limit 1%), worst angle {worst_angle:.1e} rad (limit 1e-6)",
            100.0 * worst_len
        ),
    )
}

// ---------------------------------------------------------------- 6

fn yaw_invariance() -> Outcome {
    let cfg = reference_config();
    let maps = Maps::build(&cfg).map_err(|e| e.to_string())?;
    let with_yaw = |deg: f64, seed: u64| {
        let mut c = cfg.clone();
        c.start.theta = deg.to_radians();
        c.seed = seed;
        c
    };
    let p60 = plan_for(&with_yaw(60.0, 0), &maps).map_err(|e| e.to_string())?;
    let p90 = plan_for(&with_yaw(90.0, 0), &maps).map_err(|e| e.to_string())?;
    if p60 != p90 {
        return Err("planned paths differ between 60 and 90 degrees".into());
    }
    let divergence: Vec<f64> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let a = run_with_maps(&with_yaw(60.0, seed), &maps).unwrap();
            let b = run_with_maps(&with_yaw(90.0, seed), &maps).unwrap();
            let n = a.log.rows.len().min(b.log.rows.len());
            (100..n)
                .map(|k| a.log.rows[k].truth.position().distance(b.log.rows[k].truth.position()))
                .fold(0.0, f64::max)
        })
        .collect();
    let worst = divergence.iter().cloned().fold(0.0, f64::max);
    ensure(
        worst < 0.2,
        format!("plans bit-identical; max truth divergence after step 100 over 20 seeds {worst:.3} m (limit 0.2)"),
    )
}

// ---------------------------------------------------------------- 7

fn covariance_contrast() -> Outcome {
    let cfg = ExperimentConfig { arrival_tolerance: 0.1, ..reference_config() };
    let maps = Maps::build(&cfg).map_err(|e| e.to_string())?;
    // Along the steep northern margin versus through the flat southern corridor.
    let high = Path::new(vec![Vec2::new(-2.0, 1.1), Vec2::new(0.2, 1.1)]);
    let flat = Path::new(vec![Vec2::new(-2.4, -0.9), Vec2::new(-0.2, -0.7)]);
    let mean_cov = |path: &Path<f64>, seed: u64| {
        let (a, b) = (path.points[0], path.points[1]);
        let c = ExperimentConfig { start: Pose::new(a.x, a.y, (b - a).heading()), goal: b, seed, ..cfg.clone() };
        let (log, _) = follow_path(&c, &maps, path).unwrap();
        summarize(&log, b, c.arrival_tolerance).unwrap().mean_cov_det
    };
    let ratios: Vec<f64> = (0..20u64).into_par_iter().map(|s| mean_cov(&flat, s) / mean_cov(&high, s)).collect();
    let hits = ratios.iter().filter(|r| **r >= 5.0).count();
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure(hits >= 18, format!("{hits}/20 pairs with flat/high cov_det >= 5 (need 18), smallest ratio {lo:.1}"))
}

// ---------------------------------------------------------------- 8

fn end_to_end_ordering() -> Outcome {
    let cfg = reference_config();
    let maps = Maps::build(&cfg).map_err(|e| e.to_string())?;
    let runs: Vec<_> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            [Mode::EntropyPlanner, Mode::StraightLine].map(|mode| {
                let c = ExperimentConfig { seed, mode, ..cfg.clone() };
                let r = run_with_maps(&c, &maps).unwrap();
                (summarize(&r.log, c.goal, c.arrival_tolerance).unwrap(), r.termination)
            })
        })
        .collect();
    let wins = runs.iter().filter(|[e, s]| e.0.mean_cov_det < s.0.mean_cov_det).count();
    let reached = |k: usize| runs.iter().filter(|r| r[k].1 == Termination::ReachedGoal).count();
    let (re, rs) = (reached(0), reached(1));
    let lower_median = runs.iter().filter(|[e, s]| e.0.median_entropy < s.0.median_entropy).count();
    ensure(
        wins >= 16 && re >= 19 && rs >= 19,
        format!(
            "entropy planner lower mean cov_det in {wins}/20 (need 16); reached goal {re}/20 and {rs}/20 (need 19 each); \
             lower median entropy in {lower_median}/20"
        ),
    )
}

// ---------------------------------------------------------------- 9

fn filter_consistency() -> Outcome {
    let map = GridField::<f64>::from_fn(-2.0, -2.0, 0.05, 0.05, 81, 81, Unit::Nanotesla, |x, y| {
        45_000.0 + 3_000.0 * (4.0 * x).sin() + 3_000.0 * (5.0 * y).cos()
    })
    .unwrap();
    let q = MotionNoise::new(0.01, 0.01, 0.01745f64.to_radians());
    let r = SensorNoise { sigma: 100.0 };
    let (mut se_pf, mut se_dr, mut n) = (0.0, 0.0, 0usize);
    let mut pf_better = 0;
    for seed in 0..50u64 {
        let start = Pose::new(-0.5, -0.3, 0.4);
        let mut truth = start;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pf = ParticleSet::init(start, &q, 500, seed + 1000).unwrap();
        let mut dr = ParticleSet::init(start, &q, 500, seed + 1000).unwrap();
        let u = Control::new(0.15, 0.2);
        let (mut run_pf, mut run_dr) = (0.0, 0.0);
        for _ in 0..20 {
            truth = step_truth(&truth, u, 0.1, &q, &mut rng);
            pf.predict(u, 0.1, &q);
            dr.predict(u, 0.1, &q);
            let z = measure(&map, &truth, &r, &mut rng).unwrap();
            pf.update_weights(z, &map, &r);
            pf.resample(0.5);
            let e_pf = pf.estimate().mean.position().distance(truth.position()).powi(2);
            let e_dr = dr.estimate().mean.position().distance(truth.position()).powi(2);
            run_pf += e_pf;
            run_dr += e_dr;
            n += 1;
        }
        se_pf += run_pf;
        se_dr += run_dr;
        if run_pf < run_dr {
            pf_better += 1;
        }
    }
    let (rms_pf, rms_dr) = ((se_pf / n as f64).sqrt(), (se_dr / n as f64).sqrt());
    ensure(
        rms_pf < rms_dr,
        format!("RMS position error {rms_pf:.4} m filtered vs {rms_dr:.4} m dead reckoning; filter better in {pf_better}/50 runs"),
    )
}

// ---------------------------------------------------------------- 10, 11

fn magnav(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_magnav")).args(args).output().expect("binary runs")
}

fn s(p: &FsPath) -> &str {
    p.to_str().unwrap()
}

/// Runs every subcommand in `dir` and returns (file name, bytes) for every output.
fn cli_pass(dir: &FsPath) -> Result<Vec<(String, Vec<u8>)>, String> {
    let p = |name: &str| dir.join(name);
    std::fs::write(p("cfg.txt"), "seed = 3\nmax_steps = 300\n").unwrap();
    let steps: [Vec<String>; 5] = [
        vec!["synth".into(), "--reference".into(), "--out".into(), s(&p("map.csv")).into()],
        vec![
            "entropy".into(),
            "--in".into(),
            s(&p("map.csv")).into(),
            "--out".into(),
            s(&p("emap.csv")).into(),
            "--points".into(),
            s(&p("pts.csv")).into(),
        ],
        vec!["entropy".into(), "--in".into(), s(&p("map.csv")).into(), "--out".into(), s(&p("emap2.csv")).into()],
        vec![
            "plan".into(),
            "--map".into(),
            s(&p("map.csv")).into(),
            "--out".into(),
            s(&p("path.csv")).into(),
            "--meta".into(),
            s(&p("meta.txt")).into(),
        ],
        vec![
            "simulate".into(),
            "--config".into(),
            s(&p("cfg.txt")).into(),
            "--mode".into(),
            "straight_line".into(),
            "--out".into(),
            s(&p("traj.csv")).into(),
        ],
    ];
    let mut outputs = Vec::new();
    for (k, args) in steps.iter().enumerate() {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = magnav(&args);
        if !out.status.success() {
            return Err(format!("`{}` failed: {}", args[0], String::from_utf8_lossy(&out.stderr)));
        }
        outputs.push((format!("stdout {k}"), out.stdout));
    }
    let mut names: Vec<String> =
        std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    for name in names {
        outputs.push((name.clone(), std::fs::read(dir.join(&name)).unwrap()));
    }
    Ok(outputs)
}

fn cli_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (oa, ob) = (cli_pass(a.path())?, cli_pass(b.path())?);
    if oa.len() != ob.len() {
        return Err("different output sets".into());
    }
    for ((na, da), (nb, db)) in oa.iter().zip(&ob) {
        if na != nb || da != db {
            return Err(format!("{na} differs between invocations"));
        }
    }
    let bytes: usize = oa.iter().map(|(_, d)| d.len()).sum();
    Ok(format!("synth, entropy, plan and simulate: {} outputs ({bytes} bytes) byte-identical", oa.len()))
}

fn listing(dir: &FsPath) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn format_fidelity() -> Outcome {
    // Grid round trips.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut grids = vec![synth_map(&reference_spec()).unwrap()];
    for _ in 0..20 {
        let nx = rng.random_range(2..30);
        let ny = rng.random_range(2..30);
        let values =
            (0..nx * ny).map(|_| rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-300..300))).collect();
        grids.push(
            GridField::<f64>::new(
                rng.random_range(-1e3..1e3),
                rng.random::<f64>(),
                0.1 + rng.random::<f64>(),
                1e-3,
                nx,
                ny,
                values,
                Unit::Bits,
            )
            .unwrap(),
        );
    }
    for g in &grids {
        let text = save_grid(g);
        let back = load_grid::<f64>(&text).map_err(|e| e.to_string())?;
        if &back != g || save_grid(&back) != text {
            return Err("grid-CSV round trip is not exact".into());
        }
    }

    // Trajectory round trip on a short closed-loop run.
    let cfg = ExperimentConfig { max_steps: 150, ..reference_config() };
    let maps = Maps::build(&cfg).unwrap();
    let log = run_with_maps(&cfg, &maps).unwrap().log;
    let text = log.to_csv();
    if TrajectoryLog::from_csv(&text).map_err(|e| e.to_string())? != log {
        return Err("trajectory CSV round trip is not exact".into());
    }

    // Malformed grids map to their error classes.
    let good = "# grid x0=0 y0=0 dx=1 dy=1 nx=2 ny=2 unit=nT\n1,2\n3,4\n";
    let cases: [ErrorCase; 5] = [
        ("# grid x0=0 y0=0 dx=1 nx=2 ny=2\n1,2\n3,4\n", |e| matches!(e, GridError::MalformedHeader { line: 1, .. })),
        ("# grid x0=0 y0=0 dx=1 dy=1 nx=2 ny=2\n1,2\n3,4,5\n", |e| {
            matches!(e, GridError::RaggedRow { line: 3, expected: 2, found: 3 })
        }),
        ("# grid x0=0 y0=0 dx=1 dy=1 nx=2 ny=2\n1,NaN\n3,4\n", |e| {
            matches!(e, GridError::NonFiniteEntry { line: 2, column: 2 })
        }),
        ("# grid x0=0 y0=0 dx=1 dy=1 nx=2 ny=2\n1,2\n3,x\n", |e| {
            matches!(e, GridError::BadNumber { line: 3, column: 2, .. })
        }),
        ("# grid x0=0 y0=0 dx=1 dy=1 nx=2 ny=3\n1,2\n3,4\n", |e| matches!(e, GridError::RowCount { .. })),
    ];
    load_grid::<f64>(good).map_err(|e| e.to_string())?;
    for (text, class) in cases {
        match load_grid::<f64>(text) {
            Err(e) if class(&e) => {}
            other => return Err(format!("unexpected result {other:?} for {text:?}")),
        }
    }
    if !matches!(TrajectoryLog::from_csv("step,t\n"), Err(HarnessError::Trajectory { line: 1, .. })) {
        return Err("bad trajectory header accepted".into());
    }

    // CLI error paths: exit codes and no partial files.
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.csv"), cases[1].0).unwrap();
    std::fs::write(d.join("map.csv"), save_grid(&grids[0])).unwrap();
    let before = listing(d);
    let checks: [(Vec<String>, i32); 5] = [
        (
            vec![
                "entropy".into(),
                "--in".into(),
                s(&d.join("bad.csv")).into(),
                "--out".into(),
                s(&d.join("e.csv")).into(),
                "--points".into(),
                s(&d.join("p.csv")).into(),
            ],
            2,
        ),
        (
            vec![
                "plan".into(),
                "--map".into(),
                s(&d.join("map.csv")).into(),
                "--goal".into(),
                "9,9".into(),
                "--out".into(),
                s(&d.join("path.csv")).into(),
                "--meta".into(),
                s(&d.join("m.txt")).into(),
            ],
            2,
        ),
        (
            vec![
                "simulate".into(),
                "--config".into(),
                s(&d.join("missing.txt")).into(),
                "--out".into(),
                s(&d.join("t.csv")).into(),
            ],
            2,
        ),
        (
            vec![
                "synth".into(),
                "--spec".into(),
                s(&d.join("map.csv")).into(),
                "--out".into(),
                s(&d.join("g.csv")).into(),
            ],
            2,
        ),
        (vec!["teleport".into()], 1),
    ];
    for (args, code) in &checks {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = magnav(&args);
        if out.status.code() != Some(*code) {
            return Err(format!("`{}` exited with {:?}, expected {code}", args[0], out.status.code()));
        }
        if listing(d) != before {
            return Err(format!("`{}` left files behind", args[0]));
        }
    }
    Ok(format!("{} grids and one trajectory round-trip exactly; 5 malformed grids classified; 5 CLI error paths exit 2/1 with no files written", grids.len()))
}
