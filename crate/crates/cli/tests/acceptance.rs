//! End-to-end acceptance gate. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::Matrix2;
use pathfollow::adp::{
    rank_check, ActorWeights, BasisKind, BasisVector, ControlProblem, CriticWeights,
};
use pathfollow::baseline::{compare_trajectories, solve_collocation_from, InitialGuess};
use pathfollow::dynamics::{drift_f, input_g, phi_rate, virtual_target_rate, ErrorState};
use pathfollow::geometry::{frenet_error, world_from_frenet, wrap_angle, FrameOffset, PathSpec};
use pathfollow::sim::{
    frenet_world_consistency, rk4_step, run_simulation, Scenario, SimConfig, TrajectoryLog,
};
use pathfollow_cli::{RunConfig, TRAJECTORY_CSV};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Gate {
    failures: usize,
}

impl Gate {
    fn check(&mut self, id: &str, title: &str, ok: bool, detail: String) {
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("[{tag}] {id:>2} {title}: {detail}");
        if !ok {
            self.failures += 1;
        }
    }
}

fn max_late_error(log: &TrajectoryLog, after: f64) -> f64 {
    log.records
        .iter()
        .filter(|r| r.t > after)
        .map(|r| r.zeta.e().norm())
        .fold(0.0, f64::max)
}

fn weight_drift(log: &TrajectoryLog, window_start: f64) -> f64 {
    let tail: Vec<_> = log.records.iter().filter(|r| r.t >= window_start).collect();
    let mut worst = 0.0f64;
    for i in 0..9 {
        for get in [
            |r: &&pathfollow::sim::LogRecord, i: usize| r.wc[i],
            |r: &&pathfollow::sim::LogRecord, i: usize| r.wa[i],
        ] {
            let hi = tail.iter().map(|r| get(r, i)).fold(f64::MIN, f64::max);
            let lo = tail.iter().map(|r| get(r, i)).fold(f64::MAX, f64::min);
            worst = worst.max(hi - lo);
        }
    }
    worst
}

fn random_state(rng: &mut ChaCha8Rng) -> ErrorState {
    ErrorState {
        s: rng.random_range(-2.0..2.0),
        y: rng.random_range(-2.0..2.0),
        theta: rng.random_range(-PI..PI),
        phi: rng.random_range(-0.95..0.95),
    }
}

fn rel_err(numeric: f64, analytic: f64) -> f64 {
    let scale = numeric.abs().max(analytic.abs());
    if scale == 0.0 {
        0.0
    } else {
        (numeric - analytic).abs() / scale
    }
}

fn main() -> ExitCode {
    let mut gate = Gate { failures: 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let cfg = RunConfig::default();
    let scenario = cfg.scenario();
    let mut phi_ok = true;

    // 1. reference scenario
    let start = Instant::now();
    let run = run_simulation(&scenario, &cfg.sim);
    let elapsed = start.elapsed().as_secs_f64();
    let log = match run {
        Ok(log) => log,
        Err(abort) => {
            gate.check(
                "1",
                "reference scenario convergence",
                false,
                abort.to_string(),
            );
            abort.log
        }
    };
    let completed = log
        .last()
        .is_some_and(|r| (r.t - cfg.sim.duration).abs() < 1e-9);
    let late = max_late_error(&log, 50.0);
    let drift = weight_drift(&log, cfg.sim.duration - 6.0);
    gate.check(
        "1",
        "reference scenario convergence",
        completed && late <= 0.1 && drift < 1e-3 && elapsed < 10.0,
        format!("max |e| for t > 50 s = {late:.4} (<= 0.1), weight drift over last 6 s = {drift:.2e} (< 1e-3), runtime {elapsed:.2} s (< 10 s)"),
    );
    phi_ok &= log.records.iter().all(|r| r.zeta.phi.abs() < 1.0);

    // 2. near-optimality against the collocation baseline
    let start = Instant::now();
    let problem = cfg.collocation();
    let p = &scenario.problem;
    let baseline = InitialGuess::from_log(&log, &problem)
        .and_then(|g| solve_collocation_from(&problem, &p.path, &p.gains, &p.cost, &g));
    let elapsed = start.elapsed().as_secs_f64();
    match baseline.and_then(|b| compare_trajectories(&log, &b, p)) {
        Ok(m) => {
            let gap = (m.adp_cost - m.baseline_cost).abs() / m.baseline_cost;
            let rms = m.max_state_rms();
            gate.check(
                "2",
                "near-optimality against collocation",
                gap <= 0.25 && rms < 0.15 && elapsed < 60.0,
                format!("ADP cost {:.4} vs baseline {:.4}, gap {:.1}% (<= 25%), max state RMS {rms:.4} (< 0.15), baseline runtime {elapsed:.1} s (< 60 s)", m.adp_cost, m.baseline_cost, 100.0 * gap),
            );
        }
        Err(e) => gate.check(
            "2",
            "near-optimality against collocation",
            false,
            e.to_string(),
        ),
    }

    // 3. rank along the reference run
    let bound = scenario.adp.bound();
    let mut min_rank = usize::MAX;
    let mut min_eig = f64::INFINITY;
    let mut rank_failed = None;
    for rec in &log.records {
        match rank_check(p, &scenario.adp.grid, &ActorWeights::new(rec.wa, bound)) {
            Ok(r) => {
                min_rank = min_rank.min(r.rank);
                min_eig = min_eig.min(r.c_lower);
            }
            Err(e) => rank_failed = Some(e.to_string()),
        }
    }
    gate.check(
        "3",
        "rank condition",
        rank_failed.is_none() && min_rank == 9 && min_eig > 0.0,
        match rank_failed {
            Some(e) => e,
            None => format!("min rank {min_rank} over {} logged steps (= 9), min eigenvalue {min_eig:.3e} (> 0)", log.len()),
        },
    );

    // 4. analytic derivatives
    let h = 1e-6;
    let mut jac_err = 0.0f64;
    for kind in [BasisKind::Quadratic, BasisKind::Linear] {
        for _ in 0..100 {
            let z = random_state(&mut rng);
            let jac = kind.jacobian(&z);
            let v = z.to_vector();
            for j in 0..4 {
                let (mut zp, mut zm) = (v, v);
                zp[j] += h;
                zm[j] -= h;
                let fd = (kind.sigma(&ErrorState::from_vector(&zp))
                    - kind.sigma(&ErrorState::from_vector(&zm)))
                    / (2.0 * h);
                for i in 0..9 {
                    jac_err = jac_err.max(rel_err(fd[i], jac[(i, j)]));
                }
            }
        }
    }
    let mut omega_err = 0.0f64;
    for _ in 0..50 {
        let z = random_state(&mut rng);
        let wc = BasisVector::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let wa = ActorWeights::new(
            BasisVector::from_fn(|_, _| rng.random_range(-1.0..1.0)),
            10.0,
        );
        let prob = ControlProblem::default();
        let omega = prob
            .bellman_error(&CriticWeights(wc), &wa, &z)
            .unwrap()
            .omega;
        for i in 0..9 {
            let (mut wp, mut wm) = (wc, wc);
            wp[i] += h;
            wm[i] -= h;
            let dp = prob
                .bellman_error(&CriticWeights(wp), &wa, &z)
                .unwrap()
                .delta;
            let dm = prob
                .bellman_error(&CriticWeights(wm), &wa, &z)
                .unwrap()
                .delta;
            omega_err = omega_err.max(rel_err((dp - dm) / (2.0 * h), omega[i]));
        }
    }
    gate.check(
        "4",
        "analytic derivatives",
        jac_err < 1e-6 && omega_err < 1e-6,
        format!("basis Jacobian max rel error {jac_err:.2e}, Bellman gradient max rel error {omega_err:.2e} (< 1e-6)"),
    );

    // 5. structural identities
    let mut gtg = 0.0f64;
    for _ in 0..1000 {
        let z = ErrorState {
            theta: rng.random_range(-PI..PI),
            ..random_state(&mut rng)
        };
        let g = input_g(&z);
        gtg = gtg.max((g.transpose() * g - Matrix2::identity()).amax());
    }
    let mut f_origin = 0.0f64;
    for _ in 0..100 {
        let z = ErrorState {
            s: 0.0,
            y: 0.0,
            theta: 0.0,
            phi: rng.random_range(-0.99..0.99),
        };
        let f = drift_f(&z, &p.path, &p.gains).unwrap();
        f_origin = f_origin.max(f.fixed_rows::<3>(0).amax());
    }
    let mut phi_form = 0.0f64;
    for phi in [-0.9, -0.5, 0.0, 0.5, 0.9] {
        let z = ErrorState {
            s: 0.3,
            y: -0.2,
            theta: 0.4,
            phi,
        };
        let literal = p.gains.k2 / phi.atanh().cosh().powi(2) * virtual_target_rate(&z, &p.gains);
        phi_form = phi_form.max((phi_rate(&z, &p.gains).unwrap() - literal).abs());
    }
    gate.check(
        "5",
        "structural identities",
        gtg <= 1e-12 && f_origin <= 1e-14 && phi_form <= 1e-12,
        format!("|g'g - I| = {gtg:.1e} (<= 1e-12), |f_e(0, phi)| = {f_origin:.1e} (<= 1e-14), phi rate vs sech^2 form {phi_form:.1e} (<= 1e-12)"),
    );

    // 6. frame round trip and integrated consistency
    let path = PathSpec::default();
    let mut round_trip = 0.0f64;
    for _ in 0..1000 {
        let sp = rng.random_range(-10.0..10.0);
        let off = FrameOffset {
            s: rng.random_range(-1.0..1.0),
            y: rng.random_range(-1.0..1.0),
            theta: rng.random_range(-PI..PI),
        };
        let back =
            world_from_frenet(&path, sp, &off).and_then(|pose| frenet_error(&path, sp, &pose));
        round_trip = round_trip.max(match back {
            Ok(b) => (b.s - off.s)
                .abs()
                .max((b.y - off.y).abs())
                .max(wrap_angle(b.theta - off.theta).abs()),
            Err(_) => f64::INFINITY,
        });
    }
    let circle = Scenario {
        problem: ControlProblem {
            path: PathSpec::Circle { radius: 10.0 },
            ..scenario.problem
        },
        ..scenario.clone()
    };
    let consistency = |dt: f64| -> Result<(f64, TrajectoryLog), String> {
        let sim = SimConfig {
            dt,
            duration: cfg.sim.duration,
            log_stride: 1,
        };
        let log = run_simulation(&circle, &sim).map_err(|a| a.to_string())?;
        let dev =
            frenet_world_consistency(&log, &circle.problem.path).map_err(|e| e.to_string())?;
        Ok((dev, log))
    };
    match (
        consistency(cfg.sim.dt),
        consistency(0.05),
        consistency(0.025),
    ) {
        (Ok((dev, l1)), Ok((coarse, l2)), Ok((fine, l3))) => {
            for l in [&l1, &l2, &l3] {
                phi_ok &= l.records.iter().all(|r| r.zeta.phi.abs() < 1.0);
            }
            let ratio = coarse / fine;
            gate.check(
                "6",
                "frame round trip and consistency",
                round_trip <= 1e-9 && dev < 1e-4 && (10.0..=22.0).contains(&ratio),
                format!("round trip {round_trip:.1e} (<= 1e-9), 60 s circle deviation {dev:.1e} (< 1e-4), halving dt 0.05 -> 0.025 shrinks it {ratio:.1}x (10..22)"),
            );
        }
        (a, b, c) => {
            let e = [a.err(), b.err(), c.err()]
                .into_iter()
                .flatten()
                .next()
                .unwrap_or_default();
            gate.check("6", "frame round trip and consistency", false, e);
        }
    }

    // 7. integrator order
    let global = |n: usize| {
        let dt = 1.0 / n as f64;
        let mut x = vec![1.0];
        for _ in 0..n {
            x = rk4_step(&x, dt, |x| Ok(vec![x[0]])).unwrap();
        }
        (x[0] - 1f64.exp()).abs()
    };
    let ratios: Vec<f64> = [10, 20, 40]
        .iter()
        .map(|&n| global(n) / global(2 * n))
        .collect();
    gate.check(
        "7",
        "integrator order",
        ratios.iter().all(|r| (14.0..=18.0).contains(r)),
        format!(
            "error ratios per halving {:.2}, {:.2}, {:.2} (14..18)",
            ratios[0], ratios[1], ratios[2]
        ),
    );

    // 8. projection with a tight bound
    let mut tight = scenario.clone();
    let tight_bound = 0.9 * tight.adp.wa0.norm();
    tight.adp.proj_bound = Some(tight_bound);
    let every_step = SimConfig {
        log_stride: 1,
        ..cfg.sim
    };
    match run_simulation(&tight, &every_step) {
        Ok(l) => {
            phi_ok &= l.records.iter().all(|r| r.zeta.phi.abs() < 1.0);
            let worst = l.records.iter().map(|r| r.wa.norm()).fold(0.0, f64::max);
            gate.check(
                "8",
                "projection safety",
                worst <= tight_bound * (1.0 + 1e-9),
                format!(
                    "max |Wa| / bound = {:.12} over {} steps (<= 1 + 1e-9)",
                    worst / tight_bound,
                    l.len()
                ),
            );
        }
        Err(a) => gate.check("8", "projection safety", false, a.to_string()),
    }

    // 9. phi stays in range; target progresses monotonically in the reference run
    let fine = run_simulation(&scenario, &every_step);
    match fine {
        Ok(l) => {
            phi_ok &= l.records.iter().all(|r| r.zeta.phi.abs() < 1.0);
            let premise = l
                .records
                .iter()
                .all(|r| virtual_target_rate(&r.zeta, &p.gains) > 0.0);
            let increasing = l.records.windows(2).all(|w| w[1].zeta.phi > w[0].zeta.phi);
            let min_rate = l
                .records
                .iter()
                .map(|r| virtual_target_rate(&r.zeta, &p.gains))
                .fold(f64::INFINITY, f64::min);
            let phi_max = l
                .records
                .iter()
                .map(|r| r.zeta.phi.abs())
                .fold(0.0, f64::max);
            gate.check(
                "9",
                "phi invariance",
                phi_ok && premise && increasing,
                format!("|phi| < 1 in every run (max {phi_max:.4} in reference run), phi strictly increasing: {increasing}, min target rate {min_rate:.4} (> 0)"),
            );
        }
        Err(a) => gate.check("9", "phi invariance", false, a.to_string()),
    }

    // 10. determinism of the command-line run
    let exe = env!("CARGO_BIN_EXE_adp-pf");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut outputs = Vec::new();
    for d in &dirs {
        let status = Command::new(exe)
            .arg("run")
            .arg("--out")
            .arg(d.path())
            .output();
        let ok = status.as_ref().is_ok_and(|o| o.status.success());
        outputs.push(
            ok.then(|| std::fs::read(d.path().join(TRAJECTORY_CSV)).ok())
                .flatten(),
        );
    }
    let detail = match (&outputs[0], &outputs[1]) {
        (Some(a), Some(b)) => format!("{} bytes, identical: {}", a.len(), a == b),
        _ => "run failed".into(),
    };
    gate.check(
        "10",
        "determinism",
        matches!((&outputs[0], &outputs[1]), (Some(a), Some(b)) if a == b),
        detail,
    );

    if gate.failures == 0 {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", gate.failures);
        ExitCode::FAILURE
    }
}
