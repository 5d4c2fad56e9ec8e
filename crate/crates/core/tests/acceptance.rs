//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strip6v::askey_wilson::{
    aw_measure, phase_limit, strip_params_from_boundary, technical_gap, Partition, Phase, Quadrature,
};
use strip6v::dynamics::{evolve_coupled, ColoredConfiguration, Configuration, CoupledParams, KeyedRng, StripParams};
use strip6v::exact::{
    colored_transition_matrix, move_kernel, scaling_limit_check, stationary_exact, transition_matrix, verify_tilting,
    AsepRates, Distribution, Kernel, Target,
};
use strip6v::lattice::{apply_local_move, decompose_translation, DownRightPath, EdgeKind};
use strip6v::mpa::{
    bernoulli_special, derive_params, mpa_measure, parity_bernoulli, product_measure, qvolume_measure, BernoulliMode,
    StripAnsatz,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn random_theorem_params(rng: &mut ChaCha8Rng) -> StripParams {
    loop {
        let theta2 = rng.random_range(0.1..0.95);
        let theta1 = theta2 * rng.random_range(0.05..0.95);
        let (a, b, c, d) = (
            rng.random_range(0.02..0.98),
            rng.random_range(0.02..0.98),
            rng.random_range(0.02..0.98),
            rng.random_range(0.02..0.98),
        );
        if let Ok(p) = StripParams::theorem(a, b, c, d, theta1, theta2) {
            let r = AsepRates::from_strip(&p);
            if r.alpha * r.beta > r.gamma * r.delta {
                return p;
            }
        }
    }
}

fn random_path(rng: &mut ChaCha8Rng, n: usize) -> DownRightPath {
    let labels: Vec<EdgeKind> =
        (0..n).map(|_| if rng.random_bool(0.5) { EdgeKind::Up } else { EdgeKind::Right }).collect();
    let ups = labels.iter().filter(|&&l| l == EdgeKind::Up).count() as i64;
    DownRightPath::new(n, Some(labels), ups).unwrap()
}

fn all_paths(n: usize) -> Vec<DownRightPath> {
    (0..1usize << n)
        .map(|m| {
            let labels: Vec<EdgeKind> =
                (0..n).map(|i| if m >> i & 1 == 1 { EdgeKind::Up } else { EdgeKind::Right }).collect();
            let ups = labels.iter().filter(|&&l| l == EdgeKind::Up).count() as i64;
            DownRightPath::new(n, Some(labels), ups).unwrap()
        })
        .collect()
}

fn push(dist: &Distribution, k: &Kernel) -> Vec<f64> {
    let n = dist.probs().len();
    (0..n).map(|j| (0..n).map(|i| dist.probs()[i] * k.get(i, j)).sum()).collect()
}

fn fixed_point_error(dist: &Distribution, k: &Kernel) -> f64 {
    push(dist, k).iter().zip(dist.probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tilting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let p = random_theorem_params(&mut rng);
        for n in 1..=6 {
            worst = worst.max(verify_tilting(&p, n).map_err(|e| e.to_string())?.max_abs_error);
        }
    }
    check(worst < 1e-10, format!("max deviation {worst:.3e} (tol 1e-10)"))
}

fn general_paths() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_eq, mut worst_move): (f64, f64) = (0.0, 0.0);
    for n in 1..=5 {
        for _ in 0..10 {
            let p = random_theorem_params(&mut rng);
            let path = random_path(&mut rng, n);
            let k = transition_matrix(&path, &Target::Translation, &p).map_err(|e| e.to_string())?;
            let mu = stationary_exact(&k).map_err(|e| e.to_string())?;
            let m = mpa_measure(&path, &p).map_err(|e| e.to_string())?;
            worst_eq = worst_eq.max(mu.max_abs_diff(&m));
            let mut cur = path.clone();
            for mv in decompose_translation(&path) {
                let next = apply_local_move(&cur, mv).map_err(|e| e.to_string())?;
                let pushed = push(&mpa_measure(&cur, &p).map_err(|e| e.to_string())?, &move_kernel(n, mv, &p));
                let target = mpa_measure(&next, &p).map_err(|e| e.to_string())?;
                let err = pushed.iter().zip(target.probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                worst_move = worst_move.max(err);
                cur = next;
            }
        }
    }
    check(
        worst_eq < 1e-10 && worst_move < 1e-10,
        format!("ansatz vs eigenvector {worst_eq:.3e}, local-move invariance {worst_move:.3e} (tol 1e-10)"),
    )
}

fn special_cases() -> Outcome {
    let mut bern: f64 = 0.0;
    let s = bernoulli_special(0.5, 0.3, 0.4, 0.2, 0.5, BernoulliMode::Theorem).map_err(|e| e.to_string())?;
    let pb = StripParams::new(0.5, 0.3, 0.4, 0.2, s.theta1, 0.5).unwrap();
    let pp = StripParams::new(1.0, 1.0, 1.0, 1.0, 0.2, 0.5).unwrap();
    let mut parity: f64 = 0.0;
    for n in 1..=4 {
        for path in all_paths(n) {
            let k = transition_matrix(&path, &Target::Translation, &pb).unwrap();
            bern = bern.max(fixed_point_error(&product_measure(&path, s.p_up, s.p_right), &k));
            let k = transition_matrix(&path, &Target::Translation, &pp).unwrap();
            let m = parity_bernoulli(0.2, 0.5, &path).map_err(|e| e.to_string())?;
            parity = parity.max(fixed_point_error(&m.even, &k)).max(fixed_point_error(&m.odd, &k));
        }
    }
    let pq = StripParams::new(0.0, 0.0, 0.0, 0.0, 0.2, 0.5).unwrap();
    let mut qvol: f64 = 0.0;
    for n in 1..=5 {
        for path in all_paths(n) {
            let k = transition_matrix(&path, &Target::Translation, &pq).unwrap();
            for particles in 0..=n {
                let d = qvolume_measure(n, particles, pq.q()).map_err(|e| e.to_string())?;
                qvol = qvol.max(fixed_point_error(&d, &k));
            }
        }
    }
    check(
        bern < 1e-10 && parity < 1e-10 && qvol < 1e-10,
        format!("Bernoulli {bern:.3e}, parity {parity:.3e}, q-volume {qvol:.3e} (tol 1e-10)"),
    )
}

fn scaling() -> Outcome {
    let rates = AsepRates { alpha: 0.8, beta: 0.6, gamma: 0.4, delta: 0.64, l: 0.4, r: 1.0 };
    let mut ratios = vec![];
    for n in [2, 3] {
        let rep = scaling_limit_check(&rates, n, &[1e-2, 1e-3, 1e-4]).map_err(|e| e.to_string())?;
        for w in rep.residuals.windows(2) {
            ratios.push(w[0].error / w[1].error);
        }
    }
    let ok = ratios.iter().all(|r| (8.0..=12.0).contains(r));
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    check(ok, format!("error ratios per decade [{}] (want [8, 12])", shown.join(", ")))
}

fn aw_normalization() -> Outcome {
    let quad = Quadrature::default();
    let mut worst: f64 = 0.0;
    let mut atom_counts = [0usize; 3];
    let qs = [0.2, 0.5, 0.8];
    let base = [
        (0.0, 0.0, 0.0, 0.0),
        (0.5, -0.3, 0.2, 0.1),
        (-0.7, 0.6, 0.0, 0.4),
        (0.9, -0.9, 0.5, -0.5),
        (1.3, 0.0, 0.0, 0.0),
        (2.2, -0.4, 0.3, 0.0),
        (1.6, 0.2, -0.5, 0.1),
        (1.2, 0.0, -1.2, 0.0),
        (2.5, -0.3, -1.8, 0.2),
        (1.7, 0.1, -1.5, 0.3),
    ];
    let mut points = 0;
    for &(a, b, c, d) in &base {
        for &q in &qs {
            let m = match aw_measure(a, b, c, d, q) {
                Ok(m) => m,
                Err(e) => return Err(format!("({a}, {b}, {c}, {d}, {q}): {e}")),
            };
            let generators: std::collections::BTreeSet<u64> = m.atoms.iter().map(|x| x.generator.to_bits()).collect();
            atom_counts[generators.len().min(2)] += 1;
            worst = worst.max((m.total_mass(&quad).map_err(|e| e.to_string())? - 1.0).abs());
            points += 1;
        }
    }
    let covered = atom_counts.iter().all(|&c| c > 0);
    check(
        worst < 1e-8 && covered && points == 30,
        format!(
            "{points} points ({} / {} / {} with 0 / 1 / 2 atom generators), max |mass - 1| = {worst:.3e} (tol 1e-8)",
            atom_counts[0], atom_counts[1], atom_counts[2]
        ),
    )
}

fn fan_sets(count: usize) -> Vec<StripParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut out = vec![];
    while out.len() < count {
        let q = rng.random_range(0.1..0.8);
        let r = rng.random_range(0.2..0.9);
        let a = rng.random_range(0.0..2.5);
        let c = rng.random_range(0.0..2.5);
        let b = -rng.random_range(0.01..0.8);
        let d = -rng.random_range(0.01..0.8);
        if a * c >= 0.95 {
            continue;
        }
        if let Ok(p) = strip_params_from_boundary(q, r, a, b, c, d) {
            // away from the technical set for every t used below
            let dp = derive_params(&p);
            let ok = [0.5, 1.0, 2.0].iter().all(|&t: &f64| {
                let scaled = strip6v::mpa::DerivedParams {
                    tilde_a: dp.tilde_a * t.sqrt(),
                    tilde_b: dp.tilde_b * t.sqrt(),
                    tilde_c: dp.tilde_c / t.sqrt(),
                    tilde_d: dp.tilde_d / t.sqrt(),
                    ..dp
                };
                technical_gap(&scaled) > 1e-3
            });
            if ok {
                out.push(p);
            }
        }
    }
    out
}

fn partition_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for p in fan_sets(10) {
        let part = Partition::new(&p, Quadrature::default()).map_err(|e| e.to_string())?;
        let mut ansatz = StripAnsatz::new(&p).map_err(|e| e.to_string())?;
        for n in 1..=20 {
            for t in [0.5, 1.0, 2.0] {
                let aw = part.log_z(n, t).map_err(|e| e.to_string())?;
                worst = worst.max((aw - ansatz.log_partition_horizontal(n, t)).exp_m1().abs());
            }
        }
    }
    check(worst < 1e-8, format!("max relative error {worst:.3e} over 10 fan sets (tol 1e-8)"))
}

fn phase_sets() -> [(&'static str, StripParams); 3] {
    let mk = |a, c| strip_params_from_boundary(0.4, 0.625, a, -0.2, c, -0.1).unwrap();
    [("MC", mk(0.5, 0.5)), ("HD", mk(2.0, 0.3)), ("LD", mk(0.5, 1.2))]
}

fn phase_limits() -> Outcome {
    let mut parts = vec![];
    let mut ok = true;
    for (name, p) in phase_sets() {
        let rep = phase_limit(&p);
        let expect = match name {
            "MC" => Phase::MaximalCurrent,
            "HD" => Phase::HighDensity,
            _ => Phase::LowDensity,
        };
        ok &= rep.phase == Some(expect);
        let limit = rep.limit_density.ok_or("no limit in fan region")?;
        let part = Partition::new(&p, Quadrature::default()).map_err(|e| e.to_string())?;
        let mut errs = vec![];
        for n in [50, 100, 200, 400, 800] {
            errs.push((part.mean_density(n).map_err(|e| e.to_string())? - limit).abs());
        }
        ok &= errs[4] < 0.02 && errs.windows(2).all(|w| w[1] < w[0]);
        parts.push(format!("{name} |rho_800 - {limit:.6}| = {:.2e}", errs[4]));
    }
    check(ok, format!("{} (tol 0.02, monotone over N = 50..800)", parts.join(", ")))
}

fn dominance() -> Outcome {
    let sets = phase_sets();
    let mc = Partition::new(&sets[0].1, Quadrature::default()).map_err(|e| e.to_string())?;
    let hd = Partition::new(&sets[1].1, Quadrature::default()).map_err(|e| e.to_string())?;
    let c = mc.parts(800, 1.0).map_err(|e| e.to_string())?.continuous_share();
    let a = hd.parts(800, 1.0).map_err(|e| e.to_string())?.largest_atom_share();
    check(c > 0.999 && a > 0.999, format!("N = 800: HD largest-atom share {a:.6}, MC continuous share {c:.6} (want > 0.999)"))
}

fn coupling() -> Outcome {
    let lower = StripParams::new(0.2, 0.4, 0.5, 0.1, 0.3, 0.6).unwrap();
    let upper = StripParams::new(0.3, 0.2, 0.3, 0.3, 0.3, 0.6).unwrap();
    let path = DownRightPath::parse("URRU", 2).unwrap();
    let mut rng = KeyedRng::new(42, 0);
    let traj = evolve_coupled(&path, &Configuration::empty(4), &Configuration::empty(4), &lower, &upper, 25_000, &mut rng)
        .map_err(|e| e.to_string())?;
    let mut edges = 0usize;
    let mut violations = 0usize;
    for conf in &traj {
        for (a, b) in conf.lower().bits().iter().zip(conf.upper().bits()) {
            edges += 1;
            violations += usize::from(a > b);
        }
    }
    let cp = CoupledParams::new(lower, upper).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        for path in all_paths(n) {
            let ck = colored_transition_matrix(&path, &Target::Translation, &cp).map_err(|e| e.to_string())?;
            let k1 = transition_matrix(&path, &Target::Translation, &lower).unwrap();
            let k2 = transition_matrix(&path, &Target::Translation, &upper).unwrap();
            for s in 0..ck.dim() {
                let c = ColoredConfiguration::from_index(s, n);
                let mut p1 = vec![0.0; 1 << n];
                let mut p2 = vec![0.0; 1 << n];
                for t in 0..ck.dim() {
                    let ct = ColoredConfiguration::from_index(t, n);
                    p1[ct.lower().index()] += ck.get(s, t);
                    p2[ct.upper().index()] += ck.get(s, t);
                }
                for j in 0..1 << n {
                    worst = worst.max((p1[j] - k1.get(c.lower().index(), j)).abs());
                    worst = worst.max((p2[j] - k2.get(c.upper().index(), j)).abs());
                }
            }
        }
    }
    check(
        violations == 0 && edges >= 100_000 && worst < 1e-12,
        format!("{violations} ordering violations over {edges} edges, projected kernel error {worst:.3e} (tol 1e-12)"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("tilting identity", tilting),
        ("matrix ansatz on general paths", general_paths),
        ("special-case measures", special_cases),
        ("scaling limit", scaling),
        ("Askey-Wilson normalization", aw_normalization),
        ("partition function cross-check", partition_identity),
        ("phase-diagram limits", phase_limits),
        ("dominance at large N", dominance),
        ("two-species coupling", coupling),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
