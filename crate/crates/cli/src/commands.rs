use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use strip6v::askey_wilson::{
    aw_measure_with, classify, phase_limit, strip_params_from_boundary, Degeneracy, Partition, Quadrature, Region,
};
use strip6v::dynamics::{
    evolve, evolve_coupled, write_colored_trajectory_csv, write_trajectory_csv, Configuration, KeyedRng, StripParams,
};
use strip6v::exact::{scaling_limit_check, stationary_exact, transition_matrix_with_cap, verify_tilting, AsepRates, Target};
use strip6v::lattice::DownRightPath;
use strip6v::mpa::{derive_params, mpa_measure, StripAnsatz};

use crate::*;

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

/// Writes to `path`, or to stdout when no path is given.
fn write_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<String> {
    match path {
        Some(p) => {
            let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            let mut w = BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", p.display()))?;
            Ok(p.display().to_string())
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w).and_then(|_| w.flush()).context("writing stdout")?;
            Ok("stdout".into())
        }
    }
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<String> {
    let text = serde_json::to_string_pretty(value)?;
    write_output(path, |w| writeln!(w, "{text}"))
}

/// How strictly the parameters are checked before use.
#[derive(Clone, Copy, PartialEq)]
enum Check {
    /// Weights in [0, 1].
    Range,
    /// Weights in (0, 1).
    Ergodic,
    /// Every hypothesis of the matrix product ansatz.
    Theorem,
}

impl ModelArgs {
    fn resolve(&self, check: Check) -> Result<StripParams> {
        let strip = [self.a, self.b, self.c, self.d, self.theta1, self.theta2];
        let boundary = [self.q, self.r, self.big_a, self.big_b, self.big_c, self.big_d];
        let any_strip = strip.iter().any(Option::is_some);
        let any_boundary = boundary.iter().any(Option::is_some);
        let p = match (any_strip, any_boundary) {
            (true, true) => bail!("give either --a --b --c --d --theta1 --theta2 or --q --r --A --B --C --D, not both"),
            (false, false) => bail!("missing parameters: give --a --b --c --d --theta1 --theta2 or --q --r --A --B --C --D"),
            (true, false) => {
                let names = ["a", "b", "c", "d", "theta1", "theta2"];
                let v = complete(&strip, &names)?;
                StripParams::new(v[0], v[1], v[2], v[3], v[4], v[5])?
            }
            (false, true) => {
                let names = ["q", "r", "A", "B", "C", "D"];
                let v = complete(&boundary, &names)?;
                strip_params_from_boundary(v[0], v[1], v[2], v[3], v[4], v[5])?
            }
        };
        match check {
            Check::Range => {}
            Check::Ergodic => p.validate_ergodic()?,
            Check::Theorem => p.validate_theorem()?,
        }
        Ok(p)
    }
}

fn complete(values: &[Option<f64>; 6], names: &[&str; 6]) -> Result<[f64; 6]> {
    let missing: Vec<String> =
        values.iter().zip(names).filter(|(v, _)| v.is_none()).map(|(_, n)| format!("--{n}")).collect();
    ensure!(missing.is_empty(), "missing parameters: {}", missing.join(" "));
    Ok(values.map(Option::unwrap))
}

impl PathArgs {
    fn resolve(&self) -> Result<DownRightPath> {
        match (&self.path, self.n) {
            (Some(lit), n) => {
                let anchor = self.anchor.unwrap_or_else(|| lit.chars().filter(|&c| c == 'U').count() as i64);
                let path = DownRightPath::parse(lit, anchor)?;
                if let Some(n) = n {
                    ensure!(n == path.width(), "--n {n} does not match the width {} of --path", path.width());
                }
                Ok(path)
            }
            (None, Some(n)) => {
                let path = DownRightPath::horizontal(n)?;
                Ok(match self.anchor {
                    Some(k) => path.translate(k),
                    None => path,
                })
            }
            (None, None) => bail!("missing path: give --n or --path"),
        }
    }
}

fn parse_config(text: Option<&str>, n: usize, name: &str) -> Result<Configuration> {
    let Some(text) = text else {
        return Ok(Configuration::empty(n));
    };
    let bits = text
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(anyhow!("--{name} must be a string of 0 and 1, got {text:?}")),
        })
        .collect::<Result<Vec<u8>>>()?;
    ensure!(bits.len() == n, "--{name} has {} sites but the path has width {n}", bits.len());
    Ok(Configuration::new(bits)?)
}

fn quadrature(precision: f64) -> Result<Quadrature> {
    ensure!(precision > 0.0 && precision < 1.0, "precision must lie in (0, 1), got {precision}");
    Ok(Quadrature::new(precision))
}

/// Concatenates per-replica CSV bodies, prefixing a replica column when
/// there is more than one.
fn join_replicas(w: &mut dyn Write, parts: &[Vec<u8>]) -> io::Result<()> {
    if parts.len() == 1 {
        return w.write_all(&parts[0]);
    }
    for (i, part) in parts.iter().enumerate() {
        let text = std::str::from_utf8(part).expect("CSV is ASCII");
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if i == 0 {
            writeln!(w, "replica,{header}")?;
        }
        for line in lines {
            writeln!(w, "{i},{line}")?;
        }
    }
    Ok(())
}

pub fn run(command: Command) -> Result<String> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Couple(a) => couple(a),
        Command::Stationary(a) => stationary(a),
        Command::Mpa(a) => mpa(a),
        Command::VerifyTilting(a) => tilting(a),
        Command::ScalingCheck(a) => scaling(a),
        Command::AwMeasure(a) => aw(a),
        Command::Partition(a) => partition(a),
        Command::Density(a) => density(a),
        Command::PhaseSweep(a) => phase_sweep(a),
    }
}

fn simulate(args: SimulateArgs) -> Result<String> {
    let params = args.model.resolve(Check::Range)?;
    let path = args.path.resolve()?;
    let init = parse_config(args.init.as_deref(), path.width(), "init")?;
    ensure!(args.replicas >= 1, "--replicas must be at least 1");
    let runs: Vec<(Vec<u8>, usize)> = (0..args.replicas)
        .into_par_iter()
        .map(|rep| {
            let mut rng = KeyedRng::new(args.seed, rep);
            let traj = evolve(&path, &init, &params, args.steps, &mut rng)?;
            let particles = traj.iter().map(Configuration::particles).sum();
            let mut buf = Vec::new();
            write_trajectory_csv(&mut buf, &traj)?;
            Ok((buf, particles))
        })
        .collect::<Result<_>>()?;
    let bodies: Vec<Vec<u8>> = runs.iter().map(|r| r.0.clone()).collect();
    let dest = write_output(args.out.as_deref(), |w| join_replicas(w, &bodies))?;
    let particles: usize = runs.iter().map(|r| r.1).sum();
    let visits = args.replicas as f64 * (args.steps + 1) as f64 * path.width() as f64;
    Ok(format!(
        "simulate: path {path}, {} steps x {} replicas, mean occupation {}, wrote {dest}",
        args.steps,
        args.replicas,
        fmt(particles as f64 / visits)
    ))
}

fn couple(args: CoupleArgs) -> Result<String> {
    let lower = args.model.resolve(Check::Ergodic)?;
    let upper = StripParams::new(
        args.a2.unwrap_or(lower.a),
        args.b2.unwrap_or(lower.b),
        args.c2.unwrap_or(lower.c),
        args.d2.unwrap_or(lower.d),
        lower.theta1,
        lower.theta2,
    )?;
    let path = args.path.resolve()?;
    let init1 = parse_config(args.init1.as_deref(), path.width(), "init1")?;
    let init2 = parse_config(args.init2.as_deref(), path.width(), "init2")?;
    ensure!(args.replicas >= 1, "--replicas must be at least 1");
    let runs: Vec<(Vec<u8>, usize, usize)> = (0..args.replicas)
        .into_par_iter()
        .map(|rep| {
            let mut rng = KeyedRng::new(args.seed, rep);
            let traj = evolve_coupled(&path, &init1, &init2, &lower, &upper, args.steps, &mut rng)?;
            let mut violations = 0;
            let mut edges = 0;
            for conf in &traj {
                for (x, y) in conf.lower().bits().iter().zip(conf.upper().bits()) {
                    edges += 1;
                    violations += usize::from(x > y);
                }
            }
            let mut buf = Vec::new();
            write_colored_trajectory_csv(&mut buf, &traj)?;
            Ok((buf, violations, edges))
        })
        .collect::<Result<_>>()?;
    let bodies: Vec<Vec<u8>> = runs.iter().map(|r| r.0.clone()).collect();
    let dest = write_output(args.out.as_deref(), |w| join_replicas(w, &bodies))?;
    let violations: usize = runs.iter().map(|r| r.1).sum();
    let edges: usize = runs.iter().map(|r| r.2).sum();
    Ok(format!("couple: path {path}, {edges} edges sampled, {violations} ordering violations, wrote {dest}"))
}

fn stationary(args: StationaryArgs) -> Result<String> {
    let params = args.model.resolve(Check::Range)?;
    let path = args.path.resolve()?;
    let k = transition_matrix_with_cap(&path, &Target::Translation, &params, args.cap)?;
    let mu = stationary_exact(&k)?;
    let dest = write_output(args.out.as_deref(), |w| mu.write_csv(w))?;
    let density = mu.densities().iter().sum::<f64>() / path.width() as f64;
    Ok(format!("stationary: path {path}, {} states, mean density {}, wrote {dest}", mu.probs().len(), fmt(density)))
}

fn mpa(args: MpaArgs) -> Result<String> {
    let params = args.model.resolve(Check::Theorem)?;
    let path = args.path.resolve()?;
    let mu = mpa_measure(&path, &params)?;
    let dest = write_output(args.out.as_deref(), |w| mu.write_csv(w))?;
    if let Some(p) = &args.derived {
        write_json(Some(p), &derive_params(&params))?;
    }
    let mut summary = format!("mpa: path {path}, {} states, wrote {dest}", mu.probs().len());
    if args.compare {
        let exact = stationary_exact(&transition_matrix_with_cap(
            &path,
            &Target::Translation,
            &params,
            strip6v::exact::DEFAULT_CAP,
        )?)?;
        summary.push_str(&format!(", max deviation from exact law {}", fmt(mu.max_abs_diff(&exact))));
    }
    Ok(summary)
}

fn tilting(args: VerifyTiltingArgs) -> Result<String> {
    let params = args.model.resolve(Check::Theorem)?;
    let report = verify_tilting(&params, args.n)?;
    let dest = write_json(args.out.as_deref(), &report)?;
    Ok(format!("verify-tilting: N = {}, max_abs_error {}, wrote {dest}", args.n, fmt(report.max_abs_error)))
}

fn scaling(args: ScalingArgs) -> Result<String> {
    let rates =
        AsepRates { alpha: args.alpha, beta: args.beta, gamma: args.gamma, delta: args.delta, l: args.l, r: args.r };
    rates.validate()?;
    let report = scaling_limit_check(&rates, args.n, &args.eps)?;
    let dest = write_json(args.out.as_deref(), &report)?;
    let orders: Vec<String> = report.orders.iter().map(|o| format!("{o:.3}")).collect();
    Ok(format!("scaling-check: N = {}, observed orders [{}], wrote {dest}", args.n, orders.join(", ")))
}

#[derive(Serialize)]
struct AwReport<'a> {
    measure: &'a strip6v::askey_wilson::AWMeasure,
    atom_mass: f64,
    continuous_mass: f64,
    total_mass: f64,
    min_threshold_gap: f64,
}

fn aw(args: AwMeasureArgs) -> Result<String> {
    let quad = quadrature(args.precision)?;
    let mode = if args.lenient { Degeneracy::Lenient } else { Degeneracy::Strict };
    let (m, gap) = aw_measure_with(args.a, args.b, args.c, args.d, args.q, mode)?;
    let continuous = m.continuous_mass(&quad)?;
    let report = AwReport {
        measure: &m,
        atom_mass: m.atom_mass(),
        continuous_mass: continuous,
        total_mass: continuous + m.atom_mass(),
        min_threshold_gap: gap,
    };
    let dest = write_json(args.out.as_deref(), &report)?;
    if let Some(k) = args.density_points {
        ensure!(k >= 2, "--density-points must be at least 2");
        let target = args.density_out.as_deref().ok_or_else(|| anyhow!("--density-points needs --density-out"))?;
        write_output(Some(target), |w| {
            writeln!(w, "y,density")?;
            for i in 0..k {
                // open interval: the density may vanish or blow up at +-1
                let y = -1.0 + 2.0 * (i as f64 + 0.5) / k as f64;
                writeln!(w, "{},{}", fmt(y), fmt(m.density(y)))?;
            }
            Ok(())
        })?;
    }
    Ok(format!(
        "aw-measure: {} atoms, total mass {}, wrote {dest}",
        m.atoms.len(),
        fmt(report.total_mass)
    ))
}

fn partition(args: PartitionArgs) -> Result<String> {
    let params = args.model.resolve(Check::Theorem)?;
    let part = Partition::new(&params, quadrature(args.precision)?)?;
    let jobs: Vec<(usize, f64)> = args.n.iter().flat_map(|&n| args.t.iter().map(move |&t| (n, t))).collect();
    for &(n, t) in &jobs {
        ensure!(n >= 1, "widths must be at least 1");
        ensure!(t > 0.0, "t must be positive, got {t}");
    }
    let rows: Vec<String> = jobs
        .par_iter()
        .map(|&(n, t)| {
            let log_z = part.log_z(n, t)?;
            let mut row = format!("{n},{},{},{}", fmt(t), fmt(log_z), fmt(log_z.exp()));
            if args.compare {
                let dehp = StripAnsatz::new(&params)?.log_partition_horizontal(n, t);
                row.push_str(&format!(",{},{}", fmt(dehp), fmt((log_z - dehp).exp_m1().abs())));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let header = if args.compare { "N,t,log_z,z,log_z_mpa,rel_diff" } else { "N,t,log_z,z" };
    let dest = write_output(args.out.as_deref(), |w| {
        writeln!(w, "{header}")?;
        rows.iter().try_for_each(|r| writeln!(w, "{r}"))
    })?;
    Ok(format!("partition: {} rows, wrote {dest}", rows.len()))
}

fn density(args: DensityArgs) -> Result<String> {
    let params = args.model.resolve(Check::Theorem)?;
    let part = Partition::new(&params, quadrature(args.precision)?)?;
    let phase = phase_limit(&params);
    let limit = phase.limit_density;
    let values: Vec<f64> = args.n.par_iter().map(|&n| Ok(part.mean_density(n)?)).collect::<Result<_>>()?;
    let dest = write_output(args.out.as_deref(), |w| {
        writeln!(w, "N,mean_density,limit_density,abs_error")?;
        for (&n, &v) in args.n.iter().zip(&values) {
            writeln!(w, "{n},{},{},{}", fmt(v), fmt_opt(limit), fmt_opt(limit.map(|l| (v - l).abs())))?;
        }
        Ok(())
    })?;
    let label = phase.phase.map_or("none", |p| p.label());
    Ok(format!("density: phase {label}, limit {}, {} widths, wrote {dest}", fmt_opt(limit), values.len()))
}

fn parse_grid(text: &str) -> Result<(usize, usize)> {
    let (x, y) = text.split_once(['x', 'X']).ok_or_else(|| anyhow!("--grid must look like 50x50, got {text:?}"))?;
    let na: usize = x.trim().parse().with_context(|| format!("--grid: bad A count {x:?}"))?;
    let nc: usize = y.trim().parse().with_context(|| format!("--grid: bad C count {y:?}"))?;
    ensure!(na >= 1 && nc >= 1, "--grid counts must be at least 1");
    Ok((na, nc))
}

fn phase_sweep(args: PhaseSweepArgs) -> Result<String> {
    let r = args.r;
    ensure!(r > 0.0 && r < 1.0, "r must lie in (0, 1), got {r}");
    ensure!(args.q > 0.0 && args.q < 1.0, "q must lie in (0, 1), got {}", args.q);
    ensure!(args.b > -1.0 && args.b < 0.0, "B must lie in (-1, 0), got {}", args.b);
    ensure!(args.d > -1.0 && args.d < 0.0, "D must lie in (-1, 0), got {}", args.d);
    let (na, nc) = parse_grid(&args.grid)?;
    let a_max = args.a_max.unwrap_or(2.0 / r.sqrt());
    let c_max = args.c_max.unwrap_or(2.0 * r.sqrt());
    ensure!(a_max > 0.0 && c_max > 0.0, "--a-max and --c-max must be positive");
    let mut ns = args.ns.clone();
    if ns.is_empty() {
        ns.extend(args.nmax);
    }
    if let Some(nmax) = args.nmax {
        ensure!(ns.iter().all(|&n| n <= nmax), "every --ns value must be at most --nmax {nmax}");
    }
    ensure!(ns.iter().all(|&n| n >= 1), "widths must be at least 1");
    let quad = quadrature(args.precision)?;

    // cell midpoints keep A and C strictly positive
    let points: Vec<(f64, f64)> = (0..na)
        .flat_map(|i| (0..nc).map(move |j| ((i as f64 + 0.5) * a_max / na as f64, (j as f64 + 0.5) * c_max / nc as f64)))
        .collect();
    let rows: Vec<(String, usize)> = points
        .par_iter()
        .map(|&(a, c)| {
            let rep = classify(a, c, r);
            let mut row = format!(
                "{},{},{},{},{},{}",
                fmt(a),
                fmt(c),
                fmt(r),
                rep.region.label(),
                rep.phase.map_or("", |p| p.label()),
                fmt_opt(rep.limit_density)
            );
            let mut failed = 0;
            let part = if rep.region == Region::Fan {
                strip_params_from_boundary(args.q, r, a, args.b, c, args.d)
                    .and_then(|p| Partition::new(&p, quad.clone()))
                    .ok()
            } else {
                None
            };
            for &n in &ns {
                row.push(',');
                match part.as_ref().map(|p| p.mean_density(n)) {
                    Some(Ok(v)) => row.push_str(&fmt(v)),
                    Some(Err(_)) => failed += 1,
                    None if rep.region == Region::Fan => failed += 1,
                    None => {}
                }
            }
            (row, failed)
        })
        .collect();
    let header: String = ["A,C,r,region,phase,limit_density".to_string()]
        .into_iter()
        .chain(ns.iter().map(|n| format!("density_at_{n}")))
        .collect::<Vec<_>>()
        .join(",");
    let dest = write_output(args.out.as_deref(), |w| {
        writeln!(w, "{header}")?;
        rows.iter().try_for_each(|(row, _)| writeln!(w, "{row}"))
    })?;
    let failed: usize = rows.iter().map(|r| r.1).sum();
    let fan = points.iter().filter(|(a, c)| a * c < 1.0).count();
    let mut summary = format!("phase-sweep: {} points ({fan} fan, {} shock), wrote {dest}", points.len(), points.len() - fan);
    if failed > 0 {
        summary.push_str(&format!(", {failed} density values left empty (quadrature or parameter failure)"));
    }
    Ok(summary)
}
