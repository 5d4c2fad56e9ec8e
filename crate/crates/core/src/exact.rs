//! Brute-force finite-state computations: transition kernels for path pairs,
//! stationary measures, the open ASEP generator, the small-parameter scaling
//! check and the tilting check.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::csr::Csr;
use serde::Serialize;

use crate::dynamics::{incoming_for, write_outgoing, Configuration, CoupledParams, StripParams, VertexRule};
use crate::error::{Error, Result};
use crate::lattice::{apply_local_move, decompose_translation, moves_between, DownRightPath, LocalMove};

/// Default bound on the path width for exact enumeration.
pub const DEFAULT_CAP: usize = 12;

/// Width bound for two-colour kernels (state space `3^N`).
pub const COLORED_CAP: usize = 7;

/// Entries at or below this are treated as zero when building the support graph.
const SUPPORT_EPS: f64 = 1e-300;

/// Where the chain moves to in one step.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// The path translated by `(1, 1)`.
    Translation,
    /// Any path weakly above the source; moves are taken in raster order.
    Path(DownRightPath),
    /// An explicit sequence of local moves, applied in order.
    Moves(Vec<LocalMove>),
}

/// Row-stochastic matrix over `STATES^N` configurations, little-endian indexed.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    width: usize,
    states_per_site: u8,
    matrix: DMatrix<f64>,
}

impl Kernel {
    /// Wraps a matrix; rows must be nonnegative and sum to 1 within `1e-12`.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Parameter("kernel must be square".into()));
        }
        for (i, row) in matrix.row_iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 || row.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                return Err(Error::Parameter(format!("row {i} is not a probability vector (sum {s})")));
            }
        }
        let dim = matrix.nrows();
        let width = if dim.is_power_of_two() { dim.trailing_zeros() as usize } else { 0 };
        Ok(Self { width, states_per_site: 2, matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn states_per_site(&self) -> u8 {
        self.states_per_site
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.matrix[(from, to)]
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Kernel) -> Kernel {
        Kernel {
            width: self.width,
            states_per_site: self.states_per_site,
            matrix: &self.matrix * &next.matrix,
        }
    }

    pub fn max_row_defect(&self) -> f64 {
        self.matrix.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Conservative rate matrix: nonnegative off-diagonal, zero row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    width: usize,
    matrix: DMatrix<f64>,
}

impl Generator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.matrix[(from, to)]
    }
}

/// Probability vector over `{0,1}^N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    width: usize,
    probs: Vec<f64>,
}

impl Distribution {
    /// Normalizes `weights` by their sum.
    pub fn from_weights(width: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != 1 << width {
            return Err(Error::ConfigLength { width: 1 << width, got: weights.len() });
        }
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Normalizer(total));
        }
        Ok(Self { width, probs: weights.into_iter().map(|w| w / total).collect() })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, config: &Configuration) -> f64 {
        self.probs[config.index()]
    }

    /// `E[tau_i]` for sites `i = 1..=N` (returned 0-based).
    pub fn densities(&self) -> Vec<f64> {
        let mut rho = vec![0.0; self.width];
        for (idx, p) in self.probs.iter().enumerate() {
            for (i, r) in rho.iter_mut().enumerate() {
                if idx >> i & 1 == 1 {
                    *r += p;
                }
            }
        }
        rho
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn total_variation(&self, other: &Distribution) -> f64 {
        0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    /// CSV with columns `state,probability`; states written as `tau_1..tau_N`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "state,probability")?;
        for (idx, p) in self.probs.iter().enumerate() {
            writeln!(w, "{},{:.16e}", Configuration::from_index(idx, self.width), p)?;
        }
        Ok(())
    }
}

fn decode(mut index: usize, width: usize, base: usize, out: &mut [u8]) {
    for slot in out.iter_mut().take(width) {
        *slot = (index % base) as u8;
        index /= base;
    }
}

fn encode(state: &[u8], base: usize) -> usize {
    state.iter().rev().fold(0, |acc, &c| acc * base + c as usize)
}

/// Sparse one-move kernel: `table[s]` lists `(s', p)` with `p > 0`.
fn move_table<V: VertexRule>(rule: &V, mv: LocalMove, width: usize) -> Vec<Vec<(usize, f64)>> {
    let base = V::STATES as usize;
    let dim = base.pow(width as u32);
    let mut state = vec![0u8; width];
    (0..dim)
        .map(|s| {
            decode(s, width, base, &mut state);
            let inc = incoming_for(mv, &state);
            rule.law(inc)
                .into_iter()
                .filter(|(_, p)| *p > 0.0)
                .map(|(out, p)| {
                    let mut next = state.clone();
                    write_outgoing(mv, out, &mut next);
                    (encode(&next, base), p)
                })
                .collect()
        })
        .collect()
}

fn compose_moves<V: VertexRule>(rule: &V, moves: &[LocalMove], width: usize) -> Kernel {
    let base = V::STATES as usize;
    let dim = base.pow(width as u32);
    let tables: Vec<_> = moves.iter().map(|&mv| move_table(rule, mv, width)).collect();
    let mut matrix = DMatrix::zeros(dim, dim);
    let mut cur = vec![0.0; dim];
    let mut next = vec![0.0; dim];
    for start in 0..dim {
        cur.iter_mut().for_each(|x| *x = 0.0);
        cur[start] = 1.0;
        for table in &tables {
            next.iter_mut().for_each(|x| *x = 0.0);
            for (s, &w) in cur.iter().enumerate() {
                if w != 0.0 {
                    for &(t, p) in &table[s] {
                        next[t] += w * p;
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        for (j, &w) in cur.iter().enumerate() {
            matrix[(start, j)] = w;
        }
    }
    Kernel { width, states_per_site: V::STATES, matrix }
}

fn resolve_moves(path: &DownRightPath, target: &Target) -> Result<Vec<LocalMove>> {
    match target {
        Target::Translation => Ok(decompose_translation(path)),
        Target::Path(to) => moves_between(path, to),
        Target::Moves(moves) => {
            let mut p = path.clone();
            for &mv in moves {
                p = apply_local_move(&p, mv)?;
            }
            Ok(moves.clone())
        }
    }
}

/// Kernel of a single local move on a path of the given width.
pub fn move_kernel(width: usize, mv: LocalMove, params: &StripParams) -> Kernel {
    compose_moves(params, &[mv], width)
}

/// One-step kernel `P_{path, target}` for the single-species model.
pub fn transition_matrix(path: &DownRightPath, target: &Target, params: &StripParams) -> Result<Kernel> {
    transition_matrix_with_cap(path, target, params, DEFAULT_CAP)
}

pub fn transition_matrix_with_cap(
    path: &DownRightPath,
    target: &Target,
    params: &StripParams,
    cap: usize,
) -> Result<Kernel> {
    let n = path.width();
    if n > cap {
        return Err(Error::OverCap { n, cap });
    }
    let moves = resolve_moves(path, target)?;
    Ok(compose_moves(params, &moves, n))
}

/// One-step kernel of the two-colour coupling over `{0,1,2}^N`.
pub fn colored_transition_matrix(path: &DownRightPath, target: &Target, params: &CoupledParams) -> Result<Kernel> {
    let n = path.width();
    if n > COLORED_CAP {
        return Err(Error::OverCap { n, cap: COLORED_CAP });
    }
    let moves = resolve_moves(path, target)?;
    Ok(compose_moves(params, &moves, n))
}

/// Number of closed communicating classes of the support graph of `m`.
fn closed_classes(m: &DMatrix<f64>) -> usize {
    let dim = m.nrows();
    let mut edges = Vec::new();
    for i in 0..dim {
        for j in 0..dim {
            if i != j && m[(i, j)] > SUPPORT_EPS {
                edges.push((i as u32, j as u32));
            }
        }
    }
    let graph: Csr<(), (), petgraph::Directed, u32> = Csr::from_sorted_edges(&edges).unwrap_or_else(|_| Csr::new());
    let mut graph = graph;
    while graph.node_count() < dim {
        graph.add_node(());
    }
    let sccs = tarjan_scc(&graph);
    let mut class_of = vec![0usize; dim];
    for (k, scc) in sccs.iter().enumerate() {
        for &v in scc {
            class_of[v as usize] = k;
        }
    }
    let mut leaks = vec![false; sccs.len()];
    for &(i, j) in &edges {
        if class_of[i as usize] != class_of[j as usize] {
            leaks[class_of[i as usize]] = true;
        }
    }
    leaks.iter().filter(|&&l| !l).count()
}

/// Solves `A x = 0` with one equation replaced by `sum x = 1`.
fn null_vector(mut a: DMatrix<f64>) -> Result<Vec<f64>> {
    let dim = a.nrows();
    for j in 0..dim {
        a[(dim - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(dim);
    rhs[dim - 1] = 1.0;
    let x = a.lu().solve(&rhs).ok_or_else(|| Error::Solve("singular system".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solve("non-finite solution".into()));
    }
    // clip roundoff negatives
    Ok(x.iter().map(|&v| v.max(0.0)).collect())
}

/// Input of [`stationary_exact`].
#[derive(Debug, Clone, Copy)]
pub enum Chain<'a> {
    Kernel(&'a Kernel),
    Generator(&'a Generator),
}

impl<'a> From<&'a Kernel> for Chain<'a> {
    fn from(k: &'a Kernel) -> Self {
        Chain::Kernel(k)
    }
}

impl<'a> From<&'a Generator> for Chain<'a> {
    fn from(g: &'a Generator) -> Self {
        Chain::Generator(g)
    }
}

/// Unique stationary law of an irreducible kernel or generator.
///
/// Chains with more than one closed class are rejected with
/// [`Error::Reducible`]. A kernel over colour states yields a distribution
/// whose `width` field is only meaningful for two-state sites.
pub fn stationary_exact<'a>(chain: impl Into<Chain<'a>>) -> Result<Distribution> {
    let (m, width, is_kernel) = match chain.into() {
        Chain::Kernel(k) => (k.matrix(), k.width(), true),
        Chain::Generator(g) => (g.matrix(), g.width(), false),
    };
    let classes = closed_classes(m);
    if classes != 1 {
        return Err(Error::Reducible { closed_classes: classes });
    }
    let mut a = m.transpose();
    if is_kernel {
        for i in 0..a.nrows() {
            a[(i, i)] -= 1.0;
        }
    }
    let x = null_vector(a)?;
    let total: f64 = x.iter().sum();
    Ok(Distribution { width, probs: x.into_iter().map(|v| v / total).collect() })
}

/// Stationary law over a general state space (e.g. colour states).
pub fn stationary_vector(kernel: &Kernel) -> Result<Vec<f64>> {
    let classes = closed_classes(kernel.matrix());
    if classes != 1 {
        return Err(Error::Reducible { closed_classes: classes });
    }
    let mut a = kernel.matrix().transpose();
    for i in 0..a.nrows() {
        a[(i, i)] -= 1.0;
    }
    let x = null_vector(a)?;
    let total: f64 = x.iter().sum();
    Ok(x.into_iter().map(|v| v / total).collect())
}

/// Open ASEP rates: boundary `alpha` (in, left), `gamma` (out, left),
/// `beta` (out, right), `delta` (in, right); bulk jumps right at `r` and
/// left at `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct AsepRates {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

impl AsepRates {
    /// Rates of the ASEP whose stationary law, tilted by `r^{#particles}`,
    /// is the strip stationary law; bulk rates are `L = q`, `R = 1`.
    pub fn from_strip(p: &StripParams) -> Self {
        let (t1, t2) = (p.theta1, p.theta2);
        let s = 1.0 - p.b - p.d;
        Self {
            alpha: (1.0 - t1) * p.a / t2,
            beta: (1.0 - t2) * p.b / (t2 * s),
            gamma: (1.0 - t2) * p.c / t2,
            delta: (1.0 - t1) * p.d / (t2 * s),
            l: t1 / t2,
            r: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("L", self.l),
            ("R", self.r),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parameter(format!("rate {name} = {v} must be finite and >= 0")));
            }
        }
        if self.alpha <= 0.0 || self.beta <= 0.0 {
            return Err(Error::Parameter("alpha and beta must be positive".into()));
        }
        Ok(())
    }
}

/// Generator of the open ASEP on sites `1..=N`.
pub fn asep_generator(n: usize, rates: &AsepRates) -> Result<Generator> {
    rates.validate()?;
    if n == 0 {
        return Err(Error::ZeroWidth);
    }
    if n > DEFAULT_CAP {
        return Err(Error::OverCap { n, cap: DEFAULT_CAP });
    }
    let dim = 1usize << n;
    let mut q = DMatrix::zeros(dim, dim);
    let last = n - 1;
    for s in 0..dim {
        let bit = |i: usize| s >> i & 1;
        let mut add = |t: usize, rate: f64| {
            q[(s, t)] += rate;
            q[(s, s)] -= rate;
        };
        if bit(0) == 0 {
            add(s | 1, rates.alpha);
        } else {
            add(s & !1, rates.gamma);
        }
        if bit(last) == 1 {
            add(s & !(1 << last), rates.beta);
        } else {
            add(s | 1 << last, rates.delta);
        }
        for i in 0..last {
            match (bit(i), bit(i + 1)) {
                (1, 0) => add(s ^ (0b11 << i), rates.r),
                (0, 1) => add(s ^ (0b11 << i), rates.l),
                _ => {}
            }
        }
    }
    Ok(Generator { width: n, matrix: q })
}

/// Result of [`scaling_limit_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub rates: AsepRates,
    pub residuals: Vec<ScalingResidual>,
    /// `log10(err_k / err_{k+1}) / log10(eps_k / eps_{k+1})` for consecutive pairs.
    pub orders: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingResidual {
    pub eps: f64,
    /// Entrywise max of `|(A_eps - I)/eps - Q|`.
    pub error: f64,
}

/// Compares the strip kernel with weights `(alpha, beta, gamma, delta, L, R) * eps`
/// on the horizontal path against the ASEP generator.
pub fn scaling_limit_check(rates: &AsepRates, n: usize, eps: &[f64]) -> Result<ScalingReport> {
    let q = asep_generator(n, rates)?;
    let path = DownRightPath::horizontal(n)?;
    let mut residuals = Vec::with_capacity(eps.len());
    for &e in eps {
        let scaled = [
            ("a", rates.alpha * e),
            ("b", rates.beta * e),
            ("c", rates.gamma * e),
            ("d", rates.delta * e),
            ("theta1", rates.l * e),
            ("theta2", rates.r * e),
        ];
        for (name, value) in scaled {
            if !(e > 0.0 && value > 0.0 && value < 1.0) {
                return Err(Error::InfeasibleEpsilon { eps: e, name, value });
            }
        }
        let p = StripParams::new(scaled[0].1, scaled[1].1, scaled[2].1, scaled[3].1, scaled[4].1, scaled[5].1)?;
        let k = transition_matrix(&path, &Target::Translation, &p)?;
        let mut diff = k.matrix().clone();
        for i in 0..diff.nrows() {
            diff[(i, i)] -= 1.0;
        }
        diff /= e;
        diff -= q.matrix();
        residuals.push(ScalingResidual { eps: e, error: diff.amax() });
    }
    let orders = residuals
        .windows(2)
        .map(|w| (w[0].error / w[1].error).log10() / (w[0].eps / w[1].eps).log10())
        .collect();
    Ok(ScalingReport { n, rates: *rates, residuals, orders })
}

/// Result of [`verify_tilting`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltingReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub params: StripParams,
    pub rates: AsepRates,
    pub r: f64,
    pub max_abs_error: f64,
}

/// Compares the strip stationary law on the horizontal path with the
/// `r^{#particles}`-tilted stationary law of the associated open ASEP.
pub fn verify_tilting(params: &StripParams, n: usize) -> Result<TiltingReport> {
    params.validate_theorem()?;
    let path = DownRightPath::horizontal(n)?;
    let mu = stationary_exact(&transition_matrix(&path, &Target::Translation, params)?)?;
    let rates = AsepRates::from_strip(params);
    let pi = stationary_exact(&asep_generator(n, &rates)?)?;
    let r = params.r();
    let tilted: Vec<f64> = pi
        .probs()
        .iter()
        .enumerate()
        .map(|(idx, p)| p * r.powi(idx.count_ones() as i32))
        .collect();
    let tilted = Distribution::from_weights(n, tilted)?;
    Ok(TiltingReport { n, params: *params, rates, r, max_abs_error: mu.max_abs_diff(&tilted) })
}
