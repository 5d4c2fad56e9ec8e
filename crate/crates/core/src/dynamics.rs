//! Stochastic sampling of the six-vertex model on the strip.
//!
//! Arrows are sampled vertex by vertex. A bulk vertex sees its left and
//! bottom edges and fills its top and right edges; a left-boundary vertex
//! `(y, y)` only has a bottom input and a right output; a right-boundary
//! vertex `(y + N, y)` only has a left input and a top output.
//!
//! Vertex laws (colour `0` means no arrow):
//!
//! | vertex | input | output |
//! |--------|-------|--------|
//! | bulk   | left arrow only   | keeps going right w.p. `theta2`, turns up w.p. `1 - theta2` |
//! | bulk   | bottom arrow only | keeps going up w.p. `theta1`, turns right w.p. `1 - theta1` |
//! | left   | empty             | arrow enters w.p. `a` |
//! | left   | arrow             | arrow leaves w.p. `c` |
//! | right  | arrow             | arrow leaves w.p. `b` |
//! | right  | empty             | arrow enters w.p. `d` |
//!
//! The same tables drive the exact kernels in [`crate::exact`], so the
//! sampler and the brute-force engine cannot drift apart.

use std::fmt;
use std::io::{self, Write};

use arrayvec::ArrayVec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{decompose_translation, DownRightPath, LocalMove, MoveKind};

/// Largest exponent `l` probed when testing `x = q^l`.
pub const SINGULAR_MAX_POWER: usize = 200;

/// Boundary (`a`, `b`, `c`, `d`) and bulk (`theta1`, `theta2`) probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub theta1: f64,
    pub theta2: f64,
}

impl StripParams {
    /// Checks that every parameter is a probability in `[0, 1]`.
    pub fn new(a: f64, b: f64, c: f64, d: f64, theta1: f64, theta2: f64) -> Result<Self> {
        let p = Self { a, b, c, d, theta1, theta2 };
        for (name, v) in p.named() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Parameter(format!("{name} = {v} must lie in [0, 1]")));
            }
        }
        Ok(p)
    }

    /// Parameters satisfying every hypothesis of the tilting identity.
    pub fn theorem(a: f64, b: f64, c: f64, d: f64, theta1: f64, theta2: f64) -> Result<Self> {
        let p = Self::new(a, b, c, d, theta1, theta2)?;
        p.validate_theorem()?;
        Ok(p)
    }

    fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
            ("theta1", self.theta1),
            ("theta2", self.theta2),
        ]
    }

    /// All six parameters in the open interval `(0, 1)`; the chain on any
    /// path is then irreducible.
    pub fn validate_ergodic(&self) -> Result<()> {
        for (name, v) in self.named() {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Parameter(format!(
                    "{name} = {v} must lie in (0, 1) for an irreducible chain"
                )));
            }
        }
        Ok(())
    }

    pub fn validate_theorem(&self) -> Result<()> {
        self.validate_ergodic()?;
        if self.theta1 >= self.theta2 {
            return Err(Error::Parameter(format!(
                "theta1 = {} must be < theta2 = {} (asymmetry towards the right)",
                self.theta1, self.theta2
            )));
        }
        if self.b + self.d >= 1.0 {
            return Err(Error::Parameter(format!(
                "b + d = {} must be < 1 (right-boundary rates of the tilted ASEP)",
                self.b + self.d
            )));
        }
        let ratio = self.a * self.b / (self.c * self.d);
        if let Some(l) = power_of_q(ratio, self.q(), 1e-9) {
            return Err(Error::Parameter(format!(
                "ab/(cd) = {ratio} equals q^{l} (singular matrix-ansatz case)"
            )));
        }
        Ok(())
    }

    /// `q = theta1 / theta2`.
    pub fn q(&self) -> f64 {
        self.theta1 / self.theta2
    }

    /// `r = (1 - theta2) / (1 - theta1)`.
    pub fn r(&self) -> f64 {
        (1.0 - self.theta2) / (1.0 - self.theta1)
    }

    /// Particle-hole partner: `theta1 <-> theta2`, `a <-> c`, `b <-> d`.
    pub fn dual(&self) -> Self {
        Self {
            a: self.c,
            b: self.d,
            c: self.a,
            d: self.b,
            theta1: self.theta2,
            theta2: self.theta1,
        }
    }
}

/// Returns `l` when `|x - q^l| < tol` for some `0 <= l <= SINGULAR_MAX_POWER`.
pub fn power_of_q(x: f64, q: f64, tol: f64) -> Option<usize> {
    let mut ql = 1.0;
    for l in 0..=SINGULAR_MAX_POWER {
        if (x - ql).abs() < tol {
            return Some(l);
        }
        ql *= q;
        if ql < tol * 1e-3 && x > tol {
            break;
        }
    }
    None
}

/// Occupation vector `tau` of a path's outgoing edges, up-left to down-right.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Configuration(Vec<u8>);

impl Configuration {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(&bad) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::Parameter(format!("occupation {bad} is not 0 or 1")));
        }
        Ok(Self(bits))
    }

    pub fn empty(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn full(n: usize) -> Self {
        Self(vec![1; n])
    }

    /// Little-endian decoding: bit `i` of `index` is `tau_{i+1}`.
    pub fn from_index(index: usize, n: usize) -> Self {
        Self((0..n).map(|i| ((index >> i) & 1) as u8).collect())
    }

    pub fn index(&self) -> usize {
        self.0.iter().enumerate().map(|(i, &b)| (b as usize) << i).sum()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn particles(&self) -> usize {
        self.0.iter().map(|&b| b as usize).sum()
    }

    pub fn complement(&self) -> Self {
        Self(self.0.iter().map(|&b| 1 - b).collect())
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Two-species configuration with colours in `{0, 1, 2}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColoredConfiguration(Vec<u8>);

impl ColoredConfiguration {
    /// Stacks two ordered occupation vectors: colour = `eta1 + eta2`.
    pub fn from_pair(lower: &Configuration, upper: &Configuration) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::ConfigLength { width: upper.len(), got: lower.len() });
        }
        if lower.bits().iter().zip(upper.bits()).any(|(l, u)| l > u) {
            return Err(Error::Coupling("initial conditions are not ordered: need init1 <= init2".into()));
        }
        Ok(Self(lower.bits().iter().zip(upper.bits()).map(|(l, u)| l + u).collect()))
    }

    pub fn colors(&self) -> &[u8] {
        &self.0
    }

    /// `eta1 = 1{colour >= 2}`.
    pub fn lower(&self) -> Configuration {
        Configuration(self.0.iter().map(|&c| u8::from(c >= 2)).collect())
    }

    /// `eta2 = 1{colour >= 1}`.
    pub fn upper(&self) -> Configuration {
        Configuration(self.0.iter().map(|&c| u8::from(c >= 1)).collect())
    }

    pub fn from_index(mut index: usize, n: usize) -> Self {
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push((index % 3) as u8);
            index /= 3;
        }
        Self(v)
    }

    pub fn index(&self) -> usize {
        self.0.iter().rev().fold(0, |acc, &c| acc * 3 + c as usize)
    }
}

/// Incoming edge occupations of a vertex; the variant fixes the vertex kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Incoming {
    Bulk { left: u8, bottom: u8 },
    LeftBoundary { bottom: u8 },
    RightBoundary { left: u8 },
}

/// Outgoing edge occupations of a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outgoing {
    Bulk { top: u8, right: u8 },
    LeftBoundary { right: u8 },
    RightBoundary { top: u8 },
}

/// A finite categorical law over vertex outputs.
pub type Law = ArrayVec<(Outgoing, f64), 3>;

/// Vertex weights of a (possibly multi-colour) stochastic vertex model.
pub trait VertexRule {
    /// Number of edge states, including the empty state `0`.
    const STATES: u8;

    fn law(&self, incoming: Incoming) -> Law;
}

fn bulk_law(theta1: f64, theta2: f64, left: u8, bottom: u8) -> Law {
    let mut law = Law::new();
    if left == bottom {
        law.push((Outgoing::Bulk { top: bottom, right: left }, 1.0));
    } else if left > bottom {
        // the stronger arrow comes from the left
        law.push((Outgoing::Bulk { top: bottom, right: left }, theta2));
        law.push((Outgoing::Bulk { top: left, right: bottom }, 1.0 - theta2));
    } else {
        law.push((Outgoing::Bulk { top: bottom, right: left }, theta1));
        law.push((Outgoing::Bulk { top: left, right: bottom }, 1.0 - theta1));
    }
    law
}

impl VertexRule for StripParams {
    const STATES: u8 = 2;

    fn law(&self, incoming: Incoming) -> Law {
        let mut law = Law::new();
        match incoming {
            Incoming::Bulk { left, bottom } => return bulk_law(self.theta1, self.theta2, left, bottom),
            Incoming::LeftBoundary { bottom: 0 } => {
                law.push((Outgoing::LeftBoundary { right: 1 }, self.a));
                law.push((Outgoing::LeftBoundary { right: 0 }, 1.0 - self.a));
            }
            Incoming::LeftBoundary { .. } => {
                law.push((Outgoing::LeftBoundary { right: 0 }, self.c));
                law.push((Outgoing::LeftBoundary { right: 1 }, 1.0 - self.c));
            }
            Incoming::RightBoundary { left: 0 } => {
                law.push((Outgoing::RightBoundary { top: 1 }, self.d));
                law.push((Outgoing::RightBoundary { top: 0 }, 1.0 - self.d));
            }
            Incoming::RightBoundary { .. } => {
                law.push((Outgoing::RightBoundary { top: 0 }, self.b));
                law.push((Outgoing::RightBoundary { top: 1 }, 1.0 - self.b));
            }
        }
        law
    }
}

/// Two ordered copies of the model run on one three-colour vertex model.
///
/// `lower` drives `eta1 = 1{colour >= 2}` and `upper` drives
/// `eta2 = 1{colour >= 1}`; the bulk parameters are shared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledParams {
    pub lower: StripParams,
    pub upper: StripParams,
}

impl CoupledParams {
    pub fn new(lower: StripParams, upper: StripParams) -> Result<Self> {
        lower.validate_ergodic()?;
        upper.validate_ergodic()?;
        let fail = |m: String| Err(Error::Coupling(m));
        if lower.theta1 != upper.theta1 || lower.theta2 != upper.theta2 {
            return fail("both copies must share theta1 and theta2".into());
        }
        let (l, u) = (lower, upper);
        if l.a > u.a {
            return fail(format!("need a <= a' (got {} > {})", l.a, u.a));
        }
        if l.b < u.b {
            return fail(format!("need b >= b' (got {} < {})", l.b, u.b));
        }
        if l.c < u.c {
            return fail(format!("need c >= c' (got {} < {})", l.c, u.c));
        }
        if l.d > u.d {
            return fail(format!("need d <= d' (got {} > {})", l.d, u.d));
        }
        if u.a + l.c >= 1.0 {
            return fail(format!("need a' + c < 1 (got {})", u.a + l.c));
        }
        if l.b + u.d >= 1.0 {
            return fail(format!("need b + d' < 1 (got {})", l.b + u.d));
        }
        Ok(Self { lower, upper })
    }
}

impl VertexRule for CoupledParams {
    const STATES: u8 = 3;

    fn law(&self, incoming: Incoming) -> Law {
        let (l, u) = (&self.lower, &self.upper);
        let mut law = Law::new();
        let mut push3 = |mk: fn(u8) -> Outgoing, p: [f64; 3]| {
            for (colour, &pr) in p.iter().enumerate() {
                law.push((mk(colour as u8), pr));
            }
        };
        let right = |c| Outgoing::LeftBoundary { right: c };
        let top = |c| Outgoing::RightBoundary { top: c };
        match incoming {
            Incoming::Bulk { left, bottom } => return bulk_law(l.theta1, l.theta2, left, bottom),
            Incoming::LeftBoundary { bottom: 0 } => push3(right, [1.0 - u.a, u.a - l.a, l.a]),
            Incoming::LeftBoundary { bottom: 1 } => push3(right, [u.c, 1.0 - u.c - l.a, l.a]),
            Incoming::LeftBoundary { .. } => push3(right, [u.c, l.c - u.c, 1.0 - l.c]),
            Incoming::RightBoundary { left: 0 } => push3(top, [1.0 - u.d, u.d - l.d, l.d]),
            Incoming::RightBoundary { left: 1 } => push3(top, [u.b, 1.0 - u.b - l.d, l.d]),
            Incoming::RightBoundary { .. } => push3(top, [u.b, l.b - u.b, 1.0 - l.b]),
        }
        law
    }
}

/// Reads the inputs of the vertex sampled by `mv` from the current state.
pub fn incoming_for(mv: LocalMove, state: &[u8]) -> Incoming {
    match mv.kind {
        MoveKind::Bulk => Incoming::Bulk { left: state[mv.position], bottom: state[mv.position + 1] },
        MoveKind::LeftBoundary => Incoming::LeftBoundary { bottom: state[0] },
        MoveKind::RightBoundary => Incoming::RightBoundary { left: state[state.len() - 1] },
    }
}

/// Writes the outputs of the vertex sampled by `mv` back into the state.
///
/// After a bulk move the label pair `(Right, Up)` becomes `(Up, Right)`: the
/// top output lands on the first edge and the right output on the second.
pub fn write_outgoing(mv: LocalMove, out: Outgoing, state: &mut [u8]) {
    match out {
        Outgoing::Bulk { top, right } => {
            state[mv.position] = top;
            state[mv.position + 1] = right;
        }
        Outgoing::LeftBoundary { right } => state[0] = right,
        Outgoing::RightBoundary { top } => {
            let last = state.len() - 1;
            state[last] = top;
        }
    }
}

/// Draws the outputs of one vertex from its exact law, consuming one `u64`.
pub fn sample_vertex<V: VertexRule, R: Rng + ?Sized>(rule: &V, incoming: Incoming, rng: &mut R) -> Outgoing {
    let u: f64 = rng.random();
    let law = rule.law(incoming);
    let mut acc = 0.0;
    for &(out, p) in &law {
        acc += p;
        if u < acc {
            return out;
        }
    }
    // u within rounding of 1: take the last outcome with positive mass
    law.iter().rev().find(|(_, p)| *p > 0.0).map(|(o, _)| *o).unwrap_or(law[0].0)
}

/// Counter-based random stream keyed by `(seed, replica, step, vertex)`.
///
/// Each replica owns a ChaCha stream; each step starts at a fixed word
/// offset and each vertex of the step consumes exactly one `u64`, so any
/// replica and step can be regenerated independently.
#[derive(Debug, Clone)]
pub struct KeyedRng {
    inner: ChaCha8Rng,
}

impl KeyedRng {
    pub fn new(seed: u64, replica: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(replica);
        Self { inner }
    }

    /// Positions the stream at the first vertex of `step` for a chain that
    /// samples `vertices_per_step` vertices per step.
    pub fn seek_step(&mut self, step: u64, vertices_per_step: u64) {
        self.inner.set_word_pos(2 * step as u128 * vertices_per_step as u128);
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.inner
    }
}

fn run_chain<V: VertexRule>(
    path: &DownRightPath,
    init: Vec<u8>,
    rule: &V,
    steps: usize,
    rng: &mut KeyedRng,
    mut visit: impl FnMut(usize, &[u8]),
) {
    let moves = decompose_translation(path);
    let mut state = init;
    visit(0, &state);
    for step in 0..steps {
        rng.seek_step(step as u64, moves.len() as u64);
        for &mv in &moves {
            let out = sample_vertex(rule, incoming_for(mv, &state), rng.rng());
            write_outgoing(mv, out, &mut state);
        }
        visit(step + 1, &state);
    }
}

/// Runs the particle system on `path` and returns `tau(0..=steps)`.
pub fn evolve(
    path: &DownRightPath,
    init: &Configuration,
    params: &StripParams,
    steps: usize,
    rng: &mut KeyedRng,
) -> Result<Vec<Configuration>> {
    if init.len() != path.width() {
        return Err(Error::ConfigLength { width: path.width(), got: init.len() });
    }
    let mut out = Vec::with_capacity(steps + 1);
    run_chain(path, init.bits().to_vec(), params, steps, rng, |_, s| out.push(Configuration(s.to_vec())));
    Ok(out)
}

/// Like [`evolve`] but only accumulates visit counts per state after
/// `burn_in` steps, without storing the trajectory.
pub fn occupation_counts(
    path: &DownRightPath,
    init: &Configuration,
    params: &StripParams,
    steps: usize,
    burn_in: usize,
    rng: &mut KeyedRng,
) -> Result<Vec<u64>> {
    if init.len() != path.width() {
        return Err(Error::ConfigLength { width: path.width(), got: init.len() });
    }
    let mut counts = vec![0u64; 1 << path.width()];
    run_chain(path, init.bits().to_vec(), params, steps, rng, |k, s| {
        if k >= burn_in {
            counts[Configuration(s.to_vec()).index()] += 1;
        }
    });
    Ok(counts)
}

/// Runs the two-colour coupling; `params` drives `eta1`, `params2` drives `eta2`.
pub fn evolve_coupled(
    path: &DownRightPath,
    init1: &Configuration,
    init2: &Configuration,
    params: &StripParams,
    params2: &StripParams,
    steps: usize,
    rng: &mut KeyedRng,
) -> Result<Vec<ColoredConfiguration>> {
    let coupled = CoupledParams::new(*params, *params2)?;
    for init in [init1, init2] {
        if init.len() != path.width() {
            return Err(Error::ConfigLength { width: path.width(), got: init.len() });
        }
    }
    let start = ColoredConfiguration::from_pair(init1, init2)?;
    let mut out = Vec::with_capacity(steps + 1);
    run_chain(path, start.0, &coupled, steps, rng, |_, s| out.push(ColoredConfiguration(s.to_vec())));
    Ok(out)
}

/// Writes `step,site,occupation` rows; sites are numbered from 1.
pub fn write_trajectory_csv<W: Write>(mut w: W, trajectory: &[Configuration]) -> io::Result<()> {
    writeln!(w, "step,site,occupation")?;
    for (step, conf) in trajectory.iter().enumerate() {
        for (i, b) in conf.bits().iter().enumerate() {
            writeln!(w, "{step},{},{b}", i + 1)?;
        }
    }
    Ok(())
}

/// Writes `step,site,occupation,color` rows, with occupation `1{colour >= 1}`.
pub fn write_colored_trajectory_csv<W: Write>(mut w: W, trajectory: &[ColoredConfiguration]) -> io::Result<()> {
    writeln!(w, "step,site,occupation,color")?;
    for (step, conf) in trajectory.iter().enumerate() {
        for (i, &c) in conf.colors().iter().enumerate() {
            writeln!(w, "{step},{},{},{c}", i + 1, u8::from(c >= 1))?;
        }
    }
    Ok(())
}
