//! Strip geometry, down-right paths and the three local moves.
//!
//! The strip of width `N` is `{(x, y) : 0 <= y <= x <= y + N}`. A down-right
//! path runs from the left boundary `x = y` to the right boundary `x = y + N`
//! in `N` unit steps, each step going down or right. Every step owns exactly
//! one outgoing edge of the path:
//!
//! * a right step `v -> v + (1, 0)` owns the vertical edge above its endpoint
//!   (label [`EdgeKind::Up`]);
//! * a down step `v -> v - (0, 1)` owns the horizontal edge leaving its start
//!   point (label [`EdgeKind::Right`]).
//!
//! A path is stored as its label sequence, listed from the up-left end to the
//! down-right end, plus the height of its lowest vertex (the right endpoint).
//! Vertex `k` of the path lies on the diagonal `x - y = k`, so two paths of the
//! same width are compared vertex by vertex along these diagonals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kind of an outgoing edge of a down-right path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Up,
    Right,
}

impl EdgeKind {
    pub fn symbol(self) -> char {
        match self {
            EdgeKind::Up => 'U',
            EdgeKind::Right => 'R',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            'U' | 'u' => Some(EdgeKind::Up),
            'R' | 'r' => Some(EdgeKind::Right),
            _ => None,
        }
    }
}

/// A down-right path on the strip.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DownRightPath {
    labels: Vec<EdgeKind>,
    anchor: i64,
}

impl DownRightPath {
    /// Builds a validated path. `labels = None` gives the horizontal path.
    ///
    /// `anchor` is the height of the right endpoint, the lowest vertex of the
    /// path; the path stays in the strip iff `anchor >= 0`.
    pub fn new(width: usize, labels: Option<Vec<EdgeKind>>, anchor: i64) -> Result<Self> {
        if width == 0 {
            return Err(Error::ZeroWidth);
        }
        let labels = labels.unwrap_or_else(|| vec![EdgeKind::Up; width]);
        if labels.len() != width {
            return Err(Error::LabelLength { width, got: labels.len() });
        }
        if anchor < 0 {
            return Err(Error::OutsideStrip { anchor });
        }
        Ok(Self { labels, anchor })
    }

    pub fn horizontal(width: usize) -> Result<Self> {
        Self::new(width, None, 0)
    }

    /// Parses a literal such as `"URU"` with the given anchor.
    pub fn parse(literal: &str, anchor: i64) -> Result<Self> {
        let labels = literal
            .chars()
            .map(|c| EdgeKind::from_symbol(c).ok_or_else(|| Error::PathLiteral(literal.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels.len(), Some(labels), anchor)
    }

    pub fn width(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[EdgeKind] {
        &self.labels
    }

    pub fn anchor(&self) -> i64 {
        self.anchor
    }

    pub fn is_horizontal(&self) -> bool {
        self.labels.iter().all(|&l| l == EdgeKind::Up)
    }

    fn down_steps(&self) -> i64 {
        self.labels.iter().filter(|&&l| l == EdgeKind::Right).count() as i64
    }

    /// Left endpoint, on the boundary `x = y`.
    pub fn left_endpoint(&self) -> (i64, i64) {
        let y0 = self.anchor + self.down_steps();
        (y0, y0)
    }

    /// The `N + 1` vertices of the path from left to right.
    pub fn vertices(&self) -> Vec<(i64, i64)> {
        let mut v = self.left_endpoint();
        let mut out = Vec::with_capacity(self.width() + 1);
        out.push(v);
        for &l in &self.labels {
            match l {
                EdgeKind::Up => v.0 += 1,
                EdgeKind::Right => v.1 -= 1,
            }
            out.push(v);
        }
        out
    }

    /// Height of the path on each diagonal `x - y = k`, `k = 0..=N`.
    pub fn heights(&self) -> Vec<i64> {
        self.vertices().into_iter().map(|(_, y)| y).collect()
    }

    /// The up-right translate `self + (k, k)`; labels are unchanged.
    pub fn translate(&self, k: i64) -> Self {
        Self { labels: self.labels.clone(), anchor: self.anchor + k }
    }

    /// True when `self` sits weakly below `other` on every diagonal.
    pub fn is_weakly_below(&self, other: &DownRightPath) -> bool {
        self.width() == other.width()
            && self.heights().iter().zip(other.heights()).all(|(&a, b)| a <= b)
    }

    /// Area of the part of the strip between `y = 0` and the path.
    pub fn area_below(&self) -> f64 {
        let n = self.width() as f64;
        // origin, up the left boundary, along the path, down the right
        // boundary; repeated corners add zero to the shoelace sum
        let poly: Vec<(f64, f64)> = std::iter::once((0.0, 0.0))
            .chain(self.vertices().into_iter().map(|(x, y)| (x as f64, y as f64)))
            .chain(std::iter::once((n, 0.0)))
            .collect();
        let twice: f64 = (0..poly.len())
            .map(|i| {
                let (x0, y0) = poly[i];
                let (x1, y1) = poly[(i + 1) % poly.len()];
                x0 * y1 - x1 * y0
            })
            .sum();
        0.5 * twice.abs()
    }
}

impl fmt::Display for DownRightPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.labels {
            write!(f, "{}", l.symbol())?;
        }
        write!(f, "@{}", self.anchor)
    }
}

impl FromStr for DownRightPath {
    type Err = Error;

    /// Accepts `"URU"` (anchor 0) or `"URU@3"`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('@') {
            Some((lit, anchor)) => {
                let anchor = anchor.trim().parse().map_err(|_| Error::PathLiteral(s.to_string()))?;
                Self::parse(lit.trim(), anchor)
            }
            None => Self::parse(s.trim(), 0),
        }
    }
}

/// The three kinds of local move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MoveKind {
    /// Flips a down-then-right corner into right-then-down.
    Bulk,
    /// Raises the left endpoint: an initial right step becomes a down step.
    LeftBoundary,
    /// Straightens the end: a final down step becomes a right step.
    RightBoundary,
}

/// A local move addressed by the index of the first label it touches.
///
/// For [`MoveKind::Bulk`] the move touches labels `position` and
/// `position + 1`, which must read `Right, Up` (a down step followed by a
/// right step). Boundary moves touch a single label: `0` for the left
/// boundary and `N - 1` for the right boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocalMove {
    pub kind: MoveKind,
    pub position: usize,
}

impl LocalMove {
    pub fn bulk(position: usize) -> Self {
        Self { kind: MoveKind::Bulk, position }
    }

    pub fn left() -> Self {
        Self { kind: MoveKind::LeftBoundary, position: 0 }
    }

    pub fn right(width: usize) -> Self {
        Self { kind: MoveKind::RightBoundary, position: width.saturating_sub(1) }
    }

    /// Index of the path vertex that the move pushes up by `(1, 1)`.
    fn moved_vertex(&self, width: usize) -> usize {
        match self.kind {
            MoveKind::Bulk => self.position + 1,
            MoveKind::LeftBoundary => 0,
            MoveKind::RightBoundary => width,
        }
    }

    /// The strip vertex whose outgoing edges are sampled by this move.
    pub fn sampled_vertex(&self, path: &DownRightPath) -> (i64, i64) {
        let (x, y) = path.vertices()[self.moved_vertex(path.width())];
        (x + 1, y + 1)
    }

    pub fn check(&self, path: &DownRightPath) -> Result<()> {
        let labels = path.labels();
        let n = labels.len();
        let fail = |reason| Err(Error::InapplicableMove { kind: self.kind, position: self.position, reason });
        match self.kind {
            MoveKind::Bulk => {
                if self.position + 1 >= n {
                    return fail("bulk move needs two consecutive labels");
                }
                if labels[self.position] != EdgeKind::Right || labels[self.position + 1] != EdgeKind::Up {
                    return fail("no down-then-right corner");
                }
            }
            MoveKind::LeftBoundary => {
                if self.position != 0 {
                    return fail("left-boundary move must sit at position 0");
                }
                if labels[0] != EdgeKind::Up {
                    return fail("path does not start with a right step");
                }
            }
            MoveKind::RightBoundary => {
                if self.position + 1 != n {
                    return fail("right-boundary move must sit at position N - 1");
                }
                if labels[n - 1] != EdgeKind::Right {
                    return fail("path does not end with a down step");
                }
            }
        }
        Ok(())
    }
}

/// Applies a local move, returning the raised path.
pub fn apply_local_move(path: &DownRightPath, mv: LocalMove) -> Result<DownRightPath> {
    mv.check(path)?;
    let mut labels = path.labels.clone();
    let mut anchor = path.anchor;
    match mv.kind {
        MoveKind::Bulk => labels.swap(mv.position, mv.position + 1),
        MoveKind::LeftBoundary => labels[0] = EdgeKind::Right,
        MoveKind::RightBoundary => {
            let last = labels.len() - 1;
            labels[last] = EdgeKind::Up;
            anchor += 1;
        }
    }
    Ok(DownRightPath { labels, anchor })
}

/// Every move applicable to `path`.
pub fn applicable_moves(path: &DownRightPath) -> Vec<LocalMove> {
    let n = path.width();
    let mut out = Vec::new();
    if path.labels[0] == EdgeKind::Up {
        out.push(LocalMove::left());
    }
    for i in 0..n.saturating_sub(1) {
        if path.labels[i] == EdgeKind::Right && path.labels[i + 1] == EdgeKind::Up {
            out.push(LocalMove::bulk(i));
        }
    }
    if path.labels[n - 1] == EdgeKind::Right {
        out.push(LocalMove::right(n));
    }
    out
}

/// Moves taking `from` to `to`, in raster order of the sampled vertices
/// (smaller `y` first, then smaller `x`).
pub fn moves_between(from: &DownRightPath, to: &DownRightPath) -> Result<Vec<LocalMove>> {
    if !from.is_weakly_below(to) {
        return Err(Error::TargetBelow);
    }
    let mut current = from.clone();
    let mut seq = Vec::new();
    while current != *to {
        let next = applicable_moves(&current)
            .into_iter()
            .filter_map(|mv| {
                let moved = apply_local_move(&current, mv).ok()?;
                moved.is_weakly_below(to).then(|| {
                    let (x, y) = mv.sampled_vertex(&current);
                    ((y, x), mv, moved)
                })
            })
            .min_by_key(|(key, _, _)| *key);
        // a path strictly below `to` always admits a move that stays below it
        let (_, mv, moved) = next.ok_or(Error::TargetBelow)?;
        seq.push(mv);
        current = moved;
    }
    Ok(seq)
}

/// Local moves whose composition maps `path` to `path + (1, 1)`.
pub fn decompose_translation(path: &DownRightPath) -> Vec<LocalMove> {
    moves_between(path, &path.translate(1)).expect("translate(1) lies above the path")
}
