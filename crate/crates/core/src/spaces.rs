//! Finite metric measure spaces.
//!
//! Spaces come from three sources: truncated Cayley balls (free groups and
//! free abelian groups, word metric), paths and grids, and explicit distance
//! matrices (built in code or loaded from a `.sp` file). Generated spaces
//! carry a generator table, used both for BFS ball queries and as the edge
//! structure of the harmonic module.
//!
//! Balls follow the open convention `B(x, r) = { y : |x - y| < r }` unless a
//! [`BallKind::Closed`] is requested explicitly.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;

/// Default cap on the number of points of a generated space.
pub const DEFAULT_POINT_CAP: usize = 200_000;
/// Default cap on the number of tuples of an enumerated simplex set.
pub const DEFAULT_TUPLE_CAP: usize = 20_000_000;
/// Slack allowed in the triangle inequality of loaded metrics.
pub const TRIANGLE_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("size limit exceeded: {what} would need {needed} entries (cap {cap})")]
    SizeLimit { what: &'static str, needed: u128, cap: u128 },
    #[error("invalid space: {0}")]
    Invalid(String),
    #[error("parse error at line {line}, field {field}: {reason}")]
    Parse { line: usize, field: usize, reason: String },
    #[error("triangle inequality violated for ({0}, {1}, {2}): d({0},{2}) = {3} > {4}")]
    Triangle(usize, usize, usize, f64, f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Group whose Cayley ball is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    FreeGroup(u8),
    FreeAbelian(u8),
}

impl std::str::FromStr for Group {
    type Err = SpaceError;

    /// `f2`, `f3`, ... for free groups, `z1`, `z2`, ... for free abelian groups.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SpaceError::Invalid(format!("unknown group `{s}` (expected f<rank> or z<rank>)"));
        let (kind, rank) = s.split_at(1.min(s.len()));
        let rank: u8 = rank.parse().map_err(|_| bad())?;
        match kind {
            "f" | "F" => Ok(Group::FreeGroup(rank)),
            "z" | "Z" => Ok(Group::FreeAbelian(rank)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BallKind {
    /// `|x - y| < r`
    Open,
    /// `|x - y| <= r`
    Closed,
}

impl BallKind {
    #[inline]
    pub fn contains(self, d: f64, r: f64) -> bool {
        match self {
            BallKind::Open => d < r,
            BallKind::Closed => d <= r,
        }
    }
}

/// Reduced word in a free group. Letter `+g` is generator `g` (1-based),
/// `-g` its inverse.
pub type Word = Vec<i8>;

#[derive(Debug, Clone, PartialEq)]
enum Metric {
    Dense(Vec<f64>),
    Words(Vec<Word>),
    Lattice(Vec<Vec<i64>>),
}

/// Right multiplication by generators: `neighbor[x][s]` is `x s` when it lies
/// inside the space.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTable {
    pub names: Vec<String>,
    /// index of `s^{-1}` for every generator `s`
    pub inverse: Vec<usize>,
    pub neighbor: Vec<Vec<Option<usize>>>,
    /// metric length of one generator step
    pub step: f64,
}

impl GeneratorTable {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Vertices with at least one generator leaving the space.
    pub fn truncation_boundary(&self) -> Vec<usize> {
        (0..self.neighbor.len()).filter(|&x| self.neighbor[x].iter().any(|n| n.is_none())).collect()
    }
}

/// A finite metric measure space.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMeasureSpace {
    weights: Vec<f64>,
    metric: Metric,
    labels: Option<Vec<String>>,
    generators: Option<GeneratorTable>,
    /// Unweighted adjacency for graph metrics; `hop` is the length of an edge.
    adjacency: Option<(Vec<Vec<usize>>, f64)>,
    diameter: f64,
    description: String,
}

fn letter_label(l: i8) -> char {
    let base = if l > 0 { b'a' } else { b'A' };
    (base + (l.unsigned_abs() - 1)) as char
}

fn word_label(w: &Word) -> String {
    if w.is_empty() {
        "1".to_string()
    } else {
        w.iter().map(|&l| letter_label(l)).collect()
    }
}

fn free_group_distance(x: &Word, y: &Word) -> f64 {
    let common = x.iter().zip(y).take_while(|(a, b)| a == b).count();
    (x.len() + y.len() - 2 * common) as f64
}

fn lattice_distance(x: &[i64], y: &[i64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<i64>() as f64
}

impl FiniteMeasureSpace {
    /// Space from an explicit row-major distance matrix; validates symmetry,
    /// zero diagonal, nonnegativity and the triangle inequality.
    pub fn from_distances(weights: Vec<f64>, dist: Vec<f64>, labels: Option<Vec<String>>) -> Result<Self, SpaceError> {
        let n = weights.len();
        if n == 0 {
            return Err(SpaceError::Invalid("space has no points".into()));
        }
        if dist.len() != n * n {
            return Err(SpaceError::Invalid(format!("distance matrix has {} entries, expected {}", dist.len(), n * n)));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(SpaceError::Invalid(format!("{} labels for {n} points", l.len())));
            }
        }
        validate_weights(&weights)?;
        validate_matrix(n, &dist)?;
        let diameter = dist.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            weights,
            metric: Metric::Dense(dist),
            labels,
            generators: None,
            adjacency: None,
            diameter,
            description: format!("explicit metric on {n} points"),
        })
    }

    /// A single atom of the given weight.
    pub fn single_point(weight: f64) -> Result<Self, SpaceError> {
        Self::from_distances(vec![weight], vec![0.0], None)
    }

    /// `n` points at mutual distance `d`, unit weights.
    pub fn uniform(n: usize, d: f64) -> Result<Self, SpaceError> {
        let dist = (0..n * n).map(|k| if k / n == k % n { 0.0 } else { d }).collect();
        Self::from_distances(vec![1.0; n], dist, None)
    }

    /// Path `0, 1, ..., n-1` with unit steps and unit weights.
    pub fn path(n: usize) -> Result<Self, SpaceError> {
        Self::grid_general(&[n], format!("path of {n} points"))
    }

    /// `w x h` grid with the L1 (graph) metric and unit weights.
    pub fn grid(w: usize, h: usize) -> Result<Self, SpaceError> {
        Self::grid_general(&[w, h], format!("{w}x{h} grid"))
    }

    fn grid_general(dims: &[usize], description: String) -> Result<Self, SpaceError> {
        let n: usize = dims.iter().product();
        if n == 0 {
            return Err(SpaceError::Invalid("grid with no points".into()));
        }
        check_cap("points", n as u128, DEFAULT_POINT_CAP as u128)?;
        let mut coords = Vec::with_capacity(n);
        for mut idx in 0..n {
            let mut c = vec![0i64; dims.len()];
            for (k, &d) in dims.iter().enumerate().rev() {
                c[k] = (idx % d) as i64;
                idx /= d;
            }
            coords.push(c);
        }
        let diameter = dims.iter().map(|&d| (d - 1) as f64).sum();
        Ok(Self::from_lattice(coords, diameter, description))
    }

    fn from_lattice(coords: Vec<Vec<i64>>, diameter: f64, description: String) -> Self {
        let rank = coords.first().map_or(0, |c| c.len());
        let index: HashMap<Vec<i64>, usize> = coords.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        let mut names = Vec::new();
        let mut inverse = Vec::new();
        for k in 0..rank {
            let axis = if rank == 1 { String::new() } else { format!("e{}", k + 1) };
            names.push(format!("+{axis}").trim_end().to_string());
            names.push(format!("-{axis}"));
            if rank == 1 {
                names[2 * k] = "+1".into();
                names[2 * k + 1] = "-1".into();
            }
            inverse.push(2 * k + 1);
            inverse.push(2 * k);
        }
        let neighbor: Vec<Vec<Option<usize>>> = coords
            .iter()
            .map(|c| {
                let mut row = Vec::with_capacity(2 * rank);
                for k in 0..rank {
                    for delta in [1i64, -1] {
                        let mut d = c.clone();
                        d[k] += delta;
                        row.push(index.get(&d).copied());
                    }
                }
                row
            })
            .collect();
        let labels = coords
            .iter()
            .map(|c| {
                if rank == 1 {
                    c[0].to_string()
                } else {
                    format!("({})", c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
                }
            })
            .collect();
        let table = GeneratorTable { names, inverse, neighbor, step: 1.0 };
        let adjacency = adjacency_from(&table);
        Self {
            weights: vec![1.0; coords.len()],
            metric: Metric::Lattice(coords),
            labels: Some(labels),
            generators: Some(table),
            adjacency: Some((adjacency, 1.0)),
            diameter,
            description,
        }
    }

    /// All elements of word length at most `radius`, unit weights, word metric.
    pub fn cayley_ball(group: Group, radius: u32) -> Result<Self, SpaceError> {
        Self::cayley_ball_with_cap(group, radius, DEFAULT_POINT_CAP)
    }

    pub fn cayley_ball_with_cap(group: Group, radius: u32, cap: usize) -> Result<Self, SpaceError> {
        if radius < 1 {
            return Err(SpaceError::Invalid("radius must be at least 1".into()));
        }
        match group {
            Group::FreeGroup(rank) => {
                if !(1..=26).contains(&rank) {
                    return Err(SpaceError::Invalid("free group rank must be in 1..=26".into()));
                }
                let (r, k) = (rank as u128, radius as u128);
                // 1 + 2r * sum_{j<k} (2r-1)^j
                let mut count: u128 = 1;
                let mut sphere: u128 = 2 * r;
                for _ in 0..k {
                    count = count.saturating_add(sphere);
                    sphere = sphere.saturating_mul(2 * r - 1);
                }
                check_cap("points", count, cap as u128)?;
                Ok(Self::free_group_ball(rank, radius))
            }
            Group::FreeAbelian(rank) => {
                if rank < 1 {
                    return Err(SpaceError::Invalid("rank must be at least 1".into()));
                }
                // crude upper bound (2R+1)^rank
                let bound = (2 * radius as u128 + 1).saturating_pow(rank as u32);
                let mut coords = Vec::new();
                if bound <= cap as u128 {
                    lattice_ball(rank as usize, radius as i64, &mut Vec::new(), &mut coords);
                } else {
                    lattice_ball_capped(rank as usize, radius as i64, cap, &mut coords)?;
                }
                coords.sort_by(|a, b| {
                    let la: i64 = a.iter().map(|v| v.abs()).sum();
                    let lb: i64 = b.iter().map(|v| v.abs()).sum();
                    la.cmp(&lb).then_with(|| a.cmp(b))
                });
                let diameter = 2.0 * radius as f64;
                Ok(Self::from_lattice(coords, diameter, format!("Z^{rank} ball of radius {radius}")))
            }
        }
    }

    fn free_group_ball(rank: u8, radius: u32) -> Self {
        let letters: Vec<i8> = (1..=rank as i8).flat_map(|g| [g, -g]).collect();
        let mut words: Vec<Word> = vec![Vec::new()];
        let mut start = 0;
        for _ in 0..radius {
            let end = words.len();
            for i in start..end {
                for &l in &letters {
                    let w = &words[i];
                    if w.last() == Some(&-l) {
                        continue;
                    }
                    let mut nw = w.clone();
                    nw.push(l);
                    words.push(nw);
                }
            }
            start = end;
        }
        let index: HashMap<&[i8], usize> = words.iter().enumerate().map(|(i, w)| (w.as_slice(), i)).collect();
        let neighbor: Vec<Vec<Option<usize>>> = words
            .iter()
            .map(|w| {
                letters
                    .iter()
                    .map(|&l| {
                        if w.last() == Some(&-l) {
                            index.get(&w[..w.len() - 1]).copied()
                        } else {
                            let mut nw = w.clone();
                            nw.push(l);
                            index.get(nw.as_slice()).copied()
                        }
                    })
                    .collect()
            })
            .collect();
        let names = letters.iter().map(|&l| letter_label(l).to_string()).collect();
        let inverse = (0..letters.len()).map(|k| k ^ 1).collect();
        let table = GeneratorTable { names, inverse, neighbor, step: 1.0 };
        let adjacency = adjacency_from(&table);
        let labels = words.iter().map(word_label).collect();
        let n = words.len();
        Self {
            weights: vec![1.0; n],
            metric: Metric::Words(words),
            labels: Some(labels),
            generators: Some(table),
            adjacency: Some((adjacency, 1.0)),
            diameter: 2.0 * radius as f64,
            description: format!("F_{rank} ball of radius {radius}"),
        }
    }

    /// Replaces the measure.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self, SpaceError> {
        if weights.len() != self.len() {
            return Err(SpaceError::Invalid("weight vector has the wrong length".into()));
        }
        validate_weights(&weights)?;
        self.weights = weights;
        Ok(self)
    }

    /// Graph with every edge of this space's generator graph subdivided once.
    /// Distances are halved hop counts, so original points keep their
    /// distances; the original vertices keep indices `0..n`, midpoints follow
    /// in edge order. Returns the space and, for each midpoint, its edge.
    pub fn subdivided(&self) -> Result<(Self, Vec<(usize, usize)>), SpaceError> {
        let (adj, hop) = self
            .adjacency
            .as_ref()
            .ok_or_else(|| SpaceError::Invalid("subdivision needs a graph structure".into()))?;
        let n = self.len();
        let mut edges = Vec::new();
        for (x, nbrs) in adj.iter().enumerate() {
            for &y in nbrs {
                if x < y {
                    edges.push((x, y));
                }
            }
        }
        let m = n + edges.len();
        check_cap("distance entries", (m * m) as u128, 50_000_000)?;
        let mut sub_adj: Vec<Vec<usize>> = adj.clone();
        sub_adj.resize(m, Vec::new());
        for (k, &(x, y)) in edges.iter().enumerate() {
            let mid = n + k;
            sub_adj[x].retain(|&z| z != y);
            sub_adj[y].retain(|&z| z != x);
            sub_adj[x].push(mid);
            sub_adj[y].push(mid);
            sub_adj[mid] = vec![x, y];
        }
        for row in &mut sub_adj {
            row.sort_unstable();
        }
        let half = hop / 2.0;
        let dist = all_pairs_bfs(&sub_adj, half);
        let mut labels: Vec<String> = (0..n).map(|i| self.label(i)).collect();
        for &(x, y) in &edges {
            labels.push(format!("[{}|{}]", self.label(x), self.label(y)));
        }
        let mut space = Self::from_distances(vec![1.0; m], dist, Some(labels))?;
        space.adjacency = Some((sub_adj, half));
        space.description = format!("subdivision of {}", self.description);
        Ok((space, edges))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total_measure(&self) -> f64 {
        exec::pairwise_sum(&self.weights)
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, i: usize) -> String {
        self.labels.as_ref().map_or_else(|| i.to_string(), |l| l[i].clone())
    }

    pub fn generators(&self) -> Option<&GeneratorTable> {
        self.generators.as_ref()
    }

    /// Reduced word of point `i` for free-group balls.
    pub fn word(&self, i: usize) -> Option<&Word> {
        match &self.metric {
            Metric::Words(w) => Some(&w[i]),
            _ => None,
        }
    }

    /// Lattice coordinates of point `i` for paths, grids and abelian balls.
    pub fn coords(&self, i: usize) -> Option<&[i64]> {
        match &self.metric {
            Metric::Lattice(c) => Some(&c[i]),
            _ => None,
        }
    }

    /// Index of the point with the given label.
    pub fn index_of_label(&self, label: &str) -> Option<usize> {
        self.labels.as_ref()?.iter().position(|l| l == label)
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        match &self.metric {
            Metric::Dense(d) => d[i * self.len() + j],
            Metric::Words(w) => free_group_distance(&w[i], &w[j]),
            Metric::Lattice(c) => lattice_distance(&c[i], &c[j]),
        }
    }

    /// Full distance matrix, row-major.
    pub fn distance_matrix(&self) -> Result<Vec<f64>, SpaceError> {
        let n = self.len();
        check_cap("distance entries", (n as u128) * (n as u128), 100_000_000)?;
        Ok(exec::collect_by(n * n, |k| self.dist(k / n, k % n)))
    }

    /// Sorted indices of the ball around `x`.
    pub fn ball(&self, x: usize, r: f64, kind: BallKind) -> Vec<usize> {
        if let Some((adj, hop)) = &self.adjacency {
            // BFS up to enough hops, then filter with the exact metric
            let max_hops = (r / hop).ceil() as usize + 1;
            let mut seen = vec![x];
            let mut depth = HashMap::new();
            depth.insert(x, 0usize);
            let mut q = VecDeque::from([x]);
            while let Some(v) = q.pop_front() {
                let dv = depth[&v];
                if dv == max_hops {
                    continue;
                }
                for &w in &adj[v] {
                    if let std::collections::hash_map::Entry::Vacant(e) = depth.entry(w) {
                        e.insert(dv + 1);
                        seen.push(w);
                        q.push_back(w);
                    }
                }
            }
            let mut out: Vec<usize> = seen.into_iter().filter(|&y| kind.contains(self.dist(x, y), r)).collect();
            out.sort_unstable();
            out
        } else {
            (0..self.len()).filter(|&y| kind.contains(self.dist(x, y), r)).collect()
        }
    }

    pub fn ball_measure(&self, x: usize, r: f64, kind: BallKind) -> f64 {
        let b = self.ball(x, r, kind);
        exec::pairwise_sum(&b.iter().map(|&y| self.weights[y]).collect::<Vec<_>>())
    }

    /// Points with a missing generator neighbor (the truncation boundary of a
    /// generated space). Empty for explicit metrics.
    pub fn truncation_boundary(&self) -> Vec<usize> {
        self.generators.as_ref().map(|g| g.truncation_boundary()).unwrap_or_default()
    }

    /// Writes the `.sp` text format.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SpaceError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    /// `.sp` format: header `n k` (`k = 1` when a label section follows,
    /// else 0), one line of weights, `n` lines of distances, then `n` label
    /// lines when `k = 1`.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), SpaceError> {
        let n = self.len();
        let has_labels = self.labels.is_some();
        writeln!(w, "{n} {}", u8::from(has_labels))?;
        writeln!(w, "{}", join_floats(&self.weights))?;
        let mut line = String::new();
        for i in 0..n {
            line.clear();
            for j in 0..n {
                if j > 0 {
                    line.push(' ');
                }
                let _ = write!(line, "{}", self.dist(i, j));
            }
            writeln!(w, "{line}")?;
        }
        if let Some(labels) = &self.labels {
            for l in labels {
                writeln!(w, "{l}")?;
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SpaceError> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(f)
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, SpaceError> {
        let lines: Vec<String> = r.lines().collect::<Result<_, _>>()?;
        let mut it = lines.iter().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| -> Result<(usize, &String), SpaceError> {
            it.next().ok_or_else(|| SpaceError::Parse { line: lines.len() + 1, field: 0, reason: format!("missing {what}") })
        };
        let (hl, header) = next("header")?;
        let hf: Vec<&str> = header.split_whitespace().collect();
        if hf.len() != 2 {
            return Err(SpaceError::Parse { line: hl + 1, field: 0, reason: "header must be `n k`".into() });
        }
        let n: usize = hf[0]
            .parse()
            .map_err(|e| SpaceError::Parse { line: hl + 1, field: 1, reason: format!("point count: {e}") })?;
        let k: u8 = hf[1]
            .parse()
            .map_err(|e| SpaceError::Parse { line: hl + 1, field: 2, reason: format!("label flag: {e}") })?;
        if k > 1 {
            return Err(SpaceError::Parse { line: hl + 1, field: 2, reason: "label flag must be 0 or 1".into() });
        }
        let (wl, wline) = next("weight line")?;
        let weights = parse_floats(wline, wl + 1, n)?;
        for (j, &w) in weights.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(SpaceError::Parse { line: wl + 1, field: j + 1, reason: format!("weight {w} is not positive") });
            }
        }
        let mut dist = Vec::with_capacity(n * n);
        let mut line_of_row = Vec::with_capacity(n);
        for _ in 0..n {
            let (dl, dline) = next("distance row")?;
            line_of_row.push(dl + 1);
            dist.extend(parse_floats(dline, dl + 1, n)?);
        }
        for i in 0..n {
            for j in 0..n {
                let d = dist[i * n + j];
                if d < 0.0 {
                    return Err(SpaceError::Parse { line: line_of_row[i], field: j + 1, reason: format!("negative distance {d}") });
                }
                if i == j && d != 0.0 {
                    return Err(SpaceError::Parse { line: line_of_row[i], field: j + 1, reason: "nonzero diagonal".into() });
                }
                if d != dist[j * n + i] {
                    return Err(SpaceError::Parse {
                        line: line_of_row[i],
                        field: j + 1,
                        reason: format!("asymmetric: d({i},{j}) = {d} but d({j},{i}) = {}", dist[j * n + i]),
                    });
                }
            }
        }
        let labels = if k == 1 {
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                v.push(next("label")?.1.trim().to_string());
            }
            Some(v)
        } else {
            None
        };
        Self::from_distances(weights, dist, labels)
    }
}

fn join_floats(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_floats(line: &str, line_no: usize, expected: usize) -> Result<Vec<f64>, SpaceError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != expected {
        return Err(SpaceError::Parse {
            line: line_no,
            field: fields.len().min(expected) + 1,
            reason: format!("expected {expected} fields, found {}", fields.len()),
        });
    }
    fields
        .iter()
        .enumerate()
        .map(|(j, s)| {
            s.parse::<f64>()
                .map_err(|e| SpaceError::Parse { line: line_no, field: j + 1, reason: format!("`{s}`: {e}") })
                .and_then(|v| {
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(SpaceError::Parse { line: line_no, field: j + 1, reason: "non-finite value".into() })
                    }
                })
        })
        .collect()
}

fn check_cap(what: &'static str, needed: u128, cap: u128) -> Result<(), SpaceError> {
    if needed > cap {
        Err(SpaceError::SizeLimit { what, needed, cap })
    } else {
        Ok(())
    }
}

fn validate_weights(weights: &[f64]) -> Result<(), SpaceError> {
    if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
        return Err(SpaceError::Invalid(format!("weight of point {i} is not positive: {w}")));
    }
    Ok(())
}

fn validate_matrix(n: usize, d: &[f64]) -> Result<(), SpaceError> {
    for i in 0..n {
        if d[i * n + i] != 0.0 {
            return Err(SpaceError::Invalid(format!("nonzero diagonal at {i}")));
        }
        for j in 0..n {
            let v = d[i * n + j];
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SpaceError::Invalid(format!("bad distance d({i},{j}) = {v}")));
            }
            if v != d[j * n + i] {
                return Err(SpaceError::Invalid(format!("asymmetric distances at ({i},{j})")));
            }
        }
    }
    let violation = exec::collect_by(n, |x| {
        for y in 0..n {
            for z in 0..n {
                let direct = d[x * n + z];
                let via = d[x * n + y] + d[y * n + z];
                if direct > via + TRIANGLE_SLACK {
                    return Some((x, y, z, direct, via));
                }
            }
        }
        None
    });
    if let Some((x, y, z, direct, via)) = violation.into_iter().flatten().next() {
        return Err(SpaceError::Triangle(x, y, z, direct, via));
    }
    Ok(())
}

fn adjacency_from(table: &GeneratorTable) -> Vec<Vec<usize>> {
    table
        .neighbor
        .iter()
        .map(|row| {
            let mut v: Vec<usize> = row.iter().flatten().copied().collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect()
}

/// Hop distances from every vertex times `hop`; unreachable pairs are an error
/// for callers, reported as `f64::INFINITY`.
pub fn all_pairs_bfs(adj: &[Vec<usize>], hop: f64) -> Vec<f64> {
    let n = adj.len();
    let rows = exec::collect_by(n, |s| bfs_hops(adj, s).into_iter().map(|h| h.map_or(f64::INFINITY, |h| h as f64 * hop)).collect::<Vec<_>>());
    rows.into_iter().flatten().collect()
}

/// Hop counts from `source`, `None` for unreachable vertices.
pub fn bfs_hops(adj: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut depth = vec![None; adj.len()];
    depth[source] = Some(0);
    let mut q = VecDeque::from([source]);
    while let Some(v) = q.pop_front() {
        let dv = depth[v].unwrap();
        for &w in &adj[v] {
            if depth[w].is_none() {
                depth[w] = Some(dv + 1);
                q.push_back(w);
            }
        }
    }
    depth
}

fn lattice_ball(rank: usize, budget: i64, prefix: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
    if prefix.len() == rank {
        out.push(prefix.clone());
        return;
    }
    for v in -budget..=budget {
        prefix.push(v);
        lattice_ball(rank, budget - v.abs(), prefix, out);
        prefix.pop();
    }
}

fn lattice_ball_capped(rank: usize, radius: i64, cap: usize, out: &mut Vec<Vec<i64>>) -> Result<(), SpaceError> {
    fn rec(rank: usize, budget: i64, prefix: &mut Vec<i64>, out: &mut Vec<Vec<i64>>, cap: usize) -> bool {
        if prefix.len() == rank {
            out.push(prefix.clone());
            return out.len() <= cap;
        }
        for v in -budget..=budget {
            prefix.push(v);
            let ok = rec(rank, budget - v.abs(), prefix, out, cap);
            prefix.pop();
            if !ok {
                return false;
            }
        }
        true
    }
    if rec(rank, radius, &mut Vec::new(), out, cap) {
        Ok(())
    } else {
        Err(SpaceError::SizeLimit { what: "points", needed: cap as u128 + 1, cap: cap as u128 })
    }
}

/// Tuple convention for [`enumerate_simplices`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TupleMode {
    /// All ordered tuples, repeats allowed (the Alexander-Spanier `X^{k+1}`).
    Ordered,
    /// Ordered tuples of pairwise distinct points (simplicial convention).
    Distinct,
}

/// Tuples of diameter at most `scale`, in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSet {
    pub degree: usize,
    pub scale: f64,
    pub mode: TupleMode,
    /// flattened tuples, `degree + 1` indices each
    tuples: Vec<usize>,
    /// product measure of each tuple
    weights: Vec<f64>,
}

impl SimplexSet {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.degree + 1
    }

    pub fn tuple(&self, i: usize) -> &[usize] {
        let a = self.arity();
        &self.tuples[i * a..(i + 1) * a]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        self.tuples.chunks_exact(self.arity()).zip(self.weights.iter().copied())
    }
}

/// Exhaustive enumeration of `X_s^{k+1}`.
pub fn enumerate_simplices(space: &FiniteMeasureSpace, k: usize, s: f64, mode: TupleMode) -> Result<SimplexSet, SpaceError> {
    enumerate_simplices_with_cap(space, k, s, mode, DEFAULT_TUPLE_CAP)
}

pub fn enumerate_simplices_with_cap(
    space: &FiniteMeasureSpace,
    k: usize,
    s: f64,
    mode: TupleMode,
    cap: usize,
) -> Result<SimplexSet, SpaceError> {
    assert!(s >= 0.0, "scale must be nonnegative");
    let n = space.len();
    let arity = k + 1;
    let balls: Vec<Vec<usize>> = exec::collect_by(n, |x| space.ball(x, s, BallKind::Closed));
    // upper bound on the count to fail fast on blowups
    let bound: u128 = balls.iter().map(|b| (b.len() as u128).saturating_pow(k as u32)).sum();
    if bound > cap as u128 {
        // the bound may be loose; count exactly before refusing
        let exact: u128 = exec::collect_by(n, |x| count_from(space, &balls[x], x, arity, s, mode)).into_iter().sum();
        check_cap("tuples", exact, cap as u128)?;
    }
    let per_root = exec::collect_by(n, |x0| {
        let mut tuples = Vec::new();
        let mut weights = Vec::new();
        let mut stack = vec![x0];
        extend(space, &balls[x0], &mut stack, arity, s, mode, &mut tuples, &mut weights);
        (tuples, weights)
    });
    let mut tuples = Vec::new();
    let mut weights = Vec::new();
    for (t, w) in per_root {
        tuples.extend(t);
        weights.extend(w);
    }
    Ok(SimplexSet { degree: k, scale: s, mode, tuples, weights })
}

fn admissible(space: &FiniteMeasureSpace, stack: &[usize], y: usize, s: f64, mode: TupleMode) -> bool {
    stack.iter().all(|&x| (mode == TupleMode::Ordered || x != y) && space.dist(x, y) <= s)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    space: &FiniteMeasureSpace,
    candidates: &[usize],
    stack: &mut Vec<usize>,
    arity: usize,
    s: f64,
    mode: TupleMode,
    tuples: &mut Vec<usize>,
    weights: &mut Vec<f64>,
) {
    if stack.len() == arity {
        tuples.extend_from_slice(stack);
        weights.push(stack.iter().map(|&x| space.weight(x)).product());
        return;
    }
    for &y in candidates {
        if admissible(space, stack, y, s, mode) {
            stack.push(y);
            extend(space, candidates, stack, arity, s, mode, tuples, weights);
            stack.pop();
        }
    }
}

fn count_from(space: &FiniteMeasureSpace, candidates: &[usize], x0: usize, arity: usize, s: f64, mode: TupleMode) -> u128 {
    fn rec(space: &FiniteMeasureSpace, c: &[usize], stack: &mut Vec<usize>, arity: usize, s: f64, mode: TupleMode) -> u128 {
        if stack.len() == arity {
            return 1;
        }
        let mut total = 0;
        for &y in c {
            if admissible(space, stack, y, s, mode) {
                stack.push(y);
                total += rec(space, c, stack, arity, s, mode);
                stack.pop();
            }
        }
        total
    }
    rec(space, candidates, &mut vec![x0], arity, s, mode)
}

/// Ball-measure bounds `v(r)`, `V(r)` with the points attaining them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallBounds {
    pub v: f64,
    pub v_at: usize,
    pub big_v: f64,
    pub big_v_at: usize,
}

/// `inf` and `sup` of `mu(B(x, r))` over the given points.
pub fn ball_bounds(space: &FiniteMeasureSpace, r: f64, kind: BallKind, points: &[usize]) -> Option<BallBounds> {
    if points.is_empty() {
        return None;
    }
    let measures = exec::collect_by(points.len(), |i| space.ball_measure(points[i], r, kind));
    let mut b = BallBounds { v: f64::INFINITY, v_at: points[0], big_v: f64::NEG_INFINITY, big_v_at: points[0] };
    for (&x, &m) in points.iter().zip(&measures) {
        if m < b.v {
            b.v = m;
            b.v_at = x;
        }
        if m > b.big_v {
            b.big_v = m;
            b.big_v_at = x;
        }
    }
    Some(b)
}

/// Bounded-geometry statistics at radius `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryStats {
    pub r: f64,
    pub kind: BallKind,
    pub v: f64,
    pub big_v: f64,
    pub v_at: usize,
    pub big_v_at: usize,
    /// Bounds over points at distance at least `r` from the truncation
    /// boundary; `None` when the space has no boundary or no such point.
    pub interior: Option<BallBounds>,
    pub midpoint_constant: f64,
}

pub fn geometry_stats(space: &FiniteMeasureSpace, r: f64, kind: BallKind) -> GeometryStats {
    assert!(r > 0.0, "radius must be positive");
    let all: Vec<usize> = (0..space.len()).collect();
    let b = ball_bounds(space, r, kind, &all).expect("nonempty space");
    let boundary = space.truncation_boundary();
    let interior = if boundary.is_empty() {
        None
    } else {
        let pts: Vec<usize> = all
            .iter()
            .copied()
            .filter(|&x| boundary.iter().all(|&z| space.dist(x, z) >= r))
            .collect();
        ball_bounds(space, r, kind, &pts)
    };
    GeometryStats {
        r,
        kind,
        v: b.v,
        big_v: b.big_v,
        v_at: b.v_at,
        big_v_at: b.big_v_at,
        interior,
        midpoint_constant: midpoint_constant(space),
    }
}

/// Smallest `c` such that every pair `x, y` has a `z` with
/// `|x - z|, |y - z| <= |x - y| / 2 + c`, by exhaustive search.
pub fn midpoint_constant(space: &FiniteMeasureSpace) -> f64 {
    let n = space.len();
    exec::max_by(n, |x| {
        let mut worst = 0.0f64;
        for y in x + 1..n {
            let half = space.dist(x, y) / 2.0;
            let mut best = f64::INFINITY;
            for z in 0..n {
                let m = space.dist(x, z).max(space.dist(y, z));
                if m < best {
                    best = m;
                    if best <= half {
                        break;
                    }
                }
            }
            worst = worst.max(best - half);
        }
        worst
    })
    .max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_group_sphere_sizes() {
        let b1 = FiniteMeasureSpace::cayley_ball(Group::FreeGroup(2), 1).unwrap();
        assert_eq!(b1.len(), 5);
        let labels: Vec<&str> = b1.labels().unwrap().iter().map(|s| s.as_str()).collect();
        assert_eq!(labels, ["1", "a", "A", "b", "B"]);
        let b3 = FiniteMeasureSpace::cayley_ball(Group::FreeGroup(2), 3).unwrap();
        assert_eq!(b3.len(), 53);
        for k in 1..=3usize {
            let count = (0..b3.len()).filter(|&i| b3.word(i).unwrap().len() == k).count();
            assert_eq!(count, 4 * 3usize.pow(k as u32 - 1));
        }
    }

    #[test]
    fn word_metric_matches_bfs() {
        let b = FiniteMeasureSpace::cayley_ball(Group::FreeGroup(2), 3).unwrap();
        let adj = adjacency_from(b.generators().unwrap());
        let d = all_pairs_bfs(&adj, 1.0);
        let n = b.len();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(b.dist(i, j), d[i * n + j]);
            }
        }
        let z = FiniteMeasureSpace::cayley_ball(Group::FreeAbelian(2), 3).unwrap();
        let adj = adjacency_from(z.generators().unwrap());
        let d = all_pairs_bfs(&adj, 1.0);
        let n = z.len();
        assert_eq!(n, 25);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(z.dist(i, j), d[i * n + j]);
            }
        }
    }

    #[test]
    fn abelian_rank_one_is_a_path() {
        let z = FiniteMeasureSpace::cayley_ball(Group::FreeAbelian(1), 5).unwrap();
        assert_eq!(z.len(), 11);
        for i in 0..11 {
            for j in 0..11 {
                let (a, b) = (z.coords(i).unwrap()[0], z.coords(j).unwrap()[0]);
                assert_eq!(z.dist(i, j), (a - b).abs() as f64);
            }
        }
    }

    #[test]
    fn size_limit() {
        let r = FiniteMeasureSpace::cayley_ball_with_cap(Group::FreeGroup(2), 10, 1000);
        assert!(matches!(r, Err(SpaceError::SizeLimit { .. })));
        let r = FiniteMeasureSpace::cayley_ball_with_cap(Group::FreeAbelian(3), 10, 1000);
        assert!(matches!(r, Err(SpaceError::SizeLimit { .. })));
    }

    #[test]
    fn simplex_examples() {
        let tri = FiniteMeasureSpace::uniform(3, 1.0).unwrap();
        let s = enumerate_simplices(&tri, 1, 0.5, TupleMode::Ordered).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|(t, _)| t[0] == t[1]));
        assert_eq!(enumerate_simplices(&tri, 1, 1.0, TupleMode::Ordered).unwrap().len(), 9);
        let p = FiniteMeasureSpace::path(5).unwrap();
        assert_eq!(enumerate_simplices(&p, 1, 2.0, TupleMode::Ordered).unwrap().len(), 19);
        assert_eq!(enumerate_simplices(&p, 1, 2.0, TupleMode::Distinct).unwrap().len(), 14);
    }

    #[test]
    fn simplices_are_lexicographic_and_capped() {
        let p = FiniteMeasureSpace::path(6).unwrap();
        let s = enumerate_simplices(&p, 2, 2.0, TupleMode::Ordered).unwrap();
        let tuples: Vec<Vec<usize>> = s.iter().map(|(t, _)| t.to_vec()).collect();
        let mut sorted = tuples.clone();
        sorted.sort();
        assert_eq!(tuples, sorted);
        let r = enumerate_simplices_with_cap(&p, 3, 10.0, TupleMode::Ordered, 100);
        assert!(matches!(r, Err(SpaceError::SizeLimit { .. })));
    }

    #[test]
    fn geometry_examples() {
        let p = FiniteMeasureSpace::path(11).unwrap();
        let g = geometry_stats(&p, 1.5, BallKind::Open);
        assert_eq!((g.v, g.big_v), (2.0, 3.0));
        assert!(g.v_at == 0 || g.v_at == 10);
        let interior = g.interior.unwrap();
        assert_eq!((interior.v, interior.big_v), (3.0, 3.0));
        assert_eq!(g.midpoint_constant, 0.5);

        let one = FiniteMeasureSpace::single_point(2.5).unwrap();
        let g = geometry_stats(&one, 7.0, BallKind::Open);
        assert_eq!((g.v, g.big_v), (2.5, 2.5));

        let f2 = FiniteMeasureSpace::cayley_ball(Group::FreeGroup(2), 2).unwrap();
        let g = geometry_stats(&f2, 1.5, BallKind::Open);
        assert_eq!(g.big_v, 5.0);
        assert_eq!(g.big_v_at, 0);
        assert_eq!(g.v, 2.0);
    }

    #[test]
    fn open_and_closed_balls_differ_on_the_lattice() {
        let p = FiniteMeasureSpace::path(9).unwrap();
        assert_eq!(p.ball(4, 2.0, BallKind::Open), vec![3, 4, 5]);
        assert_eq!(p.ball(4, 2.0, BallKind::Closed), vec![2, 3, 4, 5, 6]);
    }

    #[test]
    fn subdivision_preserves_vertex_distances() {
        let f2 = FiniteMeasureSpace::cayley_ball(Group::FreeGroup(2), 2).unwrap();
        let (sub, edges) = f2.subdivided().unwrap();
        assert_eq!(edges.len(), f2.len() - 1);
        assert_eq!(sub.len(), 2 * f2.len() - 1);
        for i in 0..f2.len() {
            for j in 0..f2.len() {
                assert_eq!(sub.dist(i, j), f2.dist(i, j));
            }
        }
        let mid = f2.len();
        assert_eq!(sub.dist(mid, edges[0].0), 0.5);
    }

    #[test]
    fn save_load_round_trip() {
        let f2 = FiniteMeasureSpace::cayley_ball(Group::FreeGroup(2), 2).unwrap();
        let mut buf = Vec::new();
        f2.write_to(&mut buf).unwrap();
        let back = FiniteMeasureSpace::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.len(), f2.len());
        assert_eq!(back.labels(), f2.labels());
        assert_eq!(back.weights(), f2.weights());
        for i in 0..f2.len() {
            for j in 0..f2.len() {
                assert_eq!(back.dist(i, j), f2.dist(i, j));
            }
        }
    }

    #[test]
    fn load_rejects_bad_files() {
        let asym = "2 0\n1 1\n0 1\n2 0\n";
        assert!(matches!(FiniteMeasureSpace::read_from(asym.as_bytes()), Err(SpaceError::Parse { line: 3, field: 2, .. })));
        let tri = "3 0\n1 1 1\n0 1 5\n1 0 1\n5 1 0\n";
        match FiniteMeasureSpace::read_from(tri.as_bytes()) {
            Err(SpaceError::Triangle(x, _, z, _, _)) => assert!((x, z) == (0, 2) || (x, z) == (2, 0)),
            other => panic!("expected triangle error, got {other:?}"),
        }
        let short = "2 0\n1\n";
        assert!(matches!(FiniteMeasureSpace::read_from(short.as_bytes()), Err(SpaceError::Parse { line: 2, .. })));
        let neg_w = "1 0\n-1\n0\n";
        assert!(FiniteMeasureSpace::read_from(neg_w.as_bytes()).is_err());
    }

    #[test]
    fn group_parse() {
        assert_eq!("f2".parse::<Group>().unwrap(), Group::FreeGroup(2));
        assert_eq!("z3".parse::<Group>().unwrap(), Group::FreeAbelian(3));
        assert!("q2".parse::<Group>().is_err());
    }
}
