//! Spatial weights: sparse neighbour lists with binary or row-standardized
//! values, built from polygon contiguity, k nearest neighbours or regular
//! lattices.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::geometry::{point_segment_distance, BBox, Point};
use crate::ingest::AreaUnit;

/// Vertex snapping tolerance for contiguity detection, in degrees.
pub const SNAP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardization {
    Binary,
    Row,
}

impl Standardization {
    fn as_str(&self) -> &'static str {
        match self {
            Standardization::Binary => "binary",
            Standardization::Row => "row",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contiguity {
    Rook,
    Queen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialWeights {
    n: usize,
    neighbours: Vec<Vec<(usize, f64)>>,
    standardization: Standardization,
    s0: f64,
    islands: Vec<usize>,
}

impl SpatialWeights {
    /// Validates and wraps per-unit neighbour lists. Lists are sorted by
    /// neighbour index; zero-weight entries are dropped.
    pub fn from_neighbours(mut neighbours: Vec<Vec<(usize, f64)>>, standardization: Standardization) -> Result<Self> {
        let n = neighbours.len();
        for (i, list) in neighbours.iter_mut().enumerate() {
            list.retain(|&(_, w)| w != 0.0);
            for &(j, w) in list.iter() {
                if j >= n {
                    return Err(Error::InvalidInput(format!("neighbour index {j} out of range for n = {n}")));
                }
                if j == i {
                    return Err(Error::InvalidInput(format!("self-neighbour at unit {i}")));
                }
                if !(w.is_finite() && w > 0.0) {
                    return Err(Error::InvalidInput(format!("weight {w} at ({i}, {j}) must be positive and finite")));
                }
            }
            list.sort_by_key(|&(j, _)| j);
            if list.windows(2).any(|p| p[0].0 == p[1].0) {
                return Err(Error::InvalidInput(format!("duplicate neighbour in row {i}")));
            }
        }
        let mut w = SpatialWeights {
            n,
            neighbours,
            standardization,
            s0: 0.0,
            islands: vec![],
        };
        w.refresh();
        Ok(w)
    }

    /// Binary weights from an adjacency pattern.
    pub fn from_adjacency(adjacency: &[BTreeSet<usize>]) -> Self {
        let neighbours = adjacency
            .iter()
            .map(|s| s.iter().map(|&j| (j, 1.0)).collect())
            .collect();
        Self::from_neighbours(neighbours, Standardization::Binary).expect("adjacency sets are valid")
    }

    /// Binary contiguity on a `rows x cols` lattice, units numbered row-major.
    pub fn lattice(rows: usize, cols: usize, contiguity: Contiguity) -> Self {
        let mut adj = vec![BTreeSet::new(); rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        if (dr == 0 && dc == 0) || (contiguity == Contiguity::Rook && dr != 0 && dc != 0) {
                            continue;
                        }
                        let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                        if rr >= 0 && cc >= 0 && (rr as usize) < rows && (cc as usize) < cols {
                            adj[r * cols + c].insert(rr as usize * cols + cc as usize);
                        }
                    }
                }
            }
        }
        Self::from_adjacency(&adj)
    }

    fn refresh(&mut self) {
        self.s0 = self.recompute_s0();
        self.islands = (0..self.n).filter(|&i| self.neighbours[i].is_empty()).collect();
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbours(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbours[i]
    }

    pub fn standardization(&self) -> Standardization {
        self.standardization
    }

    /// Sum of all weights.
    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn recompute_s0(&self) -> f64 {
        self.neighbours.iter().flatten().map(|&(_, w)| w).sum()
    }

    /// Units with no neighbours.
    pub fn islands(&self) -> &[usize] {
        &self.islands
    }

    pub fn is_island(&self, i: usize) -> bool {
        self.neighbours[i].is_empty()
    }

    pub fn n_active(&self) -> usize {
        self.n - self.islands.len()
    }

    pub fn n_links(&self) -> usize {
        self.neighbours.iter().map(Vec::len).sum()
    }

    /// Weighted sum of `values` over each unit's neighbours.
    pub fn lag(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.n, "lag: length mismatch");
        self.neighbours
            .iter()
            .map(|list| list.iter().map(|&(j, w)| w * values[j]).sum())
            .collect()
    }

    pub fn has_symmetric_pattern(&self) -> bool {
        (0..self.n).all(|i| {
            self.neighbours[i]
                .iter()
                .all(|&(j, _)| self.neighbours[j].binary_search_by_key(&i, |&(k, _)| k).is_ok())
        })
    }

    pub fn adjacency(&self) -> Vec<BTreeSet<usize>> {
        self.neighbours
            .iter()
            .map(|l| l.iter().map(|&(j, _)| j).collect())
            .collect()
    }

    /// Plain-text sparse form: a header `n standardization` followed by
    /// one `i j w` triplet per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.standardization.as_str());
        for (i, list) in self.neighbours.iter().enumerate() {
            for &(j, w) in list {
                let _ = writeln!(out, "{i} {j} {w}");
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Schema("weights: empty file".into()))?;
        let mut parts = header.split_whitespace();
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Schema(format!("weights: bad header '{header}'")))?;
        let standardization = match parts.next() {
            Some("binary") => Standardization::Binary,
            Some("row") => Standardization::Row,
            other => return Err(Error::Schema(format!("weights: unknown standardization {other:?}"))),
        };
        let mut neighbours = vec![Vec::new(); n];
        for (k, line) in lines.enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Schema(format!("weights: malformed triplet on line {}: '{line}'", k + 2));
            if f.len() != 3 {
                return Err(bad());
            }
            let i: usize = f[0].parse().map_err(|_| bad())?;
            let j: usize = f[1].parse().map_err(|_| bad())?;
            let w: f64 = f[2].parse().map_err(|_| bad())?;
            if i >= n {
                return Err(bad());
            }
            neighbours[i].push((j, w));
        }
        Self::from_neighbours(neighbours, standardization)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_text(&text)
    }
}

/// Divides every row by its sum. Islands stay empty.
pub fn row_standardize(w: &SpatialWeights) -> SpatialWeights {
    let neighbours = w
        .neighbours
        .iter()
        .map(|list| {
            let total: f64 = list.iter().map(|&(_, v)| v).sum();
            list.iter().map(|&(j, v)| (j, v / total)).collect()
        })
        .collect();
    let mut out = SpatialWeights {
        n: w.n,
        neighbours,
        standardization: Standardization::Row,
        s0: 0.0,
        islands: vec![],
    };
    out.refresh();
    out
}

type VertexKey = (i64, i64);

fn snap(p: Point) -> VertexKey {
    ((p.0 / SNAP_TOLERANCE).round() as i64, (p.1 / SNAP_TOLERANCE).round() as i64)
}

fn touches_edges(a: &AreaUnit, b: &AreaUnit) -> bool {
    let vertex_on_edge = |from: &AreaUnit, to: &AreaUnit| {
        from.polygon.iter().flatten().any(|&p| {
            to.polygon
                .iter()
                .any(|r| r.windows(2).any(|w| point_segment_distance(p, w[0], w[1]) <= SNAP_TOLERANCE))
        })
    };
    vertex_on_edge(a, b) || vertex_on_edge(b, a)
}

/// Queen contiguity: two areas are neighbours when their boundaries share
/// at least one point. Shared vertices are found by snapped-vertex hashing;
/// vertices lying on another polygon's edge are caught by an edge check
/// over bounding-box candidates.
pub fn queen_contiguity(areas: &[AreaUnit]) -> SpatialWeights {
    let n = areas.len();
    let boxes: Vec<BBox> = areas.iter().map(AreaUnit::bbox).collect();
    let mut by_vertex: HashMap<VertexKey, Vec<usize>> = HashMap::new();
    for (i, a) in areas.iter().enumerate() {
        let mut keys: Vec<VertexKey> = a.polygon.iter().flatten().map(|&p| snap(p)).collect();
        keys.sort_unstable();
        keys.dedup();
        for k in keys {
            by_vertex.entry(k).or_default().push(i);
        }
    }
    let mut adj = vec![BTreeSet::new(); n];
    for ids in by_vertex.values() {
        for (x, &i) in ids.iter().enumerate() {
            for &j in &ids[x + 1..] {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }
    }

    // sweep over x-sorted boxes for the remaining candidate pairs
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| boxes[a].min_x.total_cmp(&boxes[b].min_x).then(a.cmp(&b)));
    for (x, &i) in order.iter().enumerate() {
        for &j in &order[x + 1..] {
            if boxes[j].min_x > boxes[i].max_x + SNAP_TOLERANCE {
                break;
            }
            if adj[i].contains(&j) || !boxes[i].intersects(&boxes[j], SNAP_TOLERANCE) {
                continue;
            }
            if touches_edges(&areas[i], &areas[j]) {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }
    }
    SpatialWeights::from_adjacency(&adj)
}

/// Symmetrized k-nearest-neighbour weights on planar coordinates.
/// Distance ties go to the smaller index.
pub fn knn(centroids: &[Point], k: usize) -> Result<SpatialWeights> {
    let n = centroids.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidInput(format!("knn needs 0 < k < n, got k = {k}, n = {n}")));
    }
    let mut adj = vec![BTreeSet::new(); n];
    for (i, &p) in centroids.iter().enumerate() {
        let mut d: Vec<(f64, usize)> = centroids
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, &q)| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2), j))
            .collect();
        d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in &d[..k] {
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    Ok(SpatialWeights::from_adjacency(&adj))
}
