//! Exact k-nearest-neighbour search under Euclidean distance.
//!
//! [`NeighborIndex`] is a k-d tree split at the median of the coordinate with
//! the widest spread. Results are ordered by `(distance, index)`, so equal
//! distances resolve to the lower point index. [`brute_nearest`] implements
//! the same contract by linear scan and serves as the reference.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::datamodel::Dataset;
use crate::error::{invalid, Error, Result};

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborHit {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Immutable k-d tree over the points of a dataset.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    values: Vec<f64>,
    dim: usize,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Heap entry ordered by `(sq_distance, index)`; the max-heap keeps the worst on top.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    sq: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sq
            .total_cmp(&other.sq)
            .then(self.index.cmp(&other.index))
    }
}

struct Collector<'a> {
    count: usize,
    exclude: &'a [usize],
    heap: BinaryHeap<Candidate>,
}

impl Collector<'_> {
    fn offer(&mut self, cand: Candidate) {
        if self.exclude.contains(&cand.index) {
            return;
        }
        if self.heap.len() < self.count {
            self.heap.push(cand);
        } else if let Some(worst) = self.heap.peek() {
            if cand < *worst {
                self.heap.pop();
                self.heap.push(cand);
            }
        }
    }

    /// Squared radius beyond which nothing can enter the result.
    fn bound(&self) -> f64 {
        if self.heap.len() < self.count {
            f64::INFINITY
        } else {
            self.heap.peek().map_or(f64::INFINITY, |c| c.sq)
        }
    }

    fn finish(self) -> Vec<NeighborHit> {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| NeighborHit {
                index: c.index,
                distance: c.sq.sqrt(),
            })
            .collect()
    }
}

fn check_query(
    dim: usize,
    size: usize,
    query: &[f64],
    count: usize,
    exclude: &[usize],
) -> Result<()> {
    if query.len() != dim {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: query.len(),
        });
    }
    let mut excluded: Vec<usize> = exclude.iter().copied().filter(|&i| i < size).collect();
    excluded.sort_unstable();
    excluded.dedup();
    let available = size - excluded.len();
    if count > available {
        return Err(invalid(
            "count",
            format!("requested {count} neighbours but only {available} points are eligible"),
        ));
    }
    Ok(())
}

impl NeighborIndex {
    /// Builds the tree. Construction is deterministic given the input order.
    pub fn build(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Undersized {
                found: 0,
                required: 1,
            });
        }
        let mut index = Self {
            values: data.values().to_vec(),
            dim: data.dim(),
            order: (0..data.len()).collect(),
            nodes: Vec::new(),
        };
        index.build_node(0, data.len());
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn coord(&self, point: usize, axis: usize) -> f64 {
        self.values[point * self.dim + axis]
    }

    fn point(&self, point: usize) -> &[f64] {
        &self.values[point * self.dim..(point + 1) * self.dim]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= LEAF_SIZE {
            return id;
        }

        let mut axis = 0;
        let mut widest = 0.0;
        for a in 0..self.dim {
            let (lo, hi) = self.order[start..end]
                .iter()
                .map(|&p| self.coord(p, a))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            if hi - lo > widest {
                widest = hi - lo;
                axis = a;
            }
        }
        if widest == 0.0 {
            return id;
        }

        let mid = start + (end - start) / 2;
        let mut slice = std::mem::take(&mut self.order);
        slice[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            self.coord(a, axis)
                .total_cmp(&self.coord(b, axis))
                .then(a.cmp(&b))
        });
        self.order = slice;
        let value = self.coord(self.order[mid], axis);

        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// The `count` nearest points to `query`, skipping indices in `exclude`.
    pub fn nearest(
        &self,
        query: &[f64],
        count: usize,
        exclude: &[usize],
    ) -> Result<Vec<NeighborHit>> {
        check_query(self.dim, self.len(), query, count, exclude)?;
        if count == 0 {
            return Ok(Vec::new());
        }
        let mut collector = Collector {
            count,
            exclude,
            heap: BinaryHeap::with_capacity(count + 1),
        };
        self.search(0, query, &mut collector);
        Ok(collector.finish())
    }

    /// Distance to the `rank`-th nearest eligible point (1-based rank).
    pub fn kth_distance(&self, query: &[f64], rank: usize, exclude: &[usize]) -> Result<f64> {
        let hits = self.nearest(query, rank, exclude)?;
        hits.last()
            .map(|h| h.distance)
            .ok_or_else(|| invalid("rank", "must be at least 1"))
    }

    fn search(&self, node: usize, query: &[f64], out: &mut Collector<'_>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &p in &self.order[start..end] {
                    out.offer(Candidate {
                        sq: sq_dist(query, self.point(p)),
                        index: p,
                    });
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, query, out);
                // Equal distances must still be visited so the index tie-break holds.
                if diff * diff <= out.bound() {
                    self.search(far, query, out);
                }
            }
        }
    }
}

/// Linear-scan k-nearest-neighbour search with the same contract as
/// [`NeighborIndex::nearest`].
pub fn brute_nearest(
    data: &Dataset,
    query: &[f64],
    count: usize,
    exclude: &[usize],
) -> Result<Vec<NeighborHit>> {
    check_query(data.dim(), data.len(), query, count, exclude)?;
    let mut all: Vec<Candidate> = data
        .points()
        .enumerate()
        .filter(|(i, _)| !exclude.contains(i))
        .map(|(index, p)| Candidate {
            sq: sq_dist(query, p),
            index,
        })
        .collect();
    all.sort_unstable();
    Ok(all
        .into_iter()
        .take(count)
        .map(|c| NeighborHit {
            index: c.index,
            distance: c.sq.sqrt(),
        })
        .collect())
}
