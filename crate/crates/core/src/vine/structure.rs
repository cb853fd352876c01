//! Vine structure machinery: Kendall's tau, greedy tree selection by
//! maximum spanning trees on dependence strength, and the structural
//! validator for the regular-vine construction rules.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::vine::hfunc::h;
use crate::vine::VineEdge;

/// Fitted pair parameters never reach the boundary; perfectly monotone
/// inputs are clamped here.
pub(crate) const MAX_RHO: f64 = 1.0 - 1e-5;

/// Kendall rank correlation with denominator n(n-1)/2; tied pairs count as
/// neither concordant nor discordant.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} values",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData(
            "Kendall tau needs at least two observations".into(),
        ));
    }
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for k in (i + 1)..n {
            let s = (x[i] - x[k]) * (y[i] - y[k]);
            if s > 0.0 {
                concordant += 1;
            } else if s < 0.0 {
                discordant += 1;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Ok((concordant - discordant) as f64 / pairs)
}

/// A candidate or selected node during fitting: an edge of the current
/// tree, carrying the h-transformed data of its two conditioned variables.
struct FitNode {
    conditioned: (usize, usize),
    set: u128,
    /// Ids of the two previous-level nodes this edge joins.
    pair: (usize, usize),
    rho: f64,
    /// `u_{conditioned.0 | rest}` and `u_{conditioned.1 | rest}`.
    h_first: Vec<f64>,
    h_second: Vec<f64>,
}

/// Greedy structure selection on copula-scale data.
///
/// Tree 1 is the maximum spanning tree over variables with weight |tau|;
/// each later tree is the maximum spanning tree over the previous tree's
/// edges, restricted to proximity-legal pairs, using |tau| of the
/// conditional pseudo-observations. Every selected edge gets a Gaussian
/// parameter `rho = sin(pi tau / 2)`. Ties break toward the
/// lexicographically smallest node pair.
pub fn select_structure(u: &Array2<f64>, levels: usize) -> Result<Vec<Vec<VineEdge>>> {
    let (n, d) = u.dim();
    if d < 2 {
        return Err(Error::InvalidArgument(
            "vine selection needs at least 2 dimensions".into(),
        ));
    }
    if d > 128 {
        return Err(Error::InvalidArgument(format!(
            "dimension {d} exceeds the supported maximum of 128"
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientData(
            "vine selection needs at least 2 rows".into(),
        ));
    }
    let levels = levels.min(d - 1);

    // Level-1 "nodes" are the variables themselves.
    let mut nodes: Vec<FitNode> = (0..d)
        .map(|j| FitNode {
            conditioned: (j, j),
            set: 1u128 << j,
            pair: (j, j),
            rho: 0.0,
            h_first: u.column(j).to_vec(),
            h_second: u.column(j).to_vec(),
        })
        .collect();

    let mut trees: Vec<Vec<VineEdge>> = Vec::with_capacity(levels);
    for level in 1..=levels {
        let mut candidates: Vec<(f64, usize, usize, usize, usize)> = Vec::new();
        for p in 0..nodes.len() {
            for q in (p + 1)..nodes.len() {
                if level == 1 {
                    // Complete graph over variables.
                } else {
                    let shares = share_count(nodes[p].pair, nodes[q].pair);
                    if shares != 1 {
                        continue;
                    }
                }
                let diff = nodes[p].set ^ nodes[q].set;
                if diff.count_ones() != 2 {
                    continue;
                }
                let (x, y, dx, dy) = conditioned_data(&nodes[p], &nodes[q], diff);
                let tau = kendall_tau(dx, dy)?;
                candidates.push((tau, p, q, x, y));
            }
        }
        candidates.sort_by(|a, b| {
            b.0.abs()
                .partial_cmp(&a.0.abs())
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });

        let mut dsu = Dsu::new(nodes.len());
        let mut selected: Vec<FitNode> = Vec::with_capacity(nodes.len() - 1);
        for &(tau, p, q, x, y) in &candidates {
            if !dsu.union(p, q) {
                continue;
            }
            let rho = (std::f64::consts::FRAC_PI_2 * tau).sin().clamp(-MAX_RHO, MAX_RHO);
            let (_, _, dx, dy) = conditioned_data(&nodes[p], &nodes[q], nodes[p].set ^ nodes[q].set);
            let h_first: Vec<f64> = dx.iter().zip(dy).map(|(&a, &b)| h(a, b, rho)).collect();
            let h_second: Vec<f64> = dy.iter().zip(dx).map(|(&a, &b)| h(a, b, rho)).collect();
            selected.push(FitNode {
                conditioned: (x, y),
                set: nodes[p].set | nodes[q].set,
                pair: (p, q),
                rho,
                h_first,
                h_second,
            });
            if selected.len() == nodes.len() - 1 {
                break;
            }
        }
        if selected.len() != nodes.len() - 1 {
            return Err(Error::NumericFailure(format!(
                "tree {level} could not be connected"
            )));
        }

        trees.push(
            selected
                .iter()
                .map(|e| VineEdge {
                    conditioned: e.conditioned,
                    conditioning: mask_to_vars(e.set & !(1u128 << e.conditioned.0) & !(1u128 << e.conditioned.1)),
                    rho: e.rho,
                })
                .collect(),
        );
        nodes = selected;
    }
    Ok(trees)
}

/// Pulls the conditioned variables of a prospective edge and the data
/// vectors that go with them.
fn conditioned_data<'a>(
    p: &'a FitNode,
    q: &'a FitNode,
    diff: u128,
) -> (usize, usize, &'a [f64], &'a [f64]) {
    let in_p = diff & p.set;
    let in_q = diff & q.set;
    let x = in_p.trailing_zeros() as usize;
    let y = in_q.trailing_zeros() as usize;
    let dx: &[f64] = if x == p.conditioned.0 {
        &p.h_first
    } else {
        debug_assert_eq!(x, p.conditioned.1);
        &p.h_second
    };
    let dy: &[f64] = if y == q.conditioned.0 {
        &q.h_first
    } else {
        debug_assert_eq!(y, q.conditioned.1);
        &q.h_second
    };
    (x, y, dx, dy)
}

fn share_count(a: (usize, usize), b: (usize, usize)) -> usize {
    usize::from(a.0 == b.0 || a.0 == b.1)
        + usize::from(a.1 == b.0 || a.1 == b.1)
}

pub(crate) fn mask_to_vars(mask: u128) -> Vec<usize> {
    let mut out = Vec::new();
    let mut m = mask;
    while m != 0 {
        let bit = m.trailing_zeros() as usize;
        out.push(bit);
        m &= m - 1;
    }
    out
}

pub(crate) fn edge_set(edge: &VineEdge) -> u128 {
    let mut mask = (1u128 << edge.conditioned.0) | (1u128 << edge.conditioned.1);
    for &v in &edge.conditioning {
        mask |= 1u128 << v;
    }
    mask
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            false
        } else {
            self.parent[ra] = rb;
            true
        }
    }
}

/// Checks the regular-vine construction rules on a (possibly truncated)
/// tree sequence over `d` variables:
///
/// 1. every tree is connected;
/// 2. tree 1 spans the variable set with d-1 edges and empty conditioning;
/// 3. the nodes of tree k are exactly edges of tree k-1 (located here by
///    their complete variable sets);
/// 4. the two tree-(k-1) edges joined by a tree-k edge share exactly one
///    tree-(k-1) node.
pub fn validate_structure(d: usize, trees: &[Vec<VineEdge>]) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidArgument("vine needs d >= 2".into()));
    }
    if d > 128 {
        return Err(Error::InvalidArgument(format!(
            "dimension {d} exceeds the supported maximum of 128"
        )));
    }
    if trees.is_empty() || trees.len() > d - 1 {
        return Err(Error::DataValidation(format!(
            "{} trees for dimension {d}",
            trees.len()
        )));
    }
    // Level-0 bookkeeping: nodes are variables.
    let mut prev_sets: Vec<u128> = (0..d).map(|j| 1u128 << j).collect();
    let mut prev_pairs: Vec<(usize, usize)> = (0..d).map(|j| (j, j)).collect();

    for (k, tree) in trees.iter().enumerate() {
        let level = k + 1;
        let expected_edges = d - level;
        if tree.len() != expected_edges {
            return Err(Error::DataValidation(format!(
                "tree {level} has {} edges, expected {expected_edges}",
                tree.len()
            )));
        }
        let mut sets = Vec::with_capacity(tree.len());
        let mut pairs = Vec::with_capacity(tree.len());
        let mut dsu = Dsu::new(prev_sets.len());
        for edge in tree {
            let (a, b) = edge.conditioned;
            if a == b || a >= d || b >= d || edge.conditioning.iter().any(|&v| v >= d) {
                return Err(Error::DataValidation(format!(
                    "tree {level}: malformed edge ({a}, {b})"
                )));
            }
            if edge.conditioning.len() != level - 1 {
                return Err(Error::DataValidation(format!(
                    "tree {level}: conditioning set has {} variables, expected {}",
                    edge.conditioning.len(),
                    level - 1
                )));
            }
            if !(edge.rho > -1.0 && edge.rho < 1.0) {
                return Err(Error::DataValidation(format!(
                    "pair parameter {} outside (-1, 1)",
                    edge.rho
                )));
            }
            let set = edge_set(edge);
            if set.count_ones() as usize != level + 1 {
                return Err(Error::DataValidation(format!(
                    "tree {level}: conditioned and conditioning sets overlap"
                )));
            }
            // Rule 3: both children must be previous-level nodes.
            let c1 = set & !(1u128 << edge.conditioned.0);
            let c2 = set & !(1u128 << edge.conditioned.1);
            let i1 = prev_sets.iter().position(|&s| s == c1);
            let i2 = prev_sets.iter().position(|&s| s == c2);
            let (i1, i2) = match (i1, i2) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::DataValidation(format!(
                        "tree {level}: edge ({a}, {b} | {:?}) does not join two tree-{} nodes",
                        edge.conditioning,
                        level - 1
                    )))
                }
            };
            // Rule 4 (proximity) for trees 2 and beyond.
            if level >= 2 && share_count(prev_pairs[i1], prev_pairs[i2]) != 1 {
                return Err(Error::DataValidation(format!(
                    "tree {level}: proximity violated for edge ({a}, {b})"
                )));
            }
            dsu.union(i1, i2);
            sets.push(set);
            pairs.push((i1, i2));
        }
        // Rule 1 (and rule 2 for tree 1): a tree with |nodes|-1 edges is
        // spanning iff it is acyclic, i.e., every union call merged two
        // components. Recheck connectivity over the touched nodes.
        let mut roots: Vec<usize> = (0..prev_sets.len()).map(|i| dsu.find(i)).collect();
        roots.sort_unstable();
        roots.dedup();
        if roots.len() != 1 {
            return Err(Error::DataValidation(format!(
                "tree {level} is not connected"
            )));
        }
        // Distinct complete sets guard against duplicated edges.
        let mut sorted_sets = sets.clone();
        sorted_sets.sort_unstable();
        sorted_sets.dedup();
        if sorted_sets.len() != sets.len() {
            return Err(Error::DataValidation(format!(
                "tree {level} repeats an edge"
            )));
        }
        prev_sets = sets;
        prev_pairs = pairs;
    }
    Ok(())
}
