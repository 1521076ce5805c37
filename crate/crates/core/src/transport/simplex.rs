//! Primal network simplex for the uncapacitated transportation problem.
//!
//! Sources `0..m`, sinks `m..m+n` and an artificial root `m+n`. Every node
//! starts attached to the root by an expensive artificial arc, which keeps the
//! initial spanning tree strongly feasible. Leaving arcs are chosen by the
//! strongly feasible rule, so degenerate pivots cannot cycle.

use crate::error::{Error, Result};

/// Optimal coupling: total cost and the nonzero entries `(i, j, mass)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub cost: f64,
    pub flows: Vec<(usize, usize, f64)>,
}

struct Net<F> {
    m: usize,
    n: usize,
    root: usize,
    real: usize,
    big: f64,
    cost: F,
}

impl<F: Fn(usize, usize) -> f64> Net<F> {
    fn ends(&self, arc: usize) -> (usize, usize) {
        if arc < self.real {
            (arc / self.n, self.m + arc % self.n)
        } else {
            let u = arc - self.real;
            if u < self.m {
                (u, self.root)
            } else {
                (self.root, u)
            }
        }
    }

    fn cost(&self, arc: usize) -> f64 {
        if arc < self.real {
            (self.cost)(arc / self.n, arc % self.n)
        } else {
            self.big
        }
    }
}

struct Tree {
    arcs: Vec<usize>,
    flow: Vec<f64>,
    parent: Vec<usize>,
    slot: Vec<usize>,
    up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    start: Vec<usize>,
    adj: Vec<(usize, usize)>,
    queue: Vec<usize>,
}

impl Tree {
    fn rebuild<F: Fn(usize, usize) -> f64>(&mut self, net: &Net<F>) {
        let nodes = self.parent.len();
        self.start.iter_mut().for_each(|s| *s = 0);
        for &a in &self.arcs {
            let (u, v) = net.ends(a);
            self.start[u + 1] += 1;
            self.start[v + 1] += 1;
        }
        for k in 0..nodes {
            self.start[k + 1] += self.start[k];
        }
        let mut fill = self.start.clone();
        for (s, &a) in self.arcs.iter().enumerate() {
            let (u, v) = net.ends(a);
            self.adj[fill[u]] = (v, s);
            fill[u] += 1;
            self.adj[fill[v]] = (u, s);
            fill[v] += 1;
        }
        self.queue.clear();
        self.queue.push(net.root);
        self.parent[net.root] = usize::MAX;
        self.depth[net.root] = 0;
        self.pi[net.root] = 0.0;
        let mut head = 0;
        while head < self.queue.len() {
            let p = self.queue[head];
            head += 1;
            for k in self.start[p]..self.start[p + 1] {
                let (v, s) = self.adj[k];
                if v == self.parent[p] {
                    continue;
                }
                let a = self.arcs[s];
                let c = net.cost(a);
                self.parent[v] = p;
                self.slot[v] = s;
                self.depth[v] = self.depth[p] + 1;
                let up = net.ends(a).0 == v;
                self.up[v] = up;
                self.pi[v] = if up { self.pi[p] - c } else { self.pi[p] + c };
                self.queue.push(v);
            }
        }
    }
}

/// Solves `min Σ c(i,j) π_ij` over couplings of `supply` and `demand`.
///
/// Both weight vectors must be nonnegative with equal totals.
pub fn transport(supply: &[f64], demand: &[f64], cost: impl Fn(usize, usize) -> f64) -> Result<TransportPlan> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::invalid("measure", "needs at least one atom"));
    }
    let ts: f64 = supply.iter().sum();
    let td: f64 = demand.iter().sum();
    if supply.iter().chain(demand).any(|w| !(w.is_finite() && *w >= 0.0)) || (ts - td).abs() > 1e-9 * ts.max(td) {
        return Err(Error::invalid("weights", "must be nonnegative with equal totals"));
    }
    let mut max_c: f64 = 0.0;
    for i in 0..m {
        for j in 0..n {
            let c = cost(i, j);
            if !c.is_finite() {
                return Err(Error::NonFinite { what: "transport cost".into(), step: 0 });
            }
            max_c = max_c.max(c.abs());
        }
    }
    let nodes = m + n + 1;
    let net = Net { m, n, root: m + n, real: m * n, big: (max_c + 1.0) * (m + n) as f64, cost };
    let total_arcs = net.real + m + n;
    let tol = (1e-12 * max_c).max(16.0 * f64::EPSILON * net.big);

    let mut in_tree = vec![false; total_arcs];
    let mut tree = Tree {
        arcs: (net.real..total_arcs).collect(),
        flow: supply.iter().chain(demand).copied().collect(),
        parent: vec![0; nodes],
        slot: vec![0; nodes],
        up: vec![false; nodes],
        depth: vec![0; nodes],
        pi: vec![0.0; nodes],
        start: vec![0; nodes + 1],
        adj: vec![(0, 0); 2 * (nodes - 1)],
        queue: Vec::with_capacity(nodes),
    };
    for &a in &tree.arcs {
        in_tree[a] = true;
    }
    tree.rebuild(&net);

    let block = ((total_arcs as f64).sqrt().ceil() as usize).max(10);
    let mut next = 0usize;
    let max_pivots = 50 * total_arcs + 1000;
    for _ in 0..max_pivots {
        // block search: best candidate in the first block that has one
        let mut best = None;
        let mut best_rc = -tol;
        let mut scanned = 0;
        let mut in_block = 0;
        while scanned < total_arcs {
            let a = next;
            next = if next + 1 == total_arcs { 0 } else { next + 1 };
            scanned += 1;
            in_block += 1;
            if !in_tree[a] {
                let (u, v) = net.ends(a);
                let rc = net.cost(a) + tree.pi[u] - tree.pi[v];
                if rc < best_rc {
                    best_rc = rc;
                    best = Some(a);
                }
            }
            if in_block == block {
                if best.is_some() {
                    break;
                }
                in_block = 0;
            }
        }
        let Some(enter) = best else {
            return finish(&net, &tree);
        };

        let (s, t) = net.ends(enter);
        let (mut a, mut b) = (s, t);
        while a != b {
            if tree.depth[a] >= tree.depth[b] {
                a = tree.parent[a];
            } else {
                b = tree.parent[b];
            }
        }
        let join = a;
        let mut delta = f64::INFINITY;
        let mut leave = None;
        let mut u = s;
        while u != join {
            let k = tree.slot[u];
            if tree.up[u] && tree.flow[k] < delta {
                delta = tree.flow[k];
                leave = Some(k);
            }
            u = tree.parent[u];
        }
        let mut w = t;
        while w != join {
            let k = tree.slot[w];
            if !tree.up[w] && tree.flow[k] <= delta {
                delta = tree.flow[k];
                leave = Some(k);
            }
            w = tree.parent[w];
        }
        let Some(leave) = leave else {
            return Err(Error::Unsupported("unbounded transport problem".into()));
        };
        let mut u = s;
        while u != join {
            let k = tree.slot[u];
            tree.flow[k] = if tree.up[u] { (tree.flow[k] - delta).max(0.0) } else { tree.flow[k] + delta };
            u = tree.parent[u];
        }
        let mut w = t;
        while w != join {
            let k = tree.slot[w];
            tree.flow[k] = if tree.up[w] { tree.flow[k] + delta } else { (tree.flow[k] - delta).max(0.0) };
            w = tree.parent[w];
        }
        in_tree[tree.arcs[leave]] = false;
        in_tree[enter] = true;
        tree.arcs[leave] = enter;
        tree.flow[leave] = delta;
        tree.rebuild(&net);
    }
    Err(Error::Unsupported(format!("network simplex did not converge in {max_pivots} pivots")))
}

fn finish<F: Fn(usize, usize) -> f64>(net: &Net<F>, tree: &Tree) -> Result<TransportPlan> {
    let mut cost = 0.0;
    let mut flows = Vec::new();
    let mut residual = 0.0;
    for (&a, &f) in tree.arcs.iter().zip(&tree.flow) {
        if a < net.real {
            if f > 0.0 {
                let (i, j) = (a / net.n, a % net.n);
                cost += (net.cost)(i, j) * f;
                flows.push((i, j, f));
            }
        } else {
            residual += f;
        }
    }
    if residual > 1e-9 {
        return Err(Error::Unsupported(format!("transport left {residual:e} mass on artificial arcs")));
    }
    flows.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    Ok(TransportPlan { cost, flows })
}
