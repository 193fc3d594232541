use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, TAG_SPLIT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let r = [self.train, self.val, self.test];
        if r.iter().any(|&x| !(x > 0.0)) || ((r.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios must be positive and sum to 1, got {}/{}/{}",
                self.train, self.val, self.test
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitMode {
    /// Jointly on (label, attribute).
    #[default]
    Stratified,
    Random,
}

impl FromStr for SplitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stratified" => Ok(Self::Stratified),
            "random" => Ok(Self::Random),
            _ => Err(Error::Config(format!(
                "split mode `{s}`: expected stratified or random"
            ))),
        }
    }
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Stratified => "stratified",
            Self::Random => "random",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    /// Source indices of train, val and test, each ascending.
    pub indices: [Vec<usize>; 3],
    pub warnings: Vec<String>,
}

/// Cost weight of any deviation beyond one sample.
const OVER_ONE: i64 = 100_000;

/// Convex cost of putting `x` samples where the exact share is `q`.
fn deviation_cost(x: usize, q: f64) -> i64 {
    // integer costs keep Bellman-Ford exact; 1e-4 sample resolution
    let d = ((x as f64 - q).abs() * 1e4).round() as i64;
    d + OVER_ONE * (d - 10_000).max(0)
}

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: usize,
    cost: i64,
    rev: usize,
}

fn add_arc(g: &mut [Vec<Arc>], from: usize, to: usize, cap: usize, cost: i64) {
    let (rf, rt) = (g[to].len(), g[from].len());
    g[from].push(Arc { to, cap, cost, rev: rf });
    g[to].push(Arc {
        to: from,
        cap: 0,
        cost: -cost,
        rev: rt,
    });
}

/// Rounds the cell × split table of quotas `size·ratio` to integers with
/// exact cell totals and split totals equal to `targets`, minimizing the
/// summed absolute deviation with every entry kept within one sample of its
/// quota whenever the targets allow it (min-cost flow, successive shortest
/// paths). Returns the table and whether the one-sample bound held.
fn controlled_round(sizes: &[usize], ratios: [f64; 3], targets: [usize; 3]) -> (Vec<[usize; 3]>, bool) {
    let cells = sizes.len();
    let (src, sink) = (0, cells + 4);
    let split_node = |k: usize| cells + 1 + k;
    let mut g: Vec<Vec<Arc>> = vec![Vec::new(); cells + 5];
    for (c, &n) in sizes.iter().enumerate() {
        add_arc(&mut g, src, 1 + c, n, 0);
        for (k, &ratio) in ratios.iter().enumerate() {
            // piecewise-linear convex cost: bulk arcs on both straight
            // stretches, unit arcs around the quota
            let q = n as f64 * ratio;
            let lo = (q.floor() as usize).saturating_sub(1).max(1).min(n + 1);
            let hi = (q.floor() as usize + 2).min(n);
            if lo > 1 {
                let slope = deviation_cost(1, q) - deviation_cost(0, q);
                add_arc(&mut g, 1 + c, split_node(k), lo - 1, slope);
            }
            for x in lo..=hi {
                add_arc(
                    &mut g,
                    1 + c,
                    split_node(k),
                    1,
                    deviation_cost(x, q) - deviation_cost(x - 1, q),
                );
            }
            if hi < n {
                let slope = deviation_cost(n, q) - deviation_cost(n - 1, q);
                add_arc(&mut g, 1 + c, split_node(k), n - hi.max(lo - 1), slope);
            }
        }
    }
    for (k, &target) in targets.iter().enumerate() {
        add_arc(&mut g, split_node(k), sink, target, 0);
    }

    loop {
        // Bellman-Ford; residual costs can be negative
        let mut dist = vec![i64::MAX; g.len()];
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; g.len()];
        dist[src] = 0;
        for _ in 0..g.len() {
            let mut changed = false;
            for u in 0..g.len() {
                if dist[u] == i64::MAX {
                    continue;
                }
                for (i, a) in g[u].iter().enumerate() {
                    if a.cap > 0 && dist[u] + a.cost < dist[a.to] {
                        dist[a.to] = dist[u] + a.cost;
                        prev[a.to] = Some((u, i));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink] == i64::MAX {
            break;
        }
        let mut push = usize::MAX;
        let mut v = sink;
        while let Some((u, i)) = prev[v] {
            push = push.min(g[u][i].cap);
            v = u;
        }
        let mut v = sink;
        while let Some((u, i)) = prev[v] {
            g[u][i].cap -= push;
            let (to, rev) = (g[u][i].to, g[u][i].rev);
            g[to][rev].cap += push;
            v = u;
        }
    }

    let table: Vec<[usize; 3]> = (0..cells)
        .map(|c| {
            let mut row = [0; 3];
            for a in &g[1 + c] {
                if (cells + 1..cells + 4).contains(&a.to) {
                    // flow on an arc is the capacity of its reverse
                    row[a.to - cells - 1] += g[a.to][a.rev].cap;
                }
            }
            row
        })
        .collect();
    let within = table
        .iter()
        .zip(sizes)
        .all(|(row, &n)| (0..3).all(|k| (row[k] as f64 - n as f64 * ratios[k]).abs() <= 1.0 + 1e-9));
    (table, within)
}

/// Partition sizes are `floor(ratio·N)` for val and test; train takes the rest.
pub fn split(ds: &Dataset, ratios: SplitRatios, seed: u64, mode: SplitMode) -> Result<Split> {
    ratios.validate()?;
    let n = ds.len();
    let n_val = (ratios.val * n as f64).floor() as usize;
    let n_test = (ratios.test * n as f64).floor() as usize;
    let mut warnings = Vec::new();
    let mut parts: [Vec<usize>; 3] = Default::default();

    match mode {
        SplitMode::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng::stream(seed, &[TAG_SPLIT]));
            parts[1] = order[..n_val].to_vec();
            parts[2] = order[n_val..n_val + n_test].to_vec();
            parts[0] = order[n_val + n_test..].to_vec();
        }
        SplitMode::Stratified => {
            let mut cells: BTreeMap<(usize, u8), Vec<usize>> = BTreeMap::new();
            for (i, s) in ds.samples().iter().enumerate() {
                cells.entry((s.label, s.attribute)).or_default().push(i);
            }
            let mut eligible = Vec::new();
            for (&(label, attr), members) in cells.iter_mut() {
                if members.len() < 3 {
                    warnings.push(format!(
                        "cell (label {label}, attribute {attr}) has {} sample(s); placed wholly in train",
                        members.len()
                    ));
                    parts[0].extend_from_slice(members);
                } else {
                    members.shuffle(&mut rng::stream(seed, &[TAG_SPLIT, label as u64, attr as u64]));
                    eligible.push(members.clone());
                }
            }
            let sizes: Vec<usize> = eligible.iter().map(Vec::len).collect();
            let n_eligible: usize = sizes.iter().sum();
            let targets = [n_eligible.saturating_sub(n_val + n_test), n_val, n_test];
            let (table, within) = controlled_round(&sizes, [ratios.train, ratios.val, ratios.test], targets);
            if !within {
                let got = |k: usize| table.iter().map(|t| t[k]).sum::<usize>();
                warnings.push(format!(
                    "split sizes {}/{}/{} leave some cell more than one sample from its stratified share",
                    got(0) + (n - n_eligible),
                    got(1),
                    got(2)
                ));
            }
            let val: Vec<usize> = table.iter().map(|t| t[1]).collect();
            let test: Vec<usize> = table.iter().map(|t| t[2]).collect();
            for (c, members) in eligible.iter().enumerate() {
                parts[1].extend_from_slice(&members[..val[c]]);
                parts[2].extend_from_slice(&members[val[c]..val[c] + test[c]]);
                parts[0].extend_from_slice(&members[val[c] + test[c]..]);
            }
        }
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    Ok(Split {
        train: ds.subset(&parts[0]),
        val: ds.subset(&parts[1]),
        test: ds.subset(&parts[2]),
        indices: parts,
        warnings,
    })
}
