//! Discrete local search over partial injective node maps.
//!
//! Log-likelihood compatibilities span tens of nats, so the annealing loop
//! can freeze into a poor basin early. Starting from the discretized map,
//! each pass tries, for every source node, every other target and the
//! slack. A displaced holder either takes the mover's old image or moves on
//! to any free target or the slack (a length-two ejection chain). The best
//! variant is kept whenever it strictly improves the exact discrete score.

use crate::graph::Topology;

use super::Tables;

/// Improvements smaller than this are treated as ties.
const MIN_GAIN: f64 = 1e-12;

/// Polishes `map` and, independently, a greedy start built from the node
/// table alone; keeps the better of the two.
pub(crate) fn polish(t: &Tables, src: &Topology, target: &Topology, map: &mut Vec<Option<usize>>, passes: usize) {
    let first = improve(t, src, target, map, passes);
    let mut alt = node_greedy(t);
    if alt != *map {
        let second = improve(t, src, target, &mut alt, passes);
        if second > first + MIN_GAIN {
            *map = alt;
        }
    }
}

/// Greedy assignment by descending node compatibility, stopping once the
/// next pair scores below leaving its source node unmatched.
fn node_greedy(t: &Tables) -> Vec<Option<usize>> {
    let (n, m) = (t.n, t.m);
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..m).map(move |i| (a, i))).collect();
    pairs.sort_by(|&(a, i), &(b, j)| t.node[b * m + j].total_cmp(&t.node[a * m + i]).then((a, i).cmp(&(b, j))));
    let mut map = vec![None; n];
    let mut used = vec![false; m];
    for (a, i) in pairs {
        if map[a].is_none() && !used[i] && t.node[a * m + i] > t.source_slack[a] {
            map[a] = Some(i);
            used[i] = true;
        }
    }
    map
}

/// Returns the final discrete score.
fn improve(t: &Tables, src: &Topology, target: &Topology, map: &mut [Option<usize>], passes: usize) -> f64 {
    let (n, m) = (t.n, t.m);
    let mut inv = vec![None; m];
    for (a, image) in map.iter().enumerate() {
        if let Some(i) = *image {
            inv[i] = Some(a);
        }
    }
    let mut current = score(t, src, target, map, &inv);
    let mut saved_map = map.to_vec();
    let mut saved_inv = inv.clone();
    let mut best_map = map.to_vec();
    let mut best_inv = inv.clone();
    for _ in 0..passes {
        let mut improved = false;
        for a in 0..n {
            for cand in (0..m).map(Some).chain([None]) {
                if cand == map[a] {
                    continue;
                }
                saved_map.copy_from_slice(map);
                saved_inv.copy_from_slice(&inv);
                let holder = cand.and_then(|i| inv[i]);
                move_node(map, &mut inv, a, cand);
                let mut best = score(t, src, target, map, &inv);
                best_map.copy_from_slice(map);
                best_inv.copy_from_slice(&inv);
                // ejection chain: the displaced node may go anywhere free
                if let Some(b) = holder {
                    let swapped = map[b];
                    let free: Vec<usize> = (0..m).filter(|&i| inv[i].is_none()).collect();
                    for alt in free.into_iter().map(Some).chain([None]) {
                        if alt == swapped {
                            continue;
                        }
                        move_node(map, &mut inv, b, alt);
                        let s = score(t, src, target, map, &inv);
                        if s > best + MIN_GAIN {
                            best = s;
                            best_map.copy_from_slice(map);
                            best_inv.copy_from_slice(&inv);
                        }
                        // alt was free, so moving back restores the state
                        move_node(map, &mut inv, b, swapped);
                    }
                }
                if best > current + MIN_GAIN {
                    current = best;
                    improved = true;
                    map.copy_from_slice(&best_map);
                    inv.copy_from_slice(&best_inv);
                } else {
                    map.copy_from_slice(&saved_map);
                    inv.copy_from_slice(&saved_inv);
                }
            }
        }
        if !improved {
            break;
        }
    }
    current
}

/// Sends `a` to `to`; the previous holder of `to`, if any, takes `a`'s old
/// image.
fn move_node(map: &mut [Option<usize>], inv: &mut [Option<usize>], a: usize, to: Option<usize>) {
    let from = map[a];
    let holder = to.and_then(|i| inv[i]);
    map[a] = to;
    if let Some(b) = holder {
        map[b] = from;
    }
    if let Some(i) = from {
        inv[i] = holder;
    }
    if let Some(i) = to {
        inv[i] = Some(a);
    }
}

/// Discrete score up to the constant `sum_e edge_unmatched(e)`.
fn score(t: &Tables, src: &Topology, target: &Topology, map: &[Option<usize>], inv: &[Option<usize>]) -> f64 {
    let mut s = 0.0;
    for (a, image) in map.iter().enumerate() {
        s += match *image {
            Some(i) => t.node[a * t.m + i],
            None => t.source_slack[a],
        };
    }
    for (i, pre) in inv.iter().enumerate() {
        if pre.is_none() {
            s += t.target_slack[i];
        }
    }
    for (e, &(a, b)) in src.edges().iter().enumerate() {
        if let (Some(i), Some(j)) = (map[a], map[b]) {
            if let Some(te) = target.edge_between(i, j) {
                s += t.edge_gain[e * t.target_edges + te];
            }
        }
    }
    for (te, &(i, j)) in target.edges().iter().enumerate() {
        if let (Some(a), Some(b)) = (inv[i], inv[j]) {
            if src.edge_between(a, b).is_none() {
                s += t.target_absent[te];
            }
        }
    }
    s
}
