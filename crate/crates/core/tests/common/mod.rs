//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use stancemt::stance::{propagate, HashtagGraph, NodeOrder, PropagationConfig, SeedSet};

/// Literal round-by-round propagation on a weight matrix: no idle-round
/// skipping, labels commit at the end of each round.
pub fn oracle_propagate(w: &[Vec<u32>], seeds: &[Option<f64>], gamma: u64) -> Vec<Option<f64>> {
    let n = w.len();
    let mut score: Vec<Option<f64>> = seeds.to_vec();
    for round in 0..100_000u64 {
        let relax = (round / gamma) as usize;
        let mut any_frontier = false;
        let mut next = score.clone();
        for i in 0..n {
            if score[i].is_some() {
                continue;
            }
            let degree = (0..n).filter(|&j| w[i][j] > 0).count();
            let labeled = (0..n).filter(|&j| w[i][j] > 0 && score[j].is_some()).count();
            if labeled == 0 {
                continue;
            }
            any_frontier = true;
            if labeled + relax >= degree {
                let mut num = 0.0;
                let mut den = 0.0;
                for j in 0..n {
                    if w[i][j] > 0 {
                        if let Some(s) = score[j] {
                            num += s * w[i][j] as f64;
                        }
                        den += w[i][j] as f64;
                    }
                }
                next[i] = Some(num / den);
            }
        }
        if !any_frontier {
            break;
        }
        score = next;
    }
    score
}

pub fn node(i: usize) -> String {
    format!("n{i}")
}

pub fn run_propagation(w: &[Vec<u32>], seeds: &[Option<f64>], gamma: u32, order: NodeOrder) -> Vec<Option<f64>> {
    run_propagation_capped(w, seeds, gamma, order, 1_000_000)
}

/// Labeled scores per node after at most `max_rounds` executed rounds.
pub fn run_propagation_capped(
    w: &[Vec<u32>],
    seeds: &[Option<f64>],
    gamma: u32,
    order: NodeOrder,
    max_rounds: u32,
) -> Vec<Option<f64>> {
    let n = w.len();
    let mut g = HashtagGraph::new();
    for i in 0..n {
        g.add_node(&node(i));
    }
    for i in 0..n {
        for j in i + 1..n {
            if w[i][j] > 0 {
                g.add_edge(&node(i), &node(j), w[i][j]);
            }
        }
    }
    let denier: Vec<String> = (0..n).filter(|&i| seeds[i] == Some(-1.0)).map(node).collect();
    let believer: Vec<String> = (0..n).filter(|&i| seeds[i] == Some(1.0)).map(node).collect();
    let set = SeedSet::new(denier, believer).unwrap();
    let cfg = PropagationConfig { gamma, max_rounds, node_order: order };
    let (out, _) = propagate(&g, &set, &cfg);
    (0..n).map(|i| out.labeled_score(&node(i))).collect()
}
