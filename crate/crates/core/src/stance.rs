//! Hashtag co-occurrence graph and seed-based label propagation for
//! denier/believer stance annotation.
//!
//! Propagation runs in synchronous rounds. In round `r` the relaxation is
//! `l = r / gamma` (integer division); an unlabeled node with `t` neighbours,
//! `t_l ≥ 1` of them labeled, is labeled when `t_l + l ≥ t`. Its score is the
//! edge-weighted sum of labeled neighbour scores divided by the total weight
//! of all its edges. Labels computed in a round are committed together at the
//! end of the round.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Stance, TweetRecord};

/// Seed hashtags with fixed polarity: deniers −1, believers +1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    pub denier: BTreeSet<String>,
    pub believer: BTreeSet<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum SeedError {
    #[error("seed set is empty")]
    Empty,
    #[error("hashtag {0:?} is seeded as both denier and believer")]
    Overlap(String),
    #[error("invalid seed file: {0}")]
    Parse(#[from] serde_json::Error),
}

impl SeedSet {
    pub fn new<I, J, S, T>(denier: I, believer: J) -> Result<Self, SeedError>
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let norm = |s: &str| s.trim_start_matches('#').to_lowercase();
        let denier: BTreeSet<String> = denier.into_iter().map(|s| norm(s.as_ref())).collect();
        let believer: BTreeSet<String> = believer.into_iter().map(|s| norm(s.as_ref())).collect();
        let seeds = Self { denier, believer };
        seeds.validate()?;
        Ok(seeds)
    }

    pub fn validate(&self) -> Result<(), SeedError> {
        if self.denier.is_empty() && self.believer.is_empty() {
            return Err(SeedError::Empty);
        }
        if let Some(tag) = self.denier.intersection(&self.believer).next() {
            return Err(SeedError::Overlap(tag.clone()));
        }
        Ok(())
    }

    /// The seed list shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(include_str!("../data/seeds.json")).expect("bundled seeds are valid")
    }

    pub fn from_json(text: &str) -> Result<Self, SeedError> {
        let raw: SeedSet = serde_json::from_str(text)?;
        Self::new(raw.denier, raw.believer)
    }

    /// Denier and believer sets exchanged.
    pub fn swapped(&self) -> Self {
        Self { denier: self.believer.clone(), believer: self.denier.clone() }
    }

    pub fn polarity(&self, tag: &str) -> Option<f64> {
        if self.denier.contains(tag) {
            Some(-1.0)
        } else if self.believer.contains(tag) {
            Some(1.0)
        } else {
            None
        }
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.denier.contains(tag) || self.believer.contains(tag)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeOrder {
    Insertion,
    Lexicographic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub gamma: u32,
    pub max_rounds: u32,
    pub node_order: NodeOrder,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self { gamma: 50, max_rounds: 100, node_order: NodeOrder::Insertion }
    }
}

/// Weighted undirected co-occurrence graph over hashtags.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HashtagGraph {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    /// Sorted `(neighbour, weight)` lists; symmetric, no self-edges.
    adjacency: Vec<Vec<(usize, u32)>>,
    score: Vec<f64>,
    labeled: Vec<bool>,
}

/// Summary of a propagation run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PropagationStats {
    pub rounds_executed: u32,
    pub final_relaxation: u32,
    pub labeled: usize,
    pub missing_seeds: Vec<String>,
}

impl HashtagGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node if absent and returns its index.
    pub fn add_node(&mut self, tag: &str) -> usize {
        if let Some(&i) = self.index.get(tag) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(tag.to_string());
        self.index.insert(tag.to_string(), i);
        self.adjacency.push(Vec::new());
        self.score.push(0.0);
        self.labeled.push(false);
        i
    }

    /// Increments the weight of edge `a–b` by `w`. Self-edges are ignored.
    pub fn add_edge(&mut self, a: &str, b: &str, w: u32) {
        let (i, j) = (self.add_node(a), self.add_node(b));
        if i == j || w == 0 {
            return;
        }
        bump(&mut self.adjacency[i], j, w);
        bump(&mut self.adjacency[j], i, w);
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn weight(&self, a: &str, b: &str) -> Option<u32> {
        let (&i, &j) = (self.index.get(a)?, self.index.get(b)?);
        self.adjacency[i].iter().find(|&&(n, _)| n == j).map(|&(_, w)| w)
    }

    pub fn neighbours(&self, tag: &str) -> Vec<(&str, u32)> {
        match self.index.get(tag) {
            Some(&i) => self.adjacency[i].iter().map(|&(n, w)| (self.nodes[n].as_str(), w)).collect(),
            None => Vec::new(),
        }
    }

    pub fn score(&self, tag: &str) -> Option<f64> {
        self.index.get(tag).map(|&i| self.score[i])
    }

    pub fn is_labeled(&self, tag: &str) -> bool {
        self.index.get(tag).map(|&i| self.labeled[i]).unwrap_or(false)
    }

    /// Score of a labeled node, `None` for unknown or unlabeled nodes.
    pub fn labeled_score(&self, tag: &str) -> Option<f64> {
        let &i = self.index.get(tag)?;
        self.labeled[i].then_some(self.score[i])
    }

    pub fn labeled_count(&self) -> usize {
        self.labeled.iter().filter(|&&l| l).count()
    }

    /// Clears all labels and scores.
    pub fn reset_labels(&mut self) {
        self.score.iter_mut().for_each(|s| *s = 0.0);
        self.labeled.iter_mut().for_each(|l| *l = false);
    }
}

fn bump(list: &mut Vec<(usize, u32)>, n: usize, w: u32) {
    match list.binary_search_by_key(&n, |&(k, _)| k) {
        Ok(pos) => list[pos].1 += w,
        Err(pos) => list.insert(pos, (n, w)),
    }
}

/// One node per distinct hashtag; edge weight counts the tweets in which
/// the pair co-occurs (duplicates within a tweet count once).
pub fn build_graph(corpus: &[TweetRecord]) -> HashtagGraph {
    let mut graph = HashtagGraph::new();
    for rec in corpus {
        let mut tags: Vec<&str> = Vec::new();
        for t in &rec.hashtags {
            if !tags.contains(&t.as_str()) {
                tags.push(t);
            }
        }
        for t in &tags {
            graph.add_node(t);
        }
        for (i, a) in tags.iter().enumerate() {
            for b in &tags[i + 1..] {
                graph.add_edge(a, b, 1);
            }
        }
    }
    graph
}

/// Spreads seed polarity through the graph. Absent seeds are logged and
/// reported in the stats, not treated as errors.
pub fn propagate(graph: &HashtagGraph, seeds: &SeedSet, cfg: &PropagationConfig) -> (HashtagGraph, PropagationStats) {
    let mut g = graph.clone();
    g.reset_labels();
    let mut stats = PropagationStats::default();

    for tag in seeds.denier.iter().chain(&seeds.believer) {
        match g.index.get(tag.as_str()) {
            Some(&i) => {
                g.score[i] = seeds.polarity(tag).expect("seed");
                g.labeled[i] = true;
            }
            None => {
                log::warn!("seed hashtag #{tag} does not occur in the corpus");
                stats.missing_seeds.push(tag.clone());
            }
        }
    }

    let order: Vec<usize> = match cfg.node_order {
        NodeOrder::Insertion => (0..g.nodes.len()).collect(),
        NodeOrder::Lexicographic => {
            let mut idx: Vec<usize> = (0..g.nodes.len()).collect();
            idx.sort_by(|&a, &b| g.nodes[a].cmp(&g.nodes[b]));
            idx
        }
    };
    let gamma = cfg.gamma.max(1);
    let mut round: u64 = 0;

    while stats.rounds_executed < cfg.max_rounds {
        let relax = (round / gamma as u64) as usize;
        let mut updates: Vec<(usize, f64)> = Vec::new();
        let mut frontier = false;
        for &n in &order {
            if g.labeled[n] {
                continue;
            }
            let nbrs = &g.adjacency[n];
            let labeled_nbrs = nbrs.iter().filter(|&&(m, _)| g.labeled[m]).count();
            if labeled_nbrs == 0 {
                continue;
            }
            frontier = true;
            if labeled_nbrs + relax >= nbrs.len() {
                let mut acc = 0.0;
                let mut total = 0.0;
                for &(m, w) in nbrs {
                    if g.labeled[m] {
                        acc += g.score[m] * w as f64;
                    }
                    total += w as f64;
                }
                updates.push((n, acc / total));
            }
        }
        stats.rounds_executed += 1;
        stats.final_relaxation = relax as u32;
        if !frontier {
            break;
        }
        if updates.is_empty() {
            // rounds until the next relaxation level cannot label anything
            round = (relax as u64 + 1) * gamma as u64;
            continue;
        }
        for (n, s) in updates {
            g.score[n] = s;
            g.labeled[n] = true;
        }
        round += 1;
    }
    stats.labeled = g.labeled_count();
    (g, stats)
}

/// Mean score of the tweet's labeled hashtags; 0 when none is labeled.
pub fn score_tweet(record: &TweetRecord, graph: &HashtagGraph) -> f64 {
    let mut seen: Vec<&str> = Vec::new();
    let mut sum = 0.0;
    for tag in &record.hashtags {
        if seen.contains(&tag.as_str()) {
            continue;
        }
        seen.push(tag);
        if let Some(s) = graph.labeled_score(tag) {
            sum += s;
        }
    }
    let count = seen.iter().filter(|t| graph.is_labeled(t)).count();
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Negative → denier, positive → believer, zero → unlabeled (`None`).
pub fn assign_stance(score: f64) -> Option<Stance> {
    if score < 0.0 {
        Some(Stance::Denier)
    } else if score > 0.0 {
        Some(Stance::Believer)
    } else {
        None
    }
}

/// Builds the graph over `corpus`, propagates `seeds`, and writes
/// `stance_score` / `stance_label` into every record.
pub fn annotate(corpus: &mut [TweetRecord], seeds: &SeedSet, cfg: &PropagationConfig) -> PropagationStats {
    let graph = build_graph(corpus);
    let (graph, stats) = propagate(&graph, seeds, cfg);
    for rec in corpus.iter_mut() {
        let s = score_tweet(rec, &graph);
        rec.stance_score = Some(s);
        rec.stance_label = assign_stance(s);
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tweet(id: &str, tags: &[&str]) -> TweetRecord {
        let mut r = TweetRecord::new(id, "");
        r.hashtags = tags.iter().map(|t| t.to_string()).collect();
        r
    }

    fn seeds(d: &[&str], b: &[&str]) -> SeedSet {
        SeedSet::new(d.iter().copied(), b.iter().copied()).unwrap()
    }

    #[test]
    fn build_graph_counts_per_tweet() {
        let g = build_graph(&[tweet("1", &["a", "b"]), tweet("2", &["a", "b"]), tweet("3", &["a", "c"])]);
        assert_eq!(g.weight("a", "b"), Some(2));
        assert_eq!(g.weight("b", "a"), Some(2));
        assert_eq!(g.weight("a", "c"), Some(1));
        assert_eq!(g.weight("b", "c"), None);

        let g = build_graph(&[tweet("1", &["solo"])]);
        assert_eq!(g.node_count(), 1);
        assert!(g.neighbours("solo").is_empty());

        let g = build_graph(&[tweet("1", &["a", "a", "b"])]);
        assert_eq!(g.weight("a", "b"), Some(1));
        assert_eq!(g.weight("a", "a"), None);

        assert_eq!(build_graph(&[]).node_count(), 0);
    }

    #[test]
    fn propagate_examples() {
        let mut g = HashtagGraph::new();
        g.add_edge("neg", "x", 1);
        let (out, _) = propagate(&g, &seeds(&["neg"], &[]), &PropagationConfig::default());
        assert_eq!(out.labeled_score("x"), Some(-1.0));

        let mut g = HashtagGraph::new();
        g.add_edge("neg", "x", 3);
        g.add_edge("pos", "x", 1);
        let (out, _) = propagate(&g, &seeds(&["neg"], &["pos"]), &PropagationConfig::default());
        assert_eq!(out.labeled_score("x"), Some(-0.5));

        let mut g = HashtagGraph::new();
        g.add_edge("neg", "x", 1);
        g.add_node("island");
        let (out, _) = propagate(&g, &seeds(&["neg"], &[]), &PropagationConfig::default());
        assert!(!out.is_labeled("island"));
        assert_eq!(out.score("island"), Some(0.0));
    }

    #[test]
    fn chain_needs_relaxation() {
        // neg - a - b: `a` has an unlabeled neighbour, so it waits for l = 1
        let mut g = HashtagGraph::new();
        g.add_edge("neg", "a", 2);
        g.add_edge("a", "b", 2);
        let cfg = PropagationConfig { gamma: 3, max_rounds: 100, node_order: NodeOrder::Insertion };
        let (out, stats) = propagate(&g, &seeds(&["neg"], &[]), &cfg);
        // a: (−1·2 + 0·2) / 4; b: (−0.5·2) / 2
        assert_eq!(out.labeled_score("a"), Some(-0.5));
        assert_eq!(out.labeled_score("b"), Some(-0.5));
        assert_eq!(stats.final_relaxation, 1);

        let strict = PropagationConfig { gamma: 3, max_rounds: 1, node_order: NodeOrder::Insertion };
        let (out, _) = propagate(&g, &seeds(&["neg"], &[]), &strict);
        assert!(!out.is_labeled("a"));
    }

    #[test]
    fn missing_seeds_are_reported() {
        let g = build_graph(&[tweet("1", &["a", "b"])]);
        let (_, stats) = propagate(&g, &seeds(&["a"], &["ghost"]), &PropagationConfig::default());
        assert_eq!(stats.missing_seeds, vec!["ghost".to_string()]);
    }

    #[test]
    fn tweet_scores_and_labels() {
        let mut g = HashtagGraph::new();
        g.add_edge("d", "half", 1);
        g.add_edge("b", "half", 3);
        let (g, _) = propagate(&g, &seeds(&["d"], &["b"]), &PropagationConfig::default());
        assert_eq!(g.labeled_score("half"), Some(0.5));
        assert_eq!(score_tweet(&tweet("1", &["d", "half"]), &g), -0.25);
        assert_eq!(score_tweet(&tweet("2", &["b"]), &g), 1.0);
        assert_eq!(score_tweet(&tweet("3", &["d", "b"]), &g), 0.0);
        assert_eq!(score_tweet(&tweet("4", &["nowhere"]), &g), 0.0);

        assert_eq!(assign_stance(-0.25), Some(Stance::Denier));
        assert_eq!(assign_stance(1.0), Some(Stance::Believer));
        assert_eq!(assign_stance(0.0), None);
    }

    #[test]
    fn seed_validation() {
        assert!(matches!(SeedSet::new(["a"], ["#A"]), Err(SeedError::Overlap(t)) if t == "a"));
        assert!(matches!(SeedSet::new(Vec::<&str>::new(), Vec::<&str>::new()), Err(SeedError::Empty)));
        let bundled = SeedSet::bundled();
        assert!(bundled.denier.contains("climatehoax"));
        assert!(bundled.believer.contains("climatechangeisreal"));
    }

    #[test]
    fn annotate_writes_labels() {
        let mut corpus = vec![
            tweet("1", &["climatehoax", "fakescience"]),
            tweet("2", &["actonclimate", "renewables"]),
            tweet("3", &["lunch"]),
        ];
        annotate(&mut corpus, &SeedSet::bundled(), &PropagationConfig::default());
        assert_eq!(corpus[0].stance_label, Some(Stance::Denier));
        assert_eq!(corpus[1].stance_label, Some(Stance::Believer));
        assert_eq!(corpus[2].stance_label, None);
        assert_eq!(corpus[2].stance_score, Some(0.0));
    }
}
