//! Embedding neighbor search, k-medoids under Jaccard distance, and
//! cluster-stratified sampling.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{self, jaccard_sorted, tokenize, EmbeddingTable, FeatureError};
use crate::rng;

pub const MAX_MEDOID_ITERATIONS: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("k must be positive")]
    ZeroK,
    #[error("k = {k} exceeds the number of items ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("requested {total} items but only {available} are available")]
    NotEnoughItems { total: usize, available: usize },
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// The `m` ids most cosine-similar to `query_id`, excluding the query.
///
/// Ties break by ascending id. Zero vectors in the table are never returned.
pub fn nearest_neighbors(query_id: &str, table: &EmbeddingTable, m: usize) -> Result<Vec<String>, ClusterError> {
    let query = table.get(query_id)?;
    let qn = features::norm(query);
    if qn == 0.0 {
        return Err(FeatureError::UndefinedCosine.into());
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut scored: Vec<(f64, &str)> = table
        .iter()
        .filter(|(id, _)| *id != query_id)
        .filter_map(|(id, v)| {
            let n = features::norm(v);
            (n > 0.0).then(|| (features::dot(query, v) / (qn * n), id))
        })
        .collect();
    let by_rank = |a: &(f64, &str), b: &(f64, &str)| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1));
    let m = m.min(scored.len());
    if m < scored.len() {
        scored.select_nth_unstable_by(m, by_rank);
        scored.truncate(m);
    }
    scored.sort_by(by_rank);
    Ok(scored.into_iter().map(|(_, id)| id.to_string()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    pub medoid_ids: Vec<String>,
    /// Sentence id to cluster index.
    pub member_map: BTreeMap<String, usize>,
    /// Total within-cluster distance after initialization and after each iteration.
    pub objective_trace: Vec<f64>,
}

impl ClusterAssignment {
    /// Members of each cluster in ascending id order.
    pub fn clusters(&self) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new(); self.k];
        for (id, &c) in &self.member_map {
            out[c].push(id.as_str());
        }
        out
    }

    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }
}

/// Interns n-gram strings so sets become sorted `u32` slices.
pub fn interned_ngram_sets<S: AsRef<str>>(texts: &[S], n_max: usize) -> Vec<Vec<u32>> {
    let mut vocab: HashMap<String, u32> = HashMap::new();
    texts
        .iter()
        .map(|t| {
            let tokens = tokenize(t.as_ref());
            let mut ids = Vec::new();
            for n in 1..=n_max.max(1) {
                if n > tokens.len() {
                    break;
                }
                for w in tokens.windows(n) {
                    let gram = w.join(" ");
                    let next = vocab.len() as u32;
                    ids.push(*vocab.entry(gram).or_insert(next));
                }
            }
            ids.sort_unstable();
            ids.dedup();
            ids
        })
        .collect()
}

/// k-medoids (Voronoi iteration) under 1 − Jaccard over word n-gram sets.
///
/// `items` are `(sentence_id, text)` pairs. Initialization picks a seeded
/// random first medoid then greedy farthest points. Each medoid is always a
/// member of its own cluster, so no cluster is ever empty.
pub fn cluster_jaccard<S: AsRef<str> + Sync>(
    items: &[(S, S)],
    k: usize,
    n_max: usize,
    seed: u64,
) -> Result<ClusterAssignment, ClusterError> {
    let n = items.len();
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if k > n {
        return Err(ClusterError::KTooLarge { k, n });
    }
    let texts: Vec<&str> = items.iter().map(|(_, t)| t.as_ref()).collect();
    let sets = interned_ngram_sets(&texts, n_max);
    let dist = |a: usize, b: usize| 1.0 - jaccard_sorted(&sets[a], &sets[b]);

    let mut rng = rng::seeded(seed);
    let mut medoids = Vec::with_capacity(k);
    let mut is_medoid = vec![false; n];
    let first = rng.gen_range(0..n);
    medoids.push(first);
    is_medoid[first] = true;
    let mut nearest: Vec<f64> = (0..n).into_par_iter().map(|i| dist(i, first)).collect();
    while medoids.len() < k {
        let mut best = None;
        for i in 0..n {
            if is_medoid[i] {
                continue;
            }
            match best {
                Some((_, d)) if nearest[i] <= d => {}
                _ => best = Some((i, nearest[i])),
            }
        }
        let (pick, _) = best.expect("k <= n leaves a candidate");
        medoids.push(pick);
        is_medoid[pick] = true;
        nearest
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, d)| *d = d.min(dist(i, pick)));
    }

    let assign = |medoids: &[usize]| -> (Vec<usize>, f64) {
        let medoid_of: HashMap<usize, usize> = medoids.iter().enumerate().map(|(c, &m)| (m, c)).collect();
        let pairs: Vec<(usize, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                if let Some(&c) = medoid_of.get(&i) {
                    return (c, 0.0);
                }
                let mut best = (0, f64::INFINITY);
                for (c, &m) in medoids.iter().enumerate() {
                    let d = dist(i, m);
                    if d < best.1 {
                        best = (c, d);
                    }
                }
                best
            })
            .collect();
        let cost = pairs.iter().map(|p| p.1).sum();
        (pairs.into_iter().map(|p| p.0).collect(), cost)
    };

    let (mut labels, cost) = assign(&medoids);
    let mut trace = vec![cost];
    for _ in 0..MAX_MEDOID_ITERATIONS {
        let mut members = vec![Vec::new(); k];
        for (i, &c) in labels.iter().enumerate() {
            members[c].push(i);
        }
        let new_medoids: Vec<usize> = members
            .par_iter()
            .enumerate()
            .map(|(c, group)| {
                let current = medoids[c];
                let cost_of = |cand: usize| group.iter().map(|&j| dist(cand, j)).sum::<f64>();
                let mut best = (current, cost_of(current));
                for &cand in group {
                    if cand == current {
                        continue;
                    }
                    let cost = cost_of(cand);
                    if cost < best.1 - 1e-12 {
                        best = (cand, cost);
                    }
                }
                best.0
            })
            .collect();
        if new_medoids == medoids {
            break;
        }
        medoids = new_medoids;
        let (next_labels, cost) = assign(&medoids);
        labels = next_labels;
        trace.push(cost);
    }

    Ok(ClusterAssignment {
        k,
        medoid_ids: medoids.iter().map(|&m| items[m].0.as_ref().to_string()).collect(),
        member_map: labels
            .iter()
            .enumerate()
            .map(|(i, &c)| (items[i].0.as_ref().to_string(), c))
            .collect(),
        objective_trace: trace,
    })
}

/// Draws `total` ids with equal representation per cluster.
///
/// Clusters are visited in seeded shuffled order. Each gets `total / k`, the
/// first `total % k` get one more; clusters smaller than their quota give all
/// members and the shortfall moves round-robin to clusters with spare members.
pub fn sample_equal(assignment: &ClusterAssignment, total: usize, seed: u64) -> Result<Vec<String>, ClusterError> {
    let available = assignment.member_map.len();
    if total > available {
        return Err(ClusterError::NotEnoughItems { total, available });
    }
    let k = assignment.k;
    let mut rng = rng::seeded(seed);
    let mut clusters: Vec<Vec<&str>> = assignment.clusters();
    for members in &mut clusters {
        members.shuffle(&mut rng);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut rng);

    let mut quota = vec![0usize; k];
    for (pos, &c) in order.iter().enumerate() {
        quota[c] = total / k + usize::from(pos < total % k);
    }
    let mut shortfall = 0;
    for c in 0..k {
        if quota[c] > clusters[c].len() {
            shortfall += quota[c] - clusters[c].len();
            quota[c] = clusters[c].len();
        }
    }
    while shortfall > 0 {
        let mut progressed = false;
        for &c in &order {
            if shortfall == 0 {
                break;
            }
            if quota[c] < clusters[c].len() {
                quota[c] += 1;
                shortfall -= 1;
                progressed = true;
            }
        }
        debug_assert!(progressed, "total <= available guarantees capacity");
    }
    Ok(order
        .iter()
        .flat_map(|&c| clusters[c][..quota[c]].iter().map(|s| s.to_string()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn table(rows: &[(&str, Vec<f64>)]) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(rows[0].1.len());
        for (id, v) in rows {
            t.insert(*id, v.clone()).unwrap();
        }
        t
    }

    #[test]
    fn duplicate_vector_is_first_neighbor() {
        let t = table(&[
            ("v1", vec![1.0, 0.2]),
            ("v2", vec![1.0, 0.2]),
            ("v3", vec![0.0, 1.0]),
        ]);
        assert_eq!(nearest_neighbors("v1", &t, 2).unwrap(), vec!["v2", "v3"]);
        assert!(nearest_neighbors("v1", &t, 0).unwrap().is_empty());
        assert!(matches!(
            nearest_neighbors("zz", &t, 1),
            Err(ClusterError::Feature(FeatureError::MissingEmbedding(_)))
        ));
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let t = table(&[("q", vec![1.0, 0.0]), ("b", vec![2.0, 0.0]), ("a", vec![3.0, 0.0])]);
        assert_eq!(nearest_neighbors("q", &t, 2).unwrap(), vec!["a", "b"]);
    }

    #[test]
    fn neighbors_match_exhaustive_scan() {
        use rand::Rng;
        let mut r = rng::seeded(7);
        let mut t = EmbeddingTable::new(6);
        for i in 0..20 {
            t.insert(format!("s{i:02}"), (0..6).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap();
        }
        for q in ["s00", "s07", "s19"] {
            // Oracle: score every other id, sort descending with id tie-break.
            let qv = t.get(q).unwrap();
            let mut all: Vec<(f64, String)> = t
                .iter()
                .filter(|(id, _)| *id != q)
                .map(|(id, v)| {
                    let c = qv.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
                        / (qv.iter().map(|x| x * x).sum::<f64>().sqrt() * v.iter().map(|x| x * x).sum::<f64>().sqrt());
                    (c, id.to_string())
                })
                .collect();
            all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            let expected: Vec<String> = all.into_iter().take(5).map(|x| x.1).collect();
            assert_eq!(nearest_neighbors(q, &t, 5).unwrap(), expected);
        }
    }

    fn items(texts: &[&str]) -> Vec<(String, String)> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| (format!("s{i:02}"), t.to_string()))
            .collect()
    }

    #[test]
    fn separable_groups_recovered() {
        let data = items(&[
            "the method is novel",
            "the method is novel",
            "the method is novel",
            "experiments are weak overall",
            "experiments are weak overall",
        ]);
        for seed in 0..5 {
            let a = cluster_jaccard(&data, 2, 3, seed).unwrap();
            let c = |id: &str| a.member_map[id];
            assert_eq!(c("s00"), c("s01"));
            assert_eq!(c("s00"), c("s02"));
            assert_eq!(c("s03"), c("s04"));
            assert_ne!(c("s00"), c("s03"));
            assert_eq!(a.objective(), 0.0);
        }
    }

    /// Best total distance for a fixed partition: each cluster's cheapest medoid.
    fn partition_cost(labels: &[usize], k: usize, dist: &dyn Fn(usize, usize) -> f64) -> f64 {
        (0..k)
            .map(|c| {
                let group: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
                group
                    .iter()
                    .map(|&m| group.iter().map(|&j| dist(m, j)).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    }

    #[test]
    fn twelve_sentences_beat_random_partitions() {
        let data = items(&[
            "the writing is clear and easy to follow",
            "the writing is clear",
            "writing is clear and well organized",
            "the paper is clear and easy to follow",
            "experiments are weak and baselines are missing",
            "the experiments are weak",
            "baselines are missing from the experiments",
            "experiments are weak overall",
            "the idea is novel and interesting",
            "a novel idea",
            "the idea is interesting and novel",
            "the core idea is novel",
        ]);
        let sets: Vec<_> = data.iter().map(|(_, t)| crate::features::ngram_set(t, 3)).collect();
        let dist = |a: usize, b: usize| 1.0 - crate::features::jaccard(&sets[a], &sets[b]);
        let a = cluster_jaccard(&data, 3, 3, 4).unwrap();
        let ours: Vec<usize> = data.iter().map(|(id, _)| a.member_map[id]).collect();
        let our_cost = partition_cost(&ours, 3, &dist);
        assert!((our_cost - a.objective()).abs() < 1e-9);

        let mut r = rng::seeded(99);
        let mut tried = 0;
        while tried < 1000 {
            let labels: Vec<usize> = (0..12).map(|_| r.gen_range(0..3)).collect();
            if (0..3).any(|c| !labels.contains(&c)) {
                continue;
            }
            tried += 1;
            assert!(our_cost <= partition_cost(&labels, 3, &dist) + 1e-9);
        }
        let groups: Vec<usize> = (0..12).map(|i| i / 4).collect();
        let same = |x: usize, y: usize| (ours[x] == ours[y]) == (groups[x] == groups[y]);
        assert!((0..12).all(|x| (0..12).all(|y| same(x, y))), "{ours:?}");
    }

    #[test]
    fn objective_trace_never_increases() {
        let data = crate::synth::generate(&crate::synth::SynthConfig {
            papers: 12,
            ..Default::default()
        });
        let pool: Vec<(String, String)> = data.corpus.sentences().map(|s| (s.id.clone(), s.text.clone())).collect();
        for seed in 0..4 {
            let a = cluster_jaccard(&pool, 15, 3, seed).unwrap();
            assert!(a.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{:?}", a.objective_trace);
        }
    }

    #[test]
    fn k_equal_n_gives_singletons() {
        let data = items(&["a b", "a b", "c", "d e f"]);
        let a = cluster_jaccard(&data, 4, 3, 1).unwrap();
        let sizes: Vec<usize> = a.clusters().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![1, 1, 1, 1]);
        for (c, medoid) in a.medoid_ids.iter().enumerate() {
            assert_eq!(a.member_map[medoid], c);
        }
    }

    #[test]
    fn invalid_k() {
        let data = items(&["a"]);
        assert_eq!(cluster_jaccard(&data, 0, 3, 0).unwrap_err(), ClusterError::ZeroK);
        assert_eq!(
            cluster_jaccard(&data, 2, 3, 0).unwrap_err(),
            ClusterError::KTooLarge { k: 2, n: 1 }
        );
    }

    fn assignment(sizes: &[usize]) -> ClusterAssignment {
        let mut member_map = BTreeMap::new();
        let mut medoid_ids = Vec::new();
        for (c, &size) in sizes.iter().enumerate() {
            for j in 0..size {
                let id = format!("c{c}m{j:03}");
                if j == 0 {
                    medoid_ids.push(id.clone());
                }
                member_map.insert(id, c);
            }
        }
        ClusterAssignment {
            k: sizes.len(),
            medoid_ids,
            member_map,
            objective_trace: vec![],
        }
    }

    fn per_cluster(a: &ClusterAssignment, picked: &[String]) -> Vec<usize> {
        let mut counts = vec![0; a.k];
        for id in picked {
            counts[a.member_map[id]] += 1;
        }
        counts
    }

    #[test]
    fn exact_division() {
        let a = assignment(&[10, 10, 10]);
        let picked = sample_equal(&a, 6, 3).unwrap();
        assert_eq!(per_cluster(&a, &picked), vec![2, 2, 2]);
    }

    #[test]
    fn forced_redistribution() {
        let a = assignment(&[1, 100]);
        let picked = sample_equal(&a, 10, 3).unwrap();
        assert_eq!(per_cluster(&a, &picked), vec![1, 9]);
        let unique: BTreeSet<_> = picked.iter().collect();
        assert_eq!(unique.len(), 10);
    }

    #[test]
    fn remainder_goes_to_shuffled_prefix() {
        let a = assignment(&[5, 5, 5, 5]);
        let picked = sample_equal(&a, 6, 11).unwrap();
        let mut counts = per_cluster(&a, &picked);
        counts.sort();
        assert_eq!(counts, vec![1, 1, 2, 2]);
        assert_eq!(picked, sample_equal(&a, 6, 11).unwrap());
    }

    #[test]
    fn paper_scale_quota() {
        let a = assignment(&vec![8; 300]);
        let picked = sample_equal(&a, 1500, 5).unwrap();
        assert_eq!(picked.len(), 1500);
        assert!(per_cluster(&a, &picked).iter().all(|&c| c == 5));
    }

    #[test]
    fn too_many_requested() {
        let a = assignment(&[2, 2]);
        assert_eq!(
            sample_equal(&a, 5, 0).unwrap_err(),
            ClusterError::NotEnoughItems { total: 5, available: 4 }
        );
    }
}
