//! Cross-scene query by example, cross-scene classification and
//! multi-scene summarization on shared-basis topic profiles.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clustering::recursive_ncut;
use crate::corpus::CategoryId;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math::{l2_distance, percentile};

/// A clip's topic profile with its origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfiledClip {
    pub scene_id: String,
    pub clip_id: String,
    pub gamma: Vec<f64>,
}

impl ProfiledClip {
    pub fn new(scene_id: impl Into<String>, clip_id: impl Into<String>, gamma: Vec<f64>) -> Self {
        Self {
            scene_id: scene_id.into(),
            clip_id: clip_id.into(),
            gamma,
        }
    }

    fn key(&self) -> (&str, &str) {
        (&self.scene_id, &self.clip_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedHit {
    pub scene_id: String,
    pub clip_id: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedRetrieval {
    pub query_scene: String,
    pub query_clip: String,
    pub hits: Vec<RankedHit>,
}

fn check_dims(expected: usize, clips: &[ProfiledClip]) -> Result<()> {
    match clips.iter().find(|c| c.gamma.len() != expected) {
        Some(c) => Err(Error::domain(alloc::format!(
            "profile of {}/{} has {} topics, expected {expected}",
            c.scene_id,
            c.clip_id,
            c.gamma.len()
        ))),
        None => Ok(()),
    }
}

/// Ranks the pool by L2 distance to the query. The query itself is skipped
/// if present; ties are ordered by `(scene_id, clip_id)`.
pub fn query_by_example(
    query: &ProfiledClip,
    pool: &[ProfiledClip],
    top_t: Option<usize>,
) -> Result<RankedRetrieval> {
    check_dims(query.gamma.len(), pool)?;
    let mut hits: Vec<RankedHit> = pool
        .iter()
        .filter(|c| c.key() != query.key())
        .map(|c| RankedHit {
            scene_id: c.scene_id.clone(),
            clip_id: c.clip_id.clone(),
            distance: l2_distance(&query.gamma, &c.gamma),
        })
        .collect();
    hits.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then_with(|| a.scene_id.cmp(&b.scene_id))
            .then_with(|| a.clip_id.cmp(&b.clip_id))
    });
    if let Some(t) = top_t {
        hits.truncate(t);
    }
    Ok(RankedRetrieval {
        query_scene: query.scene_id.clone(),
        query_clip: query.clip_id.clone(),
        hits,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledClip {
    pub clip: ProfiledClip,
    pub category: CategoryId,
}

/// Majority vote among the `k` nearest labeled clips. A vote tie goes to the
/// tied label met first in distance order.
pub fn knn_predict(train: &[&LabeledClip], query: &[f64], k: usize) -> Result<CategoryId> {
    if train.is_empty() {
        return Err(Error::domain("no labeled clips"));
    }
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    let mut order: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, l)| (l2_distance(query, &l.clip.gamma), i))
        .collect();
    order.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| train[a.1].clip.key().cmp(&train[b.1].clip.key()))
    });
    let nearest = &order[..k.min(order.len())];
    let mut votes: BTreeMap<&CategoryId, usize> = BTreeMap::new();
    for &(_, i) in nearest {
        *votes.entry(&train[i].category).or_default() += 1;
    }
    let top = *votes.values().max().expect("at least one vote");
    let winner = nearest
        .iter()
        .map(|&(_, i)| &train[i].category)
        .find(|c| votes[c] == top)
        .expect("a winning label exists");
    Ok(winner.clone())
}

/// Mean over categories present in `truth` of per-category recall.
pub(crate) fn macro_recall(truth: &[&CategoryId], pred: &[CategoryId]) -> f64 {
    let mut per: BTreeMap<&CategoryId, (usize, usize)> = BTreeMap::new();
    for (t, p) in truth.iter().zip(pred) {
        let e = per.entry(t).or_default();
        e.1 += 1;
        if *t == p {
            e.0 += 1;
        }
    }
    if per.is_empty() {
        return 0.0;
    }
    per.values()
        .map(|&(hit, n)| hit as f64 / n as f64)
        .sum::<f64>()
        / per.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnOutcome {
    pub chosen_k: usize,
    /// Mean held-out-scene macro accuracy for each candidate `k`.
    pub cv_scores: Vec<(usize, f64)>,
    pub predictions: Vec<CategoryId>,
}

/// Predicts categories for clips of an unlabeled scene from the labeled
/// clips of other scenes in its cluster. `k` is chosen by leave-one-scene-out
/// cross validation over the labeled scenes (ties to the smaller `k`).
pub fn knn_classify_cross_scene(
    test: &[ProfiledClip],
    labeled: &[LabeledClip],
    k_grid: &[usize],
) -> Result<KnnOutcome> {
    if labeled.is_empty() {
        return Err(Error::domain("empty label set"));
    }
    if k_grid.is_empty() || k_grid.contains(&0) {
        return Err(Error::domain("k grid must be non-empty and positive"));
    }
    let dim = labeled[0].clip.gamma.len();
    check_dims(dim, test)?;
    if labeled.iter().any(|l| l.clip.gamma.len() != dim) {
        return Err(Error::domain("labeled profiles have different lengths"));
    }
    let mut scenes: Vec<&str> = labeled.iter().map(|l| l.clip.scene_id.as_str()).collect();
    scenes.sort_unstable();
    scenes.dedup();

    let mut grid: Vec<usize> = k_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let mut cv_scores = Vec::new();
    let chosen_k = if scenes.len() < 2 {
        log::debug!("one labeled scene; using the smallest k without cross validation");
        grid[0]
    } else {
        let mut best = (grid[0], f64::NEG_INFINITY);
        for &k in &grid {
            let mut total = 0.0;
            for held in &scenes {
                let train: Vec<&LabeledClip> = labeled
                    .iter()
                    .filter(|l| l.clip.scene_id != *held)
                    .collect();
                let valid: Vec<&LabeledClip> = labeled
                    .iter()
                    .filter(|l| l.clip.scene_id == *held)
                    .collect();
                let pred = valid
                    .iter()
                    .map(|v| knn_predict(&train, &v.clip.gamma, k))
                    .collect::<Result<Vec<_>>>()?;
                let truth: Vec<&CategoryId> = valid.iter().map(|v| &v.category).collect();
                total += macro_recall(&truth, &pred);
            }
            let score = total / scenes.len() as f64;
            cv_scores.push((k, score));
            if score > best.1 + 1e-12 {
                best = (k, score);
            }
        }
        best.0
    };
    let train: Vec<&LabeledClip> = labeled.iter().collect();
    let predictions = test
        .iter()
        .map(|t| knn_predict(&train, &t.gamma, chosen_k))
        .collect::<Result<Vec<_>>>()?;
    Ok(KnnOutcome {
        chosen_k,
        cv_scores,
        predictions,
    })
}

/// Selected summary clips (indices into the pool) and the realized
/// covering radius `J = max_pool min_Σ ‖·‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummarySet {
    pub label: String,
    pub selected: Vec<usize>,
    pub objective: f64,
}

/// Covering radius of `centers` over the pool.
pub fn kcenter_cost(pool: &[Vec<f64>], centers: &[usize]) -> f64 {
    pool.iter()
        .map(|p| {
            centers
                .iter()
                .map(|&c| l2_distance(p, &pool[c]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

fn check_pool(pool: &[Vec<f64>], n_sum: usize) -> Result<()> {
    if pool.is_empty() {
        return Err(Error::domain("empty summarization pool"));
    }
    if n_sum == 0 || n_sum > pool.len() {
        return Err(Error::domain(alloc::format!(
            "summary size {n_sum} must lie in 1..={}",
            pool.len()
        )));
    }
    let dim = pool[0].len();
    if pool.iter().any(|p| p.len() != dim) {
        return Err(Error::domain("pool profiles have different lengths"));
    }
    Ok(())
}

/// Farthest-point k-center starting from pool clip `first`. Each step adds
/// the unselected clip farthest from its nearest center (lowest index on
/// ties).
pub fn summarize_kcenter_from(pool: &[Vec<f64>], n_sum: usize, first: usize) -> Result<SummarySet> {
    check_pool(pool, n_sum)?;
    if first >= pool.len() {
        return Err(Error::domain("first center outside the pool"));
    }
    let mut selected = vec![first];
    let mut nearest: Vec<f64> = pool.iter().map(|p| l2_distance(p, &pool[first])).collect();
    let mut taken = vec![false; pool.len()];
    taken[first] = true;
    while selected.len() < n_sum {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for (i, &d) in nearest.iter().enumerate() {
            if !taken[i] && d > best.1 {
                best = (i, d);
            }
        }
        let next = best.0;
        taken[next] = true;
        selected.push(next);
        for (d, p) in nearest.iter_mut().zip(pool) {
            *d = d.min(l2_distance(p, &pool[next]));
        }
    }
    let objective = nearest.iter().copied().fold(0.0, f64::max);
    Ok(SummarySet {
        label: String::new(),
        selected,
        objective,
    })
}

/// k-center with a seeded uniform choice of the first center.
pub fn summarize_kcenter(pool: &[Vec<f64>], n_sum: usize, seed: u64) -> Result<SummarySet> {
    check_pool(pool, n_sum)?;
    let first = ChaCha8Rng::seed_from_u64(seed).random_range(0..pool.len());
    summarize_kcenter_from(pool, n_sum, first)
}

/// Uniform sample without replacement.
pub fn summarize_random(pool: &[Vec<f64>], n_sum: usize, seed: u64) -> Result<SummarySet> {
    check_pool(pool, n_sum)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let selected = sample(&mut rng, pool.len(), n_sum).into_vec();
    let objective = kcenter_cost(pool, &selected);
    Ok(SummarySet {
        label: String::new(),
        selected,
        objective,
    })
}

fn distance_matrix(pool: &[Vec<f64>]) -> Matrix {
    let n = pool.len();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = l2_distance(&pool[i], &pool[j]);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Recursive normalized cut into `n_sum` groups on `exp(-d²/σ²)` similarity
/// (σ the median pairwise distance); the medoid of each group is selected.
pub fn summarize_ncut(pool: &[Vec<f64>], n_sum: usize) -> Result<SummarySet> {
    check_pool(pool, n_sum)?;
    let n = pool.len();
    let d = distance_matrix(pool);
    let pairwise: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| d[(i, j)])
        .collect();
    let sigma = if pairwise.is_empty() {
        1.0
    } else {
        percentile(&pairwise, 50.0)?
    };
    let sigma = if sigma > 0.0 { sigma } else { 1.0 };
    let w = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            libm::exp(-d[(i, j)] * d[(i, j)] / (sigma * sigma))
        }
    });
    let labels = recursive_ncut(&w, n_sum)?;
    let mut selected = Vec::with_capacity(n_sum);
    for c in 0..n_sum {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        let medoid = members
            .iter()
            .map(|&i| (i, members.iter().map(|&j| d[(i, j)]).sum::<f64>()))
            .fold((usize::MAX, f64::INFINITY), |b, cur| {
                if cur.1 < b.1 {
                    cur
                } else {
                    b
                }
            })
            .0;
        selected.push(medoid);
    }
    let objective = kcenter_cost(pool, &selected);
    Ok(SummarySet {
        label: String::new(),
        selected,
        objective,
    })
}

/// Splits `n_sum` across groups proportionally to their sizes (largest
/// remainder, ties to the earlier group), every group capped at its size.
pub fn proportional_split(sizes: &[usize], n_sum: usize) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return vec![0; sizes.len()];
    }
    let n_sum = n_sum.min(total);
    let mut shares: Vec<usize> = sizes.iter().map(|&s| s * n_sum / total).collect();
    let mut rema: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .map(|(i, &s)| (s * n_sum % total, i))
        .collect();
    rema.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = n_sum - shares.iter().sum::<usize>();
    while left > 0 {
        for &(_, i) in &rema {
            if left > 0 && shares[i] < sizes[i] {
                shares[i] += 1;
                left -= 1;
            }
        }
    }
    shares
}
