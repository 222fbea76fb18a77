//! Per-scene Latent Dirichlet Allocation trained by variational EM.
//!
//! Documents are processed in sparse form: each clip is a list of unique
//! words with counts, and the variational multinomials `φ` are kept per unique
//! word. The E-step alternates
//!
//! ```text
//! γ_jk = α_k + Σ_w n_jw φ_jwk
//! φ_jwk ∝ β_wk · exp(Ψ(γ_jk))
//! ```
//!
//! and the M-step sets `β_wk ∝ Σ_j n_jw φ_jwk + η`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::corpus::{ClipDocument, GridSpec};
use crate::error::{Error, Result};
use crate::math::{ln_gamma, psi, PROB_FLOOR};

/// `K` topics, each a distribution over the scene codebook.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicMatrix {
    grid: GridSpec,
    num_topics: usize,
    data: Vec<f64>,
}

impl TopicMatrix {
    /// Validates rows: correct length, strictly positive, summing to 1 ± 1e-9.
    pub fn new(grid: GridSpec, rows: Vec<Vec<f64>>) -> Result<Self> {
        let nv = grid.vocab_size();
        if rows.is_empty() {
            return Err(Error::domain("topic matrix needs at least one topic"));
        }
        let mut data = Vec::with_capacity(rows.len() * nv);
        for (k, row) in rows.iter().enumerate() {
            if row.len() != nv {
                return Err(Error::domain(format!(
                    "topic {k} has {} entries, expected {nv}",
                    row.len()
                )));
            }
            if row.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::domain(format!("topic {k} has non-positive entries")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::domain(format!("topic {k} sums to {sum}")));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            grid,
            num_topics: rows.len(),
            data,
        })
    }

    /// Normalizes each row, floors it at [`PROB_FLOOR`] and renormalizes. An
    /// all-zero row becomes uniform.
    pub fn from_unnormalized(grid: GridSpec, rows: Vec<Vec<f64>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .map(|mut row| {
                let sum: f64 = row.iter().sum();
                if sum > 0.0 {
                    row.iter_mut().for_each(|v| *v /= sum);
                }
                for v in row.iter_mut() {
                    *v = v.max(PROB_FLOOR);
                }
                let sum: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= sum);
                row
            })
            .collect();
        Self::new(grid, rows)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn vocab_size(&self) -> usize {
        self.grid.vocab_size()
    }

    pub fn topic(&self, k: usize) -> &[f64] {
        let nv = self.vocab_size();
        &self.data[k * nv..(k + 1) * nv]
    }

    pub fn topics(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.vocab_size())
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.topics().map(<[f64]>::to_vec).collect()
    }

    /// Word-major copy (`nv × K`) used by the E-step.
    fn transposed(&self) -> Vec<f64> {
        let nv = self.vocab_size();
        let k = self.num_topics;
        let mut t = vec![0.0; nv * k];
        for topic in 0..k {
            for v in 0..nv {
                t[v * k + topic] = self.data[topic * nv + v];
            }
        }
        t
    }
}

/// Symmetric or asymmetric Dirichlet prior over clip topic mixtures.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletPrior {
    alpha: Vec<f64>,
}

impl DirichletPrior {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::domain("Dirichlet parameters must be positive"));
        }
        Ok(Self { alpha })
    }

    pub fn symmetric(k: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; k])
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// Variational Dirichlet parameters `γ` of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipTopicProfile {
    pub clip_id: String,
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdaConfig {
    pub max_em_iters: usize,
    /// Maximum inner E-step iterations per clip.
    pub e_step_iters: usize,
    /// Inner E-step stops when `max_k |Δγ_k|` falls below this.
    pub e_step_tol: f64,
    /// Relative change of the objective that ends EM.
    pub tol: f64,
    pub seed: u64,
    /// Pseudocount added to every `(word, topic)` entry in the M-step.
    pub eta: f64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            max_em_iters: 100,
            e_step_iters: 20,
            e_step_tol: 1e-3,
            tol: 1e-4,
            seed: 0,
            eta: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LdaFit {
    pub topics: TopicMatrix,
    pub alpha: DirichletPrior,
    /// Profiles from a fresh E-step against the final topics.
    pub profiles: Vec<ClipTopicProfile>,
    /// Objective after every E-step: the variational bound plus the
    /// `η Σ ln β` term that the smoothed M-step maximizes.
    pub elbo_trace: Vec<f64>,
}

/// Per-clip sparse view used by the E-step.
struct SparseDoc {
    words: Vec<usize>,
    counts: Vec<f64>,
    total: f64,
}

impl SparseDoc {
    fn from_clip(clip: &ClipDocument) -> Self {
        let words = clip.counts().iter().map(|&(w, _)| w).collect();
        let counts: Vec<f64> = clip.counts().iter().map(|&(_, c)| c as f64).collect();
        let total = counts.iter().sum();
        Self {
            words,
            counts,
            total,
        }
    }
}

/// Scratch buffers reused across clips.
struct Workspace {
    phi: Vec<f64>,
    exp_psi: Vec<f64>,
    new_gamma: Vec<f64>,
}

impl Workspace {
    fn new(k: usize) -> Self {
        Self {
            phi: Vec::new(),
            exp_psi: vec![0.0; k],
            new_gamma: vec![0.0; k],
        }
    }
}

/// Coordinate ascent on one clip. When `cold` is set, `φ` starts at `1/K` and
/// `γ` is derived from it; otherwise the given `γ` seeds the first `φ` update.
/// On return `ws.phi` holds the final `φ` (`len(words) × K`) and `gamma` the
/// matching `γ`.
fn e_step_doc(
    doc: &SparseDoc,
    beta_t: &[f64],
    alpha: &[f64],
    gamma: &mut [f64],
    cold: bool,
    cfg: &LdaConfig,
    ws: &mut Workspace,
) {
    let k = alpha.len();
    let n = doc.words.len();
    ws.phi.clear();
    ws.phi.resize(n * k, 1.0 / k as f64);
    if cold {
        for t in 0..k {
            gamma[t] = alpha[t] + doc.total / k as f64;
        }
    }
    if n == 0 {
        gamma.copy_from_slice(alpha);
        return;
    }
    for _ in 0..cfg.e_step_iters.max(1) {
        for t in 0..k {
            ws.exp_psi[t] = libm::exp(psi(gamma[t]));
        }
        ws.new_gamma.copy_from_slice(alpha);
        for (i, &w) in doc.words.iter().enumerate() {
            let row = &mut ws.phi[i * k..(i + 1) * k];
            let b = &beta_t[w * k..(w + 1) * k];
            let mut norm = 0.0;
            for t in 0..k {
                row[t] = b[t] * ws.exp_psi[t];
                norm += row[t];
            }
            let c = doc.counts[i];
            for t in 0..k {
                row[t] /= norm;
                ws.new_gamma[t] += c * row[t];
            }
        }
        let mut delta: f64 = 0.0;
        for t in 0..k {
            delta = delta.max((ws.new_gamma[t] - gamma[t]).abs());
            gamma[t] = ws.new_gamma[t];
        }
        if delta < cfg.e_step_tol {
            break;
        }
    }
}

/// Variational lower bound of one clip's log likelihood given `β`, `α` and the
/// current `(γ, φ)`.
fn doc_bound(doc: &SparseDoc, beta_t: &[f64], alpha: &[f64], gamma: &[f64], phi: &[f64]) -> f64 {
    let k = alpha.len();
    let alpha_sum: f64 = alpha.iter().sum();
    let gamma_sum: f64 = gamma.iter().sum();
    let psi_sum = psi(gamma_sum);
    let mut bound = ln_gamma(alpha_sum) - ln_gamma(gamma_sum);
    let mut elog = vec![0.0; k];
    for t in 0..k {
        elog[t] = psi(gamma[t]) - psi_sum;
        bound += -ln_gamma(alpha[t]) + (alpha[t] - 1.0) * elog[t];
        bound += ln_gamma(gamma[t]) - (gamma[t] - 1.0) * elog[t];
    }
    for (i, &w) in doc.words.iter().enumerate() {
        let c = doc.counts[i];
        let row = &phi[i * k..(i + 1) * k];
        let b = &beta_t[w * k..(w + 1) * k];
        let mut acc = 0.0;
        for t in 0..k {
            let p = row[t];
            if p > 0.0 {
                acc += p * (elog[t] + libm::log(b[t]) - libm::log(p));
            }
        }
        bound += c * acc;
    }
    bound
}

fn check_inputs(clips: &[ClipDocument], grid: &GridSpec, k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::domain("number of topics must be at least 1"));
    }
    if clips.is_empty() {
        return Err(Error::domain("cannot fit a topic model to an empty corpus"));
    }
    for clip in clips {
        clip.validate(grid)?;
    }
    if clips.iter().all(ClipDocument::is_empty) {
        return Err(Error::domain("corpus has no words"));
    }
    Ok(())
}

/// Trains LDA with `k` topics on `clips`.
///
/// `α` is fixed at 1 for every topic and `β` starts from a seeded symmetric
/// Dirichlet(1) draw per topic.
pub fn fit_lda(
    clips: &[ClipDocument],
    grid: &GridSpec,
    k: usize,
    cfg: &LdaConfig,
) -> Result<LdaFit> {
    check_inputs(clips, grid, k)?;
    if !(cfg.eta > 0.0) {
        return Err(Error::domain("smoothing pseudocount must be positive"));
    }
    let nv = grid.vocab_size();
    let alpha = DirichletPrior::symmetric(k, 1.0)?;
    let docs: Vec<SparseDoc> = clips.iter().map(SparseDoc::from_clip).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut beta = vec![0.0; k * nv];
    for row in beta.chunks_mut(nv) {
        for v in row.iter_mut() {
            let e: f64 = Exp1.sample(&mut rng);
            *v = e.max(PROB_FLOOR);
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    let mut beta_t = transpose(&beta, k, nv);

    let mut gammas = vec![0.0; docs.len() * k];
    let mut ws = Workspace::new(k);
    let mut stats = vec![0.0; k * nv];
    let mut trace: Vec<f64> = Vec::new();

    for iter in 0..cfg.max_em_iters.max(1) {
        stats.iter_mut().for_each(|s| *s = 0.0);
        let mut bound = 0.0;
        for (j, doc) in docs.iter().enumerate() {
            let gamma = &mut gammas[j * k..(j + 1) * k];
            e_step_doc(doc, &beta_t, alpha.alpha(), gamma, iter == 0, cfg, &mut ws);
            bound += doc_bound(doc, &beta_t, alpha.alpha(), gamma, &ws.phi);
            for (i, &w) in doc.words.iter().enumerate() {
                let c = doc.counts[i];
                for t in 0..k {
                    stats[t * nv + w] += c * ws.phi[i * k + t];
                }
            }
        }
        let log_prior: f64 = beta.iter().map(|&b| cfg.eta * libm::log(b)).sum();
        let objective = bound + log_prior;
        if !objective.is_finite() {
            return Err(Error::numeric(format!(
                "non-finite objective at EM iteration {iter}"
            )));
        }
        trace.push(objective);

        // M-step: smoothed expected counts, row-normalized.
        for t in 0..k {
            let row = &stats[t * nv..(t + 1) * nv];
            let total: f64 = row.iter().sum::<f64>() + cfg.eta * nv as f64;
            for v in 0..nv {
                beta[t * nv + v] = (row[v] + cfg.eta) / total;
            }
        }
        beta_t = transpose(&beta, k, nv);

        if trace.len() >= 2 {
            let prev = trace[trace.len() - 2];
            if ((objective - prev) / prev.abs()).abs() < cfg.tol {
                break;
            }
        }
    }

    let rows = beta.chunks(nv).map(<[f64]>::to_vec).collect();
    let topics = TopicMatrix::new(*grid, rows)?;
    let profiles = infer_profiles_fixed_topics(clips, &topics, &alpha, cfg)?;
    Ok(LdaFit {
        topics,
        alpha,
        profiles,
        elbo_trace: trace,
    })
}

fn transpose(beta: &[f64], k: usize, nv: usize) -> Vec<f64> {
    let mut t = vec![0.0; nv * k];
    for topic in 0..k {
        for v in 0..nv {
            t[v * k + topic] = beta[topic * nv + v];
        }
    }
    t
}

fn check_fixed(clips: &[ClipDocument], topics: &TopicMatrix, alpha: &DirichletPrior) -> Result<()> {
    if alpha.len() != topics.num_topics() {
        return Err(Error::domain(format!(
            "prior has {} entries for {} topics",
            alpha.len(),
            topics.num_topics()
        )));
    }
    for clip in clips {
        clip.validate(topics.grid())?;
    }
    Ok(())
}

/// E-step only: profiles of `clips` against fixed `topics`, each clip started
/// from `φ = 1/K`.
pub fn infer_profiles_fixed_topics(
    clips: &[ClipDocument],
    topics: &TopicMatrix,
    alpha: &DirichletPrior,
    cfg: &LdaConfig,
) -> Result<Vec<ClipTopicProfile>> {
    check_fixed(clips, topics, alpha)?;
    let k = topics.num_topics();
    let beta_t = topics.transposed();
    let mut ws = Workspace::new(k);
    Ok(clips
        .iter()
        .map(|clip| {
            let doc = SparseDoc::from_clip(clip);
            let mut gamma = vec![0.0; k];
            e_step_doc(&doc, &beta_t, alpha.alpha(), &mut gamma, true, cfg, &mut ws);
            ClipTopicProfile {
                clip_id: clip.clip_id.clone(),
                gamma,
            }
        })
        .collect())
}

/// Sum over clips of the converged fixed-topic variational bound; the
/// marginal-likelihood surrogate used to score alignments.
pub fn fixed_topic_bound(
    clips: &[ClipDocument],
    topics: &TopicMatrix,
    alpha: &DirichletPrior,
    cfg: &LdaConfig,
) -> Result<f64> {
    check_fixed(clips, topics, alpha)?;
    let k = topics.num_topics();
    let beta_t = topics.transposed();
    let mut ws = Workspace::new(k);
    let mut total = 0.0;
    for clip in clips {
        let doc = SparseDoc::from_clip(clip);
        let mut gamma = vec![0.0; k];
        e_step_doc(&doc, &beta_t, alpha.alpha(), &mut gamma, true, cfg, &mut ws);
        total += doc_bound(&doc, &beta_t, alpha.alpha(), &gamma, &ws.phi);
    }
    if !total.is_finite() {
        return Err(Error::numeric("non-finite fixed-topic bound"));
    }
    Ok(total)
}

/// One `γ` update from an explicit `φ` (`len(words) × K`, row-major).
pub fn gamma_from_phi(
    clip: &ClipDocument,
    phi: &[f64],
    alpha: &DirichletPrior,
) -> Result<Vec<f64>> {
    let k = alpha.len();
    if phi.len() != clip.counts().len() * k {
        return Err(Error::domain("phi shape does not match the clip"));
    }
    let mut gamma = alpha.alpha().to_vec();
    for (i, &(_, c)) in clip.counts().iter().enumerate() {
        for t in 0..k {
            gamma[t] += c as f64 * phi[i * k + t];
        }
    }
    Ok(gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use rand::Rng;

    fn grid64() -> GridSpec {
        GridSpec::new(8, 8, 1, 5).unwrap()
    }

    fn random_corpus(seed: u64, n: usize, grid: &GridSpec) -> Vec<ClipDocument> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|j| {
                let words: Vec<(usize, u32)> = (0..30)
                    .map(|_| (rng.random_range(0..grid.vocab_size()), 1))
                    .collect();
                ClipDocument::from_counts(j.to_string(), "s", words)
            })
            .collect()
    }

    #[test]
    fn single_topic_is_smoothed_empirical_distribution() {
        let g = grid64();
        let clips = random_corpus(3, 40, &g);
        let cfg = LdaConfig {
            seed: 5,
            ..LdaConfig::default()
        };
        let fit = fit_lda(&clips, &g, 1, &cfg).unwrap();
        let mut counts = vec![0.0; 64];
        let mut total = 0.0;
        for c in &clips {
            for &(w, n) in c.counts() {
                counts[w] += n as f64;
                total += n as f64;
            }
        }
        for v in 0..64 {
            let expected = (counts[v] + cfg.eta) / (total + 64.0 * cfg.eta);
            assert!((fit.topics.topic(0)[v] - expected).abs() < 1e-12);
        }
        for (p, c) in fit.profiles.iter().zip(&clips) {
            assert!((p.gamma[0] - (1.0 + c.total() as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn e_step_gamma_identity() {
        let clip = ClipDocument::from_counts("c", "s", [(0, 2), (3, 1)]);
        let phi = [0.25, 0.75, 0.5, 0.5];
        let alpha = DirichletPrior::new(vec![1.0, 2.0]).unwrap();
        let g = gamma_from_phi(&clip, &phi, &alpha).unwrap();
        assert_eq!(g, vec![1.0 + 2.0 * 0.25 + 0.5, 2.0 + 2.0 * 0.75 + 0.5]);
    }

    #[test]
    fn elbo_is_monotone_and_profiles_conserve_mass() {
        let g = GridSpec::new(4, 4, 4, 5).unwrap();
        let clips = random_corpus(9, 60, &g);
        let fit = fit_lda(
            &clips,
            &g,
            4,
            &LdaConfig {
                seed: 1,
                ..LdaConfig::default()
            },
        )
        .unwrap();
        for w in fit.elbo_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
        for (p, c) in fit.profiles.iter().zip(&clips) {
            let s: f64 = p.gamma.iter().sum();
            assert!((s - 4.0 - c.total() as f64).abs() < 1e-6);
            assert!(p.gamma.iter().all(|&x| x >= 1.0 - 1e-12));
        }
        for t in fit.topics.topics() {
            assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn one_hot_topics_assign_unambiguously() {
        let g = GridSpec::new(3, 1, 1, 5).unwrap();
        let rows = (0..3)
            .map(|k| (0..3).map(|v| if v == k { 1.0 } else { 0.0 }).collect())
            .collect();
        let topics = TopicMatrix::from_unnormalized(g, rows).unwrap();
        let alpha = DirichletPrior::symmetric(3, 1.0).unwrap();
        let clip = ClipDocument::from_counts("c", "s", [(1, 12)]);
        let p =
            infer_profiles_fixed_topics(&[clip], &topics, &alpha, &LdaConfig::default()).unwrap();
        assert!((p[0].gamma[1] - 13.0).abs() < 1e-6);
        assert!((p[0].gamma[0] - 1.0).abs() < 1e-6);
        let empty = ClipDocument::empty("e", "s");
        let p =
            infer_profiles_fixed_topics(&[empty], &topics, &alpha, &LdaConfig::default()).unwrap();
        assert_eq!(p[0].gamma, vec![1.0; 3]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = grid64();
        let cfg = LdaConfig::default();
        assert!(fit_lda(&[], &g, 2, &cfg).is_err());
        let clips = random_corpus(1, 3, &g);
        assert!(fit_lda(&clips, &g, 0, &cfg).is_err());
        assert!(fit_lda(&[ClipDocument::empty("a", "s")], &g, 2, &cfg).is_err());
        let other = GridSpec::new(2, 2, 1, 5).unwrap();
        let topics = TopicMatrix::from_unnormalized(other, vec![vec![1.0; 4]]).unwrap();
        let alpha = DirichletPrior::symmetric(1, 1.0).unwrap();
        assert!(infer_profiles_fixed_topics(&clips, &topics, &alpha, &cfg).is_err());
    }

    #[test]
    fn seed_determinism() {
        let g = GridSpec::new(4, 4, 2, 5).unwrap();
        let clips = random_corpus(4, 30, &g);
        let cfg = LdaConfig {
            seed: 77,
            ..LdaConfig::default()
        };
        let a = fit_lda(&clips, &g, 3, &cfg).unwrap();
        let b = fit_lda(&clips, &g, 3, &cfg).unwrap();
        assert_eq!(a.topics, b.topics);
        assert_eq!(a.elbo_trace, b.elbo_trace);
    }
}
