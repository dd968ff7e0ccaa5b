//! Text similarity metrics, all scaled to [0, 100].
//!
//! Every metric works on the same tokenization: lowercase, split on
//! whitespace, strip ASCII punctuation from token edges. Two empty texts score
//! 100; an empty text against a non-empty one scores 0.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| c.is_ascii_punctuation()))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn counts<T: Ord + Clone>(items: &[T]) -> BTreeMap<T, usize> {
    let mut map = BTreeMap::new();
    for item in items {
        *map.entry(item.clone()).or_insert(0) += 1;
    }
    map
}

fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Multiset token overlap F1.
pub fn token_f1(pred: &str, reference: &str) -> f64 {
    let pred = tokenize(pred);
    let reference = tokenize(reference);
    match (pred.is_empty(), reference.is_empty()) {
        (true, true) => return 100.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let ref_counts = counts(&reference);
    let overlap: usize = counts(&pred)
        .iter()
        .map(|(tok, &n)| n.min(ref_counts.get(tok).copied().unwrap_or(0)))
        .sum();
    let precision = overlap as f64 / pred.len() as f64;
    let recall = overlap as f64 / reference.len() as f64;
    100.0 * f_measure(precision, recall)
}

fn ngrams(tokens: &[String], n: usize) -> Vec<&[String]> {
    if tokens.len() < n {
        return Vec::new();
    }
    tokens.windows(n).collect()
}

/// Sentence BLEU with a single reference: geometric mean of clipped
/// 1..=n-gram precisions times the brevity penalty.
///
/// For orders above one, a zero match count is smoothed to
/// `1 / (candidates + 1)`; unigram precision is never smoothed, so texts with
/// no shared token score 0.
pub fn bleu_n(pred: &str, reference: &str, n: usize) -> f64 {
    assert!(n >= 1, "BLEU order must be at least 1");
    let pred = tokenize(pred);
    let reference = tokenize(reference);
    match (pred.is_empty(), reference.is_empty()) {
        (true, true) => return 100.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut log_sum = 0.0;
    for order in 1..=n {
        let cand = ngrams(&pred, order);
        let ref_counts = counts(&ngrams(&reference, order));
        let matched: usize = counts(&cand)
            .iter()
            .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
            .sum();
        let precision = if order > 1 && matched == 0 {
            1.0 / (cand.len() as f64 + 1.0)
        } else {
            matched as f64 / cand.len() as f64
        };
        if precision == 0.0 {
            return 0.0;
        }
        log_sum += libm::log(precision);
    }
    let c = pred.len() as f64;
    let r = reference.len() as f64;
    let brevity = if c > r { 1.0 } else { libm::exp(1.0 - r / c) };
    100.0 * brevity * libm::exp(log_sum / n as f64)
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = alloc::vec![0usize; b.len() + 1];
    let mut cur = alloc::vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based F-measure with β = 1.
pub fn rouge_l(pred: &str, reference: &str) -> f64 {
    let pred = tokenize(pred);
    let reference = tokenize(reference);
    match (pred.is_empty(), reference.is_empty()) {
        (true, true) => return 100.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let lcs = lcs_len(&pred, &reference) as f64;
    100.0 * f_measure(lcs / pred.len() as f64, lcs / reference.len() as f64)
}

/// Turns sentences into vectors for [`sms`].
pub trait Embedder {
    fn embed(&self, sentences: &[String]) -> Result<Vec<Vec<f64>>>;
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn embed(&self, sentences: &[String]) -> Result<Vec<Vec<f64>>> {
        (**self).embed(sentences)
    }
}

/// Bag-of-words counts hashed into `dim` buckets (FNV-1a).
///
/// Token order does not matter, and texts whose tokens land in disjoint
/// buckets are orthogonal. Scores from this embedder are only comparable with
/// each other.
#[derive(Debug, Clone, Copy)]
pub struct HashedBowEmbedder {
    pub dim: usize,
}

impl Default for HashedBowEmbedder {
    fn default() -> Self {
        Self { dim: 1 << 16 }
    }
}

impl HashedBowEmbedder {
    pub fn bucket(&self, token: &str) -> usize {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for b in token.bytes() {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(0x0100_0000_01b3);
        }
        (hash % self.dim as u64) as usize
    }
}

impl Embedder for HashedBowEmbedder {
    fn embed(&self, sentences: &[String]) -> Result<Vec<Vec<f64>>> {
        if self.dim == 0 {
            return Err(Error::EmbedderUnavailable(
                "zero-dimensional embedder".into(),
            ));
        }
        Ok(sentences
            .iter()
            .map(|s| {
                let mut v = alloc::vec![0.0; self.dim];
                for tok in tokenize(s) {
                    v[self.bucket(&tok)] += 1.0;
                }
                v
            })
            .collect())
    }
}

/// Splits on newlines and sentence punctuation (`.`, `;`, `!`, `?`), keeping
/// only pieces with at least one token.
pub fn split_sentences(text: &str) -> Vec<String> {
    text.split(['\n', '.', ';', '!', '?'])
        .map(str::trim)
        .filter(|s| !tokenize(s).is_empty())
        .map(String::from)
        .collect()
}

fn cosine_cost(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = libm::sqrt(a.iter().map(|x| x * x).sum());
    let nb = libm::sqrt(b.iter().map(|x| x * x).sum());
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    (1.0 - dot / (na * nb)).clamp(0.0, 1.0)
}

/// Sentence mover's similarity.
///
/// Each text is a distribution over its sentences weighted by token count;
/// the transport cost between two sentences is their cosine distance clipped
/// to [0, 1]. The score is `100 * (1 - EMD)`, so identical texts score 100
/// and texts with mutually orthogonal sentences score 0.
pub fn sms<E: Embedder + ?Sized>(pred: &str, reference: &str, embedder: &E) -> Result<f64> {
    let a = split_sentences(pred);
    let b = split_sentences(reference);
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Ok(100.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let ea = embedder.embed(&a)?;
    let eb = embedder.embed(&b)?;
    if ea.len() != a.len() || eb.len() != b.len() {
        return Err(Error::EmbedderUnavailable(
            "embedder returned the wrong number of vectors".into(),
        ));
    }
    let wa: Vec<u64> = a.iter().map(|s| tokenize(s).len() as u64).collect();
    let wb: Vec<u64> = b.iter().map(|s| tokenize(s).len() as u64).collect();
    let cost: Vec<Vec<f64>> = ea
        .iter()
        .map(|u| eb.iter().map(|v| cosine_cost(u, v)).collect())
        .collect();
    let emd = earth_movers_distance(&wa, &wb, &cost);
    Ok((100.0 * (1.0 - emd)).clamp(0.0, 100.0))
}

/// Minimum transport cost between two histograms, each normalized to unit
/// mass. `cost[i][j]` is the cost of moving mass from `a[i]` to `b[j]`.
pub fn earth_movers_distance(a: &[u64], b: &[u64], cost: &[Vec<f64>]) -> f64 {
    let ta: u64 = a.iter().sum();
    let tb: u64 = b.iter().sum();
    if ta == 0 || tb == 0 {
        return if ta == tb { 0.0 } else { 1.0 };
    }
    // Scale both sides to total ta * tb so the flow stays integral.
    let supply: Vec<u64> = a.iter().map(|&x| x * tb).collect();
    let demand: Vec<u64> = b.iter().map(|&x| x * ta).collect();
    let total = min_cost_transport(&supply, &demand, cost);
    total / (ta as f64 * tb as f64)
}

struct Edge {
    to: usize,
    cap: u64,
    cost: f64,
}

/// Successive shortest paths on source → supplies → demands → sink.
fn min_cost_transport(supply: &[u64], demand: &[u64], cost: &[Vec<f64>]) -> f64 {
    let n = supply.len();
    let m = demand.len();
    let source = n + m;
    let sink = source + 1;
    let nodes = sink + 1;
    let mut edges: Vec<Edge> = Vec::new();
    let mut adj: Vec<Vec<usize>> = (0..nodes).map(|_| Vec::new()).collect();
    let mut add = |edges: &mut Vec<Edge>, from: usize, to: usize, cap: u64, c: f64| {
        adj[from].push(edges.len());
        edges.push(Edge { to, cap, cost: c });
        adj[to].push(edges.len());
        edges.push(Edge {
            to: from,
            cap: 0,
            cost: -c,
        });
    };
    let total: u64 = supply.iter().sum();
    for (i, &s) in supply.iter().enumerate() {
        add(&mut edges, source, i, s, 0.0);
    }
    for (j, &d) in demand.iter().enumerate() {
        add(&mut edges, n + j, sink, d, 0.0);
    }
    for (i, row) in cost.iter().enumerate().take(n) {
        for (j, &c) in row.iter().enumerate().take(m) {
            add(&mut edges, i, n + j, total, c);
        }
    }

    let mut flow = 0u64;
    let mut result = 0.0;
    while flow < total {
        // Bellman-Ford: residual costs may be negative.
        let mut dist = alloc::vec![f64::INFINITY; nodes];
        let mut via: Vec<Option<usize>> = alloc::vec![None; nodes];
        dist[source] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u] == f64::INFINITY {
                    continue;
                }
                for &e in &adj[u] {
                    let edge = &edges[e];
                    if edge.cap > 0 && dist[u] + edge.cost < dist[edge.to] - 1e-12 {
                        dist[edge.to] = dist[u] + edge.cost;
                        via[edge.to] = Some(e);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink] == f64::INFINITY {
            break;
        }
        let mut push = total - flow;
        let mut v = sink;
        while let Some(e) = via[v] {
            push = push.min(edges[e].cap);
            v = edges[e ^ 1].to;
        }
        let mut v = sink;
        while let Some(e) = via[v] {
            edges[e].cap -= push;
            edges[e ^ 1].cap += push;
            v = edges[e ^ 1].to;
        }
        flow += push;
        result += push as f64 * dist[sink];
    }
    result
}
