//! Synthetic long-tail interaction logs.
//!
//! Items get Zipf popularity (item `i` has weight `1 / (i + 1)^s`) and a
//! cluster, which doubles as its category. Each user walks a Markov chain:
//! from the current item it follows one of the item's fixed successors,
//! stays in the current cluster, or jumps to a popularity-weighted item
//! anywhere in the catalogue.

use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Interaction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub zipf_s: f64,
    pub cluster_count: usize,
    pub seed: u64,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability of moving to one of the current item's successors.
    pub p_successor: f64,
    /// Probability of a popularity-weighted draw within the current cluster.
    pub p_cluster: f64,
    pub successors_per_item: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_users: 2000,
            num_items: 500,
            zipf_s: 1.2,
            cluster_count: 8,
            seed: 2024,
            min_len: 5,
            max_len: 50,
            p_successor: 0.6,
            p_cluster: 0.25,
            successors_per_item: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticLog {
    pub events: Vec<Interaction>,
    /// Number of events emitted per user, in user order.
    pub user_lengths: Vec<usize>,
    /// Cluster of each item, in item order.
    pub item_clusters: Vec<usize>,
}

impl SyntheticLog {
    /// Share of interactions on the most popular `fraction` of items.
    pub fn head_share(&self, fraction: f64) -> f64 {
        let mut counts = std::collections::HashMap::<&str, usize>::new();
        for e in &self.events {
            *counts.entry(e.item.as_str()).or_default() += 1;
        }
        let mut c: Vec<usize> = counts.into_values().collect();
        c.sort_unstable_by(|a, b| b.cmp(a));
        let head = ((self.item_clusters.len() as f64) * fraction).ceil() as usize;
        let top: usize = c.iter().take(head).sum();
        top as f64 / self.events.len().max(1) as f64
    }
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticLog> {
    if cfg.num_users == 0 || cfg.num_items == 0 || cfg.cluster_count == 0 {
        return Err(Error::InvalidInput("synthetic counts must be positive".into()));
    }
    if !(cfg.zipf_s > 0.0) {
        return Err(Error::InvalidInput("zipf exponent must be positive".into()));
    }
    if cfg.min_len == 0 || cfg.min_len > cfg.max_len {
        return Err(Error::InvalidInput("invalid sequence length range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.num_items;
    let clusters = cfg.cluster_count.min(n);

    let weights: Vec<f64> = (0..n).map(|i| ((i + 1) as f64).powf(-cfg.zipf_s)).collect();
    // The first `clusters` items seed one cluster each so none is empty.
    let item_clusters: Vec<usize> = (0..n)
        .map(|i| if i < clusters { i } else { rng.random_range(0..clusters) })
        .collect();
    let members: Vec<Vec<usize>> = (0..clusters)
        .map(|c| (0..n).filter(|&i| item_clusters[i] == c).collect())
        .collect();
    let global = WeightedIndex::new(&weights).expect("zipf weights are positive");
    let per_cluster: Vec<WeightedIndex<f64>> = members
        .iter()
        .map(|m| WeightedIndex::new(m.iter().map(|&i| weights[i])).expect("non-empty cluster"))
        .collect();

    let successors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let m = &members[item_clusters[i]];
            (0..cfg.successors_per_item)
                .map(|_| {
                    if m.len() == 1 {
                        m[0]
                    } else {
                        loop {
                            let j = m[per_cluster[item_clusters[i]].sample(&mut rng)];
                            if j != i {
                                break j;
                            }
                        }
                    }
                })
                .collect()
        })
        .collect();

    let mut events = Vec::new();
    let mut user_lengths = Vec::with_capacity(cfg.num_users);
    for u in 0..cfg.num_users {
        let len = rng.random_range(cfg.min_len..=cfg.max_len);
        let mut t: i64 = rng.random_range(0..1_000_000);
        let mut item = global.sample(&mut rng);
        for step in 0..len {
            if step > 0 {
                let r: f64 = rng.random();
                item = if r < cfg.p_successor {
                    let s = &successors[item];
                    s[rng.random_range(0..s.len())]
                } else if r < cfg.p_successor + cfg.p_cluster {
                    let c = item_clusters[item];
                    members[c][per_cluster[c].sample(&mut rng)]
                } else {
                    global.sample(&mut rng)
                };
                t += rng.random_range(1..86_400);
            }
            events.push(
                Interaction::new(format!("u{u}"), format!("i{item}"), t)
                    .with_category(format!("c{}", item_clusters[item])),
            );
        }
        user_lengths.push(len);
    }
    Ok(SyntheticLog {
        events,
        user_lengths,
        item_clusters,
    })
}

/// Writes `user\titem\ttimestamp\tcategory` rows without a header.
pub fn write_tsv(events: &[Interaction], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for e in events {
        let res = match &e.category {
            Some(c) => writeln!(w, "{}\t{}\t{}\t{}", e.user, e.item, e.timestamp, c),
            None => writeln!(w, "{}\t{}\t{}", e.user, e.item, e.timestamp),
        };
        res.map_err(|err| Error::io(path, err))?;
    }
    w.flush().map_err(|err| Error::io(path, err))
}
