use std::collections::HashMap;

use serde::Serialize;

use crate::data::Interaction;

/// Item id reserved for padding.
pub const PAD: u32 = 0;

/// Per-user chronological item sequences over a dense item index.
///
/// Items are numbered `1..=num_items` in order of first appearance in the
/// input; `0` is padding. Users are numbered `0..num_users` the same way.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    pub user_ids: Vec<String>,
    /// Raw item ids; index 0 is the padding slot and holds an empty string.
    pub item_ids: Vec<String>,
    pub sequences: Vec<Vec<u32>>,
    pub max_len: usize,
    /// Category index per item (`0` when unknown), indexed like `item_ids`.
    pub item_categories: Vec<u32>,
    /// Category names; index 0 is the unknown category.
    pub category_names: Vec<String>,
    /// Train-portion interaction count per item, indexed like `item_ids`.
    pub item_popularity: Vec<u32>,
    seen: Vec<Vec<u32>>,
}

impl SequenceDataset {
    /// Assembles a dataset from already indexed parts and derives the
    /// popularity table and per-user item sets.
    pub fn from_parts(
        user_ids: Vec<String>,
        item_ids: Vec<String>,
        sequences: Vec<Vec<u32>>,
        max_len: usize,
        item_categories: Vec<u32>,
        category_names: Vec<String>,
    ) -> Self {
        let num_items = item_ids.len().saturating_sub(1);
        let mut item_popularity = vec![0u32; num_items + 1];
        for seq in &sequences {
            // Train portion: everything before the validation and test items.
            if seq.len() >= 3 {
                for &v in &seq[..seq.len() - 2] {
                    item_popularity[v as usize] += 1;
                }
            }
        }
        let seen = sequences
            .iter()
            .map(|s| {
                let mut v = s.clone();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        SequenceDataset {
            user_ids,
            item_ids,
            sequences,
            max_len,
            item_categories,
            category_names,
            item_popularity,
            seen,
        }
    }

    pub fn num_users(&self) -> usize {
        self.sequences.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_ids.len() - 1
    }

    pub fn num_interactions(&self) -> usize {
        self.sequences.iter().map(Vec::len).sum()
    }

    pub fn has_categories(&self) -> bool {
        self.category_names.len() > 1
    }

    /// Sorted distinct items the user interacted with.
    pub fn interacted(&self, user: usize) -> &[u32] {
        &self.seen[user]
    }

    /// Number of training interactions (sequence minus the two holdouts).
    pub fn train_len(&self, user: usize) -> usize {
        self.sequences[user].len().saturating_sub(2)
    }
}

/// Groups events per user, orders each user's events by timestamp (stable,
/// so equal timestamps keep input order) and re-indexes items densely.
pub fn build_sequences(events: &[Interaction], max_len: usize) -> SequenceDataset {
    let mut user_index: HashMap<&str, usize> = HashMap::new();
    let mut user_ids: Vec<String> = Vec::new();
    let mut per_user: Vec<Vec<&Interaction>> = Vec::new();
    for ev in events {
        let u = *user_index.entry(&ev.user).or_insert_with(|| {
            user_ids.push(ev.user.clone());
            per_user.push(Vec::new());
            user_ids.len() - 1
        });
        per_user[u].push(ev);
    }

    let mut item_index: HashMap<&str, u32> = HashMap::new();
    let mut item_ids = vec![String::new()];
    let mut category_index: HashMap<&str, u32> = HashMap::new();
    let mut category_names = vec![String::new()];
    let mut item_categories = vec![0u32];
    for ev in events {
        let next = item_ids.len() as u32;
        let id = *item_index.entry(&ev.item).or_insert(next);
        if id == next {
            item_ids.push(ev.item.clone());
            item_categories.push(0);
        }
        if let Some(cat) = ev.category.as_deref() {
            if item_categories[id as usize] == 0 {
                let next_cat = category_names.len() as u32;
                let c = *category_index.entry(cat).or_insert(next_cat);
                if c == next_cat {
                    category_names.push(cat.to_owned());
                }
                item_categories[id as usize] = c;
            }
        }
    }

    let sequences = per_user
        .into_iter()
        .map(|mut evs| {
            evs.sort_by_key(|e| e.timestamp);
            evs.iter().map(|e| item_index[e.item.as_str()]).collect()
        })
        .collect();

    SequenceDataset::from_parts(
        user_ids,
        item_ids,
        sequences,
        max_len,
        item_categories,
        category_names,
    )
}

/// Keeps the last `n` items, left-padding with [`PAD`] when shorter.
pub fn pad_truncate(seq: &[u32], n: usize) -> Vec<u32> {
    if seq.len() >= n {
        seq[seq.len() - n..].to_vec()
    } else {
        let mut out = vec![PAD; n - seq.len()];
        out.extend_from_slice(seq);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Valid,
    Test,
}

/// A held-out next-item prediction: padded history and the item that follows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitExample {
    pub user: usize,
    pub input: Vec<u32>,
    pub target: u32,
    pub role: Role,
}

/// Shifted-by-one training sequence: `targets[t]` follows `input[t]`, and
/// `PAD` targets mark positions without a label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainExample {
    pub user: usize,
    pub input: Vec<u32>,
    pub targets: Vec<u32>,
}

#[derive(Debug, Clone, Default)]
pub struct Split {
    pub train: Vec<TrainExample>,
    pub valid: Vec<SplitExample>,
    pub test: Vec<SplitExample>,
    /// Users whose sequence was shorter than three items.
    pub excluded: usize,
}

/// Leave-one-out split: the last item is the test target, the one before it
/// the validation target, and training predicts every next item over
/// `v₁ … v_{L-1}` from `v₁ … v_{L-2}`.
pub fn split_leave_one_out(ds: &SequenceDataset) -> Split {
    let n = ds.max_len;
    let mut split = Split::default();
    for (user, seq) in ds.sequences.iter().enumerate() {
        let len = seq.len();
        if len < 3 {
            split.excluded += 1;
            continue;
        }
        split.test.push(SplitExample {
            user,
            input: pad_truncate(&seq[..len - 1], n),
            target: seq[len - 1],
            role: Role::Test,
        });
        split.valid.push(SplitExample {
            user,
            input: pad_truncate(&seq[..len - 2], n),
            target: seq[len - 2],
            role: Role::Valid,
        });
        split.train.push(TrainExample {
            user,
            input: pad_truncate(&seq[..len - 2], n),
            targets: pad_truncate(&seq[1..len - 1], n),
        });
    }
    split
}
