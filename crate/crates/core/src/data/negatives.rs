use rand::seq::index;
use rand::Rng;

use crate::data::SequenceDataset;
use crate::error::{Error, Result};

/// Draws `count` distinct items uniformly from those the user never
/// interacted with.
pub fn sample_negatives<R: Rng + ?Sized>(
    ds: &SequenceDataset,
    user: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<u32>> {
    if user >= ds.num_users() {
        return Err(Error::InvalidInput(format!("unknown user {user}")));
    }
    let seen = ds.interacted(user);
    let num_items = ds.num_items();
    let available = num_items - seen.len();
    if available == 0 {
        return Err(Error::NoNegativesAvailable(user));
    }
    if count > available {
        return Err(Error::InvalidInput(format!(
            "user {user} has only {available} negatives, {count} requested"
        )));
    }

    // Plenty of candidates: rejection sampling is cheap and never enumerates
    // the catalogue.
    if count * 4 <= available && seen.len() * 2 <= num_items {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let v = rng.random_range(1..=num_items as u32);
            if seen.binary_search(&v).is_err() && !out.contains(&v) {
                out.push(v);
            }
        }
        return Ok(out);
    }

    let pool: Vec<u32> = (1..=num_items as u32)
        .filter(|v| seen.binary_search(v).is_err())
        .collect();
    Ok(index::sample(rng, pool.len(), count)
        .into_iter()
        .map(|i| pool[i])
        .collect())
}
