use alloc::format;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::series::{CommunityProfile, LoadSeries};
use crate::error::{Error, Result};

/// Element-wise sum of member series over their common hours, in member order.
pub fn aggregate(members: &[&LoadSeries], id: &str) -> Result<LoadSeries> {
    let Some(first) = members.first() else {
        return Err(Error::InvalidArgument("community needs at least one member".into()));
    };
    let mut start = first.start();
    let mut end = first.range().end;
    for m in members {
        start = start.max(m.start());
        end = end.min(m.range().end);
    }
    if end <= start {
        return Err(Error::Contract(format!("members of community {id} share no common hours")));
    }
    let len = (end - start) as usize;
    let mut values = alloc::vec![0.0; len];
    for m in members {
        let w = m.window(start, len).expect("range checked above");
        for (acc, v) in values.iter_mut().zip(w) {
            *acc += v;
        }
    }
    LoadSeries::new(id, start, values)
}

/// Draws `repetitions` disjoint communities of `size` households each,
/// sampling without replacement across all repetitions.
pub fn sample_communities(
    pool: &[LoadSeries],
    size: usize,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<CommunityProfile>> {
    if size == 0 {
        return Err(Error::InvalidArgument("community size must be at least 1".into()));
    }
    let required = size * repetitions;
    if pool.len() < required {
        return Err(Error::PoolTooSmall {
            required,
            available: pool.len(),
        });
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    order
        .chunks(size)
        .take(repetitions)
        .enumerate()
        .map(|(rep, idx)| {
            let members: Vec<&LoadSeries> = idx.iter().map(|&i| &pool[i]).collect();
            let aggregate = aggregate(&members, &format!("ec{size}-r{rep}"))?;
            Ok(CommunityProfile {
                household_ids: members.iter().map(|m| m.id.clone()).collect(),
                aggregate,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    fn pool(n: usize) -> Vec<LoadSeries> {
        (0..n)
            .map(|i| LoadSeries::new(format!("h{i}"), 0, alloc::vec![i as f64; 10]).unwrap())
            .collect()
    }

    #[test]
    fn singles_are_distinct() {
        let c = sample_communities(&pool(25), 1, 20, 7).unwrap();
        assert_eq!(c.len(), 20);
        let ids: BTreeSet<_> = c.iter().map(|c| c.household_ids[0].clone()).collect();
        assert_eq!(ids.len(), 20);
    }

    #[test]
    fn pair_aggregate_is_sum() {
        let p = alloc::vec![
            LoadSeries::new("a", 0, alloc::vec![1.0; 5]).unwrap(),
            LoadSeries::new("b", 0, alloc::vec![2.0; 5]).unwrap(),
        ];
        let c = sample_communities(&p, 2, 1, 1).unwrap();
        assert_eq!(c[0].aggregate.values(), &[3.0; 5]);
    }

    #[test]
    fn seeded_sampling_is_deterministic() {
        let a = sample_communities(&pool(40), 3, 10, 42).unwrap();
        let b = sample_communities(&pool(40), 3, 10, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_pool_reports_required_size() {
        let err = sample_communities(&pool(5), 2, 3, 0).unwrap_err();
        assert_eq!(err, Error::PoolTooSmall { required: 6, available: 5 });
    }

    #[test]
    fn aggregate_uses_common_hours() {
        let a = LoadSeries::new("a", 0, alloc::vec![1.0; 6]).unwrap();
        let b = LoadSeries::new("b", 2, alloc::vec![2.0; 6]).unwrap();
        let s = aggregate(&[&a, &b], "ab").unwrap();
        assert_eq!(s.start(), 2);
        assert_eq!(s.values(), &[3.0; 4]);
    }
}
