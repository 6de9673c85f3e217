//! Seeded train/dev/test partitioning.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TripleStore;

/// Relative sizes of the three partitions, e.g. `8:1:1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios(pub [f64; 3]);

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios([8.0, 1.0, 1.0])
    }
}

impl FromStr for SplitRatios {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("ratios `{s}` must look like train:dev:test"));
        }
        let mut out = [0.0; 3];
        for (slot, part) in out.iter_mut().zip(&parts) {
            let v: f64 = part
                .trim()
                .parse()
                .map_err(|_| format!("ratio `{part}` is not a number"))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("ratio `{part}` must be positive"));
            }
            *slot = v;
        }
        Ok(SplitRatios(out))
    }
}

impl fmt::Display for SplitRatios {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.0;
        write!(f, "{a}:{b}:{c}")
    }
}

/// Partition sizes for `n` items by largest-remainder apportionment; each
/// size is within one of its exact proportion and the sizes sum to `n`.
pub fn split_sizes(n: usize, ratios: SplitRatios) -> [usize; 3] {
    let total: f64 = ratios.0.iter().sum();
    let exact = ratios.0.map(|r| n as f64 * r / total);
    let mut sizes = exact.map(|e| e.floor() as usize);
    let mut remaining = n - sizes.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        sizes[i] += 1;
        remaining -= 1;
    }
    sizes
}

/// Shuffles the store with a seeded ChaCha stream and cuts it into
/// train/dev/test. Each part keeps the original store order.
pub fn split_triples(store: &TripleStore, ratios: SplitRatios, seed: u64) -> [TripleStore; 3] {
    let sizes = split_sizes(store.len(), ratios);
    let mut order: Vec<usize> = (0..store.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, rest) = order.split_at_mut(sizes[0]);
    let (dev, test) = rest.split_at_mut(sizes[1]);
    [train, dev, test].map(|part| {
        part.sort_unstable();
        store.subset(part)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::CkgFormat;
    use std::collections::HashSet;

    fn store(n: usize) -> TripleStore {
        let rows: Vec<(String, String)> = (0..n).map(|i| (format!("h{i}"), format!("t{i}"))).collect();
        TripleStore::from_triples(
            CkgFormat::AserTsv,
            rows.iter().map(|(h, t)| (h.as_str(), "Result", t.as_str())),
        )
        .unwrap()
    }

    #[test]
    fn exact_proportions() {
        let s = store(1000);
        let parts = split_triples(&s, SplitRatios::default(), 42);
        assert_eq!(parts.each_ref().map(|p| p.len()), [800, 100, 100]);
    }

    #[test]
    fn small_store_is_an_exhaustive_partition() {
        let s = store(10);
        let parts = split_triples(&s, SplitRatios::default(), 3);
        let sizes = parts.each_ref().map(|p| p.len());
        for (size, exact) in sizes.iter().zip([8.0, 1.0, 1.0]) {
            assert!((*size as f64 - exact).abs() <= 1.0);
        }
        let mut seen = HashSet::new();
        for p in &parts {
            for t in p.iter() {
                assert!(seen.insert(t.to_owned()), "overlap");
            }
        }
        assert_eq!(seen.len(), 10);
    }

    #[test]
    fn deterministic_per_seed() {
        let s = store(200);
        let a = split_triples(&s, SplitRatios::default(), 42);
        let b = split_triples(&s, SplitRatios::default(), 42);
        let c = split_triples(&s, SplitRatios::default(), 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn empty_store() {
        let s = store(0);
        assert!(split_triples(&s, SplitRatios::default(), 1).iter().all(|p| p.is_empty()));
    }

    #[test]
    fn ratio_parsing() {
        assert_eq!("8:1:1".parse::<SplitRatios>().unwrap(), SplitRatios([8.0, 1.0, 1.0]));
        assert!("8:1".parse::<SplitRatios>().is_err());
        assert!("8:0:1".parse::<SplitRatios>().is_err());
        assert_eq!(split_sizes(7, "1:1:1".parse().unwrap()).iter().sum::<usize>(), 7);
    }
}
