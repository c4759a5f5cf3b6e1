//! Per-type surface pools and reproducible replacement draws.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ingest::AnnotatedDocument;
use crate::text::fold_key;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("corpus contains no entity mentions")]
    EmptyCorpus,
    #[error("no pool for entity type `{0}`")]
    UnknownType(String),
    #[error("pool `{entity_type}` has no surface other than `{excluded}`")]
    NoCandidate {
        entity_type: String,
        excluded: String,
    },
    #[error("invalid catalog: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Deterministic random stream keyed by a global seed and a string key.
///
/// The ChaCha20 key is `SHA-256("bioqa-rng/v1" || seed_le || len(key)_le || key)`,
/// so streams for different keys are independent and any stream can be
/// rebuilt without replaying others.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_key: String,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_key: impl Into<String>) -> Self {
        let stream_key = stream_key.into();
        let mut h = Sha256::new();
        h.update(b"bioqa-rng/v1");
        h.update(seed.to_le_bytes());
        h.update((stream_key.len() as u64).to_le_bytes());
        h.update(stream_key.as_bytes());
        let key: [u8; 32] = h.finalize().into();
        RngStream {
            seed,
            stream_key,
            rng: ChaCha20Rng::from_seed(key),
        }
    }

    /// Child stream `key/label`, independent of how far this stream has
    /// advanced.
    pub fn substream(&self, label: &str) -> RngStream {
        RngStream::new(self.seed, format!("{}/{}", self.stream_key, label))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_key(&self) -> &str {
        &self.stream_key
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw from `0..n` by rejection sampling. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let zone = (u64::MAX / n) * n;
        loop {
            let r = self.next_u64();
            if r < zone {
                return r % n;
            }
        }
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.below(len as u64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySurface {
    pub surface: String,
    pub norm_id: String,
    pub freq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityCatalog {
    pools: BTreeMap<String, Vec<EntitySurface>>,
    /// type -> folded surface -> position in pool
    index: HashMap<String, HashMap<String, usize>>,
    total_surfaces: usize,
}

#[derive(Default)]
struct Tally {
    freq: u64,
    casings: BTreeMap<String, u64>,
    norms: BTreeMap<String, u64>,
}

/// Most frequent key; ties go to the lexicographically smallest.
fn most_frequent(counts: &BTreeMap<String, u64>) -> String {
    let mut best: Option<(&String, u64)> = None;
    for (k, &n) in counts {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((k, n));
        }
    }
    best.map(|(k, _)| k.clone()).unwrap_or_default()
}

impl EntityCatalog {
    fn from_pools(pools: BTreeMap<String, Vec<EntitySurface>>) -> Self {
        let index = pools
            .iter()
            .map(|(ty, pool)| {
                let m = pool
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (fold_key(&s.surface), i))
                    .collect();
                (ty.clone(), m)
            })
            .collect();
        let total_surfaces = pools.values().map(Vec::len).sum();
        EntityCatalog {
            pools,
            index,
            total_surfaces,
        }
    }

    pub fn pools(&self) -> &BTreeMap<String, Vec<EntitySurface>> {
        &self.pools
    }

    pub fn pool(&self, entity_type: &str) -> Option<&[EntitySurface]> {
        self.pools.get(entity_type).map(Vec::as_slice)
    }

    pub fn total_surfaces(&self) -> usize {
        self.total_surfaces
    }

    /// Uniform draw over the pool's surfaces, excluding any surface equal to
    /// `exclude_surface` under case folding.
    pub fn sample_replacement(
        &self,
        entity_type: &str,
        exclude_surface: &str,
        rng: &mut RngStream,
    ) -> Result<&EntitySurface, CatalogError> {
        let pool = self
            .pools
            .get(entity_type)
            .ok_or_else(|| CatalogError::UnknownType(entity_type.to_string()))?;
        let excluded = self.index[entity_type]
            .get(&fold_key(exclude_surface))
            .copied();
        let eligible = pool.len() - usize::from(excluded.is_some());
        if eligible == 0 {
            return Err(CatalogError::NoCandidate {
                entity_type: entity_type.to_string(),
                excluded: exclude_surface.to_string(),
            });
        }
        let mut k = rng.index(eligible);
        if excluded.is_some_and(|x| k >= x) {
            k += 1;
        }
        Ok(&pool[k])
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<(), CatalogError> {
        serde_json::to_writer_pretty(w, &self.pools)?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.pools).expect("catalog serializes");
        s.push('\n');
        s
    }

    /// Loads a dump and re-checks pool invariants and canonical order.
    pub fn read_json<R: Read>(r: R) -> Result<Self, CatalogError> {
        let pools: BTreeMap<String, Vec<EntitySurface>> = serde_json::from_reader(r)?;
        for (ty, pool) in &pools {
            if pool.is_empty() {
                return Err(CatalogError::Invalid(format!("pool `{ty}` is empty")));
            }
            let mut seen = std::collections::HashSet::new();
            for s in pool {
                if s.freq == 0 || s.surface.is_empty() {
                    return Err(CatalogError::Invalid(format!(
                        "pool `{ty}`: bad entry `{}`",
                        s.surface
                    )));
                }
                if !seen.insert(fold_key(&s.surface)) {
                    return Err(CatalogError::Invalid(format!(
                        "pool `{ty}`: duplicate surface `{}`",
                        s.surface
                    )));
                }
            }
            if pool.windows(2).any(|w| pool_order(&w[0], &w[1]).is_gt()) {
                return Err(CatalogError::Invalid(format!(
                    "pool `{ty}` is not canonically ordered"
                )));
            }
        }
        Ok(Self::from_pools(pools))
    }
}

fn pool_order(a: &EntitySurface, b: &EntitySurface) -> std::cmp::Ordering {
    b.freq.cmp(&a.freq).then_with(|| a.surface.cmp(&b.surface))
}

/// Collects every `(type, surface)` seen in the corpus. Surfaces are merged
/// case-insensitively; the merged entry keeps its most frequent casing and
/// norm id. Pools are ordered by descending frequency, then surface.
pub fn build_catalog(docs: &[AnnotatedDocument]) -> Result<EntityCatalog, CatalogError> {
    let mut tallies: BTreeMap<String, BTreeMap<String, Tally>> = BTreeMap::new();
    for doc in docs {
        for m in &doc.mentions {
            let t = tallies
                .entry(m.entity_type.clone())
                .or_default()
                .entry(fold_key(&m.surface))
                .or_default();
            t.freq += 1;
            *t.casings.entry(m.surface.clone()).or_default() += 1;
            *t.norms.entry(m.norm_id.clone()).or_default() += 1;
        }
    }
    if tallies.is_empty() {
        return Err(CatalogError::EmptyCorpus);
    }
    let pools = tallies
        .into_iter()
        .map(|(ty, by_key)| {
            let mut pool: Vec<EntitySurface> = by_key
                .into_values()
                .map(|t| EntitySurface {
                    surface: most_frequent(&t.casings),
                    norm_id: most_frequent(&t.norms),
                    freq: t.freq,
                })
                .collect();
            pool.sort_by(pool_order);
            (ty, pool)
        })
        .collect();
    Ok(EntityCatalog::from_pools(pools))
}
