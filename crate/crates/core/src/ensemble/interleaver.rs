//! Seeded, time-invariant interleavers.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A permutation applied as `y[i] = x[perm[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation(Vec<u32>);

impl Permutation {
    pub fn identity(len: usize) -> Self {
        Permutation((0..len as u32).collect())
    }

    pub fn from_vec(perm: Vec<u32>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            let p = p as usize;
            if p >= perm.len() || seen[p] {
                return Err(Error::InvalidConfig("not a permutation".into()));
            }
            seen[p] = true;
        }
        Ok(Permutation(perm))
    }

    pub fn random(len: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut v: Vec<u32> = (0..len as u32).collect();
        v.shuffle(rng);
        Permutation(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Source index feeding output position `i`.
    #[inline]
    pub fn source(&self, i: usize) -> usize {
        self.0[i] as usize
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn apply<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.0.iter().map(|&p| x[p as usize]).collect()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0u32; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p as usize] = i as u32;
        }
        Permutation(inv)
    }
}

/// An interleaver an ensemble needs: a name and the length it acts on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterleaverRequirement {
    pub name: String,
    pub len: usize,
    /// Optional interleavers default to the identity when absent.
    pub optional: bool,
}

/// Named permutations, reused unchanged at every time instant.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InterleaverSet {
    pub seed: u64,
    perms: BTreeMap<String, Permutation>,
}

impl InterleaverSet {
    /// Draws one uniform permutation per required (non-optional) name. Each
    /// name gets its own ChaCha stream derived from `seed` and its position in
    /// `reqs`, so identical seeds give identical sets.
    pub fn generate(seed: u64, reqs: &[InterleaverRequirement]) -> Self {
        let mut perms = BTreeMap::new();
        for (idx, r) in reqs.iter().enumerate() {
            if r.optional {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64 + 1);
            perms.insert(r.name.clone(), Permutation::random(r.len, &mut rng));
        }
        InterleaverSet { seed, perms }
    }

    /// Identity permutations for every required name.
    pub fn identity(reqs: &[InterleaverRequirement]) -> Self {
        let perms = reqs
            .iter()
            .filter(|r| !r.optional)
            .map(|r| (r.name.clone(), Permutation::identity(r.len)))
            .collect();
        InterleaverSet { seed: 0, perms }
    }

    pub fn insert(&mut self, name: impl Into<String>, perm: Permutation) {
        self.perms.insert(name.into(), perm);
    }

    pub fn get(&self, name: &str) -> Option<&Permutation> {
        self.perms.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.perms.keys().map(String::as_str)
    }

    /// Checks that every requirement is met with the right length.
    pub fn check(&self, reqs: &[InterleaverRequirement]) -> Result<()> {
        for r in reqs {
            match self.perms.get(&r.name) {
                Some(p) if p.len() == r.len => {}
                Some(p) => {
                    return Err(Error::InvalidConfig(format!(
                        "interleaver {} has length {}, expected {}",
                        r.name,
                        p.len(),
                        r.len
                    )))
                }
                None if r.optional => {}
                None => return Err(Error::InvalidConfig(format!("missing interleaver {}", r.name))),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reqs() -> Vec<InterleaverRequirement> {
        vec![
            InterleaverRequirement { name: "pi1".into(), len: 100, optional: false },
            InterleaverRequirement { name: "pi2".into(), len: 64, optional: false },
            InterleaverRequirement { name: "pi_opt".into(), len: 64, optional: true },
        ]
    }

    #[test]
    fn generated_permutations_are_bijections() {
        let set = InterleaverSet::generate(7, &reqs());
        for name in ["pi1", "pi2"] {
            let p = set.get(name).unwrap();
            Permutation::from_vec(p.as_slice().to_vec()).unwrap();
        }
        assert!(set.get("pi_opt").is_none());
        set.check(&reqs()).unwrap();
    }

    #[test]
    fn seed_determines_set() {
        assert_eq!(InterleaverSet::generate(3, &reqs()), InterleaverSet::generate(3, &reqs()));
        assert_ne!(InterleaverSet::generate(3, &reqs()), InterleaverSet::generate(4, &reqs()));
        let set = InterleaverSet::generate(3, &reqs());
        assert_ne!(set.get("pi1").unwrap().as_slice()[..64], set.get("pi2").unwrap().as_slice()[..]);
    }

    #[test]
    fn inverse_undoes_apply() {
        let set = InterleaverSet::generate(11, &reqs());
        let p = set.get("pi1").unwrap();
        let x: Vec<u32> = (0..100).map(|i| i * 3 + 1).collect();
        assert_eq!(p.inverse().apply(&p.apply(&x)), x);
    }

    #[test]
    fn rejects_non_permutation() {
        assert!(Permutation::from_vec(vec![0, 0, 1]).is_err());
        assert!(Permutation::from_vec(vec![0, 3, 1]).is_err());
    }
}
