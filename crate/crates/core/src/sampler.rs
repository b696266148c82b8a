//! Seeded sampling of source/target evaluation pairs.
//!
//! The generator is SplitMix64: the state advances by `0x9E3779B97F4A7C15`
//! and each output is the state passed through
//! `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`,
//! `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`, `z ^ (z >> 31)`
//! (wrapping arithmetic). An index below `n` is the high 64 bits of the
//! 128-bit product `next_u64() * n`.
//!
//! A pair is drawn by choosing a clothing layout (a `(subject, clothing)`
//! group, indexed in order of first appearance in the manifest) uniformly;
//! layouts with fewer than two frames are redrawn. Two distinct frames are
//! then taken from the layout: `a = index(m)`, `b = index(m - 1)`, and `b` is
//! bumped by one when `b >= a`. Frames are indexed in manifest order.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Repetition count of the evaluation protocol.
pub const DEFAULT_PAIR_COUNT: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform index in `0..n` (`n > 0`).
    pub fn index(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalEntry {
    pub subject: String,
    pub clothing: String,
    pub frame: String,
    pub pose: String,
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalManifest {
    pub entries: Vec<EvalEntry>,
    pub seed: u64,
}

impl EvalManifest {
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Empty("manifest has no entries"));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if [&e.subject, &e.clothing, &e.frame].iter().any(|s| s.trim().is_empty()) {
                return Err(Error::Parameter(format!("entry {i} has an empty id")));
            }
            let dup = self.entries[..i]
                .iter()
                .any(|o| o.subject == e.subject && o.clothing == e.clothing && o.frame == e.frame);
            if dup {
                return Err(Error::Parameter(format!(
                    "duplicate frame {}/{}/{}",
                    e.subject, e.clothing, e.frame
                )));
            }
        }
        Ok(())
    }

    /// Entry indices grouped by `(subject, clothing)`, groups in first-seen order.
    pub fn layouts(&self) -> Vec<Vec<usize>> {
        let mut keys: Vec<(&str, &str)> = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            let key = (e.subject.as_str(), e.clothing.as_str());
            match keys.iter().position(|k| *k == key) {
                Some(g) => groups[g].push(i),
                None => {
                    keys.push(key);
                    groups.push(alloc::vec![i]);
                }
            }
        }
        groups
    }
}

/// `n` `(source, target)` pairs of distinct frames sharing a clothing layout.
pub fn sample_eval_pairs(manifest: &EvalManifest, n: usize) -> Result<Vec<(&EvalEntry, &EvalEntry)>> {
    manifest.validate()?;
    if n == 0 {
        return Err(Error::Parameter("pair count must be at least 1".into()));
    }
    let layouts = manifest.layouts();
    if layouts.iter().all(|g| g.len() < 2) {
        return Err(Error::Degenerate("no clothing layout has two frames"));
    }
    let mut rng = SplitMix64::new(manifest.seed);
    let mut pairs = Vec::with_capacity(n);
    while pairs.len() < n {
        let group = &layouts[rng.index(layouts.len())];
        if group.len() < 2 {
            continue;
        }
        let a = rng.index(group.len());
        let mut b = rng.index(group.len() - 1);
        if b >= a {
            b += 1;
        }
        pairs.push((&manifest.entries[group[a]], &manifest.entries[group[b]]));
    }
    Ok(pairs)
}
