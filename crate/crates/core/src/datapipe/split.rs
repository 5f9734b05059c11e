use sha2::{Digest, Sha256};

use crate::numcore::derive_seed;
use crate::{Error, Result, SeededRng};

/// Disjoint train/validation/test index sets over windowed samples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SplitMode {
    /// Seeded random permutation.
    #[default]
    Shuffled,
    /// Earliest 70% train, next 10% validation, latest 20% test.
    Chronological,
}

impl SplitMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitMode::Shuffled => "shuffled",
            SplitMode::Chronological => "chronological",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "shuffled" => Ok(SplitMode::Shuffled),
            "chronological" => Ok(SplitMode::Chronological),
            other => Err(Error::argument(format!("unknown split mode `{other}`"))),
        }
    }
}

impl Split {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Short content hash; equal hashes mean equal index sets in equal order.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (tag, set) in [(b't', &self.train), (b'v', &self.val), (b's', &self.test)] {
            h.update([tag]);
            for &i in set {
                h.update((i as u64).to_le_bytes());
            }
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn sizes(n: usize) -> Result<(usize, usize)> {
    if n < 10 {
        return Err(Error::argument(format!("a 7:1:2 split needs at least 10 samples, got {n}")));
    }
    Ok((n * 7 / 10, n / 10))
}

/// Seeded 7:1:2 split: sizes `floor(0.7n)`, `floor(0.1n)` and the remainder.
pub fn split_712(n: usize, rng: &mut SeededRng) -> Result<Split> {
    let (n_train, n_val) = sizes(n)?;
    let perm = rng.permutation(n);
    Ok(Split {
        train: perm[..n_train].to_vec(),
        val: perm[n_train..n_train + n_val].to_vec(),
        test: perm[n_train + n_val..].to_vec(),
    })
}

pub fn split_chronological(n: usize) -> Result<Split> {
    let (n_train, n_val) = sizes(n)?;
    Ok(Split {
        train: (0..n_train).collect(),
        val: (n_train..n_train + n_val).collect(),
        test: (n_train + n_val..n).collect(),
    })
}

/// `k` independent splits, repeat `r` seeded by `(master_seed, r)`.
pub fn repeated_splits(n: usize, k: usize, master_seed: u64, mode: SplitMode) -> Result<Vec<Split>> {
    if k == 0 {
        return Err(Error::argument("at least one repeat is required"));
    }
    (0..k)
        .map(|r| match mode {
            SplitMode::Shuffled => split_712(n, &mut SeededRng::new(derive_seed(master_seed, r as u64))),
            SplitMode::Chronological => split_chronological(n),
        })
        .collect()
}
