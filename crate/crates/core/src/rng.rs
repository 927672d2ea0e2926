//! Seeded counter-based random streams.
//!
//! Every consumer of randomness asks for a substream keyed by
//! `(seed, purpose, index)`. Substreams never share state, so the order in
//! which workers draw from them cannot change results.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The fixed set of substream labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Purpose {
    Bootstrap,
    Selection,
    Variation,
    Evaluation,
    Encoder,
}

impl Purpose {
    pub const ALL: [Purpose; 5] = [
        Purpose::Bootstrap,
        Purpose::Selection,
        Purpose::Variation,
        Purpose::Evaluation,
        Purpose::Encoder,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Purpose::Bootstrap => "bootstrap",
            Purpose::Selection => "selection",
            Purpose::Variation => "variation",
            Purpose::Evaluation => "evaluation",
            Purpose::Encoder => "encoder",
        }
    }

    fn tag(self) -> u64 {
        // ASCII-derived constants; any distinct values work.
        match self {
            Purpose::Bootstrap => 0x626f_6f74_7374_7270,
            Purpose::Selection => 0x7365_6c65_6374_696f,
            Purpose::Variation => 0x7661_7269_6174_696f,
            Purpose::Evaluation => 0x6576_616c_7561_7465,
            Purpose::Encoder => 0x656e_636f_6465_7272,
        }
    }
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Purpose {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Purpose::ALL
            .into_iter()
            .find(|p| p.label() == s)
            .ok_or_else(|| Error::UnknownPurpose(s.to_string()))
    }
}

/// Root of all randomness for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    seed: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent substream for `(purpose, index)`.
    pub fn split(&self, purpose: Purpose, index: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&purpose.tag().to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        rng
    }

    /// Same as [`RngState::split`] with a textual purpose label.
    pub fn split_label(&self, purpose: &str, index: u64) -> Result<ChaCha8Rng, Error> {
        Ok(self.split(purpose.parse()?, index))
    }
}
