//! Stable 64-bit fingerprints used to tie feature vectors, dictionaries and
//! models together.

use core::fmt;
use core::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Fingerprint(pub u64);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl Fingerprint {
    pub fn parse_hex(s: &str) -> Option<Fingerprint> {
        u64::from_str_radix(s, 16).ok().map(Fingerprint)
    }
}

/// FNV-1a accumulator. Output is stable across platforms and releases, unlike
/// the std `DefaultHasher`.
#[derive(Default)]
pub struct FingerprintBuilder(FnvHasher);

impl FingerprintBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, bytes: &[u8]) -> &mut Self {
        // length prefix keeps ("ab","c") and ("a","bc") apart
        self.0.write_u64(bytes.len() as u64);
        self.0.write(bytes);
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.bytes(s.as_bytes())
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.0.write_u64(v);
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.u64(v.to_bits())
    }

    pub fn finish(&self) -> Fingerprint {
        Fingerprint(self.0.finish())
    }
}

/// Fingerprint of an arbitrary byte string.
pub fn of_bytes(bytes: &[u8]) -> Fingerprint {
    FingerprintBuilder::new().bytes(bytes).finish()
}
