//! Content hashing used for versions, cache keys and manifests.

use sha2::{Digest, Sha256};

/// Incremental hasher that length-prefixes every field so that
/// `("ab", "c")` and `("a", "bc")` never collide.
#[derive(Default, Clone)]
pub struct FieldHasher {
    inner: Sha256,
}

impl FieldHasher {
    pub fn new(domain: &str) -> Self {
        let mut h = Self::default();
        h.field(domain);
        h
    }

    pub fn field(&mut self, value: impl AsRef<[u8]>) -> &mut Self {
        let bytes = value.as_ref();
        self.inner.update((bytes.len() as u64).to_le_bytes());
        self.inner.update(bytes);
        self
    }

    pub fn num(&mut self, value: u64) -> &mut Self {
        self.field(value.to_le_bytes())
    }

    pub fn hex(self) -> String {
        hex::encode(self.inner.finalize())
    }

    pub fn short(self) -> String {
        self.hex()[..16].to_string()
    }

    pub fn u64(self) -> u64 {
        let digest = self.inner.finalize();
        let mut buf = [0u8; 8];
        buf.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(buf)
    }
}

pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

/// Uniform draw in `[0, 1)` derived from the hashed fields.
pub fn unit_draw(hasher: FieldHasher) -> f64 {
    (hasher.u64() >> 11) as f64 / (1u64 << 53) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fields_are_length_prefixed() {
        let mut a = FieldHasher::new("t");
        a.field("ab").field("c");
        let mut b = FieldHasher::new("t");
        b.field("a").field("bc");
        assert_ne!(a.hex(), b.hex());
    }

    #[test]
    fn unit_draw_in_range() {
        for i in 0..1000 {
            let mut h = FieldHasher::new("draw");
            h.num(i);
            let u = unit_draw(h);
            assert!((0.0..1.0).contains(&u));
        }
    }
}
