use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::fsutil::write_atomic;
use crate::Result;

/// SHA-256 of an endpoint name and its canonical request body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CacheKey([u8; 32]);

impl CacheKey {
    /// `canonical_body` must already be in canonical form (see
    /// [`super::wire::canonical`]); equal logical requests then hash equal.
    pub fn new(endpoint: &str, canonical_body: &str) -> Self {
        let mut h = Sha256::new();
        h.update(endpoint.as_bytes());
        h.update(b"\n");
        h.update(canonical_body.as_bytes());
        CacheKey(h.finalize().into())
    }

    pub fn digest(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn hex(&self) -> String {
        hex::encode(self.0)
    }
}

/// Content-addressed store of validated response bodies.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(cache_dir: &Path) -> Self {
        ResponseCache {
            dir: cache_dir.join("responses"),
        }
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}.json", key.hex()))
    }

    pub fn get(&self, key: &CacheKey) -> Option<String> {
        std::fs::read_to_string(self.path_for(key)).ok()
    }

    /// Only call with bodies that already passed validation.
    pub fn put(&self, key: &CacheKey, body: &str) -> Result<()> {
        write_atomic(&self.path_for(key), body.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_depends_on_endpoint_and_body() {
        let a = CacheKey::new("/v1/t2t", r#"{"n":1,"query":"q"}"#);
        assert_eq!(a, CacheKey::new("/v1/t2t", r#"{"n":1,"query":"q"}"#));
        assert_ne!(a, CacheKey::new("/v1/i2t", r#"{"n":1,"query":"q"}"#));
        assert_ne!(a, CacheKey::new("/v1/t2t", r#"{"n":2,"query":"q"}"#));
        assert_eq!(a.hex().len(), 64);
    }

    #[test]
    fn put_then_get() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let key = CacheKey::new("/v1/t2t", "{}");
        assert!(cache.get(&key).is_none());
        cache.put(&key, "{\"paraphrases\":[]}").unwrap();
        assert_eq!(cache.get(&key).unwrap(), "{\"paraphrases\":[]}");
    }
}
