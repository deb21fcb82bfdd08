//! Content digests for configs and input files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of the canonical JSON form of `value` (object keys sorted,
/// compact), truncated to 16 hex characters.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    // serde_json::Value maps are BTreeMap-backed, so keys serialize sorted
    let canonical = serde_json::to_value(value)
        .and_then(|v| serde_json::to_vec(&v))
        .expect("serializable value");
    sha256_hex(&canonical)[..16].to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

pub fn file_digest(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

/// Recomputes a recorded digest and fails on mismatch.
pub fn verify_digest(recorded: &FileDigest) -> Result<()> {
    let now = file_digest(Path::new(&recorded.path))?;
    if now.sha256 != recorded.sha256 {
        return Err(Error::Fingerprint {
            what: recorded.path.clone(),
            expected: recorded.sha256.clone(),
            found: now.sha256,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_ignores_key_order() {
        let a = serde_json::json!({"b": 1, "a": [1, 2]});
        let b: serde_json::Value = serde_json::from_str(r#"{"a":[1,2],"b":1}"#).unwrap();
        assert_eq!(fingerprint(&a), fingerprint(&b));
        assert_ne!(fingerprint(&a), fingerprint(&serde_json::json!({"b": 2, "a": [1, 2]})));
    }

    #[test]
    fn tampering_is_detected() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("f.txt");
        std::fs::write(&p, "hello").unwrap();
        let d = file_digest(&p).unwrap();
        verify_digest(&d).unwrap();
        std::fs::write(&p, "hellp").unwrap();
        assert!(matches!(verify_digest(&d), Err(Error::Fingerprint { .. })));
    }
}
