//! ETSI GS QKD 014-style JSON bodies.
//!
//! Key material travels base64-encoded (standard alphabet, with padding);
//! field names follow the ETSI convention (`key_ID`, `key_IDs`).

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{KmsError, QkdKey, QKD_KEY_SIZE_BYTES};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct KeyEntry {
    #[serde(rename = "key_ID")]
    pub key_id: String,
    pub key: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct KeyContainer {
    pub keys: Vec<KeyEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct KeyIdEntry {
    #[serde(rename = "key_ID")]
    pub key_id: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct DecRequest {
    #[serde(rename = "key_IDs")]
    pub key_ids: Vec<KeyIdEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ErrorBody {
    pub message: String,
}

/// Admin extension: the mock has no quantum layer growing keys, so link
/// pools are filled through this request instead.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ProvisionRequest {
    #[serde(rename = "master_SAE_ID")]
    pub master_sae_id: String,
    #[serde(rename = "slave_SAE_ID")]
    pub slave_sae_id: String,
    pub count: usize,
}

impl From<&QkdKey> for KeyEntry {
    fn from(k: &QkdKey) -> Self {
        KeyEntry {
            key_id: k.key_id.clone(),
            key: BASE64.encode(k.key),
        }
    }
}

impl KeyEntry {
    pub fn decode(&self) -> Result<QkdKey, KmsError> {
        let bytes = BASE64
            .decode(&self.key)
            .map_err(|e| KmsError::Malformed(format!("bad base64 key: {e}")))?;
        let key: [u8; QKD_KEY_SIZE_BYTES] = bytes
            .as_slice()
            .try_into()
            .map_err(|_| KmsError::Malformed(format!("key is {} bytes, want 32", bytes.len())))?;
        Ok(QkdKey {
            key_id: self.key_id.clone(),
            key,
        })
    }
}

pub fn container_for(keys: &[QkdKey]) -> KeyContainer {
    KeyContainer {
        keys: keys.iter().map(KeyEntry::from).collect(),
    }
}
