//! The full physical and standing-control parameter set, and its digest.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::StandingControlParams;
use crate::dynamics::{CipModel, DynamicsError};

/// Everything that shapes a trajectory apart from the impulsive controllers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CipParams {
    pub model: CipModel,
    pub standing: StandingControlParams,
}

impl CipParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        self.model.validate()?;
        self.standing.validate()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(canonical_json(self).as_bytes()))
    }
}

/// Compact JSON with object keys sorted, so equal values give equal bytes.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    // `Value`'s map is ordered by key, and `to_string` emits no whitespace.
    let v = serde_json::to_value(value).expect("parameter types always serialize");
    serde_json::to_string(&v).expect("a JSON value always serializes")
}
