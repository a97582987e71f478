//! Identities, reports, random strings and blocks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::oracle;

/// Abstract currency units.
pub type Money = f64;

/// A 256-bit digest or secret.
pub type Digest256 = [u8; 32];

/// Reserved key that stands for the dummy report in canonical vector keys.
pub const DUMMY_KEY: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PublisherId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidatorId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReportId(pub u64);

impl fmt::Display for PublisherId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

impl fmt::Display for ValidatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V{}", self.0)
    }
}

impl fmt::Display for ReportId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A uniquely identified data item competing for inclusion.
///
/// The owner is carried for reward accounting only; the protocol never
/// looks at it when ordering or valuing reports.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Report {
    id: ReportId,
    owner: PublisherId,
    #[serde(with = "hex_digest")]
    payload_digest: Digest256,
}

impl Report {
    /// Builds a report directly. Prefer [`ReportMinter`] so ids stay unique
    /// within an epoch.
    pub fn new(id: ReportId, owner: PublisherId, payload_digest: Digest256) -> Self {
        assert!(id.0 != DUMMY_KEY, "report id {DUMMY_KEY} is reserved for the dummy");
        Self { id, owner, payload_digest }
    }

    pub fn id(&self) -> ReportId {
        self.id
    }

    pub fn owner(&self) -> PublisherId {
        self.owner
    }

    pub fn payload_digest(&self) -> &Digest256 {
        &self.payload_digest
    }

    /// Same report (id and payload) credited to a different owner.
    pub fn with_owner(&self, owner: PublisherId) -> Self {
        Self { owner, ..self.clone() }
    }

    /// Hash used to break value ties: ascending digest of the payload.
    pub fn tiebreak_digest(&self) -> Digest256 {
        oracle::digest(&[&self.payload_digest])
    }
}

/// Assigns report ids from a counter that only moves forward.
#[derive(Debug, Clone, Default)]
pub struct ReportMinter {
    next: u64,
}

impl ReportMinter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mint(&mut self, owner: PublisherId, payload_digest: Digest256) -> Report {
        let id = ReportId(self.next);
        self.next += 1;
        Report::new(id, owner, payload_digest)
    }

    /// Mints a report whose payload digest is derived from `seed` and the id.
    pub fn mint_seeded(&mut self, owner: PublisherId, seed: u64) -> Report {
        let payload = oracle::digest(&[b"report", &seed.to_be_bytes(), &self.next.to_be_bytes()]);
        self.mint(owner, payload)
    }
}

/// An entry of an inclusion vector: a real report or the dummy sentinel.
///
/// The dummy's value is exactly `r_min` under every random-value function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Report(Report),
    Dummy,
}

impl Slot {
    pub fn report(&self) -> Option<&Report> {
        match self {
            Slot::Report(r) => Some(r),
            Slot::Dummy => None,
        }
    }

    pub fn is_dummy(&self) -> bool {
        matches!(self, Slot::Dummy)
    }

    pub fn owner(&self) -> Option<PublisherId> {
        self.report().map(Report::owner)
    }

    /// Component of a canonical vector key.
    pub fn key(&self) -> u64 {
        match self {
            Slot::Report(r) => r.id().0,
            Slot::Dummy => DUMMY_KEY,
        }
    }
}

impl From<Report> for Slot {
    fn from(r: Report) -> Self {
        Slot::Report(r)
    }
}

/// Canonical, position-sensitive key of an inclusion vector.
pub fn vector_key(slots: &[Slot]) -> Vec<u64> {
    slots.iter().map(Slot::key).collect()
}

/// Pseudorandom string produced by a validator together with its witness.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomString {
    #[serde(with = "hex_digest")]
    pub value: Digest256,
    #[serde(with = "hex_bytes")]
    pub proof: Vec<u8>,
}

/// Simulated key pair: the public key is the digest of the secret seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatorKeys {
    sk: Digest256,
    pk: Digest256,
}

impl ValidatorKeys {
    pub fn from_secret(sk: Digest256) -> Self {
        let pk = oracle::digest(&[&sk]);
        Self { sk, pk }
    }

    /// Deterministic keys for validator `index` under `seed`.
    pub fn derive(seed: u64, index: u64) -> Self {
        Self::from_secret(oracle::digest(&[b"validator", &seed.to_be_bytes(), &index.to_be_bytes()]))
    }

    pub fn secret(&self) -> &Digest256 {
        &self.sk
    }

    pub fn public(&self) -> &Digest256 {
        &self.pk
    }
}

/// One included transaction: a report (or the dummy) and its fee bid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub slot: Slot,
    pub bid: Money,
}

impl Inclusion {
    pub fn new(slot: impl Into<Slot>, bid: Money) -> Self {
        Self { slot: slot.into(), bid }
    }
}

/// `(index, beacon, random string, inclusions)`; inclusions are kept in
/// exactly the order the validator chose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub index: u64,
    #[serde(with = "hex_digest")]
    pub beacon: Digest256,
    pub random_string: RandomString,
    pub inclusions: Vec<Inclusion>,
}

impl Block {
    pub fn slots(&self) -> Vec<Slot> {
        self.inclusions.iter().map(|i| i.slot.clone()).collect()
    }
}

pub(crate) mod hex_digest {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use super::Digest256;

    pub fn serialize<S: Serializer>(d: &Digest256, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(d))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Digest256, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(D::Error::custom)?;
        bytes.try_into().map_err(|_| D::Error::custom("expected a 32-byte hex digest"))
    }
}

pub(crate) mod hex_bytes {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(d))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(&s).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minted_ids_are_unique_and_increasing() {
        let mut minter = ReportMinter::new();
        let a = minter.mint_seeded(PublisherId(0), 7);
        let b = minter.mint_seeded(PublisherId(0), 7);
        assert!(a.id() < b.id());
        assert_ne!(a, b);
        assert_ne!(a.payload_digest(), b.payload_digest());
    }

    #[test]
    fn dummy_has_reserved_key() {
        assert_eq!(Slot::Dummy.key(), DUMMY_KEY);
        assert!(Slot::Dummy.owner().is_none());
    }

    #[test]
    #[should_panic(expected = "reserved")]
    fn reserved_id_rejected() {
        let _ = Report::new(ReportId(DUMMY_KEY), PublisherId(0), [0; 32]);
    }

    #[test]
    fn keys_bind_public_to_secret() {
        let keys = ValidatorKeys::derive(1, 2);
        assert_eq!(keys.public(), &oracle::digest(&[keys.secret()]));
        assert_ne!(ValidatorKeys::derive(1, 3).public(), keys.public());
    }

    #[test]
    fn block_json_keeps_declared_field_order() {
        let keys = ValidatorKeys::derive(0, 0);
        let s = crate::vrf::generate(&[1; 32], &keys);
        let r = ReportMinter::new().mint_seeded(PublisherId(3), 0);
        let block = Block {
            index: 1,
            beacon: [1; 32],
            random_string: s,
            inclusions: vec![Inclusion::new(r, 0.0), Inclusion::new(Slot::Dummy, 0.0)],
        };
        let json = serde_json::to_string(&block).unwrap();
        let idx = |k: &str| json.find(k).unwrap();
        assert!(idx("\"index\"") < idx("\"beacon\""));
        assert!(idx("\"beacon\"") < idx("\"random_string\""));
        assert!(idx("\"random_string\"") < idx("\"inclusions\""));
        assert!(json.contains("\"dummy\""));
        let back: Block = serde_json::from_str(&json).unwrap();
        assert_eq!(back, block);
    }
}
