use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

use super::LedgerError;

/// A single prescription row: one patient, one drug.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawRecord")]
pub struct Record {
    pub patient_id: u64,
    pub item: String,
}

#[derive(Deserialize)]
struct RawRecord {
    patient_id: u64,
    item: String,
}

impl TryFrom<RawRecord> for Record {
    type Error = LedgerError;

    fn try_from(raw: RawRecord) -> Result<Self, Self::Error> {
        Record::new(raw.patient_id, raw.item)
    }
}

impl Record {
    /// Item names are non-empty runs of lowercase ASCII letters, so they
    /// never collide with CSV or rule-text delimiters.
    pub fn new(patient_id: u64, item: impl Into<String>) -> Result<Self, LedgerError> {
        let item = item.into();
        if !is_valid_item(&item) {
            return Err(LedgerError::InvalidRecord(format!(
                "item `{item}` must be a non-empty lowercase word"
            )));
        }
        Ok(Record { patient_id, item })
    }
}

pub(crate) fn is_valid_item(item: &str) -> bool {
    !item.is_empty() && item.bytes().all(|b| b.is_ascii_lowercase())
}

/// A SHA-256 digest. Serialized as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Digest(out))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub index: u64,
    pub timestamp: u64,
    pub prev_hash: Digest,
    pub records: Vec<Record>,
    pub hash: Digest,
}

impl Block {
    pub fn genesis(timestamp: u64) -> Self {
        Block::seal(0, timestamp, Digest::ZERO, Vec::new())
    }

    /// Builds a block and stamps it with the hash of its contents.
    pub fn seal(index: u64, timestamp: u64, prev_hash: Digest, records: Vec<Record>) -> Self {
        let hash = hash_block(index, timestamp, &prev_hash, &records);
        Block {
            index,
            timestamp,
            prev_hash,
            records,
            hash,
        }
    }

    pub fn computed_hash(&self) -> Digest {
        hash_block(self.index, self.timestamp, &self.prev_hash, &self.records)
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        canonical_bytes(self.index, self.timestamp, &self.prev_hash, &self.records)
    }
}

/// Canonical encoding of the hashed block fields. See the module docs for
/// the byte layout.
pub fn canonical_bytes(
    index: u64,
    timestamp: u64,
    prev_hash: &Digest,
    records: &[Record],
) -> Vec<u8> {
    let payload: usize = records.iter().map(|r| 12 + r.item.len()).sum();
    let mut buf = Vec::with_capacity(8 + 8 + 32 + 4 + payload);
    buf.extend_from_slice(&index.to_be_bytes());
    buf.extend_from_slice(&timestamp.to_be_bytes());
    buf.extend_from_slice(&prev_hash.0);
    buf.extend_from_slice(&(records.len() as u32).to_be_bytes());
    for record in records {
        buf.extend_from_slice(&record.patient_id.to_be_bytes());
        buf.extend_from_slice(&(record.item.len() as u32).to_be_bytes());
        buf.extend_from_slice(record.item.as_bytes());
    }
    buf
}

pub fn hash_block(index: u64, timestamp: u64, prev_hash: &Digest, records: &[Record]) -> Digest {
    let bytes = canonical_bytes(index, timestamp, prev_hash, records);
    Digest(Sha256::digest(&bytes).into())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chain {
    pub blocks: Vec<Block>,
}

impl Chain {
    pub fn new(genesis_timestamp: u64) -> Self {
        Chain {
            blocks: vec![Block::genesis(genesis_timestamp)],
        }
    }

    pub fn tip(&self) -> Option<&Block> {
        self.blocks.last()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Number of records across all blocks.
    pub fn record_count(&self) -> usize {
        self.blocks.iter().map(|b| b.records.len()).sum()
    }

    /// Checks whether `block` may be appended to this chain.
    pub(crate) fn check_successor(&self, block: &Block) -> Result<(), String> {
        let tip = self.tip().ok_or("chain has no genesis block")?;
        if block.index != tip.index + 1 {
            return Err(format!(
                "expected index {}, got {}",
                tip.index + 1,
                block.index
            ));
        }
        if block.prev_hash != tip.hash {
            return Err("prev_hash does not match tip".into());
        }
        if block.timestamp < tip.timestamp {
            return Err("timestamp moves backwards".into());
        }
        if block.records.is_empty() {
            return Err("non-genesis block without records".into());
        }
        if block.records.iter().any(|r| !is_valid_item(&r.item)) {
            return Err("malformed record".into());
        }
        if block.computed_hash() != block.hash {
            return Err("stored hash does not match contents".into());
        }
        Ok(())
    }
}

/// True iff the chain starts with a well-formed genesis block, every link
/// and index step is correct, timestamps never decrease, and every stored
/// hash recomputes.
pub fn validate_chain(chain: &Chain) -> bool {
    let Some(genesis) = chain.blocks.first() else {
        return false;
    };
    if genesis.index != 0
        || genesis.prev_hash != Digest::ZERO
        || genesis.computed_hash() != genesis.hash
    {
        return false;
    }
    if genesis.records.iter().any(|r| !is_valid_item(&r.item)) {
        return false;
    }
    chain.blocks.windows(2).all(|pair| {
        let (prev, block) = (&pair[0], &pair[1]);
        block.index == prev.index + 1
            && block.prev_hash == prev.hash
            && block.timestamp >= prev.timestamp
            && !block.records.is_empty()
            && block.records.iter().all(|r| is_valid_item(&r.item))
            && block.computed_hash() == block.hash
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(p: u64, item: &str) -> Record {
        Record::new(p, item).unwrap()
    }

    fn chain_of(n_blocks: usize) -> Chain {
        let mut chain = Chain::new(1_000);
        for i in 1..n_blocks as u64 {
            let tip = chain.tip().unwrap();
            let records = vec![rec(i, "actiq"), rec(i, "fentora")];
            let block = Block::seal(i, 1_000 + i, tip.hash, records);
            chain.blocks.push(block);
        }
        chain
    }

    // Reference digests computed with an independent SHA-256 implementation
    // (Python hashlib) over the documented canonical bytes.
    #[test]
    fn genesis_hash_matches_reference_sha256() {
        let bytes = canonical_bytes(0, 1_700_000_000_000, &Digest::ZERO, &[]);
        assert_eq!(
            hex::encode(&bytes),
            "00000000000000000000018bcfe56800\
             0000000000000000000000000000000000000000000000000000000000000000\
             00000000"
        );
        let digest = hash_block(0, 1_700_000_000_000, &Digest::ZERO, &[]);
        assert_eq!(
            digest.to_hex(),
            "320ebf5713c21e98f368db7b007568676eeddca9947b6f211ff98ef1fd6f5881"
        );
    }

    #[test]
    fn record_block_hash_matches_reference_sha256() {
        let prev = hash_block(0, 1_700_000_000_000, &Digest::ZERO, &[]);
        let records = vec![rec(0, "actiq"), rec(0, "meperidine")];
        let digest = hash_block(1, 1_700_000_000_007, &prev, &records);
        assert_eq!(
            digest.to_hex(),
            "dcb994094a5745604a6f441b500fad957e4d3588974282621d944cf2070b7b8e"
        );
    }

    #[test]
    fn hashing_is_deterministic_and_sensitive() {
        let records = vec![rec(3, "morphine")];
        let a = hash_block(4, 99, &Digest::ZERO, &records);
        let b = hash_block(4, 99, &Digest::ZERO, &records);
        assert_eq!(a, b);
        let flipped = vec![rec(3, "morphinf")];
        assert_ne!(a, hash_block(4, 99, &Digest::ZERO, &flipped));
        assert_ne!(a, hash_block(4, 99, &Digest::ZERO, &[rec(2, "morphine")]));
    }

    #[test]
    fn record_rejects_bad_items() {
        assert!(Record::new(0, "").is_err());
        assert!(Record::new(0, "Actiq").is_err());
        assert!(Record::new(0, "a,b").is_err());
        assert!(Record::new(0, "a b").is_err());
        assert!(Record::new(0, "actiq").is_ok());
    }

    #[test]
    fn genesis_only_chain_is_valid() {
        assert!(validate_chain(&Chain::new(0)));
        assert!(!validate_chain(&Chain { blocks: vec![] }));
    }

    #[test]
    fn mutated_record_breaks_validation() {
        let mut chain = chain_of(5);
        assert!(validate_chain(&chain));
        chain.blocks[3].records[0].item = "lorcet".into();
        assert!(!validate_chain(&chain));
    }

    #[test]
    fn spliced_blocks_break_validation() {
        let mut chain = chain_of(5);
        chain.blocks.swap(2, 3);
        assert!(!validate_chain(&chain));
    }

    #[test]
    fn rehashed_tamper_still_breaks_linkage() {
        let mut chain = chain_of(5);
        let b = &mut chain.blocks[2];
        b.records[0].item = "lorcet".into();
        b.hash = b.computed_hash();
        assert!(!validate_chain(&chain));
    }

    #[test]
    fn decreasing_timestamp_is_rejected() {
        let mut chain = Chain::new(500);
        let tip = chain.tip().unwrap().hash;
        chain
            .blocks
            .push(Block::seal(1, 400, tip, vec![rec(0, "actiq")]));
        assert!(!validate_chain(&chain));
    }

    #[test]
    fn empty_non_genesis_block_is_rejected() {
        let mut chain = Chain::new(500);
        let tip = chain.tip().unwrap().hash;
        chain.blocks.push(Block::seal(1, 600, tip, vec![]));
        assert!(!validate_chain(&chain));
    }

    #[test]
    fn digest_hex_round_trip() {
        let d = hash_block(1, 2, &Digest::ZERO, &[]);
        assert_eq!(Digest::from_hex(&d.to_hex()).unwrap(), d);
        assert!(Digest::from_hex("abc").is_err());
    }
}
