//! Rule-set model artifacts in a line-oriented text format and a
//! length-prefixed binary format.
//!
//! Text (`RULESET_TEXT`), one rule per line after the header comment:
//!
//! ```text
//! # armchain ruleset v1
//! actiq,fentora:256 | meperidine:303 | 202 | 0.2017982017982018 | 0.7890625 | 2.6067708333333335
//! ```
//!
//! i.e. `lhs_items:count(lhs) | rhs_items:count(rhs) | count | support |
//! confidence | lift`, floats in shortest round-trip decimal form.
//!
//! Binary (`RULESET_BINARY`), big-endian:
//!
//! ```text
//! magic "ARMB" | version u8 = 1 | rule_count u32 |
//! rule_count × { lhs itemset | rhs itemset | count u64 |
//!                support f64 | confidence f64 | lift f64 }
//! itemset = item_count u32 | count u64 | item_count × { len u32 | bytes }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use base64::Engine as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::LifecycleError;
use crate::arm::{AssociationRule, Itemset};

const TEXT_HEADER: &str = "# armchain ruleset v1";
const BINARY_MAGIC: &[u8; 4] = b"ARMB";
const BINARY_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ArtifactFormat {
    RulesetText,
    RulesetBinary,
}

impl ArtifactFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ArtifactFormat::RulesetText => "rules.txt",
            ArtifactFormat::RulesetBinary => "rules.bin",
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        let name = path.file_name()?.to_str()?;
        if name.ends_with(".rules.txt") {
            Some(ArtifactFormat::RulesetText)
        } else if name.ends_with(".rules.bin") {
            Some(ArtifactFormat::RulesetBinary)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMetadata {
    pub producer: String,
    pub created_ms: u64,
    pub rule_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelArtifact {
    pub format: ArtifactFormat,
    pub payload: Vec<u8>,
    pub metadata: ArtifactMetadata,
}

impl ModelArtifact {
    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    pub fn decode(&self) -> Result<Vec<AssociationRule>, LifecycleError> {
        decode_model(self)
    }
}

// JSON form: text payloads stay readable, binary payloads go through base64.
#[derive(Serialize, Deserialize)]
struct ArtifactRepr {
    format: ArtifactFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base64: Option<String>,
    metadata: ArtifactMetadata,
}

impl Serialize for ModelArtifact {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let text = match self.format {
            ArtifactFormat::RulesetText => {
                std::str::from_utf8(&self.payload).ok().map(str::to_string)
            }
            ArtifactFormat::RulesetBinary => None,
        };
        let base64 = text
            .is_none()
            .then(|| base64::engine::general_purpose::STANDARD.encode(&self.payload));
        ArtifactRepr {
            format: self.format,
            text,
            base64,
            metadata: self.metadata.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ModelArtifact {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = ArtifactRepr::deserialize(deserializer)?;
        let payload = match (repr.text, repr.base64) {
            (Some(t), None) => t.into_bytes(),
            (None, Some(b)) => base64::engine::general_purpose::STANDARD
                .decode(b)
                .map_err(serde::de::Error::custom)?,
            (None, None) => Vec::new(),
            (Some(_), Some(_)) => {
                return Err(serde::de::Error::custom(
                    "artifact has both `text` and `base64`",
                ))
            }
        };
        Ok(ModelArtifact {
            format: repr.format,
            payload,
            metadata: repr.metadata,
        })
    }
}

fn encodable(item: &str) -> bool {
    !item.is_empty()
        && !item
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, ',' | ':' | '|' | '#'))
}

/// Encodes a non-empty rule list. Encoding is deterministic.
pub fn serialize_model(
    rules: &[AssociationRule],
    format: ArtifactFormat,
    producer: &str,
    created_ms: u64,
) -> Result<ModelArtifact, LifecycleError> {
    if rules.is_empty() {
        return Err(LifecycleError::NoModel);
    }
    if let Some(bad) = rules
        .iter()
        .flat_map(|r| r.lhs.items.iter().chain(&r.rhs.items))
        .find(|i| !encodable(i))
    {
        return Err(LifecycleError::Unencodable(bad.clone()));
    }
    let payload = match format {
        ArtifactFormat::RulesetText => encode_text(rules),
        ArtifactFormat::RulesetBinary => encode_binary(rules),
    };
    Ok(ModelArtifact {
        format,
        payload,
        metadata: ArtifactMetadata {
            producer: producer.to_string(),
            created_ms,
            rule_count: rules.len(),
        },
    })
}

pub fn decode_model(artifact: &ModelArtifact) -> Result<Vec<AssociationRule>, LifecycleError> {
    let rules = match artifact.format {
        ArtifactFormat::RulesetText => decode_text(&artifact.payload)?,
        ArtifactFormat::RulesetBinary => decode_binary(&artifact.payload)?,
    };
    if rules.len() != artifact.metadata.rule_count {
        return Err(LifecycleError::Decode(format!(
            "metadata announces {} rules, payload holds {}",
            artifact.metadata.rule_count,
            rules.len()
        )));
    }
    Ok(rules)
}

fn encode_text(rules: &[AssociationRule]) -> Vec<u8> {
    let mut out = String::from(TEXT_HEADER);
    out.push('\n');
    for r in rules {
        out.push_str(&format!(
            "{}:{} | {}:{} | {} | {} | {} | {}\n",
            r.lhs.items.join(","),
            r.lhs.count,
            r.rhs.items.join(","),
            r.rhs.count,
            r.count,
            r.support,
            r.confidence,
            r.lift
        ));
    }
    out.into_bytes()
}

fn decode_text(payload: &[u8]) -> Result<Vec<AssociationRule>, LifecycleError> {
    let text = std::str::from_utf8(payload)
        .map_err(|e| LifecycleError::Decode(format!("text payload: {e}")))?;
    let mut lines = text.lines();
    if lines.next() != Some(TEXT_HEADER) {
        return Err(LifecycleError::Decode("missing ruleset header".into()));
    }
    let mut rules = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |what: &str| LifecycleError::Decode(format!("line {}: {what}", n + 2));
        let fields: Vec<&str> = line.split(" | ").collect();
        let [lhs, rhs, count, support, confidence, lift] = fields[..] else {
            return Err(err("expected 6 fields"));
        };
        let itemset = |s: &str| -> Result<Itemset, LifecycleError> {
            let (items, count) = s
                .rsplit_once(':')
                .ok_or_else(|| err("itemset without count"))?;
            let items: Vec<String> = items.split(',').map(str::to_string).collect();
            if items.iter().any(|i| !encodable(i)) {
                return Err(err("bad item"));
            }
            Ok(Itemset {
                items,
                count: count.parse().map_err(|_| err("bad itemset count"))?,
            })
        };
        let float = |s: &str| s.parse::<f64>().map_err(|_| err("bad number"));
        rules.push(AssociationRule {
            lhs: itemset(lhs)?,
            rhs: itemset(rhs)?,
            count: count.parse().map_err(|_| err("bad count"))?,
            support: float(support)?,
            confidence: float(confidence)?,
            lift: float(lift)?,
        });
    }
    Ok(rules)
}

fn put_itemset(buf: &mut Vec<u8>, set: &Itemset) {
    buf.extend_from_slice(&(set.items.len() as u32).to_be_bytes());
    buf.extend_from_slice(&set.count.to_be_bytes());
    for item in &set.items {
        buf.extend_from_slice(&(item.len() as u32).to_be_bytes());
        buf.extend_from_slice(item.as_bytes());
    }
}

fn encode_binary(rules: &[AssociationRule]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(BINARY_MAGIC);
    buf.push(BINARY_VERSION);
    buf.extend_from_slice(&(rules.len() as u32).to_be_bytes());
    for r in rules {
        put_itemset(&mut buf, &r.lhs);
        put_itemset(&mut buf, &r.rhs);
        buf.extend_from_slice(&r.count.to_be_bytes());
        for x in [r.support, r.confidence, r.lift] {
            buf.extend_from_slice(&x.to_bits().to_be_bytes());
        }
    }
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LifecycleError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                LifecycleError::Decode(format!("truncated binary payload at byte {}", self.pos))
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, LifecycleError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, LifecycleError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn itemset(&mut self) -> Result<Itemset, LifecycleError> {
        let len = self.u32()? as usize;
        let count = self.u64()?;
        let mut items = Vec::with_capacity(len.min(64));
        for _ in 0..len {
            let n = self.u32()? as usize;
            let raw = self.take(n)?;
            let item = std::str::from_utf8(raw)
                .map_err(|e| LifecycleError::Decode(format!("item: {e}")))?;
            items.push(item.to_string());
        }
        Ok(Itemset { items, count })
    }
}

fn decode_binary(payload: &[u8]) -> Result<Vec<AssociationRule>, LifecycleError> {
    let mut cur = Cursor {
        bytes: payload,
        pos: 0,
    };
    if cur.take(4)? != BINARY_MAGIC {
        return Err(LifecycleError::Decode("bad magic".into()));
    }
    let version = cur.take(1)?[0];
    if version != BINARY_VERSION {
        return Err(LifecycleError::Decode(format!(
            "unsupported version {version}"
        )));
    }
    let n = cur.u32()? as usize;
    let mut rules = Vec::with_capacity(n.min(4096));
    for _ in 0..n {
        let lhs = cur.itemset()?;
        let rhs = cur.itemset()?;
        let count = cur.u64()?;
        let support = f64::from_bits(cur.u64()?);
        let confidence = f64::from_bits(cur.u64()?);
        let lift = f64::from_bits(cur.u64()?);
        rules.push(AssociationRule {
            lhs,
            rhs,
            count,
            support,
            confidence,
            lift,
        });
    }
    if cur.pos != payload.len() {
        return Err(LifecycleError::Decode(
            "trailing bytes after last rule".into(),
        ));
    }
    Ok(rules)
}

/// `model.rules.txt` → `model.meta.json`.
pub fn sidecar_path(artifact_path: &Path) -> PathBuf {
    let name = artifact_path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("model");
    let stem = name
        .strip_suffix(".rules.txt")
        .or_else(|| name.strip_suffix(".rules.bin"))
        .unwrap_or(name);
    artifact_path.with_file_name(format!("{stem}.meta.json"))
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format: ArtifactFormat,
    #[serde(flatten)]
    metadata: ArtifactMetadata,
}

/// Writes the payload to `path` (which must carry the format's extension)
/// and the metadata to the JSON sidecar next to it.
pub fn write_artifact(artifact: &ModelArtifact, path: &Path) -> Result<PathBuf, LifecycleError> {
    if ArtifactFormat::from_path(path) != Some(artifact.format) {
        return Err(LifecycleError::BadPath(format!(
            "{} does not end in .{}",
            path.display(),
            artifact.format.extension()
        )));
    }
    fs::write(path, &artifact.payload)?;
    let sidecar = Sidecar {
        format: artifact.format,
        metadata: artifact.metadata.clone(),
    };
    let json = serde_json::to_vec_pretty(&sidecar).map_err(std::io::Error::other)?;
    fs::write(sidecar_path(path), json)?;
    Ok(path.to_path_buf())
}

pub fn read_artifact(path: &Path) -> Result<ModelArtifact, LifecycleError> {
    let format = ArtifactFormat::from_path(path).ok_or_else(|| {
        LifecycleError::BadPath(format!("{} has no ruleset extension", path.display()))
    })?;
    let payload = fs::read(path)?;
    let sidecar: Sidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)
        .map_err(|e| LifecycleError::Decode(format!("sidecar: {e}")))?;
    if sidecar.format != format {
        return Err(LifecycleError::Decode(
            "sidecar format disagrees with extension".into(),
        ));
    }
    Ok(ModelArtifact {
        format,
        payload,
        metadata: sidecar.metadata,
    })
}
