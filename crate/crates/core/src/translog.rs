//! Append-only Merkle transparency log for publication, classification and
//! appeal events.
//!
//! The tree follows the certificate-transparency construction: leaf
//! `SHA-256(0x00 ‖ entry)`, node `SHA-256(0x01 ‖ left ‖ right)`, and a
//! tree of `n` leaves splits at the largest power of two below `n`.
//! Entries are stored as `u32` big-endian length + canonical JSON, one
//! after another, in `out/translog/log.bin`.

use std::fs::{self, File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use ed25519_dalek::{Signer as _, SigningKey, Verifier as _};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest as _, Sha256};

use crate::canonical;
use crate::digest::Digest;
use crate::error::{Error, IoContext, Result};
use crate::manifest::{leaf_hash, node_hash};
use crate::signing::{decode_public_key, decode_signature};
use crate::timefmt::{self, Timestamp};

pub const LOG_CONTEXT: &[u8] = b"clawxiv-log-v1";
pub const LOG_DIR: &str = "translog";
pub const LOG_FILE: &str = "log.bin";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    Publication,
    Classification,
    Appeal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub event_type: EventType,
    pub bundle_root: Digest,
    pub payload: Value,
    pub signer_pubkey: String,
    pub signature: String,
    #[serde(with = "timefmt::serde_secs")]
    pub timestamp: Timestamp,
}

impl LogEntry {
    fn signed_message(&self) -> Result<Vec<u8>> {
        let mut v = serde_json::to_value(self).map_err(|e| Error::Encoding(e.to_string()))?;
        if let Value::Object(map) = &mut v {
            map.remove("signature");
        }
        let mut msg = LOG_CONTEXT.to_vec();
        msg.extend(canonical::encode_value(&v)?);
        Ok(msg)
    }

    pub fn signed(
        event_type: EventType,
        bundle_root: Digest,
        payload: Value,
        key: &SigningKey,
        timestamp: Timestamp,
    ) -> Result<Self> {
        let mut e = LogEntry {
            event_type,
            bundle_root,
            payload,
            signer_pubkey: B64.encode(key.verifying_key().as_bytes()),
            signature: String::new(),
            timestamp,
        };
        e.signature = B64.encode(key.sign(&e.signed_message()?).to_bytes());
        Ok(e)
    }

    pub fn classification(root: Digest, tags: &[String], key: &SigningKey) -> Result<Self> {
        Self::signed(EventType::Classification, root, serde_json::json!({ "tags": tags }), key, timefmt::now())
    }

    pub fn appeal(root: Digest, references: u64, reason: &str, key: &SigningKey) -> Result<Self> {
        let payload = serde_json::json!({ "reason": reason, "references": references });
        Self::signed(EventType::Appeal, root, payload, key, timefmt::now())
    }

    pub fn publication(root: Digest, receipts: Value, key: &SigningKey) -> Result<Self> {
        let payload = serde_json::json!({ "receipts": receipts });
        Self::signed(EventType::Publication, root, payload, key, timefmt::now())
    }

    pub fn verify_signature(&self) -> bool {
        let (Ok(key), Ok(sig), Ok(msg)) = (
            decode_public_key(&self.signer_pubkey),
            decode_signature(&self.signature),
            self.signed_message(),
        ) else {
            return false;
        };
        key.verify(&msg, &sig).is_ok()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        canonical::to_canonical_bytes(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| Error::parse("log entry", e.to_string()))
    }

    fn appeal_reference(&self) -> Option<u64> {
        self.payload.get("references").and_then(Value::as_u64)
    }

    fn check_payload(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::invalid("payload", why.to_string()));
        let obj = match self.payload.as_object() {
            Some(o) => o,
            None => return bad("must be an object"),
        };
        match self.event_type {
            EventType::Classification => match obj.get("tags").and_then(Value::as_array) {
                Some(tags) if tags.iter().all(Value::is_string) => Ok(()),
                _ => bad("classification needs a string list `tags`"),
            },
            EventType::Appeal => {
                if obj.get("reason").and_then(Value::as_str).is_none() || self.appeal_reference().is_none() {
                    return bad("appeal needs `reason` and an integer `references`");
                }
                Ok(())
            }
            EventType::Publication => match obj.get("receipts") {
                Some(Value::Array(_)) => Ok(()),
                _ => bad("publication needs a `receipts` list"),
            },
        }
    }
}

/// Root of the tree over `leaves`, from scratch. The empty tree hashes to
/// `SHA-256("")`.
pub fn tree_root(leaves: &[Digest]) -> Digest {
    match leaves.len() {
        0 => Digest(Sha256::digest(b"").into()),
        1 => leaves[0],
        n => {
            let k = split_point(n);
            node_hash(&tree_root(&leaves[..k]), &tree_root(&leaves[k..]))
        }
    }
}

/// Largest power of two strictly below `n` (n ≥ 2).
fn split_point(n: usize) -> usize {
    debug_assert!(n >= 2);
    1 << (usize::BITS - 1 - (n - 1).leading_zeros())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogState {
    pub tree_size: u64,
    pub root_hash: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InclusionProof {
    pub index: u64,
    pub tree_size: u64,
    pub path: Vec<Digest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyProof {
    pub old_size: u64,
    pub new_size: u64,
    pub path: Vec<Digest>,
}

fn inclusion_path(index: usize, leaves: &[Digest]) -> Vec<Digest> {
    let n = leaves.len();
    if n <= 1 {
        return Vec::new();
    }
    let k = split_point(n);
    if index < k {
        let mut p = inclusion_path(index, &leaves[..k]);
        p.push(tree_root(&leaves[k..]));
        p
    } else {
        let mut p = inclusion_path(index - k, &leaves[k..]);
        p.push(tree_root(&leaves[..k]));
        p
    }
}

fn consistency_path(m: usize, leaves: &[Digest], complete: bool) -> Vec<Digest> {
    let n = leaves.len();
    if m == n {
        return if complete { Vec::new() } else { vec![tree_root(leaves)] };
    }
    let k = split_point(n);
    if m <= k {
        let mut p = consistency_path(m, &leaves[..k], complete);
        p.push(tree_root(&leaves[k..]));
        p
    } else {
        let mut p = consistency_path(m - k, &leaves[k..], false);
        p.push(tree_root(&leaves[..k]));
        p
    }
}

pub fn verify_inclusion(entry_bytes: &[u8], proof: &InclusionProof, root: &Digest) -> bool {
    if proof.index >= proof.tree_size {
        return false;
    }
    let mut fnode = proof.index;
    let mut snode = proof.tree_size - 1;
    let mut r = leaf_hash(entry_bytes);
    for p in &proof.path {
        if snode == 0 {
            return false;
        }
        if fnode & 1 == 1 || fnode == snode {
            r = node_hash(p, &r);
            while fnode & 1 == 0 && fnode != 0 {
                fnode >>= 1;
                snode >>= 1;
            }
        } else {
            r = node_hash(&r, p);
        }
        fnode >>= 1;
        snode >>= 1;
    }
    snode == 0 && r == *root
}

pub fn verify_consistency(old_root: &Digest, new_root: &Digest, proof: &ConsistencyProof) -> bool {
    let (m, n) = (proof.old_size, proof.new_size);
    if m == 0 || m > n {
        return false;
    }
    if m == n {
        return proof.path.is_empty() && old_root == new_root;
    }
    let mut path = proof.path.clone();
    if m.is_power_of_two() {
        path.insert(0, *old_root);
    }
    let Some((first, rest)) = path.split_first() else {
        return false;
    };
    let mut fnode = m - 1;
    let mut snode = n - 1;
    while fnode & 1 == 1 {
        fnode >>= 1;
        snode >>= 1;
    }
    let mut fr = *first;
    let mut sr = *first;
    for c in rest {
        if snode == 0 {
            return false;
        }
        if fnode & 1 == 1 || fnode == snode {
            fr = node_hash(c, &fr);
            sr = node_hash(c, &sr);
            while fnode & 1 == 0 && fnode != 0 {
                fnode >>= 1;
                snode >>= 1;
            }
        } else {
            sr = node_hash(&sr, c);
        }
        fnode >>= 1;
        snode >>= 1;
    }
    fr == *old_root && sr == *new_root && snode == 0
}

/// The log: raw entry bytes, their leaf hashes, and the compact frontier
/// of complete subtrees used to maintain the root incrementally.
#[derive(Debug)]
pub struct TransparencyLog {
    path: Option<PathBuf>,
    entries: Vec<Vec<u8>>,
    kinds: Vec<(EventType, Digest)>,
    leaves: Vec<Digest>,
    frontier: Vec<(Digest, u64)>,
}

impl TransparencyLog {
    pub fn in_memory() -> Self {
        TransparencyLog {
            path: None,
            entries: Vec::new(),
            kinds: Vec::new(),
            leaves: Vec::new(),
            frontier: Vec::new(),
        }
    }

    /// Open or create a log file, replaying every record. A torn final
    /// record left by a crash is truncated away.
    pub fn open(path: &Path) -> Result<Self> {
        let mut log = Self::in_memory();
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).at(parent)?;
        }
        let mut raw = Vec::new();
        if path.exists() {
            File::open(path).at(path)?.read_to_end(&mut raw).at(path)?;
        }
        let mut pos = 0usize;
        while pos + 4 <= raw.len() {
            let len = u32::from_be_bytes(raw[pos..pos + 4].try_into().expect("4 bytes")) as usize;
            if pos + 4 + len > raw.len() {
                break;
            }
            let bytes = raw[pos + 4..pos + 4 + len].to_vec();
            let entry = LogEntry::from_bytes(&bytes)
                .map_err(|e| Error::parse(path.display().to_string(), format!("record at offset {pos}: {e}")))?;
            log.push(entry.event_type, entry.bundle_root, bytes);
            pos += 4 + len;
        }
        if pos != raw.len() {
            let f = OpenOptions::new().write(true).open(path).at(path)?;
            f.set_len(pos as u64).at(path)?;
        }
        log.path = Some(path.to_path_buf());
        Ok(log)
    }

    fn push(&mut self, kind: EventType, root: Digest, bytes: Vec<u8>) {
        let leaf = leaf_hash(&bytes);
        self.leaves.push(leaf);
        self.entries.push(bytes);
        self.kinds.push((kind, root));
        self.frontier.push((leaf, 1));
        while self.frontier.len() >= 2 {
            let (r, rs) = self.frontier[self.frontier.len() - 1];
            let (l, ls) = self.frontier[self.frontier.len() - 2];
            if ls != rs {
                break;
            }
            self.frontier.truncate(self.frontier.len() - 2);
            self.frontier.push((node_hash(&l, &r), ls + rs));
        }
    }

    pub fn len(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Current root from the incrementally maintained frontier.
    pub fn root(&self) -> Digest {
        let mut it = self.frontier.iter().rev();
        match it.next() {
            None => tree_root(&[]),
            Some(&(last, _)) => it.fold(last, |acc, (h, _)| node_hash(h, &acc)),
        }
    }

    pub fn state(&self) -> LogState {
        LogState {
            tree_size: self.len(),
            root_hash: self.root(),
        }
    }

    pub fn root_at(&self, size: u64) -> Result<Digest> {
        if size > self.len() {
            return Err(Error::invalid("size", format!("{size} exceeds tree size {}", self.len())));
        }
        Ok(tree_root(&self.leaves[..size as usize]))
    }

    pub fn entry_bytes(&self, index: u64) -> Result<&[u8]> {
        self.entries
            .get(index as usize)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::invalid("index", format!("{index} >= tree size {}", self.len())))
    }

    pub fn entry(&self, index: u64) -> Result<LogEntry> {
        LogEntry::from_bytes(self.entry_bytes(index)?)
    }

    pub fn append(&mut self, entry: &LogEntry) -> Result<LogState> {
        if !entry.verify_signature() {
            return Err(Error::invalid("log entry", "signature does not verify"));
        }
        entry.check_payload()?;
        if entry.event_type == EventType::Appeal {
            let idx = entry.appeal_reference().expect("checked by check_payload");
            match self.kinds.get(idx as usize) {
                Some((EventType::Classification, root)) if *root == entry.bundle_root => {}
                Some((EventType::Classification, _)) => {
                    return Err(Error::invalid("appeal", format!("entry {idx} classifies a different bundle")))
                }
                Some(_) => return Err(Error::invalid("appeal", format!("entry {idx} is not a classification"))),
                None => return Err(Error::invalid("appeal", format!("entry {idx} does not exist"))),
            }
        }
        let bytes = entry.to_bytes()?;
        let len = u32::try_from(bytes.len()).map_err(|_| Error::invalid("log entry", "too large"))?;
        if let Some(path) = &self.path {
            let mut f = OpenOptions::new().create(true).append(true).open(path).at(path)?;
            let mut record = len.to_be_bytes().to_vec();
            record.extend_from_slice(&bytes);
            f.write_all(&record).at(path)?;
            f.sync_data().at(path)?;
        }
        self.push(entry.event_type, entry.bundle_root, bytes);
        Ok(self.state())
    }

    pub fn prove_inclusion(&self, index: u64) -> Result<InclusionProof> {
        self.prove_inclusion_at(index, self.len())
    }

    pub fn prove_inclusion_at(&self, index: u64, tree_size: u64) -> Result<InclusionProof> {
        if tree_size > self.len() || index >= tree_size {
            return Err(Error::invalid("index", format!("{index} not in a tree of size {tree_size}")));
        }
        Ok(InclusionProof {
            index,
            tree_size,
            path: inclusion_path(index as usize, &self.leaves[..tree_size as usize]),
        })
    }

    pub fn prove_consistency(&self, old_size: u64, new_size: u64) -> Result<ConsistencyProof> {
        if old_size == 0 || old_size > new_size || new_size > self.len() {
            return Err(Error::invalid(
                "size",
                format!("need 0 < {old_size} <= {new_size} <= {}", self.len()),
            ));
        }
        Ok(ConsistencyProof {
            old_size,
            new_size,
            path: consistency_path(old_size as usize, &self.leaves[..new_size as usize], true),
        })
    }
}

pub fn log_path(out_dir: &Path) -> PathBuf {
    out_dir.join(LOG_DIR).join(LOG_FILE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_core::OsRng;

    fn key() -> SigningKey {
        SigningKey::generate(&mut OsRng)
    }

    fn classification(i: u64, k: &SigningKey) -> LogEntry {
        LogEntry::classification(Digest::of(&i.to_be_bytes()), &[format!("cs.{i}")], k).unwrap()
    }

    #[test]
    fn single_entry_root_is_leaf() {
        let k = key();
        let mut log = TransparencyLog::in_memory();
        let e = classification(0, &k);
        let st = log.append(&e).unwrap();
        assert_eq!(st.tree_size, 1);
        assert_eq!(st.root_hash, leaf_hash(&e.to_bytes().unwrap()));
        let p = log.prove_inclusion(0).unwrap();
        assert!(p.path.is_empty());
        assert!(verify_inclusion(&e.to_bytes().unwrap(), &p, &st.root_hash));
    }

    #[test]
    fn appeals_must_reference_classifications() {
        let k = key();
        let mut log = TransparencyLog::in_memory();
        let c = classification(0, &k);
        log.append(&c).unwrap();
        let ok = LogEntry::appeal(c.bundle_root, 0, "wrong category", &k).unwrap();
        assert_eq!(log.append(&ok).unwrap().tree_size, 2);
        let dangling = LogEntry::appeal(c.bundle_root, 5, "x", &k).unwrap();
        assert!(log.append(&dangling).is_err());
        let at_appeal = LogEntry::appeal(c.bundle_root, 1, "x", &k).unwrap();
        assert!(log.append(&at_appeal).is_err());
        assert_eq!(log.len(), 2);
    }

    #[test]
    fn forged_signature_rejected_and_log_unchanged() {
        let k = key();
        let mut log = TransparencyLog::in_memory();
        let mut e = classification(0, &k);
        e.payload = serde_json::json!({"tags": ["math.CT"]});
        assert!(log.append(&e).is_err());
        assert!(log.is_empty());
    }

    #[test]
    fn persisted_log_replays_and_recovers_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t/log.bin");
        let k = key();
        let mut log = TransparencyLog::open(&path).unwrap();
        for i in 0..5 {
            log.append(&classification(i, &k)).unwrap();
        }
        let root = log.root();
        let before = fs::read(&path).unwrap();
        drop(log);
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(&[0, 0, 1, 0, b'{']).unwrap();
        drop(f);
        let mut reopened = TransparencyLog::open(&path).unwrap();
        assert_eq!(reopened.root(), root);
        assert_eq!(fs::read(&path).unwrap(), before);
        reopened.append(&classification(9, &k)).unwrap();
        assert!(fs::read(&path).unwrap().starts_with(&before), "earlier bytes unchanged");
    }

    #[test]
    fn identity_consistency() {
        let k = key();
        let mut log = TransparencyLog::in_memory();
        for i in 0..3 {
            log.append(&classification(i, &k)).unwrap();
        }
        let p = log.prove_consistency(3, 3).unwrap();
        assert!(verify_consistency(&log.root(), &log.root(), &p));
        assert!(log.prove_consistency(0, 3).is_err());
        assert!(log.prove_consistency(2, 4).is_err());
        assert!(log.prove_inclusion(3).is_err());
    }

    #[test]
    fn consistency_one_to_three_against_brute_force_roots() {
        let k = key();
        let mut log = TransparencyLog::in_memory();
        let entries: Vec<LogEntry> = (0..3).map(|i| classification(i, &k)).collect();
        log.append(&entries[0]).unwrap();
        let old = log.root();
        for e in &entries[1..] {
            log.append(e).unwrap();
        }
        // Roots written out from the definitions.
        let l: Vec<Digest> = entries.iter().map(|e| leaf_hash(&e.to_bytes().unwrap())).collect();
        assert_eq!(old, l[0]);
        let new = node_hash(&node_hash(&l[0], &l[1]), &l[2]);
        assert_eq!(log.root(), new);
        let p = log.prove_consistency(1, 3).unwrap();
        assert!(verify_consistency(&old, &new, &p));
        assert!(!verify_consistency(&old, &Digest::of(b"forged"), &p));
    }
}
