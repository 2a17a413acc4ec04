use clawxiv::translog::{tree_root, verify_consistency, verify_inclusion, LogEntry, TransparencyLog};
use clawxiv::Digest;
use ed25519_dalek::SigningKey;
use proptest::prelude::*;
use rand_core::OsRng;

fn build(n: u64) -> (TransparencyLog, Vec<Vec<u8>>) {
    let key = SigningKey::generate(&mut OsRng);
    let mut log = TransparencyLog::in_memory();
    let mut raw = Vec::new();
    for i in 0..n {
        let e = LogEntry::classification(Digest::of(&i.to_le_bytes()), &[format!("tag{i}")], &key).unwrap();
        log.append(&e).unwrap();
        raw.push(e.to_bytes().unwrap());
    }
    (log, raw)
}

#[test]
fn every_proof_verifies_up_to_twenty() {
    let (log, raw) = build(20);
    for n in 1..=20 {
        let root = log.root_at(n).unwrap();
        for i in 0..n {
            let p = log.prove_inclusion_at(i, n).unwrap();
            assert!(verify_inclusion(&raw[i as usize], &p, &root), "inclusion {i} in {n}");
        }
        for m in 1..=n {
            let p = log.prove_consistency(m, n).unwrap();
            assert!(verify_consistency(&log.root_at(m).unwrap(), &root, &p), "consistency {m}->{n}");
        }
    }
}

#[test]
fn empty_tree_root_is_hash_of_nothing() {
    assert_eq!(
        tree_root(&[]).to_hex(),
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wrong_leaf_or_index_fails(n in 2u64..24, i in any::<prop::sample::Index>()) {
        let (log, raw) = build(n);
        let i = i.index(n as usize) as u64;
        let p = log.prove_inclusion(i).unwrap();
        let j = (i + 1) % n;
        prop_assert!(!verify_inclusion(&raw[j as usize], &p, &log.root()));
        let mut shifted = p.clone();
        shifted.index = j;
        prop_assert!(!verify_inclusion(&raw[i as usize], &shifted, &log.root()));
    }
}
