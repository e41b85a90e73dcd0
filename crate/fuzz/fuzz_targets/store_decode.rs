#![no_main]

use libfuzzer_sys::fuzz_target;
use paravid::index::{EmbeddingStore, StoreKind};

// Layout: kind byte, u16 LE length of the ids text, ids text, vector bytes.
fuzz_target!(|data: &[u8]| {
    if data.len() < 3 {
        return;
    }
    let kind = if data[0] & 1 == 0 { StoreKind::Embedding } else { StoreKind::Concept };
    let ids_len = (u16::from_le_bytes([data[1], data[2]]) as usize).min(data.len() - 3);
    let Ok(ids) = std::str::from_utf8(&data[3..3 + ids_len]) else { return };
    let vectors = &data[3 + ids_len..];
    if let Ok(store) = EmbeddingStore::decode(vectors, ids, kind, "fuzz") {
        assert_eq!(store.ids().len(), store.len());
    }
});
