#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = advtext::resources::parse_embeddings(text, "fuzz", None);
        let _ = advtext::resources::parse_embeddings(text, "fuzz", Some(4));
    }
});
