#![no_main]

use eqpart::io::parse_partition_json;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(doc) = parse_partition_json(text) else {
        return;
    };
    // a validated document must round-trip and support point location
    let encoded = serde_json::to_string(&doc).expect("document encodes");
    let again = parse_partition_json(&encoded).expect("re-encoded document parses");
    assert_eq!(again.bins.len(), doc.bins.len());
    let centre: Vec<f64> = doc
        .support
        .lower
        .iter()
        .zip(&doc.support.upper)
        .map(|(l, u)| 0.5 * l + 0.5 * u)
        .collect();
    assert!(doc.locate(&centre) < doc.bins.len());
});

