//! The container parser must reject every malformed header with a format
//! error and must never panic, whatever the corruption.

mod common;

use common::{corrupt_container, valid_container, TestRng};
use para::error::AdapterIoError;
use para::safetensors;

#[test]
fn corrupted_headers_always_yield_format_errors() {
    let base = valid_container();
    assert!(
        safetensors::parse(&base).is_ok(),
        "fixture must start valid"
    );

    let mut rng = TestRng::new(0xfeed);
    for case in 0..1200 {
        let corrupted = corrupt_container(&base, &mut rng);
        match safetensors::parse(&corrupted) {
            Err(AdapterIoError::Format(_)) => {}
            Err(other) => panic!("case {case}: wrong error class: {other}"),
            Ok(_) => panic!("case {case}: corrupted container parsed successfully"),
        }
    }
}

#[test]
fn zero_header_and_empty_files_are_rejected() {
    for bytes in [vec![], vec![0u8; 4], 0u64.to_le_bytes().to_vec()] {
        assert!(matches!(
            safetensors::parse(&bytes),
            Err(AdapterIoError::Format(_))
        ));
    }
}
