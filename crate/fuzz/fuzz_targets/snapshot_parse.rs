#![no_main]

use libfuzzer_sys::fuzz_target;
use sps_core::snapshot::Snapshot;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(snap) = Snapshot::parse(text) {
        let mut buf = Vec::new();
        snap.write(&mut buf).unwrap();
        let again = Snapshot::parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(again.field, snap.field);
    }
});
