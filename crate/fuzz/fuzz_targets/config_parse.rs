#![no_main]

use libfuzzer_sys::fuzz_target;
use sps_cli::config::{ConfigFile, Key, Settings};

const KEYS: [Key; 3] = [
    Key { name: "c", default: "0.5", help: "" },
    Key { name: "n", default: "4096", help: "" },
    Key { name: "out", default: "out", help: "" },
];

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(file) = ConfigFile::parse(text) else { return };
    if let Ok(s) = Settings::resolve("fuzz", &KEYS, Some(&file), &[]) {
        let _ = s.f64("c");
        let _ = s.usize("n");
        let echo = ConfigFile::parse(&s.echo()).unwrap();
        assert_eq!(Settings::resolve("fuzz", &KEYS, Some(&echo), &[]).unwrap(), s);
    }
});
