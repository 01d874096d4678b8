#![no_main]
use libfuzzer_sys::fuzz_target;
use urnfield::mc::ScanConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ScanConfig::from_json(text) {
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(
            ScanConfig::from_json(&json).expect("serialized config parses"),
            cfg
        );
    }
});
