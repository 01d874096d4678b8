#![no_main]
use libfuzzer_sys::fuzz_target;
use urnfield::mc::EnsembleConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = EnsembleConfig::from_json(text) {
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(
            EnsembleConfig::from_json(&json).expect("serialized config parses"),
            cfg
        );
        let _ = cfg.window();
        let _ = cfg.record_every();
    }
});
