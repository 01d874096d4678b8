#![no_main]
use libfuzzer_sys::fuzz_target;
use urnfield::ReinforcementSeq;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(seq) = ReinforcementSeq::from_json(text) {
        let back = ReinforcementSeq::from_json(&seq.to_json()).expect("serialized sequence parses");
        assert_eq!(back, seq);
        // evaluation must not panic on any accepted sequence
        for n in [0, 1, 2, 17, 1000, u64::MAX / 2] {
            let _ = seq.ln_eval(n);
        }
    }
});
