#![no_main]
use clap::Parser;
use libfuzzer_sys::fuzz_target;
use urnfield_cli::Cli;

// Arguments are NUL-separated; only parsing is exercised, never execution.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let argv = std::iter::once("urnfield").chain(text.split('\0'));
    let _ = Cli::try_parse_from(argv);
});
