#![no_main]

use clap::Parser;
use eilearn_cli::{parse_flags_text, Cli};
use libfuzzer_sys::fuzz_target;

// Flag-file tokenization plus the full CLI grammar: arbitrary flag files
// must parse into tokens and then either a valid command or a clap error,
// never a panic.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let mut argv = vec!["eilearn".to_owned(), "run".to_owned()];
    argv.extend(parse_flags_text(text));
    let _ = Cli::try_parse_from(argv);
});
