#![no_main]

use std::collections::BTreeMap;

use eilearn::data::{Dataset, KindOverride};
use libfuzzer_sys::fuzz_target;

// The loader must reject malformed CSV with an error, never a panic. The
// first input byte picks the label column and kind overrides so the
// override paths get fuzzed too.
fuzz_target!(|data: &[u8]| {
    let Some((&selector, csv)) = data.split_first() else {
        return;
    };
    let label = if selector & 1 == 0 { "class" } else { "y" };
    let mut overrides = BTreeMap::new();
    match selector & 6 {
        2 => {
            overrides.insert("a".to_owned(), KindOverride::Numeric);
        }
        4 => {
            overrides.insert("a".to_owned(), KindOverride::Categorical);
        }
        _ => {}
    }
    let _ = Dataset::from_csv_reader(csv, label, &overrides);
});
