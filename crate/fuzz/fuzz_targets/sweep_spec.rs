#![no_main]

use declim::config::Catalog;
use declim::explorer::SweepSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = SweepSpec::from_json(s) {
        let _ = spec.validate(&Catalog::builtin());
        let text = serde_json::to_string(&spec).expect("spec serializes");
        SweepSpec::from_json(&text).expect("serialized spec parses");
    }
});
