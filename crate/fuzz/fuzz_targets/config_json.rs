#![no_main]

use declim::config::{Catalog, ConfigFile};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ConfigFile::from_json(s) {
        let again = ConfigFile::from_json(&cfg.to_json()).expect("serialized config parses");
        assert_eq!(cfg, again);
        let catalog = Catalog::from_config(&cfg);
        for name in catalog.chip_names() {
            catalog.chip(&name).expect("listed chip resolves");
        }
    }
});
