#![no_main]

use declim::report::{render, Format, RenderTarget, Table};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(table) = Table::from_json(s) {
        for format in [Format::Markdown, Format::Csv, Format::Json] {
            let _ = render(&table, &RenderTarget::new(format));
        }
    }
});
