#![no_main]

use libfuzzer_sys::fuzz_target;
use netlayout::io::{parse_layout, write_layout};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(layout) = parse_layout(text) else {
        return;
    };
    assert_eq!(layout.labels.len(), layout.coords.len());
    let written = match layout.dim {
        2 => write_layout(&layout.labels, &layout.points::<2>().unwrap()),
        3 => write_layout(&layout.labels, &layout.points::<3>().unwrap()),
        _ => return,
    };
    assert_eq!(parse_layout(&written).unwrap(), layout);
});
