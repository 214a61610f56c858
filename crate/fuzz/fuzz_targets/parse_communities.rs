#![no_main]

use libfuzzer_sys::fuzz_target;
use netlayout::io::{parse_communities, write_communities};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(rows) = parse_communities(text) else {
        return;
    };
    let (labels, paths): (Vec<String>, Vec<Vec<usize>>) = rows.iter().cloned().unzip();
    assert_eq!(
        parse_communities(&write_communities(&labels, &paths)).unwrap(),
        rows
    );
});
