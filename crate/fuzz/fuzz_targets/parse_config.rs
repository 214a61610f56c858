#![no_main]

use libfuzzer_sys::fuzz_target;
use netlayout_cli::config::{parse_config, Layered};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(map) = parse_config(text) else {
        return;
    };
    for (k, v) in &map {
        assert!(!k.is_empty());
        assert_eq!(k.trim(), k);
        assert_eq!(v.trim(), v);
    }
    let mut layered = Layered::new(map);
    let _ = layered.get::<f64>("theta", None);
    let _ = layered.switch("edges", false);
    let _ = layered.finish();
});
