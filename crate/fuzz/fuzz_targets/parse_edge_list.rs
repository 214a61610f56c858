#![no_main]

use libfuzzer_sys::fuzz_target;
use netlayout::graph::parse_edge_list;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok((g, _)) = parse_edge_list(text) else {
        return;
    };
    let degree_sum: usize = (0..g.node_count()).map(|i| g.degree(i)).sum();
    assert_eq!(degree_sum, 2 * g.edge_count());

    // Canonical output must parse back to the same number of edges.
    let (h, report) = parse_edge_list(&g.to_edge_list()).unwrap();
    assert_eq!(h.edge_count(), g.edge_count());
    assert_eq!(h.node_count(), g.node_count());
    assert_eq!(report.self_loops, 0);
});
