#![no_main]

use libfuzzer_sys::fuzz_target;
use rades_core::bench::ResultSet;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rs) = ResultSet::from_jsonl(text) {
        let again = ResultSet::from_jsonl(&rs.to_jsonl()).expect("re-encoded results parse");
        assert_eq!(rs.records.len(), again.records.len());
        let _ = rs.incomplete_cells();
        for inst in rs.instances() {
            for alg in rs.algorithms() {
                let _ = rs.final_costs(&inst, alg);
            }
        }
    }
});
