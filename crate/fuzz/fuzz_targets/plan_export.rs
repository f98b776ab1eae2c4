#![no_main]

use libfuzzer_sys::fuzz_target;
use rades_core::planner::PlanExport;

fuzz_target!(|data: &[u8]| {
    if let Ok(plan) = PlanExport::from_json(data) {
        let again = PlanExport::from_json(plan.to_json().as_bytes()).expect("re-encoded plan parses");
        assert_eq!(plan, again);
        for tr in plan.trajectories() {
            let _ = tr.pose_at(tr.end_time() * 0.5);
        }
    }
});
