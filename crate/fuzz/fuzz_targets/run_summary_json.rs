//! Run-summary JSON documents: anything that parses must aggregate and
//! render without panicking.

#![no_main]

use libfuzzer_sys::fuzz_target;

use fieldgrasp::harness::{report_from_summaries, RunSummary};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(summary) = serde_json::from_str::<RunSummary>(text) else {
        return;
    };
    let report = report_from_summaries(vec![summary.clone(), summary]);
    let _ = report.render_text();
    let _ = serde_json::to_string(&report);
});
