//! Scenario JSON documents: anything that parses and validates must survive
//! a serialize/parse round trip unchanged.

#![no_main]

use libfuzzer_sys::fuzz_target;

use fieldgrasp::harness::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = ScenarioConfig::from_json_str(text) else {
        return;
    };
    let json = cfg
        .to_json_string()
        .expect("validated config must serialize");
    let back = ScenarioConfig::from_json_str(&json).expect("round trip must parse");
    assert_eq!(cfg, back, "round trip must preserve the config");
});
