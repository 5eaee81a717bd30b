//! Regenerates the shipped scenario configs from their builders:
//!
//! ```text
//! cargo run -p fieldgrasp --example generate_configs -- configs/
//! ```
//!
//! A test compares the files against the builders byte for byte, so run
//! this after changing any builder.

use std::fs;
use std::path::PathBuf;

use fieldgrasp::harness::ScenarioConfig;

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .expect("usage: generate_configs <dir>");
    fs::create_dir_all(&dir).expect("create config dir");

    let configs = [
        ("default.json", ScenarioConfig::default_lab()),
        ("degenerate.json", ScenarioConfig::degenerate_start()),
        ("repeatability.json", ScenarioConfig::repeatability(5.0e-7)),
        ("return_conductor.json", ScenarioConfig::return_conductor()),
    ];
    for (name, cfg) in configs {
        let path = dir.join(name);
        fs::write(&path, cfg.to_json_string().expect("encode")).expect("write config");
        println!("wrote {}", path.display());
    }
}
