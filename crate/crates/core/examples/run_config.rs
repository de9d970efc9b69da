//! Loads a preset, applies overrides, validates, and prints the effective
//! TOML with its hash (the hash goes into every run summary).
//!
//!     cargo run --example run_config -- [PRESET.toml]

use adversarial_traffic::config::RunConfig;
use adversarial_traffic::hardening::Method;

fn main() {
    let mut cfg = match std::env::args().nth(1) {
        Some(path) => RunConfig::load(path.as_ref()).unwrap_or_else(|e| {
            eprintln!("{e}");
            std::process::exit(3);
        }),
        None => RunConfig::default(),
    };
    cfg.seed = 42;
    cfg.cycles.method = Method::PrioritizedPool;
    cfg.validate().unwrap();
    print!("{}", cfg.to_toml_string());
    println!("# config hash {}", cfg.hash());

    let bad = RunConfig::from_toml_str("[dqn]\ngamma = 1.5\n");
    println!("# rejected: {}", bad.unwrap_err());
}
