//! Regenerate the shipped configuration files from the built-in
//! profiles:
//!
//! ```sh
//! cargo run -p franson-core --example generate_configs
//! ```

use franson_core::config::{save_config, ExperimentConfig, Profile};
use std::path::Path;

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    std::fs::create_dir_all(&root).expect("create configs dir");
    for (name, profile) in [("desk", Profile::Desk), ("paper", Profile::Paper)] {
        let path = root.join(format!("{name}.json"));
        save_config(&ExperimentConfig::profile(profile), &path).expect("write config");
        println!("wrote {}", path.display());
    }
}
