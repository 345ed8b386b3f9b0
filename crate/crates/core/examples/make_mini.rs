//! Regenerates the bundled mini-corpus: `cargo run -p orthobench-core --example make_mini -- data/mini`

use std::path::PathBuf;

fn main() {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| PathBuf::from("data/mini"), PathBuf::from);
    if let Err(e) = orthobench::synth::write_mini_corpus(&dir, orthobench::synth::MINI_SEED) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
    println!("wrote mini-corpus to {}", dir.display());
}
