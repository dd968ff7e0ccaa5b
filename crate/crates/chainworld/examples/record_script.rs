//! Regenerates `fixtures/toy_script.json` from the toy model.
//!
//! cargo run -p chainworld --example record_script

#[path = "../tests/support/toy_llm.rs"]
mod toy_llm;

use std::path::Path;

fn main() -> chainworld::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let tasks = chainworld::io::read_lines(&root.join("tasks.txt"))?;
    let script = toy_llm::record_script(&tasks);
    let out = root.join("toy_script.json");
    chainworld::io::write_json(&out, &script)?;
    println!("{} replies -> {}", script.len(), out.display());
    Ok(())
}
