//! Rewrites the bundled traces under `traces/`.

use std::path::Path;

use vardram::dram::Geometry;
use vardram::trace::{bundled_traces, generate_synthetic, write_trace_file};

fn main() -> vardram::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("traces");
    std::fs::create_dir_all(&dir)?;
    for b in bundled_traces() {
        let t = generate_synthetic(b.kind, &b.params, &Geometry::default(), b.seed)?;
        write_trace_file(&dir.join(b.file), &t)?;
        println!("{}: {} requests", b.file, t.len());
    }
    Ok(())
}
