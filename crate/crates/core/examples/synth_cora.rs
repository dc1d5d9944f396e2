//! Writes a Cora-sized synthetic citation graph as a Planetoid file pair.
//!
//! ```text
//! cargo run --release --example synth_cora -- <out_dir> [seed]
//! ```

use std::path::PathBuf;

use gatguard::graph_store::synthetic::{cora_like, generate};
use gatguard::graph_store::write_planetoid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().ok_or("usage: synth_cora <out_dir> [seed]")?);
    let seed: u64 = args.next().map_or(Ok(0), |s| s.parse())?;
    std::fs::create_dir_all(&dir)?;
    let ds = generate(&cora_like(), seed);
    write_planetoid(&ds, &dir.join("cora.content"), &dir.join("cora.cites"))?;
    println!(
        "{} nodes, {} edges written to {}",
        ds.n_nodes,
        ds.edges.len(),
        dir.display()
    );
    Ok(())
}
