//! Regenerates the bundled toy parallel corpus.
//!
//! Usage: cargo run --example make_toy -- [OUT_DIR] [N] [SEED]

use std::fs;
use std::path::PathBuf;

fn main() -> std::io::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = PathBuf::from(args.first().map(String::as_str).unwrap_or("data/toy"));
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let pairs = ssmine::toy::generate(n, seed);
    fs::create_dir_all(&out)?;
    let join = |f: fn(&ssmine::toy::ToyPair) -> &str| pairs.iter().map(|p| format!("{}\n", f(p))).collect::<String>();
    fs::write(out.join("parallel.en"), join(|p| &p.l1))?;
    fs::write(out.join("parallel.lx"), join(|p| &p.l2))?;
    println!("wrote {} pairs to {}", pairs.len(), out.display());
    Ok(())
}
