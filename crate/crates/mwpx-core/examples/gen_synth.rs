//! Write the bundled synthetic corpus as JSONL.
//! Usage: gen_synth [path] [n] [seed]

use mwpx_core::corpus::write_jsonl;
use mwpx_core::synth::generate_corpus;

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "data/synth.jsonl".to_string());
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(500);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);

    let corpus = generate_corpus(n, seed);
    if let Some(parent) = std::path::Path::new(&path).parent() {
        std::fs::create_dir_all(parent).expect("create output directory");
    }
    let file = std::fs::File::create(&path).expect("create output file");
    write_jsonl(std::io::BufWriter::new(file), &corpus).expect("write corpus");
    println!("wrote {n} problems (seed {seed}) to {path}");
}
