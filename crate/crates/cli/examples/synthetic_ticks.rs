//! Writes a synthetic trade file in the nine-column layout `9:1:2:3`.
//!
//! Usage: `cargo run --example synthetic_ticks -- COUNT SEED > ticks.tsv`

use std::io::{self, BufWriter, Write};

use execflow::synthetic::RandomWalk;

fn main() -> io::Result<()> {
    let mut args = std::env::args().skip(1);
    let count = args.next().and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let out = io::stdout().lock();
    write_ticks(&mut BufWriter::new(out), count, seed)
}

fn write_ticks<W: Write>(out: &mut W, count: usize, seed: u64) -> io::Result<()> {
    let walk = RandomWalk { seed, count, start_ns: 34_200_000_000_000, mean_gap_s: 0.5, burst_prob: 0.03, ..Default::default() };
    for (k, t) in walk.generate().iter().enumerate() {
        writeln!(out, "{k}\t{}\t{:.4}\t{}\tP\tSYN\t0\t0\t0", t.t, t.price, t.shares)?;
    }
    out.flush()
}
