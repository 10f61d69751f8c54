//! Runs selected acceptance criteria (all by default), e.g.
//! `cargo run --release --example acceptance_criteria -- 1 4 7`.

use twosided::verify::{self, VerifyOptions};

fn main() {
    let ids: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let opts = VerifyOptions::default();
    let results: Vec<_> = if ids.is_empty() {
        verify::run_all(&opts)
    } else {
        ids.iter().filter_map(|&id| verify::run_check(id, &opts)).collect()
    };
    print!("{}", verify::render_table(&results));
}
