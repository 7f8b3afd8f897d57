//! Regenerates the bundled 20-page, 5-model fixture.
//!
//! `cargo run --example synthetic_fixture [-- <dir>]`, by default into
//! `crates/core/fixtures/synthetic`.

use std::path::PathBuf;

use layout_ensemble::synthetic::{synthetic_corpus, SyntheticOptions};

fn main() -> layout_ensemble::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic"));
    let corpus = synthetic_corpus(&SyntheticOptions::default())?;
    corpus.write(&dir)?;
    println!(
        "{} pages, {} annotations, {} bundles written to {}",
        corpus.annotations.images().len(),
        corpus.annotations.annotations().len(),
        corpus.bundles.len(),
        dir.display()
    );
    Ok(())
}
