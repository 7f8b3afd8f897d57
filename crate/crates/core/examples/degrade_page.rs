//! Degrade one synthetic page with each effect in turn and with the mild
//! random pipeline, writing PNGs to a directory.
//!
//! `cargo run --example degrade_page [-- <out dir>]`

use std::path::PathBuf;

use layout_ensemble::degrade::{apply_pipeline_keyed, DegradationConfig, Effect};
use layout_ensemble::synthetic::{synthetic_corpus, SyntheticOptions};

fn main() -> layout_ensemble::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("layout-ensemble-degrade"));
    std::fs::create_dir_all(&out).map_err(|e| layout_ensemble::Error::Io { path: out.clone(), source: e })?;

    let corpus = synthetic_corpus(&SyntheticOptions { images: 1, ..Default::default() })?;
    let page = &corpus.pages[0];
    let save = |name: &str, img: &image::GrayImage| {
        let path = out.join(name);
        img.save(&path).map_err(|source| layout_ensemble::Error::Image { path, source })
    };
    save("page.png", page)?;

    for effect in DegradationConfig::default().effects {
        let cfg = DegradationConfig::always(3, vec![effect]);
        let done = apply_pipeline_keyed(page, &cfg, 1)?;
        let name = match effect {
            Effect::Blur { .. } => "blur",
            Effect::BleedThrough { .. } => "bleed_through",
            Effect::Salt { .. } => "salt",
            Effect::Pepper { .. } => "pepper",
            Effect::Open { .. } => "open",
            Effect::Close { .. } => "close",
        };
        save(&format!("{name}.png"), &done.image)?;
    }

    let mild = DegradationConfig { seed: 3, ..Default::default() };
    let done = apply_pipeline_keyed(page, &mild, 1)?;
    save("mild.png", &done.image)?;
    println!("mild pipeline applied {:?}", done.applied);
    println!("images in {}", out.display());
    Ok(())
}
