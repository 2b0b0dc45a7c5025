//! Writes the planted 370-district fixture plus side files and a config.
//!
//!     cargo run --example synthetic_fixture -- /tmp/geo [--full]
//!     cargo run --bin geoclass -- run-all --config /tmp/geo/config.ini
use geoclass::synthetic::{write_fixture, FixtureConfig};

fn main() -> geoclass::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| "fixture".into());
    let cfg = if args.next().as_deref() == Some("--full") {
        FixtureConfig::full_protocol(2020)
    } else {
        FixtureConfig::default()
    };
    let (files, planted) = write_fixture(dir.as_ref(), cfg.seed, &cfg)?;
    println!("{} districts written to {}", planted.labels.len(), files.dir.display());
    println!("config: {}", files.config.display());
    Ok(())
}
