//! Every stage on the synthetic fixture, then the same stages one at a time
//! into a second directory; outputs match byte for byte.
use geoclass::config::PipelineConfig;
use geoclass::pipeline::{run_all, run_stages, Stage};
use geoclass::synthetic::{write_fixture, FixtureConfig};

fn main() -> geoclass::error::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let fixture = FixtureConfig { k: None, ..FixtureConfig::default() };
    let (files, _) = write_fixture(dir.path(), 2020, &fixture)?;

    let mut cfg = PipelineConfig::load(&files.config)?;
    cfg.out_dir = dir.path().join("all");
    let all = run_all(&cfg)?;
    for s in &all.stages {
        println!("{:<18} {:>6.2}s  {}", s.stage, s.seconds, s.outputs.join(", "));
    }

    cfg.out_dir = dir.path().join("staged");
    let mut staged = None;
    for stage in Stage::ALL {
        staged = Some(run_stages(&cfg, &[stage], false)?);
    }
    let staged = staged.unwrap();
    assert_eq!(all.outputs, staged.outputs);
    println!("{} output files identical between run-all and stage-by-stage", all.outputs.len());
    Ok(())
}
