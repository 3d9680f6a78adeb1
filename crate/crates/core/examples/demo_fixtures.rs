//! Regenerates the demo fixtures: `cargo run -p selfcheck-core --example demo_fixtures -- fixtures`

#[path = "../tests/support/demo.rs"]
mod demo;

fn main() -> std::io::Result<()> {
    let dir =
        std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("rodrigo.fixture.json"), demo::rodrigo().to_json())?;
    std::fs::write(
        dir.join("featherstone.fixture.json"),
        demo::featherstone().to_json(),
    )?;
    Ok(())
}
