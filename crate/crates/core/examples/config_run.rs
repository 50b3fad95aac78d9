//! Parses a run configuration, applies an override, and writes a result
//! record the way the command-line tool does.

use anharmonic::config::{ConfigDocument, RunConfig};
use anharmonic::criteria::classify_phase;
use anharmonic::record::ResultRecord;

const TEXT: &str = "
[model]
m = 1
a = 1
b1 = 2
b2 = 0.25
J = 0.5
d = 3
beta = 1

[grid]
points = 2000
";

fn main() -> anharmonic::error::Result<()> {
    let mut doc = ConfigDocument::parse(TEXT)?;
    doc.set_assignment("model.J=0.4")?;
    let config = RunConfig::from_document(&doc)?;
    println!("canonical form:\n{}", config.to_text());

    let c = classify_phase(&config.model, &config.grid, &Default::default())?;
    let record = ResultRecord::new("classify", &config.digest(), None, serde_json::to_value(c.values).unwrap());
    println!("{}", record.to_line());
    Ok(())
}
