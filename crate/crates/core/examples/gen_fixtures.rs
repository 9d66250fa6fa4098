//! Regenerates the simulated CSV fixtures under `data/`.

use std::fs::File;
use std::path::Path;

use bayesics::data::write_csv_to;
use bayesics::fixtures::{negbin_dataset, quadratic_dataset, FIXTURE_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    write_csv_to(&negbin_dataset(FIXTURE_SEED), File::create(dir.join("negbin.csv"))?)?;
    write_csv_to(&quadratic_dataset(FIXTURE_SEED), File::create(dir.join("quadratic.csv"))?)?;
    println!("wrote negbin.csv and quadratic.csv to {}", dir.display());
    Ok(())
}
