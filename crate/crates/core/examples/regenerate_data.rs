//! Rewrites the generated files under `data/`.

use std::fs::File;
use std::path::Path;

use countmap::data;
use countmap::io::write_population_csv;

fn main() -> countmap::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let grid = data::us_grid(data::HOURS)?;
    let adjacency = data::us_adjacency(true)?;

    write_population_csv(
        File::create(dir.join("population.csv"))?,
        &grid,
        &data::generate_population(&grid)?,
    )?;

    let mut w = csv::Writer::from_path(dir.join("misdeclare_counts.csv"))?;
    w.write_record(["declared", "actual", "count"])?;
    for (declared, actual, count) in data::generate_misdeclare_counts(&grid, &adjacency) {
        w.write_record([declared, actual, count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
