//! Regenerates the shipped toy data under `data/` from the fixtures.
//! Usage: cargo run -p wyckdiff --example write_toy -- <repo>/data

use std::path::PathBuf;

use wyckdiff::io::{to_json_compact, write_crystal, LatticeSpec};
use wyckdiff::spacegroup::SpaceGroupTable;
use wyckdiff::toy;

fn main() -> wyckdiff::Result<()> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    let groups = SpaceGroupTable::builtin();
    let sets = [("train", toy::cubic_training_set()), ("templates", toy::template_set()), ("test", toy::csp_test_set())];
    for (dir, set) in sets {
        let dir = root.join("toy").join(dir);
        std::fs::create_dir_all(&dir).map_err(wyckdiff::error::io_error(&dir))?;
        for (name, c) in set {
            write_crystal(&dir.join(format!("{name}.json")), &c, groups)?;
        }
    }
    let fixtures = root.join("fixtures");
    std::fs::create_dir_all(&fixtures).map_err(wyckdiff::error::io_error(&fixtures))?;
    write_crystal(&fixtures.join("close_pair.json"), &toy::close_pair(), groups)?;
    let beta = 104.5f64.to_radians();
    let mono = [[5.1, 0.0, 0.0], [0.0, 6.3, 0.0], [7.2 * beta.cos(), 0.0, 7.2 * beta.sin()]];
    let lattices = [
        ("identity", [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]),
        ("cubic_4.2", [[4.2, 0.0, 0.0], [0.0, 4.2, 0.0], [0.0, 0.0, 4.2]]),
        ("monoclinic", mono),
    ];
    for (name, v) in lattices {
        let path = fixtures.join(format!("{name}.lattice.json"));
        let text = to_json_compact(&LatticeSpec::Vectors(v))?;
        std::fs::write(&path, text).map_err(wyckdiff::error::io_error(&path))?;
    }
    Ok(())
}
