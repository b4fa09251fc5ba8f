//! Prints the entries each shipped operator family cannot reach from below.

use sga_core::recurrence::{minimal_seed_report, OperatorFile};
use sga_core::table::Kind;

fn main() -> sga_core::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10);
    let file = OperatorFile::builtin("sin-system")?;
    for kind in Kind::ALL {
        let seeds = minimal_seed_report(&file.system(kind)?, n)?;
        println!("{kind} (N = {n}): {} entries {:?}", seeds.len(), seeds);
    }
    Ok(())
}
