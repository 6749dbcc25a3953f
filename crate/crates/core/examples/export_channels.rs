//! Writes the sample channel files under `channels/`.
//!
//! cargo run -p dbc-core --example export_channels -- channels

use std::path::PathBuf;

use dbc_core::channel::{
    make_broadcast_bec, make_broadcast_bsc, make_broadcast_z, make_group_additive, make_multiplicative, GroupTable,
    MultTable,
};
use dbc_core::io::channel_to_json;
use dbc_core::symmetry::swap_symmetric_example;
use dbc_core::ProbVector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "channels".into()));
    std::fs::create_dir_all(&dir)?;
    let pv = |v: &[f64]| ProbVector::new(v.to_vec());
    let models = [
        ("bsc.json", make_broadcast_bsc(0.1, 0.2)?),
        ("z.json", make_broadcast_z(0.1, 0.4)?),
        ("bec.json", make_broadcast_bec(0.3, 0.5)?),
        ("z3_additive.json", make_group_additive(&GroupTable::cyclic(3), &pv(&[0.8, 0.15, 0.05])?, &pv(&[0.7, 0.2, 0.1])?)?),
        (
            "gf3_multiplicative.json",
            make_multiplicative(&MultTable::gf_prime(3)?, 0.1, 0.2, &pv(&[0.8, 0.2])?, &pv(&[0.7, 0.3])?)?,
        ),
        ("swap_symmetric.json", swap_symmetric_example()?),
    ];
    for (name, m) in models {
        let path = dir.join(name);
        std::fs::write(&path, channel_to_json(&m) + "\n")?;
        println!("{}", path.display());
    }
    Ok(())
}
