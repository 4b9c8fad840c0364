//! Writes a preset as a config file, parses it back, and shows how unknown
//! keys are rejected.

use ris_joint::harness::{parse_config, preset, preset_names, write_config};

fn main() -> ris_joint::Result<()> {
    println!("presets: {}", preset_names().join(", "));
    let cfg = preset("fig3")?.remove(0);
    let text = write_config(&cfg);
    println!("{text}");
    let back = parse_config(&text)?;
    println!("round trip identical: {}", back == cfg);

    let typo = text.replace("trials", "trails");
    match parse_config(&typo) {
        Ok(_) => println!("unexpectedly accepted"),
        Err(e) => println!("rejected: {e}"),
    }
    Ok(())
}
