//! Walk the backbone registry and the head parameter-count formula.
//!
//! ```bash
//! cargo run --example registry_tour
//! ```

use cxrbench::model_zoo::{head_param_count, registry, registry_lookup, registry_tsv};

fn main() -> cxrbench::Result<()> {
    print!("{}", registry_tsv());
    println!();

    let d169 = registry_lookup("DenseNet169")?;
    println!(
        "DenseNet169: {0}x{0} input, last conv {1}x{2}x{3}",
        d169.input_resolution, d169.last_conv.height, d169.last_conv.width, d169.last_conv.channels
    );
    println!(
        "head parameters on {} channels: {}",
        d169.last_conv.channels,
        head_param_count(d169.last_conv.channels)?
    );

    let widest = registry()
        .iter()
        .max_by_key(|s| s.last_conv.channels)
        .expect("registry is never empty");
    println!(
        "widest feature map: {} with {} channels -> head parameters {}",
        widest.name,
        widest.last_conv.channels,
        head_param_count(widest.last_conv.channels)?
    );

    match registry_lookup("resnet9000") {
        Err(e) => println!("unknown name reports: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
