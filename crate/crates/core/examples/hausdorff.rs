//! The set-to-set distance used for classification.

use gmil::min_hausdorff;

fn main() -> gmil::Result<()> {
    let bag = [[0.0, 0.0], [3.0, 4.0], [10.0, 0.0]];
    let centers = [[3.0, 0.0]];
    println!("min distance {}", min_hausdorff(&bag, &centers)?);
    let empty: [[f64; 2]; 0] = [];
    println!("empty side: {:?}", min_hausdorff(&bag, &empty).err());
    Ok(())
}
