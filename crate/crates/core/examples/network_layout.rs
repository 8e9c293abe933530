//! Build the 19-cell layout, drop users and look at the fading they see.

use mmimo::geometry::{build_layout, drop_users, Propagation};
use mmimo::pilots::allocate_pilots;
use mmimo::rng::substream;

fn main() -> mmimo::Result<()> {
    let layout = build_layout(500.0)?;
    for j in 0..layout.cell_count() {
        let p = layout.bs_position(j);
        println!("cell {j:2}  bs ({:8.1}, {:8.1})  neighbors {:?}", p.x, p.y, layout.neighbors(j));
    }

    let mut rng = substream(1, &[0]);
    let drop = drop_users(&layout, 10, &Propagation::default(), &mut rng)?;

    // serving gain vs strongest interfering cell, in dB
    for k in 0..3 {
        let u = drop.user_index(0, k);
        let serving = drop.serving_gain(u);
        let strongest = (1..layout.cell_count())
            .map(|j| drop.gain(j, u))
            .fold(0.0, f64::max);
        println!(
            "user {k} of cell 0: serving {:.1} dB, strongest other BS {:.1} dB",
            10.0 * serving.log10(),
            10.0 * strongest.log10()
        );
    }

    for beta in [1, 3, 4, 7] {
        let alloc = allocate_pilots(&layout, beta, 10)?;
        println!("beta {beta}: B = {:3}, groups {:?}", alloc.num_pilots(), alloc.cell_groups());
    }
    Ok(())
}
