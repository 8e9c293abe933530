//! Estimate channels from pilots and compare with the truth.

use mmimo::estimation::{build_estimate_set, estimate_all, estimator_coefficients, sample_channels};
use mmimo::geometry::{build_layout, drop_users, Propagation};
use mmimo::pilots::{allocate_pilots, channel_inversion_power, dft_pilot_book};
use mmimo::rng::substream;

fn main() -> mmimo::Result<()> {
    let (m, k, beta, sigma2) = (64, 4, 3, 1.0);
    let layout = build_layout(500.0)?;
    let mut rng = substream(7, &[0]);
    let drop = drop_users(&layout, k, &Propagation::default(), &mut rng)?;
    let alloc = allocate_pilots(&layout, beta, k)?;
    let powers = channel_inversion_power(&drop, 1.0)?;
    let book = dft_pilot_book(alloc.num_pilots())?;
    let state = estimator_coefficients(&alloc, &powers, &drop, sigma2)?;

    let channels = sample_channels(&drop, m, &mut rng)?;
    let dirs = estimate_all(&channels, &alloc, &book, &powers, &state, &mut rng)?;
    let est = build_estimate_set(dirs, &alloc, &powers, &drop, &state)?;

    // variances are in absolute path-loss units, hence the exponents
    println!("user  pilot    est var    err var  measured err/M");
    for kk in 0..k {
        let u = drop.user_index(0, kk);
        let err = (channels.channel(0, u) - est.estimate(0, u)).norm_squared() / m as f64;
        println!(
            "{kk:4}  {:5}  {:9.3e}  {:9.3e}  {err:14.3e}",
            alloc.pilot_of(u),
            est.est_cov(0, u),
            est.err_cov(0, u)
        );
    }

    // users sharing a pilot have parallel estimates
    let b = alloc.pilot_of(0);
    let same: Vec<usize> = alloc.users_on(b).to_vec();
    let (a, c) = (est.estimate(0, same[0]), est.estimate(0, same[1]));
    let cos2 = a.dotc(&c).norm_sqr() / (a.norm_squared() * c.norm_squared());
    println!("pilot {b} is shared by {} users; |cos|^2 between two of them = {cos2:.12}", same.len());
    Ok(())
}
