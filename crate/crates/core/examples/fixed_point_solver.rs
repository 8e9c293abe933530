//! Normalized resolvent traces from the fixed-point solver against sampled
//! random matrices.

use mmimo::rmt::{
    normalized_trace, resolvent_trace_oracle, sandwich_trace_oracle, solve_resolvent, solve_resolvent_sandwich,
    Operator, ResolventInput, SolverOptions,
};

fn main() -> mmimo::Result<()> {
    let id = Operator::identity();
    for (m, b) in [(16, 8), (64, 32), (256, 128)] {
        let r: Vec<f64> = (0..b).map(|i| 0.2 + 1.8 * i as f64 / b as f64).collect();
        let input = ResolventInput::isotropic(m, &r, 1.0);
        let sol = solve_resolvent(&input, SolverOptions::default())?;
        let sw = solve_resolvent_sandwich(&input, &sol, &id)?;

        let q = resolvent_trace_oracle(&input, &id, 300, 1)?;
        let qq = sandwich_trace_oracle(&input, &id, &id, 300, 2)?;
        println!(
            "M={m:3} B={b:3}  tr(Q)/M: {:.5} vs {:.5} ± {:.5}   tr(QQ)/M: {:.5} vs {:.5} ± {:.5}  ({} iterations)",
            normalized_trace(&id, &sol.t, m),
            q.mean,
            q.stderr,
            normalized_trace(&id, &sw.t_prime, m),
            qq.mean,
            qq.stderr,
            sol.iterations
        );
    }
    Ok(())
}
