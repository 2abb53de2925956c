//! The error recursion: contraction, fixed point, breakdown, noise floor.
//!
//! ```bash
//! cargo run -p rsir --example error_dynamics
//! ```

use rsir::dynamics::{breakdown_threshold, fixed_point, simulate, step, ErrorDynamicsParams};

fn main() {
    let clean = ErrorDynamicsParams {
        lambda: 0.5,
        rho: 0.5,
        p_tilde: 0.0,
        e0: 0.1,
        e_max: 1.0,
    };

    // Zero leakage: the error contracts to (1 - lambda) e0 / (1 - lambda rho).
    let sim = simulate(&clean, clean.e0, 40).unwrap();
    let limit = fixed_point(&clean).unwrap();
    println!("clean dynamics ({:?}, converged: {})", sim.trend, sim.converged);
    for (k, e) in sim.series.iter().enumerate().step_by(8) {
        println!("  k={k:<3} error={e:.9}");
    }
    println!("  closed-form limit = {limit:.9}");

    // The breakdown point: leakage above it makes the next step worse.
    let thr = breakdown_threshold(&clean, clean.e0).unwrap();
    println!("\nbreakdown threshold at e0: {thr:.6}");
    for p in [thr - 0.01, thr, thr + 0.01] {
        let params = ErrorDynamicsParams { p_tilde: p.max(0.0), ..clean };
        let next = step(&params, clean.e0);
        println!("  p_tilde={:.4} -> e1={next:.6} ({})", p.max(0.0), if next < clean.e0 {
            "improves"
        } else if next > clean.e0 {
            "degrades"
        } else {
            "stationary"
        });
    }

    // Nonzero leakage leaves an irreducible noise floor above the clean limit.
    println!("\nnoise floor:");
    for p_tilde in [0.0, 0.02, 0.05, 0.1] {
        let params = ErrorDynamicsParams { p_tilde, ..clean };
        let series = simulate(&params, clean.e0, 300).unwrap().series;
        println!("  p_tilde={p_tilde:<5} limit={:.6}", series.last().unwrap());
    }
}
