// Scratch probe: convergence epochs and timing of one candidate evaluation.
use std::time::Instant;

use quartet::forge::{evaluate_candidate, QuartetHyper};
use quartet::learners::{fit_network, Model, NetworkParams};
use quartet::synth::{generate, GenConfig};

fn main() {
    let cfg = GenConfig::default();
    let (train, _) = generate(&cfg).unwrap();
    for seed in [1u64, 2, 3] {
        for init in 0..3u64 {
            let t0 = Instant::now();
            let m = fit_network(
                &train,
                &NetworkParams { max_epochs: 40_000, init_index: init, ..Default::default() },
                seed,
            )
            .unwrap();
            if let Model::Network(f) = &m {
                println!(
                    "seed={seed} init={init} epochs={} converged={} max_grad={:.4} dt={:.2}s",
                    f.epochs_run,
                    f.converged,
                    f.final_max_grad,
                    t0.elapsed().as_secs_f64()
                );
            }
        }
    }
    let t0 = Instant::now();
    let hyper = QuartetHyper {
        network: NetworkParams { max_epochs: 40_000, ..Default::default() },
        ..Default::default()
    };
    let run = evaluate_candidate(&cfg, 1, &hyper, false).unwrap();
    println!(
        "candidate: dt={:.2}s spread={:.4} valid={} r2={:?}",
        t0.elapsed().as_secs_f64(),
        run.spread,
        run.valid,
        run.perf.models.iter().map(|(l, m)| format!("{l}={:.4}", m.r2)).collect::<Vec<_>>()
    );
}
