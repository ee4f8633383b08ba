use minit::dynamics::{LorenzModel, MackeyGlassModel, SystemModel};
use minit::observation::{add_noise, generate_series, NoiseDistribution, ObservationOperator};
use minit::pipeline::{initialize, PipelineConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

fn main() {
    let op = ObservationOperator::CubeSum;
    let budget: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(50_000);

    println!("== Lorenz T=50 m=2, budget {budget} ==");
    let model = LorenzModel::default();
    for noisy_case in [false, true] {
        let start = Instant::now();
        let mut iters = Vec::new();
        let mut costs = Vec::new();
        let mut refined = 0;
        for seed in 0..8u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(300 + seed);
            let x0 = model.sample_attractor(&mut rng, 5000).unwrap();
            let series = generate_series(&model, op, &x0, 50, 2).unwrap();
            let series = if noisy_case {
                add_noise(&series, 0.3, NoiseDistribution::Gaussian, &mut rng).unwrap()
            } else {
                series
            };
            let mut cfg = PipelineConfig::lorenz_defaults();
            if !noisy_case { cfg.q = 0; }
            cfg.seed = seed;
            cfg.refine_budget = budget;
            
            cfg.patience = 2000;
            let res = initialize(&model, op, &series, &cfg).unwrap();
            iters.push(res.refine_trace.iterations_used);
            costs.push(res.cost_assimilated);
            refined += res.flags.refined as u32;
        }
        println!(
            "  noisy={noisy_case}: refined {refined}/8, iters {:?}, final J {:?} ({:.1?})",
            iters,
            costs.iter().map(|c| format!("{c:.2e}")).collect::<Vec<_>>(),
            start.elapsed()
        );
    }

    println!("== Mackey-Glass T=25 m=2, budget {budget} ==");
    let mg = MackeyGlassModel::default();
    for noisy_case in [false, true] {
        let start = Instant::now();
        let mut iters = Vec::new();
        let mut costs = Vec::new();
        let mut refined = 0;
        for seed in 0..4u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(400 + seed);
            let x0 = mg.sample_attractor(&mut rng, 5000).unwrap();
            let series = generate_series(&mg, op, &x0, 25, 2).unwrap();
            let series = if noisy_case {
                add_noise(&series, 0.3, NoiseDistribution::Gaussian, &mut rng).unwrap()
            } else {
                series
            };
            let mut cfg = PipelineConfig::mackey_glass_defaults();
            if !noisy_case { cfg.q = 0; }
            cfg.seed = seed;
            cfg.refine_budget = budget;
            
            cfg.patience = 2000;
            let res = initialize(&mg, op, &series, &cfg).unwrap();
            iters.push(res.refine_trace.iterations_used);
            costs.push(res.cost_assimilated);
            refined += res.flags.refined as u32;
        }
        println!(
            "  noisy={noisy_case}: refined {refined}/4, iters {:?}, final J {:?} ({:.1?})",
            iters,
            costs.iter().map(|c| format!("{c:.2e}")).collect::<Vec<_>>(),
            start.elapsed()
        );
    }
}
