//! Throwaway GA arm comparison probe (not shipped).
use lengthscape::ga::*;
use lengthscape::tumor::*;
use std::time::Instant;

fn main() {
    let mut p = SimParams::default();
    p.domain_size = 1000.0;
    p.injection_ring_inner = 240.0;
    p.injection_ring_outer = 320.0;
    let days = 0.1875;
    let tumor = grow_tumor(&p, 0.0, 7).unwrap();

    for seed in [101u64, 102, 103, 104] {
        let t0 = Instant::now();
        let fixed_cfg = GaConfig { seed, ..GaConfig::default() };
        let var_cfg = GaConfig { seed, p_add_type: 0.5, ..GaConfig::default() };
        let fixed = run_ga(&fixed_cfg, |t, s| {
            apply_treatment(&tumor, t, &p, days, s).unwrap() as f64
        }).unwrap();
        let var = run_ga(&var_cfg, |t, s| {
            apply_treatment(&tumor, t, &p, days, s).unwrap() as f64
        }).unwrap();
        let f0 = fixed.trace.generations[0].best_fitness;
        println!(
            "seed {seed}: init best {f0:.1} | fixed final {:.1} | add-1 final {:.1} (types {}) | var better: {} | {:.0?}",
            fixed.best.fitness, var.best.fitness, var.best.treatment.type_count(),
            var.best.fitness < fixed.best.fitness, t0.elapsed()
        );
    }
}
