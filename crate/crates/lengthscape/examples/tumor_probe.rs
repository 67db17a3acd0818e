//! Throwaway calibration probe for the tumor analogue (not shipped).

use lengthscape::tumor::*;
use std::time::Instant;

fn o2_profile(state: &SimState, params: &SimParams) {
    let c = params.domain_size / 2.0;
    let mut line = String::new();
    for r in [0.0, 50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 350.0, 450.0, 600.0] {
        line.push_str(&format!("r{:.0}={:.1} ", r, state.oxygen.at(c + r, c)));
    }
    println!("    O2 profile: {line}");
}

fn radius_of(state: &SimState, params: &SimParams) -> f64 {
    let c = params.domain_size / 2.0;
    state
        .cells
        .iter()
        .filter(|cl| cl.alive)
        .map(|cl| ((cl.x - c).powi(2) + (cl.y - c).powi(2)).sqrt())
        .fold(0.0, f64::max)
}

fn main() {
    let params = SimParams::default();

    // Day-0 disc.
    let t0 = Instant::now();
    let day0 = grow_tumor(&params, 0.0, 20220818).unwrap();
    println!("day0: cells={} radius={:.0} ({:?})", day0.alive_count(), radius_of(&day0, &params), t0.elapsed());

    // Burn-in 12 h to see the oxygen profile.
    let mut burn = day0.clone();
    let t0 = Instant::now();
    burn.run(&params, 720.0, DEFAULT_DT).unwrap();
    println!(
        "после 12h: cells={} radius={:.0} wall={:?} per-step={:?}",
        burn.alive_count(),
        radius_of(&burn, &params),
        t0.elapsed(),
        t0.elapsed() / 7200
    );
    o2_profile(&burn, &params);

    // Full 7-day growth.
    let t0 = Instant::now();
    let grown = grow_tumor(&params, 7.0, 20220818).unwrap();
    println!(
        "day7: cells={} radius={:.0} wall={:?}",
        grown.alive_count(),
        radius_of(&grown, &params),
        t0.elapsed()
    );
    o2_profile(&grown, &params);

    // Treatment probe on the grown tumor: a strong design vs a weak one.
    let strong = Treatment::new(vec![NpDesign {
        attached_migration_bias: 0.9,
        unattached_migration_bias: 0.6,
        relative_adhesion: 0.0,
        relative_repulsion: 5.0,
        persistence_time: 5.0,
    }])
    .unwrap();
    let weak = Treatment::new(vec![NpDesign {
        attached_migration_bias: 0.05,
        unattached_migration_bias: 0.05,
        relative_adhesion: 8.0,
        relative_repulsion: 5.0,
        persistence_time: 0.5,
    }])
    .unwrap();

    for (name, tr) in [("strong", &strong), ("weak", &weak)] {
        let t0 = Instant::now();
        let mut state = grown.clone();
        state.reseed(7);
        state.inject(tr, &params).unwrap();
        let mut marks = Vec::new();
        for day in 1..=3 {
            state.run(&params, 1440.0, DEFAULT_DT).unwrap();
            marks.push(format!(
                "d{day}: alive={} dep={} carried={} waiting={} gone={}",
                state.alive_count(),
                state.cargo_in_state(CargoState::Deposited),
                state.cargo_in_state(CargoState::Carried),
                state.cargo_in_state(CargoState::Waiting),
                state.cargo_in_state(CargoState::Gone),
            ));
        }
        println!("treatment[{name}] wall={:?}", t0.elapsed());
        for m in &marks {
            println!("    {m}");
        }
    }
    let t0 = Instant::now();
    let base = run_baseline(&grown, &params, 3.0, 7).unwrap();
    println!("baseline 3d: alive={base} wall={:?}", t0.elapsed());

    // Null treatment: speed forced to zero must equal the baseline exactly.
    let mut p0 = params.clone();
    p0.worker_speed = 0.0;
    let null = apply_treatment(&grown, &strong, &p0, 3.0, 7).unwrap();
    let base0 = run_baseline(&grown, &p0, 3.0, 7).unwrap();
    println!("null treatment: {null} vs baseline {base0} (equal={})", null == base0);
}
