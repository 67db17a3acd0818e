//! Throwaway growth calibration (not shipped).
use lengthscape::tumor::*;

fn radii(state: &SimState, c: f64) -> (f64, f64) {
    let mut rs: Vec<f64> = state
        .cells
        .iter()
        .filter(|cl| cl.alive)
        .map(|cl| ((cl.x - c).powi(2) + (cl.y - c).powi(2)).sqrt())
        .collect();
    rs.sort_by(f64::total_cmp);
    (rs[(rs.len() as f64 * 0.9) as usize], *rs.last().unwrap())
}

fn main() {
    for (uptake, thr, rate, adh) in [
        (0.05, 11.0, 5.4e-4, 0.4),
        (0.04, 12.0, 5.4e-4, 0.4),
        (0.05, 11.0, 5.4e-4, 1.2),
        (0.05, 12.0, 3.0e-4, 0.4),
    ] {
        let mut params = SimParams::default();
        params.cancer_o2_uptake = uptake;
        params.division_o2_threshold = thr;
        params.division_rate = rate;
        params.cancer_relative_adhesion = adh;
        let c = params.domain_size / 2.0;
        print!("u={uptake} thr={thr} rate={rate} adh={adh}:");
        let mut state = grow_tumor(&params, 0.0, 20220818).unwrap();
        for day in [3.0, 2.0, 2.0] {
            state.run(&params, day * 1440.0, DEFAULT_DT).unwrap();
            let (r90, rmax) = radii(&state, c);
            print!(
                " [{} cells r90={r90:.0} rmax={rmax:.0} edge={:.1} core={:.1}]",
                state.alive_count(),
                state.oxygen.at(c + r90, c),
                state.oxygen.at(c, c)
            );
        }
        println!();
    }
}
