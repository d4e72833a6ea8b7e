use sqlab_core::numtheory::{Constants, Landscape};
use sqlab_core::predictors::{self, PredictorSet};

#[test]
fn desk_scale_trends() {
    let mut saddle_dev = Vec::new();
    for x in [100_000u64, 1_000_000, 10_000_000, 100_000_000] {
        let land = Landscape::new(x).unwrap();
        let params = land.params(0.4, Constants::default_for(0.4).unwrap(), false).unwrap();
        let lx = (x as f64).ln();
        let jv = params.j;

        let j_rate = jv.j.ln() / (2.0 * lx * lx.ln()).sqrt();
        assert!((0.5..=1.5).contains(&j_rate), "x = {x}: log J rate {j_rate}");

        let u0 = params.u0;
        let ulogu = (jv.z0 as f64).ln() / (u0 * u0.ln());
        assert!((0.5..=2.0).contains(&ulogu), "x = {x}: log z0 / (u0 log u0) = {ulogu}");

        let q = land.table.prime(jv.z0) as f64;
        let u = lx / q.ln();
        let saddle = predictors::xi(u).unwrap().exp() * jv.z0 as f64 / q;
        if x >= 10_000_000 {
            assert!((saddle - 1.0).abs() <= 0.3, "x = {x}: e^xi z0 / q = {saddle}");
        }
        saddle_dev.push((saddle - 1.0).abs());

        let pred = PredictorSet::new(&land, params).unwrap();
        assert_eq!(pred.lambda(jv.z0), 1.0);
        assert!(params.z_minus <= jv.z0 && jv.z0 <= params.z_plus);
    }
    assert!(saddle_dev.windows(2).all(|w| w[1] < w[0]), "{saddle_dev:?}");
}
