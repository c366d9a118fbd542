use hybeam::channel::sample_realization;
use hybeam::linalg::hermitian_eigenvalues;
use hybeam::model::{transmit_power, weighted_sum_rate, SystemConfig};
use hybeam::optimizer::{digital_step, init_digital, init_rf, project_modulus, rf_step, OptimizerOptions};
use hybeam::seed::substream;
use hybeam::Complex64;

fn min_eig_omega(dig: &hybeam::model::DigitalDesign) -> f64 {
    dig.omega.iter().map(|o| hermitian_eigenvalues(o)[0]).fold(f64::INFINITY, f64::min)
}

fn main() {
    let cfg = SystemConfig::homogeneous(2, 3, 4, 2, 5.0, 4.0);
    let opts = OptimizerOptions::default();
    let h = sample_realization(&cfg, 25, 0).unwrap();
    let mut rng = substream(26, &[0]);

    let mut rf = init_rf(&cfg, &mut rng);
    let mut dig = init_digital(&rf, &h, &cfg).unwrap();
    let (d, _) = digital_step(&rf, &dig, &h, &cfg, &opts).unwrap();
    dig = d;
    eprintln!("digital0 done: rate={:.6}", weighted_sum_rate(&rf, &dig, &h, &cfg).unwrap());

    for round in 1..=20 {
        let (relaxed, _) = rf_step(&dig, &rf, &h, &cfg, &opts).unwrap();
        rf = project_modulus(&relaxed);
        // rescale_for_power replica
        let mut s_sq: f64 = 1.0;
        for i in 0..cfg.n_rrhs {
            let p = transmit_power(i, &rf, &dig, &cfg).unwrap();
            if p > 0.0 { s_sq = s_sq.min(0.9 * cfg.power[i] / p); }
        }
        if s_sq < 1.0 {
            let s = Complex64::new(s_sq.sqrt(), 0.0);
            for v in &mut dig.beamformers { *v *= s; }
            for o in &mut dig.omega { *o *= Complex64::new(s_sq, 0.0); }
        }
        eprintln!("round {round}: after rescale s_sq={s_sq:.4} min_eig={:.3e}", min_eig_omega(&dig));
        match digital_step(&rf, &dig, &h, &cfg, &opts) {
            Ok((d, tr)) => {
                dig = d;
                eprintln!("round {round}: dig iters={} min_eig={:.3e} rate={:.6}",
                    tr.surrogate.len(), min_eig_omega(&dig), weighted_sum_rate(&rf, &dig, &h, &cfg).unwrap());
            }
            Err(e) => {
                eprintln!("round {round}: digital_step ERR: {e}  min_eig_before={:.3e}", min_eig_omega(&dig));
                return;
            }
        }
    }
}
