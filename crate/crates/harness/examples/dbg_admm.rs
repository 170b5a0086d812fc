use rand::Rng;
use sssr_core::numeric;
use sssr_core::signal::{add_noise, synthesize, DiracStream, ModelKind, MultiChannelFrame};
use sssr_core::spectral::estimate_support;
use sssr_harness::metrics::support_nmse;

fn main() {
    let alpha = 11.18;
    let kind = ModelKind::decaying(alpha).unwrap();
    let n = 121;
    let trials = 100u64;
    for snr in [10.0, 20.0, 30.0, 40.0] {
        let mut sum_err = Vec::new();
        let mut ind_err = Vec::new();
        for seed in 0..trials {
            let mut rng = numeric::rng_stream(seed, &[0x51]);
            let mut locations: Vec<f64> = Vec::new();
            while locations.len() < 4 {
                let t: f64 = rng.gen();
                let ok = locations.iter().all(|&u| {
                    let d: f64 = (t - u).abs();
                    d.min(1.0 - d) >= 0.02
                });
                if ok { locations.push(t); }
            }
            let w: Vec<f64> = (0..4).map(|_| 0.5 + 0.5 * rng.gen::<f64>()).collect();
            let s1 = DiracStream::new(locations[..2].to_vec(), w[..2].to_vec()).unwrap();
            let s2 = DiracStream::new(locations[2..].to_vec(), w[2..].to_vec()).unwrap();
            let x1 = synthesize(&s1, &kind, n).unwrap();
            let x2 = synthesize(&s2, &kind, n).unwrap();
            let frame = MultiChannelFrame::new(vec![x1, x2], kind, None).unwrap();
            let noisy = add_noise(&frame, snr, seed ^ 0x99);
            let sum: Vec<f64> = noisy.channel(0).iter().zip(noisy.channel(1)).map(|(a, b)| a + b).collect();
            if let Ok(est) = estimate_support(&sum, 4, &kind, 200, 1e-9) {
                sum_err.push(support_nmse(&est, &locations).unwrap());
            } else {
                sum_err.push(f64::INFINITY);
            }
            let e1 = estimate_support(noisy.channel(0), 2, &kind, 200, 1e-9);
            let e2 = estimate_support(noisy.channel(1), 2, &kind, 200, 1e-9);
            if let (Ok(a), Ok(b)) = (e1, e2) {
                let mut un = a;
                un.extend(b);
                ind_err.push(support_nmse(&un, &locations).unwrap());
            } else {
                ind_err.push(f64::INFINITY);
            }
        }
        let med = |v: &mut Vec<f64>| -> f64 {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v[v.len() / 2]
        };
        let s = med(&mut sum_err);
        let i = med(&mut ind_err);
        println!("snr={snr}: sum {s:.3e} ind {i:.3e} ratio {:.2}", s / i);
    }
}
