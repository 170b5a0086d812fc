use rand::Rng;
use sssr_core::numeric;
use sssr_core::signal::{add_noise, synthesize, DiracStream, ModelKind, MultiChannelFrame};
use sssr_core::spectral::{cadzow_denoise_with_columns, decay_compensate, prony, SpectrumEstimate};
use sssr_harness::metrics::support_nmse;

fn support_via(sum: &[f64], k: usize, cols: usize, alpha: f64) -> Option<Vec<f64>> {
    let spec = SpectrumEstimate::from_samples(sum, k).ok()?;
    let spec = decay_compensate(&spec, alpha);
    let den = cadzow_denoise_with_columns(spec.coefficients(), k, cols, 500, 1e-10).ok()?;
    prony(&den.coeffs, k).ok()
}

fn main() {
    let alpha = 11.18;
    let kind = ModelKind::decaying(alpha).unwrap();
    let n = 121;
    let snr = 10.0;
    let trials = 100u64;
    let mut by_cols: Vec<(usize, Vec<f64>)> =
        [31usize, 41, 51, 61, 71, 81, 91].iter().map(|&c| (c, Vec::new())).collect();
    let mut individual = Vec::new();
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
        for (cols, errs) in &mut by_cols {
            if let Some(est) = support_via(&sum, 4, *cols, alpha) {
                errs.push(support_nmse(&est, &locations).unwrap());
            } else {
                errs.push(f64::INFINITY);
            }
        }
        let e1 = support_via(noisy.channel(0), 2, 61, alpha);
        let e2 = support_via(noisy.channel(1), 2, 61, alpha);
        if let (Some(a), Some(b)) = (e1, e2) {
            let mut u = a;
            u.extend(b);
            individual.push(support_nmse(&u, &locations).unwrap());
        } else {
            individual.push(f64::INFINITY);
        }
    }
    let med = |v: &mut Vec<f64>| -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let ind = med(&mut individual.clone());
    println!("individual (cols=61): {ind:.3e}");
    for (cols, errs) in &mut by_cols {
        let m = med(errs);
        println!("sum cols={cols}: {m:.3e} ratio {:.2}", m / ind);
    }
}
