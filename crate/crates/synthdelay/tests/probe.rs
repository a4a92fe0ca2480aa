//! Throwaway diagnostics; deleted before release.

use std::collections::BTreeMap;

use ndarray::Array2;
use synthdelay::discriminator::{gradient_check, DiscriminatorConfig, LabeledSet};
use synthdelay::matrix::HOURS;
use synthdelay::propagation::{
    gc_matrix, gc_test, shuffle_surrogate, ConcatMode, GcConfig, SeriesKind,
};
use synthdelay::refinery::{assemble, RefineryConfig};
use synthdelay::rng::{derive_seed, Stream};
use synthdelay::sampler::SamplerConfig;
use synthdelay::stats;
use synthdelay::toy;

fn gc_cfg() -> GcConfig {
    GcConfig {
        max_lag: 3,
        concat_mode: ConcatMode::PerDayPooled,
        rng_seed: 0,
        select_lag_bic: false,
        first_difference: false,
    }
}

#[test]
fn probe_gradient_kernels_and_seeds() {
    for kernel in [3usize, 5] {
        for seed in 0..6u64 {
            let mut rng = Stream::derived(0xC8 + seed, &[0]);
            let mut draw = |rows: usize| {
                let mut m = Array2::zeros((rows, HOURS));
                for v in m.iter_mut() {
                    *v = rng.normal_scaled(5.0, 3.0);
                }
                m
            };
            let (synth, real) = (draw(10), draw(10));
            let data = LabeledSet::from_classes(synth.view(), real.view()).unwrap();
            let cfg = DiscriminatorConfig {
                filters: 4,
                kernel_size: kernel,
                l2_rate: 1e-3,
                batch_size: 8,
                rng_seed: 0xC8A + seed,
                ..Default::default()
            };
            let check = gradient_check(&data, &cfg, 1e-5).unwrap();
            println!(
                "kernel {kernel} seed {seed}: worst rel err {:.3e} (checked {}, skipped {})",
                check.worst_rel_err, check.checked, check.skipped
            );
        }
    }
}

#[test]
fn probe_family_null_calibration() {
    let cfg = gc_cfg();
    // cross pairs from two independent chains: real and synthetic
    let mut ps_real: Vec<f64> = Vec::new();
    let mut ps_syn: Vec<f64> = Vec::new();
    for trial in 0..300u64 {
        let (s1, _d1) = toy::propagation_pair(60, 0.9, derive_seed(0xAC, &[trial, 0]));
        let (_s2, d2) = toy::propagation_pair(60, 0.9, derive_seed(0xAC, &[trial, 1]));
        let t = gc_test(s1.values.view(), d2.values.view(), &cfg).unwrap();
        ps_real.push(t.p_value);

        let syn = |m: &synthdelay::DelayMatrix, i: u64| {
            let skip = RefineryConfig {
                skip_refinement: true,
                rng_seed: derive_seed(0xAC, &[7, trial, i]),
                ..Default::default()
            };
            assemble(m, &SamplerConfig::default(), &skip).unwrap().values
        };
        let (sa, sb) = (syn(&s1, 0), syn(&d2, 1));
        let t2 = gc_test(sa.view(), sb.view(), &cfg).unwrap();
        ps_syn.push(t2.p_value);
    }
    for (label, ps) in [("real", &ps_real), ("synthetic", &ps_syn)] {
        let ks_u = stats::ks_uniform(ps);
        let mut sorted = ps.clone();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let frac_lt = |q: f64| sorted.iter().filter(|&&p| p < q).count() as f64 / 300.0;
        println!(
            "{label} cross-pair null: KS-vs-U {ks_u:.4} (crit 5% {:.4}); P(p<0.05)={:.3} median={:.3}",
            stats::ks_one_sample_critical(0.05, 300),
            frac_lt(0.05),
            sorted[150]
        );
    }
}

#[test]
fn probe_gc_family_design() {
    let cfg = gc_cfg();
    for master in [0xC7u64, 0xD7, 0xE7, 0xF7, 0x17] {
        let (s1, d1) = toy::propagation_pair(60, 0.9, master ^ 0x71);
        let (s2, d2) = toy::propagation_pair(60, 0.9, master ^ 0x72);
        let family: Vec<(&str, &synthdelay::DelayMatrix)> =
            vec![("AAA", &s1), ("AAB", &d1), ("BBA", &s2), ("BBB", &d2)];
        let mut ps_syn: Vec<f64> = Vec::new();
        let mut ps_shuf: Vec<f64> = Vec::new();
        for k in 0..25u64 {
            let mut syn_map = BTreeMap::new();
            for (i, (code, m)) in family.iter().enumerate() {
                let skip = RefineryConfig {
                    skip_refinement: true,
                    rng_seed: derive_seed(master, &[7, k, i as u64]),
                    ..Default::default()
                };
                let ds = assemble(m, &SamplerConfig::default(), &skip).unwrap();
                syn_map.insert(code.to_string(), ds.values);
            }
            for res in gc_matrix(&syn_map, &cfg, SeriesKind::Synthetic).unwrap() {
                ps_syn.push(res.p_value);
            }
            let mut srng = Stream::derived(master, &[6, k]);
            let shuf_map: BTreeMap<String, Array2<f64>> = family
                .iter()
                .map(|(code, m)| {
                    (code.to_string(), shuffle_surrogate(m.values.view(), &mut srng))
                })
                .collect();
            for res in gc_matrix(&shuf_map, &cfg, SeriesKind::Shuffled).unwrap() {
                ps_shuf.push(res.p_value);
            }
        }
        let n = ps_syn.len();
        let stat = stats::ks_two_sample(&ps_syn, &ps_shuf);
        let crit = stats::ks_two_sample_critical(0.01, n, n);
        println!(
            "master {master:#x} n={n}: KS {stat:.4} crit {crit:.4} {}",
            if stat < crit { "ok" } else { "OVER" }
        );
    }
}

#[test]
fn probe_gc_detection_strength() {
    let cfg = gc_cfg();
    for seed in [0xC7Bu64, 0xD7B, 0xE7B] {
        let (src, dst) = toy::propagation_pair(60, 0.9, seed);
        let fwd = gc_test(src.values.view(), dst.values.view(), &cfg).unwrap();
        let rev = gc_test(dst.values.view(), src.values.view(), &cfg).unwrap();
        println!(
            "seed {seed:#x}: coupled fwd p = {:.3e}, reverse p = {:.3}",
            fwd.p_value, rev.p_value
        );
    }
}
