use num_complex::Complex;
use proptest::prelude::*;

use wpt_core::channel::{
    freq_response, propagate_samples, propagate_tones, DelayPolicy, Tap, TapDelayChannel,
};
use wpt_core::optimizer::{
    dc_through, nonadaptive_weights, oracle_optimal_weights, smf_weights, SmfParams,
};
use wpt_core::rectenna::{fourth_moment, second_moment, time_domain_dc_oracle, RectennaModel};
use wpt_core::signal::{
    average_power, papr, synthesize_multisine, synthesize_tones, MultisineWeights, ToneGrid,
};

type C = Complex<f64>;

fn grid(n: usize) -> ToneGrid<f64> {
    ToneGrid::new(2.4e9, n, 1.25e6, 10e6).unwrap()
}

fn sample_rate(g: &ToneGrid<f64>) -> f64 {
    8.0 * g.span().max(g.tone_spacing())
}

fn complex() -> impl Strategy<Value = C> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| C::new(re, im))
}

fn tones(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<C>> {
    n.prop_flat_map(|n| prop::collection::vec(complex(), n))
}

fn channel() -> impl Strategy<Value = TapDelayChannel<f64>> {
    prop::collection::vec((complex(), 1usize..12), 1..5).prop_map(|taps| {
        let mut delay = 0usize;
        let taps = taps
            .into_iter()
            .enumerate()
            .map(|(i, (gain, step))| {
                if i > 0 {
                    delay += step;
                }
                // Multiples of 12.5 ns: on the grid at 80 MHz.
                Tap { delay: delay as f64 * 12.5e-9, gain }
            })
            .collect();
        TapDelayChannel::new(taps).unwrap()
    })
}

fn weights(w: Vec<C>) -> MultisineWeights<f64> {
    MultisineWeights::new(grid(w.len()), w, 100.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn full_period_average_equals_tone_power(w in tones(1..=8)) {
        let w = weights(w);
        let g = w.grid().clone();
        let sig = synthesize_multisine(&w, g.period(), sample_rate(&g)).unwrap();
        let p = average_power(&w);
        prop_assume!(p > 1e-6);
        prop_assert!((sig.mean_power().unwrap() / p - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn common_rotation_keeps_power_and_papr(w in tones(1..=8), turn in 0.0..1.0f64) {
        let w = weights(w);
        prop_assume!(average_power(&w) > 1e-6);
        let rot = w.rotated(C::from_polar(1.0, std::f64::consts::TAU * turn)).unwrap();
        let g = w.grid().clone();
        let a = synthesize_multisine(&w, g.period(), sample_rate(&g)).unwrap();
        let b = synthesize_multisine(&rot, g.period(), sample_rate(&g)).unwrap();
        prop_assert!((average_power(&w) - average_power(&rot)).abs() <= 1e-12 * average_power(&w));
        prop_assert!((papr(&a).unwrap() - papr(&b).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn synthesis_is_linear(pair in (1usize..=8).prop_flat_map(|n| (
        prop::collection::vec(complex(), n),
        prop::collection::vec(complex(), n),
    ))) {
        let (a, b) = pair;
        let g = grid(a.len());
        let sum: Vec<C> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let fs = sample_rate(&g);
        let sa = synthesize_tones(&g, &a, g.period(), fs).unwrap();
        let sb = synthesize_tones(&g, &b, g.period(), fs).unwrap();
        let ss = synthesize_tones(&g, &sum, g.period(), fs).unwrap();
        for k in 0..ss.len() {
            prop_assert!((ss.samples[k] - sa.samples[k] - sb.samples[k]).norm() <= 1e-12);
        }
    }

    #[test]
    fn received_power_is_sum_of_faded_tones(w in tones(1..=8), ch in channel()) {
        let w = weights(w);
        let rx = propagate_tones(&w, &ch);
        let expect: f64 = w.grid().tone_freqs().iter().zip(w.amplitudes())
            .map(|(&f, s)| freq_response(&ch, f).norm_sqr() * s * s)
            .sum::<f64>() / 2.0;
        prop_assert!((rx.power() - expect).abs() <= 1e-12 * expect.max(1e-300));
    }

    #[test]
    fn single_tap_channel_preserves_papr(w in tones(2..=8), gain in complex(), lag in 0usize..6) {
        prop_assume!(gain.norm() > 1e-3);
        let w = weights(w);
        prop_assume!(average_power(&w) > 1e-6);
        let g = w.grid().clone();
        // Whole periods on both sides so the delayed copy stays periodic.
        let sig = synthesize_multisine(&w, 2.0 * g.period(), sample_rate(&g)).unwrap();
        let ch = TapDelayChannel::new(vec![Tap { delay: lag as f64 / sig.sample_rate, gain }]).unwrap();
        let out = propagate_samples(&sig, &ch, DelayPolicy::Nearest).unwrap();
        let period = (g.period() * sig.sample_rate).round() as usize;
        let mut tail = out.clone();
        tail.samples = out.samples[period..].to_vec();
        let mut head = sig.clone();
        head.samples = sig.samples[..period].to_vec();
        prop_assert!((papr(&tail).unwrap() - papr(&head).unwrap()).abs() <= 1e-9);
    }

    #[test]
    fn time_and_tone_domains_agree(w in tones(2..=8), ch in channel()) {
        let w = weights(w);
        let g = w.grid().clone();
        let fs = 80e6;
        let sig = synthesize_multisine(&w, 3.0 * g.period(), fs).unwrap();
        let out = propagate_samples(&sig, &ch, DelayPolicy::Exact { tolerance: 1e-6 }).unwrap();
        let rx = propagate_tones(&w, &ch);
        let expect = synthesize_tones(&g, &rx.rx_weights, 3.0 * g.period(), fs).unwrap();
        let memory = (ch.max_delay() * fs).round() as usize;
        let scale = expect.samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
        prop_assume!(scale > 1e-9);
        for k in memory..out.len() {
            prop_assert!((out.samples[k] - expect.samples[k]).norm() <= 1e-6 * scale);
        }
    }

    #[test]
    fn smf_is_channel_scale_invariant(h in tones(1..=8), c in complex(), beta in 0.0..5.0f64) {
        prop_assume!(c.norm() > 1e-3 && h.iter().any(|x| x.norm() > 1e-6));
        let g = grid(h.len());
        let params = SmfParams::new(beta, 2.0).unwrap();
        let a = smf_weights(&h, &params, &g).unwrap();
        let scaled: Vec<C> = h.iter().map(|x| x * c).collect();
        let b = smf_weights(&scaled, &params, &g).unwrap();
        for (n, (x, y)) in a.weights().iter().zip(b.weights()).enumerate() {
            prop_assert!((x.norm() - y.norm()).abs() <= 1e-12 * x.norm().max(1e-12));
            if h[n].norm() > 1e-9 {
                let shift = (y / x).arg() + c.arg();
                let wrapped = (shift + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
                prop_assert!(wrapped.abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn smf_co_phases_received_tones(h in tones(2..=8), beta in 0.0..5.0f64) {
        prop_assume!(h.iter().all(|x| x.norm() > 1e-3));
        let g = grid(h.len());
        let w = smf_weights(&h, &SmfParams::new(beta, 1.0).unwrap(), &g).unwrap();
        for (x, hn) in w.weights().iter().zip(&h) {
            prop_assert!((x * hn).arg().abs() <= 1e-9);
        }
    }

    #[test]
    fn larger_beta_never_dilutes_strongest_tone(h in tones(2..=8), b0 in 0.0..4.0f64, db in 0.0..2.0f64) {
        prop_assume!(h.iter().any(|x| x.norm() > 1e-6));
        let g = grid(h.len());
        let share = |beta: f64| {
            let w = smf_weights(&h, &SmfParams::new(beta, 1.0).unwrap(), &g).unwrap();
            let p: Vec<f64> = w.amplitudes().iter().map(|s| s * s).collect();
            let strongest = h.iter().enumerate()
                .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap()).unwrap().0;
            p[strongest] / p.iter().sum::<f64>()
        };
        prop_assert!(share(b0 + db) >= share(b0) - 1e-12);
    }

    #[test]
    fn budgets_are_exact(h in tones(1..=8), beta in 0.0..5.0f64, p in 1e-3..10.0f64) {
        prop_assume!(h.iter().any(|x| x.norm() > 1e-6));
        let g = grid(h.len());
        let a = smf_weights(&h, &SmfParams::new(beta, p).unwrap(), &g).unwrap();
        let b = nonadaptive_weights(&g, p).unwrap();
        prop_assert!((average_power(&a) / p - 1.0).abs() <= 1e-12);
        prop_assert!((average_power(&b) / p - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn moments_scale_with_amplitude(r in tones(1..=8), c in complex()) {
        let scaled: Vec<C> = r.iter().map(|x| x * c).collect();
        let m2 = second_moment(&r);
        let m4 = fourth_moment(&r);
        prop_assert!((second_moment(&scaled) - c.norm_sqr() * m2).abs() <= 1e-12 * (1.0 + m2));
        prop_assert!((fourth_moment(&scaled) - c.norm_sqr().powi(2) * m4).abs() <= 1e-12 * (1.0 + m4));
    }

    #[test]
    fn dc_is_time_shift_invariant(r in tones(2..=8), shift in 0.0..1.0f64) {
        // A time shift by t rotates tone n by exp(j2π f_n t).
        let g = grid(r.len());
        let t = shift * g.period();
        let shifted: Vec<C> = r.iter().enumerate()
            .map(|(n, x)| x * C::from_polar(1.0, std::f64::consts::TAU * g.tone_offset(n) * t))
            .collect();
        let m4 = fourth_moment(&r);
        prop_assert!((fourth_moment(&shifted) - m4).abs() <= 1e-12 * (1.0 + m4));
    }

    #[test]
    fn closed_form_matches_time_domain(r in tones(1..=8)) {
        let g = grid(r.len());
        let rect = RectennaModel::<f64>::default();
        let sig = synthesize_tones(&g, &r, g.period(), sample_rate(&g)).unwrap();
        let rx = wpt_core::channel::ReceivedTones { grid: g, rx_weights: r };
        let closed = wpt_core::rectenna::harvest_dc_polynomial(&rx, &rect).unwrap();
        let numeric = time_domain_dc_oracle(&sig, &rect).unwrap();
        prop_assert!((closed - numeric).abs() <= 1e-6 * closed.abs().max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn co_phasing_maximizes_fourth_moment(s in prop::collection::vec(0.05..1.0f64, 2..=3), phases in prop::collection::vec(0.0..1.0f64, 3)) {
        let co: Vec<C> = s.iter().map(|&a| C::new(a, 0.0)).collect();
        let other: Vec<C> = s.iter().zip(&phases)
            .map(|(&a, &p)| C::from_polar(a, std::f64::consts::TAU * p))
            .collect();
        prop_assert!(fourth_moment(&co) >= fourth_moment(&other) - 1e-12);
    }

    #[test]
    fn oracle_dominates_smf_and_baseline(h in prop::collection::vec(complex(), 2..=3)) {
        prop_assume!(h.iter().all(|x| x.norm() > 1e-2));
        let h: Vec<C> = h.iter().map(|x| x * 1e-3).collect();
        let g = grid(h.len());
        let rect = RectennaModel::<f64>::default();
        let p = 3.16;
        let oracle = dc_through(&oracle_optimal_weights(&h, p, &g, &rect, 16, 16).unwrap(), &h, &rect).unwrap();
        let smf = [0.0, 1.0, 2.0, 3.0, 4.0].iter()
            .map(|&b| dc_through(&smf_weights(&h, &SmfParams::new(b, p).unwrap(), &g).unwrap(), &h, &rect).unwrap())
            .fold(0.0f64, f64::max);
        let base = dc_through(&nonadaptive_weights(&g, p).unwrap(), &h, &rect).unwrap();
        prop_assert!(oracle >= smf * (1.0 - 1e-9), "oracle {} < smf {}", oracle, smf);
        prop_assert!(smf >= base * (1.0 - 1e-12));
    }
}
