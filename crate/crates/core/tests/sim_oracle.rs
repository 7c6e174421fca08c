//! Oracles for scene synthesis: FFT convolution against a direct O(N*L)
//! time-domain reference, the moving-source block machinery against an
//! independently computed crossfade envelope, SNR mixing against a
//! recomputed power ratio, and generated metadata against the metric suite
//! (self-evaluation must be a perfect score).

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seld_core::dsp::FoaClip;
use seld_core::event::EventList;
use seld_core::geo::cartesian_to_azel;
use seld_core::metrics::{compute_metrics, Averaging, MetricConfig};
use seld_core::sim::{
    convolve_srir, convolve_srir_moving, crossfade_window, measure_snr, mix_scene, plan_scene,
    BankEntry, Placement, SampleBank, SceneConfig, Spatial, Srir, SrirSet, BLOCK_HOP, BLOCK_LEN,
};

const RATE: u32 = 24_000;

/// Direct time-domain convolution, the oracle the FFT path must match.
fn conv_direct(x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        for (j, &hj) in h.iter().enumerate() {
            out[i + j] += xi * hj;
        }
    }
    out
}

fn delta_srir(az: f64, el: f64) -> Srir {
    let mut ir = Array2::zeros((4, 8));
    ir[[0, 0]] = 1.0;
    Srir::new(ir, az, el, 1.0, "room0", RATE).unwrap()
}

fn random_srir(rng: &mut ChaCha8Rng, taps: usize) -> Srir {
    let mut ir = Array2::zeros((4, taps));
    for v in ir.iter_mut() {
        *v = rng.gen_range(-0.5..0.5);
    }
    Srir::new(
        ir,
        rng.gen_range(-180.0..180.0),
        rng.gen_range(-90.0..90.0),
        rng.gen_range(0.5..5.0),
        "room0",
        RATE,
    )
    .unwrap()
}

#[test]
fn fft_convolution_matches_time_domain_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    for trial in 0..100 {
        let n = rng.gen_range(16..=256);
        let taps = rng.gen_range(1..=64);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let srir = random_srir(&mut rng, taps);
        let out = convolve_srir(&x, RATE, &srir).unwrap();
        assert_eq!(out.len(), n + taps - 1);
        for ch in 0..4 {
            let h: Vec<f64> = (0..taps).map(|j| srir.ir[[ch, j]]).collect();
            let want = conv_direct(&x, &h);
            for (i, w) in want.iter().enumerate() {
                assert!(
                    (out.samples()[[ch, i]] - w).abs() < 1e-9,
                    "trial {trial} ch {ch} sample {i}"
                );
            }
        }
    }
}

#[test]
fn unit_impulse_ir_is_identity_on_w() {
    let x: Vec<f64> = (0..200).map(|i| (i as f64 * 0.1).sin()).collect();
    let out = convolve_srir(&x, RATE, &delta_srir(0.0, 0.0)).unwrap();
    for (i, &xi) in x.iter().enumerate() {
        assert!((out.samples()[[0, i]] - xi).abs() < 1e-12);
        for ch in 1..4 {
            assert_eq!(out.samples()[[ch, i]], 0.0);
        }
    }
}

#[test]
fn delayed_impulse_shifts_output() {
    let d = 13;
    let mut ir = Array2::zeros((4, 32));
    ir[[0, d]] = 1.0;
    let srir = Srir::new(ir, 0.0, 0.0, 1.0, "room0", RATE).unwrap();
    let x: Vec<f64> = (0..100).map(|i| ((i * 7 % 23) as f64) - 11.0).collect();
    let out = convolve_srir(&x, RATE, &srir).unwrap();
    for (i, &xi) in x.iter().enumerate() {
        assert!((out.samples()[[0, i + d]] - xi).abs() < 1e-10);
    }
    for i in 0..d {
        assert!(out.samples()[[0, i]].abs() < 1e-12);
    }
}

#[test]
fn sample_rate_mismatch_rejected() {
    let srir = delta_srir(0.0, 0.0);
    assert!(convolve_srir(&[1.0, 2.0], 48_000, &srir).is_err());
}

#[test]
fn crossfade_windows_partition_power() {
    // sum over blocks (start offsets -hop, 0, hop, ...) of w^2 at every
    // sample must be exactly 1: the designed equal-power property
    let n = 4 * BLOCK_LEN + 371;
    for pos in 0..n {
        let mut total = 0.0;
        let mut b = -1i64;
        loop {
            let start = b * BLOCK_HOP as i64;
            if start >= n as i64 {
                break;
            }
            let off = pos as i64 - start;
            if off >= 0 && (off as usize) < BLOCK_LEN {
                let w = crossfade_window(off as usize, BLOCK_LEN);
                total += w * w;
            }
            b += 1;
        }
        assert!((total - 1.0).abs() < 1e-12, "position {pos}: {total}");
    }
}

#[test]
fn moving_convolution_equals_envelope_weighted_static() {
    // with an identical IR at every trajectory step, the block machinery
    // must reduce to convolving the envelope-weighted input, where the
    // envelope is the (independently computed) sum of block windows
    let mut rng = ChaCha8Rng::seed_from_u64(401);
    let n = 3 * BLOCK_LEN + 200;
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let srir = random_srir(&mut rng, 48);
    let irs: Vec<&Srir> = vec![&srir; 5];
    let got = convolve_srir_moving(&x, RATE, &irs).unwrap();

    let mut env = vec![0.0f64; n];
    let mut b = -1i64;
    loop {
        let start = b * BLOCK_HOP as i64;
        if start >= n as i64 {
            break;
        }
        for off in 0..BLOCK_LEN {
            let pos = start + off as i64;
            if pos >= 0 && (pos as usize) < n {
                env[pos as usize] += crossfade_window(off, BLOCK_LEN);
            }
        }
        b += 1;
    }
    let weighted: Vec<f64> = x.iter().zip(&env).map(|(a, e)| a * e).collect();
    for ch in 0..4 {
        let h: Vec<f64> = (0..48).map(|j| srir.ir[[ch, j]]).collect();
        let want = conv_direct(&weighted, &h);
        for (i, w) in want.iter().enumerate() {
            assert!(
                (got.samples()[[ch, i]] - w).abs() < 1e-9,
                "ch {ch} sample {i}: {} vs {w}",
                got.samples()[[ch, i]]
            );
        }
    }
}

#[test]
fn measure_snr_anchors() {
    assert!((measure_snr(1.0, 1.0).unwrap() - 0.0).abs() < 1e-12);
    // halving noise amplitude quarters its power: +6.0206 dB
    let before = measure_snr(1.0, 0.04).unwrap();
    let after = measure_snr(1.0, 0.01).unwrap();
    assert!((after - before - 20.0 * 2.0f64.log10()).abs() < 1e-9);
    assert!(measure_snr(0.0, 1.0).is_err());
    assert!(measure_snr(1.0, 0.0).is_err());
}

fn tone_bank(k: usize) -> SampleBank {
    // short deterministic tone bursts, one per class
    let entries = (0..k)
        .map(|class| {
            let freq = 400.0 + 150.0 * class as f64;
            let samples: Vec<f64> = (0..4800)
                .map(|i| {
                    0.4 * (2.0 * std::f64::consts::PI * freq * i as f64 / RATE as f64).sin()
                })
                .collect();
            BankEntry {
                class,
                id: format!("tone{class}"),
                samples,
                gain_lo_db: -3.0,
                gain_hi_db: 3.0,
                interference: false,
            }
        })
        .collect();
    SampleBank::new(entries, k, RATE).unwrap()
}

fn one_room_set(rng: &mut ChaCha8Rng, n_static: usize, taps: usize) -> SrirSet {
    let srirs: Vec<Srir> = (0..n_static).map(|_| random_srir(rng, taps)).collect();
    let trajectory: Vec<usize> = (0..n_static.min(4)).collect();
    SrirSet::new(srirs, vec![trajectory]).unwrap()
}

fn plan_cfg(duration_s: f64, n_events: usize) -> SceneConfig {
    SceneConfig {
        duration_s,
        n_events,
        polyphony_cap: 3,
        snr_db_lo: 6.0,
        snr_db_hi: 30.0,
        moving_prob: 0.3,
        max_retries: 100,
        frame_s: 0.1,
    }
}

#[test]
fn plans_are_deterministic_and_respect_polyphony() {
    let bank = tone_bank(4);
    let mut rng = ChaCha8Rng::seed_from_u64(402);
    let set = one_room_set(&mut rng, 6, 16);
    for seed in 0..20 {
        let plan_a = plan_scene(&bank, &set, &plan_cfg(8.0, 10), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let plan_b = plan_scene(&bank, &set, &plan_cfg(8.0, 10), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(plan_a, plan_b);

        // exhaustive frame scan of target-class polyphony
        let frames = (8.0 / 0.1) as usize;
        for f in 0..frames {
            let t0 = f as f64 * 0.1;
            let t1 = t0 + 0.1;
            let active = plan_a
                .placements
                .iter()
                .filter(|p| !p.interference)
                .filter(|p| {
                    let len = bank.entries[p.entry].samples.len() as f64 / RATE as f64;
                    p.onset_s < t1 && p.onset_s + len > t0
                })
                .count();
            assert!(active <= 3, "seed {seed} frame {f}: polyphony {active}");
        }
    }
}

#[test]
fn zero_events_gives_ambience_only_plan() {
    let bank = tone_bank(2);
    let mut rng = ChaCha8Rng::seed_from_u64(403);
    let set = one_room_set(&mut rng, 3, 16);
    let plan = plan_scene(&bank, &set, &plan_cfg(4.0, 0), &mut rng).unwrap();
    assert!(plan.placements.is_empty());
}

#[test]
fn infeasible_density_errors_out() {
    let bank = tone_bank(1); // 0.2 s samples
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let set = one_room_set(&mut rng, 2, 8);
    // 40 events of 0.2 s in a 0.5 s clip cannot satisfy polyphony <= 3
    let result = plan_scene(&bank, &set, &plan_cfg(0.5, 40), &mut rng);
    assert!(result.is_err());
}

#[test]
fn mix_without_ambience_is_exact_event_sum() {
    let bank = tone_bank(2);
    let mut rng = ChaCha8Rng::seed_from_u64(405);
    let set = one_room_set(&mut rng, 4, 32);
    let plan = plan_scene(&bank, &set, &plan_cfg(3.0, 4), &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
    let out = mix_scene(&plan, &bank, &set, None).unwrap();

    // independent reconstruction
    let n = (3.0 * RATE as f64).round() as usize;
    let mut expect = Array2::<f64>::zeros((4, n));
    for p in &plan.placements {
        let entry = &bank.entries[p.entry];
        let gain = 10f64.powf(p.gain_db / 20.0);
        let scaled: Vec<f64> = entry.samples.iter().map(|s| s * gain).collect();
        let seg = match &p.spatial {
            Spatial::Static(i) => convolve_srir(&scaled, RATE, &set.srirs[*i]).unwrap(),
            Spatial::Moving(t) => {
                let irs: Vec<&Srir> = t.iter().map(|&i| &set.srirs[i]).collect();
                convolve_srir_moving(&scaled, RATE, &irs).unwrap()
            }
        };
        let onset = (p.onset_s * RATE as f64).round() as usize;
        for ch in 0..4 {
            for i in 0..seg.len() {
                if onset + i < n {
                    expect[[ch, onset + i]] += seg.samples()[[ch, i]];
                }
            }
        }
    }
    assert_eq!(out.clip.len(), n);
    let mut max_err: f64 = 0.0;
    for ch in 0..4 {
        for i in 0..n {
            max_err = max_err.max((out.clip.samples()[[ch, i]] - expect[[ch, i]]).abs());
        }
    }
    assert!(max_err == 0.0, "event-only mix deviates by {max_err}");
}

fn ambience_clip(rng: &mut ChaCha8Rng, samples: usize) -> FoaClip {
    let mut data = Array2::zeros((4, samples));
    for v in data.iter_mut() {
        *v = rng.gen_range(-0.05..0.05);
    }
    FoaClip::new(data, RATE).unwrap()
}

#[test]
fn target_snr_is_met_within_tenth_of_decibel() {
    let bank = tone_bank(3);
    let mut rng = ChaCha8Rng::seed_from_u64(406);
    let set = one_room_set(&mut rng, 5, 64);
    for &target in &[6.0, 18.0, 30.0] {
        let mut plan = plan_scene(&bank, &set, &plan_cfg(4.0, 5), &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        plan.snr_db = target;
        let ambience = ambience_clip(&mut rng, 5 * RATE as usize);

        let with_noise = mix_scene(&plan, &bank, &set, Some(&ambience)).unwrap();
        let event_only = mix_scene(&plan, &bank, &set, None).unwrap();

        // recompute the measured SNR over active-event frames from scratch
        let n = with_noise.clip.len();
        let frames = (4.0 / 0.1) as usize;
        let mut active = vec![false; n];
        for f in 0..frames {
            let t0 = f as f64 * 0.1;
            let t1 = t0 + 0.1;
            let any = plan.placements.iter().any(|p| {
                let len = bank.entries[p.entry].samples.len() as f64 / RATE as f64;
                p.onset_s < t1 && p.onset_s + len > t0
            });
            if any {
                let a = (t0 * RATE as f64).round() as usize;
                let b = ((t1 * RATE as f64).round() as usize).min(n);
                for slot in active.iter_mut().take(b).skip(a) {
                    *slot = true;
                }
            }
        }
        let mut p_event = 0.0;
        let mut p_noise = 0.0;
        let mut count = 0usize;
        for (i, &is_active) in active.iter().enumerate() {
            if is_active {
                for ch in 0..4 {
                    let e = event_only.clip.samples()[[ch, i]];
                    let d = with_noise.clip.samples()[[ch, i]] - e;
                    p_event += e * e;
                    p_noise += d * d;
                }
                count += 1;
            }
        }
        assert!(count > 0);
        let measured = 10.0 * (p_event / p_noise).log10();
        assert!(
            (measured - target).abs() <= 0.1,
            "target {target} dB, measured {measured} dB"
        );
    }
}

#[test]
fn silent_events_with_finite_snr_rejected() {
    let entries = vec![BankEntry {
        class: 0,
        id: "silence".into(),
        samples: vec![0.0; 2400],
        gain_lo_db: 0.0,
        gain_hi_db: 0.0,
        interference: false,
    }];
    let bank = SampleBank::new(entries, 1, RATE).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(407);
    let set = one_room_set(&mut rng, 2, 8);
    let plan = plan_scene(&bank, &set, &plan_cfg(2.0, 1), &mut rng).unwrap();
    let ambience = ambience_clip(&mut rng, 3 * RATE as usize);
    assert!(mix_scene(&plan, &bank, &set, Some(&ambience)).is_err());
}

#[test]
fn static_event_metadata_carries_its_position() {
    let bank = tone_bank(1);
    let srir = delta_srir(30.0, 10.0);
    let set = SrirSet::new(vec![srir], vec![]).unwrap();
    let plan = seld_core::sim::ScenePlan {
        duration_s: 2.0,
        snr_db: 20.0,
        frame_s: 0.1,
        placements: vec![Placement {
            entry: 0,
            class: 0,
            source: 0,
            onset_s: 0.55,
            gain_db: 0.0,
            spatial: Spatial::Static(0),
            interference: false,
        }],
    };
    let out = mix_scene(&plan, &bank, &set, None).unwrap();
    assert!(!out.events.is_empty());
    for e in &out.events {
        let (az, el) = cartesian_to_azel(e.doa);
        assert!((az - 30.0).abs() < 1e-9);
        assert!((el - 10.0).abs() < 1e-9);
        assert_eq!(e.class, 0);
        assert_eq!(e.source, 0);
    }
    // 0.2 s event starting at 0.55: frames 5, 6, 7 (0.55..0.75 overlaps)
    let frames: Vec<usize> = out.events.iter().map(|e| e.frame).collect();
    assert_eq!(frames, vec![5, 6, 7]);

    // alignment: active frames carry energy, inactive frames are silent
    // (delta IR leaves no reverb tail)
    let n = out.clip.len();
    for f in 0..20 {
        let a = (f as f64 * 0.1 * RATE as f64).round() as usize;
        let b = (((f + 1) as f64 * 0.1 * RATE as f64).round() as usize).min(n);
        let energy: f64 = (a..b).map(|i| out.clip.samples()[[0, i]].powi(2)).sum();
        if frames.contains(&f) {
            assert!(energy > 1e-9, "active frame {f} silent");
        } else {
            assert!(energy < 1e-20, "inactive frame {f} has energy {energy}");
        }
    }
}

#[test]
fn moving_event_metadata_walks_the_trajectory() {
    let bank = tone_bank(1);
    let positions = [(0.0, 0.0), (30.0, 0.0), (60.0, 0.0), (90.0, 0.0)];
    let srirs: Vec<Srir> = positions.iter().map(|&(az, el)| delta_srir(az, el)).collect();
    let set = SrirSet::new(srirs, vec![vec![0, 1, 2, 3]]).unwrap();
    let plan = seld_core::sim::ScenePlan {
        duration_s: 1.0,
        snr_db: 20.0,
        frame_s: 0.1,
        placements: vec![Placement {
            entry: 0,
            class: 0,
            source: 0,
            onset_s: 0.0,
            gain_db: 0.0,
            spatial: Spatial::Moving(vec![0, 1, 2, 3]),
            interference: false,
        }],
    };
    let out = mix_scene(&plan, &bank, &set, None).unwrap();
    // 0.2 s event over 4 trajectory points: azimuth must be non-decreasing
    // from 0 toward 90 across its frames
    let mut azimuths: Vec<f64> = Vec::new();
    for e in &out.events {
        let (az, _) = cartesian_to_azel(e.doa);
        azimuths.push(az);
    }
    assert!(!azimuths.is_empty());
    assert!((azimuths[0] - 0.0).abs() < 1e-9);
    for w in azimuths.windows(2) {
        assert!(w[1] >= w[0] - 1e-9);
    }
    assert!(*azimuths.last().unwrap() > 0.0);
}

#[test]
fn generated_metadata_self_evaluates_perfectly() {
    let bank = tone_bank(4);
    let mut rng = ChaCha8Rng::seed_from_u64(408);
    let set = one_room_set(&mut rng, 6, 32);
    for seed in 0..5 {
        let plan = plan_scene(&bank, &set, &plan_cfg(6.0, 8), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let out = mix_scene(&plan, &bank, &set, None).unwrap();
        let events: EventList = out.events.clone();
        let cfg = MetricConfig {
            frames_per_segment: 10,
            k: 4,
            threshold_deg: 20.0,
            averaging: Averaging::Macro,
        };
        let report = compute_metrics(&events, &events, 60, &cfg).unwrap();
        if events.is_empty() {
            continue;
        }
        assert_eq!(report.overall.er, 0.0, "seed {seed}");
        assert_eq!(report.overall.f, 1.0);
        assert!(report.overall.le_deg.abs() < 1e-9);
        assert_eq!(report.overall.lr, 1.0);
    }
}
