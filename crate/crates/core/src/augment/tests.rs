use super::*;
use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};
use rustfft::{num_complex::Complex64, FftPlanner};
use std::f64::consts::PI;

const SR: f64 = 44_100.0;

fn sine(freq: f64, n: usize, amp: f64) -> Vec<f32> {
    (0..n)
        .map(|i| (amp * (2.0 * PI * freq * i as f64 / SR).sin()) as f32)
        .collect()
}

/// Peak frequency of a Hann-windowed FFT with parabolic interpolation.
fn dominant_hz(x: &[f32]) -> f64 {
    let n = x.len();
    let mut buf: Vec<Complex64> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos();
            Complex64::new(v as f64 * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mags: Vec<f64> = buf[..n / 2].iter().map(|z| z.norm()).collect();
    let k = (1..n / 2 - 1).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).unwrap();
    let (a, b, c) = (mags[k - 1].ln(), mags[k].ln(), mags[k + 1].ln());
    let offset = 0.5 * (a - c) / (a - 2.0 * b + c);
    (k as f64 + offset) * SR / n as f64
}

fn rms(x: &[f32]) -> f64 {
    (x.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

fn energy(x: &[f32]) -> f64 {
    x.iter().map(|&v| (v as f64).powi(2)).sum()
}

fn rms_diff(a: &[f32], b: &[f32]) -> f64 {
    let d: Vec<f32> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    rms(&d)
}

fn noise(n: usize, seed: u64) -> Vec<f32> {
    let mut r = rng::seeded(seed);
    (0..n).map(|_| r.random_range(-0.8f32..0.8)).collect()
}

#[test]
fn amplitude_clip_examples() {
    let x = [0.0, 1.0, -1.0];
    assert_eq!(amplitude_clip_with(&x, 1.0), x.to_vec());
    assert_eq!(amplitude_clip_with(&x, 0.75), vec![0.0, 0.75, -0.75]);
}

#[test]
fn amplify_examples() {
    let x = noise(1000, 1);
    assert_eq!(amplify_with(&x, 1.0), x);
    let half = amplify_with(&x, 0.5);
    assert!(half.iter().zip(&x).all(|(h, v)| *h == v * 0.5));
    let g = 1.37;
    assert!((rms(&amplify_with(&x, g)) - g * rms(&x)).abs() < 1e-6);
}

#[test]
fn echo_examples() {
    let mut x = vec![0.0f32; 20_000];
    x[0] = 1.0;
    let y = echo_with(&x, 4410);
    let spikes: Vec<usize> = (0..y.len()).filter(|&i| y[i] != 0.0).collect();
    assert_eq!(spikes, vec![0, 4410]);

    let mut x = vec![0.0f32; 12_000];
    x[5590] = 0.7;
    x[10_000] = 0.1;
    let y = echo_with(&x, 4410);
    assert!((y[10_000] - 0.8).abs() < 1e-7);
    assert!(echo_with(&vec![0.0; 100], 10).iter().all(|&v| v == 0.0));
}

#[test]
fn echo_delay_range_is_two_to_forty_percent_of_a_second() {
    let mut r = rng::seeded(3);
    for _ in 0..2000 {
        let d = AugmentKind::Echo.draw(AugmentKind::Echo.default_range(), &mut r);
        assert!((882.0..=17_640.0).contains(&d) && d.fract() == 0.0);
    }
}

#[test]
fn lowpass_dc_gain_and_cutoff() {
    let c = 0.1;
    let y = lowpass_with(&vec![0.5; 20_000], c);
    assert!((y[19_999] - 0.5).abs() < 1e-3);

    let cutoff_hz = c * SR / 2.0;
    let x = sine(cutoff_hz, 44_100, 0.5);
    let y = lowpass_with(&x, c);
    let ratio = rms(&y[22_050..]) / rms(&x[22_050..]);
    assert!((ratio / 0.5f64.sqrt() - 1.0).abs() < 0.05, "ratio {ratio}");

    let x = sine(4.0 * cutoff_hz, 44_100, 0.5);
    let y = lowpass_with(&x, c);
    let db = 20.0 * (rms(&y[22_050..]) / rms(&x[22_050..])).log10();
    assert!(db < -30.0, "{db} dB");
}

#[test]
fn pitch_shift_zero_is_identity() {
    let x = sine(440.0, 44_100, 0.5);
    let y = pitch_shift_with(&x, 0.0);
    assert_eq!(y.len(), x.len());
    assert!(rms_diff(&x[4096..40_000], &y[4096..40_000]) < 1e-3);
}

#[test]
fn pitch_shift_octave_doubles_frequency() {
    let x = sine(440.0, 44_100, 0.5);
    let y = pitch_shift_with(&x, 12.0);
    assert_eq!(y.len(), x.len());
    let f = dominant_hz(&y[4096..4096 + 32_768]);
    assert!((f / 880.0 - 1.0).abs() < 0.02, "{f}");
    let y = pitch_shift_with(&x, 3.0);
    let f = dominant_hz(&y[4096..4096 + 32_768]);
    let expect = 440.0 * 2f64.powf(3.0 / 12.0);
    assert!((f / expect - 1.0).abs() < 0.02, "{f}");
}

#[test]
fn partial_erase_examples() {
    let x = noise(20_000, 5);
    let mut r = rng::seeded(1);
    assert_eq!(partial_erase_with(&x, 100, 0, &mut r), x);

    let (start, len) = (3000, 12_000);
    let y = partial_erase_with(&x, start, len, &mut r);
    assert_eq!(&y[..start], &x[..start]);
    assert_eq!(&y[start + len..], &x[start + len..]);
    let mean = x.iter().map(|&v| v as f64).sum::<f64>() / x.len() as f64;
    let var_x = x.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / x.len() as f64;
    let region = &y[start..start + len];
    let m = region.iter().map(|&v| v as f64).sum::<f64>() / len as f64;
    let var_r = region.iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>() / len as f64;
    assert!((var_r / var_x - 1.0).abs() < 0.2, "{var_r} vs {var_x}");
}

#[test]
fn speed_adjust_keeps_length_and_pitch() {
    let x = sine(440.0, 44_100, 0.5);
    let y = speed_adjust_with(&x, 1.0);
    assert!(rms_diff(&x[4096..40_000], &y[4096..40_000]) < 1e-3);
    for rate in [0.5, 0.8, 1.3, 1.5] {
        let y = speed_adjust_with(&x, rate);
        assert_eq!(y.len(), x.len());
        let valid = ((x.len() as f64 / rate) as usize).min(x.len());
        let seg = &y[2048..valid - 2048];
        let f = dominant_hz(seg);
        assert!((f / 440.0 - 1.0).abs() < 0.02, "rate {rate}: {f}");
    }
}

#[test]
fn add_noise_statistics() {
    let x = vec![0.25f32; 200_000];
    let mut r = rng::seeded(8);
    assert_eq!(add_noise_with(&x, 0.0, &mut r), x);
    let sigma = 0.02;
    let y = add_noise_with(&x, sigma, &mut r);
    let n = y.len() as f64;
    let resid: Vec<f64> = y.iter().zip(&x).map(|(a, b)| (a - b) as f64).collect();
    let mean = resid.iter().sum::<f64>() / n;
    let var = resid.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 3.0 * sigma / n.sqrt());
    assert!((var / (sigma * sigma) - 1.0).abs() < 0.1);
}

#[test]
fn hpss_energy_split() {
    let x = sine(1000.0, 44_100, 0.5);
    let (h, p) = hpss_split(&x);
    let e = energy(&x);
    assert!(energy(&h) / e >= 0.8, "harmonic {}", energy(&h) / e);
    assert!(energy(&p) / e < 0.2, "percussive {}", energy(&p) / e);

    let mut click = vec![0.0f32; 44_100];
    click[22_050] = 1.0;
    let (h, p) = hpss_split(&click);
    let e = energy(&click);
    assert!(energy(&p) / e >= 0.8, "percussive {}", energy(&p) / e);
    assert!(energy(&h) / e < 0.2);
}

#[test]
fn bitwise_downsample_examples() {
    assert_eq!(bitwise_downsample_with(&[0.5], 40.0), vec![0.5]);
    assert!((bitwise_downsample_with(&[0.333], 100.0)[0] - 0.33).abs() < 1e-7);
    let x = noise(50_000, 2);
    for r in [40.0, 73.0, 100.0] {
        let y = bitwise_downsample_with(&x, r);
        let mut distinct: Vec<u32> = y.iter().map(|v| v.to_bits()).collect();
        distinct.sort_unstable();
        distinct.dedup();
        assert!(distinct.len() <= 2 * r as usize + 1);
    }
}

#[test]
fn samplerate_downsample_examples() {
    assert_eq!(samplerate_downsample_with(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.0, 1.0, 3.0, 3.0]);
    let x = noise(1001, 4);
    for k in 2..=9 {
        let y = samplerate_downsample_with(&x, k);
        assert_eq!(y.len(), x.len());
        let runs = 1 + y.windows(2).filter(|w| w[0] != w[1]).count();
        assert!(runs <= x.len().div_ceil(k));
    }
}

#[test]
fn every_kind_preserves_length_and_is_deterministic() {
    let x: Vec<f32> = sine(330.0, 30_000, 0.4)
        .iter()
        .zip(noise(30_000, 9))
        .map(|(a, b)| a + 0.1 * b)
        .collect();
    for kind in AugmentKind::ALL {
        let a = kind.apply(&x, &mut rng::seeded(77));
        let b = kind.apply(&x, &mut rng::seeded(77));
        assert_eq!(a.len(), x.len(), "{}", kind.name());
        assert_eq!(a, b, "{}", kind.name());
        assert!(a.iter().all(|v| v.is_finite()), "{}", kind.name());
    }
}

#[test]
fn idempotent_kinds() {
    let x = noise(5000, 12);
    let t = 0.6;
    let once = clip_at(&x, t);
    assert_eq!(clip_at(&once, t), once);
    for r in [40.0, 64.0, 99.0] {
        let once = bitwise_downsample_with(&x, r);
        assert_eq!(bitwise_downsample_with(&once, r), once);
    }
    for k in 2..=9 {
        let once = samplerate_downsample_with(&x, k);
        assert_eq!(samplerate_downsample_with(&once, k), once);
    }
}

#[test]
fn pipeline_examples() {
    let x = noise(8000, 1);
    let none: Vec<AugmentSpec> = AugmentKind::ALL
        .into_iter()
        .map(|k| AugmentSpec::new(k, 0.0).unwrap())
        .collect();
    assert_eq!(apply_pipeline(&x, &none, &mut rng::seeded(3)), x);

    let all = AugmentSpec::all_default();
    let a = apply_pipeline(&x, &all, &mut rng::seeded(5));
    let b = apply_pipeline(&x, &all, &mut rng::seeded(5));
    assert_eq!(a, b);
    assert_eq!(a.len(), x.len());

    let unity = [AugmentSpec::new(AugmentKind::Amplify, 1.0).unwrap().with_range(1.0, 1.0)];
    assert_eq!(apply_pipeline(&x, &unity, &mut rng::seeded(2)), x);

    assert!(AugmentSpec::new(AugmentKind::Echo, 1.5).is_err());
}

#[test]
fn kind_names_parse() {
    for k in AugmentKind::ALL {
        assert_eq!(k.name().parse::<AugmentKind>().unwrap(), k);
    }
    assert!("reverb".parse::<AugmentKind>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clip_never_raises_the_peak(x in proptest::collection::vec(-1.0f32..1.0, 1..200), seed in 0u64..500) {
        let y = amplitude_clip(&x, &mut rng::seeded(seed));
        prop_assert!(peak(&y) <= peak(&x));
    }

    #[test]
    fn cheap_kinds_keep_length(x in proptest::collection::vec(-1.0f32..1.0, 1..3000), seed in 0u64..500) {
        for kind in [AugmentKind::AmplitudeClip, AugmentKind::Amplify, AugmentKind::Echo,
                     AugmentKind::Lowpass, AugmentKind::PartialErase, AugmentKind::AddNoise,
                     AugmentKind::BitwiseDownsample, AugmentKind::SamplerateDownsample] {
            let y = kind.apply(&x, &mut rng::seeded(seed));
            prop_assert_eq!(y.len(), x.len());
            prop_assert!(y.iter().all(|v| v.is_finite()));
        }
    }
}
