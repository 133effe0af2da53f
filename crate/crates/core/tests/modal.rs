use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wadc_core::ident::MimoTfModel;
use wadc_core::lti::{tustin_c2d, Domain, RationalTf};
use wadc_core::modal::{
    extract_modes, fft_dominant_frequency, inter_area_mode, residue_table, select_loop, ModeInfo,
    ResidueTable, INTER_AREA_BAND,
};
use wadc_core::pipeline::{self, PipelineConfig};
use wadc_core::plant::{apply_disturbance, measurement_channel, MeasurementOptions};
use wadc_core::Polynomial;

const TS: f64 = 0.032;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Discrete model with the given z-poles and numerators `nums[m][p]`.
fn discrete_model(poles: &[Complex64], nums: Vec<Vec<Vec<f64>>>) -> MimoTfModel {
    let den = Polynomial::from_roots(poles);
    let outs = nums.len();
    let ins = nums[0].len();
    let nums = nums
        .into_iter()
        .map(|row| row.into_iter().map(|n| Polynomial::new(n).unwrap()).collect())
        .collect();
    MimoTfModel::new(TS, den, nums, names("u", ins), names("y", outs)).unwrap()
}

#[test]
fn lightly_damped_pair_gives_inter_area_mode() {
    let mode = ModeInfo::from_discrete(c(0.9835, 0.1257), TS).unwrap();
    assert!((mode.frequency_hz - 0.6362).abs() < 0.01, "{}", mode.frequency_hz);
    assert!((mode.frequency_hz - 0.633).abs() < 1e-3);
    // zeta = -sigma/|s| with s = (2/T)(z-1)/(z+1)
    let z = c(0.9835, 0.1257);
    let s = (z - 1.0) / (z + 1.0) * (2.0 / TS);
    assert!((mode.damping_ratio - (-s.re / s.norm())).abs() < 1e-12);
    assert!((mode.damping_ratio - 0.067).abs() < 1e-3);
}

#[test]
fn real_pole_near_one_maps_to_slow_real_pole() {
    let mode = ModeInfo::from_discrete(c(0.9961, 0.0), TS).unwrap();
    assert!((mode.continuous_pole.re + 0.122).abs() < 1e-3);
    assert_eq!(mode.continuous_pole.im, 0.0);
    assert_eq!(mode.frequency_hz, 0.0);
    assert!(!mode.is_oscillatory());
}

#[test]
fn modes_are_one_per_pair_and_sorted() {
    let poles = [
        c(0.9835, 0.1257),
        c(0.9835, -0.1257),
        c(0.9961, 0.0),
        c(0.85, 0.3),
        c(0.85, -0.3),
    ];
    let model = discrete_model(&poles, vec![vec![vec![0.1, 0.2, 0.0, 0.0, 0.0, 0.0]]]);
    let modes = extract_modes(&model).unwrap();
    assert_eq!(modes.len(), 3);
    assert!(modes.windows(2).all(|w| w[0].frequency_hz <= w[1].frequency_hz));
    assert!(modes.iter().all(|m| m.continuous_pole.im >= 0.0));
    assert!(modes.iter().all(|m| m.damping_ratio.abs() <= 1.0));
    assert_eq!(modes[0].frequency_hz, 0.0);
}

#[test]
fn no_in_band_mode_is_an_error() {
    let pole = |f: f64, zeta: f64| {
        let w = 2.0 * std::f64::consts::PI * f;
        let s = c(-zeta * w, w * (1.0 - zeta * zeta).sqrt());
        (1.0 + s * TS / 2.0) / (1.0 - s * TS / 2.0)
    };
    let (a, b) = (pole(0.05, 0.1), pole(1.5, 0.1));
    let model = discrete_model(
        &[a, a.conj(), b, b.conj()],
        vec![vec![vec![0.0, 0.1, 0.1, 0.0, 0.0]]],
    );
    let modes = extract_modes(&model).unwrap();
    assert!(inter_area_mode(&model, &modes, INTER_AREA_BAND).is_err());
}

#[test]
fn single_in_band_mode_is_returned_even_if_well_damped() {
    let w = 2.0 * std::f64::consts::PI * 0.5;
    let zeta = 0.6;
    let s = c(-zeta * w, w * (1.0 - zeta * zeta).sqrt());
    let z = (1.0 + s * TS / 2.0) / (1.0 - s * TS / 2.0);
    let model = discrete_model(&[z, z.conj(), c(0.3, 0.0)], vec![vec![vec![0.0, 1.0, 0.5, 0.0]]]);
    let modes = extract_modes(&model).unwrap();
    let (mode, table) = inter_area_mode(&model, &modes, INTER_AREA_BAND).unwrap();
    assert!((mode.frequency_hz - 0.5 * (1.0 - zeta * zeta).sqrt()).abs() < 1e-9);
    assert!((mode.damping_ratio - zeta).abs() < 1e-9);
    assert_eq!(table.normalized, vec![vec![1.0]]);
}

/// Real polynomial `sum_j r_j prod_{i != j} (s - p_i)`, highest power first.
fn residue_numerator(poles: &[Complex64], residues: &[Complex64]) -> Vec<f64> {
    let n = poles.len();
    let mut acc = vec![c(0.0, 0.0); n];
    for (j, r) in residues.iter().enumerate() {
        let mut prod = vec![c(1.0, 0.0)];
        for (i, p) in poles.iter().enumerate() {
            if i == j {
                continue;
            }
            let mut next = vec![c(0.0, 0.0); prod.len() + 1];
            for (k, v) in prod.iter().enumerate() {
                next[k] += v;
                next[k + 1] -= v * p;
            }
            prod = next;
        }
        let off = n - prod.len();
        for (k, v) in prod.iter().enumerate() {
            acc[off + k] += r * v;
        }
    }
    acc.iter().map(|v| v.re).collect()
}

#[test]
fn constructed_residues_are_recovered() {
    let p1 = c(-0.27, 3.98);
    let p2 = c(-1.2, 8.5);
    let poles = [p1, p1.conj(), p2, p2.conj()];
    // residues[m][p] at p1 and p2; conjugate poles get conjugate residues
    let r = [
        [[c(0.4, -0.1), c(0.05, 0.2)], [c(-0.3, 0.25), c(0.1, 0.0)]],
        [[c(0.02, 0.6), c(-0.2, -0.1)], [c(0.15, 0.15), c(0.3, -0.4)]],
    ];
    let ct_den = Polynomial::from_roots(&poles).into_coeffs();
    let mut nums = vec![vec![Vec::new(); 2]; 2];
    let mut den_z = Vec::new();
    for m in 0..2 {
        for p in 0..2 {
            let [a, b] = r[m][p];
            let num = residue_numerator(&poles, &[a, a.conj(), b, b.conj()]);
            let ct = RationalTf::from_coeffs(&num, &ct_den, Domain::Continuous).unwrap();
            let dt = tustin_c2d(&ct, TS).unwrap();
            let lead = dt.den().coeffs()[0];
            den_z = dt.den().coeffs().iter().map(|x| x / lead).collect();
            nums[m][p] = dt.num().coeffs().iter().map(|x| x / lead).collect();
        }
    }
    let model = MimoTfModel::new(
        TS,
        Polynomial::new(den_z).unwrap(),
        nums.into_iter()
            .map(|row| row.into_iter().map(|n| Polynomial::new(n).unwrap()).collect())
            .collect(),
        names("u", 2),
        names("y", 2),
    )
    .unwrap();
    let modes = extract_modes(&model).unwrap();
    for (which, pole) in [(0usize, p1), (1, p2)] {
        let mode = modes
            .iter()
            .find(|md| (md.continuous_pole - pole).norm() < 1e-6)
            .unwrap();
        let table = residue_table(&model, mode).unwrap();
        for m in 0..2 {
            for p in 0..2 {
                let want = r[m][p][which];
                assert!(
                    (table.raw[m][p] - want).norm() < 1e-6,
                    "{m}{p}: {} vs {want}",
                    table.raw[m][p]
                );
            }
        }
    }
}

#[test]
fn residue_layout_selects_first_tie_line_and_third_input() {
    // two tie-lines, three inputs; the best and runner-up loops nearly tie
    let raw = vec![
        vec![c(0.3335, 0.0), c(0.1, 0.0), c(1.0, 0.0)],
        vec![c(0.2, 0.0), c(0.05, 0.0), c(0.99597, 0.0)],
    ];
    let mode = ModeInfo::from_discrete(c(0.9835, 0.1257), TS).unwrap();
    let table = ResidueTable::from_raw(mode, names("dP_", 2), names("u_", 3), raw).unwrap();
    assert_eq!(select_loop(&table), (0, 2));
    assert_eq!(table.normalized[0][2], 1.0);
    assert!((table.normalized[0][0] - 0.3335).abs() < 1e-12);
    assert!((table.normalized[1][2] - 0.99597).abs() < 1e-12);
}

#[test]
fn all_equal_table_picks_first_loop() {
    let mode = ModeInfo::from_discrete(c(0.9835, 0.1257), TS).unwrap();
    let raw = vec![vec![c(0.0, 0.5); 3]; 2];
    let table = ResidueTable::from_raw(mode, names("y", 2), names("u", 3), raw).unwrap();
    assert_eq!(select_loop(&table), (0, 0));
}

fn random_model(rng: &mut ChaCha8Rng) -> MimoTfModel {
    let k = rng.random_range(3..=6);
    let mut poles = Vec::new();
    while poles.len() < k {
        let cand = if k - poles.len() >= 2 && rng.random_bool(0.6) {
            Complex64::from_polar(rng.random_range(0.5..0.99), rng.random_range(0.05..2.5))
        } else {
            c(rng.random_range(-0.5..0.95), 0.0)
        };
        if poles.iter().any(|p: &Complex64| (p - cand).norm() < 0.05) {
            continue;
        }
        poles.push(cand);
        if cand.im != 0.0 {
            poles.push(cand.conj());
        }
    }
    let outs = rng.random_range(1..=3);
    let ins = rng.random_range(1..=3);
    let nums = (0..outs)
        .map(|_| {
            (0..ins)
                .map(|_| (0..=k).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect()
        })
        .collect();
    discrete_model(&poles, nums)
}

/// `(s - p) G(s)` at `s = p + h` with `G(s) = G_d(z(s))` evaluated directly.
fn limit_oracle(model: &MimoTfModel, m: usize, p: usize, pole: Complex64) -> Complex64 {
    let h = c(1e-6, 1e-6);
    let s = pole + h;
    let z = (1.0 + s * TS / 2.0) / (1.0 - s * TS / 2.0);
    let w = 1.0 / z;
    let eval = |coeffs: &[f64]| {
        coeffs
            .iter()
            .rev()
            .fold(c(0.0, 0.0), |acc, x| acc * w + *x)
    };
    let g = eval(model.numerator(m, p).coeffs()) / eval(model.denominator().coeffs());
    h * g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn residues_match_limit_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng);
        for mode in extract_modes(&model).unwrap() {
            let table = residue_table(&model, &mode).unwrap();
            for m in 0..model.outputs().len() {
                for p in 0..model.inputs().len() {
                    let want = limit_oracle(&model, m, p, mode.continuous_pole);
                    let got = table.raw[m][p];
                    prop_assert!((got - want).norm() <= 1e-4 * want.norm().max(1e-12), "{} vs {}", got, want);
                }
            }
        }
    }

    #[test]
    fn normalization_and_conjugate_symmetry(seed in any::<u64>(), alpha in 1e-3f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_model(&mut rng);
        for mode in extract_modes(&model).unwrap() {
            let table = residue_table(&model, &mode).unwrap();
            let max = table.normalized.iter().flatten().fold(0.0f64, |a, b| a.max(*b));
            prop_assert_eq!(max, 1.0);
            prop_assert!(table.normalized.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
            let (m, p) = select_loop(&table);
            prop_assert_eq!(table.normalized[m][p], 1.0);
            let scaled: Vec<Vec<Complex64>> = table.raw.iter().map(|row| row.iter().map(|r| r * alpha).collect()).collect();
            let t2 = ResidueTable::from_raw(mode, table.outputs.clone(), table.inputs.clone(), scaled).unwrap();
            prop_assert_eq!(select_loop(&t2), (m, p));
            if mode.is_oscillatory() {
                let conj = ModeInfo::from_discrete(mode.discrete_pole.conj(), TS).unwrap();
                let tc = residue_table(&model, &conj).unwrap();
                for (a, b) in table.raw.iter().flatten().zip(tc.raw.iter().flatten()) {
                    prop_assert!((a.conj() - b).norm() <= 1e-8 * (1.0 + a.norm()));
                }
                prop_assert_eq!(&table.normalized, &tc.normalized);
            }
        }
    }
}

#[test]
fn identified_and_fft_frequencies_agree_on_presets() {
    for name in ["two-area", "ten-machine"] {
        let cfg = PipelineConfig::for_preset(name).unwrap();
        let plant = cfg.build_plant().unwrap().unwrap();
        let data = pipeline::simulate(&cfg, Some(&plant)).unwrap();
        let id = pipeline::identify_stage(&cfg, &data).unwrap();
        let modal = pipeline::modes_stage(&cfg, &id.model).unwrap();
        let case = &cfg.evaluation.cases[0];
        let raw = apply_disturbance(&plant, &case.disturbance, 25.0, cfg.sampling.raw_sample_time)
            .unwrap();
        let opts = MeasurementOptions {
            window_offset: case.disturbance.start,
            disturbance_start: case.disturbance.start,
            ..Default::default()
        };
        let ring = measurement_channel(&raw, &opts).unwrap();
        let output = &id.model.outputs()[modal.selected.0];
        let f_fft = fft_dominant_frequency(ring.channel(output).unwrap(), ring.sample_time(), (0.1, 1.0))
            .unwrap();
        let f_id = modal.inter_area.frequency_hz;
        assert!((f_id - f_fft).abs() <= 0.05, "{name}: {f_id} vs {f_fft}");
    }
}
