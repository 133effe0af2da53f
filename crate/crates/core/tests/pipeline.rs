use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;
use wadc_core::metrics::{auc, metric_auc, metric_peak, metric_relative_error, peak, reduction_percent};
use wadc_core::pipeline::{
    csv_from_str, csv_import, csv_to_string, delay_sweep, evaluate_case, run, run_pipeline,
    PipelineConfig, RunOutput, RunReport,
};
use wadc_core::DataWindow;

fn two_area() -> &'static RunOutput {
    static OUT: OnceLock<RunOutput> = OnceLock::new();
    OUT.get_or_init(|| run(&PipelineConfig::for_preset("two-area").unwrap()).unwrap())
}

#[test]
fn auc_of_rectified_sine_over_one_period() {
    let ts = 1e-4;
    let x: Vec<f64> = (0..=10_000).map(|k| (2.0 * PI * k as f64 * ts).sin()).collect();
    let a = auc(&x, ts, 0.0, 0.0, 1.0).unwrap();
    assert!((a - 2.0 / PI).abs() < 1e-4, "{a}");
}

#[test]
fn auc_of_constant_and_zero() {
    let w = DataWindow::new(0.1, 0.0, vec!["x".into()], vec![vec![1.0; 21]]).unwrap();
    assert!((metric_auc(&w, "x", 0.0, 2.0).unwrap() - 2.0).abs() < 1e-12);
    let z = DataWindow::new(0.1, 0.0, vec!["x".into()], vec![vec![0.0; 21]]).unwrap();
    assert_eq!(metric_auc(&z, "x", 0.0, 2.0).unwrap(), 0.0);
    assert!(metric_auc(&w, "x", 1.0, 1.0).is_err());
}

#[test]
fn relative_error_examples() {
    assert_eq!(metric_relative_error(&[3.0, 4.0], &[3.0, 0.0]).unwrap(), 0.8);
    assert_eq!(metric_relative_error(&[1.0, -2.0], &[1.0, -2.0]).unwrap(), 0.0);
    assert_eq!(metric_relative_error(&[1.0, -2.0], &[0.0, 0.0]).unwrap(), 1.0);
    assert!(metric_relative_error(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    assert!(metric_relative_error(&[1.0], &[1.0, 0.0]).is_err());
}

#[test]
fn peak_uses_nearest_sample() {
    let ramp: Vec<f64> = (0..10).map(|k| 0.3 * k as f64).collect();
    assert!((peak(&ramp, 0.3, 0.0, 1.0).unwrap() - 0.9).abs() < 1e-12);
    let w = DataWindow::new(0.1, 2.0, vec!["x".into()], vec![vec![-0.5; 11]]).unwrap();
    assert_eq!(metric_peak(&w, "x", 2.37).unwrap(), 0.5);
    assert!(metric_peak(&w, "x", 9.0).is_err());
}

#[test]
fn peak_reduction_report_format() {
    // printed values are rounded, 0.0038 stands for 0.00378
    assert_eq!(format!("{:.2}", reduction_percent(0.01773, 0.00378)), "78.68");
    assert_eq!(format!("{:.4}", 0.00378), "0.0038");
}

#[test]
fn csv_header_example() {
    let w = csv_from_str("time,u_1,dP_1\n0,1,2\n0.1,3,4\n0.2,5,6\n").unwrap();
    assert_eq!(w.channel_count(), 2);
    assert_eq!(w.len(), 3);
    assert_eq!(w.names(), ["u_1", "dP_1"]);
    assert_eq!(w.channel("dP_1").unwrap(), [2.0, 4.0, 6.0]);
    assert!((w.sample_time() - 0.1).abs() < 1e-15);
}

#[test]
fn csv_rejects_jitter_with_row_number() {
    let err = csv_from_str("time,x\n0,1\n0.1,1\n0.2001,1\n0.3,1\n")
        .unwrap_err()
        .to_string();
    assert!(err.contains("row 4"), "{err}");
    assert!(csv_from_str("t,x\n0,1\n0.1,1\n").is_err());
    assert!(csv_from_str("time,x,y\n0,1,2\n0.1,1\n").is_err());
    assert!(csv_from_str("time,x\n0,1\n-0.1,1\n").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_lossless(
        ts in 1e-4f64..1.0,
        start in prop_oneof![Just(0.0), -10.0f64..10.0],
        values in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 3), 2..40),
    ) {
        let channels: Vec<Vec<f64>> = (0..3).map(|c| values.iter().map(|r| r[c]).collect()).collect();
        let w = DataWindow::new(ts, start, vec!["a".into(), "b".into(), "c".into()], channels).unwrap();
        let back = csv_from_str(&csv_to_string(&w).unwrap()).unwrap();
        prop_assert_eq!(back.channels(), w.channels());
        prop_assert_eq!(back.names(), w.names());
        prop_assert_eq!(back.start_time(), w.start_time());
        for k in 0..w.len() {
            prop_assert_eq!(back.time(k), w.time(k));
        }
        if start == 0.0 {
            prop_assert_eq!(back.sample_time(), ts);
        }
    }
}

#[test]
fn two_area_run_finds_one_in_band_mode_and_damps_it() {
    let r = &two_area().report;
    assert_eq!(r.inter_area.in_band, 1);
    assert_eq!(r.cases.len(), 1);
    for row in &r.cases[0].auc {
        assert!(row.reduction_percent >= 40.0, "{row:?}");
    }
    assert!(r.controller.closed_loop_spectral_radius < 1.0);
}

fn check_arithmetic(r: &RunReport) {
    for c in &r.cases {
        for row in &c.auc {
            assert_eq!(row.reduction_percent, reduction_percent(row.without, row.with));
            assert_eq!(row.reduction_percent, 100.0 * (1.0 - row.with / row.without));
        }
        for row in &c.peaks {
            assert_eq!(row.reduction_percent, 100.0 * (1.0 - row.with / row.without));
        }
    }
}

#[test]
fn report_reductions_match_their_areas() {
    check_arithmetic(&two_area().report);
}

#[test]
fn disabled_controller_gives_identical_traces() {
    let mut cfg = PipelineConfig::for_preset("two-area").unwrap();
    cfg.controller.enabled = false;
    cfg.evaluation.delays.clear();
    let out = run(&cfg).unwrap();
    for c in &out.cases {
        assert_eq!(c.with, c.without);
        for row in &c.report.auc {
            assert_eq!(row.reduction_percent, 0.0);
        }
    }
}

#[test]
fn same_seed_gives_byte_identical_reports() {
    let cfg = PipelineConfig::for_preset("two-area").unwrap();
    let a = run(&cfg).unwrap().report.without_timestamps().to_json();
    let b = two_area().report.without_timestamps().to_json();
    assert_eq!(a.as_bytes(), b.as_bytes());
}

#[test]
fn delay_sweep_edge_cases() {
    let cfg = PipelineConfig::for_preset("two-area").unwrap();
    let plant = cfg.build_plant().unwrap().unwrap();
    let out = two_area();
    let case = &cfg.evaluation.cases[0];

    let (single, _) = delay_sweep(&cfg, &plant, &out.design, case, &[0.05]).unwrap();
    assert_eq!(single.rows.len(), 1);
    assert_eq!(single.rows[0].relative_error, 0.0);

    let (dup, _) = delay_sweep(&cfg, &plant, &out.design, case, &[0.3, 0.05, 0.3]).unwrap();
    let delays: Vec<f64> = dup.rows.iter().map(|r| r.delay).collect();
    assert_eq!(delays, [0.05, 0.3, 0.3]);
    assert_eq!(dup.rows[1].relative_error, dup.rows[2].relative_error);
    assert_eq!(dup.rows[1].auc, dup.rows[2].auc);

    assert!(delay_sweep(&cfg, &plant, &out.design, case, &[]).is_err());
    assert!(delay_sweep(&cfg, &plant, &out.design, case, &[-0.1]).is_err());
}

#[test]
fn zero_extra_delay_reproduces_the_evaluated_case() {
    let cfg = PipelineConfig::for_preset("two-area").unwrap();
    let plant = cfg.build_plant().unwrap().unwrap();
    let out = two_area();
    let case = &cfg.evaluation.cases[0];
    let run = evaluate_case(&cfg, &plant, &out.design, case).unwrap();
    let (_, traces) = delay_sweep(&cfg, &plant, &out.design, case, &[0.0]).unwrap();
    assert_eq!(traces[0], run.with);
}

#[test]
fn report_is_recomputable_from_exported_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::for_preset("two-area").unwrap();
    let report = run_pipeline(&cfg, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let stored: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(stored, report);
    check_arithmetic(&stored);

    for c in &stored.cases {
        let with = csv_import(&dir.path().join(&c.trace_with)).unwrap();
        let without = csv_import(&dir.path().join(&c.trace_without)).unwrap();
        for row in &c.auc {
            assert_eq!(metric_auc(&with, &row.channel, c.auc_from, c.auc_to).unwrap(), row.with);
            assert_eq!(metric_auc(&without, &row.channel, c.auc_from, c.auc_to).unwrap(), row.without);
        }
        for row in &c.peaks {
            assert_eq!(metric_peak(&with, &row.channel, row.time).unwrap(), row.with);
            assert_eq!(metric_peak(&without, &row.channel, row.time).unwrap(), row.without);
        }
    }

    let sweep = stored.delay_sweep.as_ref().unwrap();
    let traces: Vec<DataWindow> = sweep
        .rows
        .iter()
        .map(|r| csv_import(&dir.path().join(&r.trace)).unwrap())
        .collect();
    let reference = traces[0].channel(&sweep.channel).unwrap();
    for (row, tr) in sweep.rows.iter().zip(&traces) {
        let ch = tr.channel(&sweep.channel).unwrap();
        assert_eq!(metric_relative_error(reference, ch).unwrap(), row.relative_error);
        assert_eq!(metric_auc(tr, &sweep.channel, sweep.auc_from, sweep.auc_to).unwrap(), row.auc);
    }
    assert!(dir.path().join("report.txt").exists());
    assert!(dir.path().join("residues.csv").exists());
}
