use std::io::Write;

use proptest::prelude::*;

use voisim::error::ConfigError;
use voisim::export::{export_run, plot_svg, summary_table, trace_table, ExportFormat, TRACE_SCHEMA};
use voisim::scenario::{builtin, builtin_source, load_scenario, resolve_config, ScenarioConfig};
use voisim::{run_batch, run_once, PolicySpec};

const BROADCAST: &str = "spacecraft_broadcast";

fn text() -> &'static str {
    builtin_source(BROADCAST).unwrap()
}

fn corrupted(from: &str, to: &str) -> ConfigError {
    assert!(text().contains(from), "fixture lacks {from}");
    ScenarioConfig::from_toml(&text().replacen(from, to, 1))
        .and_then(|c| c.build())
        .expect_err("corruption must be rejected")
}

#[test]
fn loads_from_disk() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(text().as_bytes()).unwrap();
    let sc = load_scenario(file.path()).unwrap();
    assert_eq!(sc, builtin(BROADCAST).unwrap());
    assert_eq!(sc.theta[0].len(), 1001);
    assert_eq!(sc.sources[0].horizon(), 1000);
}

#[test]
fn missing_file_and_unknown_name() {
    let err = resolve_config("/nonexistent/scenario.toml").unwrap_err();
    assert!(matches!(err, ConfigError::UnknownScenario { .. }));
    assert!(err.to_string().contains("spacecraft_multiaccess"));
}

#[test]
fn out_of_range_rate_names_the_link() {
    let err = corrupted("lambda = 0.1", "lambda = 1.3");
    assert_eq!(err, ConfigError::RateOutOfRange { key: "links[1].lambda".into(), value: 1.3 });
}

#[test]
fn missing_key_is_named() {
    let err = corrupted("horizon = 1000\n", "");
    assert_eq!(err, ConfigError::MissingKey { key: "horizon".into() });
}

#[test]
fn non_pd_measurement_noise() {
    let err = corrupted("v = { diag = [1.0, 1.0, 1.0], scale = 1e-3 }", "v = { diag = [1.0, 0.0, 1.0], scale = 1e-3 }");
    assert!(err.to_string().contains("sources[0].v"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn each_corruption_yields_one_named_diagnostic(
        which in 0usize..6,
        bad_rate in prop_oneof![1.0001f64..10.0, -10.0f64..-0.0001],
        negative in -10.0f64..-1e-9,
    ) {
        let (from, to, key) = match which {
            0 => ("lambda = 0.3".to_string(), format!("lambda = {bad_rate}"), "links[0].lambda"),
            1 => ("theta = [1.1e-5]".into(), format!("theta = [{negative}]"), "theta[0]"),
            2 => ("omega = [1.0, 1.0]".into(), format!("omega = [1.0, {negative}]"), "omega[1]"),
            3 => ("w = { diag = [0.2245, 0.2245, 0.0025]".into(), format!("w = {{ diag = [0.2245, {negative}, 0.0025]"), "sources[0].w"),
            4 => ("m0 = [0.0, 0.0, 0.0]".into(), "m0 = [0.0, 0.0]".into(), "sources[0].m0"),
            _ => ("omega = [1.0, 1.0]".into(), "omega = [1.0, [1.0, 2.0]]".into(), "omega[1]"),
        };
        let err = corrupted(&from, &to);
        let msg = err.to_string();
        prop_assert!(msg.contains(&format!("`{key}`")), "{} does not name {}", msg, key);
    }
}

#[test]
fn trace_table_layout() {
    let sc = builtin("spacecraft_multiaccess").unwrap();
    let m = run_once(&sc, &PolicySpec::voi(), 3).unwrap();
    let table = trace_table(&m);
    let mut lines = table.lines();
    let comment = lines.next().unwrap();
    assert!(comment.starts_with(&format!("# {TRACE_SCHEMA}")));
    assert_eq!(
        lines.next().unwrap(),
        "k,sq_err_1,sq_err_2,u_1,u_2,gamma_1,gamma_2,lambda_1,lambda_2,chi_1,chi_2,rho_1,rho_2"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1001);

    // Reals survive the text round trip bit for bit.
    for (row, step) in rows.iter().zip(&m.steps) {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[0].parse::<usize>().unwrap(), step.k);
        for l in 0..2 {
            assert_eq!(cells[1 + l].parse::<f64>().unwrap().to_bits(), step.links[l].sq_error.to_bits());
            assert_eq!(cells[9 + l].parse::<f64>().unwrap().to_bits(), step.decision.chi[l].to_bits());
        }
    }
}

#[test]
fn empty_horizon_has_one_row() {
    let sc = builtin(BROADCAST).unwrap().with_horizon(0).unwrap();
    let m = run_once(&sc, &PolicySpec::voi(), 1).unwrap();
    assert_eq!(trace_table(&m).lines().count(), 3);
}

#[test]
fn exports_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let sc = builtin("spacecraft_broadcast_bursty").unwrap();
    let m = run_once(&sc, &"periodic:15".parse().unwrap(), 5).unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    export_run(&m, ExportFormat::Table, &a).unwrap();
    export_run(&m.clone(), ExportFormat::Table, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(export_run(&m, ExportFormat::Table, &a.join("x.csv")).is_err());
}

#[test]
fn plot_has_traces_and_events() {
    let sc = builtin(BROADCAST).unwrap();
    let m = run_once(&sc, &"periodic:15".parse().unwrap(), 5).unwrap();
    let svg = plot_svg(&m);
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert_eq!(svg.matches("<polyline").count(), 2);
    let events: usize = m.link_transmissions.iter().sum();
    assert!(events > 0);
    assert!(svg.trim_end().ends_with("</svg>"));
}

#[test]
fn summary_marks_missing_standard_errors() {
    let sc = builtin(BROADCAST).unwrap().with_horizon(50).unwrap();
    let s = run_batch(&sc, &[PolicySpec::voi(), PolicySpec::periodic(15)], &[9]).unwrap();
    let table = summary_table(&s);
    assert!(table.lines().skip(2).all(|l| l.ends_with(",n/a")));
    assert!(table.contains("paired,periodic:15 - voi,phi,"));
}
