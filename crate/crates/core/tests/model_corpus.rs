//! The bundled example corpus parses, matches its published parameters,
//! and survives the print/parse round trip.

use saw_core::interval::Interval;
use saw_core::model::{parse_model, Model};

fn corpus_path(name: &str) -> String {
    format!("{}/../../example/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn load(name: &str) -> Model<f64> {
    let text = std::fs::read_to_string(corpus_path(name))
        .unwrap_or_else(|e| panic!("reading {name}: {e}"));
    parse_model(&text).unwrap_or_else(|e| panic!("parsing {name}: {e}"))
}

#[test]
fn every_corpus_file_parses() {
    for i in 1..=6 {
        let m = load(&format!("model{i}.txt"));
        assert!(m.warnings.is_empty(), "model{i} has warnings");
    }
}

#[test]
fn corpus_round_trips() {
    for i in 1..=6 {
        let m = load(&format!("model{i}.txt"));
        let reparsed: Model<f64> = parse_model(&m.to_text()).unwrap();
        assert_eq!(m, reparsed, "model{i} round trip");
    }
}

#[test]
fn model1_matches_published_example() {
    let m = load("model1.txt");
    assert_eq!(m.state_dim, 2);
    assert_eq!(m.input_dim, 1);
    assert_eq!(m.grid_count, 50);
    assert_eq!(m.state_names, vec!["x1", "x2"]);
    assert_eq!(m.input_names, vec!["u"]);
    assert_eq!(m.period, 0.2);
    assert_eq!(m.step_size, 0.01);
    assert_eq!(m.miss_budget, 2);
    assert_eq!(m.window, 5);
    for j in 0..2 {
        assert_eq!(m.safe_box[j], Interval::new(-3.0, 3.0));
        assert_eq!(m.initial_box[j], Interval::new(-1.0, 1.0));
    }
    assert_eq!(m.micro_steps(), 20);

    // The dynamics and control law evaluate like the published system.
    let f2 = &m.odes[1];
    assert!((f2.eval_real(&[0.0, 1.0, 2.0]).unwrap() - 1.9).abs() < 1e-15);
    let pi = &m.input_laws[0];
    assert!((pi.eval_real(&[1.0, 1.0]).unwrap() + 1.525).abs() < 1e-15);
}

#[test]
fn corpus_table_parameters() {
    let expect = [
        // (file, d, q, p, period, (m, K))
        ("model1.txt", 2, 1, 50, 0.2, (2, 5)),
        ("model2.txt", 2, 2, 30, 0.3, (1, 10)),
        ("model3.txt", 2, 1, 100, 1.6, (2, 10)),
        ("model4.txt", 1, 1, 30, 0.6, (2, 100)),
        ("model5.txt", 1, 1, 100, 1.6, (1, 5)),
        ("model6.txt", 2, 1, 50, 0.1, (2, 15)),
    ];
    for (name, d, q, p, period, (m_, k)) in expect {
        let m = load(name);
        assert_eq!((m.state_dim, m.input_dim, m.grid_count), (d, q, p), "{name}");
        assert_eq!(m.period, period, "{name}");
        assert_eq!((m.miss_budget, m.window), (m_, k), "{name}");
    }
}
