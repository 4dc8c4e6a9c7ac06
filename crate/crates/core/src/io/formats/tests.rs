use proptest::prelude::*;

use super::*;

const ORIGIN: &str = "test.csv";

fn human() -> ValueScale<f64> {
    ValueScale::human()
}

fn kernel_text(rows: &[&[f64]]) -> String {
    let n = rows.len();
    let mut s = (0..n).map(|i| i.to_string()).collect::<Vec<_>>().join(",");
    s.push('\n');
    for row in rows {
        s.push_str(&row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

fn line_of_error(e: &Error) -> u64 {
    match e {
        Error::Parse { line, .. } => *line,
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn bundled_catalog_has_fifty_actions() {
    let actions = default_actions();
    assert_eq!(actions.len(), 50);
    assert!(actions.iter().all(|(_, d)| !d.trim().is_empty()));
}

#[test]
fn actions_need_rows_and_ordered_ids() {
    assert!(parse_actions_str("id,description\n", ORIGIN).is_err());
    let err = parse_actions_str("id,description\n0,a\n2,b\n1,c\n", ORIGIN).unwrap_err();
    assert_eq!(line_of_error(&err), 3);
    assert!(parse_actions_str("id,text\n0,a\n", ORIGIN).is_err());
    assert!(parse_actions_str("id,description\n0,\"  \"\n", ORIGIN).is_err());
    let quoted = parse_actions_str("id,description\n0,\"Steal, then lie\"\n", ORIGIN).unwrap();
    assert_eq!(quoted.description(0), Some("Steal, then lie"));
}

#[test]
fn scores_cover_every_id() {
    let full: String = std::iter::once("action_id,value_name,score\n".to_string())
        .chain((0..50).map(|i| format!("{i},morality,{}\n", i * 2)))
        .chain((0..50).map(|i| format!("{i},fairness,50\n")))
        .collect();
    let s = parse_scores_str(&full, ORIGIN, "morality", Some(50), human()).unwrap();
    assert_eq!(s.len(), 50);
    assert_eq!(s.score(7), 14.0);
    assert_eq!(s.value_name(), "morality");

    let missing: String = std::iter::once("action_id,value_name,score\n".to_string())
        .chain((0..50).filter(|&i| i != 31).map(|i| format!("{i},morality,10\n")))
        .collect();
    let err = parse_scores_str(&missing, ORIGIN, "morality", Some(50), human()).unwrap_err();
    assert!(err.to_string().contains("[31]"), "{err}");

    let out_of_scale = "action_id,value_name,score\n0,morality,120\n";
    let err = parse_scores_str(out_of_scale, ORIGIN, "morality", Some(1), human()).unwrap_err();
    assert_eq!(line_of_error(&err), 2);
    assert!(err.to_string().contains("outside"));

    let dup = "action_id,value_name,score\n0,m,1\n0,m,2\n";
    assert!(parse_scores_str(dup, ORIGIN, "m", Some(1), human()).is_err());
    assert!(parse_scores_str(dup, ORIGIN, "other", Some(1), human()).is_err());
}

#[test]
fn kernel_dimension_and_content_errors() {
    let ok = kernel_text(&[&[1.0, 0.5], &[0.5, 1.0]]);
    assert_eq!(parse_kernel_str(&ok, ORIGIN, Some(2)).unwrap().kernel.n(), 2);
    assert!(matches!(parse_kernel_str(&ok, ORIGIN, Some(3)), Err(Error::DimensionMismatch { expected: 3, found: 2 })));

    let ragged = "0,1,2\n1,0.5,0.2\n0.5,1,0.3\n";
    assert!(parse_kernel_str(ragged, ORIGIN, None).is_err());
    let short_row = "0,1\n1,0.5\n0.5\n";
    assert_eq!(line_of_error(&parse_kernel_str(short_row, ORIGIN, None).unwrap_err()), 3);
    assert!(parse_kernel_str("0,1\n1,x\n0.5,1\n", ORIGIN, None).is_err());
    assert!(parse_kernel_str("0,1\n1,NaN\nNaN,1\n", ORIGIN, None).is_err());
    assert!(parse_kernel_str("1,0\n1,0.5\n0.5,1\n", ORIGIN, None).is_err());
    assert!(parse_kernel_str("", ORIGIN, None).is_err());
}

#[test]
fn asymmetric_kernel_is_symmetrized() {
    let text = kernel_text(&[&[1.0, 0.5], &[0.501, 1.0]]);
    let parsed = parse_kernel_str(&text, ORIGIN, None).unwrap();
    assert!((parsed.asymmetry - 1e-3).abs() < 1e-12);
    assert!((parsed.kernel.get(0, 1) - 0.5005).abs() < 1e-12);
    assert_eq!(parsed.kernel.get(0, 1), parsed.kernel.get(1, 0));
}

#[test]
fn missing_file_is_a_parse_error() {
    let err = parse_kernel("/definitely/not/here.csv", None).unwrap_err();
    assert!(err.is_validation());
}

fn kernel_strategy() -> impl Strategy<Value = SimilarityMatrix<f64>> {
    (1usize..8).prop_flat_map(|n| {
        proptest::collection::vec(-1e6f64..1e6, n * n).prop_map(move |v| {
            SimilarityMatrix::from_fn(n, Provenance::File, |i, j| {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                v[a * n + b]
            })
            .unwrap()
        })
    })
}

proptest! {
    #[test]
    fn kernel_round_trip_is_bit_exact(k in kernel_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        write_kernel(&path, &k).unwrap();
        let back = parse_kernel(&path, Some(k.n())).unwrap();
        prop_assert_eq!(back.asymmetry, 0.0);
        for i in 0..k.n() {
            for j in 0..k.n() {
                prop_assert_eq!(back.kernel.get(i, j).to_bits(), k.get(i, j).to_bits());
            }
        }
    }

    #[test]
    fn scores_round_trip_is_bit_exact(values in proptest::collection::vec(0.0f64..=100.0, 1..60)) {
        let s = ValueScores::new("care", values, human()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_scores(&path, &[&s]).unwrap();
        let back = parse_scores(&path, "care", Some(s.len()), human()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn actions_round_trip(texts in proptest::collection::vec("[a-zA-Z ,\"']{0,30}[a-z]", 1..20)) {
        let actions = ActionSet::new(texts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_actions(&path, &actions).unwrap();
        prop_assert_eq!(parse_actions(&path).unwrap(), actions);
    }

    #[test]
    fn mutated_inputs_never_panic(cut in 0usize..400, insert in proptest::option::of("[,\"\n0-9a-z.\\-]{1,4}")) {
        let base_kernel = kernel_text(&[&[1.0, 0.25, 0.5], &[0.25, 1.0, 0.75], &[0.5, 0.75, 1.0]]);
        let base_scores = "action_id,value_name,score\n0,m,10\n1,m,90\n2,m,50\n";
        let base_actions = "id,description\n0,one\n1,\"two, quoted\"\n2,three\n";
        for base in [base_kernel.as_str(), base_scores, base_actions] {
            let at = cut.min(base.len());
            let at = (0..=at).rev().find(|&i| base.is_char_boundary(i)).unwrap_or(0);
            let mut text = base[..at].to_string();
            if let Some(extra) = &insert {
                text.push_str(extra);
            }
            text.push_str(&base[at..]);
            let _ = parse_kernel_str(&text, ORIGIN, None);
            let _ = parse_scores_str(&text, ORIGIN, "m", None, human());
            let _ = parse_actions_str(&text, ORIGIN);
        }
    }
}
