//! LP-file export checked by parsing the text back into a model.

use std::collections::HashMap;

use proptest::prelude::*;
use stabclust::{export_lp_file, LpModel, MipModel, RowSense};

#[derive(Debug, Default)]
struct Parsed {
    rows: Vec<(String, HashMap<String, f64>, String, f64)>,
    bounds: HashMap<String, (f64, f64)>,
    binaries: Vec<String>,
}

fn num(tok: &str) -> f64 {
    match tok {
        "+inf" | "inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        t => t.parse().unwrap_or_else(|_| panic!("bad number {t}")),
    }
}

fn terms(tokens: &[&str]) -> HashMap<String, f64> {
    let mut out = HashMap::new();
    let mut i = 0;
    while i < tokens.len() {
        let sign = match tokens[i] {
            "+" => 1.0,
            "-" => -1.0,
            t => panic!("expected sign, got {t}"),
        };
        let coef = num(tokens[i + 1]);
        out.insert(tokens[i + 2].to_string(), sign * coef);
        i += 3;
    }
    out
}

fn parse(text: &str) -> Parsed {
    let mut p = Parsed::default();
    let mut section = "";
    let mut pending = String::new();
    for line in text.lines() {
        let t = line.trim();
        if t.starts_with('\\') || t.is_empty() {
            continue;
        }
        match t {
            "Minimize" | "Subject To" | "Bounds" | "Binaries" | "End" => {
                section = match t {
                    "Minimize" => "obj",
                    "Subject To" => "st",
                    "Bounds" => "bounds",
                    "Binaries" => "bin",
                    _ => "end",
                };
                continue;
            }
            _ => {}
        }
        let continuation = line.starts_with("   ");
        match section {
            "st" => {
                if !continuation && !pending.is_empty() {
                    panic!("unterminated row {pending}");
                }
                pending.push(' ');
                pending.push_str(t);
                let toks: Vec<&str> = pending.split_whitespace().collect();
                if let Some(k) = toks.iter().position(|s| matches!(*s, ">=" | "<=" | "=")) {
                    let name = toks[0].trim_end_matches(':').to_string();
                    p.rows.push((name, terms(&toks[1..k]), toks[k].to_string(), num(toks[k + 1])));
                    pending.clear();
                }
            }
            "bounds" => {
                let toks: Vec<&str> = t.split_whitespace().collect();
                let b = match toks.as_slice() {
                    [name, "free"] => (name.to_string(), (f64::NEG_INFINITY, f64::INFINITY)),
                    [name, "=", v] => (name.to_string(), (num(v), num(v))),
                    [name, ">=", v] => (name.to_string(), (num(v), f64::INFINITY)),
                    [lo, "<=", name, "<=", hi] => (name.to_string(), (num(lo), num(hi))),
                    other => panic!("bad bound {other:?}"),
                };
                p.bounds.insert(b.0, b.1);
            }
            "bin" => p.binaries.push(t.to_string()),
            _ => {}
        }
    }
    assert!(pending.is_empty(), "unterminated row {pending}");
    p
}

fn parse_objective(text: &str) -> HashMap<String, f64> {
    let start = text.find("obj:").unwrap() + 4;
    let end = text.find("Subject To").unwrap();
    let toks: Vec<&str> = text[start..end].split_whitespace().collect();
    terms(&toks)
}

#[test]
fn single_binary_export() {
    let mut lp = LpModel::new(1);
    lp.set_objective(vec![-1.0]).unwrap();
    let text = export_lp_file(&MipModel::new(lp, vec![0]).unwrap()).unwrap();
    let p = parse(&text);
    assert_eq!(parse_objective(&text)["x0"], -1.0);
    assert!(p.rows.is_empty());
    assert_eq!(p.bounds["x0"], (0.0, 1.0));
    assert_eq!(p.binaries, vec!["x0".to_string()]);
    assert_eq!(text.lines().filter(|l| l.contains("<=")).count(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn export_round_trips(
        n in 1usize..40,
        rows in proptest::collection::vec((proptest::collection::vec(-1e3f64..1e3, 40), 0u8..3, -1e3f64..1e3), 0..8),
        seed_bin in proptest::collection::vec(any::<bool>(), 40),
        obj in proptest::collection::vec(-1e6f64..1e6, 40),
    ) {
        let mut lp = LpModel::new(n);
        lp.set_objective(obj[..n].to_vec()).unwrap();
        lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        if n > 1 {
            lp.set_bounds(1, -2.5, f64::INFINITY).unwrap();
        }
        for (a, s, b) in &rows {
            let sense = [RowSense::Ge, RowSense::Le, RowSense::Eq][*s as usize];
            lp.add_row(a[..n].to_vec(), sense, *b).unwrap();
        }
        let bins: Vec<usize> = (2..n).filter(|&j| seed_bin[j]).collect();
        let model = MipModel::new(lp, bins.clone()).unwrap();
        let text = export_lp_file(&model).unwrap();
        let p = parse(&text);
        let lp = model.lp();
        let objective = parse_objective(&text);
        for j in 0..n {
            let c = lp.objective()[j];
            prop_assert_eq!(objective.get(&format!("x{j}")).copied().unwrap_or(0.0), c);
            prop_assert_eq!(p.bounds[&format!("x{j}")], lp.bounds()[j]);
        }
        prop_assert_eq!(p.rows.len(), lp.n_rows());
        for (i, (name, coeffs, op, rhs)) in p.rows.iter().enumerate() {
            let row = lp.row(i);
            prop_assert_eq!(name, &format!("r{i}"));
            prop_assert_eq!(*rhs, row.rhs);
            let expect = match row.sense { RowSense::Ge => ">=", RowSense::Le => "<=", RowSense::Eq => "=" };
            prop_assert_eq!(op.as_str(), expect);
            for j in 0..n {
                prop_assert_eq!(coeffs.get(&format!("x{j}")).copied().unwrap_or(0.0), row.coeffs[j]);
            }
        }
        let expect_bins: Vec<String> = bins.iter().map(|j| format!("x{j}")).collect();
        prop_assert_eq!(p.binaries, expect_bins);
    }
}
