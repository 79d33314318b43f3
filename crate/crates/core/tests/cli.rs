use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn hedonic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hedonic"))
        .args(args)
        .env_remove("HEDONIC_INPUT")
        .env_remove("HEDONIC_OUTPUT")
        .env_remove("HEDONIC_SPEC")
        .env_remove("HEDONIC_ALPHA")
        .env_remove("HEDONIC_SEED")
        .env_remove("HEDONIC_FORMAT")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    assert!(!out.status.success(), "unexpected success");
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn synth(dir: &TempDir, name: &str, extra: &[&str]) -> PathBuf {
    let path = dir.path().join(name);
    let p = path.to_str().unwrap();
    let mut args = vec!["synth", "--output", p];
    args.extend_from_slice(extra);
    stdout(&hedonic(&args));
    path
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn fit_renders_the_coefficient_table() {
    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "p.csv", &["--n", "3000", "--seed", "4", "--noise-sigma", "0.17"]);
    let text = stdout(&hedonic(&["fit", "--input", s(&input)]));
    let labels = [
        "Intercept",
        "R1A",
        "R1B",
        "R2",
        "S2",
        "log_lotsqfeet",
        "log_lotdimb",
        "log_lotdima",
        "log_totbldgft",
        "log_bathrooms",
        "age",
        "age_sq",
        "condition",
        "taxrate",
    ];
    for l in labels {
        assert!(
            text.lines().any(|line| line.split_whitespace().next() == Some(l)),
            "missing {l}:\n{text}"
        );
    }
    for stat in ["F-Value", "R-Square", "Adj R-Square", "n "] {
        assert!(text.lines().any(|line| line.starts_with(stat)), "missing {stat}");
    }
    assert!(text.contains("rows read 3000, dropped 0, used 3000"));
    assert!(text.contains("* significant at the 10% level"));
}

#[test]
fn noiseless_fit_prints_unit_r_square() {
    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "p.csv", &["--n", "500", "--noise-sigma", "0"]);
    let out = hedonic(&["fit", "-i", s(&input)]);
    let text = stdout(&out);
    let r2 = text.lines().find(|l| l.starts_with("R-Square")).unwrap();
    assert!(r2.ends_with("1.0000"), "{r2}");
    assert!(text.contains("exact fit"));
}

#[test]
fn formats_agree_numerically() {
    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "p.csv", &["--n", "2000", "--seed", "8", "--noise-sigma", "0.2"]);
    let text = stdout(&hedonic(&["fit", "-i", s(&input)]));
    let csv_text = stdout(&hedonic(&["fit", "-i", s(&input), "--format", "csv"]));
    let json_text = stdout(&hedonic(&["fit", "-i", s(&input), "--format", "json"]));
    let json: serde_json::Value = serde_json::from_str(&json_text).unwrap();

    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let records: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let coefs: Vec<&csv::StringRecord> = records.iter().filter(|r| &r[0] == "coefficient").collect();
    let rows = json["inference"]["rows"].as_array().unwrap();
    assert_eq!(coefs.len(), 14);
    assert_eq!(rows.len(), 14);
    for (rec, row) in coefs.iter().zip(rows) {
        assert_eq!(&rec[1], row["label"].as_str().unwrap());
        for (col, key) in [(2, "estimate"), (3, "std_error")] {
            let c: f64 = rec[col].parse().unwrap();
            let j = row[key].as_f64().unwrap();
            // serde_json's default parser may land one ulp away
            assert!((c - j).abs() <= 1e-15 * c.abs(), "{} {key}: {c} vs {j}", &rec[1]);
            // text carries seven significant digits
            let line = text
                .lines()
                .find(|l| l.split_whitespace().next() == Some(&rec[1]))
                .unwrap();
            let t: f64 = line.split_whitespace().nth(col - 1).unwrap().parse().unwrap();
            assert!((t - c).abs() <= 5e-7 * c.abs(), "{} {key}: text {t} vs {c}", &rec[1]);
        }
        let t_csv: f64 = rec[4].parse().unwrap();
        assert!((t_csv - row["t_value"].as_f64().unwrap()).abs() <= 1e-15 * t_csv.abs());
    }
    let r2_csv: f64 = records.iter().find(|r| &r[1] == "R-Square").unwrap()[2]
        .parse()
        .unwrap();
    assert!((r2_csv - json["inference"]["r_squared"].as_f64().unwrap()).abs() <= 1e-15);
    let r2_text = text.lines().find(|l| l.starts_with("R-Square")).unwrap();
    assert!(r2_text.ends_with(&format!("{r2_csv:.4}")));
}

#[test]
fn duplicated_regressor_names_the_column() {
    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "p.csv", &["--n", "400", "--noise-sigma", "0.1"]);
    let spec = dir.path().join("dup.spec");
    fs::write(
        &spec,
        "response u1tfcash log\nintercept true\nterm R1A zone dummy(R1A)\nterm log_lotdima lotdima log\nterm lotdima_again lotdima log\n",
    )
    .unwrap();
    let err = stderr(&hedonic(&["fit", "-i", s(&input), "--spec", s(&spec)]));
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("lotdima_again"), "{err}");
}

#[test]
fn missing_input_is_a_single_line_error() {
    let err = stderr(&hedonic(&["fit", "--input", "/nonexistent/parcels.csv"]));
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error:"));
    let err = stderr(&hedonic(&["fit"]));
    assert!(err.contains("--input"));
}

#[test]
fn describe_shows_zone_counts_and_blocks() {
    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "p.csv", &["--n", "12475", "--seed", "2", "--noise-sigma", "0.17"]);
    let text = stdout(&hedonic(&["describe", "-i", s(&input)]));
    for (zone, count) in [("R1A", 4192), ("R1B", 5219), ("R2", 628), ("S2", 19)] {
        let line = text
            .lines()
            .find(|l| l.split_whitespace().next() == Some(zone))
            .unwrap();
        assert!(line.trim_end().ends_with(&count.to_string()), "{line}");
    }
    assert!(text.contains("Value was yes"));
    for block in 1..=3 {
        assert!(text.contains(&format!("Correlation matrix {block}")));
    }
    assert!(text.contains("R1A / R1B"));
    assert!(text.contains("condition / age"));
    assert!(text.contains("log_lotsqfeet / log_lotdima"));
}

#[test]
fn single_variable_group_is_unit_matrix() {
    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "p.csv", &["--n", "1000", "--noise-sigma", "0.1"]);
    let out = stdout(&hedonic(&[
        "describe",
        "-i",
        s(&input),
        "--group",
        "age",
        "--format",
        "json",
    ]));
    let json: serde_json::Value = serde_json::from_str(&out).unwrap();
    let corr = &json["correlations"];
    assert_eq!(corr.as_array().unwrap().len(), 1);
    assert_eq!(corr[0]["values"], serde_json::json!([[1.0]]));
}

#[test]
fn constant_column_is_named() {
    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "p.csv", &["--n", "1000", "--noise-sigma", "0.1"]);
    let text = fs::read_to_string(&input).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let tax = header.split(',').position(|c| c == "taxrate").unwrap();
    let mut flat = vec![header.to_string()];
    for line in lines {
        let mut cells: Vec<&str> = line.split(',').collect();
        cells[tax] = "7";
        flat.push(cells.join(","));
    }
    let flat_path = dir.path().join("flat.csv");
    fs::write(&flat_path, flat.join("\n")).unwrap();
    let err = stderr(&hedonic(&["describe", "-i", s(&flat_path)]));
    assert!(err.contains("taxrate"), "{err}");
}

#[test]
fn whatif_rows_and_published_effects() {
    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "p.csv", &["--n", "1000", "--seed", "3", "--noise-sigma", "0.1"]);
    let out = stdout(&hedonic(&[
        "whatif",
        "-i",
        s(&input),
        "--to-zone",
        "R2",
        "--format",
        "csv",
    ]));
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows[0], "pin,from,to,delta_log,naive_pct,exact_pct");
    assert_eq!(rows.len(), 1001);
    for r in rows.iter().skip(1).filter(|r| r.contains(",R2,R2,")) {
        assert!(r.ends_with(",0,0,0"), "{r}");
    }

    let table = fs::read_to_string(&input).unwrap();
    let other = table
        .lines()
        .find(|l| l.split(',').nth(2) == Some("OTHER"))
        .and_then(|l| l.split(',').next())
        .unwrap()
        .to_string();
    let out = stdout(&hedonic(&[
        "whatif",
        "-i",
        s(&input),
        "--to-zone",
        "R1A",
        "--pins",
        &other,
        "--published",
    ]));
    let line = out.lines().nth(1).unwrap();
    let cols: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(cols[..3], [other.as_str(), "OTHER", "R1A"]);
    assert_eq!(cols[4], "55.93");
    assert_eq!(cols[6], "NA");

    let err = stderr(&hedonic(&[
        "whatif",
        "-i",
        s(&input),
        "--to-zone",
        "R1A",
        "--pins",
        "nope",
    ]));
    assert!(err.contains("nope"));
}

#[test]
fn hypothesis_verdicts() {
    let dir = TempDir::new().unwrap();
    let zoning = synth(&dir, "z.csv", &["--n", "3000", "--truth", "zoning-only"]);
    let none = synth(&dir, "n.csv", &["--n", "3000", "--truth", "no-zoning"]);
    let met = stdout(&hedonic(&["hypothesis", "-i", s(&zoning)]));
    assert!(met.contains("hypothesis MET"), "{met}");
    assert!(met.contains("zoning share (ratio)"));
    assert!(met.contains("zoning share (delta R-square)"));
    let not = stdout(&hedonic(&["hypothesis", "-i", s(&none)]));
    assert!(not.contains("hypothesis NOT MET"), "{not}");
}

#[test]
fn synth_is_deterministic_and_logs() {
    let dir = TempDir::new().unwrap();
    let a = synth(&dir, "a.csv", &["--n", "200", "--seed", "5", "--noise-sigma", "0.1"]);
    let b = synth(&dir, "b.csv", &["--n", "200", "--seed", "5", "--noise-sigma", "0.1"]);
    let c = synth(&dir, "c.csv", &["--n", "200", "--seed", "6", "--noise-sigma", "0.1"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    let log: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a.log.json")).unwrap()).unwrap();
    assert_eq!(log["seed"], 5);
    assert_eq!(log["n"], 200);
    assert_eq!(log["true_log_values"].as_array().unwrap().len(), 200);
    assert!(log["rng"].as_str().unwrap().starts_with("chacha8"));

    let err = stderr(&hedonic(&[
        "synth",
        "--n",
        "0",
        "--output",
        s(&dir.path().join("z.csv")),
    ]));
    assert!(err.contains("--n"));
}

#[test]
fn environment_overrides_flags() {
    let dir = TempDir::new().unwrap();
    let a = synth(&dir, "a.csv", &["--n", "100", "--seed", "9", "--noise-sigma", "0.1"]);
    let env_path = dir.path().join("env.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_hedonic"))
        .args(["synth", "--n", "100", "--noise-sigma", "0.1"])
        .env("HEDONIC_SEED", "9")
        .env("HEDONIC_OUTPUT", &env_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&env_path).unwrap());
}

#[test]
fn reproduction_check_verdict() {
    let text = stdout(&hedonic(&["reproduction-check"]));
    assert!(text.contains("12 of 13 rows consistent; anomalous: age_sq"));
    let line = text.lines().find(|l| l.starts_with("age_sq")).unwrap();
    assert!(line.ends_with("ANOMALY"));

    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "p.csv", &["--n", "1000", "--noise-sigma", "0.1"]);
    let text = stdout(&hedonic(&["fit", "-i", s(&input), "--reproduction-check"]));
    assert!(text.contains("12 of 13 rows consistent"));
}

#[test]
fn alpha_changes_the_star_threshold() {
    let dir = TempDir::new().unwrap();
    let input = synth(&dir, "p.csv", &["--n", "600", "--seed", "1", "--noise-sigma", "0.3"]);
    let loose = stdout(&hedonic(&[
        "fit",
        "-i",
        s(&input),
        "--alpha",
        "0.5",
        "--format",
        "json",
    ]));
    let strict = stdout(&hedonic(&[
        "fit",
        "-i",
        s(&input),
        "--alpha",
        "1e-12",
        "--format",
        "json",
    ]));
    let count = |t: &str| {
        let v: serde_json::Value = serde_json::from_str(t).unwrap();
        v["inference"]["rows"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|r| r["significant"] == true)
            .count()
    };
    assert!(count(&loose) > count(&strict));
    let err = stderr(&hedonic(&["fit", "-i", s(&input), "--alpha", "1.5"]));
    assert!(err.contains("alpha"));
}
