use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SIMPLEX_PRODUCT: f64 = 64.0 / 9.0;
const CUBE_PRODUCT: f64 = 32.0 / 3.0;

fn mahler(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mahler"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn product_of_builtins() {
    let out = mahler(&["product", "--shape", "simplex"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert!((r["product"].as_f64().unwrap() - SIMPLEX_PRODUCT).abs() < 1e-6 * SIMPLEX_PRODUCT);
    for key in [
        "vertices",
        "facets",
        "santalo_point",
        "polar_volume",
        "volume",
        "product",
        "residual",
        "iterations",
    ] {
        assert!(r.get(key).is_some(), "missing {key}");
    }

    let r = json(&mahler(&["product", "--shape", "cube"]));
    assert!((r["product"].as_f64().unwrap() - CUBE_PRODUCT).abs() < 1e-6 * CUBE_PRODUCT);
    assert_eq!(r["vertices"], 8);
    assert_eq!(r["facets"], 6);
}

#[test]
fn product_from_off_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("oct.off");
    fs::write(&path, "OFF\n6 8 0\n1 0 0\n-1 0 0\n0 1 0\n0 -1 0\n0 0 1\n0 0 -1\n3 0 2 4\n3 2 1 4\n3 1 3 4\n3 3 0 4\n3 2 0 5\n3 1 2 5\n3 3 1 5\n3 0 3 5\n").unwrap();
    let out = mahler(&["product", "--in", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!((json(&out)["product"].as_f64().unwrap() - CUBE_PRODUCT).abs() < 1e-6);
}

#[test]
fn bad_input_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.off");
    fs::write(&bad, "OFF\n4 four 0\n0 0 0\n").unwrap();
    let out = mahler(&["product", "--in", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let flat = dir.path().join("flat.off");
    fs::write(&flat, "OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n1 1 0\n4 0 1 3 2\n").unwrap();
    assert_eq!(
        mahler(&["product", "--in", flat.to_str().unwrap()]).status.code(),
        Some(2)
    );

    let missing = dir.path().join("missing.off");
    assert_eq!(
        mahler(&["product", "--in", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(mahler(&["product", "--shape", "torus"]).status.code(), Some(2));
    assert_eq!(
        mahler(&["product", "--shape", "cube", "--random", "5"]).status.code(),
        Some(2)
    );
    assert_eq!(mahler(&["product"]).status.code(), Some(2));
}

#[test]
fn verify_random_suite_passes_and_is_deterministic() {
    let a = mahler(&["verify", "--seed", "1", "--count", "50"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    let r = json(&a);
    assert_eq!(r["failed"], 0);
    assert_eq!(r["instances"], 55);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
    let b = mahler(&["verify", "--seed", "1", "--count", "50"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn verify_single_shapes() {
    let find = |r: &Value, name: &str| -> Value {
        r["checks"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["name"] == name)
            .unwrap()
            .clone()
    };
    let r = json(&mahler(&["verify", "--shape", "tetrahedron"]));
    let bound = find(&r, "dimension_bound");
    assert_eq!(bound["pass"], true);
    assert!(bound["detail"].as_str().unwrap().contains("dim 4, bound 4"));

    let r = json(&mahler(&["verify", "--shape", "cube"]));
    assert_eq!(find(&r, "alternative")["detail"], "PolarMoves");
    assert_eq!(r["failed"], 0);
}

#[test]
fn verify_flags_broken_polytopes() {
    let p = mahler_core::shapes::cube();
    assert!(mahler_cli::verify::check_polytope("cube", &p, 0).iter().all(|c| c.pass));
    // flattening keeps the lattice but breaks every geometric invariant
    let flat = p.map_points(|x| mahler_core::Point3::new(x.x, x.y, 0.0));
    let checks = mahler_cli::verify::check_polytope("flat", &flat, 0);
    assert!(checks.iter().any(|c| c.name == "valid" && !c.pass));

    // a dented cube is rejected at load time
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dented.off");
    let dented = p.map_points(|x| {
        if x.x < 0.0 && x.y < 0.0 && x.z < 0.0 {
            x * -0.5
        } else {
            *x
        }
    });
    fs::write(&path, mahler_core::off::write_off(&dented)).unwrap();
    assert_eq!(
        mahler(&["verify", "--in", path.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn descend_writes_trace_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = mahler(&[
        "descend",
        "--shape",
        "cube",
        "--cap-iter",
        "50",
        "--out",
        run.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = json(&out);
    let last = r["final_product"].as_f64().unwrap();
    assert!((SIMPLEX_PRODUCT - 1e-6..=CUBE_PRODUCT).contains(&last));
    assert_eq!(r["monotone"], true);

    let trace = fs::read_to_string(run.join("trace.jsonl")).unwrap();
    let steps: Vec<Value> = trace.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(steps.len() as u64, r["steps"].as_u64().unwrap());
    let mut prev = r["initial_product"].as_f64().unwrap();
    for s in &steps {
        let v = s["product"].as_f64().unwrap();
        assert!(v < prev);
        prev = v;
        let off = run.join(format!("step_{:03}.off", s["index"].as_u64().unwrap()));
        assert!(Path::new(&off).exists());
        let p = mahler_core::off::read_off_file(&off).unwrap();
        assert_eq!(p.num_vertices() as u64, s["vertices"].as_u64().unwrap());
    }
    assert!(run.join("step_000.off").exists());
    assert!(run.join("summary.json").exists());
}

#[test]
fn descend_simplex_and_random() {
    let r = json(&mahler(&["descend", "--shape", "simplex"]));
    assert_eq!(r["termination"], "ReachedTetrahedron");
    assert_eq!(r["steps"], 0);
    let r = json(&mahler(&["descend", "--random", "10", "--seed", "3"]));
    assert_eq!(r["monotone"], true);
    assert!(r["final_product"].as_f64().unwrap() >= SIMPLEX_PRODUCT - 1e-6);
}

#[test]
fn sweep_cube_volume_is_constant() {
    let out = mahler(&["sweep", "--shape", "cube", "--theta", "1,0,0"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("t,volume,polar_volume,product,lattice_ok"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 9);
    for row in &rows {
        assert!((row[1].parse::<f64>().unwrap() - 8.0).abs() < 1e-12);
        assert_eq!(row[4], "true");
    }
}

#[test]
fn sweep_trivial_shear_keeps_simplex_value() {
    let dir = tempfile::tempdir().unwrap();
    let pts = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
    let (w, beta) = ([0.3, -0.2, 0.5], 0.1);
    let alpha: Vec<f64> = pts
        .iter()
        .map(|x| x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + beta)
        .collect();
    let speed = dir.path().join("speed.json");
    fs::write(
        &speed,
        serde_json::json!({"theta": [0.2, 1.0, -0.4], "alpha": alpha}).to_string(),
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let out = mahler(&[
        "sweep",
        "--shape",
        "simplex",
        "--speed",
        speed.to_str().unwrap(),
        "--samples",
        "11",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = csv_rows(&fs::read_to_string(&csv).unwrap());
    assert_eq!(rows.len(), 11);
    for row in &rows {
        assert!((row[3].parse::<f64>().unwrap() - SIMPLEX_PRODUCT).abs() < 1e-9);
    }
}

#[test]
fn sweep_inadmissible_speed_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let speed = dir.path().join("bad.json");
    fs::write(&speed, r#"{"theta": [1, 0, 0], "alpha": [1, 0, 0, 0, 0, 0, 0, 0]}"#).unwrap();
    let out = mahler(&["sweep", "--shape", "cube", "--speed", speed.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let msg = stderr(&out);
    // the only constrained facet through vertex 0 is the square at x = -1
    let line = msg
        .lines()
        .find(|l| l.trim_start().starts_with("facet"))
        .expect("facet listed");
    let ring: Vec<&str> = line
        .split('[')
        .nth(1)
        .unwrap()
        .split(']')
        .next()
        .unwrap()
        .split_whitespace()
        .collect();
    assert_eq!(ring.len(), 4, "{msg}");

    fs::write(&speed, r#"{"theta": [1, 0, 0], "alpha": [1, 0]}"#).unwrap();
    let out = mahler(&["sweep", "--shape", "cube", "--speed", speed.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn speeds_report_fields() {
    let out = mahler(&["speeds", "--shape", "cube", "--theta", "1,0,0"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = json(&out);
    assert_eq!(r["dim"], 6);
    assert_eq!(r["trivial_dim"], 4);
    assert_eq!(r["basis"].as_array().unwrap().len(), 6);
    assert_eq!(r["alternative"], "PolarMoves");
    assert!(r["criteria"].get("primal").is_some() && r["criteria"].get("polar").is_some());
    let r = json(&mahler(&["speeds", "--shape", "octahedron", "--theta=-1,2,0.5"]));
    assert_eq!(r["dim"], 6);
}
