use std::f64::consts::{FRAC_PI_2, TAU};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn shapecoh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapecoh")).args(args).output().unwrap()
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(&o));
    stdout(&o)
}

/// Data rows of a CSV file with a `# {json}` header, the header parsed.
fn read_csv(path: &Path) -> (serde_json::Value, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().strip_prefix("# ").expect("json header");
    let rows = lines.skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect();
    (serde_json::from_str(header).unwrap(), rows)
}

fn write_circle(path: &Path, n: usize, r: f64, center: (f64, f64)) {
    let mut s = String::from("# {\"closed\": true}\nx,y\n");
    for k in 0..n {
        let a = TAU * k as f64 / n as f64;
        s.push_str(&format!("{},{}\n", center.0 + r * a.cos(), center.1 + r * a.sin()));
    }
    fs::write(path, s).unwrap();
}

fn xy(rows: &[Vec<String>]) -> Vec<(f64, f64)> {
    rows.iter().map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap())).collect()
}

fn out_dir(tmp: &tempfile::TempDir, name: &str) -> PathBuf {
    tmp.path().join(name)
}

#[test]
fn systems_lists_every_flow() {
    let text = ok(shapecoh(&["systems"]));
    let ids: Vec<String> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["system"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(
        ids,
        ["double_gyre", "rossby_wave", "linear_saddle", "linear_rotation_scaling", "linear_shear_a", "linear_shear_b"]
    );
}

#[test]
fn saddle_field_has_constant_right_angle() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(&tmp, "field");
    ok(shapecoh(&[
        "field",
        "-c",
        &config("linear_saddle.json"),
        "--nx",
        "21",
        "--ny",
        "11",
        "-o",
        out.to_str().unwrap(),
    ]));
    let (header, rows) = read_csv(&out.join("field.csv"));
    assert_eq!(header["command"], "field");
    assert_eq!(header["config"]["system"], "linear_saddle");
    assert_eq!(header["config"]["grid"]["nx"], 21);
    assert_eq!(rows.len(), 21 * 11);
    for r in &rows {
        let theta: f64 = r[8].parse().unwrap();
        assert!((theta - FRAC_PI_2).abs() < 1e-10);
    }
}

#[test]
fn non_positive_epoch_is_a_config_error() {
    for t in ["0", "-1"] {
        let o = shapecoh(&["field", "-c", &config("linear_saddle.json"), "--T", t, "-o", "/nonexistent/never"]);
        assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
        assert!(stderr(&o).contains("epoch.T"), "{}", stderr(&o));
    }
}

#[test]
fn unknown_keys_and_bad_values_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"system":"linear_saddle","epoch":{"t0":0,"T":1},"colour":"red"}"#, "colour"),
        (r#"{"system":"linear_saddle","epoch":{"t0":0,"T":1,"unit":"days"}}"#, "unit"),
        (r#"{"system":"linear_saddle","epoch":{"t0":0,"T":1},"continuation":{"eps4":1}}"#, "eps4"),
        (r#"{"system":"linear_saddle","epoch":{"t0":0,"T":1},"params":{"lambda3":1}}"#, "lambda3"),
        (r#"{"system":"linear_saddle","epoch":{"t0":0,"T":1,"units":"days"}}"#, "days"),
        (r#"{"system":"vortex","epoch":{"t0":0,"T":1}}"#, "vortex"),
        (r#"{"system":"linear_saddle","epoch":{"t0":0,"T":1},"step":-1}"#, "step"),
        (r#"{"system":"linear_saddle"}"#, "epoch"),
    ];
    for (k, (text, needle)) in cases.iter().enumerate() {
        let path = tmp.path().join(format!("bad{k}.json"));
        fs::write(&path, text).unwrap();
        let o = shapecoh(&["field", "-c", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{text}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{text}: {}", stderr(&o));
    }
    let o = shapecoh(&["field", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn saddle_has_no_zero_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(&tmp, "zc");
    let text = ok(shapecoh(&[
        "zerocurves",
        "-c",
        &config("linear_saddle.json"),
        "--nx",
        "21",
        "--ny",
        "21",
        "-o",
        out.to_str().unwrap(),
    ]));
    assert!(text.starts_with("zero curves found: 0 "), "{text}");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("curves.json")).unwrap()).unwrap();
    assert_eq!(json["curves"].as_array().unwrap().len(), 0);
    assert_eq!(json["header"]["config"]["system"], "linear_saddle");
}

#[test]
fn zero_curve_outputs_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = out_dir(&tmp, name);
        let args = [
            "zerocurves",
            "--system",
            "double_gyre",
            "--t0",
            "0",
            "--T",
            "5",
            "--nx",
            "60",
            "--ny",
            "30",
            "--step",
            "0.01",
            "--n-random",
            "50",
            "--seed",
            "3",
            "-o",
            out.to_str().unwrap(),
        ];
        let summary = ok(shapecoh(&args));
        (summary, out)
    };
    let (s1, a) = run("a");
    let (s2, b) = run("b");
    assert_eq!(s1, s2);
    for f in ["curves.json", "curves.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let summary_count: usize = s1.split_whitespace().nth(3).unwrap().parse().unwrap();
    let per_curve = fs::read_dir(&a)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("curve_"))
        .count();
    assert!(per_curve <= summary_count);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("curves.json")).unwrap()).unwrap();
    assert_eq!(json["header"]["config"]["continuation"]["rng_seed"], 3);
    for c in json["curves"].as_array().unwrap() {
        for r in c["residuals"].as_array().unwrap() {
            assert!(r.as_f64().unwrap() < 1e-10);
        }
    }
}

#[test]
fn advect_with_equal_times_returns_the_input() {
    let tmp = tempfile::tempdir().unwrap();
    let curve = tmp.path().join("circle.csv");
    write_circle(&curve, 200, 0.3, (0.1, -0.2));
    let out = out_dir(&tmp, "adv");
    let text = ok(shapecoh(&[
        "advect",
        "-c",
        &config("linear_saddle.json"),
        "--curve",
        curve.to_str().unwrap(),
        "--ta",
        "0.4",
        "--tb",
        "0.4",
        "-o",
        out.to_str().unwrap(),
    ]));
    assert!(text.contains("aligned curvature residual: 0"), "{text}");
    let (_, rows) = read_csv(&out.join("advected.csv"));
    let input: Vec<(f64, f64)> = fs::read_to_string(&curve)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| {
            let (x, y) = l.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect();
    assert_eq!(xy(&rows), input);
}

#[test]
fn saddle_turns_a_circle_into_an_ellipse() {
    let tmp = tempfile::tempdir().unwrap();
    let curve = tmp.path().join("circle.csv");
    write_circle(&curve, 256, 0.25, (0.0, 0.0));
    let out = out_dir(&tmp, "adv");
    ok(shapecoh(&[
        "advect",
        "-c",
        &config("linear_saddle.json"),
        "--curve",
        curve.to_str().unwrap(),
        "--ta",
        "0",
        "--tb",
        "0.5",
        "-o",
        out.to_str().unwrap(),
    ]));
    let (header, rows) = read_csv(&out.join("advected.csv"));
    assert_eq!(header["closed"], true);
    let (ax, ay) = (0.25 * (-0.5f64).exp(), 0.25 * 0.5f64.exp());
    // inserted points come from an interpolant of the 256-gon, off the circle by ~1e-8
    for (x, y) in xy(&rows) {
        let e = (x / ax).powi(2) + (y / ay).powi(2);
        assert!((e - 1.0).abs() < 1e-6, "{x} {y}: {e}");
    }
    // curvature extremes of the ellipse are ay/ax² and ax/ay²
    let (_, prof) = read_csv(&out.join("profile_after.csv"));
    let kappa: Vec<f64> = prof.iter().map(|r| r[1].parse().unwrap()).collect();
    let kmax = kappa.iter().copied().fold(0.0, f64::max);
    let kmin = kappa.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((kmax - ay / (ax * ax)).abs() / kmax < 1e-2, "{kmax}");
    assert!((kmin - ax / (ay * ay)).abs() / kmin < 1e-2, "{kmin}");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("advect.json")).unwrap()).unwrap();
    assert!(summary["aligned_residual"].is_null(), "lengths differ by more than 1%");
}

#[test]
fn translated_control_grows_alike_under_a_linear_flow() {
    let tmp = tempfile::tempdir().unwrap();
    let curve = tmp.path().join("circle.csv");
    write_circle(&curve, 256, 0.25, (-0.2, 0.1));
    let out = out_dir(&tmp, "adv");
    let text = ok(shapecoh(&[
        "advect",
        "-c",
        &config("linear_saddle.json"),
        "--curve",
        curve.to_str().unwrap(),
        "--ta",
        "0",
        "--tb",
        "0.5",
        "--control-shift",
        "0.02",
        "-o",
        out.to_str().unwrap(),
    ]));
    assert!(text.contains("control shifted by 0.02"), "{text}");
    assert!(out.join("control_advected.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("advect.json")).unwrap()).unwrap();
    // a linear flow moves a translated curve to a translated image
    let (a, b) = (summary["length_after"].as_f64().unwrap(), summary["control"]["length_after"].as_f64().unwrap());
    assert!((a - b).abs() < 1e-6 * a, "{a} vs {b}");
    let (a, b) = (summary["profile_change"].as_f64().unwrap(), summary["control"]["profile_change"].as_f64().unwrap());
    assert!((a - b).abs() < 1e-3 * a, "{a} vs {b}");
}

#[test]
fn curvature_of_a_circle() {
    let tmp = tempfile::tempdir().unwrap();
    let curve = tmp.path().join("circle.csv");
    write_circle(&curve, 500, 2.0, (1.0, 1.0));
    let out = out_dir(&tmp, "k");
    ok(shapecoh(&["curvature", "--curve", curve.to_str().unwrap(), "--n", "256", "-o", out.to_str().unwrap()]));
    let (header, rows) = read_csv(&out.join("profile.csv"));
    assert_eq!(header["args"]["n"], 256);
    assert_eq!(rows.len(), 256);
    for r in rows {
        assert!((r[1].parse::<f64>().unwrap() - 0.5).abs() < 1e-4);
    }
}

#[test]
fn coherence_identities() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    // a lopsided blob and a rigid copy of it
    let blob = |theta: f64, shift: (f64, f64)| {
        let mut s = String::from("x,y\n");
        for k in 0..300 {
            let t = TAU * k as f64 / 300.0;
            let r = 0.3 + 0.08 * (2.0 * t).cos() + 0.04 * (3.0 * t).sin();
            let (x, y) = (r * t.cos(), 0.6 * r * t.sin());
            let (c, s_) = (theta.cos(), theta.sin());
            s.push_str(&format!("{},{}\n", c * x - s_ * y + shift.0, s_ * x + c * y + shift.1));
        }
        s
    };
    fs::write(&a, blob(0.0, (0.0, 0.0))).unwrap();
    fs::write(&b, blob(0.7, (0.2, -0.1))).unwrap();
    let common = ["-c", &config("linear_saddle.json"), "--resolution", "128", "--angles", "120"];
    let run = |extra: &[&str], name: &str| {
        let out = out_dir(&tmp, name);
        let mut args = vec!["coherence"];
        args.extend_from_slice(&common);
        args.extend_from_slice(extra);
        args.extend_from_slice(&["-o", out.to_str().unwrap()]);
        ok(shapecoh(&args));
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("coherence.json")).unwrap()).unwrap();
        json
    };
    let same = run(&["--T", "0", "--curve", a.to_str().unwrap()], "same");
    assert!(same["report"]["alpha"].as_f64().unwrap() > 0.99, "{same}");
    assert_eq!(same["header"]["config"]["coherence"]["resolution"], 128);
    let copy = run(&["--T", "0", "--curve", a.to_str().unwrap(), "--curve-b", b.to_str().unwrap()], "copy");
    assert!(copy["report"]["alpha"].as_f64().unwrap() > 0.97, "{copy}");
    let angle = copy["report"]["best_motion"]["angle"].as_f64().unwrap();
    assert!((angle + 0.7).abs() < TAU / 120.0, "B is mapped back onto A: {angle}");

    let beta = run(&["--T", "0.3", "--curve", a.to_str().unwrap(), "--throughout", "--n-times", "3"], "beta");
    let series = beta["report"]["series"].as_array().unwrap();
    assert_eq!(series.len(), 3);
    let best = series.iter().map(|p| p[1].as_f64().unwrap()).fold(0.0, f64::max);
    assert_eq!(beta["report"]["alpha"].as_f64().unwrap(), best);
}

#[test]
fn open_curve_coherence_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("open.csv");
    fs::write(&a, "# {\"closed\": false}\nx,y\n0,0\n1,0\n1,1\n").unwrap();
    let o = shapecoh(&["coherence", "-c", &config("linear_saddle.json"), "--T", "0", "--curve", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = shapecoh(&[
        "advect",
        "-c",
        &config("linear_saddle.json"),
        "--curve",
        tmp.path().join("missing.csv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    fs::write(&a, "x,z\n0,0\n").unwrap();
    let o = shapecoh(&["curvature", "--curve", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("'y'"), "{}", stderr(&o));
}

#[test]
fn slices_for_several_epochs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_dir(&tmp, "slice");
    let text = ok(shapecoh(&[
        "slice",
        "-c",
        &config("linear_saddle.json"),
        "--times",
        "0.25,0.5,1",
        "--n",
        "41",
        "-o",
        out.to_str().unwrap(),
    ]));
    assert_eq!(text.lines().count(), 3);
    for k in 0..3 {
        let (header, rows) = read_csv(&out.join(format!("slice_{k:02}.csv")));
        assert_eq!(header["args"]["T"], [0.25, 0.5, 1.0][k]);
        assert_eq!(rows.len(), 41);
        for r in rows {
            assert!((r[1].parse::<f64>().unwrap() - FRAC_PI_2).abs() < 1e-10);
        }
    }
    // the double gyre slice starts out orthogonal for a short epoch
    let out = out_dir(&tmp, "dg");
    let text = ok(shapecoh(&[
        "slice",
        "--system",
        "double_gyre",
        "--t0",
        "0",
        "--T",
        "0.01",
        "--y",
        "0.3",
        "--n",
        "50",
        "--step",
        "0.001",
        "-o",
        out.to_str().unwrap(),
    ]));
    let min: f64 = text.split("min θ = ").nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!(min > 1.4, "{text}");
}
