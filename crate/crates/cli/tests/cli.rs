use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use audiodiv::tensor::npy;
use ndarray::Array2;
use serde_json::Value;

fn audiodiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_audiodiv"))
        .args(args)
        .env_remove("AUDIODIV_THREADS")
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn matrix(rows: usize, dim: usize, shift: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, dim), |(i, j)| {
        shift + ((i * 7 + j * 13) % 23) as f64 / 23.0 + (i as f64 * 0.37 + j as f64).sin()
    })
}

fn write_npy(dir: &Path, name: &str, m: &Array2<f64>) -> PathBuf {
    let p = dir.join(name);
    npy::write(m, &p).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn tau_reports_reversed_order() {
    let v = json_of(&audiodiv(&["tau", "--xs", "1,2,3,4", "--ys", "4,3,2,1", "--no-timestamp"]));
    assert_eq!(v["result"]["tau"].as_f64(), Some(-1.0));
    assert_eq!(v["command"], "tau");
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(audiodiv(&["tau", "--xs", "1,2,3", "--ys", "1,2"]).status.code(), Some(1));
    assert_eq!(audiodiv(&["fad"]).status.code(), Some(1));
    assert_eq!(audiodiv(&["no-such-command"]).status.code(), Some(1));
    // mad is stochastic and must be seeded explicitly
    assert_eq!(audiodiv(&["mad", "--ref", "a.npy", "--gen", "b.npy"]).status.code(), Some(1));
}

#[test]
fn missing_input_exits_2() {
    let out = audiodiv(&["fad", "--ref", "/nonexistent/a.npy", "--gen", "/nonexistent/b.npy"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn identical_sets_score_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_npy(dir.path(), "a.npy", &matrix(120, 4, 0.0));
    let fad = json_of(&audiodiv(&["fad", "--ref", s(&a), "--gen", s(&a), "--no-timestamp"]));
    assert!(fad["result"]["value"].as_f64().unwrap().abs() < 1e-8);
    let mad = json_of(&audiodiv(&["mad", "--ref", s(&a), "--gen", s(&a), "--seed", "0", "--no-timestamp"]));
    assert!(mad["result"]["value"].as_f64().unwrap().abs() < 1e-9);
    let prdc = json_of(&audiodiv(&["prdc", "--ref", s(&a), "--gen", s(&a), "--no-timestamp"]));
    let text = prdc["result"].to_string();
    assert!(text.contains("recall"), "{text}");
}

#[test]
fn reports_are_byte_identical_without_timestamps() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_npy(dir.path(), "a.npy", &matrix(150, 3, 0.0));
    let b = write_npy(dir.path(), "b.npy", &matrix(150, 3, 0.4));
    for cmd in ["fad", "mmd", "prdc"] {
        let x = audiodiv(&[cmd, "--ref", s(&a), "--gen", s(&b), "--no-timestamp"]);
        let y = audiodiv(&[cmd, "--ref", s(&a), "--gen", s(&b), "--no-timestamp"]);
        assert!(x.status.success());
        assert_eq!(x.stdout, y.stdout, "{cmd}");
    }
    let args = ["mad", "--ref", s(&a), "--gen", s(&b), "--seed", "3", "--no-timestamp"];
    assert_eq!(audiodiv(&args).stdout, audiodiv(&args).stdout);
    let one = audiodiv(&["--threads", "1", "mad", "--ref", s(&a), "--gen", s(&b), "--seed", "3", "--no-timestamp"]);
    let four = audiodiv(&["--threads", "4", "mad", "--ref", s(&a), "--gen", s(&b), "--seed", "3", "--no-timestamp"]);
    let mut v1 = json_of(&one);
    let mut v4 = json_of(&four);
    v1["global"].take();
    v4["global"].take();
    assert_eq!(v1, v4);
}

#[test]
fn csv_and_human_formats() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_npy(dir.path(), "a.npy", &matrix(50, 2, 0.0));
    let csv = audiodiv(&["--format", "csv", "fad", "--ref", s(&a), "--gen", s(&a)]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("metric,value,orientation"), "{text}");
    let human = audiodiv(&["--format", "human", "fad", "--ref", s(&a), "--gen", s(&a)]);
    assert!(String::from_utf8(human.stdout).unwrap().contains("lower"));
}

#[test]
fn metaeval_over_a_ladder_file() {
    let dir = tempfile::tempdir().unwrap();
    write_npy(dir.path(), "ref.npy", &matrix(100, 3, 0.0));
    let mut levels = Vec::new();
    for i in 0..4 {
        write_npy(dir.path(), &format!("l{i}.npy"), &matrix(100, 3, 0.5 * i as f64));
        levels.push(serde_json::json!({"index": i + 1, "path": format!("l{i}.npy")}));
    }
    let ladder = dir.path().join("ladder.json");
    let file = serde_json::json!({"desideratum": "fidelity", "reference": "ref.npy", "levels": levels});
    fs::write(&ladder, file.to_string()).unwrap();
    let v = json_of(&audiodiv(&["metaeval", "--ladder", s(&ladder), "--metrics", "fad,mmd", "--no-timestamp"]));
    let text = v["result"].to_string();
    assert!(text.contains("\"tau\":1.0"), "{text}");
    // a stochastic metric without a seed is a usage error
    let out = audiodiv(&["metaeval", "--ladder", s(&ladder), "--metrics", "mad"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bt_rank_scores_sum_to_100() {
    let dir = tempfile::tempdir().unwrap();
    let prefs = dir.path().join("prefs.csv");
    let mut csv = String::from("pair_id,system_a,system_b,axis,outcome,annotator,position_a_first\n");
    let systems = ["alpha", "beta", "gamma"];
    let mut n = 0;
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                continue;
            }
            // the lower index wins more often
            let wins = if i < j { 7 } else { 3 };
            for k in 0..10 {
                let outcome = if k < wins { "A" } else { "B" };
                let axis = if k % 2 == 0 { "fidelity" } else { "musicality" };
                csv.push_str(&format!("p{n},{},{},{axis},{outcome},r{k},{}\n", systems[i], systems[j], k % 2 == 0));
                n += 1;
            }
        }
    }
    fs::write(&prefs, csv).unwrap();
    let scores = dir.path().join("metrics.csv");
    fs::write(&scores, "system,fad,custom:higher\nalpha,1.0,3\nbeta,2.0,2\ngamma,3.0,1\n").unwrap();
    let v = json_of(&audiodiv(&["bt-rank", "--prefs", s(&prefs), "--metric-scores", s(&scores), "--no-timestamp"]));
    let bt: Vec<f64> = v["result"]["bradley_terry"]["scores"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!((bt.iter().sum::<f64>() - 100.0).abs() < 1e-9);
    assert!(bt[0] > bt[1] && bt[1] > bt[2], "{bt:?}");
    for c in v["result"]["rank_correlations"].as_array().unwrap() {
        assert_eq!(c["tau"].as_f64(), Some(1.0), "{c}");
    }
}

#[test]
fn bt_rank_rejects_a_winless_system() {
    let dir = tempfile::tempdir().unwrap();
    let prefs = dir.path().join("prefs.csv");
    fs::write(
        &prefs,
        "pair_id,system_a,system_b,axis,outcome,annotator,position_a_first\n\
         p1,x,y,fidelity,A,r1,true\np2,x,y,fidelity,A,r1,false\n",
    )
    .unwrap();
    let out = audiodiv(&["bt-rank", "--prefs", s(&prefs)]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn degrade_noise_builds_a_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    fs::create_dir(&input).unwrap();
    for c in 0..3 {
        let audio = audiodiv::degrade::Audio {
            samples: (0..800).map(|i| ((i * (c + 1)) as f64 * 0.01).sin() * 0.5).collect(),
            channels: 1,
            sample_rate: 8000,
            encoding: audiodiv::degrade::WavEncoding::Pcm16,
        };
        audiodiv::degrade::write_wav(&audio, &input.join(format!("c{c}.wav"))).unwrap();
    }
    let out = dir.path().join("out");
    json_of(&audiodiv(&["degrade-noise", "--input", s(&input), "--output", s(&out), "--seed", "1"]));
    let mut wavs = 0;
    for level in fs::read_dir(&out).unwrap() {
        let p = level.unwrap().path();
        if p.is_dir() {
            wavs += fs::read_dir(p).unwrap().count();
        }
    }
    assert_eq!(wavs, 33);
    assert!(out.join("ladder.json").exists());
    assert_eq!(fs::read(out.join("level_01/c0.wav")).unwrap(), fs::read(input.join("c0.wav")).unwrap());

    let bad = audiodiv(&["degrade-noise", "--input", s(&input), "--output", s(&out), "--seed", "1", "--sigmas", "0,-1"]);
    assert_eq!(bad.status.code(), Some(1));
}
