use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wrg::config::{parse_descriptor, parse_insertion, Experiment, Lattice, RunConfig};
use wrg::output::sha256_hex;
use wrg::presets::{preset, PRESETS};
use wrg::{run_experiment, validate_config, RunError, MANIFEST};
use wrg_core::lattice::LatticeSpec;
use wrg_core::rg::FlowMass;

fn lattice(d: usize, n: u32) -> Lattice {
    Lattice { d, l: 1.0, eps0: 1.0, n }
}

fn files_under(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn random_lattice(rng: &mut ChaCha8Rng) -> Lattice {
    Lattice {
        d: rng.gen_range(1..=3),
        l: rng.gen_range(1..=4) as f64 * 0.5,
        eps0: 0.5,
        n: rng.gen_range(0..4),
    }
}

fn random_floats(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>() * 10f64.powi(rng.gen_range(-20..20))).collect()
}

fn random_experiment(rng: &mut ChaCha8Rng, i: usize) -> Experiment {
    let name = format!("e{i}");
    let lattice = random_lattice(rng);
    let mass = if rng.gen() { FlowMass::Trajectory(rng.gen()) } else { FlowMass::FixedMu(1.0 + rng.gen::<f64>()) };
    match rng.gen_range(0..10) {
        0 => Experiment::Filters {
            name,
            ks: (0..rng.gen_range(0..4)).map(|_| rng.gen_range(1..=10)).collect(),
            cascade_level: rng.gen_range(0..12),
            symbol_points: rng.gen_range(0..100),
            symbol_kmax: rng.gen(),
        },
        1 => Experiment::FilterWeights { name, k: rng.gen_range(1..=10), levels: rng.gen_range(1..6) },
        2 => Experiment::Triangle { name, lattice, m: rng.gen(), k: 2, n_max: 3, m_max: 2 },
        3 => Experiment::GroundState { name, lattice, mass, exclude_zero_mode: rng.gen() },
        4 => Experiment::RgFlow {
            name,
            lattice,
            mass,
            k: rng.gen_range(1..=10),
            m_max: rng.gen_range(2..8),
            limit_tol: rng.gen::<bool>().then(|| rng.gen()),
        },
        5 => Experiment::Limit {
            name,
            lattice,
            m: rng.gen(),
            k: 3,
            tol: 1e-9 * rng.gen::<f64>(),
            allow_divergent: rng.gen(),
            cutoff_label: rng.gen::<bool>().then(|| rng.gen_range(1..1 << 40)),
        },
        6 => Experiment::Lightcone { name, lattice, m: rng.gen(), t_max: rng.gen(), t_steps: rng.gen_range(2..50) },
        7 => Experiment::DynError {
            name,
            lattice,
            k: 4,
            m: rng.gen(),
            n_prime_max: rng.gen_range(1..8),
            times: random_floats(rng, 3),
            deltas: random_floats(rng, 2),
            k_cut: rng.gen(),
            u: random_floats(rng, lattice.d),
            v: random_floats(rng, lattice.d),
            descriptors: vec![vec!["phi:0".into(), format!("pi:{}", rng.gen_range(0..4))], vec![]],
        },
        8 => Experiment::CorrConv {
            name,
            lattice,
            k: 4,
            m: rng.gen(),
            a: vec!["pi:0".into()],
            b: vec!["phi:1".into(), "pi:0".into()],
            t: -rng.gen::<f64>(),
            x: random_floats(rng, lattice.d),
            n_primes: vec![rng.gen_range(0..6), rng.gen_range(0..6)],
            k_cut: rng.gen(),
        },
        _ => Experiment::MeraCheck {
            name,
            lattice,
            k: rng.gen_range(1..=10),
            m: rng.gen(),
            cutoff_label: rng.gen(),
            descriptors: vec![vec![format!("phi:{}", rng.gen_range(0..8))]],
        },
    }
}

#[test]
fn configs_round_trip_through_toml() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.gen_range(0..5);
        let config = RunConfig::new((0..n).map(|i| random_experiment(&mut rng, i)).collect());
        let text = config.to_toml();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), config, "{text}");
    }
    for (name, _) in PRESETS {
        let config = preset(name).unwrap();
        assert_eq!(RunConfig::from_toml(&config.to_toml()).unwrap(), config);
    }
}

#[test]
fn shipped_presets_are_valid() {
    for (name, _) in PRESETS {
        let v = validate_config(&preset(name).unwrap());
        assert!(v.is_empty(), "{name}: {v:?}");
    }
}

#[test]
fn unstable_mass_is_one_violation() {
    let config = RunConfig::new(vec![Experiment::GroundState {
        name: "g".into(),
        lattice: lattice(1, 2),
        mass: FlowMass::FixedMu(1.0),
        exclude_zero_mode: false,
    }]);
    let v = validate_config(&config);
    assert_eq!(v.len(), 1, "{v:?}");
    assert!(v[0].message.contains("unstable"), "{}", v[0]);
    assert_eq!(v[0].experiment, "g");
}

#[test]
fn haar_momentum_limit_is_a_sobolev_violation() {
    let limit = |allow_divergent| Experiment::Limit {
        name: "haar".into(),
        lattice: lattice(1, 2),
        m: 1.0,
        k: 1,
        tol: 1e-9,
        allow_divergent,
        cutoff_label: None,
    };
    let v = validate_config(&RunConfig::new(vec![limit(false)]));
    assert_eq!(v.len(), 1);
    assert!(v[0].message.contains("H^{1/2}"));
    assert!(validate_config(&RunConfig::new(vec![limit(true)])).is_empty());

    let flow = Experiment::RgFlow {
        name: "f".into(),
        lattice: lattice(1, 2),
        mass: FlowMass::Trajectory(1.0),
        k: 1,
        m_max: 4,
        limit_tol: Some(1e-6),
    };
    assert!(validate_config(&RunConfig::new(vec![flow])).iter().any(|v| v.message.contains("H^{1/2}")));
}

#[test]
fn well_formed_trajectory_config_has_no_violations() {
    let config = RunConfig::new(vec![Experiment::RgFlow {
        name: "flow".into(),
        lattice: lattice(2, 1),
        mass: FlowMass::Trajectory(1.0),
        k: 2,
        m_max: 3,
        limit_tol: None,
    }]);
    assert!(validate_config(&config).is_empty());
}

#[test]
fn malformed_configs_are_rejected() {
    let mut bad = RunConfig::new(vec![
        Experiment::FilterWeights { name: "w".into(), k: 11, levels: 2 },
        Experiment::FilterWeights { name: "w".into(), k: 2, levels: 0 },
        Experiment::Triangle { name: "a b".into(), lattice: lattice(1, 0), m: 1.0, k: 2, n_max: 12, m_max: 12 },
        Experiment::GroundState {
            name: "massless".into(),
            lattice: lattice(1, 2),
            mass: FlowMass::FixedMu(2f64.sqrt()),
            exclude_zero_mode: false,
        },
    ]);
    bad.version = 7;
    let v = validate_config(&bad);
    let text: Vec<String> = v.iter().map(|v| v.to_string()).collect();
    for needle in ["version", "K = 11", "duplicate", "levels", "name", "sites", "exclude_zero_mode"] {
        assert!(text.iter().any(|t| t.contains(needle)), "missing `{needle}` in {text:?}");
    }
    assert!(RunConfig::from_toml("version = 1\n[[experiment]]\nkind = \"nope\"\nname = \"x\"").is_err());
    assert!(RunConfig::from_toml("version = 1\nstray = 3").is_err());
}

#[test]
fn insertions_parse() {
    let i = parse_insertion(" pi : 3 ").unwrap();
    assert_eq!(i.site, 3);
    assert!(parse_insertion("phi").is_err());
    assert!(parse_insertion("chi:1").is_err());
    assert!(parse_insertion("phi:-1").is_err());
    let spec = LatticeSpec::new(1, 1.0, 1.0, 1).unwrap();
    let w = parse_descriptor(spec, &["phi:0".into(), "phi:0".into(), "pi:2".into()]).unwrap();
    assert_eq!(w.f[0], 2.0);
    assert_eq!(w.g[2], 1.0);
    assert!(parse_descriptor(spec, &["phi:4".into()]).is_err());
}

#[test]
fn invalid_configs_never_start() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = RunConfig::new(vec![Experiment::FilterWeights { name: "w".into(), k: 0, levels: 1 }]);
    match run_experiment(&config, &out, Some(1)) {
        Err(e @ RunError::Validation(_)) => assert_eq!(e.exit_code(), 2),
        other => panic!("{other:?}"),
    }
    assert!(!out.exists());
}

#[test]
fn empty_run_has_an_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_experiment(&RunConfig::new(vec![]), dir.path(), Some(1)).unwrap();
    assert!(m.experiments.is_empty() && m.files.is_empty() && m.all_checks_passed);
    assert_eq!(files_under(dir.path()).into_keys().collect::<Vec<_>>(), vec![MANIFEST.to_string()]);
}

#[test]
fn manifest_lists_every_file_with_its_digest() {
    let dir = tempfile::tempdir().unwrap();
    let config = preset("acceptance").unwrap();
    let m = run_experiment(&config, dir.path(), None).unwrap();
    assert!(m.all_checks_passed, "{:?}", m.failed_checks().collect::<Vec<_>>());
    assert_eq!(m.config, config);
    assert_eq!(m.experiments.len(), config.experiments.len());
    let mut on_disk = files_under(dir.path());
    let manifest: serde_json::Value = serde_json::from_slice(&on_disk.remove(MANIFEST).unwrap()).unwrap();
    assert_eq!(manifest["files"].as_array().unwrap().len(), m.files.len());
    assert_eq!(on_disk.len(), m.files.len());
    for f in &m.files {
        let bytes = &on_disk[&f.path];
        assert_eq!(f.bytes as usize, bytes.len());
        assert_eq!(f.sha256, sha256_hex(bytes));
    }
    for e in &m.experiments {
        assert!(!e.checks.is_empty() && !e.files.is_empty(), "{}", e.name);
        assert!(e.files.iter().all(|f| f.starts_with(&format!("{}/", e.name))));
    }
}

#[test]
fn csv_files_have_full_precision_headers() {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig::new(vec![Experiment::GroundState {
        name: "g".into(),
        lattice: lattice(2, 1),
        mass: FlowMass::Trajectory(1.0),
        exclude_zero_mode: false,
    }]);
    run_experiment(&config, dir.path(), Some(2)).unwrap();
    let text = fs::read_to_string(dir.path().join("g/modes.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "q,k1,k2,gamma,phiphi,pipi");
    assert_eq!(lines.count(), 16);
    let kernel = fs::read_to_string(dir.path().join("g/kernel.csv")).unwrap();
    let row: Vec<&str> = kernel.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), 5);
    assert!(row[3].contains('e') && row[3].split('e').next().unwrap().len() == 18, "{}", row[3]);
}

fn wrg(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_wrg")).args(args).output().unwrap()
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let ok = wrg(&["--out", out, "filters", "--K", "1", "2", "--emit-cascade", "4", "--emit-symbol", "10", "5"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    for f in ["taps.csv", "residuals.csv", "cascade_k2.csv", "symbol_k1.csv"] {
        assert!(dir.path().join("out/filters").join(f).exists(), "{f}");
    }

    let gs = wrg(&["--out", out, "groundstate", "--N", "2", "--mu", "1.0"]);
    assert_eq!(gs.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&gs.stderr).contains("unstable"));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "version = 1\n[[experiment]]\nkind = \"filter-weights\"\nname = \"w\"\nk = 20\nlevels = 1\n").unwrap();
    assert_eq!(wrg(&["validate", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(wrg(&["run", dir.path().join("missing.toml").to_str().unwrap()]).status.code(), Some(4));
    assert_eq!(wrg(&["preset", "no-such-preset"]).status.code(), Some(2));

    let listed = wrg(&["show-preset"]);
    assert!(String::from_utf8_lossy(&listed.stdout).contains("fig1-weights"));
    let shown = wrg(&["show-preset", "triangle"]);
    let good = dir.path().join("triangle.toml");
    fs::write(&good, &shown.stdout).unwrap();
    assert_eq!(wrg(&["validate", good.to_str().unwrap()]).status.code(), Some(0));

    let mera = wrg(&["--out", out, "mera-check", "--N", "1", "--cutoff-label", "512", "--descriptor", "phi:0,pi:1"]);
    assert_eq!(mera.status.code(), Some(0), "{}", String::from_utf8_lossy(&mera.stderr));
    let outside = wrg(&["--out", out, "mera-check", "--N", "1", "--descriptor", "phi:99"]);
    assert_eq!(outside.status.code(), Some(2));

    let blocked = dir.path().join("blocked");
    fs::write(&blocked, "a file where a directory should go").unwrap();
    let io = wrg(&["--out", blocked.to_str().unwrap(), "filters"]);
    assert_eq!(io.status.code(), Some(4));
}
