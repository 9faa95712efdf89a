use potpda::dataset::{read_dataset, write_dataset};
use potpda::synthbench::{bench_config, compare_schemes, generate_pda_task, TaskSpec};
use potpda::warmpot::{train, TrainConfig};
use potpda::weights::Scheme;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn easy_task_is_learned() {
    let spec = TaskSpec { separation: 8.0, shift: 0.5, ..TaskSpec::standard() };
    let seeds: Vec<u64> = (0..10).collect();
    let bench = compare_schemes(&spec, &bench_config(), &[Scheme::Uniform, Scheme::Warmpot], &seeds).unwrap();
    for s in &bench.schemes {
        assert_eq!(s.failures(), 0);
        let m = median(s.accuracies());
        assert!(m >= 0.9, "{} median accuracy {m}", s.scheme);
    }
}

#[test]
fn default_config_ramps_alpha_from_001_to_08() {
    let data = generate_pda_task(&TaskSpec { n_s: 80, n_t: 70, ..TaskSpec::standard() }).unwrap();
    let cfg = TrainConfig::default();
    let r = train(&data, &cfg).unwrap();
    assert_eq!(r.trace.len(), 5000);
    assert_eq!(r.trace[0].alpha, 0.01);
    assert!((r.trace[4999].alpha - 0.8).abs() < 1e-15);
    for row in &r.trace {
        assert!((row.plan_mass - row.alpha).abs() < 1e-8, "iteration {}", row.iter);
    }
}

#[test]
fn dataset_file_trains_like_in_memory_data() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("task.csv");
    let data = generate_pda_task(&TaskSpec { n_s: 100, n_t: 60, seed: 3, ..TaskSpec::standard() }).unwrap();
    write_dataset(&path, &data).unwrap();
    let loaded = read_dataset(&path).unwrap();
    assert_eq!(loaded, data);
    let cfg = TrainConfig { total_iters: 50, ramp_iters: 25, seed: 3, ..bench_config() };
    let a = train(&data, &cfg).unwrap();
    let b = train(&loaded, &cfg).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.params, b.params);
}

#[test]
fn every_scheme_trains_and_reports_weights() {
    let data = generate_pda_task(&TaskSpec { n_s: 100, n_t: 60, ..TaskSpec::standard() }).unwrap();
    for scheme in [Scheme::Warmpot, Scheme::Uniform, Scheme::Ba3us, Scheme::Arpm] {
        let cfg = TrainConfig { total_iters: 60, ramp_iters: 30, weight_update_interval: 20, scheme, ..bench_config() };
        let r = train(&data, &cfg).unwrap();
        assert_eq!(r.normalized_weights.len(), 100);
        assert!(r.normalized_weights.iter().all(|&w| (0.0..=1.0 + 1e-9).contains(&w)), "{scheme}");
        assert!(r.target_accuracy.is_some() && r.outlier_share.is_some());
    }
}
