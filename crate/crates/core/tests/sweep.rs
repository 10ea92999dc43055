use ffma::channel_code::{toy_ldpc, ToyLdpcSpec};
use ffma::epcode::{ai_cwep_from_matrix, ternary_nonorthogonal_3x2};
use ffma::harness::{emit, manifest_path, run_sweep, ExperimentConfig, Simulator, SweepResult};
use ffma::{Error, FieldModulus};

const CDMA: &str = r#"
mode = "ff_cdma"
users = 4
bits_per_user = 2
blocks = 2
seed = 3

[ep]
construction = "ternary_orthogonal"
kappa = 2

[decoder]
mux = "correlation"

[sweep]
ebn0_db = [0.0, 2.0, 4.0, 6.0]
min_frames = 10000
max_frames = 10000
target_errors = 0
batch = 1000
"#;

fn cdma() -> ExperimentConfig {
    ExperimentConfig::from_toml_str(CDMA).unwrap()
}

#[test]
fn ber_decreases_with_snr() {
    let res = run_sweep(&cdma(), 4).unwrap();
    let bits = 8.0 * 10_000.0;
    for w in res.rows.windows(2) {
        let se = (w[0].ber * (1.0 - w[0].ber) / bits).sqrt();
        assert!(w[1].ber <= w[0].ber + 3.0 * se, "{:?}", res.rows);
    }
    assert!(res.rows[0].ber > res.rows[3].ber);
}

#[test]
fn counters_are_consistent() {
    let mut cfg = cdma();
    cfg.sweep.min_frames = 0;
    cfg.sweep.max_frames = 5000;
    cfg.sweep.target_errors = 50;
    cfg.sweep.batch = 7;
    let res = run_sweep(&cfg, 3).unwrap();
    for r in &res.rows {
        assert!(r.frames <= 5000);
        assert!(r.frame_errs <= r.frames && r.frame_errs <= r.bit_errs);
        assert_eq!(r.ber, r.bit_errs as f64 / (r.frames * 8) as f64);
        assert!(r.bit_errs >= 50 || r.frames == 5000);
    }
    // Stopping happens at the first frame that reaches the target.
    assert!(res.rows[0].frames < 5000);
}

#[test]
fn emit_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = cdma();
    cfg.sweep.ebn0_db = vec![1.0, 5.0];
    cfg.sweep.min_frames = 100;
    cfg.sweep.max_frames = 100;
    let res = run_sweep(&cfg, 1).unwrap();
    let csv = dir.path().join("out.csv");
    let mpath = emit(&res, &csv).unwrap();
    assert_eq!(mpath, manifest_path(&csv));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
    let replay = ExperimentConfig::load(&mpath).unwrap();
    assert_eq!(run_sweep(&replay, 2).unwrap().counts(), res.counts());

    let empty = SweepResult {
        config: cfg,
        rows: vec![],
    };
    let err = emit(&empty, &dir.path().join("missing/out.csv")).unwrap_err();
    assert_eq!(err.kind(), "io");
    assert!(err.to_string().contains("missing"));
}

#[test]
fn files_resolve_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let code = ai_cwep_from_matrix(&ternary_nonorthogonal_3x2()).unwrap();
    std::fs::write(dir.path().join("noma.ep"), code.to_text()).unwrap();
    let ldpc = toy_ldpc(ToyLdpcSpec {
        p: FieldModulus::GF3,
        n: 12,
        redundancy: 4,
        col_weight: 3,
        m: 2,
        seed: 5,
    })
    .unwrap();
    std::fs::write(
        dir.path().join("h.alist"),
        ldpc.parity_check().unwrap().to_alist(),
    )
    .unwrap();
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(
        &cfg_path,
        r#"
mode = "ff_noma"
users = 3
bits_per_user = 4
blocks = 4
[ep]
construction = "file"
path = "noma.ep"
[channel]
kind = "alist"
path = "h.alist"
[decoder]
channel = "qspa"
mux = "map"
[sweep]
ebn0_db = [80.0]
max_frames = 40
target_errors = 1
"#,
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&cfg_path).unwrap();
    let sim = Simulator::new(&cfg).unwrap();
    assert_eq!(sim.frame_len(), 12);
    assert_eq!(run_sweep(&cfg, 1).unwrap().rows[0].bit_errs, 0);
}

#[test]
fn invalid_configs_name_the_field() {
    let field = |text: &str| match Simulator::new(&ExperimentConfig::from_toml_str(text).unwrap()) {
        Err(Error::Config { field, .. }) => field,
        other => panic!("expected config error, got {other:?}"),
    };
    assert_eq!(field(&CDMA.replace("kappa = 2", "")), "ep.kappa");
    assert_eq!(
        field(&CDMA.replace("mux = \"correlation\"", "mux = \"map\"\nchannel = \"ml\"")),
        "decoder.channel"
    );
    assert_eq!(
        field(&CDMA.replace("[decoder]", "[decoder]\nthreshold = -1.0")),
        "decoder.threshold"
    );
    assert_eq!(
        field(&CDMA.replace("seed = 3", "seed = 3\n[channel]\nkind = \"toy_ldpc\"")),
        "channel.redundancy"
    );
    assert_eq!(
        field(&CDMA.replace("max_frames = 10000", "max_frames = 0")),
        "sweep.max_frames"
    );
    let err = ExperimentConfig::from_toml_str(&CDMA.replace("ff_cdma", "ff_sdma")).unwrap_err();
    assert_eq!(err.kind(), "config");
}
