//! End-to-end tests of the `vrae` binary: exit codes, file outputs, and
//! determinism of the full roll -> train -> encode/generate/interpolate
//! pipeline.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vrae() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vrae"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawning vrae");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// A format-0 file: pitch 60 held 0..2 s, pitch 64 at 0.5..1.5 s, then a
/// run of eighth notes on pitch 67. 480 tpqn at the default tempo, so a
/// quarter note is half a second.
fn write_midi_fixture(path: &Path) {
    let mut track: Vec<u8> = Vec::new();
    let push_event = |delta: u32, bytes: &[u8], track: &mut Vec<u8>| {
        // VLQ-encode the delta (values here fit two bytes).
        if delta >= 0x80 {
            track.push(0x80 | (delta >> 7) as u8);
        }
        track.push((delta & 0x7F) as u8);
        track.extend_from_slice(bytes);
    };
    push_event(0, &[0x90, 60, 100], &mut track);
    push_event(480, &[0x90, 64, 90], &mut track); // t = 0.5 s
    push_event(960, &[0x80, 64, 0], &mut track); // t = 1.5 s
    push_event(480, &[0x80, 60, 0], &mut track); // t = 2.0 s
    for _ in 0..8 {
        push_event(0, &[0x90, 67, 80], &mut track);
        push_event(240, &[0x80, 67, 0], &mut track); // eighth = 0.25 s
    }
    push_event(0, &[0xFF, 0x2F, 0x00], &mut track);

    let mut bytes = Vec::new();
    bytes.extend_from_slice(b"MThd");
    bytes.extend_from_slice(&6u32.to_be_bytes());
    bytes.extend_from_slice(&0u16.to_be_bytes());
    bytes.extend_from_slice(&1u16.to_be_bytes());
    bytes.extend_from_slice(&480u16.to_be_bytes());
    bytes.extend_from_slice(b"MTrk");
    bytes.extend_from_slice(&(track.len() as u32).to_be_bytes());
    bytes.extend_from_slice(&track);
    std::fs::write(path, bytes).unwrap();
}

struct Pipeline {
    _dir: tempfile::TempDir,
    root: PathBuf,
    roll: PathBuf,
    checkpoint: PathBuf,
}

/// roll + train once, shared by the downstream command tests.
fn trained_pipeline() -> Pipeline {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let midi = root.join("tune.mid");
    write_midi_fixture(&midi);

    let rolls_dir = root.join("rolls");
    run_ok(vrae()
        .arg("roll")
        .arg("--midi")
        .arg(&midi)
        .arg("--out")
        .arg(&rolls_dir)
        .arg("--min-active")
        .arg("1"));
    let roll = rolls_dir.join("tune.roll");
    assert!(roll.exists());

    let checkpoint = root.join("model.ckpt");
    run_ok(vrae()
        .arg("train")
        .arg("--rolls")
        .arg(&roll)
        .arg("--epochs")
        .arg("3")
        .arg("--window")
        .arg("8")
        .arg("--stride")
        .arg("8")
        .arg("--hidden")
        .arg("8")
        .arg("--latent")
        .arg("2")
        .arg("--batch-size")
        .arg("4")
        .arg("--seed")
        .arg("1")
        .arg("--out")
        .arg(root.join("metrics.csv"))
        .arg("--checkpoint")
        .arg(&checkpoint));
    assert!(checkpoint.exists());

    Pipeline {
        _dir: dir,
        root,
        roll,
        checkpoint,
    }
}

#[test]
fn full_pipeline_roll_train_encode_generate_interpolate() {
    let p = trained_pipeline();

    let metrics = std::fs::read_to_string(p.root.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("epoch,lb_per_ts,recon_per_dp,negkl_per_dp,lr,seconds"));
    assert_eq!(metrics.lines().count(), 4); // header + 3 epochs

    // encode
    let latents = p.root.join("latents.csv");
    run_ok(vrae()
        .arg("encode")
        .arg("--checkpoint")
        .arg(&p.checkpoint)
        .arg("--rolls")
        .arg(&p.roll)
        .arg("--out")
        .arg(&latents));
    let table = std::fs::read_to_string(&latents).unwrap();
    assert!(table.starts_with("index,label,mu_0,mu_1,logsigma_0,logsigma_1\n"));
    assert!(table.lines().count() > 2);

    // generate: roll text output and MIDI output
    let out_roll = p.root.join("gen.roll");
    run_ok(vrae()
        .arg("generate")
        .arg("--checkpoint")
        .arg(&p.checkpoint)
        .arg("--prior-seed")
        .arg("3")
        .arg("--length")
        .arg("50")
        .arg("--out")
        .arg(&out_roll));
    let text = std::fs::read_to_string(&out_roll).unwrap();
    assert!(text.starts_with("VRAE-ROLL v1 T=50"));

    let out_mid = p.root.join("gen.mid");
    run_ok(vrae()
        .arg("generate")
        .arg("--checkpoint")
        .arg(&p.checkpoint)
        .arg("--prior-seed")
        .arg("3")
        .arg("--length")
        .arg("50")
        .arg("--out")
        .arg(&out_mid));
    let midi_bytes = std::fs::read(&out_mid).unwrap();
    assert_eq!(&midi_bytes[..4], b"MThd");

    // interpolate
    let interp_dir = p.root.join("interp");
    run_ok(vrae()
        .arg("interpolate")
        .arg("0")
        .arg("1")
        .arg("--checkpoint")
        .arg(&p.checkpoint)
        .arg("--rolls")
        .arg(&p.roll)
        .arg("--steps")
        .arg("3")
        .arg("--policy")
        .arg("threshold")
        .arg("--out")
        .arg(&interp_dir));
    for k in 0..3 {
        assert!(interp_dir.join(format!("step_{k:03}.roll")).exists());
    }
}

#[test]
fn generate_is_byte_deterministic() {
    let p = trained_pipeline();
    let make = |name: &str| {
        let out = p.root.join(name);
        run_ok(vrae()
            .arg("generate")
            .arg("--checkpoint")
            .arg(&p.checkpoint)
            .arg("--prior-seed")
            .arg("3")
            .arg("--length")
            .arg("1000")
            .arg("--out")
            .arg(&out));
        std::fs::read(out).unwrap()
    };
    assert_eq!(make("a.roll"), make("b.roll"));
}

#[test]
fn resume_extends_training() {
    let p = trained_pipeline();
    let out = run_ok(vrae()
        .arg("train")
        .arg("--rolls")
        .arg(&p.roll)
        .arg("--epochs")
        .arg("5")
        .arg("--window")
        .arg("8")
        .arg("--stride")
        .arg("8")
        .arg("--batch-size")
        .arg("4")
        .arg("--seed")
        .arg("1")
        .arg("--out")
        .arg(p.root.join("metrics.csv"))
        .arg("--checkpoint")
        .arg(&p.checkpoint)
        .arg("--resume")
        .arg(&p.checkpoint));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("epoch 5"), "{stdout}");
    let metrics = std::fs::read_to_string(p.root.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 6); // header + 3 + 2 appended
}

#[test]
fn resume_with_conflicting_model_flags_fails() {
    let p = trained_pipeline();
    let out = vrae()
        .arg("train")
        .arg("--rolls")
        .arg(&p.roll)
        .arg("--epochs")
        .arg("5")
        .arg("--window")
        .arg("8")
        .arg("--stride")
        .arg("8")
        .arg("--hidden")
        .arg("16") // checkpoint trained with 8
        .arg("--resume")
        .arg(&p.checkpoint)
        .arg("--checkpoint")
        .arg(p.root.join("other.ckpt"))
        .arg("--out")
        .arg(p.root.join("m2.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("conflicts with the checkpoint"), "{stderr}");
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let out = vrae().arg("train").arg("--epochs").arg("3").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--rolls"), "{stderr}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = vrae().arg("gradcheck").arg("--bogus").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gradcheck_reports_and_passes() {
    let out = run_ok(vrae().arg("gradcheck").arg("--seed").arg("7"));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("gradient check passed"), "{stdout}");
    let line = stdout
        .lines()
        .find(|l| l.starts_with("max relative error"))
        .expect("summary line");
    let value: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(value < 1e-4, "{value}");
}

#[test]
fn preset_and_paper_beta_convention_resolve_in_config_banner() {
    let dir = tempfile::tempdir().unwrap();
    // A 60-frame, 49-pitch roll: one complete paper-2d window.
    let roll_path = dir.path().join("wide.roll");
    {
        use std::io::Write;
        let pitches: Vec<String> = (30..79).map(|p| p.to_string()).collect();
        let mut f = std::fs::File::create(&roll_path).unwrap();
        writeln!(
            f,
            "VRAE-ROLL v1 T=60 D=49 rate=20 pitches={}",
            pitches.join(",")
        )
        .unwrap();
        for t in 0..60 {
            let row: String = (0..49).map(|d| if d == t % 49 { '1' } else { '0' }).collect();
            writeln!(f, "{row}").unwrap();
        }
    }
    let out = run_ok(vrae()
        .arg("train")
        .arg("--rolls")
        .arg(&roll_path)
        .arg("--epochs")
        .arg("1")
        .arg("--preset")
        .arg("paper-2d")
        .arg("--adam-beta-convention")
        .arg("paper")
        .arg("--adam-beta1")
        .arg("0.05")
        .arg("--adam-beta2")
        .arg("0.001")
        .arg("--out")
        .arg(dir.path().join("m.csv"))
        .arg("--checkpoint")
        .arg(dir.path().join("c.ckpt")));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("preset = paper-2d"), "{stdout}");
    assert!(stdout.contains("hidden = 500"), "{stdout}");
    assert!(stdout.contains("latent = 2"), "{stdout}");
    assert!(stdout.contains("window = 50"), "{stdout}");
    assert!(stdout.contains("stride = 50"), "{stdout}");
    // Complement convention converts to modern decay rates.
    assert!(stdout.contains("adam-decay1 = 0.95"), "{stdout}");
    assert!(stdout.contains("adam-decay2 = 0.999"), "{stdout}");
}

#[test]
fn every_command_prints_its_configuration_first() {
    let p = trained_pipeline();
    let out = run_ok(vrae()
        .arg("encode")
        .arg("--checkpoint")
        .arg(&p.checkpoint)
        .arg("--rolls")
        .arg(&p.roll)
        .arg("--out")
        .arg(p.root.join("l.csv")));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("vrae encode configuration:"), "{stdout}");
    assert!(stdout.contains("stride ="), "{stdout}");
}
