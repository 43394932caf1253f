//! Helpers shared by the CLI integration suites: invoking the binary with a
//! clean environment, planting synthetic WAV corpora, and building manifest
//! fixtures.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use corpus_core::audio::{noise, silence, tone, write_wav_f32};
use corpus_core::manifest::{write_manifest, Domain, UtteranceRecord};

/// Path of the compiled `corpus` binary.
pub fn corpus_bin() -> &'static str {
    env!("CARGO_BIN_EXE_corpus")
}

/// A `corpus` command with every `CORPUS_*` environment variable scrubbed,
/// so ambient configuration cannot leak into tests.
pub fn corpus_cmd() -> Command {
    let mut cmd = Command::new(corpus_bin());
    for (key, _) in std::env::vars_os()
        .filter_map(|(k, v)| k.into_string().ok().map(|k| (k, v)))
        .filter(|(k, _)| k.starts_with("CORPUS_"))
    {
        cmd.env_remove(key);
    }
    cmd
}

/// Run the command, panicking if it cannot be spawned.
pub fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawning corpus binary")
}

/// Run and require success, echoing output on failure.
pub fn run_ok(cmd: &mut Command) -> Output {
    let output = run(cmd);
    assert!(
        output.status.success(),
        "command failed ({:?}):\nstdout: {}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr),
    );
    output
}

pub fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process terminated by signal")
}

/// Write one WAV made of alternating segments: `(duration_s, speech)` where
/// speech segments are a tone and pauses are near-silence.
pub fn write_recording(path: &Path, layout: &[(f64, bool)], sample_rate: u32) {
    let mut samples: Vec<f32> = Vec::new();
    for (i, &(duration, speech)) in layout.iter().enumerate() {
        if speech {
            samples.extend(tone(sample_rate, 180.0 + 17.0 * i as f64, 0.4, duration));
        } else {
            samples.extend(noise(sample_rate, 0.004, duration, i as u64));
        }
    }
    if samples.is_empty() {
        samples.extend(silence(sample_rate, 0.1));
    }
    write_wav_f32(path, &samples, sample_rate).unwrap();
}

/// Plant a corpus of `sources` recordings, each with `regions` speech
/// regions of `speech_s` seconds separated by comfortable pauses. Returns
/// the audio directory.
pub fn plant_corpus(dir: &Path, sources: usize, regions: usize, speech_s: f64) -> PathBuf {
    let audio = dir.join("audio");
    std::fs::create_dir_all(&audio).unwrap();
    for s in 0..sources {
        let mut layout = vec![(1.0, false)];
        for _ in 0..regions {
            layout.push((speech_s, true));
            layout.push((2.0, false));
        }
        write_recording(&audio.join(format!("src{s:02}.wav")), &layout, 8_000);
    }
    audio
}

/// A minimal valid record as it would look after segmentation.
pub fn record(source: &str, index: usize) -> UtteranceRecord {
    let start = index as f64 * 10.0;
    UtteranceRecord::new(
        format!("{source}_{index:04}"),
        source,
        format!("{source}.wav"),
        start,
        start + 6.0,
        Domain::News,
        20.0,
    )
}

/// Write records as a manifest at `path`.
pub fn write_records(path: &Path, records: &[UtteranceRecord]) {
    write_manifest(records, path).unwrap();
}
