//! Compiles and runs a C program against the generated header and the static
//! library. Skipped when no C compiler or static archive is available.

use std::path::{Path, PathBuf};
use std::process::Command;

fn target_dir() -> Option<PathBuf> {
    // <target>/<profile>/deps/<test binary>
    let exe = std::env::current_exe().ok()?;
    Some(exe.parent()?.parent()?.to_path_buf())
}

fn have(cmd: &str) -> bool {
    Command::new(cmd).arg("--version").output().map(|o| o.status.success()).unwrap_or(false)
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/quadrom.h")).unwrap();
    for name in ["qr_system_toy", "qr_system_eval_h", "qr_fit_learn", "qr_fit_free", "qr_last_error_message", "QR_STATUS_OK"] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn c_program_links_and_learns() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let Some(target) = target_dir() else { return };
    let lib = target.join("libquadrom_ffi.a");
    if !have("cc") || !lib.is_file() {
        eprintln!("skipping: cc or {} unavailable", lib.display());
        return;
    }
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&out).output().unwrap();
    println!("{}", String::from_utf8_lossy(&run.stdout));
    assert!(run.status.success(), "C program failed: {}", String::from_utf8_lossy(&run.stderr));
}
