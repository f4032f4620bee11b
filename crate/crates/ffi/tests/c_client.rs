use std::path::PathBuf;
use std::process::Command;

fn target_profile_dir() -> PathBuf {
    // CARGO_TARGET_TMPDIR is <target>/tmp; the test binary lives in <target>/<profile>/deps.
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib = target_profile_dir().join("libbdcert_ffi.a");
    assert!(lib.exists(), "static library not built at {}", lib.display());
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("bdcert_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = String::from_utf8(run.stdout).unwrap();
    assert!(text.contains("level=30"), "{text}");
    assert!(text.contains("met=1"), "{text}");
    assert!(text.contains("bad=2 msg=invalid argument"), "{text}");
    assert!(text.contains("json=1"), "{text}");
}
