use std::path::Path;
use std::process::Command;

#[test]
fn python_smoke_script() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let out = Command::new("python3")
        .arg(root.join("python/smoke_test.py"))
        .current_dir(&root)
        .output()
        .expect("python3 is available");
    assert!(
        out.status.success(),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}
