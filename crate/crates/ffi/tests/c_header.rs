//! Compiles and runs a small C program against the generated header and the
//! static library. Skipped when no C compiler or static archive is present.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "hoi3d.h"

int main(void) {
    Hoi3dPriorTable *t = NULL;
    if (hoi3d_priors_bundled(&t) != HOI3D_STATUS_OK) return 1;
    if (hoi3d_priors_len(t) != 80) return 2;
    Hoi3dObjectPrior p;
    if (hoi3d_priors_lookup(t, "no such thing", &p) != HOI3D_STATUS_UNKNOWN_CATEGORY) return 3;
    if (hoi3d_last_error() == NULL) return 4;
    hoi3d_priors_free(t);
    double s[2] = {0.9, 0.1}, y[2] = {1.0, 0.0}, loss = 0.0;
    if (hoi3d_bce_multilabel(s, y, 2, &loss, NULL) != HOI3D_STATUS_OK) return 5;
    printf("%s %.6f\n", hoi3d_version(), loss);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links() {
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib = target_dir().join("libhoi3d_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C toolchain or {} missing", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "cc failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let text = String::from_utf8(run.stdout).unwrap();
    assert!(text.trim().ends_with("0.105361"), "{text}");
}
