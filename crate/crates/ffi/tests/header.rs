use std::path::{Path, PathBuf};
use std::process::Command;

fn header_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

/// Build the static library into its own target directory; `cargo test`
/// only builds the rlib, and the outer build directory is locked.
fn build_static_lib() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    let target = exe.ancestors().nth(3).unwrap().join("c-link");
    let out = Command::new(env!("CARGO"))
        .args(["build", "--release", "-p", "shapecoh-ffi", "--lib", "--target-dir"])
        .arg(&target)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .unwrap();
    assert!(out.status.success(), "cargo build failed: {}", String::from_utf8_lossy(&out.stderr));
    target.join("release").join("libshapecoh_ffi.a")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header_dir().join("shapecoh.h")).unwrap();
    for name in [
        "typedef struct ShcSystem ShcSystem;",
        "typedef struct ShcCurve ShcCurve;",
        "typedef struct ShcCurveSet ShcCurveSet;",
        "SHC_STATUS_OK = 0",
        "SHC_STATUS_PANIC",
        "shc_system_new(",
        "shc_flow_jacobian(",
        "shc_zero_curves(",
        "shc_alpha(",
        "shc_last_error(void)",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let h = header_dir().join("shapecoh.h");
    for (compiler, std) in [("cc", "-std=c99"), ("c++", "-std=c++11")] {
        let out = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Wextra", "-Werror", std, "-x"])
            .arg(if compiler == "cc" { "c" } else { "c++" })
            .arg(&h)
            .output()
            .unwrap();
        assert!(out.status.success(), "{compiler}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

const PROGRAM: &str = r#"
#include "shapecoh.h"
#include <math.h>
#include <stdio.h>
#include <string.h>

int main(void) {
    ShcSystem *s = NULL;
    if (shc_system_new("linear_saddle", &s) != SHC_STATUS_OK) return 1;
    double j[4];
    if (shc_flow_jacobian(s, 0.3, 0.2, 0.0, 1.0, 1e-3, j) != SHC_STATUS_OK) return 2;
    if (fabs(j[0] - exp(-1.0)) > 1e-9 || fabs(j[3] - exp(1.0)) > 1e-9) return 3;
    ShcSystem *bad = NULL;
    if (shc_system_new("nonsense", &bad) != SHC_STATUS_CONFIG_ERROR) return 4;
    if (strstr(shc_last_error(), "nonsense") == NULL) return 5;
    double xy[8] = {0, 0, 1, 0, 1, 1, 0, 1};
    ShcCurve *c = NULL;
    if (shc_curve_new(xy, 4, 1, &c) != SHC_STATUS_OK) return 6;
    double len = 0;
    shc_curve_length(c, &len);
    if (fabs(len - 4.0) > 1e-12) return 7;
    shc_curve_free(c);
    shc_system_free(s);
    printf("ok %s\n", shc_version());
    return 0;
}
"#;

#[test]
fn c_program_links_against_the_static_library() {
    let lib = build_static_lib();
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = dir.path().join("main");
    let out = Command::new("cc")
        .arg("-std=c99")
        .arg("-I")
        .arg(header_dir())
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "link failed: {}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
