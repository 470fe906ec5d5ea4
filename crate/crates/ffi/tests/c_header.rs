//! Compiles a C client against the generated header and, when the static
//! library is present, links and runs it.

use std::path::{Path, PathBuf};
use std::process::Command;

const CLIENT: &str = r#"
#include <stdio.h>
#include <math.h>
#include "cone_sobolev.h"

int main(void) {
    CsCone *cone = NULL;
    if (cs_cone_new_builtin("halfplane-x1", &cone) != CS_STATUS_OK) return 10;
    double norm = 0.0;
    if (cs_embedding_norm(cone, 1.0, 1.0, &norm) != CS_STATUS_OK) return 11;
    if (fabs(norm - 0.5 * cbrt(1.5)) > 1e-12) return 12;
    CsStatus bad = cs_embedding_norm(cone, 4.0, 1.0, &norm);
    if (bad != CS_STATUS_DOMAIN || cs_last_error_message()[0] == '\0') return 13;
    CsProfile *profile = NULL;
    if (cs_profile_alvino(cone, 1.5, 1.0, 1e8, 1.0, &profile) != CS_STATUS_OK) return 14;
    CsQuotientReport report;
    if (cs_quotient(profile, 1.5, 1.0, &report) != CS_STATUS_OK || !report.within_bound) return 15;
    cs_profile_free(profile);
    cs_cone_free(cone);
    printf("%.15f\n", norm);
    return 0;
}
"#;

fn compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok())
}

fn static_library() -> Option<PathBuf> {
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let target = tmp.parent()?;
    let profile_dir = std::env::current_exe().ok()?.parent()?.parent()?.to_path_buf();
    [profile_dir.join("libcone_sobolev_ffi.a"), target.join("debug").join("libcone_sobolev_ffi.a")]
        .into_iter()
        .find(|p| p.exists())
}

#[test]
fn c_client_builds_against_header() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    std::fs::write(&src, CLIENT).unwrap();

    let syntax = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .output()
        .unwrap();
    assert!(syntax.status.success(), "{}", String::from_utf8_lossy(&syntax.stderr));

    let Some(lib) = static_library() else {
        eprintln!("static library not found; header checked only");
        return;
    };
    let exe = dir.path().join("client");
    let link = Command::new(cc)
        .arg("-std=c99")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .output()
        .unwrap();
    assert!(link.status.success(), "{}", String::from_utf8_lossy(&link.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "client exited with {:?}", run.status.code());
    let printed: f64 = String::from_utf8_lossy(&run.stdout).trim().parse().unwrap();
    assert!((printed - 0.5 * 1.5f64.powf(1.0 / 3.0)).abs() < 1e-12);
}
