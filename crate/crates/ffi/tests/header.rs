use std::path::Path;
use std::process::Command;

const HEADER: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/include/mfg.h");

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(HEADER).unwrap();
    for name in [
        "typedef struct MfgConfig MfgConfig;",
        "typedef struct MfgRun MfgRun;",
        "MFG_STATUS_OK = 0",
        "MFG_STATUS_PANIC",
        "mfg_config_from_file",
        "mfg_config_from_str",
        "mfg_config_set_seed",
        "mfg_config_free",
        "mfg_run(",
        "mfg_run_mass",
        "mfg_run_write_outputs",
        "mfg_run_free",
        "mfg_lambert_w0",
        "mfg_last_error_message",
        "mfg_version",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        "#include \"mfg.h\"\n\
         int smoke(void) {\n\
           MfgConfig *cfg = 0; MfgRun *run = 0; double m = 0; size_t n = 0;\n\
           if (mfg_config_from_str(\"seed = 1\", &cfg) != MFG_STATUS_OK) return 1;\n\
           mfg_config_set_seed(cfg, 2);\n\
           if (mfg_run(cfg, &run) == MFG_STATUS_OK) { mfg_run_n_steps(run, &n); mfg_run_mass(run, n, &m); }\n\
           mfg_run_free(run); mfg_config_free(cfg);\n\
           return m > 1.0;\n\
         }\n",
    )
    .unwrap();
    let include = Path::new(HEADER).parent().unwrap();
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(include)
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| {
            Command::new(c)
                .arg("--version")
                .output()
                .is_ok_and(|o| o.status.success())
        })
        .ok_or(())
}
