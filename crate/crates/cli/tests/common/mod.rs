//! Shared plumbing for the CLI test suites: spawning the built binary
//! in a chosen working directory and putting small volumes on disk.

#![allow(dead_code)] // each test binary pulls in its own subset

use std::path::Path;
use std::process::{Command, Output};

use lesionbench_core::io::{write_volume, VolumeFormat};
use lesionbench_core::volume::BinaryMask;

/// Runs the binary under test with `cwd` as its working directory.
///
/// The jobs variable is scrubbed so a caller's environment cannot leak
/// a thread count into what should be a fully specified invocation.
pub fn lesionbench(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lesionbench"))
        .args(args)
        .current_dir(cwd)
        .env_remove("LESIONBENCH_JOBS")
        .output()
        .expect("failed to spawn the lesionbench binary")
}

pub fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process was killed by a signal")
}

pub fn stderr_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Asserts success, echoing the captured streams on failure so the
/// test log shows what the command actually said.
pub fn assert_success(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} exited with {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        stdout_text(out),
        stderr_text(out),
    );
}

pub fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}):\n{}", stdout_text(out));
    })
}

pub fn read_json(path: &Path) -> serde_json::Value {
    let bytes = std::fs::read(path)
        .unwrap_or_else(|e| panic!("reading {} failed: {e}", path.display()));
    serde_json::from_slice(&bytes)
        .unwrap_or_else(|e| panic!("{} is not JSON: {e}", path.display()))
}

/// Writes a binary mask with the given positive voxels as a NIfTI file.
pub fn write_mask_file(
    path: &Path,
    dims: (usize, usize, usize),
    positives: &[(usize, usize, usize)],
) {
    let n = dims.0 * dims.1 * dims.2;
    let mut flags = vec![false; n];
    for &(x, y, z) in positives {
        assert!(x < dims.0 && y < dims.1 && z < dims.2, "voxel out of bounds");
        flags[x + dims.0 * (y + dims.1 * z)] = true;
    }
    let mask = BinaryMask::from_bools(dims, (1.0, 1.0, 1.0), &flags).unwrap();
    write_volume(mask.volume(), path, VolumeFormat::Nifti).unwrap();
}
