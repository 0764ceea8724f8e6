#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub const SMALL_SCENE: &str = r#"
n = 8
k = 40
seed = 3

[scene]
eps0 = 0.5
amplitude = 1.0

[scene.box]
lower = [-4.0, -4.0]
upper = [4.0, 4.0]

[[scene.obstacles]]
center = [-1.5, 0.0]
radius = 0.5

[[scene.obstacles]]
center = [1.5, 0.0]
radius = 0.5

[sweep]
samples = 24

[estimates]
lambdas = 4
trials = 2

[smoothing]
seeds = 3
terms = 3
horizon = 1.0
"#;

pub fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

pub fn strongdamp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strongdamp")).args(args).output().unwrap()
}
