//! End-to-end runs of the `armoury` binary.

use std::path::Path;
use std::process::{Command, Output};

use armoury::formats::{load_pool, parse_dump, read_text, write_pool_dir};
use armoury::pipeline::{build_pools, encode_program, DEMO_ASM};
use armoury_core::asm::assemble;
use armoury_core::ir::{BytecodeInstr, GenerationProfile};
use armoury_core::vm::execute;
use armoury_core::{sco, CipherSpec, PackMode};

fn armoury(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_armoury"))
        .args(args)
        .env_remove("ARMOURY_SEED")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = armoury(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn count_variants_prints_exact_product() {
    let out = ok(&["count-variants", "--sizes", "314,2755,2755,2755,8177,319,26511,9863,3009"]);
    assert!(out.starts_with("13475238762538894122655502879250 "), "{out}");
    let json: serde_json::Value =
        serde_json::from_str(&ok(&["--json", "count-variants", "--sizes", "2,3"])).unwrap();
    assert_eq!(json["exact"], "6");
}

#[test]
fn usage_and_data_errors() {
    assert_eq!(armoury(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(armoury(&["count-variants", "--sizes", "2,0"]).status.code(), Some(1));
    assert_eq!(armoury(&["run", "/nonexistent/file", "--profile-seed", "0"]).status.code(), Some(1));
    let out = armoury(&["search-keys", "--target", "5", "--method", "pairs"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn header_goes_to_stderr_and_reports_seed() {
    let out = Command::new(env!("CARGO_BIN_EXE_armoury"))
        .args(["lcg", "--preset", "minstd", "--state", "1", "--count", "2"])
        .env("ARMOURY_SEED", "0x2A")
        .output()
        .unwrap();
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("# armoury "), "{err}");
    assert!(err.contains("seed=0x000000000000002A"));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "0x41A7\n0x10D63AF1\n");
}

#[test]
fn search_keys_writes_verifiable_pool() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CipherSpec::scaled_579();
    let target = sco(armoury_core::CipherKey(0x0F_0F0F), &spec);
    let file = dir.path().join("pool.txt");
    let target_arg = format!("0x{:X}", target.0);
    ok(&["search-keys", "--spec", "scaled-579", "--target", &target_arg, "-o", p(&file)]);
    let pool = load_pool(&file, &spec, true).unwrap();
    assert_eq!(pool.target, target);
    assert!(pool.keys().contains(&armoury_core::CipherKey(0x0F_0F0F)));

    let sliced = dir.path().join("half.txt");
    ok(&["search-keys", "--spec", "scaled-579", "--target", &target_arg, "--slice", "1/2", "-o", p(&sliced)]);
    assert!(load_pool(&sliced, &spec, true).unwrap().len() <= pool.len());
}

#[test]
fn assemble_is_deterministic_given_profile_seed() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("demo.asm");
    std::fs::write(&src, DEMO_ASM).unwrap();
    let a = ok(&["assemble", p(&src), "--profile-seed", "7"]);
    let b = ok(&["--seed", "99", "assemble", p(&src), "--profile-seed", "7"]);
    assert_eq!(a, b);
    assert_ne!(a, ok(&["assemble", p(&src), "--profile-seed", "8"]));
    let profile = GenerationProfile::new(7);
    assert_eq!(parse_dump(&a).unwrap(), encode_program(&assemble(DEMO_ASM).unwrap(), &profile));
}

#[test]
fn protect_reveal_run_mutate() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CipherSpec::default_59();
    let profile = GenerationProfile::new(0);
    let words = encode_program(&assemble(DEMO_ASM).unwrap(), &profile);
    let pools = build_pools(&words, PackMode::Concat, &spec, 64, 3).unwrap();
    let manifest = write_pool_dir(&dir.path().join("pools"), &pools, &spec).unwrap();

    let src = dir.path().join("demo.asm");
    std::fs::write(&src, DEMO_ASM).unwrap();
    let dump = dir.path().join("demo.dump");
    ok(&["assemble", p(&src), "--profile-seed", "0", "-o", p(&dump)]);

    let blob = dir.path().join("demo.blob");
    ok(&["--seed", "1", "protect", p(&dump), "--pools", p(&manifest), "-o", p(&blob)]);
    let again = dir.path().join("again.blob");
    ok(&["--seed", "1", "protect", p(&dump), "--pools", p(&manifest), "-o", p(&again)]);
    assert_eq!(std::fs::read(&blob).unwrap(), std::fs::read(&again).unwrap());

    let back = dir.path().join("back.dump");
    ok(&["reveal", p(&blob), "-o", p(&back)]);
    assert_eq!(parse_dump(&read_text(&back).unwrap()).unwrap(), words);

    let program: Vec<BytecodeInstr> =
        words.chunks_exact(5).map(|c| BytecodeInstr(c.try_into().unwrap())).collect();
    let expected = execute(&program, &profile, 1_000_000).unwrap();
    let eax = format!("EAX=0x{:08X}", expected.registers(&profile)[0]);
    let direct = ok(&["run", p(&dump), "--profile-seed", "0"]);
    let protected = ok(&["run", p(&blob), "--profile-seed", "0", "--oracle", "loopback"]);
    assert!(direct.starts_with(&eax) && direct.contains("EAX=0x00000017"), "{direct}");
    assert_eq!(direct, protected);

    let mutated = dir.path().join("m.blob");
    ok(&["--seed", "5", "mutate", p(&blob), "--pools", p(&manifest), "-o", p(&mutated)]);
    assert_ne!(std::fs::read(&mutated).unwrap(), std::fs::read(&blob).unwrap());
    assert_eq!(ok(&["run", p(&mutated), "--profile-seed", "0"]), direct);
}
