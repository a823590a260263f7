mod common;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};

use common::fixture;

struct Run {
    ok: bool,
    stdout: String,
    stderr: String,
}

fn lite(args: &[&str], stdin: &str) -> Run {
    let mut child = Command::new(env!("CARGO_BIN_EXE_lite"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    Run {
        ok: out.status.success(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn path(rel: &str) -> String {
    fixture(rel).to_string_lossy().into_owned()
}

fn copy_dir(from: &Path, to: &Path) {
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), to.join(entry.file_name())).unwrap();
    }
}

#[test]
fn check_reports_and_fails_on_errors() {
    let r = lite(&["check", &path("cafe/lite.toml")], "");
    assert!(r.ok, "{}", r.stderr);
    assert!(r.stderr.contains("cafe: 2 units, 1 lexemes, 0 questionnaires"), "{}", r.stderr);

    let r = lite(&["check", &path("malaria/lite.toml")], "");
    assert!(r.ok, "{}", r.stderr);
    assert!(r.stderr.contains("malaria: 75 units, 3 lexemes, 1 questionnaires"), "{}", r.stderr);

    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture("cafe"), dir.path());
    let french = dir.path().join("french.lite");
    let text = fs::read_to_string(&french).unwrap().replace("$$food-or-drink s'il", "$$drink s'il");
    fs::write(&french, text).unwrap();
    let r = lite(&["check", &dir.path().join("lite.toml").to_string_lossy()], "");
    assert!(!r.ok);
    assert!(r.stderr.contains("french.lite:1: error UnknownTemplateVariable"), "{}", r.stderr);
}

#[test]
fn blank_matches_golden_file() {
    let r = lite(&["blank", &path("cafe/source-only.toml"), "--lang", "french"], "");
    assert!(r.ok, "{}", r.stderr);
    assert_eq!(r.stdout, fs::read_to_string(fixture("cafe/french.blank.golden")).unwrap());
    // Everything is already translated in the full project.
    let r = lite(&["blank", &path("cafe/lite.toml"), "--lang", "french"], "");
    assert_eq!(r.stdout, "\n");
}

#[test]
fn refresh_adds_blanks_for_new_source_material() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture("cafe"), dir.path());
    let manifest = dir.path().join("lite.toml").to_string_lossy().into_owned();
    let r = lite(&["refresh", &manifest, "--lang", "french", "--stdout"], "");
    assert_eq!(r.stdout, fs::read_to_string(dir.path().join("french.lite")).unwrap());

    let mut english = fs::OpenOptions::new().append(true).open(dir.path().join("english.lite")).unwrap();
    writeln!(english, "TrLex $$food-or-drink source=\"a coffee\" english=\"a coffee\"").unwrap();
    let r = lite(&["refresh", &manifest, "--lang", "french"], "");
    assert!(r.ok, "{}", r.stderr);
    let refreshed = fs::read_to_string(dir.path().join("french.lite")).unwrap();
    assert!(refreshed.contains("french=\"un coca\""), "{refreshed}");
    assert!(refreshed.contains("TrLex $$food-or-drink english=\"a coffee\" french=\"?\""), "{refreshed}");
    // An unfilled blank is a warning, and only that item fails to translate.
    let r = lite(&["check", &manifest], "");
    assert!(r.ok, "{}", r.stderr);
    assert!(r.stderr.contains("warning MissingTarget no french translation for \"a coffee\""), "{}", r.stderr);
    let r = lite(&["translate", &manifest, "--lang", "french"], "can i have a coffee\ncan i have a coke\n");
    assert_eq!(
        r.stdout,
        "i want a coffee please\tfrench=!MissingTarget\ni want a coke please\tfrench=je voudrais un coca s'il vous plaît\n"
    );
}

#[test]
fn translate_lines() {
    let input = "could i have a coke\nhi\n\ngood evening\ni would like a coca-cola please\n";
    let r = lite(&["translate", &path("cafe/lite.toml"), "--lang", "french", "--show-canonical"], input);
    assert!(r.ok, "{}", r.stderr);
    assert_eq!(
        r.stdout,
        "i want a coke please\tfrench=je voudrais un coca s'il vous plaît\tcanonical=i want $$food-or-drink please\n\
         hello\tfrench=Bonjour\tcanonical=hello\n\
         !NoMatch\n\
         i want a coke please\tfrench=je voudrais un coca s'il vous plaît\tcanonical=i want $$food-or-drink please\n"
    );
}

#[test]
fn count_and_enumerate() {
    let r = lite(&["count", &path("cafe/lite.toml"), "--distinct", "100"], "");
    assert!(r.ok, "{}", r.stderr);
    assert_eq!(r.stdout, "derivations\t18\nvocabulary\t13\ndistinct\t18\n");
    let r = lite(&["count", &path("cafe/lite.toml"), "--scope", "hello"], "");
    assert_eq!(r.stdout, "derivations\t2\nvocabulary\t2\n");
    let r = lite(&["count", &path("cafe/lite.toml"), "--distinct", "10"], "");
    assert!(!r.ok);
    let r = lite(&["enumerate", &path("cafe/lite.toml"), "--limit", "3"], "");
    assert_eq!(r.stdout, "i want a coca-cola\ni want a coca-cola please\ni want a coke\n");
}

#[test]
fn compile_both_formats() {
    let r = lite(&["compile", &path("cafe/lite.toml")], "");
    assert!(r.ok, "{}", r.stderr);
    let g = lite_core::grammar::parse_lite_bnf(&r.stdout).unwrap();
    assert_eq!(lite_core::grammar::count_language(&g).count, 18u32.into());

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.xml");
    let r = lite(&["compile", &path("malaria/lite.toml"), "--format", "srgs-xml", "--out", &out.to_string_lossy()], "");
    assert!(r.ok, "{}", r.stderr);
    let xml = fs::read_to_string(&out).unwrap();
    let doc = roxmltree::Document::parse(&xml).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "grammar");
}

#[test]
fn sign_text_and_csv_rules_agree() {
    let utterance = "ce train ne circule pas via genčve\n";
    let table = lite(&["sign", &path("train/lite.toml"), "--lang", "lsf-ch", "--table"], utterance);
    assert!(table.ok, "{}", table.stderr);
    let csv_table = lite(&["sign", &path("train/csv.toml"), "--lang", "lsf-ch", "--table"], utterance);
    assert_eq!(table.stdout, csv_table.stdout);

    let sigml = lite(&["sign", &path("train/lite.toml"), "--lang", "lsf-ch"], utterance);
    assert!(sigml.ok, "{}", sigml.stderr);
    let doc = roxmltree::Document::parse(&sigml.stdout).unwrap();
    let glosses: Vec<_> = doc
        .descendants()
        .filter(|n| n.has_tag_name("hns_sign"))
        .map(|n| n.attribute("gloss").unwrap())
        .collect();
    assert_eq!(glosses, ["TRAIN", "CE", "GENEVE", "ALLER", "PAS"]);

    let r = lite(&["sign", &path("train/lite.toml"), "--lang", "lsf-ch"], "ce train circule\n");
    assert!(!r.ok);
    assert!(r.stderr.contains("NoMatch"), "{}", r.stderr);
}

#[test]
fn sign_refresh_adds_blank_rows() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture("train"), dir.path());
    let manifest = dir.path().join("lite.toml").to_string_lossy().into_owned();
    let r = lite(&["sign-refresh", &manifest, "--lang", "lsf-ch"], "");
    assert!(r.ok, "{}", r.stderr);
    assert!(r.stderr.is_empty(), "nothing to add: {}", r.stderr);

    let mut rules = fs::OpenOptions::new().append(true).open(dir.path().join("train.lite")).unwrap();
    writeln!(rules, "TrLex $$station source=\"berne\" gloss=\"BERNE\" mouthing=\"Berne\"").unwrap();
    let manual_before = fs::read_to_string(dir.path().join("manual.csv")).unwrap();
    let nonmanual_before = fs::read_to_string(dir.path().join("nonmanual.csv")).unwrap();
    let r = lite(&["sign-refresh", &manifest, "--lang", "lsf-ch"], "");
    assert!(r.ok, "{}", r.stderr);
    let manual = fs::read_to_string(dir.path().join("manual.csv")).unwrap();
    assert_eq!(manual, format!("{manual_before}BERNE,?\n"));
    let mouthing = fs::read_to_string(dir.path().join("mouthing.csv")).unwrap();
    assert!(mouthing.ends_with("Berne,?\n"), "{mouthing}");
    assert_eq!(fs::read_to_string(dir.path().join("nonmanual.csv")).unwrap(), nonmanual_before);

    // A blank lexicon entry stops SiGML output for that sign.
    let r = lite(&["sign", &manifest, "--lang", "lsf-ch"], "ce train ne circule pas via berne\n");
    assert!(!r.ok);
    let r = lite(&["sign", &manifest, "--lang", "lsf-ch", "--table"], "ce train ne circule pas via berne\n");
    assert!(r.ok, "{}", r.stderr);
}
