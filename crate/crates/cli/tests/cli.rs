use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pg_forge_core::layout_model::{load_page, write_page_xml};

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

fn pg(args: &[&str]) -> Output {
    pg_env(args, &[])
}

fn pg_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pg-forge"));
    cmd.args(args).env_remove("PG_FORGE_TABLE");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_and_version() {
    let dir = tempfile::tempdir().unwrap();
    for flag in ["--help", "--version"] {
        let o = Command::new(env!("CARGO_BIN_EXE_pg-forge"))
            .arg(flag)
            .current_dir(dir.path())
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{flag}");
        assert!(!o.stdout.is_empty());
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn usage_errors_exit_2() {
    let o = pg(&["normalize", "--bogus"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(code(&pg(&[])), 2);
    assert!(o.stdout.is_empty());
}

#[test]
fn normalize_file_and_directory() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    std::fs::write(&input, "λ\u{1F79}γος τ\u{1F77}ς\n").unwrap();
    let out = dir.path().join("out.txt");
    assert_eq!(code(&pg(&["normalize", s(&input), s(&out)])), 0);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "λόγος τίς\n");

    let in_dir = dir.path().join("pages");
    std::fs::create_dir(&in_dir).unwrap();
    std::fs::write(in_dir.join("a.txt"), "\u{1F71}\n").unwrap();
    std::fs::write(in_dir.join("b.txt"), "\u{1F7D}\n").unwrap();
    let out_dir = dir.path().join("norm");
    assert_eq!(code(&pg(&["normalize", s(&in_dir), s(&out_dir), "--jobs", "2"])), 0);
    assert_eq!(std::fs::read_to_string(out_dir.join("a.txt")).unwrap(), "\u{03AC}\n");
    assert_eq!(std::fs::read_to_string(out_dir.join("b.txt")).unwrap(), "\u{03CE}\n");
}

#[test]
fn table_from_env_flag_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    std::fs::write(&input, "ab").unwrap();
    let out = dir.path().join("out.txt");
    let env_table = dir.path().join("env.tsv");
    std::fs::write(&env_table, "0061\t0062\n").unwrap();
    let flag_table = dir.path().join("flag.tsv");
    std::fs::write(&flag_table, "0062\t0061\n").unwrap();
    let env = [("PG_FORGE_TABLE", s(&env_table))];

    assert_eq!(code(&pg_env(&["normalize", s(&input), s(&out)], &env)), 0);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "bb");

    let config = dir.path().join("run.toml");
    std::fs::write(&config, "table = \"flag.tsv\"\n").unwrap();
    assert_eq!(
        code(&pg_env(
            &["normalize", s(&input), s(&out), "--config", s(&config)],
            &env
        )),
        0
    );
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "aa");

    assert_eq!(
        code(&pg_env(
            &[
                "normalize",
                s(&input),
                s(&out),
                "--config",
                s(&config),
                "--table",
                s(&env_table)
            ],
            &env
        )),
        0
    );
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "bb");

    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "zz\n").unwrap();
    assert_eq!(code(&pg(&["normalize", s(&input), s(&out), "--table", s(&bad)])), 2);
}

#[test]
fn clean_writes_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    std::fs::write(&input, "θεολο-\nγία καί\n\nSancti Patris\nὁ λόγος est μέγας\n").unwrap();
    let out = dir.path().join("out.txt");
    assert_eq!(code(&pg(&["clean", s(&input), s(&out)])), 0);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "θεολογία\nκαί\nὁ λόγος μέγας\n");
    let log: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out.provenance.json")).unwrap()).unwrap();
    let ops: Vec<&str> = log["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["operation"].as_str().unwrap())
        .collect();
    assert_eq!(
        ops,
        ["drop_empty_line", "dehyphenate", "drop_latin_line", "drop_latin_token"]
    );

    let o = pg(&["clean", s(&input), s(&out), "--latin-threshold", "2"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("threshold"));
}

#[test]
fn eval_text_identical_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (r, h) = (dir.path().join("ref"), dir.path().join("hyp"));
    std::fs::create_dir(&r).unwrap();
    std::fs::create_dir(&h).unwrap();
    for (name, text) in [
        ("a.txt", "ἐν ἀρχῇ ἦν ὁ λόγος"),
        ("b.txt", "καὶ ὁ λόγος ἦν πρὸς τὸν θεόν"),
    ] {
        std::fs::write(r.join(name), text).unwrap();
        std::fs::write(h.join(name), text).unwrap();
    }
    let report = dir.path().join("report.json");
    assert_eq!(
        code(&pg(&[
            "eval-text",
            "--ref",
            s(&r),
            "--hyp",
            s(&h),
            "--report",
            s(&report)
        ])),
        0
    );
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["cer"], 0.0);
    assert_eq!(v["wer"], 0.0);
    assert_eq!(
        std::fs::read_to_string(dir.path().join("report.confusion.csv")).unwrap(),
        "ref_char_hex,hyp_char_hex,count,error_class\n"
    );

    std::fs::write(h.join("b.txt"), "και ὁ λ\u{1F79}γος ἦν πρὸς τὸν θεόν").unwrap();
    let manifest = dir.path().join("pairs.tsv");
    std::fs::write(&manifest, "ref/a.txt\thyp/a.txt\nref/b.txt\thyp/b.txt\n").unwrap();
    let o = pg(&["eval-text", "--manifest", s(&manifest), "--normalize", "--report", "-"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["mode"], "canonicalized");
    assert_eq!(v["raw"]["char_edits"]["substitutions"], 2);
    assert_eq!(v["normalized"]["char_edits"]["substitutions"], 1);

    std::fs::remove_file(h.join("a.txt")).unwrap();
    assert_eq!(
        code(&pg(&["eval-text", "--ref", s(&r), "--hyp", s(&h), "--report", "-"])),
        3
    );
    assert_eq!(code(&pg(&["eval-text", "--ref", s(&r), "--report", "-"])), 2);
}

#[test]
fn eval_layout_on_page_files() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    std::fs::create_dir(&gt).unwrap();
    std::fs::create_dir(&pred).unwrap();
    let page = load_page(&fixture("pages/p001_eight_classes.xml")).unwrap().page;
    std::fs::write(gt.join("p1.xml"), write_page_xml(&page)).unwrap();
    let mut shifted = page.clone();
    for r in &mut shifted.regions {
        r.polygon = r.polygon.translated(0.0, 2000.0);
        r.score = Some(0.5);
    }
    std::fs::write(pred.join("p1.json"), shifted.to_json()).unwrap();
    let (report, csv) = (dir.path().join("r.json"), dir.path().join("t.csv"));
    let o = pg(&[
        "eval-layout",
        "--gt",
        s(&gt),
        "--pred",
        s(&pred),
        "--report",
        s(&report),
        "--csv",
        s(&csv),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["per_class"]["MainText_ColGreek"]["recall"], 0.0);
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("class,precision,recall,map50\n"));
    assert_eq!(table.lines().count(), 1 + 8 + 2);

    assert_eq!(
        code(&pg(&[
            "eval-layout",
            "--gt",
            s(&gt),
            "--pred",
            s(&pred),
            "--iou",
            "0",
            "--report",
            "-"
        ])),
        3
    );
    std::fs::write(gt.join("p2.xml"), write_page_xml(&page)).unwrap();
    assert_eq!(
        code(&pg(&[
            "eval-layout",
            "--gt",
            s(&gt),
            "--pred",
            s(&pred),
            "--report",
            "-"
        ])),
        3
    );
    std::fs::write(pred.join("p2.xml"), "<PcGts><Page").unwrap();
    assert_eq!(
        code(&pg(&[
            "eval-layout",
            "--gt",
            s(&gt),
            "--pred",
            s(&pred),
            "--report",
            "-"
        ])),
        2
    );
}

fn build(dir: &Path, name: &str, extra: &[&str]) -> (Output, PathBuf) {
    let out = dir.join(name);
    let mut args = vec![
        "build-vert",
        "--pages",
        fixture("pages").to_str().unwrap().to_owned().leak(),
        "--lexicon",
        fixture("lexicon.tsv").to_str().unwrap().to_owned().leak(),
        "--doc-id",
        "PG36",
        "--date",
        "4th c.",
        "--out",
        out.to_str().unwrap().to_owned().leak(),
    ];
    args.extend_from_slice(extra);
    (pg(&args), out)
}

#[test]
fn build_vert_is_deterministic_and_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let (o1, a) = build(dir.path(), "a.vert", &["--jobs", "1"]);
    assert_eq!(code(&o1), 0, "{}", stderr(&o1));
    assert!(o1.stdout.is_empty());
    let (o2, b) = build(dir.path(), "b.vert", &["--jobs", "4"]);
    assert_eq!(code(&o2), 0);
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(a, b);
    assert_eq!(a, std::fs::read(fixture("golden/pg36.vert")).unwrap());

    let cand = dir.path().join("cand.json");
    let prov = dir.path().join("prov.json");
    let (o, _) = build(
        dir.path(),
        "c.vert",
        &["--candidates", s(&cand), "--provenance", s(&prov)],
    );
    assert_eq!(code(&o), 0);
    let cand: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(cand).unwrap()).unwrap();
    assert_eq!(cand[0]["wordform"], "αὐτοῦ");
    let prov: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(prov).unwrap()).unwrap();
    assert_eq!(prov[0]["entries"][1]["operation"], "dehyphenate");
}

#[test]
fn build_vert_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.vert");
    let o = pg(&[
        "build-vert",
        "--pages",
        s(dir.path()),
        "--lexicon",
        "nope.tsv",
        "--doc-id",
        "d",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 4);
    let bad_lex = dir.path().join("lex.tsv");
    std::fs::write(&bad_lex, "only\ttwo\n").unwrap();
    let pages = fixture("pages");
    let o = pg(&[
        "build-vert",
        "--pages",
        s(&pages),
        "--lexicon",
        s(&bad_lex),
        "--doc-id",
        "d",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 2);
    let o = pg(&["build-vert", "--pages", s(&pages), "--doc-id", "d", "--out", s(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_supplies_lexicon_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            "lexicon = {:?}\ndate = \"from config\"\njobs = 2\n",
            fixture("lexicon.tsv").to_str().unwrap()
        ),
    )
    .unwrap();
    let pages = fixture("pages");
    let out = dir.path().join("x.vert");
    let args = [
        "build-vert",
        "--pages",
        s(&pages),
        "--doc-id",
        "d",
        "--out",
        s(&out),
        "--config",
        s(&config),
    ];
    assert_eq!(code(&pg(&args)), 0);
    assert!(std::fs::read_to_string(&out)
        .unwrap()
        .starts_with("<doc id=\"d\" date=\"from config\">\n"));
    let mut with_date = args.to_vec();
    with_date.extend(["--date", "flag"]);
    assert_eq!(code(&pg(&with_date)), 0);
    assert!(std::fs::read_to_string(&out)
        .unwrap()
        .starts_with("<doc id=\"d\" date=\"flag\">\n"));
}

#[test]
fn stats_table() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("stats.csv");
    let golden = fixture("golden/pg36.vert");
    let one = fixture("golden/one_line.vert");
    assert_eq!(code(&pg(&["stats", s(&golden), s(&one), "--csv", s(&csv)])), 0);
    assert_eq!(
        std::fs::read_to_string(&csv).unwrap(),
        "doc_id,date_label,word_count\nPG36,4th c.,36\ngolden,,2\nTOTAL,,38\n"
    );
    let broken = dir.path().join("broken.vert");
    std::fs::write(&broken, "<doc id=\"x\">\n<page n=\"1\" pdf=\"p\">\n").unwrap();
    assert_eq!(code(&pg(&["stats", s(&broken), "--csv", "-"])), 2);
    assert_eq!(code(&pg(&["stats", "missing.vert", "--csv", "-"])), 4);
}
