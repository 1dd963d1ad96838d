use std::path::PathBuf;

use clap::Parser;
use quadcurl::cli::{main_with_args, run, Cli};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("quadcurl-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn study(extra: &[&str], out: &PathBuf) -> i32 {
    let mut args = vec!["quadcurl", "study"];
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--out", out.to_str().unwrap()]);
    main_with_args(args)
}

#[test]
fn csv_schema_and_determinism() {
    let (a, b) = (scratch("a.csv"), scratch("b.csv"));
    let args = ["--example", "1", "--eps", "1", "--n", "2", "--n", "3", "--bc", "weak"];
    assert_eq!(study(&args, &a), 0);
    assert_eq!(study(&args, &b), 0);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(
        lines[0],
        "example,bc,sigma,eps,N,h,E_L2,rate_L2,E_curl,rate_curl,E_gc,rate_gc,E_energy,rate_energy,status"
    );
    let cols: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(cols.len(), 15);
    assert_eq!(cols[4], "3");
    assert!(cols[7].parse::<f64>().is_ok());
    assert_eq!(cols[14], "ok");
}

#[test]
fn markdown_subdomain_layout() {
    let out = scratch("sub.md");
    let args = ["--example", "2", "--bc", "strong", "--subdomain", "true", "--n", "8", "--format", "markdown"];
    assert_eq!(study(&args, &out), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let header = text.lines().find(|l| l.starts_with("| ε")).unwrap();
    assert!(header.contains("E_{L²,Ω₀} | rate | E_{curl,Ω₀} | rate | E_{gc,Ω₀} | rate | E_{A,Ω₀} | rate"));
}

#[test]
fn usage_errors_exit_with_one() {
    let out = scratch("bad.csv");
    assert_eq!(study(&["--example", "2", "--subdomain", "true", "--n", "12"], &out), 1);
    assert_eq!(study(&["--bc", "sideways"], &out), 1);
    assert_eq!(study(&["--eps=-1", "--n", "2"], &out), 1);
}

#[test]
fn check_subcommand_passes() {
    let mut out = Vec::new();
    run(Cli::parse_from(["quadcurl", "check"]), &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains("space: gradient inclusion, N=4"));
    assert!(text.trim_end().ends_with("0 failed"));
}
