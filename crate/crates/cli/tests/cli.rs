use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// The binary with provider credentials and endpoints scrubbed from the environment.
fn resumeflow() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_resumeflow"));
    for var in [
        "OPENAI_API_KEY",
        "OPENAI_BASE_URL",
        "GEMINI_API_KEY",
        "GEMINI_BASE_URL",
        "RESUMEFLOW_DEFAULT_PROVIDER",
        "RESUMEFLOW_LATEX_ENGINE",
    ] {
        c.env_remove(var);
    }
    c
}

fn run(c: &mut Command) -> Output {
    c.output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn tailor_with_mock_writes_artifacts() {
    let out_dir = tempfile::tempdir().unwrap();
    let out = run(resumeflow()
        .args(["tailor", "--provider", "mock", "--cover-letter", "--resume"])
        .arg(fixture("resume.txt"))
        .arg("--job")
        .arg(fixture("job.txt"))
        .arg("--out")
        .arg(out_dir.path()));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = out_dir.path();
    for f in [
        "user_data.json",
        "job_details.json",
        "tailored.json",
        "score.json",
        "resume.tex",
        "resume.md",
        "cover_letter.md",
        "provenance.json",
    ] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    // stdout is exactly the score report
    assert_eq!(stdout_json(&out), read_json(&dir.join("score.json")));

    let user = read_json(&dir.join("user_data.json"));
    let tailored = read_json(&dir.join("tailored.json"));
    assert_eq!(
        serde_json::to_string(&user["personal"]).unwrap(),
        serde_json::to_string(&tailored["personal"]).unwrap()
    );
    let job = read_json(&dir.join("job_details.json"));
    assert_eq!(job["company_name"], "Globex Logistics");
    let provenance = read_json(&dir.join("provenance.json"));
    assert!(!provenance["sections"].as_array().unwrap().is_empty());
    assert!(std::fs::read_to_string(dir.join("resume.md")).unwrap().starts_with("# Maya Castillo"));
}

#[test]
fn job_can_come_from_stdin() {
    let out_dir = tempfile::tempdir().unwrap();
    let mut child = resumeflow()
        .args(["tailor", "--provider", "mock", "--job", "-", "--resume"])
        .arg(fixture("resume.txt"))
        .arg("--out")
        .arg(out_dir.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(std::fs::read(fixture("job.txt")).unwrap().as_slice())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.path().join("tailored.json").is_file());
}

#[test]
fn extract_commands_print_json() {
    let out = run(resumeflow()
        .args(["extract-user", "--provider", "mock", "--resume"])
        .arg(fixture("resume.txt")));
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    assert_eq!(doc["personal"]["full_name"], "Maya Castillo");
    assert_eq!(doc["work_experience"].as_array().unwrap().len(), 2);

    let out = run(resumeflow()
        .args(["extract-job", "--provider", "mock", "--job"])
        .arg(fixture("job.txt")));
    assert_eq!(out.status.code(), Some(0));
    let job = stdout_json(&out);
    assert_eq!(job["title"], "Senior Data Platform Engineer");
}

#[test]
fn score_fixture_values() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    std::fs::write(p("original.txt"), "a b c d").unwrap();
    std::fs::write(p("job.txt"), "c d e").unwrap();
    std::fs::write(
        p("generated.json"),
        r#"{"personal": {"full_name": "a b"}, "achievements": ["c d"]}"#,
    )
    .unwrap();
    let out = run(resumeflow()
        .arg("score")
        .arg("--original")
        .arg(p("original.txt"))
        .arg("--generated")
        .arg(p("generated.json"))
        .arg("--job")
        .arg(p("job.txt")));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert!((report["job_alignment_token"].as_f64().unwrap() - 2.0 / 3.0).abs() <= 1e-9);
    assert_eq!(report["content_preservation_token"], 1.0);

    // identical texts
    std::fs::write(p("job.txt"), "a b c d").unwrap();
    let out = run(resumeflow()
        .arg("score")
        .arg("--original")
        .arg(p("original.txt"))
        .arg("--generated")
        .arg(p("generated.json"))
        .arg("--job")
        .arg(p("job.txt"))
        .args(["--embedder", "mock"]));
    let report = stdout_json(&out);
    assert_eq!(report["job_alignment_token"], 1.0);
    assert_eq!(report["content_preservation_token"], 1.0);
    assert!(report["job_alignment_latent"].is_number());

    std::fs::write(p("job.txt"), "  \n").unwrap();
    let out = run(resumeflow()
        .arg("score")
        .arg("--original")
        .arg(p("original.txt"))
        .arg("--generated")
        .arg(p("generated.json"))
        .arg("--job")
        .arg(p("job.txt")));
    assert_ne!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("word set") && err.contains("empty"), "{err}");
}

#[test]
fn exit_codes() {
    let out = run(resumeflow().args(["tailor", "--provider", "mock", "--job"]).arg(fixture("job.txt")));
    assert_eq!(out.status.code(), Some(2), "missing --resume");

    let out = run(resumeflow().args(["tailor", "--resume", "/nonexistent/resume.pdf", "--job"]).arg(fixture("job.txt")));
    assert_eq!(out.status.code(), Some(2), "unreadable resume");

    let out = run(resumeflow()
        .args(["extract-user", "--provider", "watson", "--resume"])
        .arg(fixture("resume.txt")));
    assert_eq!(out.status.code(), Some(2), "unknown provider");

    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.pdf");
    std::fs::write(&broken, b"%PDF-1.4\nnot really").unwrap();
    let out = run(resumeflow().args(["extract-user", "--provider", "mock", "--resume"]).arg(&broken));
    assert_eq!(out.status.code(), Some(3), "unreadable PDF");

    let headings = dir.path().join("headings.txt");
    std::fs::write(&headings, "EDUCATION\n").unwrap();
    let out = run(resumeflow().args(["extract-user", "--provider", "mock", "--resume"]).arg(&headings));
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

/// Answers every HTTP request with a fixed response and counts connections.
fn stub_server(response: &'static str) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            counter.fetch_add(1, Ordering::SeqCst);
            let mut buf = [0u8; 65536];
            let _ = stream.read(&mut buf);
            let _ = stream.write_all(response.as_bytes());
        }
    });
    (format!("http://{addr}"), hits)
}

const UNAUTHORIZED: &str = "HTTP/1.1 401 Unauthorized\r\nContent-Type: application/json\r\nContent-Length: 49\r\nConnection: close\r\n\r\n{\"error\":{\"message\":\"Incorrect API key provided\"}}";

#[test]
fn bad_api_key_exits_4() {
    let (url, hits) = stub_server(UNAUTHORIZED);
    let out = run(resumeflow()
        .env("OPENAI_BASE_URL", &url)
        .env("OPENAI_API_KEY", "sk-wrong")
        .args(["extract-job", "--provider", "openai", "--job"])
        .arg(fixture("job.txt")));
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(hits.load(Ordering::SeqCst) >= 1);
}

#[test]
fn mock_runs_touch_no_network() {
    let (url, hits) = stub_server(UNAUTHORIZED);
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("generated.json"), r#"{"personal": {"full_name": "Maya Castillo"}, "achievements": ["Rust Kafka"]}"#).unwrap();
    let with_env = |c: &mut Command| -> Output {
        c.env("OPENAI_BASE_URL", &url)
            .env("GEMINI_BASE_URL", &url)
            .env("OPENAI_API_KEY", "sk-test")
            .env("GEMINI_API_KEY", "g-test")
            .env("HTTP_PROXY", &url)
            .env("HTTPS_PROXY", &url);
        run(c)
    };
    let runs = [
        with_env(
            resumeflow()
                .args(["tailor", "--provider", "mock", "--cover-letter", "--latent", "--resume"])
                .arg(fixture("resume.txt"))
                .arg("--job")
                .arg(fixture("job.txt"))
                .arg("--out")
                .arg(dir.path().join("out")),
        ),
        with_env(resumeflow().args(["extract-user", "--provider", "mock", "--resume"]).arg(fixture("resume.txt"))),
        with_env(resumeflow().args(["extract-job", "--provider", "mock", "--job"]).arg(fixture("job.txt"))),
        with_env(
            resumeflow()
                .args(["score", "--embedder", "mock", "--original"])
                .arg(fixture("resume.txt"))
                .arg("--generated")
                .arg(dir.path().join("generated.json"))
                .arg("--job")
                .arg(fixture("job.txt")),
        ),
    ];
    for out in &runs {
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(hits.load(Ordering::SeqCst), 0, "a mock run contacted the network");
}

#[test]
fn serve_answers_health() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    drop(listener);
    let data = tempfile::tempdir().unwrap();
    let mut child = resumeflow()
        .args(["serve", "--port", &port.to_string(), "--data-dir"])
        .arg(data.path())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let health: Option<Value> = rt.block_on(async {
        for _ in 0..200 {
            if let Ok(r) = reqwest::get(format!("http://127.0.0.1:{port}/v1/health")).await {
                return r.json().await.ok();
            }
            tokio::time::sleep(std::time::Duration::from_millis(25)).await;
        }
        None
    });
    let _ = child.kill();
    let _ = child.wait();
    let health = health.expect("service came up");
    assert_eq!(health["status"], "ok");
    assert!(data.path().join("jobs.jsonl").is_file());
}
