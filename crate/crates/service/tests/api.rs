mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use reqwest::multipart::{Form, Part};
use resumeflow_core::llm::{MockProvider, OpenAiProvider};
use resumeflow_core::schema::validate_resume;
use resumeflow_core::LlmGateway;
use resumeflow_service::ServiceConfig;
use serde_json::Value;

#[tokio::test]
async fn lifecycle_reaches_done_with_scores_and_artifacts() {
    let server = TestServer::mock().await;
    let started = Instant::now();
    let id = server.submit_text(RESUME, JOB).await;
    assert!(started.elapsed() < Duration::from_millis(200), "submit took {:?}", started.elapsed());

    let (trace, job) = server.wait(&id, Duration::from_secs(10)).await;
    assert!(is_subsequence(&trace, &CANONICAL), "{trace:?}");
    assert_eq!(job["state"], "Done", "{job}");
    let score = &job["score"];
    for k in ["job_alignment_token", "content_preservation_token"] {
        let v = score[k].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v), "{k}={v}");
    }
    assert_eq!(score["hallucination_risk"], false);
    assert!(job["artifacts"]["tailored_json"].is_string());
    assert!(job["artifacts"]["score_json"].is_string());

    // a finished job no longer changes
    assert_eq!(server.job(&id).await, job);

    let resp = server.artifact(&id, "tailored_json").await;
    assert_eq!(resp.status(), 200);
    assert_eq!(resp.headers()["content-type"], "application/json");
    let tailored: Value = resp.json().await.unwrap();
    let doc = validate_resume(&tailored).unwrap().value;
    assert_eq!(doc.personal.full_name, "Jane Doe");

    let resp = server.artifact(&id, "score_json").await;
    let on_disk: Value = resp.json().await.unwrap();
    assert_eq!(&on_disk, score);

    let resp = server.artifact(&id, "tex").await;
    assert_eq!(resp.status(), 200);
    assert_eq!(resp.headers()["content-type"], "application/x-tex");
    assert!(resp.text().await.unwrap().contains("\\begin{document}"));

    let resp = server.artifact(&id, "md").await;
    assert_eq!(resp.status(), 200);
    assert!(resp.headers()["content-type"].to_str().unwrap().starts_with("text/markdown"));
    assert!(resp.text().await.unwrap().starts_with("# Jane Doe"));

    let health: Value = server.client.get(server.url("/v1/health")).send().await.unwrap().json().await.unwrap();
    let resp = server.artifact(&id, "pdf").await;
    if health["latex_engine_present"] == true {
        assert!(resp.status() == 200 || resp.status() == 404);
    } else {
        assert_eq!(resp.status(), 404);
        let body: Value = resp.json().await.unwrap();
        assert_eq!(body["reason"], "latex_engine_absent");
    }

    let resp = server.artifact(&id, "cover_letter_md").await;
    assert_eq!(resp.status(), 404);
    let body: Value = resp.json().await.unwrap();
    assert_eq!(body["reason"], "not_generated");
}

#[tokio::test]
async fn cover_letter_and_latent_scores_on_request() {
    let server = TestServer::mock().await;
    let form = text_form(RESUME, JOB)
        .text("provider", "mock")
        .text("generate_cover_letter", "true")
        .text("latent_scores", "true");
    let resp = server.submit(form).await;
    assert_eq!(resp.status(), 202);
    let id = resp.json::<Value>().await.unwrap()["job_id"].as_str().unwrap().to_owned();
    let (_, job) = server.wait(&id, Duration::from_secs(10)).await;
    assert_eq!(job["state"], "Done", "{job}");
    assert!(job["score"]["job_alignment_latent"].is_number());
    assert!(job["score"]["embedder_id"].is_string());
    let resp = server.artifact(&id, "cover_letter_md").await;
    assert_eq!(resp.status(), 200);
    assert!(resp.text().await.unwrap().contains("Jane Doe"));
}

#[tokio::test]
async fn pdf_upload_is_accepted() {
    let server = TestServer::mock().await;
    let form = Form::new()
        .part(
            "resume",
            Part::bytes(RESUME.as_bytes().to_vec()).file_name("resume.txt").mime_str("text/plain").unwrap(),
        )
        .text("job_description", JOB);
    let resp = server.submit(form).await;
    assert_eq!(resp.status(), 202, "{}", resp.text().await.unwrap());
}

async fn expect_error(resp: reqwest::Response, status: u16, reason: &str) {
    assert_eq!(resp.status(), status);
    let body: Value = resp.json().await.unwrap();
    assert_eq!(body["reason"], reason, "{body}");
    assert!(body["error"].is_string());
}

#[tokio::test]
async fn submission_errors() {
    let server = TestServer::mock().await;

    let both = text_form(RESUME, JOB).part("resume", Part::bytes(b"%PDF-1.4".to_vec()).file_name("r.pdf"));
    expect_error(server.submit(both).await, 400, "invalid_input").await;

    let neither = Form::new().text("job_description", JOB);
    expect_error(server.submit(neither).await, 400, "invalid_input").await;

    expect_error(server.submit(text_form(RESUME, "  \n")).await, 400, "invalid_input").await;
    expect_error(server.submit(Form::new().text("resume_text", RESUME)).await, 400, "invalid_input").await;

    let unknown = text_form(RESUME, JOB).text("provider", "watson");
    expect_error(server.submit(unknown).await, 400, "invalid_input").await;
    // a real provider that is not registered in this gateway
    let absent = text_form(RESUME, JOB).text("provider", "gemini");
    expect_error(server.submit(absent).await, 400, "invalid_input").await;

    let bad_bool = text_form(RESUME, JOB).text("generate_cover_letter", "maybe");
    expect_error(server.submit(bad_bool).await, 400, "invalid_input").await;

    let big = vec![b'a'; 11 * 1024 * 1024];
    let oversize = Form::new()
        .part("resume", Part::bytes(big).file_name("resume.pdf").mime_str("application/pdf").unwrap())
        .text("job_description", JOB);
    expect_error(server.submit(oversize).await, 413, "payload_too_large").await;

    let docx = Form::new()
        .part("resume", Part::bytes(b"PK\x03\x04 not a pdf".to_vec()).file_name("resume.docx"))
        .text("job_description", JOB);
    expect_error(server.submit(docx).await, 422, "not_a_pdf").await;

    let broken = Form::new()
        .part("resume", Part::bytes(b"%PDF-1.4\ngarbage".to_vec()).file_name("resume.pdf"))
        .text("job_description", JOB);
    let resp = server.submit(broken).await;
    assert_eq!(resp.status(), 422);

    assert_eq!(server.service.store().count(resumeflow_service::JobState::Queued), 0);
}

#[tokio::test]
async fn lookup_errors() {
    let server = TestServer::mock().await;
    let unknown = uuid::Uuid::new_v4();
    let resp = server.client.get(server.url(&format!("/v1/jobs/{unknown}"))).send().await.unwrap();
    expect_error(resp, 404, "job_not_found").await;
    let resp = server.client.get(server.url("/v1/jobs/not-a-uuid")).send().await.unwrap();
    expect_error(resp, 404, "job_not_found").await;
    expect_error(server.artifact(&unknown.to_string(), "tex").await, 404, "job_not_found").await;

    let id = server.submit_text(RESUME, JOB).await;
    server.wait(&id, Duration::from_secs(10)).await;
    expect_error(server.artifact(&id, "docx").await, 404, "unknown_artifact_kind").await;
}

#[tokio::test]
async fn artifacts_of_unfinished_job_conflict() {
    let (provider, gate) = GatedProvider::new(false, Duration::ZERO);
    let gateway = LlmGateway::builder().with_provider(provider).build();
    let server = TestServer::start(ServiceConfig::default(), gateway).await;
    let id = server.submit_text(RESUME, JOB).await;
    expect_error(server.artifact(&id, "tex").await, 409, "job_not_done").await;
    gate.open();
    let (_, job) = server.wait(&id, Duration::from_secs(10)).await;
    assert_eq!(job["state"], "Done");
    assert_eq!(server.artifact(&id, "tex").await.status(), 200);
}

#[tokio::test]
async fn models_and_health() {
    let gateway = LlmGateway::builder()
        .with_provider(Arc::new(OpenAiProvider::new(None, None)))
        .with_provider(Arc::new(MockProvider::offline()))
        .build();
    let server = TestServer::start(ServiceConfig::default(), gateway).await;

    let models: Vec<Value> = server.client.get(server.url("/v1/models")).send().await.unwrap().json().await.unwrap();
    assert!(!models.is_empty());
    assert_eq!(models.iter().filter(|m| m["is_default"] == true).count(), 1);
    for m in &models {
        assert!(m["provider"].is_string() && m["model_id"].is_string());
        assert!(m["requires_credentials_present"].is_boolean());
        assert_ne!(m["provider"], "gemini");
    }
    let openai: Vec<_> = models.iter().filter(|m| m["provider"] == "openai").collect();
    assert!(!openai.is_empty());
    assert!(openai.iter().all(|m| m["requires_credentials_present"] == false));
    // without credentials the offline mock is the default
    let default = models.iter().find(|m| m["is_default"] == true).unwrap();
    assert_eq!(default["provider"], "mock");
    assert_eq!(default["requires_credentials_present"], true);

    let health: Value = server.client.get(server.url("/v1/health")).send().await.unwrap().json().await.unwrap();
    assert_eq!(health["status"], "ok");
    assert_eq!(health["queue_depth"], 0);
    assert!(health["latex_engine_present"].is_boolean());
}

#[tokio::test]
async fn bearer_token_guards_everything_but_health() {
    let config = ServiceConfig {
        api_token: Some("s3cret".into()),
        ..ServiceConfig::default()
    };
    let server = TestServer::start(config, mock_gateway()).await;
    let c = &server.client;

    assert_eq!(c.get(server.url("/v1/health")).send().await.unwrap().status(), 200);
    expect_error(c.get(server.url("/v1/models")).send().await.unwrap(), 401, "unauthorized").await;
    let wrong = c.get(server.url("/v1/models")).bearer_auth("nope").send().await.unwrap();
    assert_eq!(wrong.status(), 401);
    let ok = c.get(server.url("/v1/models")).bearer_auth("s3cret").send().await.unwrap();
    assert_eq!(ok.status(), 200);

    let resp = server.submit(text_form(RESUME, JOB)).await;
    assert_eq!(resp.status(), 401);
    let resp = c
        .post(server.url("/v1/tailor"))
        .bearer_auth("s3cret")
        .multipart(text_form(RESUME, JOB))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 202);
}

#[tokio::test]
async fn static_ui_is_served_when_configured() {
    let ui = tempfile::tempdir().unwrap();
    std::fs::write(ui.path().join("index.html"), "<h1>ResumeFlow</h1>").unwrap();
    let config = ServiceConfig {
        ui_dir: Some(ui.path().to_owned()),
        ..ServiceConfig::default()
    };
    let server = TestServer::start(config, mock_gateway()).await;
    let resp = server.client.get(server.url("/ui/")).send().await.unwrap();
    assert_eq!(resp.status(), 200);
    assert!(resp.text().await.unwrap().contains("ResumeFlow"));
}
