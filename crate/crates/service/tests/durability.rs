mod common;

use std::time::Duration;

use common::*;
use resumeflow_core::LlmGateway;
use resumeflow_service::jobs::INTERRUPTED;
use resumeflow_service::ServiceConfig;

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap()
}

#[test]
fn done_jobs_survive_restart_and_in_flight_jobs_fail() {
    let data = tempfile::tempdir().unwrap();
    let config = ServiceConfig {
        data_dir: Some(data.path().to_owned()),
        workers: 1,
        ..ServiceConfig::default()
    };

    let first = runtime();
    let (done, tex) = first.block_on(async {
        let server = TestServer::start(config.clone(), mock_gateway()).await;
        let done = server.submit_text(RESUME, JOB).await;
        let (_, job) = server.wait(&done, Duration::from_secs(10)).await;
        assert_eq!(job["state"], "Done");
        let tex = server.artifact(&done, "tex").await.bytes().await.unwrap();
        (done, tex)
    });
    // a second instance on the same directory whose job never finishes
    let (provider, _gate) = GatedProvider::new(false, Duration::ZERO);
    let gateway = LlmGateway::builder().with_provider(provider).build();
    let stuck = first.block_on(async {
        let server = TestServer::start(config.clone(), gateway).await;
        let id = server.submit_text(RESUME, JOB).await;
        while server.job(&id).await["state"] == "Queued" {
            tokio::time::sleep(Duration::from_millis(1)).await;
        }
        id
    });
    drop(first);

    let second = runtime();
    second.block_on(async {
        let server = TestServer::start(config.clone(), mock_gateway()).await;
        let job = server.job(&done).await;
        assert_eq!(job["state"], "Done");
        assert!(job["score"].is_object());
        let again = server.artifact(&done, "tex").await;
        assert_eq!(again.status(), 200);
        assert_eq!(again.bytes().await.unwrap(), tex);

        let job = server.job(&stuck).await;
        assert_eq!(job["state"], "Failed");
        assert_eq!(job["error"], INTERRUPTED);
    });
}
