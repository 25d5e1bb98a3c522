use std::io::{Read, Write};

use hmms_api::{bind, build_state, run};
use hmms_core::catalog::DEFAULT_CATALOG;
use hmms_core::config::Config;

fn get(addr: std::net::SocketAddr, path: &str) -> String {
    let mut conn = std::net::TcpStream::connect(addr).unwrap();
    write!(conn, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").unwrap();
    let mut out = String::new();
    conn.read_to_string(&mut out).unwrap();
    out
}

#[tokio::test]
async fn serves_probes_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = Config::new(dir.path().join("db/hmms.db"));
    cfg.port = 0;
    let state = build_state(&cfg).unwrap();
    assert!(dir.path().join("db/hmms.db").exists());
    let listener = bind(&cfg).await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(run(listener, state, async {
        let _ = stopped.await;
    }));

    let health = tokio::task::spawn_blocking(move || get(addr, "/api/v1/healthz")).await.unwrap();
    assert!(health.starts_with("HTTP/1.1 200"), "{health}");
    assert!(health.contains("\"api_version\":\"1\""));
    let ready = tokio::task::spawn_blocking(move || get(addr, "/api/v1/readyz")).await.unwrap();
    assert!(ready.starts_with("HTTP/1.1 200"), "{ready}");

    stop.send(()).unwrap();
    server.await.unwrap().unwrap();
}

#[tokio::test]
async fn busy_port_is_reported() {
    let held = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = Config::new(dir.path().join("hmms.db"));
    cfg.port = held.local_addr().unwrap().port();
    let err = bind(&cfg).await.unwrap_err();
    assert_eq!(err.code(), "PortInUse", "{err}");
}

#[test]
fn wrong_catalog_count_aborts_startup() {
    let dir = tempfile::tempdir().unwrap();
    let catalog = dir.path().join("catalog.toml");
    let extra = "\n[[parameter]]\nkey = \"Shoe Size\"\narea = \"Nutrition\"\ncardinality = \"MultipleTime\"\nkind = { type = \"Text\" }\n";
    std::fs::write(&catalog, format!("{DEFAULT_CATALOG}{extra}")).unwrap();
    let mut cfg = Config::new(dir.path().join("hmms.db"));
    cfg.catalog = Some(catalog);
    let err = build_state(&cfg).err().unwrap();
    assert_eq!(err.code(), "CatalogCountMismatch", "{err}");
    assert!(!dir.path().join("hmms.db").exists());
}
