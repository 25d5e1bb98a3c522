//! Durable backends for the records store.

use std::path::Path;

use rusqlite::{params, Connection, OptionalExtension};

use super::{AuditEntry, StoreError};
use crate::access::Principal;
use crate::record::StudentRecord;

/// Everything a backend holds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Snapshot {
    pub students: Vec<StudentRecord>,
    pub principals: Vec<Principal>,
    pub audit: Vec<AuditEntry>,
}

/// The rows touched by a single store operation.
#[derive(Debug, Default)]
pub struct Commit<'a> {
    pub put_students: Vec<&'a StudentRecord>,
    pub delete_students: Vec<&'a str>,
    pub put_principals: Vec<&'a Principal>,
    pub delete_principals: Vec<&'a str>,
}

pub trait Backend: Send {
    fn load(&mut self) -> Result<Snapshot, StoreError>;

    /// Applies `commit` and appends `audit` atomically: either everything
    /// lands or nothing does.
    fn apply(&mut self, commit: &Commit<'_>, audit: &AuditEntry) -> Result<(), StoreError>;

    /// Cheap liveness probe.
    fn ping(&mut self) -> Result<(), StoreError> {
        Ok(())
    }
}

/// Keeps nothing; the store's in-memory state is the only copy.
#[derive(Debug, Default)]
pub struct MemoryBackend {
    snapshot: Snapshot,
}

impl MemoryBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_snapshot(snapshot: Snapshot) -> Self {
        MemoryBackend { snapshot }
    }
}

impl Backend for MemoryBackend {
    fn load(&mut self) -> Result<Snapshot, StoreError> {
        Ok(std::mem::take(&mut self.snapshot))
    }

    fn apply(&mut self, _: &Commit<'_>, _: &AuditEntry) -> Result<(), StoreError> {
        Ok(())
    }
}

const SCHEMA: &str = r#"
CREATE TABLE IF NOT EXISTS meta (
    key   TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS students (
    screening_id TEXT PRIMARY KEY,
    rfid_token   TEXT NOT NULL UNIQUE,
    body         TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS principals (
    principal_id TEXT PRIMARY KEY,
    body         TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS audit (
    seq  INTEGER PRIMARY KEY,
    body TEXT NOT NULL
);
CREATE TRIGGER IF NOT EXISTS audit_no_update BEFORE UPDATE ON audit
BEGIN SELECT RAISE(ABORT, 'audit log is append-only'); END;
CREATE TRIGGER IF NOT EXISTS audit_no_delete BEFORE DELETE ON audit
BEGIN SELECT RAISE(ABORT, 'audit log is append-only'); END;
"#;

const SCHEMA_VERSION: &str = "1";

/// SQLite file. Rows are JSON documents keyed by id.
pub struct SqliteBackend {
    conn: Connection,
}

fn db_err(e: impl std::fmt::Display) -> StoreError {
    StoreError::Backend(e.to_string())
}

impl SqliteBackend {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        Self::init(Connection::open(path).map_err(db_err)?)
    }

    pub fn open_in_memory() -> Result<Self, StoreError> {
        Self::init(Connection::open_in_memory().map_err(db_err)?)
    }

    fn init(conn: Connection) -> Result<Self, StoreError> {
        conn.pragma_update(None, "journal_mode", "WAL").map_err(db_err)?;
        conn.pragma_update(None, "synchronous", "NORMAL").map_err(db_err)?;
        conn.pragma_update(None, "foreign_keys", "ON").map_err(db_err)?;
        conn.execute_batch(SCHEMA).map_err(db_err)?;
        let version: Option<String> = conn
            .query_row("SELECT value FROM meta WHERE key = 'schema_version'", [], |r| r.get(0))
            .optional()
            .map_err(db_err)?;
        match version.as_deref() {
            None => {
                conn.execute("INSERT INTO meta (key, value) VALUES ('schema_version', ?1)", [SCHEMA_VERSION])
                    .map_err(db_err)?;
            }
            Some(SCHEMA_VERSION) => {}
            Some(v) => return Err(StoreError::Backend(format!("unsupported database schema version {v}"))),
        }
        Ok(SqliteBackend { conn })
    }
}

fn decode<T: serde::de::DeserializeOwned>(body: String) -> Result<T, StoreError> {
    serde_json::from_str(&body).map_err(db_err)
}

fn encode<T: serde::Serialize>(v: &T) -> Result<String, StoreError> {
    serde_json::to_string(v).map_err(db_err)
}

impl Backend for SqliteBackend {
    fn load(&mut self) -> Result<Snapshot, StoreError> {
        fn all<T: serde::de::DeserializeOwned>(conn: &Connection, sql: &str) -> Result<Vec<T>, StoreError> {
            let mut stmt = conn.prepare(sql).map_err(db_err)?;
            let rows = stmt.query_map([], |r| r.get::<_, String>(0)).map_err(db_err)?;
            rows.map(|r| r.map_err(db_err).and_then(decode)).collect()
        }
        Ok(Snapshot {
            students: all(&self.conn, "SELECT body FROM students ORDER BY screening_id")?,
            principals: all(&self.conn, "SELECT body FROM principals ORDER BY principal_id")?,
            audit: all(&self.conn, "SELECT body FROM audit ORDER BY seq")?,
        })
    }

    fn apply(&mut self, commit: &Commit<'_>, entry: &AuditEntry) -> Result<(), StoreError> {
        let tx = self.conn.transaction().map_err(db_err)?;
        for id in &commit.delete_students {
            tx.execute("DELETE FROM students WHERE screening_id = ?1", [id]).map_err(db_err)?;
        }
        for s in &commit.put_students {
            tx.execute(
                "INSERT INTO students (screening_id, rfid_token, body) VALUES (?1, ?2, ?3)
                 ON CONFLICT(screening_id) DO UPDATE SET rfid_token = excluded.rfid_token, body = excluded.body",
                params![s.screening_id, s.rfid_token, encode(s)?],
            )
            .map_err(db_err)?;
        }
        for id in &commit.delete_principals {
            tx.execute("DELETE FROM principals WHERE principal_id = ?1", [id]).map_err(db_err)?;
        }
        for p in &commit.put_principals {
            tx.execute(
                "INSERT INTO principals (principal_id, body) VALUES (?1, ?2)
                 ON CONFLICT(principal_id) DO UPDATE SET body = excluded.body",
                params![p.principal_id, encode(p)?],
            )
            .map_err(db_err)?;
        }
        tx.execute("INSERT INTO audit (seq, body) VALUES (?1, ?2)", params![entry.seq as i64, encode(entry)?])
            .map_err(db_err)?;
        tx.commit().map_err(db_err)
    }

    fn ping(&mut self) -> Result<(), StoreError> {
        self.conn.query_row("SELECT 1", [], |r| r.get::<_, i64>(0)).map(|_| ()).map_err(db_err)
    }
}
