//! File-backed registry store.
//!
//! Every mutation appends the full updated record as one JSON line to
//! `registry.log`; on open the log is replayed and the last line for each
//! `name@version` wins. Writers are serialized; readers take the current
//! immutable snapshot and never block on writers.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use thiserror::Error;

use super::{not_found, rank, CompileServerEntry, RegistryError, RegistryRecord, SearchQuery, VersionSel};
use crate::model::{validate_descriptor, GlobalName, Version};

pub const LOG_FILE: &str = "registry.log";
pub const COMPILE_SERVERS_FILE: &str = "compile_servers.json";

type Index = BTreeMap<(GlobalName, Version), Arc<RegistryRecord>>;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
}

pub struct Store {
    dir: PathBuf,
    snapshot: RwLock<Arc<Index>>,
    writer: Mutex<File>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").field("dir", &self.dir).finish()
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Store {
    /// Opens (creating if needed) the store in `dir` and replays its log.
    /// An incomplete last line, left by an interrupted write, is dropped.
    pub fn open(dir: impl AsRef<Path>) -> Result<Store, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        let path = dir.join(LOG_FILE);
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io(&path))?;
        let mut index = Index::new();
        let mut reader = BufReader::new(&file);
        let (mut offset, mut number, mut torn_at) = (0u64, 0usize, None);
        let mut missing_newline = false;
        let mut line = String::new();
        loop {
            line.clear();
            let n = reader.read_line(&mut line).map_err(io(&path))?;
            if n == 0 {
                break;
            }
            number += 1;
            let complete = line.ends_with('\n');
            if line.trim().is_empty() {
                offset += n as u64;
                continue;
            }
            match serde_json::from_str::<RegistryRecord>(&line) {
                Ok(record) => {
                    let key = (record.descriptor.name.clone(), record.descriptor.version);
                    index.insert(key, Arc::new(record));
                }
                Err(_) if !complete => {
                    torn_at = Some(offset);
                    break;
                }
                Err(e) => {
                    return Err(StoreError::Corrupt {
                        path,
                        line: number,
                        message: e.to_string(),
                    })
                }
            }
            missing_newline = !complete;
            offset += n as u64;
        }
        drop(reader);
        if missing_newline {
            // a parseable record that lost only its newline
            file.write_all(b"\n").map_err(io(&path))?;
        }
        if let Some(at) = torn_at {
            file.set_len(at).map_err(io(&path))?;
            file.seek(SeekFrom::End(0)).map_err(io(&path))?;
        }
        Ok(Store {
            dir,
            snapshot: RwLock::new(Arc::new(index)),
            writer: Mutex::new(file),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn current(&self) -> Arc<Index> {
        Arc::clone(&self.snapshot.read().unwrap_or_else(|e| e.into_inner()))
    }

    /// All records in key order.
    pub fn records(&self) -> Vec<Arc<RegistryRecord>> {
        self.current().values().cloned().collect()
    }

    /// Appends `record` and publishes a new snapshot. The caller holds the
    /// writer lock and passes in the file.
    fn commit(&self, file: &mut File, record: RegistryRecord) -> Result<Arc<RegistryRecord>, RegistryError> {
        let path = self.dir.join(LOG_FILE);
        let mut line = serde_json::to_string(&record).expect("records serialize");
        line.push('\n');
        file.write_all(line.as_bytes()).map_err(io(&path))?;
        file.sync_data().map_err(io(&path))?;
        let record = Arc::new(record);
        let mut next = (*self.current()).clone();
        next.insert(
            (record.descriptor.name.clone(), record.descriptor.version),
            Arc::clone(&record),
        );
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(next);
        Ok(record)
    }

    /// Stores a new record. Its download count always starts at zero.
    pub fn register(&self, mut record: RegistryRecord) -> Result<Arc<RegistryRecord>, RegistryError> {
        let violations = validate_descriptor(&record.descriptor);
        if !violations.is_empty() {
            return Err(RegistryError::InvalidDescriptor(violations));
        }
        if record.artifact_url.trim().is_empty() {
            return Err(RegistryError::MissingArtifact);
        }
        record.download_count = 0;
        let mut file = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let key = (record.descriptor.name.clone(), record.descriptor.version);
        if self.current().contains_key(&key) {
            return Err(RegistryError::Duplicate(record.id()));
        }
        self.commit(&mut file, record)
    }

    pub fn search(&self, query: &SearchQuery) -> Result<Vec<Arc<RegistryRecord>>, RegistryError> {
        query.check()?;
        let mut hits: Vec<_> = self
            .current()
            .values()
            .filter(|r| query.matches(&r.descriptor))
            .cloned()
            .collect();
        hits.sort_by(|a, b| rank(a, b));
        hits.truncate(query.limit());
        Ok(hits)
    }

    pub fn fetch(&self, name: &GlobalName, version: &VersionSel) -> Result<Arc<RegistryRecord>, RegistryError> {
        let index = self.current();
        let found = match version {
            VersionSel::Exact(v) => index.get(&(name.clone(), *v)),
            VersionSel::Latest => index
                .range(
                    (name.clone(), Version::new(0, 0, 0))..=(name.clone(), Version::new(u64::MAX, u64::MAX, u64::MAX)),
                )
                .next_back()
                .map(|(_, r)| r),
        };
        found.cloned().ok_or_else(|| not_found(name, version))
    }

    /// Increments the download count by one and returns the new count.
    pub fn record_download(&self, name: &GlobalName, version: &Version) -> Result<u64, RegistryError> {
        let mut file = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let current = self.fetch(name, &VersionSel::Exact(*version))?;
        let mut next = (*current).clone();
        next.download_count += 1;
        Ok(self.commit(&mut file, next)?.download_count)
    }

    /// Reads `compile_servers.json` afresh on every call; a missing file
    /// means no servers.
    pub fn list_compile_servers(&self) -> Result<Vec<CompileServerEntry>, StoreError> {
        let path = self.dir.join(COMPILE_SERVERS_FILE);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io(&path)(e)),
        };
        let mut entries: Vec<CompileServerEntry> = serde_json::from_str(&text).map_err(|e| StoreError::Config {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if let Some(bad) = entries
            .iter()
            .find(|e| e.url.trim().is_empty() || e.platforms.is_empty())
        {
            return Err(StoreError::Config {
                path,
                message: format!("entry {:?} needs a url and at least one platform", bad.url),
            });
        }
        entries.sort_by(|a, b| a.url.cmp(&b.url));
        Ok(entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::stdlib;
    use crate::model::DataType;

    fn record(leaf: &str, version: Version) -> RegistryRecord {
        let reg = stdlib::examples();
        let mut d = (*reg.descriptor(&stdlib::name(leaf), &stdlib::VERSION).unwrap()).clone();
        d.version = version;
        RegistryRecord::new(d, format!("https://example.org/{leaf}"), "tests")
    }

    #[test]
    fn register_fetch_duplicate() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let stored = store.register(record("square", Version::new(1, 0, 0))).unwrap();
        assert_eq!(stored.download_count, 0);
        let err = store.register(record("square", Version::new(1, 0, 0))).unwrap_err();
        assert_eq!((err.code(), err.status()), ("DUPLICATE", 409));
        store.register(record("square", Version::new(1, 2, 0))).unwrap();
        let latest = store.fetch(&stdlib::name("square"), &VersionSel::Latest).unwrap();
        assert_eq!(latest.descriptor.version, Version::new(1, 2, 0));
        let exact = store
            .fetch(&stdlib::name("square"), &VersionSel::Exact(Version::new(1, 0, 0)))
            .unwrap();
        assert_eq!(exact.descriptor.version, Version::new(1, 0, 0));
        assert_eq!(
            store
                .fetch(&stdlib::name("cube"), &VersionSel::Latest)
                .unwrap_err()
                .code(),
            "NOT_FOUND"
        );
    }

    #[test]
    fn invalid_descriptor_lists_violations() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        let mut r = record("square", Version::new(1, 0, 0));
        r.descriptor.tags.clear();
        r.descriptor.ports.push(r.descriptor.ports[0].clone());
        match store.register(r) {
            Err(RegistryError::InvalidDescriptor(v)) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn search_filters_and_ranks() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        for leaf in ["const", "square", "greeting"] {
            store.register(record(leaf, Version::new(1, 0, 0))).unwrap();
        }
        let names = |q: &SearchQuery| -> Vec<String> {
            store
                .search(q)
                .unwrap()
                .iter()
                .map(|r| r.descriptor.name.leaf().to_string())
                .collect()
        };
        assert_eq!(names(&SearchQuery::provides(DataType::Real64)), ["const", "square"]);
        for _ in 0..5 {
            store
                .record_download(&stdlib::name("square"), &Version::new(1, 0, 0))
                .unwrap();
        }
        for _ in 0..3 {
            store
                .record_download(&stdlib::name("const"), &Version::new(1, 0, 0))
                .unwrap();
        }
        assert_eq!(names(&SearchQuery::provides(DataType::Real64)), ["square", "const"]);
        assert_eq!(names(&SearchQuery::uses(DataType::Real64)), ["square"]);
        assert_eq!(names(&SearchQuery::tag("math")), ["square", "const"]);
        assert_eq!(names(&SearchQuery::tag("math/constants")), ["const"]);
        assert!(names(&SearchQuery::tag("mat")).is_empty());
        assert_eq!(names(&SearchQuery::text("GREET")), ["greeting"]);
        assert_eq!(
            names(&SearchQuery::provides(DataType::Real64).with_limit(1)),
            ["square"]
        );
        assert_eq!(
            store.search(&SearchQuery::default()).unwrap_err().code(),
            "INVALID_QUERY"
        );
    }

    #[test]
    fn restart_preserves_state_and_drops_torn_line() {
        let dir = tempfile::tempdir().unwrap();
        {
            let store = Store::open(dir.path()).unwrap();
            store.register(record("square", Version::new(1, 0, 0))).unwrap();
            store.register(record("cube", Version::new(1, 0, 0))).unwrap();
            for _ in 0..4 {
                store
                    .record_download(&stdlib::name("cube"), &Version::new(1, 0, 0))
                    .unwrap();
            }
        }
        let mut f = OpenOptions::new().append(true).open(dir.path().join(LOG_FILE)).unwrap();
        f.write_all(b"{\"descriptor\":{\"name\"").unwrap();
        drop(f);
        let store = Store::open(dir.path()).unwrap();
        let cube = store.fetch(&stdlib::name("cube"), &VersionSel::Latest).unwrap();
        assert_eq!(cube.download_count, 4);
        assert_eq!(store.records().len(), 2);
        store
            .record_download(&stdlib::name("cube"), &Version::new(1, 0, 0))
            .unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert_eq!(
            store
                .fetch(&stdlib::name("cube"), &VersionSel::Latest)
                .unwrap()
                .download_count,
            5
        );
    }

    #[test]
    fn concurrent_downloads_are_not_lost() {
        let dir = tempfile::tempdir().unwrap();
        let store = Arc::new(Store::open(dir.path()).unwrap());
        store.register(record("square", Version::new(1, 0, 0))).unwrap();
        std::thread::scope(|s| {
            for _ in 0..20 {
                s.spawn(|| {
                    for _ in 0..5 {
                        store
                            .record_download(&stdlib::name("square"), &Version::new(1, 0, 0))
                            .unwrap();
                    }
                });
            }
        });
        assert_eq!(
            store
                .fetch(&stdlib::name("square"), &VersionSel::Latest)
                .unwrap()
                .download_count,
            100
        );
    }

    #[test]
    fn compile_servers_are_reread_and_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path()).unwrap();
        assert!(store.list_compile_servers().unwrap().is_empty());
        let path = dir.path().join(COMPILE_SERVERS_FILE);
        std::fs::write(&path, r#"[{"url":"http://b","platforms":["linux-x86_64"]}]"#).unwrap();
        assert_eq!(store.list_compile_servers().unwrap().len(), 1);
        std::fs::write(
            &path,
            r#"[{"url":"http://b","platforms":["linux-x86_64"]},{"url":"http://a","platforms":["any"],"description":"x"}]"#,
        )
        .unwrap();
        let urls: Vec<_> = store
            .list_compile_servers()
            .unwrap()
            .into_iter()
            .map(|e| e.url)
            .collect();
        assert_eq!(urls, ["http://a", "http://b"]);
        std::fs::write(&path, r#"[{"url":"","platforms":[]}]"#).unwrap();
        assert!(store.list_compile_servers().is_err());
    }
}
