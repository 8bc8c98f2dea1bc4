use std::collections::BTreeMap;
use std::path::Path;
use std::sync::RwLock;

use redb::{Database, ReadableTable, ReadableTableMetadata, TableDefinition};

use super::CacheError;

/// Byte-level key/value storage behind the response cache. Implementations
/// must make each `put` atomic: readers never observe a partial record.
pub trait CacheStore: Send + Sync {
    fn get(&self, key: &str) -> Result<Option<Vec<u8>>, CacheError>;
    fn put(&self, key: &str, record: &[u8]) -> Result<(), CacheError>;
    fn keys(&self) -> Result<Vec<String>, CacheError>;
    /// (entry count, total record bytes)
    fn size(&self) -> Result<(u64, u64), CacheError>;
    fn purge(&self) -> Result<u64, CacheError>;
}

#[derive(Default)]
pub struct MemoryStore {
    records: RwLock<BTreeMap<String, Vec<u8>>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl CacheStore for MemoryStore {
    fn get(&self, key: &str) -> Result<Option<Vec<u8>>, CacheError> {
        Ok(self.records.read().expect("store lock").get(key).cloned())
    }

    fn put(&self, key: &str, record: &[u8]) -> Result<(), CacheError> {
        self.records
            .write()
            .expect("store lock")
            .insert(key.to_string(), record.to_vec());
        Ok(())
    }

    fn keys(&self) -> Result<Vec<String>, CacheError> {
        Ok(self.records.read().expect("store lock").keys().cloned().collect())
    }

    fn size(&self) -> Result<(u64, u64), CacheError> {
        let records = self.records.read().expect("store lock");
        Ok((records.len() as u64, records.values().map(|r| r.len() as u64).sum()))
    }

    fn purge(&self) -> Result<u64, CacheError> {
        let mut records = self.records.write().expect("store lock");
        let n = records.len() as u64;
        records.clear();
        Ok(n)
    }
}

const ENTRIES: TableDefinition<&str, &[u8]> = TableDefinition::new("entries");

/// Single-file transactional store (MVCC readers, serialized writers).
pub struct RedbStore {
    db: Database,
}

fn unavailable(e: impl std::fmt::Display) -> CacheError {
    CacheError::StorageUnavailable(e.to_string())
}

impl RedbStore {
    pub fn open(path: &Path) -> Result<Self, CacheError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(unavailable)?;
        }
        let db = Database::create(path).map_err(unavailable)?;
        let txn = db.begin_write().map_err(unavailable)?;
        txn.open_table(ENTRIES).map_err(unavailable)?;
        txn.commit().map_err(unavailable)?;
        Ok(RedbStore { db })
    }
}

impl CacheStore for RedbStore {
    fn get(&self, key: &str) -> Result<Option<Vec<u8>>, CacheError> {
        let txn = self.db.begin_read().map_err(unavailable)?;
        let table = txn.open_table(ENTRIES).map_err(unavailable)?;
        let value = table.get(key).map_err(unavailable)?;
        Ok(value.map(|v| v.value().to_vec()))
    }

    fn put(&self, key: &str, record: &[u8]) -> Result<(), CacheError> {
        let txn = self.db.begin_write().map_err(unavailable)?;
        {
            let mut table = txn.open_table(ENTRIES).map_err(unavailable)?;
            table.insert(key, record).map_err(unavailable)?;
        }
        txn.commit().map_err(unavailable)
    }

    fn keys(&self) -> Result<Vec<String>, CacheError> {
        let txn = self.db.begin_read().map_err(unavailable)?;
        let table = txn.open_table(ENTRIES).map_err(unavailable)?;
        let mut keys = Vec::new();
        for item in table.iter().map_err(unavailable)? {
            let (k, _) = item.map_err(unavailable)?;
            keys.push(k.value().to_string());
        }
        Ok(keys)
    }

    fn size(&self) -> Result<(u64, u64), CacheError> {
        let txn = self.db.begin_read().map_err(unavailable)?;
        let table = txn.open_table(ENTRIES).map_err(unavailable)?;
        let count = table.len().map_err(unavailable)?;
        let mut bytes = 0u64;
        for item in table.iter().map_err(unavailable)? {
            let (_, v) = item.map_err(unavailable)?;
            bytes += v.value().len() as u64;
        }
        Ok((count, bytes))
    }

    fn purge(&self) -> Result<u64, CacheError> {
        let txn = self.db.begin_write().map_err(unavailable)?;
        let removed;
        {
            let mut table = txn.open_table(ENTRIES).map_err(unavailable)?;
            removed = table.len().map_err(unavailable)?;
            table.retain(|_, _| false).map_err(unavailable)?;
        }
        txn.commit().map_err(unavailable)?;
        Ok(removed)
    }
}
