use std::fs;
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::ServiceError;

/// What a persisted payload contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WriteKind {
    /// Image or video data. Never allowed.
    Pixel,
    Summary,
    Report,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriteEvent {
    pub sink: String,
    pub size: u64,
    pub kind: WriteKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageAudit {
    /// Bytes of pixel data submitted for persistence. Such writes are
    /// refused, so anything above zero means some component tried.
    pub image_bytes_written: u64,
    pub write_events: Vec<WriteEvent>,
}

impl StorageAudit {
    pub fn violation(&self) -> bool {
        self.image_bytes_written > 0 || self.write_events.iter().any(|e| e.kind == WriteKind::Pixel)
    }
}

/// The only route to the file system for session data. Every call is
/// logged; pixel payloads are logged and refused.
#[derive(Debug, Clone, Default)]
pub struct AuditedSink {
    log: Arc<Mutex<StorageAudit>>,
}

impl AuditedSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write(&self, path: &Path, data: &[u8], kind: WriteKind) -> Result<(), ServiceError> {
        let event = WriteEvent { sink: path.display().to_string(), size: data.len() as u64, kind };
        let mut log = self.log.lock().unwrap_or_else(|p| p.into_inner());
        if kind == WriteKind::Pixel {
            log.image_bytes_written += event.size;
            log.write_events.push(event);
            return Err(ServiceError::PixelWrite(path.display().to_string()));
        }
        fs::write(path, data)?;
        log.write_events.push(event);
        Ok(())
    }

    pub fn audit(&self) -> StorageAudit {
        self.log.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_writes_are_refused_and_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let sink = AuditedSink::new();
        sink.write(&dir.path().join("s.json"), b"{}", WriteKind::Summary).unwrap();
        assert!(!sink.audit().violation());
        let p = dir.path().join("leak.png");
        assert!(matches!(sink.write(&p, &[0; 300], WriteKind::Pixel), Err(ServiceError::PixelWrite(_))));
        assert!(!p.exists());
        let a = sink.audit();
        assert!(a.violation());
        assert_eq!(a.image_bytes_written, 300);
        assert_eq!(a.write_events.len(), 2);
    }
}
