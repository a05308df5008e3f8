//! Accounted pixel buffers.
//!
//! Face crops hold their pixels in a [`PixelBuffer`]. When a buffer is created
//! against a [`BufferRegistry`] it is listed there until dropped, so tests and
//! the service can ask which crops are still alive and what the peak pixel
//! footprint was.

use std::collections::{BTreeSet, HashMap};
use std::ops::Deref;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Default)]
struct RegistryState {
    live: HashMap<u64, usize>,
    live_bytes: usize,
    peak_bytes: usize,
    peak_count: usize,
    total_registered: u64,
}

/// Tracks every live [`PixelBuffer`] created against it.
#[derive(Debug, Default)]
pub struct BufferRegistry {
    state: Mutex<RegistryState>,
}

/// Snapshot of a registry's counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegistryStats {
    pub live_count: usize,
    pub live_bytes: usize,
    pub peak_count: usize,
    pub peak_bytes: usize,
    pub total_registered: u64,
}

impl BufferRegistry {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    fn lock(&self) -> MutexGuard<'_, RegistryState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn register(&self, id: u64, len: usize) {
        let mut st = self.lock();
        st.live.insert(id, len);
        st.live_bytes += len;
        st.total_registered += 1;
        st.peak_bytes = st.peak_bytes.max(st.live_bytes);
        st.peak_count = st.peak_count.max(st.live.len());
    }

    fn release(&self, id: u64) {
        let mut st = self.lock();
        if let Some(len) = st.live.remove(&id) {
            st.live_bytes -= len;
        }
    }

    pub fn is_live(&self, id: u64) -> bool {
        self.lock().live.contains_key(&id)
    }

    pub fn live_ids(&self) -> BTreeSet<u64> {
        self.lock().live.keys().copied().collect()
    }

    pub fn stats(&self) -> RegistryStats {
        let st = self.lock();
        RegistryStats {
            live_count: st.live.len(),
            live_bytes: st.live_bytes,
            peak_count: st.peak_count,
            peak_bytes: st.peak_bytes,
            total_registered: st.total_registered,
        }
    }
}

/// Immutable pixel bytes, optionally accounted in a registry.
pub struct PixelBuffer {
    id: u64,
    data: Box<[u8]>,
    registry: Option<Arc<BufferRegistry>>,
}

impl PixelBuffer {
    pub fn new(data: Vec<u8>, registry: Option<&Arc<BufferRegistry>>) -> Self {
        let id = NEXT_ID.fetch_add(1, Ordering::Relaxed);
        if let Some(r) = registry {
            r.register(id, data.len());
        }
        Self { id, data: data.into_boxed_slice(), registry: registry.cloned() }
    }

    pub fn id(&self) -> u64 {
        self.id
    }
}

impl Deref for PixelBuffer {
    type Target = [u8];

    fn deref(&self) -> &[u8] {
        &self.data
    }
}

impl Drop for PixelBuffer {
    fn drop(&mut self) {
        if let Some(r) = &self.registry {
            r.release(self.id);
        }
    }
}

impl std::fmt::Debug for PixelBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PixelBuffer").field("id", &self.id).field("len", &self.data.len()).finish()
    }
}
