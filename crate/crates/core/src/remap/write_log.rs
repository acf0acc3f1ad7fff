use std::collections::BTreeMap;

/// Writes that reached a victim address while its bank was being migrated.
///
/// Each entry is `(address, flag_bit)`; a set flag bit means the address was
/// already moved by a priority copy, so the scheduled copy must be skipped.
#[derive(Debug, Clone, Default)]
pub struct WriteLog {
    entries: BTreeMap<u32, bool>,
    peak: usize,
}

impl WriteLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Logs an address with its flag bit set. Returns false if it was
    /// already present (entries are unique by address).
    pub fn record(&mut self, address: u32) -> bool {
        let fresh = self.entries.insert(address, true).is_none();
        self.peak = self.peak.max(self.entries.len());
        fresh
    }

    pub fn contains(&self, address: u32) -> bool {
        self.entries.contains_key(&address)
    }

    pub fn flag_bit(&self, address: u32) -> Option<bool> {
        self.entries.get(&address).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest size reached since creation.
    pub fn peak(&self) -> usize {
        self.peak
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, bool)> + '_ {
        self.entries.iter().map(|(&a, &f)| (a, f))
    }
}
