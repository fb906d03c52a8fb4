//! An LRU cache over content ids with O(1) lookup, promotion and eviction:
//! a hash map into a slab holding a doubly linked recency list.

use rustc_hash::FxHashMap;

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Slot {
    key: u64,
    prev: u32,
    next: u32,
}

#[derive(Debug, Clone)]
pub struct LruCache {
    capacity: usize,
    map: FxHashMap<u64, u32>,
    slots: Vec<Slot>,
    /// Most recently used.
    head: u32,
    /// Least recently used.
    tail: u32,
}

impl LruCache {
    pub fn new(capacity: u64) -> Self {
        let capacity = usize::try_from(capacity).unwrap_or(usize::MAX).min(u32::MAX as usize - 1);
        LruCache { capacity, map: FxHashMap::default(), slots: Vec::new(), head: NIL, tail: NIL }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity as u64
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn contains(&self, key: u64) -> bool {
        self.map.contains_key(&key)
    }

    /// A request: returns whether it hit. Either way the content ends up most
    /// recently used (if the capacity is positive).
    pub fn access(&mut self, key: u64) -> bool {
        if let Some(&i) = self.map.get(&key) {
            self.promote(i);
            true
        } else {
            self.insert_new(key);
            false
        }
    }

    /// Puts `key` at the most-recent position, inserting it if absent.
    pub fn insert(&mut self, key: u64) {
        self.access(key);
    }

    /// Moves `key` to the most-recent position if present; returns presence.
    pub fn touch(&mut self, key: u64) -> bool {
        match self.map.get(&key) {
            Some(&i) => {
                self.promote(i);
                true
            }
            None => false,
        }
    }

    /// Contents from most to least recently used.
    pub fn keys_by_recency(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.len());
        let mut i = self.head;
        while i != NIL {
            out.push(self.slots[i as usize].key);
            i = self.slots[i as usize].next;
        }
        out
    }

    fn insert_new(&mut self, key: u64) {
        if self.capacity == 0 {
            return;
        }
        let i = if self.map.len() >= self.capacity {
            // Reuse the evicted slot.
            let victim = self.tail;
            self.unlink(victim);
            let old = std::mem::replace(&mut self.slots[victim as usize].key, key);
            self.map.remove(&old);
            victim
        } else {
            self.slots.push(Slot { key, prev: NIL, next: NIL });
            (self.slots.len() - 1) as u32
        };
        self.push_front(i);
        self.map.insert(key, i);
    }

    fn promote(&mut self, i: u32) {
        if self.head != i {
            self.unlink(i);
            self.push_front(i);
        }
    }

    fn unlink(&mut self, i: u32) {
        let Slot { prev, next, .. } = self.slots[i as usize];
        if prev != NIL {
            self.slots[prev as usize].next = next;
        } else {
            self.head = next;
        }
        if next != NIL {
            self.slots[next as usize].prev = prev;
        } else {
            self.tail = prev;
        }
    }

    fn push_front(&mut self, i: u32) {
        let old = self.head;
        self.slots[i as usize].prev = NIL;
        self.slots[i as usize].next = old;
        if old != NIL {
            self.slots[old as usize].prev = i;
        }
        self.head = i;
        if self.tail == NIL {
            self.tail = i;
        }
    }
}

/// List-scan LRU used as a test oracle.
#[derive(Debug, Clone, Default)]
pub struct ReferenceLru {
    capacity: usize,
    /// Most recent first.
    pub items: Vec<u64>,
}

impl ReferenceLru {
    pub fn new(capacity: usize) -> Self {
        ReferenceLru { capacity, items: Vec::new() }
    }

    pub fn access(&mut self, key: u64) -> bool {
        if let Some(p) = self.items.iter().position(|&k| k == key) {
            self.items.remove(p);
            self.items.insert(0, key);
            return true;
        }
        if self.capacity > 0 {
            self.items.insert(0, key);
            self.items.truncate(self.capacity);
        }
        false
    }
}
