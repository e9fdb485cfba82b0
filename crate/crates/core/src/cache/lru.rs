use std::collections::HashMap;

const NIL: usize = usize::MAX;

#[derive(Debug, Clone)]
struct Slot<V> {
    key: u64,
    value: Option<V>,
    prev: usize,
    next: usize,
}

/// Intrusive doubly linked recency list over a slab, keyed by `u64`.
/// The front is the most recently used entry.
#[derive(Debug, Clone)]
pub struct LruList<V> {
    map: HashMap<u64, usize>,
    slots: Vec<Slot<V>>,
    free: Vec<usize>,
    head: usize,
    tail: usize,
}

impl<V> Default for LruList<V> {
    fn default() -> Self {
        LruList { map: HashMap::new(), slots: Vec::new(), free: Vec::new(), head: NIL, tail: NIL }
    }
}

impl<V> LruList<V> {
    pub fn new() -> Self {
        Self::default()
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

    fn unlink(&mut self, i: usize) {
        let (p, n) = (self.slots[i].prev, self.slots[i].next);
        if p == NIL {
            self.head = n;
        } else {
            self.slots[p].next = n;
        }
        if n == NIL {
            self.tail = p;
        } else {
            self.slots[n].prev = p;
        }
    }

    fn link_front(&mut self, i: usize) {
        self.slots[i].prev = NIL;
        self.slots[i].next = self.head;
        if self.head != NIL {
            self.slots[self.head].prev = i;
        }
        self.head = i;
        if self.tail == NIL {
            self.tail = i;
        }
    }

    /// Inserts at the front, replacing any existing value for `key`.
    pub fn push_front(&mut self, key: u64, value: V) -> Option<V> {
        let old = self.remove(key);
        let slot = Slot { key, value: Some(value), prev: NIL, next: NIL };
        let i = match self.free.pop() {
            Some(i) => {
                self.slots[i] = slot;
                i
            }
            None => {
                self.slots.push(slot);
                self.slots.len() - 1
            }
        };
        self.link_front(i);
        self.map.insert(key, i);
        old
    }

    pub fn peek(&self, key: u64) -> Option<&V> {
        self.map.get(&key).and_then(|i| self.slots[*i].value.as_ref())
    }

    pub fn peek_mut(&mut self, key: u64) -> Option<&mut V> {
        let i = *self.map.get(&key)?;
        self.slots[i].value.as_mut()
    }

    /// Moves `key` to the front. Returns false when absent.
    pub fn touch(&mut self, key: u64) -> bool {
        let Some(&i) = self.map.get(&key) else { return false };
        if self.head != i {
            self.unlink(i);
            self.link_front(i);
        }
        true
    }

    pub fn remove(&mut self, key: u64) -> Option<V> {
        let i = self.map.remove(&key)?;
        self.unlink(i);
        self.free.push(i);
        self.slots[i].value.take()
    }

    /// Least recently used entry.
    pub fn back(&self) -> Option<(u64, &V)> {
        (self.tail != NIL).then(|| {
            let s = &self.slots[self.tail];
            (s.key, s.value.as_ref().expect("live slot"))
        })
    }

    pub fn pop_back(&mut self) -> Option<(u64, V)> {
        let key = self.back()?.0;
        self.remove(key).map(|v| (key, v))
    }

    /// Keys from most to least recently used.
    pub fn keys(&self) -> impl Iterator<Item = u64> + '_ {
        let mut i = self.head;
        std::iter::from_fn(move || {
            (i != NIL).then(|| {
                let k = self.slots[i].key;
                i = self.slots[i].next;
                k
            })
        })
    }
}

/// Plain byte-bounded LRU; the baseline for the size-aware cache and the
/// object cache of the fan-out experiment (use size 1 per object).
#[derive(Debug, Clone)]
pub struct PlainLru {
    capacity: u64,
    used: u64,
    list: LruList<u64>,
}

impl PlainLru {
    pub fn new(capacity: u64) -> Self {
        PlainLru { capacity, used: 0, list: LruList::new() }
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn get(&mut self, key: u64) -> Option<u64> {
        self.list.touch(key).then(|| *self.list.peek(key).expect("present"))
    }

    /// Inserts `key`, evicting from the tail. Items larger than the whole
    /// cache are refused and reported as `None`.
    pub fn put(&mut self, key: u64, size: u64) -> Option<Vec<u64>> {
        if size > self.capacity {
            return None;
        }
        if let Some(old) = self.list.remove(key) {
            self.used -= old;
        }
        let mut evicted = Vec::new();
        while self.used + size > self.capacity {
            let (k, s) = self.list.pop_back().expect("non-empty while over capacity");
            self.used -= s;
            evicted.push(k);
        }
        self.list.push_front(key, size);
        self.used += size;
        Some(evicted)
    }

    pub fn remove(&mut self, key: u64) -> bool {
        match self.list.remove(key) {
            Some(s) => {
                self.used -= s;
                true
            }
            None => false,
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = u64> + '_ {
        self.list.keys()
    }
}
