use std::fmt;

/// Fixed-capacity queue that overwrites the oldest entry when full.
pub struct RingBuffer<T> {
    slots: Vec<Option<T>>,
    head: usize,
    len: usize,
}

impl<T: Clone> RingBuffer<T> {
    pub fn with_capacity(capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be positive");
        Self { slots: vec![None; capacity], head: 0, len: 0 }
    }

    pub fn push(&mut self, value: T) -> Option<T> {
        let tail = (self.head + self.len) % self.slots.len();
        let evicted = self.slots[tail].replace(value);
        if self.len == self.slots.len() {
            self.head = (self.head + 1) % self.slots.len();
        } else {
            self.len += 1;
        }
        evicted
    }

    pub fn pop(&mut self) -> Option<T> {
        if self.len == 0 {
            return None;
        }
        let value = self.slots[self.head].take();
        self.head = (self.head + 1) % self.slots.len();
        self.len -= 1;
        value
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> + '_ {
        (0..self.len).filter_map(move |offset| {
            let index = (self.head + offset) % self.slots.len();
            self.slots[index].as_ref()
        })
    }

    pub fn is_full(&self) -> bool {
        self.len == self.slots.len()
    }
}

impl<T: Clone + fmt::Debug> fmt::Debug for RingBuffer<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}
