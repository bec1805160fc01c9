//! Fixed-capacity ring buffers holding the last n 32-bit samples.
//!
//! Layout mirrors the generated register arrays: a slot array, a head
//! cursor pointing at the next slot to overwrite, and a fill count that
//! saturates at capacity. Aggregates fold over the `fill` most recent
//! samples only, so a half-warm window never reads stale slots.
//!
//! Sums wrap modulo 2^32, matching 32-bit register arithmetic. `avg` is
//! only defined once the window is full and its capacity is a power of
//! two; the division is then a shift.

/// Snapshot returned by [`WindowState::insert`], consumed by
/// [`WindowState::undo_insert`] to roll the insert back. Must be applied
/// before any further insert into the same window.
#[derive(Debug, Clone, Copy)]
pub struct InsertUndo {
    overwritten: u32,
    prev_fill: u32,
}

/// `avg` was read before the window filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("window average read during warm-up, {fill}/{capacity} slots filled")]
pub struct AvgWarmup {
    pub fill: u32,
    pub capacity: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowState {
    slots: Vec<u32>,
    head: u32,
    fill: u32,
}

impl WindowState {
    /// Capacity must be at least 1.
    pub fn new(capacity: u32) -> Self {
        assert!(capacity >= 1, "window capacity must be at least 1");
        WindowState {
            slots: vec![0; capacity as usize],
            head: 0,
            fill: 0,
        }
    }

    pub fn capacity(&self) -> u32 {
        self.slots.len() as u32
    }

    pub fn head(&self) -> u32 {
        self.head
    }

    pub fn fill(&self) -> u32 {
        self.fill
    }

    pub fn is_full(&self) -> bool {
        self.fill == self.capacity()
    }

    /// Overwrite the oldest slot with `value`.
    pub fn insert(&mut self, value: u32) -> InsertUndo {
        let undo = InsertUndo {
            overwritten: self.slots[self.head as usize],
            prev_fill: self.fill,
        };
        self.slots[self.head as usize] = value;
        self.head += 1;
        if self.head >= self.capacity() {
            self.head = 0;
        }
        if self.fill < self.capacity() {
            self.fill += 1;
        }
        undo
    }

    /// Reverse the matching [`insert`](Self::insert). No other insert may
    /// have happened in between.
    pub fn undo_insert(&mut self, undo: InsertUndo) {
        let n = self.capacity();
        self.head = (self.head + n - 1) % n;
        self.slots[self.head as usize] = undo.overwritten;
        self.fill = undo.prev_fill;
    }

    /// The oldest slot's value; what the next insert will overwrite.
    /// Meaningful only when the window is full.
    pub fn oldest(&self) -> u32 {
        self.slots[self.head as usize]
    }

    /// Filled slots, oldest first.
    pub fn iter_filled(&self) -> impl Iterator<Item = u32> + '_ {
        let n = self.capacity();
        let start = if self.is_full() { self.head } else { 0 };
        (0..self.fill).map(move |i| self.slots[((start + i) % n) as usize])
    }

    /// Wrapping sum of the filled slots.
    pub fn sum(&self) -> u32 {
        self.iter_filled().fold(0u32, u32::wrapping_add)
    }

    /// For outcome windows storing 0/1: how many held predicates.
    pub fn count(&self) -> u32 {
        self.sum()
    }

    /// Minimum of the filled slots; `u32::MAX` when empty.
    pub fn min(&self) -> u32 {
        self.iter_filled().min().unwrap_or(u32::MAX)
    }

    /// Maximum of the filled slots; 0 when empty.
    pub fn max(&self) -> u32 {
        self.iter_filled().max().unwrap_or(0)
    }

    /// Truncated mean over a full power-of-two window: the wrapping sum
    /// shifted right by log2(capacity).
    pub fn avg(&self) -> Result<u32, AvgWarmup> {
        let n = self.capacity();
        debug_assert!(n.is_power_of_two(), "avg requires power-of-two capacity");
        if !self.is_full() {
            return Err(AvgWarmup { fill: self.fill, capacity: n });
        }
        Ok(self.sum() >> n.trailing_zeros())
    }
}
