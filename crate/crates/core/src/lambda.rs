//! Sliding-window 1-bit counter that samples every λ-th 1-bit.
//!
//! The stream is split into blocks of λ consecutive positions. A block is
//! registered when it contains a sampled 1-bit, and it is evicted once its
//! last position leaves the window. The estimate `|queue|·λ + ell` is never
//! below the true window count and exceeds it by at most `2λ`.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LambdaCounter {
    lambda: u64,
    window: u64,
    /// Registered block indices, strictly increasing.
    queue: VecDeque<u64>,
    /// 1-bits seen since the last sampled bit.
    ell: u64,
    /// Current block, 1-based once the first bit has arrived.
    block_index: u64,
    offset: u64,
    /// Bits consumed; the first bit has timestamp 1.
    time: u64,
}

impl LambdaCounter {
    pub fn new(lambda: u64, window: u64) -> Result<Self> {
        if lambda == 0 || window == 0 {
            return Err(Error::invalid("lambda and window must be positive"));
        }
        Ok(Self {
            lambda,
            window,
            queue: VecDeque::new(),
            ell: 0,
            block_index: 0,
            offset: 0,
            time: 0,
        })
    }

    /// Consume one bit; returns true when this bit was sampled and its block registered.
    pub fn push_bit(&mut self, bit: bool) -> bool {
        // advance
        if self.time == 0 {
            self.block_index = 1;
            self.offset = 0;
        } else {
            self.offset += 1;
            if self.offset == self.lambda {
                self.offset = 0;
                self.block_index += 1;
            }
        }
        self.time += 1;

        // evict blocks lying entirely at or before time - window
        if let Some(cutoff) = self.time.checked_sub(self.window) {
            while self
                .queue
                .front()
                .is_some_and(|&b| b * self.lambda <= cutoff)
            {
                self.queue.pop_front();
            }
        }

        // count
        if !bit {
            return false;
        }
        self.ell += 1;
        if self.ell == self.lambda {
            self.ell = 0;
            self.queue.push_back(self.block_index);
            true
        } else {
            false
        }
    }

    pub fn estimate(&self) -> u64 {
        self.queue.len() as u64 * self.lambda + self.ell
    }

    pub fn lambda(&self) -> u64 {
        self.lambda
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }

    pub fn block_index(&self) -> u64 {
        self.block_index
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn queue(&self) -> impl Iterator<Item = u64> + '_ {
        self.queue.iter().copied()
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }
}
