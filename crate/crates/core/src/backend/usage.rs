use std::time::Duration;

use serde::{Deserialize, Serialize};

/// USD per 1000 tokens, split by direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceTable {
    pub input_per_1k: f64,
    pub output_per_1k: f64,
}

impl Default for PriceTable {
    /// gpt-3.5-turbo list prices.
    fn default() -> Self {
        Self {
            input_per_1k: 0.0015,
            output_per_1k: 0.002,
        }
    }
}

impl PriceTable {
    pub const FREE: PriceTable = PriceTable {
        input_per_1k: 0.0,
        output_per_1k: 0.0,
    };

    pub fn cost(&self, prompt_tokens: u64, completion_tokens: u64) -> f64 {
        prompt_tokens as f64 * self.input_per_1k / 1000.0
            + completion_tokens as f64 * self.output_per_1k / 1000.0
    }
}

/// Token counts and latency of one or more completions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub wall_time: Duration,
    /// Counts are a whitespace proxy rather than provider-reported tokens.
    pub approximate: bool,
}

impl Usage {
    pub fn cost(&self, prices: &PriceTable) -> f64 {
        prices.cost(self.prompt_tokens, self.completion_tokens)
    }

    pub fn accumulate(&mut self, other: &Usage) {
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
        self.wall_time += other.wall_time;
        self.approximate |= other.approximate;
    }
}

impl std::iter::Sum for Usage {
    fn sum<I: Iterator<Item = Usage>>(iter: I) -> Self {
        let mut total = Usage::default();
        for u in iter {
            total.accumulate(&u);
        }
        total
    }
}

/// Running totals over completed items. Cost is computed from the integer token
/// totals, so it does not depend on the order items were added.
#[derive(Debug, Clone, PartialEq)]
pub struct Meter {
    prices: PriceTable,
    totals: Usage,
    items: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeterReport {
    pub total_cost: f64,
    pub items: u64,
    /// `items / total wall time`; 0 when no time has been recorded.
    pub items_per_second: f64,
    pub wall_time_secs: f64,
    pub approximate: bool,
}

impl Meter {
    pub fn new(prices: PriceTable) -> Self {
        Self {
            prices,
            totals: Usage::default(),
            items: 0,
        }
    }

    /// Records one item that consumed `usage`.
    pub fn add(&mut self, usage: &Usage) {
        self.totals.accumulate(usage);
        self.items += 1;
    }

    pub fn totals(&self) -> &Usage {
        &self.totals
    }

    pub fn report(&self) -> MeterReport {
        let secs = self.totals.wall_time.as_secs_f64();
        MeterReport {
            total_cost: self.totals.cost(&self.prices),
            items: self.items,
            items_per_second: if secs > 0.0 {
                self.items as f64 / secs
            } else {
                0.0
            },
            wall_time_secs: secs,
            approximate: self.totals.approximate,
        }
    }
}
