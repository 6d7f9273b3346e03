//! Discrete-event model of a provider's warm pool.
//!
//! Instances live until they sit idle for `expiry_minutes`; an arriving
//! request takes the most recently used idle instance, spawns a new one (paying
//! the cold start) while below `max_instances`, or waits in a FIFO queue.
//! Warming ticks every `period_minutes` refresh up to `warm_pool_target`
//! instances. Warming invocations are modeled as instantaneous touches.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::WarmingConfig;

/// Simulation clock in whole microseconds, so chained completion times never
/// drift.
type Us = i64;

fn to_us(ms: f64) -> Us {
    (ms * 1000.0).round() as Us
}

fn to_ms(us: Us) -> f64 {
    us as f64 / 1000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct WarmPoolParams {
    pub max_instances: usize,
    pub expiry_minutes: f64,
    pub cold_start_ms: f64,
    pub service_time_ms: f64,
    pub warm_pool_target: usize,
    /// Keep running warming ticks and expiry up to this time. Defaults to
    /// the moment the last request completes.
    pub horizon_ms: Option<f64>,
}

impl Default for WarmPoolParams {
    fn default() -> Self {
        Self {
            max_instances: 1000,
            expiry_minutes: 15.0,
            cold_start_ms: 400.0,
            service_time_ms: 200.0,
            warm_pool_target: 1,
            horizon_ms: None,
        }
    }
}

impl WarmPoolParams {
    pub fn max_throughput_rps(&self) -> f64 {
        self.max_instances as f64 * 1000.0 / self.service_time_ms
    }

    fn expiry_us(&self) -> Us {
        to_us(self.expiry_minutes * 60_000.0)
    }
}

/// `concurrency` requests arriving together at `arrival_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadEntry {
    pub arrival_ms: f64,
    pub concurrency: u32,
}

impl WorkloadEntry {
    pub fn new(arrival_ms: f64, concurrency: u32) -> Self {
        Self {
            arrival_ms,
            concurrency,
        }
    }
}

/// Evenly spaced single requests at `rps` for `duration_ms`, starting at `start_ms`.
pub fn constant_rate(rps: f64, duration_ms: f64, start_ms: f64) -> Vec<WorkloadEntry> {
    let gap = 1000.0 / rps;
    let count = (duration_ms / gap).round() as usize;
    (0..count)
        .map(|i| WorkloadEntry::new(start_ms + i as f64 * gap, 1))
        .collect()
}

/// `count` single requests separated by `gap_ms`, starting at zero.
pub fn periodic(gap_ms: f64, count: usize) -> Vec<WorkloadEntry> {
    (0..count).map(|i| WorkloadEntry::new(i as f64 * gap_ms, 1)).collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("InvalidWorkload: entry {index} at {arrival_ms} ms is out of order or not a finite nonnegative time")]
    InvalidWorkload { index: usize, arrival_ms: f64 },
    #[error("invalid simulator parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RequestRecord {
    pub arrival_ms: f64,
    pub start_ms: f64,
    pub latency_ms: f64,
    pub cold: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InstanceSnapshot {
    pub last_used_ms: f64,
    pub warm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Metrics {
    pub requests: usize,
    pub cold_starts: usize,
    pub cold_fraction: f64,
    pub p50_latency_ms: f64,
    pub p99_latency_ms: f64,
    pub max_latency_ms: f64,
    pub max_throughput_rps: f64,
    /// Completed requests over the span from first arrival to last completion.
    pub served_rps: f64,
    /// Most completions inside any one-second window.
    pub peak_window_rps: f64,
    pub peak_instances: usize,
    pub dropped: usize,
    pub warming_events: usize,
    pub final_warm_instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationReport {
    pub metrics: Metrics,
    /// One record per request, in arrival order.
    pub records: Vec<RequestRecord>,
    pub final_instances: Vec<InstanceSnapshot>,
}

/// Latency summary over a subset of requests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WindowStats {
    pub requests: usize,
    pub cold_fraction: f64,
    pub p50_latency_ms: f64,
    pub p99_latency_ms: f64,
}

impl SimulationReport {
    /// Statistics for requests arriving at or after `from_ms`.
    pub fn window_from(&self, from_ms: f64) -> WindowStats {
        let selected: Vec<&RequestRecord> = self.records.iter().filter(|r| r.arrival_ms >= from_ms).collect();
        let mut latencies: Vec<f64> = selected.iter().map(|r| r.latency_ms).collect();
        latencies.sort_by(f64::total_cmp);
        let cold = selected.iter().filter(|r| r.cold).count();
        WindowStats {
            requests: selected.len(),
            cold_fraction: ratio(cold, selected.len()),
            p50_latency_ms: percentile(&latencies, 0.50),
            p99_latency_ms: percentile(&latencies, 0.99),
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Nearest-rank percentile of sorted data; 0 when empty.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn peak_window(completions: &mut [Us]) -> usize {
    completions.sort_unstable();
    let mut best = 0;
    let mut lo = 0;
    for hi in 0..completions.len() {
        while completions[hi] - completions[lo] >= 1_000_000 {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best
}

struct Pool {
    busy: BinaryHeap<Reverse<(Us, usize)>>,
    /// Idle instances keyed by `(last_used, id)`; the last entry is the MRU.
    idle: BTreeSet<(Us, usize)>,
    next_id: usize,
    expiry_us: Us,
}

impl Pool {
    fn alive(&self) -> usize {
        self.busy.len() + self.idle.len()
    }

    fn expire(&mut self, now: Us) {
        while let Some(&(last, id)) = self.idle.first() {
            if now - last >= self.expiry_us {
                self.idle.remove(&(last, id));
            } else {
                break;
            }
        }
    }
}

pub fn simulate_warm_pool(
    workload: &[WorkloadEntry],
    params: &WarmPoolParams,
    warming: &WarmingConfig,
) -> Result<SimulationReport, SimError> {
    let positive = |x: f64| x.is_finite() && x > 0.0;
    if params.max_instances == 0 {
        return Err(SimError::InvalidParams("maxInstances must be at least 1".into()));
    }
    if !positive(params.service_time_ms) || !positive(params.expiry_minutes) || to_us(params.service_time_ms) == 0 {
        return Err(SimError::InvalidParams(
            "serviceTimeMs (at least 1 µs) and expiryMinutes must be positive".into(),
        ));
    }
    if !(params.cold_start_ms.is_finite() && params.cold_start_ms >= 0.0) {
        return Err(SimError::InvalidParams("coldStartMs must be nonnegative".into()));
    }
    if warming.enabled && warming.period_minutes == 0 {
        return Err(SimError::InvalidParams(
            "warming period must be at least 1 minute".into(),
        ));
    }
    let mut prev = 0.0;
    for (index, e) in workload.iter().enumerate() {
        if !e.arrival_ms.is_finite() || e.arrival_ms < prev {
            return Err(SimError::InvalidWorkload {
                index,
                arrival_ms: e.arrival_ms,
            });
        }
        prev = e.arrival_ms;
    }

    let h = to_us(params.service_time_ms);
    let cold = to_us(params.cold_start_ms);
    let tick_us = Us::from(warming.period_minutes) * 60_000_000;
    let horizon = params.horizon_ms.map(to_us);
    let mut next_tick = warming.enabled.then_some(0);
    let mut pool = Pool {
        busy: BinaryHeap::new(),
        idle: BTreeSet::new(),
        next_id: 0,
        expiry_us: params.expiry_us(),
    };
    let mut queue: VecDeque<usize> = VecDeque::new();
    // (arrival, start, finish, cold) per request, in microseconds.
    let mut timeline: Vec<(Us, Us, Us, bool)> = Vec::new();
    let mut completions: Vec<Us> = Vec::new();
    let mut peak_instances = 0;
    let mut warming_events = 0;
    let mut next_arrival = 0;

    loop {
        let t_done = pool.busy.peek().map(|Reverse((t, _))| *t);
        let t_arrival = workload.get(next_arrival).map(|e| to_us(e.arrival_ms));
        let work_left = t_done.is_some() || t_arrival.is_some();
        // Ticks after the workload drains only run up to the horizon.
        let t_tick = next_tick.filter(|&t| work_left || horizon.is_some_and(|hz| t <= hz));

        // Completions before ticks before arrivals at equal times.
        let candidates = [(t_done, 0u8), (t_tick, 1), (t_arrival, 2)];
        let Some((now, kind)) = candidates.iter().filter_map(|&(t, k)| t.map(|t| (t, k))).min() else {
            break;
        };
        pool.expire(now);

        match kind {
            0 => {
                let Reverse((_, id)) = pool.busy.pop().expect("peeked");
                completions.push(now);
                if let Some(req) = queue.pop_front() {
                    timeline[req].1 = now;
                    timeline[req].2 = now + h;
                    pool.busy.push(Reverse((now + h, id)));
                } else {
                    pool.idle.insert((now, id));
                }
            }
            1 => {
                warming_events += 1;
                let wanted = params.warm_pool_target.saturating_sub(pool.busy.len());
                let touched: Vec<(Us, usize)> = pool.idle.iter().rev().take(wanted).copied().collect();
                for key in touched {
                    pool.idle.remove(&key);
                    pool.idle.insert((now, key.1));
                }
                next_tick = Some(now + tick_us);
            }
            _ => {
                let entry = workload[next_arrival];
                next_arrival += 1;
                for _ in 0..entry.concurrency {
                    if let Some((_, id)) = pool.idle.pop_last() {
                        pool.busy.push(Reverse((now + h, id)));
                        timeline.push((now, now, now + h, false));
                    } else if pool.alive() < params.max_instances {
                        let id = pool.next_id;
                        pool.next_id += 1;
                        pool.busy.push(Reverse((now + cold + h, id)));
                        timeline.push((now, now, now + cold + h, true));
                        peak_instances = peak_instances.max(pool.alive());
                    } else {
                        queue.push_back(timeline.len());
                        timeline.push((now, now, now, false));
                    }
                }
            }
        }
    }

    let last_completion = completions.iter().copied().max().unwrap_or(0);
    let end = horizon.map_or(last_completion, |hz| hz.max(last_completion));
    pool.expire(end);
    let final_instances: Vec<InstanceSnapshot> = pool
        .idle
        .iter()
        .map(|&(t, _)| InstanceSnapshot {
            last_used_ms: to_ms(t),
            warm: end - t < pool.expiry_us,
        })
        .collect();

    let records: Vec<RequestRecord> = timeline
        .iter()
        .map(|&(arrival, start, finish, cold)| RequestRecord {
            arrival_ms: to_ms(arrival),
            start_ms: to_ms(start),
            latency_ms: to_ms(finish - arrival),
            cold,
        })
        .collect();
    let mut latencies: Vec<f64> = records.iter().map(|r| r.latency_ms).collect();
    latencies.sort_by(f64::total_cmp);
    let cold_starts = records.iter().filter(|r| r.cold).count();
    let span_us = timeline.first().map_or(0, |first| last_completion - first.0);
    let served_rps = if span_us > 0 {
        records.len() as f64 * 1e6 / span_us as f64
    } else {
        0.0
    };

    let metrics = Metrics {
        requests: records.len(),
        cold_starts,
        cold_fraction: ratio(cold_starts, records.len()),
        p50_latency_ms: percentile(&latencies, 0.50),
        p99_latency_ms: percentile(&latencies, 0.99),
        max_latency_ms: latencies.last().copied().unwrap_or(0.0),
        max_throughput_rps: params.max_throughput_rps(),
        served_rps,
        peak_window_rps: peak_window(&mut completions) as f64,
        peak_instances,
        dropped: 0,
        warming_events,
        final_warm_instances: final_instances.iter().filter(|i| i.warm).count(),
    };
    Ok(SimulationReport {
        metrics,
        records,
        final_instances,
    })
}
