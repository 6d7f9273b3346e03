use serde::{Deserialize, Serialize};

use crate::schema::WarmingConfig;

/// Billed duration of one warming invocation.
pub const WARMING_DURATION_MS: f64 = 10.0;
const MINUTES_PER_MONTH: f64 = 30.0 * 24.0 * 60.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct CostParams {
    pub price_per_request: f64,
    pub price_per_gb_second: f64,
    pub memory_gb: f64,
    pub requests_per_month: f64,
    pub avg_duration_ms: f64,
    pub warming_per_month: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            price_per_request: 0.0,
            price_per_gb_second: 0.0,
            memory_gb: 3.0,
            requests_per_month: 0.0,
            avg_duration_ms: 0.0,
            warming_per_month: 0.0,
        }
    }
}

/// Warming invocations in a 30-day month.
pub fn warming_per_month(warming: &WarmingConfig) -> f64 {
    if warming.enabled && warming.period_minutes > 0 {
        MINUTES_PER_MONTH / f64::from(warming.period_minutes)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CostEstimate {
    pub request_cost: f64,
    pub compute_cost: f64,
    pub warming_cost: f64,
    pub total_without_warming: f64,
    pub total: f64,
}

pub fn estimate_cost(p: &CostParams) -> CostEstimate {
    let gb_second = p.memory_gb * p.price_per_gb_second;
    let request_cost = p.requests_per_month * p.price_per_request;
    let compute_cost = p.requests_per_month * (p.avg_duration_ms / 1000.0) * gb_second;
    let warming_cost = p.warming_per_month * (WARMING_DURATION_MS / 1000.0) * gb_second;
    CostEstimate {
        request_cost,
        compute_cost,
        warming_cost,
        total_without_warming: request_cost + compute_cost,
        total: request_cost + compute_cost + warming_cost,
    }
}
