//! Local emulator for a schema: dispatch, serving, warm-pool simulation and
//! cost estimation.

mod cost;
mod dispatch;
#[cfg(feature = "server")]
mod server;
mod sim;
mod value;

pub use cost::{estimate_cost, warming_per_month, CostEstimate, CostParams, WARMING_DURATION_MS};
pub use dispatch::{
    handle_event, load_dispatch_table, match_route, DispatchTable, Event, HandlerEntry, HandlerFn, HandlerRegistry,
    HttpRequest, Response, RouteMatch, RuntimeError, StaticEntry,
};
#[cfg(feature = "server")]
pub use server::{run_batch, serve, ServerError, ServerHandle};
pub use sim::{
    constant_rate, percentile, periodic, simulate_warm_pool, InstanceSnapshot, Metrics, RequestRecord, SimError,
    SimulationReport, WarmPoolParams, WindowStats, WorkloadEntry,
};
pub use value::{
    decode_value, deserialize_params, render_value, Converter, Converters, CustomValue, ParamError, Value,
};
