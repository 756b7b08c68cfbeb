use std::io::Write;
use std::sync::atomic::Ordering;

use clap::Args;
use compliant_bridge::{BridgeError, MockServer, ServerConfig};
use compliant_core::policy::PolicyHandle;
use compliant_core::sim::find_scenario;

use crate::Failure;

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8765")]
    pub bind: String,
    /// Scenario whose waypoint script the server follows.
    #[arg(long, default_value = "push_box")]
    pub scenario: String,
    /// Per-delta noise std-dev (m); clients may pick the seed with `?seed=N`.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Noise seed for clients that do not pick one.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = ServerConfig::default().max_connections)]
    pub max_connections: usize,
}

pub fn cmd_serve(args: &ServeArgs) -> Result<(), Failure> {
    let spec = find_scenario(&args.scenario).map_err(Failure::usage)?;
    if !(args.noise >= 0.0 && args.noise.is_finite()) {
        return Err(Failure::usage("noise must be finite and >= 0"));
    }
    let handle = if args.noise > 0.0 {
        PolicyHandle::noisy(spec.script, args.noise, args.seed)
    } else {
        PolicyHandle::scripted(spec.script)
    };
    let cfg = ServerConfig { max_connections: args.max_connections, ..ServerConfig::default() };
    let server = MockServer::bind_with(&args.bind, handle, cfg).map_err(|e| match e {
        BridgeError::Bind { .. } => Failure::Runtime(e.into()),
        other => Failure::usage(other),
    })?;
    let flag = server.shutdown_flag();
    ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst))
        .map_err(|e| Failure::Runtime(anyhow::anyhow!("cannot install signal handler: {e}")))?;
    // Whoever launched us may have stopped reading; never fail on a closed stdout.
    let mut out = std::io::stdout();
    let _ = writeln!(out, "serving {} on {}", args.scenario, server.url());
    let _ = out.flush();
    server.wait();
    let _ = writeln!(out, "shut down");
    Ok(())
}
