//! HTTP session service for the browser client.

use std::path::PathBuf;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::Parser;
use walle_cli::{router, spawn_evictor, AppState, ServiceConfig};
use walle_core::eval::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "walle-serve", about = "Serve live waiter sessions over HTTP")]
struct Args {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Allowed browser origin; any origin when omitted.
    #[arg(long)]
    cors_origin: Option<String>,
    /// Minutes before an untouched session is dropped.
    #[arg(long, default_value_t = 30)]
    idle_minutes: u64,
    /// Delay between streamed waypoint events.
    #[arg(long, default_value_t = 150)]
    waypoint_ms: u64,
    /// Run-config JSON supplying the default perception and grasp settings.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> Result<()> {
    let args = Args::parse();
    let mut config = ServiceConfig {
        idle_timeout: Duration::from_secs(args.idle_minutes * 60),
        waypoint_interval: Duration::from_millis(args.waypoint_ms),
        cors_origin: args.cors_origin,
        ..ServiceConfig::default()
    };
    if let Some(p) = &args.config {
        config.pipeline = RunConfig::load(p)
            .with_context(|| format!("loading {}", p.display()))?
            .pipeline();
    }
    let state = AppState::new(config);
    spawn_evictor(state.clone());
    let addr = format!("{}:{}", args.host, args.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
