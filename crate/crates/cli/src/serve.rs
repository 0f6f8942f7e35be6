use std::path::PathBuf;
use std::sync::Arc;

use kitgi_service::{router, serve, Store, SystemClock, DEFAULT_LEASE_SECS};
use tokio::net::TcpListener;

use crate::args::ServeArgs;
use crate::config::Config;
use crate::failure::Failure;

pub const DEFAULT_ADDR: &str = "127.0.0.1:8080";

/// Handlers are registered before the future is returned, so a signal
/// arriving right after the banner still drains instead of killing.
#[cfg(unix)]
fn shutdown_signal() -> Result<impl std::future::Future<Output = ()>, Failure> {
    use tokio::signal::unix::{signal, SignalKind};
    let register =
        |kind| signal(kind).map_err(|e| Failure::Runtime(format!("signal handler: {e}")));
    let mut interrupt = register(SignalKind::interrupt())?;
    let mut terminate = register(SignalKind::terminate())?;
    Ok(async move {
        tokio::select! {
            _ = interrupt.recv() => {},
            _ = terminate.recv() => {},
        }
    })
}

#[cfg(not(unix))]
fn shutdown_signal() -> Result<impl std::future::Future<Output = ()>, Failure> {
    Ok(async {
        let _ = tokio::signal::ctrl_c().await;
    })
}

/// Serves until SIGINT/SIGTERM, then drains in-flight requests. The first
/// stdout line is `listening on http://<addr>`.
pub async fn run(
    dataset: &std::path::Path,
    config: &Config,
    args: &ServeArgs,
) -> Result<(), Failure> {
    let svc = &config.service;
    let data_dir = args
        .data_dir
        .clone()
        .or_else(|| svc.data_dir.clone())
        .unwrap_or_else(|| PathBuf::from(".kitgi/service"));
    let addr = args
        .addr
        .clone()
        .or_else(|| svc.addr.clone())
        .unwrap_or_else(|| DEFAULT_ADDR.to_string());
    let ui_dir = args.ui_dir.clone().or_else(|| svc.ui_dir.clone());
    let lease_secs = args
        .lease_secs
        .or(svc.lease_secs)
        .unwrap_or(DEFAULT_LEASE_SECS);
    if lease_secs <= 0 {
        return Err(Failure::User(format!(
            "lease duration must be positive, got {lease_secs}"
        )));
    }
    if let Some(dir) = &ui_dir {
        if !dir.is_dir() {
            return Err(Failure::User(format!(
                "UI directory {} does not exist",
                dir.display()
            )));
        }
    }

    let seed = dataset.exists().then_some(dataset);
    let store = tokio::task::block_in_place(|| {
        Store::open(&data_dir, seed, Arc::new(SystemClock), lease_secs)
    })?;
    let progress = store.progress();
    let listener = TcpListener::bind(&addr)
        .await
        .map_err(|e| Failure::Runtime(format!("bind {addr}: {e}")))?;
    let local = listener
        .local_addr()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let shutdown = shutdown_signal()?;
    println!("listening on http://{local}");
    log::info!(
        "{} records, data in {}",
        progress.records,
        data_dir.display()
    );
    use std::io::Write;
    let _ = std::io::stdout().flush();

    serve(listener, router(Arc::new(store), ui_dir), shutdown)
        .await
        .map_err(|e| Failure::Runtime(format!("server: {e}")))
}
