//! Live sessions, their execution drivers and event fan-out.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::Serialize;
use symwrap::orchestrator::{drive_realtime, Event, Mode, Session, StopTime};
use symwrap::translator::TranslatorKind;
use tokio::sync::{broadcast, watch};

use crate::config::GatewayConfig;

const FANOUT: usize = 1024;

/// An orchestrator event as sent to clients.
#[derive(Debug, Clone, Serialize)]
pub struct ApiEvent {
    pub session: String,
    #[serde(flatten)]
    pub event: Event,
}

pub struct Handle {
    pub id: String,
    session: Mutex<Session>,
    events: broadcast::Sender<Event>,
    driving: AtomicBool,
    period: Duration,
}

impl Handle {
    pub fn subscribe(&self) -> broadcast::Receiver<Event> {
        self.events.subscribe()
    }

    /// Timeline from sequence number `from` on.
    pub fn events_from(&self, from: u64) -> Vec<Event> {
        let s = self.session.lock().expect("session lock");
        s.timeline().iter().skip(from as usize).cloned().collect()
    }

    pub fn is_driving(&self) -> bool {
        self.driving.load(Ordering::SeqCst)
    }

    fn executing(&self) -> bool {
        self.session.lock().expect("session lock").phase().is_executing()
    }

    fn ensure_driver(self: &Arc<Self>) -> Option<JoinHandle<()>> {
        if !self.executing() || self.driving.swap(true, Ordering::SeqCst) {
            return None;
        }
        let h = Arc::clone(self);
        Some(thread::spawn(move || loop {
            drive_realtime(&h.session, h.period);
            h.driving.store(false, Ordering::SeqCst);
            // a resume may have landed between the last tick and the flag
            if !h.executing() || h.driving.swap(true, Ordering::SeqCst) {
                break;
            }
        }))
    }
}

pub struct Hub {
    pub config: GatewayConfig,
    sessions: RwLock<BTreeMap<String, Arc<Handle>>>,
    next: AtomicU64,
    drivers: Mutex<Vec<JoinHandle<()>>>,
    closing: watch::Sender<bool>,
}

impl Hub {
    pub fn new(config: GatewayConfig) -> Self {
        Self {
            config,
            sessions: RwLock::new(BTreeMap::new()),
            next: AtomicU64::new(1),
            drivers: Mutex::new(Vec::new()),
            closing: watch::channel(false).0,
        }
    }

    pub fn create(&self, mode: Mode, translator: TranslatorKind, auto_approve: bool) -> Result<Arc<Handle>, String> {
        if self.is_closing() {
            return Err("shutting down".into());
        }
        let id = format!("s{}", self.next.fetch_add(1, Ordering::SeqCst));
        let mut cfg = self.config.session_config(mode, translator);
        cfg.auto_approve = auto_approve;
        let mut session = Session::new(id.clone(), cfg, self.config.world()?);
        let (tx, _) = broadcast::channel(FANOUT);
        let sink = tx.clone();
        // never blocks the tick: with no subscribers the send just fails
        session.set_listener(Arc::new(move |e: &Event| {
            let _ = sink.send(e.clone());
        }));
        let h = Arc::new(Handle {
            id: id.clone(),
            session: Mutex::new(session),
            events: tx,
            driving: AtomicBool::new(false),
            period: Duration::from_millis(u64::from(self.config.tick_ms)),
        });
        self.sessions.write().expect("sessions lock").insert(id, Arc::clone(&h));
        Ok(h)
    }

    pub fn get(&self, id: &str) -> Option<Arc<Handle>> {
        self.sessions.read().expect("sessions lock").get(id).cloned()
    }

    pub fn ids(&self) -> Vec<String> {
        self.sessions.read().expect("sessions lock").keys().cloned().collect()
    }

    /// Runs `f` with the session locked, then starts a driver thread if
    /// the session is now executing.
    pub fn with<R>(&self, h: &Arc<Handle>, f: impl FnOnce(&mut Session) -> R) -> R {
        let r = f(&mut h.session.lock().expect("session lock"));
        // holding the list orders this against begin_shutdown
        let mut drivers = self.drivers.lock().expect("drivers lock");
        if !self.is_closing() {
            drivers.extend(h.ensure_driver());
        }
        r
    }

    pub fn closing(&self) -> watch::Receiver<bool> {
        self.closing.subscribe()
    }

    pub fn is_closing(&self) -> bool {
        *self.closing.borrow()
    }

    /// Ends event streams and asks every executing session to stop.
    pub fn begin_shutdown(&self) {
        let _drivers = self.drivers.lock().expect("drivers lock");
        self.closing.send_replace(true);
        let now = Instant::now();
        for h in self.sessions.read().expect("sessions lock").values() {
            let mut s = h.session.lock().expect("session lock");
            if s.phase().is_executing() {
                s.request_stop(StopTime::Wall(now));
            }
        }
    }

    /// Waits for every driver to halt. Call after [`Hub::begin_shutdown`].
    pub fn join_drivers(&self) {
        let drivers = std::mem::take(&mut *self.drivers.lock().expect("drivers lock"));
        for d in drivers {
            let _ = d.join();
        }
    }
}
