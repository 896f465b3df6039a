use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use super::Session;

/// Ticks a shared session on a wall-clock schedule until it leaves the
/// executing phase. Tick k fires at `start + k * period`, so a slow tick
/// does not shift later ones. The lock is held only for the tick itself,
/// leaving room for stop requests in between.
pub fn drive_realtime(session: &Mutex<Session>, period: Duration) {
    let start = Instant::now();
    let mut k: u32 = 1;
    loop {
        let deadline = start + period * k;
        let now = Instant::now();
        if deadline > now {
            thread::sleep(deadline - now);
        }
        let running = session.lock().expect("session lock").tick();
        if !running {
            break;
        }
        k += 1;
    }
}

/// Virtual clock: ticks as fast as possible.
pub fn drive_virtual(session: &mut Session) {
    session.run_to_end();
}
