//! Two-party loopback harness: runs both roles on threads over an in-memory
//! channel pair. Used by tests, benchmarks and the CLI bench subcommand.

use crate::session::{Party, Session, SessionConfig};
use crate::transport::{loopback_pair, Channel};

/// Runs the two closures over a fresh loopback channel pair.
pub fn run_pair<F0, F1, T0, T1>(f0: F0, f1: F1) -> (T0, T1)
where
    F0: FnOnce(Channel) -> T0 + Send,
    F1: FnOnce(Channel) -> T1 + Send,
    T0: Send,
    T1: Send,
{
    let (ch0, ch1) = loopback_pair();
    std::thread::scope(|s| {
        let h1 = s.spawn(move || f1(ch1));
        let r0 = f0(ch0);
        (r0, h1.join().expect("party 1 panicked"))
    })
}

/// Establishes a session for each party over loopback, then runs the two
/// protocol closures. Panics on session setup failure; tests want the
/// backtrace.
pub fn run_sessions<F0, F1, T0, T1>(cfg: &SessionConfig, f0: F0, f1: F1) -> (T0, T1)
where
    F0: FnOnce(&mut Session) -> T0 + Send,
    F1: FnOnce(&mut Session) -> T1 + Send,
    T0: Send,
    T1: Send,
{
    run_pair(
        |ch| {
            let mut s = Session::establish(ch, Party::P0, cfg).expect("P0 session");
            f0(&mut s)
        },
        |ch| {
            let mut s = Session::establish(ch, Party::P1, cfg).expect("P1 session");
            f1(&mut s)
        },
    )
}

/// Like [`run_sessions`] but hands back the sessions for meter inspection.
pub fn run_sessions_keep<F0, F1, T0, T1>(
    cfg: &SessionConfig,
    f0: F0,
    f1: F1,
) -> ((Session, T0), (Session, T1))
where
    F0: FnOnce(&mut Session) -> T0 + Send,
    F1: FnOnce(&mut Session) -> T1 + Send,
    T0: Send,
    T1: Send,
{
    run_pair(
        |ch| {
            let mut s = Session::establish(ch, Party::P0, cfg).expect("P0 session");
            let r = f0(&mut s);
            (s, r)
        },
        |ch| {
            let mut s = Session::establish(ch, Party::P1, cfg).expect("P1 session");
            let r = f1(&mut s);
            (s, r)
        },
    )
}
