//! Tiny stderr logger controlled by the `PARA_LOG` environment variable.
//!
//! Levels: `off`, `error`, `warn` (default), `info`, `debug`. Numeric values
//! 0-4 work too.

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Off = 0,
    Error = 1,
    Warn = 2,
    Info = 3,
    Debug = 4,
}

static VERBOSITY: OnceLock<Level> = OnceLock::new();

pub fn level() -> Level {
    *VERBOSITY.get_or_init(|| match std::env::var("PARA_LOG").as_deref() {
        Ok("off") | Ok("0") => Level::Off,
        Ok("error") | Ok("1") => Level::Error,
        Ok("warn") | Ok("2") => Level::Warn,
        Ok("info") | Ok("3") => Level::Info,
        Ok("debug") | Ok("4") => Level::Debug,
        _ => Level::Warn,
    })
}

pub fn enabled(l: Level) -> bool {
    level() >= l
}

macro_rules! log_warn {
    ($($arg:tt)*) => {
        if $crate::logging::enabled($crate::logging::Level::Warn) {
            eprintln!("[warn] {}", format_args!($($arg)*));
        }
    };
}

macro_rules! log_info {
    ($($arg:tt)*) => {
        if $crate::logging::enabled($crate::logging::Level::Info) {
            eprintln!("[info] {}", format_args!($($arg)*));
        }
    };
}

macro_rules! log_debug {
    ($($arg:tt)*) => {
        if $crate::logging::enabled($crate::logging::Level::Debug) {
            eprintln!("[debug] {}", format_args!($($arg)*));
        }
    };
}

pub(crate) use {log_debug, log_info, log_warn};
