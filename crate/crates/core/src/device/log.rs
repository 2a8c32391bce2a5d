use std::io::{self, Write};

use crate::engine::Tick;

pub const EVENT_LOG_HEADER: &str = "tick_ps,event,detail";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRow {
    pub tick: Tick,
    pub event: &'static str,
    pub detail: String,
}

/// Device-internal activity: GC operations, DT deferrals, flush waves.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    rows: Vec<LogRow>,
}

impl EventLog {
    pub fn push(&mut self, tick: Tick, event: &'static str, detail: String) {
        self.rows.push(LogRow {
            tick,
            event,
            detail,
        });
    }

    pub fn rows(&self) -> &[LogRow] {
        &self.rows
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{EVENT_LOG_HEADER}")?;
        let mut rows: Vec<&LogRow> = self.rows.iter().collect();
        rows.sort_by_key(|r| r.tick);
        for r in rows {
            writeln!(w, "{},{},{}", r.tick.as_ps(), r.event, r.detail)?;
        }
        Ok(())
    }
}
