//! Run reports: per-layer and per-protocol breakdowns with text, JSON and
//! CSV serializations. Totals equal the sums of their parts.

use serde::{Deserialize, Serialize};

use crate::runtime::demand::Demand;
use crate::transport::{SessionMeter, Tag, TagCounters, ALL_TAGS};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerReport {
    pub layer: String,
    pub online_ms: f64,
    pub counters: TagCounters,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub party: String,
    pub bits: u32,
    pub label: Option<u64>,
    pub offline_ms: f64,
    pub online_ms: f64,
    pub layers: Vec<LayerReport>,
    /// Setup and preprocessing traffic outside any layer.
    pub offline_counters: TagCounters,
    pub totals: TagCounters,
    pub per_protocol: Vec<(String, TagCounters)>,
    pub demand: Demand,
    pub triples_generated: u64,
    pub triples_consumed: u64,
}

fn diff(new: &TagCounters, old: &TagCounters) -> TagCounters {
    TagCounters {
        bytes_sent: new.bytes_sent - old.bytes_sent,
        bytes_received: new.bytes_received - old.bytes_received,
        frames_sent: new.frames_sent - old.frames_sent,
        frames_received: new.frames_received - old.frames_received,
        rounds: new.rounds - old.rounds,
        and_gates: new.and_gates - old.and_gates,
        triples_consumed: new.triples_consumed - old.triples_consumed,
        cots: new.cots - old.cots,
    }
}

pub fn totals_diff(new: &SessionMeter, old: &SessionMeter) -> TagCounters {
    diff(&new.totals(), &old.totals())
}

/// Per-tag deltas between two meter snapshots, skipping idle tags.
pub fn per_protocol(new: &SessionMeter, old: &SessionMeter) -> Vec<(String, TagCounters)> {
    ALL_TAGS
        .iter()
        .map(|&t| (format!("{t:?}"), diff(new.tag(t), old.tag(t))))
        .filter(|(_, c)| *c != TagCounters::default())
        .collect()
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    pub fn from_json(s: &str) -> crate::Result<RunReport> {
        serde_json::from_str(s).map_err(|e| crate::Error::Encoding(e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "section,name,online_ms,bytes_sent,bytes_received,rounds,and_gates,triples,cots\n",
        );
        let row = |section: &str, name: &str, ms: f64, c: &TagCounters| {
            format!(
                "{section},{name},{ms:.3},{},{},{},{},{},{}\n",
                c.bytes_sent, c.bytes_received, c.rounds, c.and_gates, c.triples_consumed, c.cots
            )
        };
        for l in &self.layers {
            out.push_str(&row("layer", &l.layer, l.online_ms, &l.counters));
        }
        for (name, c) in &self.per_protocol {
            out.push_str(&row("protocol", name, 0.0, c));
        }
        out.push_str(&row(
            "offline",
            "setup",
            self.offline_ms,
            &self.offline_counters,
        ));
        out.push_str(&row("total", "all", self.online_ms, &self.totals));
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "party {} | {} bits | offline {:.1} ms | online {:.1} ms\n",
            self.party, self.bits, self.offline_ms, self.online_ms
        ));
        if let Some(l) = self.label {
            out.push_str(&format!("label: {l}\n"));
        }
        out.push_str(&format!(
            "demand: {} triples, {} cot-out, {} cot-in | triples generated {} consumed {}\n",
            self.demand.triples,
            self.demand.cots_out,
            self.demand.cots_in,
            self.triples_generated,
            self.triples_consumed
        ));
        out.push_str(
            "layer                       ms      sent    recv  rounds    ANDs  triples    COTs\n",
        );
        for l in &self.layers {
            let c = &l.counters;
            out.push_str(&format!(
                "{:<24} {:>7.1} {:>9} {:>7} {:>7} {:>7} {:>8} {:>7}\n",
                l.layer,
                l.online_ms,
                c.bytes_sent,
                c.bytes_received,
                c.rounds,
                c.and_gates,
                c.triples_consumed,
                c.cots
            ));
        }
        let t = &self.totals;
        out.push_str(&format!(
            "{:<24} {:>7.1} {:>9} {:>7} {:>7} {:>7} {:>8} {:>7}\n",
            "total(online)",
            self.online_ms,
            t.bytes_sent,
            t.bytes_received,
            t.rounds,
            t.and_gates,
            t.triples_consumed,
            t.cots
        ));
        out
    }

    /// Consistency: layer counters (plus the offline bucket) sum to totals.
    pub fn parts_sum_to_totals(&self) -> bool {
        let mut sum = TagCounters::default();
        for l in &self.layers {
            sum.bytes_sent += l.counters.bytes_sent;
            sum.bytes_received += l.counters.bytes_received;
            sum.frames_sent += l.counters.frames_sent;
            sum.frames_received += l.counters.frames_received;
            sum.rounds += l.counters.rounds;
            sum.and_gates += l.counters.and_gates;
            sum.triples_consumed += l.counters.triples_consumed;
            sum.cots += l.counters.cots;
        }
        sum.bytes_sent + self.offline_counters.bytes_sent == self.totals.bytes_sent
            && sum.bytes_received + self.offline_counters.bytes_received
                == self.totals.bytes_received
            && sum.and_gates + self.offline_counters.and_gates == self.totals.and_gates
            && sum.triples_consumed + self.offline_counters.triples_consumed
                == self.totals.triples_consumed
            && sum.cots + self.offline_counters.cots == self.totals.cots
    }
}

/// The per-inference security-surface check: the only share opening on the
/// wire is the single label message toward the client, and every active tag
/// carries a classified frame type.
pub fn check_security_surface(
    meter: &SessionMeter,
    party: crate::session::Party,
) -> crate::Result<()> {
    let label = meter.tag(Tag::LabelOpen);
    let (want_sent, want_recv) = match party {
        crate::session::Party::P0 => (1, 0),
        crate::session::Party::P1 => (0, 1),
    };
    if label.frames_sent != want_sent || label.frames_received != want_recv {
        return Err(crate::Error::state(format!(
            "label-opening surface violated: sent {} recv {}",
            label.frames_sent, label.frames_received
        )));
    }
    for (tag, counters) in meter.active() {
        let _class = tag.class(); // every tag is classified by construction
        if counters.bytes_sent > 0
            && matches!(tag.class(), crate::transport::FrameClass::LabelOpening)
            && tag != Tag::LabelOpen
        {
            return Err(crate::Error::state("unexpected opening tag"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::demand::Demand;

    fn empty_report() -> RunReport {
        RunReport {
            party: "P0".into(),
            bits: 37,
            label: None,
            offline_ms: 0.0,
            online_ms: 0.0,
            layers: vec![],
            offline_counters: TagCounters::default(),
            totals: TagCounters::default(),
            per_protocol: vec![],
            demand: Demand::default(),
            triples_generated: 0,
            triples_consumed: 0,
        }
    }

    #[test]
    fn empty_run_has_zero_totals() {
        let r = empty_report();
        assert!(r.parts_sum_to_totals());
        assert_eq!(r.totals, TagCounters::default());
    }

    #[test]
    fn json_round_trips() {
        let mut r = empty_report();
        r.label = Some(7);
        r.layers.push(LayerReport {
            layer: "0:conv".into(),
            online_ms: 1.5,
            counters: TagCounters {
                bytes_sent: 10,
                ..Default::default()
            },
        });
        r.totals.bytes_sent = 10;
        let back = RunReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back.label, Some(7));
        assert_eq!(back.layers.len(), 1);
        assert!(back.parts_sum_to_totals());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let r = empty_report();
        let csv = r.to_csv();
        assert!(csv.starts_with("section,name"));
        assert!(csv.contains("total,all"));
    }
}
