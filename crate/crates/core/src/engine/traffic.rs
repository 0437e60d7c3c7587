use std::time::Duration;

use crate::protocol::Packet;
use crate::topology::HierAddress;

use super::SimTime;

/// Constant-bit-rate sender toward a mobile host's home address.
#[derive(Debug, Clone, PartialEq)]
pub struct CbrSource {
    pub src: HierAddress,
    pub dst_home_address: HierAddress,
    /// Packets per second.
    pub rate: f64,
    pub packet_size: u32,
    pub start: SimTime,
    pub stop: SimTime,
}

impl CbrSource {
    pub fn interval(&self) -> Duration {
        Duration::from_nanos((1e9 / self.rate).round() as u64)
    }

    /// Number of packets the source emits over `[start, stop]`.
    pub fn expected_packets(&self) -> u64 {
        if self.stop < self.start {
            return 0;
        }
        let span = (self.stop - self.start).as_nanos() as u64;
        span / self.interval().as_nanos() as u64 + 1
    }
}

/// Emits packet number `sent` at `now` and returns when the next tick is
/// due, or `None` once that would fall past `stop`.
pub fn cbr_tick(source: &CbrSource, now: SimTime, sent: u64) -> (Packet, Option<SimTime>) {
    debug_assert!(now >= source.start && now <= source.stop);
    let pkt = Packet::data(
        source.src,
        source.dst_home_address,
        source.packet_size,
        sent,
        now,
    );
    let next = now + source.interval();
    (pkt, (next <= source.stop).then_some(next))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table3() -> CbrSource {
        CbrSource {
            src: HierAddress::new(0, 0, 0),
            dst_home_address: HierAddress::new(1, 2, 1),
            rate: 5.0,
            packet_size: 200,
            start: SimTime::from_millis(500),
            stop: SimTime::from_millis(20_000),
        }
    }

    #[test]
    fn first_tick_and_spacing() {
        let s = table3();
        let (p, next) = cbr_tick(&s, s.start, 0);
        assert_eq!(p.seq, 0);
        assert_eq!(p.sent_at, SimTime::from_millis(500));
        assert_eq!(p.wire_size(), 220);
        assert_eq!(next, Some(SimTime::from_millis(700)));
    }

    #[test]
    fn last_tick_has_no_successor() {
        let s = table3();
        let (_, next) = cbr_tick(&s, SimTime::from_millis(19_900), 97);
        assert_eq!(next, None);
    }

    #[test]
    fn packet_count_matches_floor_formula() {
        // floor((20 - 0.5) * 5) + 1
        assert_eq!(table3().expected_packets(), 98);
        let mut n = 0;
        let s = table3();
        let mut t = Some(s.start);
        while let Some(now) = t {
            let (_, next) = cbr_tick(&s, now, n);
            n += 1;
            t = next;
        }
        assert_eq!(n, 98);
    }

    #[test]
    fn offered_load_is_far_below_capacity() {
        let s = table3();
        let bits_per_sec = s.rate * (s.packet_size as f64) * 8.0;
        assert_eq!(bits_per_sec, 8_000.0);
        assert!(bits_per_sec < 2_000_000.0 / 100.0);
    }
}
