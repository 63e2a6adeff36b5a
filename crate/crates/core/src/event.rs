//! Event data model, CSV stream parsing, time-windowed accumulation and
//! polarity splitting.
//!
//! A stream is a time-ordered slice of [`Event`]s. Windows borrow
//! contiguous sub-slices of that stream, so overlapping windows
//! (`t_a > step`) cost nothing extra.

use std::fmt::Write as _;

use crate::error::EventError;

/// Header line of the event CSV format.
pub const EVENT_CSV_HEADER: &str = "t_us,x,y,p";

/// Detection cadence of 24 Hz.
pub const DEFAULT_STEP_US: u64 = 41_667;
pub const DEFAULT_ACCUMULATION_US: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    /// Brightness increase.
    Positive,
    /// Brightness decrease.
    Negative,
}

impl Polarity {
    pub fn as_bit(self) -> u8 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => 0,
        }
    }
}

/// One polarity change at a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub t_us: u64,
    pub x: u16,
    pub y: u16,
    pub polarity: Polarity,
}

impl Event {
    pub fn new(t_us: u64, x: u16, y: u16, polarity: Polarity) -> Self {
        Self { t_us, x, y, polarity }
    }

    pub fn xy(&self) -> (i32, i32) {
        (i32::from(self.x), i32::from(self.y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SensorGeometry {
    pub width_px: u32,
    pub height_px: u32,
}

impl Default for SensorGeometry {
    /// VGA sensor.
    fn default() -> Self {
        Self { width_px: 640, height_px: 480 }
    }
}

impl SensorGeometry {
    pub fn new(width_px: u32, height_px: u32) -> Result<Self, EventError> {
        if width_px == 0 || height_px == 0 || width_px > 65_536 || height_px > 65_536 {
            return Err(EventError::InvalidParameter(format!(
                "sensor geometry {width_px}x{height_px} must be positive and at most 65536 per side"
            )));
        }
        Ok(Self { width_px, height_px })
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < i64::from(self.width_px) && y < i64::from(self.height_px)
    }

    pub fn area_px(&self) -> u64 {
        u64::from(self.width_px) * u64::from(self.height_px)
    }
}

impl std::str::FromStr for SensorGeometry {
    type Err = EventError;

    /// Parses `WxH`, e.g. `640x480`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, h) = s
            .trim()
            .split_once(['x', 'X'])
            .ok_or_else(|| EventError::InvalidParameter(format!("geometry `{s}` is not WxH")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<u32>()
                .map_err(|_| EventError::InvalidParameter(format!("geometry `{s}` is not WxH")))
        };
        SensorGeometry::new(parse(w)?, parse(h)?)
    }
}

/// All events in `(t_end_us - t_a_us, t_end_us]`, in stream order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventWindow<'a> {
    pub t_end_us: u64,
    pub t_a_us: u64,
    pub events: &'a [Event],
}

impl<'a> EventWindow<'a> {
    pub fn new(t_end_us: u64, t_a_us: u64, events: &'a [Event]) -> Self {
        Self { t_end_us, t_a_us, events }
    }

    pub fn empty(t_end_us: u64, t_a_us: u64) -> Self {
        Self { t_end_us, t_a_us, events: &[] }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Exclusive lower time bound of the window.
    pub fn t_open_us(&self) -> i64 {
        self.t_end_us as i64 - self.t_a_us as i64
    }
}

/// Polarity-split view of a window: positives, negatives and everything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PolaritySplit {
    pub positives: Vec<Event>,
    pub negatives: Vec<Event>,
    pub all: Vec<Event>,
}

/// Parses an event CSV (`t_us,x,y,p`). The whole stream is rejected on the
/// first violation.
pub fn parse_event_stream(text: &str, geometry: SensorGeometry) -> Result<Vec<Event>, EventError> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break l,
            None => return Err(EventError::MissingHeader),
        }
    };
    if header.trim() != EVENT_CSV_HEADER {
        return Err(EventError::MissingHeader);
    }

    let mut events = Vec::new();
    let mut last_t = 0u64;
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next_int = |name: &str| -> Result<i64, EventError> {
            let f = fields.next().ok_or_else(|| EventError::MalformedRecord {
                line: line_no,
                reason: format!("missing field `{name}`"),
            })?;
            f.trim().parse::<i64>().map_err(|_| EventError::MalformedRecord {
                line: line_no,
                reason: format!("field `{name}` is not an integer: `{}`", f.trim()),
            })
        };
        let t = next_int("t_us")?;
        let x = next_int("x")?;
        let y = next_int("y")?;
        let p = next_int("p")?;
        if fields.next().is_some() {
            return Err(EventError::MalformedRecord {
                line: line_no,
                reason: "expected 4 fields".into(),
            });
        }
        if t < 0 {
            return Err(EventError::MalformedRecord {
                line: line_no,
                reason: format!("negative timestamp {t}"),
            });
        }
        let polarity = match p {
            1 => Polarity::Positive,
            0 => Polarity::Negative,
            other => {
                return Err(EventError::MalformedRecord {
                    line: line_no,
                    reason: format!("polarity must be 0 or 1, got {other}"),
                })
            }
        };
        if !geometry.contains(x, y) {
            return Err(EventError::CoordinateOutOfRange { line: line_no, x, y });
        }
        let t = t as u64;
        if t < last_t {
            return Err(EventError::NonMonotonicTimestamp {
                line: line_no,
                previous: last_t,
                current: t,
            });
        }
        last_t = t;
        events.push(Event::new(t, x as u16, y as u16, polarity));
    }
    Ok(events)
}

/// Serializes events in the event CSV format (LF line endings).
pub fn write_event_csv(events: &[Event]) -> String {
    let mut out = String::with_capacity(16 + events.len() * 18);
    out.push_str(EVENT_CSV_HEADER);
    out.push('\n');
    for e in events {
        let _ = writeln!(out, "{},{},{},{}", e.t_us, e.x, e.y, e.polarity.as_bit());
    }
    out
}

/// Cuts a time-ordered stream into windows closing at
/// `t_start_us + k * step_us` for `k = 1, 2, ...` until the stream's last
/// event has dropped out of the trailing span.
pub fn window_events(
    stream: &[Event],
    t_a_us: u64,
    step_us: u64,
    t_start_us: u64,
) -> Result<Vec<EventWindow<'_>>, EventError> {
    let Some(last) = stream.last() else {
        check_window_params(t_a_us, step_us)?;
        return Ok(Vec::new());
    };
    window_events_until(stream, t_a_us, step_us, t_start_us, last.t_us)
}

/// Like [`window_events`] but also keeps emitting windows until one closes
/// at or after `t_until_us`, even past the end of the stream.
pub fn window_events_until(
    stream: &[Event],
    t_a_us: u64,
    step_us: u64,
    t_start_us: u64,
    t_until_us: u64,
) -> Result<Vec<EventWindow<'_>>, EventError> {
    check_window_params(t_a_us, step_us)?;
    let mut windows = Vec::new();
    if t_until_us <= t_start_us && stream.last().is_none_or(|e| e.t_us <= t_start_us) {
        return Ok(windows);
    }
    let mut lo = 0usize;
    let mut hi = 0usize;
    let mut k = 1u64;
    loop {
        let t_end = t_start_us + k * step_us;
        let t_open = t_end as i64 - t_a_us as i64;
        while hi < stream.len() && stream[hi].t_us <= t_end {
            hi += 1;
        }
        while lo < hi && (stream[lo].t_us as i64) <= t_open {
            lo += 1;
        }
        windows.push(EventWindow::new(t_end, t_a_us, &stream[lo..hi]));
        let drained = stream.last().is_none_or(|e| t_end + step_us >= e.t_us + t_a_us);
        if t_end >= t_until_us && drained {
            break;
        }
        k += 1;
    }
    Ok(windows)
}

fn check_window_params(t_a_us: u64, step_us: u64) -> Result<(), EventError> {
    if t_a_us == 0 || step_us == 0 {
        return Err(EventError::InvalidParameter(format!(
            "accumulation ({t_a_us} us) and step ({step_us} us) must be positive"
        )));
    }
    Ok(())
}

pub fn split_by_polarity(window: &EventWindow<'_>) -> PolaritySplit {
    let mut split = PolaritySplit {
        positives: Vec::with_capacity(window.len() / 2 + 1),
        negatives: Vec::with_capacity(window.len() / 2 + 1),
        all: window.events.to_vec(),
    };
    for e in window.events {
        match e.polarity {
            Polarity::Positive => split.positives.push(*e),
            Polarity::Negative => split.negatives.push(*e),
        }
    }
    split
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(t: u64) -> Event {
        Event::new(t, 1, 1, Polarity::Positive)
    }

    fn times(w: &EventWindow<'_>) -> Vec<u64> {
        w.events.iter().map(|e| e.t_us).collect()
    }

    #[test]
    fn parses_single_record() {
        let got = parse_event_stream("t_us,x,y,p\n1000,10,20,1\n", SensorGeometry::default()).unwrap();
        assert_eq!(got, vec![Event::new(1000, 10, 20, Polarity::Positive)]);
    }

    #[test]
    fn header_only_is_empty() {
        let got = parse_event_stream("t_us,x,y,p\n", SensorGeometry::default()).unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn parse_errors() {
        let g = SensorGeometry::default();
        assert!(matches!(
            parse_event_stream("t_us,x,y,p\n500,1,1,0\n400,1,1,0\n", g),
            Err(EventError::NonMonotonicTimestamp { line: 3, .. })
        ));
        assert!(matches!(parse_event_stream("", g), Err(EventError::MissingHeader)));
        assert!(matches!(parse_event_stream("1,2,3,1\n", g), Err(EventError::MissingHeader)));
        assert!(matches!(
            parse_event_stream("t_us,x,y,p\n1,2,3\n", g),
            Err(EventError::MalformedRecord { line: 2, .. })
        ));
        assert!(matches!(
            parse_event_stream("t_us,x,y,p\n1,2,3,1,5\n", g),
            Err(EventError::MalformedRecord { .. })
        ));
        assert!(matches!(
            parse_event_stream("t_us,x,y,p\n1,a,3,1\n", g),
            Err(EventError::MalformedRecord { .. })
        ));
        assert!(matches!(
            parse_event_stream("t_us,x,y,p\n1,2,3,2\n", g),
            Err(EventError::MalformedRecord { .. })
        ));
        assert!(matches!(
            parse_event_stream("t_us,x,y,p\n1,640,3,1\n", g),
            Err(EventError::CoordinateOutOfRange { x: 640, .. })
        ));
        assert!(matches!(
            parse_event_stream("t_us,x,y,p\n1,0,-1,1\n", g),
            Err(EventError::CoordinateOutOfRange { .. })
        ));
    }

    #[test]
    fn geometry_parsing() {
        assert_eq!("320x240".parse::<SensorGeometry>().unwrap(), SensorGeometry::new(320, 240).unwrap());
        assert!("320".parse::<SensorGeometry>().is_err());
        assert!("0x240".parse::<SensorGeometry>().is_err());
    }

    #[test]
    fn windows_half_open() {
        let s = [ev(10), ev(50), ev(120)];
        let w = window_events(&s, 100, 100, 0).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!((w[0].t_end_us, times(&w[0])), (100, vec![10, 50]));
        assert_eq!((w[1].t_end_us, times(&w[1])), (200, vec![120]));
    }

    #[test]
    fn windows_overlap() {
        let s = [ev(90), ev(150)];
        let w = window_events(&s, 100, 50, 0).unwrap();
        let got: Vec<_> = w.iter().map(|w| (w.t_end_us, times(w))).collect();
        assert_eq!(got, vec![(50, vec![]), (100, vec![90]), (150, vec![90, 150]), (200, vec![150])]);
    }

    #[test]
    fn boundary_event_lands_once_when_t_a_equals_step() {
        let s = [ev(100)];
        let w = window_events(&s, 100, 100, 0).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(times(&w[0]), vec![100]);
    }

    #[test]
    fn empty_stream_no_windows() {
        assert!(window_events(&[], 100, 100, 0).unwrap().is_empty());
        assert!(window_events(&[], 0, 100, 0).is_err());
        assert!(window_events(&[ev(1)], 100, 0, 0).is_err());
    }

    #[test]
    fn windows_until_extends_past_stream() {
        let s = [ev(10)];
        let w = window_events_until(&s, 100, 100, 0, 350).unwrap();
        assert_eq!(w.iter().map(|w| w.t_end_us).collect::<Vec<_>>(), vec![100, 200, 300, 400]);
        assert!(w[1].is_empty());
    }

    #[test]
    fn split_counts() {
        let events = [
            Event::new(1, 0, 0, Polarity::Positive),
            Event::new(2, 0, 0, Polarity::Negative),
            Event::new(3, 0, 0, Polarity::Positive),
        ];
        let s = split_by_polarity(&EventWindow::new(10, 10, &events));
        assert_eq!((s.positives.len(), s.negatives.len(), s.all.len()), (2, 1, 3));
        let s = split_by_polarity(&EventWindow::new(10, 10, &events[..1]));
        assert!(s.negatives.is_empty());
        let s = split_by_polarity(&EventWindow::empty(10, 10));
        assert_eq!(s, PolaritySplit::default());
    }

    fn arb_stream() -> impl Strategy<Value = Vec<Event>> {
        prop::collection::vec((0u64..500, 0u16..640, 0u16..480, any::<bool>()), 0..200).prop_map(|mut v| {
            v.sort_by_key(|r| r.0);
            v.into_iter()
                .map(|(t, x, y, p)| Event::new(t, x, y, if p { Polarity::Positive } else { Polarity::Negative }))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn csv_round_trip(stream in arb_stream()) {
            let text = write_event_csv(&stream);
            let parsed = parse_event_stream(&text, SensorGeometry::default()).unwrap();
            prop_assert_eq!(&parsed, &stream);
            prop_assert_eq!(write_event_csv(&parsed), text);
        }

        #[test]
        fn window_coverage(stream in arb_stream(), t_a in 1u64..200, step in 1u64..200) {
            let windows = window_events(&stream, t_a, step, 0).unwrap();
            for w in &windows {
                for e in w.events {
                    prop_assert!((e.t_us as i64) > w.t_open_us() && e.t_us <= w.t_end_us);
                }
                let s = split_by_polarity(w);
                prop_assert_eq!(s.positives.len() + s.negatives.len(), s.all.len());
            }
            // Events strictly inside the covered range land in floor/ceil(t_a/step) windows.
            if let Some(last) = windows.last() {
                let lo_count = t_a / step;
                let hi_count = t_a.div_ceil(step);
                for (i, e) in stream.iter().enumerate() {
                    if e.t_us < t_a || e.t_us + t_a > last.t_end_us {
                        continue;
                    }
                    let n = windows.iter().filter(|w| {
                        w.events.as_ptr_range().contains(&(&stream[i] as *const Event))
                    }).count() as u64;
                    prop_assert!(n >= lo_count && n <= hi_count, "event {:?} in {} windows", e, n);
                }
            }
        }
    }
}
