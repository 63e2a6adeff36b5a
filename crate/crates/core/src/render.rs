//! Replay frames as binary PPM images: white background, positive events
//! black, negative events blue, detections outlined in red with their id.

use crate::dbscan::BBox;
use crate::event::{Event, Polarity, SensorGeometry};

pub type Rgb = [u8; 3];

pub const WHITE: Rgb = [255, 255, 255];
pub const BLACK: Rgb = [0, 0, 0];
pub const BLUE: Rgb = [0, 0, 255];
pub const RED: Rgb = [255, 0, 0];

/// 3x5 bitmaps for 0-9, one row per entry, most significant bit on the left.
const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b010, 0b010, 0b010],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Annotation {
    pub bbox: BBox,
    pub id: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<Rgb>,
}

impl Frame {
    pub fn blank(geometry: SensorGeometry) -> Self {
        Self {
            width: geometry.width_px,
            height: geometry.height_px,
            pixels: vec![WHITE; geometry.area_px() as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        self.pixels[(y * self.width + x) as usize]
    }

    /// Writes a pixel; coordinates outside the frame are ignored.
    pub fn set(&mut self, x: i64, y: i64, c: Rgb) {
        if x >= 0 && y >= 0 && (x as u32) < self.width && (y as u32) < self.height {
            self.pixels[(y as u32 * self.width + x as u32) as usize] = c;
        }
    }

    /// Binary (P6) portable pixmap.
    pub fn to_ppm(&self) -> Vec<u8> {
        let header = format!("P6\n{} {}\n255\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + self.pixels.len() * 3);
        out.extend_from_slice(header.as_bytes());
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }
}

pub fn render_window(geometry: SensorGeometry, events: &[Event], annotations: &[Annotation]) -> Frame {
    let mut f = Frame::blank(geometry);
    for e in events {
        let c = match e.polarity {
            Polarity::Positive => BLACK,
            Polarity::Negative => BLUE,
        };
        f.set(i64::from(e.x), i64::from(e.y), c);
    }
    for a in annotations {
        draw_box(&mut f, &a.bbox);
        let label_y = if a.bbox.min_y >= 6 { a.bbox.min_y - 6 } else { a.bbox.max_y + 2 };
        draw_number(&mut f, i64::from(a.bbox.min_x), i64::from(label_y), a.id);
    }
    f
}

fn draw_box(f: &mut Frame, b: &BBox) {
    let (x0, y0, x1, y1) = (i64::from(b.min_x), i64::from(b.min_y), i64::from(b.max_x), i64::from(b.max_y));
    for x in x0..=x1 {
        f.set(x, y0, RED);
        f.set(x, y1, RED);
    }
    for y in y0..=y1 {
        f.set(x0, y, RED);
        f.set(x1, y, RED);
    }
}

fn draw_number(f: &mut Frame, x: i64, y: i64, n: u64) {
    for (k, ch) in n.to_string().bytes().enumerate() {
        let glyph = &DIGITS[usize::from(ch - b'0')];
        let gx = x + 4 * k as i64;
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..3 {
                if bits & (0b100 >> col) != 0 {
                    f.set(gx + col, y + row as i64, RED);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> SensorGeometry {
        SensorGeometry::new(32, 24).unwrap()
    }

    #[test]
    fn empty_window_is_white() {
        let f = render_window(geom(), &[], &[]);
        assert!(f.pixels.iter().all(|&p| p == WHITE));
        let ppm = f.to_ppm();
        assert!(ppm.starts_with(b"P6\n32 24\n255\n"));
        assert_eq!(ppm.len(), 13 + 32 * 24 * 3);
    }

    #[test]
    fn single_positive_event() {
        let f = render_window(geom(), &[Event::new(1, 3, 4, Polarity::Positive)], &[]);
        assert_eq!(f.get(3, 4), BLACK);
        assert_eq!(f.pixels.iter().filter(|&&p| p != WHITE).count(), 1);
    }

    #[test]
    fn negative_is_blue_and_box_is_red() {
        let bbox = BBox { min_x: 10, min_y: 10, max_x: 14, max_y: 13 };
        let f = render_window(geom(), &[Event::new(1, 12, 11, Polarity::Negative)], &[Annotation { bbox, id: 7 }]);
        assert_eq!(f.get(12, 11), BLUE);
        assert_eq!(f.get(10, 10), RED);
        assert_eq!(f.get(14, 13), RED);
        assert_eq!(f.get(12, 12), WHITE);
        // Digit 7 drawn above the box: top row is solid.
        assert_eq!((f.get(10, 4), f.get(11, 4), f.get(12, 4)), (RED, RED, RED));
    }

    #[test]
    fn deterministic_bytes() {
        let ev = [Event::new(1, 0, 0, Polarity::Positive), Event::new(2, 31, 23, Polarity::Negative)];
        let a = render_window(geom(), &ev, &[]).to_ppm();
        let b = render_window(geom(), &ev, &[]).to_ppm();
        assert_eq!(a, b);
    }
}
