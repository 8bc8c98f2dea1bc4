//! Encoded polyline codec (5 or 6 decimal digits of precision).
//!
//! Each coordinate is scaled by `10^precision`, rounded half away from zero,
//! delta-encoded against the previous point, zig-zag folded and emitted as
//! little-endian 5-bit chunks offset by 63. Latitude precedes longitude.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::LatLng;

const CHUNK_BITS: u32 = 5;
const CHUNK_MASK: i64 = 0x1f;
const CONTINUATION: i64 = 0x20;
const OFFSET: u8 = 63;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolylineError {
    #[error("malformed polyline at byte {position}: {reason}")]
    MalformedPolyline { position: usize, reason: &'static str },
    #[error("unsupported polyline precision {0} (expected 5 or 6)")]
    UnsupportedPrecision(u8),
}

fn malformed(position: usize, reason: &'static str) -> PolylineError {
    PolylineError::MalformedPolyline { position, reason }
}

fn factor(precision: u8) -> Result<f64, PolylineError> {
    match precision {
        5 => Ok(1e5),
        6 => Ok(1e6),
        p => Err(PolylineError::UnsupportedPrecision(p)),
    }
}

/// Polyline text tagged with the precision it was encoded at.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodedPolyline {
    pub text: String,
    pub precision: u8,
}

impl EncodedPolyline {
    pub fn new(text: impl Into<String>, precision: u8) -> Self {
        EncodedPolyline {
            text: text.into(),
            precision,
        }
    }

    pub fn decode(&self) -> Result<Vec<LatLng>, PolylineError> {
        decode_polyline(&self.text, self.precision)
    }
}

fn push_value(mut value: i64, out: &mut String) {
    value = if value < 0 { !(value << 1) } else { value << 1 };
    while value >= CONTINUATION {
        out.push(((CONTINUATION | (value & CHUNK_MASK)) as u8 + OFFSET) as char);
        value >>= CHUNK_BITS;
    }
    out.push((value as u8 + OFFSET) as char);
}

pub fn encode_polyline(points: &[LatLng], precision: u8) -> Result<String, PolylineError> {
    let scale = factor(precision)?;
    let mut out = String::with_capacity(points.len() * 8);
    let (mut prev_lat, mut prev_lng) = (0i64, 0i64);
    for p in points {
        // f64::round is half-away-from-zero.
        let lat = (p.latitude() * scale).round() as i64;
        let lng = (p.longitude() * scale).round() as i64;
        push_value(lat - prev_lat, &mut out);
        push_value(lng - prev_lng, &mut out);
        prev_lat = lat;
        prev_lng = lng;
    }
    Ok(out)
}

/// Reads one zig-zag value starting at `*pos`.
fn read_value(bytes: &[u8], pos: &mut usize) -> Result<i64, PolylineError> {
    let mut acc: i64 = 0;
    let mut shift = 0u32;
    loop {
        let Some(&byte) = bytes.get(*pos) else {
            return Err(malformed(*pos, "input ends mid-value"));
        };
        if !(OFFSET..=b'~').contains(&byte) {
            return Err(malformed(*pos, "character outside the polyline alphabet"));
        }
        if shift > 60 {
            return Err(malformed(*pos, "value overflows 64 bits"));
        }
        let chunk = (byte - OFFSET) as i64;
        acc |= (chunk & CHUNK_MASK) << shift;
        shift += CHUNK_BITS;
        *pos += 1;
        if chunk & CONTINUATION == 0 {
            break;
        }
    }
    Ok(if acc & 1 == 1 { !(acc >> 1) } else { acc >> 1 })
}

pub fn decode_polyline(text: &str, precision: u8) -> Result<Vec<LatLng>, PolylineError> {
    let scale = factor(precision)?;
    let bytes = text.as_bytes();
    let mut points = Vec::with_capacity(bytes.len() / 4);
    let (mut lat, mut lng) = (0i64, 0i64);
    let mut pos = 0;
    while pos < bytes.len() {
        let start = pos;
        let dlat = read_value(bytes, &mut pos)?;
        if pos >= bytes.len() {
            return Err(malformed(pos, "latitude without longitude"));
        }
        let dlng = read_value(bytes, &mut pos)?;
        lat = lat
            .checked_add(dlat)
            .ok_or_else(|| malformed(start, "latitude accumulator overflow"))?;
        lng = lng
            .checked_add(dlng)
            .ok_or_else(|| malformed(start, "longitude accumulator overflow"))?;
        let point = LatLng::new(lat as f64 / scale, lng as f64 / scale)
            .map_err(|_| malformed(start, "decoded coordinate out of range"))?;
        points.push(point);
    }
    Ok(points)
}

/// Decodes many polylines; parallel when the `parallel` feature is on.
pub fn decode_many(lines: &[EncodedPolyline]) -> Vec<Result<Vec<LatLng>, PolylineError>> {
    crate::par::map(lines, EncodedPolyline::decode)
}

pub fn decode_many_seq(lines: &[EncodedPolyline]) -> Vec<Result<Vec<LatLng>, PolylineError>> {
    crate::par::map_seq(lines, EncodedPolyline::decode)
}

/// Uniform index-stride downsampling to at most `cap` points, always keeping the last.
pub fn downsample(points: &[LatLng], cap: usize) -> Vec<LatLng> {
    if points.len() <= cap || cap < 2 {
        return points.iter().take(cap).copied().collect();
    }
    let stride = (points.len() - 1) as f64 / (cap - 1) as f64;
    (0..cap)
        .map(|i| points[((i as f64 * stride).round() as usize).min(points.len() - 1)])
        .collect()
}
