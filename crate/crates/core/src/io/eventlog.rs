//! Binary coincidence log.
//!
//! Layout: a UTF-8 text header of `key value` lines, ending with the line
//! `end_header`, followed immediately by fixed-width little-endian records.
//!
//! ```text
//! EOSI-EVENTS v1
//! config_digest <hex, or - when unknown>
//! configuration <signal-in-eosi | idler-in-eosi>
//! sheared_photon <signal | idler>
//! shear_rad_per_fs <f64>
//! delay_fs <f64>
//! sheared_grid <center rad/fs> <step rad/fs> <count>
//! herald_grid <center rad/fs> <step rad/fs> <count>
//! duration_s <f64>
//! records <count>
//! end_header
//! ```
//!
//! Each record is 20 bytes: `u32 bin1` (sheared grid), `u32 bin2` (herald
//! grid), `f64 timestamp` (s) and `u32 tag` (0 = signal-in-eosi,
//! 1 = idler-in-eosi). Floats in the header use the shortest representation
//! that parses back to the same bits, so a round trip is exact.

use std::collections::HashMap;
use std::path::Path;

use super::FormatError;
use crate::interferometer::{Configuration, EventRecord, EventStream, ShearSettings, StreamHeader};
use crate::model::{FrequencyGrid, Photon};

pub const EVENT_LOG_MAGIC: &str = "EOSI-EVENTS v1";
pub const RECORD_BYTES: usize = 20;
const END_HEADER: &str = "end_header";

/// Serialises a stream to bytes.
pub fn encode_events(stream: &EventStream) -> Vec<u8> {
    let h = &stream.header;
    let digest = if h.config_digest.is_empty() {
        "-"
    } else {
        h.config_digest.as_str()
    };
    let grid = |g: &FrequencyGrid| format!("{:?} {:?} {}", g.center(), g.step(), g.count());
    let header = format!(
        "{EVENT_LOG_MAGIC}\nconfig_digest {digest}\nconfiguration {}\nsheared_photon {}\n\
         shear_rad_per_fs {:?}\ndelay_fs {:?}\nsheared_grid {}\nherald_grid {}\nduration_s {:?}\n\
         records {}\n{END_HEADER}\n",
        h.configuration().as_str(),
        h.settings.sheared_photon.as_str(),
        h.settings.shear_rad_per_fs,
        h.settings.delay_fs,
        grid(&h.sheared_grid),
        grid(&h.herald_grid),
        h.duration_s,
        stream.events.len(),
    );
    let mut out = Vec::with_capacity(header.len() + RECORD_BYTES * stream.events.len());
    out.extend_from_slice(header.as_bytes());
    for e in &stream.events {
        out.extend_from_slice(&e.bin1.to_le_bytes());
        out.extend_from_slice(&e.bin2.to_le_bytes());
        out.extend_from_slice(&e.timestamp.to_le_bytes());
        out.extend_from_slice(&e.config.tag().to_le_bytes());
    }
    out
}

/// Parses bytes written by [`encode_events`]. The header's record count must
/// match the record section exactly; the records are validated against the
/// header (bins inside the grids, matching tags, increasing timestamps).
pub fn decode_events(bytes: &[u8]) -> Result<EventStream, FormatError> {
    let mut fields: HashMap<&str, (usize, &str)> = HashMap::new();
    let mut offset = 0;
    let mut line_no = 0;
    let mut ended = false;
    while offset < bytes.len() {
        let end = bytes[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| offset + p)
            .ok_or_else(|| FormatError::header(line_no + 1, "header is not terminated"))?;
        line_no += 1;
        let line = std::str::from_utf8(&bytes[offset..end])
            .map_err(|_| FormatError::header(line_no, "header line is not UTF-8"))?;
        offset = end + 1;
        if line_no == 1 {
            if line != EVENT_LOG_MAGIC {
                return Err(FormatError::Version {
                    found: line.chars().take(40).collect(),
                });
            }
            continue;
        }
        if line == END_HEADER {
            ended = true;
            break;
        }
        let (key, value) = line.split_once(' ').ok_or_else(|| {
            FormatError::header(line_no, format!("expected `key value`, got `{line}`"))
        })?;
        if fields.insert(key, (line_no, value)).is_some() {
            return Err(FormatError::header(
                line_no,
                format!("duplicate key `{key}`"),
            ));
        }
    }
    if line_no == 0 {
        return Err(FormatError::Version {
            found: String::new(),
        });
    }
    if !ended {
        return Err(FormatError::header(line_no, "missing end_header"));
    }

    let get = |key: &str| -> Result<(usize, &str), FormatError> {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| FormatError::header(0, format!("missing key `{key}`")))
    };
    let float = |key: &str| -> Result<f64, FormatError> {
        let (line, v) = get(key)?;
        v.parse()
            .map_err(|_| FormatError::header(line, format!("`{key}` is not a number: `{v}`")))
    };
    let grid = |key: &str| -> Result<FrequencyGrid, FormatError> {
        let (line, v) = get(key)?;
        let parts: Vec<&str> = v.split(' ').collect();
        let bad = || {
            FormatError::header(
                line,
                format!("`{key}` must be `center step count`, got `{v}`"),
            )
        };
        if parts.len() != 3 {
            return Err(bad());
        }
        let center: f64 = parts[0].parse().map_err(|_| bad())?;
        let step: f64 = parts[1].parse().map_err(|_| bad())?;
        let count: usize = parts[2].parse().map_err(|_| bad())?;
        FrequencyGrid::new(center, step, count)
            .map_err(|e| FormatError::header(line, e.to_string()))
    };

    let (digest_line, digest) = get("config_digest")?;
    if digest != "-" && !digest.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(FormatError::header(
            digest_line,
            "config_digest must be hex or -",
        ));
    }
    let (line, photon) = get("sheared_photon")?;
    let sheared_photon = match photon {
        "signal" => Photon::Signal,
        "idler" => Photon::Idler,
        other => {
            return Err(FormatError::header(
                line,
                format!("unknown photon `{other}`"),
            ))
        }
    };
    let (line, configuration) = get("configuration")?;
    if configuration != Configuration::from_sheared(sheared_photon).as_str() {
        return Err(FormatError::header(
            line,
            format!("configuration `{configuration}` does not match sheared photon `{photon}`"),
        ));
    }
    let (line, records) = get("records")?;
    let records: usize = records.parse().map_err(|_| {
        FormatError::header(line, format!("record count is not an integer: `{records}`"))
    })?;
    let header = StreamHeader {
        config_digest: if digest == "-" {
            String::new()
        } else {
            digest.to_string()
        },
        settings: ShearSettings {
            shear_rad_per_fs: float("shear_rad_per_fs")?,
            delay_fs: float("delay_fs")?,
            sheared_photon,
        },
        sheared_grid: grid("sheared_grid")?,
        herald_grid: grid("herald_grid")?,
        duration_s: float("duration_s")?,
    };

    let body = &bytes[offset..];
    let expected = records
        .checked_mul(RECORD_BYTES)
        .ok_or(FormatError::Truncated {
            expected: records,
            found: body.len() / RECORD_BYTES,
        })?;
    if body.len() < expected {
        return Err(FormatError::Truncated {
            expected: records,
            found: body.len() / RECORD_BYTES,
        });
    }
    if body.len() > expected {
        return Err(FormatError::TrailingData {
            extra_bytes: body.len() - expected,
        });
    }
    let mut events = Vec::with_capacity(records);
    for (k, chunk) in body.chunks_exact(RECORD_BYTES).enumerate() {
        let u32_at = |i: usize| u32::from_le_bytes(chunk[i..i + 4].try_into().expect("4 bytes"));
        let tag = u32_at(16);
        let config = Configuration::from_tag(tag).ok_or_else(|| {
            FormatError::Record(format!("record {k} has unknown configuration tag {tag}"))
        })?;
        events.push(EventRecord {
            bin1: u32_at(0),
            bin2: u32_at(4),
            timestamp: f64::from_le_bytes(chunk[8..16].try_into().expect("8 bytes")),
            config,
        });
    }
    let stream = EventStream { header, events };
    stream
        .validate()
        .map_err(|e| FormatError::Record(e.to_string()))?;
    Ok(stream)
}

pub fn write_events(stream: &EventStream, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    std::fs::write(path, encode_events(stream)).map_err(|e| FormatError::io(path, e))
}

pub fn read_events(path: impl AsRef<Path>) -> Result<EventStream, FormatError> {
    let path = path.as_ref();
    decode_events(&std::fs::read(path).map_err(|e| FormatError::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(n: usize) -> EventStream {
        let g1 = FrequencyGrid::new(2.27, 1.283e-4, 64).unwrap();
        let g2 = FrequencyGrid::new(2.27, 3.85e-4, 32).unwrap();
        let events = (0..n)
            .map(|k| EventRecord {
                bin1: (k * 7 % 64) as u32,
                bin2: (k * 3 % 32) as u32,
                timestamp: 0.1 + k as f64 / 15.0 + 1e-13 * (k % 5) as f64,
                config: Configuration::IdlerInEosi,
            })
            .collect();
        EventStream {
            header: StreamHeader {
                config_digest: "00ff".repeat(16),
                settings: ShearSettings {
                    shear_rad_per_fs: 8.0 * 1.283e-4,
                    delay_fs: 3000.0,
                    sheared_photon: Photon::Idler,
                },
                sheared_grid: g1,
                herald_grid: g2,
                duration_s: n as f64 / 15.0 + 1.0,
            },
            events,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = stream(100_000);
        let bytes = encode_events(&s);
        let back = decode_events(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(encode_events(&back), bytes);
        for (a, b) in s.events.iter().zip(&back.events) {
            assert_eq!(a.timestamp.to_bits(), b.timestamp.to_bits());
        }
    }

    #[test]
    fn empty_stream_is_valid() {
        let s = stream(0);
        let back = decode_events(&encode_events(&s)).unwrap();
        assert!(back.is_empty());
        assert_eq!(back, s);
    }

    #[test]
    fn corrupted_tail_is_truncation() {
        let bytes = encode_events(&stream(100));
        let err = decode_events(&bytes[..bytes.len() - 7]).unwrap_err();
        assert!(
            matches!(
                err,
                FormatError::Truncated {
                    expected: 100,
                    found: 99
                }
            ),
            "{err}"
        );
        assert!(err.to_string().starts_with("eventlog-truncated"));
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(
            decode_events(&longer),
            Err(FormatError::TrailingData { extra_bytes: 1 })
        ));
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = encode_events(&stream(3));
        bytes[13] = b'2';
        let err = decode_events(&bytes).unwrap_err();
        assert!(err.to_string().starts_with("eventlog-version"), "{err}");
        assert!(decode_events(b"").is_err());
    }

    #[test]
    fn record_layout() {
        let s = stream(2);
        let bytes = encode_events(&s);
        let records = &bytes[bytes.len() - 2 * RECORD_BYTES..];
        assert_eq!(
            u32::from_le_bytes(records[20..24].try_into().unwrap()),
            s.events[1].bin1
        );
        assert_eq!(
            f64::from_le_bytes(records[28..36].try_into().unwrap()),
            s.events[1].timestamp
        );
        assert_eq!(u32::from_le_bytes(records[36..40].try_into().unwrap()), 1);
    }

    #[test]
    fn header_mismatches_are_rejected() {
        let text = String::from_utf8_lossy(&encode_events(&stream(0)))
            .replace("idler-in-eosi", "signal-in-eosi");
        let err = decode_events(text.as_bytes()).unwrap_err();
        assert!(err.to_string().starts_with("eventlog-header"), "{err}");
        let mut bad_tag = encode_events(&stream(1));
        let n = bad_tag.len();
        bad_tag[n - 4] = 0;
        let err = decode_events(&bad_tag).unwrap_err();
        assert!(err.to_string().starts_with("eventlog-record"), "{err}");
    }
}
