//! Unit conventions and small parsers for human-written quantities.
//!
//! Capacities, bandwidths and compute rates all use binary prefixes:
//! a "GB" of capacity is 2^30 bytes, a "TB/s" is 2^40 bytes per second and a
//! "PFLOPS" is 2^50 FLOP per second. Context lengths use the same convention,
//! so `4K` is 4096 tokens.

use crate::error::{Error, Result};

pub const KIB: f64 = 1024.0;
pub const GIB: f64 = (1u64 << 30) as f64;
pub const TIB: f64 = (1u64 << 40) as f64;
pub const PETA: f64 = (1u64 << 50) as f64;

pub const NS: f64 = 1e-9;
pub const US: f64 = 1e-6;

#[inline]
pub fn tbs_to_bytes_per_s(tbs: f64) -> f64 {
    tbs * TIB
}

#[inline]
pub fn pflops_to_flops(pflops: f64) -> f64 {
    pflops * PETA
}

#[inline]
pub fn gib(bytes: f64) -> f64 {
    bytes / GIB
}

/// Parses a token count such as `4096`, `4K`, `128k` or `1M`.
pub fn parse_context(s: &str) -> Result<u64> {
    parse_scaled(s, "context length")
}

/// Parses a byte size such as `96GB`, `512MB`, `11GiB` or a plain byte count.
pub fn parse_bytes(s: &str) -> Result<u64> {
    let lower = s.trim().to_ascii_lowercase();
    let body = lower
        .strip_suffix("ib")
        .or_else(|| lower.strip_suffix('b'))
        .unwrap_or(&lower);
    parse_scaled(body, "byte size")
}

fn parse_scaled(s: &str, what: &'static str) -> Result<u64> {
    let t = s.trim();
    if t.is_empty() {
        return Err(Error::Parse(format!("empty {what}")));
    }
    let (digits, shift) = match t.chars().last() {
        Some('k' | 'K') => (&t[..t.len() - 1], 10u32),
        Some('m' | 'M') => (&t[..t.len() - 1], 20),
        Some('g' | 'G') => (&t[..t.len() - 1], 30),
        Some('t' | 'T') => (&t[..t.len() - 1], 40),
        _ => (t, 0),
    };
    let digits = digits.trim();
    let base: u64 = digits.parse().map_err(|_| Error::Parse(format!("bad {what} `{s}`")))?;
    base.checked_mul(1u64 << shift)
        .ok_or_else(|| Error::Parse(format!("{what} `{s}` overflows")))
}

/// Formats a token count the way tables label columns (`4K`, `128K`, `1M`, `1000`).
pub fn format_context(tokens: u64) -> String {
    if tokens >= 1 << 20 && tokens % (1 << 20) == 0 {
        format!("{}M", tokens >> 20)
    } else if tokens >= 1024 && tokens % 1024 == 0 {
        format!("{}K", tokens >> 10)
    } else {
        tokens.to_string()
    }
}
