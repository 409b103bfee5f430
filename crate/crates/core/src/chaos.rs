//! Keystream generator driven by a four-dimensional hyperchaotic flow.
//!
//! The flow is integrated with classical fixed-step RK4 in plain binary64
//! arithmetic. Every expression is written out in a fixed order and never
//! fused, so the produced bytes are reproducible bit for bit on any IEEE-754
//! platform.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integration step used by the cipher.
pub const STEP: f64 = 0.001;

/// Components at or beyond this magnitude mark the trajectory as divergent.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Smallest admissible discard count is `MIN_DISCARD + 1`.
pub const MIN_DISCARD: u64 = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl HyperState {
    pub const ORIGIN: HyperState = HyperState::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64, w: f64) -> Self {
        HyperState { x, y, z, w }
    }

    pub fn components(&self) -> [f64; 4] {
        [self.x, self.y, self.z, self.w]
    }

    /// True when every component is finite and below the divergence bound.
    pub fn is_bounded(&self) -> bool {
        self.components()
            .iter()
            .all(|v| v.is_finite() && v.abs() < DIVERGENCE_BOUND)
    }

    // s + h * d, component-wise, product first.
    fn offset(&self, h: f64, d: &HyperState) -> HyperState {
        HyperState {
            x: self.x + h * d.x,
            y: self.y + h * d.y,
            z: self.z + h * d.z,
            w: self.w + h * d.w,
        }
    }
}

/// Coefficients of the flow. Only [`SystemParams::CIPHER`] is used by the
/// cipher, the type exists so the derivative can be exercised in isolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl SystemParams {
    pub const CIPHER: SystemParams = SystemParams {
        a: 35.0,
        b: 8.0 / 3.0,
        c: 55.0,
        d: 1.3,
    };

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn d(&self) -> f64 {
        self.d
    }
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::CIPHER
    }
}

/// Right-hand side of the flow:
///
/// ```text
/// x' = a(y - x) + yz
/// y' = cx - y - xz + w
/// z' = xy - bz
/// w' = dw - xz
/// ```
///
/// Non-finite inputs propagate; callers are responsible for guarding.
pub fn derivative(s: &HyperState, p: &SystemParams) -> HyperState {
    let HyperState { x, y, z, w } = *s;
    HyperState {
        x: p.a * (y - x) + y * z,
        y: p.c * x - y - x * z + w,
        z: x * y - p.b * z,
        w: p.d * w - x * z,
    }
}

/// One classical RK4 step. The step index reported on divergence is 1.
pub fn rk4_step(s: &HyperState, h: f64, p: &SystemParams) -> Result<HyperState> {
    let next = rk4_unchecked(s, h, p);
    if !next.is_bounded() {
        return Err(Error::Divergence { step: 1, state: next });
    }
    Ok(next)
}

fn rk4_unchecked(s: &HyperState, h: f64, p: &SystemParams) -> HyperState {
    let half = h / 2.0;
    let k1 = derivative(s, p);
    let k2 = derivative(&s.offset(half, &k1), p);
    let k3 = derivative(&s.offset(half, &k2), p);
    let k4 = derivative(&s.offset(h, &k3), p);
    let sixth = h / 6.0;
    let comb = |a: f64, b: f64, c: f64, d: f64| a + 2.0 * b + 2.0 * c + d;
    HyperState {
        x: s.x + sixth * comb(k1.x, k2.x, k3.x, k4.x),
        y: s.y + sixth * comb(k1.y, k2.y, k3.y, k4.y),
        z: s.z + sixth * comb(k1.z, k2.z, k3.z, k4.z),
        w: s.w + sixth * comb(k1.w, k2.w, k3.w, k4.w),
    }
}

/// Secret key of the cipher: initial point, discard count and seed byte.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecretKey {
    pub initial: HyperState,
    pub n0: u64,
    pub c0: u8,
}

impl SecretKey {
    pub fn new(initial: HyperState, n0: u64, c0: u8) -> Result<Self> {
        if initial.components().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidKey("initial state must be finite".into()));
        }
        if n0 <= MIN_DISCARD {
            return Err(Error::InvalidKey(format!("n0 must exceed {MIN_DISCARD}, got {n0}")));
        }
        if c0 == 0 {
            return Err(Error::InvalidKey("c0 must lie in [1, 255]".into()));
        }
        Ok(SecretKey { initial, n0, c0 })
    }

    /// The key used for the worked example of the original cipher.
    pub fn reference() -> Self {
        SecretKey {
            initial: HyperState::new(5.0, 10.0, 5.0, 10.0),
            n0: 1000,
            c0: 3,
        }
    }

    /// Single-line key record `x0 y0 z0 w0 n0 c0`, reals with 17 significant digits.
    pub fn to_record(&self) -> String {
        let s = &self.initial;
        format!(
            "{:.16e} {:.16e} {:.16e} {:.16e} {} {}",
            s.x, s.y, s.z, s.w, self.n0, self.c0
        )
    }
}

impl fmt::Display for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_record())
    }
}

/// Accepts both the key-file form (whitespace separated) and the inline
/// form (comma separated).
impl FromStr for SecretKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let fields: Vec<&str> = s
            .split(|ch: char| ch.is_whitespace() || ch == ',')
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() != 6 {
            return Err(Error::InvalidKey(format!(
                "expected 6 fields `x0 y0 z0 w0 n0 c0`, found {}",
                fields.len()
            )));
        }
        let real = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| Error::InvalidKey(format!("field {}: {e}", i + 1)))
        };
        let initial = HyperState::new(real(0)?, real(1)?, real(2)?, real(3)?);
        let n0 = fields[4]
            .parse::<u64>()
            .map_err(|e| Error::InvalidKey(format!("n0: {e}")))?;
        let c0 = fields[5]
            .parse::<u8>()
            .map_err(|e| Error::InvalidKey(format!("c0: {e}")))?;
        SecretKey::new(initial, n0, c0)
    }
}

/// Integrates `n0` discarded steps followed by `count` retained steps.
pub fn generate_states(key: &SecretKey, count: usize) -> Result<Vec<HyperState>> {
    if count == 0 {
        return Err(Error::Precondition("state count must be at least 1".into()));
    }
    let params = SystemParams::CIPHER;
    let mut s = key.initial;
    let mut out = Vec::with_capacity(count);
    let total = key.n0 + count as u64;
    for step in 1..=total {
        s = rk4_unchecked(&s, STEP, &params);
        if !s.is_bounded() {
            return Err(Error::Divergence { step, state: s });
        }
        if step > key.n0 {
            out.push(s);
        }
    }
    Ok(out)
}

/// How `[v]`, the nearest integer, resolves exact halves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    #[default]
    AwayFromZero,
    ToEven,
}

/// Maps a state component to a byte: `floor(|100v - [100v]| * 1e14) mod 256`.
pub fn quantize(v: f64) -> u8 {
    quantize_with(v, TieRule::AwayFromZero)
}

pub fn quantize_with(v: f64, ties: TieRule) -> u8 {
    let scaled = v * 100.0;
    let nearest = match ties {
        TieRule::AwayFromZero => scaled.round(),
        TieRule::ToEven => scaled.round_ties_even(),
    };
    let frac = (scaled - nearest).abs();
    // frac <= 0.5, so the floor fits comfortably in u64.
    ((frac * 1e14).floor() as u64 % 256) as u8
}

/// Byte keystream; the cipher's equivalent key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keystream(Vec<u8>);

impl Keystream {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Keystream(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Hex of the first (up to) eight bytes.
    pub fn fingerprint(&self) -> String {
        self.0.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

impl std::ops::Deref for Keystream {
    type Target = [u8];

    fn deref(&self) -> &[u8] {
        &self.0
    }
}

impl AsRef<[u8]> for Keystream {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

/// Produces `len` keystream bytes, four per state in lane order x, y, z, w.
pub fn keystream(key: &SecretKey, len: usize) -> Result<Keystream> {
    if len == 0 {
        return Err(Error::Precondition("keystream length must be at least 1".into()));
    }
    let states = generate_states(key, len.div_ceil(4))?;
    let mut out: Vec<u8> = states.iter().flat_map(|s| s.components().map(quantize)).collect();
    out.truncate(len);
    Ok(Keystream(out))
}
