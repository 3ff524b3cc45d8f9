//! Phasors, the Fortescue transform and the relay's DFT front-end.
//!
//! A [`Phasor`] is a fundamental-frequency complex quantity. Magnitudes are
//! RMS values (protection convention): a waveform `A·√2·cos(ωt + φ)` has the
//! phasor `A∠φ`. Angles are reported in radians, normalized to `(−π, π]`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Impedances are plain complex numbers in ohms.
pub type Impedance = Complex64;

/// Samples per fundamental cycle used by the relay front-end.
pub const SAMPLES_PER_CYCLE: usize = 32;

/// Nominal system frequency, Hz.
pub const NOMINAL_FREQUENCY: f64 = 60.0;

/// Smallest accepted samples-per-cycle ratio for [`estimate_phasor`].
pub const MIN_SAMPLES_PER_CYCLE: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhasorError {
    #[error("need at least {needed} samples for one fundamental cycle, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("sample rate {sample_rate} Hz is not an integer multiple (>= 8) of {fundamental} Hz")]
    InvalidRate { sample_rate: f64, fundamental: f64 },
}

/// Normalize an angle to `(−π, π]`.
pub fn normalize_angle(theta: f64) -> f64 {
    if theta.is_nan() {
        return theta;
    }
    let mut t = theta % TAU;
    if t <= -PI {
        t += TAU;
    } else if t > PI {
        t -= TAU;
    }
    t
}

/// A fundamental-frequency phasor with RMS magnitude.
///
/// Stored in rectangular form; [`Phasor::magnitude`] and [`Phasor::angle`]
/// give the polar view. The zero phasor reports angle `0`.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct Phasor(Complex64);

impl Phasor {
    pub const ZERO: Phasor = Phasor(Complex64 { re: 0.0, im: 0.0 });

    pub fn from_polar(magnitude: f64, angle: f64) -> Self {
        debug_assert!(magnitude >= 0.0, "phasor magnitude must be non-negative");
        Phasor(Complex64::from_polar(magnitude, normalize_angle(angle)))
    }

    pub fn from_polar_deg(magnitude: f64, angle_deg: f64) -> Self {
        Self::from_polar(magnitude, angle_deg.to_radians())
    }

    pub fn from_rect(re: f64, im: f64) -> Self {
        Phasor(Complex64::new(re, im))
    }

    pub fn magnitude(&self) -> f64 {
        self.0.norm()
    }

    /// Angle in radians, in `(−π, π]`.
    pub fn angle(&self) -> f64 {
        if self.0.re == 0.0 && self.0.im == 0.0 {
            return 0.0;
        }
        let a = self.0.im.atan2(self.0.re);
        if a <= -PI {
            PI
        } else {
            a
        }
    }

    pub fn angle_deg(&self) -> f64 {
        self.angle().to_degrees()
    }

    pub fn re(&self) -> f64 {
        self.0.re
    }

    pub fn im(&self) -> f64 {
        self.0.im
    }

    pub fn to_complex(self) -> Complex64 {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.re == 0.0 && self.0.im == 0.0
    }
}

impl From<Complex64> for Phasor {
    fn from(c: Complex64) -> Self {
        Phasor(c)
    }
}

impl From<Phasor> for Complex64 {
    fn from(p: Phasor) -> Self {
        p.0
    }
}

impl fmt::Debug for Phasor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}∠{:.4}°", self.magnitude(), self.angle_deg())
    }
}

impl fmt::Display for Phasor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}∠{:.3}°", self.magnitude(), self.angle_deg())
    }
}

impl Add for Phasor {
    type Output = Phasor;
    fn add(self, rhs: Phasor) -> Phasor {
        Phasor(self.0 + rhs.0)
    }
}

impl AddAssign for Phasor {
    fn add_assign(&mut self, rhs: Phasor) {
        self.0 += rhs.0;
    }
}

impl Sub for Phasor {
    type Output = Phasor;
    fn sub(self, rhs: Phasor) -> Phasor {
        Phasor(self.0 - rhs.0)
    }
}

impl Neg for Phasor {
    type Output = Phasor;
    fn neg(self) -> Phasor {
        Phasor(-self.0)
    }
}

impl Mul<f64> for Phasor {
    type Output = Phasor;
    fn mul(self, rhs: f64) -> Phasor {
        Phasor(self.0 * rhs)
    }
}

/// Phasor times a complex operator (an impedance, α, a ratio).
impl Mul<Complex64> for Phasor {
    type Output = Phasor;
    fn mul(self, rhs: Complex64) -> Phasor {
        Phasor(self.0 * rhs)
    }
}

impl Div<Complex64> for Phasor {
    type Output = Phasor;
    fn div(self, rhs: Complex64) -> Phasor {
        Phasor(self.0 / rhs)
    }
}

/// The ratio of two phasors is a dimensionless complex number (or an
/// impedance, for V / I).
impl Div<Phasor> for Phasor {
    type Output = Complex64;
    fn div(self, rhs: Phasor) -> Complex64 {
        self.0 / rhs.0
    }
}

/// The Fortescue operator α = 1∠120°.
pub fn alpha() -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI / 3.0)
}

/// Per-phase quantities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThreePhaseSet {
    pub a: Phasor,
    pub b: Phasor,
    pub c: Phasor,
}

/// Symmetrical components, phase-a referenced.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SequenceSet {
    pub zero: Phasor,
    pub positive: Phasor,
    pub negative: Phasor,
}

impl ThreePhaseSet {
    pub fn new(a: Phasor, b: Phasor, c: Phasor) -> Self {
        ThreePhaseSet { a, b, c }
    }

    /// A balanced positive-sequence set with phase a equal to `a`.
    pub fn balanced(a: Phasor) -> Self {
        from_sequence(&SequenceSet { zero: Phasor::ZERO, positive: a, negative: Phasor::ZERO })
    }

    pub fn sum(&self) -> Phasor {
        self.a + self.b + self.c
    }
}

impl Add for ThreePhaseSet {
    type Output = ThreePhaseSet;
    fn add(self, rhs: Self) -> Self {
        ThreePhaseSet { a: self.a + rhs.a, b: self.b + rhs.b, c: self.c + rhs.c }
    }
}

impl Add for SequenceSet {
    type Output = SequenceSet;
    fn add(self, rhs: Self) -> Self {
        SequenceSet { zero: self.zero + rhs.zero, positive: self.positive + rhs.positive, negative: self.negative + rhs.negative }
    }
}

/// Phase quantities to symmetrical components.
pub fn to_sequence(abc: &ThreePhaseSet) -> SequenceSet {
    let a = alpha();
    let a2 = a * a;
    let (pa, pb, pc) = (abc.a.0, abc.b.0, abc.c.0);
    SequenceSet {
        zero: Phasor((pa + pb + pc) / 3.0),
        positive: Phasor((pa + a * pb + a2 * pc) / 3.0),
        negative: Phasor((pa + a2 * pb + a * pc) / 3.0),
    }
}

/// Symmetrical components back to phase quantities.
pub fn from_sequence(seq: &SequenceSet) -> ThreePhaseSet {
    let a = alpha();
    let a2 = a * a;
    let (s0, s1, s2) = (seq.zero.0, seq.positive.0, seq.negative.0);
    ThreePhaseSet { a: Phasor(s0 + s1 + s2), b: Phasor(s0 + a2 * s1 + a * s2), c: Phasor(s0 + a * s1 + a2 * s2) }
}

/// Full-cycle DFT estimate of the fundamental phasor over the most recent
/// cycle of `samples`.
///
/// The sample rate must be an integer multiple (at least 8) of the
/// fundamental so that one cycle is an exact number of samples; DC and every
/// integer harmonic below Nyquist are then orthogonal to the correlation
/// kernel and drop out exactly.
pub fn estimate_phasor(samples: &[f64], sample_rate: f64, fundamental: f64) -> Result<Phasor, PhasorError> {
    let ratio = sample_rate / fundamental;
    let n = ratio.round();
    if !(ratio.is_finite()) || (ratio - n).abs() > 1e-9 * ratio.abs().max(1.0) || n < MIN_SAMPLES_PER_CYCLE as f64 {
        return Err(PhasorError::InvalidRate { sample_rate, fundamental });
    }
    let n = n as usize;
    if samples.len() < n {
        return Err(PhasorError::InsufficientSamples { needed: n, got: samples.len() });
    }
    let window = &samples[samples.len() - n..];
    // Reference the phase to the time origin of the whole record.
    let offset = samples.len() - n;
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &x) in window.iter().enumerate() {
        let theta = TAU * ((offset + k) % n) as f64 / n as f64;
        acc += Complex64::new(x * theta.cos(), -x * theta.sin());
    }
    // Peak amplitude is 2/N·|acc|; RMS divides by √2.
    Ok(Phasor(acc * (std::f64::consts::SQRT_2 / n as f64)))
}
