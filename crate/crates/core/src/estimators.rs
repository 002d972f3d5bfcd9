//! The unified statistics-based estimator family.
//!
//! A single engine parameterized by `(n, p, sigma)` realizes every method:
//! derivative order `n` picks the pooled signal (smoothed intensities for
//! `n = 0`, derivative magnitudes for `n >= 1`), `p` is the Minkowski norm
//! of the pooling step, and `sigma` the Gaussian smoothing scale. The named
//! methods are fixed points in that space:
//!
//! | method             | n | p      | sigma |
//! |--------------------|---|--------|-------|
//! | gray_world         | 0 | 1      | 0     |
//! | white_patch        | 0 | inf    | 0     |
//! | shades_of_gray     | 0 | free   | 0     |
//! | general_gray_world | 0 | free   | free  |
//! | gray_edge_1        | 1 | free   | free  |
//! | gray_edge_2        | 2 | free   | free  |

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::filter::{derivative_magnitude, gaussian_smooth};
use crate::image::{LinearImage, PixelMask};

/// Estimated illuminant color. Only the direction carries meaning;
/// consumers must not depend on the magnitude.
///
/// Invariant: all components finite and >= 0, at least one > 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IlluminantEstimate {
    r: f64,
    g: f64,
    b: f64,
}

impl IlluminantEstimate {
    pub fn new(r: f64, g: f64, b: f64) -> Result<Self> {
        for (label, v) in [("red", r), ("green", g), ("blue", b)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "illuminant {label} component must be finite and >= 0, got {v}"
                )));
            }
        }
        if r == 0.0 && g == 0.0 && b == 0.0 {
            return Err(Error::ZeroSignal);
        }
        Ok(Self { r, g, b })
    }

    pub fn red(&self) -> f64 {
        self.r
    }

    pub fn green(&self) -> f64 {
        self.g
    }

    pub fn blue(&self) -> f64 {
        self.b
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }

    /// Same direction, rescaled by `k`. `k` must be finite and > 0 so the
    /// invariants survive.
    pub fn scaled(&self, k: f64) -> Self {
        assert!(
            k.is_finite() && k > 0.0,
            "scale factor must be finite and > 0"
        );
        Self {
            r: self.r * k,
            g: self.g * k,
            b: self.b * k,
        }
    }
}

/// Estimator configuration: derivative order `n` in {0, 1, 2}, Minkowski
/// norm `p` in [1, inf] (infinity is an explicit state, not a large finite
/// stand-in), smoothing scale `sigma >= 0` in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParameterTuple {
    n: u8,
    p: f64,
    sigma: f64,
}

impl ParameterTuple {
    pub fn new(n: u8, p: f64, sigma: f64) -> Result<Self> {
        if n > 2 {
            return Err(Error::InvalidParameter(format!(
                "derivative order must be 0, 1 or 2, got {n}"
            )));
        }
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "norm must satisfy 1 <= p <= inf, got {p}"
            )));
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sigma must be finite and >= 0, got {sigma}"
            )));
        }
        Ok(Self { n, p, sigma })
    }

    pub fn gray_world() -> Self {
        Self {
            n: 0,
            p: 1.0,
            sigma: 0.0,
        }
    }

    pub fn white_patch() -> Self {
        Self {
            n: 0,
            p: f64::INFINITY,
            sigma: 0.0,
        }
    }

    pub fn shades_of_gray(p: f64) -> Result<Self> {
        Self::new(0, p, 0.0)
    }

    pub fn general_gray_world(p: f64, sigma: f64) -> Result<Self> {
        Self::new(0, p, sigma)
    }

    pub fn gray_edge(n: u8, p: f64, sigma: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "gray_edge requires derivative order 1 or 2".into(),
            ));
        }
        Self::new(n, p, sigma)
    }

    pub fn n(&self) -> u8 {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Which named method this tuple realizes.
    pub fn method_name(&self) -> &'static str {
        match (self.n, self.sigma) {
            (0, 0.0) if self.p == 1.0 => "gray_world",
            (0, 0.0) if self.p == f64::INFINITY => "white_patch",
            (0, 0.0) => "shades_of_gray",
            (0, _) => "general_gray_world",
            (1, _) => "gray_edge_1",
            _ => "gray_edge_2",
        }
    }

    /// Identifier safe for file names and CSV column heads.
    pub fn slug(&self) -> String {
        format!(
            "n{}_p{}_s{}",
            self.n,
            fmt_value(self.p).replace('.', "_"),
            fmt_value(self.sigma).replace('.', "_")
        )
    }

    /// Total order used for grids: n, then p with infinity last, then sigma.
    /// Bit patterns of nonnegative floats order the same way the values do.
    pub(crate) fn sort_key(&self) -> (u8, u64, u64) {
        (self.n, self.p.to_bits(), self.sigma.to_bits())
    }
}

fn fmt_value(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

impl fmt::Display for ParameterTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={},p={},sigma={}",
            self.n,
            fmt_value(self.p),
            fmt_value(self.sigma)
        )
    }
}

impl FromStr for ParameterTuple {
    type Err = Error;

    /// Parses the `Display` form, e.g. `n=1,p=6,sigma=2` or
    /// `n=0,p=inf,sigma=0`. Keys may appear in any order; each exactly once.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: String| Error::InvalidParameter(format!("tuple '{s}': {why}"));
        let (mut n, mut p, mut sigma) = (None, None, None);
        for part in s.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got '{part}'")))?;
            let slot = match key.trim() {
                "n" => &mut n,
                "p" => &mut p,
                "sigma" => &mut sigma,
                other => return Err(bad(format!("unknown key '{other}'"))),
            };
            if slot.is_some() {
                return Err(bad(format!("duplicate key '{key}'")));
            }
            let parsed: f64 = value
                .trim()
                .parse()
                .map_err(|_| bad(format!("cannot parse value '{value}'")))?;
            *slot = Some(parsed);
        }
        match (n, p, sigma) {
            (Some(n), Some(p), Some(sigma)) => {
                if n.fract() != 0.0 || !(0.0..=255.0).contains(&n) {
                    return Err(bad(format!("derivative order must be an integer, got {n}")));
                }
                Self::new(n as u8, p, sigma)
            }
            _ => Err(bad("all of n, p, sigma are required".into())),
        }
    }
}

/// A named method from the family, with its free parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Method {
    GrayWorld,
    WhitePatch,
    ShadesOfGray { p: f64 },
    GeneralGrayWorld { p: f64, sigma: f64 },
    GrayEdge1 { p: f64, sigma: f64 },
    GrayEdge2 { p: f64, sigma: f64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::GrayWorld => "gray_world",
            Method::WhitePatch => "white_patch",
            Method::ShadesOfGray { .. } => "shades_of_gray",
            Method::GeneralGrayWorld { .. } => "general_gray_world",
            Method::GrayEdge1 { .. } => "gray_edge_1",
            Method::GrayEdge2 { .. } => "gray_edge_2",
        }
    }

    /// The tuple this method denotes.
    pub fn params(&self) -> Result<ParameterTuple> {
        match *self {
            Method::GrayWorld => Ok(ParameterTuple::gray_world()),
            Method::WhitePatch => Ok(ParameterTuple::white_patch()),
            Method::ShadesOfGray { p } => ParameterTuple::shades_of_gray(p),
            Method::GeneralGrayWorld { p, sigma } => ParameterTuple::general_gray_world(p, sigma),
            Method::GrayEdge1 { p, sigma } => ParameterTuple::gray_edge(1, p, sigma),
            Method::GrayEdge2 { p, sigma } => ParameterTuple::gray_edge(2, p, sigma),
        }
    }

    /// Builds a method from its name and the free parameters it needs.
    /// `p` defaults to 1 and `sigma` to 0 when omitted.
    pub fn from_parts(name: &str, p: Option<f64>, sigma: Option<f64>) -> Result<Self> {
        let p_or = |d: f64| p.unwrap_or(d);
        let s = sigma.unwrap_or(0.0);
        let reject_free = |method: &str| -> Result<()> {
            if p.is_some() || sigma.is_some() {
                Err(Error::InvalidParameter(format!(
                    "{method} takes no free parameters"
                )))
            } else {
                Ok(())
            }
        };
        match name {
            "gray_world" => {
                reject_free("gray_world")?;
                Ok(Method::GrayWorld)
            }
            "white_patch" => {
                reject_free("white_patch")?;
                Ok(Method::WhitePatch)
            }
            "shades_of_gray" => {
                if sigma.is_some() {
                    return Err(Error::InvalidParameter(
                        "shades_of_gray takes no sigma; use general_gray_world".into(),
                    ));
                }
                Ok(Method::ShadesOfGray { p: p_or(1.0) })
            }
            "general_gray_world" => Ok(Method::GeneralGrayWorld {
                p: p_or(1.0),
                sigma: s,
            }),
            "gray_edge_1" => Ok(Method::GrayEdge1 {
                p: p_or(1.0),
                sigma: s,
            }),
            "gray_edge_2" => Ok(Method::GrayEdge2 {
                p: p_or(1.0),
                sigma: s,
            }),
            other => Err(Error::InvalidParameter(format!(
                "unknown method '{other}' (expected gray_world, white_patch, shades_of_gray, \
                 general_gray_world, gray_edge_1 or gray_edge_2)"
            ))),
        }
    }
}

/// The signal an estimator pools: the smoothed image for `n = 0`, the
/// derivative-magnitude image for `n >= 1`. Borrowed when no filtering is
/// needed so the common `(0, p, 0)` family costs nothing extra.
pub(crate) fn pooled_source<'a>(
    image: &'a LinearImage,
    params: &ParameterTuple,
) -> Result<Cow<'a, LinearImage>> {
    match (params.n, params.sigma) {
        (0, 0.0) => Ok(Cow::Borrowed(image)),
        (0, sigma) => Ok(Cow::Owned(gaussian_smooth(image, sigma)?)),
        (n, sigma) => Ok(Cow::Owned(derivative_magnitude(image, n, sigma)?)),
    }
}

/// Minkowski pooling of one channel over the included pixels.
///
/// `p = 1` is the plain mean and `p = inf` the maximum, both exact. Finite
/// `p > 1` computes in a max-rescaled domain so 16-bit intensities raised
/// to p ~ 20 cannot overflow; by homogeneity the rescale cancels.
fn pool_channel(values: &[f64], flags: &[bool], included: usize, p: f64) -> f64 {
    if p == f64::INFINITY {
        let mut m = 0.0f64;
        for (v, &keep) in values.iter().zip(flags) {
            if keep && *v > m {
                m = *v;
            }
        }
        return m;
    }
    if p == 1.0 {
        let mut sum = 0.0;
        for (v, &keep) in values.iter().zip(flags) {
            if keep {
                sum += *v;
            }
        }
        return sum / included as f64;
    }
    let mut m = 0.0f64;
    for (v, &keep) in values.iter().zip(flags) {
        if keep && *v > m {
            m = *v;
        }
    }
    if m == 0.0 {
        return 0.0;
    }
    let int_p = p.fract() == 0.0 && p <= i32::MAX as f64;
    let mut sum = 0.0;
    for (v, &keep) in values.iter().zip(flags) {
        if keep {
            let x = *v / m;
            sum += if int_p { x.powi(p as i32) } else { x.powf(p) };
        }
    }
    m * (sum / included as f64).powf(1.0 / p)
}

/// Pools all three channels of an already-filtered signal.
pub(crate) fn pool(source: &LinearImage, mask: &PixelMask, p: f64) -> Result<IlluminantEstimate> {
    if !mask.matches(source) {
        return Err(Error::InvalidInput(format!(
            "mask is {}x{} but image is {}x{}",
            mask.width(),
            mask.height(),
            source.width(),
            source.height()
        )));
    }
    let flags = mask.flags();
    let included = mask.included_count();
    let e = [0, 1, 2].map(|c| pool_channel(source.plane(c), flags, included, p));
    IlluminantEstimate::new(e[0], e[1], e[2])
}

/// Runs one estimator configuration over an image.
///
/// Deterministic for fixed inputs. Fails with [`Error::ZeroSignal`] when
/// the pooled vector is all zero (e.g. a constant image under `n >= 1`);
/// the caller decides the fallback.
pub fn estimate(
    image: &LinearImage,
    mask: &PixelMask,
    params: ParameterTuple,
) -> Result<IlluminantEstimate> {
    let source = pooled_source(image, &params)?;
    pool(&source, mask, params.p)
}

/// Named-method front end; exactly equal, bit for bit, to [`estimate`] with
/// the corresponding tuple.
pub fn estimate_named(
    image: &LinearImage,
    mask: &PixelMask,
    method: &Method,
) -> Result<IlluminantEstimate> {
    estimate(image, mask, method.params()?)
}
