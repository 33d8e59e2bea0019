//! Planar domains described by their cross-sections with coordinate lines.
//!
//! Each geometry reports, for any horizontal or vertical line, the maximal
//! intervals it cuts out of the domain together with the boundary condition
//! met at each interval end. Intersections are closed-form, so endpoint
//! coordinates are exact to roundoff and end cells may be arbitrarily short.

use crate::error::{Error, Result};

/// Relative coordinate slack for classifying lattice points against the
/// analytic boundary. Scaled by the larger domain extent.
const TOL_REL: f64 = 1e-9;

/// Boundary condition met at one end of a cross-section.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EndTag {
    /// Homogeneous Dirichlet: the value is pinned to zero.
    Dirichlet,
    /// Homogeneous Neumann: the normal derivative vanishes.
    Neumann,
    /// Non-reflecting outflow.
    Outflow,
    /// Periodic identification of the two ends of a full-period line.
    Seam,
}

/// One maximal interval of a coordinate line inside the domain.
#[derive(Clone, Copy, Debug)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
    pub tag_lo: EndTag,
    pub tag_hi: EndTag,
    /// The whole line lies on a flat boundary segment. Such lines exist
    /// wherever boundary values evolve (Neumann walls, outflow rims, the
    /// periodic ends of a strip): sweeping along them supplies the
    /// intermediate field at nodes the crossing family only touches as
    /// endpoints. Dirichlet walls never need them.
    pub on_boundary: bool,
}

impl Span {
    fn both(lo: f64, hi: f64, tag: EndTag) -> Self {
        Span { lo, hi, tag_lo: tag, tag_hi: tag, on_boundary: false }
    }

    fn wall(self) -> Self {
        Span { on_boundary: true, ..self }
    }
}

/// Shape of the computational domain, with per-boundary-piece conditions.
#[derive(Clone, Copy, Debug)]
pub enum Geometry {
    /// `[-lx/2, lx/2] x [-ly/2, ly/2]` with one condition on all four sides.
    Rectangle { lx: f64, ly: f64, bc: EndTag },
    /// Disk of radius `r` centered at the origin, Dirichlet rim.
    Circle { r: f64 },
    /// Union of two radius-`r` disks centered at `(-gamma, 0)` and
    /// `(gamma, 0)`, `gamma < r`, Dirichlet rim.
    DoubleCircle { r: f64, gamma: f64 },
    /// Second-quadrant quarter of a radius-`r` disk: Dirichlet on the arc,
    /// Neumann on the two straight edges along the axes.
    QuarterCircle { r: f64 },
    /// One period of a slit grating: periodic in `x` with period `period`,
    /// outflow at `y = +-height/2`, and a Dirichlet screen at `y = 0`
    /// everywhere except the centered aperture of width `aperture`.
    SlitStrip { period: f64, aperture: f64, height: f64 },
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.into()));
        match *self {
            Geometry::Rectangle { lx, ly, bc } => {
                if !(lx > 0.0 && ly > 0.0) {
                    return bad("rectangle sides must be positive");
                }
                if !matches!(bc, EndTag::Dirichlet | EndTag::Neumann) {
                    return bad("rectangle supports Dirichlet or Neumann sides");
                }
            }
            Geometry::Circle { r } | Geometry::QuarterCircle { r } => {
                if !(r > 0.0) {
                    return bad("radius must be positive");
                }
            }
            Geometry::DoubleCircle { r, gamma } => {
                if !(r > 0.0 && gamma > 0.0 && gamma < r) {
                    return bad("double circle requires 0 < gamma < r");
                }
            }
            Geometry::SlitStrip { period, aperture, height } => {
                if !(period > 0.0 && height > 0.0) {
                    return bad("slit period and height must be positive");
                }
                if !(aperture > 0.0 && aperture < period) {
                    return bad("slit aperture must lie inside one period");
                }
            }
        }
        Ok(())
    }

    /// Bounding box `(x_min, x_max, y_min, y_max)` that the lattice tiles.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        match *self {
            Geometry::Rectangle { lx, ly, .. } => (-0.5 * lx, 0.5 * lx, -0.5 * ly, 0.5 * ly),
            Geometry::Circle { r } => (-r, r, -r, r),
            Geometry::DoubleCircle { r, gamma } => (-(r + gamma), r + gamma, -r, r),
            Geometry::QuarterCircle { r } => (-r, 0.0, 0.0, r),
            Geometry::SlitStrip { period, height, .. } => {
                (-0.5 * period, 0.5 * period, -0.5 * height, 0.5 * height)
            }
        }
    }

    /// Coordinate slack used for all strict interior tests.
    pub fn tol(&self) -> f64 {
        let (x0, x1, y0, y1) = self.bounds();
        TOL_REL * (x1 - x0).max(y1 - y0)
    }

    /// Strict interior predicate, consistent with the analytic boundary.
    pub fn inside(&self, x: f64, y: f64) -> bool {
        match *self {
            Geometry::Rectangle { lx, ly, .. } => {
                x.abs() < 0.5 * lx && y.abs() < 0.5 * ly
            }
            Geometry::Circle { r } => x * x + y * y < r * r,
            Geometry::DoubleCircle { r, gamma } => {
                let ex = x.abs() - gamma;
                ex * ex + y * y < r * r
            }
            Geometry::QuarterCircle { r } => x < 0.0 && y > 0.0 && x * x + y * y < r * r,
            Geometry::SlitStrip { period, aperture, height } => {
                x.abs() < 0.5 * period
                    && y.abs() < 0.5 * height
                    && (y != 0.0 || x.abs() < 0.5 * aperture)
            }
        }
    }

    /// Cross-sections of the horizontal line at height `y`.
    pub fn x_spans(&self, y: f64) -> Vec<Span> {
        let tol = self.tol();
        match *self {
            Geometry::Rectangle { lx, ly, bc } => {
                if y.abs() < 0.5 * ly - tol {
                    vec![Span::both(-0.5 * lx, 0.5 * lx, bc)]
                } else if bc == EndTag::Neumann && (y.abs() - 0.5 * ly).abs() <= tol {
                    vec![Span::both(-0.5 * lx, 0.5 * lx, bc).wall()]
                } else {
                    Vec::new()
                }
            }
            Geometry::Circle { r } => match half_chord(r, y, tol) {
                Some(w) => vec![Span::both(-w, w, EndTag::Dirichlet)],
                None => Vec::new(),
            },
            Geometry::DoubleCircle { r, gamma } => match half_chord(r, y, tol) {
                // Lobes merge while the chord is wider than the center offset.
                Some(w) if w >= gamma => {
                    vec![Span::both(-gamma - w, gamma + w, EndTag::Dirichlet)]
                }
                Some(w) => vec![
                    Span::both(-gamma - w, -gamma + w, EndTag::Dirichlet),
                    Span::both(gamma - w, gamma + w, EndTag::Dirichlet),
                ],
                None => Vec::new(),
            },
            Geometry::QuarterCircle { r } => {
                if y >= -tol && y < r - tol {
                    let w = if y.abs() <= tol { r } else { (r * r - y * y).sqrt() };
                    let span = Span {
                        lo: -w,
                        hi: 0.0,
                        tag_lo: EndTag::Dirichlet,
                        tag_hi: EndTag::Neumann,
                        on_boundary: y.abs() <= tol,
                    };
                    vec![span]
                } else {
                    Vec::new()
                }
            }
            Geometry::SlitStrip { period, aperture, height } => {
                if (y.abs() - 0.5 * height).abs() <= tol {
                    vec![Span::both(-0.5 * period, 0.5 * period, EndTag::Seam).wall()]
                } else if y.abs() >= 0.5 * height - tol {
                    Vec::new()
                } else if y.abs() < tol {
                    // The screen row: only the aperture remains, tipped by
                    // the Dirichlet screen edges.
                    vec![Span::both(-0.5 * aperture, 0.5 * aperture, EndTag::Dirichlet)]
                } else {
                    vec![Span::both(-0.5 * period, 0.5 * period, EndTag::Seam)]
                }
            }
        }
    }

    /// Cross-sections of the vertical line at abscissa `x`.
    pub fn y_spans(&self, x: f64) -> Vec<Span> {
        let tol = self.tol();
        match *self {
            Geometry::Rectangle { lx, ly, bc } => {
                if x.abs() < 0.5 * lx - tol {
                    vec![Span::both(-0.5 * ly, 0.5 * ly, bc)]
                } else if bc == EndTag::Neumann && (x.abs() - 0.5 * lx).abs() <= tol {
                    vec![Span::both(-0.5 * ly, 0.5 * ly, bc).wall()]
                } else {
                    Vec::new()
                }
            }
            Geometry::Circle { r } => match half_chord(r, x, tol) {
                Some(h) => vec![Span::both(-h, h, EndTag::Dirichlet)],
                None => Vec::new(),
            },
            Geometry::DoubleCircle { r, gamma } => {
                // Vertical sections of both disks are centered on y = 0, so
                // their union is the taller of the two.
                match half_chord(r, x.abs() - gamma, tol) {
                    Some(h) if x.abs() < r + gamma - tol => {
                        vec![Span::both(-h, h, EndTag::Dirichlet)]
                    }
                    _ => Vec::new(),
                }
            }
            Geometry::QuarterCircle { r } => {
                if x <= tol && x > -r + tol {
                    let h = if x.abs() <= tol { r } else { (r * r - x * x).sqrt() };
                    let span = Span {
                        lo: 0.0,
                        hi: h,
                        tag_lo: EndTag::Neumann,
                        tag_hi: EndTag::Dirichlet,
                        on_boundary: x.abs() <= tol,
                    };
                    vec![span]
                } else {
                    Vec::new()
                }
            }
            Geometry::SlitStrip { period, aperture, height } => {
                // The left seam column is a real interior column; its image
                // at +period/2 is not enumerated.
                if x < -0.5 * period - tol || x >= 0.5 * period - tol {
                    Vec::new()
                } else if x.abs() < 0.5 * aperture - tol {
                    vec![Span::both(-0.5 * height, 0.5 * height, EndTag::Outflow)]
                } else {
                    // Screen column: split at the screen into two segments
                    // pinned to zero where they meet it.
                    vec![
                        Span {
                            lo: -0.5 * height,
                            hi: 0.0,
                            tag_lo: EndTag::Outflow,
                            tag_hi: EndTag::Dirichlet,
                            on_boundary: false,
                        },
                        Span {
                            lo: 0.0,
                            hi: 0.5 * height,
                            tag_lo: EndTag::Dirichlet,
                            tag_hi: EndTag::Outflow,
                            on_boundary: false,
                        },
                    ]
                }
            }
        }
    }

    /// Whether horizontal lines wrap around (shared seam node at both ends).
    pub fn periodic_x(&self) -> bool {
        matches!(self, Geometry::SlitStrip { .. })
    }
}

/// Half-length of the chord cut at signed offset `d` from a circle center,
/// or `None` when the line misses the circle or grazes it within `tol`.
fn half_chord(r: f64, d: f64, tol: f64) -> Option<f64> {
    let w2 = r * r - d * d;
    if w2 <= tol * tol {
        None
    } else {
        Some(w2.sqrt())
    }
}
