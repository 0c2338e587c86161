//! Asian option pricing under local volatility models through
//! most-likely-path small-time asymptotics.
//!
//! For a diffusion `dS = a(S,t) dW`, the price of an out-of-the-money
//! arithmetic Asian call concentrates, as expiry shrinks, around a single
//! optimal trajectory: the path of least energy `1/2 ∫ (ṡ/a)² dt` among
//! those whose running average hits the strike. Solving that variational
//! problem yields a leading-order implied normal volatility, and from it
//! fast approximate prices and Greeks that this crate validates against
//! closed forms and a Monte Carlo oracle.
//!
//! Module map:
//!
//! * [`model`]: the local volatility family, its partials and the
//!   Lamperti transform.
//! * [`continuous`]: closed-form and fixed-point solvers for the
//!   most-likely path, the rate functional and the Euler-Lagrange
//!   residual check.
//! * [`discrete`]: the n-fixing constrained minimizer with tridiagonal
//!   Newton-KKT steps and the convexity certificate.
//! * [`bachelier`]: closed-form normal Asian prices, the implied-vol
//!   inversion and small-time diagnostics.
//! * [`pricer`]: σ_b,0, the drift-adjusted benchmark price and
//!   approximate Greeks.
//! * [`mc`]: the reproducible Euler-Maruyama oracle.
//!
//! ```
//! use asian_mlp::model::{ModelKind, ModelSpec};
//! use asian_mlp::pricer::price_asian;
//!
//! let model = ModelSpec::new(ModelKind::BlackScholes { sigma: 0.1 }, 2.0).unwrap();
//! let report = price_asian(&model, 2.0, 1.0, 0.02, 0.0).unwrap();
//! assert!((report.price - 0.056042).abs() < 1e-5);
//! ```

pub mod bachelier;
pub mod continuous;
pub mod discrete;
pub mod error;
mod linalg;
pub mod mc;
pub mod model;
mod numerics;
pub mod pricer;

pub use bachelier::{Monitoring, VolQuote};
pub use continuous::{FixedPointConfig, FixedPointReport, MlpMethod, MlpPath};
pub use discrete::{ConvexityCertificate, DiscreteMlp};
pub use error::{Error, Result};
pub use mc::{McConfig, McEstimate, SmileTable};
pub use model::{ModelDiagnostics, ModelKind, ModelSpec, TimeWeight};
pub use pricer::{GreeksReport, PriceReport};
