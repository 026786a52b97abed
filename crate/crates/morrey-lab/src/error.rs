use crate::geometry::Ball;

/// Errors are structural facts about the mathematics (a divergent integral,
/// an inadmissible parameter set), never silent NaNs.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("empty ball family: {0}")]
    EmptyFamily(String),

    #[error("integrand diverges at the origin: local exponent {exponent} <= -1 on a ball containing 0")]
    DivergenceAtOrigin { exponent: f64 },

    #[error("non-integrable tail: exponent {exponent} >= -1 beyond |x| = {from}")]
    TailDivergence { exponent: f64, from: f64 },

    #[error("operator undefined at the origin")]
    UndefinedAtOrigin,

    #[error("dual-exponent integral diverges: w^(1-p') is not locally integrable (exponent {exponent})")]
    DualDivergence { exponent: f64 },

    #[error("inadmissible space parameters: {0}")]
    Admissibility(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("all dual candidates degenerate for this instance")]
    DegenerateCandidates,

    #[error("quadrature did not reach the requested tolerance on [{lo}, {hi}] (best relative error {err:.3e})")]
    Tolerance { lo: f64, hi: f64, err: f64 },

    #[error("invalid ball: center {center}, radius {radius}")]
    BadBall { center: f64, radius: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("regime not covered by a closed form: {0}")]
    RegimeNotCovered(String),
}

impl Error {
    pub fn bad_ball(b: Ball) -> Self {
        Error::BadBall { center: b.center, radius: b.radius }
    }

    /// True for errors that state "this exact integral is +infinity", which
    /// supremum-type sweeps fold into the value instead of propagating: a
    /// divergent per-ball integral means the constant is infinite, not that
    /// the computation broke.
    pub fn is_structural_infinity(&self) -> bool {
        matches!(
            self,
            Error::DivergenceAtOrigin { .. }
                | Error::TailDivergence { .. }
                | Error::DualDivergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
