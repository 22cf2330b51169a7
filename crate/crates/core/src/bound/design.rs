use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lti::{realize, shift_register, RationalFilter, StateSpaceSystem};

/// Encoder of the auxiliary loop: produces the channel input `t` from the
/// channel output `r` (used with one sample of delay) and the measurement `y`.
#[derive(Debug, Clone)]
pub enum Encoder {
    /// `t = B_r z^{-1} r + B_y y`.
    Filters { b_r: RationalFilter, b_y: RationalFilter },
    /// Joint realization with inputs `[r, y]` and output `t`; strictly proper in `r`.
    StateSpace(StateSpaceSystem),
}

/// Decoder `J` between the channel output and the (delayed) plant input.
#[derive(Debug, Clone)]
pub enum Decoder {
    Filter(RationalFilter),
    /// SISO realization; must be biproper for the loop to carry the channel noise.
    StateSpace(StateSpaceSystem),
}

impl Decoder {
    pub fn system(&self) -> StateSpaceSystem {
        match self {
            Decoder::Filter(f) => realize(f),
            Decoder::StateSpace(s) => s.clone(),
        }
    }

    pub fn response(&self, w: f64) -> Complex64 {
        match self {
            Decoder::Filter(f) => f.response(w),
            Decoder::StateSpace(s) => s.response(w)[(0, 0)],
        }
    }

    fn scaled(&self, alpha: f64) -> Self {
        match self {
            Decoder::Filter(f) => Decoder::Filter(f.scaled(alpha)),
            Decoder::StateSpace(s) => Decoder::StateSpace(s.scaled(alpha)),
        }
    }
}

impl From<RationalFilter> for Decoder {
    fn from(f: RationalFilter) -> Self {
        Decoder::Filter(f)
    }
}

impl From<StateSpaceSystem> for Decoder {
    fn from(s: StateSpaceSystem) -> Self {
        Decoder::StateSpace(s)
    }
}

/// Linear coding scheme around an AWGN channel `r = t + η` whose output
/// reaches the plant through the decoder `J` after `h` samples.
#[derive(Debug, Clone)]
pub struct LoopDesign {
    pub encoder: Encoder,
    pub j: Decoder,
    pub sigma_eta_sq: f64,
    pub h: usize,
}

impl LoopDesign {
    pub fn from_filters(
        b_r: RationalFilter,
        b_y: RationalFilter,
        j: RationalFilter,
        sigma_eta_sq: f64,
        h: usize,
    ) -> Result<Self> {
        check_variance(sigma_eta_sq)?;
        Ok(Self { encoder: Encoder::Filters { b_r, b_y }, j: j.into(), sigma_eta_sq, h })
    }

    pub fn from_encoder(
        encoder: StateSpaceSystem,
        j: impl Into<Decoder>,
        sigma_eta_sq: f64,
        h: usize,
    ) -> Result<Self> {
        let j = j.into();
        if let Decoder::StateSpace(s) = &j {
            if s.n_inputs() != 1 || s.n_outputs() != 1 {
                return Err(Error::Dimension("decoder must be SISO".into()));
            }
        }
        check_variance(sigma_eta_sq)?;
        if encoder.n_inputs() != 2 || encoder.n_outputs() != 1 {
            return Err(Error::Dimension("encoder must map [r, y] to t".into()));
        }
        if encoder.d[(0, 0)] != 0.0 {
            return Err(Error::InvalidArgument("encoder must not feed r through instantaneously".into()));
        }
        Ok(Self { encoder: Encoder::StateSpace(encoder), j, sigma_eta_sq, h })
    }

    /// Realization with inputs `[r, y]` and output `t`.
    pub fn encoder_system(&self) -> StateSpaceSystem {
        match &self.encoder {
            Encoder::StateSpace(s) => s.clone(),
            Encoder::Filters { b_r, b_y } => {
                let br = shift_register(1, 1).series(&realize(b_r)).expect("SISO cascade");
                br.append_inputs(&realize(b_y)).expect("SISO blocks")
            }
        }
    }

    /// `J z^{-h}` from `r` to the plant input.
    pub fn decoder_system(&self) -> StateSpaceSystem {
        self.j.system().delay_inputs(self.h)
    }

    /// `(B_y, J, σ_η²) -> (α B_y, J/α, α² σ_η²)`; leaves SNR and output variance unchanged.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        if alpha == 0.0 || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("scale {alpha} must be finite and nonzero")));
        }
        let encoder = match &self.encoder {
            Encoder::Filters { b_r, b_y } => Encoder::Filters { b_r: b_r.clone(), b_y: b_y.scaled(alpha) },
            Encoder::StateSpace(s) => {
                let mut s = s.clone();
                s.b.column_mut(1).scale_mut(alpha);
                s.d.column_mut(1).scale_mut(alpha);
                Encoder::StateSpace(s)
            }
        };
        Ok(Self { encoder, j: self.j.scaled(1.0 / alpha), sigma_eta_sq: self.sigma_eta_sq * alpha * alpha, h: self.h })
    }
}

fn check_variance(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("noise variance {v} must be positive and finite")))
    }
}
