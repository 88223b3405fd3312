//! Ohmic dephasing baths: decay rates, their time integrals, the bath-induced
//! phase, and the decoherence factors at the measurement instant.
//!
//! Units: `ħ = k_B = 1`, frequencies in units of the qubit frequency `ω₀`,
//! times in units of `1/ω₀`. The spectral density is
//! `J(ω) = γ ω e^{-ω/Λ}`.
//!
//! Every quantity has two backends. The closed forms hold for the Ohmic bath
//! at zero temperature; the quadrature backend integrates over frequency and
//! handles any temperature. Time integrals are carried out analytically under
//! the frequency integral:
//!
//! * `∫₀^τ B(t) dt = 4 ∫ J(ω) coth(ω/2T) (1 − cos ωτ)/ω² dω`
//! * `Φ(τ) = 4 ∫₀^τ ∫ J(ω)(1 − cos ωt)/ω dω dt = 4 ∫ J(ω)/ω (τ − sin(ωτ)/ω) dω`

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qlinalg::{c, C64};
use crate::quadrature::{integrate_adaptive, QuadOptions};

/// Description of one wing's dephasing bath.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Dimensionless system–bath coupling `γ`.
    pub gamma: f64,
    /// Cutoff frequency `Λ`.
    pub lambda_c: f64,
    /// Bath temperature; 0 selects the zero-temperature closed forms.
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "one")]
    pub omega0: f64,
}

fn one() -> f64 {
    1.0
}

impl NoiseParams {
    pub fn new(gamma: f64, lambda_c: f64, temperature: f64) -> Result<Self> {
        let p = Self {
            gamma,
            lambda_c,
            temperature,
            omega0: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// Zero-temperature bath.
    pub fn ohmic(gamma: f64, lambda_c: f64) -> Result<Self> {
        Self::new(gamma, lambda_c, 0.0)
    }

    /// Coupling-free bath: pure free precession.
    pub fn noiseless() -> Self {
        Self {
            gamma: 0.0,
            lambda_c: 1.0,
            temperature: 0.0,
            omega0: 1.0,
        }
    }

    /// Default for Alice's common bath when none is given.
    pub fn default_alice() -> Self {
        Self {
            gamma: 0.1,
            lambda_c: 0.1,
            temperature: 0.0,
            omega0: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.gamma, self.lambda_c, self.temperature, self.omega0]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument(
                "noise parameters must be finite".into(),
            ));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "coupling gamma {} < 0",
                self.gamma
            )));
        }
        if self.lambda_c <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "cutoff {} must be > 0",
                self.lambda_c
            )));
        }
        if self.temperature < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "temperature {} < 0",
                self.temperature
            )));
        }
        if self.omega0 <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "omega0 {} must be > 0",
                self.omega0
            )));
        }
        Ok(())
    }

    pub fn spectral_density(&self, omega: f64) -> f64 {
        self.gamma * omega * (-omega / self.lambda_c).exp()
    }

    fn is_zero_temperature(&self) -> bool {
        self.temperature == 0.0
    }
}

/// Which evaluation route to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Closed form at zero temperature, quadrature otherwise.
    #[default]
    Auto,
    ClosedForm,
    Quadrature,
}

impl Backend {
    fn use_closed_form(self, params: &NoiseParams) -> Result<bool> {
        match self {
            Backend::Auto => Ok(params.is_zero_temperature()),
            Backend::Quadrature => Ok(false),
            Backend::ClosedForm if params.is_zero_temperature() => Ok(true),
            Backend::ClosedForm => Err(Error::InvalidArgument(
                "closed forms exist only at zero temperature".into(),
            )),
        }
    }
}

/// Complex factors multiplying the coherences at the measurement instant.
///
/// `f`, `g` and `a` belong to Alice's common bath (single-flip,
/// single-flip conjugate partner, and double-flip coherences); `b` to Bob's.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecoherenceFactors {
    pub f: C64,
    pub g: C64,
    pub a: C64,
    pub b: C64,
    pub tau: f64,
}

impl DecoherenceFactors {
    /// Free precession on both wings.
    pub fn noiseless(tau: f64) -> Self {
        Self {
            f: C64::from_polar(1.0, -tau),
            g: C64::from_polar(1.0, tau),
            a: C64::from_polar(1.0, -2.0 * tau),
            b: C64::from_polar(1.0, -tau),
            tau,
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "time {t} must be finite and >= 0"
        )));
    }
    Ok(())
}

/// `coth(ω/2T)`, or 1 at zero temperature.
fn thermal_weight(omega: f64, temperature: f64) -> f64 {
    if temperature == 0.0 {
        return 1.0;
    }
    let x = omega / (2.0 * temperature);
    if x < 1e-4 {
        1.0 / x + x / 3.0
    } else if x > 20.0 {
        1.0
    } else {
        1.0 / x.tanh()
    }
}

fn quad_options() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-300,
        rel_tol: 1e-11,
        max_intervals: 200_000,
    }
}

/// Frequency grid `[0, ω_max]` cut into panels no wider than one period of
/// the time oscillation and no wider than the cutoff.
fn frequency_panels(params: &NoiseParams, t: f64) -> Vec<f64> {
    let lam = params.lambda_c;
    let omega_max = if t > 0.0 {
        (40.0 * lam).max(40.0 / t)
    } else {
        40.0 * lam
    };
    let mut width = lam;
    if t > 0.0 {
        width = width.min(std::f64::consts::TAU / t);
    }
    let n = ((omega_max / width).ceil() as usize).clamp(1, 100_000);
    (0..=n).map(|k| omega_max * k as f64 / n as f64).collect()
}

/// `4 ∫ J(ω) coth(ω/2T) sin(ωt)/ω dω`, the time-dependent dephasing rate.
pub fn decay_rate(params: &NoiseParams, t: f64) -> Result<f64> {
    decay_rate_with(params, t, Backend::Auto)
}

pub fn decay_rate_with(params: &NoiseParams, t: f64, backend: Backend) -> Result<f64> {
    params.validate()?;
    check_time(t)?;
    if t == 0.0 || params.gamma == 0.0 {
        return Ok(0.0);
    }
    if backend.use_closed_form(params)? {
        let l2 = params.lambda_c * params.lambda_c;
        return Ok(4.0 * params.gamma * l2 * t / (1.0 + l2 * t * t));
    }
    let temp = params.temperature;
    let integrand = |w: f64| {
        if w == 0.0 {
            // J(ω)coth(ω/2T)sin(ωt)/ω → γ·2T·t (or 0 at T = 0)
            return if temp > 0.0 {
                params.gamma * 2.0 * temp * t
            } else {
                0.0
            };
        }
        params.gamma * (-w / params.lambda_c).exp() * thermal_weight(w, temp) * (w * t).sin()
    };
    let r = integrate_adaptive(integrand, &frequency_panels(params, t), quad_options())?;
    Ok(4.0 * r.value)
}

/// `∫₀^τ B(t) dt`; equals `2γ ln(1 + Λ²τ²)` for the zero-temperature bath.
pub fn cumulative_decay(params: &NoiseParams, tau: f64) -> Result<f64> {
    cumulative_decay_with(params, tau, Backend::Auto)
}

pub fn cumulative_decay_with(params: &NoiseParams, tau: f64, backend: Backend) -> Result<f64> {
    params.validate()?;
    check_time(tau)?;
    if tau == 0.0 || params.gamma == 0.0 {
        return Ok(0.0);
    }
    if backend.use_closed_form(params)? {
        let x = params.lambda_c * tau;
        return Ok(2.0 * params.gamma * (x * x).ln_1p());
    }
    let temp = params.temperature;
    let integrand = |w: f64| {
        if w == 0.0 {
            return if temp > 0.0 {
                params.gamma * temp * tau * tau
            } else {
                0.0
            };
        }
        let s = (0.5 * w * tau).sin();
        // J(ω)/ω² · (1 − cos ωτ) = γ e^{-ω/Λ} · 2 sin²(ωτ/2) / ω
        params.gamma * (-w / params.lambda_c).exp() * thermal_weight(w, temp) * 2.0 * s * s / w
    };
    let r = integrate_adaptive(integrand, &frequency_panels(params, tau), quad_options())?;
    Ok(4.0 * r.value)
}

/// Accumulated bath-induced phase `Φ(τ)`; temperature independent.
/// Closed form `4γ(Λτ − arctan Λτ)`.
pub fn phase_integral(params: &NoiseParams, tau: f64) -> Result<f64> {
    phase_integral_with(params, tau, Backend::Auto)
}

pub fn phase_integral_with(params: &NoiseParams, tau: f64, backend: Backend) -> Result<f64> {
    params.validate()?;
    check_time(tau)?;
    if tau == 0.0 || params.gamma == 0.0 {
        return Ok(0.0);
    }
    // The phase carries no thermal weight, so the closed form holds at any T
    // unless quadrature is explicitly requested.
    if backend != Backend::Quadrature {
        let x = params.lambda_c * tau;
        let core = if x < 1e-3 {
            // x − atan x = x³/3 − x⁵/5 + x⁷/7 − …
            let x2 = x * x;
            x * x2 * (1.0 / 3.0 - x2 / 5.0 + x2 * x2 / 7.0)
        } else {
            x - x.atan()
        };
        return Ok(4.0 * params.gamma * core);
    }
    let integrand = |w: f64| {
        let x = w * tau;
        // τ − sin(ωτ)/ω = τ·(1 − sinc(x))
        let one_minus_sinc = if x < 1e-3 {
            let x2 = x * x;
            x2 / 6.0 - x2 * x2 / 120.0
        } else {
            1.0 - x.sin() / x
        };
        params.gamma * (-w / params.lambda_c).exp() * tau * one_minus_sinc
    };
    let r = integrate_adaptive(integrand, &frequency_panels(params, tau), quad_options())?;
    Ok(4.0 * r.value)
}

/// Decoherence factors for Alice's common bath and Bob's local bath at `τ`.
pub fn factors_at(alice: &NoiseParams, bob: &NoiseParams, tau: f64) -> Result<DecoherenceFactors> {
    factors_at_with(alice, bob, tau, Backend::Auto)
}

pub fn factors_at_with(
    alice: &NoiseParams,
    bob: &NoiseParams,
    tau: f64,
    backend: Backend,
) -> Result<DecoherenceFactors> {
    let decay_a = cumulative_decay_with(alice, tau, backend)?;
    let phase_a = phase_integral_with(alice, tau, backend)?;
    let wa = alice.omega0;
    // 4∫α dt = ∫A dt − iΦ
    let f = (c(-decay_a, phase_a - wa * tau)).exp();
    let g = (c(-decay_a, phase_a + wa * tau)).exp();
    let a = (c(-4.0 * decay_a, -2.0 * wa * tau)).exp();
    Ok(DecoherenceFactors {
        f,
        g,
        a,
        b: bob_factor_with(bob, tau, backend)?,
        tau,
    })
}

/// `b_τ = exp(−iω₀τ − ∫₀^τ B dt)`.
pub fn bob_factor(bob: &NoiseParams, tau: f64) -> Result<C64> {
    bob_factor_with(bob, tau, Backend::Auto)
}

pub fn bob_factor_with(bob: &NoiseParams, tau: f64, backend: Backend) -> Result<C64> {
    let decay = cumulative_decay_with(bob, tau, backend)?;
    Ok(c(-decay, -bob.omega0 * tau).exp())
}
