//! Discounted buyer/seller payoff pairs.
//!
//! A game option pays the buyer `f(τ, S_τ)` when the buyer exercises first
//! (ties included) and `g(γ, S_γ)` when the seller cancels first, with
//! `g ≥ f`. Both are functions of time and the *discounted* spot.
//!
//! Two discounting conventions are supported for the built-in kinds, with
//! `φ` the call or put intrinsic value:
//! - [`Convention::UndiscountedStrike`]: `f(t, s) = e^{-rt} φ(e^{rt} s)`, i.e.
//!   the undiscounted price is compared against the strike. This is the default.
//! - [`Convention::Literal`]: `f(t, s) = e^{-rt} φ(s)`.
//!
//! In both cases `g = f + e^{-rt} δ`. American kinds carry no cancellation
//! right, represented by `g = None` rather than an infinite payoff.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

type PayoffFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    #[default]
    UndiscountedStrike,
    Literal,
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::UndiscountedStrike => "undiscounted_strike",
            Convention::Literal => "literal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffKind {
    GameCall,
    GamePut,
    AmericanCall,
    AmericanPut,
    Custom,
}

impl PayoffKind {
    fn is_call(self) -> bool {
        matches!(self, PayoffKind::GameCall | PayoffKind::AmericanCall)
    }

    fn is_american(self) -> bool {
        matches!(self, PayoffKind::AmericanCall | PayoffKind::AmericanPut)
    }
}

/// Parameters of a built-in payoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffSpec {
    pub kind: PayoffKind,
    pub strike: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
    pub rate: f64,
    pub maturity: f64,
    #[serde(default)]
    pub convention: Convention,
}

impl PayoffSpec {
    pub fn game_call(strike: f64, penalty: f64, rate: f64, maturity: f64) -> Self {
        Self {
            kind: PayoffKind::GameCall,
            strike,
            penalty: Some(penalty),
            rate,
            maturity,
            convention: Convention::default(),
        }
    }

    pub fn game_put(strike: f64, penalty: f64, rate: f64, maturity: f64) -> Self {
        Self {
            kind: PayoffKind::GamePut,
            ..Self::game_call(strike, penalty, rate, maturity)
        }
    }

    pub fn american_call(strike: f64, rate: f64, maturity: f64) -> Self {
        Self {
            kind: PayoffKind::AmericanCall,
            penalty: None,
            ..Self::game_call(strike, 0.0, rate, maturity)
        }
    }

    pub fn american_put(strike: f64, rate: f64, maturity: f64) -> Self {
        Self {
            kind: PayoffKind::AmericanPut,
            penalty: None,
            ..Self::game_call(strike, 0.0, rate, maturity)
        }
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }

    pub fn with_penalty(mut self, penalty: f64) -> Self {
        self.penalty = Some(penalty);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0) || !self.strike.is_finite() {
            return invalid(format!("strike must be positive, got {}", self.strike));
        }
        if !(self.maturity > 0.0) || !self.maturity.is_finite() {
            return invalid(format!("maturity must be positive, got {}", self.maturity));
        }
        if !(self.rate >= 0.0) || !self.rate.is_finite() {
            return invalid(format!("rate must be non-negative, got {}", self.rate));
        }
        match (self.kind, self.penalty) {
            (PayoffKind::Custom, _) => invalid("custom payoffs are built with GamePayoff::custom"),
            (k, Some(_)) if k.is_american() => invalid("american payoffs take no penalty"),
            (k, None) if !k.is_american() => invalid("game payoffs require a penalty"),
            (_, Some(d)) if !(d >= 0.0) || !d.is_finite() => invalid(format!("penalty must be non-negative, got {d}")),
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> Result<GamePayoff> {
        self.validate()?;
        let (k, r, conv, call) = (self.strike, self.rate, self.convention, self.kind.is_call());
        let intrinsic = move |x: f64| if call { (x - k).max(0.0) } else { (k - x).max(0.0) };
        let buyer = move |t: f64, s: f64| {
            let df = (-r * t).exp();
            match conv {
                Convention::UndiscountedStrike => df * intrinsic(s / df),
                Convention::Literal => df * intrinsic(s),
            }
        };
        let buyer: Arc<PayoffFn> = Arc::new(buyer);
        let seller: Option<Arc<PayoffFn>> = match self.penalty {
            Some(delta) if !self.kind.is_american() => {
                let b = Arc::clone(&buyer);
                Some(Arc::new(move |t: f64, s: f64| b(t, s) + (-r * t).exp() * delta))
            }
            _ => None,
        };
        Ok(GamePayoff {
            buyer,
            seller,
            maturity: self.maturity,
            rate: r,
            convention: conv,
            kind: self.kind,
            strike: Some(k),
        })
    }
}

/// The pair `(f, g)` with its horizon and discount rate.
#[derive(Clone)]
pub struct GamePayoff {
    buyer: Arc<PayoffFn>,
    seller: Option<Arc<PayoffFn>>,
    maturity: f64,
    rate: f64,
    convention: Convention,
    kind: PayoffKind,
    strike: Option<f64>,
}

impl fmt::Debug for GamePayoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GamePayoff")
            .field("kind", &self.kind)
            .field("maturity", &self.maturity)
            .field("rate", &self.rate)
            .field("convention", &self.convention)
            .field("cancellable", &self.seller.is_some())
            .finish()
    }
}

impl GamePayoff {
    /// A payoff from two callables of `(t, discounted spot)`. Passing
    /// `seller = None` gives an American-style claim. The caller promises
    /// `g ≥ f`; the solver re-checks it at every node it touches.
    pub fn custom<F, G>(buyer: F, seller: Option<G>, maturity: f64, rate: f64) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        if !(maturity > 0.0) || !maturity.is_finite() {
            return invalid(format!("maturity must be positive, got {maturity}"));
        }
        if !(rate >= 0.0) || !rate.is_finite() {
            return invalid(format!("rate must be non-negative, got {rate}"));
        }
        Ok(Self {
            buyer: Arc::new(buyer),
            seller: seller.map(|g| Arc::new(g) as Arc<PayoffFn>),
            maturity,
            rate,
            convention: Convention::Literal,
            kind: PayoffKind::Custom,
            strike: None,
        })
    }

    /// Buyer payoff `f(t, s)`.
    #[inline]
    pub fn f(&self, t: f64, s: f64) -> f64 {
        (self.buyer)(t, s)
    }

    /// Seller payoff `g(t, s)`, or `None` when the seller cannot cancel.
    #[inline]
    pub fn g(&self, t: f64, s: f64) -> Option<f64> {
        self.seller.as_ref().map(|g| g(t, s))
    }

    pub fn is_cancellable(&self) -> bool {
        self.seller.is_some()
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn kind(&self) -> PayoffKind {
        self.kind
    }

    /// Strike of a built-in payoff.
    pub fn strike(&self) -> Option<f64> {
        self.strike
    }

    /// Payment `H(γ, τ)` when the seller stops at `gamma`, the buyer at `tau`
    /// and the discounted spot at `min(gamma, tau)` is `s`. Ties go to the buyer.
    pub fn evaluate_kernel(&self, gamma: f64, tau: f64, s: f64) -> Result<f64> {
        if gamma < tau {
            self.g(gamma, s)
                .ok_or_else(|| Error::Validation("seller cannot cancel a payoff without cancellation right".into()))
        } else {
            Ok(self.f(tau, s))
        }
    }
}
