//! Small-substitutability expansion of the noiseless duopoly.
//!
//! Values are approximated as `V_i = v_M(x_i) + gamma v1 + gamma^2 v2_i`.
//! Both corrections solve transport equations along the monopoly depletion
//! characteristics and are written in terms of the sell-out time
//! `Q(x)` of [`MonopolyModel::big_q`].
//!
//! Two second-order corrections are available. [`SecondOrder::Published`]
//! is the classical closed form; it solves a transport equation whose
//! source carries an extra `-(3/(2 beta)) q_i^2` term, so the full expansion
//! leaves an O(gamma^2) residual in the value equations.
//! [`SecondOrder::Consistent`] adds the particular solution that cancels
//! that term, which brings the residual down to O(gamma^3).

use crate::demand::{GreekParams, LevelCoefficients};
use crate::equilibrium::solve_duopoly_levels;
use crate::error::{Error, Result};
use crate::monopoly::MonopolyModel;
use crate::Firm;

/// Step for the centered differences of the corrections.
pub const DIFF_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondOrder {
    Published,
    Consistent,
}

/// First-order correction, shared by both firms.
pub fn v1_correction(m: &MonopolyModel, x1: f64, x2: f64) -> f64 {
    let (hi, lo) = if x1 >= x2 { (x1, x2) } else { (x2, x1) };
    if lo <= 0.0 {
        return 0.0;
    }
    let r = m.r();
    let (q1, q2) = (m.big_q(hi), m.big_q(lo));
    let k = m.alpha() * m.alpha() / (4.0 * m.beta() * m.beta() * r);
    let (e1, e2) = ((-r * q1).exp(), (-r * q2).exp());
    k * (e2 * (1.0 + r * q2) - e1 * (1.0 - r * q2) + e1 * e2 - 1.0)
}

/// Classical second-order correction of `firm`.
pub fn v2_correction(m: &MonopolyModel, x1: f64, x2: f64, firm: Firm) -> f64 {
    match firm {
        Firm::One => v2_published_own(m, x1, x2),
        Firm::Two => v2_published_own(m, x2, x1),
    }
}

/// Second-order correction consistent with the full value equations.
pub fn v2_consistent(m: &MonopolyModel, x1: f64, x2: f64, firm: Firm) -> f64 {
    let (own, rival) = match firm {
        Firm::One => (x1, x2),
        Firm::Two => (x2, x1),
    };
    v2_published_own(m, own, rival) + source_fix(m, own, rival)
}

pub fn v2_of(form: SecondOrder, m: &MonopolyModel, x1: f64, x2: f64, firm: Firm) -> f64 {
    match form {
        SecondOrder::Published => v2_correction(m, x1, x2, firm),
        SecondOrder::Consistent => v2_consistent(m, x1, x2, firm),
    }
}

/// Published closed form for the firm whose capacity is `own`.
fn v2_published_own(m: &MonopolyModel, own: f64, rival: f64) -> f64 {
    if own <= 0.0 || rival <= 0.0 {
        return 0.0;
    }
    let r = m.r();
    let c = m.alpha() * m.alpha() / (8.0 * m.beta().powi(3));
    let (qo, qr) = (m.big_q(own), m.big_q(rival));
    if own >= rival {
        let ph = (-r * (qo - qr)).exp();
        let e2 = (r * qr).exp();
        let e2m1 = (r * qr).exp_m1();
        let d = -(-r * qo).exp_m1();
        let br = -0.5 * qr * qr * (2.0 * r * e2 / e2m1 + r * ph / d) - qr * (1.0 - ph) / d
            + 1.5 / r * e2m1
            - (1.0 - ph).powi(2) / (2.0 * r * e2 * d)
            + (1.0 - ph) / (2.0 * r)
            - 3.0 / r * (e2m1 - ph * ph / e2 + ph * ph - 2.0 * ph * r * qr);
        c / e2 * br
    } else {
        let ph = (-r * (qr - qo)).exp();
        let e1 = (r * qo).exp();
        let e1m1 = (r * qo).exp_m1();
        let d = -(-r * qr).exp_m1();
        let br = -0.5 * qo * qo * (r * e1 / e1m1 + 2.0 * r * ph / d) - 2.0 * qo * (1.0 - ph) / d
            + 1.5 / r * e1m1
            - (1.0 - ph).powi(2) / (r * e1 * d)
            + (1.0 - ph) / r
            - 3.0 / r * (e1m1 - 2.0 * r * qo + 1.0 - 1.0 / e1);
        c / e1 * br
    }
}

/// Zero-boundary solution of `q1 z_1 + q2 z_2 + r z = (3/(2 beta)) q_own^2`.
fn source_fix(m: &MonopolyModel, own: f64, rival: f64) -> f64 {
    if own <= 0.0 || rival <= 0.0 {
        return 0.0;
    }
    let r = m.r();
    let c = 3.0 * m.alpha() * m.alpha() / (8.0 * m.beta().powi(3));
    let (xi, eta) = (m.big_q(own), m.big_q(rival));
    let exi = (-r * xi).exp();
    if xi >= eta {
        c * (-(-r * eta).exp_m1() / r - 2.0 * eta * exi + exi * exi * (r * eta).exp_m1() / r)
    } else {
        c * (-(-r * xi).exp_m1() / r - 2.0 * xi * exi + exi * (1.0 - exi) / r)
    }
}

/// Partial derivative by centered differences, one-sided near zero capacity.
fn partial(f: impl Fn(f64, f64) -> f64, x1: f64, x2: f64, axis: usize, h: f64) -> f64 {
    let at = |t: f64| if axis == 0 { f(x1 + t, x2) } else { f(x1, x2 + t) };
    let coord = if axis == 0 { x1 } else { x2 };
    if coord >= h {
        (at(h) - at(-h)) / (2.0 * h)
    } else {
        (-3.0 * at(0.0) + 4.0 * at(h) - at(2.0 * h)) / (2.0 * h)
    }
}

/// Residual of the first-order transport equation
/// `q1 v1_x1 + q2 v1_x2 + r v1 = -q1 q2`.
pub fn first_order_residual(m: &MonopolyModel, x1: f64, x2: f64, h: f64) -> f64 {
    let f = |a: f64, b: f64| v1_correction(m, a, b);
    let (q1, q2) = (m.q(x1), m.q(x2));
    q1 * partial(f, x1, x2, 0, h) + q2 * partial(f, x1, x2, 1, h) + m.r() * f(x1, x2) + q1 * q2
}

/// Residual of the second-order transport equation of `firm`. The published
/// form is checked against the published source term, the consistent form
/// against the source obtained from the exact expansion.
pub fn second_order_residual(
    m: &MonopolyModel,
    x1: f64,
    x2: f64,
    firm: Firm,
    form: SecondOrder,
    h: f64,
) -> f64 {
    let f = |a: f64, b: f64| v2_of(form, m, a, b, firm);
    let v1 = |a: f64, b: f64| v1_correction(m, a, b);
    let (i, j) = (firm.index(), firm.other().index());
    let q = [m.q(x1), m.q(x2)];
    let lhs = q[0] * partial(f, x1, x2, 0, h) + q[1] * partial(f, x1, x2, 1, h) + m.r() * f(x1, x2);
    let b = m.beta();
    let dj = partial(v1, x1, x2, j, h);
    let di = partial(v1, x1, x2, i, h);
    let mut rhs = (dj + q[i]).powi(2) / (2.0 * b) + (di + q[j]).powi(2) / (4.0 * b);
    if form == SecondOrder::Published {
        rhs -= 1.5 / b * q[i] * q[i];
    }
    lhs - rhs
}

/// Expansion evaluated at one state. Index 0 is firm 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionPoint {
    /// Shadow-cost terms `[s0, s1, s2]` of each firm.
    pub shadow: [[f64; 3]; 2],
    pub prices: [f64; 2],
    pub demands: [f64; 2],
    pub values: [f64; 2],
}

/// Expansion of the noiseless duopoly at a fixed gamma.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    model: MonopolyModel,
    gamma: f64,
    form: SecondOrder,
    ladder: LevelCoefficients,
}

impl Expansion {
    pub fn new(model: MonopolyModel, gamma: f64, form: SecondOrder) -> Result<Self> {
        let g = GreekParams::new(model.alpha(), model.beta(), gamma)?;
        Ok(Self { model, gamma, form, ladder: LevelCoefficients::from_greek(&g, 2)? })
    }

    pub fn model(&self) -> &MonopolyModel {
        &self.model
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn form(&self) -> SecondOrder {
        self.form
    }

    pub fn greek(&self) -> GreekParams {
        GreekParams::new(self.model.alpha(), self.model.beta(), self.gamma)
            .expect("validated on construction")
    }

    /// `v_M(x_i) + gamma v1 + gamma^2 v2_i`, truncated after `order` (0, 1 or 2).
    pub fn value(&self, x1: f64, x2: f64, firm: Firm, order: usize) -> f64 {
        let m = &self.model;
        let own = [x1, x2][firm.index()];
        let mut v = m.value(own);
        if order >= 1 {
            v += self.gamma * v1_correction(m, x1, x2);
        }
        if order >= 2 {
            v += self.gamma * self.gamma * v2_of(self.form, m, x1, x2, firm);
        }
        v
    }

    /// Shadow-cost terms `[s0, s1, s2]` of `firm`.
    pub fn shadow_terms(&self, x1: f64, x2: f64, firm: Firm) -> [f64; 3] {
        let m = &self.model;
        let (i, j) = (firm.index(), firm.other().index());
        let h = DIFF_STEP;
        let v1 = |a: f64, b: f64| v1_correction(m, a, b);
        let v2 = |a: f64, b: f64| v2_of(self.form, m, a, b, firm);
        [
            m.marginal_value([x1, x2][i]),
            partial(v1, x1, x2, i, h),
            partial(v2, x1, x2, i, h) - partial(v1, x1, x2, j, h) / m.beta(),
        ]
    }

    /// Shadow cost truncated after `order`.
    pub fn shadow_cost(&self, x1: f64, x2: f64, firm: Firm, order: usize) -> f64 {
        let s = self.shadow_terms(x1, x2, firm);
        let g = self.gamma;
        let mut out = s[0];
        if order >= 1 {
            out += g * s[1];
        }
        if order >= 2 {
            out += g * g * s[2];
        }
        out
    }

    /// Price and demand power series truncated after `order`.
    pub fn series(&self, x1: f64, x2: f64, order: usize) -> ExpansionPoint {
        let (a, b, g) = (self.model.alpha(), self.model.beta(), self.gamma);
        let s = [self.shadow_terms(x1, x2, Firm::One), self.shadow_terms(x1, x2, Firm::Two)];
        let pm = |x: f64| 0.5 * (a + x);
        let dm = |x: f64| (a - x) / (2.0 * b);
        let mut prices = [0.0; 2];
        let mut demands = [0.0; 2];
        for i in 0..2 {
            let j = 1 - i;
            let (si, sj) = (s[i], s[j]);
            let mut p = pm(si[0]);
            let mut d = dm(si[0]);
            if order >= 1 {
                p -= 0.5 * g * dm(sj[0] + 2.0 * b * si[1]);
                d -= g / (2.0 * b) * dm(sj[0] - 2.0 * b * si[1]);
            }
            if order >= 2 {
                p -= g * g / (4.0 * b) * dm(si[0] + 2.0 * b * sj[1] + 4.0 * b * b * si[2]);
                d += 3.0 * g * g / (4.0 * b * b)
                    * dm(si[0] - 2.0 / 3.0 * b * sj[1] + 4.0 / 3.0 * b * b * si[2]);
            }
            prices[i] = p;
            demands[i] = d;
        }
        ExpansionPoint {
            shadow: s,
            prices,
            demands,
            values: [
                self.value(x1, x2, Firm::One, order),
                self.value(x1, x2, Firm::Two, order),
            ],
        }
    }

    /// Exact static equilibrium at the shadow costs truncated after `order`.
    pub fn static_game(&self, x1: f64, x2: f64, order: usize) -> Result<ExpansionPoint> {
        let s = [self.shadow_terms(x1, x2, Firm::One), self.shadow_terms(x1, x2, Firm::Two)];
        let cost = |si: &[f64; 3]| {
            let g = self.gamma;
            si[0] + if order >= 1 { g * si[1] } else { 0.0 } + if order >= 2 { g * g * si[2] } else { 0.0 }
        };
        let out = solve_duopoly_levels(&self.ladder, cost(&s[0]), cost(&s[1]))?;
        Ok(ExpansionPoint {
            shadow: s,
            prices: out.prices,
            demands: out.demands,
            values: [
                self.value(x1, x2, Firm::One, order),
                self.value(x1, x2, Firm::Two, order),
            ],
        })
    }
}

/// Second-order price and demand series and values at (x1, x2), using the
/// consistent second-order correction. Non-positive demand is an error.
pub fn expanded_policy(m: &MonopolyModel, gamma: f64, x1: f64, x2: f64) -> Result<ExpansionPoint> {
    let e = Expansion::new(*m, gamma, SecondOrder::Consistent)?;
    let pt = e.series(x1, x2, 2);
    if pt.demands.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Positivity(format!(
            "expanded demands {:?} at ({x1}, {x2}) with gamma {gamma}",
            pt.demands
        )));
    }
    Ok(pt)
}
