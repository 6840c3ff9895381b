//! Closed-form integration of piecewise poly-exponential functions,
//! `f(s) = Σ c · s^p · e^{λ s}`, and the time-ordered multi-variable
//! integrals built from them.
//!
//! All exponential rates occurring in RTN correlators are integer
//! combinations `λ = m·(2γ) + i·n·Ω`, so rates are kept on that lattice and
//! degenerate (zero) rates are detected exactly instead of by a floating
//! threshold. Polynomial pieces are stored in local coordinates of their
//! interval, which keeps powers well-conditioned.

use num_complex::Complex64 as C64;

/// Exponential rate `m·g2 + i·n·om` on the integer lattice.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub struct Rate {
    pub m: i32,
    pub n: i32,
}

impl Rate {
    pub const ZERO: Rate = Rate { m: 0, n: 0 };

    pub fn add(self, other: Rate) -> Rate {
        Rate { m: self.m + other.m, n: self.n + other.n }
    }

    pub fn is_zero(self) -> bool {
        self.m == 0 && self.n == 0
    }

    pub fn value(self, scales: Scales) -> C64 {
        C64::new(self.m as f64 * scales.g2, self.n as f64 * scales.om)
    }
}

/// Numerical values of the lattice units: `g2 = 2γ`, `om = Ω`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Scales {
    pub g2: f64,
    pub om: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct Term {
    pub coeff: C64,
    pub pow: u32,
    pub rate: Rate,
}

/// Polynomial-exponential function of a local variable `s ≥ 0`.
#[derive(Clone, Debug, Default)]
pub struct PolyExp {
    terms: Vec<Term>,
}

impl PolyExp {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        let mut p = Self::zero();
        p.push(Term { coeff: c, pow: 0, rate: Rate::ZERO });
        p
    }

    /// `c · e^{λ s}`.
    pub fn exponential(c: C64, rate: Rate) -> Self {
        let mut p = Self::zero();
        p.push(Term { coeff: c, pow: 0, rate });
        p
    }

    pub fn push(&mut self, t: Term) {
        if t.coeff == C64::new(0.0, 0.0) {
            return;
        }
        for existing in self.terms.iter_mut() {
            if existing.pow == t.pow && existing.rate == t.rate {
                existing.coeff += t.coeff;
                return;
            }
        }
        self.terms.push(t);
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, c: C64) -> PolyExp {
        PolyExp {
            terms: self.terms.iter().map(|t| Term { coeff: t.coeff * c, ..*t }).collect(),
        }
    }

    pub fn add(&self, other: &PolyExp) -> PolyExp {
        let mut out = self.clone();
        for t in &other.terms {
            out.push(*t);
        }
        out
    }

    pub fn mul(&self, other: &PolyExp) -> PolyExp {
        let mut out = PolyExp::zero();
        for a in &self.terms {
            for b in &other.terms {
                out.push(Term {
                    coeff: a.coeff * b.coeff,
                    pow: a.pow + b.pow,
                    rate: a.rate.add(b.rate),
                });
            }
        }
        out
    }

    pub fn eval(&self, s: f64, scales: Scales) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for t in &self.terms {
            let mut v = t.coeff * s.powi(t.pow as i32);
            if !t.rate.is_zero() {
                v *= (t.rate.value(scales) * s).exp();
            }
            acc += v;
        }
        acc
    }

    /// Re-expresses the function in the shifted variable `s' = s - x0`
    /// (valid for `s ≥ x0`): binomially expands powers and absorbs
    /// `e^{λ x0}` into coefficients.
    pub fn rebase(&self, x0: f64, scales: Scales) -> PolyExp {
        if x0 == 0.0 {
            return self.clone();
        }
        let mut out = PolyExp::zero();
        for t in &self.terms {
            let efac = if t.rate.is_zero() {
                C64::new(1.0, 0.0)
            } else {
                (t.rate.value(scales) * x0).exp()
            };
            // (x0 + s')^p = Σ_j C(p,j) x0^{p-j} s'^j
            let p = t.pow;
            let mut binom = 1.0f64;
            for j in 0..=p {
                if j > 0 {
                    binom = binom * (p - j + 1) as f64 / j as f64;
                }
                out.push(Term {
                    coeff: t.coeff * efac * binom * x0.powi((p - j) as i32),
                    pow: j,
                    rate: t.rate,
                });
            }
        }
        out
    }

    /// Cumulative integral `F(y) = ∫_0^y f(s) ds` for `y` in `[0, width]`,
    /// returned as a `PolyExp` in the same local variable.
    ///
    /// Terms with `|λ|·width` small are integrated by series expansion
    /// (pure polynomial result); large-rate terms by parts. Both avoid the
    /// catastrophic cancellation of the naive antiderivative.
    pub fn cumulative(&self, width: f64, scales: Scales) -> PolyExp {
        let mut out = PolyExp::zero();
        for t in &self.terms {
            integrate_term(t, width, scales, &mut out);
        }
        out
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }
}

fn integrate_term(t: &Term, width: f64, scales: Scales, out: &mut PolyExp) {
    let p = t.pow;
    if t.rate.is_zero() {
        out.push(Term { coeff: t.coeff / (p + 1) as f64, pow: p + 1, rate: Rate::ZERO });
        return;
    }
    let lam = t.rate.value(scales);
    let x = lam.norm() * width;
    if x <= 6.0 {
        // ∫_0^y s^p e^{λs} ds = Σ_{m≥0} λ^m / m! · y^{p+m+1} / (p+m+1)
        let mut lam_pow = C64::new(1.0, 0.0);
        let mut mfact = 1.0f64;
        for m in 0..64u32 {
            if m > 0 {
                lam_pow *= lam;
                mfact *= m as f64;
            }
            let coeff = t.coeff * lam_pow / mfact / (p + m + 1) as f64;
            // Polynomial truncation: bound the remaining tail by the
            // geometric-ish decay of |λ·width|^m / m!.
            let tail = coeff.norm() * width.powi((p + m + 1) as i32);
            out.push(Term { coeff, pow: p + m + 1, rate: Rate::ZERO });
            if m as f64 > x && tail < 1e-18 * (1.0 + width.powi((p + 1) as i32)) {
                break;
            }
        }
    } else {
        // By parts: ∫_0^y s^p e^{λs} ds
        //   = e^{λy} Σ_{j=0}^p d_j y^j - d_0,  d_j = (-1)^{p-j} p!/(j!) / λ^{p-j+1}
        let mut d = vec![C64::new(0.0, 0.0); (p + 1) as usize];
        // d_p = 1/λ; d_{j-1} = -j·d_j/λ
        d[p as usize] = C64::new(1.0, 0.0) / lam;
        for j in (1..=p).rev() {
            d[(j - 1) as usize] = -(j as f64) * d[j as usize] / lam;
        }
        for (j, dj) in d.iter().enumerate() {
            out.push(Term { coeff: t.coeff * dj, pow: j as u32, rate: t.rate });
        }
        out.push(Term { coeff: -t.coeff * d[0], pow: 0, rate: Rate::ZERO });
    }
}

/// Piecewise poly-exponential function on the real line: zero-extended by
/// the constants `below`/`above` outside its breakpoint span. Piece `i`
/// lives on `[breaks[i], breaks[i+1]]` in local coordinates.
#[derive(Clone, Debug)]
pub struct Piecewise {
    breaks: Vec<f64>,
    pieces: Vec<PolyExp>,
    below: C64,
    above: C64,
}

impl Piecewise {
    pub fn new(breaks: Vec<f64>, pieces: Vec<PolyExp>, below: C64, above: C64) -> Self {
        assert_eq!(breaks.len(), pieces.len() + 1);
        assert!(breaks.windows(2).all(|w| w[0] < w[1]), "breaks must increase");
        Self { breaks, pieces, below, above }
    }

    /// Single piece on `[lo, hi]`, zero outside.
    pub fn single(lo: f64, hi: f64, piece: PolyExp) -> Self {
        Self::new(vec![lo, hi], vec![piece], C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    }

    pub fn lo(&self) -> f64 {
        self.breaks[0]
    }

    pub fn hi(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    pub fn eval(&self, x: f64, scales: Scales) -> C64 {
        if x < self.lo() {
            return self.below;
        }
        if x >= self.hi() {
            return self.above;
        }
        let i = match self.breaks.binary_search_by(|b| b.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.pieces.len() - 1),
            Err(i) => i - 1,
        };
        self.pieces[i].eval(x - self.breaks[i], scales)
    }

    /// `C(x) = below_integral_base + ∫_{lo}^{min(x, hi)} f(s) ds` for x ≥ lo;
    /// the result is 0 below `lo` and constant above `hi`.
    pub fn cumulative(&self, scales: Scales) -> Piecewise {
        let mut pieces = Vec::with_capacity(self.pieces.len());
        let mut running = C64::new(0.0, 0.0);
        for (i, p) in self.pieces.iter().enumerate() {
            let width = self.breaks[i + 1] - self.breaks[i];
            let cum = p.cumulative(width, scales);
            let total = cum.eval(width, scales);
            let mut piece = cum;
            piece.push(Term { coeff: running, pow: 0, rate: Rate::ZERO });
            pieces.push(piece);
            running += total;
        }
        Piecewise::new(self.breaks.clone(), pieces, C64::new(0.0, 0.0), running)
    }

    /// Pointwise product with another piecewise function, restricted to
    /// `[lo, hi]` of `self` (zero outside).
    pub fn mul(&self, other: &Piecewise, scales: Scales) -> Piecewise {
        let lo = self.lo();
        let hi = self.hi();
        let mut cuts: Vec<f64> = self.breaks.clone();
        for &b in &other.breaks {
            if b > lo && b < hi && cuts.iter().all(|&c| (c - b).abs() > 0.0) {
                cuts.push(b);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        let mut pieces = Vec::with_capacity(cuts.len() - 1);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let fa = self.restrict(a, scales);
            let fb = other.restrict_or_const(a, b, scales);
            pieces.push(fa.mul(&fb));
        }
        Piecewise::new(cuts, pieces, C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    }

    /// The piece of `self` covering `[a, ...]`, rebased to local origin `a`.
    fn restrict(&self, a: f64, scales: Scales) -> PolyExp {
        let i = self.piece_index(a);
        self.pieces[i].rebase(a - self.breaks[i], scales)
    }

    /// Like `restrict`, but returns the flat constant when `[a,b]` lies
    /// outside the span of `self`.
    fn restrict_or_const(&self, a: f64, b: f64, scales: Scales) -> PolyExp {
        let mid = 0.5 * (a + b);
        if mid < self.lo() {
            return PolyExp::constant(self.below);
        }
        if mid >= self.hi() {
            return PolyExp::constant(self.above);
        }
        self.restrict(a, scales)
    }

    fn piece_index(&self, a: f64) -> usize {
        let mut i = match self.breaks.binary_search_by(|b| b.partial_cmp(&a).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        if i >= self.pieces.len() {
            i = self.pieces.len() - 1;
        }
        i
    }
}

/// Time-ordered integral `∫ ∏_j f_j(t_j) dt` over `t_1 ≥ t_2 ≥ ... ≥ t_k`,
/// with variable `t_j` confined to the span of `factors[j-1]` (its window).
///
/// Evaluated innermost-first: `I_j(x) = ∫^{min(x, hi_j)} f_j(s) I_{j+1}(s) ds`,
/// which stays inside the piecewise poly-exponential family.
pub fn ordered_integral(factors: &[Piecewise], scales: Scales) -> C64 {
    assert!(!factors.is_empty());
    let mut inner: Option<Piecewise> = None;
    for f in factors.iter().rev() {
        let g = match &inner {
            None => f.clone(),
            Some(i) => f.mul(i, scales),
        };
        inner = Some(g.cumulative(scales));
    }
    let i = inner.unwrap();
    i.eval(i.hi(), scales)
}
