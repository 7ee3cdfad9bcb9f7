//! The linear Poisson structure on `(y, l)` coming from the Euclidean algebra
//! `e(n)`, and numerical checks built on it.
//!
//! Coordinates are the generators `z = [y_1..y_n, l_12, l_13, .., l_(n-1)n]`
//! with `l` packed upper-triangular as in [`crate::skew`]. The brackets are
//!
//! ```text
//! {l_ij, l_km} = δ_jk l_im − δ_jm l_ik − δ_ik l_jm + δ_im l_jk
//! {l_ij, y_k}  = δ_jk y_i − δ_ik y_j
//! {y_j, y_k}   = 0
//! ```
//!
//! Given the sign of `{l, y}`, the Jacobi identity fixes the sign of
//! `{l, l}`: it is `⟨l, [e_ij, e_km]⟩` for `e_ij = E_ij − E_ji`.
//!
//! Time evolution is `ḟ = {f, H}`. With that orientation the bracket flow of
//! [`ClebschHamiltonian`] is exactly the Clebsch vector field.

use rand::Rng;

use crate::clebsch_flow::clebsch_rhs;
use crate::conserved::POLE_GUARD;
use crate::error::{GeoError, Result};
use crate::model::Ellipsoid;
use crate::skew::{index_pairs, packed_index, packed_len, SkewTensor};

/// Number of generator coordinates for dimension `n`.
pub fn phase_dim(n: usize) -> usize {
    n + packed_len(n)
}

/// A single coordinate function on `(y, l)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Y(usize),
    /// `l_jk` with `j < k`.
    L(usize, usize),
}

impl Generator {
    pub fn index(self, n: usize) -> usize {
        match self {
            Generator::Y(j) => j,
            Generator::L(j, k) => n + packed_index(n, j, k),
        }
    }

    pub fn from_index(n: usize, idx: usize) -> Self {
        if idx < n {
            return Generator::Y(idx);
        }
        let (j, k) = index_pairs(n)
            .nth(idx - n)
            .expect("generator index out of range");
        Generator::L(j, k)
    }

    /// All generators in coordinate order.
    pub fn all(n: usize) -> Vec<Self> {
        (0..phase_dim(n)).map(|i| Self::from_index(n, i)).collect()
    }
}

fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

/// Linear form `{α, β} = Σ_γ c_γ z_γ`, returned as `(γ, c_γ)` with zero
/// coefficients dropped.
pub fn structure_constants(n: usize, alpha: Generator, beta: Generator) -> Vec<(Generator, f64)> {
    use Generator::{L, Y};
    // signed reference to l_pq for arbitrary p, q
    let l = |p: usize, q: usize, c: f64| -> Option<(Generator, f64)> {
        if p == q || c == 0.0 {
            None
        } else if p < q {
            Some((L(p, q), c))
        } else {
            Some((L(q, p), -c))
        }
    };
    let y = |p: usize, c: f64| if c == 0.0 { None } else { Some((Y(p), c)) };
    let terms: Vec<Option<(Generator, f64)>> = match (alpha, beta) {
        (Y(_), Y(_)) => vec![],
        (L(i, j), Y(k)) => vec![y(i, delta(j, k)), y(j, -delta(i, k))],
        (Y(k), L(i, j)) => vec![y(i, -delta(j, k)), y(j, delta(i, k))],
        (L(i, j), L(k, m)) => vec![
            l(i, m, delta(j, k)),
            l(i, k, -delta(j, m)),
            l(j, m, -delta(i, k)),
            l(j, k, delta(i, m)),
        ],
    };
    let mut out: Vec<(Generator, f64)> = Vec::new();
    for (g, c) in terms.into_iter().flatten() {
        match out.iter_mut().find(|(h, _)| *h == g) {
            Some(entry) => entry.1 += c,
            None => out.push((g, c)),
        }
    }
    out.retain(|(_, c)| *c != 0.0);
    debug_assert!(out.iter().all(|(g, _)| g.index(n) < phase_dim(n)));
    out
}

fn coordinate(g: Generator, y: &[f64], l: &SkewTensor) -> f64 {
    match g {
        Generator::Y(j) => y[j],
        Generator::L(j, k) => l.get(j, k),
    }
}

/// Bracket of two generators evaluated at `(y, l)`.
pub fn generator_bracket(alpha: Generator, beta: Generator, y: &[f64], l: &SkewTensor) -> f64 {
    structure_constants(y.len(), alpha, beta)
        .into_iter()
        .map(|(g, c)| c * coordinate(g, y, l))
        .sum()
}

/// Dense Poisson tensor `J_αβ = {z_α, z_β}` at `(y, l)`.
pub fn poisson_tensor(y: &[f64], l: &SkewTensor) -> Vec<Vec<f64>> {
    let n = y.len();
    assert_eq!(l.dim(), n, "y and l dimensions differ");
    let gens = Generator::all(n);
    let d = gens.len();
    let mut j = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in a + 1..d {
            let v = generator_bracket(gens[a], gens[b], y, l);
            j[a][b] = v;
            j[b][a] = -v;
        }
    }
    j
}

/// Gradient with respect to `y` and to packed `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub y: Vec<f64>,
    pub l: Vec<f64>,
}

impl Gradient {
    fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.y.iter().chain(&self.l).copied()
    }
}

/// A smooth function of `(y, l)` with an analytic gradient.
pub trait Observable {
    fn value(&self, y: &[f64], l: &SkewTensor) -> f64;
    fn gradient(&self, y: &[f64], l: &SkewTensor) -> Gradient;
}

impl Observable for Generator {
    fn value(&self, y: &[f64], l: &SkewTensor) -> f64 {
        coordinate(*self, y, l)
    }

    fn gradient(&self, y: &[f64], _l: &SkewTensor) -> Gradient {
        let n = y.len();
        let mut g = Gradient {
            y: vec![0.0; n],
            l: vec![0.0; packed_len(n)],
        };
        match *self {
            Generator::Y(j) => g.y[j] = 1.0,
            Generator::L(j, k) => g.l[packed_index(n, j, k)] = 1.0,
        }
        g
    }
}

/// The Uhlenbeck integral `F_j = y_j² + Σ_{k≠j} l_jk²/(a_j − a_k)`.
#[derive(Debug, Clone)]
pub struct UhlenbeckIntegral<'a> {
    a: &'a [f64],
    j: usize,
}

impl<'a> UhlenbeckIntegral<'a> {
    pub fn new(e: &'a Ellipsoid, j: usize) -> Result<Self> {
        e.require_distinct()?;
        if j >= e.dim() {
            return Err(GeoError::InvalidProblem(format!(
                "integral index {j} out of range for n = {}",
                e.dim()
            )));
        }
        Ok(Self { a: e.axes(), j })
    }

    /// All `n` integrals of `e`.
    pub fn family(e: &'a Ellipsoid) -> Result<Vec<Self>> {
        (0..e.dim()).map(|j| Self::new(e, j)).collect()
    }
}

impl Observable for UhlenbeckIntegral<'_> {
    fn value(&self, y: &[f64], l: &SkewTensor) -> f64 {
        let (a, j) = (self.a, self.j);
        let pair: f64 = (0..a.len())
            .filter(|&k| k != j)
            .map(|k| l.get(j, k).powi(2) / (a[j] - a[k]))
            .sum();
        y[j] * y[j] + pair
    }

    fn gradient(&self, y: &[f64], l: &SkewTensor) -> Gradient {
        let (a, j) = (self.a, self.j);
        let n = a.len();
        let mut gy = vec![0.0; n];
        gy[j] = 2.0 * y[j];
        let gl = index_pairs(n)
            .zip(l.packed())
            .map(|((p, q), v)| {
                if p == j {
                    2.0 * v / (a[j] - a[q])
                } else if q == j {
                    2.0 * v / (a[j] - a[p])
                } else {
                    0.0
                }
            })
            .collect();
        Gradient { y: gy, l: gl }
    }
}

/// `G_λ = Σ_j y_j²/(a_j − λ) − Σ_{j<k} l_jk²/((a_j − λ)(a_k − λ))`.
#[derive(Debug, Clone)]
pub struct GeneratingFunction {
    d: Vec<f64>,
}

impl GeneratingFunction {
    pub fn new(e: &Ellipsoid, lambda: f64) -> Result<Self> {
        if let Some(index) = e
            .axes()
            .iter()
            .position(|aj| (aj - lambda).abs() < POLE_GUARD)
        {
            return Err(GeoError::PoleAtAxis { lambda, index });
        }
        Ok(Self {
            d: e.axes().iter().map(|aj| aj - lambda).collect(),
        })
    }
}

impl Observable for GeneratingFunction {
    fn value(&self, y: &[f64], l: &SkewTensor) -> f64 {
        let d = &self.d;
        let diag: f64 = y.iter().zip(d).map(|(y, d)| y * y / d).sum();
        let pairs: f64 = index_pairs(d.len())
            .zip(l.packed())
            .map(|((j, k), v)| v * v / (d[j] * d[k]))
            .sum();
        diag - pairs
    }

    fn gradient(&self, y: &[f64], l: &SkewTensor) -> Gradient {
        let d = &self.d;
        Gradient {
            y: y.iter().zip(d).map(|(y, d)| 2.0 * y / d).collect(),
            l: index_pairs(d.len())
                .zip(l.packed())
                .map(|((j, k), v)| -2.0 * v / (d[j] * d[k]))
                .collect(),
        }
    }
}

/// `H_C = ½(Σ_j y_j²/a_j − Σ_{j<k} l_jk²/(a_j a_k))`.
#[derive(Debug, Clone)]
pub struct ClebschHamiltonian<'a> {
    a: &'a [f64],
}

impl<'a> ClebschHamiltonian<'a> {
    pub fn new(e: &'a Ellipsoid) -> Self {
        Self { a: e.axes() }
    }
}

impl Observable for ClebschHamiltonian<'_> {
    fn value(&self, y: &[f64], l: &SkewTensor) -> f64 {
        let a = self.a;
        let diag: f64 = y.iter().zip(a).map(|(y, a)| y * y / a).sum();
        let pairs: f64 = index_pairs(a.len())
            .zip(l.packed())
            .map(|((j, k), v)| v * v / (a[j] * a[k]))
            .sum();
        0.5 * (diag - pairs)
    }

    fn gradient(&self, y: &[f64], l: &SkewTensor) -> Gradient {
        let a = self.a;
        Gradient {
            y: y.iter().zip(a).map(|(y, a)| y / a).collect(),
            l: index_pairs(a.len())
                .zip(l.packed())
                .map(|((j, k), v)| -v / (a[j] * a[k]))
                .collect(),
        }
    }
}

/// `{f, g}` at `(y, l)`.
///
/// Summed over `α < β` as `J_αβ (f_α g_β − f_β g_α)`, so swapping `f` and `g`
/// negates every term exactly.
pub fn poisson_bracket<F, G>(f: &F, g: &G, y: &[f64], l: &SkewTensor) -> f64
where
    F: Observable + ?Sized,
    G: Observable + ?Sized,
{
    let j = poisson_tensor(y, l);
    bracket_with(&j, f, g, y, l)
}

fn bracket_with<F, G>(j: &[Vec<f64>], f: &F, g: &G, y: &[f64], l: &SkewTensor) -> f64
where
    F: Observable + ?Sized,
    G: Observable + ?Sized,
{
    let fg: Vec<f64> = f.gradient(y, l).flat().collect();
    let gg: Vec<f64> = g.gradient(y, l).flat().collect();
    let d = fg.len();
    let mut s = 0.0;
    for a in 0..d {
        for b in a + 1..d {
            if j[a][b] != 0.0 {
                s += j[a][b] * (fg[a] * gg[b] - fg[b] * gg[a]);
            }
        }
    }
    s
}

/// Vector field `ż_α = {z_α, H}` generated by `h`.
pub fn hamiltonian_vector_field<H: Observable + ?Sized>(
    h: &H,
    y: &[f64],
    l: &SkewTensor,
) -> (Vec<f64>, SkewTensor) {
    let n = y.len();
    let j = poisson_tensor(y, l);
    let grad: Vec<f64> = h.gradient(y, l).flat().collect();
    let dz: Vec<f64> = j
        .iter()
        .map(|row| row.iter().zip(&grad).map(|(jab, gb)| jab * gb).sum())
        .collect();
    (
        dz[..n].to_vec(),
        SkewTensor::from_packed(n, dz[n..].to_vec()),
    )
}

/// Uniform point of the box `[−1, 1]^dim` in `(y, l)`.
pub fn sample_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (Vec<f64>, SkewTensor) {
    let y = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let l = (0..packed_len(n))
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    (y, SkewTensor::from_packed(n, l))
}

/// Max `|{F_j, F_k}|` over `j < k` at `points` box samples.
pub fn involution_check<R: Rng + ?Sized>(e: &Ellipsoid, points: usize, rng: &mut R) -> Result<f64> {
    let fs = UhlenbeckIntegral::family(e)?;
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let (y, l) = sample_point(e.dim(), rng);
        let j = poisson_tensor(&y, &l);
        for a in 0..fs.len() {
            for b in a + 1..fs.len() {
                worst = worst.max(bracket_with(&j, &fs[a], &fs[b], &y, &l).abs());
            }
        }
    }
    Ok(worst)
}

/// Spectral parameters closer than this to an axis are redrawn.
pub const LAMBDA_AXIS_MARGIN: f64 = 0.1;

/// Draws `λ` uniformly from `[min a − 1, max a + 1]`, at least
/// [`LAMBDA_AXIS_MARGIN`] away from every axis.
pub fn sample_lambda<R: Rng + ?Sized>(e: &Ellipsoid, rng: &mut R) -> f64 {
    let a = e.axes();
    let lo = a.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let hi = a.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    loop {
        let lambda = rng.random_range(lo..hi);
        if a.iter().all(|aj| (aj - lambda).abs() >= LAMBDA_AXIS_MARGIN) {
            return lambda;
        }
    }
}

/// Max `|{G_λ, G_μ}|` over `pairs` random spectral pairs, each at `points`
/// box samples.
pub fn generating_involution_check<R: Rng + ?Sized>(
    e: &Ellipsoid,
    pairs: usize,
    points: usize,
    rng: &mut R,
) -> Result<f64> {
    e.require_distinct()?;
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let g1 = GeneratingFunction::new(e, sample_lambda(e, rng))?;
        let g2 = GeneratingFunction::new(e, sample_lambda(e, rng))?;
        for _ in 0..points {
            let (y, l) = sample_point(e.dim(), rng);
            worst = worst.max(poisson_bracket(&g1, &g2, &y, &l).abs());
        }
    }
    Ok(worst)
}

/// Max componentwise gap between the bracket flow of `H_C` and the Clebsch
/// right-hand side, over `points` box samples.
pub fn hamiltonian_flow_check<R: Rng + ?Sized>(
    e: &Ellipsoid,
    points: usize,
    rng: &mut R,
) -> Result<f64> {
    e.require_distinct()?;
    let h = ClebschHamiltonian::new(e);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let (y, l) = sample_point(e.dim(), rng);
        worst = worst.max(hamiltonian_flow_residual(e, &h, &y, &l)?);
    }
    Ok(worst)
}

fn hamiltonian_flow_residual(
    e: &Ellipsoid,
    h: &ClebschHamiltonian,
    y: &[f64],
    l: &SkewTensor,
) -> Result<f64> {
    let (dy, dl) = hamiltonian_vector_field(h, y, l);
    let rhs = clebsch_rhs(e, y, l)?;
    let ry = dy.iter().zip(&rhs.dy).map(|(p, q)| (p - q).abs());
    let rl = dl
        .packed()
        .iter()
        .zip(rhs.dl.packed())
        .map(|(p, q)| (p - q).abs());
    Ok(ry.chain(rl).fold(0.0, f64::max))
}

/// Max cyclic Jacobi sum `{α,{β,γ}} + {β,{γ,α}} + {γ,{α,β}}` over all
/// generator triples, at `points` box samples in dimension `n`.
pub fn jacobi_check<R: Rng + ?Sized>(n: usize, points: usize, rng: &mut R) -> f64 {
    let gens = Generator::all(n);
    // {α, L} for a linear form L = Σ c_γ z_γ
    let outer = |alpha: Generator, form: &[(Generator, f64)], y: &[f64], l: &SkewTensor| -> f64 {
        form.iter()
            .map(|&(g, c)| c * generator_bracket(alpha, g, y, l))
            .sum()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let (y, l) = sample_point(n, rng);
        for (ia, &a) in gens.iter().enumerate() {
            for (ib, &b) in gens.iter().enumerate().skip(ia + 1) {
                for &c in gens.iter().skip(ib + 1) {
                    let s = outer(a, &structure_constants(n, b, c), &y, &l)
                        + outer(b, &structure_constants(n, c, a), &y, &l)
                        + outer(c, &structure_constants(n, a, b), &y, &l);
                    worst = worst.max(s.abs());
                }
            }
        }
    }
    worst
}

/// The observables exercised by the generic checks: every `F_j`, `H_C`, and
/// `G_λ` at the given spectral values.
pub fn standard_observables<'a>(
    e: &'a Ellipsoid,
    lambdas: &[f64],
) -> Result<Vec<Box<dyn Observable + 'a>>> {
    let mut obs: Vec<Box<dyn Observable + 'a>> = Vec::new();
    for f in UhlenbeckIntegral::family(e)? {
        obs.push(Box::new(f));
    }
    obs.push(Box::new(ClebschHamiltonian::new(e)));
    for &lambda in lambdas {
        obs.push(Box::new(GeneratingFunction::new(e, lambda)?));
    }
    Ok(obs)
}

/// Max of `|{f,f}|` and `|{f,g} + {g,f}|` over all pairs of `observables`.
pub fn antisymmetry_check<R: Rng + ?Sized>(
    n: usize,
    observables: &[Box<dyn Observable + '_>],
    points: usize,
    rng: &mut R,
) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let (y, l) = sample_point(n, rng);
        let j = poisson_tensor(&y, &l);
        for (i, f) in observables.iter().enumerate() {
            worst = worst.max(bracket_with(&j, f.as_ref(), f.as_ref(), &y, &l).abs());
            for g in &observables[i + 1..] {
                let fg = bracket_with(&j, f.as_ref(), g.as_ref(), &y, &l);
                let gf = bracket_with(&j, g.as_ref(), f.as_ref(), &y, &l);
                worst = worst.max((fg + gf).abs());
            }
        }
    }
    worst
}

/// Max relative gap between the analytic gradient and a centered finite
/// difference with step `h`, normalised by `max(‖∇f‖_∞, 1)`.
pub fn gradient_check<O: Observable + ?Sized>(f: &O, y: &[f64], l: &SkewTensor, h: f64) -> f64 {
    let n = y.len();
    let analytic: Vec<f64> = f.gradient(y, l).flat().collect();
    let scale = analytic.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut z: Vec<f64> = y.iter().chain(l.packed()).copied().collect();
    let eval = |z: &[f64]| f.value(&z[..n], &SkewTensor::from_packed(n, z[n..].to_vec()));
    let mut worst: f64 = 0.0;
    for i in 0..z.len() {
        let z0 = z[i];
        z[i] = z0 + h;
        let up = eval(&z);
        z[i] = z0 - h;
        let down = eval(&z);
        z[i] = z0;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - analytic[i]).abs() / scale);
    }
    worst
}
