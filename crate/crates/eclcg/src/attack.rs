//! Parameter recovery from seven consecutive outputs.
//!
//! Seven consecutive values x_1..x_7 of the generator satisfy, for each
//! middle index i, the x-coordinate sum identity.  Clearing denominators
//! turns the five identities into integer congruences
//!
//! ```text
//! C . (x_G, x_G^2, A, B, y_G^2, x_G^3)^T  =  u   (mod p)
//! ```
//!
//! with a 5x6 coefficient matrix `C` and right-hand side `u` built purely
//! from the revealed values.  Columns 5 and 6 of `C` are the constant
//! vectors (2,...,2) and (-2,...,-2), so only the combination
//! `e_4 + e_5 - e_6 = B + y_G^2 - x_G^3` is visible; the pipeline works
//! with four unknown column weights and one scale:
//!
//! ```text
//! l_1 c_1 + l_2 c_2 + l_3 c_3 + l_4 c_4 = mu . u   (mod m)
//! ```
//!
//! The modulus starts as |det(c_1..c_4, u)| (a multiple of p, since the
//! system is singular mod p), loses the determinant's structural
//! difference factors up front, is cut down by gcds whenever the columns
//! are dependent modulo m or the square relation l_1^2 = l_2 fails, and
//! every quotient by 2 is legitimised by keeping gcd(m, 6) = 1 throughout.
//! A vanishing determinant routes to an exact-integer branch that recovers
//! a curve over the rationals instead.
//!
//! More revealed values shrink the modulus further: models recovered from
//! overlapping seven-value windows agree modulo p, so the gcd of their
//! moduli and parameter differences is still a multiple of p.

use crate::curve::{Curve, Point};
use crate::generator::XSequenceModel;
use crate::linalg::{kernel_vector_mod, IntMatrix, KernelOutcome};
use crate::nt;
use crate::ring::{Coord, RingSpec};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

/// Number of consecutive outputs one recovery window consumes.
pub const WINDOW: usize = 7;

/// Pipeline stage at which an input was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    InputValidation,
    ModulusNormalization,
    DependencyReduction,
    LambdaSolve,
    QuadraticCheck,
    RationalSolve,
    Plausibility,
    WindowRefinement,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackError {
    #[error("a recovery window takes exactly 7 values, got {got}")]
    WrongLength { got: usize },
    #[error("recovery inputs must be nonnegative")]
    NegativeInput,
    #[error("recovery inputs must be pairwise distinct")]
    DistinctnessViolation,
    #[error("the values cannot come from a generator of the assumed shape ({stage:?})")]
    InconsistentInput { stage: Stage },
    #[error("cannot merge rational and modular window models")]
    MixedBranch,
}

fn inconsistent(stage: Stage) -> AttackError {
    AttackError::InconsistentInput { stage }
}

/// One window of seven consecutive outputs, validated on construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackInput {
    #[serde(with = "crate::jsonio::dec_vec")]
    x: Vec<BigInt>,
}

impl AttackInput {
    pub fn new(x: Vec<BigInt>) -> Result<Self, AttackError> {
        if x.len() != WINDOW {
            return Err(AttackError::WrongLength { got: x.len() });
        }
        if x.iter().any(|v| v.is_negative()) {
            return Err(AttackError::NegativeInput);
        }
        for i in 0..WINDOW {
            for j in 0..i {
                if x[i] == x[j] {
                    return Err(AttackError::DistinctnessViolation);
                }
            }
        }
        Ok(AttackInput { x })
    }

    /// Every consecutive window of a longer stream, in order.
    pub fn windows(stream: &[BigInt]) -> Result<Vec<AttackInput>, AttackError> {
        if stream.len() < WINDOW {
            return Err(AttackError::WrongLength { got: stream.len() });
        }
        stream
            .windows(WINDOW)
            .map(|w| AttackInput::new(w.to_vec()))
            .collect()
    }

    pub fn values(&self) -> &[BigInt] {
        &self.x
    }

    pub fn max_value(&self) -> &BigInt {
        self.x.iter().max().expect("seven values")
    }
}

/// The 5x6 system and right-hand side derived from one window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearSystem {
    c: IntMatrix,
    #[serde(with = "crate::jsonio::dec_vec")]
    u: Vec<BigInt>,
}

/// Builds the system row by row: for each middle index i = 2..6,
/// `[2x_i^2 + 2x_i(x_{i-1}+x_{i+1}), 2x_i - (x_{i-1}+x_{i+1}), 2x_i,
///   2, 2, -2]` against `(x_{i-1}+x_{i+1}) x_i^2`.
pub fn build_system(input: &AttackInput) -> LinearSystem {
    let x = input.values();
    let two = BigInt::from(2);
    let mut c = IntMatrix::zero(5, 6);
    let mut u = Vec::with_capacity(5);
    for r in 0..5 {
        let mid = &x[r + 1];
        let side = &x[r] + &x[r + 2];
        let sq = mid * mid;
        c[(r, 0)] = &two * (&sq + mid * &side);
        c[(r, 1)] = &two * mid - &side;
        c[(r, 2)] = &two * mid;
        c[(r, 3)] = two.clone();
        c[(r, 4)] = two.clone();
        c[(r, 5)] = -&two;
        u.push(&side * &sq);
    }
    LinearSystem { c, u }
}

impl LinearSystem {
    /// Assembles a system from four explicit lead columns and a right-hand
    /// side; the constant columns 5 and 6 are filled in.  Used to plant
    /// synthetic solutions when exercising the degenerate branches.
    pub fn from_columns(cols: [Vec<BigInt>; 4], u: Vec<BigInt>) -> Self {
        assert!(cols.iter().all(|c| c.len() == 5) && u.len() == 5);
        let two = BigInt::from(2);
        let mut c = IntMatrix::zero(5, 6);
        for r in 0..5 {
            for (j, col) in cols.iter().enumerate() {
                c[(r, j)] = col[r].clone();
            }
            c[(r, 4)] = two.clone();
            c[(r, 5)] = -&two;
        }
        LinearSystem { c, u }
    }

    pub fn matrix(&self) -> &IntMatrix {
        &self.c
    }

    pub fn rhs(&self) -> &[BigInt] {
        &self.u
    }

    /// The 5x4 block (c_1..c_4) whose independence the pipeline maintains.
    pub fn lead_columns(&self) -> IntMatrix {
        self.c.select_columns(&[0, 1, 2, 3])
    }

    /// The square system (c_1..c_4 | u) whose determinant seeds the modulus.
    pub fn square_system(&self) -> IntMatrix {
        let mut m = IntMatrix::zero(5, 5);
        for r in 0..5 {
            for j in 0..4 {
                m[(r, j)] = self.c[(r, j)].clone();
            }
            m[(r, 4)] = self.u[r].clone();
        }
        m
    }

    /// `l_1 c_1 + ... + l_4 c_4 - mu u` over the integers.
    fn residual(&self, l: &[BigInt; 4], mu: &BigInt) -> Vec<BigInt> {
        (0..5)
            .map(|r| {
                let mut acc = -(mu * &self.u[r]);
                for j in 0..4 {
                    acc += &l[j] * &self.c[(r, j)];
                }
                acc
            })
            .collect()
    }
}

/// Weights satisfying `l_1 c_1 + l_2 c_2 + l_3 c_3 + l_4 c_4 = mu u`,
/// modulo `modulus` or exactly over the integers when `modulus` is `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LambdaSolution {
    pub l: [BigInt; 4],
    pub mu: BigInt,
    pub modulus: Option<BigInt>,
}

impl LambdaSolution {
    /// Re-checks the defining combination by exact multiplication.
    pub fn verify(&self, sys: &LinearSystem) -> bool {
        let res = sys.residual(&self.l, &self.mu);
        match &self.modulus {
            Some(m) => res.iter().all(|v| (v % m).is_zero()),
            None => res.iter().all(|v| v.is_zero()),
        }
    }
}

/// `|det(c_1..c_4, u)|`: for genuine inputs a nonzero multiple of p, save
/// for the rare rational configurations where it vanishes.
pub fn initial_modulus(sys: &LinearSystem) -> BigInt {
    sys.square_system().det_bareiss().magnitude().clone().into()
}

/// Removes the primes the determinant picks up through its three linear
/// factors.  As a polynomial in the revealed values,
///
///   det(c_1..c_4, u) = -8 (x_2-x_5)(x_2-x_6)(x_3-x_6) Q(x_1..x_7)
///
/// with Q irreducible of degree 4, and only Q can carry the true prime:
/// the revealed values are distinct residues in [0, p), so each difference
/// lies in (-p, p) and is nonzero.  Primes entering through a difference
/// factor usually come with a fully consistent parasitic solution that the
/// square-relation check cannot reject, so they are cut out here instead.
pub fn strip_structural_factors(input: &AttackInput, m: &BigInt) -> BigInt {
    let x = input.values();
    let mut m = m.clone();
    for (i, j) in [(1, 4), (1, 5), (2, 5)] {
        let diff = &x[i] - &x[j];
        m = nt::coprime_part(&m, &diff);
    }
    m
}

/// Shrinks `m` until the lead columns are independent modulo every divisor:
/// any kernel vector of (c_1..c_4) mod m has its gcd with m taken out.
/// Each pass strictly decreases m, so the loop terminates.
pub fn reduce_dependencies(sys: &LinearSystem, m: &BigInt) -> Result<BigInt, AttackError> {
    let six = BigInt::from(6);
    let lead = sys.lead_columns();
    let mut m = m.clone();
    loop {
        if m < BigInt::from(2) {
            return Err(inconsistent(Stage::DependencyReduction));
        }
        match kernel_vector_mod(&lead, &m) {
            KernelOutcome::FullRank => return Ok(m),
            KernelOutcome::Vector(v) => {
                m = nt::coprime_part(&nt::gcd_many(&m, &v), &six);
            }
        }
    }
}

/// Finds the column weights modulo `m` and normalizes the scale to 1.
///
/// A kernel vector of the square system (c_1..c_4, u) mod m is read off a
/// column of its adjugate (every column works modulo m because m divides
/// the determinant), falling back to the invariant-factor kernel when no
/// adjugate column has a unit scale component.  The adjugate shortcut is
/// only accepted with an invertible scale: a nonzero column whose scale
/// shares a factor with m could otherwise cost the very factor p the
/// pipeline exists to keep.  The scale is then inverted away so mu = 1,
/// and the combination is re-verified by multiplication.
pub fn solve_lambda_mod(
    sys: &LinearSystem,
    m: &BigInt,
) -> Result<(LambdaSolution, BigInt), AttackError> {
    let square = sys.square_system();
    let mut kernel: Option<Vec<BigInt>> = None;
    let adj = square.adjugate();
    for j in 0..5 {
        let cand: Vec<BigInt> = (0..5).map(|i| nt::mod_reduce(&adj[(i, j)], m)).collect();
        if cand.iter().all(|v| v.is_zero()) {
            continue;
        }
        let mu = nt::mod_reduce(&-&cand[4], m);
        if nt::gcd(&mu, m).is_one() {
            kernel = Some(cand);
            break;
        }
    }
    let v = match kernel {
        Some(v) => v,
        None => match kernel_vector_mod(&square, m) {
            KernelOutcome::Vector(v) => v,
            KernelOutcome::FullRank => return Err(inconsistent(Stage::LambdaSolve)),
        },
    };

    let mu_raw = nt::mod_reduce(&-&v[4], m);
    let m = nt::coprime_part(m, &mu_raw);
    if m < BigInt::from(2) {
        return Err(inconsistent(Stage::LambdaSolve));
    }
    let mu_inv = match nt::mod_inv(&mu_raw, &m) {
        Ok(inv) => inv,
        Err(_) => return Err(inconsistent(Stage::LambdaSolve)),
    };
    let l = [
        nt::mod_reduce(&(&v[0] * &mu_inv), &m),
        nt::mod_reduce(&(&v[1] * &mu_inv), &m),
        nt::mod_reduce(&(&v[2] * &mu_inv), &m),
        nt::mod_reduce(&(&v[3] * &mu_inv), &m),
    ];
    let solution = LambdaSolution {
        l,
        mu: BigInt::one(),
        modulus: Some(m.clone()),
    };
    if !solution.verify(sys) {
        debug_assert!(false, "rescaled kernel vector must satisfy the system");
        return Err(inconsistent(Stage::LambdaSolve));
    }
    Ok((solution, m))
}

/// The solution must satisfy `l_1^2 = l_2`; when it does not, the part of m
/// where the relation fails is cut away.
pub fn enforce_quadratic(l1: &BigInt, l2: &BigInt, m: &BigInt) -> Result<BigInt, AttackError> {
    let gap = l1 * l1 - l2;
    if (&gap % m).is_zero() {
        return Ok(m.clone());
    }
    let m = nt::coprime_part(&nt::gcd(m, &gap), &BigInt::from(6));
    if m < BigInt::from(2) {
        return Err(inconsistent(Stage::QuadraticCheck));
    }
    Ok(m)
}

/// Reads the generator parameters out of the weights:
/// `x_G = l_1`, `A = l_3`, `B = (l_4 - l_1 l_3)/2`,
/// `y_G^2 = l_1^3 + (l_4 + l_1 l_3)/2`, all mod m (odd, so /2 exists).
pub fn extract_params(lambda: &LambdaSolution, m: &BigInt) -> XSequenceModel {
    let ring = RingSpec::residue_ring(m.clone()).expect("pipeline keeps gcd(m, 6) = 1");
    let inv2 = nt::mod_inv(&BigInt::from(2), m).expect("m is odd");
    let [l1, _, l3, l4] = &lambda.l;
    let cross = l1 * l3;
    let x_g = ring.from_bigint(l1);
    let a = ring.from_bigint(l3);
    let b = ring.from_bigint(&((l4 - &cross) * &inv2));
    let y_g2 = ring.from_bigint(&(l1 * l1 * l1 + (l4 + &cross) * &inv2));
    XSequenceModel::new(ring, x_g, y_g2, a, b)
}

/// Either a finished rational-branch model or a nonzero modulus handed back
/// to the modular pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RationalOutcome {
    Model(RecoveredModel),
    ContinueModular(BigInt),
}

/// The vanishing-determinant branch: the square system is rank-deficient
/// over the integers, so it has an exact kernel vector (l_1..l_4, -mu),
/// taken primitive with mu > 0.  The relation `l_1^2 = l_2 mu` either holds
/// exactly, yielding a curve over the rationals with `x_G = l_1/mu`, or its
/// defect `|l_1^2 - l_2 mu| / gcd(l_1^2, mu)` re-seeds the modular pipeline.
pub fn solve_rational(sys: &LinearSystem) -> Result<RationalOutcome, AttackError> {
    let square = sys.square_system();
    let snf = square.smith_normal_form();
    let mut choice: Option<Vec<BigInt>> = None;
    for j in 0..5 {
        if !snf.s[(j, j)].is_zero() {
            continue;
        }
        let col = snf.v.column(j);
        let has_scale = !col[4].is_zero();
        if choice.is_none() || has_scale {
            choice = Some(col);
            if has_scale {
                break;
            }
        }
    }
    let Some(mut v) = choice else {
        debug_assert!(false, "a singular matrix has a kernel column");
        return Err(inconsistent(Stage::RationalSolve));
    };
    if v[4].is_zero() {
        return Err(inconsistent(Stage::RationalSolve));
    }
    let g = nt::gcd_many(&v[0], &v[1..]);
    if !g.is_one() {
        for e in &mut v {
            *e /= &g;
        }
    }
    if v[4].is_positive() {
        for e in &mut v {
            *e = -&*e;
        }
    }
    let mu = -&v[4];
    let l = [v[0].clone(), v[1].clone(), v[2].clone(), v[3].clone()];
    let solution = LambdaSolution {
        l: l.clone(),
        mu: mu.clone(),
        modulus: None,
    };
    if !solution.verify(sys) {
        debug_assert!(false, "integer kernel vector must satisfy the system");
        return Err(inconsistent(Stage::RationalSolve));
    }

    let l1sq = &l[0] * &l[0];
    let defect = &l1sq - &l[1] * &mu;
    if !defect.is_zero() {
        let m: BigInt = (defect.magnitude() / nt::gcd(&l1sq, &mu).magnitude()).into();
        let m = nt::coprime_part(&m, &BigInt::from(6));
        if m < BigInt::from(2) {
            return Err(inconsistent(Stage::RationalSolve));
        }
        return Ok(RationalOutcome::ContinueModular(m));
    }

    let rat = |n: &BigInt, d: &BigInt| BigRational::new(n.clone(), d.clone());
    let two_mu = BigInt::from(2) * &mu;
    let mu_sq2 = BigInt::from(2) * &mu * &mu;
    let x_g = rat(&l[0], &mu);
    let a = rat(&l[2], &mu);
    let half4 = rat(&l[3], &two_mu);
    let cross = rat(&(&l[0] * &l[2]), &mu_sq2);
    let b = &half4 - &cross;
    let y_g2 = &x_g * &x_g * &x_g + &half4 + &cross;
    let ring = RingSpec::rationals();
    let params = XSequenceModel::new(
        ring.clone(),
        Coord::Rat(x_g),
        Coord::Rat(y_g2),
        Coord::Rat(a),
        Coord::Rat(b),
    );
    Ok(RationalOutcome::Model(RecoveredModel::Rational {
        params,
        mu,
    }))
}

/// What the recovery hands back: a model over Z_m with m a multiple of the
/// secret prime, or (for degenerate integer data) a model over the
/// rationals together with the kernel scale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "branch", rename_all = "snake_case")]
pub enum RecoveredModel {
    Modular {
        #[serde(with = "crate::jsonio::dec")]
        m: BigInt,
        params: XSequenceModel,
    },
    Rational {
        params: XSequenceModel,
        #[serde(with = "crate::jsonio::dec")]
        mu: BigInt,
    },
}

impl RecoveredModel {
    pub fn params(&self) -> &XSequenceModel {
        match self {
            RecoveredModel::Modular { params, .. } => params,
            RecoveredModel::Rational { params, .. } => params,
        }
    }

    pub fn modulus(&self) -> Option<&BigInt> {
        match self {
            RecoveredModel::Modular { m, .. } => Some(m),
            RecoveredModel::Rational { .. } => None,
        }
    }

    /// Checks the wire-level invariants after deserialization: the stored
    /// modulus must match the parameter ring.
    pub fn validate(&self) -> bool {
        match self {
            RecoveredModel::Modular { m, params } => params.ring.modulus() == Some(m),
            RecoveredModel::Rational { params, mu } => {
                params.ring == RingSpec::Rationals && mu.is_positive()
            }
        }
    }
}

/// Full recovery from one window: build the system, seed the modulus from
/// the determinant (or take the rational branch), cut the determinant's
/// structural difference factors, strip column
/// dependencies, solve for the weights, enforce the square relation
/// (re-solving under the shrunken modulus until it holds), and read off the
/// parameters.  The final modulus must exceed every revealed value, since
/// the true prime does.
pub fn attack(input: &AttackInput) -> Result<RecoveredModel, AttackError> {
    let sys = build_system(input);
    let m0 = initial_modulus(&sys);
    let seed = if m0.is_zero() {
        match solve_rational(&sys)? {
            RationalOutcome::Model(model) => return Ok(model),
            RationalOutcome::ContinueModular(m) => m,
        }
    } else {
        let m = nt::coprime_part(&m0, &BigInt::from(6));
        if m < BigInt::from(2) {
            return Err(inconsistent(Stage::ModulusNormalization));
        }
        m
    };
    let seed = strip_structural_factors(input, &seed);
    if seed < BigInt::from(2) {
        return Err(inconsistent(Stage::ModulusNormalization));
    }

    let mut m = reduce_dependencies(&sys, &seed)?;
    let lambda = loop {
        let (lambda, m_solved) = solve_lambda_mod(&sys, &m)?;
        m = m_solved;
        let m_squared = enforce_quadratic(&lambda.l[0], &lambda.l[1], &m)?;
        if m_squared == m {
            break lambda;
        }
        m = reduce_dependencies(&sys, &m_squared)?;
    };

    if m <= *input.max_value() {
        return Err(inconsistent(Stage::Plausibility));
    }
    let params = extract_params(&lambda, &m);
    Ok(RecoveredModel::Modular { m, params })
}

/// Folds the models of overlapping windows into one: the gcd of all moduli
/// and of every parameter difference against the first window is still a
/// multiple of p, and usually equals it.  Models from different branches do
/// not mix.
pub fn refine_windows(models: &[RecoveredModel]) -> Result<RecoveredModel, AttackError> {
    let Some((first, rest)) = models.split_first() else {
        return Err(inconsistent(Stage::WindowRefinement));
    };
    let modular = models
        .iter()
        .filter(|m| matches!(m, RecoveredModel::Modular { .. }))
        .count();
    if modular == 0 {
        if rest.iter().all(|m| m == first) {
            return Ok(first.clone());
        }
        return Err(inconsistent(Stage::WindowRefinement));
    }
    if modular != models.len() {
        return Err(AttackError::MixedBranch);
    }

    let RecoveredModel::Modular { m: m1, params: p1 } = first else {
        unreachable!("counted above");
    };
    let mut acc = m1.clone();
    for model in rest {
        let RecoveredModel::Modular { m: mk, params: pk } = model else {
            unreachable!("counted above");
        };
        let diffs = [
            mk.clone(),
            p1.x_g.as_int() - pk.x_g.as_int(),
            p1.a.as_int() - pk.a.as_int(),
            p1.b.as_int() - pk.b.as_int(),
            p1.y_g2.as_int() - pk.y_g2.as_int(),
        ];
        acc = nt::gcd_many(&acc, &diffs);
    }
    acc = nt::coprime_part(&acc, &BigInt::from(6));
    if acc < BigInt::from(2) {
        return Err(inconsistent(Stage::WindowRefinement));
    }
    let ring = RingSpec::residue_ring(acc.clone()).expect("gcd(m, 6) = 1");
    let params = XSequenceModel::new(
        ring,
        p1.x_g.clone(),
        p1.y_g2.clone(),
        p1.a.clone(),
        p1.b.clone(),
    );
    Ok(RecoveredModel::Modular { m: acc, params })
}

/// True when all four parameters of the two models agree modulo `modulus`.
/// Rational coordinates are reduced by inverting their denominators, and a
/// non-invertible denominator counts as disagreement.
pub fn params_congruent(a: &XSequenceModel, b: &XSequenceModel, modulus: &BigInt) -> bool {
    let Ok(target) = RingSpec::prime_field(modulus.clone()) else {
        return false;
    };
    let project = |ring: &RingSpec, c: &Coord| crate::curve::reduce_coord(ring, c, &target).ok();
    let pairs = [
        (&a.x_g, &b.x_g),
        (&a.y_g2, &b.y_g2),
        (&a.a, &b.a),
        (&a.b, &b.b),
    ];
    pairs.iter().all(|(ca, cb)| {
        match (project(&a.ring, ca), project(&b.ring, cb)) {
            (Some(ra), Some(rb)) => ra == rb,
            _ => false,
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RecoverError {
    #[error("point recovery requires a modular model")]
    NotModular,
    #[error("point recovery requires a prime modulus")]
    NotPrime,
    #[error("the recovered coefficients describe a singular curve (gcd {g})")]
    SingularModel { g: BigInt },
    #[error("the model violates its own defining identities")]
    InvalidModel,
    #[error("a required square root does not exist modulo m")]
    NoSquareRoot,
    #[error("no sign assignment of the square roots links x1 to x2")]
    SignSearch,
}

/// The secret points, lifted from a model whose modulus is the prime itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveredPoints {
    pub curve: Curve,
    pub g: Point,
    pub w1: Point,
    pub w0: Point,
}

/// Lifts y-coordinates for an exact-recovery model: square roots of
/// `y_G^2` and of the curve equation at x_1 exist mod a prime m, and the
/// sign pair is fixed by requiring x(W_1 + G) = x_2.  W_0 = W_1 - G then
/// rebuilds the generator.  Composite m is refused: that would need the
/// factorization of m.
pub fn recover_points<R: rand::Rng + ?Sized>(
    model: &RecoveredModel,
    x1: &BigInt,
    x2: &BigInt,
    rng: &mut R,
) -> Result<RecoveredPoints, RecoverError> {
    let RecoveredModel::Modular { m, params } = model else {
        return Err(RecoverError::NotModular);
    };
    if !nt::is_probable_prime(m, nt::DEFAULT_MR_ROUNDS, rng) {
        return Err(RecoverError::NotPrime);
    }
    let ring = RingSpec::prime_field(m.clone()).expect("prime with gcd(m, 6) = 1");
    let a = ring.from_bigint(params.a.as_int());
    let b = ring.from_bigint(params.b.as_int());
    let curve = Curve::new(ring.clone(), a, b).map_err(|e| match e {
        crate::curve::CurveError::Singular { g } => RecoverError::SingularModel { g },
        crate::curve::CurveError::OffCurve => RecoverError::InvalidModel,
    })?;

    let x_g = ring.from_bigint(params.x_g.as_int());
    let y_g2 = ring.from_bigint(params.y_g2.as_int());
    if curve.rhs(&x_g) != y_g2 {
        return Err(RecoverError::InvalidModel);
    }
    let y_g = nt::sqrt_mod_prime(y_g2.as_int(), m).map_err(|_| RecoverError::NoSquareRoot)?;
    let x1c = ring.from_bigint(x1);
    let rhs1 = curve.rhs(&x1c);
    let y1 = nt::sqrt_mod_prime(rhs1.as_int(), m).map_err(|_| RecoverError::NoSquareRoot)?;
    let x2c = ring.from_bigint(x2);

    let mut g_signs = vec![ring.from_bigint(&y_g)];
    if !y_g.is_zero() {
        g_signs.push(ring.neg(&g_signs[0]));
    }
    let mut w_signs = vec![ring.from_bigint(&y1)];
    if !y1.is_zero() {
        w_signs.push(ring.neg(&w_signs[0]));
    }
    for gy in &g_signs {
        let g_pt = curve
            .point(x_g.clone(), gy.clone())
            .expect("y solves the curve equation");
        for wy in &w_signs {
            let w1 = curve
                .point(x1c.clone(), wy.clone())
                .expect("y solves the curve equation");
            let sum = curve
                .add(&w1, &g_pt)
                .expect("prime-field addition cannot fail");
            if !sum.is_infinity() && *sum.x() == x2c {
                let w0 = curve
                    .sub_points(&w1, &g_pt)
                    .expect("prime-field addition cannot fail");
                return Ok(RecoveredPoints {
                    curve,
                    g: g_pt,
                    w1,
                    w0,
                });
            }
        }
    }
    Err(RecoverError::SignSearch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{random_instance_mod, GeneratorInstance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn bi(v: i64) -> BigInt {
        BigInt::from(v)
    }

    fn bvec(vals: &[i64]) -> Vec<BigInt> {
        vals.iter().map(|&v| bi(v)).collect()
    }

    /// A deterministic 1009-instance whose first 8 states avoid infinity
    /// and +/-G, with pairwise distinct values in both 7-windows and a
    /// 27-step orbit clear of infinity.
    fn clean_1009_instance() -> (GeneratorInstance, Vec<BigInt>) {
        let p = bi(1009);
        for seed in 0.. {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let inst = random_instance_mod(&p, &mut rng);
            let report = inst.emit_sequence(27);
            if report.values.len() < 27 {
                continue;
            }
            if !report.flags.iter().take(8).all(|f| !f.hit_plus_minus_g) {
                continue;
            }
            let w = &report.values[..8];
            let distinct =
                (0..8).all(|i| (0..i).all(|j| w[i] != w[j]));
            if distinct {
                return (inst, report.values);
            }
        }
        unreachable!()
    }

    #[test]
    fn input_validation_rejects_malformed_windows() {
        assert_eq!(
            AttackInput::new(bvec(&[1, 2, 3])).unwrap_err(),
            AttackError::WrongLength { got: 3 }
        );
        assert_eq!(
            AttackInput::new(bvec(&[1, 2, 3, 4, 5, 6, -7])).unwrap_err(),
            AttackError::NegativeInput
        );
        assert_eq!(
            AttackInput::new(bvec(&[1, 2, 3, 4, 5, 6, 1])).unwrap_err(),
            AttackError::DistinctnessViolation
        );
        assert_eq!(
            AttackInput::windows(&bvec(&[1, 2, 3, 4, 5, 6, 7, 8]))
                .unwrap()
                .len(),
            2
        );
    }

    #[test]
    fn frozen_system_for_consecutive_integers() {
        let input = AttackInput::new(bvec(&[1, 2, 3, 4, 5, 6, 7])).unwrap();
        let sys = build_system(&input);
        let row0: Vec<BigInt> = (0..6).map(|j| sys.matrix()[(0, j)].clone()).collect();
        assert_eq!(row0, bvec(&[24, 0, 4, 2, 2, -2]));
        assert_eq!(sys.rhs()[0], bi(16));
        let row4: Vec<BigInt> = (0..6).map(|j| sys.matrix()[(4, j)].clone()).collect();
        assert_eq!(row4, bvec(&[216, 0, 12, 2, 2, -2]));
        assert_eq!(sys.rhs()[4], bi(432));
        assert_eq!(initial_modulus(&sys), BigInt::ZERO);
    }

    #[test]
    fn arithmetic_progressions_are_rejected_as_inconsistent() {
        // x_{i-1} + x_{i+1} = 2 x_i kills column 2, and the only kernel
        // direction of the square system has zero scale.
        let input = AttackInput::new(bvec(&[1, 2, 3, 4, 5, 6, 7])).unwrap();
        assert_eq!(
            attack(&input).unwrap_err(),
            AttackError::InconsistentInput {
                stage: Stage::RationalSolve
            }
        );
    }

    #[test]
    fn true_parameters_solve_the_system_mod_p() {
        let (inst, values) = clean_1009_instance();
        let input = AttackInput::new(values[..7].to_vec()).unwrap();
        let sys = build_system(&input);
        let p = inst.modulus().clone();
        let x_g = inst.composer().x().as_int().clone();
        let y_g = inst.composer().y().as_int().clone();
        let a = inst.curve().a().as_int().clone();
        let b = inst.curve().b().as_int().clone();
        // e = (x_G, x_G^2, A, B + y_G^2 - x_G^3) against scale 1.
        let l4 = &b + &y_g * &y_g - &x_g * &x_g * &x_g;
        let sol = LambdaSolution {
            l: [x_g.clone(), &x_g * &x_g, a, l4],
            mu: BigInt::one(),
            modulus: Some(p.clone()),
        };
        assert!(sol.verify(&sys));
        assert!((initial_modulus(&sys) % &p).is_zero());
    }

    #[test]
    fn structural_strip_cuts_difference_primes_and_spares_the_prime() {
        // x_2 - x_5 = 14, x_2 - x_6 = -20, x_3 - x_6 = -30.
        let input = AttackInput::new(bvec(&[10, 30, 20, 40, 16, 50, 60])).unwrap();
        let m = bi(1009 * 7 * 5);
        assert_eq!(strip_structural_factors(&input, &m), bi(1009));
        // Factors outside the three differences stay.
        assert_eq!(strip_structural_factors(&input, &bi(1009 * 11)), bi(1009 * 11));
        // A genuine window never loses its prime: the values are distinct
        // residues in [0, p), so no difference is divisible by p.
        let (inst, values) = clean_1009_instance();
        let input = AttackInput::new(values[..7].to_vec()).unwrap();
        let stripped = strip_structural_factors(&input, &(inst.modulus() * bi(14)));
        assert!((&stripped % inst.modulus()).is_zero());
    }

    #[test]
    fn attack_on_a_genuine_instance_keeps_the_prime() {
        let (inst, values) = clean_1009_instance();
        let p = inst.modulus().clone();
        let input = AttackInput::new(values[..7].to_vec()).unwrap();
        let model = attack(&input).unwrap();
        let RecoveredModel::Modular { m, params } = &model else {
            panic!("genuine inputs recover a modular model");
        };
        assert!((m % &p).is_zero());
        assert!(params_congruent(params, &inst.true_model(), &p));

        // Reduced to the true prime, the model predicts the clean window.
        let pring = RingSpec::prime_field(p.clone()).unwrap();
        let reduced = XSequenceModel::new(
            pring.clone(),
            pring.from_bigint(params.x_g.as_int()),
            pring.from_bigint(params.y_g2.as_int()),
            pring.from_bigint(params.a.as_int()),
            pring.from_bigint(params.b.as_int()),
        );
        let run = reduced.predict_run_ints(&values[0], &values[1], 7);
        assert!(run.completed());
        for (i, pred) in run.values.iter().enumerate() {
            assert_eq!(pred.as_int(), &values[i + 2]);
        }
    }

    #[test]
    fn exact_recovery_rebuilds_the_generator() {
        // Scan deterministic instances until one recovers m = p exactly,
        // then lift the points and regenerate the stream.
        let p = bi(1009);
        let mut rng = ChaCha20Rng::seed_from_u64(424242);
        for _ in 0..200 {
            let inst = random_instance_mod(&p, &mut rng);
            let report = inst.emit_sequence(9);
            if !report.clean_prefix(7) {
                continue;
            }
            let input = AttackInput::new(report.values[..7].to_vec()).unwrap();
            let Ok(model) = attack(&input) else { continue };
            if model.modulus() != Some(&p) {
                continue;
            }
            let pts = recover_points(&model, &report.values[0], &report.values[1], &mut rng)
                .expect("prime modulus with genuine data");
            let rebuilt = GeneratorInstance::new(pts.curve.clone(), pts.g, pts.w0)
                .expect("recovered points form an instance");
            let regen = rebuilt.emit_sequence(report.values.len());
            assert_eq!(regen.values, report.values);
            return;
        }
        panic!("no exact recovery among 200 deterministic candidates");
    }

    #[test]
    fn refine_windows_folds_overlapping_models() {
        let (inst, values) = clean_1009_instance();
        let p = inst.modulus().clone();
        let w1 = AttackInput::new(values[..7].to_vec()).unwrap();
        let w2 = AttackInput::new(values[1..8].to_vec()).unwrap();
        let m1 = attack(&w1).unwrap();
        let m2 = attack(&w2).unwrap();
        let g = nt::gcd(m1.modulus().unwrap(), m2.modulus().unwrap());
        let refined = refine_windows(&[m1.clone(), m2]).unwrap();
        let RecoveredModel::Modular { m, params } = &refined else {
            panic!("modular fold");
        };
        assert!((m % &p).is_zero());
        assert!((&g % m).is_zero());
        assert!(params_congruent(params, &inst.true_model(), &p));
        let alone = refine_windows(&[m1.clone()]).unwrap();
        assert_eq!(alone, m1);
    }

    #[test]
    fn refine_windows_refuses_mixed_branches() {
        let ring = RingSpec::residue_ring(bi(35)).unwrap();
        let modular = RecoveredModel::Modular {
            m: bi(35),
            params: XSequenceModel::new(
                ring.clone(),
                ring.int(1),
                ring.int(2),
                ring.int(3),
                ring.int(4),
            ),
        };
        let q = RingSpec::rationals();
        let rational = RecoveredModel::Rational {
            params: XSequenceModel::new(q.clone(), q.int(1), q.int(2), q.int(3), q.int(4)),
            mu: bi(1),
        };
        assert_eq!(
            refine_windows(&[modular.clone(), rational.clone()]).unwrap_err(),
            AttackError::MixedBranch
        );
        assert_eq!(
            refine_windows(&[rational.clone(), rational.clone()]).unwrap(),
            rational
        );
        assert_eq!(
            refine_windows(&[modular.clone(), modular.clone()]).unwrap(),
            modular
        );
    }

    #[test]
    fn dependency_reduction_strips_the_defective_factor() {
        // c_4 = c_3 + 7*delta makes the columns dependent mod 7 but not
        // mod 11; reducing from 77 must land on 11.
        let c1 = bvec(&[3, 1, 4, 1, 5]);
        let c2 = bvec(&[9, 2, 6, 5, 3]);
        let c3 = bvec(&[5, 8, 9, 7, 9]);
        let c4: Vec<BigInt> = c3
            .iter()
            .zip(bvec(&[1, 0, 2, 4, 3]))
            .map(|(a, d)| a + bi(7) * d)
            .collect();
        let sys = LinearSystem::from_columns([c1, c2, c3, c4], bvec(&[1, 2, 3, 4, 5]));
        let m = reduce_dependencies(&sys, &bi(77)).unwrap();
        assert_eq!(m, bi(11));
    }

    #[test]
    fn enforce_quadratic_frozen_cases() {
        assert_eq!(enforce_quadratic(&bi(3), &bi(9), &bi(1000003)).unwrap(), bi(1000003));
        assert_eq!(
            enforce_quadratic(&bi(2), &bi(5), &bi(15)).unwrap_err(),
            AttackError::InconsistentInput {
                stage: Stage::QuadraticCheck
            }
        );
        assert_eq!(enforce_quadratic(&bi(2), &bi(39), &bi(385)).unwrap(), bi(35));
    }

    #[test]
    fn planted_exact_solution_recovers_rationally() {
        // u = 2 c_1 + 4 c_2 + 3 c_3 + 5 c_4 with scale 1: the determinant
        // vanishes and the branch must return x_G = 2, A = 3,
        // B = 5/2 - 3, y2 = 8 + 5/2 + 3.
        let c1 = bvec(&[2, 7, 1, 8, 2]);
        let c2 = bvec(&[8, 1, 8, 2, 8]);
        let c3 = bvec(&[4, 5, 9, 0, 4]);
        let c4 = bvec(&[5, 2, 3, 6, 0]);
        let u: Vec<BigInt> = (0..5)
            .map(|r| bi(2) * &c1[r] + bi(4) * &c2[r] + bi(3) * &c3[r] + bi(5) * &c4[r])
            .collect();
        let sys = LinearSystem::from_columns([c1, c2, c3, c4], u);
        assert!(initial_modulus(&sys).is_zero());
        let RationalOutcome::Model(RecoveredModel::Rational { params, mu }) =
            solve_rational(&sys).unwrap()
        else {
            panic!("exact plant stays rational");
        };
        assert_eq!(mu, bi(1));
        let q = RingSpec::rationals();
        assert_eq!(params.x_g, q.int(2));
        assert_eq!(params.a, q.int(3));
        assert_eq!(params.b, q.rational(&bi(-1), &bi(2)));
        assert_eq!(params.y_g2, q.rational(&bi(27), &bi(2)));
    }

    #[test]
    fn planted_scaled_solution_normalizes_the_kernel() {
        // Scale 2 with l = (6, 18, 3, 7): l_1^2 = 36 = l_2 mu keeps the
        // branch rational, and parity of c_3 + c_4 keeps u integral.
        let c1 = bvec(&[3, 1, 4, 1, 5]);
        let c2 = bvec(&[2, 7, 1, 8, 2]);
        let c3 = bvec(&[3, 5, 7, 9, 1]);
        let c4 = bvec(&[5, 3, 1, 7, 9]);
        let u: Vec<BigInt> = (0..5)
            .map(|r| (bi(6) * &c1[r] + bi(18) * &c2[r] + bi(3) * &c3[r] + bi(7) * &c4[r]) / bi(2))
            .collect();
        let sys = LinearSystem::from_columns([c1, c2, c3, c4], u);
        assert!(initial_modulus(&sys).is_zero());
        let RationalOutcome::Model(RecoveredModel::Rational { params, mu }) =
            solve_rational(&sys).unwrap()
        else {
            panic!("exact plant stays rational");
        };
        assert_eq!(mu, bi(2));
        let q = RingSpec::rationals();
        assert_eq!(params.x_g, q.int(3));
        assert_eq!(params.a, q.rational(&bi(3), &bi(2)));
    }

    #[test]
    fn junk_inputs_terminate_with_typed_results() {
        use num_bigint::RandBigInt;
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let bound = BigInt::from(1u64 << 40);
        for _ in 0..25 {
            let mut vals: Vec<BigInt> = Vec::new();
            while vals.len() < 7 {
                let v = rng.gen_bigint_range(&BigInt::ZERO, &bound);
                if !vals.contains(&v) {
                    vals.push(v);
                }
            }
            let input = AttackInput::new(vals).unwrap();
            match attack(&input) {
                Ok(model) => assert!(model.validate()),
                Err(AttackError::InconsistentInput { .. }) => {}
                Err(other) => panic!("unexpected error class: {other:?}"),
            }
        }
    }

    #[test]
    fn recover_points_rejects_composite_and_rational_models() {
        let ring = RingSpec::residue_ring(bi(35)).unwrap();
        let model = RecoveredModel::Modular {
            m: bi(35),
            params: XSequenceModel::new(
                ring.clone(),
                ring.int(1),
                ring.int(2),
                ring.int(3),
                ring.int(4),
            ),
        };
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        assert_eq!(
            recover_points(&model, &bi(1), &bi(2), &mut rng).unwrap_err(),
            RecoverError::NotPrime
        );
        let q = RingSpec::rationals();
        let rational = RecoveredModel::Rational {
            params: XSequenceModel::new(q.clone(), q.int(1), q.int(2), q.int(3), q.int(4)),
            mu: bi(1),
        };
        assert_eq!(
            recover_points(&rational, &bi(1), &bi(2), &mut rng).unwrap_err(),
            RecoverError::NotModular
        );
    }

    #[test]
    fn recovered_model_serde_round_trips() {
        let (_, values) = clean_1009_instance();
        let input = AttackInput::new(values[..7].to_vec()).unwrap();
        let model = attack(&input).unwrap();
        let text = serde_json::to_string(&model).unwrap();
        assert!(text.contains("\"branch\":\"modular\""));
        let back: RecoveredModel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, model);
        assert!(back.validate());
    }
}
